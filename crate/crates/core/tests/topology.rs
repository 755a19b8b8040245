mod common;

use common::walker;
use leonet_core::constellation::propagate_all;
use leonet_core::topology::{graph_sequence, knn_graph, metropolis, metropolis_row, GraphSnapshot};
use leonet_core::Error;
use nalgebra::Vector3;
use proptest::prelude::*;

fn points() -> impl Strategy<Value = (Vec<Vector3<f64>>, usize)> {
    (4usize..24, 1usize..4).prop_flat_map(|(n, k)| {
        let p = prop::collection::vec((-1e7..1e7f64, -1e7..1e7f64, -1e7..1e7f64), n)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect());
        (p, Just(k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metropolis_is_a_valid_mixing_matrix((pos, k) in points()) {
        let g = match knn_graph(0, &pos, k) {
            Ok(g) => g,
            Err(Error::DisconnectedGraph { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let w = metropolis(&g).to_dense();
        let n = g.nodes();
        for l in 0..n {
            prop_assert!((w.row(l).sum() - 1.0).abs() <= 1e-12);
            prop_assert!((w.column(l).sum() - 1.0).abs() <= 1e-12);
            for q in 0..n {
                prop_assert_eq!(w[(l, q)], w[(q, l)]);
                prop_assert!(w[(l, q)] >= 0.0);
                if l != q && !g.neighbors[l].contains(&q) {
                    prop_assert_eq!(w[(l, q)], 0.0);
                }
            }
        }
        prop_assert!(metropolis(&g).second_singular_value() < 1.0 - 1e-9);
    }

    #[test]
    fn every_node_keeps_its_k_nearest((pos, k) in points()) {
        if let Ok(g) = knn_graph(0, &pos, k) {
            for l in 0..pos.len() {
                prop_assert!(g.degree(l) >= k);
                prop_assert!(!g.neighbors[l].contains(&l));
            }
        }
    }

    #[test]
    fn rows_depend_only_on_neighbor_degrees(degrees in prop::collection::vec(1usize..10, 1..8)) {
        let nb: Vec<(usize, usize)> = degrees.iter().enumerate().map(|(i, &d)| (i + 1, d)).collect();
        let row = metropolis_row(0, nb.len(), &nb);
        prop_assert!((row.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(row.iter().all(|e| e.1 > 0.0));
    }
}

#[test]
fn disconnected_graph_names_its_components() {
    let g = GraphSnapshot::from_edges(0, 5, &[(0, 1), (2, 3), (3, 4)]);
    assert_eq!(
        g.ensure_connected(),
        Err(Error::DisconnectedGraph {
            components: vec![vec![0, 1], vec![2, 3, 4]]
        })
    );
    let far = [
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(1e6, 0.0, 0.0),
        Vector3::new(1e6 + 1.0, 0.0, 0.0),
    ];
    assert!(matches!(knn_graph(0, &far, 1), Err(Error::DisconnectedGraph { .. })));
}

#[test]
fn orbiting_shell_yields_distinct_connected_snapshots() {
    let leo = walker(20, 4, 550e3, 53.0, 0.0);
    let graphs = graph_sequence(&leo, 0.0, 1_500.0, 3, 4).unwrap();
    assert_eq!(graphs.len(), 3);
    for (t, g) in graphs.iter().enumerate() {
        assert_eq!(g.index, t);
        g.ensure_connected().unwrap();
        let pos: Vec<_> = propagate_all(&leo, 1_500.0 * t as f64 / 3.0).into_iter().map(|s| s.position).collect();
        assert_eq!(g, &knn_graph(t, &pos, 4).unwrap());
    }
}
