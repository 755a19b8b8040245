mod common;

use common::{dual_frequency, random_geometry, TableOracle, SHAPES};
use leonet_core::estimability::{
    assemble_design, build_sbasis, deficiency_count, reduce, PivotChoice, PivotRules, TableRow,
};
use leonet_core::linalg::{nullity, Vector};
use leonet_core::observation::{sample_truth, NoiseSpec, TruthSpec};
use proptest::prelude::*;

fn geometry_strategy() -> impl Strategy<Value = (usize, f64, f64, f64)> {
    (0..SHAPES.len(), 30.0..100.0f64, 0.0..20_000.0f64, 0.0..6.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn null_space_is_annihilated((shape, inc, epoch, raan) in geometry_strategy()) {
        let (l, p) = SHAPES[shape];
        let geo = random_geometry(l, p, inc, epoch, raan);
        let plan = dual_frequency();
        let d = assemble_design(&geo, &plan).unwrap();
        let basis = match build_sbasis(&d.layout, &plan, &PivotRules::default()) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let av = d.a.mul_sparse(&basis.v);
        prop_assert!(av.max_abs() <= 1e-9 * d.a.max_abs());
        prop_assert_eq!(basis.deficiency(), deficiency_count(l, geo.satellites(), 2));
    }

    #[test]
    fn transform_matches_closed_form(
        (shape, inc, epoch, raan) in geometry_strategy(),
        seed in any::<u64>(),
        highest in any::<bool>(),
    ) {
        let (l, p) = SHAPES[shape];
        let geo = random_geometry(l, p, inc, epoch, raan);
        let plan = dual_frequency();
        let d = assemble_design(&geo, &plan).unwrap();
        let choice = if highest { PivotChoice::Highest } else { PivotChoice::Lowest };
        let rules = PivotRules { reference: l - 1, satellite: choice, receiver: choice };
        let basis = match build_sbasis(&d.layout, &plan, &rules) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let mut noise = NoiseSpec::nominal();
        noise.rng_seed = seed;
        let truth = sample_truth(&geo, &plan, &noise, &TruthSpec::default());
        let x = d.layout.raw_vector(&truth);
        let alpha = basis.estimable(&x);
        let oracle = TableOracle::new(&d.layout, &plan, &basis.pivots, &truth);
        let expected = Vector::from_iterator(
            alpha.len(),
            basis.retained.iter().map(|&c| oracle.value(d.layout.param(c))),
        );
        prop_assert!((&alpha - &expected).amax() <= 1e-10 * expected.amax());

        let sx = basis.transform(&x);
        prop_assert!((basis.transform(&sx) - &sx).amax() <= 1e-9 * sx.amax());
    }

    #[test]
    fn fitted_observations_do_not_depend_on_pivots(
        (shape, inc, epoch, raan) in geometry_strategy(),
        seed in any::<u64>(),
    ) {
        let (l, p) = SHAPES[shape];
        let geo = random_geometry(l, p, inc, epoch, raan);
        let plan = dual_frequency();
        let d = assemble_design(&geo, &plan).unwrap();
        let a = PivotRules::default();
        let b = PivotRules { reference: l - 1, satellite: PivotChoice::Highest, receiver: PivotChoice::Highest };
        let (Ok(ba), Ok(bb)) = (build_sbasis(&d.layout, &plan, &a), build_sbasis(&d.layout, &plan, &b)) else {
            return Ok(());
        };
        let mut noise = NoiseSpec::nominal();
        noise.rng_seed = seed;
        let x = d.layout.raw_vector(&sample_truth(&geo, &plan, &noise, &TruthSpec::default()));
        let ya = d.a.mul_vec(&ba.transform(&x));
        let yb = d.a.mul_vec(&bb.transform(&x));
        let y = d.a.mul_vec(&x);
        prop_assert!((&ya - &y).amax() <= 1e-9 * y.amax());
        prop_assert!((&yb - &y).amax() <= 1e-9 * y.amax());
    }
}

// Three nodes in one ring share too few satellites: single-observer
// satellites absorb the code information their positions need, and the
// nullity exceeds the formula. From four nodes on the count is exact.
#[test]
fn rank_law_on_well_observed_shells() {
    let plan = dual_frequency();
    for (l, p) in [(4, 1), (5, 1), (6, 2), (8, 2)] {
        let geo = random_geometry(l, p, 53.0, 0.0, 0.0);
        let d = assemble_design(&geo, &plan).unwrap();
        let basis = build_sbasis(&d.layout, &plan, &PivotRules::default()).unwrap();
        assert_eq!(nullity(&d.a.to_dense()), deficiency_count(l, geo.satellites(), 2), "L = {l}");
        let model = reduce(&d, &basis).unwrap();
        assert_eq!(model.rank(), d.layout.n() - deficiency_count(l, geo.satellites(), 2));
    }
}

#[test]
fn reference_clock_has_no_estimable_entry() {
    let geo = random_geometry(4, 2, 53.0, 0.0, 0.0);
    let plan = dual_frequency();
    let d = assemble_design(&geo, &plan).unwrap();
    let basis = build_sbasis(&d.layout, &plan, &PivotRules { reference: 2, ..Default::default() }).unwrap();
    let model = reduce(&d, &basis).unwrap();
    let clocks: Vec<usize> = model
        .labels
        .iter()
        .filter(|lab| lab.row == TableRow::ReceiverClock)
        .map(|lab| lab.param.node().unwrap())
        .collect();
    assert_eq!(clocks, vec![0, 1, 3]);
    assert_eq!(model.labels.iter().filter(|lab| lab.row == TableRow::SatelliteClock).count(), geo.satellites());
}
