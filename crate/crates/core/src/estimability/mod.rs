//! Network design assembly, the datum (S-basis) machinery and the
//! reduced full-rank model split into node-local and shared blocks.

mod design;
mod layout;
mod model;
mod sbasis;

pub use design::{assemble_design, deficiency_count, DesignSystem};
pub use layout::{ClockParam, EstimableLabel, Param, ParamLayout, TableRow};
pub use model::{check_rank, reduce, s_transform, EstimableModel, EstimableVector, NodeBlock, Partition};
pub use sbasis::{build_sbasis, PivotChoice, PivotRules, Pivots, SBasis};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_walker, epoch_geometry, EpochGeometry, WalkerConfig};
    use crate::linalg::{max_abs, numeric_rank, nullity, Matrix, Vector};
    use crate::observation::{sample_truth, synthesize_epoch, FrequencyPlan, NoiseSpec, TruthSpec};
    use alloc::vec;

    fn desk() -> EpochGeometry {
        let leo = build_walker(&WalkerConfig::leo_desk()).unwrap();
        let gnss = build_walker(&WalkerConfig::gnss()).unwrap();
        epoch_geometry(&leo, &gnss, 0.0, 0.0).unwrap()
    }

    #[test]
    fn deficiency_examples() {
        assert_eq!(deficiency_count(3, 2, 2), 22);
        assert_eq!(deficiency_count(1, 1, 2), 10);
        assert_eq!(deficiency_count(500, 30, 2), 2122);
        // L=2, G=2, F=2 with every link visible
        let lay = ParamLayout::new(2, 2, vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(lay.n(), 12 + 12 + 12 + 4 + 8);
        assert_eq!(lay.n() - deficiency_count(2, 2, 2), 30);
    }

    #[test]
    fn single_link_design() {
        use crate::constellation::{visibility, SatelliteState};
        use nalgebra::Vector3;
        let s = |p| SatelliteState { id: 0, position: p, velocity: Vector3::zeros() };
        let geo = visibility(
            0.0,
            vec![s(Vector3::new(7e6, 0.0, 0.0))],
            vec![s(Vector3::new(2.6e7, 0.0, 0.0))],
            0.0,
        )
        .unwrap();
        let plan = FrequencyPlan::from_frequencies(&[1575.42e6, 1227.60e6]).unwrap();
        let d = assemble_design(&geo, &plan).unwrap();
        assert_eq!(d.a.cols(), 6 + 6 + 6 + 1 + 2);
        let lay = &d.layout;
        for f in 0..2 {
            let ion = lay.iono(0, 0);
            use crate::observation::ObsKind::*;
            assert_eq!(d.a.get(lay.row(0, f, Phase, 0), ion), -plan.mu(f));
            assert_eq!(d.a.get(lay.row(0, f, Code, 0), ion), plan.mu(f));
            assert_eq!(d.a.get(lay.row(0, f, Doppler, 0), ion), 0.0);
            let amb = lay.ambiguity(0, f, 0);
            assert_eq!(d.a.get(lay.row(0, f, Phase, 0), amb), plan.lambda(f));
            assert_eq!(d.a.get(lay.row(0, f, Code, 0), amb), 0.0);
        }
    }

    #[test]
    fn desk_basis_properties() {
        let geo = desk();
        let plan = FrequencyPlan::gps_l1_l2();
        let d = assemble_design(&geo, &plan).unwrap();
        let a = d.a.to_dense();
        let def = deficiency_count(20, 30, 2);
        assert_eq!(nullity(&a), def);
        let basis = build_sbasis(&d.layout, &plan, &PivotRules::default()).unwrap();
        assert_eq!(basis.deficiency(), def);
        assert!(max_abs(&d.a.mul_sparse(&basis.v).to_dense()) <= 1e-9 * d.a.max_abs());
        let s = basis.selection();
        let sv = Matrix::from_fn(a.ncols(), a.ncols(), |i, j| {
            if j < s.ncols() {
                s[(i, j)]
            } else {
                basis.v.get(i, j - s.ncols())
            }
        });
        assert_eq!(numeric_rank(&sv), a.ncols());
        assert!(max_abs(&(basis.sperp_t.to_dense() * &s)) == 0.0);
        let p = basis.projector();
        assert!(max_abs(&(&p * &p - &p)) < 1e-9);
        assert!(max_abs(&(&p * basis.v.to_dense())) < 1e-9);
        assert!(max_abs(&(&p * &s - &s)) < 1e-12);

        let model = reduce(&d, &basis).unwrap();
        assert_eq!(model.rank(), a.ncols() - def);
        assert_eq!(model.partition.global_width(), 120);
    }

    #[test]
    fn reduced_model_reproduces_observations() {
        let geo = desk();
        let plan = FrequencyPlan::gps_l1_l2();
        let noise = NoiseSpec::noiseless(3);
        let truth = sample_truth(&geo, &plan, &noise, &TruthSpec::default());
        let obs = synthesize_epoch(&truth, &geo, &plan, &noise).unwrap();
        let d = assemble_design(&geo, &plan).unwrap();
        let x = d.layout.raw_vector(&truth);
        let y = obs.stacked();
        let ax = d.a.mul_vec(&x);
        assert!((&ax - &y).amax() <= 1e-9 * y.amax());

        let basis = build_sbasis(&d.layout, &plan, &PivotRules::default()).unwrap();
        let model = reduce(&d, &basis).unwrap();
        let alpha = basis.estimable(&x);
        assert!((model.a.mul_vec(&alpha) - &y).amax() <= 1e-8 * y.amax());

        let reassembled = model.partition.reassemble();
        let dense = model.a.to_dense();
        for (k, &c) in model.partition.permutation().iter().enumerate() {
            assert_eq!(reassembled.column(k), dense.column(c));
        }
        let (xs, z) = model.partition.split(&alpha);
        assert_eq!(model.partition.join(&xs, &z), alpha);
    }

    #[test]
    fn estimable_ambiguities_are_integers() {
        let geo = desk();
        let plan = FrequencyPlan::gps_l1_l2();
        let noise = NoiseSpec::nominal();
        let truth = sample_truth(&geo, &plan, &noise, &TruthSpec::default());
        let d = assemble_design(&geo, &plan).unwrap();
        let mut x = Vector::zeros(d.layout.n());
        for l in 0..20 {
            for f in 0..2 {
                for slot in 0..geo.visible[l].len() {
                    x[d.layout.ambiguity(l, f, slot)] = truth.ambiguity[l][f][slot] as f64;
                }
            }
        }
        let basis = build_sbasis(&d.layout, &plan, &PivotRules::default()).unwrap();
        let est = s_transform(&x, &basis, &d.layout);
        for (_, v) in est.row(TableRow::Ambiguity) {
            assert!((v - libm::round(v)).abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_visibility_is_named() {
        let lay = ParamLayout::new(3, 2, vec![vec![0, 1], vec![2]]);
        let err = build_sbasis(&lay, &FrequencyPlan::gps_l1_l2(), &PivotRules::default()).unwrap_err();
        match err {
            crate::Error::DisconnectedVisibility { component } => {
                assert!(component.contains("receivers [1]") && component.contains("satellites [2]"))
            }
            e => panic!("unexpected {e:?}"),
        }
    }
}
