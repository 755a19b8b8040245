use alloc::vec::Vec;

use super::layout::{ClockParam, ParamLayout};
use crate::constellation::EpochGeometry;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::observation::{FrequencyPlan, ObsKind};

/// The rank-deficient undifferenced network design.
#[derive(Debug, Clone)]
pub struct DesignSystem {
    pub layout: ParamLayout,
    pub a: SparseMatrix,
}

/// `2 + 2F + (2 + F)(L - 1 + G)`.
pub fn deficiency_count(nodes: usize, satellites: usize, frequencies: usize) -> usize {
    2 + 2 * frequencies + (2 + frequencies) * (nodes - 1 + satellites)
}

pub fn assemble_design(geometry: &EpochGeometry, plan: &FrequencyPlan) -> Result<DesignSystem> {
    for (node, v) in geometry.visible.iter().enumerate() {
        if v.is_empty() {
            return Err(Error::EmptyVisibility { node });
        }
    }
    let nf = plan.frequencies();
    let lay = ParamLayout::from_geometry(geometry, nf);
    let mut t = Vec::with_capacity(lay.m() * 10);
    for l in 0..lay.nodes {
        for (slot, &g) in lay.visible[l].iter().enumerate() {
            let u = &geometry.los[l][slot];
            for f in 0..nf {
                let lam = plan.lambda(f);
                let mu = plan.mu(f);

                let r = lay.row(l, f, ObsKind::Phase, slot);
                for k in 0..3 {
                    t.push((r, lay.orbit(l, k), u[k]));
                }
                t.push((r, lay.receiver(l, ClockParam::Clock), 1.0));
                t.push((r, lay.receiver(l, ClockParam::PhaseBias(f)), lam));
                t.push((r, lay.satellite(g, ClockParam::Clock), -1.0));
                t.push((r, lay.satellite(g, ClockParam::PhaseBias(f)), -lam));
                t.push((r, lay.iono(l, slot), -mu));
                t.push((r, lay.ambiguity(l, f, slot), lam));

                let r = lay.row(l, f, ObsKind::Code, slot);
                for k in 0..3 {
                    t.push((r, lay.orbit(l, k), u[k]));
                }
                t.push((r, lay.receiver(l, ClockParam::Clock), 1.0));
                t.push((r, lay.receiver(l, ClockParam::CodeBias(f)), 1.0));
                t.push((r, lay.satellite(g, ClockParam::Clock), -1.0));
                t.push((r, lay.satellite(g, ClockParam::CodeBias(f)), -1.0));
                t.push((r, lay.iono(l, slot), mu));

                let r = lay.row(l, f, ObsKind::Doppler, slot);
                for k in 0..3 {
                    t.push((r, lay.orbit(l, 3 + k), -u[k] / lam));
                }
                t.push((r, lay.receiver(l, ClockParam::Drift), -1.0 / lam));
                t.push((r, lay.satellite(g, ClockParam::Drift), 1.0 / lam));
            }
        }
    }
    let a = SparseMatrix::from_triplets(lay.m(), lay.n(), t);
    Ok(DesignSystem { layout: lay, a })
}
