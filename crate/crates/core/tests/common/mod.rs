//! Shared fixtures: small scenarios over random geometry and a closed-form
//! evaluation of the estimable parameters that never touches the projector.

#![allow(dead_code)]

use std::collections::VecDeque;

use leonet_core::constellation::{build_walker, epoch_geometry, EpochGeometry, OrbitalElements, WalkerConfig};
use leonet_core::estimability::{ClockParam, Param, ParamLayout, Pivots};
use leonet_core::observation::{ClockTruth, FrequencyPlan, TruthState};

pub fn walker(total: usize, planes: usize, altitude: f64, inclination: f64, raan0: f64) -> Vec<OrbitalElements> {
    build_walker(&WalkerConfig {
        total_satellites: total,
        planes,
        sats_per_plane: total / planes,
        altitude,
        inclination,
        phasing: 1,
        raan0,
        epoch0: 0.0,
    })
    .unwrap()
}

/// Geometry in which every GNSS satellite is seen by at least one node:
/// the shell is cut down to the observed satellites.
pub fn observed_geometry(leo: &[OrbitalElements], gnss: &[OrbitalElements], epoch: f64) -> EpochGeometry {
    let full = epoch_geometry(leo, gnss, epoch, 0.0).unwrap();
    let seen: Vec<OrbitalElements> = (0..gnss.len())
        .filter(|&g| full.visible.iter().any(|v| v.contains(&g)))
        .map(|g| gnss[g])
        .collect();
    epoch_geometry(leo, &seen, epoch, 0.0).unwrap()
}

/// LEO shell of `nodes` satellites in `planes` planes against the GPS-like shell.
pub fn random_geometry(nodes: usize, planes: usize, inclination: f64, epoch: f64, raan0: f64) -> EpochGeometry {
    let leo = walker(nodes, planes, 550e3, inclination, raan0);
    let gnss = walker(30, 6, 20_200e3, 55.0, 0.0);
    observed_geometry(&leo, &gnss, epoch)
}

/// LEO shell shapes used by the random fixtures: (nodes, planes).
pub const SHAPES: [(usize, usize); 8] = [(2, 1), (3, 1), (4, 2), (5, 1), (6, 2), (6, 3), (8, 2), (9, 3)];

pub fn dual_frequency() -> FrequencyPlan {
    FrequencyPlan::gps_l1_l2()
}

/// Closed-form estimable values under the pivot tree.
pub struct TableOracle<'a> {
    plan: &'a FrequencyPlan,
    truth: &'a TruthState,
    visible: &'a [Vec<usize>],
    reference: usize,
    /// `rho[f][l]`, `sigma[f][g]`: tree potentials, `sigma_g - rho_l = z` on tree links.
    rho: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
}

impl<'a> TableOracle<'a> {
    pub fn new(layout: &'a ParamLayout, plan: &'a FrequencyPlan, pivots: &Pivots, truth: &'a TruthState) -> Self {
        let (nl, ng) = (layout.nodes, layout.satellites);
        let mut rho = Vec::new();
        let mut sigma = Vec::new();
        for f in 0..plan.frequencies() {
            let amb = |l: usize, g: usize| {
                let s = layout.visible[l].binary_search(&g).unwrap();
                truth.ambiguity[l][f][s] as f64
            };
            let mut r = vec![f64::NAN; nl];
            let mut s = vec![f64::NAN; ng];
            r[pivots.reference] = 0.0;
            let mut queue = VecDeque::from([(true, pivots.reference)]);
            while let Some((is_rx, v)) = queue.pop_front() {
                for &(l, g) in &pivots.tree {
                    if is_rx && l == v && s[g].is_nan() {
                        s[g] = r[l] + amb(l, g);
                        queue.push_back((false, g));
                    } else if !is_rx && g == v && r[l].is_nan() {
                        r[l] = s[g] - amb(l, g);
                        queue.push_back((true, l));
                    }
                }
            }
            assert!(r.iter().chain(&s).all(|v| v.is_finite()), "tree does not span");
            rho.push(r);
            sigma.push(s);
        }
        Self {
            plan,
            truth,
            visible: &layout.visible,
            reference: pivots.reference,
            rho,
            sigma,
        }
    }

    fn iff(&self, c: &ClockTruth) -> f64 {
        let (m1, m2) = (self.plan.mu(0), self.plan.mu(1));
        (m2 * c.code_bias[0] - m1 * c.code_bias[1]) / (m2 - m1)
    }

    fn gf(&self, c: &ClockTruth) -> f64 {
        let (m1, m2) = (self.plan.mu(0), self.plan.mu(1));
        (c.code_bias[1] - c.code_bias[0]) / (m2 - m1)
    }

    fn clock_like(&self, c: &ClockTruth, p: ClockParam) -> f64 {
        let r = &self.truth.receivers[self.reference];
        match p {
            ClockParam::Clock => (c.clock + self.iff(c)) - (r.clock + self.iff(r)),
            ClockParam::Drift => c.drift - r.drift,
            ClockParam::PhaseBias(f) => {
                let (lam, mu) = (self.plan.lambda(f), self.plan.mu(f));
                (c.phase_bias[f] - self.iff(c) / lam) - (r.phase_bias[f] - self.iff(r) / lam)
                    + mu / lam * (self.gf(c) - self.gf(r))
            }
            ClockParam::CodeBias(f) => {
                let mu = self.plan.mu(f);
                (c.code_bias[f] - self.iff(c)) - (r.code_bias[f] - self.iff(r)) - mu * (self.gf(c) - self.gf(r))
            }
        }
    }

    /// Value of the estimable parameter anchored on raw parameter `p`.
    pub fn value(&self, p: Param) -> f64 {
        let t = self.truth;
        match p {
            Param::Position { node, axis } => t.position[node][axis],
            Param::Velocity { node, axis } => t.velocity[node][axis],
            Param::Receiver { node, param } => {
                let base = self.clock_like(&t.receivers[node], param);
                match param {
                    ClockParam::PhaseBias(f) => base - self.rho[f][node],
                    _ => base,
                }
            }
            Param::Satellite { sat, param } => {
                let base = self.clock_like(&t.satellites[sat], param);
                match param {
                    ClockParam::PhaseBias(f) => base - self.sigma[f][sat],
                    _ => base,
                }
            }
            Param::Iono { node, sat } => {
                let s = self.visible[node].binary_search(&sat).unwrap();
                t.iono[node][s] + self.gf(&t.receivers[node]) - self.gf(&t.satellites[sat])
            }
            Param::Ambiguity { node, freq, sat } => {
                let s = self.visible[node].binary_search(&sat).unwrap();
                t.ambiguity[node][freq][s] as f64 - (self.sigma[freq][sat] - self.rho[freq][node])
            }
        }
    }
}
