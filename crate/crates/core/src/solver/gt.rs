use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::problem::NodeProblem;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, Matrix, Vector};
use crate::topology::{GraphSchedule, MixingMatrix};

/// Metric applied to the tracked gradient before the descent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Preconditioner {
    /// Plain gradient step.
    Identity,
    /// Inverse of the network-average reduced curvature. Depends only on
    /// the design and weights, never on the data.
    #[default]
    NetworkCurvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtParams {
    pub step_size: f64,
    pub momentum: f64,
    /// Consensus rounds in the state update, at least one.
    pub rounds: usize,
    pub max_iterations: usize,
    /// Stop once the network-averaged gradient norm drops below this.
    pub tolerance: Option<f64>,
    pub preconditioner: Preconditioner,
    /// A run is abandoned once a monitored quantity exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for GtParams {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            momentum: 0.7,
            rounds: 20,
            max_iterations: 4_000,
            tolerance: None,
            preconditioner: Preconditioner::NetworkCurvature,
            divergence_factor: 1e6,
        }
    }
}

impl GtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig(format!("step size {} must be >= 0", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("consensus rounds must be >= 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("tolerance {t} must be positive")));
            }
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidConfig("divergence factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// Divergent runs produce infinities and NaNs; they are written as strings
/// so that traces survive formats without non-finite numbers.
mod finite {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        match v {
            v if v.is_finite() => Repr::Num(v),
            v if v.is_nan() => Repr::Text("NaN".into()),
            v if v > 0.0 => Repr::Text("inf".into()),
            _ => Repr::Text("-inf".into()),
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(alloc::format!("not a number: {other}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(to_repr).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Mean squared deviation from the reference, when one is supplied.
    #[serde(with = "finite::option")]
    pub msd: Option<f64>,
    #[serde(with = "finite")]
    pub avg_grad_norm: f64,
    #[serde(with = "finite")]
    pub disagreement: f64,
    /// `|mean_l g_l - mean_l grad_z f_l|_inf`.
    #[serde(with = "finite")]
    pub tracking_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub xs: Vec<Vector>,
    pub zs: Vec<Vector>,
    pub iterations: usize,
    pub diverged_at: Option<usize>,
}

impl SolverTrace {
    /// First iteration whose MSD is at or below `target`.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.msd.is_some_and(|m| m <= target)).map(|r| r.k)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

pub fn msd(zs: &[Vector], reference: &Vector) -> f64 {
    zs.iter().map(|z| (z - reference).norm_squared()).sum::<f64>() / zs.len() as f64
}

pub fn mean(vs: &[Vector]) -> Vector {
    let mut acc = Vector::zeros(vs[0].len());
    for v in vs {
        acc += v;
    }
    acc / vs.len() as f64
}

pub fn disagreement(zs: &[Vector]) -> f64 {
    let m = mean(zs);
    zs.iter().map(|z| (z - &m).norm_squared()).sum()
}

/// Norm of the network-averaged gradient, each node at its local minimizer.
pub fn avg_grad_norm(problems: &[NodeProblem], zs: &[Vector]) -> f64 {
    mean(&gradients(problems, zs)).norm()
}

fn gradients(problems: &[NodeProblem], zs: &[Vector]) -> Vec<Vector> {
    problems.iter().zip(zs).map(|(p, z)| p.reduced_gradient(z)).collect()
}

/// MSD, network-averaged gradient norm and disagreement of a set of node states.
pub fn metrics(problems: &[NodeProblem], zs: &[Vector], reference: &Vector) -> (f64, f64, f64) {
    (msd(zs, reference), avg_grad_norm(problems, zs), disagreement(zs))
}

/// `phi <- W phi`, `rounds` times.
pub fn consensus(values: &[Vector], mixing: &MixingMatrix, rounds: usize) -> Result<Vec<Vector>> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("consensus needs at least one round".into()));
    }
    if values.len() != mixing.nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} nodes",
            values.len(),
            mixing.nodes()
        )));
    }
    if values.iter().any(|v| v.len() != values[0].len()) {
        return Err(Error::DimensionMismatch("node values differ in length".into()));
    }
    let mut phi = mixing.apply(values);
    for _ in 1..rounds {
        phi = mixing.apply(&phi);
    }
    Ok(phi)
}

/// Inverse of the network-average reduced curvature.
pub fn network_preconditioner(problems: &[NodeProblem]) -> Result<Matrix> {
    let p = problems[0].global_width();
    let mut h = Matrix::zeros(p, p);
    for n in problems {
        h += n.reduced_hessian();
    }
    h /= problems.len() as f64;
    spd_inverse(&h, "average reduced curvature")
}

fn record(
    k: usize,
    zs: &[Vector],
    trackers: &[Vector],
    grads: &[Vector],
    reference: Option<&Vector>,
) -> IterationRecord {
    let gbar = mean(grads);
    let tbar = mean(trackers);
    IterationRecord {
        k,
        msd: reference.map(|r| msd(zs, r)),
        avg_grad_norm: gbar.norm(),
        disagreement: disagreement(zs),
        tracking_gap: (tbar - gbar).amax(),
    }
}

/// Momentum-accelerated gradient tracking. Divergence ends the run early
/// and is reported in the trace rather than as an error.
pub fn gt_run(
    problems: &[NodeProblem],
    schedule: &GraphSchedule,
    params: &GtParams,
    z_init: &Vector,
    reference: Option<&Vector>,
) -> Result<SolverTrace> {
    params.validate()?;
    let nodes = problems.len();
    if nodes == 0 || schedule.mixing.iter().any(|w| w.nodes() != nodes) {
        return Err(Error::DimensionMismatch("mixing matrices do not match the node count".into()));
    }
    let p = problems[0].global_width();
    if z_init.len() != p || reference.is_some_and(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!("shared state width is {p}")));
    }
    let precond = match params.preconditioner {
        Preconditioner::Identity => None,
        Preconditioner::NetworkCurvature => Some(network_preconditioner(problems)?),
    };

    let mut zs: Vec<Vector> = (0..nodes).map(|_| z_init.clone()).collect();
    let mut z_prev = zs.clone();
    let mut grads = gradients(problems, &zs);
    let mut trackers = grads.clone();

    let mut records = Vec::with_capacity(params.max_iterations + 1);
    let first = record(0, &zs, &trackers, &grads, reference);
    records.push(first);
    let mut diverged_at = None;
    let mut iterations = 0;

    for k in 0..params.max_iterations {
        let w = schedule.at(k);
        let mut phi: Vec<Vector> = Vec::with_capacity(nodes);
        for l in 0..nodes {
            let v = &zs[l] + (&zs[l] - &z_prev[l]) * params.momentum;
            let step = match &precond {
                Some(m) => m * &trackers[l],
                None => trackers[l].clone(),
            };
            phi.push(v - step * params.step_size);
        }
        let mixed = consensus(&phi, w, params.rounds)?;
        z_prev = core::mem::replace(&mut zs, mixed);
        let new_grads = gradients(problems, &zs);
        let mixed_trackers = w.apply(&trackers);
        trackers = mixed_trackers
            .into_iter()
            .zip(new_grads.iter().zip(&grads))
            .map(|(t, (gn, go))| t + gn - go)
            .collect();
        grads = new_grads;
        iterations = k + 1;

        let rec = record(k + 1, &zs, &trackers, &grads, reference);
        let blown = |now: f64, start: f64| !now.is_finite() || (start > 0.0 && now > params.divergence_factor * start);
        let diverged = blown(rec.avg_grad_norm, first.avg_grad_norm)
            || match (rec.msd, first.msd) {
                (Some(now), Some(start)) => blown(now, start),
                _ => false,
            };
        records.push(rec);
        if diverged {
            diverged_at = Some(k + 1);
            break;
        }
        if params.tolerance.is_some_and(|t| rec.avg_grad_norm < t) {
            break;
        }
    }
    let xs = problems.iter().zip(&zs).map(|(n, z)| n.local_x(z)).collect();
    Ok(SolverTrace {
        records,
        xs,
        zs,
        iterations,
        diverged_at,
    })
}

/// Like [`gt_run`], but divergence is an error.
pub fn gt_solve(
    problems: &[NodeProblem],
    schedule: &GraphSchedule,
    params: &GtParams,
    z_init: &Vector,
    reference: Option<&Vector>,
) -> Result<SolverTrace> {
    let trace = gt_run(problems, schedule, params, z_init, reference)?;
    match trace.diverged_at {
        Some(iteration) => Err(Error::Diverged { iteration }),
        None => Ok(trace),
    }
}
