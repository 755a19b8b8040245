//! Integer ambiguity resolution: sequential bootstrapping, an exhaustive
//! integer least-squares oracle for small problems, and the conditional
//! update of the remaining states.

use alloc::vec;
use alloc::vec::Vec;

use libm::{erf, round, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, Vector};

/// Largest dimension accepted by [`ils_enumerate`].
pub const MAX_ENUMERATION_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FloatAmbiguities {
    /// Cycles.
    pub a_hat: Vector,
    pub q_a: Matrix,
}

/// Outcome of one sequential rounding pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub fixed: Vec<i64>,
    /// Fixing order, increasing conditional variance.
    pub order: Vec<usize>,
    /// Conditional variance of each ambiguity in `order`.
    pub conditional_variance: Vec<f64>,
    /// Squared conditional rounding residual over variance, in `order`.
    pub residual: Vec<f64>,
}

impl Bootstrap {
    /// Probability that every ambiguity in `order[range]` is fixed correctly.
    pub fn success_rate(&self, range: core::ops::Range<usize>) -> f64 {
        self.conditional_variance[range]
            .iter()
            .map(|&d| erf(1.0 / (2.0 * sqrt(2.0 * d))))
            .product()
    }
}

/// Integer bootstrapping; the next ambiguity is always the one with the
/// smallest conditional variance given those already fixed.
pub fn bootstrap(float: &FloatAmbiguities) -> Bootstrap {
    let n = float.a_hat.len();
    let mut a = float.a_hat.clone();
    let mut q = float.q_a.clone();
    let mut free: Vec<usize> = (0..n).collect();
    let mut fixed = vec![0i64; n];
    let mut order = Vec::with_capacity(n);
    let mut cond = Vec::with_capacity(n);
    let mut resid = Vec::with_capacity(n);
    while !free.is_empty() {
        let (pos, &i) = free
            .iter()
            .enumerate()
            .min_by(|x, y| q[(*x.1, *x.1)].total_cmp(&q[(*y.1, *y.1)]).then(x.1.cmp(y.1)))
            .unwrap();
        free.remove(pos);
        let d = q[(i, i)];
        let ai = round(a[i]);
        let e = a[i] - ai;
        fixed[i] = ai as i64;
        order.push(i);
        cond.push(d);
        resid.push(e * e / d);
        for &j in &free {
            a[j] -= q[(j, i)] / d * e;
        }
        for &j in &free {
            for &k in &free {
                q[(j, k)] -= q[(j, i)] * q[(i, k)] / d;
            }
        }
    }
    Bootstrap {
        fixed,
        order,
        conditional_variance: cond,
        residual: resid,
    }
}

pub fn bootstrap_fix(float: &FloatAmbiguities) -> Vec<i64> {
    bootstrap(float).fixed
}

/// Exhaustive integer least squares over the box `round(a_hat) +- radius`.
/// Ties resolve to the lexicographically smallest candidate.
pub fn ils_enumerate(float: &FloatAmbiguities, radius: u32) -> Result<Vec<i64>> {
    let n = float.a_hat.len();
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationGuard {
            dim: n,
            max: MAX_ENUMERATION_DIM,
        });
    }
    let w = cholesky(&float.q_a, "ambiguity covariance")?.inverse();
    let r = radius as i64;
    let center: Vec<i64> = float.a_hat.iter().map(|&v| round(v) as i64).collect();
    let mut cand: Vec<i64> = center.iter().map(|c| c - r).collect();
    let mut best = cand.clone();
    let mut best_val = f64::INFINITY;
    let mut diff = Vector::zeros(n);
    loop {
        for i in 0..n {
            diff[i] = float.a_hat[i] - cand[i] as f64;
        }
        let val = diff.dot(&(&w * &diff));
        if val < best_val {
            best_val = val;
            best.clone_from(&cand);
        }
        // odometer, last index fastest, so candidates arrive in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if cand[i] < center[i] + r {
                cand[i] += 1;
                for c in cand.iter_mut().zip(&center).skip(i + 1) {
                    *c.0 = c.1 - r;
                }
                break;
            }
        }
    }
}

/// `b_fixed = b_hat - Q_ba Q_a^-1 (a_hat - a_fixed)` and the matching
/// conditional covariance `Q_b - Q_ba Q_a^-1 Q_ab`.
pub fn fix_solution(
    b_hat: &Vector,
    q_b: &Matrix,
    q_ba: &Matrix,
    float: &FloatAmbiguities,
    a_fixed: &[i64],
) -> Result<(Vector, Matrix)> {
    if a_fixed.len() != float.a_hat.len() || q_ba.ncols() != float.a_hat.len() || q_ba.nrows() != b_hat.len() {
        return Err(Error::DimensionMismatch("fixing inputs disagree in size".into()));
    }
    let chol = cholesky(&float.q_a, "ambiguity covariance")?;
    let e = Vector::from_iterator(a_fixed.len(), float.a_hat.iter().zip(a_fixed).map(|(a, z)| a - *z as f64));
    let b = b_hat - q_ba * chol.solve(&e);
    let q = q_b - q_ba * chol.solve(&q_ba.transpose());
    Ok((b, q))
}

/// When a fix is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FixPolicy {
    /// Only if the bootstrapped success rate of the whole set reaches the threshold.
    Validated { min_success_rate: f64 },
    Always,
}

impl Default for FixPolicy {
    fn default() -> Self {
        FixPolicy::Validated { min_success_rate: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block: usize,
    /// Owning node, if the set belongs to one node.
    pub node: Option<usize>,
    pub dimension: usize,
    pub success: bool,
    pub success_rate: f64,
    /// Norm of the conditional rounding residuals, in conditional sigmas.
    pub residual: f64,
}

/// Fixes one ambiguity set. Blocks of at most [`MAX_ENUMERATION_DIM`] are
/// consecutive runs of the conditional-variance order. Returns `None`
/// when the policy rejects the fix.
pub fn fix_ambiguities(
    float: &FloatAmbiguities,
    policy: FixPolicy,
    node: Option<usize>,
    first_block: usize,
) -> (Option<Vec<i64>>, Vec<BlockReport>) {
    let n = float.a_hat.len();
    if n == 0 {
        return (Some(Vec::new()), Vec::new());
    }
    let bs = bootstrap(float);
    let total = bs.success_rate(0..n);
    let accept = match policy {
        FixPolicy::Always => true,
        FixPolicy::Validated { min_success_rate } => total >= min_success_rate,
    };
    let reports = (0..n)
        .step_by(MAX_ENUMERATION_DIM)
        .enumerate()
        .map(|(b, start)| {
            let range = start..(start + MAX_ENUMERATION_DIM).min(n);
            BlockReport {
                block: first_block + b,
                node,
                dimension: range.len(),
                success: accept,
                success_rate: bs.success_rate(range.clone()),
                residual: sqrt(bs.residual[range].iter().sum()),
            }
        })
        .collect();
    (accept.then_some(bs.fixed), reports)
}
