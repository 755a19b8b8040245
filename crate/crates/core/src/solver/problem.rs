use alloc::format;
use alloc::vec::Vec;

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::estimability::Partition;
use crate::linalg::{cholesky, numeric_rank, Matrix, Vector};
use crate::observation::{variances, FrequencyPlan, NoiseSpec, ObservationSet};

/// Local least-squares problem of one node:
/// `f_l(x, z) = 1/2 |A x + B z - y|^2` weighted by the inverse variances.
#[derive(Debug, Clone)]
pub struct NodeProblem {
    pub a: Matrix,
    pub b: Matrix,
    /// Inverse variances.
    pub weights: Vector,
    pub y: Vector,
    /// `x(z) = x0 - xb z` is the local minimizer for fixed `z`.
    x0: Vector,
    xb: Matrix,
    /// `(A^T W A)^-1`.
    normal_inverse: Matrix,
    /// `bp^T bp` and `bp^T yp` of the whitened global block and data
    /// projected off the range of the local block.
    hessian: Matrix,
    rhs: Vector,
}

impl NodeProblem {
    pub fn new(a: Matrix, b: Matrix, variances: &Vector, y: Vector) -> Result<Self> {
        let m = a.nrows();
        if b.nrows() != m || variances.len() != m || y.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "A has {m} rows, B {}, variances {}, y {}",
                b.nrows(),
                variances.len(),
                y.len()
            )));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("observation covariance".into()));
        }
        if numeric_rank(&a) < a.ncols() {
            return Err(Error::RankDeficient {
                detail: format!("local design with {} columns has rank {}", a.ncols(), numeric_rank(&a)),
            });
        }
        let weights = variances.map(|v| 1.0 / v);
        let sw = weights.map(libm::sqrt);
        let aw = Matrix::from_fn(m, a.ncols(), |i, j| a[(i, j)] * sw[i]);
        let bw = Matrix::from_fn(m, b.ncols(), |i, j| b[(i, j)] * sw[i]);
        let yw = y.component_mul(&sw);

        let qr = aw.qr();
        let q = qr.q();
        let r = qr.r();
        let rinv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient { detail: "local design".into() })?;
        let qt_bw = q.transpose() * &bw;
        let qt_yw = q.transpose() * &yw;
        let x0 = &rinv * &qt_yw;
        let xb = &rinv * &qt_bw;
        let normal_inverse = &rinv * rinv.transpose();
        let bp = &bw - &q * &qt_bw;
        let yp = &yw - &q * &qt_yw;
        let hessian = bp.tr_mul(&bp);
        let rhs = bp.tr_mul(&yp);
        Ok(Self {
            a,
            b,
            weights,
            y,
            x0,
            xb,
            normal_inverse,
            hessian,
            rhs,
        })
    }

    pub fn local_width(&self) -> usize {
        self.a.ncols()
    }

    pub fn global_width(&self) -> usize {
        self.b.ncols()
    }

    /// Exact minimizer of `f_l` over `x` for fixed `z`.
    pub fn local_x(&self, z: &Vector) -> Vector {
        &self.x0 - &self.xb * z
    }

    pub fn residual(&self, x: &Vector, z: &Vector) -> Vector {
        &self.a * x + &self.b * z - &self.y
    }

    pub fn objective(&self, x: &Vector, z: &Vector) -> f64 {
        let r = self.residual(x, z);
        0.5 * r.iter().zip(self.weights.iter()).map(|(r, w)| w * r * r).sum::<f64>()
    }

    pub fn grad_z(&self, x: &Vector, z: &Vector) -> Vector {
        let r = self.residual(x, z).component_mul(&self.weights);
        self.b.tr_mul(&r)
    }

    pub fn grad_x(&self, x: &Vector, z: &Vector) -> Vector {
        let r = self.residual(x, z).component_mul(&self.weights);
        self.a.tr_mul(&r)
    }

    /// Curvature of `min_x f_l` in `z`.
    pub fn reduced_hessian(&self) -> &Matrix {
        &self.hessian
    }

    /// Right-hand side matching [`NodeProblem::reduced_hessian`].
    pub fn reduced_rhs(&self) -> &Vector {
        &self.rhs
    }

    /// `grad_z f_l(local_x(z), z)`. Equal to [`NodeProblem::grad_z`] at the
    /// local minimizer but free of the cancellation in the raw residual.
    pub fn reduced_gradient(&self, z: &Vector) -> Vector {
        &self.hessian * z - &self.rhs
    }

    /// `(A^T W A)^-1`.
    pub fn local_covariance(&self) -> &Matrix {
        &self.normal_inverse
    }

    /// `dx/dz` of the local minimizer, negated.
    pub fn coupling(&self) -> &Matrix {
        &self.xb
    }
}

/// One problem per node from the reduced model, observations and the
/// estimator's weighting sigmas.
pub fn build_problems(
    partition: &Partition,
    obs: &ObservationSet,
    plan: &FrequencyPlan,
    weights: &NoiseSpec,
) -> Result<Vec<NodeProblem>> {
    weights.validate_weights()?;
    if obs.nodes() != partition.nodes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} observation blocks for {} nodes",
            obs.nodes(),
            partition.nodes.len()
        )));
    }
    partition
        .nodes
        .iter()
        .map(|n| {
            let var = variances(plan, weights, obs.visible[n.node].len());
            NodeProblem::new(n.a.clone(), n.b.clone(), &var, obs.y[n.node].clone()).map_err(|e| match e {
                Error::RankDeficient { detail } => Error::RankDeficient {
                    detail: format!("node {} is under-observed: {detail}", n.node),
                },
                e => e,
            })
        })
        .collect()
}

/// Centralized weighted least-squares solution.
#[derive(Debug, Clone)]
pub struct CentralSolution {
    pub xs: Vec<Vector>,
    pub z: Vector,
    /// `sum_l H_l`.
    pub hessian: Matrix,
    /// Covariance of `z`, the inverse of `hessian`.
    pub z_covariance: Matrix,
}

impl CentralSolution {
    /// Covariance of node `l`'s local states.
    pub fn node_covariance(&self, problem: &NodeProblem) -> Matrix {
        let mb = problem.coupling();
        problem.local_covariance() + mb * &self.z_covariance * mb.transpose()
    }

    /// Cross-covariance of node-local states with `z`.
    pub fn node_z_covariance(&self, problem: &NodeProblem) -> Matrix {
        -(problem.coupling() * &self.z_covariance)
    }
}

fn hessian_factor(problems: &[NodeProblem]) -> Result<(Matrix, Vector, Cholesky<f64, nalgebra::Dyn>)> {
    let p = problems.first().map_or(0, |n| n.global_width());
    let mut h = Matrix::zeros(p, p);
    let mut c = Vector::zeros(p);
    for n in problems {
        if n.global_width() != p {
            return Err(Error::DimensionMismatch("global widths differ between nodes".into()));
        }
        h += n.reduced_hessian();
        c += n.reduced_rhs();
    }
    let chol = cholesky(&h, "network normal matrix of the shared states").map_err(|_| Error::RankDeficient {
        detail: "shared satellite states are not separable with the current visibility".into(),
    })?;
    Ok((h, c, chol))
}

/// Exact minimizer of `sum_l f_l` by eliminating every node's local states.
pub fn centralized_wls(problems: &[NodeProblem]) -> Result<CentralSolution> {
    let (h, c, chol) = hessian_factor(problems)?;
    let z = chol.solve(&c);
    let xs = problems.iter().map(|n| n.local_x(&z)).collect();
    Ok(CentralSolution {
        xs,
        z,
        hessian: h,
        z_covariance: chol.inverse(),
    })
}

/// Plain weighted least squares through a QR of the whitened design.
pub fn dense_wls(a: &Matrix, variances: &Vector, y: &Vector) -> Result<Vector> {
    let sw = variances.map(|v| 1.0 / libm::sqrt(v));
    let aw = Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * sw[i]);
    if numeric_rank(&aw) < a.ncols() {
        return Err(Error::RankDeficient {
            detail: format!("design with {} columns has rank {}", a.ncols(), numeric_rank(&aw)),
        });
    }
    let qr = aw.qr();
    let rhs = qr.q().tr_mul(&y.component_mul(&sw));
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient { detail: "triangular factor is singular".into() })
}

/// Node solution with the shared states frozen at `z_fixed`.
pub fn standalone_wls(problem: &NodeProblem, z_fixed: &Vector) -> Result<Vector> {
    if z_fixed.len() != problem.global_width() {
        return Err(Error::DimensionMismatch(format!(
            "z has {} entries, expected {}",
            z_fixed.len(),
            problem.global_width()
        )));
    }
    Ok(problem.local_x(z_fixed))
}
