use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use super::design::DesignSystem;
use super::layout::{EstimableLabel, Param, ParamLayout, TableRow};
use super::sbasis::SBasis;
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, weakest_direction, Matrix, SparseMatrix, Vector};

/// Rows of one node with its local and global column blocks.
#[derive(Debug, Clone)]
pub struct NodeBlock {
    pub node: usize,
    pub rows: Range<usize>,
    /// Columns of the reduced design owned by this node.
    pub local: Vec<usize>,
    pub a: Matrix,
    /// Zero where the node does not observe the satellite.
    pub b: Matrix,
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub nodes: Vec<NodeBlock>,
    /// Columns of the reduced design shared by all nodes (satellite states).
    pub global: Vec<usize>,
}

impl Partition {
    pub fn global_width(&self) -> usize {
        self.global.len()
    }

    /// Reduced-design column for each position of `[A_1 .. A_L | B]`.
    pub fn permutation(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .flat_map(|n| n.local.iter().copied())
            .chain(self.global.iter().copied())
            .collect()
    }

    /// Block-arrow matrix `[blockdiag(A_l) | B]`, rows in the original order.
    pub fn reassemble(&self) -> Matrix {
        let m = self.nodes.iter().map(|n| n.rows.end).max().unwrap_or(0);
        let r = self.nodes.iter().map(|n| n.local.len()).sum::<usize>() + self.global.len();
        let mut out = Matrix::zeros(m, r);
        let mut c0 = 0;
        let gc = r - self.global.len();
        for n in &self.nodes {
            out.view_mut((n.rows.start, c0), n.a.shape()).copy_from(&n.a);
            out.view_mut((n.rows.start, gc), n.b.shape()).copy_from(&n.b);
            c0 += n.local.len();
        }
        out
    }

    /// Splits a reduced-parameter vector into node-local parts and the global part.
    pub fn split(&self, alpha: &Vector) -> (Vec<Vector>, Vector) {
        let xs = self
            .nodes
            .iter()
            .map(|n| Vector::from_iterator(n.local.len(), n.local.iter().map(|&c| alpha[c])))
            .collect();
        let z = Vector::from_iterator(self.global.len(), self.global.iter().map(|&c| alpha[c]));
        (xs, z)
    }

    pub fn join(&self, xs: &[Vector], z: &Vector) -> Vector {
        let r = self.nodes.iter().map(|n| n.local.len()).sum::<usize>() + self.global.len();
        let mut alpha = Vector::zeros(r);
        for (n, x) in self.nodes.iter().zip(xs) {
            for (k, &c) in n.local.iter().enumerate() {
                alpha[c] = x[k];
            }
        }
        for (k, &c) in self.global.iter().enumerate() {
            alpha[c] = z[k];
        }
        alpha
    }
}

/// Full-rank model in the estimable parameters.
#[derive(Debug, Clone)]
pub struct EstimableModel {
    pub layout: ParamLayout,
    /// `A S`, a column subset of the raw design.
    pub a: SparseMatrix,
    pub labels: Vec<EstimableLabel>,
    /// Raw column of each estimable parameter.
    pub retained: Vec<usize>,
    pub partition: Partition,
}

/// Estimable values with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimableVector {
    pub labels: Vec<EstimableLabel>,
    pub values: Vector,
}

impl EstimableVector {
    pub fn get(&self, param: Param) -> Option<f64> {
        self.labels.iter().position(|l| l.param == param).map(|i| self.values[i])
    }

    /// Entries belonging to one table row.
    pub fn row(&self, row: TableRow) -> impl Iterator<Item = (&EstimableLabel, f64)> + '_ {
        self.labels
            .iter()
            .zip(self.values.iter().copied())
            .filter(move |(l, _)| l.row == row)
    }
}

impl EstimableModel {
    pub fn estimable_vector(&self, basis: &SBasis, x: &Vector) -> EstimableVector {
        EstimableVector {
            labels: self.labels.clone(),
            values: basis.estimable(x),
        }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }
}

pub fn s_transform(x: &Vector, basis: &SBasis, layout: &ParamLayout) -> EstimableVector {
    EstimableVector {
        labels: basis
            .retained
            .iter()
            .map(|&c| EstimableLabel::from_param(layout.param(c)))
            .collect(),
        values: basis.estimable(x),
    }
}

fn partition(a: &SparseMatrix, layout: &ParamLayout, labels: &[EstimableLabel]) -> Partition {
    let global: Vec<usize> = (0..labels.len()).filter(|&c| labels[c].param.node().is_none()).collect();
    let mut local = alloc::vec![Vec::new(); layout.nodes];
    for (c, lab) in labels.iter().enumerate() {
        if let Some(l) = lab.param.node() {
            local[l].push(c);
        }
    }
    let mut gpos = alloc::vec![usize::MAX; labels.len()];
    for (k, &c) in global.iter().enumerate() {
        gpos[c] = k;
    }
    let nodes = local
        .into_iter()
        .enumerate()
        .map(|(l, cols)| {
            let rows = layout.node_rows(l);
            let mut lpos = alloc::vec![usize::MAX; labels.len()];
            for (k, &c) in cols.iter().enumerate() {
                lpos[c] = k;
            }
            let mut am = Matrix::zeros(rows.len(), cols.len());
            let mut bm = Matrix::zeros(rows.len(), global.len());
            for (i, r) in rows.clone().enumerate() {
                for (c, v) in a.row(r) {
                    if lpos[c] != usize::MAX {
                        am[(i, lpos[c])] = v;
                    } else {
                        debug_assert!(gpos[c] != usize::MAX, "row of node {l} touches another node");
                        bm[(i, gpos[c])] = v;
                    }
                }
            }
            NodeBlock {
                node: l,
                rows,
                local: cols,
                a: am,
                b: bm,
            }
        })
        .collect();
    Partition { nodes, global }
}

fn unobservable(labels: &[EstimableLabel], cols: &[usize], direction: &Vector) -> EstimableLabel {
    let (k, _) = direction
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    labels[cols[k]]
}

/// Rank of the reduced design via its node partition: every local block
/// must have full column rank and the projected global blocks must too.
pub fn check_rank(partition: &Partition, labels: &[EstimableLabel]) -> Result<()> {
    let p = partition.global.len();
    let total: usize = partition.nodes.iter().map(|n| n.rows.len()).sum();
    let mut stacked = Matrix::zeros(total.max(p), p);
    let mut r0 = 0;
    for n in &partition.nodes {
        if numeric_rank(&n.a) < n.a.ncols() {
            let lab = unobservable(labels, &n.local, &weakest_direction(&n.a));
            return Err(Error::RankDeficient {
                detail: format!(
                    "node {}: {} ({}) is not separable with the current visibility",
                    n.node,
                    lab.row.name(),
                    lab.name()
                ),
            });
        }
        let q = n.a.clone().qr().q();
        let proj = &n.b - &q * (q.transpose() * &n.b);
        stacked.view_mut((r0, 0), proj.shape()).copy_from(&proj);
        r0 += n.rows.len();
    }
    if p > 0 && numeric_rank(&stacked) < p {
        let lab = unobservable(labels, &partition.global, &weakest_direction(&stacked));
        return Err(Error::RankDeficient {
            detail: format!("{} ({}) is not separable network-wide", lab.row.name(), lab.name()),
        });
    }
    Ok(())
}

pub fn reduce(design: &DesignSystem, basis: &SBasis) -> Result<EstimableModel> {
    let layout = design.layout.clone();
    if basis.v.rows() != layout.n() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, design {} columns",
            basis.v.rows(),
            layout.n()
        )));
    }
    let labels: Vec<EstimableLabel> = basis
        .retained
        .iter()
        .map(|&c| EstimableLabel::from_param(layout.param(c)))
        .collect();
    let a = design.a.select_columns(&basis.retained);
    let partition = partition(&a, &layout, &labels);
    check_rank(&partition, &labels)?;
    Ok(EstimableModel {
        layout,
        a,
        labels,
        retained: basis.retained.clone(),
        partition,
    })
}
