use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Dyn, LU};
use serde::{Deserialize, Serialize};

use super::design::deficiency_count;
use super::layout::{ClockParam, ParamLayout};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SparseMatrix, Vector};
use crate::observation::FrequencyPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PivotChoice {
    #[default]
    Lowest,
    Highest,
}

impl PivotChoice {
    fn pick(self, candidates: &[usize]) -> Option<usize> {
        match self {
            PivotChoice::Lowest => candidates.first().copied(),
            PivotChoice::Highest => candidates.last().copied(),
        }
    }
}

/// How datum pivots are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PivotRules {
    /// Reference receiver, index into the LEO nodes.
    pub reference: usize,
    /// Pivot satellite of each receiver among its visible satellites.
    pub satellite: PivotChoice,
    /// Pivot receiver of each satellite among its observers.
    pub receiver: PivotChoice,
}

/// Resolved pivots and the spanning tree of the receiver-satellite
/// visibility graph whose ambiguities form the datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Pivots {
    pub reference: usize,
    /// `g_p(l)` for every node.
    pub satellite_of: Vec<usize>,
    /// `l_p(g)` for every satellite.
    pub receiver_of: Vec<usize>,
    /// `(l, g)` links whose ambiguities are constrained, per frequency.
    pub tree: Vec<(usize, usize)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // lower root wins so the reference receiver stays a root
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

fn describe_component(layout: &ParamLayout, members: &[usize]) -> String {
    let l = layout.nodes;
    let rx: Vec<usize> = members.iter().copied().filter(|&v| v < l).collect();
    let sats: Vec<usize> = members.iter().filter(|&&v| v >= l).map(|v| v - l).collect();
    format!("receivers {rx:?} and satellites {sats:?} are not linked to the rest of the network")
}

impl Pivots {
    pub fn resolve(layout: &ParamLayout, rules: &PivotRules) -> Result<Self> {
        let (nl, ng) = (layout.nodes, layout.satellites);
        if rules.reference >= nl {
            return Err(Error::InvalidConfig(format!(
                "reference receiver {} out of range for {nl} nodes",
                rules.reference
            )));
        }
        let mut observers = vec![Vec::new(); ng];
        for (l, vis) in layout.visible.iter().enumerate() {
            for &g in vis {
                observers[g].push(l);
            }
        }
        // vertices: receivers 0..L, satellites L..L+G
        let mut uf = UnionFind((0..nl + ng).collect());
        let mut receiver_of = vec![usize::MAX; ng];
        let mut satellite_of = vec![usize::MAX; nl];
        let mut tree = Vec::with_capacity(nl + ng - 1);
        let take = |uf: &mut UnionFind, l: usize, g: usize, tree: &mut Vec<(usize, usize)>| {
            if uf.union(l, nl + g) {
                tree.push((l, g));
            }
        };
        for g in 0..ng {
            if let Some(l) = rules.receiver.pick(&observers[g]) {
                receiver_of[g] = l;
                take(&mut uf, l, g, &mut tree);
            }
        }
        for (l, slot) in satellite_of.iter_mut().enumerate() {
            if let Some(g) = rules.satellite.pick(&layout.visible[l]) {
                *slot = g;
                if l != rules.reference {
                    take(&mut uf, l, g, &mut tree);
                }
            }
        }
        for l in 0..nl {
            for &g in &layout.visible[l] {
                take(&mut uf, l, g, &mut tree);
            }
        }
        let root = uf.find(rules.reference);
        let stray: Vec<usize> = (0..nl + ng).filter(|&v| uf.find(v) != root).collect();
        if !stray.is_empty() {
            let first = uf.find(stray[0]);
            let members: Vec<usize> = stray.iter().copied().filter(|&v| uf.find(v) == first).collect();
            return Err(Error::DisconnectedVisibility {
                component: describe_component(layout, &members),
            });
        }
        tree.sort_unstable();
        Ok(Self {
            reference: rules.reference,
            satellite_of,
            receiver_of,
            tree,
        })
    }

    pub fn in_tree(&self, l: usize, g: usize) -> bool {
        self.tree.binary_search(&(l, g)).is_ok()
    }
}

/// Null-space basis `V`, constraint rows `(S_perp)^T`, the retained
/// column selection `S`, and the factored `(S_perp)^T V`.
#[derive(Debug, Clone)]
pub struct SBasis {
    pub pivots: Pivots,
    pub v: SparseMatrix,
    pub sperp_t: SparseMatrix,
    /// Raw columns kept by `S`, ascending.
    pub retained: Vec<usize>,
    lu: LU<f64, Dyn, Dyn>,
}

fn null_space(layout: &ParamLayout, plan: &FrequencyPlan, reference: usize) -> SparseMatrix {
    let (nl, ng, nf) = (layout.nodes, layout.satellites, layout.frequencies);
    let mut t = Vec::new();
    let mut col = 0;
    let observers = |g: usize| (0..nl).filter(move |&l| layout.slot(l, g).is_some());
    let others = (0..nl).filter(|&l| l != reference).collect::<Vec<_>>();

    // common shift of every clock-like parameter
    for p in ClockParam::all(nf) {
        for l in 0..nl {
            t.push((layout.receiver(l, p), col, 1.0));
        }
        for g in 0..ng {
            t.push((layout.satellite(g, p), col, 1.0));
        }
        col += 1;
    }
    // clock against hardware biases
    let clock_bias = |idx: &dyn Fn(ClockParam) -> usize, t: &mut Vec<(usize, usize, f64)>, col: usize| {
        t.push((idx(ClockParam::Clock), col, -1.0));
        for f in 0..nf {
            t.push((idx(ClockParam::PhaseBias(f)), col, 1.0 / plan.lambda(f)));
            t.push((idx(ClockParam::CodeBias(f)), col, 1.0));
        }
    };
    for &l in &others {
        clock_bias(&|p| layout.receiver(l, p), &mut t, col);
        col += 1;
    }
    for g in 0..ng {
        clock_bias(&|p| layout.satellite(g, p), &mut t, col);
        col += 1;
    }
    // hardware biases against ionosphere
    for &l in &others {
        for f in 0..nf {
            let (lam, mu) = (plan.lambda(f), plan.mu(f));
            t.push((layout.receiver(l, ClockParam::PhaseBias(f)), col, mu / lam));
            t.push((layout.receiver(l, ClockParam::CodeBias(f)), col, -mu));
        }
        for slot in 0..layout.visible[l].len() {
            t.push((layout.iono(l, slot), col, 1.0));
        }
        col += 1;
    }
    for g in 0..ng {
        for f in 0..nf {
            let (lam, mu) = (plan.lambda(f), plan.mu(f));
            t.push((layout.satellite(g, ClockParam::PhaseBias(f)), col, -mu / lam));
            t.push((layout.satellite(g, ClockParam::CodeBias(f)), col, mu));
        }
        for l in observers(g) {
            t.push((layout.iono(l, layout.slot(l, g).unwrap()), col, 1.0));
        }
        col += 1;
    }
    // phase biases against ambiguities
    for &l in &others {
        for f in 0..nf {
            t.push((layout.receiver(l, ClockParam::PhaseBias(f)), col, -1.0));
            for slot in 0..layout.visible[l].len() {
                t.push((layout.ambiguity(l, f, slot), col, 1.0));
            }
            col += 1;
        }
    }
    for g in 0..ng {
        for f in 0..nf {
            t.push((layout.satellite(g, ClockParam::PhaseBias(f)), col, 1.0));
            for l in observers(g) {
                t.push((layout.ambiguity(l, f, layout.slot(l, g).unwrap()), col, 1.0));
            }
            col += 1;
        }
    }
    SparseMatrix::from_triplets(layout.n(), col, t)
}

fn constraints(layout: &ParamLayout, plan: &FrequencyPlan, pivots: &Pivots) -> SparseMatrix {
    let (nl, ng, nf) = (layout.nodes, layout.satellites, layout.frequencies);
    let reference = pivots.reference;
    let mut t = Vec::new();
    let mut row = 0;
    for p in ClockParam::all(nf) {
        t.push((row, layout.receiver(reference, p), 1.0));
        row += 1;
    }
    let mu_if = plan.mu_if();
    let mu_gf = plan.mu_gf();
    let comb = |t: &mut Vec<(usize, usize, f64)>, row: usize, idx: &dyn Fn(ClockParam) -> usize, w: [f64; 2], s: f64| {
        for (f, wf) in w.into_iter().enumerate() {
            t.push((row, idx(ClockParam::CodeBias(f)), s * wf));
        }
    };
    let ref_idx = |p| layout.receiver(reference, p);
    let others: Vec<usize> = (0..nl).filter(|&l| l != reference).collect();
    for &l in &others {
        comb(&mut t, row, &|p| layout.receiver(l, p), mu_if, 1.0);
        comb(&mut t, row, &ref_idx, mu_if, -1.0);
        row += 1;
    }
    for g in 0..ng {
        comb(&mut t, row, &|p| layout.satellite(g, p), mu_if, 1.0);
        comb(&mut t, row, &ref_idx, mu_if, -1.0);
        row += 1;
    }
    for &l in &others {
        comb(&mut t, row, &|p| layout.receiver(l, p), mu_gf, -1.0);
        comb(&mut t, row, &ref_idx, mu_gf, 1.0);
        row += 1;
    }
    for g in 0..ng {
        comb(&mut t, row, &|p| layout.satellite(g, p), mu_gf, 1.0);
        comb(&mut t, row, &ref_idx, mu_gf, -1.0);
        row += 1;
    }
    for f in 0..nf {
        for &(l, g) in &pivots.tree {
            t.push((row, layout.ambiguity(l, f, layout.slot(l, g).unwrap()), 1.0));
            row += 1;
        }
    }
    SparseMatrix::from_triplets(row, layout.n(), t)
}

pub fn build_sbasis(layout: &ParamLayout, plan: &FrequencyPlan, rules: &PivotRules) -> Result<SBasis> {
    if plan.frequencies() != layout.frequencies {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} frequencies, layout {}",
            plan.frequencies(),
            layout.frequencies
        )));
    }
    let pivots = Pivots::resolve(layout, rules)?;
    let v = null_space(layout, plan, pivots.reference);
    let sperp_t = constraints(layout, plan, &pivots);
    let d = deficiency_count(layout.nodes, layout.satellites, layout.frequencies);
    debug_assert_eq!(v.cols(), d);
    if sperp_t.rows() != d {
        return Err(Error::RankDeficient {
            detail: format!("{} datum constraints for {} deficiencies", sperp_t.rows(), d),
        });
    }
    let mut touched = vec![false; layout.n()];
    for r in 0..sperp_t.rows() {
        for (c, _) in sperp_t.row(r) {
            touched[c] = true;
        }
    }
    let retained: Vec<usize> = (0..layout.n()).filter(|&c| !touched[c]).collect();
    let m = sperp_t.mul_sparse(&v).to_dense();
    let lu = m.lu();
    if !lu.is_invertible() || lu.u().diagonal().iter().any(|x| x.abs() < 1e-12) {
        return Err(Error::RankDeficient {
            detail: String::from("datum constraints do not fix the null space"),
        });
    }
    Ok(SBasis {
        pivots,
        v,
        sperp_t,
        retained,
        lu,
    })
}

impl SBasis {
    pub fn deficiency(&self) -> usize {
        self.v.cols()
    }

    /// `x - V [(S_perp)^T V]^-1 (S_perp)^T x`.
    pub fn transform(&self, x: &Vector) -> Vector {
        let c = self.sperp_t.mul_vec(x);
        let beta = self.lu.solve(&c).expect("factor checked at construction");
        x - self.v.mul_vec(&beta)
    }

    /// Estimable parameters: the transformed vector on the retained columns.
    pub fn estimable(&self, x: &Vector) -> Vector {
        let sx = self.transform(x);
        Vector::from_iterator(self.retained.len(), self.retained.iter().map(|&c| sx[c]))
    }

    /// Dense projector, desk scale only.
    pub fn projector(&self) -> Matrix {
        let n = self.v.rows();
        let vt = self.v.to_dense();
        let c = self.sperp_t.to_dense();
        let k = self.lu.solve(&c).expect("factor checked at construction");
        Matrix::identity(n, n) - vt * k
    }

    /// Dense column selection `S`.
    pub fn selection(&self) -> Matrix {
        let n = self.v.rows();
        let mut s = Matrix::zeros(n, self.retained.len());
        for (j, &c) in self.retained.iter().enumerate() {
            s[(c, j)] = 1.0;
        }
        s
    }
}
