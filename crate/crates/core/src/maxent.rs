//! Maximum-entropy distributions over the outcomes of a query itemset.
//!
//! Outcome `ω` of a `d`-attribute query is an index in `0..2^d`; bit `j` is the
//! value of the `j`-th smallest attribute. A constraint `(X, θ)` fixes the mass
//! of outcomes covering `X`.
//!
//! General constraint sets are solved by cyclic iterative proportional fitting
//! (IPF). Constraints can imply zeros (e.g. `θ_a = θ_ab` forces `p(a=1, b=0) = 0`);
//! IPF only approaches such zeros sublinearly, so the support of the solution
//! is found first with a linear program and IPF then runs on that support,
//! where the solution is interior and convergence is linear.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use thiserror::Error;

use crate::dataset::{Dataset, EmpiricalDistribution};
use crate::family::ConstraintSet;
use crate::itemset::{Attr, Itemset};

/// Entries below this are treated as exact zeros.
pub const UNDERFLOW: f64 = 1e-300;

/// Widest query solved with a dense table.
pub const MAX_DIM: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxentError {
    #[error("iterative scaling did not converge after {sweeps} sweeps (worst violation {worst_violation:.3e})")]
    NotConverged { sweeps: usize, worst_violation: f64 },
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("empirical mass at outcome {0} where the model has none")]
    NotAbsolutelyContinuous(usize),
    #[error("zero marginal of attribute {0} under a nonzero tree factor")]
    ZeroMarginal(Attr),
    #[error("distribution of dimension {0} is too large")]
    TooLarge(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid distribution: {0}")]
    Invalid(String),
}

/// Stopping rule for iterative scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Largest tolerated absolute constraint violation.
    pub tol: f64,
    /// One sweep visits every constraint once.
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_sweeps: 100_000,
        }
    }
}

/// Dense probability table over `2^dim` outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    dim: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dim: usize, p: Vec<f64>) -> Result<Self, MaxentError> {
        if p.len() != 1 << dim {
            return Err(MaxentError::DimensionMismatch(p.len(), 1 << dim));
        }
        if p.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(MaxentError::Invalid("negative or NaN entry".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(MaxentError::Invalid(format!("total mass {s}")));
        }
        Ok(JointDistribution { dim, p })
    }

    pub fn uniform(dim: usize) -> Self {
        let n = 1usize << dim;
        JointDistribution {
            dim,
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn mass(&self, outcome: usize) -> f64 {
        self.p[outcome]
    }

    /// `p(X = 1)` for the sub-itemset with local mask `mask`.
    pub fn marginal(&self, mask: usize) -> f64 {
        covering_mass(&self.p, mask)
    }

    pub fn entropy(&self) -> f64 {
        entropy_dense(self)
    }
}

fn covering_mass(p: &[f64], mask: usize) -> f64 {
    p.iter()
        .enumerate()
        .filter(|(w, _)| w & mask == mask)
        .map(|(_, &x)| x)
        .sum()
}

/// Product distribution with the given attribute marginals.
pub fn independence_distribution(marginals: &[f64]) -> JointDistribution {
    let dim = marginals.len();
    let mut p = vec![1.0; 1 << dim];
    for (w, x) in p.iter_mut().enumerate() {
        for (j, &t) in marginals.iter().enumerate() {
            *x *= if w >> j & 1 == 1 { t } else { 1.0 - t };
        }
    }
    JointDistribution { dim, p }
}

/// Maximum-entropy distribution under `c` by cyclic iterative scaling.
pub fn iterative_scaling(
    c: &ConstraintSet,
    cfg: &SolverConfig,
) -> Result<JointDistribution, MaxentError> {
    iterative_scaling_with_hint(c, cfg, None)
}

/// As [`iterative_scaling`], with an optional distribution known to satisfy
/// the constraints (typically the empirical one). Outcomes where the hint is
/// positive are known to lie in the support, which narrows the support search;
/// a strictly positive hint skips it altogether.
pub fn iterative_scaling_with_hint(
    c: &ConstraintSet,
    cfg: &SolverConfig,
    hint: Option<&[f64]>,
) -> Result<JointDistribution, MaxentError> {
    let dim = c.dim();
    if dim > MAX_DIM {
        return Err(MaxentError::TooLarge(dim));
    }
    let n = 1usize << dim;
    let cons = c.local();
    if let Some(h) = hint {
        if h.len() != n {
            return Err(MaxentError::DimensionMismatch(h.len(), n));
        }
    }
    let support = feasible_support(dim, &cons, hint)?;
    let live = support.iter().filter(|&&s| s).count();
    if live == 0 {
        return Err(MaxentError::Infeasible("no distribution satisfies the constraints".into()));
    }
    let mut p: Vec<f64> = support
        .iter()
        .map(|&s| if s { 1.0 / live as f64 } else { 0.0 })
        .collect();

    let mut worst = max_violation(&p, &cons);
    let mut sweeps = 0;
    while worst > cfg.tol {
        if sweeps == cfg.max_sweeps {
            return Err(MaxentError::NotConverged {
                sweeps,
                worst_violation: worst,
            });
        }
        for &(mask, theta) in &cons {
            scale(&mut p, mask, theta)?;
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        sweeps += 1;
        worst = max_violation(&p, &cons);
    }
    Ok(JointDistribution { dim, p })
}

fn max_violation(p: &[f64], cons: &[(usize, f64)]) -> f64 {
    cons.iter()
        .map(|&(mask, theta)| (covering_mass(p, mask) - theta).abs())
        .fold(0.0, f64::max)
}

/// One IPF step: match `p(X = 1) = θ`.
fn scale(p: &mut [f64], mask: usize, theta: f64) -> Result<(), MaxentError> {
    let m = covering_mass(p, mask);
    let rest = 1.0 - m;
    if m <= 0.0 && theta > 0.0 {
        return Err(MaxentError::Infeasible(format!(
            "frequency {theta} required on a zero-mass event"
        )));
    }
    if rest <= 0.0 && theta < 1.0 {
        return Err(MaxentError::Infeasible(format!(
            "frequency {theta} required on a certain event"
        )));
    }
    let up = if m > 0.0 { theta / m } else { 0.0 };
    let down = if rest > 0.0 { (1.0 - theta) / rest } else { 0.0 };
    for (w, x) in p.iter_mut().enumerate() {
        *x *= if w & mask == mask { up } else { down };
        if *x < UNDERFLOW {
            *x = 0.0;
        }
    }
    Ok(())
}

/// Outcomes that carry positive mass under some distribution satisfying the
/// constraints; the maximum-entropy solution is positive on exactly these.
///
/// Solved as one LP over the cone `{(p, u) ≥ 0 : Σ_{ω⊇X} p_ω = θ_X·u, Σ p = u}`:
/// maximise `Σ t_ω` with `t_ω ≤ p_ω`, `t_ω ≤ 1`. Scaling a relative-interior
/// point lifts every non-forced outcome to `t_ω = 1`.
fn feasible_support(
    dim: usize,
    cons: &[(usize, f64)],
    hint: Option<&[f64]>,
) -> Result<Vec<bool>, MaxentError> {
    let n = 1usize << dim;
    let known: Vec<bool> = match hint {
        Some(h) => h.iter().map(|&x| x > 0.0).collect(),
        None => vec![false; n],
    };
    if known.iter().all(|&k| k) || cons.is_empty() {
        return Ok(vec![true; n]);
    }
    // Only zero-frequency constraints and singleton-free structure can force
    // zeros, but detecting that in general is the LP's job.
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let p: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let u = lp.add_var(0.0, (0.0, f64::INFINITY));
    let mut t = vec![None; n];
    for w in (0..n).filter(|&w| !known[w]) {
        let tw = lp.add_var(1.0, (0.0, 1.0));
        lp.add_constraint([(tw, 1.0), (p[w], -1.0)], ComparisonOp::Le, 0.0);
        t[w] = Some(tw);
    }
    for &(mask, theta) in cons {
        let mut row: Vec<_> = (0..n)
            .filter(|w| w & mask == mask)
            .map(|w| (p[w], 1.0))
            .collect();
        row.push((u, -theta));
        lp.add_constraint(row, ComparisonOp::Eq, 0.0);
    }
    let mut total: Vec<_> = p.iter().map(|&v| (v, 1.0)).collect();
    total.push((u, -1.0));
    lp.add_constraint(total, ComparisonOp::Eq, 0.0);
    let sol = lp
        .solve()
        .map_err(|e| MaxentError::Infeasible(format!("support search failed: {e}")))?
        .into_solution()
        .map_err(|_| MaxentError::Infeasible("support search interrupted".into()))?;
    Ok((0..n)
        .map(|w| known[w] || t[w].is_some_and(|tw| sol[tw] >= 0.5))
        .collect())
}

/// Entropy in nats.
pub fn entropy_dense(p: &JointDistribution) -> f64 {
    -p.p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `KL(q ‖ p)` in nats, summed over the support of `q`.
pub fn kl_divergence(q: &EmpiricalDistribution, p: &JointDistribution) -> Result<f64, MaxentError> {
    if q.dim() != p.dim() {
        return Err(MaxentError::DimensionMismatch(q.dim(), p.dim()));
    }
    let mut kl = 0.0;
    for (w, qw) in q.iter() {
        let pw = p.p[w];
        if pw <= UNDERFLOW {
            return Err(MaxentError::NotAbsolutelyContinuous(w));
        }
        kl += qw * (qw / pw).ln();
    }
    Ok(kl.max(0.0))
}

/// `KL(a ‖ b)` between two dense tables.
pub fn kl_dense(a: &JointDistribution, b: &JointDistribution) -> Result<f64, MaxentError> {
    if a.dim != b.dim {
        return Err(MaxentError::DimensionMismatch(a.dim, b.dim));
    }
    let mut kl = 0.0;
    for (&x, &y) in a.p.iter().zip(&b.p) {
        if x > 0.0 {
            if y <= UNDERFLOW {
                return Err(MaxentError::NotAbsolutelyContinuous(0));
            }
            kl += x * (x / y).ln();
        }
    }
    Ok(kl)
}

/// Spanning tree over the attributes of a query, with empirical node and edge
/// marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    attrs: Itemset,
    edges: Vec<(Attr, Attr)>,
    /// `p(a = 1)` per node, in attribute order.
    nodes: Vec<f64>,
    /// Pair tables indexed `ω_a + 2·ω_b` for edge `(a, b)` with `a < b`.
    pairs: Vec<[f64; 4]>,
}

impl TreeModel {
    /// Tree with the given edges over the attributes of `g`, with marginals
    /// from `d`. Edges must form a spanning tree.
    pub fn from_edges(g: &Itemset, edges: &[(Attr, Attr)], d: &Dataset) -> Result<Self, MaxentError> {
        let k = g.len();
        if edges.len() + 1 != k.max(1) {
            return Err(MaxentError::Invalid(format!("{} edges for {k} nodes", edges.len())));
        }
        let mut uf = UnionFind::new(k);
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let (a, b) = (a.min(b), a.max(b));
            let (Some(i), Some(j)) = (pos(g, a), pos(g, b)) else {
                return Err(MaxentError::Invalid(format!("edge ({a}, {b}) outside the query")));
            };
            if !uf.union(i, j) {
                return Err(MaxentError::Invalid("edges contain a cycle".into()));
            }
            norm.push((a, b));
        }
        let m = d.n_rows() as f64;
        let nodes = g.iter().map(|a| d.frequency(&Itemset::singleton(a))).collect();
        let pairs = norm
            .iter()
            .map(|&(a, b)| pair_table(d, a, b, m))
            .collect();
        Ok(TreeModel {
            attrs: g.clone(),
            edges: norm,
            nodes,
            pairs,
        })
    }

    pub fn attrs(&self) -> &Itemset {
        &self.attrs
    }

    pub fn edges(&self) -> &[(Attr, Attr)] {
        &self.edges
    }

    /// Sum of empirical mutual information over the edges.
    pub fn total_mutual_information(&self) -> f64 {
        self.pairs.iter().map(mutual_information).sum()
    }

    /// Singletons plus the edges that are proper subsets of the query.
    pub fn constraint_set(&self, d: &Dataset) -> ConstraintSet {
        let items = self
            .attrs
            .iter()
            .map(Itemset::singleton)
            .chain(self.edges.iter().map(|&(a, b)| Itemset::from([a, b])))
            .map(|x| {
                let t = d.frequency(&x);
                (x, t)
            });
        ConstraintSet::new(self.attrs.clone(), items)
    }
}

fn pos(g: &Itemset, a: Attr) -> Option<usize> {
    g.attrs().binary_search(&a).ok()
}

fn pair_table(d: &Dataset, a: Attr, b: Attr, m: f64) -> [f64; 4] {
    let c = d
        .outcome_counts(&Itemset::from([a, b]))
        .expect("pair within dataset");
    [c[0] as f64 / m, c[1] as f64 / m, c[2] as f64 / m, c[3] as f64 / m]
}

/// Mutual information (nats) of a 2×2 table indexed `ω_a + 2·ω_b`.
pub fn mutual_information(t: &[f64; 4]) -> f64 {
    let pa = [t[0] + t[2], t[1] + t[3]];
    let pb = [t[0] + t[1], t[2] + t[3]];
    let mut mi = 0.0;
    for (w, &x) in t.iter().enumerate() {
        if x > 0.0 {
            mi += x * (x / (pa[w & 1] * pb[w >> 1])).ln();
        }
    }
    mi.max(0.0)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Maximum spanning tree of the mutual-information graph over `g` (Kruskal).
/// Equal weights prefer the edge with the smaller first, then second, attribute.
pub fn chow_liu_tree(g: &Itemset, d: &Dataset) -> TreeModel {
    let m = d.n_rows() as f64;
    let mut cand = Vec::new();
    for (i, a) in g.iter().enumerate() {
        for b in g.iter().skip(i + 1) {
            let t = pair_table(d, a, b, m);
            cand.push((mutual_information(&t), a, b));
        }
    }
    cand.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut uf = UnionFind::new(g.len());
    let mut edges = Vec::new();
    for (_, a, b) in cand {
        let (i, j) = (pos(g, a).unwrap(), pos(g, b).unwrap());
        if uf.union(i, j) {
            edges.push((a, b));
        }
    }
    TreeModel::from_edges(g, &edges, d).expect("Kruskal yields a spanning tree")
}

/// The closed-form maximum-entropy distribution of a tree:
/// `Π_edges q(ω_a, ω_b) / Π_nodes q(ω_a)^(deg(a) − 1)`.
pub fn tree_distribution(t: &TreeModel) -> Result<JointDistribution, MaxentError> {
    let k = t.attrs.len();
    if k > MAX_DIM {
        return Err(MaxentError::TooLarge(k));
    }
    let mut degree = vec![0i32; k];
    let local: Vec<(usize, usize)> = t
        .edges
        .iter()
        .map(|&(a, b)| (pos(&t.attrs, a).unwrap(), pos(&t.attrs, b).unwrap()))
        .collect();
    for &(i, j) in &local {
        degree[i] += 1;
        degree[j] += 1;
    }
    let mut p = vec![0.0; 1 << k];
    for (w, out) in p.iter_mut().enumerate() {
        let bit = |j: usize| w >> j & 1;
        let mut num = 1.0;
        for (e, &(i, j)) in local.iter().enumerate() {
            num *= t.pairs[e][bit(i) + 2 * bit(j)];
        }
        if k == 1 {
            num = if bit(0) == 1 { t.nodes[0] } else { 1.0 - t.nodes[0] };
        }
        if num == 0.0 {
            continue;
        }
        let mut den = 1.0;
        for j in 0..k {
            let q = if bit(j) == 1 { t.nodes[j] } else { 1.0 - t.nodes[j] };
            let e = degree[j] - 1;
            if e > 0 {
                if q == 0.0 {
                    return Err(MaxentError::ZeroMarginal(t.attrs.attrs()[j]));
                }
                den *= q.powi(e);
            }
        }
        *out = num / den;
    }
    Ok(JointDistribution { dim: k, p })
}
