//! Rank measures: divergence of the data from a maximum-entropy model, and its
//! χ² normalization.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dataset::{empirical_distribution, Dataset, DatasetError, EmpiricalDistribution};
use crate::family::{canonical_family, ConstraintSet, FamilyKind, ItemsetFamily};
use crate::itemset::Itemset;
use crate::maxent::{
    chow_liu_tree, independence_distribution, iterative_scaling_with_hint, kl_divergence, tree_distribution,
    JointDistribution, MaxentError, SolverConfig, TreeModel,
};

/// Raw ranks below this are reported as exactly zero; they are solver noise.
pub const RAW_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error(transparent)]
    Maxent(#[from] MaxentError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("fully constrained: {constraints} constraints on an itemset of size {size}")]
    FullyConstrained { size: usize, constraints: usize },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
}

/// The constraint family behind a rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Singletons.
    Ind,
    /// Singletons and pairs.
    Cov,
    /// All proper subsets.
    All,
    /// Best Chow-Liu tree.
    Tree,
    /// Greedily grown downward-closed family.
    Greedy,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Ind,
        ModelKind::Cov,
        ModelKind::All,
        ModelKind::Tree,
        ModelKind::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ind => "ind",
            ModelKind::Cov => "cov",
            ModelKind::All => "all",
            ModelKind::Tree => "tree",
            ModelKind::Greedy => "greedy",
        }
    }

    /// Short family symbol: `I`, `C`, `A`, `T*`, `F*`.
    pub fn symbol(self) -> &'static str {
        match self {
            ModelKind::Ind => "I",
            ModelKind::Cov => "C",
            ModelKind::All => "A",
            ModelKind::Tree => "T*",
            ModelKind::Greedy => "F*",
        }
    }

    fn fixed(self) -> Option<FamilyKind> {
        match self {
            ModelKind::Ind => Some(FamilyKind::Independence),
            ModelKind::Cov => Some(FamilyKind::Covariance),
            ModelKind::All => Some(FamilyKind::AllSubsets),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| RankError::UnknownModel(s.to_string()))
    }
}

/// Rank of one itemset under one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub itemset: Itemset,
    pub model: ModelKind,
    /// `KL(q_G ‖ p*)` in nats.
    pub raw: f64,
    pub dof: u64,
    /// χ² cdf of `2·M·raw`.
    pub normalized: f64,
    pub sample_size: u64,
    /// Constraint itemsets actually used.
    pub family: Vec<Itemset>,
}

impl RankResult {
    /// Significant at risk level `alpha`.
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.normalized > 1.0 - alpha
    }
}

/// The empirical side of a query, computed once and shared by every model.
struct Query<'a> {
    g: &'a Itemset,
    m: u64,
    q: EmpiricalDistribution,
    q_dense: Vec<f64>,
}

impl<'a> Query<'a> {
    fn new(g: &'a Itemset, d: &Dataset) -> Result<Self, RankError> {
        let q = empirical_distribution(&d.project(g)?);
        if g.len() > crate::maxent::MAX_DIM {
            return Err(MaxentError::TooLarge(g.len()).into());
        }
        Ok(Query {
            g,
            m: d.n_rows() as u64,
            q_dense: q.to_dense(),
            q,
        })
    }

    fn maxent(&self, c: &ConstraintSet, cfg: &SolverConfig) -> Result<JointDistribution, RankError> {
        if c.is_singletons_only() {
            let mut marg = vec![0.5; self.g.len()];
            for (mask, t) in c.local() {
                marg[mask.trailing_zeros() as usize] = t;
            }
            return Ok(independence_distribution(&marg));
        }
        Ok(iterative_scaling_with_hint(c, cfg, Some(&self.q_dense))?)
    }

    /// `KL(q ‖ p)` summed directly rather than as `H(p) − H(q)`: the two
    /// agree at the exact fit, but the direct sum is second order in the
    /// solver's residual when `p ≈ q`.
    fn raw_of(&self, p: &JointDistribution) -> Result<f64, RankError> {
        let r = kl_divergence(&self.q, p)?;
        Ok(if r < RAW_EPS { 0.0 } else { r })
    }

    fn raw(&self, c: &ConstraintSet, cfg: &SolverConfig) -> Result<f64, RankError> {
        self.raw_of(&self.maxent(c, cfg)?)
    }

    fn result(&self, model: ModelKind, raw: f64, family: Vec<Itemset>) -> Result<RankResult, RankError> {
        let dof = degrees_of_freedom(self.g.len(), family.len(), model)?;
        Ok(RankResult {
            itemset: self.g.clone(),
            model,
            raw,
            dof,
            normalized: chi2_cdf(2.0 * self.m as f64 * raw, dof),
            sample_size: self.m,
            family,
        })
    }
}

/// `KL(q_G ‖ p*)` in nats for the maximum-entropy model `p*` under `c`;
/// equal to `H(p*) − H(q_G)` at the exact fit.
pub fn rank_raw(g: &Itemset, c: &ConstraintSet, d: &Dataset, cfg: &SolverConfig) -> Result<f64, RankError> {
    Query::new(g, d)?.raw(c, cfg)
}

/// Rank of a single attribute with frequency `theta` (no constraints).
pub fn rank_single(theta: f64) -> f64 {
    let xlog = |x: f64| if x > 0.0 { x * (2.0 * x).ln() } else { 0.0 };
    xlog(1.0 - theta) + xlog(theta)
}

/// Degrees of freedom of the χ² normalization: `2^|G| − 1 − |F_G|`, and 1 for
/// the all-subsets model.
pub fn degrees_of_freedom(g_size: usize, n_constraints: usize, kind: ModelKind) -> Result<u64, RankError> {
    let cells = 1u64 << g_size;
    let full = || RankError::FullyConstrained {
        size: g_size,
        constraints: n_constraints,
    };
    if n_constraints as u64 > cells.saturating_sub(2) && g_size > 0 {
        return Err(full());
    }
    if kind == ModelKind::All {
        return Ok(1);
    }
    match cells - 1 - n_constraints as u64 {
        0 => Err(full()),
        k => Ok(k),
    }
}

/// `P(χ²_k ≤ x)`, the regularized lower incomplete gamma function `P(k/2, x/2)`.
pub fn chi2_cdf(x: f64, k: u64) -> f64 {
    assert!(k >= 1, "χ² needs at least one degree of freedom");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let a = k as f64 / 2.0;
    let z = x / 2.0;
    let log_prefix = a * z.ln() - z - ln_gamma(a);
    if x < k as f64 + 1.0 {
        // P(a, z) = z^a e^{-z} / Γ(a+1) · Σ z^n / ((a+1)…(a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..100_000 {
            ap += 1.0;
            term *= z / ap;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        (log_prefix + sum.ln()).exp().min(1.0)
    } else {
        // Q(a, z) by the modified Lentz continued fraction
        const TINY: f64 = 1e-300;
        let mut b = z + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut dd = 1.0 / b;
        let mut h = dd;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            dd = an * dd + b;
            if dd.abs() < TINY {
                dd = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            dd = 1.0 / dd;
            let delta = dd * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - (log_prefix.exp() * h)).max(0.0)
    }
}

/// Rank of `g` under `model`.
pub fn rank_normalized(g: &Itemset, model: ModelKind, d: &Dataset, cfg: &SolverConfig) -> Result<RankResult, RankError> {
    match model {
        ModelKind::Tree => Ok(optimal_tree_rank(g, d, cfg)?.0),
        ModelKind::Greedy => Ok(greedy_family_rank(g, d, cfg)?.0),
        fixed => {
            let q = Query::new(g, d)?;
            let c = canonical_family(fixed.fixed().unwrap(), g, d);
            let raw = q.raw(&c, cfg)?;
            q.result(fixed, raw, c.itemsets().cloned().collect())
        }
    }
}

/// Rank of `g` under an explicit constraint set, reported as `model`.
pub fn rank_with_constraints(
    g: &Itemset,
    c: &ConstraintSet,
    model: ModelKind,
    d: &Dataset,
    cfg: &SolverConfig,
) -> Result<RankResult, RankError> {
    let q = Query::new(g, d)?;
    let raw = q.raw(c, cfg)?;
    q.result(model, raw, c.itemsets().cloned().collect())
}

/// Raw rank of `g` under the closed-form distribution of tree `t`.
pub fn tree_rank_raw(t: &TreeModel, d: &Dataset) -> Result<f64, RankError> {
    let q = Query::new(t.attrs(), d)?;
    q.raw_of(&tree_distribution(t)?)
}

/// Rank under the Chow-Liu tree of `g`.
///
/// A tree over two attributes would constrain `G` itself, which is not a
/// proper subset; queries of size at most two therefore use the singletons,
/// like every other model, and no tree is returned.
pub fn optimal_tree_rank(
    g: &Itemset,
    d: &Dataset,
    cfg: &SolverConfig,
) -> Result<(RankResult, Option<TreeModel>), RankError> {
    let q = Query::new(g, d)?;
    if g.len() <= 2 {
        let c = canonical_family(FamilyKind::Independence, g, d);
        let raw = q.raw(&c, cfg)?;
        return Ok((q.result(ModelKind::Tree, raw, c.itemsets().cloned().collect())?, None));
    }
    let t = chow_liu_tree(g, d);
    let raw = q.raw_of(&tree_distribution(&t)?)?;
    let family = t.constraint_set(d).itemsets().cloned().collect();
    Ok((q.result(ModelKind::Tree, raw, family)?, Some(t)))
}

/// Greedy search for a downward-closed family: start from the singletons and
/// repeatedly add the border itemset that lowers the normalized rank most,
/// while it strictly decreases. Ties go to the smallest itemset.
pub fn greedy_family_rank(
    g: &Itemset,
    d: &Dataset,
    cfg: &SolverConfig,
) -> Result<(RankResult, ItemsetFamily), RankError> {
    let q = Query::new(g, d)?;
    let mut c = canonical_family(FamilyKind::Independence, g, d);
    let mut best = q.result(ModelKind::Greedy, q.raw(&c, cfg)?, c.itemsets().cloned().collect())?;
    loop {
        let members: ItemsetFamily = c.itemsets().cloned().collect();
        let border: Vec<Itemset> = members
            .negative_border(g)
            .expect("constraint family is downward closed")
            .into_iter()
            .filter(|x| x.is_proper_subset(g))
            .collect();
        if border.is_empty() {
            break;
        }
        let scored: Vec<Result<(ConstraintSet, RankResult), RankError>> = border
            .par_iter()
            .map(|x| {
                let next = c.with(x.clone(), d.frequency(x));
                let raw = q.raw(&next, cfg)?;
                let r = q.result(ModelKind::Greedy, raw, next.itemsets().cloned().collect())?;
                Ok((next, r))
            })
            .collect();
        let mut pick: Option<(ConstraintSet, RankResult)> = None;
        for s in scored {
            let (next, r) = s?;
            if pick.as_ref().is_none_or(|(_, p)| r.normalized < p.normalized) {
                pick = Some((next, r));
            }
        }
        let (next, r) = pick.expect("nonempty border");
        if r.normalized < best.normalized {
            c = next;
            best = r;
        } else {
            break;
        }
    }
    let family = c.itemsets().cloned().collect();
    Ok((best, family))
}
