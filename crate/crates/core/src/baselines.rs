//! Reference measures computed from the projected outcome table: support,
//! Brin's χ² independence statistic and collective strength.

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::itemset::Itemset;
use crate::maxent::independence_distribution;
use crate::rank::chi2_cdf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("measure needs at least two attributes")]
    TooSmall,
    #[error("independence model gives no mass to the all-0/all-1 outcomes")]
    DegenerateMarginals,
}

/// Empirical table and independence model of the projection onto `g`.
fn tables(g: &Itemset, d: &Dataset) -> Result<(Vec<f64>, Vec<f64>), DatasetError> {
    let m = d.n_rows() as f64;
    let q: Vec<f64> = d.outcome_counts(g)?.into_iter().map(|c| c as f64 / m).collect();
    let marg: Vec<f64> = g.iter().map(|a| d.frequency(&Itemset::singleton(a))).collect();
    Ok((q, independence_distribution(&marg).probs().to_vec()))
}

/// `Σ_ω (q(ω) − p(ω))² / p(ω)` against the independence model, on the
/// probability scale (multiply by `M` for the usual χ² statistic). Outcomes
/// the model excludes but the data contain make it `+∞`.
pub fn brin_chi2(g: &Itemset, d: &Dataset) -> Result<f64, DatasetError> {
    let (q, p) = tables(g, d)?;
    let mut s = 0.0;
    for (&qw, &pw) in q.iter().zip(&p) {
        if pw > 0.0 {
            s += (qw - pw) * (qw - pw) / pw;
        } else if qw > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(s)
}

/// Brin's χ² independence test as a probability: the χ² cdf of `M · brin`
/// with `2^|G| − 1 − |G|` degrees of freedom. Undefined for single attributes.
pub fn brin_test(g: &Itemset, d: &Dataset) -> Result<f64, BaselineError> {
    if g.len() < 2 {
        return Err(BaselineError::TooSmall);
    }
    let dof = (1u64 << g.len()) - 1 - g.len() as u64;
    Ok(chi2_cdf(d.n_rows() as f64 * brin_chi2(g, d)?, dof))
}

/// `[q(good)/p(good)] · [p(bad)/q(bad)]`, where good outcomes are all-0 or
/// all-1 on `g`. Equals 1 under exact independence; `+∞` when every row is
/// good.
pub fn collective_strength(g: &Itemset, d: &Dataset) -> Result<f64, BaselineError> {
    if g.len() < 2 {
        return Err(BaselineError::TooSmall);
    }
    let (q, p) = tables(g, d)?;
    let full = q.len() - 1;
    let (qg, pg) = (q[0] + q[full], p[0] + p[full]);
    if pg <= 0.0 {
        return Err(BaselineError::DegenerateMarginals);
    }
    let (qb, pb) = (1.0 - qg, 1.0 - pg);
    if qb <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(qg / pg * (pb / qb))
}

/// Support of `g`.
pub fn frequency_rank(g: &Itemset, d: &Dataset) -> f64 {
    d.frequency(g)
}
