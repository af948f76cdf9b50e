//! Inclusion-exclusion bounds on itemset frequencies and level-wise mining of
//! (almost) non-derivable itemsets.
//!
//! For `Y ⊆ G` let `δ_Y = Σ_{Y ⊆ Z ⊊ G} (−1)^{|G∖Z|+1} count(Z)`. Every `δ_Y`
//! bounds `count(G)`: from above when `|G∖Y|` is odd, from below when even.
//! Sums are taken over integer support counts, so the alternating signs
//! introduce no rounding.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::family::ItemsetFamily;
use crate::itemset::Itemset;

/// Widest itemset for which bounds are computed (the cost is `3^|G|`).
pub const MAX_BOUND_DIM: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DerivabilityError {
    #[error("missing support of sub-itemset {0}")]
    MissingSubset(Itemset),
    #[error("cannot bound the empty itemset")]
    Empty,
    #[error("itemset of size {0} is too large to bound")]
    TooLarge(usize),
    #[error("inconsistent sub-itemset supports: lower bound {lower} exceeds upper bound {upper}")]
    Inconsistent { lower: i64, upper: i64 },
}

/// Bounds on the frequency of an itemset implied by its proper subsets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyBounds {
    pub lower: f64,
    pub upper: f64,
    /// Bound width in transactions.
    pub width_tx: u64,
}

impl FrequencyBounds {
    pub fn is_derivable(&self) -> bool {
        self.width_tx == 0
    }

    /// `true` when the width reaches `n` transactions; `n = 0` asks for a
    /// strictly positive width.
    pub fn is_almost_non_derivable(&self, n: u64) -> bool {
        self.width_tx >= n.max(1)
    }
}

/// Bounds on `count(G)/M` given the support counts of all nonempty proper
/// subsets of `g` out of `m` transactions.
pub fn ie_bounds(
    g: &Itemset,
    sub_counts: &BTreeMap<Itemset, u64>,
    m: u64,
) -> Result<FrequencyBounds, DerivabilityError> {
    if g.is_empty() {
        return Err(DerivabilityError::Empty);
    }
    if g.len() > MAX_BOUND_DIM {
        return Err(DerivabilityError::TooLarge(g.len()));
    }
    let full = (1usize << g.len()) - 1;
    let mut counts = vec![0i64; full];
    counts[0] = m as i64;
    for (mask, c) in counts.iter_mut().enumerate().skip(1) {
        let x = g.sub_from_local_mask(mask);
        *c = *sub_counts
            .get(&x)
            .ok_or(DerivabilityError::MissingSubset(x))? as i64;
    }
    bounds_from_local_counts(g.len(), &counts, m)
}

/// Same as [`ie_bounds`] but from frequencies, which are rounded to the nearest
/// multiple of `1/m`.
pub fn ie_bounds_from_frequencies(
    g: &Itemset,
    sub_freqs: &BTreeMap<Itemset, f64>,
    m: u64,
) -> Result<FrequencyBounds, DerivabilityError> {
    let counts = sub_freqs
        .iter()
        .map(|(x, &f)| (x.clone(), (f * m as f64).round() as u64))
        .collect();
    ie_bounds(g, &counts, m)
}

/// Bounds of `g` from the dataset's own sub-itemset supports.
pub fn bounds(g: &Itemset, d: &Dataset) -> Result<FrequencyBounds, DerivabilityError> {
    if g.is_empty() {
        return Err(DerivabilityError::Empty);
    }
    if g.len() > MAX_BOUND_DIM {
        return Err(DerivabilityError::TooLarge(g.len()));
    }
    let mut counts: Vec<i64> = d
        .subset_counts(g)
        .expect("itemset within dataset")
        .into_iter()
        .map(|c| c as i64)
        .collect();
    counts.pop();
    bounds_from_local_counts(g.len(), &counts, d.n_rows() as u64)
}

/// `counts[z]` is the support of the subset with local mask `z`, for every
/// `z` except the full mask.
fn bounds_from_local_counts(
    k: usize,
    counts: &[i64],
    m: u64,
) -> Result<FrequencyBounds, DerivabilityError> {
    let full = (1usize << k) - 1;
    let mut lower = 0i64;
    let mut upper = m as i64;
    for y in 0..full {
        let rest = full & !y;
        let mut delta = 0i64;
        // enumerate z = y | s for every s ⊊ rest
        let mut s = rest;
        loop {
            s = (s.wrapping_sub(1)) & rest;
            let z = y | s;
            let gap = k - z.count_ones() as usize;
            if gap % 2 == 1 {
                delta += counts[z];
            } else {
                delta -= counts[z];
            }
            if s == 0 {
                break;
            }
        }
        if rest.count_ones() % 2 == 1 {
            upper = upper.min(delta);
        } else {
            lower = lower.max(delta);
        }
    }
    if lower > upper {
        return Err(DerivabilityError::Inconsistent { lower, upper });
    }
    let mf = m as f64;
    Ok(FrequencyBounds {
        lower: lower as f64 / mf,
        upper: upper as f64 / mf,
        width_tx: (upper - lower) as u64,
    })
}

/// `true` when the frequency of `g` is fixed by the frequencies of its proper
/// subsets.
pub fn is_derivable(g: &Itemset, d: &Dataset) -> bool {
    bounds(g, d).map(|b| b.is_derivable()).unwrap_or(false)
}

/// All itemsets of size at most `max_size` whose bound width is at least `n`
/// transactions (strictly positive when `n = 0`), with frequencies attached.
///
/// The family is downward closed, so it is mined level-wise: candidates of
/// size `k` join two survivors of size `k − 1` sharing all but their last
/// attribute, and are dropped unless every facet survived.
pub fn mine_andi(d: &Dataset, n: u64, max_size: usize) -> ItemsetFamily {
    let mut family = ItemsetFamily::new();
    let mut level: Vec<Itemset> = (0..d.n_attrs() as u32)
        .map(Itemset::singleton)
        .collect();
    let mut size = 1;
    while !level.is_empty() && size <= max_size.min(MAX_BOUND_DIM) {
        let survivors: Vec<Itemset> = level
            .par_iter()
            .filter(|x| bounds(x, d).is_ok_and(|b| b.is_almost_non_derivable(n)))
            .cloned()
            .collect();
        for x in &survivors {
            family.insert_with_frequency(x.clone(), d.frequency(x));
        }
        level = join_level(&survivors);
        size += 1;
    }
    family
}

/// Apriori candidate generation from one sorted level.
fn join_level(level: &[Itemset]) -> Vec<Itemset> {
    let known: BTreeSet<&Itemset> = level.iter().collect();
    let mut by_prefix: BTreeMap<&[u32], Vec<u32>> = BTreeMap::new();
    for x in level {
        let (last, prefix) = x.attrs().split_last().expect("nonempty");
        by_prefix.entry(prefix).or_default().push(*last);
    }
    let mut out = Vec::new();
    for (prefix, tails) in by_prefix {
        for (i, &a) in tails.iter().enumerate() {
            for &b in &tails[i + 1..] {
                let cand = Itemset::new(prefix.iter().copied().chain([a, b]));
                if cand.facets().all(|f| known.contains(&f)) {
                    out.push(cand);
                }
            }
        }
    }
    out.sort();
    out
}
