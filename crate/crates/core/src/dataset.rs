//! Binary transaction data: parsing, projection and empirical distributions.
//!
//! A dataset is stored column-wise: each attribute keeps the set of rows in
//! which it is 1 as a packed bit vector. Support counting is then a word-wise
//! AND and popcount, and projecting onto a small itemset only touches the
//! columns involved.
//!
//! Outcomes of a projection onto `G` are indexed so that the smallest attribute
//! of `G` is the least-significant bit.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::itemset::{Attr, Itemset};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("no transactions")]
    NoTransactions,
    #[error("line {line}: invalid item id {token:?}")]
    InvalidItem { line: usize, token: String },
    #[error("line {line}: invalid character {ch:?}, expected 0 or 1")]
    InvalidBit { line: usize, ch: char },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot project onto the empty itemset")]
    EmptyProjection,
    #[error("itemset {0} exceeds the attribute count {1}")]
    OutOfRange(Itemset, usize),
    #[error("itemset of size {0} is too large to tabulate")]
    TooLarge(usize),
}

/// Largest projection width for which dense outcome tables are built.
pub const MAX_TABLE_DIM: usize = 24;

const WORD: usize = 64;

/// Immutable binary dataset with `M` rows and `K` attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    n_rows: usize,
    columns: Vec<Vec<u64>>,
    item_ids: Vec<u64>,
}

impl Dataset {
    /// Builds a dataset from rows given as lists of attribute indices.
    pub fn from_transactions<T: AsRef<[Attr]>>(n_attrs: usize, rows: &[T]) -> Self {
        let words = rows.len().div_ceil(WORD);
        let mut columns = vec![vec![0u64; words]; n_attrs];
        for (r, row) in rows.iter().enumerate() {
            for &a in row.as_ref() {
                columns[a as usize][r / WORD] |= 1 << (r % WORD);
            }
        }
        Dataset {
            n_rows: rows.len(),
            columns,
            item_ids: (0..n_attrs as u64).collect(),
        }
    }

    /// Builds a dataset from dense 0/1 rows of equal length.
    pub fn from_bool_rows(rows: &[Vec<bool>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        let tx: Vec<Vec<Attr>> = rows
            .iter()
            .map(|r| {
                assert_eq!(r.len(), k, "ragged rows");
                r.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i as Attr)
                    .collect()
            })
            .collect();
        Self::from_transactions(k, &tx)
    }

    /// Builds a dataset from per-attribute bit columns of length `n_rows`.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<bool>>) -> Self {
        let words = n_rows.div_ceil(WORD);
        let packed = columns
            .iter()
            .map(|col| {
                assert_eq!(col.len(), n_rows, "column length mismatch");
                let mut w = vec![0u64; words];
                for (r, _) in col.iter().enumerate().filter(|(_, &b)| b) {
                    w[r / WORD] |= 1 << (r % WORD);
                }
                w
            })
            .collect::<Vec<_>>();
        Dataset {
            n_rows,
            item_ids: (0..packed.len() as u64).collect(),
            columns: packed,
        }
    }

    /// Number of transactions, `M`.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of attributes, `K`.
    pub fn n_attrs(&self) -> usize {
        self.columns.len()
    }

    /// Raw item ID of every attribute, as it appeared in the source file.
    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn item_id(&self, attr: Attr) -> u64 {
        self.item_ids[attr as usize]
    }

    /// Attribute index for a raw item ID.
    pub fn attr_of(&self, item_id: u64) -> Option<Attr> {
        self.item_ids
            .iter()
            .position(|&id| id == item_id)
            .map(|p| p as Attr)
    }

    /// Map from raw item ID to attribute index.
    pub fn id_index(&self) -> HashMap<u64, Attr> {
        self.item_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as Attr))
            .collect()
    }

    /// Renders an itemset using raw item IDs.
    pub fn render(&self, x: &Itemset) -> String {
        let mut s = String::new();
        for (i, a) in x.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", self.item_id(a));
        }
        s
    }

    pub fn value(&self, row: usize, attr: Attr) -> bool {
        self.columns[attr as usize][row / WORD] >> (row % WORD) & 1 == 1
    }

    /// The row as a dense 0/1 vector.
    pub fn row(&self, row: usize) -> Vec<bool> {
        (0..self.n_attrs() as Attr)
            .map(|a| self.value(row, a))
            .collect()
    }

    fn check(&self, x: &Itemset) -> Result<(), DatasetError> {
        match x.max_attr() {
            Some(a) if a as usize >= self.n_attrs() => {
                Err(DatasetError::OutOfRange(x.clone(), self.n_attrs()))
            }
            _ => Ok(()),
        }
    }

    /// Number of rows covering `x`. The empty itemset is covered by every row.
    ///
    /// Panics if `x` refers to attributes outside the dataset.
    pub fn count(&self, x: &Itemset) -> u64 {
        self.check(x).expect("itemset within attribute range");
        let mut attrs = x.iter();
        let Some(first) = attrs.next() else {
            return self.n_rows as u64;
        };
        let mut acc = self.columns[first as usize].clone();
        for a in attrs {
            for (w, c) in acc.iter_mut().zip(&self.columns[a as usize]) {
                *w &= c;
            }
        }
        acc.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Proportion of rows covering `x`.
    pub fn frequency(&self, x: &Itemset) -> f64 {
        assert!(self.n_rows > 0, "frequency of an empty dataset");
        self.count(x) as f64 / self.n_rows as f64
    }

    /// Keeps only the attributes of `g`, preserving row order.
    pub fn project(&self, g: &Itemset) -> Result<ProjectedDataset, DatasetError> {
        if g.is_empty() {
            return Err(DatasetError::EmptyProjection);
        }
        self.check(g)?;
        if g.len() > 32 {
            return Err(DatasetError::TooLarge(g.len()));
        }
        let mut rows = vec![0u32; self.n_rows];
        for (j, a) in g.iter().enumerate() {
            for (wi, &word) in self.columns[a as usize].iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let tz = bits.trailing_zeros() as usize;
                    rows[wi * WORD + tz] |= 1 << j;
                    bits &= bits - 1;
                }
            }
        }
        Ok(ProjectedDataset {
            attrs: g.clone(),
            rows,
        })
    }

    /// Dense outcome histogram of the projection onto `g`.
    pub fn outcome_counts(&self, g: &Itemset) -> Result<Vec<u64>, DatasetError> {
        if g.len() > MAX_TABLE_DIM {
            return Err(DatasetError::TooLarge(g.len()));
        }
        let pd = self.project(g)?;
        let mut hist = vec![0u64; 1 << g.len()];
        for &r in &pd.rows {
            hist[r as usize] += 1;
        }
        Ok(hist)
    }

    /// Support counts of every subset of `g`, indexed by local mask; entry 0 is `M`.
    pub fn subset_counts(&self, g: &Itemset) -> Result<Vec<u64>, DatasetError> {
        if g.is_empty() {
            return Ok(vec![self.n_rows as u64]);
        }
        let mut counts = self.outcome_counts(g)?;
        // superset-sum transform
        for j in 0..g.len() {
            for m in 0..counts.len() {
                if m >> j & 1 == 0 {
                    counts[m] += counts[m | 1 << j];
                }
            }
        }
        Ok(counts)
    }

    /// Keeps only the first `max_rows` transactions.
    pub fn truncate_rows(&self, max_rows: usize) -> Dataset {
        if max_rows >= self.n_rows {
            return self.clone();
        }
        let words = max_rows.div_ceil(WORD);
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut w = c[..words].to_vec();
                if !max_rows.is_multiple_of(WORD) {
                    w[words - 1] &= (1u64 << (max_rows % WORD)) - 1;
                }
                w
            })
            .collect();
        Dataset {
            n_rows: max_rows,
            columns,
            item_ids: self.item_ids.clone(),
        }
    }

    /// Keeps the `max_cols` most frequent attributes (ties to the lower index),
    /// in their original order. Raw item IDs are retained for reporting.
    pub fn top_columns(&self, max_cols: usize) -> Dataset {
        if max_cols >= self.n_attrs() {
            return self.clone();
        }
        let mut order: Vec<Attr> = (0..self.n_attrs() as Attr).collect();
        order.sort_by_key(|&a| (std::cmp::Reverse(self.count(&Itemset::singleton(a))), a));
        let mut keep: Vec<Attr> = order[..max_cols].to_vec();
        keep.sort_unstable();
        Dataset {
            n_rows: self.n_rows,
            columns: keep
                .iter()
                .map(|&a| self.columns[a as usize].clone())
                .collect(),
            item_ids: keep.iter().map(|&a| self.item_ids[a as usize]).collect(),
        }
    }

    /// FIMI text: one line per row listing raw item IDs.
    pub fn to_fimi(&self) -> String {
        let mut out = String::new();
        for r in 0..self.n_rows {
            let mut first = true;
            for a in 0..self.n_attrs() as Attr {
                if self.value(r, a) {
                    if !first {
                        out.push(' ');
                    }
                    let _ = write!(out, "{}", self.item_id(a));
                    first = false;
                }
            }
            out.push('\n');
        }
        out
    }

    /// Dense text: one line of `K` characters in `{0,1}` per row.
    pub fn to_dense(&self) -> String {
        let mut out = String::with_capacity(self.n_rows * (self.n_attrs() + 1));
        for r in 0..self.n_rows {
            for a in 0..self.n_attrs() as Attr {
                out.push(if self.value(r, a) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

/// Parses FIMI-style sparse data: one transaction per line, whitespace-separated
/// non-negative item IDs. `K` is one more than the largest ID; blank lines are
/// empty transactions.
pub fn parse_fimi(text: &str) -> Result<Dataset, DatasetError> {
    if text.is_empty() {
        return Err(DatasetError::NoTransactions);
    }
    let mut rows = Vec::new();
    let mut k = 0usize;
    for (line, l) in lines(text) {
        let mut row = Vec::new();
        for tok in l.split_whitespace() {
            let id: Attr = tok.parse().map_err(|_| DatasetError::InvalidItem {
                line,
                token: tok.to_string(),
            })?;
            k = k.max(id as usize + 1);
            row.push(id);
        }
        row.sort_unstable();
        row.dedup();
        rows.push(row);
    }
    Ok(Dataset::from_transactions(k, &rows))
}

/// Parses dense 0/1 rows; single spaces between characters are allowed.
pub fn parse_dense(text: &str) -> Result<Dataset, DatasetError> {
    if text.is_empty() {
        return Err(DatasetError::NoTransactions);
    }
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (line, l) in lines(text) {
        let mut row = Vec::with_capacity(l.len());
        for ch in l.chars() {
            match ch {
                '0' => row.push(false),
                '1' => row.push(true),
                ' ' => {}
                _ => return Err(DatasetError::InvalidBit { line, ch }),
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(DatasetError::Ragged {
                    line,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    Ok(Dataset::from_bool_rows(&rows))
}

/// A dataset restricted to the attributes of `G`; each row is an outcome index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectedDataset {
    attrs: Itemset,
    rows: Vec<u32>,
}

impl ProjectedDataset {
    pub fn attrs(&self) -> &Itemset {
        &self.attrs
    }

    pub fn dim(&self) -> usize {
        self.attrs.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Outcome index of each row.
    pub fn outcomes(&self) -> &[u32] {
        &self.rows
    }

    /// Row `r` as a 0/1 vector in ascending attribute order.
    pub fn row(&self, r: usize) -> Vec<bool> {
        (0..self.dim()).map(|j| self.rows[r] >> j & 1 == 1).collect()
    }
}

/// Empirical distribution `q_G` over the outcomes of a projection.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    dim: usize,
    n_rows: u64,
    counts: BTreeMap<usize, u64>,
}

impl EmpiricalDistribution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> u64 {
        self.n_rows
    }

    pub fn count(&self, outcome: usize) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn mass(&self, outcome: usize) -> f64 {
        self.count(outcome) as f64 / self.n_rows as f64
    }

    /// Nonzero entries as `(outcome, probability)`, in outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let m = self.n_rows as f64;
        self.counts.iter().map(move |(&o, &c)| (o, c as f64 / m))
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// Dense table of all `2^dim` probabilities.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.dim];
        for (o, q) in self.iter() {
            p[o] = q;
        }
        p
    }
}

/// Empirical distribution of a projected dataset.
pub fn empirical_distribution(pd: &ProjectedDataset) -> EmpiricalDistribution {
    let mut counts = BTreeMap::new();
    for &r in &pd.rows {
        *counts.entry(r as usize).or_insert(0) += 1;
    }
    EmpiricalDistribution {
        dim: pd.dim(),
        n_rows: pd.n_rows() as u64,
        counts,
    }
}

/// Entropy in nats over the nonzero entries.
pub fn entropy_sparse(q: &EmpiricalDistribution) -> f64 {
    -q.iter().map(|(_, p)| p * p.ln()).sum::<f64>()
}
