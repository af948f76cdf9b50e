//! Itemset families, downward closure, negative borders and the per-query
//! constraint sets that feed the maximum-entropy solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::itemset::{Attr, Itemset};

#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("family is not downward closed: {0} is missing")]
    NotDownwardClosed(Itemset),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A set of itemsets, optionally carrying a frequency for every member.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemsetFamily {
    members: BTreeSet<Itemset>,
    theta: Option<BTreeMap<Itemset, f64>>,
}

impl ItemsetFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_itemsets<I: IntoIterator<Item = Itemset>>(items: I) -> Self {
        ItemsetFamily {
            members: items.into_iter().collect(),
            theta: None,
        }
    }

    /// Family with a frequency attached to every member.
    pub fn from_frequencies<I: IntoIterator<Item = (Itemset, f64)>>(items: I) -> Self {
        let theta: BTreeMap<Itemset, f64> = items.into_iter().collect();
        ItemsetFamily {
            members: theta.keys().cloned().collect(),
            theta: Some(theta),
        }
    }

    /// Attaches dataset frequencies to every member.
    pub fn with_frequencies(mut self, d: &Dataset) -> Self {
        self.theta = Some(
            self.members
                .iter()
                .map(|x| (x.clone(), d.frequency(x)))
                .collect(),
        );
        self
    }

    pub fn insert(&mut self, x: Itemset) {
        assert!(self.theta.is_none(), "insert without frequency into a weighted family");
        self.members.insert(x);
    }

    pub fn insert_with_frequency(&mut self, x: Itemset, theta: f64) {
        assert!(self.theta.is_some() || self.members.is_empty());
        self.theta.get_or_insert_with(BTreeMap::new).insert(x.clone(), theta);
        self.members.insert(x);
    }

    pub fn contains(&self, x: &Itemset) -> bool {
        self.members.contains(x)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in (size, bit pattern) order.
    pub fn iter(&self) -> impl Iterator<Item = &Itemset> {
        self.members.iter()
    }

    pub fn frequency(&self, x: &Itemset) -> Option<f64> {
        self.theta.as_ref()?.get(x).copied()
    }

    pub fn has_frequencies(&self) -> bool {
        self.theta.is_some()
    }

    /// Members of the given size.
    pub fn of_size(&self, size: usize) -> impl Iterator<Item = &Itemset> {
        self.members.iter().filter(move |x| x.len() == size)
    }

    /// `true` when every nonempty subset of every member is a member.
    pub fn is_downward_closed(&self) -> bool {
        self.missing_subset().is_none()
    }

    fn missing_subset(&self) -> Option<Itemset> {
        // Checking the immediate subsets of each member suffices.
        self.members.iter().find_map(|x| {
            if x.len() < 2 {
                return None;
            }
            x.facets().find(|f| !self.members.contains(f))
        })
    }

    /// Nonempty itemsets within `universe` that are not members but whose proper
    /// subsets all are. The empty set counts as an implicit member.
    pub fn negative_border(&self, universe: &Itemset) -> Result<Vec<Itemset>, FamilyError> {
        if let Some(x) = self.missing_subset() {
            return Err(FamilyError::NotDownwardClosed(x));
        }
        let mut border = BTreeSet::new();
        let empty = Itemset::empty();
        let bases = std::iter::once(&empty).chain(self.members.iter().filter(|x| x.is_subset(universe)));
        for base in bases {
            for a in universe.iter().filter(|&a| !base.contains(a)) {
                let cand = base.with(a);
                if self.members.contains(&cand) || border.contains(&cand) {
                    continue;
                }
                if cand.len() == 1 || cand.facets().all(|f| self.members.contains(&f)) {
                    border.insert(cand);
                }
            }
        }
        Ok(border.into_iter().collect())
    }

    /// Renders the family with raw item IDs, one itemset per line, with a
    /// `:θ` suffix when frequencies are attached.
    pub fn to_text(&self, d: &Dataset) -> String {
        let mut out = String::new();
        for x in &self.members {
            out.push_str(&d.render(x));
            if let Some(t) = self.frequency(x) {
                let _ = write!(out, ":{t}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format of [`ItemsetFamily::to_text`], mapping raw item IDs
    /// through `d`. A family with any `:θ` suffix must have one on every line.
    pub fn parse(text: &str, d: &Dataset) -> Result<Self, FamilyError> {
        let index = d.id_index();
        let mut plain = Vec::new();
        let mut weighted = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (items, theta) = match raw.split_once(':') {
                Some((items, t)) => {
                    let t: f64 = t.trim().parse().map_err(|_| FamilyError::Parse {
                        line,
                        msg: format!("invalid frequency {t:?}"),
                    })?;
                    if !(0.0..=1.0).contains(&t) {
                        return Err(FamilyError::Parse {
                            line,
                            msg: format!("frequency {t} outside [0, 1]"),
                        });
                    }
                    (items, Some(t))
                }
                None => (raw, None),
            };
            let mut attrs: Vec<Attr> = Vec::new();
            for tok in items.split_whitespace() {
                let id: u64 = tok.parse().map_err(|_| FamilyError::Parse {
                    line,
                    msg: format!("invalid item id {tok:?}"),
                })?;
                let a = index.get(&id).ok_or_else(|| FamilyError::Parse {
                    line,
                    msg: format!("unknown item id {id}"),
                })?;
                attrs.push(*a);
            }
            let x = Itemset::new(attrs);
            match theta {
                Some(t) => weighted.push((x, t)),
                None => plain.push(x),
            }
        }
        match (plain.is_empty(), weighted.is_empty()) {
            (_, true) => Ok(Self::from_itemsets(plain)),
            (true, false) => Ok(Self::from_frequencies(weighted)),
            (false, false) => Err(FamilyError::Parse {
                line: 0,
                msg: "mixed lines with and without frequencies".into(),
            }),
        }
    }
}

impl FromIterator<Itemset> for ItemsetFamily {
    fn from_iter<T: IntoIterator<Item = Itemset>>(iter: T) -> Self {
        Self::from_itemsets(iter)
    }
}

/// One frequency constraint `p(X = 1) = θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub itemset: Itemset,
    pub theta: f64,
}

/// The projected family of a query `G`: nonempty proper subsets of `G` with
/// their target frequencies, sorted by (size, bit pattern).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    query: Itemset,
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    /// Builds a constraint set, dropping anything that is not a nonempty proper
    /// subset of `query` and collapsing duplicates.
    pub fn new<I: IntoIterator<Item = (Itemset, f64)>>(query: Itemset, items: I) -> Self {
        let map: BTreeMap<Itemset, f64> = items
            .into_iter()
            .filter(|(x, _)| !x.is_empty() && x.is_proper_subset(&query))
            .collect();
        ConstraintSet {
            query,
            constraints: map
                .into_iter()
                .map(|(itemset, theta)| Constraint { itemset, theta })
                .collect(),
        }
    }

    pub fn query(&self) -> &Itemset {
        &self.query
    }

    pub fn dim(&self) -> usize {
        self.query.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn itemsets(&self) -> impl Iterator<Item = &Itemset> {
        self.constraints.iter().map(|c| &c.itemset)
    }

    /// Constraints as `(local mask, θ)` pairs relative to the query.
    pub fn local(&self) -> Vec<(usize, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let m = self.query.local_mask(&c.itemset).expect("constraint within query");
                (m, c.theta)
            })
            .collect()
    }

    /// `true` if every constraint itemset has size one.
    pub fn is_singletons_only(&self) -> bool {
        self.constraints.iter().all(|c| c.itemset.len() == 1)
    }

    /// The constraint set extended with one more itemset.
    pub fn with(&self, x: Itemset, theta: f64) -> ConstraintSet {
        ConstraintSet::new(
            self.query.clone(),
            self.constraints
                .iter()
                .map(|c| (c.itemset.clone(), c.theta))
                .chain(std::iter::once((x, theta))),
        )
    }
}

/// The fixed families: singletons (`I`), singletons and pairs (`C`), and all
/// itemsets (`A`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    Independence,
    Covariance,
    AllSubsets,
}

impl FamilyKind {
    fn max_size(self) -> usize {
        match self {
            FamilyKind::Independence => 1,
            FamilyKind::Covariance => 2,
            FamilyKind::AllSubsets => usize::MAX,
        }
    }
}

/// Members of `f` that are nonempty proper subsets of `g`, with frequencies
/// taken from `d`.
pub fn project_family(f: &ItemsetFamily, g: &Itemset, d: &Dataset) -> ConstraintSet {
    ConstraintSet::new(
        g.clone(),
        f.iter()
            .filter(|x| !x.is_empty() && x.is_proper_subset(g))
            .map(|x| (x.clone(), d.frequency(x))),
    )
}

/// The projected family of one of the fixed families, without materialising
/// the family over all attributes.
pub fn canonical_family(kind: FamilyKind, g: &Itemset, d: &Dataset) -> ConstraintSet {
    let max = kind.max_size();
    if g.len() <= 24 {
        let counts = d.subset_counts(g).expect("query within dataset");
        let m = d.n_rows() as f64;
        return ConstraintSet::new(
            g.clone(),
            g.proper_subsets()
                .filter(|x| x.len() <= max)
                .map(|x| {
                    let c = counts[g.local_mask(&x).unwrap()];
                    (x, c as f64 / m)
                }),
        );
    }
    ConstraintSet::new(
        g.clone(),
        g.proper_subsets()
            .filter(|x| x.len() <= max)
            .map(|x| {
                let t = d.frequency(&x);
                (x, t)
            }),
    )
}
