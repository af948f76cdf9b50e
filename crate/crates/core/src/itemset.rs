//! Itemsets: sets of attribute indices.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Attribute index within a [`Dataset`](crate::Dataset).
pub type Attr = u32;

/// A set of attributes, stored as a sorted list of attribute indices.
///
/// Conceptually this is a bit mask over `0..K`; the sorted-list encoding keeps
/// it independent of the attribute count. Itemsets order by size first and then
/// by the numeric value of the bit mask they denote.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Itemset(Vec<Attr>);

impl Itemset {
    /// The empty itemset.
    pub fn empty() -> Self {
        Itemset(Vec::new())
    }

    /// Builds an itemset from arbitrary attribute indices; duplicates collapse.
    pub fn new<I: IntoIterator<Item = Attr>>(attrs: I) -> Self {
        let mut v: Vec<Attr> = attrs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Itemset(v)
    }

    pub fn singleton(attr: Attr) -> Self {
        Itemset(vec![attr])
    }

    /// Itemset whose members are the set bits of `mask`.
    pub fn from_mask(mask: u64) -> Self {
        Itemset((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    /// The first `k` attributes, `0..k`.
    pub fn range(k: usize) -> Self {
        Itemset((0..k as Attr).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn attrs(&self) -> &[Attr] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Attr> + '_ {
        self.0.iter().copied()
    }

    /// Largest attribute index, if any.
    pub fn max_attr(&self) -> Option<Attr> {
        self.0.last().copied()
    }

    pub fn contains(&self, attr: Attr) -> bool {
        self.0.binary_search(&attr).is_ok()
    }

    /// `true` if every attribute of `self` is in `other`.
    pub fn is_subset(&self, other: &Itemset) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut theirs = other.0.iter();
        'outer: for a in &self.0 {
            for b in theirs.by_ref() {
                match b.cmp(a) {
                    Ordering::Less => continue,
                    Ordering::Equal => continue 'outer,
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn is_superset(&self, other: &Itemset) -> bool {
        other.is_subset(self)
    }

    pub fn is_proper_subset(&self, other: &Itemset) -> bool {
        self.len() < other.len() && self.is_subset(other)
    }

    pub fn union(&self, other: &Itemset) -> Itemset {
        Itemset::new(self.iter().chain(other.iter()))
    }

    pub fn with(&self, attr: Attr) -> Itemset {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&attr) {
            v.insert(pos, attr);
        }
        Itemset(v)
    }

    pub fn without(&self, attr: Attr) -> Itemset {
        Itemset(self.0.iter().copied().filter(|&a| a != attr).collect())
    }

    /// Position mask of `sub` relative to `self`: bit `j` is set when the `j`-th
    /// smallest attribute of `self` belongs to `sub`. Returns `None` when `sub`
    /// is not a subset.
    pub fn local_mask(&self, sub: &Itemset) -> Option<usize> {
        let mut mask = 0usize;
        for a in sub.iter() {
            let j = self.0.binary_search(&a).ok()?;
            mask |= 1 << j;
        }
        Some(mask)
    }

    /// Inverse of [`Itemset::local_mask`].
    pub fn sub_from_local_mask(&self, mask: usize) -> Itemset {
        Itemset(
            self.0
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(_, &a)| a)
                .collect(),
        )
    }

    /// All subsets, from the empty set up to `self`, in local-mask order.
    pub fn subsets(&self) -> impl Iterator<Item = Itemset> + '_ {
        assert!(self.len() < usize::BITS as usize);
        (0..1usize << self.len()).map(move |m| self.sub_from_local_mask(m))
    }

    /// Nonempty proper subsets.
    pub fn proper_subsets(&self) -> impl Iterator<Item = Itemset> + '_ {
        let full = (1usize << self.len()) - 1;
        (1..full).map(move |m| self.sub_from_local_mask(m))
    }

    /// Subsets obtained by dropping exactly one attribute.
    pub fn facets(&self) -> impl Iterator<Item = Itemset> + '_ {
        self.0.iter().map(move |&a| self.without(a))
    }
}

impl Ord for Itemset {
    fn cmp(&self, other: &Self) -> Ordering {
        // Equal sizes: the mask holding the highest differing bit is larger.
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for Itemset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromIterator<Attr> for Itemset {
    fn from_iter<T: IntoIterator<Item = Attr>>(iter: T) -> Self {
        Itemset::new(iter)
    }
}

impl<const N: usize> From<[Attr; N]> for Itemset {
    fn from(attrs: [Attr; N]) -> Self {
        Itemset::new(attrs)
    }
}

impl fmt::Debug for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
            first = false;
        }
        Ok(())
    }
}
