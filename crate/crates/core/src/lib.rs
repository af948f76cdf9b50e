//! Significance ranking of itemsets in binary data.
//!
//! For a query itemset `G`, the data are projected onto the attributes of `G`
//! and compared against the maximum-entropy distribution that matches the
//! frequencies of a family of sub-itemsets of `G`. The Kullback-Leibler
//! divergence between the two (in nats) is the *raw rank*; `2·M·rank` is
//! asymptotically χ²-distributed, and its cdf is the *normalized rank*.
//!
//! Five constraint families are supported: singletons ([`ModelKind::Ind`]),
//! singletons and pairs ([`ModelKind::Cov`]), all proper subsets
//! ([`ModelKind::All`]), the best Chow-Liu tree ([`ModelKind::Tree`]) and a
//! greedily grown downward-closed family ([`ModelKind::Greedy`]).
//!
//! All logarithms are natural.

pub mod baselines;
pub mod dataset;
pub mod derivability;
pub mod experiment;
pub mod family;
pub mod fixtures;
pub mod itemset;
pub mod maxent;
pub mod rank;
pub mod synth;
pub mod table;

pub use dataset::{
    empirical_distribution, entropy_sparse, parse_dense, parse_fimi, Dataset, DatasetError,
    EmpiricalDistribution, ProjectedDataset,
};
pub use family::{canonical_family, project_family, ConstraintSet, FamilyKind, ItemsetFamily};
pub use itemset::{Attr, Itemset};
pub use maxent::{JointDistribution, MaxentError, SolverConfig};
pub use rank::{ModelKind, RankError, RankResult};

