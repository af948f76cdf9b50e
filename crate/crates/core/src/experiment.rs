//! Batch evaluation of many measures over a query family, and the summary
//! tables built from it: significance shares by size, correlations between
//! measures, flexible-model win rates, used-itemset ratios and
//! (anti-)monotonicity shares.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{brin_chi2, brin_test, collective_strength, frequency_rank};
use crate::dataset::Dataset;
use crate::derivability::mine_andi;
use crate::family::ItemsetFamily;
use crate::itemset::Itemset;
use crate::maxent::{MaxentError, SolverConfig};
use crate::rank::{greedy_family_rank, rank_normalized, ModelKind, RankError};
use crate::table::{Table, Value};

pub const DESK_ATTRS: usize = 20;
pub const DESK_ROWS: usize = 2000;
pub const FULL_ATTRS: usize = 100;
pub const FULL_ROWS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    NrankI,
    NrankC,
    NrankA,
    NrankT,
    NrankF,
    Freq,
    Brin,
    /// Brin's statistic as a χ² test probability.
    BrinTest,
    Cs,
}

impl Measure {
    pub const ALL: [Measure; 9] = [
        Measure::NrankI,
        Measure::NrankC,
        Measure::NrankA,
        Measure::NrankT,
        Measure::NrankF,
        Measure::Freq,
        Measure::Brin,
        Measure::BrinTest,
        Measure::Cs,
    ];
    pub const NRANKS: [Measure; 5] = [
        Measure::NrankI,
        Measure::NrankC,
        Measure::NrankA,
        Measure::NrankT,
        Measure::NrankF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::NrankI => "nrank_I",
            Measure::NrankC => "nrank_C",
            Measure::NrankA => "nrank_A",
            Measure::NrankT => "nrank_T",
            Measure::NrankF => "nrank_F",
            Measure::Freq => "freq",
            Measure::Brin => "brin",
            Measure::BrinTest => "brin_test",
            Measure::Cs => "cs",
        }
    }

    pub fn model(self) -> Option<ModelKind> {
        match self {
            Measure::NrankI => Some(ModelKind::Ind),
            Measure::NrankC => Some(ModelKind::Cov),
            Measure::NrankA => Some(ModelKind::All),
            Measure::NrankT => Some(ModelKind::Tree),
            Measure::NrankF => Some(ModelKind::Greedy),
            _ => None,
        }
    }

    pub fn from_model(m: ModelKind) -> Measure {
        match m {
            ModelKind::Ind => Measure::NrankI,
            ModelKind::Cov => Measure::NrankC,
            ModelKind::All => Measure::NrankA,
            ModelKind::Tree => Measure::NrankT,
            ModelKind::Greedy => Measure::NrankF,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(m) = Measure::ALL.into_iter().find(|m| m.name() == s) {
            return Ok(m);
        }
        s.parse::<ModelKind>()
            .map(Measure::from_model)
            .map_err(|_| format!("unknown measure {s:?}"))
    }
}

/// One matrix entry: a value, or the error that prevented computing it.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Value(f64),
    Error(String),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(x) => Some(*x),
            Cell::Error(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureRow {
    pub itemset: Itemset,
    pub frequency: f64,
    pub cells: Vec<Cell>,
}

/// Measures (columns) evaluated on a query family (rows, in family order).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureMatrix {
    pub measures: Vec<Measure>,
    pub rows: Vec<MeasureRow>,
    /// Greedy families per query, present when `nrank_F` was requested.
    pub greedy: Vec<(Itemset, ItemsetFamily)>,
    /// Cells that failed because the solver did not converge.
    pub nonconverged: usize,
    index: HashMap<Itemset, usize>,
}

impl MeasureMatrix {
    pub fn column(&self, m: Measure) -> Option<usize> {
        self.measures.iter().position(|&x| x == m)
    }

    pub fn row_of(&self, x: &Itemset) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Finite-or-infinite value of measure `m` on row `r`; `None` for errors
    /// and absent columns.
    pub fn value(&self, r: usize, m: Measure) -> Option<f64> {
        self.rows[r].cells[self.column(m)?].value()
    }

    /// Values of `m` over all rows.
    pub fn values(&self, m: Measure) -> Vec<Option<f64>> {
        (0..self.rows.len()).map(|r| self.value(r, m)).collect()
    }

    pub fn max_size(&self) -> usize {
        self.rows.iter().map(|r| r.itemset.len()).max().unwrap_or(0)
    }

    /// Itemsets rendered with raw IDs from `d`; errors as `error: …`.
    pub fn to_table(&self, d: &Dataset) -> Table {
        let mut cols = vec!["itemset".to_string(), "size".into(), "frequency".into()];
        cols.extend(self.measures.iter().map(|m| m.name().to_string()));
        let mut t = Table::new("measures", cols);
        for r in &self.rows {
            let mut row: Vec<Value> = vec![d.render(&r.itemset).into(), r.itemset.len().into(), r.frequency.into()];
            row.extend(r.cells.iter().map(|c| match c {
                Cell::Value(x) => Value::Num(*x),
                Cell::Error(e) => Value::Marker(format!("error: {e}")),
            }));
            t.push(row);
        }
        t
    }
}

fn is_nonconvergence(e: &RankError) -> bool {
    matches!(e, RankError::Maxent(MaxentError::NotConverged { .. }))
}

/// Evaluates every measure on every member of `family`. Failures become
/// error cells; the run continues.
pub fn run_queries(d: &Dataset, family: &ItemsetFamily, measures: &[Measure], cfg: &SolverConfig) -> MeasureMatrix {
    let queries: Vec<&Itemset> = family.iter().collect();
    let evaluated: Vec<(MeasureRow, Option<ItemsetFamily>, usize)> = queries
        .par_iter()
        .map(|&g| {
            let mut greedy = None;
            let mut failed = 0;
            let cells = measures
                .iter()
                .map(|&m| {
                    let res: Result<f64, String> = match m {
                        Measure::NrankF => greedy_family_rank(g, d, cfg)
                            .map(|(r, f)| {
                                greedy = Some(f);
                                r.normalized
                            })
                            .map_err(|e| {
                                failed += usize::from(is_nonconvergence(&e));
                                e.to_string()
                            }),
                        Measure::Freq => Ok(frequency_rank(g, d)),
                        Measure::Brin => brin_chi2(g, d).map_err(|e| e.to_string()),
                        Measure::BrinTest => brin_test(g, d).map_err(|e| e.to_string()),
                        Measure::Cs => collective_strength(g, d).map_err(|e| e.to_string()),
                        nrank => rank_normalized(g, nrank.model().unwrap(), d, cfg)
                            .map(|r| r.normalized)
                            .map_err(|e| {
                                failed += usize::from(is_nonconvergence(&e));
                                e.to_string()
                            }),
                    };
                    match res {
                        Ok(x) => Cell::Value(x),
                        Err(e) => Cell::Error(e),
                    }
                })
                .collect();
            let row = MeasureRow {
                itemset: g.clone(),
                frequency: d.frequency(g),
                cells,
            };
            (row, greedy, failed)
        })
        .collect();
    let mut rows = Vec::with_capacity(evaluated.len());
    let mut greedy = Vec::new();
    let mut nonconverged = 0;
    for (row, f, failed) in evaluated {
        if let Some(f) = f {
            greedy.push((row.itemset.clone(), f));
        }
        nonconverged += failed;
        rows.push(row);
    }
    let index = rows.iter().enumerate().map(|(i, r)| (r.itemset.clone(), i)).collect();
    MeasureMatrix {
        measures: measures.to_vec(),
        rows,
        greedy,
        nonconverged,
        index,
    }
}

/// Share of significant itemsets per measure and itemset size.
#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceTable {
    pub alpha: f64,
    pub sizes: Vec<usize>,
    /// `(measure, per-size share, share over all sizes)`.
    pub rows: Vec<(Measure, Vec<Option<f64>>, Option<f64>)>,
}

impl SignificanceTable {
    pub fn share(&self, m: Measure, size: usize) -> Option<f64> {
        let j = self.sizes.iter().position(|&s| s == size)?;
        self.rows.iter().find(|r| r.0 == m)?.1[j]
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["measure".to_string()];
        cols.extend(self.sizes.iter().map(|s| format!("size_{s}")));
        cols.push("all".into());
        let mut t = Table::new("significance", cols);
        for (m, by_size, all) in &self.rows {
            let mut row: Vec<Value> = vec![m.name().into()];
            row.extend(by_size.iter().map(|&x| Value::from(x)));
            row.push((*all).into());
            t.push(row);
        }
        t
    }
}

/// Share of itemsets, per size, whose normalized rank exceeds `1 − alpha`.
/// The "all" column pools every row (a row-weighted mean of the per-size
/// shares). Error cells are left out.
pub fn significance_table(mm: &MeasureMatrix, alpha: f64) -> SignificanceTable {
    let sizes: Vec<usize> = (1..=mm.max_size()).collect();
    let rows = mm
        .measures
        .iter()
        .filter(|m| m.model().is_some())
        .map(|&m| {
            let mut hits = vec![0usize; sizes.len() + 1];
            let mut seen = vec![0usize; sizes.len() + 1];
            for (r, row) in mm.rows.iter().enumerate() {
                if let Some(v) = mm.value(r, m) {
                    let s = row.itemset.len();
                    seen[s] += 1;
                    hits[s] += usize::from(v > 1.0 - alpha);
                }
            }
            let share = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
            let by_size = sizes.iter().map(|&s| share(hits[s], seen[s])).collect();
            let all = share(hits.iter().sum(), seen.iter().sum());
            (m, by_size, all)
        })
        .collect();
    SignificanceTable { alpha, sizes, rows }
}

/// Pearson correlation of two columns over rows where both are finite.
/// `None` when fewer than two such rows exist or a column is constant.
pub fn pearson(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some((*x, *y)),
            _ => None,
        })
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub measures: Vec<Measure>,
    pub r: Vec<Vec<Option<f64>>>,
}

impl CorrelationTable {
    pub fn get(&self, a: Measure, b: Measure) -> Option<f64> {
        let i = self.measures.iter().position(|&m| m == a)?;
        let j = self.measures.iter().position(|&m| m == b)?;
        self.r[i][j]
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["measure".to_string()];
        cols.extend(self.measures.iter().map(|m| m.name().to_string()));
        let mut t = Table::new("correlation", cols);
        for (m, row) in self.measures.iter().zip(&self.r) {
            let mut out: Vec<Value> = vec![m.name().into()];
            out.extend(row.iter().map(|&x| Value::from(x)));
            t.push(out);
        }
        t
    }
}

/// Pairwise Pearson correlations between all columns; infinite and error
/// cells are dropped pairwise.
pub fn correlation_table(mm: &MeasureMatrix) -> CorrelationTable {
    let cols: Vec<Vec<Option<f64>>> = mm.measures.iter().map(|&m| mm.values(m)).collect();
    let r = cols
        .iter()
        .map(|a| cols.iter().map(|b| pearson(a, b)).collect())
        .collect();
    CorrelationTable {
        measures: mm.measures.clone(),
        r,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityRow {
    pub measure: Measure,
    /// Share with `value(G) ≥ value(H)` for every compared `H`, per size.
    pub monotone: Vec<Option<f64>>,
    /// Share with `value(G) ≤ value(H)` for every compared `H`, per size.
    pub anti_monotone: Vec<Option<f64>>,
    /// Itemsets left out because a sub-itemset was missing or failed.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityTable {
    pub sizes: Vec<usize>,
    pub rows: Vec<MonotonicityRow>,
}

impl MonotonicityTable {
    pub fn to_table(&self) -> Table {
        let mut cols = vec!["measure".to_string(), "property".into()];
        cols.extend(self.sizes.iter().map(|s| format!("size_{s}")));
        cols.push("skipped".into());
        let mut t = Table::new("monotonicity", cols);
        for r in &self.rows {
            for (prop, v) in [("monotone", &r.monotone), ("anti_monotone", &r.anti_monotone)] {
                let mut row: Vec<Value> = vec![r.measure.name().into(), prop.into()];
                row.extend(v.iter().map(|&x| Value::from(x)));
                row.push(r.skipped.into());
                t.push(row);
            }
        }
        t
    }
}

/// Compares every itemset of size ≥ 3 with its sub-itemsets of size ≥ 2.
pub fn monotonicity_table(mm: &MeasureMatrix) -> MonotonicityTable {
    let sizes: Vec<usize> = (3..=mm.max_size()).collect();
    let rows = mm
        .measures
        .iter()
        .map(|&m| {
            let mut mono = vec![0usize; sizes.len()];
            let mut anti = vec![0usize; sizes.len()];
            let mut seen = vec![0usize; sizes.len()];
            let mut skipped = 0;
            for (r, row) in mm.rows.iter().enumerate() {
                let g = &row.itemset;
                if g.len() < 3 {
                    continue;
                }
                let Some(vg) = mm.value(r, m) else {
                    skipped += 1;
                    continue;
                };
                let subs: Option<Vec<f64>> = g
                    .proper_subsets()
                    .filter(|h| h.len() >= 2)
                    .map(|h| mm.row_of(&h).and_then(|i| mm.value(i, m)))
                    .collect();
                let Some(subs) = subs else {
                    skipped += 1;
                    continue;
                };
                let j = g.len() - 3;
                seen[j] += 1;
                mono[j] += usize::from(subs.iter().all(|&vh| vg >= vh));
                anti[j] += usize::from(subs.iter().all(|&vh| vg <= vh));
            }
            let share = |h: &[usize]| -> Vec<Option<f64>> {
                h.iter()
                    .zip(&seen)
                    .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
                    .collect()
            };
            MonotonicityRow {
                measure: m,
                monotone: share(&mono),
                anti_monotone: share(&anti),
                skipped,
            }
        })
        .collect();
    MonotonicityTable { sizes, rows }
}

/// `(flexible, fixed, share of size ≥ 3 queries with flexible ≤ fixed, count)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlexibleWins {
    pub rows: Vec<(Measure, Measure, Option<f64>, usize)>,
}

impl FlexibleWins {
    pub fn get(&self, flexible: Measure, fixed: Measure) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.0 == flexible && r.1 == fixed)
            .and_then(|r| r.2)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("flexible_wins", ["flexible", "fixed", "share", "queries"]);
        for &(a, b, s, n) in &self.rows {
            t.push(vec![a.name().into(), b.name().into(), s.into(), n.into()]);
        }
        t
    }
}

pub fn flexible_win_table(mm: &MeasureMatrix) -> FlexibleWins {
    let mut rows = Vec::new();
    for flex in [Measure::NrankT, Measure::NrankF] {
        for fixed in [Measure::NrankI, Measure::NrankC, Measure::NrankA] {
            if mm.column(flex).is_none() || mm.column(fixed).is_none() {
                continue;
            }
            let mut n = 0;
            let mut wins = 0;
            for (r, row) in mm.rows.iter().enumerate() {
                if row.itemset.len() < 3 {
                    continue;
                }
                if let (Some(a), Some(b)) = (mm.value(r, flex), mm.value(r, fixed)) {
                    n += 1;
                    wins += usize::from(a <= b);
                }
            }
            rows.push((flex, fixed, (n > 0).then(|| wins as f64 / n as f64), n));
        }
    }
    FlexibleWins { rows }
}

/// `r_L` for `L ≥ 2`: itemsets of size `L` in the greedy families, over the
/// number of size-`L` proper subsets available to them.
#[derive(Clone, Debug, PartialEq)]
pub struct UsedRatios {
    pub by_size: Vec<(usize, Option<f64>)>,
}

impl UsedRatios {
    pub fn get(&self, l: usize) -> Option<f64> {
        self.by_size.iter().find(|r| r.0 == l).and_then(|r| r.1)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("used_ratios", ["size", "ratio"]);
        for &(l, r) in &self.by_size {
            t.push(vec![l.into(), r.into()]);
        }
        t
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

pub fn used_itemset_ratios(greedy: &[(Itemset, ItemsetFamily)]) -> UsedRatios {
    let max = greedy.iter().map(|(g, _)| g.len()).max().unwrap_or(0);
    let by_size = (2..max)
        .map(|l| {
            let mut used = 0u64;
            let mut avail = 0u64;
            for (g, f) in greedy {
                if g.len() > l {
                    avail += binomial(g.len(), l);
                    used += f.of_size(l).count() as u64;
                }
            }
            (l, (avail > 0).then(|| used as f64 / avail as f64))
        })
        .collect();
    UsedRatios { by_size }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Bound-width threshold (transactions) for the query family.
    pub n: u64,
    pub max_size: usize,
    pub alpha: f64,
    pub solver: SolverConfig,
    pub measures: Vec<Measure>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 5,
            max_size: 3,
            alpha: 0.05,
            solver: SolverConfig::default(),
            measures: Measure::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub family: ItemsetFamily,
    pub matrix: MeasureMatrix,
    pub significance: SignificanceTable,
    pub correlation: CorrelationTable,
    pub monotonicity: MonotonicityTable,
    pub flexible: FlexibleWins,
    pub ratios: UsedRatios,
}

impl ExperimentReport {
    pub fn tables(&self, d: &Dataset) -> Vec<Table> {
        vec![
            self.matrix.to_table(d),
            self.significance.to_table(),
            self.correlation.to_table(),
            self.monotonicity.to_table(),
            self.flexible.to_table(),
            self.ratios.to_table(),
        ]
    }
}

/// Mines the query family and evaluates every table on it.
pub fn run_experiment(d: &Dataset, cfg: &ExperimentConfig) -> ExperimentReport {
    let family = mine_andi(d, cfg.n, cfg.max_size);
    let matrix = run_queries(d, &family, &cfg.measures, &cfg.solver);
    ExperimentReport {
        significance: significance_table(&matrix, cfg.alpha),
        correlation: correlation_table(&matrix),
        monotonicity: monotonicity_table(&matrix),
        flexible: flexible_win_table(&matrix),
        ratios: used_itemset_ratios(&matrix.greedy),
        matrix,
        family,
    }
}
