//! Seeded synthetic datasets: independent columns, and chains of noisy copies.
//!
//! Every column draws from its own ChaCha8 stream (`stream = column index`) of
//! a generator seeded with the configured seed, so adding columns never
//! changes earlier ones. The first draw of each stream is the column's
//! parameter, the following `M` draws its cells.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;

/// Identifies the random stream layout; bump on any change to draw order.
pub const GENERATOR_VERSION: &str = "chacha8-stream-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_attrs: usize,
    pub n_rows: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n_attrs: usize, n_rows: usize, seed: u64) -> Self {
        assert!(n_attrs >= 1 && n_rows >= 1, "generators need K ≥ 1 and M ≥ 1");
        GenConfig { n_attrs, n_rows, seed }
    }
}

fn stream(seed: u64, column: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng
}

/// Column parameter followed by `M` uniform draws compared against it.
fn column(cfg: &GenConfig, j: usize) -> (f64, Vec<bool>) {
    let mut rng = stream(cfg.seed, j);
    let theta: f64 = rng.random();
    let bits = (0..cfg.n_rows).map(|_| rng.random::<f64>() < theta).collect();
    (theta, bits)
}

/// The two generator designs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Ind,
    Copy,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Ind => "ind",
            Generator::Copy => "copy",
        }
    }

    pub fn generate(self, cfg: &GenConfig) -> Dataset {
        match self {
            Generator::Ind => gen_ind(cfg),
            Generator::Copy => gen_copy(cfg),
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ind" | "gen-ind" => Ok(Generator::Ind),
            "copy" | "gen-copy" => Ok(Generator::Copy),
            _ => Err(format!("unknown generator {s:?}")),
        }
    }
}

/// Drawn column margins of [`gen_ind`].
pub fn ind_margins(cfg: &GenConfig) -> Vec<f64> {
    (0..cfg.n_attrs).map(|j| stream(cfg.seed, j).random()).collect()
}

/// Drawn flip probabilities of [`gen_copy`]; entry 0 is the fair coin's 1/2.
pub fn copy_noise(cfg: &GenConfig) -> Vec<f64> {
    let mut eps = ind_margins(cfg);
    eps[0] = 0.5;
    eps
}

/// Independent columns with margins drawn uniformly from `[0, 1]`.
pub fn gen_ind(cfg: &GenConfig) -> Dataset {
    let cols: Vec<Vec<bool>> = (0..cfg.n_attrs)
        .into_par_iter()
        .map(|j| column(cfg, j).1)
        .collect();
    Dataset::from_columns(cfg.n_rows, cols)
}

/// Column 0 is a fair coin; column `j` copies column `j − 1` with every bit
/// flipped independently with probability `ε_j ~ U[0, 1]`.
pub fn gen_copy(cfg: &GenConfig) -> Dataset {
    let mut cols: Vec<Vec<bool>> = (0..cfg.n_attrs)
        .into_par_iter()
        .map(|j| {
            if j == 0 {
                let mut rng = stream(cfg.seed, 0);
                let _: f64 = rng.random();
                (0..cfg.n_rows).map(|_| rng.random::<f64>() < 0.5).collect()
            } else {
                column(cfg, j).1
            }
        })
        .collect();
    for j in 1..cols.len() {
        let (prev, rest) = cols.split_at_mut(j);
        for (b, &p) in rest[0].iter_mut().zip(&prev[j - 1]) {
            *b ^= p;
        }
    }
    Dataset::from_columns(cfg.n_rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::brin_chi2;
    use crate::itemset::Itemset;

    #[test]
    fn deterministic_and_prefix_stable() {
        let cfg = GenConfig::new(6, 100, 42);
        assert_eq!(gen_ind(&cfg), gen_ind(&cfg));
        assert_eq!(gen_copy(&cfg).to_dense(), gen_copy(&cfg).to_dense());
        let wider = gen_ind(&GenConfig::new(9, 100, 42));
        for r in 0..100 {
            assert_eq!(wider.row(r)[..6], gen_ind(&cfg).row(r)[..]);
        }
        assert_ne!(gen_ind(&GenConfig::new(6, 100, 43)), gen_ind(&cfg));
        let one = gen_ind(&GenConfig::new(1, 1, 0));
        assert_eq!((one.n_attrs(), one.n_rows()), (1, 1));
    }

    #[test]
    fn ind_margins_are_binomially_close() {
        let cfg = GenConfig::new(100, 5000, 1);
        let d = gen_ind(&cfg);
        let theta = ind_margins(&cfg);
        let m = cfg.n_rows as f64;
        let ok = theta
            .iter()
            .enumerate()
            .filter(|(j, &t)| {
                let f = d.frequency(&Itemset::singleton(*j as u32));
                (f - t).abs() <= 3.0 * (t * (1.0 - t) / m).sqrt() + 1e-12
            })
            .count();
        assert!(ok >= 95, "{ok} of 100 columns within tolerance");
    }

    #[test]
    fn ind_pairs_pass_the_chi2_test() {
        let d = gen_ind(&GenConfig::new(40, 5000, 2));
        let m = d.n_rows() as f64;
        let mut total = 0;
        let mut below = 0;
        for a in 0..40u32 {
            for b in a + 1..40 {
                let s = m * brin_chi2(&Itemset::from([a, b]), &d).unwrap();
                total += 1;
                if s < 3.841 {
                    below += 1;
                }
            }
        }
        let share = below as f64 / total as f64;
        assert!((0.90..=1.0).contains(&share), "{share}");
    }

    #[test]
    fn copy_flip_rates_match_noise() {
        let cfg = GenConfig::new(8, 5000, 3);
        let d = gen_copy(&cfg);
        let eps = copy_noise(&cfg);
        let m = cfg.n_rows as f64;
        for j in 1..8u32 {
            let flips = (0..d.n_rows())
                .filter(|&r| d.value(r, j) != d.value(r, j - 1))
                .count() as f64
                / m;
            let e = eps[j as usize];
            assert!((flips - e).abs() <= 3.0 * (e * (1.0 - e) / m).sqrt() + 1e-12, "column {j}: {flips} vs {e}");
        }
        let f0 = d.frequency(&Itemset::singleton(0));
        assert!((f0 - 0.5).abs() < 0.03);
    }
}
