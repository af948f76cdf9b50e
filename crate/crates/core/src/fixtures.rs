//! The four 8-row, 3-attribute toy datasets used throughout the tests and docs.
//!
//! All four share the singleton frequencies 1/2; they differ in how the pairs
//! and the triple behave:
//!
//! | data | a1a2 | a1a3 | a2a3 | a1a2a3 |
//! |------|------|------|------|--------|
//! | D1   | 1/4  | 1/4  | 1/4  | 1/8    |
//! | D2   | 1/4  | 1/4  | 1/4  | 0      |
//! | D3   | 1/4  | 1/4  | 1/4  | 1/4    |
//! | D4   | 1/2  | 0    | 0    | 0      |

use crate::dataset::{parse_dense, Dataset};

pub const D1: &str = include_str!("../fixtures/d1.dense");
pub const D2: &str = include_str!("../fixtures/d2.dense");
pub const D3: &str = include_str!("../fixtures/d3.dense");
pub const D4: &str = include_str!("../fixtures/d4.dense");

/// Dense text of toy dataset `n` (1 to 4).
pub fn toy_text(n: usize) -> &'static str {
    match n {
        1 => D1,
        2 => D2,
        3 => D3,
        4 => D4,
        _ => panic!("toy datasets are numbered 1 to 4"),
    }
}

/// Toy dataset `n` (1 to 4).
pub fn toy(n: usize) -> Dataset {
    parse_dense(toy_text(n)).expect("bundled fixture parses")
}
