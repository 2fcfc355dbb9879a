//! Deterministic ordering of scored shots.
//!
//! Utilities are compared on a 1e-12 grid so that values which are equal in
//! exact arithmetic but differ in the last bit (e.g. `(3/10)·(1/3)` and
//! `(1/10)·1`) tie, and the tie falls through to support and then taxonomy
//! order.

use std::cmp::Ordering;

use crate::shot::ShotId;

const GRID: f64 = 1e12;

/// Integer key for comparing utilities.
pub fn utility_key(x: f64) -> i64 {
    (x * GRID).round() as i64
}

/// Better-first ordering: higher utility, then more support, then taxonomy order.
pub fn better_first(a: (f64, u64, ShotId), b: (f64, u64, ShotId)) -> Ordering {
    utility_key(b.0).cmp(&utility_key(a.0)).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2))
}
