//! Shared helpers for integration tests.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use ropf_core::lp::{LinearProgram, Relation};

/// Random small LP with integer-ish data, mixing bounded, one-sided, and
/// free variables. Integer coefficients keep feasibility decisions far from
/// tolerance boundaries, so the solver and the oracle cannot disagree over
/// round-off.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let m = rng.gen_range(1..=5);
    let mut lp = LinearProgram::default();
    for j in 0..n {
        let style = rng.gen_range(0..10);
        let (lo, hi) = match style {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (f64::NEG_INFINITY, rng.gen_range(0..6) as f64),
            2..=3 => (rng.gen_range(-3..1) as f64, f64::INFINITY),
            _ => {
                let lo = rng.gen_range(-2..2) as f64;
                (lo, lo + rng.gen_range(1..8) as f64)
            }
        };
        let cost = rng.gen_range(-5..=5) as f64;
        lp.add_variable(format!("x{}", j), lo, hi, cost);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-4..=4);
                if a != 0 {
                    coeffs.push((j, a as f64));
                }
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.gen_range(0..n), (rng.gen_range(1..=4)) as f64));
        }
        let relation = match rng.gen_range(0..6) {
            0 => Relation::Eq,
            1..=3 => Relation::Le,
            _ => Relation::Ge,
        };
        lp.add_constraint(coeffs, relation, rng.gen_range(-10..=10) as f64);
    }
    lp
}

/// Relative difference guarded for small magnitudes.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
