//! Security-constrained DC optimal power flow with learned constraint
//! screening.
//!
//! The crate is organized around the lifecycle of a screening experiment:
//!
//! * [`grid`] — network description, radial-branch detection, contingency
//!   enumeration, and graph feature assembly.
//! * [`lp`] — a self-contained bounded-variable simplex solver plus a
//!   brute-force vertex enumeration oracle for tests.
//! * [`opf`] — base-case and N-1 OPF model construction, solving, flow
//!   recomputation, violation checks, and binding-line extraction.
//! * [`sampler`] — load-scenario generation, labeling via full N-1 solves,
//!   and dataset splitting.
//! * [`gnn`] — an edge-classifying graph network with analytic gradients and
//!   a deterministic training loop.
//! * [`pipeline`] — offline training, notable-congested-line harvesting, the
//!   online screening strategies, and benchmark reporting.

pub mod gnn;
pub mod grid;
pub mod lp;
pub mod opf;
pub mod pipeline;
pub mod sampler;

pub use lp::{LinearProgram, LpSolution, LpStatus, SolverStats};

/// Derives a named sub-seed from the run seed so that individual pipeline
/// stages (sampling, splits, parameter init) can be reproduced in isolation.
pub fn subseed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the base seed via splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
