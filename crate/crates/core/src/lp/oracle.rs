//! Brute-force LP oracle: enumerates every basic point (each way of making
//! the program square by activating rows and variable bounds), keeps the
//! feasible ones, and reports the best. Exponential — test use only.
//!
//! Unbounded programs are detected by re-running the enumeration with two
//! different artificial boxes on the infinite bounds: a genuinely unbounded
//! program improves when the box grows.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation, SolverStats};
use std::time::Instant;

const MAX_ORACLE_VARS: usize = 12;
const BOX_SMALL: f64 = 1e7;
const BOX_LARGE: f64 = 1e8;

pub fn vertex_oracle(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.variables.len();
    if n > MAX_ORACLE_VARS {
        return Err(LpError::OracleTooLarge(n));
    }
    let start = Instant::now();
    let small = enumerate(lp, BOX_SMALL);
    let stats = |iterations| SolverStats {
        wall_time_seconds: start.elapsed().as_secs_f64(),
        n_variables: n,
        n_constraints: lp.constraints.len(),
        iterations,
    };
    let (status, values, objective_value) = match small {
        None => (LpStatus::Infeasible, Vec::new(), f64::NAN),
        Some((obj1, x1)) => {
            let large = enumerate(lp, BOX_LARGE);
            match large {
                Some((obj2, _)) if obj2 < obj1 - 1e-6 * obj1.abs().max(1.0) => {
                    (LpStatus::Unbounded, Vec::new(), f64::NEG_INFINITY)
                }
                _ => (LpStatus::Optimal, x1, obj1),
            }
        }
    };
    Ok(LpSolution {
        status,
        values,
        objective_value,
        stats: stats(0),
    })
}

fn enumerate(lp: &LinearProgram, boxed: f64) -> Option<(f64, Vec<f64>)> {
    let n = lp.variables.len();
    let m = lp.constraints.len();
    let lower: Vec<f64> = lp
        .variables
        .iter()
        .map(|v| if v.lower.is_finite() { v.lower } else { -boxed })
        .collect();
    let upper: Vec<f64> = lp
        .variables
        .iter()
        .map(|v| if v.upper.is_finite() { v.upper } else { boxed })
        .collect();
    let row_scale: Vec<f64> = lp
        .constraints
        .iter()
        .map(|c| {
            let mx = c
                .coeffs
                .iter()
                .map(|&(_, a)| a.abs())
                .fold(0.0f64, f64::max);
            if mx > 0.0 {
                1.0 / mx
            } else {
                1.0
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let max_active_rows = m.min(n);
    for r in 0..=max_active_rows {
        for row_set in Combinations::new(m, r) {
            for var_set in Combinations::new(n, n - r) {
                // Each fixed variable sits at lower or upper.
                let n_fixed = var_set.len();
                for mask in 0..(1u32 << n_fixed) {
                    let Some(x) = solve_active_set(lp, &row_set, &var_set, mask, &lower, &upper)
                    else {
                        continue;
                    };
                    if !is_feasible(lp, &x, &lower, &upper, &row_scale) {
                        continue;
                    }
                    let obj: f64 = x.iter().zip(&lp.objective).map(|(a, c)| a * c).sum();
                    match &best {
                        Some((b, _)) if *b <= obj => {}
                        _ => best = Some((obj, x)),
                    }
                }
            }
        }
    }
    best
}

/// Solves the square system: selected rows as equalities plus selected
/// variables pinned at a bound. Returns None when singular.
fn solve_active_set(
    lp: &LinearProgram,
    rows: &[usize],
    fixed_vars: &[usize],
    bound_mask: u32,
    lower: &[f64],
    upper: &[f64],
) -> Option<Vec<f64>> {
    let n = lp.variables.len();
    let mut a = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for (e, &i) in rows.iter().enumerate() {
        for &(j, v) in &lp.constraints[i].coeffs {
            a[e][j] += v;
        }
        rhs[e] = lp.constraints[i].rhs;
    }
    for (f, &j) in fixed_vars.iter().enumerate() {
        let e = rows.len() + f;
        a[e][j] = 1.0;
        rhs[e] = if bound_mask & (1 << f) != 0 {
            upper[j]
        } else {
            lower[j]
        };
    }
    gaussian_solve(&mut a, &mut rhs)
}

fn gaussian_solve(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (pi, pv) = (k..n)
            .map(|i| (i, a[perm[i]][k].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pv < 1e-10 {
            return None;
        }
        perm.swap(k, pi);
        for i in k + 1..n {
            let f = a[perm[i]][k] / a[perm[k]][k];
            if f != 0.0 {
                for j in k..n {
                    let t = a[perm[k]][j];
                    a[perm[i]][j] -= f * t;
                }
                rhs[perm[i]] -= f * rhs[perm[k]];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[perm[k]];
        for j in k + 1..n {
            acc -= a[perm[k]][j] * x[j];
        }
        x[k] = acc / a[perm[k]][k];
    }
    Some(x)
}

fn is_feasible(
    lp: &LinearProgram,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    row_scale: &[f64],
) -> bool {
    let tol = 1e-8;
    for j in 0..x.len() {
        if x[j] < lower[j] - tol || x[j] > upper[j] + tol {
            return false;
        }
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let act: f64 = c.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
        let resid = (act - c.rhs) * row_scale[i];
        match c.relation {
            Relation::Le if resid > tol => return false,
            Relation::Ge if resid < -tol => return false,
            Relation::Eq if resid.abs() > tol => return false,
            _ => {}
        }
    }
    true
}

/// Iterator over k-subsets of 0..n in lexicographic order.
struct Combinations {
    n: usize,
    k: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            k,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        // Advance to the next combination.
        let k = self.k;
        if k == 0 {
            self.done = true;
            return Some(out);
        }
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - (k - i) {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LinearProgram, Relation};

    #[test]
    fn combinations_cover_all() {
        let got: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(got.len(), 6);
        assert_eq!(got[0], vec![0, 1]);
        assert_eq!(got[5], vec![2, 3]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn oracle_minimize_x() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 1.0);
        let s = vertex_oracle(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_detects_unbounded() {
        let mut lp = LinearProgram::default();
        lp.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        let s = vertex_oracle(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn oracle_detects_infeasible() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", 0.0, 1.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        let s = vertex_oracle(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn oracle_rejects_large_programs() {
        let mut lp = LinearProgram::default();
        for j in 0..13 {
            lp.add_variable(format!("x{}", j), 0.0, 1.0, 1.0);
        }
        assert!(matches!(
            vertex_oracle(&lp),
            Err(LpError::OracleTooLarge(13))
        ));
    }

    #[test]
    fn oracle_matches_simplex_on_diet_lp() {
        let mut lp = LinearProgram::default();
        let a = lp.add_variable("a", 0.0, f64::INFINITY, 0.6);
        let b = lp.add_variable("b", 0.0, f64::INFINITY, 0.35);
        lp.add_constraint(vec![(a, 5.0), (b, 7.0)], Relation::Ge, 8.0);
        lp.add_constraint(vec![(a, 4.0), (b, 2.0)], Relation::Ge, 15.0);
        let o = vertex_oracle(&lp).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(o.status, LpStatus::Optimal);
        assert!((o.objective_value - s.objective_value).abs() < 1e-9);
    }

    #[test]
    fn duplicate_row_does_not_change_oracle_optimum() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", 0.0, 5.0, 1.0);
        let y = lp.add_variable("y", 0.0, 5.0, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Relation::Ge, 3.0);
        let base = vertex_oracle(&lp).unwrap().objective_value;
        lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Relation::Ge, 3.0);
        let dup = vertex_oracle(&lp).unwrap().objective_value;
        assert!((base - dup).abs() < 1e-12);
    }
}
