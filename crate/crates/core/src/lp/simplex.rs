//! Bounded-variable revised simplex.
//!
//! Rows are internalized as `a·x + s = b` with one logical variable per row
//! whose bounds encode the relation. The solver keeps a sparse LU of the
//! basis (refreshed periodically) with product-form eta updates in between,
//! prices with static column norms, and falls back to Bland's rule after a
//! long degenerate streak. Phase 1 minimizes the total bound violation of
//! the basic variables with a piecewise-linear ratio test, so a single pivot
//! can restore feasibility of several rows.

use super::lu::{LuBuilder, LuFactors, StepSource};
use super::{LinearProgram, LpBackend, LpError, LpSolution, LpStatus, Relation, SolverStats};
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance on scaled rows.
    pub feas_tol: f64,
    /// Dual feasibility (reduced cost) tolerance.
    pub opt_tol: f64,
    /// Hard iteration cap; exceeding it is a numeric failure.
    pub max_iters: usize,
    /// Refactorize after this many eta updates.
    pub refactor_interval: usize,
    /// Consecutive degenerate steps before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Variables proposed for the initial basis (advanced start). Invalid or
    /// dependent proposals are repaired with logicals.
    pub initial_basis: Option<Vec<usize>>,
    /// Nonbasic variables to rest at their upper bound initially (ignored
    /// for variables without a finite upper bound).
    pub initial_at_upper: Vec<usize>,
    /// Candidate-list size for partial pricing; 0 scans everything each
    /// iteration.
    pub pricing_candidates: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            max_iters: 400_000,
            refactor_interval: 100,
            degenerate_limit: 600,
            initial_basis: None,
            initial_at_upper: Vec::new(),
            pricing_candidates: 64,
        }
    }
}

/// The native solver backend.
#[derive(Clone, Debug, Default)]
pub struct Simplex {
    pub options: SimplexOptions,
}

impl Simplex {
    pub fn with_initial_basis(basis: Vec<usize>) -> Self {
        Simplex {
            options: SimplexOptions {
                initial_basis: Some(basis),
                ..SimplexOptions::default()
            },
        }
    }

    pub fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        lp.validate()?;
        let start = Instant::now();
        let mut w = Worker::new(lp, &self.options)?;
        let status = w.run()?;
        let values = match status {
            LpStatus::Optimal => (0..w.n_struct).map(|j| w.value_of(j)).collect(),
            _ => Vec::new(),
        };
        let objective_value = match status {
            LpStatus::Optimal => values
                .iter()
                .zip(&lp.objective)
                .map(|(x, c)| x * c)
                .sum(),
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Infeasible => f64::NAN,
        };
        Ok(LpSolution {
            status,
            values,
            objective_value,
            stats: SolverStats {
                wall_time_seconds: start.elapsed().as_secs_f64(),
                n_variables: lp.n_variables(),
                n_constraints: lp.n_constraints(),
                iterations: w.iterations,
            },
        })
    }
}

impl LpBackend for Simplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        Simplex::solve(self, lp)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic(u32),
    AtLower,
    AtUpper,
    FreeZero,
}

struct Eta {
    slot: u32,
    diag: f64,
    coeffs: Vec<(u32, f64)>,
}

const FLIP: u32 = u32::MAX;

struct Worker<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    n_struct: usize,
    ncols: usize,
    // scaled structural matrix, CSC
    colptr: Vec<usize>,
    rowidx: Vec<u32>,
    vals: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>, // static pricing norms
    // dynamic state
    state: Vec<VarState>,
    basis: Vec<u32>,
    xb: Vec<f64>,
    lu: LuFactors,
    lu_builder: LuBuilder,
    etas: Vec<Eta>,
    iterations: usize,
    degenerate_streak: usize,
    bland: bool,
    prefer_upper: Vec<bool>,
    candidates: Vec<u32>,
    candidates_phase1: bool,
    candidates_valid: bool,
    // scratch
    scratch_rhs: Vec<f64>,
    scratch_out: Vec<f64>,
    scratch_work: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    c_slots: Vec<f64>,
    events: Vec<Event>,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    ratio: f64,
    slot: u32, // FLIP for the entering variable's own bound
    delta: f64,
    to_upper: bool,
}

impl<'a> Worker<'a> {
    fn new(lp: &LinearProgram, opts: &'a SimplexOptions) -> Result<Self, LpError> {
        let m = lp.constraints.len();
        let n_struct = lp.variables.len();
        let ncols = n_struct + m;

        let mut row_scale = vec![1.0f64; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            let mx = c
                .coeffs
                .iter()
                .map(|&(_, a)| a.abs())
                .fold(0.0f64, f64::max);
            if mx > 0.0 {
                row_scale[i] = 1.0 / mx;
            }
        }

        // Build scaled CSC, merging duplicate variable references per row.
        let mut per_col: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_struct];
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                per_col[j].push((i as u32, a * row_scale[i]));
            }
        }
        let mut colptr = Vec::with_capacity(n_struct + 1);
        let mut rowidx = Vec::new();
        let mut vals = Vec::new();
        colptr.push(0);
        for col in &mut per_col {
            col.sort_unstable_by_key(|&(r, _)| r);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            for (r, v) in merged {
                if v != 0.0 {
                    rowidx.push(r);
                    vals.push(v);
                }
            }
            colptr.push(rowidx.len());
        }

        let mut cost = vec![0.0; ncols];
        let mut lower = vec![0.0; ncols];
        let mut upper = vec![0.0; ncols];
        for j in 0..n_struct {
            cost[j] = lp.objective[j];
            lower[j] = lp.variables[j].lower;
            upper[j] = lp.variables[j].upper;
        }
        for (i, c) in lp.constraints.iter().enumerate() {
            let j = n_struct + i;
            match c.relation {
                Relation::Le => {
                    lower[j] = 0.0;
                    upper[j] = f64::INFINITY;
                }
                Relation::Ge => {
                    lower[j] = f64::NEG_INFINITY;
                    upper[j] = 0.0;
                }
                Relation::Eq => {
                    lower[j] = 0.0;
                    upper[j] = 0.0;
                }
            }
        }
        let b: Vec<f64> = lp
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| c.rhs * row_scale[i])
            .collect();

        let mut gamma = vec![1.0f64; ncols];
        for j in 0..n_struct {
            let s: f64 = vals[colptr[j]..colptr[j + 1]].iter().map(|v| v * v).sum();
            gamma[j] = 1.0 + s;
        }
        for g in gamma.iter_mut().skip(n_struct) {
            *g = 2.0;
        }

        let mut w = Worker {
            opts,
            m,
            n_struct,
            ncols,
            colptr,
            rowidx,
            vals,
            cost,
            lower,
            upper,
            b,
            gamma,
            state: vec![VarState::AtLower; ncols],
            basis: vec![0; m],
            xb: vec![0.0; m],
            lu: LuBuilder::new(0).factorize(&[]),
            lu_builder: LuBuilder::new(m),
            etas: Vec::new(),
            iterations: 0,
            degenerate_streak: 0,
            bland: false,
            scratch_rhs: vec![0.0; m],
            scratch_out: vec![0.0; m],
            scratch_work: vec![0.0; m],
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            c_slots: vec![0.0; m],
            events: Vec::new(),
        };

        for j in 0..ncols {
            w.state[j] = w.nonbasic_resting_state(j);
        }
        let proposed: Vec<usize> = match &opts.initial_basis {
            Some(p) => {
                let mut seen = vec![false; ncols];
                let mut out = Vec::with_capacity(p.len().min(m));
                for &j in p {
                    if j < ncols && !seen[j] && out.len() < m {
                        seen[j] = true;
                        out.push(j);
                    }
                }
                out
            }
            None => (n_struct..ncols).collect(),
        };
        w.install_basis(&proposed)?;
        Ok(w)
    }

    fn nonbasic_resting_state(&self, j: usize) -> VarState {
        if self.lower[j].is_finite() {
            VarState::AtLower
        } else if self.upper[j].is_finite() {
            VarState::AtUpper
        } else {
            VarState::FreeZero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeZero => 0.0,
            VarState::Basic(_) => unreachable!("nonbasic_value on basic variable"),
        }
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(slot) => self.xb[slot as usize],
            _ => self.nonbasic_value(j),
        }
    }

    /// Copies column j (in scaled row space) into a buffer.
    fn gather_column(&self, j: usize, buf: &mut Vec<(u32, f64)>) {
        buf.clear();
        if j < self.n_struct {
            for idx in self.colptr[j]..self.colptr[j + 1] {
                buf.push((self.rowidx[idx], self.vals[idx]));
            }
        } else {
            buf.push(((j - self.n_struct) as u32, 1.0));
        }
    }

    /// Factorizes `proposed` (repairing as needed), installs the resulting
    /// basis, and recomputes basic values.
    fn install_basis(&mut self, proposed: &[usize]) -> Result<(), LpError> {
        let mut cols: Vec<Vec<(u32, f64)>> = Vec::with_capacity(proposed.len());
        let mut buf = Vec::new();
        for &j in proposed {
            self.gather_column(j, &mut buf);
            cols.push(buf.clone());
        }
        let refs: Vec<&[(u32, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let lu = self.lu_builder.factorize(&refs);

        // Demote everything that was proposed, then promote what actually
        // pivoted; repair slots get the logical of their row.
        for &j in proposed {
            self.state[j] = self.nonbasic_resting_state(j);
        }
        for (k, src) in lu.sources.iter().enumerate() {
            let j = match *src {
                StepSource::Input(pos) => proposed[pos],
                StepSource::Logical(row) => self.n_struct + row,
            };
            self.basis[k] = j as u32;
            self.state[j] = VarState::Basic(k as u32);
        }
        self.lu = lu;
        self.etas.clear();
        self.recompute_basic_values();
        Ok(())
    }

    fn refactorize(&mut self) -> Result<(), LpError> {
        let proposed: Vec<usize> = self.basis.iter().map(|&j| j as usize).collect();
        self.install_basis(&proposed)
    }

    /// Recomputes xb = B⁻¹(b − N x_N) from scratch, then one refinement pass.
    fn recompute_basic_values(&mut self) {
        self.compute_rhs_into_scratch();
        let mut rhs = std::mem::take(&mut self.scratch_rhs);
        self.lu.ftran(&mut rhs, &mut self.scratch_out);
        self.scratch_rhs = rhs;
        self.apply_etas_ftran_scratch_out();
        self.xb.copy_from_slice(&self.scratch_out);
        self.refine_basic_values();
    }

    /// One iterative-refinement pass on the basic values.
    fn refine_basic_values(&mut self) {
        self.compute_rhs_into_scratch();
        // residual r = rhs − B xb
        let mut buf = Vec::new();
        for k in 0..self.m {
            let v = self.xb[k];
            if v == 0.0 {
                continue;
            }
            self.gather_column(self.basis[k] as usize, &mut buf);
            for &(r, a) in &buf {
                self.scratch_rhs[r as usize] -= a * v;
            }
        }
        let mut rhs = std::mem::take(&mut self.scratch_rhs);
        self.lu.ftran(&mut rhs, &mut self.scratch_out);
        self.scratch_rhs = rhs;
        self.apply_etas_ftran_scratch_out();
        for k in 0..self.m {
            self.xb[k] += self.scratch_out[k];
        }
    }

    /// scratch_rhs = b − N x_N (over nonbasic with nonzero value).
    fn compute_rhs_into_scratch(&mut self) {
        self.scratch_rhs.copy_from_slice(&self.b);
        for j in 0..self.ncols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v == 0.0 {
                continue;
            }
            if j < self.n_struct {
                for idx in self.colptr[j]..self.colptr[j + 1] {
                    self.scratch_rhs[self.rowidx[idx] as usize] -= self.vals[idx] * v;
                }
            } else {
                self.scratch_rhs[j - self.n_struct] -= v;
            }
        }
    }

    fn apply_etas_ftran_scratch_out(&mut self) {
        for eta in &self.etas {
            let s = eta.slot as usize;
            let t = self.scratch_out[s] / eta.diag;
            self.scratch_out[s] = t;
            if t != 0.0 {
                for &(i, v) in &eta.coeffs {
                    self.scratch_out[i as usize] -= v * t;
                }
            }
        }
    }

    /// FTRAN of column j including etas; result in self.alpha.
    fn ftran_column(&mut self, j: usize) {
        for v in self.scratch_rhs.iter_mut() {
            *v = 0.0;
        }
        if j < self.n_struct {
            for idx in self.colptr[j]..self.colptr[j + 1] {
                self.scratch_rhs[self.rowidx[idx] as usize] = self.vals[idx];
            }
        } else {
            self.scratch_rhs[j - self.n_struct] = 1.0;
        }
        let mut rhs = std::mem::take(&mut self.scratch_rhs);
        self.lu.ftran(&mut rhs, &mut self.scratch_out);
        self.scratch_rhs = rhs;
        self.apply_etas_ftran_scratch_out();
        self.alpha.copy_from_slice(&self.scratch_out);
    }

    /// BTRAN of the slot-space cost vector in self.c_slots; result in self.y.
    fn btran_costs(&mut self) {
        // Apply inverse-transpose etas in reverse order first.
        for eta in self.etas.iter().rev() {
            let s = eta.slot as usize;
            let mut acc = self.c_slots[s];
            for &(i, v) in &eta.coeffs {
                acc -= v * self.c_slots[i as usize];
            }
            self.c_slots[s] = acc / eta.diag;
        }
        self.lu
            .btran(&self.c_slots, &mut self.scratch_work, &mut self.y);
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let base = if phase1 { 0.0 } else { self.cost[j] };
        if j < self.n_struct {
            let mut acc = base;
            for idx in self.colptr[j]..self.colptr[j + 1] {
                acc -= self.y[self.rowidx[idx] as usize] * self.vals[idx];
            }
            acc
        } else {
            base - self.y[j - self.n_struct]
        }
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let j = self.basis[k] as usize;
        let x = self.xb[k];
        if x < self.lower[j] - self.opts.feas_tol {
            self.lower[j] - x
        } else if x > self.upper[j] + self.opts.feas_tol {
            x - self.upper[j]
        } else {
            0.0
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let mut cleanup_rounds = 0;
        loop {
            if self.iterations > self.opts.max_iters {
                return Err(LpError::Numerical(format!(
                    "iteration limit {} exceeded",
                    self.opts.max_iters
                )));
            }
            if self.etas.len() >= self.opts.refactor_interval {
                self.refactorize()?;
            }

            // Phase is decided by the current point.
            let phase1 = (0..self.m).any(|k| self.infeasibility(k) > 0.0);

            // Price.
            if phase1 {
                for k in 0..self.m {
                    let j = self.basis[k] as usize;
                    let x = self.xb[k];
                    self.c_slots[k] = if x < self.lower[j] - self.opts.feas_tol {
                        -1.0
                    } else if x > self.upper[j] + self.opts.feas_tol {
                        1.0
                    } else {
                        0.0
                    };
                }
            } else {
                for k in 0..self.m {
                    self.c_slots[k] = self.cost[self.basis[k] as usize];
                }
            }
            self.btran_costs();

            let entering = self.choose_entering(phase1);
            let (q, d_q) = match entering {
                Some(e) => e,
                None => {
                    if phase1 {
                        // Re-verify from fresh factors before giving up.
                        if !self.etas.is_empty() {
                            self.refactorize()?;
                            continue;
                        }
                        return Ok(LpStatus::Infeasible);
                    }
                    // Optimal: clean up once so residuals are crisp.
                    if cleanup_rounds == 0 {
                        cleanup_rounds += 1;
                        self.refactorize()?;
                        let still_infeasible =
                            (0..self.m).any(|k| self.infeasibility(k) > 0.0);
                        if still_infeasible {
                            continue;
                        }
                    }
                    return Ok(LpStatus::Optimal);
                }
            };

            let sigma = match self.state[q] {
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
                VarState::FreeZero => {
                    if d_q < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VarState::Basic(_) => unreachable!(),
            };

            self.ftran_column(q);

            let step = if phase1 {
                self.ratio_test_phase1(q, sigma, d_q)
            } else {
                self.ratio_test_phase2(q, sigma)
            };

            match step {
                Step::Unbounded => {
                    debug_assert!(!phase1);
                    return Ok(LpStatus::Unbounded);
                }
                Step::Stalled => {
                    // No usable pivot: refactorize and, if that does not
                    // help, fall back to Bland's rule.
                    if !self.etas.is_empty() {
                        self.refactorize()?;
                    } else if !self.bland {
                        self.bland = true;
                    } else {
                        return Err(LpError::Numerical(
                            "no admissible pivot found".into(),
                        ));
                    }
                    continue;
                }
                Step::BoundFlip { t } => {
                    self.apply_step(q, sigma, t, None);
                }
                Step::Pivot { t, slot, to_upper } => {
                    self.apply_step(q, sigma, t, Some((slot, to_upper)));
                }
            }
            self.iterations += 1;
        }
    }

    fn choose_entering(&self, phase1: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64, f64)> = None; // (j, d, score)
        for j in 0..self.ncols {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) {
                continue;
            }
            if self.lower[j] == self.upper[j] {
                continue; // fixed
            }
            let d = self.reduced_cost(j, phase1);
            let eligible = match st {
                VarState::AtLower => d < -tol,
                VarState::AtUpper => d > tol,
                VarState::FreeZero => d.abs() > tol,
                VarState::Basic(_) => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            let score = d * d / self.gamma[j];
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, d, score)),
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Piecewise-linear phase-1 ratio test. Walks breakpoints while the
    /// directional derivative of the total infeasibility stays negative.
    fn ratio_test_phase1(&mut self, q: usize, sigma: f64, d_q: f64) -> Step {
        let ftol = self.opts.feas_tol;
        let ztol = 1e-9;
        self.events.clear();
        for k in 0..self.m {
            let a = self.alpha[k];
            if a.abs() <= ztol {
                continue;
            }
            let delta = sigma * a; // x_k(t) = x_k − t·delta
            let j = self.basis[k] as usize;
            let (l, u) = (self.lower[j], self.upper[j]);
            let x = self.xb[k];
            if x < l - ftol {
                // Below its lower bound.
                if delta < 0.0 {
                    // Rising: crosses l, later u.
                    self.events.push(Event {
                        ratio: (x - l) / delta,
                        slot: k as u32,
                        delta,
                        to_upper: false,
                    });
                    if u.is_finite() {
                        self.events.push(Event {
                            ratio: (x - u) / delta,
                            slot: k as u32,
                            delta,
                            to_upper: true,
                        });
                    }
                }
            } else if x > u + ftol {
                if delta > 0.0 {
                    self.events.push(Event {
                        ratio: (x - u) / delta,
                        slot: k as u32,
                        delta,
                        to_upper: true,
                    });
                    if l.is_finite() {
                        self.events.push(Event {
                            ratio: (x - l) / delta,
                            slot: k as u32,
                            delta,
                            to_upper: false,
                        });
                    }
                }
            } else if delta > 0.0 {
                if l.is_finite() {
                    self.events.push(Event {
                        ratio: ((x - l) / delta).max(0.0),
                        slot: k as u32,
                        delta,
                        to_upper: false,
                    });
                }
            } else if u.is_finite() {
                self.events.push(Event {
                    ratio: ((x - u) / delta).max(0.0),
                    slot: k as u32,
                    delta,
                    to_upper: true,
                });
            }
        }
        // Entering variable's own range.
        let range = self.upper[q] - self.lower[q];
        if range.is_finite() {
            self.events.push(Event {
                ratio: range,
                slot: FLIP,
                delta: f64::INFINITY,
                to_upper: sigma > 0.0,
            });
        }
        if self.events.is_empty() {
            return Step::Stalled;
        }
        self.events
            .sort_unstable_by(|a, b| a.ratio.partial_cmp(&b.ratio).unwrap());

        let mut slope = sigma * d_q; // negative
        // Round-off in the slope accumulation must not push the walk past
        // the true minimum.
        let slope_eps = 1e-9 * (1.0 + slope.abs());
        let mut idx = 0;
        let n = self.events.len();
        while idx < n {
            // Group events at (numerically) the same ratio.
            let t = self.events[idx].ratio;
            let mut end = idx;
            while end < n && self.events[end].ratio <= t + 1e-12 {
                end += 1;
            }
            for e in &self.events[idx..end] {
                if e.slot == FLIP {
                    slope = f64::INFINITY;
                } else {
                    slope += e.delta.abs();
                }
            }
            if slope >= -slope_eps {
                // Minimum reached in this group: pick the pivot.
                let group = &self.events[idx..end];
                let mut pick: Option<&Event> = None;
                for e in group {
                    if e.slot == FLIP {
                        continue;
                    }
                    match pick {
                        Some(p) if p.delta.abs() >= e.delta.abs() => {}
                        _ => pick = Some(e),
                    }
                }
                return match pick {
                    Some(e) => Step::Pivot {
                        t: e.ratio.max(0.0),
                        slot: e.slot as usize,
                        to_upper: e.to_upper,
                    },
                    // Only the bound flip lives here.
                    None => Step::BoundFlip { t },
                };
            }
            idx = end;
        }
        Step::Stalled
    }

    /// Harris-style two-pass ratio test for a primal-feasible basis.
    fn ratio_test_phase2(&mut self, q: usize, sigma: f64) -> Step {
        let ftol = self.opts.feas_tol;
        let ztol = 1e-9;
        let range = self.upper[q] - self.lower[q];
        let mut t_relaxed = if range.is_finite() {
            range
        } else {
            f64::INFINITY
        };
        for k in 0..self.m {
            let a = self.alpha[k];
            if a.abs() <= ztol {
                continue;
            }
            let delta = sigma * a;
            let j = self.basis[k] as usize;
            let x = self.xb[k];
            let bound = if delta > 0.0 {
                self.lower[j] - ftol
            } else {
                self.upper[j] + ftol
            };
            if bound.is_finite() {
                let t = (x - bound) / delta;
                if t < t_relaxed {
                    t_relaxed = t;
                }
            }
        }
        if t_relaxed == f64::INFINITY {
            return Step::Unbounded;
        }
        // Second pass: best pivot among candidates within the relaxed step.
        let mut pick: Option<(usize, f64, bool, f64)> = None; // slot, t, to_upper, |delta|
        for k in 0..self.m {
            let a = self.alpha[k];
            if a.abs() <= ztol {
                continue;
            }
            let delta = sigma * a;
            let j = self.basis[k] as usize;
            let x = self.xb[k];
            let (bound, to_upper) = if delta > 0.0 {
                if !self.lower[j].is_finite() {
                    continue;
                }
                (self.lower[j], false)
            } else {
                if !self.upper[j].is_finite() {
                    continue;
                }
                (self.upper[j], true)
            };
            let t = (x - bound) / delta;
            if t <= t_relaxed {
                let better = match pick {
                    // Bland mode: lowest leaving variable index for the
                    // anticycling guarantee; otherwise largest pivot.
                    Some((slot, _, _, best_a)) => {
                        if self.bland {
                            (self.basis[k] as usize) < (self.basis[slot] as usize)
                        } else {
                            delta.abs() > best_a
                        }
                    }
                    None => true,
                };
                if better {
                    pick = Some((k, t.max(0.0), to_upper, delta.abs()));
                }
            }
        }
        match pick {
            Some((slot, t, to_upper, _)) if range.is_finite() && range <= t => {
                let _ = (slot, to_upper);
                Step::BoundFlip { t: range }
            }
            Some((slot, t, to_upper, _)) => Step::Pivot { t, slot, to_upper },
            None if range.is_finite() => Step::BoundFlip { t: range },
            None => Step::Stalled,
        }
    }

    fn apply_step(&mut self, q: usize, sigma: f64, t: f64, pivot: Option<(usize, bool)>) {
        // Move basics.
        if t != 0.0 {
            for k in 0..self.m {
                let a = self.alpha[k];
                if a != 0.0 {
                    self.xb[k] -= t * sigma * a;
                }
            }
        }
        let x_q_new = match self.state[q] {
            VarState::AtLower => self.lower[q] + sigma * t,
            VarState::AtUpper => self.upper[q] + sigma * t,
            VarState::FreeZero => sigma * t,
            VarState::Basic(_) => unreachable!(),
        };
        if t > 1e-10 {
            self.degenerate_streak = 0;
            self.bland = false;
        } else {
            self.degenerate_streak += 1;
            if self.degenerate_streak > self.opts.degenerate_limit {
                self.bland = true;
            }
        }
        match pivot {
            None => {
                // Bound flip.
                self.state[q] = match self.state[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
            }
            Some((slot, to_upper)) => {
                let leaving = self.basis[slot] as usize;
                self.state[leaving] = if to_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.basis[slot] = q as u32;
                self.state[q] = VarState::Basic(slot as u32);
                self.xb[slot] = x_q_new;
                // Record the eta for this pivot.
                let diag = self.alpha[slot];
                let mut coeffs = Vec::new();
                for k in 0..self.m {
                    if k != slot && self.alpha[k] != 0.0 {
                        coeffs.push((k as u32, self.alpha[k]));
                    }
                }
                self.etas.push(Eta {
                    slot: slot as u32,
                    diag,
                    coeffs,
                });
            }
        }
    }
}

enum Step {
    Pivot { t: f64, slot: usize, to_upper: bool },
    BoundFlip { t: f64 },
    Unbounded,
    Stalled,
}
