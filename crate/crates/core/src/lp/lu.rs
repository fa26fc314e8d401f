//! Sparse LU factorization of simplex bases.
//!
//! Left-looking Gilbert–Peierls elimination with partial pivoting. Columns
//! are processed in the order given; a column whose residual is numerically
//! zero on the unpivoted rows is reported as dependent and skipped, and any
//! rows left without a pivot are covered by unit (logical) columns at the
//! end. This doubles as basis repair for caller-proposed starting bases.

const NONE: u32 = u32::MAX;

/// Where the column pivoted at a given elimination step came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepSource {
    /// Index into the caller's proposed column list.
    Input(usize),
    /// Unit column covering this row during repair.
    Logical(usize),
}

pub struct LuFactors {
    m: usize,
    l_colptr: Vec<usize>,
    l_rows: Vec<u32>,
    l_vals: Vec<f64>,
    u_colptr: Vec<usize>,
    u_steps: Vec<u32>,
    u_vals: Vec<f64>,
    u_diag: Vec<f64>,
    pivot_row: Vec<u32>,
    row_step: Vec<u32>,
    /// Provenance of each step's column.
    pub sources: Vec<StepSource>,
    /// Input positions whose columns were linearly dependent.
    pub skipped: Vec<usize>,
}

impl LuFactors {
    /// Solves `B x = rhs`. `rhs` is in row space and is consumed as scratch;
    /// the solution lands in `out`, indexed by elimination step (basis slot).
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let v = rhs[self.pivot_row[k] as usize];
            if v != 0.0 {
                for (idx, &r) in self.l_rows[self.l_colptr[k]..self.l_colptr[k + 1]]
                    .iter()
                    .enumerate()
                {
                    rhs[r as usize] -= self.l_vals[self.l_colptr[k] + idx] * v;
                }
            }
        }
        for k in 0..m {
            out[k] = rhs[self.pivot_row[k] as usize];
        }
        for k in (0..m).rev() {
            let t = out[k] / self.u_diag[k];
            out[k] = t;
            if t != 0.0 {
                for (idx, &s) in self.u_steps[self.u_colptr[k]..self.u_colptr[k + 1]]
                    .iter()
                    .enumerate()
                {
                    out[s as usize] -= self.u_vals[self.u_colptr[k] + idx] * t;
                }
            }
        }
    }

    /// Solves `Bᵀ y = c` where `c` is indexed by basis slot. The result is in
    /// row space (suitable for pricing against original columns).
    pub fn btran(&self, c: &[f64], work: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        // w = U⁻ᵀ c, forward over steps.
        for k in 0..m {
            let mut acc = c[k];
            for (idx, &s) in self.u_steps[self.u_colptr[k]..self.u_colptr[k + 1]]
                .iter()
                .enumerate()
            {
                acc -= self.u_vals[self.u_colptr[k] + idx] * work[s as usize];
            }
            work[k] = acc / self.u_diag[k];
        }
        for y in out.iter_mut() {
            *y = 0.0;
        }
        for k in 0..m {
            out[self.pivot_row[k] as usize] = work[k];
        }
        // y = L̂ᵀ z, reverse over steps.
        for k in (0..m).rev() {
            let p = self.pivot_row[k] as usize;
            let mut acc = out[p];
            for (idx, &r) in self.l_rows[self.l_colptr[k]..self.l_colptr[k + 1]]
                .iter()
                .enumerate()
            {
                acc -= self.l_vals[self.l_colptr[k] + idx] * out[r as usize];
            }
            out[p] = acc;
        }
    }
}

pub struct LuBuilder {
    m: usize,
    abs_pivot_tol: f64,
    rel_pivot_tol: f64,
    // scratch
    x: Vec<f64>,
    touched: Vec<u32>,
    visited: Vec<bool>,
    topo: Vec<u32>,
    dfs_stack: Vec<(u32, usize)>,
}

impl LuBuilder {
    pub fn new(m: usize) -> Self {
        LuBuilder {
            m,
            abs_pivot_tol: 1e-11,
            rel_pivot_tol: 1e-9,
            x: vec![0.0; m],
            touched: Vec::new(),
            visited: vec![false; m],
            topo: Vec::new(),
            dfs_stack: Vec::new(),
        }
    }

    /// Factorizes the basis given by `columns` (each a clean sparse column in
    /// row space). Dependent columns are skipped and uncovered rows repaired
    /// with logical columns.
    pub fn factorize(&mut self, columns: &[&[(u32, f64)]]) -> LuFactors {
        let m = self.m;
        let mut f = LuFactors {
            m,
            l_colptr: vec![0],
            l_rows: Vec::new(),
            l_vals: Vec::new(),
            u_colptr: vec![0],
            u_steps: Vec::new(),
            u_vals: Vec::new(),
            u_diag: Vec::new(),
            pivot_row: Vec::new(),
            row_step: vec![NONE; m],
            sources: Vec::new(),
            skipped: Vec::new(),
        };
        for (pos, col) in columns.iter().enumerate() {
            if f.pivot_row.len() == m {
                f.skipped.push(pos);
                continue;
            }
            if !self.add_column(&mut f, col, StepSource::Input(pos)) {
                f.skipped.push(pos);
            }
        }
        if f.pivot_row.len() < m {
            let unit = |row: u32| [(row, 1.0)];
            for row in 0..m as u32 {
                if f.row_step[row as usize] == NONE {
                    let col = unit(row);
                    let ok = self.add_column(&mut f, &col, StepSource::Logical(row as usize));
                    debug_assert!(ok, "logical column of uncovered row must pivot");
                }
            }
        }
        debug_assert_eq!(f.pivot_row.len(), m);
        f
    }

    fn add_column(&mut self, f: &mut LuFactors, col: &[(u32, f64)], src: StepSource) -> bool {
        // Scatter the column and collect the reach set of already-pivoted
        // steps in topological order.
        self.topo.clear();
        for &(r, v) in col {
            self.x[r as usize] += v;
            self.touched.push(r);
            let s = f.row_step[r as usize];
            if s != NONE && !self.visited[s as usize] {
                self.dfs(f, s);
            }
        }
        // Reverse postorder = dependency order for the triangular solve.
        for ti in (0..self.topo.len()).rev() {
            let s = self.topo[ti] as usize;
            self.visited[s] = false;
            let v = self.x[f.pivot_row[s] as usize];
            if v != 0.0 {
                for idx in f.l_colptr[s]..f.l_colptr[s + 1] {
                    let r = f.l_rows[idx] as usize;
                    if self.x[r] == 0.0 {
                        self.touched.push(r as u32);
                    }
                    self.x[r] -= f.l_vals[idx] * v;
                }
            }
        }
        // Split into U entries (pivoted rows) and pivot candidates.
        let mut best_row = NONE;
        let mut best_abs = 0.0f64;
        let mut col_max = 0.0f64;
        for &r in &self.touched {
            let v = self.x[r as usize];
            let a = v.abs();
            if a > col_max {
                col_max = a;
            }
            if f.row_step[r as usize] == NONE && a > best_abs {
                best_abs = a;
                best_row = r;
            }
        }
        let tol = self.abs_pivot_tol.max(self.rel_pivot_tol * col_max);
        if best_row == NONE || best_abs <= tol {
            for &r in &self.touched {
                self.x[r as usize] = 0.0;
            }
            self.touched.clear();
            return false;
        }
        let k = f.pivot_row.len();
        let diag = self.x[best_row as usize];
        for &r in &self.touched {
            let v = self.x[r as usize];
            self.x[r as usize] = 0.0;
            if v == 0.0 || r == best_row {
                continue;
            }
            let s = f.row_step[r as usize];
            if s != NONE {
                f.u_steps.push(s);
                f.u_vals.push(v);
            } else {
                f.l_rows.push(r);
                f.l_vals.push(v / diag);
            }
        }
        self.touched.clear();
        f.u_colptr.push(f.u_steps.len());
        f.l_colptr.push(f.l_rows.len());
        f.u_diag.push(diag);
        f.pivot_row.push(best_row);
        f.row_step[best_row as usize] = k as u32;
        f.sources.push(src);
        true
    }

    fn dfs(&mut self, f: &LuFactors, start: u32) {
        self.dfs_stack.clear();
        self.visited[start as usize] = true;
        self.dfs_stack.push((start, f.l_colptr[start as usize]));
        while let Some(&mut (s, ref mut ptr)) = self.dfs_stack.last_mut() {
            let end = f.l_colptr[s as usize + 1];
            let mut descended = false;
            while *ptr < end {
                let r = f.l_rows[*ptr] as usize;
                *ptr += 1;
                let s2 = f.row_step[r];
                if s2 != NONE && !self.visited[s2 as usize] {
                    self.visited[s2 as usize] = true;
                    self.dfs_stack.push((s2, f.l_colptr[s2 as usize]));
                    descended = true;
                    break;
                }
            }
            if !descended {
                self.dfs_stack.pop();
                self.topo.push(s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pi, pv) = (k..n)
                .map(|i| (i, m[perm[i]][k].abs()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
            if pv < 1e-12 {
                return None;
            }
            perm.swap(k, pi);
            for i in k + 1..n {
                let f = m[perm[i]][k] / m[perm[k]][k];
                if f != 0.0 {
                    for j in k..n {
                        let t = m[perm[k]][j];
                        m[perm[i]][j] -= f * t;
                    }
                    x[perm[i]] -= f * x[perm[k]];
                }
            }
        }
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = x[perm[k]];
            for j in k + 1..n {
                acc -= m[perm[k]][j] * out[j];
            }
            out[k] = acc / m[perm[k]][k];
        }
        Some(out)
    }

    fn random_sparse(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<(u32, f64)>> {
        // Diagonal plus random off-diagonal entries: nonsingular w.h.p.
        (0..m)
            .map(|j| {
                let mut col = vec![(j as u32, rng.gen_range(0.5..2.0))];
                for _ in 0..rng.gen_range(0..3) {
                    let r = rng.gen_range(0..m) as u32;
                    if col.iter().all(|&(rr, _)| rr != r) {
                        col.push((r, rng.gen_range(-1.0..1.0)));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn ftran_btran_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let m = 2 + (trial % 9);
            let cols = random_sparse(&mut rng, m);
            let refs: Vec<&[(u32, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
            let mut builder = LuBuilder::new(m);
            let f = builder.factorize(&refs);
            assert!(f.skipped.is_empty());
            // Dense copy, columns in step order.
            let mut dense = vec![vec![0.0; m]; m];
            for (k, src) in f.sources.iter().enumerate() {
                match *src {
                    StepSource::Input(pos) => {
                        for &(r, v) in &cols[pos] {
                            dense[r as usize][k] += v;
                        }
                    }
                    StepSource::Logical(row) => dense[row][k] = 1.0,
                }
            }
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let expect = dense_solve(&dense, &b).unwrap();
            let mut rhs = b.clone();
            let mut out = vec![0.0; m];
            f.ftran(&mut rhs, &mut out);
            for k in 0..m {
                assert!((out[k] - expect[k]).abs() < 1e-9, "ftran mismatch");
            }
            // BTRAN against dense transpose solve.
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let dense_t: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| dense[j][i]).collect())
                .collect();
            let expect_y = dense_solve(&dense_t, &c).unwrap();
            let mut work = vec![0.0; m];
            let mut y = vec![0.0; m];
            f.btran(&c, &mut work, &mut y);
            for r in 0..m {
                assert!((y[r] - expect_y[r]).abs() < 1e-9, "btran mismatch");
            }
        }
    }

    #[test]
    fn dependent_columns_are_repaired() {
        // Two identical columns: the second must be skipped and the missing
        // row covered by a logical.
        let cols: Vec<Vec<(u32, f64)>> = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
            vec![(2, 3.0)],
        ];
        let refs: Vec<&[(u32, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut builder = LuBuilder::new(3);
        let f = builder.factorize(&refs);
        assert_eq!(f.skipped, vec![1]);
        assert_eq!(f.sources.len(), 3);
        assert!(f
            .sources
            .iter()
            .any(|s| matches!(s, StepSource::Logical(_))));
    }
}
