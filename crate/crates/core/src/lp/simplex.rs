//! Dense revised simplex with a two-phase start. Pricing is Dantzig's rule
//! with an automatic switch to Bland's rule while the objective is stalled,
//! which keeps pivots fast in the common case and rules out cycling.

use crate::scalar::Scalar;

use super::{FlowSolution, LinearProgramSpec, LpError, Relation, SolveStatus};

const MAX_PIVOTS: usize = 400_000;
/// Consecutive non-improving pivots before Bland's rule takes over.
const STALL_LIMIT: usize = 64;
/// Pivots between basis refactorizations.
const REFACTOR_INTERVAL: usize = 2_000;

#[derive(Debug, Clone)]
pub struct SolverDiagnostics<S> {
    /// Reduced cost of every column at termination (structural vars first).
    pub reduced_costs: Vec<S>,
    /// Column index chosen as basic for each row.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

pub fn solve_lp<S: Scalar>(spec: &LinearProgramSpec<S>) -> Result<FlowSolution<S>, LpError> {
    solve_lp_with_diagnostics(spec).map(|(sol, _)| sol)
}

pub fn solve_lp_with_diagnostics<S: Scalar>(
    spec: &LinearProgramSpec<S>,
) -> Result<(FlowSolution<S>, SolverDiagnostics<S>), LpError> {
    solve_with_bounds(spec, &spec.lower, &spec.upper)
}

/// Solves `spec` with the given bounds in place of the spec's own; the
/// branch-and-bound wrapper leans on this to avoid cloning constraint rows.
pub(super) fn solve_with_bounds<S: Scalar>(
    spec: &LinearProgramSpec<S>,
    lower: &[S],
    upper: &[Option<S>],
) -> Result<(FlowSolution<S>, SolverDiagnostics<S>), LpError> {
    let n = spec.var_count();
    for c in &spec.constraints {
        if !c.rhs.is_finite() {
            return Err(LpError::Malformed("constraint rhs must be finite".into()));
        }
        if c.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
            return Err(LpError::Malformed("constraint coefficient out of range".into()));
        }
    }
    for j in 0..n {
        if let Some(u) = upper[j] {
            if u < lower[j] {
                let mut sol = FlowSolution::infeasible(n);
                sol.values = lower.to_vec();
                return Ok((sol, SolverDiagnostics { reduced_costs: vec![S::zero(); n], basis: vec![], pivots: 0 }));
            }
        }
    }

    let mut tableau = match Tableau::build(spec, lower, upper, true)? {
        Some(t) => t,
        // Hinted basis was unusable; start from scratch.
        None => Tableau::build(spec, lower, upper, false)?.expect("unhinted build always succeeds"),
    };
    let status = tableau.optimize()?;
    let (values, objective_value) = tableau.extract(spec, lower);
    let diagnostics = SolverDiagnostics {
        reduced_costs: tableau.final_reduced_costs(),
        basis: tableau.basis.clone(),
        pivots: tableau.pivots,
    };
    let solution = match status {
        SolveStatus::Optimal => FlowSolution { values, objective_value, status },
        SolveStatus::Infeasible => FlowSolution::infeasible(n),
        SolveStatus::Unbounded => FlowSolution::unbounded(n),
    };
    Ok((solution, diagnostics))
}

struct Tableau<S> {
    m: usize,
    /// Sparse columns of the standardized program (structural, then slack,
    /// then artificial), each a list of (row, coefficient).
    cols: Vec<Vec<(usize, S)>>,
    rhs: Vec<S>,
    /// Phase-2 objective over standardized columns.
    obj: Vec<S>,
    structural: usize,
    artificial_start: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense inverse of the basis matrix, stored column-major so pricing,
    /// column representation, and pivot updates all walk contiguously.
    binv: Vec<S>,
    xb: Vec<S>,
    pivots: usize,
    reduced: Vec<S>,
}

impl<S: Scalar> Tableau<S> {
    /// Builds the standardized tableau. With `use_hints`, the spec's basis
    /// hint seeds the starting basis; returns `None` when the hinted basis
    /// turns out singular or infeasible so the caller can retry without.
    fn build(
        spec: &LinearProgramSpec<S>,
        lower: &[S],
        upper: &[Option<S>],
        use_hints: bool,
    ) -> Result<Option<Self>, LpError> {
        let n = spec.var_count();
        // Shift lower bounds to zero and surface finite upper bounds as rows.
        let mut rows: Vec<(Vec<(usize, S)>, Relation, S)> = Vec::with_capacity(spec.constraints.len());
        for c in &spec.constraints {
            let shift: S = c.coeffs.iter().map(|&(j, a)| a * lower[j]).sum();
            let mut coeffs = c.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            coeffs.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            rows.push((coeffs, c.relation, c.rhs - shift));
        }
        for j in 0..n {
            if let Some(u) = upper[j] {
                rows.push((vec![(j, S::one())], Relation::Le, u - lower[j]));
            }
        }
        // Normalize right-hand sides to be non-negative.
        for (coeffs, rel, rhs) in rows.iter_mut() {
            if *rhs < S::zero() {
                for (_, a) in coeffs.iter_mut() {
                    *a = -*a;
                }
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let m = rows.len();
        let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
        for (i, (coeffs, _, _)) in rows.iter().enumerate() {
            for &(j, a) in coeffs {
                if a != S::zero() {
                    cols[j].push((i, a));
                }
            }
        }

        // Hints claim rows before slack/artificial assignment.
        let mut hinted: Vec<Option<usize>> = vec![None; m];
        if use_hints {
            if let Some(hints) = &spec.basis_hint {
                let mut used = vec![false; n];
                for (i, maybe) in hints.iter().enumerate().take(spec.constraints.len().min(m)) {
                    if let Some(&j) = maybe.as_ref() {
                        if j < n && !used[j] && cols[j].iter().any(|&(r, a)| r == i && a != S::zero()) {
                            hinted[i] = Some(j);
                            used[j] = true;
                        }
                    }
                }
            }
        }

        let mut basis = vec![usize::MAX; m];
        // Slack and surplus columns.
        for (i, (_, rel, _)) in rows.iter().enumerate() {
            match rel {
                Relation::Le => {
                    cols.push(vec![(i, S::one())]);
                    if hinted[i].is_none() {
                        basis[i] = cols.len() - 1;
                    }
                }
                Relation::Ge => {
                    cols.push(vec![(i, -S::one())]);
                }
                Relation::Eq => {}
            }
        }
        let artificial_start = cols.len();
        for (i, (_, rel, _)) in rows.iter().enumerate() {
            if let Some(j) = hinted[i] {
                basis[i] = j;
                continue;
            }
            if matches!(rel, Relation::Ge | Relation::Eq) {
                cols.push(vec![(i, S::one())]);
                basis[i] = cols.len() - 1;
            }
        }

        let total = cols.len();
        let mut obj = vec![S::zero(); total];
        obj[..n].copy_from_slice(&spec.objective);

        let mut in_basis = vec![false; total];
        let rhs: Vec<S> = rows.iter().map(|r| r.2).collect();
        let mut binv = vec![S::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = S::one();
            in_basis[basis[i]] = true;
        }
        let xb = rhs.clone();

        let mut tableau = Tableau {
            m,
            cols,
            rhs,
            obj,
            structural: n,
            artificial_start,
            basis,
            in_basis,
            binv,
            xb,
            pivots: 0,
            reduced: vec![S::zero(); total],
        };
        if hinted.iter().any(Option::is_some) && !tableau.initial_factorize()? {
            return Ok(None);
        }
        Ok(Some(tableau))
    }

    /// Factorizes the (hinted) starting basis. Exploits the common case of a
    /// lower-triangular basis by forward substitution; returns false when
    /// the basis is singular or the implied start is infeasible.
    fn initial_factorize(&mut self) -> Result<bool, LpError> {
        let m = self.m;
        let mut triangular = true;
        'check: for (i, &b) in self.basis.iter().enumerate() {
            let mut diag = S::zero();
            for &(r, a) in &self.cols[b] {
                if r < i {
                    triangular = false;
                    break 'check;
                }
                if r == i {
                    diag = a;
                }
            }
            if diag == S::zero() {
                triangular = false;
                break;
            }
        }
        if triangular {
            let mut row_entries: Vec<Vec<(usize, S)>> = vec![Vec::new(); m];
            let mut diag = vec![S::one(); m];
            for (c, &b) in self.basis.iter().enumerate() {
                for &(r, a) in &self.cols[b] {
                    if r == c {
                        diag[c] = a;
                    } else {
                        row_entries[r].push((c, a));
                    }
                }
            }
            self.binv.fill(S::zero());
            for j in 0..m {
                let base = j * m;
                self.binv[base + j] = S::one() / diag[j];
                for i in j + 1..m {
                    let mut s = S::zero();
                    for &(c, a) in &row_entries[i] {
                        if c >= j {
                            let x = self.binv[base + c];
                            if x != S::zero() {
                                s += a * x;
                            }
                        }
                    }
                    if s != S::zero() {
                        self.binv[base + i] = -s / diag[i];
                    }
                }
            }
            self.recompute_xb();
        } else if self.refactorize().is_err() {
            return Ok(false);
        }
        let tol = S::cast_f64(super::FEASIBILITY_TOL);
        if self.xb.iter().any(|&x| x < -tol) {
            return Ok(false);
        }
        for x in self.xb.iter_mut() {
            if *x < S::zero() {
                *x = S::zero();
            }
        }
        Ok(true)
    }

    fn recompute_xb(&mut self) {
        let m = self.m;
        let mut xb = vec![S::zero(); m];
        for jj in 0..m {
            let r = self.rhs[jj];
            if r == S::zero() {
                continue;
            }
            let col = &self.binv[jj * m..(jj + 1) * m];
            for (x, &b) in xb.iter_mut().zip(col) {
                *x += b * r;
            }
        }
        for (slot, v) in self.xb.iter_mut().zip(xb) {
            *slot = if v < S::zero() && v > -S::cast_f64(1e-9) { S::zero() } else { v };
        }
    }

    fn optimize(&mut self) -> Result<SolveStatus, LpError> {
        let has_artificials = self.artificial_start < self.cols.len();
        if has_artificials {
            let mut phase1 = vec![S::zero(); self.cols.len()];
            for j in self.artificial_start..self.cols.len() {
                phase1[j] = -S::one();
            }
            match self.run(&phase1, true)? {
                SolveStatus::Optimal => {}
                other => return Ok(other),
            }
            let infeas: S = (self.artificial_start..self.cols.len())
                .filter(|&j| self.in_basis[j])
                .map(|j| {
                    let row = self.basis.iter().position(|&b| b == j).unwrap();
                    self.xb[row]
                })
                .sum();
            if infeas > S::cast_f64(super::FEASIBILITY_TOL) {
                return Ok(SolveStatus::Infeasible);
            }
            self.evict_artificials()?;
        }
        let obj = self.obj.clone();
        self.run(&obj, false)
    }

    /// Pivots basic artificials out or deletes their (redundant) rows, then
    /// truncates the artificial columns entirely.
    fn evict_artificials(&mut self) -> Result<(), LpError> {
        let mut redundant_rows = Vec::new();
        for row in 0..self.m {
            if self.basis[row] < self.artificial_start {
                continue;
            }
            let mut entered = false;
            for j in 0..self.artificial_start {
                if self.in_basis[j] {
                    continue;
                }
                let w = self.representation(j);
                if w[row].abs() > S::cast_f64(1e-7) {
                    self.pivot(row, j, &w);
                    entered = true;
                    break;
                }
            }
            if !entered {
                redundant_rows.push(row);
            }
        }
        if !redundant_rows.is_empty() {
            let keep: Vec<usize> = (0..self.m).filter(|r| !redundant_rows.contains(r)).collect();
            let remap: Vec<Option<usize>> = {
                let mut v = vec![None; self.m];
                for (new_i, &old_i) in keep.iter().enumerate() {
                    v[old_i] = Some(new_i);
                }
                v
            };
            for col in self.cols.iter_mut() {
                col.retain(|&(r, _)| remap[r].is_some());
                for (r, _) in col.iter_mut() {
                    *r = remap[*r].unwrap();
                }
            }
            self.rhs = keep.iter().map(|&r| self.rhs[r]).collect();
            self.basis = keep.iter().map(|&r| self.basis[r]).collect();
            self.m = keep.len();
            self.binv = vec![S::zero(); self.m * self.m];
            self.xb = vec![S::zero(); self.m];
        }
        for &b in &self.basis {
            debug_assert!(b < self.artificial_start);
        }
        for j in self.artificial_start..self.cols.len() {
            self.in_basis[j] = false;
        }
        self.cols.truncate(self.artificial_start);
        self.obj.truncate(self.artificial_start);
        self.in_basis.truncate(self.artificial_start);
        self.reduced.truncate(self.artificial_start);
        self.refactorize()?;
        Ok(())
    }

    fn run(&mut self, obj: &[S], phase1: bool) -> Result<SolveStatus, LpError> {
        let tol = S::cast_f64(1e-9);
        let mut stall = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(self.pivots));
            }
            // Dual vector y = c_B' B^-1, then reduced costs.
            let cb: Vec<S> = self.basis.iter().map(|&b| obj[b]).collect();
            let mut y = vec![S::zero(); self.m];
            for (j, yj) in y.iter_mut().enumerate() {
                let col = &self.binv[j * self.m..(j + 1) * self.m];
                let mut acc = S::zero();
                for (c, &v) in cb.iter().zip(col) {
                    acc += *c * v;
                }
                *yj = acc;
            }
            let bland = stall >= STALL_LIMIT;
            let mut entering: Option<(usize, S)> = None;
            for j in 0..self.cols.len() {
                // Artificials start basic and may only leave.
                if self.in_basis[j] || (phase1 && j >= self.artificial_start) {
                    self.reduced[j] = S::zero();
                    continue;
                }
                let mut d = obj[j];
                for &(r, a) in &self.cols[j] {
                    d -= y[r] * a;
                }
                self.reduced[j] = d;
                if d > tol {
                    match (bland, &entering) {
                        (true, None) => {
                            entering = Some((j, d));
                            break;
                        }
                        (false, Some((_, best))) if d <= *best => {}
                        (false, _) => entering = Some((j, d)),
                        _ => {}
                    }
                }
            }
            let Some((enter, dcost)) = entering else {
                return Ok(SolveStatus::Optimal);
            };
            let w = self.representation(enter);
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.m {
                if w[i] > tol {
                    let ratio = self.xb[i] / w[i];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            // Near-ties go to the larger pivot element for
                            // stability, or the lower index under Bland.
                            let tie = (ratio - lr).abs() <= tol;
                            let better = if bland {
                                tie && self.basis[i] < self.basis[li]
                            } else {
                                tie && w[i] > w[li]
                            };
                            if ratio < lr - tol || better {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, theta)) = leave else {
                return Ok(SolveStatus::Unbounded);
            };

            let improvement = dcost * theta;
            if improvement <= tol {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(row, enter, &w);
            since_refactor += 1;
            if since_refactor >= REFACTOR_INTERVAL {
                self.refactorize()?;
                since_refactor = 0;
            }
        }
    }

    /// w = B^-1 a_j for a sparse column.
    fn representation(&self, j: usize) -> Vec<S> {
        let mut w = vec![S::zero(); self.m];
        for &(r, a) in &self.cols[j] {
            let col = &self.binv[r * self.m..(r + 1) * self.m];
            for (wi, &b) in w.iter_mut().zip(col) {
                *wi += b * a;
            }
        }
        w
    }

    fn pivot(&mut self, row: usize, enter: usize, w: &[S]) {
        let pivot_val = w[row];
        debug_assert!(pivot_val.abs() > S::cast_f64(1e-12));
        let inv = S::one() / pivot_val;
        let nz: Vec<(usize, S)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &f)| i != row && f != S::zero())
            .map(|(i, &f)| (i, f))
            .collect();
        for c in 0..self.m {
            let col = &mut self.binv[c * self.m..(c + 1) * self.m];
            let pivot_entry = col[row] * inv;
            if pivot_entry == S::zero() {
                continue;
            }
            col[row] = pivot_entry;
            for &(i, f) in &nz {
                col[i] -= f * pivot_entry;
            }
        }
        self.xb[row] *= inv;
        let xb_row = self.xb[row];
        for &(i, f) in &nz {
            self.xb[i] -= f * xb_row;
            if self.xb[i] < S::zero() && self.xb[i] > -S::cast_f64(1e-11) {
                self.xb[i] = S::zero();
            }
        }
        self.in_basis[self.basis[row]] = false;
        self.in_basis[enter] = true;
        self.basis[row] = enter;
        self.pivots += 1;
    }

    /// Rebuilds the basis inverse from scratch by Gauss-Jordan elimination
    /// with partial pivoting, then recomputes the basic solution.
    fn refactorize(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut aug = vec![S::zero(); m * 2 * m];
        for (i, &b) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[b] {
                aug[r * 2 * m + i] = a;
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = S::one();
        }
        for col in 0..m {
            let mut best = col;
            for r in col + 1..m {
                if aug[r * 2 * m + col].abs() > aug[best * 2 * m + col].abs() {
                    best = r;
                }
            }
            if aug[best * 2 * m + col].abs() < S::cast_f64(1e-12) {
                return Err(LpError::Numerical("singular basis during refactorization".into()));
            }
            if best != col {
                for k in 0..2 * m {
                    aug.swap(col * 2 * m + k, best * 2 * m + k);
                }
            }
            let inv = S::one() / aug[col * 2 * m + col];
            for k in 0..2 * m {
                aug[col * 2 * m + k] *= inv;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[r * 2 * m + col];
                    if f != S::zero() {
                        for k in 0..2 * m {
                            let v = aug[col * 2 * m + k];
                            aug[r * 2 * m + k] -= f * v;
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for jj in 0..m {
                // Column-major storage.
                self.binv[jj * m + i] = aug[i * 2 * m + m + jj];
            }
        }
        self.recompute_xb();
        Ok(())
    }

    fn extract(&self, spec: &LinearProgramSpec<S>, lower: &[S]) -> (Vec<S>, S) {
        let n = spec.var_count();
        let mut values = lower.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                let v = self.xb[i].max(S::zero());
                values[b] = lower[b] + v;
            }
        }
        let objective = spec.objective_value(&values);
        (values, objective)
    }

    fn final_reduced_costs(&self) -> Vec<S> {
        self.reduced[..self.structural.min(self.reduced.len())].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{dump_lp, Relation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(n: usize) -> LinearProgramSpec<f64> {
        LinearProgramSpec::with_vars(n)
    }

    #[test]
    fn single_variable_cap() {
        let mut spec = lp(1);
        spec.objective = vec![1.0];
        spec.push_constraint(vec![(0, 1.0)], Relation::Le, 3.0);
        let sol = solve_lp(&spec).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_vertex() {
        let mut spec = lp(2);
        spec.objective = vec![2.0, 1.0];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 4.0);
        spec.push_constraint(vec![(0, 1.0)], Relation::Le, 2.0);
        let sol = solve_lp(&spec).unwrap();
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
        assert!((sol.values[1] - 2.0).abs() < 1e-9);
        assert!((sol.objective_value - 6.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut spec = lp(1);
        spec.objective = vec![1.0];
        spec.push_constraint(vec![(0, 1.0)], Relation::Ge, 2.0);
        spec.push_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&spec).unwrap().status, SolveStatus::Infeasible);

        let mut spec = lp(1);
        spec.objective = vec![1.0];
        spec.push_constraint(vec![(0, 1.0)], Relation::Ge, 0.0);
        assert_eq!(solve_lp(&spec).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn equality_constraints_and_lower_bounds() {
        let mut spec = lp(2);
        spec.objective = vec![1.0, -1.0];
        spec.lower = vec![1.0, 0.5];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 3.0);
        let sol = solve_lp(&spec).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[0] - 2.5).abs() < 1e-9);
        assert!((sol.values[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_respected() {
        let mut spec = lp(2);
        spec.objective = vec![1.0, 1.0];
        spec.upper = vec![Some(1.5), Some(2.0)];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 10.0);
        let sol = solve_lp(&spec).unwrap();
        assert!((sol.objective_value - 3.5).abs() < 1e-9);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Classic degenerate LP that cycles under naive Dantzig pricing.
        let mut spec = lp(4);
        spec.objective = vec![0.75, -150.0, 0.02, -6.0];
        spec.push_constraint(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        spec.push_constraint(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        spec.push_constraint(vec![(2, 1.0)], Relation::Le, 1.0);
        let sol = solve_lp(&spec).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 0.05).abs() < 1e-9, "objective {}", sol.objective_value);
    }

    /// Brute-force oracle: enumerate candidate vertices as intersections of
    /// tight constraint subsets and take the best feasible one.
    fn enumerate_optimum(spec: &LinearProgramSpec<f64>) -> f64 {
        // Gather all hyperplanes: constraint boundaries plus x_j = 0.
        let n = spec.var_count();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &spec.constraints {
            let mut row = vec![0.0; n];
            for &(j, a) in &c.coeffs {
                row[j] += a;
            }
            planes.push((row, c.rhs));
        }
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            planes.push((row, 0.0));
        }
        let mut best = f64::NEG_INFINITY;
        let idx: Vec<usize> = (0..planes.len()).collect();
        let mut combo = vec![0usize; n];
        fn rec(
            planes: &[(Vec<f64>, f64)],
            idx: &[usize],
            combo: &mut Vec<usize>,
            depth: usize,
            start: usize,
            spec: &LinearProgramSpec<f64>,
            best: &mut f64,
        ) {
            let n = spec.var_count();
            if depth == n {
                // Solve the n x n system by Gaussian elimination.
                let mut a = vec![0.0; n * n];
                let mut b = vec![0.0; n];
                for (r, &p) in combo.iter().enumerate() {
                    for c in 0..n {
                        a[r * n + c] = planes[p].0[c];
                    }
                    b[r] = planes[p].1;
                }
                let mut x = b.clone();
                let mut mat = a.clone();
                for col in 0..n {
                    let mut piv = col;
                    for r in col + 1..n {
                        if mat[r * n + col].abs() > mat[piv * n + col].abs() {
                            piv = r;
                        }
                    }
                    if mat[piv * n + col].abs() < 1e-10 {
                        return;
                    }
                    if piv != col {
                        for k in 0..n {
                            mat.swap(col * n + k, piv * n + k);
                        }
                        x.swap(col, piv);
                    }
                    let d = mat[col * n + col];
                    for k in 0..n {
                        mat[col * n + k] /= d;
                    }
                    x[col] /= d;
                    for r in 0..n {
                        if r != col {
                            let f = mat[r * n + col];
                            if f != 0.0 {
                                for k in 0..n {
                                    mat[r * n + k] -= f * mat[col * n + k];
                                }
                                x[r] -= f * x[col];
                            }
                        }
                    }
                }
                if spec.feasibility_residual(&x) <= 1e-7 {
                    let obj = spec.objective_value(&x);
                    if obj > *best {
                        *best = obj;
                    }
                }
                return;
            }
            for k in start..idx.len() {
                combo[depth] = idx[k];
                rec(planes, idx, combo, depth + 1, k + 1, spec, best);
            }
        }
        rec(&planes, &idx, &mut combo, 0, 0, spec, &mut best);
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..25 {
            let n = 3;
            let mut spec = lp(n);
            spec.objective = (0..n).map(|_| rng.random_range(-2.0..4.0)).collect();
            for _ in 0..4 {
                let coeffs: Vec<(usize, f64)> =
                    (0..n).map(|j| (j, rng.random_range(-1.0..2.0))).collect();
                let rhs = rng.random_range(0.5..6.0);
                spec.push_constraint(coeffs, Relation::Le, rhs);
            }
            // Box the region so enumeration is finite and the LP bounded.
            for j in 0..n {
                spec.push_constraint(vec![(j, 1.0)], Relation::Le, 10.0);
            }
            let sol = solve_lp(&spec).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}:\n{}", dump_lp(&spec));
            let oracle = enumerate_optimum(&spec);
            assert!(
                (sol.objective_value - oracle).abs() <= 1e-6,
                "trial {trial}: simplex {} vs oracle {}",
                sol.objective_value,
                oracle
            );
            assert!(spec.feasibility_residual(&sol.values) <= 1e-7);
        }
    }

    #[test]
    fn basic_variables_have_zero_reduced_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = 4;
            let mut spec = lp(n);
            spec.objective = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            for _ in 0..3 {
                let coeffs: Vec<(usize, f64)> =
                    (0..n).map(|j| (j, rng.random_range(0.1..2.0))).collect();
                spec.push_constraint(coeffs, Relation::Le, rng.random_range(1.0..5.0));
            }
            let (sol, diag) = solve_lp_with_diagnostics(&spec).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            for &b in &diag.basis {
                if b < n {
                    assert!(diag.reduced_costs[b].abs() <= 1e-7, "reduced cost {}", diag.reduced_costs[b]);
                }
            }
        }
    }

    #[test]
    fn objective_scaling_preserves_argmax_basis() {
        let mut spec = lp(3);
        spec.objective = vec![1.0, 2.0, 0.5];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 5.0);
        spec.push_constraint(vec![(1, 1.0)], Relation::Le, 3.0);
        let (sol_a, diag_a) = solve_lp_with_diagnostics(&spec).unwrap();
        let mut scaled = spec.clone();
        for c in scaled.objective.iter_mut() {
            *c *= 37.5;
        }
        let (sol_b, diag_b) = solve_lp_with_diagnostics(&scaled).unwrap();
        assert_eq!(diag_a.basis, diag_b.basis);
        assert_eq!(sol_a.values, sol_b.values);
    }
}
