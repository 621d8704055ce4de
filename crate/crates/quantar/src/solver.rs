//! Exact minimization of the check-function objective over coefficient
//! vectors: the quantile-regression linear program.
//!
//! The solver walks basic solutions (coefficient vectors interpolating
//! exactly p+1 observations) with Barrodale-Roberts-style multiple-pivot
//! passes: an improving edge direction is followed through every residual
//! sign change it meets until the one-dimensional objective turns upward,
//! so a single iteration can hop many vertices. Ties are broken by original
//! row order (Bland) which makes the returned basic solution deterministic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Endpoint convention: requested tau = 0 or 1 is shifted into the interior
/// by this amount so the extreme-order-statistic fit stays a well-posed LP.
pub const TAU_ENDPOINT_SHIFT: f64 = 1e-6;

/// Relative tolerance of the rank test on the design matrix.
const RANK_TOL: f64 = 1e-10;

/// The check function rho_tau(u) = u * (tau - 1{u < 0}).
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// A quantile-regression problem: design matrix (first column the intercept
/// regressor), response, and an optional restriction set over rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    design: Vec<f64>,
    n: usize,
    m: usize,
    response: Vec<f64>,
    pub row_mask: Option<Vec<bool>>,
}

impl RegressionProblem {
    /// `design` is row-major with `ncols` columns; `response` has one entry
    /// per row. All entries must be finite.
    pub fn new(
        design: Vec<f64>,
        ncols: usize,
        response: Vec<f64>,
        row_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if ncols == 0 || !design.len().is_multiple_of(ncols) {
            return Err(Error::InvalidParameter(format!(
                "design length {} is not a multiple of ncols {ncols}",
                design.len()
            )));
        }
        let n = design.len() / ncols;
        if response.len() != n {
            return Err(Error::InvalidParameter(format!(
                "response length {} does not match {n} design rows",
                response.len()
            )));
        }
        if let Some(mask) = &row_mask {
            if mask.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "row_mask length {} does not match {n} rows",
                    mask.len()
                )));
            }
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in problem".into()));
        }
        Ok(Self { design, n, m: ncols, response, row_mask })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.design[t * self.m..(t + 1) * self.m]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Rows kept by the mask, or all rows when no mask is set.
    fn used_rows(&self) -> Vec<usize> {
        match &self.row_mask {
            Some(mask) => (0..self.n).filter(|&t| mask[t]).collect(),
            None => (0..self.n).collect(),
        }
    }

    /// Rows on which every regressor is nonnegative.
    pub fn nonnegative_rows(&self) -> Vec<bool> {
        (0..self.n)
            .map(|t| self.row(t).iter().all(|&v| v >= 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    /// The optimal face has dimension > 0: some edge direction has zero
    /// reduced cost, so the coefficient vector is not unique (the objective
    /// value still is).
    DegenerateOptimal,
}

/// Result of a quantile regression solve.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    /// Effective quantile used by the LP (endpoint requests are shifted).
    pub tau: f64,
    /// Quantile as requested by the caller (may be 0 or 1).
    pub tau_requested: f64,
    /// Coefficients, intercept first.
    pub theta: Vec<f64>,
    /// Residuals y_t - x_t' theta for every row, masked rows included.
    pub residuals: Vec<f64>,
    /// Optimal objective: sum of rescaled absolute residuals over used rows.
    pub srar: f64,
    /// Number of rows entering the objective.
    pub n_effective: usize,
    pub status: SolverStatus,
    /// Rows interpolated exactly by the returned basic solution; feed back
    /// into [`solve_with_start`] to warm-start a neighbouring quantile.
    pub basis: Vec<usize>,
}

impl QuantileFit {
    /// Residuals of used rows only (in row order).
    pub fn used_residuals<'a>(&'a self, problem: &'a RegressionProblem) -> Vec<f64> {
        match &problem.row_mask {
            Some(mask) => self
                .residuals
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(r, _)| *r)
                .collect(),
            None => self.residuals.clone(),
        }
    }
}

fn effective_tau(tau: f64) -> Result<f64> {
    if !tau.is_finite() || !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau must be in [0,1], got {tau}")));
    }
    if tau == 0.0 {
        Ok(TAU_ENDPOINT_SHIFT)
    } else if tau == 1.0 {
        Ok(1.0 - TAU_ENDPOINT_SHIFT)
    } else {
        Ok(tau)
    }
}

/// Global minimizer of the check-function objective over unmasked rows.
pub fn solve(problem: &RegressionProblem, tau: f64) -> Result<QuantileFit> {
    solve_with_start(problem, tau, None)
}

/// Like [`solve`] but optionally warm-started from a previous basis (e.g. the
/// previous grid point of a SRAR curve). Falls back to a cold start when the
/// proposed basis is unusable.
pub fn solve_with_start(
    problem: &RegressionProblem,
    tau: f64,
    warm: Option<&[usize]>,
) -> Result<QuantileFit> {
    let used = problem.used_rows();
    run_simplex(problem, tau, used, warm)
}

/// Restricted solve: only rows whose regressors are all nonnegative enter
/// the objective (the problem's own mask takes precedence when present).
pub fn solve_restricted(problem: &RegressionProblem, tau: f64) -> Result<QuantileFit> {
    solve_restricted_with_start(problem, tau, None)
}

/// [`solve_restricted`] with an optional warm-start basis.
pub fn solve_restricted_with_start(
    problem: &RegressionProblem,
    tau: f64,
    warm: Option<&[usize]>,
) -> Result<QuantileFit> {
    let used: Vec<usize> = match &problem.row_mask {
        Some(mask) => (0..problem.n).filter(|&t| mask[t]).collect(),
        None => {
            let mask = problem.nonnegative_rows();
            (0..problem.n).filter(|&t| mask[t]).collect()
        }
    };
    run_simplex(problem, tau, used, warm)
}

fn run_simplex(
    problem: &RegressionProblem,
    tau: f64,
    used: Vec<usize>,
    warm: Option<&[usize]>,
) -> Result<QuantileFit> {
    let tau_requested = tau;
    let tau = effective_tau(tau)?;
    let m = problem.m;
    let ne = used.len();
    if ne <= m {
        return Err(Error::InsufficientData { n_effective: ne, needed: m });
    }
    check_rank(problem, &used)?;

    let mut state = Simplex::new(problem, &used, tau);
    let warm_ok = warm.map(|b| state.try_basis(b)).unwrap_or(false);
    if !warm_ok {
        state.cold_start();
    }
    state.iterate()?;
    Ok(state.finish(problem, tau_requested))
}

// Column-pivoted Householder QR rank test; names the dependent columns.
fn check_rank(problem: &RegressionProblem, used: &[usize]) -> Result<()> {
    let m = problem.m;
    let ne = used.len();
    // Column-major working copy of the used rows.
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|j| used.iter().map(|&t| problem.row(t)[j]).collect())
        .collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut max_pivot = 0.0f64;
    let mut rank = m;
    for k in 0..m {
        // Pivot on the column with the largest remaining norm.
        let (best, best_norm) = (k..m)
            .map(|j| (j, cols[j][k..].iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((k, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        cols.swap(k, best);
        perm.swap(k, best);
        max_pivot = max_pivot.max(best_norm);
        if best_norm <= RANK_TOL * max_pivot.max(1e-300) {
            rank = k;
            break;
        }
        // Householder reflector for column k.
        let alpha = -cols[k][k].signum() * best_norm;
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().take(m).skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let scale = 2.0 * dot / vnorm2;
                for (vi, ci) in v.iter().zip(col[k..].iter_mut()) {
                    *ci -= scale * vi;
                }
            }
        }
        cols[k][k] = alpha;
        let _ = ne;
    }
    if rank < m {
        let mut dependent: Vec<usize> = perm[rank..].to_vec();
        dependent.sort_unstable();
        return Err(Error::Degenerate { columns: dependent });
    }
    Ok(())
}

/// Simplex working state over the used rows of one problem.
struct Simplex<'a> {
    problem: &'a RegressionProblem,
    used: &'a [usize],
    tau: f64,
    basis: Vec<usize>, // positions into `used`
    theta: Vec<f64>,
    resid: Vec<f64>, // per used row
    // Side of the kink a zero residual is counted on (+1 / -1). Nonzero
    // residuals overwrite their entry at every refit; zero residuals keep
    // the last assignment, which is what degenerate pivots flip.
    signs: Vec<i8>,
    degenerate: bool,
    // scratch
    lu: Vec<f64>,
    rhs: Vec<f64>,
    piv: Vec<usize>,
    ztol: f64,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a RegressionProblem, used: &'a [usize], tau: f64) -> Self {
        let m = problem.m;
        let scale = used
            .iter()
            .map(|&t| problem.response[t].abs())
            .fold(1.0f64, f64::max);
        Simplex {
            problem,
            used,
            tau,
            basis: Vec::with_capacity(m),
            theta: vec![0.0; m],
            resid: vec![0.0; used.len()],
            signs: vec![1; used.len()],
            degenerate: false,
            lu: vec![0.0; m * m],
            rhs: vec![0.0; m],
            piv: vec![0; m],
            ztol: 1e-11 * scale,
        }
    }

    fn x(&self, e: usize) -> &[f64] {
        self.problem.row(self.used[e])
    }

    /// Accepts a warm-start basis of original row indices if every row is in
    /// the used set and the basis matrix is nonsingular.
    fn try_basis(&mut self, rows: &[usize]) -> bool {
        let m = self.problem.m;
        if rows.len() != m {
            return false;
        }
        let mut positions = Vec::with_capacity(m);
        for &r in rows {
            match self.used.binary_search(&r) {
                Ok(e) => positions.push(e),
                Err(_) => return false,
            }
        }
        self.basis = positions;
        self.refit()
    }

    /// Greedy maximal-volume row selection via modified Gram-Schmidt.
    #[allow(clippy::needless_range_loop)]
    fn cold_start(&mut self) {
        let m = self.problem.m;
        let ne = self.used.len();
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut chosen = vec![false; ne];
        self.basis.clear();
        for _ in 0..m {
            let mut best = usize::MAX;
            let mut best_norm = -1.0;
            for e in 0..ne {
                if chosen[e] {
                    continue;
                }
                let mut v: Vec<f64> = self.x(e).to_vec();
                for qk in &q {
                    let dot: f64 = qk.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (vi, qi) in v.iter_mut().zip(qk) {
                        *vi -= dot * qi;
                    }
                }
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > best_norm {
                    best_norm = norm;
                    best = e;
                }
            }
            chosen[best] = true;
            self.basis.push(best);
            let mut v: Vec<f64> = self.x(best).to_vec();
            for qk in &q {
                let dot: f64 = qk.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= dot * qi;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
            }
            q.push(v);
        }
        self.basis.sort_unstable();
        let ok = self.refit();
        debug_assert!(ok, "cold-start basis must be nonsingular after rank check");
    }

    /// Solves X_B theta = y_B and refreshes all residuals.
    fn refit(&mut self) -> bool {
        let problem = self.problem;
        let used = self.used;
        let m = problem.m;
        for (i, &e) in self.basis.iter().enumerate() {
            let row = problem.row(used[e]);
            self.lu[i * m..(i + 1) * m].copy_from_slice(row);
            self.rhs[i] = problem.response[used[e]];
        }
        if !lu_factor(&mut self.lu, &mut self.piv, m) {
            return false;
        }
        lu_solve(&self.lu, &self.piv, &mut self.rhs, m);
        self.theta.copy_from_slice(&self.rhs);
        for (i, &t) in self.used.iter().enumerate() {
            let row = self.problem.row(t);
            let fit: f64 = row.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
            self.resid[i] = self.problem.response[t] - fit;
            if self.resid[i] > self.ztol {
                self.signs[i] = 1;
            } else if self.resid[i] < -self.ztol {
                self.signs[i] = -1;
            }
        }
        for &e in &self.basis {
            self.resid[e] = 0.0;
        }
        true
    }

    #[allow(clippy::needless_range_loop)]
    fn iterate(&mut self) -> Result<()> {
        let m = self.problem.m;
        let ne = self.used.len();
        let otol = 1e-9 * ne as f64;
        let cap = 200 * ne + 10_000;
        let mut in_basis = vec![false; ne];

        for _ in 0..cap {
            for f in in_basis.iter_mut() {
                *f = false;
            }
            for &e in &self.basis {
                in_basis[e] = true;
            }

            // Dual values s = X_B'^{-1} sum_{t off basis} psi_t x_t.
            let mut v = vec![0.0; m];
            for e in 0..ne {
                if in_basis[e] {
                    continue;
                }
                let psi = self.tau - if self.signs[e] < 0 { 1.0 } else { 0.0 };
                for (vj, xj) in v.iter_mut().zip(self.x(e)) {
                    *vj += psi * xj;
                }
            }
            let problem = self.problem;
            let used = self.used;
            for (i, &e) in self.basis.iter().enumerate() {
                let row = problem.row(used[e]);
                for j in 0..m {
                    // transpose layout
                    self.lu[j * m + i] = row[j];
                }
            }
            if !lu_factor(&mut self.lu, &mut self.piv, m) {
                return Err(Error::Solver("basis became singular".into()));
            }
            lu_solve(&self.lu, &self.piv, &mut v, m);
            let s = v;

            // Bland: smallest original row index with a violated bound.
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_unstable_by_key(|&i| self.basis[i]);
            let mut leave_pos = usize::MAX;
            let mut sigma = 0.0;
            let mut descent = 0.0;
            for &i in &order {
                let d_plus = (1.0 - self.tau) - s[i];
                let d_minus = self.tau + s[i];
                if d_plus < -otol {
                    leave_pos = i;
                    sigma = 1.0;
                    descent = d_plus;
                    break;
                }
                if d_minus < -otol {
                    leave_pos = i;
                    sigma = -1.0;
                    descent = d_minus;
                    break;
                }
            }
            if leave_pos == usize::MAX {
                // Optimal. Flag a positive-dimensional optimal face.
                self.degenerate = (0..m).any(|i| {
                    ((1.0 - self.tau) - s[i]).abs() <= otol || (self.tau + s[i]).abs() <= otol
                });
                return Ok(());
            }

            // Edge direction d with x_j.d = 0 for basic j != leave, = sigma at leave.
            for (i, &e) in self.basis.iter().enumerate() {
                let row = problem.row(used[e]);
                self.lu[i * m..(i + 1) * m].copy_from_slice(row);
                self.rhs[i] = 0.0;
            }
            self.rhs[leave_pos] = sigma;
            if !lu_factor(&mut self.lu, &mut self.piv, m) {
                return Err(Error::Solver("basis became singular".into()));
            }
            let mut dir = vec![0.0; m];
            dir.copy_from_slice(&self.rhs);
            lu_solve(&self.lu, &self.piv, &mut dir, m);

            // Multiple-pivot line search: walk breakpoints until the
            // one-dimensional slope turns nonnegative. Zero residuals kink
            // at step zero when the move pushes them off their counted side.
            let mut hits: Vec<(f64, usize, f64)> = Vec::new();
            for e in 0..ne {
                if in_basis[e] {
                    continue;
                }
                let g: f64 = self.x(e).iter().zip(&dir).map(|(a, b)| a * b).sum();
                if g.abs() <= 1e-13 {
                    continue;
                }
                let r = self.resid[e];
                if r.abs() <= self.ztol {
                    if self.signs[e] > 0 && g > 0.0 {
                        hits.push((0.0, e, g));
                    } else if self.signs[e] < 0 && g < 0.0 {
                        hits.push((0.0, e, -g));
                    }
                } else if r > 0.0 && g > 0.0 {
                    hits.push((r / g, e, g));
                } else if r < 0.0 && g < 0.0 {
                    hits.push((r / g, e, -g));
                }
            }
            hits.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0).unwrap().then(self.used[a.1].cmp(&self.used[b.1]))
            });
            let mut slope = descent;
            let mut enter = usize::MAX;
            let mut step = 0.0;
            let mut visited: Vec<usize> = Vec::new();
            for (eps, e, w) in &hits {
                slope += w;
                if slope >= 0.0 {
                    enter = *e;
                    step = *eps;
                    break;
                }
                visited.push(*e);
            }
            if enter == usize::MAX {
                return Err(Error::Solver("descent direction is unbounded".into()));
            }
            if step <= 0.0 {
                // Degenerate vertex: the objective cannot move, but the
                // subgradient bookkeeping can. Relabel the kink side of the
                // zero rows the walk consumed (or the stopping row itself);
                // each flip strictly shrinks the dual violation.
                if visited.is_empty() {
                    self.signs[enter] = -self.signs[enter];
                } else {
                    for &e in &visited {
                        self.signs[e] = -self.signs[e];
                    }
                }
                continue;
            }
            self.basis[leave_pos] = enter;
            self.basis.sort_unstable();
            if !self.refit() {
                return Err(Error::Solver("basis became singular after pivot".into()));
            }
        }
        Err(Error::Solver(format!("iteration cap {cap} exceeded")))
    }

    fn finish(self, problem: &RegressionProblem, tau_requested: f64) -> QuantileFit {
        let n = problem.n;
        let mut residuals = vec![0.0; n];
        for (t, r) in residuals.iter_mut().enumerate() {
            let fit: f64 = problem.row(t).iter().zip(&self.theta).map(|(a, b)| a * b).sum();
            *r = problem.response[t] - fit;
        }
        // Exact zeros on basis rows by construction.
        for &e in &self.basis {
            residuals[self.used[e]] = 0.0;
        }
        let srar: f64 = self
            .used
            .iter()
            .map(|&t| check_loss(residuals[t], self.tau))
            .sum();
        let status = if self.degenerate {
            SolverStatus::DegenerateOptimal
        } else {
            SolverStatus::Optimal
        };
        QuantileFit {
            tau: self.tau,
            tau_requested,
            theta: self.theta,
            residuals,
            srar,
            n_effective: self.used.len(),
            status,
            basis: self.basis.iter().map(|&e| self.used[e]).collect(),
        }
    }
}

// Dense LU with partial pivoting; returns false on singularity.
fn lu_factor(a: &mut [f64], piv: &mut [usize], m: usize) -> bool {
    for k in 0..m {
        let mut p = k;
        let mut best = a[k * m + k].abs();
        for i in (k + 1)..m {
            let v = a[i * m + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < 1e-300 {
            return false;
        }
        piv[k] = p;
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
            }
        }
        let pivot = a[k * m + k];
        for i in (k + 1)..m {
            let f = a[i * m + k] / pivot;
            a[i * m + k] = f;
            for j in (k + 1)..m {
                a[i * m + j] -= f * a[k * m + j];
            }
        }
    }
    true
}

#[allow(clippy::needless_range_loop)]
fn lu_solve(a: &[f64], piv: &[usize], b: &mut [f64], m: usize) {
    // The factor swaps whole rows (multipliers included), so the right-hand
    // side must see every interchange before the substitution passes.
    for k in 0..m {
        b.swap(k, piv[k]);
    }
    for k in 0..m {
        for i in (k + 1)..m {
            b[i] -= a[i * m + k] * b[k];
        }
    }
    for k in (0..m).rev() {
        b[k] /= a[k * m + k];
        for i in 0..k {
            b[i] -= a[i * m + k] * b[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::srar_reference;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        crate::dist::open01(rng)
    }

    fn intercept_only(y: &[f64]) -> RegressionProblem {
        RegressionProblem::new(vec![1.0; y.len()], 1, y.to_vec(), None).unwrap()
    }

    #[test]
    fn check_loss_basic_values() {
        assert_eq!(check_loss(2.0, 0.5), 1.0);
        assert!((check_loss(-1.0, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(check_loss(0.0, 0.9), 0.0);
    }

    #[test]
    fn median_of_three_points() {
        let fit = solve(&intercept_only(&[1.0, 2.0, 3.0]), 0.5).unwrap();
        assert_eq!(fit.theta[0], 2.0);
        assert!((fit.srar - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_effective, 3);
    }

    #[test]
    fn quartile_matches_grid_search_oracle() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let fit = solve(&intercept_only(&y), 0.25).unwrap();
        // Brute force the 1-D objective on a fine grid.
        let mut best = f64::INFINITY;
        let mut arg = 0.0;
        let mut theta = 0.0;
        while theta <= 11.0 {
            let obj: f64 = y.iter().map(|&v| check_loss(v - theta, 0.25)).sum();
            if obj < best {
                best = obj;
                arg = theta;
            }
            theta += 1e-3;
        }
        assert!((fit.srar - best).abs() < 1e-6, "solver {} vs grid {best} at {arg}", fit.srar);
        // n*tau integer here, so the optimum is a whole face: [1, 2].
        assert!(fit.theta[0] >= 1.0 - 1e-9 && fit.theta[0] <= 2.0 + 1e-9);
        assert_eq!(fit.status, SolverStatus::DegenerateOptimal);
    }

    #[test]
    fn endpoint_taus_give_extreme_order_statistics() {
        let y = [3.0, 1.0, 2.0];
        let low = solve(&intercept_only(&y), 0.0).unwrap();
        assert_eq!(low.tau_requested, 0.0);
        assert_eq!(low.tau, TAU_ENDPOINT_SHIFT);
        assert!((low.theta[0] - 1.0).abs() < 1e-9);
        let high = solve(&intercept_only(&y), 1.0).unwrap();
        assert!((high.theta[0] - 3.0).abs() < 1e-9);
        assert!(solve(&intercept_only(&y), -0.1).is_err());
        assert!(solve(&intercept_only(&y), 1.1).is_err());
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> RegressionProblem {
        let m = p + 1;
        let mut design = Vec::with_capacity(n * m);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            design.push(1.0);
            for _ in 0..p {
                design.push(4.0 * uniform(rng) - 2.0);
            }
            y.push(10.0 * uniform(rng) - 5.0);
        }
        RegressionProblem::new(design, m, y, None).unwrap()
    }

    #[test]
    fn objective_matches_dense_lp_oracle_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for case in 0..40 {
            let n = 10 + (rng.next_u64() % 21) as usize;
            let p = 1 + (rng.next_u64() % 2) as usize;
            let problem = random_problem(&mut rng, n, p);
            for k in 1..=9 {
                let tau = k as f64 / 10.0;
                let fit = solve(&problem, tau).unwrap();
                let rows: Vec<Vec<f64>> = (0..n).map(|t| problem.row(t).to_vec()).collect();
                let oracle = srar_reference(&rows, problem.response(), tau);
                let rel = (fit.srar - oracle).abs() / oracle.abs().max(1.0);
                assert!(
                    rel < 1e-8,
                    "case {case} tau {tau}: solver {} vs oracle {oracle}",
                    fit.srar
                );
            }
        }
    }

    #[test]
    fn optimality_band_and_zero_residual_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let n = 20 + (rng.next_u64() % 30) as usize;
            let p = 1 + (rng.next_u64() % 3) as usize;
            let problem = random_problem(&mut rng, n, p);
            for k in [1, 3, 5, 7, 9] {
                let tau = k as f64 / 10.0;
                let fit = solve(&problem, tau).unwrap();
                let m = (p + 1) as f64;
                let neg = fit.residuals.iter().filter(|&&r| r < -1e-9).count() as f64;
                let pos = fit.residuals.iter().filter(|&&r| r > 1e-9).count() as f64;
                let nf = n as f64;
                assert!(
                    neg >= nf * tau - m - 1e-9 && neg <= nf * tau + m + 1e-9,
                    "negative count {neg} outside band for n={n} tau={tau} p={p}"
                );
                assert!(
                    pos >= nf * (1.0 - tau) - m - 1e-9 && pos <= nf * (1.0 - tau) + m + 1e-9,
                    "positive count {pos} outside band"
                );
                let zeros = fit.residuals.iter().filter(|&&r| r.abs() <= 1e-9).count();
                assert!(zeros > p, "only {zeros} zero residuals");
            }
        }
    }

    #[test]
    fn objective_invariant_under_row_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let problem = random_problem(&mut rng, 25, 2);
        let fit = solve(&problem, 0.3).unwrap();
        // Reverse the row order.
        let n = problem.nrows();
        let mut design = Vec::new();
        let mut y = Vec::new();
        for t in (0..n).rev() {
            design.extend_from_slice(problem.row(t));
            y.push(problem.response()[t]);
        }
        let reversed = RegressionProblem::new(design, 3, y, None).unwrap();
        let fit_rev = solve(&reversed, 0.3).unwrap();
        assert!((fit.srar - fit_rev.srar).abs() < 1e-9 * fit.srar.max(1.0));
    }

    #[test]
    fn intercept_only_equals_sample_quantile_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..41).map(|_| 10.0 * uniform(&mut rng)).collect();
        for k in 1..10 {
            let tau = k as f64 / 10.0;
            let fit = solve(&intercept_only(&y), tau).unwrap();
            // theta is a sample quantile: some order statistic bracketing n*tau.
            let mut sorted = y.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let closed: f64 = y.iter().map(|&v| check_loss(v - fit.theta[0], tau)).sum();
            assert!((closed - fit.srar).abs() < 1e-10);
            assert!(sorted.contains(&fit.theta[0]));
        }
    }

    #[test]
    fn rank_deficient_design_names_dependent_columns() {
        // Third column is twice the second.
        let mut design = Vec::new();
        let mut y = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..12 {
            let v = uniform(&mut rng);
            design.extend_from_slice(&[1.0, v, 2.0 * v]);
            y.push(uniform(&mut rng));
        }
        let problem = RegressionProblem::new(design, 3, y, None).unwrap();
        match solve(&problem, 0.5) {
            Err(Error::Degenerate { columns }) => {
                assert_eq!(columns.len(), 1);
                assert!(columns[0] == 1 || columns[0] == 2);
            }
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn restricted_solve_masks_negative_rows() {
        // One row carries a negative regressor; the rest are nonnegative.
        let design = vec![
            1.0, 0.5, //
            1.0, 1.5, //
            1.0, -0.7, //
            1.0, 2.5, //
            1.0, 0.1, //
            1.0, 1.1,
        ];
        let y = vec![0.4, 1.8, -0.2, 2.9, 0.3, 1.2];
        let problem = RegressionProblem::new(design.clone(), 2, y.clone(), None).unwrap();
        let fit = solve_restricted(&problem, 0.5).unwrap();
        assert_eq!(fit.n_effective, 5);
        // SRAR excludes the masked row: recompute by hand.
        let manual: f64 = (0..6)
            .filter(|&t| t != 2)
            .map(|t| check_loss(fit.residuals[t], 0.5))
            .sum();
        assert!((fit.srar - manual).abs() < 1e-12);

        // All-nonnegative design: restricted == unrestricted.
        let design2 = vec![1.0, 0.5, 1.0, 1.5, 1.0, 0.7, 1.0, 2.5, 1.0, 0.1, 1.0, 1.1];
        let p2 = RegressionProblem::new(design2, 2, y, None).unwrap();
        let a = solve(&p2, 0.3).unwrap();
        let b = solve_restricted(&p2, 0.3).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.srar, b.srar);
    }

    #[test]
    fn restricted_solve_requires_enough_rows() {
        let design = vec![1.0, -1.0, 1.0, -2.0, 1.0, -3.0, 1.0, 0.5];
        let y = vec![0.0, 1.0, 2.0, 3.0];
        let problem = RegressionProblem::new(design, 2, y, None).unwrap();
        match solve_restricted(&problem, 0.5) {
            Err(Error::InsufficientData { n_effective, .. }) => assert_eq!(n_effective, 1),
            other => panic!("expected insufficient data, got {other:?}"),
        }
    }

    #[test]
    fn restricted_fits_on_two_regime_series_match_lp_oracle() {
        // Two-regime noncausal series: QNCAR and RQNCAR objectives both
        // verified against the dense reference LP on their own row sets.
        use crate::models::{build_design, Direction, ModelSpec};
        use crate::simulate::{simulate_two_regime, RegimeSpec, SimConfig};
        let regime = RegimeSpec {
            tau_star: 0.7,
            beta1: 0.2,
            beta2: 0.8,
            innovation_quantile: crate::dist::DistributionSpec::student_t(3.0),
        };
        let cfg = SimConfig::with_retained(
            600,
            17,
            crate::dist::DistributionSpec::uniform01(),
        );
        let series = simulate_two_regime(&regime, &cfg).unwrap();
        for restricted in [false, true] {
            let model = ModelSpec::new(Direction::Noncausal, 1, restricted).unwrap();
            let problem = build_design(&series, &model).unwrap();
            for tau in [0.2, 0.5, 0.8] {
                let fit = if restricted {
                    solve_restricted(&problem, tau).unwrap()
                } else {
                    solve(&problem, tau).unwrap()
                };
                let keep = |t: usize| match &problem.row_mask {
                    Some(mask) => mask[t],
                    None => true,
                };
                let rows: Vec<Vec<f64>> = (0..problem.nrows())
                    .filter(|&t| keep(t))
                    .map(|t| problem.row(t).to_vec())
                    .collect();
                let y: Vec<f64> = (0..problem.nrows())
                    .filter(|&t| keep(t))
                    .map(|t| problem.response()[t])
                    .collect();
                assert_eq!(fit.n_effective, rows.len());
                let reference = srar_reference(&rows, &y, tau);
                let rel = (fit.srar - reference).abs() / reference.max(1.0);
                assert!(
                    rel < 1e-8,
                    "restricted={restricted} tau={tau}: {} vs oracle {reference}",
                    fit.srar
                );
            }
        }
    }

    #[test]
    fn warm_start_reaches_the_same_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let problem = random_problem(&mut rng, 60, 2);
        let mut basis: Option<Vec<usize>> = None;
        for k in 1..=19 {
            let tau = k as f64 * 0.05;
            let warm = solve_with_start(&problem, tau, basis.as_deref()).unwrap();
            let cold = solve(&problem, tau).unwrap();
            assert!(
                (warm.srar - cold.srar).abs() < 1e-9 * cold.srar.max(1.0),
                "tau {tau}: warm {} cold {}",
                warm.srar,
                cold.srar
            );
            basis = Some(warm.basis.clone());
        }
    }

    #[test]
    fn minimality_against_perturbed_competitors() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let problem = random_problem(&mut rng, 35, 2);
        let fit = solve(&problem, 0.7).unwrap();
        for scale in [1e-4, 1e-2, 0.1, 1.0] {
            for _ in 0..20 {
                let theta: Vec<f64> = fit
                    .theta
                    .iter()
                    .map(|v| v + scale * (2.0 * uniform(&mut rng) - 1.0))
                    .collect();
                let obj: f64 = (0..problem.nrows())
                    .map(|t| {
                        let fitted: f64 =
                            problem.row(t).iter().zip(&theta).map(|(a, b)| a * b).sum();
                        check_loss(problem.response()[t] - fitted, 0.7)
                    })
                    .sum();
                assert!(obj >= fit.srar - 1e-9, "competitor beat optimum: {obj} < {}", fit.srar);
            }
        }
    }
}
