//! Dense reference LP for cross-checking the quantile simplex.
//!
//! Solves the split-variable formulation
//! `min tau 1'u+ + (1-tau) 1'u-  s.t.  X(b+ - b-) + u+ - u- = y,  all vars >= 0`
//! with a plain full-tableau primal simplex under Bland's rule, starting from
//! the natural residual basis. Deliberately shares no code with
//! [`crate::solver`]; it exists only as an independent oracle for tests.

/// Optimal objective of the quantile LP on rows `x` and response `y`.
pub fn srar_reference(x: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(tau > 0.0 && tau < 1.0);
    let n = y.len();
    let m = x[0].len();
    let nv = 2 * m + 2 * n;
    let width = nv + 1;
    let mut tab = vec![0.0f64; (n + 1) * width];
    let mut basis = vec![0usize; n];

    // Constraint rows, sign-fixed so the starting u basis is the identity.
    for t in 0..n {
        let sign = if y[t] >= 0.0 { 1.0 } else { -1.0 };
        let row = &mut tab[t * width..(t + 1) * width];
        for j in 0..m {
            row[j] = sign * x[t][j];
            row[m + j] = -sign * x[t][j];
        }
        row[2 * m + t] = sign;
        row[2 * m + n + t] = -sign;
        row[nv] = sign * y[t];
        basis[t] = if sign > 0.0 { 2 * m + t } else { 2 * m + n + t };
    }

    let cost = |j: usize| -> f64 {
        if j < 2 * m {
            0.0
        } else if j < 2 * m + n {
            tau
        } else {
            1.0 - tau
        }
    };

    // Reduced-cost row: r_j = c_j - sum_i c_B(i) T[i][j]; rhs = -objective.
    for j in 0..width {
        let mut v = if j < nv { cost(j) } else { 0.0 };
        for t in 0..n {
            v -= cost(basis[t]) * tab[t * width + j];
        }
        tab[n * width + j] = v;
    }

    let tol = 1e-11;
    for _ in 0..200_000 {
        // Bland: first improving column.
        let mut enter = usize::MAX;
        for j in 0..nv {
            if tab[n * width + j] < -tol {
                enter = j;
                break;
            }
        }
        if enter == usize::MAX {
            break;
        }
        // Ratio test; ties resolved by smallest basic variable index.
        let mut leave = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let a = tab[t * width + enter];
            if a > tol {
                let ratio = tab[t * width + nv] / a;
                if ratio < best - tol
                    || (ratio < best + tol && (leave == usize::MAX || basis[t] < basis[leave]))
                {
                    best = ratio;
                    leave = t;
                }
            }
        }
        assert!(leave != usize::MAX, "reference LP unbounded");
        // Gauss-Jordan pivot.
        let pivot = tab[leave * width + enter];
        for j in 0..width {
            tab[leave * width + j] /= pivot;
        }
        for r in 0..=n {
            if r == leave {
                continue;
            }
            let f = tab[r * width + enter];
            if f != 0.0 {
                for j in 0..width {
                    tab[r * width + j] -= f * tab[leave * width + j];
                }
            }
        }
        basis[leave] = enter;
    }
    -tab[n * width + nv]
}
