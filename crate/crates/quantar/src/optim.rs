//! Derivative-free minimization (Nelder-Mead simplex with restarts).

/// Outcome of a Nelder-Mead run.
pub(crate) struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`, spending at most `budget` evaluations in total.
/// Runs the classic simplex to tolerance, then restarts around the incumbent
/// with a shrunken initial step until the budget runs out or a restart stops
/// improving.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    initial_step: f64,
    budget: usize,
    tol: f64,
) -> NmOutcome {
    let mut evals = 0usize;
    let mut best = x0.to_vec();
    let mut best_val = f(&best);
    evals += 1;
    let mut step = initial_step;
    let mut converged = false;

    for _ in 0..20 {
        let (x, val, used, ok) =
            nm_single(&mut f, &best, step, budget.saturating_sub(evals), tol);
        evals += used;
        let improved = val < best_val - tol * (best_val.abs() + 1.0);
        if val < best_val {
            best = x;
            best_val = val;
        }
        converged = ok;
        if evals >= budget || (ok && !improved) {
            break;
        }
        step *= 0.3;
    }
    NmOutcome { x: best, value: best_val, evaluations: evals, converged }
}

fn nm_single<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: f64,
    budget: usize,
    tol: f64,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };

    // Initial simplex: x0 plus a step along each coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1.0 { step * x[i].abs() } else { step };
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[n].1 - simplex[0].1;
        if spread <= tol * (simplex[0].1.abs() + 1.0) {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, evals, true);
        }
        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for (x, _) in simplex.iter().take(n) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = eval(&reflect, &mut evals);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = if fr < worst.1 {
                centroid.iter().zip(&reflect).map(|(c, r)| c + 0.5 * (r - c)).collect()
            } else {
                centroid.iter().zip(&worst.0).map(|(c, w)| c + 0.5 * (w - c)).collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[n] = (contract, fc);
            } else {
                // Shrink toward the best point.
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, ai) in entry.0.iter_mut().zip(&anchor) {
                        *xi = ai + 0.5 * (*xi - ai);
                    }
                    entry.1 = eval(&entry.0.clone(), &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals, false)
}
