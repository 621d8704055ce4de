//! SRAR curves over quantile grids, the aggregate-SRAR selection criterion,
//! and curve shape diagnostics.
//!
//! The SRAR of a fitted quantile regression is its optimal objective value:
//! a goodness-of-fit measure per quantile. Curves of a true and a
//! misspecified time direction can cross, so selection at a single quantile
//! is unreliable; aggregating the curve over the grid (its mean, or the
//! normalized trapezoid integral) gives the direction decision used
//! throughout.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::models::{self, Direction, ModelSpec};
use crate::solver::QuantileFit;
use serde::{Deserialize, Serialize};

/// Standard quantile grid 0.05, 0.10, ..., 0.95.
pub fn default_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// Default grid with the endpoint rows 0 and 1 appended on each side; the
/// endpoints are fitted under the solver's epsilon-shift convention and are
/// excluded from aggregates by default.
pub fn grid_with_endpoints() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(default_grid());
    g.push(1.0);
    g
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("quantile grid must be nonempty".into()));
    }
    for pair in grid.windows(2) {
        // NaN entries must fail this check as well.
        if pair[0].partial_cmp(&pair[1]) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Domain("quantile grid must be strictly increasing".into()));
        }
    }
    if grid[0] < 0.0 || *grid.last().unwrap() > 1.0 {
        return Err(Error::Domain("quantile grid must lie within [0, 1]".into()));
    }
    Ok(())
}

/// SRAR values of one model over a quantile grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrarCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub model: ModelSpec,
    pub n_effective: usize,
}

/// Fits the model at every grid quantile. Fits are warm-started from the
/// previous grid point; each solve still terminates at a verified optimum,
/// so values match cold-started fits to solver tolerance.
pub fn srar_curve(series: &[f64], model: &ModelSpec, grid: &[f64]) -> Result<SrarCurve> {
    check_grid(grid)?;
    let fp = models::fit_problem(series, model)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut n_effective = 0;
    let mut warm: Option<Vec<usize>> = None;
    for &tau in grid {
        let fit = models::solve_fit_problem(&fp, tau, warm.as_deref())?;
        values.push(fit.srar);
        n_effective = fit.n_effective;
        warm = Some(fit.basis);
    }
    Ok(SrarCurve { taus: grid.to_vec(), values, model: *model, n_effective })
}

/// Full per-quantile fits rather than just objective values.
pub fn srar_fits(series: &[f64], model: &ModelSpec, grid: &[f64]) -> Result<Vec<QuantileFit>> {
    check_grid(grid)?;
    let fp = models::fit_problem(series, model)?;
    let mut fits = Vec::with_capacity(grid.len());
    let mut warm: Option<Vec<usize>> = None;
    for &tau in grid {
        let fit = models::solve_fit_problem(&fp, tau, warm.as_deref())?;
        warm = Some(fit.basis.clone());
        fits.push(if fp.reversed {
            models::unreverse_fit(fit, fp.problem.nrows())
        } else {
            fit
        });
    }
    Ok(fits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMethod {
    GridMean,
    Trapezoid,
}

/// Collapses a curve to its aggregate: unweighted grid mean, or the
/// composite trapezoid integral normalized by the grid span.
pub fn aggregate_srar(curve: &SrarCurve, method: AggregateMethod) -> f64 {
    let n = curve.values.len();
    match method {
        AggregateMethod::GridMean => curve.values.iter().sum::<f64>() / n as f64,
        AggregateMethod::Trapezoid => {
            let span = curve.taus[n - 1] - curve.taus[0];
            if span <= 0.0 {
                return curve.values[0];
            }
            let mut integral = 0.0;
            for i in 0..n - 1 {
                integral += 0.5
                    * (curve.taus[i + 1] - curve.taus[i])
                    * (curve.values[i] + curve.values[i + 1]);
            }
            integral / span
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Causal,
    Noncausal,
    Tie,
}

/// Relative tie threshold on SRAR comparisons (below LP solver tolerance).
pub const TIE_THRESHOLD: f64 = 1e-12;

fn compare(causal: f64, noncausal: f64) -> Winner {
    if (causal - noncausal).abs() < TIE_THRESHOLD * causal.abs().max(noncausal.abs()) {
        Winner::Tie
    } else if causal < noncausal {
        Winner::Causal
    } else {
        Winner::Noncausal
    }
}

/// Per-quantile winners and aggregate decision for one causal/noncausal pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionBlock {
    pub per_tau_winner: Vec<Winner>,
    pub aggregate_causal: f64,
    pub aggregate_noncausal: f64,
    pub aggregate_winner: Winner,
}

impl SelectionBlock {
    fn from_curves(causal: &SrarCurve, noncausal: &SrarCurve, method: AggregateMethod) -> Self {
        let per_tau_winner = causal
            .values
            .iter()
            .zip(&noncausal.values)
            .map(|(c, n)| compare(*c, *n))
            .collect();
        let aggregate_causal = aggregate_srar(causal, method);
        let aggregate_noncausal = aggregate_srar(noncausal, method);
        SelectionBlock {
            per_tau_winner,
            aggregate_causal,
            aggregate_noncausal,
            aggregate_winner: compare(aggregate_causal, aggregate_noncausal),
        }
    }
}

/// Causal-versus-noncausal selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub grid: Vec<f64>,
    pub per_tau_winner: Vec<Winner>,
    pub aggregate_causal: f64,
    pub aggregate_noncausal: f64,
    pub aggregate_winner: Winner,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restricted_variant: Option<SelectionBlock>,
}

/// All curves behind a [`SelectionReport`], for plotting or CSV emission.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCurves {
    pub causal: SrarCurve,
    pub noncausal: SrarCurve,
    pub restricted_causal: Option<SrarCurve>,
    pub restricted_noncausal: Option<SrarCurve>,
}

/// Fits QCAR(p) and QNCAR(p) over the grid and reports per-quantile and
/// aggregate winners; optionally repeats with the nonnegative-regressor
/// restriction (each restricted fit on its own effective sample).
pub fn select_model(
    series: &[f64],
    p: usize,
    grid: &[f64],
    include_restricted: bool,
) -> Result<SelectionReport> {
    Ok(select_model_detailed(series, p, grid, include_restricted)?.0)
}

/// [`select_model`] returning the underlying curves as well.
pub fn select_model_detailed(
    series: &[f64],
    p: usize,
    grid: &[f64],
    include_restricted: bool,
) -> Result<(SelectionReport, SelectionCurves)> {
    let causal = srar_curve(series, &ModelSpec::new(Direction::Causal, p, false)?, grid)?;
    let noncausal = srar_curve(series, &ModelSpec::new(Direction::Noncausal, p, false)?, grid)?;
    let main = SelectionBlock::from_curves(&causal, &noncausal, AggregateMethod::GridMean);
    let mut curves = SelectionCurves {
        causal,
        noncausal,
        restricted_causal: None,
        restricted_noncausal: None,
    };
    let restricted_variant = if include_restricted {
        let rc = srar_curve(series, &ModelSpec::new(Direction::Causal, p, true)?, grid)?;
        let rn = srar_curve(series, &ModelSpec::new(Direction::Noncausal, p, true)?, grid)?;
        let block = SelectionBlock::from_curves(&rc, &rn, AggregateMethod::GridMean);
        curves.restricted_causal = Some(rc);
        curves.restricted_noncausal = Some(rn);
        Some(block)
    } else {
        None
    };
    let report = SelectionReport {
        grid: grid.to_vec(),
        per_tau_winner: main.per_tau_winner,
        aggregate_causal: main.aggregate_causal,
        aggregate_noncausal: main.aggregate_noncausal,
        aggregate_winner: main.aggregate_winner,
        restricted_variant,
    };
    Ok((report, curves))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewVerdict {
    LeftSkewed,
    RightSkewed,
    Symmetric,
}

/// Shape summary of a SRAR curve: arch peak, concavity probe, and the
/// innovation-skewness verdict implied by the peak location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDiagnostics {
    /// Grid point with the largest SRAR (first one on ties).
    pub peak_tau: f64,
    /// Second differences at interior grid points; an arch-shaped curve has
    /// these negative.
    pub second_differences: Vec<f64>,
    pub skewness: SkewVerdict,
    /// Echo of the residual mean supplied by the caller, when defined.
    pub residual_mean: Option<f64>,
}

/// Computes peak location, interior second differences, and the skewness
/// verdict (peak left of 0.5 means left-skewed innovations, right of 0.5
/// right-skewed).
pub fn shape_diagnostics(
    curve: &SrarCurve,
    residual_mean: Option<f64>,
) -> Result<ShapeDiagnostics> {
    let n = curve.values.len();
    if n < 5 {
        return Err(Error::Domain(format!("shape diagnostics need >= 5 grid points, got {n}")));
    }
    let mut peak = 0;
    for i in 1..n {
        if curve.values[i] > curve.values[peak] {
            peak = i;
        }
    }
    let peak_tau = curve.taus[peak];
    let second_differences: Vec<f64> = (1..n - 1)
        .map(|i| curve.values[i + 1] - 2.0 * curve.values[i] + curve.values[i - 1])
        .collect();
    let step = (curve.taus[n - 1] - curve.taus[0]) / (n - 1) as f64;
    let skewness = if (peak_tau - 0.5).abs() <= 0.5 * step {
        SkewVerdict::Symmetric
    } else if peak_tau < 0.5 {
        SkewVerdict::LeftSkewed
    } else {
        SkewVerdict::RightSkewed
    };
    Ok(ShapeDiagnostics { peak_tau, second_differences, skewness, residual_mean })
}

/// Expected SRAR slope T (E[eps] - F^-1(tau)) of the intrinsic curve.
pub fn theoretical_slope(dist: &DistributionSpec, tau: f64, t_len: usize) -> Result<f64> {
    let mean = dist.mean().ok_or_else(|| {
        Error::UndefinedMoment(
            "innovation mean does not exist; supply an empirical mean instead".into(),
        )
    })?;
    theoretical_slope_with_mean(mean, dist, tau, t_len)
}

/// Slope with the mean supplied by the caller (e.g. a sample mean when the
/// law has no first moment).
pub fn theoretical_slope_with_mean(
    mean: f64,
    dist: &DistributionSpec,
    tau: f64,
    t_len: usize,
) -> Result<f64> {
    Ok(t_len as f64 * (mean - dist.quantile(tau)?))
}

/// Expected SRAR concavity -2 T dF^-1/dtau by central difference.
pub fn theoretical_concavity(dist: &DistributionSpec, tau: f64, t_len: usize) -> Result<f64> {
    let h = 1e-5;
    if tau <= h || tau >= 1.0 - h {
        return Err(Error::Domain(format!("tau {tau} too close to 0/1 for the central step")));
    }
    let d = (dist.quantile(tau + h)? - dist.quantile(tau - h)?) / (2.0 * h);
    Ok(-2.0 * t_len as f64 * d)
}
