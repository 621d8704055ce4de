//! Seeded, replicate-parallel Monte Carlo experiments: correct-selection
//! frequency tables and binding-function grids.
//!
//! Replicate seeds are derived from the base seed by index (base ^ i), never
//! from worker-local streams, so results are invariant to the worker count;
//! per-replicate outcomes are collected in replicate order and reduced
//! sequentially, which makes whole tables reproducible bit for bit.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::models::{self, Direction, ModelSpec};
use crate::simulate::{simulate_mar_recursive, simulate_two_regime, MarSpec, RegimeSpec, SimConfig};
use crate::srar::{self, Winner};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Data-generating process for an experiment: a purely causal or purely
/// noncausal MAR, or the two-regime random-coefficient generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    Mar { spec: MarSpec, innovation: DistributionSpec },
    TwoRegime { regime: RegimeSpec },
}

impl Dgp {
    /// Direction counted as "correct" in selection experiments. The
    /// two-regime generator runs backward in time, so noncausal is correct.
    pub fn true_direction(&self) -> Result<Direction> {
        match self {
            Dgp::Mar { spec, .. } => {
                if spec.r() > 0 && spec.s() > 0 {
                    Err(Error::InvalidParameter(
                        "selection experiments need a purely causal or noncausal DGP".into(),
                    ))
                } else if spec.s() > 0 {
                    Ok(Direction::Noncausal)
                } else {
                    Ok(Direction::Causal)
                }
            }
            Dgp::TwoRegime { .. } => Ok(Direction::Noncausal),
        }
    }

    /// One sample path of retained length `t_len` under the default burn-in.
    pub fn simulate(&self, t_len: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            Dgp::Mar { spec, innovation } => {
                let cfg = SimConfig::with_retained(t_len, seed, *innovation);
                simulate_mar_recursive(spec, &cfg)
            }
            Dgp::TwoRegime { regime } => {
                let cfg =
                    SimConfig::with_retained(t_len, seed, DistributionSpec::uniform01());
                simulate_two_regime(regime, &cfg)
            }
        }
    }
}

/// Selection-frequency experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_reps: usize,
    /// Retained sample length per replicate.
    pub sample_length: usize,
    pub dgp: Dgp,
    /// AR order used for both directions' fits.
    pub p_fit: usize,
    /// Interior quantile grid (also the aggregate's support).
    pub grid: Vec<f64>,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    #[serde(default)]
    pub parallelism: usize,
    /// Judge with restricted fits instead of unrestricted ones.
    #[serde(default)]
    pub restricted: bool,
    /// Also evaluate the endpoint rows tau = 0 and tau = 1 (epsilon-shift
    /// convention); they never enter the aggregate.
    #[serde(default)]
    pub include_endpoints: bool,
}

/// Correct-selection frequencies per quantile plus the aggregate-SRAR row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// Quantiles evaluated, including endpoint rows when requested.
    pub taus: Vec<f64>,
    pub per_tau_frequency: Vec<f64>,
    /// Binomial Monte Carlo standard error per cell.
    pub per_tau_stderr: Vec<f64>,
    pub aggregate_frequency: f64,
    pub aggregate_stderr: f64,
    pub n_reps: usize,
    /// Replicates skipped because a fit failed (must stay under 1%).
    pub failed: usize,
    pub config: McConfig,
}

const FAILURE_BUDGET: f64 = 0.01;

struct ReplicateOutcome {
    per_tau_correct: Vec<bool>,
    aggregate_correct: bool,
}

/// Runs the selection experiment: per replicate, simulate, fit both
/// directions across the grid, and judge winners against the DGP's true
/// direction. Deterministic given the config.
pub fn run_selection_frequencies(cfg: &McConfig) -> Result<FrequencyTable> {
    if cfg.n_reps < 1 {
        return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
    }
    let truth = cfg.dgp.true_direction()?;
    let mut taus = cfg.grid.clone();
    if cfg.include_endpoints {
        if taus.first() != Some(&0.0) {
            taus.insert(0, 0.0);
        }
        if taus.last() != Some(&1.0) {
            taus.push(1.0);
        }
    }
    let interior: Vec<usize> = taus
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0 && t < 1.0)
        .map(|(i, _)| i)
        .collect();

    let run = || -> Vec<std::result::Result<ReplicateOutcome, Error>> {
        (0..cfg.n_reps as u64)
            .into_par_iter()
            .map(|rep| replicate(cfg, &taus, &interior, truth, cfg.seed ^ rep))
            .collect()
    };
    let outcomes = match cfg.parallelism {
        0 => run(),
        workers => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(run),
    };

    let mut per_tau_correct = vec![0usize; taus.len()];
    let mut aggregate_correct = 0usize;
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                for (count, ok) in per_tau_correct.iter_mut().zip(&o.per_tau_correct) {
                    *count += *ok as usize;
                }
                aggregate_correct += o.aggregate_correct as usize;
            }
            Err(_) => failed += 1,
        }
    }
    if (failed as f64) > FAILURE_BUDGET * cfg.n_reps as f64 {
        return Err(Error::FailureBudget { failed, total: cfg.n_reps });
    }
    let denom = (cfg.n_reps - failed) as f64;
    let freq = |count: usize| count as f64 / denom;
    let stderr = |f: f64| (f * (1.0 - f) / denom).sqrt();
    let per_tau_frequency: Vec<f64> = per_tau_correct.iter().map(|&c| freq(c)).collect();
    let per_tau_stderr: Vec<f64> = per_tau_frequency.iter().map(|&f| stderr(f)).collect();
    let aggregate_frequency = freq(aggregate_correct);
    Ok(FrequencyTable {
        taus,
        per_tau_frequency,
        per_tau_stderr,
        aggregate_frequency,
        aggregate_stderr: stderr(aggregate_frequency),
        n_reps: cfg.n_reps,
        failed,
        config: cfg.clone(),
    })
}

fn replicate(
    cfg: &McConfig,
    taus: &[f64],
    interior: &[usize],
    truth: Direction,
    seed: u64,
) -> std::result::Result<ReplicateOutcome, Error> {
    let series = cfg.dgp.simulate(cfg.sample_length, seed)?;
    let causal = direction_values(&series, Direction::Causal, cfg, taus)?;
    let noncausal = direction_values(&series, Direction::Noncausal, cfg, taus)?;
    let per_tau_correct: Vec<bool> = causal
        .iter()
        .zip(&noncausal)
        .map(|(c, n)| winner_of(*c, *n) == direction_winner(truth))
        .collect();
    let mean = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
    let aggregate_correct =
        winner_of(mean(interior, &causal), mean(interior, &noncausal)) == direction_winner(truth);
    Ok(ReplicateOutcome { per_tau_correct, aggregate_correct })
}

fn direction_values(
    series: &[f64],
    direction: Direction,
    cfg: &McConfig,
    taus: &[f64],
) -> std::result::Result<Vec<f64>, Error> {
    let model = ModelSpec::new(direction, cfg.p_fit, cfg.restricted)?;
    let fp = models::fit_problem(series, &model)?;
    let mut values = Vec::with_capacity(taus.len());
    let mut warm: Option<Vec<usize>> = None;
    for &tau in taus {
        let fit = models::solve_fit_problem(&fp, tau, warm.as_deref())?;
        values.push(fit.srar);
        warm = Some(fit.basis);
    }
    Ok(values)
}

fn winner_of(causal: f64, noncausal: f64) -> Winner {
    if (causal - noncausal).abs() < srar::TIE_THRESHOLD * causal.abs().max(noncausal.abs()) {
        Winner::Tie
    } else if causal < noncausal {
        Winner::Causal
    } else {
        Winner::Noncausal
    }
}

fn direction_winner(d: Direction) -> Winner {
    match d {
        Direction::Causal => Winner::Causal,
        Direction::Noncausal => Winner::Noncausal,
    }
}

/// Binding-function experiment configuration: misspecified QCAR(1) fits on a
/// noncausal AR(1) across a grid of true lead coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingConfig {
    pub tau: f64,
    /// True lead coefficients, each strictly inside (-1, 1).
    pub coefficients: Vec<f64>,
    pub innovation: DistributionSpec,
    pub n_reps: usize,
    pub sample_length: usize,
    pub seed: u64,
    #[serde(default)]
    pub parallelism: usize,
    /// Cells whose replicate standard deviation exceeds this are flagged
    /// non-convergent instead of being silently averaged.
    pub dispersion_flag: f64,
}

impl BindingConfig {
    /// Common defaults: 1000 replicates of 600 observations, flag at unit
    /// dispersion (coefficients live inside the unit interval).
    pub fn new(tau: f64, coefficients: Vec<f64>, innovation: DistributionSpec, seed: u64) -> Self {
        Self {
            tau,
            coefficients,
            innovation,
            n_reps: 1000,
            sample_length: 600,
            seed,
            parallelism: 0,
            dispersion_flag: 1.0,
        }
    }
}

/// One grid cell of a binding-function run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingCell {
    pub coefficient: f64,
    pub mean_estimate: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub non_convergent: bool,
    pub failed: usize,
}

/// Mean misspecified-fit estimates over the coefficient grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingGrid {
    pub cells: Vec<BindingCell>,
    pub config: BindingConfig,
}

// splitmix64; decorrelates per-cell seed streams.
fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the binding-function experiment: for each true coefficient, simulate
/// the noncausal AR(1), fit the misspecified causal QCAR(1) at `tau`, and
/// average the lag-coefficient estimate over replicates.
pub fn run_binding_function(cfg: &BindingConfig) -> Result<BindingGrid> {
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(Error::Domain(format!("tau must be in (0,1), got {}", cfg.tau)));
    }
    if cfg.coefficients.iter().any(|c| c.abs() >= 1.0) {
        return Err(Error::InvalidParameter(
            "binding coefficients must lie strictly inside (-1, 1)".into(),
        ));
    }
    let mut cells = Vec::with_capacity(cfg.coefficients.len());
    for (cell_idx, &coefficient) in cfg.coefficients.iter().enumerate() {
        let spec = MarSpec::noncausal(vec![coefficient], 0.0)?;
        let cell_seed = mix(cfg.seed ^ ((cell_idx as u64 + 1) << 32));
        let run = || -> Vec<std::result::Result<f64, Error>> {
            (0..cfg.n_reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let sim = SimConfig::with_retained(
                        cfg.sample_length,
                        cell_seed ^ rep,
                        cfg.innovation,
                    );
                    let series = simulate_mar_recursive(&spec, &sim)?;
                    let fit = models::fit_qar(
                        &series,
                        &ModelSpec::new(Direction::Causal, 1, false)?,
                        cfg.tau,
                    )?;
                    Ok(fit.theta[1])
                })
                .collect()
        };
        let outcomes = match cfg.parallelism {
            0 => run(),
            workers => rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
                .install(run),
        };
        let mut estimates = Vec::with_capacity(cfg.n_reps);
        let mut failed = 0usize;
        for o in outcomes {
            match o {
                Ok(e) => estimates.push(e),
                Err(_) => failed += 1,
            }
        }
        if (failed as f64) > FAILURE_BUDGET * cfg.n_reps as f64 {
            return Err(Error::FailureBudget { failed, total: cfg.n_reps });
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std_dev = var.sqrt();
        cells.push(BindingCell {
            coefficient,
            mean_estimate: mean,
            std_dev,
            std_err: std_dev / n.sqrt(),
            non_convergent: std_dev > cfg.dispersion_flag,
            failed,
        });
    }
    Ok(BindingGrid { cells, config: cfg.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srar::default_grid;

    fn small_cfg(parallelism: usize) -> McConfig {
        McConfig {
            n_reps: 40,
            sample_length: 120,
            dgp: Dgp::Mar {
                spec: MarSpec::causal(vec![0.5], 1.0).unwrap(),
                innovation: DistributionSpec::student_t(2.0),
            },
            p_fit: 1,
            grid: default_grid(),
            seed: 77,
            parallelism,
            restricted: false,
            include_endpoints: false,
        }
    }

    #[test]
    fn selection_run_is_deterministic_and_worker_independent() {
        let a = run_selection_frequencies(&small_cfg(1)).unwrap();
        let b = run_selection_frequencies(&small_cfg(2)).unwrap();
        let c = run_selection_frequencies(&small_cfg(1)).unwrap();
        assert_eq!(a.per_tau_frequency, c.per_tau_frequency);
        assert_eq!(a.aggregate_frequency, c.aggregate_frequency);
        // Different worker counts, same numbers.
        assert_eq!(a.per_tau_frequency, b.per_tau_frequency);
        assert_eq!(a.aggregate_frequency, b.aggregate_frequency);
        assert_eq!(a.failed, 0);
    }

    #[test]
    fn frequencies_lie_in_unit_interval_with_binomial_stderr() {
        let table = run_selection_frequencies(&small_cfg(0)).unwrap();
        let n = (table.n_reps - table.failed) as f64;
        for (f, se) in table.per_tau_frequency.iter().zip(&table.per_tau_stderr) {
            assert!((0.0..=1.0).contains(f));
            assert!((se - (f * (1.0 - f) / n).sqrt()).abs() < 1e-15);
        }
        assert!(table.aggregate_frequency >= 0.75, "t(2) should identify causal direction");
    }

    #[test]
    fn endpoint_rows_are_appended_but_not_aggregated() {
        let mut cfg = small_cfg(0);
        cfg.include_endpoints = true;
        cfg.n_reps = 10;
        let table = run_selection_frequencies(&cfg).unwrap();
        assert_eq!(table.taus.len(), 21);
        assert_eq!(table.taus[0], 0.0);
        assert_eq!(*table.taus.last().unwrap(), 1.0);

        let mut plain = small_cfg(0);
        plain.n_reps = 10;
        let reference = run_selection_frequencies(&plain).unwrap();
        // The aggregate ignores the endpoint rows entirely.
        assert_eq!(table.aggregate_frequency, reference.aggregate_frequency);
    }

    #[test]
    fn two_regime_dgp_counts_noncausal_as_correct() {
        let cfg = McConfig {
            n_reps: 30,
            sample_length: 400,
            dgp: Dgp::TwoRegime {
                regime: RegimeSpec {
                    tau_star: 0.7,
                    beta1: 0.2,
                    beta2: 0.8,
                    innovation_quantile: DistributionSpec::student_t(3.0),
                },
            },
            p_fit: 1,
            grid: default_grid(),
            seed: 5,
            parallelism: 0,
            restricted: false,
            include_endpoints: false,
        };
        assert_eq!(cfg.dgp.true_direction().unwrap(), Direction::Noncausal);
        let table = run_selection_frequencies(&cfg).unwrap();
        assert!(table.aggregate_frequency >= 0.8, "got {}", table.aggregate_frequency);
    }

    #[test]
    fn mixed_dgp_is_rejected() {
        let dgp = Dgp::Mar {
            spec: MarSpec::new(vec![0.5], vec![0.3], 0.0).unwrap(),
            innovation: DistributionSpec::gaussian(0.0, 1.0),
        };
        assert!(dgp.true_direction().is_err());
    }

    #[test]
    fn binding_zero_coefficient_is_centered_at_zero() {
        let cfg = BindingConfig {
            n_reps: 150,
            sample_length: 300,
            ..BindingConfig::new(0.5, vec![0.0], DistributionSpec::student_t(3.0), 99)
        };
        let grid = run_binding_function(&cfg).unwrap();
        let cell = &grid.cells[0];
        assert!(
            cell.mean_estimate.abs() < 3.0 * cell.std_err,
            "mean {} stderr {}",
            cell.mean_estimate,
            cell.std_err
        );
        assert!(!cell.non_convergent);
    }

    #[test]
    fn binding_t10_median_cell_is_stable() {
        let cfg = BindingConfig {
            n_reps: 200,
            ..BindingConfig::new(0.5, vec![0.8], DistributionSpec::student_t(10.0), 4)
        };
        let grid = run_binding_function(&cfg).unwrap();
        let cell = &grid.cells[0];
        assert!(cell.std_err < 0.02, "stderr {}", cell.std_err);
        assert!(cell.mean_estimate.is_finite());
        assert!(!cell.non_convergent);
    }

    #[test]
    fn binding_rejects_unit_coefficients() {
        let cfg = BindingConfig::new(0.5, vec![1.0], DistributionSpec::student_t(3.0), 1);
        assert!(run_binding_function(&cfg).is_err());
        let cfg = BindingConfig::new(1.0, vec![0.5], DistributionSpec::student_t(3.0), 1);
        assert!(run_binding_function(&cfg).is_err());
    }

    #[test]
    fn binding_runs_are_deterministic() {
        let cfg = BindingConfig {
            n_reps: 60,
            sample_length: 200,
            ..BindingConfig::new(0.3, vec![-0.4, 0.4], DistributionSpec::student_t(3.0), 123)
        };
        let a = run_binding_function(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.parallelism = 2;
        let b = run_binding_function(&cfg2).unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!(x.mean_estimate, y.mean_estimate);
            assert_eq!(x.std_dev, y.std_dev);
        }
    }
}
