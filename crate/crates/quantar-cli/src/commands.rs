//! Subcommand implementations. Every JSON report embeds the tool version,
//! the resolved configuration, and the solver conventions, so a run can be
//! reproduced byte for byte from its own output; nothing time- or
//! machine-dependent is ever written.

use crate::config::*;
use crate::dataset::{emit_series, ingest};
use crate::CliError;
use quantar::models::{fit_qar, select_order_hq, Direction, ModelSpec};
use quantar::montecarlo::{
    run_binding_function, run_selection_frequencies, BindingConfig, McConfig,
};
use quantar::simulate::{simulate_mar_matrix, simulate_mar_recursive, simulate_two_regime, SimConfig};
use quantar::solver::{SolverStatus, TAU_ENDPOINT_SHIFT};
use quantar::srar::{
    self, default_grid, grid_with_endpoints, select_model_detailed, SelectionCurves, Winner,
};
use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Conventions baked into every report: how endpoint quantiles are fitted,
/// when SRAR comparisons tie, and how curves are aggregated.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConventions {
    pub tau_endpoint_shift: f64,
    pub tie_threshold: f64,
    pub aggregate_method: &'static str,
    pub default_burn_in: usize,
}

impl Default for SolverConventions {
    fn default() -> Self {
        Self {
            tau_endpoint_shift: TAU_ENDPOINT_SHIFT,
            tie_threshold: srar::TIE_THRESHOLD,
            aggregate_method: "grid_mean",
            default_burn_in: quantar::simulate::DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<C: Serialize, P: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    solver_conventions: SolverConventions,
    config: C,
    payload: P,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn report<C: Serialize, P: Serialize>(
    command: &'static str,
    config: &C,
    payload: P,
) -> Result<String, CliError> {
    to_json(&Report {
        tool_version: TOOL_VERSION,
        command,
        solver_conventions: SolverConventions::default(),
        config,
        payload,
    })
}

fn parse_direction(s: &str) -> Result<Direction, CliError> {
    match s {
        "causal" => Ok(Direction::Causal),
        "noncausal" => Ok(Direction::Noncausal),
        other => Err(CliError::Config(format!(
            "unknown direction '{other}' (expected causal or noncausal)"
        ))),
    }
}

/// `simulate`: one sample path as `t,value` CSV.
pub fn run_simulate(params: &SimulateParams) -> Result<String, CliError> {
    let dgp = params.dgp.to_dgp()?;
    let series = match (&dgp, params.method.as_deref()) {
        (quantar::montecarlo::Dgp::Mar { spec, innovation }, method) => {
            let cfg = SimConfig {
                total_length: params.length + 2 * params.burn_in,
                burn_in: params.burn_in,
                seed: params.seed,
                innovation: *innovation,
            };
            match method.unwrap_or("matrix") {
                "matrix" => simulate_mar_matrix(spec, &cfg)?,
                "recursive" => simulate_mar_recursive(spec, &cfg)?,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown simulation method '{other}'"
                    )))
                }
            }
        }
        (quantar::montecarlo::Dgp::TwoRegime { regime }, method) => {
            if method.is_some() && method != Some("recursive") {
                return Err(CliError::Config(
                    "two_regime supports only the recursive generator".to_string(),
                ));
            }
            let cfg = SimConfig {
                total_length: params.length + 2 * params.burn_in,
                burn_in: params.burn_in,
                seed: params.seed,
                innovation: quantar::dist::DistributionSpec::uniform01(),
            };
            simulate_two_regime(regime, &cfg)?
        }
    };
    let mut buf = Vec::new();
    emit_series(&mut buf, &series)?;
    String::from_utf8(buf).map_err(|e| CliError::Numeric(e.to_string()))
}

#[derive(Debug, Serialize)]
struct FitPayload {
    direction: String,
    p: usize,
    restricted: bool,
    tau_requested: f64,
    tau_effective: f64,
    theta: Vec<f64>,
    srar: f64,
    n_effective: usize,
    status: SolverStatus,
    series_length: usize,
    residuals: Vec<f64>,
}

/// `fit`: one quantile autoregression fit as a JSON report.
pub fn run_fit(params: &FitParams) -> Result<String, CliError> {
    let series = ingest(&params.dataset)?;
    let direction = parse_direction(&params.direction)?;
    let model = ModelSpec::new(direction, params.p, params.restricted)?;
    let fit = fit_qar(&series, &model, params.tau)?;
    let payload = FitPayload {
        direction: direction.label().to_string(),
        p: params.p,
        restricted: params.restricted,
        tau_requested: fit.tau_requested,
        tau_effective: fit.tau,
        theta: fit.theta,
        srar: fit.srar,
        n_effective: fit.n_effective,
        status: fit.status,
        series_length: series.len(),
        residuals: fit.residuals,
    };
    report("fit", params, payload)
}

#[derive(Debug, Serialize)]
struct OrderPayload {
    selected_order: usize,
    p_max: usize,
    series_length: usize,
}

/// `order`: Hannan-Quinn AR order selection.
pub fn run_order(params: &OrderParams) -> Result<String, CliError> {
    let series = ingest(&params.dataset)?;
    let selected = select_order_hq(&series, params.p_max)?;
    let payload =
        OrderPayload { selected_order: selected, p_max: params.p_max, series_length: series.len() };
    report("order", params, payload)
}

fn curve_csv(grid: &[f64], curves: &SelectionCurves) -> String {
    let restricted = curves.restricted_causal.is_some();
    let mut out = String::from("tau,srar_causal,srar_noncausal");
    if restricted {
        out.push_str(",srar_rcausal,srar_rnoncausal");
    }
    out.push('\n');
    for (i, tau) in grid.iter().enumerate() {
        out.push_str(&format!(
            "{tau:.2},{:.16e},{:.16e}",
            curves.causal.values[i], curves.noncausal.values[i]
        ));
        if restricted {
            out.push_str(&format!(
                ",{:.16e},{:.16e}",
                curves.restricted_causal.as_ref().unwrap().values[i],
                curves.restricted_noncausal.as_ref().unwrap().values[i]
            ));
        }
        out.push('\n');
    }
    out
}

/// `srar`: per-quantile SRAR curves for both directions as CSV, plus a JSON
/// metadata sidecar.
pub fn run_srar(params: &SrarParams) -> Result<(String, String), CliError> {
    let series = ingest(&params.dataset)?;
    let grid = if params.endpoints { grid_with_endpoints() } else { default_grid() };
    let (_, curves) = select_model_detailed(&series, params.p, &grid, params.restricted)?;
    let csv = curve_csv(&grid, &curves);

    #[derive(Serialize)]
    struct SrarPayload {
        grid: Vec<f64>,
        n_effective: usize,
        series_length: usize,
    }
    let meta = report(
        "srar",
        params,
        SrarPayload {
            grid: grid.clone(),
            n_effective: curves.causal.n_effective,
            series_length: series.len(),
        },
    )?;
    Ok((csv, meta))
}

/// `select`: causal-vs-noncausal SRAR selection report as JSON.
pub fn run_select(params: &SelectParams) -> Result<String, CliError> {
    let series = ingest(&params.dataset)?;
    let grid = default_grid();
    let (selection, _) = select_model_detailed(&series, params.p, &grid, params.restricted)?;
    report("select", params, selection)
}

/// `montecarlo`: selection-frequency table as CSV plus a JSON sidecar.
pub fn run_montecarlo(params: &MontecarloParams, jobs: usize) -> Result<(String, String), CliError> {
    let cfg = McConfig {
        n_reps: params.reps,
        sample_length: params.length,
        dgp: params.dgp.to_dgp()?,
        p_fit: params.p_fit.unwrap_or_else(|| default_dgp_order(&params.dgp)),
        grid: default_grid(),
        seed: params.seed,
        parallelism: jobs,
        restricted: params.restricted,
        include_endpoints: params.endpoints,
    };
    let table = run_selection_frequencies(&cfg)?;
    let mut csv = String::from("tau,frequency,stderr\n");
    for ((tau, f), se) in
        table.taus.iter().zip(&table.per_tau_frequency).zip(&table.per_tau_stderr)
    {
        csv.push_str(&format!("{tau:.2},{f},{se}\n"));
    }
    csv.push_str(&format!(
        "aggregate,{},{}\n",
        table.aggregate_frequency, table.aggregate_stderr
    ));

    #[derive(Serialize)]
    struct McPayload {
        taus: Vec<f64>,
        per_tau_frequency: Vec<f64>,
        per_tau_stderr: Vec<f64>,
        aggregate_frequency: f64,
        aggregate_stderr: f64,
        n_reps: usize,
        failed: usize,
        p_fit: usize,
        seed: u64,
    }
    let sidecar = report(
        "montecarlo",
        params,
        McPayload {
            taus: table.taus.clone(),
            per_tau_frequency: table.per_tau_frequency.clone(),
            per_tau_stderr: table.per_tau_stderr.clone(),
            aggregate_frequency: table.aggregate_frequency,
            aggregate_stderr: table.aggregate_stderr,
            n_reps: table.n_reps,
            failed: table.failed,
            p_fit: cfg.p_fit,
            seed: params.seed,
        },
    )?;
    Ok((csv, sidecar))
}

// Fitting order when none is given: the DGP's own order.
fn default_dgp_order(dgp: &DgpParams) -> usize {
    dgp.pi.len().max(dgp.phi.len()).max(1)
}

/// `binding`: binding-function grid as CSV plus a JSON sidecar.
pub fn run_binding(params: &BindingParams, jobs: usize) -> Result<(String, String), CliError> {
    let cfg = BindingConfig {
        tau: params.tau,
        coefficients: params.coefficients.clone(),
        innovation: params.innovation,
        n_reps: params.reps,
        sample_length: params.length,
        seed: params.seed,
        parallelism: jobs,
        dispersion_flag: params.dispersion_flag,
    };
    let grid = run_binding_function(&cfg)?;
    let mut csv = String::from("coefficient,mean_estimate,std_dev,std_err,non_convergent\n");
    for cell in &grid.cells {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            cell.coefficient, cell.mean_estimate, cell.std_dev, cell.std_err, cell.non_convergent
        ));
    }
    let sidecar = report("binding", params, &grid.cells)?;
    Ok((csv, sidecar))
}

/// One reported cell of the identification table.
#[derive(Debug, Serialize)]
struct QuantileCell {
    tau: f64,
    winner: Winner,
    /// "MAR(p,0)" when the causal fit wins, "MAR(0,p)" when the noncausal
    /// fit wins.
    model: String,
}

#[derive(Debug, Serialize)]
struct AggregateCell {
    winner: Winner,
    model: String,
}

#[derive(Debug, Serialize)]
struct IdentifyBlock {
    per_quantile: Vec<QuantileCell>,
    aggregate_causal: f64,
    aggregate_noncausal: f64,
    aggregate: AggregateCell,
}

#[derive(Debug, Serialize)]
struct IdentifyPayload {
    selected_order: usize,
    order_source: &'static str,
    series_length: usize,
    unrestricted: IdentifyBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    restricted: Option<IdentifyBlock>,
}

const IDENTIFY_TAUS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn winner_label(winner: Winner, p: usize) -> String {
    match winner {
        Winner::Causal => format!("MAR({p},0)"),
        Winner::Noncausal => format!("MAR(0,{p})"),
        Winner::Tie => "tie".to_string(),
    }
}

fn identify_block(
    grid: &[f64],
    per_tau: &[Winner],
    aggregate_causal: f64,
    aggregate_noncausal: f64,
    aggregate: Winner,
    p: usize,
) -> IdentifyBlock {
    let per_quantile = IDENTIFY_TAUS
        .iter()
        .map(|&tau| {
            let idx = grid
                .iter()
                .position(|g| (g - tau).abs() < 1e-9)
                .expect("report quantiles lie on the default grid");
            QuantileCell { tau, winner: per_tau[idx], model: winner_label(per_tau[idx], p) }
        })
        .collect();
    IdentifyBlock {
        per_quantile,
        aggregate_causal,
        aggregate_noncausal,
        aggregate: AggregateCell { winner: aggregate, model: winner_label(aggregate, p) },
    }
}

/// `identify`: the full identification pipeline (ingest, order selection,
/// per-quantile winners at tau in {0.1,...,0.9}, the aggregate decision),
/// plus the curves as CSV for plotting.
pub fn run_identify(params: &IdentifyParams) -> Result<(String, String), CliError> {
    let series = ingest(&params.dataset)?;
    let (p, order_source) = match params.p {
        Some(p) => (p, "user"),
        None => (select_order_hq(&series, params.p_max)?, "hannan_quinn"),
    };
    let grid = default_grid();
    let (selection, curves) = select_model_detailed(&series, p, &grid, params.restricted)?;
    let unrestricted = identify_block(
        &grid,
        &selection.per_tau_winner,
        selection.aggregate_causal,
        selection.aggregate_noncausal,
        selection.aggregate_winner,
        p,
    );
    let restricted = selection.restricted_variant.as_ref().map(|block| {
        identify_block(
            &grid,
            &block.per_tau_winner,
            block.aggregate_causal,
            block.aggregate_noncausal,
            block.aggregate_winner,
            p,
        )
    });
    let payload = IdentifyPayload {
        selected_order: p,
        order_source,
        series_length: series.len(),
        unrestricted,
        restricted,
    };
    let json = report("identify", params, payload)?;
    let csv = curve_csv(&grid, &curves);
    Ok((json, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use quantar::dist::DistributionSpec;

    fn mar_dgp() -> DgpParams {
        DgpParams {
            kind: "mar".into(),
            pi: vec![0.5],
            phi: vec![],
            intercept: 1.0,
            innovation: DistributionSpec::student_t(2.0),
            tau_star: None,
            beta1: None,
            beta2: None,
        }
    }

    #[test]
    fn simulate_emits_expected_length() {
        let params = SimulateParams {
            dgp: mar_dgp(),
            length: 50,
            burn_in: 100,
            seed: 3,
            method: None,
        };
        let csv = run_simulate(&params).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,value");
        assert_eq!(lines.len(), 51);
        // Matrix and recursive methods agree on the emitted interior.
        let mut rec = params.clone();
        rec.method = Some("recursive".into());
        let csv2 = run_simulate(&rec).unwrap();
        for (a, b) in csv.lines().skip(1).zip(csv2.lines().skip(1)) {
            let va: f64 = a.split(',').nth(1).unwrap().parse().unwrap();
            let vb: f64 = b.split(',').nth(1).unwrap().parse().unwrap();
            assert!((va - vb).abs() < 1e-9);
        }
    }

    #[test]
    fn montecarlo_report_embeds_version_and_config() {
        let params = MontecarloParams {
            dgp: mar_dgp(),
            reps: 8,
            length: 80,
            p_fit: None,
            seed: 9,
            restricted: false,
            endpoints: false,
        };
        let (csv, sidecar) = run_montecarlo(&params, 1).unwrap();
        assert!(csv.starts_with("tau,frequency,stderr\n"));
        assert!(csv.lines().last().unwrap().starts_with("aggregate,"));
        let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(v["tool_version"], TOOL_VERSION);
        assert_eq!(v["config"]["reps"], 8);
        assert_eq!(v["solver_conventions"]["aggregate_method"], "grid_mean");
        assert_eq!(v["payload"]["failed"], 0);
    }
}
