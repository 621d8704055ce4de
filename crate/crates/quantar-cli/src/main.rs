use clap::{Args, Parser, Subcommand};
use quantar_cli::commands;
use quantar_cli::config::{self, *};
use quantar_cli::dataset::{DatasetSpec, Transform};
use quantar_cli::CliError;
use std::path::{Path, PathBuf};

/// Simulation and identification of causal/noncausal autoregressions via
/// quantile regressions and the aggregate-SRAR criterion.
#[derive(Parser)]
#[command(name = "quantar", version, about)]
struct Cli {
    /// TOML config file with one section per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for Monte Carlo commands (default: QUANTAR_JOBS, then
    /// all cores). Results never depend on this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sample path and emit it as t,value CSV.
    Simulate(SimulateArgs),
    /// Fit a quantile (non)causal autoregression at one quantile.
    Fit(FitArgs),
    /// Select the AR order by the Hannan-Quinn criterion.
    Order(OrderArgs),
    /// Emit SRAR curves for both time directions as CSV.
    Srar(SrarArgs),
    /// Causal-vs-noncausal selection report (JSON).
    Select(SelectArgs),
    /// Correct-selection frequency table over seeded replications.
    Montecarlo(MontecarloArgs),
    /// Binding-function grid: misspecified causal fits on noncausal data.
    Binding(BindingArgs),
    /// Full identification pipeline: ingest, order, per-quantile and
    /// aggregate winners, plus curve CSV.
    Identify(IdentifyArgs),
}

#[derive(Args, Clone)]
struct DgpArgs {
    /// DGP kind: mar | two_regime.
    #[arg(long)]
    kind: Option<String>,
    /// Lag coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    pi: Option<Vec<f64>>,
    /// Lead coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<f64>>,
    #[arg(long)]
    intercept: Option<f64>,
    #[arg(long)]
    tau_star: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Innovation law: gaussian | student_t | cauchy | skewed_t | uniform01.
    #[arg(long)]
    innovation: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Subtract the analytic mean (skewed_t only).
    #[arg(long)]
    demeaned: bool,
}

impl DgpArgs {
    fn merge(&self, base: Option<DgpParams>) -> Result<DgpParams, CliError> {
        let innovation = match (&self.innovation, &base) {
            (Some(kind), _) => {
                use quantar::dist::Kind;
                let kind = match kind.as_str() {
                    "gaussian" => Kind::Gaussian,
                    "student_t" => Kind::StudentT,
                    "cauchy" => Kind::Cauchy,
                    "skewed_t" => Kind::SkewedT,
                    "uniform01" => Kind::Uniform01,
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown innovation kind '{other}'"
                        )))
                    }
                };
                quantar::dist::DistributionSpec {
                    kind,
                    nu: self.nu,
                    gamma: self.gamma,
                    mu: self.mu.unwrap_or(0.0),
                    sigma: self.sigma.unwrap_or(1.0),
                    demeaned: self.demeaned,
                }
            }
            (None, Some(b)) => b.innovation,
            (None, None) => {
                return Err(CliError::Config(
                    "no innovation law given (flag --innovation or config)".to_string(),
                ))
            }
        };
        let kind = self
            .kind
            .clone()
            .or_else(|| base.as_ref().map(|b| b.kind.clone()))
            .ok_or_else(|| CliError::Config("no dgp kind given (--kind or config)".into()))?;
        Ok(DgpParams {
            kind,
            pi: self
                .pi
                .clone()
                .or_else(|| base.as_ref().map(|b| b.pi.clone()))
                .unwrap_or_default(),
            phi: self
                .phi
                .clone()
                .or_else(|| base.as_ref().map(|b| b.phi.clone()))
                .unwrap_or_default(),
            intercept: self
                .intercept
                .or_else(|| base.as_ref().map(|b| b.intercept))
                .unwrap_or(0.0),
            innovation,
            tau_star: self.tau_star.or_else(|| base.as_ref().and_then(|b| b.tau_star)),
            beta1: self.beta1.or_else(|| base.as_ref().and_then(|b| b.beta1)),
            beta2: self.beta2.or_else(|| base.as_ref().and_then(|b| b.beta2)),
        })
    }
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Input CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Column name or 0-based index.
    #[arg(long)]
    column: Option<String>,
    /// Transform: none | annualized_log_diff.
    #[arg(long)]
    transform: Option<String>,
}

impl DatasetArgs {
    fn merge(&self, base: Option<DatasetSpec>) -> Result<DatasetSpec, CliError> {
        let transform = match self.transform.as_deref() {
            Some("none") => Some(Transform::None),
            Some("annualized_log_diff") => Some(Transform::AnnualizedLogDiff),
            Some(other) => {
                return Err(CliError::Config(format!("unknown transform '{other}'")))
            }
            None => None,
        };
        let path = self
            .data
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned())
            .or_else(|| base.as_ref().map(|b| b.path.clone()))
            .ok_or_else(|| CliError::Config("no input data given (--data or config)".into()))?;
        let column = self
            .column
            .clone()
            .or_else(|| base.as_ref().map(|b| b.column.clone()))
            .ok_or_else(|| CliError::Config("no column given (--column or config)".into()))?;
        Ok(DatasetSpec {
            path,
            column,
            transform: transform
                .or(base.as_ref().map(|b| b.transform))
                .unwrap_or(Transform::None),
            frequency: base.map(|b| b.frequency).unwrap_or_default(),
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    /// Retained length after trimming.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// matrix | recursive.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// causal | noncausal.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    restricted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SrarArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    p: Option<usize>,
    /// Also compute restricted (nonnegative-regressor) curves.
    #[arg(long)]
    restricted: bool,
    /// Append endpoint rows 0 and 1.
    #[arg(long)]
    endpoints: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    restricted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MontecarloArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    /// AR order fitted to each replicate (default: the DGP's order).
    #[arg(long)]
    p_fit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Judge with restricted fits.
    #[arg(long)]
    restricted: bool,
    /// Include endpoint rows 0 and 1 in the table.
    #[arg(long)]
    endpoints: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BindingArgs {
    #[arg(long)]
    tau: Option<f64>,
    /// True lead coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    coefficients: Option<Vec<f64>>,
    #[arg(long)]
    innovation: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dispersion_flag: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// AR order; defaults to Hannan-Quinn selection.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long)]
    restricted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the curve CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    });
}

fn jobs_from(cli_jobs: Option<usize>) -> usize {
    cli_jobs
        .or_else(|| std::env::var("QUANTAR_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn write_primary(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// Sidecar path: append ".meta.json" to the primary output name.
fn write_sidecar(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    if let Some(path) = out {
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".meta.json");
        let sidecar = Path::new(&sidecar);
        std::fs::write(sidecar, content)
            .map_err(|e| CliError::Data(format!("{}: {e}", sidecar.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file: FileConfig = match &cli.config {
        Some(path) => config::load(path)?,
        None => FileConfig::default(),
    };
    let jobs = jobs_from(cli.jobs);

    match cli.command {
        Command::Simulate(args) => {
            let base = file.simulate;
            let params = SimulateParams {
                dgp: args.dgp.merge(base.as_ref().map(|b| b.dgp.clone()))?,
                length: args.length.or(base.as_ref().map(|b| b.length)).unwrap_or(200),
                burn_in: args
                    .burn_in
                    .or(base.as_ref().map(|b| b.burn_in))
                    .unwrap_or(quantar::simulate::DEFAULT_BURN_IN),
                seed: args.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
                method: args.method.or(base.and_then(|b| b.method)),
            };
            write_primary(&args.out, &commands::run_simulate(&params)?)
        }
        Command::Fit(args) => {
            let base = file.fit;
            let params = FitParams {
                dataset: args.dataset.merge(base.as_ref().map(|b| b.dataset.clone()))?,
                direction: args
                    .direction
                    .or_else(|| base.as_ref().map(|b| b.direction.clone()))
                    .ok_or_else(|| CliError::Config("no direction given".into()))?,
                p: args
                    .p
                    .or(base.as_ref().map(|b| b.p))
                    .ok_or_else(|| CliError::Config("no order p given".into()))?,
                tau: args.tau.or(base.as_ref().map(|b| b.tau)).unwrap_or(0.5),
                restricted: args.restricted || base.map(|b| b.restricted).unwrap_or(false),
            };
            write_primary(&args.out, &commands::run_fit(&params)?)
        }
        Command::Order(args) => {
            let base = file.order;
            let params = OrderParams {
                dataset: args.dataset.merge(base.as_ref().map(|b| b.dataset.clone()))?,
                p_max: args.p_max.or(base.map(|b| b.p_max)).unwrap_or(8),
            };
            write_primary(&args.out, &commands::run_order(&params)?)
        }
        Command::Srar(args) => {
            let base = file.srar;
            let params = SrarParams {
                dataset: args.dataset.merge(base.as_ref().map(|b| b.dataset.clone()))?,
                p: args
                    .p
                    .or(base.as_ref().map(|b| b.p))
                    .ok_or_else(|| CliError::Config("no order p given".into()))?,
                restricted: args.restricted
                    || base.as_ref().map(|b| b.restricted).unwrap_or(false),
                endpoints: args.endpoints || base.map(|b| b.endpoints).unwrap_or(false),
            };
            let (csv, meta) = commands::run_srar(&params)?;
            write_primary(&args.out, &csv)?;
            write_sidecar(&args.out, &meta)
        }
        Command::Select(args) => {
            let base = file.select;
            let params = SelectParams {
                dataset: args.dataset.merge(base.as_ref().map(|b| b.dataset.clone()))?,
                p: args
                    .p
                    .or(base.as_ref().map(|b| b.p))
                    .ok_or_else(|| CliError::Config("no order p given".into()))?,
                restricted: args.restricted || base.map(|b| b.restricted).unwrap_or(false),
            };
            write_primary(&args.out, &commands::run_select(&params)?)
        }
        Command::Montecarlo(args) => {
            let base = file.montecarlo;
            let params = MontecarloParams {
                dgp: args.dgp.merge(base.as_ref().map(|b| b.dgp.clone()))?,
                reps: args.reps.or(base.as_ref().map(|b| b.reps)).unwrap_or(2000),
                length: args.length.or(base.as_ref().map(|b| b.length)).unwrap_or(200),
                p_fit: args.p_fit.or(base.as_ref().and_then(|b| b.p_fit)),
                seed: args.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
                restricted: args.restricted
                    || base.as_ref().map(|b| b.restricted).unwrap_or(false),
                endpoints: args.endpoints || base.map(|b| b.endpoints).unwrap_or(false),
            };
            let (csv, sidecar) = commands::run_montecarlo(&params, jobs)?;
            write_primary(&args.out, &csv)?;
            write_sidecar(&args.out, &sidecar)
        }
        Command::Binding(args) => {
            let base = file.binding;
            let innovation = match args.innovation.as_deref() {
                Some("student_t") => {
                    Some(quantar::dist::DistributionSpec::student_t(args.nu.unwrap_or(3.0)))
                }
                Some("cauchy") => Some(quantar::dist::DistributionSpec::cauchy()),
                Some("gaussian") => Some(quantar::dist::DistributionSpec::gaussian(0.0, 1.0)),
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unsupported binding innovation '{other}'"
                    )))
                }
                None => None,
            };
            let params = BindingParams {
                tau: args.tau.or(base.as_ref().map(|b| b.tau)).unwrap_or(0.5),
                coefficients: args
                    .coefficients
                    .or_else(|| base.as_ref().map(|b| b.coefficients.clone()))
                    .ok_or_else(|| CliError::Config("no coefficient grid given".into()))?,
                innovation: innovation
                    .or(base.as_ref().map(|b| b.innovation))
                    .ok_or_else(|| CliError::Config("no innovation law given".into()))?,
                reps: args.reps.or(base.as_ref().map(|b| b.reps)).unwrap_or(1000),
                length: args.length.or(base.as_ref().map(|b| b.length)).unwrap_or(600),
                seed: args.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
                dispersion_flag: args
                    .dispersion_flag
                    .or(base.map(|b| b.dispersion_flag))
                    .unwrap_or(1.0),
            };
            let (csv, sidecar) = commands::run_binding(&params, jobs)?;
            write_primary(&args.out, &csv)?;
            write_sidecar(&args.out, &sidecar)
        }
        Command::Identify(args) => {
            let base = file.identify;
            let params = IdentifyParams {
                dataset: args.dataset.merge(base.as_ref().map(|b| b.dataset.clone()))?,
                p: args.p.or(base.as_ref().and_then(|b| b.p)),
                p_max: args.p_max.or(base.as_ref().map(|b| b.p_max)).unwrap_or(8),
                restricted: args.restricted || base.map(|b| b.restricted).unwrap_or(false),
            };
            let (json, csv) = commands::run_identify(&params)?;
            write_primary(&args.out, &json)?;
            if let Some(curves) = &args.curves {
                std::fs::write(curves, csv)
                    .map_err(|e| CliError::Data(format!("{}: {e}", curves.display())))?;
            }
            Ok(())
        }
    }
}
