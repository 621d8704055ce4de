//! Run configuration: one TOML document with a flat section per subcommand,
//! overridable by command-line flags (flags win). Unknown keys are rejected.

use crate::dataset::DatasetSpec;
use crate::CliError;
use quantar::dist::DistributionSpec;
use quantar::simulate::{MarSpec, RegimeSpec, DEFAULT_BURN_IN};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Whole config file; every section is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: Option<SimulateParams>,
    pub fit: Option<FitParams>,
    pub order: Option<OrderParams>,
    pub srar: Option<SrarParams>,
    pub select: Option<SelectParams>,
    pub montecarlo: Option<MontecarloParams>,
    pub binding: Option<BindingParams>,
    pub identify: Option<IdentifyParams>,
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Data-generating process description shared by simulate and montecarlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpParams {
    /// "mar" or "two_regime".
    pub kind: String,
    #[serde(default)]
    pub pi: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    pub innovation: DistributionSpec,
    // Two-regime fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
}

impl DgpParams {
    pub fn to_dgp(&self) -> Result<quantar::montecarlo::Dgp, CliError> {
        match self.kind.as_str() {
            "mar" => Ok(quantar::montecarlo::Dgp::Mar {
                spec: MarSpec::new(self.pi.clone(), self.phi.clone(), self.intercept)?,
                innovation: self.innovation,
            }),
            "two_regime" => {
                let missing = || {
                    CliError::Config(
                        "two_regime needs tau_star, beta1 and beta2".to_string(),
                    )
                };
                Ok(quantar::montecarlo::Dgp::TwoRegime {
                    regime: RegimeSpec {
                        tau_star: self.tau_star.ok_or_else(missing)?,
                        beta1: self.beta1.ok_or_else(missing)?,
                        beta2: self.beta2.ok_or_else(missing)?,
                        innovation_quantile: self.innovation,
                    },
                })
            }
            other => Err(CliError::Config(format!(
                "unknown dgp kind '{other}' (expected mar or two_regime)"
            ))),
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_length() -> usize {
    200
}

fn default_p_max() -> usize {
    8
}

fn default_tau() -> f64 {
    0.5
}

fn default_reps() -> usize {
    2000
}

fn default_binding_reps() -> usize {
    1000
}

fn default_binding_length() -> usize {
    600
}

fn default_dispersion_flag() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub dgp: DgpParams,
    /// Retained sample length after trimming.
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    /// "matrix" or "recursive" (MAR only; two-regime has one generator).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub dataset: DatasetSpec,
    /// "causal" or "noncausal".
    pub direction: String,
    pub p: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub restricted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderParams {
    pub dataset: DatasetSpec,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrarParams {
    pub dataset: DatasetSpec,
    pub p: usize,
    #[serde(default)]
    pub restricted: bool,
    /// Append the endpoint rows 0 and 1 (epsilon-shift convention).
    #[serde(default)]
    pub endpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectParams {
    pub dataset: DatasetSpec,
    pub p: usize,
    #[serde(default)]
    pub restricted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MontecarloParams {
    pub dgp: DgpParams,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_fit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub restricted: bool,
    #[serde(default)]
    pub endpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingParams {
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub coefficients: Vec<f64>,
    pub innovation: DistributionSpec,
    #[serde(default = "default_binding_reps")]
    pub reps: usize,
    #[serde(default = "default_binding_length")]
    pub length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dispersion_flag")]
    pub dispersion_flag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyParams {
    pub dataset: DatasetSpec,
    /// AR order; defaults to Hannan-Quinn selection up to `p_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default)]
    pub restricted: bool,
}
