//! MAR(r, s) sample-path generation and the two-regime random-coefficient
//! generator.
//!
//! Two equivalent routes produce MAR paths: the matrix route factors the
//! model operator into banded unit-triangular Toeplitz matrices L (lag
//! polynomial) and U (lead polynomial) and solves y = U^-1 L^-1 eps by two
//! banded substitutions; the recursive route generates the noncausal part
//! backward from a zero terminal condition and filters the causal part
//! forward. Boundary values outside the sample are taken as zero, and both
//! routes trim `burn_in` observations from each end so the boundary
//! assumption washes out.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Root margin demanded of the lag/lead polynomials: companion eigenvalues
/// must have modulus below `1 - ROOT_MARGIN`.
const ROOT_MARGIN: f64 = 1e-10;

/// Default number of observations trimmed from each end of a simulated path.
pub const DEFAULT_BURN_IN: usize = 200;

/// Default truncation order for two-sided MA coefficient expansions.
pub const DEFAULT_MA_TRUNCATION: usize = 128;

/// Mixed causal-noncausal AR specification with `r` lag and `s` lead
/// coefficients; all polynomial roots must lie strictly outside the unit
/// circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarSpec {
    /// Lag coefficients pi_1..pi_r.
    pub pi: Vec<f64>,
    /// Lead coefficients phi_1..phi_s.
    pub phi: Vec<f64>,
    pub intercept: f64,
}

impl MarSpec {
    pub fn new(pi: Vec<f64>, phi: Vec<f64>, intercept: f64) -> Result<Self> {
        let spec = Self { pi, phi, intercept };
        spec.check_stationary()?;
        Ok(spec)
    }

    /// Purely causal AR(r).
    pub fn causal(pi: Vec<f64>, intercept: f64) -> Result<Self> {
        Self::new(pi, Vec::new(), intercept)
    }

    /// Purely noncausal AR(s).
    pub fn noncausal(phi: Vec<f64>, intercept: f64) -> Result<Self> {
        Self::new(Vec::new(), phi, intercept)
    }

    pub fn r(&self) -> usize {
        self.pi.len()
    }

    pub fn s(&self) -> usize {
        self.phi.len()
    }

    /// Verifies both polynomials via companion-matrix eigenvalues.
    pub fn check_stationary(&self) -> Result<()> {
        for (name, coeffs) in [("pi", &self.pi), ("phi", &self.phi)] {
            let rho = max_companion_modulus(coeffs);
            if rho.is_nan() || rho >= 1.0 - ROOT_MARGIN {
                return Err(Error::Stationarity(format!(
                    "{name} polynomial has a root with |z| <= 1 (companion modulus {rho:.12})"
                )));
            }
        }
        Ok(())
    }
}

/// Largest companion-matrix eigenvalue modulus of 1 - c1 z - ... - cm z^m.
/// All roots outside the unit circle iff this is below one.
pub(crate) fn max_companion_modulus(coeffs: &[f64]) -> f64 {
    match coeffs.len() {
        0 => 0.0,
        1 => coeffs[0].abs(),
        m => {
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (j, c) in coeffs.iter().enumerate() {
                a[(0, j)] = *c;
            }
            for i in 1..m {
                a[(i, i - 1)] = 1.0;
            }
            a.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
        }
    }
}

/// Simulation length, trimming, seed, and innovation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub total_length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub innovation: DistributionSpec,
}

impl SimConfig {
    /// Config whose retained length is exactly `retained`, with the default
    /// burn-in on each side.
    pub fn with_retained(retained: usize, seed: u64, innovation: DistributionSpec) -> Self {
        Self { total_length: retained + 2 * DEFAULT_BURN_IN, burn_in: DEFAULT_BURN_IN, seed, innovation }
    }

    pub fn retained(&self) -> usize {
        self.total_length.saturating_sub(2 * self.burn_in)
    }

    fn validate(&self, r: usize, s: usize) -> Result<()> {
        if self.total_length <= 2 * self.burn_in + r + s {
            return Err(Error::InvalidParameter(format!(
                "total_length {} must exceed 2*burn_in + r + s = {}",
                self.total_length,
                2 * self.burn_in + r + s
            )));
        }
        Ok(())
    }
}

/// Two-regime noncausal AR(1): coefficient beta1 when the uniform draw falls
/// at or below `tau_star`, beta2 above it; innovation quantile supplies
/// F^-1(tau_t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub tau_star: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub innovation_quantile: DistributionSpec,
}

impl RegimeSpec {
    fn validate(&self) -> Result<()> {
        if !(self.tau_star > 0.0 && self.tau_star < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_star must be in (0,1), got {}",
                self.tau_star
            )));
        }
        Ok(())
    }
}

/// Unit-diagonal lower-triangular banded Toeplitz matrix: subdiagonal k holds
/// the constant -band[k-1]. Only the band is stored.
#[derive(Debug, Clone)]
struct LowerBandToeplitz {
    band: Vec<f64>,
}

impl LowerBandToeplitz {
    /// Solves L x = b in place by forward substitution.
    fn solve_in_place(&self, b: &mut [f64]) {
        let r = self.band.len();
        for t in 0..b.len() {
            let mut v = b[t];
            for (k, c) in self.band.iter().enumerate().take(t.min(r)) {
                v += c * b[t - k - 1];
            }
            b[t] = v;
        }
    }
}

/// Unit-diagonal upper-triangular banded Toeplitz: superdiagonal k holds
/// -band[k-1].
#[derive(Debug, Clone)]
struct UpperBandToeplitz {
    band: Vec<f64>,
}

impl UpperBandToeplitz {
    /// Solves U x = b in place by backward substitution.
    fn solve_in_place(&self, b: &mut [f64]) {
        let s = self.band.len();
        let n = b.len();
        for t in (0..n).rev() {
            let mut v = b[t];
            for (k, c) in self.band.iter().enumerate().take((n - 1 - t).min(s)) {
                v += c * b[t + k + 1];
            }
            b[t] = v;
        }
    }
}

/// Matrix-route MAR path on explicit innovations, full length, no trimming.
pub fn mar_matrix_path(spec: &MarSpec, eps: &[f64]) -> Vec<f64> {
    let lower = LowerBandToeplitz { band: spec.pi.clone() };
    let upper = UpperBandToeplitz { band: spec.phi.clone() };
    let mut y: Vec<f64> = eps.iter().map(|e| e + spec.intercept).collect();
    lower.solve_in_place(&mut y);
    upper.solve_in_place(&mut y);
    y
}

/// Recursive-route MAR path on explicit innovations: noncausal part backward
/// from a zero terminal condition, then the causal filter forward.
pub fn mar_recursive_path(spec: &MarSpec, eps: &[f64]) -> Vec<f64> {
    let n = eps.len();
    let s = spec.s();
    let r = spec.r();
    let mut u: Vec<f64> = eps.iter().map(|e| e + spec.intercept).collect();
    for t in (0..n).rev() {
        let mut v = u[t];
        for (k, c) in spec.phi.iter().enumerate().take((n - 1 - t).min(s)) {
            v += c * u[t + k + 1];
        }
        u[t] = v;
    }
    for t in 0..n {
        let mut v = u[t];
        for (k, c) in spec.pi.iter().enumerate().take(t.min(r)) {
            v += c * u[t - k - 1];
        }
        u[t] = v;
    }
    u
}

fn trim(mut path: Vec<f64>, burn_in: usize) -> Vec<f64> {
    path.truncate(path.len() - burn_in);
    path.drain(..burn_in);
    path
}

/// Simulates a MAR(r, s) path by the banded matrix factorization and trims
/// `burn_in` observations from each end.
pub fn simulate_mar_matrix(spec: &MarSpec, cfg: &SimConfig) -> Result<Vec<f64>> {
    spec.check_stationary()?;
    cfg.validate(spec.r(), spec.s())?;
    let eps = cfg.innovation.sample(cfg.total_length, cfg.seed)?;
    Ok(trim(mar_matrix_path(spec, &eps), cfg.burn_in))
}

/// Simulates the same law as [`simulate_mar_matrix`] by direct recursion;
/// the innovation stream is drawn identically so the two routes can be
/// compared path by path.
pub fn simulate_mar_recursive(spec: &MarSpec, cfg: &SimConfig) -> Result<Vec<f64>> {
    spec.check_stationary()?;
    cfg.validate(spec.r(), spec.s())?;
    let eps = cfg.innovation.sample(cfg.total_length, cfg.seed)?;
    Ok(trim(mar_recursive_path(spec, &eps), cfg.burn_in))
}

/// Two-regime path on explicit uniform draws.
pub fn two_regime_path<F: Fn(f64) -> f64>(
    regime: &RegimeSpec,
    taus: &[f64],
    quantile: F,
) -> Vec<f64> {
    let n = taus.len();
    let mut y = vec![0.0; n];
    for t in (0..n).rev() {
        let beta = if taus[t] <= regime.tau_star { regime.beta1 } else { regime.beta2 };
        let next = if t + 1 < n { y[t + 1] } else { 0.0 };
        y[t] = beta * next + quantile(taus[t]);
    }
    y
}

/// Simulates the two-regime noncausal generator backward in time with a zero
/// terminal condition, then trims `burn_in` from each end.
pub fn simulate_two_regime(regime: &RegimeSpec, cfg: &SimConfig) -> Result<Vec<f64>> {
    regime.validate()?;
    cfg.validate(0, 1)?;
    let taus = DistributionSpec::uniform01().sample(cfg.total_length, cfg.seed)?;
    let quantile = regime.innovation_quantile.quantile_fn()?;
    Ok(trim(two_regime_path(regime, &taus, quantile), cfg.burn_in))
}

/// Truncated two-sided MA expansion of a MAR model.
#[derive(Debug, Clone)]
pub struct MaCoefficients {
    /// Truncation order: coefficients run over offsets -k..=k.
    pub truncation: usize,
    /// Coefficient of eps_{t-i} stored at index `i + truncation`.
    pub coeffs: Vec<f64>,
    /// Geometric estimate of the total absolute mass beyond the truncation.
    pub tail_bound: f64,
}

impl MaCoefficients {
    /// a_i, the weight on eps_{t-i}: positive offsets are lags (causal side),
    /// negative offsets are leads (noncausal side).
    pub fn coeff(&self, offset: isize) -> f64 {
        let idx = offset + self.truncation as isize;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[idx as usize]
        }
    }
}

/// Laurent coefficients of 1 / (pi(L) phi(L^-1)) by power-series inversion
/// of each polynomial and convolution of the two one-sided expansions.
pub fn ma_coefficients(spec: &MarSpec, truncation: usize) -> Result<MaCoefficients> {
    if truncation < 1 {
        return Err(Error::Domain("truncation must be at least 1".into()));
    }
    spec.check_stationary()?;
    let buf = 2 * truncation + 64;
    let causal = invert_polynomial(&spec.pi, buf);
    let noncausal = invert_polynomial(&spec.phi, buf);
    let k = truncation as isize;
    let mut coeffs = vec![0.0; 2 * truncation + 1];
    for i in -k..=k {
        let mut acc = 0.0;
        for (j, d) in noncausal.iter().enumerate() {
            let ci = i + j as isize;
            if ci >= 0 && (ci as usize) < causal.len() {
                acc += causal[ci as usize] * d;
            }
        }
        coeffs[(i + k) as usize] = acc;
    }
    let rho = max_companion_modulus(&spec.pi).max(max_companion_modulus(&spec.phi));
    let edge = coeffs[0].abs().max(coeffs[2 * truncation].abs());
    let tail_bound = if rho < 1.0 { 2.0 * edge * rho / (1.0 - rho) } else { f64::INFINITY };
    Ok(MaCoefficients { truncation, coeffs, tail_bound })
}

// Power-series inverse of 1 - c1 z - ... - cm z^m up to `len` terms.
fn invert_polynomial(coeffs: &[f64], len: usize) -> Vec<f64> {
    let mut inv = vec![0.0; len];
    inv[0] = 1.0;
    for j in 1..len {
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            if k + 1 > j {
                break;
            }
            acc += c * inv[j - k - 1];
        }
        inv[j] = acc;
    }
    inv
}
