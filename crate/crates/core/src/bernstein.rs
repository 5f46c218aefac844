//! Bernstein-type moment constants `(L, b)` and Monte Carlo checks of the
//! moment generating function bound
//! `E exp{ω(ℓ − R)} ≤ exp{ω² L R / 2}` for `|ω| ≤ 1/(2b)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::LossModel;
use crate::rng;
use crate::stats::{self, KahanSum};

/// Number of bootstrap resamples behind every reported standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// How many standard errors of slack a Monte Carlo comparison allows.
pub const STDERR_SLACK: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinConstants {
    /// Variance proxy factor.
    #[serde(rename = "L")]
    pub l: f64,
    /// Scale of the admissible MGF band `|ω| ≤ 1/(2b)`.
    pub b: f64,
    /// Learning-rate cap `min(2/L, 1/(2b))`.
    pub omega_bar: f64,
}

impl BernsteinConstants {
    pub fn new(l: f64, b: f64) -> Result<Self> {
        if !(l > 0.0) || !(b > 0.0) {
            return Err(invalid(format!("L and b must be positive, got L={l}, b={b}")));
        }
        Ok(Self { l, b, omega_bar: (2.0 / l).min(1.0 / (2.0 * b)) })
    }

    /// Half-width of the admissible ω band.
    pub fn omega_band(&self) -> f64 {
        1.0 / (2.0 * self.b)
    }
}

/// Constants for the squared loss with predictors bounded by `b0` and
/// `σ²`-sub-Gaussian noise: `L = 32 B0² + 4σ²`,
/// `1/(2b) = min(3/(16 B0²), 1/(2σ²))` (the second term is +∞ when σ = 0).
pub fn squared_loss_constants(b0: f64, sigma: f64) -> Result<BernsteinConstants> {
    if !(b0 > 0.0) || !b0.is_finite() {
        return Err(invalid(format!("B0 must be positive, got {b0}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let l = 32.0 * b0 * b0 + 4.0 * sigma * sigma;
    let noise_term = if sigma == 0.0 { f64::INFINITY } else { 1.0 / (2.0 * sigma * sigma) };
    let half_inv_b = (3.0 / (16.0 * b0 * b0)).min(noise_term);
    BernsteinConstants::new(l, 1.0 / (2.0 * half_inv_b))
}

/// Constants for the logistic loss with logits bounded by `b3` under the
/// margin condition `τ ≤ η ≤ 1 − τ`: `b = log(1 + e^{B3})`, `L = 8/(τ(1−τ))`.
pub fn logistic_loss_constants(b3: f64, tau: f64) -> Result<BernsteinConstants> {
    if !(tau > 0.0 && tau < 0.5) {
        return Err(invalid(format!("tau must lie in (0, 1/2), got {tau}")));
    }
    if !(b3 >= 0.0) || !b3.is_finite() {
        return Err(invalid(format!("B3 must be nonnegative, got {b3}")));
    }
    let b = if b3 > 30.0 { b3 + (-b3).exp().ln_1p() } else { b3.exp().ln_1p() };
    BernsteinConstants::new(8.0 / (tau * (1.0 - tau)), b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfRow {
    pub omega: f64,
    /// `log` of the sample mean of `exp{ω(ℓ − R)}`.
    pub empirical: f64,
    /// `ω² L R / 2`.
    pub cap: f64,
    /// Bootstrap standard error of `empirical`.
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    pub population_risk: f64,
    pub rows: Vec<MgfRow>,
}

impl MgfReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Monte Carlo check of the MGF bound at `theta` for every ω in `omegas`.
///
/// All rows share one set of `samples` observations and one set of bootstrap
/// resamples drawn from stream `seed`.
pub fn empirical_mgf_check<M: LossModel>(
    model: &M,
    theta: &[f64],
    constants: &BernsteinConstants,
    omegas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MgfReport> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch { context: "parameter vector", expected: model.dim(), got: theta.len() });
    }
    let band = constants.omega_band();
    if let Some(w) = omegas.iter().find(|w| w.abs() > band * (1.0 + 1e-12)) {
        return Err(invalid(format!("omega {w} outside the admissible band |omega| <= 1/(2b) = {band}")));
    }
    let risk = model.population_risk(theta);
    let data = model.generate(samples, seed);
    let centered: Vec<f64> = data.observations.iter().map(|z| model.excess_loss(theta, z) - risk).collect();

    let k = omegas.len();
    // weights[i*k + j] = exp(ω_j (ℓ_i − R))
    let mut weights = vec![0.0; samples * k];
    for (i, c) in centered.iter().enumerate() {
        for (j, w) in omegas.iter().enumerate() {
            weights[i * k + j] = (w * c).exp();
        }
    }
    let mut full = vec![KahanSum::new(); k];
    for i in 0..samples {
        for j in 0..k {
            full[j].add(weights[i * k + j]);
        }
    }

    let mut boot_logs = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); k];
    let mut brng = rng::stream(seed, 1);
    let mut acc = vec![0.0; k];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..samples {
            let idx = brng.random_range(0..samples);
            let row = &weights[idx * k..(idx + 1) * k];
            for (a, w) in acc.iter_mut().zip(row) {
                *a += w;
            }
        }
        for j in 0..k {
            boot_logs[j].push((acc[j] / samples as f64).ln());
        }
    }

    let rows = omegas
        .iter()
        .enumerate()
        .map(|(j, &omega)| {
            let empirical = (full[j].value() / samples as f64).ln();
            let cap = omega * omega * constants.l * risk / 2.0;
            let stderr = stats::variance(&boot_logs[j]).sqrt();
            MgfRow { omega, empirical, cap, stderr, pass: empirical <= cap + STDERR_SLACK * stderr }
        })
        .collect();
    Ok(MgfReport { population_risk: risk, rows })
}

/// Outcome of checking the two one-sided exponential moment bounds
/// `E e^{−ωℓ} ≤ exp{−(1 − ωL/2) ω R}` and `E e^{ωℓ} ≤ exp{(1 + ωL/2) ω R}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedCheck {
    pub omega: f64,
    pub population_risk: f64,
    pub minus_mean: f64,
    pub minus_stderr: f64,
    pub minus_bound: f64,
    pub plus_mean: f64,
    pub plus_stderr: f64,
    pub plus_bound: f64,
    pub pass: bool,
}

pub fn two_sided_mgf_check<M: LossModel>(
    model: &M,
    theta: &[f64],
    constants: &BernsteinConstants,
    omega: f64,
    samples: usize,
    seed: u64,
) -> Result<TwoSidedCheck> {
    if !(omega > 0.0 && omega < constants.omega_bar) {
        return Err(invalid(format!("omega must lie in (0, {}), got {omega}", constants.omega_bar)));
    }
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let risk = model.population_risk(theta);
    let data = model.generate(samples, seed);
    let losses: Vec<f64> = data.observations.iter().map(|z| model.excess_loss(theta, z)).collect();
    let minus: Vec<f64> = losses.iter().map(|l| (-omega * l).exp()).collect();
    let plus: Vec<f64> = losses.iter().map(|l| (omega * l).exp()).collect();
    let se = |v: &[f64]| (stats::variance(v) / v.len() as f64).sqrt();
    let half = omega * constants.l / 2.0;
    let minus_bound = (-(1.0 - half) * omega * risk).exp();
    let plus_bound = ((1.0 + half) * omega * risk).exp();
    let (minus_mean, minus_stderr) = (stats::mean(&minus), se(&minus));
    let (plus_mean, plus_stderr) = (stats::mean(&plus), se(&plus));
    let pass = minus_mean <= minus_bound * (1.0 + STDERR_SLACK * minus_stderr)
        && plus_mean <= plus_bound * (1.0 + STDERR_SLACK * plus_stderr);
    Ok(TwoSidedCheck {
        omega,
        population_risk: risk,
        minus_mean,
        minus_stderr,
        minus_bound,
        plus_mean,
        plus_stderr,
        plus_bound,
        pass,
    })
}

/// `count` equally spaced ω values strictly inside `(−1/(2b), 1/(2b))`,
/// symmetric about zero (zero included when `count` is odd).
pub fn omega_grid(constants: &BernsteinConstants, count: usize) -> Vec<f64> {
    let band = constants.omega_band();
    (0..count)
        .map(|i| band * (2.0 * (i as f64 + 1.0) / (count as f64 + 1.0) - 1.0))
        .collect()
}
