//! Random-walk Metropolis on a box with reflecting proposals.
//!
//! Targets have the form `exp(−τ·E(θ))` restricted to a box, where `E` is
//! a nonnegative energy (an empirical or population risk) and `τ` the
//! inverse temperature.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::StreamRng;
use crate::stats;

/// Uniform prior on a product of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPrior {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxPrior {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { context: "box bounds", expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(Error::EmptyInput("box prior needs at least one coordinate"));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(invalid(format!("empty or unbounded interval [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn log_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).ln()).sum()
    }

    /// Density `φ0 = 1/volume` of the uniform prior.
    pub fn density(&self) -> f64 {
        (-self.log_volume()).exp()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| (self.lo[i]..=self.hi[i]).contains(v))
    }

    /// Largest `max_i |x_i|` over the box.
    pub fn sup_abs(&self) -> f64 {
        self.lo.iter().chain(&self.hi).map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| rng.random_range(a..b)).collect()
    }

    /// Fold `x` back into `[lo_i, hi_i]` by mirror reflection at the faces.
    pub fn reflect(&self, i: usize, x: f64) -> f64 {
        let (lo, w) = (self.lo[i], self.width(i));
        let mut y = (x - lo).rem_euclid(2.0 * w);
        if y > w {
            y = 2.0 * w - y;
        }
        lo + y
    }
}

/// Length and tuning of one Metropolis chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total iterations including burn-in.
    pub length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Proposal standard deviation as a fraction of each box width;
    /// `None` means `0.2 / sqrt(dim)`.
    pub proposal_scale: Option<f64>,
    /// Adapt the scale toward [`TARGET_ACCEPTANCE`] during burn-in.
    pub adapt: bool,
}

pub const TARGET_ACCEPTANCE: f64 = 0.3;

/// Proposal scales are capped at one box width; beyond that reflection makes
/// larger steps pointless.
pub const MAX_SCALE: f64 = 1.0;

impl ChainConfig {
    pub fn new(length: usize, burn_in: usize, thinning: usize) -> Result<Self> {
        let c = Self { length, burn_in, thinning, proposal_scale: None, adapt: true };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.length {
            return Err(invalid(format!("burn-in {} must be below chain length {}", self.burn_in, self.length)));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning must be positive"));
        }
        if let Some(s) = self.proposal_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("proposal scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.length - self.burn_in).div_ceil(self.thinning)
    }

    pub fn initial_scale(&self, dim: usize) -> f64 {
        self.proposal_scale.unwrap_or(0.2 / (dim as f64).sqrt()).min(MAX_SCALE)
    }
}

/// Output of one chain: thinned post-burn-in draws with their energies.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
    /// Relative proposal scale used after burn-in.
    pub scale: f64,
}

impl ChainRun {
    /// The proposal spans at least half the box, so a high acceptance rate
    /// reflects a flat target rather than timid steps.
    pub fn scale_capped(&self) -> bool {
        self.scale >= 0.5 * MAX_SCALE
    }

    pub fn energy_ess(&self) -> f64 {
        stats::effective_sample_size(&self.energies)
    }
}

/// Reflecting random-walk Metropolis targeting `exp(−τ E(θ))` on the box.
///
/// Proposals add independent Gaussian noise to every coordinate and fold the
/// result back into the box; the folded kernel is symmetric, so the plain
/// Metropolis ratio applies.
pub fn metropolis<F>(
    prior: &BoxPrior,
    energy: F,
    tau: f64,
    config: &ChainConfig,
    start: Option<&[f64]>,
    rng: &mut StreamRng,
) -> Result<ChainRun>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid(format!("inverse temperature must be finite and nonnegative, got {tau}")));
    }
    let d = prior.dim();
    let mut x = match start {
        Some(s) if s.len() != d => {
            return Err(Error::DimensionMismatch { context: "chain start", expected: d, got: s.len() })
        }
        Some(s) if !prior.contains(s) => return Err(invalid("chain start lies outside the prior box")),
        Some(s) => s.to_vec(),
        None => prior.sample(rng),
    };
    let checked = |e: f64, at: &[f64]| {
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFinite(format!("energy {e} at {at:?}")))
        }
    };
    let mut e = checked(energy(&x), &x)?;
    let mut log_scale = config.initial_scale(d).ln();
    let mut y = vec![0.0; d];
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(config.kept());
    let mut energies = Vec::with_capacity(config.kept());

    for it in 0..config.length {
        let scale = log_scale.exp();
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            y[i] = prior.reflect(i, x[i] + scale * prior.width(i) * z);
        }
        let ey = checked(energy(&y), &y)?;
        let log_ratio = -tau * (ey - e);
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            std::mem::swap(&mut x, &mut y);
            e = ey;
        }
        if it < config.burn_in {
            if config.adapt {
                let gain = 1.0 / (1.0 + it as f64).powf(0.6);
                let a = if accept { 1.0 } else { 0.0 };
                log_scale = (log_scale + gain * (a - TARGET_ACCEPTANCE)).min(MAX_SCALE.ln());
            }
        } else {
            accepted += accept as usize;
            if (it - config.burn_in) % config.thinning == 0 {
                draws.push(x.clone());
                energies.push(e);
            }
        }
    }
    Ok(ChainRun {
        draws,
        energies,
        acceptance: accepted as f64 / (config.length - config.burn_in) as f64,
        scale: log_scale.exp(),
    })
}
