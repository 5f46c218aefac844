//! Gibbs posterior sampling, posterior-averaged excess risk, the explicit
//! PAC-Bayes certificate and finite-grid checks of the variational
//! identities behind it.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinConstants;
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::mcmc::{self, BoxPrior, ChainConfig, ChainRun};
use crate::model::{Dataset, LossModel};
use crate::rlct::{rational_json, to_f64, CompletionDims, Rational};
use crate::rng;
use crate::stats::{self, KahanSum};

/// Chains whose post-burn-in acceptance falls below this are rejected.
pub const MIN_ACCEPTANCE: f64 = 0.02;

/// Sampler settings for `Π_n(dθ) ∝ exp(−ω n R_n(θ)) φ(dθ)` with `φ` uniform
/// on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub omega: f64,
    pub n: usize,
    pub prior: BoxPrior,
    /// Relative proposal scale; `None` means `0.2 / sqrt(dim)`.
    pub proposal_scale: Option<f64>,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub chains: usize,
}

impl GibbsConfig {
    pub fn validate(&self, constants: Option<&BernsteinConstants>) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(invalid(format!("omega must be nonnegative, got {}", self.omega)));
        }
        if let Some(c) = constants {
            if self.omega >= c.omega_bar {
                return Err(Error::Constraint(format!("omega = {} must be below omega_bar = {}", self.omega, c.omega_bar)));
            }
        }
        if self.n == 0 || self.chains == 0 {
            return Err(invalid("n and the number of chains must be positive"));
        }
        self.chain_config().validate()
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            length: self.chain_length,
            burn_in: self.burn_in,
            thinning: self.thinning,
            proposal_scale: self.proposal_scale,
            adapt: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance: f64,
    pub scale: f64,
    /// Effective sample size of the recorded empirical risks.
    pub ess: f64,
}

/// Thinned post-burn-in draws of every chain, in chain order.
#[derive(Debug, Clone)]
pub struct GibbsSamples {
    pub draws: Vec<Vec<f64>>,
    /// Empirical risk `R_n` at each draw.
    pub risks: Vec<f64>,
    pub chain_of: Vec<usize>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

impl GibbsSamples {
    pub fn mean_acceptance(&self) -> f64 {
        stats::mean(&self.diagnostics.iter().map(|d| d.acceptance).collect::<Vec<_>>())
    }

    pub fn total_ess(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.ess).sum()
    }

    /// Write `chain,iter,coord0..coordk,risk`; `iter` counts kept draws.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.draws.first().map_or(0, |d| d.len());
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend((0..dim).map(|i| format!("coord{i}")));
        header.push("risk".into());
        w.write_record(&header)?;
        let mut iter = 0usize;
        for (k, (x, r)) in self.draws.iter().zip(&self.risks).enumerate() {
            if k > 0 && self.chain_of[k] != self.chain_of[k - 1] {
                iter = 0;
            }
            let mut row = vec![self.chain_of[k].to_string(), iter.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.push(r.to_string());
            w.write_record(&row)?;
            iter += 1;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample the Gibbs posterior for an arbitrary empirical risk function.
///
/// Chain `c` runs on stream `c + 1` of `config.seed`, so results do not
/// depend on how chains are scheduled across threads.
pub fn sample_gibbs<F>(risk: F, config: &GibbsConfig) -> Result<GibbsSamples>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate(None)?;
    let chain = config.chain_config();
    let tau = config.omega * config.n as f64;
    let runs: Vec<ChainRun> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(config.seed, c as u64 + 1);
            mcmc::metropolis(&config.prior, &risk, tau, &chain, None, &mut r)
        })
        .collect::<Result<_>>()?;
    let mut out = GibbsSamples { draws: Vec::new(), risks: Vec::new(), chain_of: Vec::new(), diagnostics: Vec::new() };
    for (c, run) in runs.into_iter().enumerate() {
        if run.acceptance < MIN_ACCEPTANCE {
            return Err(Error::Diagnostic(format!("chain {c} acceptance rate {:.4} below {MIN_ACCEPTANCE}", run.acceptance)));
        }
        out.diagnostics.push(ChainDiagnostics { acceptance: run.acceptance, scale: run.scale, ess: run.energy_ess() });
        out.chain_of.extend(std::iter::repeat_n(c, run.draws.len()));
        out.draws.extend(run.draws);
        out.risks.extend(run.energies);
    }
    Ok(out)
}

/// Sample the Gibbs posterior `∝ exp(−ω n R_n(θ))` on the prior box, with
/// `R_n` computed from `data`.
pub fn sample_gibbs_posterior<M: LossModel>(model: &M, data: &Dataset<M::Obs>, config: &GibbsConfig) -> Result<GibbsSamples> {
    if data.is_empty() {
        return Err(Error::EmptyInput("Gibbs posterior needs data"));
    }
    if config.prior.dim() != model.dim() {
        return Err(Error::DimensionMismatch { context: "prior box", expected: model.dim(), got: config.prior.dim() });
    }
    let risk = model.empirical_risk_fn(data);
    sample_gibbs(risk, config)
}

/// Average of `risk` over the draws with a batch-means standard error.
pub fn mean_over_draws<F: Fn(&[f64]) -> f64>(draws: &[Vec<f64>], risk: F) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("no posterior draws"));
    }
    let values: Vec<f64> = draws.iter().map(|d| risk(d)).collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("risk value {v}")));
    }
    Ok(stats::batch_means(&values))
}

/// Posterior average of the population excess risk `∫ R(θ, θ⋆) Π_n(dθ)`.
pub fn posterior_mean_excess_risk<M: LossModel>(draws: &[Vec<f64>], model: &M) -> Result<(f64, f64)> {
    mean_over_draws(draws, |t| model.population_risk(t))
}

/// Where the `λ` of a certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlctSource {
    ClosedForm,
    DiscreteMin,
    ReluUpperBound,
    HalfDimension,
    Charts,
    Manual,
}

/// The evaluated right-hand side of the explicit PAC-Bayes bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    #[serde(with = "rational_json")]
    pub lambda: Rational,
    pub m: u32,
    #[serde(rename = "L")]
    pub l: f64,
    pub omega: f64,
    pub delta: f64,
    pub n: u64,
    pub c0: f64,
    pub bound: f64,
    pub rlct_source: RlctSource,
}

fn certificate_value(lambda: f64, m: u32, l: f64, omega: f64, n: u64, delta: f64, c0: f64) -> f64 {
    let nf = n as f64;
    let bracket = lambda * nf.ln() - (m as f64 - 1.0) * nf.ln().ln() + (2.0 / delta).ln() + c0;
    2.0 / ((1.0 - omega * l / 2.0) * omega * nf) * bracket.max(0.0)
}

impl BoundCertificate {
    pub fn recompute(&self) -> f64 {
        certificate_value(to_f64(&self.lambda), self.m, self.l, self.omega, self.n, self.delta, self.c0)
    }

    pub fn is_consistent(&self) -> bool {
        (self.recompute() - self.bound).abs() <= 1e-12 * self.bound.abs().max(1.0)
    }
}

/// `[2 / ((1 − ωL/2) ω n)] · max(0, λ log n − (m−1) log log n + log(2/δ) + c0)`.
#[allow(clippy::too_many_arguments)]
pub fn pac_bayes_certificate(
    lambda: Rational,
    m: u32,
    l: f64,
    omega: f64,
    n: u64,
    delta: f64,
    c0: f64,
    source: RlctSource,
) -> Result<BoundCertificate> {
    if lambda <= Rational::from_integer(0) || m == 0 {
        return Err(invalid(format!("need lambda > 0 and m >= 1, got ({lambda}, {m})")));
    }
    if !(l > 0.0 && omega > 0.0) {
        return Err(invalid("L and omega must be positive"));
    }
    if omega * l >= 2.0 {
        return Err(Error::Constraint(format!("omega = {omega} must be below 2/L = {}", 2.0 / l)));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Constraint(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n < 3 {
        return Err(invalid(format!("n must be at least 3, got {n}")));
    }
    if !c0.is_finite() {
        return Err(Error::NonFinite(format!("c0 = {c0}")));
    }
    let bound = certificate_value(to_f64(&lambda), m, l, omega, n, delta, c0);
    Ok(BoundCertificate { lambda, m, l, omega, delta, n, c0, bound, rlct_source: source })
}

/// The matrix-completion constant
/// `C1 = 9(H−r+2)²(d1+d2−r) log(2 r d1 d2) + H log|det P0 det Q0|
///      + (H(d1+d2−r)/2) log(3 + 3ωL/2) + ω σ²max(P0) σ²max(Q0)`.
pub fn completion_c1_constant(dims: &CompletionDims, omega: f64, l: f64, p0: &DMatrix<f64>, q0: &DMatrix<f64>) -> Result<f64> {
    let (d1, d2, h, r) = (dims.d1 as f64, dims.d2 as f64, dims.h as f64, dims.r as f64);
    if p0.shape() != (dims.d1 as usize, dims.d1 as usize) || q0.shape() != (dims.d2 as usize, dims.d2 as usize) {
        return Err(invalid("P0 must be d1×d1 and Q0 d2×d2"));
    }
    if !(omega >= 0.0 && l > 0.0) {
        return Err(invalid("omega must be nonnegative and L positive"));
    }
    let det = (p0.determinant() * q0.determinant()).abs();
    let (pmin, pmax) = linalg::extreme_singular_values(p0);
    let (qmin, qmax) = linalg::extreme_singular_values(q0);
    if det == 0.0 || pmin <= 1e-12 * pmax || qmin <= 1e-12 * qmax {
        return Err(Error::Singular("P0 and Q0 must be invertible".into()));
    }
    let counting = 9.0 * (h - r + 2.0).powi(2) * (d1 + d2 - r) * (2.0 * r * d1 * d2).ln();
    let volume = h * det.ln();
    let shell = h * (d1 + d2 - r) / 2.0 * (3.0 + 1.5 * omega * l).ln();
    let quadratic = omega * pmax * pmax * qmax * qmax;
    Ok(counting + volume + shell + quadratic)
}

fn check_probability(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(invalid(format!("{name} has a negative or nonfinite weight")));
    }
    let s: KahanSum = p.iter().copied().collect();
    if (s.value() - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("{name} sums to {} rather than 1", s.value())));
    }
    Ok(())
}

/// `KL(ρ ‖ π)` on a finite grid; `ρ` must vanish wherever `π` does.
pub fn kl_divergence(rho: &[f64], prior: &[f64]) -> Result<f64> {
    if rho.len() != prior.len() {
        return Err(Error::DimensionMismatch { context: "probability vectors", expected: prior.len(), got: rho.len() });
    }
    let mut acc = KahanSum::new();
    for (&r, &p) in rho.iter().zip(prior) {
        if r > 0.0 {
            if p == 0.0 {
                return Err(Error::Constraint("rho puts mass where the prior has none".into()));
            }
            acc.add(r * (r / p).ln());
        }
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `log Σ π_i e^{h_i} ≥ Σ ρ_i h_i − KL(ρ‖π)`.
pub fn dv_inequality_check(h: &[f64], prior: &[f64], rho: &[f64]) -> Result<DvCheck> {
    if h.len() != prior.len() || rho.len() != prior.len() {
        return Err(Error::DimensionMismatch { context: "grid vectors", expected: h.len(), got: prior.len().min(rho.len()) });
    }
    check_probability("prior", prior)?;
    check_probability("rho", rho)?;
    let terms: Vec<f64> = h.iter().zip(prior).filter(|(_, &p)| p > 0.0).map(|(v, p)| v + p.ln()).collect();
    let lhs = stats::log_sum_exp(&terms);
    let linear: KahanSum = rho.iter().zip(h).filter(|(&r, _)| r > 0.0).map(|(r, v)| r * v).collect();
    let rhs = linear.value() - kl_divergence(rho, prior)?;
    Ok(DvCheck { lhs, rhs, holds: lhs >= rhs - 1e-12 })
}

/// Gibbs weights `∝ π_i exp(−ω n r_i)`.
pub fn gibbs_weights(risk: &[f64], prior: &[f64], omega: f64, n: f64) -> Result<Vec<f64>> {
    if risk.len() != prior.len() {
        return Err(Error::DimensionMismatch { context: "grid vectors", expected: prior.len(), got: risk.len() });
    }
    check_probability("prior", prior)?;
    let logw: Vec<f64> = risk
        .iter()
        .zip(prior)
        .map(|(r, &p)| if p > 0.0 { p.ln() - omega * n * r } else { f64::NEG_INFINITY })
        .collect();
    let z = stats::log_sum_exp(&logw);
    Ok(logw.iter().map(|l| (l - z).exp()).collect())
}

/// `Σ ρ_i r_i + KL(ρ‖π)/(ω n)`.
pub fn variational_objective(rho: &[f64], risk: &[f64], prior: &[f64], omega: f64, n: f64) -> Result<f64> {
    let linear: KahanSum = rho.iter().zip(risk).filter(|(&r, _)| r > 0.0).map(|(r, v)| r * v).collect();
    Ok(linear.value() + kl_divergence(rho, prior)? / (omega * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalCheck {
    pub gibbs_weights: Vec<f64>,
    pub gibbs_objective: f64,
    pub best_competitor: f64,
    pub optimal: bool,
}

/// Compare the Gibbs weights against random competitors on the prior's
/// support: half are uniform Dirichlet draws, half are multiplicative
/// perturbations of the Gibbs weights themselves.
pub fn variational_optimality_check(
    risk: &[f64],
    prior: &[f64],
    omega: f64,
    n: f64,
    perturbations: usize,
    seed: u64,
) -> Result<VariationalCheck> {
    if !(omega > 0.0 && n > 0.0) {
        return Err(invalid("omega and n must be positive"));
    }
    let g = gibbs_weights(risk, prior, omega, n)?;
    let best = variational_objective(&g, risk, prior, omega, n)?;
    let mut r = rng::stream(seed, 0);
    let mut competitor = f64::INFINITY;
    for k in 0..perturbations {
        let raw: Vec<f64> = prior
            .iter()
            .zip(&g)
            .map(|(&p, &gi)| {
                if p == 0.0 {
                    0.0
                } else if k % 2 == 0 {
                    r.sample::<f64, _>(Exp1)
                } else {
                    gi * (0.3 * r.random_range(-1.0..1.0f64)).exp()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let rho: Vec<f64> = raw.iter().map(|v| v / total).collect();
        competitor = competitor.min(variational_objective(&rho, risk, prior, omega, n)?);
    }
    let tol = 1e-12 * best.abs().max(1.0);
    Ok(VariationalCheck { gibbs_weights: g, gibbs_objective: best, best_competitor: competitor, optimal: best <= competitor + tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NullModel;
    use crate::quadrature;
    use crate::rlct::completion_rlct;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn config(dim: usize, omega: f64, n: usize, seed: u64) -> GibbsConfig {
        GibbsConfig {
            omega,
            n,
            prior: BoxPrior::cube(dim, -1.0, 1.0).unwrap(),
            proposal_scale: None,
            chain_length: 25_000,
            burn_in: 5_000,
            thinning: 2,
            seed,
            chains: 2,
        }
    }

    #[test]
    fn certificate_examples() {
        let c = pac_bayes_certificate(Rational::from_integer(1), 1, 2.0, 0.25, 55, 2.0 / std::f64::consts::E.powi(2), 0.0, RlctSource::Manual).unwrap();
        assert!(close(c.bound, 2.0 / (0.75 * 0.25 * 55.0) * (55f64.ln() + 2.0), 1e-12));
        assert!(close(c.bound, 1.1651, 1e-4));
        let c = pac_bayes_certificate(Rational::from_integer(2), 2, 2.0, 0.1, 100, 0.2, 0.0, RlctSource::Manual).unwrap();
        assert!(close(c.bound, 2.2191, 1e-4), "{}", c.bound);
        assert!(c.is_consistent());
        let a = pac_bayes_certificate(Rational::from_integer(2), 2, 2.0, 0.1, 1000, 0.2, 0.0, RlctSource::Manual).unwrap();
        let b = pac_bayes_certificate(Rational::from_integer(2), 2, 2.0, 0.1, 2000, 0.2, 0.0, RlctSource::Manual).unwrap();
        assert!(b.bound < a.bound);
    }

    #[test]
    fn certificate_validation() {
        let one = Rational::from_integer(1);
        assert!(matches!(pac_bayes_certificate(one, 1, 2.0, 1.0, 100, 0.1, 0.0, RlctSource::Manual), Err(Error::Constraint(_))));
        assert!(matches!(pac_bayes_certificate(one, 1, 2.0, 0.1, 100, 1.5, 0.0, RlctSource::Manual), Err(Error::Constraint(_))));
        assert!(pac_bayes_certificate(one, 1, 2.0, 0.1, 2, 0.1, 0.0, RlctSource::Manual).is_err());
        let floored = pac_bayes_certificate(one, 1, 2.0, 0.1, 100, 0.1, -1e3, RlctSource::Manual).unwrap();
        assert_eq!(floored.bound, 0.0);
    }

    #[test]
    fn certificate_json_round_trip() {
        let c = pac_bayes_certificate(Rational::new(7, 4), 2, 36.0, 0.01, 1000, 0.05, 3.0, RlctSource::ClosedForm).unwrap();
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["lambda"]["num"], 7);
        assert_eq!(v["rlct_source"], "closed_form");
        assert!(v.get("L").is_some());
        let back: BoundCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
        assert!(back.is_consistent());
    }

    #[test]
    fn rlct_source_ordering() {
        let p = completion_rlct(2, 2, 2, 1).unwrap();
        let exact = pac_bayes_certificate(p.lambda, p.m, 36.0, 0.01, 1000, 0.05, 10.0, RlctSource::DiscreteMin).unwrap();
        let bic = pac_bayes_certificate(Rational::from_integer(4), 1, 36.0, 0.01, 1000, 0.05, 10.0, RlctSource::HalfDimension).unwrap();
        assert!(exact.bound <= bic.bound);
    }

    #[test]
    fn c1_examples() {
        let dims = CompletionDims::new(2, 2, 2, 1).unwrap();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let expected = 243.0 * 8f64.ln() + 3.0 * 8.4f64.ln() + 0.1;
        let c1 = completion_c1_constant(&dims, 0.1, 36.0, &i2, &i2).unwrap();
        assert!(close(c1, expected, 1e-10));
        assert!(close(c1, 511.78, 0.01));
        let c0 = completion_c1_constant(&dims, 0.0, 36.0, &i2, &i2).unwrap();
        assert!(close(c0, 243.0 * 8f64.ln() + 3.0 * 3f64.ln(), 1e-10));
        assert!(close(c0, 508.59, 0.02));
        let p = &i2 * 2.0;
        let scaled = completion_c1_constant(&dims, 0.1, 36.0, &p, &i2).unwrap();
        assert!(close(scaled - c1, 2.0 * 4f64.ln() + 0.1 * 3.0, 1e-10));
        assert!(matches!(completion_c1_constant(&dims, 0.1, 36.0, &DMatrix::zeros(2, 2), &i2), Err(Error::Singular(_))));
    }

    #[test]
    fn prior_recovered_at_zero_omega() {
        let model = NullModel { dim: 3 };
        let data = model.generate(10, 0);
        let s = sample_gibbs_posterior(&model, &data, &config(3, 0.0, 10, 4)).unwrap();
        for i in 0..3 {
            let xs: Vec<f64> = s.draws.iter().map(|d| d[i]).collect();
            let (m, se) = stats::batch_means(&xs);
            assert!(m.abs() < 4.0 * se, "coord {i}: {m} ± {se}");
        }
    }

    #[test]
    fn uniform_marginals_at_zero_omega() {
        let cfg = GibbsConfig { chain_length: 22_000, burn_in: 2_000, thinning: 2, chains: 1, ..config(2, 0.0, 10, 8) };
        let s = sample_gibbs(|_| 0.0, &cfg).unwrap();
        assert_eq!(s.draws.len(), 10_000);
        for i in 0..2 {
            let xs: Vec<f64> = s.draws.iter().map(|d| d[i]).collect();
            assert!(stats::ks_uniform(&xs, -1.0, 1.0) < 1.628 / 100.0);
        }
    }

    #[test]
    fn posterior_spread_matches_quadrature() {
        let cfg = GibbsConfig { omega: 1.0, n: 200, chains: 4, ..config(1, 1.0, 200, 12) };
        let s = sample_gibbs(|t| t[0] * t[0], &cfg).unwrap();
        let (gx, gw) = quadrature::composite_rule(-1.0, 1.0, 64, 8);
        let dens: Vec<f64> = gx.iter().map(|x| (-200.0 * x * x).exp()).collect();
        let z: f64 = dens.iter().zip(&gw).map(|(d, w)| d * w).sum();
        let var: f64 = gx.iter().zip(&dens).zip(&gw).map(|((x, d), w)| x * x * d * w).sum::<f64>() / z;
        let sq: Vec<f64> = s.draws.iter().map(|d| d[0] * d[0]).collect();
        let (m, se) = stats::batch_means(&sq);
        assert!((m - var).abs() < 3.0 * se, "{m} ± {se} vs {var}");
    }

    #[test]
    fn low_acceptance_is_a_diagnostic_failure() {
        let cfg = GibbsConfig { proposal_scale: Some(1.0), chain_length: 2_000, burn_in: 1, chains: 1, ..config(4, 1.0, 1_000_000, 1) };
        let err = sample_gibbs(|t| t.iter().map(|v| v.abs()).sum(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Diagnostic(_)), "{err:?}");
    }

    #[test]
    fn chains_are_reproducible_and_distinct() {
        let cfg = config(2, 1.0, 10, 3);
        let a = sample_gibbs(|t| t[0] * t[0] + t[1] * t[1], &cfg).unwrap();
        let b = sample_gibbs(|t| t[0] * t[0] + t[1] * t[1], &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let half = a.draws.len() / 2;
        assert_ne!(a.draws[..10], a.draws[half..half + 10]);
    }

    #[test]
    fn chain_csv_layout() {
        let cfg = GibbsConfig { chain_length: 30, burn_in: 10, thinning: 10, ..config(2, 0.0, 1, 0) };
        let s = sample_gibbs(|_| 0.0, &cfg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "chain,iter,coord0,coord1,risk");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("1,0,"));
    }

    #[test]
    fn posterior_mean_arithmetic() {
        let draws = vec![vec![0.2], vec![0.4]];
        let (m, _) = mean_over_draws(&draws, |t| t[0]).unwrap();
        assert!(close(m, 0.3, 1e-15));
        let same = vec![vec![1.0, 2.0]; 50];
        assert_eq!(mean_over_draws(&same, |_| 0.0).unwrap(), (0.0, 0.0));
        assert!(mean_over_draws(&[], |_| 0.0).is_err());
    }

    #[test]
    fn dv_examples() {
        let prior = vec![0.25; 4];
        let rho = vec![0.1, 0.2, 0.3, 0.4];
        let c = dv_inequality_check(&[1.5; 4], &prior, &rho).unwrap();
        assert!(close(c.lhs, 1.5, 1e-14));
        assert!(c.rhs <= 1.5 && c.holds);
        let h: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let p = vec![0.1; 10];
        let tilt = gibbs_weights(&h.iter().map(|v| -v).collect::<Vec<_>>(), &p, 1.0, 1.0).unwrap();
        let c = dv_inequality_check(&h, &p, &tilt).unwrap();
        assert!(close(c.lhs, c.rhs, 1e-12));
        let bad = dv_inequality_check(&[0.0, 0.0], &[1.0, 0.0], &[0.5, 0.5]);
        assert!(matches!(bad, Err(Error::Constraint(_))));
        assert!(dv_inequality_check(&[0.0, 0.0], &[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn variational_examples() {
        let prior = vec![0.2; 5];
        let c = variational_optimality_check(&[0.7; 5], &prior, 0.5, 10.0, 20, 1).unwrap();
        assert!(c.gibbs_weights.iter().all(|w| close(*w, 0.2, 1e-15)));
        assert!(close(c.gibbs_objective, 0.7, 1e-14));
        assert!(c.optimal);
        // two points, prior (1/2, 1/2), risks (0, 1), ωn = 1: ρ = (e, 1)/(1 + e)
        let c = variational_optimality_check(&[0.0, 1.0], &[0.5, 0.5], 1.0, 1.0, 10, 2).unwrap();
        let e = std::f64::consts::E;
        assert!(close(c.gibbs_weights[0], e / (1.0 + e), 1e-15));
        // the optimum equals −log Σ π e^{−r} = −log((1 + 1/e)/2)
        assert!(close(c.gibbs_objective, -((1.0 + 1.0 / e) / 2.0).ln(), 1e-12));
    }
}
