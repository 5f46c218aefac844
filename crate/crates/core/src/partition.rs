//! Estimates of `−log Z(n)` with `Z(n) = ∫ exp(−nβ R(θ)) φ(dθ)`, the
//! state-density lower bound for normal-crossing integrals, and regression
//! of `−log Z(n)` on `log n` to recover the RLCT.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mcmc::{self, BoxPrior, ChainConfig};
use crate::quadrature;
use crate::rlct::{self, Rational};
use crate::rng;
use crate::stats::{self, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Thermo,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Thermo => "thermo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub n: f64,
    pub beta: f64,
    pub neg_log_z: f64,
    pub std_err: f64,
    pub method: Method,
}

/// Write estimates as CSV with header `n,beta,neg_log_z,std_err,method`.
pub fn write_estimates_csv<W: Write>(estimates: &[PartitionEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "beta", "neg_log_z", "std_err", "method"])?;
    for e in estimates {
        w.write_record([e.n.to_string(), e.beta.to_string(), e.neg_log_z.to_string(), e.std_err.to_string(), e.method.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Order of the Gauss-Legendre rule on each panel.
const PANEL_ORDER: usize = 8;
/// Panel edges sit at `(k/P)^GRADE`, crowding nodes toward the origin where
/// normal-crossing integrands concentrate.
const GRADE: i32 = 3;
const REFINE_TOL: f64 = 1e-6;
const MAX_TENSOR_POINTS: usize = 1 << 24;

fn graded_rule(points_per_axis: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = points_per_axis / PANEL_ORDER;
    let (gx, gw) = quadrature::gauss_legendre(PANEL_ORDER);
    let edge = |k: usize| (k as f64 / panels as f64).powi(GRADE);
    let mut nodes = Vec::with_capacity(points_per_axis);
    let mut weights = Vec::with_capacity(points_per_axis);
    for k in 0..panels {
        let (a, b) = (edge(k), edge(k + 1));
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

fn tensor_integral<F>(risk: &F, h: &[u32], scale: f64, points_per_axis: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let (nodes, weights) = graded_rule(points_per_axis);
    let mut acc = KahanSum::new();
    let mut bad = None;
    quadrature::for_each_tensor_point(h.len(), &nodes, &weights, |u, w| {
        let r = risk(u);
        let jac: f64 = u.iter().zip(h).map(|(x, &e)| x.powi(e as i32)).product();
        let v = w * jac * (-scale * r).exp();
        if v.is_finite() && r.is_finite() {
            acc.add(v);
        } else if bad.is_none() {
            bad = Some(format!("integrand {v} (risk {r}) at {u:?}"));
        }
    });
    match bad {
        Some(msg) => Err(Error::NonFinite(msg)),
        None => Ok(acc.value()),
    }
}

/// `−log ∫_{[0,1]^d} exp(−nβ·risk(u)) ∏ u_j^{h_j} du` on a tensor grid of
/// composite Gauss-Legendre panels, `d = h.len() ≤ 3`.
///
/// The grid starts at `points_per_axis` (rounded up to whole panels) and
/// doubles until two successive values differ by less than 1e-6.
pub fn neg_log_z_quadrature<F>(risk: F, h: &[u32], beta: f64, n: f64, points_per_axis: usize) -> Result<PartitionEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let d = h.len();
    if d == 0 || d > 3 {
        return Err(invalid(format!("quadrature supports 1 to 3 dimensions, got {d}")));
    }
    if points_per_axis < 64 {
        return Err(invalid(format!("need at least 64 points per axis, got {points_per_axis}")));
    }
    if !(beta > 0.0 && n > 0.0) {
        return Err(invalid("beta and n must be positive"));
    }
    let scale = n * beta;
    let mut p = points_per_axis.div_ceil(PANEL_ORDER) * PANEL_ORDER;
    let mut prev = -tensor_integral(&risk, h, scale, p)?.ln();
    loop {
        let next_p = 2 * p;
        if next_p.pow(d as u32) > MAX_TENSOR_POINTS {
            return Err(Error::NotConverged(format!("quadrature still moving at {p} points per axis")));
        }
        let z = tensor_integral(&risk, h, scale, next_p)?;
        let cur = -z.ln();
        if !cur.is_finite() {
            return Err(Error::NonFinite(format!("Z(n) = {z}")));
        }
        if (cur - prev).abs() < REFINE_TOL {
            return Ok(PartitionEstimate { n, beta, neg_log_z: cur, std_err: 0.0, method: Method::Quadrature });
        }
        prev = cur;
        p = next_p;
    }
}

/// One block of normal-crossing exponents: `u^{2k}` in the risk and `u^h`
/// in the Jacobian.
fn pole(k: u32, h: u32) -> Option<Rational> {
    (k > 0).then(|| Rational::new(h as i64 + 1, 2 * k as i64))
}

/// Lower bound on `Z(n) = ∫_{[0,1]^d} exp(−nβ ∏u^{2k}) ∏u^h du` for a
/// normal-crossing integrand.
///
/// `(k, h)` lists the coordinates whose poles all equal `λ`; `(k_rest,
/// h_rest)` the coordinates with strictly larger poles. The value is
/// `(log n)^{m−1} n^{−λ} ∏_j 1/(h'_j+1) / (2^m (m−1)! ∏k_i) / (λ e^β)` with
/// `m = k.len()`, the product over `j` running over every remaining
/// coordinate.
pub fn state_density_lower_bound(k: &[u32], h: &[u32], k_rest: &[u32], h_rest: &[u32], beta: f64, n: f64) -> Result<f64> {
    if k.len() != h.len() || k_rest.len() != h_rest.len() {
        return Err(invalid("exponent blocks must pair up"));
    }
    if k.is_empty() {
        return Err(Error::EmptyInput("need at least one coordinate attaining the pole"));
    }
    if !(n > 1.0) || !(beta > 0.0) {
        return Err(invalid("need n > 1 and beta > 0"));
    }
    let lambda = pole(k[0], h[0]).ok_or_else(|| Error::Constraint("leading block has k = 0".into()))?;
    for (&ki, &hi) in k.iter().zip(h) {
        if pole(ki, hi) != Some(lambda) {
            return Err(Error::Constraint(format!("pole ({hi}+1)/(2·{ki}) differs from {lambda}")));
        }
    }
    for (&ki, &hi) in k_rest.iter().zip(h_rest) {
        if let Some(p) = pole(ki, hi) {
            if p <= lambda {
                return Err(Error::Constraint(format!("remaining pole {p} is not above {lambda}")));
            }
        }
    }
    let m = k.len() as i32;
    let lam = rlct::to_f64(&lambda);
    let factorial: f64 = (1..m).map(|i| i as f64).product();
    let kprod: f64 = k.iter().map(|&v| v as f64).product();
    let hprod: f64 = h_rest.iter().map(|&v| v as f64 + 1.0).product();
    let ln = n.ln();
    Ok(ln.powi(m - 1) * n.powf(-lam) / hprod / (2f64.powi(m) * factorial * kprod) / (lam * beta.exp()))
}

/// Inverse-temperature path `0 = s_0 < … < s_T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule(Vec<f64>);

pub const MIN_RUNGS: usize = 8;

impl Schedule {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < MIN_RUNGS {
            return Err(invalid(format!("schedule needs at least {MIN_RUNGS} rungs, got {}", points.len())));
        }
        if points[0] != 0.0 || *points.last().expect("nonempty") != 1.0 {
            return Err(invalid("schedule must run from 0 to 1"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("schedule must be strictly increasing"));
        }
        Ok(Self(points))
    }

    /// `s_t = (t/T)^p` for `t = 0..=T`.
    pub fn power(steps: usize, exponent: f64) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("need at least one step"));
        }
        Self::from_points((0..=steps).map(|t| (t as f64 / steps as f64).powf(exponent)).collect())
    }

    /// `0` followed by `rungs − 1` points spaced geometrically from `s_min` to 1.
    pub fn geometric(rungs: usize, s_min: f64) -> Result<Self> {
        if rungs < 3 || !(s_min > 0.0 && s_min < 1.0) {
            return Err(invalid("geometric schedule needs at least 3 rungs and 0 < s_min < 1"));
        }
        let k = rungs - 2;
        let mut pts = vec![0.0];
        pts.extend((0..=k).map(|i| s_min.powf(1.0 - i as f64 / k as f64)));
        *pts.last_mut().expect("nonempty") = 1.0;
        Self::from_points(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    /// Trapezoid weight of each rung.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let s = &self.0;
        let t = s.len();
        (0..t)
            .map(|i| {
                let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
                let right = if i + 1 < t { s[i + 1] - s[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::power(16, 2.0).expect("valid default")
    }
}

/// Rung-level output of thermodynamic integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub s: f64,
    /// Mean of `nβ R` under the tempered target.
    pub mean_energy: f64,
    pub std_err: f64,
    pub acceptance: f64,
}

pub const MIN_ACCEPTANCE: f64 = 0.05;
pub const MAX_ACCEPTANCE: f64 = 0.95;

/// `−log Z(n)` by path sampling: `∫_0^1 E_s[nβ R] ds` where `E_s` is the
/// expectation under `exp(−s nβ R) φ`, evaluated with the trapezoid rule.
///
/// The `s = 0` rung draws independently from the prior; every other rung
/// runs its own Metropolis chain on a stream derived from `seed`. A rung
/// whose acceptance rate falls below 0.05, or exceeds 0.95 while the
/// proposal is still below its maximal scale, is a diagnostic failure.
pub fn thermo_integration_neg_log_z<F>(
    risk: F,
    prior: &BoxPrior,
    beta: f64,
    n: f64,
    schedule: &Schedule,
    chain: &ChainConfig,
    seed: u64,
) -> Result<(PartitionEstimate, Vec<RungSummary>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    chain.validate()?;
    if chain.length - chain.burn_in < 1000 {
        return Err(invalid("thermodynamic integration needs at least 1000 post-burn-in iterations per rung"));
    }
    if !(beta > 0.0 && n > 0.0) {
        return Err(invalid("beta and n must be positive"));
    }
    let scale = n * beta;
    let rungs: Vec<RungSummary> = schedule
        .points()
        .par_iter()
        .enumerate()
        .map(|(t, &s)| {
            let mut r = rng::stream(seed, t as u64);
            if s == 0.0 {
                let mut energies = Vec::with_capacity(chain.length - chain.burn_in);
                for _ in 0..chain.length - chain.burn_in {
                    let x = prior.sample(&mut r);
                    let e = risk(&x);
                    if !e.is_finite() {
                        return Err(Error::NonFinite(format!("risk {e} at {x:?}")));
                    }
                    energies.push(scale * e);
                }
                let (m, se) = stats::batch_means(&energies);
                return Ok(RungSummary { s, mean_energy: m, std_err: se, acceptance: 1.0 });
            }
            let run = mcmc::metropolis(prior, &risk, s * scale, chain, None, &mut r)?;
            if run.acceptance < MIN_ACCEPTANCE || (run.acceptance > MAX_ACCEPTANCE && !run.scale_capped()) {
                return Err(Error::Diagnostic(format!(
                    "acceptance rate {:.3} at s = {s:.3e} outside [{MIN_ACCEPTANCE}, {MAX_ACCEPTANCE}]",
                    run.acceptance
                )));
            }
            let scaled: Vec<f64> = run.energies.iter().map(|e| scale * e).collect();
            let (m, se) = stats::batch_means(&scaled);
            Ok(RungSummary { s, mean_energy: m, std_err: se, acceptance: run.acceptance })
        })
        .collect::<Result<_>>()?;
    let weights = schedule.trapezoid_weights();
    let mut total = KahanSum::new();
    let mut var = KahanSum::new();
    for (w, r) in weights.iter().zip(&rungs) {
        total.add(w * r.mean_energy);
        var.add((w * r.std_err).powi(2));
    }
    let est = PartitionEstimate { n, beta, neg_log_z: total.value(), std_err: var.value().sqrt(), method: Method::Thermo };
    Ok((est, rungs))
}

/// Least-squares fit of `−log Z(n) ≈ λ log n − c log log n + a`.
///
/// `loglog_coef` is the coefficient `c` on `−log log n`, i.e. the estimate of
/// `m − 1`; it is zero when the regressor is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlctFit {
    pub lambda_hat: f64,
    pub loglog_coef: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// Regress `neg_log_z` on `[log n, (−log log n), 1]`, weighting by
/// `1/std_err²` when every standard error is positive.
pub fn fit_rlct_from_partition(estimates: &[PartitionEstimate], include_loglog: bool) -> Result<RlctFit> {
    if estimates.len() < 3 {
        return Err(invalid(format!("need at least 3 estimates, got {}", estimates.len())));
    }
    let mut pts: Vec<PartitionEstimate> = estimates.to_vec();
    pts.sort_by(|a, b| a.n.total_cmp(&b.n));
    if let Some(p) = pts.iter().find(|p| !(p.n > std::f64::consts::E)) {
        return Err(invalid(format!("all n must exceed e, got {}", p.n)));
    }
    if pts.windows(2).any(|w| w[0].n == w[1].n) {
        return Err(Error::RankDeficient("duplicated n values".into()));
    }
    let cols = if include_loglog { 3 } else { 2 };
    if pts.len() < cols {
        return Err(Error::RankDeficient(format!("{} points for {cols} coefficients", pts.len())));
    }
    let weighted = pts.iter().all(|p| p.std_err > 0.0);
    let rows = pts.len();
    let mut x = DMatrix::<f64>::zeros(rows, cols);
    let mut y = DVector::<f64>::zeros(rows);
    for (i, p) in pts.iter().enumerate() {
        let w = if weighted { 1.0 / p.std_err } else { 1.0 };
        x[(i, 0)] = w * p.n.ln();
        if include_loglog {
            x[(i, 1)] = -w * p.n.ln().ln();
        }
        x[(i, cols - 1)] = w;
        y[i] = w * p.neg_log_z;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= smax * 1e-12) {
        return Err(Error::RankDeficient("design matrix is singular".into()));
    }
    let beta = svd.solve(&y, smax * 1e-14).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let (lambda_hat, loglog_coef, intercept) = if include_loglog { (beta[0], beta[1], beta[2]) } else { (beta[0], 0.0, beta[1]) };
    let resid: KahanSum = pts
        .iter()
        .map(|p| {
            let ln = p.n.ln();
            let fit = lambda_hat * ln - loglog_coef * if include_loglog { ln.ln() } else { 0.0 } + intercept;
            (p.neg_log_z - fit).powi(2)
        })
        .collect();
    Ok(RlctFit { lambda_hat, loglog_coef, intercept, residual_rms: (resid.value() / rows as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::erf::erf;
    use std::f64::consts::{E, PI};

    fn quad(h: &[u32], risk: impl Fn(&[f64]) -> f64, n: f64) -> f64 {
        neg_log_z_quadrature(risk, h, 1.0, n, 64).unwrap().neg_log_z
    }

    #[test]
    fn flat_integral_is_one() {
        assert!(quad(&[0, 0], |_| 0.0, 10.0).abs() < 1e-12);
        // ∫u² du = 1/3
        assert!((quad(&[2], |_| 0.0, 10.0) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_closed_form() {
        let z = PI.sqrt() / 4.0 * erf(2.0);
        assert!((quad(&[0], |u| u[0] * u[0], 4.0) + z.ln()).abs() < 1e-9);
        assert!((quad(&[0], |u| u[0] * u[0], 4.0) - 0.8187).abs() < 1e-4);
    }

    #[test]
    fn substitution_closed_form() {
        let z = (1.0 - (-E).exp()) / (2.0 * E);
        assert!((quad(&[1], |u| u[0] * u[0], E) + z.ln()).abs() < 1e-9);
        assert!(((-quad(&[1], |u| u[0] * u[0], E)).exp() - 0.17177).abs() < 5e-5);
    }

    #[test]
    fn three_dimensional_product() {
        // separable integrand: Z = (√π/(2√n) erf(√n))³
        let n: f64 = 9.0;
        let z1 = PI.sqrt() / (2.0 * n.sqrt()) * erf(n.sqrt());
        let got = quad(&[0, 0, 0], |u| u.iter().map(|v| v * v).sum(), n);
        assert!((got + 3.0 * z1.ln()).abs() < 1e-8);
    }

    #[test]
    fn quadrature_validation() {
        assert!(neg_log_z_quadrature(|_| 0.0, &[0; 4], 1.0, 1.0, 64).is_err());
        assert!(neg_log_z_quadrature(|_| 0.0, &[0], 1.0, 1.0, 32).is_err());
        let err = neg_log_z_quadrature(|_| f64::NAN, &[0], 1.0, 1.0, 64).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn lower_bound_examples() {
        let b = state_density_lower_bound(&[1], &[1], &[], &[], 1.0, E).unwrap();
        assert!((b - 1.0 / (2.0 * E * E)).abs() < 1e-15);
        assert!(b <= (-quad(&[1], |u| u[0] * u[0], E)).exp());
        let b = state_density_lower_bound(&[1], &[0], &[], &[], 1.0, 4.0).unwrap();
        assert!((b - 1.0 / (2.0 * E)).abs() < 1e-15);
        assert!(b <= (-quad(&[0], |u| u[0] * u[0], 4.0)).exp());
        let n = E * E;
        let b = state_density_lower_bound(&[1, 1], &[0, 0], &[], &[], 1.0, n).unwrap();
        assert!((b - 1.0 / (E * E)).abs() < 1e-15);
        assert!(b <= (-quad(&[0, 0], |u| (u[0] * u[1]).powi(2), n)).exp());
    }

    #[test]
    fn lower_bound_rejects_bad_exponents() {
        assert!(matches!(state_density_lower_bound(&[1, 1], &[0, 1], &[], &[], 1.0, 3.0), Err(Error::Constraint(_))));
        assert!(matches!(state_density_lower_bound(&[1], &[0], &[1], &[0], 1.0, 3.0), Err(Error::Constraint(_))));
        assert!(state_density_lower_bound(&[1], &[0], &[0], &[4], 1.0, 3.0).is_ok());
        assert!(state_density_lower_bound(&[1], &[0], &[], &[], 1.0, 1.0).is_err());
    }

    #[test]
    fn schedules() {
        let d = Schedule::default();
        assert_eq!(d.points().len(), 17);
        assert_eq!(d.points()[1], 1.0 / 256.0);
        let w = d.trapezoid_weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = Schedule::geometric(20, 1e-4).unwrap();
        assert_eq!(g.points().len(), 20);
        assert_eq!(g.points()[1], 1e-4);
        assert!(Schedule::from_points(vec![0.0, 0.5, 1.0]).is_err());
        assert!(Schedule::from_points(vec![0.0, 0.1, 0.2, 0.3, 0.3, 0.5, 0.6, 1.0]).is_err());
    }

    fn chain() -> ChainConfig {
        ChainConfig::new(12_000, 2_000, 1).unwrap()
    }

    #[test]
    fn thermo_flat_risk_is_zero() {
        let prior = BoxPrior::cube(3, 0.0, 1.0).unwrap();
        let (est, _) = thermo_integration_neg_log_z(|_| 0.0, &prior, 1.0, 100.0, &Schedule::default(), &chain(), 1).unwrap();
        assert_eq!(est.neg_log_z, 0.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn thermo_matches_quadrature_in_one_dimension() {
        let prior = BoxPrior::cube(1, 0.0, 1.0).unwrap();
        let exact = quad(&[0], |u| u[0] * u[0], 4.0);
        let sched = Schedule::power(32, 2.0).unwrap();
        let (est, _) = thermo_integration_neg_log_z(|u: &[f64]| u[0] * u[0], &prior, 1.0, 4.0, &sched, &chain(), 7).unwrap();
        assert!((est.neg_log_z - exact).abs() < 3.0 * est.std_err + 2e-3, "{est:?} vs {exact}");
    }

    #[test]
    fn thermo_increases_with_n() {
        let prior = BoxPrior::cube(1, 0.0, 1.0).unwrap();
        let sched = Schedule::geometric(24, 1e-5).unwrap();
        let f = |u: &[f64]| u[0] * u[0];
        let (a, _) = thermo_integration_neg_log_z(f, &prior, 1.0, 100.0, &sched, &chain(), 2).unwrap();
        let (b, _) = thermo_integration_neg_log_z(f, &prior, 1.0, 1000.0, &sched, &chain(), 2).unwrap();
        assert!(b.neg_log_z > a.neg_log_z);
    }

    #[test]
    fn thermo_rejects_short_chains() {
        let prior = BoxPrior::cube(1, 0.0, 1.0).unwrap();
        let short = ChainConfig::new(1_500, 600, 1).unwrap();
        assert!(thermo_integration_neg_log_z(|_| 0.0, &prior, 1.0, 1.0, &Schedule::default(), &short, 0).is_err());
    }

    #[test]
    fn thermo_flags_stuck_chains() {
        let prior = BoxPrior::cube(1, 0.0, 1.0).unwrap();
        let cfg = ChainConfig { length: 3000, burn_in: 1000, thinning: 1, proposal_scale: Some(1.0), adapt: false };
        let err = thermo_integration_neg_log_z(|u: &[f64]| u[0], &prior, 1.0, 1e6, &Schedule::default(), &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Diagnostic(_)));
    }

    fn synthetic(ns: &[f64], f: impl Fn(f64) -> f64) -> Vec<PartitionEstimate> {
        ns.iter().map(|&n| PartitionEstimate { n, beta: 1.0, neg_log_z: f(n), std_err: 0.0, method: Method::Quadrature }).collect()
    }

    #[test]
    fn exact_linear_recovery() {
        let est = synthetic(&[10.0, 100.0, 1000.0], |n| 2.0 * n.ln() + 5.0);
        let fit = fit_rlct_from_partition(&est, false).unwrap();
        assert!((fit.lambda_hat - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 5.0).abs() < 1e-11);
        assert!(fit.residual_rms < 1e-11);
        let est = synthetic(&[10.0, 100.0, 1000.0], |n| 1.5 * n.ln() - n.ln().ln() + 3.0);
        let fit = fit_rlct_from_partition(&est, true).unwrap();
        assert!((fit.lambda_hat - 1.5).abs() < 1e-10);
        assert!((fit.loglog_coef - 1.0).abs() < 1e-10);
        assert!((fit.intercept - 3.0).abs() < 1e-10);
    }

    #[test]
    fn fit_errors() {
        let dup = synthetic(&[10.0, 10.0, 100.0], |n| n.ln());
        assert!(matches!(fit_rlct_from_partition(&dup, false), Err(Error::RankDeficient(_))));
        assert!(fit_rlct_from_partition(&synthetic(&[10.0, 100.0], |n| n.ln()), false).is_err());
        assert!(fit_rlct_from_partition(&synthetic(&[2.0, 10.0, 100.0], |n| n.ln()), false).is_err());
    }

    #[test]
    fn quadrature_slope_for_weighted_gaussian() {
        let est: Vec<_> = (2..=8)
            .map(|k| neg_log_z_quadrature(|u: &[f64]| u[0] * u[0], &[1], 1.0, (k as f64).exp(), 64).unwrap())
            .collect();
        let fit = fit_rlct_from_partition(&est, false).unwrap();
        assert!((fit.lambda_hat - 1.0).abs() < 0.03, "{fit:?}");
    }

    #[test]
    fn normal_crossing_drift_is_bounded() {
        let cases: [(&[u32], &[u32]); 4] = [(&[1], &[0]), (&[1], &[1]), (&[2], &[1]), (&[1, 0], &[0, 2])];
        for (k, h) in cases {
            let chart = rlct::NormalCrossingChart::new(k.to_vec(), h.to_vec()).unwrap();
            let lam = rlct::to_f64(&rlct::normal_crossing_rlct(&[chart]).unwrap().lambda);
            let risk = |u: &[f64]| u.iter().zip(k).map(|(x, &kk)| x.powi(2 * kk as i32)).product::<f64>();
            let vals: Vec<f64> = (2..=8)
                .map(|e| {
                    let n = (e as f64).exp();
                    neg_log_z_quadrature(risk, h, 1.0, n, 64).unwrap().neg_log_z - lam * n.ln()
                })
                .collect();
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 0.4, "k={k:?} h={h:?} spread {spread}");
        }
    }

    proptest! {
        #[test]
        fn fit_is_order_invariant(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(), noise in proptest::collection::vec(-0.1f64..0.1, 6)) {
            let ns = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0];
            let est: Vec<_> = ns.iter().zip(&noise).map(|(&n, e)| PartitionEstimate {
                n, beta: 1.0, neg_log_z: 1.7 * n.ln() + e, std_err: 0.05 + e.abs(), method: Method::Thermo,
            }).collect();
            let shuffled: Vec<_> = perm.iter().map(|&i| est[i]).collect();
            let a = fit_rlct_from_partition(&est, true).unwrap();
            let b = fit_rlct_from_partition(&shuffled, true).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
