//! Replicated runs of the Gibbs posterior over a grid of sample sizes:
//! posterior-mean excess risk, certificate and optional `−log Z(n)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gibbs::{self, GibbsConfig};
use crate::mcmc::ChainConfig;
use crate::model::LossModel;
use crate::partition::{self, Method, PartitionEstimate, RlctFit, Schedule};
use crate::rng;
use crate::stats;

/// Thermodynamic-integration settings for `−log ∫ exp(−βn R) dφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoSpec {
    pub beta: f64,
    pub schedule: Schedule,
    pub chain: ChainConfig,
}

/// One `(n, replicate)` cell. A failed replicate keeps its slot with NaN
/// values and the error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub replicate: usize,
    pub post_risk: f64,
    pub post_risk_se: f64,
    pub bound: f64,
    pub neg_log_z: f64,
    pub neg_log_z_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScalingRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Seeds for the data and the sampler of one cell, independent of how cells
/// are scheduled.
pub fn cell_seeds(seed: u64, n: usize, replicate: usize) -> (u64, u64, u64) {
    let path = [n as u64, replicate as u64];
    (
        rng::derive_seed(seed, &[path[0], path[1], 0]),
        rng::derive_seed(seed, &[path[0], path[1], 1]),
        rng::derive_seed(seed, &[path[0], path[1], 2]),
    )
}

/// Generate data, sample the posterior and return `(mean, stderr)` of the
/// population excess risk.
pub fn posterior_risk_at<M: LossModel>(model: &M, template: &GibbsConfig, n: usize, data_seed: u64, chain_seed: u64) -> Result<(f64, f64)> {
    let data = model.generate(n, data_seed);
    let config = GibbsConfig { n, seed: chain_seed, ..template.clone() };
    let samples = gibbs::sample_gibbs_posterior(model, &data, &config)?;
    gibbs::posterior_mean_excess_risk(&samples.draws, model)
}

/// Run every `(n, replicate)` cell. `bound(n)` supplies the certificate
/// value; `thermo` enables a `−log Z(n)` estimate per cell.
pub fn scaling_study<M, B>(
    model: &M,
    template: &GibbsConfig,
    ns: &[usize],
    replicates: usize,
    seed: u64,
    bound: B,
    thermo: Option<&ThermoSpec>,
) -> Result<Vec<ScalingRow>>
where
    M: LossModel,
    B: Fn(usize) -> Result<f64> + Sync,
{
    if ns.is_empty() || replicates == 0 {
        return Err(invalid("need at least one n and one replicate"));
    }
    let cells: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..replicates).map(move |r| (n, r))).collect();
    let rows = cells
        .par_iter()
        .map(|&(n, replicate)| {
            let (data_seed, chain_seed, thermo_seed) = cell_seeds(seed, n, replicate);
            let run = || -> Result<ScalingRow> {
                let (post_risk, post_risk_se) = posterior_risk_at(model, template, n, data_seed, chain_seed)?;
                let b = bound(n)?;
                let (neg_log_z, neg_log_z_se) = match thermo {
                    Some(t) => {
                        let (est, _) = partition::thermo_integration_neg_log_z(
                            |x: &[f64]| model.population_risk(x),
                            &template.prior,
                            t.beta,
                            n as f64,
                            &t.schedule,
                            &t.chain,
                            thermo_seed,
                        )?;
                        (est.neg_log_z, est.std_err)
                    }
                    None => (f64::NAN, f64::NAN),
                };
                Ok(ScalingRow { n, replicate, post_risk, post_risk_se, bound: b, neg_log_z, neg_log_z_se, error: None })
            };
            run().unwrap_or_else(|e| ScalingRow {
                n,
                replicate,
                post_risk: f64::NAN,
                post_risk_se: f64::NAN,
                bound: f64::NAN,
                neg_log_z: f64::NAN,
                neg_log_z_se: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(rows)
}

/// Write `n,replicate,post_risk,post_risk_se,bound,neg_log_z,neg_log_z_se`.
pub fn write_rows_csv<W: Write>(rows: &[ScalingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "replicate", "post_risk", "post_risk_se", "bound", "neg_log_z", "neg_log_z_se"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.post_risk.to_string(),
            r.post_risk_se.to_string(),
            r.bound.to_string(),
            r.neg_log_z.to_string(),
            r.neg_log_z_se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-n averages over the successful replicates: `(n, mean, stderr)`.
pub fn average_by_n(rows: &[ScalingRow], value: impl Fn(&ScalingRow) -> f64) -> Vec<(usize, f64, f64)> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .filter_map(|n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n && !r.failed()).map(&value).filter(|v| v.is_finite()).collect();
            if v.is_empty() {
                return None;
            }
            let se = if v.len() > 1 { (stats::variance(&v) / v.len() as f64).sqrt() } else { 0.0 };
            Some((n, stats::mean(&v), se))
        })
        .collect()
}

/// Sample sizes below `e²` are dropped before fitting the RLCT.
pub fn fit_min_n() -> f64 {
    std::f64::consts::E.powi(2)
}

/// Fit `λ̂` from replicate-averaged thermodynamic estimates.
pub fn fit_from_rows(rows: &[ScalingRow], beta: f64, include_loglog: bool) -> Result<RlctFit> {
    let mut est = Vec::new();
    for (n, m, _) in average_by_n(rows, |r| r.neg_log_z) {
        if (n as f64) < fit_min_n() {
            continue;
        }
        let per: Vec<f64> = rows.iter().filter(|r| r.n == n && !r.failed()).map(|r| r.neg_log_z_se).collect();
        // replicate-averaged standard error of independent estimates
        let se = (per.iter().map(|s| s * s).sum::<f64>()).sqrt() / per.len() as f64;
        est.push(PartitionEstimate { n: n as f64, beta, neg_log_z: m, std_err: se, method: Method::Thermo });
    }
    partition::fit_rlct_from_partition(&est, include_loglog)
}

/// Least-squares slope of `log y` on `log n`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("need at least two positive points for a log-log slope"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("all n values coincide"));
    }
    Ok(sxy / sxx)
}
