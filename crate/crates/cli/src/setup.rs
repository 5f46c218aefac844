//! Build models, priors, constants and certificates from a [`Config`].

use singular_bound::bernstein::{squared_loss_constants, BernsteinConstants};
use singular_bound::experiment::ThermoSpec;
use singular_bound::gibbs::{completion_c1_constant, pac_bayes_certificate, BoundCertificate, GibbsConfig, RlctSource};
use singular_bound::linalg;
use singular_bound::mcmc::{BoxPrior, ChainConfig};
use singular_bound::model::{
    param_count, CompletionModel, CompletionParam, LossModel, MatrixCompletionTruth, NullModel, ReluNetwork,
    ReluRegression,
};
use singular_bound::partition::Schedule;
use singular_bound::rlct::{self, CompletionDims, Rational};
use singular_bound::Error;

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub enum Problem {
    Completion { model: CompletionModel, dims: CompletionDims },
    Relu { model: ReluRegression, true_widths: Vec<u32> },
    Null(NullModel),
}

/// Call a generic body with the concrete model of a [`Problem`].
#[macro_export]
macro_rules! with_model {
    ($problem:expr, $m:ident => $body:expr) => {
        match $problem {
            $crate::setup::Problem::Completion { model: $m, .. } => $body,
            $crate::setup::Problem::Relu { model: $m, .. } => $body,
            $crate::setup::Problem::Null($m) => $body,
        }
    };
}

impl Problem {
    pub fn dim(&self) -> usize {
        with_model!(self, m => m.dim())
    }
}

pub struct Setup {
    pub problem: Problem,
    pub prior: BoxPrior,
    pub constants: BernsteinConstants,
    pub omega: f64,
    pub seed: u64,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn build(config: &Config) -> CliResult<Setup> {
    let family = config.string("model.family")?;
    let lo: f64 = config.require("gibbs.box_lo")?;
    let hi: f64 = config.require("gibbs.box_hi")?;
    let half_width = lo.abs().max(hi.abs());
    let (problem, b0, sigma) = match family.as_str() {
        "completion" => {
            let (d1, d2, h, r): (u32, u32, u32, u32) =
                (config.require("model.d1")?, config.require("model.d2")?, config.require("model.h")?, config.require("model.r")?);
            let dims = CompletionDims::new(d1, d2, h, r)?;
            let sigma = config.get("model.sigma")?.unwrap_or(0.5);
            let b0 = config.get("model.b0")?.unwrap_or(h as f64 * half_width * half_width);
            let spec = config.string("model.truth")?;
            let truth = if spec == "random" {
                MatrixCompletionTruth::random(d1 as usize, d2 as usize, r as usize, h as usize, sigma, b0, config.require("model.truth_seed")?)?
            } else {
                let m = linalg::parse_matrix(&spec)?;
                if m.shape() != (d1 as usize, d2 as usize) {
                    return Err(usage(format!("model.truth is {:?}, expected {d1}x{d2}", m.shape())));
                }
                let rank = linalg::numerical_rank(&m, 1e-10);
                if rank != r as usize {
                    return Err(usage(format!("model.truth has rank {rank}, but model.r = {r}")));
                }
                MatrixCompletionTruth::from_matrix(m, sigma, b0, h as usize)?
            };
            (Problem::Completion { model: CompletionModel::new(truth, CompletionParam::Factored), dims }, b0, sigma)
        }
        "relu" => {
            let widths: Vec<usize> = config.list("model.widths")?;
            let true_widths: Vec<usize> = config.list("model.true_widths")?;
            let params: Vec<f64> = config.list("model.truth_params")?;
            if params.len() != param_count(&true_widths) {
                return Err(usage(format!(
                    "model.truth_params has {} values; widths {true_widths:?} need {}",
                    params.len(),
                    param_count(&true_widths)
                )));
            }
            let sigma = config.get("model.sigma")?.unwrap_or(0.1);
            let b0 = config.get("model.b0")?.unwrap_or(1.0);
            let truth = ReluNetwork::from_params(&true_widths, &params, b0)?;
            let input = (config.require("model.input_lo")?, config.require("model.input_hi")?);
            let model = ReluRegression::new(widths, truth, sigma, input, config.require("model.grid")?)?;
            (Problem::Relu { model, true_widths: true_widths.iter().map(|&w| w as u32).collect() }, b0, sigma)
        }
        "null" => {
            let dim: usize = config.require("model.dim")?;
            if dim == 0 {
                return Err(usage("model.dim must be positive"));
            }
            (Problem::Null(NullModel { dim }), config.get("model.b0")?.unwrap_or(1.0), config.get("model.sigma")?.unwrap_or(0.5))
        }
        other => return Err(usage(format!("unknown model.family '{other}'"))),
    };
    let prior = BoxPrior::cube(problem.dim(), lo, hi)?;
    let constants = squared_loss_constants(b0, sigma)?;
    let omega = match config.get::<f64>("gibbs.omega")? {
        Some(w) => w,
        None => {
            let f: f64 = config.require("gibbs.omega_fraction")?;
            if !(f > 0.0) {
                return Err(usage("gibbs.omega_fraction must be positive"));
            }
            f * constants.omega_bar
        }
    };
    if !(omega > 0.0) {
        return Err(usage("omega must be positive"));
    }
    if omega >= constants.omega_bar {
        return Err(Error::Constraint(format!("omega = {omega} must be below omega_bar = {}", constants.omega_bar)).into());
    }
    Ok(Setup { problem, prior, constants, omega, seed: config.require("seed")? })
}

impl Setup {
    pub fn gibbs_template(&self, config: &Config, n: usize) -> CliResult<GibbsConfig> {
        let g = GibbsConfig {
            omega: self.omega,
            n,
            prior: self.prior.clone(),
            proposal_scale: config.get("gibbs.proposal_scale")?,
            chain_length: config.require("gibbs.chain_length")?,
            burn_in: config.require("gibbs.burn_in")?,
            thinning: config.require("gibbs.thinning")?,
            seed: self.seed,
            chains: config.require("gibbs.chains")?,
        };
        g.validate(Some(&self.constants))?;
        Ok(g)
    }

    /// `(λ, m, source)` for the certificate.
    pub fn rlct(&self, config: &Config) -> CliResult<(Rational, u32, RlctSource)> {
        let requested = config.get::<String>("certificate.rlct_source")?;
        let half = || (Rational::new(self.problem.dim() as i64, 2), 1, RlctSource::HalfDimension);
        let source = requested.as_deref().unwrap_or(match self.problem {
            Problem::Completion { .. } => "discrete_min",
            Problem::Relu { .. } => "relu_upper_bound",
            Problem::Null(_) => "half_dimension",
        });
        match (source, &self.problem) {
            ("half_dimension", _) => Ok(half()),
            ("discrete_min", Problem::Completion { dims, .. }) => {
                let p = rlct::completion_rlct(dims.d1, dims.d2, dims.h, dims.r)?;
                Ok((p.lambda, p.m, RlctSource::DiscreteMin))
            }
            ("closed_form", Problem::Completion { dims, .. }) => {
                let p = rlct::completion_rlct_closed_form(dims.d1, dims.d2, dims.h, dims.r)?;
                Ok((p.lambda, p.m, RlctSource::ClosedForm))
            }
            ("relu_upper_bound", Problem::Relu { true_widths, .. }) => {
                Ok((rlct::relu_rlct_upper_bound(true_widths)?, 1, RlctSource::ReluUpperBound))
            }
            (s, _) => Err(usage(format!("certificate.rlct_source '{s}' does not apply to this model family"))),
        }
    }

    pub fn c0(&self, config: &Config) -> CliResult<f64> {
        if let Some(c0) = config.get::<f64>("certificate.c0")? {
            return Ok(c0);
        }
        match &self.problem {
            Problem::Completion { model, dims } => {
                let c1 = completion_c1_constant(dims, self.omega, self.constants.l, model.truth.p0(), model.truth.q0())?;
                Ok(c1 - self.prior.density().ln())
            }
            _ => Ok(0.0),
        }
    }

    pub fn certificate(&self, config: &Config, n: usize) -> CliResult<BoundCertificate> {
        let (lambda, m, source) = self.rlct(config)?;
        let delta: f64 = config.require("certificate.delta")?;
        Ok(pac_bayes_certificate(lambda, m, self.constants.l, self.omega, n as u64, delta, self.c0(config)?, source)?)
    }
}

pub fn thermo_spec(config: &Config) -> CliResult<Option<ThermoSpec>> {
    if !config.flag("thermo.enabled")? {
        return Ok(None);
    }
    let chain = ChainConfig::new(config.require("thermo.chain_length")?, config.require("thermo.burn_in")?, 1)?;
    let schedule = Schedule::geometric(config.require("thermo.rungs")?, config.require("thermo.s_min")?)?;
    Ok(Some(ThermoSpec { beta: config.require("thermo.beta")?, schedule, chain }))
}
