//! Concrete learning problems: data generation plus per-observation excess
//! loss `ℓ(θ, θ⋆; Z)` and population excess risk `R(θ, θ⋆)`.

mod completion;
mod dataset;
mod logistic;
mod relu;

pub use completion::{
    generate_completion_data, population_excess_risk_completion, CompletionModel,
    CompletionParam, MatrixCompletionTruth,
};
pub use dataset::{CsvRecord, Dataset, Entry, Point};
pub use logistic::{logistic_excess_risk, LogisticModel};
pub use relu::{param_count, relu_forward, ReluNetwork, ReluRegression};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::KahanSum;

/// Boxed empirical-risk evaluator bound to one dataset.
pub type RiskFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// A learning problem with a known data-generating truth.
pub trait LossModel: Sync {
    type Obs: Clone + Send + Sync;

    /// Number of free parameters in θ.
    fn dim(&self) -> usize;

    /// Excess loss of θ over θ⋆ on one observation.
    fn excess_loss(&self, theta: &[f64], obs: &Self::Obs) -> f64;

    /// Population excess risk `E_Z ℓ(θ, θ⋆; Z)`.
    fn population_risk(&self, theta: &[f64]) -> f64;

    /// Draw one observation from the data-generating distribution.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Obs;

    /// One parameter realizing the truth, if the model has a natural one.
    fn truth_params(&self) -> Option<Vec<f64>>;

    fn generate(&self, n: usize, seed: u64) -> Dataset<Self::Obs> {
        let mut rng = rng::stream(seed, 0);
        let observations = (0..n).map(|_| self.draw(&mut rng)).collect();
        Dataset { observations, seed }
    }

    /// `R_n(θ) = (1/n) Σ ℓ(θ, θ⋆; Z_k)`.
    fn empirical_risk(&self, theta: &[f64], data: &Dataset<Self::Obs>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyInput("empirical risk needs at least one observation"));
        }
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let s: KahanSum = data.observations.iter().map(|z| self.excess_loss(theta, z)).collect();
        Ok(s.value() / data.len() as f64)
    }

    /// Evaluator for `R_n` on a fixed dataset. Models may precompute
    /// sufficient statistics here; the default loops over the records.
    fn empirical_risk_fn<'a>(&'a self, data: &'a Dataset<Self::Obs>) -> RiskFn<'a> {
        let n = data.len().max(1) as f64;
        Box::new(move |theta: &[f64]| {
            let s: KahanSum = data.observations.iter().map(|z| self.excess_loss(theta, z)).collect();
            s.value() / n
        })
    }
}

/// Model whose excess loss is identically zero; used as a smoke-test target
/// where the Gibbs posterior equals the prior.
#[derive(Debug, Clone)]
pub struct NullModel {
    pub dim: usize,
}

impl LossModel for NullModel {
    type Obs = Point;

    fn dim(&self) -> usize {
        self.dim
    }

    fn excess_loss(&self, _theta: &[f64], _obs: &Point) -> f64 {
        0.0
    }

    fn population_risk(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point { x: vec![rng.random::<f64>()], y: 0.0 }
    }

    fn truth_params(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }

    fn empirical_risk_fn<'a>(&'a self, _data: &'a Dataset<Point>) -> RiskFn<'a> {
        Box::new(|_| 0.0)
    }
}
