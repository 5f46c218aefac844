use rand::Rng;

use super::{LossModel, Point};
use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Excess logistic risk of logits `f` over the log-odds `fstar`, averaged over
/// a point set with conditional probabilities `eta = P(Y = 1 | X)`.
///
/// Every `|f|` must be at most `b3` and every `eta` in `[tau, 1 − tau]`.
pub fn logistic_excess_risk(f: &[f64], fstar: &[f64], eta: &[f64], b3: f64, tau: f64) -> Result<f64> {
    if f.len() != fstar.len() || f.len() != eta.len() {
        return Err(Error::DimensionMismatch { context: "logistic sample", expected: f.len(), got: eta.len().min(fstar.len()) });
    }
    if f.is_empty() {
        return Err(Error::EmptyInput("logistic excess risk needs sample points"));
    }
    if let Some(e) = eta.iter().find(|&&e| !(tau..=1.0 - tau).contains(&e)) {
        return Err(Error::Constraint(format!("margin violated: eta = {e} outside [{tau}, {}]", 1.0 - tau)));
    }
    if let Some(v) = f.iter().find(|v| v.abs() > b3) {
        return Err(Error::Constraint(format!("logit {v} exceeds the bound B3 = {b3}")));
    }
    let total: f64 = f
        .iter()
        .zip(fstar)
        .zip(eta)
        .map(|((&f, &fs), &e)| e * (softplus(-f) - softplus(-fs)) + (1.0 - e) * (softplus(f) - softplus(fs)))
        .sum();
    Ok(total / f.len() as f64)
}

/// Logistic classification with a linear logit `f_θ(x) = θ0 + Σ θj xj`,
/// `X ~ Uniform([-1, 1]^p)` and `P(Y = 1 | X) = sigmoid(f⋆(X))`.
///
/// Expectations over `X` use a tensor Gauss-Legendre rule, exact up to
/// rounding for these smooth integrands.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    theta_star: Vec<f64>,
    b3: f64,
    tau: f64,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl LogisticModel {
    pub fn new(theta_star: Vec<f64>, b3: f64, tau: f64) -> Result<Self> {
        let p = theta_star.len().checked_sub(1).ok_or_else(|| invalid("need an intercept"))?;
        if p > 3 {
            return Err(invalid("at most three features are supported"));
        }
        if !(tau > 0.0 && tau < 0.5) {
            return Err(invalid(format!("tau must lie in (0, 1/2), got {tau}")));
        }
        let sup: f64 = theta_star.iter().map(|v| v.abs()).sum();
        if sup > b3 {
            return Err(Error::Constraint(format!("sup |f*| = {sup} exceeds B3 = {b3}")));
        }
        if sigmoid(sup) > 1.0 - tau {
            return Err(Error::Constraint(format!("margin condition fails: sup eta = {}", sigmoid(sup))));
        }
        let (gx, gw) = quadrature::gauss_legendre(24);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let norm = 0.5f64.powi(p as i32);
        quadrature::for_each_tensor_point(p, &gx, &gw, |x, w| {
            nodes.push(x.to_vec());
            weights.push(w * norm);
        });
        Ok(Self { theta_star, b3, tau, nodes, weights })
    }

    pub fn features(&self) -> usize {
        self.theta_star.len() - 1
    }

    pub fn b3(&self) -> f64 {
        self.b3
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn logit(theta: &[f64], x: &[f64]) -> f64 {
        theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `sup_x |f_θ(x) − f⋆(x)|` over the input box.
    pub fn sup_distance(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.theta_star).map(|(a, b)| (a - b).abs()).sum()
    }

    /// θ lies in the sup-norm ball of the given radius around f⋆ and keeps
    /// its logits within `B3`.
    pub fn in_neighborhood(&self, theta: &[f64], radius: f64) -> bool {
        let sup: f64 = theta.iter().map(|v| v.abs()).sum();
        sup <= self.b3 && self.sup_distance(theta) <= radius
    }
}

impl LossModel for LogisticModel {
    type Obs = Point;

    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn excess_loss(&self, theta: &[f64], obs: &Point) -> f64 {
        let f = Self::logit(theta, &obs.x);
        let fs = Self::logit(&self.theta_star, &obs.x);
        softplus(-obs.y * f) - softplus(-obs.y * fs)
    }

    fn population_risk(&self, theta: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| {
                let f = Self::logit(theta, x);
                let fs = Self::logit(&self.theta_star, x);
                let e = sigmoid(fs);
                w * (e * (softplus(-f) - softplus(-fs)) + (1.0 - e) * (softplus(f) - softplus(fs)))
            })
            .sum()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let x: Vec<f64> = (0..self.features()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta = sigmoid(Self::logit(&self.theta_star, &x));
        let y = if rng.random::<f64>() < eta { 1.0 } else { -1.0 };
        Point { x, y }
    }

    fn truth_params(&self) -> Option<Vec<f64>> {
        Some(self.theta_star.clone())
    }
}
