use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, LossModel, Point, RiskFn};
use crate::error::{invalid, Error, Result};

/// Fully connected ReLU network with widths `(H1, …, HN)`; the activation is
/// applied after every affine layer, including the last.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    widths: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    b2: f64,
}

/// Parameters in a network with the given widths.
pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl ReluNetwork {
    pub fn new(widths: Vec<usize>, weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>, b2: f64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid("a network needs at least two positive widths"));
        }
        if weights.len() != widths.len() - 1 || biases.len() != widths.len() - 1 {
            return Err(invalid(format!(
                "{} layers need {} weight matrices and bias vectors, got {} and {}",
                widths.len(),
                widths.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for (k, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.shape() != (widths[k + 1], widths[k]) || b.len() != widths[k + 1] {
                return Err(invalid(format!(
                    "layer {}: expected W {}x{} and b of length {}",
                    k + 2,
                    widths[k + 1],
                    widths[k],
                    widths[k + 1]
                )));
            }
        }
        if !(b2 > 0.0) {
            return Err(invalid("output bound B2 must be positive"));
        }
        Ok(Self { widths, weights, biases, b2 })
    }

    pub fn zeros(widths: &[usize], b2: f64) -> Result<Self> {
        Self::from_params(widths, &vec![0.0; param_count(widths)], b2)
    }

    /// Unflatten parameters laid out layer by layer as `W` (row-major) then `b`.
    pub fn from_params(widths: &[usize], params: &[f64], b2: f64) -> Result<Self> {
        let expected = param_count(widths);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { context: "network parameters", expected, got: params.len() });
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut at = 0;
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            weights.push(DMatrix::from_row_slice(fan_out, fan_in, &params[at..at + fan_out * fan_in]));
            at += fan_out * fan_in;
            biases.push(DVector::from_column_slice(&params[at..at + fan_out]));
            at += fan_out;
        }
        Self::new(widths.to_vec(), weights, biases, b2)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(param_count(&self.widths));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    out.push(w[(i, j)]);
                }
            }
            out.extend(b.iter());
        }
        out
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn output_bound(&self) -> f64 {
        self.b2
    }

    pub fn weights_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.weights
    }

    /// Activations of every layer, starting with the input itself.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.widths[0] {
            return Err(Error::DimensionMismatch { context: "network input", expected: self.widths[0], got: x.len() });
        }
        let mut layers = vec![x.to_vec()];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let prev = DVector::from_column_slice(layers.last().expect("nonempty"));
            let z = w * prev + b;
            layers.push(z.iter().map(|v| v.max(0.0)).collect());
        }
        Ok(layers)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().expect("at least one layer"))
    }

    /// Realize this network inside a wider and possibly deeper architecture.
    ///
    /// Hidden layers are zero-padded; extra depth is filled with identity maps
    /// on the last hidden layer, which the ReLU leaves unchanged because its
    /// inputs are already nonnegative.
    pub fn embed(&self, target: &[usize]) -> Result<ReluNetwork> {
        let n_true = self.widths.len();
        let n_big = target.len();
        if n_big < n_true || target[0] != self.widths[0] || target[n_big - 1] != self.widths[n_true - 1] {
            return Err(invalid(format!("cannot embed widths {:?} into {:?}", self.widths, target)));
        }
        if n_big > n_true && n_true < 3 {
            return Err(invalid("deepening needs at least one hidden layer in the source network"));
        }
        let last_hidden = self.widths[n_true - 2];
        for k in 1..n_true - 1 {
            if target[k] < self.widths[k] {
                return Err(invalid(format!("layer {} too narrow: {} < {}", k + 1, target[k], self.widths[k])));
            }
        }
        for &w in &target[n_true - 1..n_big - 1] {
            if w < last_hidden {
                return Err(invalid(format!("pass-through layer width {w} < {last_hidden}")));
            }
        }
        let mut big = ReluNetwork::zeros(target, self.b2)?;
        let copy = |dst: &mut DMatrix<f64>, dst_b: &mut DVector<f64>, src: &DMatrix<f64>, src_b: &DVector<f64>| {
            for i in 0..src.nrows() {
                for j in 0..src.ncols() {
                    dst[(i, j)] = src[(i, j)];
                }
                dst_b[i] = src_b[i];
            }
        };
        for k in 0..n_true - 2 {
            copy(&mut big.weights[k], &mut big.biases[k], &self.weights[k], &self.biases[k]);
        }
        for k in n_true - 2..n_big - 2 {
            for i in 0..last_hidden {
                big.weights[k][(i, i)] = 1.0;
            }
        }
        copy(
            &mut big.weights[n_big - 2],
            &mut big.biases[n_big - 2],
            &self.weights[n_true - 2],
            &self.biases[n_true - 2],
        );
        Ok(big)
    }
}

/// Evaluate the network encoded by flat parameters at `x`, writing the
/// output into `out`. `scratch` is reused between calls.
pub(crate) fn forward_flat(widths: &[usize], params: &[f64], x: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(x);
    let mut at = 0;
    for w in widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        std::mem::swap(scratch, out);
        out.clear();
        let weights = &params[at..at + fan_out * fan_in];
        let bias = &params[at + fan_out * fan_in..at + fan_out * (fan_in + 1)];
        for i in 0..fan_out {
            let row = &weights[i * fan_in..(i + 1) * fan_in];
            let z: f64 = row.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum::<f64>() + bias[i];
            out.push(z.max(0.0));
        }
        at += fan_out * (fan_in + 1);
    }
}

pub fn relu_forward(net: &ReluNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

/// Squared-loss regression `Y = f⋆(X) + ε` with a ReLU network model,
/// `X ~ Uniform([lo, hi]^H1)` and `ε ~ N(0, σ2²)`.
///
/// The population risk `E_X (f_θ(X) − f⋆(X))²` is evaluated on a fixed
/// midpoint grid over the input box.
#[derive(Debug, Clone)]
pub struct ReluRegression {
    widths: Vec<usize>,
    truth: ReluNetwork,
    sigma2: f64,
    input_box: (f64, f64),
    eval_x: Vec<Vec<f64>>,
    eval_fstar: Vec<f64>,
}

impl ReluRegression {
    pub fn new(widths: Vec<usize>, truth: ReluNetwork, sigma2: f64, input_box: (f64, f64), grid_per_axis: usize) -> Result<Self> {
        if widths.len() < 2 || widths[0] != truth.widths()[0] {
            return Err(invalid("model and truth must share the input dimension"));
        }
        if *widths.last().expect("nonempty") != 1 || *truth.widths().last().expect("nonempty") != 1 {
            return Err(invalid("regression datasets carry scalar responses; output width must be 1"));
        }
        if !(sigma2 >= 0.0) || !(input_box.1 > input_box.0) || grid_per_axis == 0 {
            return Err(invalid("need sigma2 >= 0, a nonempty input box and a positive grid size"));
        }
        let dim = widths[0];
        let total = grid_per_axis.pow(dim as u32);
        let step = (input_box.1 - input_box.0) / grid_per_axis as f64;
        let eval_x: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                (0..dim)
                    .map(|_| {
                        let k = idx % grid_per_axis;
                        idx /= grid_per_axis;
                        input_box.0 + (k as f64 + 0.5) * step
                    })
                    .collect()
            })
            .collect();
        let eval_fstar = eval_x.iter().map(|x| truth.forward(x).map(|v| v[0])).collect::<Result<Vec<_>>>()?;
        let peak = eval_fstar.iter().copied().fold(0.0, f64::max);
        if peak > truth.output_bound() {
            return Err(invalid(format!("truth output {peak} exceeds B2 = {}", truth.output_bound())));
        }
        Ok(Self { widths, truth, sigma2, input_box, eval_x, eval_fstar })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn truth(&self) -> &ReluNetwork {
        &self.truth
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn predict(&self, theta: &[f64], x: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>) -> f64 {
        forward_flat(&self.widths, theta, x, scratch, out);
        out[0]
    }
}

impl LossModel for ReluRegression {
    type Obs = Point;

    fn dim(&self) -> usize {
        param_count(&self.widths)
    }

    fn excess_loss(&self, theta: &[f64], obs: &Point) -> f64 {
        let (mut s, mut o) = (Vec::new(), Vec::new());
        let f = self.predict(theta, &obs.x, &mut s, &mut o);
        let fs = self.truth.forward(&obs.x).map(|v| v[0]).unwrap_or(f64::NAN);
        (obs.y - f).powi(2) - (obs.y - fs).powi(2)
    }

    fn population_risk(&self, theta: &[f64]) -> f64 {
        let (mut s, mut o) = (Vec::new(), Vec::new());
        let total: f64 = self
            .eval_x
            .iter()
            .zip(&self.eval_fstar)
            .map(|(x, fs)| (self.predict(theta, x, &mut s, &mut o) - fs).powi(2))
            .sum();
        total / self.eval_x.len() as f64
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.input_box;
        let x: Vec<f64> = (0..self.widths[0]).map(|_| rng.random_range(lo..hi)).collect();
        let z: f64 = rng.sample(StandardNormal);
        let fs = self.truth.forward(&x).expect("input width checked")[0];
        Point { x, y: fs + self.sigma2 * z }
    }

    fn truth_params(&self) -> Option<Vec<f64>> {
        self.truth.embed(&self.widths).ok().map(|net| net.params())
    }

    fn empirical_risk_fn<'a>(&'a self, data: &'a Dataset<Point>) -> RiskFn<'a> {
        let fstar: Vec<f64> = data
            .observations
            .iter()
            .map(|p| self.truth.forward(&p.x).map(|v| v[0]).unwrap_or(f64::NAN))
            .collect();
        let base: f64 = data.observations.iter().zip(&fstar).map(|(p, fs)| (p.y - fs).powi(2)).sum();
        let n = data.len().max(1) as f64;
        Box::new(move |theta: &[f64]| {
            let (mut s, mut o) = (Vec::with_capacity(16), Vec::with_capacity(16));
            let fit: f64 = data
                .observations
                .iter()
                .map(|p| (p.y - self.predict(theta, &p.x, &mut s, &mut o)).powi(2))
                .sum();
            (fit - base) / n
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_net() -> ReluNetwork {
        // widths (2,2,1)
        let w2 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, 1.0]);
        let b2 = DVector::from_vec(vec![0.0, -1.0]);
        let w3 = DMatrix::from_row_slice(1, 2, &[1.0, -2.0]);
        let b3 = DVector::from_vec(vec![3.0]);
        ReluNetwork::new(vec![2, 2, 1], vec![w2, w3], vec![b2, b3], 10.0).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = ReluNetwork::zeros(&[3, 4, 2], 1.0).unwrap();
        assert_eq!(relu_forward(&net, &[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_nonnegative_inputs() {
        let net = ReluNetwork::new(
            vec![3, 3],
            vec![DMatrix::identity(3, 3)],
            vec![DVector::zeros(3)],
            1.0,
        )
        .unwrap();
        assert_eq!(net.forward(&[0.0, 0.5, 2.0]).unwrap(), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn hand_traced_forward_pass() {
        // x = (1, 2): layer 2 pre-activations (1−2, 2+2−1) = (−1, 3) → (0, 3);
        // output 0 − 6 + 3 = −3 → 0. At x = (2, 0): (2, 3) → (2, 3); 2 − 6 + 3 = −1 → 0.
        // At x = (3, 1): (2, 6) → 2 − 12 + 3 < 0. At x = (0.5, 0): (0.5, 0) → 0.5 + 3 = 3.5.
        let net = small_net();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![0.0]);
        assert_eq!(net.forward(&[0.5, 0.0]).unwrap(), vec![3.5]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn flat_forward_agrees_with_matrix_forward() {
        let net = small_net();
        let params = net.params();
        let (mut s, mut o) = (Vec::new(), Vec::new());
        for x in [[0.5, 0.0], [0.1, 0.9], [-1.0, 0.3]] {
            forward_flat(&[2, 2, 1], &params, &x, &mut s, &mut o);
            assert_eq!(o, net.forward(&x).unwrap());
        }
        assert_eq!(ReluNetwork::from_params(&[2, 2, 1], &params, 10.0).unwrap(), net);
    }

    #[test]
    fn first_layer_is_positively_homogeneous_without_bias() {
        let mut r = rng::stream(5, 0);
        let params: Vec<f64> = (0..param_count(&[3, 4, 2])).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut net = ReluNetwork::from_params(&[3, 4, 2], &params, 10.0).unwrap();
        net.biases[0].fill(0.0);
        let x = [0.3, -0.7, 1.1];
        let base = net.activations(&x).unwrap()[1].clone();
        for c in [0.0, 0.5, 2.0, 7.0] {
            let mut scaled = net.clone();
            scaled.weights_mut()[0] *= c;
            let act = scaled.activations(&x).unwrap()[1].clone();
            for (a, b) in act.iter().zip(&base) {
                assert!((a - c * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedding_preserves_the_function() {
        let truth = ReluNetwork::new(
            vec![2, 2, 1],
            vec![DMatrix::from_row_slice(2, 2, &[0.8, -0.5, 0.3, 0.9]), DMatrix::from_row_slice(1, 2, &[0.7, -0.4])],
            vec![DVector::from_vec(vec![0.1, -0.2]), DVector::from_vec(vec![0.3])],
            2.0,
        )
        .unwrap();
        let big = truth.embed(&[2, 4, 4, 1]).unwrap();
        let mut r = rng::stream(2, 0);
        for _ in 0..100 {
            let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            assert!((big.forward(&x).unwrap()[0] - truth.forward(&x).unwrap()[0]).abs() < 1e-14);
        }
        assert!(truth.embed(&[2, 1, 1]).is_err());
    }

    #[test]
    fn regression_truth_has_zero_risk() {
        let truth = small_net();
        let model = ReluRegression::new(vec![2, 3, 3, 1], truth, 0.1, (0.0, 1.0), 16).unwrap();
        let star = model.truth_params().unwrap();
        assert!(model.population_risk(&star) < 1e-24);
        let data = model.generate(500, 3);
        let fast = model.empirical_risk_fn(&data);
        assert!(fast(&star).abs() < 1e-12);
        let theta: Vec<f64> = star.iter().map(|v| v + 0.05).collect();
        assert!((fast(&theta) - model.empirical_risk(&theta, &data).unwrap()).abs() < 1e-10);
    }
}
