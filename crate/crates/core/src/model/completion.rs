use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Entry, LossModel, RiskFn};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng;

/// Ground truth for noisy low-rank matrix completion.
///
/// `m_star = p0 · diag(I_r, 0) · q0` with `p0`, `q0` invertible. `h` is the
/// width of the factorization `M = U V` used by the fitted model.
#[derive(Debug, Clone)]
pub struct MatrixCompletionTruth {
    d1: usize,
    d2: usize,
    r: usize,
    h: usize,
    m_star: DMatrix<f64>,
    p0: DMatrix<f64>,
    q0: DMatrix<f64>,
    sigma1: f64,
    b1: f64,
}

impl MatrixCompletionTruth {
    pub fn new(
        m_star: DMatrix<f64>,
        p0: DMatrix<f64>,
        q0: DMatrix<f64>,
        r: usize,
        sigma1: f64,
        b1: f64,
        h: usize,
    ) -> Result<Self> {
        let (d1, d2) = m_star.shape();
        if d1 == 0 || d2 == 0 {
            return Err(invalid("matrix dimensions must be positive"));
        }
        if p0.shape() != (d1, d1) || q0.shape() != (d2, d2) {
            return Err(invalid(format!(
                "P0 must be {d1}x{d1} and Q0 {d2}x{d2}, got {:?} and {:?}",
                p0.shape(),
                q0.shape()
            )));
        }
        if !(sigma1 >= 0.0 && sigma1.is_finite()) {
            return Err(invalid(format!("noise scale sigma1 must be nonnegative, got {sigma1}")));
        }
        if !(b1 > 0.0) {
            return Err(invalid(format!("entry bound B1 must be positive, got {b1}")));
        }
        if r == 0 || r > h || h > d1.min(d2) {
            return Err(invalid(format!("need 1 <= r <= H <= min(d1, d2); got r={r}, H={h}, d1={d1}, d2={d2}")));
        }
        if h + r > d1 + d2 {
            return Err(invalid(format!("need H + r <= d1 + d2; got H={h}, r={r}")));
        }
        for (name, m) in [("P0", &p0), ("Q0", &q0)] {
            let (smin, _) = linalg::extreme_singular_values(m);
            if smin <= 1e-12 {
                return Err(Error::Singular(format!("{name} is not invertible")));
            }
        }
        let rank = linalg::numerical_rank(&m_star, 1e-10);
        if rank != r {
            return Err(invalid(format!("rank(M*) = {rank} but r = {r}")));
        }
        let mut mr = DMatrix::<f64>::zeros(d1, d2);
        for k in 0..r {
            mr[(k, k)] = 1.0;
        }
        let rebuilt = &p0 * mr * &q0;
        let gap = (&rebuilt - &m_star).amax();
        if gap > 1e-10 {
            return Err(invalid(format!("P0 diag(I_r,0) Q0 differs from M* by {gap:e}")));
        }
        let max_entry = m_star.amax();
        if max_entry > b1 {
            return Err(invalid(format!("max |M*| = {max_entry} exceeds B1 = {b1}")));
        }
        Ok(Self { d1, d2, r, h, m_star, p0, q0, sigma1, b1 })
    }

    /// Build the truth from `M*` alone, deriving `r`, `P0` and `Q0` from a
    /// singular value decomposition.
    pub fn from_matrix(m_star: DMatrix<f64>, sigma1: f64, b1: f64, h: usize) -> Result<Self> {
        let (d1, d2) = m_star.shape();
        let r = linalg::numerical_rank(&m_star, 1e-10);
        if r == 0 {
            return Err(invalid("M* must be nonzero"));
        }
        let svd = m_star.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested Vᵀ");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite"));
        let top = &order[..r];

        let left: Vec<DVector<f64>> = top.iter().map(|&k| u.column(k).into_owned()).collect();
        let right: Vec<DVector<f64>> = top.iter().map(|&k| vt.row(k).transpose()).collect();
        let left_basis = linalg::complete_orthonormal(&left, d1);
        let right_basis = linalg::complete_orthonormal(&right, d2);
        let scale = |k: usize| if k < r { svd.singular_values[top[k]].sqrt() } else { 1.0 };
        let p0 = DMatrix::from_fn(d1, d1, |i, k| left_basis[k][i] * scale(k));
        let q0 = DMatrix::from_fn(d2, d2, |k, j| right_basis[k][j] * scale(k));
        // Re-form M* from the factors so the rank-normal form holds to rounding.
        let mut mr = DMatrix::<f64>::zeros(d1, d2);
        for k in 0..r {
            mr[(k, k)] = 1.0;
        }
        let rebuilt = &p0 * mr * &q0;
        let gap = (&rebuilt - &m_star).amax();
        if gap > 1e-10 {
            return Err(Error::NonFinite(format!("rank factorization lost accuracy ({gap:e})")));
        }
        Self::new(m_star, p0, q0, r, sigma1, b1, h)
    }

    /// Random rank-`r` truth with entries scaled so that `max |M*| = B1 / 2`.
    pub fn random(d1: usize, d2: usize, r: usize, h: usize, sigma1: f64, b1: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, 0);
        let a = DMatrix::<f64>::from_fn(d1, r, |_, _| rng.sample(StandardNormal));
        let b = DMatrix::<f64>::from_fn(r, d2, |_, _| rng.sample(StandardNormal));
        let m = a * b;
        let scale = 0.5 * b1 / m.amax();
        Self::from_matrix(m * scale, sigma1, b1, h)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }
    pub fn d2(&self) -> usize {
        self.d2
    }
    pub fn rank(&self) -> usize {
        self.r
    }
    pub fn width(&self) -> usize {
        self.h
    }
    pub fn m_star(&self) -> &DMatrix<f64> {
        &self.m_star
    }
    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }
    pub fn q0(&self) -> &DMatrix<f64> {
        &self.q0
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn b1(&self) -> f64 {
        self.b1
    }
}

/// Sample `n` entries uniformly (with replacement) from the index grid and
/// observe each with additive `N(0, σ1²)` noise.
pub fn generate_completion_data(truth: &MatrixCompletionTruth, n: usize, seed: u64) -> Result<Dataset<Entry>> {
    let model = CompletionModel::new(truth.clone(), CompletionParam::Dense);
    Ok(model.generate(n, seed))
}

/// `‖M − M⋆‖²_F / (d1·d2)`.
pub fn population_excess_risk_completion(m: &DMatrix<f64>, truth: &MatrixCompletionTruth) -> Result<f64> {
    if m.shape() != truth.m_star.shape() {
        return Err(invalid(format!(
            "shape mismatch: M is {:?}, M* is {:?}",
            m.shape(),
            truth.m_star.shape()
        )));
    }
    let ss: f64 = m.iter().zip(truth.m_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss / (truth.d1 * truth.d2) as f64)
}

/// How a parameter vector encodes the completed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionParam {
    /// θ = (U row-major, d1×H; V row-major, H×d2), M = U V.
    Factored,
    /// θ = M row-major.
    Dense,
}

#[derive(Debug, Clone)]
pub struct CompletionModel {
    pub truth: MatrixCompletionTruth,
    pub param: CompletionParam,
}

impl CompletionModel {
    pub fn new(truth: MatrixCompletionTruth, param: CompletionParam) -> Self {
        Self { truth, param }
    }

    fn entry(&self, theta: &[f64], i: usize, j: usize) -> f64 {
        let t = &self.truth;
        match self.param {
            CompletionParam::Dense => theta[i * t.d2 + j],
            CompletionParam::Factored => {
                let (u, v) = theta.split_at(t.d1 * t.h);
                (0..t.h).map(|k| u[i * t.h + k] * v[k * t.d2 + j]).sum()
            }
        }
    }

    /// Row-major entries of the matrix encoded by θ.
    pub fn matrix_entries(&self, theta: &[f64], out: &mut [f64]) {
        let t = &self.truth;
        for i in 0..t.d1 {
            for j in 0..t.d2 {
                out[i * t.d2 + j] = self.entry(theta, i, j);
            }
        }
    }

    pub fn matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        let t = &self.truth;
        DMatrix::from_fn(t.d1, t.d2, |i, j| self.entry(theta, i, j))
    }
}

impl LossModel for CompletionModel {
    type Obs = Entry;

    fn dim(&self) -> usize {
        let t = &self.truth;
        match self.param {
            CompletionParam::Dense => t.d1 * t.d2,
            CompletionParam::Factored => t.h * (t.d1 + t.d2),
        }
    }

    fn excess_loss(&self, theta: &[f64], obs: &Entry) -> f64 {
        let m = self.entry(theta, obs.i, obs.j);
        let ms = self.truth.m_star[(obs.i, obs.j)];
        (obs.y - m).powi(2) - (obs.y - ms).powi(2)
    }

    fn population_risk(&self, theta: &[f64]) -> f64 {
        let t = &self.truth;
        let mut ss = 0.0;
        for i in 0..t.d1 {
            for j in 0..t.d2 {
                let d = self.entry(theta, i, j) - t.m_star[(i, j)];
                ss += d * d;
            }
        }
        ss / (t.d1 * t.d2) as f64
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Entry {
        let t = &self.truth;
        let i = rng.random_range(0..t.d1);
        let j = rng.random_range(0..t.d2);
        let z: f64 = rng.sample(StandardNormal);
        let y = if t.sigma1 == 0.0 { t.m_star[(i, j)] } else { t.m_star[(i, j)] + t.sigma1 * z };
        Entry { i, j, y }
    }

    fn truth_params(&self) -> Option<Vec<f64>> {
        let t = &self.truth;
        Some(match self.param {
            CompletionParam::Dense => (0..t.d1).flat_map(|i| (0..t.d2).map(move |j| (i, j))).map(|(i, j)| t.m_star[(i, j)]).collect(),
            CompletionParam::Factored => {
                // U = first r columns of P0, V = first r rows of Q0, zero padded to width H.
                let mut theta = vec![0.0; self.dim()];
                let (u, v) = theta.split_at_mut(t.d1 * t.h);
                for k in 0..t.r {
                    for i in 0..t.d1 {
                        u[i * t.h + k] = t.p0[(i, k)];
                    }
                    for j in 0..t.d2 {
                        v[k * t.d2 + j] = t.q0[(k, j)];
                    }
                }
                theta
            }
        })
    }

    /// Aggregates the dataset into per-entry counts and response sums, so one
    /// evaluation costs `O(d1·d2·H)` regardless of `n`:
    /// `Σ_k ℓ = Σ_ij c_ij (M_ij² − M⋆_ij²) − 2 s_ij (M_ij − M⋆_ij)`.
    fn empirical_risk_fn<'a>(&'a self, data: &'a Dataset<Entry>) -> RiskFn<'a> {
        let t = &self.truth;
        let cells = t.d1 * t.d2;
        let mut count = vec![0.0; cells];
        let mut sum_y = vec![0.0; cells];
        for e in &data.observations {
            count[e.i * t.d2 + e.j] += 1.0;
            sum_y[e.i * t.d2 + e.j] += e.y;
        }
        let star: Vec<f64> = (0..cells).map(|c| t.m_star[(c / t.d2, c % t.d2)]).collect();
        let n = data.len().max(1) as f64;
        Box::new(move |theta: &[f64]| {
            let mut total = 0.0;
            for c in 0..cells {
                if count[c] == 0.0 {
                    continue;
                }
                let m = self.entry(theta, c / t.d2, c % t.d2);
                let ms = star[c];
                total += count[c] * (m * m - ms * ms) - 2.0 * sum_y[c] * (m - ms);
            }
            total / n
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn truth_2x2(sigma: f64) -> MatrixCompletionTruth {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.3, 0.4, 0.2]);
        MatrixCompletionTruth::from_matrix(m, sigma, 1.0, 2).unwrap()
    }

    #[test]
    fn from_matrix_reproduces_rank_normal_form() {
        let t = MatrixCompletionTruth::random(4, 3, 2, 2, 0.1, 1.0, 11).unwrap();
        let mut mr = DMatrix::<f64>::zeros(4, 3);
        mr[(0, 0)] = 1.0;
        mr[(1, 1)] = 1.0;
        let rebuilt = t.p0() * mr * t.q0();
        assert!((rebuilt - t.m_star()).amax() < 1e-10);
        assert!(t.m_star().amax() <= 1.0);
        assert_eq!(t.rank(), 2);
    }

    #[test]
    fn invalid_truths_are_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.3, 0.4, 0.2]);
        // H > min(d1, d2)
        assert!(MatrixCompletionTruth::from_matrix(m.clone(), 0.1, 1.0, 3).is_err());
        // entry bound
        assert!(MatrixCompletionTruth::from_matrix(m.clone(), 0.1, 0.5, 2).is_err());
        // wrong declared rank
        let p = DMatrix::identity(2, 2);
        assert!(MatrixCompletionTruth::new(m.clone(), p.clone(), p.clone(), 2, 0.1, 1.0, 2).is_err());
        // singular P0
        assert!(MatrixCompletionTruth::new(m, DMatrix::zeros(2, 2), p, 1, 0.1, 1.0, 2).is_err());
    }

    #[test]
    fn empty_and_noiseless_datasets() {
        let t = truth_2x2(0.0);
        assert!(generate_completion_data(&t, 0, 1).unwrap().is_empty());
        let data = generate_completion_data(&t, 200, 5).unwrap();
        for e in &data.observations {
            assert_eq!(e.y, t.m_star()[(e.i, e.j)]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let t = truth_2x2(0.3);
        let a = generate_completion_data(&t, 100, 42).unwrap();
        let b = generate_completion_data(&t, 100, 42).unwrap();
        let c = generate_completion_data(&t, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cell_mean_converges_to_truth() {
        let t = truth_2x2(0.1);
        let data = generate_completion_data(&t, 10_000, 9).unwrap();
        let ys: Vec<f64> = data.observations.iter().filter(|e| e.i == 1 && e.j == 1).map(|e| e.y).collect();
        let count = ys.len() as f64;
        assert!(count > 2000.0);
        assert!((stats::mean(&ys) - t.m_star()[(1, 1)]).abs() <= 3.0 * 0.1 / count.sqrt());
    }

    #[test]
    fn population_risk_cases() {
        let t = truth_2x2(0.1);
        assert_eq!(population_excess_risk_completion(t.m_star(), &t).unwrap(), 0.0);
        let shifted = t.m_star().add_scalar(1.0);
        assert!((population_excess_risk_completion(&shifted, &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(population_excess_risk_completion(&DMatrix::zeros(3, 2), &t).is_err());
    }

    #[test]
    fn population_risk_matches_entry_loop_on_3x4() {
        let t = MatrixCompletionTruth::random(3, 4, 1, 2, 0.1, 1.0, 3).unwrap();
        let mut r = rng::stream(8, 0);
        let m = DMatrix::<f64>::from_fn(3, 4, |_, _| r.random_range(-1.0..1.0));
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                brute += (m[(i, j)] - t.m_star()[(i, j)]).powi(2);
            }
        }
        brute /= 12.0;
        assert!((population_excess_risk_completion(&m, &t).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_excess_loss() {
        // M[i,j] = 2, M*[i,j] = 1, y = 1.5 → (1.5−2)² − (1.5−1)² = 0
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]);
        let t = MatrixCompletionTruth::from_matrix(m, 0.1, 3.0, 2).unwrap();
        let model = CompletionModel::new(t, CompletionParam::Dense);
        let theta = [2.0, 0.5, 0.5, 0.25];
        let data = Dataset { observations: vec![Entry { i: 0, j: 0, y: 1.5 }], seed: 0 };
        assert_eq!(model.empirical_risk(&theta, &data).unwrap(), 0.0);
        let empty: Dataset<Entry> = Dataset { observations: vec![], seed: 0 };
        assert!(model.empirical_risk(&theta, &empty).is_err());
    }

    #[test]
    fn excess_loss_vanishes_at_truth_without_noise() {
        let t = truth_2x2(0.0);
        let model = CompletionModel::new(t.clone(), CompletionParam::Factored);
        let data = model.generate(50, 1);
        let star = model.truth_params().unwrap();
        assert!(model.empirical_risk(&star, &data).unwrap().abs() < 1e-15);
        assert!((model.matrix(&star) - t.m_star()).amax() < 1e-12);
    }

    #[test]
    fn sufficient_statistics_match_record_loop() {
        let t = truth_2x2(0.5);
        let model = CompletionModel::new(t, CompletionParam::Factored);
        let data = model.generate(300, 4);
        let fast = model.empirical_risk_fn(&data);
        let mut r = rng::stream(1, 1);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..model.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
            let slow = model.empirical_risk(&theta, &data).unwrap();
            assert!((fast(&theta) - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_risk_tracks_population_risk() {
        let t = truth_2x2(0.5);
        let model = CompletionModel::new(t, CompletionParam::Dense);
        let theta = [0.1, -0.2, 0.7, 0.5];
        let data = model.generate(100_000, 77);
        let losses: Vec<f64> = data.observations.iter().map(|z| model.excess_loss(&theta, z)).collect();
        let se = (stats::variance(&losses) / losses.len() as f64).sqrt();
        let emp = stats::mean(&losses);
        assert!((emp - model.population_risk(&theta)).abs() <= 3.0 * se);
    }
}
