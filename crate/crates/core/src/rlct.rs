//! Real log canonical thresholds as exact rationals.
//!
//! Covers the matrix-completion RLCT (both the discrete minimization of the
//! blow-up dimension count `h(t)` and the four-regime closed form), the ReLU
//! upper bound, pole extraction from normal-crossing chart data, and the
//! matrix constants used to bring the completion risk into canonical form.

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

pub type Rational = Ratio<i64>;

/// Serialize a rational as `{"num": .., "den": ..}`.
pub mod rational_json {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        num: i64,
        den: i64,
    }

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Repr { num: *r.numer(), den: *r.denom() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let repr = Repr::deserialize(d)?;
        if repr.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rational::new(repr.num, repr.den))
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Leading pole `λ` of the zeta function and its order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlctPair {
    #[serde(with = "rational_json")]
    pub lambda: Rational,
    pub m: u32,
}

impl RlctPair {
    pub fn new(lambda: Rational, m: u32) -> Result<Self> {
        if lambda <= Rational::from_integer(0) || m == 0 {
            return Err(invalid(format!("need lambda > 0 and m >= 1, got ({lambda}, {m})")));
        }
        Ok(Self { lambda, m })
    }

    /// `λ ≤ d/2` for a model with `d` free parameters.
    pub fn within_ambient(&self, d: u64) -> bool {
        self.lambda <= Rational::new(d as i64, 2)
    }

    /// `λ log n − (m − 1) log log n`.
    pub fn complexity(&self, n: f64) -> f64 {
        to_f64(&self.lambda) * n.ln() - (self.m as f64 - 1.0) * n.ln().ln()
    }
}

/// Shape of a matrix-completion problem: `d1×d2` matrix, factor width `H`,
/// true rank `r`, restricted to the nontrivial range `0 < r < H ≤ min(d1, d2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionDims {
    pub d1: u32,
    pub d2: u32,
    pub h: u32,
    pub r: u32,
}

impl CompletionDims {
    pub fn new(d1: u32, d2: u32, h: u32, r: u32) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(invalid("matrix dimensions must be positive"));
        }
        if r == 0 || r >= h {
            return Err(invalid(format!("need 0 < r < H, got r={r}, H={h} (the r = H boundary is not covered)")));
        }
        if h > d1.min(d2) {
            return Err(invalid(format!("need H <= min(d1, d2), got H={h}, d1={d1}, d2={d2}")));
        }
        if h + r > d1 + d2 {
            return Err(invalid(format!("need H + r <= d1 + d2, got H={h}, r={r}")));
        }
        Ok(Self { d1, d2, h, r })
    }

    fn signed(&self) -> (i64, i64, i64, i64) {
        (self.d1 as i64, self.d2 as i64, self.h as i64, self.r as i64)
    }

    /// Free parameters `H(d1 + d2)` in the factorization `M = UV`.
    pub fn parameter_count(&self) -> u64 {
        self.h as u64 * (self.d1 as u64 + self.d2 as u64)
    }
}

/// `h(t) = r(d1 + d2 − r) + t(d1 − r) + (H − r − t)(d2 − r − t)` for
/// `0 ≤ t ≤ H − r`.
pub fn h_of_t(d1: u32, d2: u32, h: u32, r: u32, t: u32) -> Result<i64> {
    let dims = CompletionDims::new(d1, d2, h, r)?;
    if t > h - r {
        return Err(invalid(format!("t = {t} outside 0..={}", h - r)));
    }
    Ok(h_value(&dims, t as i64))
}

fn h_value(dims: &CompletionDims, t: i64) -> i64 {
    let (d1, d2, h, r) = dims.signed();
    r * (d1 + d2 - r) + t * (d1 - r) + (h - r - t) * (d2 - r - t)
}

/// Which branch of the closed-form completion RLCT applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
    #[serde(rename = "interior-even")]
    InteriorEven,
    #[serde(rename = "interior-odd")]
    InteriorOdd,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Case1 => "case1",
            Regime::Case2 => "case2",
            Regime::InteriorEven => "interior-even",
            Regime::InteriorOdd => "interior-odd",
        }
    }
}

pub fn completion_regime(dims: &CompletionDims) -> Regime {
    let (d1, d2, h, r) = dims.signed();
    if h <= d1 - d2 + r {
        Regime::Case1
    } else if h <= d2 - d1 + r {
        Regime::Case2
    } else if (h + d1 + d2 + r) % 2 == 0 {
        Regime::InteriorEven
    } else {
        Regime::InteriorOdd
    }
}

/// RLCT of matrix completion as `λ = ½ min_t h(t)` over integer
/// `0 ≤ t ≤ H − r`, with `m` the number of minimizers.
pub fn completion_rlct(d1: u32, d2: u32, h: u32, r: u32) -> Result<RlctPair> {
    let dims = CompletionDims::new(d1, d2, h, r)?;
    let values: Vec<i64> = (0..=(dims.h - dims.r) as i64).map(|t| h_value(&dims, t)).collect();
    let min = *values.iter().min().expect("t = 0 always admissible");
    let m = values.iter().filter(|&&v| v == min).count() as u32;
    RlctPair::new(Rational::new(min, 2), m)
}

/// The four-regime closed form, evaluated exactly as printed. In the odd
/// interior regime this sits 1/4 below [`completion_rlct`].
pub fn completion_rlct_closed_form(d1: u32, d2: u32, h: u32, r: u32) -> Result<RlctPair> {
    let dims = CompletionDims::new(d1, d2, h, r)?;
    let (d1, d2, h, r) = dims.signed();
    let case1 = Rational::new(h * d2 - h * r + d1 * r, 2);
    let shift = h - d1 + d2 - r;
    match completion_regime(&dims) {
        Regime::Case1 => RlctPair::new(case1, 1),
        Regime::Case2 => RlctPair::new(Rational::new(h * d1 - h * r + d2 * r, 2), 1),
        Regime::InteriorEven => RlctPair::new(case1 - Rational::new(shift * shift, 8), 1),
        Regime::InteriorOdd => RlctPair::new(case1 - Rational::new(shift * shift + 1, 8), 2),
    }
}

/// Both completion RLCT routes side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionRlctReport {
    pub dims: CompletionDims,
    pub regime: Regime,
    pub discrete: RlctPair,
    pub closed_form: RlctPair,
    pub agree: bool,
    /// `closed_form.lambda − discrete.lambda`.
    #[serde(with = "rational_json")]
    pub discrepancy: Rational,
}

pub fn compare_completion_rlct(d1: u32, d2: u32, h: u32, r: u32) -> Result<CompletionRlctReport> {
    let dims = CompletionDims::new(d1, d2, h, r)?;
    let discrete = completion_rlct(d1, d2, h, r)?;
    let closed_form = completion_rlct_closed_form(d1, d2, h, r)?;
    Ok(CompletionRlctReport {
        dims,
        regime: completion_regime(&dims),
        discrete,
        closed_form,
        agree: discrete == closed_form,
        discrepancy: closed_form.lambda - discrete.lambda,
    })
}

/// `½ Σ_{k≥2} H_k (H_{k−1} + 1)` over the widths of the minimal network
/// realizing the truth.
pub fn relu_rlct_upper_bound(true_widths: &[u32]) -> Result<Rational> {
    if true_widths.len() < 2 {
        return Err(invalid("a network needs at least two layers"));
    }
    if true_widths.contains(&0) {
        return Err(invalid("layer widths must be positive"));
    }
    let free: i64 = true_widths.windows(2).map(|w| w[1] as i64 * (w[0] as i64 + 1)).sum();
    Ok(Rational::new(free, 2))
}

/// Local normal-crossing data of one chart: the risk is `∏ u_j^{2k_j}` and
/// the Jacobian `∏ u_j^{h_j}` up to nonvanishing factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalCrossingChart {
    pub k: Vec<u32>,
    pub h: Vec<u32>,
}

impl NormalCrossingChart {
    pub fn new(k: Vec<u32>, h: Vec<u32>) -> Result<Self> {
        if k.len() != h.len() {
            return Err(Error::DimensionMismatch { context: "chart exponents", expected: k.len(), got: h.len() });
        }
        Ok(Self { k, h })
    }

    /// Candidate poles `(h_j + 1)/(2 k_j)`; `None` stands for +∞ (`k_j = 0`).
    pub fn candidates(&self) -> impl Iterator<Item = Option<Rational>> + '_ {
        self.k
            .iter()
            .zip(&self.h)
            .map(|(&k, &h)| (k > 0).then(|| Rational::new(h as i64 + 1, 2 * k as i64)))
    }
}

/// `λ = min over charts and coordinates of (h_j + 1)/(2k_j)`; `m` is the
/// largest number of coordinates attaining `λ` within a single chart.
pub fn normal_crossing_rlct(charts: &[NormalCrossingChart]) -> Result<RlctPair> {
    if charts.is_empty() {
        return Err(Error::EmptyInput("normal-crossing RLCT needs at least one chart"));
    }
    for c in charts {
        if c.k.len() != c.h.len() {
            return Err(Error::DimensionMismatch { context: "chart exponents", expected: c.k.len(), got: c.h.len() });
        }
    }
    let lambda = charts
        .iter()
        .flat_map(|c| c.candidates())
        .flatten()
        .min()
        .ok_or_else(|| invalid("every candidate pole is infinite (all k = 0)"))?;
    let m = charts
        .iter()
        .map(|c| c.candidates().filter(|v| *v == Some(lambda)).count() as u32)
        .max()
        .unwrap_or(0);
    RlctPair::new(lambda, m)
}

/// The regular-model value `d/2`, an upper bound for any RLCT.
pub fn regular_bic_lambda(d: u64) -> Result<Rational> {
    if d == 0 {
        return Err(invalid("parameter count must be positive"));
    }
    Ok(Rational::new(d as i64, 2))
}

/// `(σ²_min(P0) σ²_min(Q0), σ²_max(P0) σ²_max(Q0))`: the constants bracketing
/// `‖M − M⋆‖²_F` by `‖P0⁻¹ M Q0⁻¹ − M_r‖²_F`.
pub fn frobenius_conjugation_bounds(p0: &DMatrix<f64>, q0: &DMatrix<f64>) -> Result<(f64, f64)> {
    for (name, m) in [("P0", p0), ("Q0", q0)] {
        if !m.is_square() {
            return Err(invalid(format!("{name} must be square")));
        }
    }
    let (pmin, pmax) = linalg::extreme_singular_values(p0);
    let (qmin, qmax) = linalg::extreme_singular_values(q0);
    if pmin <= 1e-12 || qmin <= 1e-12 {
        return Err(Error::Singular(format!("smallest singular values {pmin:e}, {qmin:e}")));
    }
    Ok(((pmin * qmin).powi(2), (pmax * qmax).powi(2)))
}

/// `D = max(2‖A‖²_F + 1, 2)`.
pub fn finite_operator_constant(a: &DMatrix<f64>) -> f64 {
    (2.0 * linalg::frobenius_sq(a) + 1.0).max(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn h_of_t_values() {
        assert_eq!(h_of_t(5, 3, 2, 1, 0).unwrap(), 9);
        assert_eq!(h_of_t(3, 3, 2, 1, 0).unwrap(), 7);
        assert_eq!(h_of_t(3, 3, 2, 1, 1).unwrap(), 7);
        assert_eq!(h_of_t(3, 3, 3, 1, 1).unwrap(), 8);
        assert!(h_of_t(3, 3, 2, 1, 2).is_err());
        assert!(h_of_t(3, 3, 2, 2, 0).is_err());
        assert!(h_of_t(3, 3, 2, 0, 0).is_err());
    }

    #[test]
    fn discrete_rlct_examples() {
        assert_eq!(completion_rlct(5, 3, 2, 1).unwrap(), RlctPair { lambda: q(9, 2), m: 1 });
        assert_eq!(completion_rlct(3, 3, 3, 1).unwrap(), RlctPair { lambda: q(4, 1), m: 1 });
        assert_eq!(completion_rlct(2, 2, 2, 1).unwrap(), RlctPair { lambda: q(2, 1), m: 2 });
    }

    #[test]
    fn closed_form_examples() {
        let c = completion_rlct_closed_form(5, 3, 2, 1).unwrap();
        assert_eq!((c, completion_regime(&CompletionDims::new(5, 3, 2, 1).unwrap())), (RlctPair { lambda: q(9, 2), m: 1 }, Regime::Case1));
        assert_eq!(completion_rlct_closed_form(3, 3, 3, 1).unwrap(), RlctPair { lambda: q(4, 1), m: 1 });
        // odd interior: 4/2 − (1² + 1)/8 = 7/4, a quarter below the discrete minimum 2
        let report = compare_completion_rlct(2, 2, 2, 1).unwrap();
        assert_eq!(report.regime, Regime::InteriorOdd);
        assert_eq!(report.closed_form, RlctPair { lambda: q(7, 4), m: 2 });
        assert_eq!(report.discrepancy, q(-1, 4));
        assert!(!report.agree);
    }

    #[test]
    fn case2_mirrors_case1() {
        let a = compare_completion_rlct(5, 3, 2, 1).unwrap();
        let b = compare_completion_rlct(3, 5, 2, 1).unwrap();
        assert_eq!(b.regime, Regime::Case2);
        assert_eq!(a.discrete.lambda, b.discrete.lambda);
        assert!(b.agree);
    }

    fn admissible() -> impl Strategy<Value = (u32, u32, u32, u32)> {
        (1u32..=8, 1u32..=8).prop_flat_map(|(d1, d2)| {
            let hmax = d1.min(d2);
            (Just(d1), Just(d2), 1u32..=hmax.max(1)).prop_flat_map(|(d1, d2, h)| (Just(d1), Just(d2), Just(h), 0u32..h.max(1)))
        })
        .prop_filter("nontrivial", |&(_, _, h, r)| r >= 1 && r < h)
    }

    proptest! {
        #[test]
        fn rlct_below_parameter_counts((d1, d2, h, r) in admissible()) {
            let p = completion_rlct(d1, d2, h, r).unwrap();
            prop_assert!(p.lambda <= q((h * (d1 + d2)) as i64, 2));
            prop_assert!(p.lambda <= q((d1 * d2) as i64, 2));
        }

        #[test]
        fn h_has_constant_second_difference((d1, d2, h, r) in admissible()) {
            for t in 1..(h - r) {
                let v = |t| h_of_t(d1, d2, h, r, t).unwrap();
                prop_assert_eq!(v(t + 1) - 2 * v(t) + v(t - 1), 2);
            }
        }

        #[test]
        fn routes_agree_except_odd_interior((d1, d2, h, r) in admissible()) {
            let rep = compare_completion_rlct(d1, d2, h, r).unwrap();
            if rep.regime == Regime::InteriorOdd {
                prop_assert_eq!(rep.discrepancy, q(-1, 4));
                prop_assert_eq!(rep.discrete.m, rep.closed_form.m);
            } else {
                prop_assert!(rep.agree);
            }
        }

        #[test]
        fn swap_symmetry((d1, d2, h, r) in admissible()) {
            let a = completion_rlct(d1, d2, h, r).unwrap();
            let b = completion_rlct(d2, d1, h, r).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn chart_invariances(k in proptest::collection::vec(0u32..4, 1..5), h in proptest::collection::vec(0u32..4, 5), seed in 0u64..1000) {
            let h = h[..k.len()].to_vec();
            prop_assume!(k.iter().any(|&v| v > 0));
            let chart = NormalCrossingChart::new(k.clone(), h.clone()).unwrap();
            let base = normal_crossing_rlct(&[chart.clone()]).unwrap();
            let mut r = rng::stream(seed, 0);
            let mut idx: Vec<usize> = (0..k.len()).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, r.random_range(0..=i));
            }
            let permuted = NormalCrossingChart::new(idx.iter().map(|&i| k[i]).collect(), idx.iter().map(|&i| h[i]).collect()).unwrap();
            prop_assert_eq!(normal_crossing_rlct(&[permuted]).unwrap(), base);
            prop_assert_eq!(normal_crossing_rlct(&[chart.clone(), chart]).unwrap(), base);
        }
    }

    #[test]
    fn relu_bound_examples() {
        assert_eq!(relu_rlct_upper_bound(&[2, 3, 1]).unwrap(), q(13, 2));
        assert_eq!(relu_rlct_upper_bound(&[1, 1]).unwrap(), q(1, 1));
        assert_eq!(relu_rlct_upper_bound(&[5, 1]).unwrap(), q(3, 1));
        assert!(relu_rlct_upper_bound(&[4]).is_err());
    }

    #[test]
    fn blow_up_example_charts() {
        let charts = [
            NormalCrossingChart::new(vec![1, 0, 1], vec![1, 0, 0]).unwrap(),
            NormalCrossingChart::new(vec![0, 1, 1], vec![0, 1, 0]).unwrap(),
        ];
        assert_eq!(normal_crossing_rlct(&charts).unwrap(), RlctPair { lambda: q(1, 2), m: 1 });
        let one = NormalCrossingChart::new(vec![1], vec![0]).unwrap();
        assert_eq!(normal_crossing_rlct(&[one]).unwrap(), RlctPair { lambda: q(1, 2), m: 1 });
        let tie = NormalCrossingChart::new(vec![1, 1], vec![0, 0]).unwrap();
        assert_eq!(normal_crossing_rlct(&[tie]).unwrap(), RlctPair { lambda: q(1, 2), m: 2 });
        let flat = NormalCrossingChart::new(vec![0, 0], vec![1, 2]).unwrap();
        assert!(normal_crossing_rlct(&[flat]).is_err());
        assert!(normal_crossing_rlct(&[]).is_err());
    }

    #[test]
    fn bic_lambda() {
        assert_eq!(regular_bic_lambda(1).unwrap(), q(1, 2));
        assert_eq!(regular_bic_lambda(8).unwrap(), q(4, 1));
        assert_eq!(regular_bic_lambda(13).unwrap(), q(13, 2));
    }

    #[test]
    fn conjugation_bounds_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let (lo, hi) = frobenius_conjugation_bounds(&i2, &i2).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let (lo, hi) = frobenius_conjugation_bounds(&p, &i2).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        assert!(frobenius_conjugation_bounds(&DMatrix::zeros(2, 2), &i2).is_err());
    }

    #[test]
    fn conjugation_sandwich_on_random_matrices() {
        let mut r = rng::stream(17, 0);
        let p0 = DMatrix::<f64>::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.0 } + r.random_range(-0.5..0.5));
        let q0 = DMatrix::<f64>::from_fn(3, 3, |i, j| if i == j { 1.5 } else { 0.0 } + r.random_range(-0.5..0.5));
        let (lo, hi) = frobenius_conjugation_bounds(&p0, &q0).unwrap();
        let mut mr = DMatrix::<f64>::zeros(3, 3);
        mr[(0, 0)] = 1.0;
        let m_star = &p0 * &mr * &q0;
        let (pi, qi) = (p0.clone().try_inverse().unwrap(), q0.clone().try_inverse().unwrap());
        for _ in 0..50 {
            let m = DMatrix::<f64>::from_fn(3, 3, |_, _| r.random_range(-2.0..2.0));
            let canon = &pi * &m * &qi - &mr;
            let err = linalg::frobenius_sq(&(&m - &m_star));
            let c = linalg::frobenius_sq(&canon);
            assert!(lo * c <= err * (1.0 + 1e-9) + 1e-12);
            assert!(err <= hi * c * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn finite_operator_constant_cases() {
        assert_eq!(finite_operator_constant(&DMatrix::zeros(2, 3)), 2.0);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        assert_eq!(finite_operator_constant(&a), 7.0);
    }

    #[test]
    fn finite_operator_sandwich() {
        let mut r = rng::stream(31, 0);
        for _ in 0..100 {
            let (h1, h2, h3) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1..4));
            let mut rand_mat = |rows, cols| DMatrix::<f64>::from_fn(rows, cols, |_, _| r.random_range(-2.0..2.0));
            let a1 = rand_mat(h3, h2);
            let a2 = rand_mat(h3, h1);
            let a = rand_mat(h2, h1);
            let d = finite_operator_constant(&a);
            let base = linalg::frobenius_sq(&a1) + linalg::frobenius_sq(&a2);
            let mixed = linalg::frobenius_sq(&a1) + linalg::frobenius_sq(&(&a2 + &a1 * &a));
            assert!(base / d <= mixed * (1.0 + 1e-12));
            assert!(mixed <= d * base * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pair_json_shape() {
        let p = RlctPair { lambda: q(9, 2), m: 1 };
        let v = serde_json::to_value(p).unwrap();
        assert_eq!(v["lambda"]["num"], 9);
        assert_eq!(v["lambda"]["den"], 2);
        let back: RlctPair = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
