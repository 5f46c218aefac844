//! Gauss-Legendre rules and composite tensor-grid integration on boxes.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order > 0, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule on `[lo, hi]` with `panels` equal panels of
/// `order` nodes each.
pub fn composite_rule(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + p as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(a + 0.5 * width * (x + 1.0));
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Visit every point of the tensor product of a one-dimensional rule in `dim`
/// dimensions, passing the point and its product weight.
pub fn for_each_tensor_point(dim: usize, nodes: &[f64], weights: &[f64], mut f: impl FnMut(&[f64], f64)) {
    let k = nodes.len();
    if dim == 0 {
        f(&[], 1.0);
        return;
    }
    let mut idx = vec![0usize; dim];
    let mut point: Vec<f64> = vec![nodes[0]; dim];
    loop {
        let w: f64 = idx.iter().map(|&i| weights[i]).product();
        f(&point, w);
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < k {
                point[axis] = nodes[idx[axis]];
                break;
            }
            idx[axis] = 0;
            point[axis] = nodes[0];
            axis += 1;
            if axis == dim {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for order in 1..12 {
            let (x, w) = gauss_legendre(order);
            for deg in 0..(2 * order) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn composite_rule_integrates_exp() {
        let (x, w) = composite_rule(0.0, 1.0, 4, 8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn tensor_grid_volume() {
        let (x, w) = composite_rule(0.0, 2.0, 2, 3);
        let mut vol = 0.0;
        let mut count = 0;
        for_each_tensor_point(3, &x, &w, |_, wt| {
            vol += wt;
            count += 1;
        });
        assert_eq!(count, 216);
        assert!((vol - 8.0).abs() < 1e-12);
    }
}
