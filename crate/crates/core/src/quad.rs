//! Small quadrature helpers shared by the modules.

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Five-point Gauss-Legendre rule on `[a, b]`; exact for polynomials of degree 9.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Trapezoid rule over arbitrary sorted abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid_uniform(h: f64, y: &[f64]) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (y[0] + y[n - 1]) + y[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integral: `out[j] = ∫_{x_0}^{x_j} y`.
pub fn cumulative_trapezoid_uniform(h: f64, y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for (j, v) in y.iter().enumerate() {
        if j > 0 {
            acc += 0.5 * h * (y[j - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Derivative estimates on a sorted, possibly non-uniform point set: three-point
/// centered formula inside, three-point one-sided formulas at the ends.
pub fn derivative_nonuniform(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (y[1] - y[0]) / (x[1] - x[0]);
            vec![d, d]
        }
        _ => {
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h1 = x[i] - x[i - 1];
                let h2 = x[i + 1] - x[i];
                d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1]
                    + (h2 - h1) / (h1 * h2) * y[i]
                    + h1 / (h2 * (h1 + h2)) * y[i + 1];
            }
            let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
            d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1]
                - h1 / (h2 * (h1 + h2)) * y[2];
            let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
            d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2]
                + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
            d
        }
    }
}

/// Least-squares slope of `log2(err)` against `-log2(h)` refinement levels,
/// i.e. the observed order when each level halves the step.
pub fn observed_order(errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .map(|(k, e)| (k as f64, e.log2()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    -sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_for_degree_nine() {
        let f = |x: f64| x.powi(9) - 3.0 * x.powi(4) + 1.0;
        let exact = (1.0f64 / 10.0) * (2f64.powi(10) - 1.0) - 3.0 / 5.0 * (32.0 - 1.0) + 1.0;
        assert!((gauss_legendre(f, 1.0, 2.0) - exact).abs() < 1e-11);
    }

    #[test]
    fn derivative_exact_for_quadratics() {
        let x = [0.0, 0.1, 0.35, 0.4, 1.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v * v - v).collect();
        for (xi, d) in x.iter().zip(derivative_nonuniform(&x, &y)) {
            assert!((d - (4.0 * xi - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn order_of_exact_halving() {
        assert!((observed_order(&[1.0, 0.25, 0.0625]) - 2.0).abs() < 1e-12);
    }
}
