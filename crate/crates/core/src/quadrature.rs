//! Gauss–Legendre rules and tensor-product integration on boxes.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule mapped to `[a, b]`.
pub fn rule_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Composite tensor-product rule: `[0,1]^d` split into `cells^d` subcubes
/// with an `n`-point rule per axis inside each.
pub fn integrate_unit_cube<F>(d: usize, cells: usize, n: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut xs = Vec::with_capacity(cells * n);
    let mut ws = Vec::with_capacity(cells * n);
    for c in 0..cells {
        let a = c as f64 / cells as f64;
        let b = (c + 1) as f64 / cells as f64;
        let (x, w) = rule_on(a, b, n);
        xs.extend(x);
        ws.extend(w);
    }
    let k = xs.len();
    let total = k.pow(d as u32);
    let mut point = vec![0.0; d];
    let mut acc = 0.0;
    for idx in 0..total {
        let mut rem = idx;
        let mut w = 1.0;
        for p in point.iter_mut() {
            let i = rem % k;
            rem /= k;
            *p = xs[i];
            w *= ws[i];
        }
        acc += w * f(&point);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64, 128] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // an n-point rule integrates degree 2n-1 exactly
        let (x, w) = gauss_legendre(4);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((got - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn three_point_nodes() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cube_integral() {
        let v = integrate_unit_cube(2, 2, 6, |p| (p[0] * PI).sin() * p[1] * p[1]);
        assert!((v - (2.0 / PI) / 3.0).abs() < 1e-10);
    }
}
