//! One-dimensional transport: the monotone (quantile) coupling.

/// Basic cells `(i, j, mass)` with the duals `f` and `g`.
pub(crate) type MonotonePlan = (Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>);

/// Monotone coupling of two weighted point sets on the line.
///
/// Returns the nonzero cells and dual values `(f, g)` obtained along the
/// staircase basis, so `f_i − g_j = c(x_i, y_j)` on every basic cell. For a
/// convex cost of `x − y` these duals are feasible. Masses are compared
/// exactly when `tol == 0` (integer-valued masses).
pub(crate) fn monotone_plan<C: Fn(f64, f64) -> f64>(
    x: &[f64],
    a: &[f64],
    y: &[f64],
    b: &[f64],
    tol: f64,
    cost: C,
) -> MonotonePlan {
    let n = x.len();
    let m = y.len();
    let mut ix: Vec<usize> = (0..n).collect();
    let mut jy: Vec<usize> = (0..m).collect();
    ix.sort_by(|&p, &q| x[p].total_cmp(&x[q]).then(p.cmp(&q)));
    jy.sort_by(|&p, &q| y[p].total_cmp(&y[q]).then(p.cmp(&q)));

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut cells = Vec::with_capacity(n + m);
    let c = |i: usize, j: usize| cost(x[i], y[j]);

    let (mut p, mut q) = (0, 0);
    let mut ra = a[ix[0]];
    let mut rb = b[jy[0]];
    f[ix[0]] = 0.0;
    g[jy[0]] = -c(ix[0], jy[0]);
    loop {
        let i = ix[p];
        let j = jy[q];
        if ra < rb - tol {
            cells.push((i, j, ra));
            rb -= ra;
            p += 1;
            if p == n {
                break;
            }
            ra = a[ix[p]];
            f[ix[p]] = g[j] + c(ix[p], j);
        } else if rb < ra - tol {
            cells.push((i, j, rb));
            ra -= rb;
            q += 1;
            if q == m {
                break;
            }
            rb = b[jy[q]];
            g[jy[q]] = f[i] - c(i, jy[q]);
        } else {
            cells.push((i, j, 0.5 * (ra + rb)));
            p += 1;
            q += 1;
            if p == n || q == m {
                break;
            }
            // Degenerate step: link through the zero-flow cell (next source, j).
            f[ix[p]] = g[j] + c(ix[p], j);
            g[jy[q]] = f[ix[p]] - c(ix[p], jy[q]);
            ra = a[ix[p]];
            rb = b[jy[q]];
        }
    }
    // Atoms left unvisited only through rounding carry no mass; give them
    // the c-transform so the duals stay feasible.
    for &i in &ix[p.min(n)..] {
        if cells.iter().all(|cell| cell.0 != i) {
            f[i] = (0..m).map(|j| g[j] + c(i, j)).fold(f64::INFINITY, f64::min);
        }
    }
    for &j in &jy[q.min(m)..] {
        if cells.iter().all(|cell| cell.1 != j) {
            g[j] = (0..n).map(|i| f[i] - c(i, j)).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    (cells, f, g)
}

/// `W_1` between two uniformly weighted samples on the line, `∫ |F − G|`.
pub fn w1_uniform_1d(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    w1_sorted_uniform(&a, &b)
}

/// As [`w1_uniform_1d`] for inputs already sorted ascending.
pub fn w1_sorted_uniform(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let (wa, wb) = (1.0 / n as f64, 1.0 / m as f64);
    let (mut i, mut j) = (0, 0);
    let mut fa: f64 = 0.0;
    let mut fb = 0.0;
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < n || j < m {
        let t = if j == m || (i < n && a[i] <= b[j]) {
            let t = a[i];
            total += (fa - fb).abs() * (t - prev);
            fa = (i + 1) as f64 * wa;
            i += 1;
            t
        } else {
            let t = b[j];
            total += (fa - fb).abs() * (t - prev);
            fb = (j + 1) as f64 * wb;
            j += 1;
            t
        };
        prev = t;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_shift() {
        // uniform grid shifted by 0.25 is transported at cost 0.25
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.25).collect();
        assert!((w1_uniform_1d(&x, &y) - 0.25).abs() < 1e-12);
        assert!((w1_uniform_1d(&[0.0, 1.0], &[0.0, 2.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plan_marginals_and_duals() {
        let x = [0.3, -1.0, 2.0];
        let y = [0.0, 0.5, 1.0, 4.0];
        let a = [4.0; 3];
        let b = [3.0; 4];
        let (cells, f, g) = monotone_plan(&x, &a, &y, &b, 0.0, |u, v| (u - v).abs());
        let mut rows = [0.0; 3];
        let mut cols = [0.0; 4];
        for &(i, j, w) in &cells {
            rows[i] += w;
            cols[j] += w;
            assert!((f[i] - g[j] - (x[i] - y[j]).abs()).abs() < 1e-12);
        }
        assert_eq!(rows, a);
        assert_eq!(cols, b);
        for i in 0..3 {
            for j in 0..4 {
                assert!(f[i] - g[j] <= (x[i] - y[j]).abs() + 1e-12);
            }
        }
    }
}
