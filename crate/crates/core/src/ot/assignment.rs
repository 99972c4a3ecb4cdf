//! Shortest-augmenting-path Hungarian method for rectangular assignment.

/// Solves `min Σ_i c(i, σ(i))` over injections `σ: [n] → [m]`, `n ≤ m`.
///
/// Returns `(σ, u, v)` with `u_i + v_j ≤ c(i, j)` for all pairs and equality
/// on matched pairs.
pub(crate) fn hungarian<C: Fn(usize, usize) -> f64>(n: usize, m: usize, cost: C) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    assert!(n <= m);
    // 1-based with a virtual column 0, as in the classical formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_optimum() {
        let c = [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let (a, u, v) = hungarian(3, 3, |i, j| c[i][j]);
        let total: f64 = (0..3).map(|i| c[i][a[i]]).sum();
        assert_eq!(total, 5.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!(u[i] + v[j] <= c[i][j] + 1e-12);
            }
            assert!((u[i] + v[a[i]] - c[i][a[i]]).abs() < 1e-12);
        }
    }
}
