//! Exact optimal transport between empirical measures.
//!
//! Solver routing:
//! * `D = 1`: the monotone coupling (optimal for any convex cost of `x − y`);
//! * uniform weights with equal sizes up to [`ASSIGNMENT_MAX`]: Hungarian method;
//! * otherwise the network simplex, on the full bipartite graph when it has at
//!   most [`DENSE_ARCS`] arcs and on a nearest-neighbour graph grown by full
//!   pricing rounds beyond that.
//!
//! Duals follow `max Σ a_i f_i − Σ b_j g_j` subject to `f_i − g_j ≤ c(x_i, y_j)`.

mod assignment;
mod monotone;
mod potential;
mod rates;
mod simplex;

pub use monotone::{w1_sorted_uniform, w1_uniform_1d};
pub use potential::PotentialFn;
pub use rates::{empirical_rate_table, rate_cell, RateLaw, PROXY_FACTOR};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::par;
use simplex::NetworkSimplex;

pub const ASSIGNMENT_MAX: usize = 512;
pub const DENSE_ARCS: usize = 1 << 20;
const KNN: usize = 8;
const POOL: usize = 48;
const PRICE_PER_ROW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundCost {
    Euclidean,
    SquaredEuclidean,
}

impl GroundCost {
    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            GroundCost::Euclidean => d2.sqrt(),
            GroundCost::SquaredEuclidean => d2,
        }
    }
}

/// Optimal coupling in sparse form plus dual potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub n: usize,
    pub m: usize,
    /// `(i, j, mass)` cells with positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// `f_i` at source atoms.
    pub source_potential: Vec<f64>,
    /// `g_j` at target atoms.
    pub target_potential: Vec<f64>,
}

impl TransportPlan {
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.m];
        for &(i, j, w) in &self.entries {
            out[i * self.m + j] += w;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        for &(i, _, w) in &self.entries {
            r[i] += w;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        for &(_, j, w) in &self.entries {
            c[j] += w;
        }
        c
    }

    /// `Σ a_i f_i − Σ b_j g_j`.
    pub fn dual_value(&self, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
        let a: f64 = mu
            .weights()
            .iter()
            .zip(&self.source_potential)
            .map(|(w, f)| w * f)
            .sum();
        let b: f64 = nu
            .weights()
            .iter()
            .zip(&self.target_potential)
            .map(|(w, g)| w * g)
            .sum();
        a - b
    }
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::ShapeMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    for m in [mu, nu] {
        if m.weights().iter().sum::<f64>() <= 0.0 {
            return Err(Error::DegenerateInput("measure has zero total mass".into()));
        }
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact transport under `cost`.
pub fn transport(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, cost: GroundCost) -> Result<TransportPlan> {
    check_pair(mu, nu)?;
    let keep_s: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights()[i] > 0.0).collect();
    let keep_t: Vec<usize> = (0..nu.len()).filter(|&j| nu.weights()[j] > 0.0).collect();
    let (ns, nt) = (keep_s.len(), keep_t.len());
    let xs: Vec<f64> = keep_s.iter().flat_map(|&i| mu.point(i).iter().copied()).collect();
    let ys: Vec<f64> = keep_t.iter().flat_map(|&j| nu.point(j).iter().copied()).collect();
    let geo = Geometry {
        dim: mu.dim(),
        xs: &xs,
        ys: &ys,
        cost,
    };
    let c = |i: usize, j: usize| geo.c(i, j);

    // Uniform masses are scaled to integers so flows stay exact.
    let uniform = mu.is_uniform() && nu.is_uniform();
    let (a, b, total): (Vec<f64>, Vec<f64>, f64) = if uniform {
        let g = gcd(ns, nt);
        (
            vec![(nt / g) as f64; ns],
            vec![(ns / g) as f64; nt],
            (ns / g * nt) as f64,
        )
    } else {
        (
            keep_s.iter().map(|&i| mu.weights()[i]).collect(),
            keep_t.iter().map(|&j| nu.weights()[j]).collect(),
            1.0,
        )
    };

    let (cells, f, g) = if mu.dim() == 1 {
        let tol = if uniform { 0.0 } else { 1e-14 };
        match cost {
            GroundCost::Euclidean => monotone::monotone_plan(&xs, &a, &ys, &b, tol, |x, y| (x - y).abs()),
            GroundCost::SquaredEuclidean => monotone::monotone_plan(&xs, &a, &ys, &b, tol, |x, y| (x - y) * (x - y)),
        }
    } else if uniform && ns == nt && ns <= ASSIGNMENT_MAX {
        let (assign, u, v) = assignment::hungarian(ns, nt, c);
        let cells = assign.iter().enumerate().map(|(i, &j)| (i, j, a[i])).collect();
        (cells, u, v.iter().map(|x| -x).collect())
    } else {
        solve_simplex(&geo, &a, &b)
    };

    // Zero-mass atoms get c-transformed duals.
    let mut source_potential = vec![0.0; mu.len()];
    let mut target_potential = vec![0.0; nu.len()];
    for (k, &i) in keep_s.iter().enumerate() {
        source_potential[i] = f[k];
    }
    for (k, &j) in keep_t.iter().enumerate() {
        target_potential[j] = g[k];
    }
    for j in (0..nu.len()).filter(|&j| nu.weights()[j] <= 0.0) {
        target_potential[j] = keep_s
            .iter()
            .enumerate()
            .map(|(k, &i)| f[k] - cost.eval(mu.point(i), nu.point(j)))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    for i in (0..mu.len()).filter(|&i| mu.weights()[i] <= 0.0) {
        source_potential[i] = (0..nu.len())
            .map(|j| target_potential[j] + cost.eval(mu.point(i), nu.point(j)))
            .fold(f64::INFINITY, f64::min);
    }
    // Fix the additive gauge.
    let shift = source_potential[keep_s[0]];
    source_potential.iter_mut().for_each(|v| *v -= shift);
    target_potential.iter_mut().for_each(|v| *v -= shift);

    let mut entries = Vec::with_capacity(cells.len());
    let mut total_cost = 0.0;
    for (i, j, w) in cells {
        if w > 0.0 {
            let mass = w / total;
            total_cost += mass * c(i, j);
            entries.push((keep_s[i], keep_t[j], mass));
        }
    }
    Ok(TransportPlan {
        n: mu.len(),
        m: nu.len(),
        entries,
        cost: total_cost,
        source_potential,
        target_potential,
    })
}

type Solution = (Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>);

/// Contiguous source and target coordinates with a ground cost.
struct Geometry<'a> {
    dim: usize,
    xs: &'a [f64],
    ys: &'a [f64],
    cost: GroundCost,
}

impl Geometry<'_> {
    fn n(&self) -> usize {
        self.xs.len() / self.dim
    }

    fn m(&self) -> usize {
        self.ys.len() / self.dim
    }

    #[inline]
    fn d2(&self, i: usize, j: usize) -> f64 {
        match self.dim {
            2 => {
                let (x, y) = (&self.xs[2 * i..2 * i + 2], &self.ys[2 * j..2 * j + 2]);
                let (a, b) = (x[0] - y[0], x[1] - y[1]);
                a * a + b * b
            }
            3 => {
                let (x, y) = (&self.xs[3 * i..3 * i + 3], &self.ys[3 * j..3 * j + 3]);
                let (a, b, c) = (x[0] - y[0], x[1] - y[1], x[2] - y[2]);
                a * a + b * b + c * c
            }
            d => {
                let x = &self.xs[i * d..(i + 1) * d];
                let y = &self.ys[j * d..(j + 1) * d];
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
            }
        }
    }

    /// Squared distances from source `i` to every target.
    fn row_d2(&self, i: usize, out: &mut [f64]) {
        let d = self.dim;
        let x = &self.xs[i * d..(i + 1) * d];
        match d {
            2 => {
                for (o, y) in out.iter_mut().zip(self.ys.chunks_exact(2)) {
                    let (a, b) = (x[0] - y[0], x[1] - y[1]);
                    *o = a * a + b * b;
                }
            }
            3 => {
                for (o, y) in out.iter_mut().zip(self.ys.chunks_exact(3)) {
                    let (a, b, c) = (x[0] - y[0], x[1] - y[1], x[2] - y[2]);
                    *o = a * a + b * b + c * c;
                }
            }
            _ => {
                for (o, y) in out.iter_mut().zip(self.ys.chunks_exact(d)) {
                    *o = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                }
            }
        }
    }

    #[inline]
    fn cost_of_d2(&self, d2: f64) -> f64 {
        match self.cost {
            GroundCost::Euclidean => d2.sqrt(),
            GroundCost::SquaredEuclidean => d2,
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost_of_d2(self.d2(i, j))
    }

    /// Squared distance below which the cost is below `t > 0`.
    #[inline]
    fn d2_below(&self, t: f64) -> f64 {
        match self.cost {
            GroundCost::Euclidean => t * t,
            GroundCost::SquaredEuclidean => t,
        }
    }
}

fn solve_simplex(geo: &Geometry, a: &[f64], b: &[f64]) -> Solution {
    solve_simplex_with(geo, a, b, geo.n() * geo.m() <= DENSE_ARCS)
}

fn solve_simplex_with(geo: &Geometry, a: &[f64], b: &[f64], dense: bool) -> Solution {
    let (n, m) = (geo.n(), geo.m());
    let mut supply = a.to_vec();
    supply.extend(b.iter().map(|v| -v));

    let (max_cost, knn) = if dense {
        let mx = par::map_range(n, |i| (0..m).map(|j| geo.d2(i, j)).fold(0.0, f64::max))
            .into_iter()
            .fold(0.0, f64::max);
        (geo.cost_of_d2(mx), Vec::new())
    } else {
        neighbour_arcs(geo)
    };
    let art = (max_cost + 1.0) * (n + m + 1) as f64;
    let tol = 64.0 * f64::EPSILON * art;
    let mut ns = NetworkSimplex::new(supply, art, tol);
    if dense {
        for i in 0..n {
            for j in 0..m {
                ns.add_arc(i, n + j, geo.c(i, j));
            }
        }
        ns.solve();
    } else {
        for (i, pool) in knn.iter().enumerate() {
            for &j in &pool[..KNN.min(pool.len())] {
                ns.add_arc(i, n + j, geo.c(i, j));
            }
        }
        // Cheap rounds price the neighbour pool; a full pass over all pairs
        // decides termination.
        let mut full = false;
        loop {
            ns.solve();
            let pi = ns.potentials();
            let rows = par::map_range(n, |i| {
                let mut best: Vec<(f64, usize)> = Vec::with_capacity(PRICE_PER_ROW + 1);
                if full {
                    let mut buf = vec![0.0; m];
                    geo.row_d2(i, &mut buf);
                    let thr = pi[i] + tol;
                    for (j, (&d2, &pj)) in buf.iter().zip(&pi[n..]).enumerate() {
                        let t = pj - thr;
                        if t > 0.0 && d2 < geo.d2_below(t) {
                            let rc = geo.cost_of_d2(d2) + pi[i] - pj;
                            if rc < -tol {
                                push_best(&mut best, (rc, j), PRICE_PER_ROW);
                            }
                        }
                    }
                } else {
                    let mut consider = |j: usize| {
                        let t = pi[n + j] - pi[i] - tol;
                        if t > 0.0 {
                            let d2 = geo.d2(i, j);
                            if d2 < geo.d2_below(t) {
                                let rc = geo.cost_of_d2(d2) + pi[i] - pi[n + j];
                                if rc < -tol {
                                    push_best(&mut best, (rc, j), PRICE_PER_ROW);
                                }
                            }
                        }
                    };
                    knn[i].iter().for_each(|&j| consider(j));
                }
                best
            });
            let mut added = 0;
            for (i, row) in rows.into_iter().enumerate() {
                for (_, j) in row {
                    ns.add_arc(i, n + j, geo.c(i, j));
                    added += 1;
                }
            }
            if added == 0 {
                if full {
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }
    }
    debug_assert!(ns.artificial_flow() <= 1e-9 * a.iter().sum::<f64>());
    let cells = (0..ns.num_real_arcs())
        .map(|e| ns.arc(e))
        .filter(|&(_, _, f)| f > 0.0)
        .map(|(u, v, f)| (u, v - n, f))
        .collect();
    let pi = ns.potentials();
    let f = pi[..n].iter().map(|p| -p).collect();
    let g = pi[n..].iter().map(|p| -p).collect();
    (cells, f, g)
}

/// Keeps the `k` smallest keys in ascending order (ties by index).
fn push_best(best: &mut Vec<(f64, usize)>, item: (f64, usize), k: usize) {
    if best.len() == k {
        let worst = best[k - 1];
        if item.0 > worst.0 || (item.0 == worst.0 && item.1 > worst.1) {
            return;
        }
        best.pop();
    }
    let pos = best.partition_point(|e| e.0 < item.0 || (e.0 == item.0 && e.1 < item.1));
    best.insert(pos, item);
}

/// The `POOL` nearest targets of every source, nearest first, and the
/// largest cost over all pairs.
fn neighbour_arcs(geo: &Geometry) -> (f64, Vec<Vec<usize>>) {
    let m = geo.m();
    let rows = par::map_range(geo.n(), |i| {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(POOL + 1);
        let mut buf = vec![0.0; m];
        geo.row_d2(i, &mut buf);
        let mut mx: f64 = 0.0;
        let mut worst = f64::INFINITY;
        for (j, &d2) in buf.iter().enumerate() {
            mx = mx.max(d2);
            if d2 < worst || best.len() < POOL {
                push_best(&mut best, (d2, j), POOL);
                if best.len() == POOL {
                    worst = best[POOL - 1].0;
                }
            }
        }
        (mx, best)
    });
    let mut max_d2: f64 = 0.0;
    let mut pools = Vec::with_capacity(rows.len());
    for (mx, best) in rows {
        max_d2 = max_d2.max(mx);
        pools.push(best.into_iter().map(|(_, j)| j).collect());
    }
    (geo.cost_of_d2(max_d2), pools)
}

/// `W_1` with Euclidean ground cost: optimal plan, value and duals.
pub fn w1_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<TransportPlan> {
    transport(mu, nu, GroundCost::Euclidean)
}

/// `W_2`: square root of the optimal squared-Euclidean cost.
pub fn w2_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    Ok(transport(mu, nu, GroundCost::SquaredEuclidean)?.cost.max(0.0).sqrt())
}

/// `W_1` value only. Uses the sorted-CDF formula for uniform samples on the line.
pub fn w1_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    if mu.dim() == 1 && mu.is_uniform() && nu.is_uniform() {
        return Ok(w1_uniform_1d(mu.points(), nu.points()));
    }
    Ok(w1_exact(mu, nu)?.cost)
}

pub const BRUTEFORCE_MAX: usize = 8;

/// Minimum over all permutations of the mean matched distance. Only for
/// equal-size uniform measures with at most [`BRUTEFORCE_MAX`] atoms.
pub fn w1_bruteforce(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    let n = mu.len();
    if n != nu.len() || !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::DegenerateInput(
            "brute force needs equal-size uniform measures".into(),
        ));
    }
    if n > BRUTEFORCE_MAX {
        return Err(Error::TooLarge { n, max: BRUTEFORCE_MAX });
    }
    let c: Vec<f64> = (0..n * n)
        .map(|k| GroundCost::Euclidean.eval(mu.point(k / n), nu.point(k % n)))
        .collect();
    // Heap's algorithm over permutations of the targets.
    let mut perm: Vec<usize> = (0..n).collect();
    let score = |p: &[usize]| (0..n).map(|i| c[i * n + p[i]]).sum::<f64>();
    let mut best = score(&perm);
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(score(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// A 1-Lipschitz `f` with `μf − νf = W_1(μ, ν)` (up to solver tolerance),
/// recentered so that `f(0) = 0`.
///
/// Built from the optimal target duals as `f(x) = min_j (g_j + |x − y_j|)`:
/// dual feasibility gives `f(x_i) ≥ f_i` while `f(y_j) ≤ g_j`.
pub fn kantorovich_potential(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<PotentialFn> {
    let plan = w1_exact(mu, nu)?;
    let mut pot = if plan.cost <= 0.0 {
        PotentialFn::zero(mu.dim())
    } else {
        PotentialFn::new(mu.dim(), nu.points().to_vec(), plan.target_potential)?
    };
    pot.recenter();
    Ok(pot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    fn random_measure(rng: &mut impl Rng, n: usize, d: usize, weighted: bool) -> EmpiricalMeasure {
        let pts: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        if weighted {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            EmpiricalMeasure::with_weights(d, pts, w).unwrap()
        } else {
            EmpiricalMeasure::new(d, pts).unwrap()
        }
    }

    fn check_plan(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, plan: &TransportPlan, cost: GroundCost) {
        for (r, w) in plan.row_sums().iter().zip(mu.weights()) {
            assert!((r - w).abs() < 1e-9, "row {r} vs {w}");
        }
        for (c, w) in plan.col_sums().iter().zip(nu.weights()) {
            assert!((c - w).abs() < 1e-9, "col {c} vs {w}");
        }
        let gap = plan.cost - plan.dual_value(mu, nu);
        assert!(gap.abs() <= 1e-6, "duality gap {gap}");
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                let c = cost.eval(mu.point(i), nu.point(j));
                assert!(
                    plan.source_potential[i] - plan.target_potential[j] <= c + 1e-9,
                    "dual infeasible at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn spec_examples() {
        let a = EmpiricalMeasure::dirac(&[0.0, 0.0]).unwrap();
        let b = EmpiricalMeasure::dirac(&[3.0, 4.0]).unwrap();
        assert!((w1_exact(&a, &b).unwrap().cost - 5.0).abs() < 1e-12);
        assert!((w2_exact(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        let u = EmpiricalMeasure::new(1, vec![0.0, 1.0]).unwrap();
        let v = EmpiricalMeasure::new(1, vec![0.0, 2.0]).unwrap();
        assert!((w1_exact(&u, &v).unwrap().cost - 0.5).abs() < 1e-12);
        assert_eq!(w1_exact(&u, &u).unwrap().cost, 0.0);
    }

    #[test]
    fn all_routes_agree_with_bruteforce() {
        let mut rng = Seed(1).rng();
        for t in 0..200 {
            let n = 1 + t % 6;
            let d = 1 + t % 3;
            let mu = random_measure(&mut rng, n, d, false);
            let nu = random_measure(&mut rng, n, d, false);
            let bf = w1_bruteforce(&mu, &nu).unwrap();
            let plan = w1_exact(&mu, &nu).unwrap();
            assert!((plan.cost - bf).abs() < 1e-9, "t={t}: {} vs {bf}", plan.cost);
            check_plan(&mu, &nu, &plan, GroundCost::Euclidean);
            let geo = Geometry {
                dim: d,
                xs: mu.points(),
                ys: nu.points(),
                cost: GroundCost::Euclidean,
            };
            let c = |i: usize, j: usize| geo.c(i, j);
            for dense in [true, false] {
                let (cells, ..) = solve_simplex_with(&geo, mu.weights(), nu.weights(), dense);
                let s: f64 = cells.iter().map(|&(i, j, w)| w * c(i, j)).sum();
                assert!((s - bf).abs() < 1e-9, "simplex t={t}: {s} vs {bf}");
            }
        }
    }

    #[test]
    fn weighted_and_rectangular_instances() {
        let mut rng = Seed(2).rng();
        for t in 0..60 {
            let n = 1 + t % 13;
            let m = 1 + (t * 7) % 11;
            let d = 1 + t % 3;
            let mu = random_measure(&mut rng, n, d, t % 2 == 0);
            let nu = random_measure(&mut rng, m, d, t % 3 == 0);
            for cost in [GroundCost::Euclidean, GroundCost::SquaredEuclidean] {
                let plan = transport(&mu, &nu, cost).unwrap();
                check_plan(&mu, &nu, &plan, cost);
            }
        }
    }

    #[test]
    fn larger_instances_duality() {
        let mut rng = Seed(3).rng();
        for (n, m, d) in [(256, 256, 2), (200, 256, 3), (256, 256, 1), (100, 37, 2)] {
            let mu = random_measure(&mut rng, n, d, false);
            let nu = random_measure(&mut rng, m, d, false);
            let plan = w1_exact(&mu, &nu).unwrap();
            check_plan(&mu, &nu, &plan, GroundCost::Euclidean);
        }
    }

    #[test]
    fn sparse_route_matches_assignment() {
        let mut rng = Seed(4).rng();
        let n = 300;
        let mu = random_measure(&mut rng, n, 2, false);
        let nu = random_measure(&mut rng, n, 2, false);
        let exact = w1_exact(&mu, &nu).unwrap().cost;
        let geo = Geometry {
            dim: 2,
            xs: mu.points(),
            ys: nu.points(),
            cost: GroundCost::Euclidean,
        };
        let c = |i: usize, j: usize| geo.c(i, j);
        let (_, pools) = neighbour_arcs(&geo);
        assert!(pools.iter().all(|p| p.len() == POOL));
        let a = vec![1.0; n];
        let (cells, f, g) = solve_simplex_with(&geo, &a, &a, false);
        let cost: f64 = cells.iter().map(|&(i, j, w)| w * c(i, j)).sum::<f64>() / n as f64;
        assert!((cost - exact).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert!(f[i] - g[j] <= c(i, j) + 1e-9);
            }
        }
    }

    #[test]
    fn potential_attains_w1() {
        let mut rng = Seed(5).rng();
        for t in 0..40 {
            let d = 1 + t % 3;
            let mu = random_measure(&mut rng, 10, d, t % 2 == 1);
            let nu = random_measure(&mut rng, 10, d, false);
            let w = w1_exact(&mu, &nu).unwrap().cost;
            let f = kantorovich_potential(&mu, &nu).unwrap();
            let gap = mu.integrate(|x| f.eval(x)) - nu.integrate(|x| f.eval(x));
            assert!((gap - w).abs() < 1e-6, "{gap} vs {w}");
            assert!(f.eval(&vec![0.0; d]).abs() < 1e-12);
        }
        let x = EmpiricalMeasure::dirac(&[1.0, 2.0]).unwrap();
        let y = EmpiricalMeasure::dirac(&[4.0, 6.0]).unwrap();
        let f = kantorovich_potential(&x, &y).unwrap();
        assert!((f.eval(&[1.0, 2.0]) - f.eval(&[4.0, 6.0]) - 5.0).abs() < 1e-12);
        let z = kantorovich_potential(&x, &x).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn w1_below_w2_and_metric_axioms() {
        let mut rng = Seed(6).rng();
        for t in 0..100 {
            let d = 1 + t % 3;
            let a = random_measure(&mut rng, 7, d, t % 2 == 0);
            let b = random_measure(&mut rng, 9, d, false);
            let c = random_measure(&mut rng, 5, d, true);
            let ab = w1_exact(&a, &b).unwrap().cost;
            let ba = w1_exact(&b, &a).unwrap().cost;
            let bc = w1_exact(&b, &c).unwrap().cost;
            let ac = w1_exact(&a, &c).unwrap().cost;
            assert!((ab - ba).abs() < 1e-9);
            assert!(ac <= ab + bc + 1e-9);
            assert!(ab <= w2_exact(&a, &b).unwrap() + 1e-9);
        }
    }

    #[test]
    fn best_k_keeps_smallest() {
        let mut b = Vec::new();
        for (k, v) in [5.0, 1.0, 3.0, 1.0, 0.5, 9.0].iter().enumerate() {
            push_best(&mut b, (*v, k), 3);
        }
        assert_eq!(b, vec![(0.5, 4), (1.0, 1), (1.0, 3)]);
    }

    #[test]
    fn bruteforce_limits() {
        let m = EmpiricalMeasure::new(1, (0..9).map(|v| v as f64).collect()).unwrap();
        assert!(matches!(w1_bruteforce(&m, &m), Err(Error::TooLarge { n: 9, max: 8 })));
        let a = EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(w1_bruteforce(&a, &a).unwrap().abs() < 1e-15);
    }

    #[test]
    fn one_d_value_path_matches_plan() {
        let mut rng = Seed(7).rng();
        let mu = random_measure(&mut rng, 333, 1, false);
        let nu = random_measure(&mut rng, 120, 1, false);
        let a = w1_distance(&mu, &nu).unwrap();
        let b = w1_exact(&mu, &nu).unwrap().cost;
        assert!((a - b).abs() < 1e-12);
    }
}
