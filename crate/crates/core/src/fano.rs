//! Bump-function packing construction behind the minimax lower bound.
//!
//! On `[0,1]^d` split into `m^d` cells `C_j`, a sign vector `α ∈ {±1}^{m^d}`
//! perturbs the identity along the first coordinate,
//!
//! ```text
//! g_α(z) = (z₁ + c₁ m^{-β} Σ_j α_j φ_{j₁}(z₁)⋯φ_{j_d}(z_d), z₂, …, z_d),
//! φ_j(z) = φ(m z − j),
//! ```
//!
//! which maps every cell onto itself. The pushforward of the uniform law has
//! density `q_α(y) = 1 / ∂y₁/∂z₁`. Pairs of these laws are close in KL and far
//! apart in `W_1`, which together with a Hamming packing of the sign vectors
//! gives the Fano bound.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::measures::{pushforward_of, sample_latent, LatentSpec};
use crate::ot::w1_distance;
use crate::par;
use crate::quadrature::rule_on;
use crate::rng::Seed;

/// Minimum of `∂y₁/∂z₁` required of a configuration.
pub const JACOBIAN_FLOOR: f64 = 0.5;
/// Grid points per cell axis for the Jacobian check.
pub const JACOBIAN_GRID: usize = 64;
/// Largest Gauss–Legendre rule tried per cell axis by [`kl_pair`].
pub const QUADRATURE_BUDGET: usize = 128;
/// Random draws allowed per requested codeword in [`gv_packing`].
pub const PACKING_DRAWS_PER_CODEWORD: usize = 2000;

const BISECTION_TOL: f64 = 1e-12;

/// `φ(z) = exp(4 − 1/(z(1−z)))` on `(0,1)`, zero elsewhere; `φ(1/2) = 1`.
pub fn bump(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (z * (1.0 - z))).exp()
    }
}

pub fn bump_deriv(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        return 0.0;
    }
    let s = z * (1.0 - z);
    bump(z) * (1.0 - 2.0 * z) / (s * s)
}

/// `sup |φ'|`, located by golden-section search on `(0, 1/2)`.
pub fn bump_deriv_sup() -> f64 {
    static SUP: OnceLock<f64> = OnceLock::new();
    *SUP.get_or_init(|| {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (1e-3, 0.5);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if bump_deriv(c) > bump_deriv(d) {
                b = d;
            } else {
                a = c;
            }
        }
        bump_deriv(0.5 * (a + b))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoConfig {
    pub m: usize,
    pub d: usize,
    pub beta: f64,
    pub c1: f64,
}

impl FanoConfig {
    /// Validates the shape and the Jacobian floor.
    pub fn new(m: usize, d: usize, beta: f64, c1: f64) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidSpec("m and d must be >= 1".into()));
        }
        if !(beta > 0.0) || !(c1 >= 0.0) || !c1.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "need beta > 0 and finite c1 >= 0, got {beta}, {c1}"
            )));
        }
        let cfg = FanoConfig { m, d, beta, c1 };
        let min = cfg.jacobian_min();
        if min < JACOBIAN_FLOOR {
            return Err(Error::AmplitudeTooLarge {
                floor: JACOBIAN_FLOOR,
                min,
            });
        }
        Ok(cfg)
    }

    /// Largest `c₁ = 2^{-k}` that passes the Jacobian floor.
    pub fn with_auto_c1(m: usize, d: usize, beta: f64) -> Result<Self> {
        (0..64)
            .map(|k| 0.5f64.powi(k))
            .find_map(|c1| FanoConfig::new(m, d, beta, c1).ok())
            .ok_or_else(|| Error::InvalidSpec(format!("no admissible c1 for m={m}, d={d}, beta={beta}")))
    }

    pub fn cells(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    /// `c₁ / m^β`.
    pub fn amplitude(&self) -> f64 {
        self.c1 / (self.m as f64).powf(self.beta)
    }

    /// Worst case over sign vectors of `min ∂y₁/∂z₁` on the per-cell grid.
    /// Every cell has the same layout, so one cell suffices.
    pub fn jacobian_min(&self) -> f64 {
        let grid = |f: fn(f64) -> f64| {
            (0..JACOBIAN_GRID)
                .map(|k| f((k as f64 + 0.5) / JACOBIAN_GRID as f64).abs())
                .fold(0.0, f64::max)
        };
        let dphi = grid(bump_deriv);
        let phi = grid(bump);
        1.0 - self.amplitude() * self.m as f64 * dphi * phi.powi(self.d as i32 - 1)
    }

    /// Cell multi-index of `x` (first coordinate fastest) and per-axis local
    /// coordinates `m x_k − j_k`.
    fn locate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let m = self.m as f64;
        let mut lin = 0;
        let mut stride = 1;
        let mut local = Vec::with_capacity(self.d);
        for &v in x {
            let j = ((v * m).floor().max(0.0) as usize).min(self.m - 1);
            lin += j * stride;
            stride *= self.m;
            local.push(v * m - j as f64);
        }
        (lin, local)
    }
}

pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// The map `g_α` together with its density.
#[derive(Debug, Clone, PartialEq)]
pub struct FanoMap {
    pub cfg: FanoConfig,
    pub alpha: Vec<i8>,
}

/// Builds `g_α`, checking the sign vector and re-checking the Jacobian floor.
pub fn fano_g(cfg: &FanoConfig, alpha: &[i8]) -> Result<FanoMap> {
    let cfg = FanoConfig::new(cfg.m, cfg.d, cfg.beta, cfg.c1)?;
    if alpha.len() != cfg.cells() {
        return Err(Error::ShapeMismatch {
            expected: cfg.cells(),
            got: alpha.len(),
        });
    }
    if alpha.iter().any(|&a| a != 1 && a != -1) {
        return Err(Error::InvalidSpec("sign vector entries must be +1 or -1".into()));
    }
    Ok(FanoMap {
        cfg,
        alpha: alpha.to_vec(),
    })
}

pub fn fano_density(cfg: &FanoConfig, alpha: &[i8], y: &[f64]) -> Result<f64> {
    fano_g(cfg, alpha)?.density(y)
}

impl FanoMap {
    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.cfg.d {
            return Err(Error::ShapeMismatch {
                expected: self.cfg.d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain {
                point: x.to_vec(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(())
    }

    /// Signed amplitude of the first-axis bump in the cell of `x`, already
    /// multiplied by the bumps of the other coordinates.
    fn slice_amplitude(&self, lin: usize, local: &[f64]) -> f64 {
        let rest: f64 = local[1..].iter().map(|&u| bump(u)).product();
        self.cfg.amplitude() * self.alpha[lin] as f64 * rest
    }

    /// First coordinate of `g_α(z)`.
    pub fn first(&self, z: &[f64]) -> f64 {
        let (lin, local) = self.cfg.locate(z);
        z[0] + self.slice_amplitude(lin, &local) * bump(local[0])
    }

    /// Solves `y₁ = z₁ + A φ(m z₁ − j₁)` for `z₁` inside the cell of `y`.
    pub fn invert_first(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        let (lin, local) = self.cfg.locate(y);
        Ok(self.invert_in_cell(y[0], lin, &local))
    }

    fn invert_in_cell(&self, y1: f64, lin: usize, local: &[f64]) -> f64 {
        let amp = self.slice_amplitude(lin, local);
        let m = self.cfg.m as f64;
        let j1 = (y1 * m - local[0]).round();
        let (mut lo, mut hi) = (j1 / m, (j1 + 1.0) / m);
        if amp == 0.0 {
            return y1;
        }
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid + amp * bump(mid * m - j1) < y1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `q_α(y) = (1 + A m φ'(m z₁ − j₁))^{-1}` with `z₁` from bisection.
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        Ok(self.density_unchecked(y))
    }

    fn density_unchecked(&self, y: &[f64]) -> f64 {
        let (lin, local) = self.cfg.locate(y);
        let amp = self.slice_amplitude(lin, &local);
        if amp == 0.0 {
            return 1.0;
        }
        let m = self.cfg.m as f64;
        let z1 = self.invert_in_cell(y[0], lin, &local);
        let j1 = (y[0] * m - local[0]).round();
        1.0 / (1.0 + amp * m * bump_deriv(z1 * m - j1))
    }
}

impl Generator for FanoMap {
    fn latent_dim(&self) -> usize {
        self.cfg.d
    }

    fn output_dim(&self) -> usize {
        self.cfg.d
    }

    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(z)?;
        out.copy_from_slice(z);
        out[0] = self.first(z);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub kl: f64,
    /// `∫ (√q_α − √q_α')²`.
    pub hellinger2: f64,
    /// Gauss–Legendre points per cell axis at convergence.
    pub nodes: usize,
}

/// Tensor rule with `cells` subintervals per axis, `n` points each; the
/// outer axis is split across threads and summed in order.
fn tensor_pair<F>(d: usize, cells: usize, n: usize, f: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> (f64, f64) + Sync + Send,
{
    let mut xs = Vec::with_capacity(cells * n);
    let mut ws = Vec::with_capacity(cells * n);
    for c in 0..cells {
        let (x, w) = rule_on(c as f64 / cells as f64, (c + 1) as f64 / cells as f64, n);
        xs.extend(x);
        ws.extend(w);
    }
    let k = xs.len();
    let inner = k.pow(d as u32 - 1);
    let parts = par::map_range(k, |i0| {
        let mut point = vec![0.0; d];
        point[0] = xs[i0];
        let (mut a, mut b) = (0.0, 0.0);
        for idx in 0..inner {
            let mut rem = idx;
            let mut w = ws[i0];
            for p in point[1..].iter_mut() {
                let i = rem % k;
                rem /= k;
                *p = xs[i];
                w *= ws[i];
            }
            let (fa, fb) = f(&point);
            a += w * fa;
            b += w * fb;
        }
        (a, b)
    });
    parts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y))
}

/// `KL(q_α ‖ q_α')` and the squared Hellinger distance by adaptive tensor
/// Gauss–Legendre quadrature aligned with the cells.
pub fn kl_pair(cfg: &FanoConfig, alpha: &[i8], alpha_prime: &[i8]) -> Result<Divergences> {
    let a = fano_g(cfg, alpha)?;
    let b = fano_g(cfg, alpha_prime)?;
    let integrand = |y: &[f64]| {
        let p = a.density_unchecked(y);
        let q = b.density_unchecked(y);
        (p * (p / q).ln(), (p.sqrt() - q.sqrt()).powi(2))
    };
    let mut n = 8;
    let mut prev = tensor_pair(cfg.d, cfg.m, n, integrand);
    let mut change = f64::INFINITY;
    while n < QUADRATURE_BUDGET {
        n *= 2;
        let cur = tensor_pair(cfg.d, cfg.m, n, integrand);
        change = (cur.0 - prev.0).abs().max((cur.1 - prev.1).abs());
        let scale = cur.0.abs().max(cur.1.abs());
        prev = cur;
        if change <= 1e-9 * scale + 1e-18 {
            return Ok(Divergences {
                kl: prev.0.max(0.0),
                hellinger2: prev.1.max(0.0),
                nodes: n,
            });
        }
    }
    Err(Error::QuadratureFailure {
        budget: QUADRATURE_BUDGET,
        change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSet {
    pub j_size: usize,
    /// Guaranteed pairwise Hamming distance, `⌈|J|/4⌉`.
    pub min_distance: usize,
    pub codewords: Vec<Vec<i8>>,
}

impl PackingSet {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Smallest pairwise Hamming distance (`None` below two codewords).
    pub fn pairwise_min(&self) -> Option<usize> {
        let c = &self.codewords;
        (0..c.len())
            .flat_map(|i| (i + 1..c.len()).map(move |k| (i, k)))
            .map(|(i, k)| hamming(&c[i], &c[k]))
            .min()
    }
}

/// `⌈e^{|J|/16}⌉`.
pub fn packing_target(j_size: usize) -> usize {
    (j_size as f64 / 16.0).exp().ceil() as usize
}

/// Greedy Gilbert–Varshamov packing: random sign vectors are kept when at
/// Hamming distance `≥ ⌈|J|/4⌉` from every kept one, until `⌈e^{|J|/16}⌉`
/// are found.
pub fn gv_packing(j_size: usize, seed: Seed) -> Result<PackingSet> {
    if j_size < 16 {
        return Err(Error::InvalidSpec(format!("packing needs |J| >= 16, got {j_size}")));
    }
    let target = packing_target(j_size);
    let min_distance = j_size.div_ceil(4);
    let budget = target.saturating_mul(PACKING_DRAWS_PER_CODEWORD);
    let mut rng = seed.rng();
    let mut kept: Vec<Vec<i8>> = Vec::with_capacity(target);
    for _ in 0..budget {
        let w: Vec<i8> = (0..j_size).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        if kept.iter().all(|k| hamming(k, &w) >= min_distance) {
            kept.push(w);
            if kept.len() == target {
                return Ok(PackingSet {
                    j_size,
                    min_distance,
                    codewords: kept,
                });
            }
        }
    }
    Err(Error::BudgetExceeded {
        budget,
        found: kept.len(),
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Check {
    /// Empirical `W_1` between the two pushforwards.
    pub lhs: f64,
    /// `c₁ c₃ H / m^{β+d}`.
    pub rhs: f64,
    /// Standard error of the matched-latent displacement, used as MC error.
    pub stderr: f64,
    pub hamming: usize,
}

/// Empirical `W_1` between `q_α` and `q_α'` from `n_mc` common uniform
/// latents, against the excess-mass lower bound with constant `c3`.
pub fn w1_excess_check(
    cfg: &FanoConfig,
    alpha: &[i8],
    alpha_prime: &[i8],
    n_mc: usize,
    c3: f64,
    seed: Seed,
) -> Result<W1Check> {
    if cfg.d > 2 {
        return Err(Error::InvalidSpec(format!("W1 check supports d <= 2, got {}", cfg.d)));
    }
    if n_mc == 0 {
        return Err(Error::InvalidSpec("n_mc must be >= 1".into()));
    }
    let a = fano_g(cfg, alpha)?;
    let b = fano_g(cfg, alpha_prime)?;
    let latents = sample_latent(LatentSpec::new(cfg.d)?, n_mc, seed);
    let pa = pushforward_of(&a, &latents)?;
    let pb = pushforward_of(&b, &latents)?;
    let lhs = w1_distance(&pa, &pb)?;
    let disp: Vec<f64> = (0..n_mc).map(|i| (pa.point(i)[0] - pb.point(i)[0]).abs()).collect();
    let mean = disp.iter().sum::<f64>() / n_mc as f64;
    let var = disp.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_mc.max(2) - 1) as f64;
    let h = hamming(alpha, alpha_prime);
    Ok(W1Check {
        lhs,
        rhs: cfg.c1 * c3 * h as f64 / (cfg.m as f64).powf(cfg.beta + cfg.d as f64),
        stderr: (var / n_mc as f64).sqrt(),
        hamming: h,
    })
}

/// Constants of the lower bound, calibrated once at `m = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoConstants {
    pub beta: f64,
    pub d: usize,
    pub c1: f64,
    /// `W_1 ≥ c₁ c₃ H / m^{β+d}`.
    pub c3: f64,
    /// `KL ≤ C c₁² m^{-2(β-1)}`.
    pub kl_const: f64,
}

/// Share of the measured full-flip `W_1` credited to `c₃`.
pub const EXCESS_SHARE: f64 = 0.5;
/// Calibration keeps `16 c₁² C` at most this, so the bound stays positive.
pub const KL_BUDGET: f64 = 0.5;

impl FanoConstants {
    /// `c₁` starts at the largest admissible power of two and is halved
    /// until `16 c₁² C ≤ 1/2`; `C` and `c₃` come from the full flip at `m = 2`.
    pub fn calibrate(beta: f64, d: usize, n_mc: usize, seed: Seed) -> Result<Self> {
        let m = 2;
        let mut cfg = FanoConfig::with_auto_c1(m, d, beta)?;
        let plus = vec![1i8; cfg.cells()];
        let minus = vec![-1i8; cfg.cells()];
        let scale = |cfg: &FanoConfig| cfg.c1 * cfg.c1 * (m as f64).powf(-2.0 * (beta - 1.0));
        let mut kl_const = kl_pair(&cfg, &plus, &minus)?.kl / scale(&cfg);
        while 16.0 * cfg.c1 * cfg.c1 * kl_const > KL_BUDGET {
            cfg = FanoConfig::new(m, d, beta, cfg.c1 / 2.0)?;
            kl_const = kl_pair(&cfg, &plus, &minus)?.kl / scale(&cfg);
        }
        let full = w1_excess_check(&cfg, &plus, &minus, n_mc, 0.0, seed)?;
        let h = cfg.cells() as f64;
        let c3 = EXCESS_SHARE * full.lhs * (m as f64).powf(beta + d as f64) / (cfg.c1 * h);
        Ok(FanoConstants {
            beta,
            d,
            c1: cfg.c1,
            c3,
            kl_const,
        })
    }
}

/// Exponent `e` of the grid rule `m = ⌈n^e⌉`, `e = 1/(d + 2(β − 1))`.
pub fn grid_exponent(beta: f64, d: usize) -> Result<f64> {
    let den = d as f64 + 2.0 * (beta - 1.0);
    if !(den > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "need beta > 0 and d + 2(beta - 1) > 0, got beta={beta}, d={d}"
        )));
    }
    Ok(1.0 / den)
}

/// Exponent of `n` in [`fano_bound`]: the bound scales as `m^{-β}`.
pub fn fano_bound_exponent(beta: f64, d: usize) -> Result<f64> {
    Ok(-beta * grid_exponent(beta, d)?)
}

/// `(c₁c₃/m^β)·{1 − (n c₁² C m^{-2(β−1)} + log 2)/(m^d/16)}`, clamped at 0,
/// with `m = ⌈n^{1/(d+2(β−1))}⌉`.
pub fn fano_bound(n: f64, k: &FanoConstants) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::InvalidSpec(format!("fano_bound needs n >= 2, got {n}")));
    }
    let m = n.powf(grid_exponent(k.beta, k.d)?).ceil();
    let info = n * k.c1 * k.c1 * k.kl_const * m.powf(-2.0 * (k.beta - 1.0)) + std::f64::consts::LN_2;
    let bracket = 1.0 - info / (m.powi(k.d as i32) / 16.0);
    Ok((k.c1 * k.c3 / m.powf(k.beta) * bracket).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateExponents {
    /// `−β*/(2β* + t*)`.
    pub gan: f64,
    /// `−β*/(2(β* + t*))`.
    pub mle: f64,
    /// `−β/(2β + d − 2)`.
    pub lower: f64,
    /// The lower-bound exponent is below `−1/2`, so the parametric term
    /// dominates it.
    pub lower_dominated: bool,
}

pub fn rate_exponents(beta_star: f64, t_star: f64, d: usize) -> Result<RateExponents> {
    if !(beta_star > 0.0) || !(t_star > 0.0) || d == 0 {
        return Err(Error::InvalidSpec(format!(
            "rate exponents need positive inputs, got beta={beta_star}, t={t_star}, d={d}"
        )));
    }
    let lower = fano_bound_exponent(beta_star, d)?;
    Ok(RateExponents {
        gan: -beta_star / (2.0 * beta_star + t_star),
        mle: -beta_star / (2.0 * (beta_star + t_star)),
        lower,
        lower_dominated: lower < -0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signs(bits: u64, len: usize) -> Vec<i8> {
        (0..len).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect()
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.5), 1.0);
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-0.3), 0.0);
        for k in 1..1000 {
            let z = k as f64 / 1000.0;
            assert!((bump(z) - bump(1.0 - z)).abs() < 1e-12);
            assert!((bump_deriv(z) + bump_deriv(1.0 - z)).abs() < 1e-10);
            if z < 0.5 {
                assert!(bump_deriv(z) >= 0.0);
            }
        }
        let h = 1e-6;
        for z in [0.2, 0.37, 0.5, 0.81] {
            let fd = (bump(z + h) - bump(z - h)) / (2.0 * h);
            assert!((fd - bump_deriv(z)).abs() < 1e-7);
        }
    }

    #[test]
    fn deriv_sup_beats_dense_grid() {
        let s = bump_deriv_sup();
        let grid = (1..100_000)
            .map(|k| bump_deriv(k as f64 / 1e5).abs())
            .fold(0.0, f64::max);
        assert!(s >= grid - 1e-9 && s < grid * 1.0001, "{s} {grid}");
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let cfg = FanoConfig::new(3, 2, 2.0, 0.0).unwrap();
        let g = fano_g(&cfg, &[1; 9]).unwrap();
        for z in [[0.1, 0.9], [0.5, 0.5], [0.77, 0.02]] {
            assert_eq!(g.generate(&z).unwrap(), z.to_vec());
            assert_eq!(g.density(&z).unwrap(), 1.0);
        }
    }

    #[test]
    fn cell_boundaries_are_fixed_points() {
        let cfg = FanoConfig::with_auto_c1(4, 2, 2.0).unwrap();
        let alpha = signs(0xBEEF, 16);
        let g = fano_g(&cfg, &alpha).unwrap();
        for k in 0..=4 {
            let z1 = k as f64 / 4.0;
            for z2 in [0.1, 0.33, 0.6] {
                assert!((g.first(&[z1, z2]) - z1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn amplitude_too_large_is_rejected() {
        let err = FanoConfig::new(2, 1, 2.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::AmplitudeTooLarge { .. }));
    }

    #[test]
    fn monotone_by_finite_differences() {
        let cfg = FanoConfig::with_auto_c1(4, 2, 2.0).unwrap();
        let g = fano_g(&cfg, &signs(0x5A5A, 16)).unwrap();
        let h = 1e-7;
        let mut min = f64::INFINITY;
        for a in 0..100 {
            for b in 0..100 {
                let z = [(a as f64 + 0.5) / 100.0, (b as f64 + 0.5) / 100.0];
                let d = (g.first(&[z[0] + h, z[1]]) - g.first(&[z[0] - h, z[1]])) / (2.0 * h);
                min = min.min(d);
            }
        }
        assert!(min > 0.0, "{min}");
        assert!(min >= JACOBIAN_FLOOR - 1e-3, "{min}");
    }

    #[test]
    fn density_matches_inverse_jacobian() {
        let cfg = FanoConfig::with_auto_c1(2, 2, 2.0).unwrap();
        let g = fano_g(&cfg, &[1, -1, -1, 1]).unwrap();
        let h = 1e-6;
        for z in [[0.3, 0.25], [0.2, 0.7], [0.61, 0.4], [0.85, 0.85]] {
            let y = g.generate(&z).unwrap();
            let jac = (g.first(&[z[0] + h, z[1]]) - g.first(&[z[0] - h, z[1]])) / (2.0 * h);
            assert!((g.density(&y).unwrap() - 1.0 / jac).abs() < 1e-6);
            assert!((g.invert_first(&y).unwrap() - z[0]).abs() < 1e-11);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for d in 1..=2 {
            for m in 1..=4 {
                let cfg = FanoConfig::with_auto_c1(m, d, 2.0).unwrap();
                let cells = cfg.cells();
                let g = fano_g(&cfg, &signs(0x9E37_79B9 ^ (m as u64), cells)).unwrap();
                let (mass, _) = tensor_pair(d, m, 48, |y| (g.density_unchecked(y), 0.0));
                assert!((mass - 1.0).abs() < 1e-6, "d={d} m={m} mass={mass}");
            }
        }
    }

    #[test]
    fn density_within_envelope() {
        let cfg = FanoConfig::with_auto_c1(3, 2, 1.5).unwrap();
        let g = fano_g(&cfg, &signs(0x1234, 9)).unwrap();
        let u = cfg.amplitude() * cfg.m as f64 * bump_deriv_sup();
        for a in 0..60 {
            for b in 0..60 {
                let q = g.density(&[a as f64 / 59.0, b as f64 / 59.0]).unwrap();
                assert!(q > 0.0 && q >= 1.0 / (1.0 + u) - 1e-12 && q <= 1.0 / (1.0 - u) + 1e-12);
            }
        }
    }

    #[test]
    fn density_rejects_outside_points() {
        let cfg = FanoConfig::with_auto_c1(2, 1, 2.0).unwrap();
        assert!(matches!(fano_density(&cfg, &[1, 1], &[1.2]), Err(Error::Domain { .. })));
        assert!(matches!(
            fano_density(&cfg, &[1], &[0.2]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn kl_identity_and_sign() {
        let cfg = FanoConfig::with_auto_c1(2, 2, 2.0).unwrap();
        let a = [1, -1, 1, 1];
        let same = kl_pair(&cfg, &a, &a).unwrap();
        assert_eq!(same.kl, 0.0);
        assert_eq!(same.hellinger2, 0.0);
        let other = kl_pair(&cfg, &a, &[-1, -1, 1, -1]).unwrap();
        assert!(other.kl > 0.0 && other.hellinger2 > 0.0);
        // KL ≥ ∫(√p − √q)²
        assert!(other.kl >= other.hellinger2 * (1.0 - 1e-9));
    }

    #[test]
    fn kl_additive_over_flipped_cells() {
        let cfg = FanoConfig::with_auto_c1(2, 1, 2.0).unwrap();
        let one = kl_pair(&cfg, &[1, 1], &[-1, 1]).unwrap().kl;
        let two = kl_pair(&cfg, &[1, 1], &[-1, -1]).unwrap().kl;
        assert!((two - 2.0 * one).abs() < 1e-9 * two, "{one} {two}");
    }

    #[test]
    fn kl_scales_with_grid() {
        // β = 2: KL at fixed c₁ falls like m^{-2(β-1)} = m^{-2}
        for d in 1..=2 {
            let c1 = FanoConfig::with_auto_c1(2, d, 2.0).unwrap().c1;
            let kl = |m: usize| {
                let cfg = FanoConfig::new(m, d, 2.0, c1).unwrap();
                let n = cfg.cells();
                kl_pair(&cfg, &vec![1; n], &vec![-1; n]).unwrap().kl
            };
            let base = kl(2) / (c1 * c1 * 0.25);
            for m in [4usize, 8] {
                let bound = base * c1 * c1 * (m as f64).powi(-2) * 1.5;
                assert!(kl(m) <= bound, "d={d} m={m}");
            }
        }
    }

    #[test]
    fn packing_sixteen() {
        let p = gv_packing(16, Seed(1)).unwrap();
        assert!(p.len() >= 3);
        assert!(p.pairwise_min().unwrap() >= 4);
    }

    #[test]
    fn packing_sixty_four() {
        let p = gv_packing(64, Seed(2)).unwrap();
        assert_eq!(packing_target(64), 55);
        assert!(p.len() >= 55);
        assert!(p.pairwise_min().unwrap() >= 16);
    }

    #[test]
    fn packing_rejects_small_sets() {
        assert!(gv_packing(8, Seed(0)).is_err());
    }

    #[test]
    fn w1_check_identical_and_linear_in_hamming() {
        let cfg = FanoConfig::with_auto_c1(4, 1, 2.0).unwrap();
        let base = vec![1i8; 4];
        let same = w1_excess_check(&cfg, &base, &base, 2000, 1.0, Seed(3)).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert_eq!(same.rhs, 0.0);
        let per_flip: Vec<f64> = (1..=4)
            .map(|h| {
                let mut b = base.clone();
                b[..h].iter_mut().for_each(|v| *v = -1);
                w1_excess_check(&cfg, &base, &b, 20_000, 1.0, Seed(4)).unwrap().lhs / h as f64
            })
            .collect();
        for v in &per_flip {
            assert!((v / per_flip[3] - 1.0).abs() < 0.3, "{per_flip:?}");
        }
    }

    #[test]
    fn w1_rhs_halves_scale() {
        // doubling m with full flips divides the bound by 2^{β+d}
        let (beta, d) = (2.0, 1);
        let c1 = FanoConfig::with_auto_c1(2, d, beta).unwrap().c1;
        let r = |m: usize| {
            let cfg = FanoConfig::new(m, d, beta, c1).unwrap();
            let n = cfg.cells();
            w1_excess_check(&cfg, &vec![1; n], &vec![-1; n], 16, 1.0, Seed(0)).unwrap()
        };
        let (a, b) = (r(2), r(4));
        let ratio = (a.rhs / a.hamming as f64) / (b.rhs / b.hamming as f64);
        assert!((ratio - 2f64.powf(beta + d as f64)).abs() < 1e-12);
    }

    #[test]
    fn calibrated_bound_holds_at_finer_grids() {
        let k = FanoConstants::calibrate(2.0, 1, 20_000, Seed(5)).unwrap();
        assert!(16.0 * k.c1 * k.c1 * k.kl_const <= KL_BUDGET);
        for m in [4usize, 8] {
            let cfg = FanoConfig::new(m, 1, 2.0, k.c1).unwrap();
            let a = signs(0xA5A5, m);
            let b = signs(0x0F0F, m);
            let chk = w1_excess_check(&cfg, &a, &b, 20_000, k.c3, Seed(6)).unwrap();
            assert!(chk.lhs >= chk.rhs - 3.0 * chk.stderr, "{chk:?}");
        }
    }

    #[test]
    fn bound_exponent_matches_slope() {
        let k = FanoConstants {
            beta: 2.0,
            d: 2,
            c1: 0.1,
            c3: 1.0,
            kl_const: 1.0,
        };
        let pts: Vec<(usize, f64)> = (20..=30)
            .map(|e| {
                let n = 2f64.powi(e);
                (1usize << e, fano_bound(n, &k).unwrap())
            })
            .collect();
        let slope = crate::harness::fit_points(&pts).unwrap().slope;
        assert!((slope + 0.5).abs() < 0.05, "{slope}");
        for w in pts.windows(2) {
            assert!(w[1].1 < w[0].1);
        }
    }

    #[test]
    fn bound_clamps_at_zero() {
        let k = FanoConstants {
            beta: 1.0,
            d: 1,
            c1: 1.0,
            c3: 1.0,
            kl_const: 10.0,
        };
        assert_eq!(fano_bound(100.0, &k).unwrap(), 0.0);
        assert!(fano_bound(1.0, &k).is_err());
    }

    #[test]
    fn rate_exponents_reference_point() {
        let r = rate_exponents(1.0, 1.0, 1).unwrap();
        assert!((r.gan + 1.0 / 3.0).abs() < 1e-15);
        assert!((r.mle + 0.25).abs() < 1e-15);
        assert!((r.lower + 1.0).abs() < 1e-15);
        assert!(r.lower_dominated);
        assert!((rate_exponents(2.0, 1.0, 2).unwrap().lower + 0.5).abs() < 1e-15);
        assert!(rate_exponents(0.25, 1.0, 1).is_err());
        let big = rate_exponents(1e9, 1.0, 1).unwrap();
        assert!((big.gan + 0.5).abs() < 1e-8 && (big.mle + 0.5).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn gan_exponent_never_worse(beta in 0.05f64..20.0, t in 0.05f64..20.0) {
            let r = rate_exponents(beta, t, 3).unwrap();
            prop_assert!(r.gan < r.mle);
        }

        #[test]
        fn bound_exponent_closed_form(beta in 0.6f64..10.0, d in 1usize..12) {
            let e = fano_bound_exponent(beta, d).unwrap();
            prop_assert!((e + beta / (2.0 * beta + d as f64 - 2.0)).abs() < 1e-12);
        }
    }
}
