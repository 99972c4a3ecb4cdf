//! Integral probability metrics `d_F(μ, ν) = sup_{f ∈ F} |μf − νf|`.
//!
//! Three discriminator classes are supported: finite sets of 1-Lipschitz
//! potentials (including the constructed class built from an ε-net of
//! generators), Lipschitz-bounded ReLU networks, and smooth feature sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::measures::{sample_gaussian, sample_latent, EmpiricalMeasure, LatentSpec};
use crate::netgen::SparseReluNet;
use crate::ot::{kantorovich_potential, w1_distance, PotentialFn};
use crate::par;
use crate::rng::Seed;

/// Latent points used to measure distances between generators.
pub const NET_LATENTS: usize = 4096;

/// A twice-differentiable test function with closed-form derivative bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothFeature {
    /// `a cos(ω·x + φ)`.
    Fourier {
        omega: Vec<f64>,
        phase: f64,
        amplitude: f64,
    },
    /// `Σ_k c_k x_k² + Σ_k l_k x_k`.
    Quadratic { curvature: Vec<f64>, linear: Vec<f64> },
}

impl SmoothFeature {
    pub fn dim(&self) -> usize {
        match self {
            SmoothFeature::Fourier { omega, .. } => omega.len(),
            SmoothFeature::Quadratic { curvature, .. } => curvature.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFeature::Fourier {
                omega,
                phase,
                amplitude,
            } => amplitude * (dot(omega, x) + phase).cos(),
            SmoothFeature::Quadratic { curvature, linear } => x
                .iter()
                .zip(curvature)
                .zip(linear)
                .map(|((x, c), l)| c * x * x + l * x)
                .sum(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SmoothFeature::Fourier {
                omega,
                phase,
                amplitude,
            } => {
                let s = -amplitude * (dot(omega, x) + phase).sin();
                omega.iter().map(|w| s * w).collect()
            }
            SmoothFeature::Quadratic { curvature, linear } => x
                .iter()
                .zip(curvature)
                .zip(linear)
                .map(|((x, c), l)| 2.0 * c * x + l)
                .collect(),
        }
    }

    /// Bound on `|∇f|` over the ball of the given radius (global for Fourier).
    pub fn lipschitz_bound(&self, radius: f64) -> f64 {
        match self {
            SmoothFeature::Fourier { omega, amplitude, .. } => amplitude.abs() * norm(omega),
            SmoothFeature::Quadratic { curvature, linear } => {
                let c = curvature.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                2.0 * c * radius + norm(linear)
            }
        }
    }

    /// Bound on the operator norm of the Hessian.
    pub fn hessian_bound(&self) -> f64 {
        match self {
            SmoothFeature::Fourier { omega, amplitude, .. } => amplitude.abs() * dot(omega, omega),
            SmoothFeature::Quadratic { curvature, .. } => 2.0 * curvature.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smooth features sharing a dimension. Quadratic bounds are certified on
/// the ball of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub dim: usize,
    pub radius: f64,
    pub features: Vec<SmoothFeature>,
}

impl FeatureSet {
    pub fn new(dim: usize, radius: f64, features: Vec<SmoothFeature>) -> Result<Self> {
        if let Some(f) = features.iter().find(|f| f.dim() != dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: f.dim(),
            });
        }
        if let Some(SmoothFeature::Quadratic { curvature, linear }) = features
            .iter()
            .find(|f| matches!(f, SmoothFeature::Quadratic { curvature, linear } if curvature.len() != linear.len()))
        {
            return Err(Error::ShapeMismatch {
                expected: curvature.len(),
                got: linear.len(),
            });
        }
        Ok(FeatureSet { dim, radius, features })
    }

    /// `count` Fourier features with frequencies uniform in the ball of radius
    /// `max_freq` and amplitude `1 / max(1, |ω|²)`, so every feature has
    /// value, gradient and Hessian bounded by 1.
    pub fn random_fourier(dim: usize, count: usize, max_freq: f64, seed: Seed) -> Result<Self> {
        let g = sample_gaussian(count, dim, seed.named("direction"));
        let u = sample_latent(LatentSpec::new(2)?, count, seed.named("radius"));
        let features = (0..count)
            .map(|k| {
                let dir = &g[k * dim..(k + 1) * dim];
                let len = norm(dir).max(f64::MIN_POSITIVE);
                let r = max_freq * u[2 * k].powf(1.0 / dim as f64);
                let omega: Vec<f64> = dir.iter().map(|v| v / len * r).collect();
                let amplitude = 1.0 / (r * r).max(1.0);
                SmoothFeature::Fourier {
                    omega,
                    phase: std::f64::consts::TAU * u[2 * k + 1],
                    amplitude,
                }
            })
            .collect();
        Self::new(dim, 1.0, features)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.features
            .iter()
            .map(|f| f.lipschitz_bound(self.radius))
            .fold(0.0, f64::max)
    }

    pub fn hessian_bound(&self) -> f64 {
        self.features.iter().map(|f| f.hessian_bound()).fold(0.0, f64::max)
    }
}

/// A discriminator class `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscriminatorClass {
    /// Finitely many 1-Lipschitz potentials.
    FiniteSet {
        members: Vec<PotentialFn>,
    },
    /// A scalar ReLU network rescaled to have certified Lipschitz constant
    /// at most `bound`: `f = min(1, bound / Lip(net)) · net`.
    LipschitzNet {
        net: SparseReluNet,
        bound: f64,
    },
    SmoothFeatureSet(FeatureSet),
}

impl DiscriminatorClass {
    pub fn finite(members: Vec<PotentialFn>) -> Self {
        DiscriminatorClass::FiniteSet { members }
    }

    pub fn lipschitz_net(net: SparseReluNet, bound: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                expected: 1,
                got: net.output_dim(),
            });
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidSpec(format!("Lipschitz bound must be > 0, got {bound}")));
        }
        Ok(DiscriminatorClass::LipschitzNet { net, bound })
    }

    /// Number of members (1 for a network).
    pub fn len(&self) -> usize {
        match self {
            DiscriminatorClass::FiniteSet { members } => members.len(),
            DiscriminatorClass::LipschitzNet { .. } => 1,
            DiscriminatorClass::SmoothFeatureSet(fs) => fs.features.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scale applied to the raw network output; 1 for other classes.
    pub fn net_scale(&self) -> f64 {
        match self {
            DiscriminatorClass::LipschitzNet { net, bound } => {
                let lip = net.certified_lipschitz();
                if lip > *bound {
                    bound / lip
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    }

    /// `f_k(x)`.
    pub fn member_value(&self, k: usize, x: &[f64]) -> f64 {
        match self {
            DiscriminatorClass::FiniteSet { members } => members[k].eval(x),
            DiscriminatorClass::LipschitzNet { net, .. } => {
                self.net_scale() * net.forward(x).map(|v| v[0]).unwrap_or(f64::NAN)
            }
            DiscriminatorClass::SmoothFeatureSet(fs) => fs.features[k].eval(x),
        }
    }

    /// `∇f_k(x)` (a subgradient at kinks).
    pub fn member_grad(&self, k: usize, x: &[f64]) -> Vec<f64> {
        match self {
            DiscriminatorClass::FiniteSet { members } => members[k].eval_grad(x).1,
            DiscriminatorClass::LipschitzNet { net, .. } => {
                let s = self.net_scale();
                match net.backward(x, &[1.0]) {
                    Ok((_, dz)) => dz.into_iter().map(|v| s * v).collect(),
                    Err(_) => vec![f64::NAN; x.len()],
                }
            }
            DiscriminatorClass::SmoothFeatureSet(fs) => fs.features[k].grad(x),
        }
    }

    /// `μ f_k` for every member, in member order.
    pub fn member_means(&self, mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        match self {
            DiscriminatorClass::LipschitzNet { net, .. } => {
                let out = net.forward_batch(mu.points())?;
                let s = self.net_scale();
                Ok(vec![s * out.iter().zip(mu.weights()).map(|(v, w)| v * w).sum::<f64>()])
            }
            _ => Ok(par::map_range(self.len(), |k| {
                mu.integrate(|x| self.member_value(k, x))
            })),
        }
    }

    /// Signed gaps `μf_k − νf_k`.
    pub fn gaps(&self, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        check_dims(self, mu, nu)?;
        let a = self.member_means(mu)?;
        let b = self.member_means(nu)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

fn check_dims(f: &DiscriminatorClass, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if f.is_empty() {
        return Err(Error::EmptyClass);
    }
    if mu.dim() != nu.dim() {
        return Err(Error::ShapeMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let want = match f {
        DiscriminatorClass::FiniteSet { members } => members[0].dim(),
        DiscriminatorClass::LipschitzNet { net, .. } => net.input_dim(),
        DiscriminatorClass::SmoothFeatureSet(fs) => fs.dim,
    };
    if want != mu.dim() {
        return Err(Error::ShapeMismatch {
            expected: want,
            got: mu.dim(),
        });
    }
    Ok(())
}

/// Index and signed gap of the member attaining the sup (first on ties).
pub fn witness(f: &DiscriminatorClass, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<(usize, f64)> {
    let gaps = f.gaps(mu, nu)?;
    let mut best = (0, gaps[0]);
    for (k, g) in gaps.iter().enumerate().skip(1) {
        if g.abs() > best.1.abs() {
            best = (k, *g);
        }
    }
    Ok(best)
}

/// `d_F(μ, ν)`. For a network class this is the value at the supplied
/// parameters, a lower bound on the sup over the class.
pub fn ipm(f: &DiscriminatorClass, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    Ok(witness(f, mu, nu)?.1.abs())
}

/// Output of [`build_constructed_discriminator`].
#[derive(Debug, Clone)]
pub struct ConstructedClass {
    pub class: DiscriminatorClass,
    /// Candidate indices forming the ε-net, in selection order.
    pub net: Vec<usize>,
    /// Row-major latent points (`max(NET_LATENTS, m_atoms)` rows) shared by
    /// the net distances (first [`NET_LATENTS`] rows) and the atoms (first
    /// `m_atoms` rows).
    pub latents: Vec<f64>,
    pub latent_dim: usize,
}

/// Greedy farthest-point ε-net of the candidates under the empirical
/// `L²(P_Z)` distance on the given latent rows. Starts from candidate 0.
pub fn epsilon_net<G: Generator>(candidates: &[G], latents: &[f64], eps: f64) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::InvalidSpec("no candidate generators".into()));
    }
    let outputs = par::try_map_range(candidates.len(), |k| candidates[k].generate_batch(latents))?;
    let rows = latents.len() / candidates[0].latent_dim();
    let dist =
        |a: &[f64], b: &[f64]| (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / rows as f64).sqrt();
    let mut net = vec![0];
    let mut gap: Vec<f64> = par::map_slice(&outputs, |o| dist(o, &outputs[0]));
    loop {
        let (far, d) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (k, v)| if *v > b.1 { (k, *v) } else { b });
        if d <= eps {
            break;
        }
        net.push(far);
        let fresh: Vec<f64> = par::map_slice(&outputs, |o| dist(o, &outputs[far]));
        for (g, f) in gap.iter_mut().zip(fresh) {
            *g = g.min(f);
        }
    }
    Ok(net)
}

/// The finite class `{f_jk}` of Kantorovich potentials between the
/// `m_atoms`-sample pushforwards of every ordered pair of ε-net members,
/// each recentered to `f(0) = 0`. Its size is `N²` for a net of size `N`.
pub fn build_constructed_discriminator<G: Generator>(
    candidates: &[G],
    m_atoms: usize,
    eps: f64,
    seed: Seed,
) -> Result<ConstructedClass> {
    if candidates.is_empty() {
        return Err(Error::InvalidSpec("no candidate generators".into()));
    }
    if m_atoms == 0 {
        return Err(Error::InvalidSpec("m_atoms must be >= 1".into()));
    }
    let d = candidates[0].latent_dim();
    let rows = NET_LATENTS.max(m_atoms);
    let latents = sample_latent(LatentSpec::new(d)?, rows, seed.named("net"));
    let net = epsilon_net(candidates, &latents[..NET_LATENTS * d], eps)?;
    let atoms = &latents[..m_atoms * d];
    let pushed: Vec<EmpiricalMeasure> = net
        .iter()
        .map(|&k| crate::measures::pushforward_of(&candidates[k], atoms))
        .collect::<Result<_>>()?;
    let n = net.len();
    let members = par::try_map_range(n * n, |p| {
        let (j, k) = (p / n, p % n);
        if j == k {
            Ok(PotentialFn::zero(pushed[j].dim()))
        } else {
            kantorovich_potential(&pushed[j], &pushed[k])
        }
    })?;
    Ok(ConstructedClass {
        class: DiscriminatorClass::finite(members),
        net,
        latents,
        latent_dim: d,
    })
}

/// `max |W_1(μ, ν) − d_F(μ, ν)|` over the supplied pairs: the empirical
/// metric-deviation term.
pub fn deviation_check(f: &DiscriminatorClass, pairs: &[(EmpiricalMeasure, EmpiricalMeasure)]) -> Result<f64> {
    let devs = par::try_map_range(pairs.len(), |k| {
        let (mu, nu) = &pairs[k];
        Ok::<_, Error>((w1_distance(mu, nu)? - ipm(f, mu, nu)?).abs())
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// One point of a noise-scaling curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub sigma: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Monte Carlo estimates of `|E f(Y + σξ) − E f(Y)|` with `Y = g(Z)`.
///
/// The same `(Z, ξ)` draws are reused across the grid, and each term is
/// symmetrized as `½[f(Y+σξ) + f(Y−σξ)] − f(Y)`, which removes the odd
/// orders in `σ` exactly.
pub fn smooth_gap_curve<G: Generator>(
    g: &G,
    feature: &SmoothFeature,
    sigma_grid: &[f64],
    n_mc: usize,
    seed: Seed,
) -> Result<Vec<GapPoint>> {
    let dd = g.output_dim();
    if feature.dim() != dd {
        return Err(Error::ShapeMismatch {
            expected: dd,
            got: feature.dim(),
        });
    }
    let z = sample_latent(LatentSpec::new(g.latent_dim())?, n_mc, seed.named("latent"));
    let y = g.generate_batch(&z)?;
    let xi = sample_gaussian(n_mc, dd, seed.named("noise"));
    let base: Vec<f64> = par::map_range(n_mc, |i| feature.eval(&y[i * dd..(i + 1) * dd]));
    Ok(sigma_grid
        .iter()
        .map(|&s| {
            let terms = par::map_range(n_mc, |i| {
                let yi = &y[i * dd..(i + 1) * dd];
                let e = &xi[i * dd..(i + 1) * dd];
                let plus: Vec<f64> = yi.iter().zip(e).map(|(a, b)| a + s * b).collect();
                let minus: Vec<f64> = yi.iter().zip(e).map(|(a, b)| a - s * b).collect();
                0.5 * (feature.eval(&plus) + feature.eval(&minus)) - base[i]
            });
            let (mean, se) = mean_se(&terms);
            GapPoint {
                sigma: s,
                value: mean.abs(),
                stderr: se,
            }
        })
        .collect())
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E|ξ|₂` for `ξ ~ N(0, I_D)`: `√2 Γ((D+1)/2) / Γ(D/2)`, via
/// `μ_1 = √(2/π)` and `μ_{k+1} = k / μ_k`.
pub fn chi_mean(dim: usize) -> f64 {
    let mut m = (2.0 / std::f64::consts::PI).sqrt();
    for k in 1..dim {
        m = k as f64 / m;
    }
    m
}

/// One point of the Lipschitz noise curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGapPoint {
    pub sigma: f64,
    /// `W_1` between `g(Z_i) + σξ_i` and `g(Z_i)` on matched latents.
    pub w1: f64,
    /// Cost of the matched coupling, `mean_i σ|ξ_i|`.
    pub coupling: f64,
    /// `σ E|ξ|₂`.
    pub bound: f64,
}

/// `W_1(Q̂_g * N(0, σ²I), Q̂_g)` over a σ grid, with `W_1` standing in for
/// the sup over all 1-Lipschitz discriminators. Latent and noise draws are
/// shared across the grid.
pub fn lipschitz_gap_curve<G: Generator>(
    g: &G,
    sigma_grid: &[f64],
    n_mc: usize,
    seed: Seed,
) -> Result<Vec<LipschitzGapPoint>> {
    let dd = g.output_dim();
    let z = sample_latent(LatentSpec::new(g.latent_dim())?, n_mc, seed.named("latent"));
    let y = g.generate_batch(&z)?;
    let xi = sample_gaussian(n_mc, dd, seed.named("noise"));
    let clean = EmpiricalMeasure::new(dd, y.clone())?;
    let xi_norm: f64 = (0..n_mc).map(|i| norm(&xi[i * dd..(i + 1) * dd])).sum::<f64>() / n_mc as f64;
    sigma_grid
        .iter()
        .map(|&s| {
            let noisy: Vec<f64> = y.iter().zip(&xi).map(|(a, b)| a + s * b).collect();
            let w1 = w1_distance(&EmpiricalMeasure::new(dd, noisy)?, &clean)?;
            Ok(LipschitzGapPoint {
                sigma: s,
                w1,
                coupling: s * xi_norm,
                bound: s * chi_mean(dd),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{ConstantGenerator, FnGenerator};
    use crate::harness::fit_points;
    use crate::measures::pushforward_sample;
    use crate::ot::w1_exact;
    use rand::Rng;

    fn random_measure(rng: &mut impl Rng, n: usize, d: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn random_potentials(rng: &mut impl Rng, count: usize, d: usize) -> Vec<PotentialFn> {
        (0..count)
            .map(|_| {
                let k = rng.random_range(1..6);
                let a = (0..k * d).map(|_| rng.random::<f64>()).collect();
                let v = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                PotentialFn::new(d, a, v).unwrap()
            })
            .collect()
    }

    #[test]
    fn finite_set_matches_exhaustive() {
        let mut rng = Seed(1).rng();
        for d in 1..=3 {
            let members = random_potentials(&mut rng, 5, d);
            let mu = random_measure(&mut rng, 40, d);
            let nu = random_measure(&mut rng, 30, d);
            let mut best: f64 = 0.0;
            for f in &members {
                let a: f64 = (0..mu.len()).map(|i| f.eval(mu.point(i))).sum::<f64>() / mu.len() as f64;
                let b: f64 = (0..nu.len()).map(|i| f.eval(nu.point(i))).sum::<f64>() / nu.len() as f64;
                best = best.max((a - b).abs());
            }
            let class = DiscriminatorClass::finite(members);
            assert!((ipm(&class, &mu, &nu).unwrap() - best).abs() < 1e-12);
            assert_eq!(ipm(&class, &mu, &mu).unwrap(), 0.0);
            assert!(ipm(&class, &mu, &nu).unwrap() <= w1_exact(&mu, &nu).unwrap().cost + 1e-9);
        }
    }

    #[test]
    fn single_member_is_absolute_gap() {
        // the absolute value makes {f} and {f, -f} the same class
        let f = PotentialFn::new(1, vec![0.2, 0.9], vec![0.0, 0.1]).unwrap();
        let mu = EmpiricalMeasure::new(1, vec![0.0, 0.5, 1.0]).unwrap();
        let nu = EmpiricalMeasure::new(1, vec![0.3, 0.7]).unwrap();
        let mf = mu.integrate(|x| f.eval(x));
        let nf = nu.integrate(|x| f.eval(x));
        let class = DiscriminatorClass::finite(vec![f]);
        assert!((ipm(&class, &mu, &nu).unwrap() - (mf - nf).abs()).abs() < 1e-15);
        assert!((ipm(&class, &nu, &mu).unwrap() - (mf - nf).abs()).abs() < 1e-15);
    }

    #[test]
    fn empty_class_errors() {
        let mu = EmpiricalMeasure::dirac(&[0.0]).unwrap();
        let class = DiscriminatorClass::finite(vec![]);
        assert!(matches!(ipm(&class, &mu, &mu), Err(Error::EmptyClass)));
    }

    #[test]
    fn pseudometric_on_random_triples() {
        let mut rng = Seed(2).rng();
        let class = DiscriminatorClass::finite(random_potentials(&mut rng, 8, 2));
        let fs = DiscriminatorClass::SmoothFeatureSet(FeatureSet::random_fourier(2, 16, 6.0, Seed(3)).unwrap());
        for _ in 0..30 {
            let a = random_measure(&mut rng, 20, 2);
            let b = random_measure(&mut rng, 25, 2);
            let c = random_measure(&mut rng, 15, 2);
            for f in [&class, &fs] {
                let ab = ipm(f, &a, &b).unwrap();
                let ba = ipm(f, &b, &a).unwrap();
                let bc = ipm(f, &b, &c).unwrap();
                let ac = ipm(f, &a, &c).unwrap();
                assert!(ab >= 0.0);
                assert!((ab - ba).abs() < 1e-12);
                assert!(ac <= ab + bc + 1e-12);
            }
        }
    }

    #[test]
    fn lipschitz_net_respects_bound() {
        let net = SparseReluNet::random(vec![2, 8, 8, 1], 60, 10.0, Seed(4)).unwrap();
        let class = DiscriminatorClass::lipschitz_net(net, 0.5).unwrap();
        let mut rng = Seed(5).rng();
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let dx = norm(&[x[0] - y[0], x[1] - y[1]]);
            let df = (class.member_value(0, &x) - class.member_value(0, &y)).abs();
            assert!(df <= 0.5 * dx + 1e-12);
        }
        let mu = random_measure(&mut rng, 30, 2);
        let nu = random_measure(&mut rng, 30, 2);
        assert!(ipm(&class, &mu, &nu).unwrap() <= 0.5 * w1_exact(&mu, &nu).unwrap().cost + 1e-9);
    }

    #[test]
    fn feature_bounds_hold() {
        let fs = FeatureSet::random_fourier(3, 20, 8.0, Seed(6)).unwrap();
        assert!(fs.lipschitz_bound() <= 1.0 + 1e-12);
        assert!(fs.hessian_bound() <= 1.0 + 1e-12);
        let mut rng = Seed(7).rng();
        let h = 1e-5;
        for f in &fs.features {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = f.grad(&x);
            for k in 0..3 {
                let mut p = x.clone();
                let mut m = x.clone();
                p[k] += h;
                m[k] -= h;
                let fd = (f.eval(&p) - f.eval(&m)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8);
            }
            assert!(norm(&g) <= f.lipschitz_bound(1.0) + 1e-12);
        }
        let s = serde_json::to_string(&fs).unwrap();
        assert_eq!(serde_json::from_str::<FeatureSet>(&s).unwrap(), fs);
    }

    #[test]
    fn constructed_single_candidate_is_zero() {
        let g = [ConstantGenerator {
            latent_dim: 1,
            value: vec![0.4],
        }];
        let c = build_constructed_discriminator(&g, 16, 0.1, Seed(8)).unwrap();
        assert_eq!(c.class.len(), 1);
        let mu = EmpiricalMeasure::new(1, vec![0.0, 1.0]).unwrap();
        let nu = EmpiricalMeasure::dirac(&[3.0]).unwrap();
        assert_eq!(ipm(&c.class, &mu, &nu).unwrap(), 0.0);
    }

    #[test]
    fn constructed_diracs_give_distance() {
        let g = [
            ConstantGenerator {
                latent_dim: 1,
                value: vec![0.0, 0.0],
            },
            ConstantGenerator {
                latent_dim: 1,
                value: vec![0.3, 0.4],
            },
        ];
        let c = build_constructed_discriminator(&g, 8, 0.01, Seed(9)).unwrap();
        assert_eq!(c.net, vec![0, 1]);
        assert_eq!(c.class.len(), 4);
        let a = EmpiricalMeasure::dirac(&[0.0, 0.0]).unwrap();
        let b = EmpiricalMeasure::dirac(&[0.3, 0.4]).unwrap();
        assert!((ipm(&c.class, &a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constructed_class_tracks_w1_on_nets() {
        let cands: Vec<SparseReluNet> = (0..5)
            .map(|k| SparseReluNet::random(vec![1, 6, 6, 2], 40, 3.0, Seed(100 + k)).unwrap())
            .collect();
        let eps = 0.05;
        let c = build_constructed_discriminator(&cands, 256, eps, Seed(10)).unwrap();
        let atoms = &c.latents[..256];
        let pushed: Vec<EmpiricalMeasure> = cands
            .iter()
            .map(|g| crate::measures::pushforward_of(g, atoms).unwrap())
            .collect();
        for j in 0..5 {
            for k in 0..5 {
                let w = w1_distance(&pushed[j], &pushed[k]).unwrap();
                let d = ipm(&c.class, &pushed[j], &pushed[k]).unwrap();
                assert!(d <= w + 1e-9);
                if c.net.contains(&j) && c.net.contains(&k) {
                    assert!(d >= w - 2.0 * eps - 1e-9, "pair ({j},{k}): {d} vs {w}");
                }
            }
        }
        let pairs: Vec<_> = (0..5)
            .flat_map(|j| (0..5).map(move |k| (j, k)))
            .map(|(j, k)| (pushed[j].clone(), pushed[k].clone()))
            .collect();
        assert!(deviation_check(&c.class, &pairs).unwrap() <= 5.0 * eps + 1e-6);
    }

    #[test]
    fn deviation_zero_with_exact_potentials() {
        let mut rng = Seed(11).rng();
        let pairs: Vec<_> = (0..4)
            .map(|_| (random_measure(&mut rng, 12, 2), random_measure(&mut rng, 12, 2)))
            .collect();
        let members = pairs
            .iter()
            .map(|(a, b)| kantorovich_potential(a, b).unwrap())
            .collect();
        let class = DiscriminatorClass::finite(members);
        assert!(deviation_check(&class, &pairs).unwrap() < 1e-6);
        let same = vec![(pairs[0].0.clone(), pairs[0].0.clone())];
        assert_eq!(deviation_check(&class, &same).unwrap(), 0.0);
    }

    fn curve() -> FnGenerator<impl Fn(&[f64], &mut [f64]) + Send + Sync> {
        FnGenerator::new(1, 2, |z: &[f64], out: &mut [f64]| {
            out[0] = (3.0 * z[0]).cos();
            out[1] = (3.0 * z[0]).sin();
        })
    }

    #[test]
    fn smooth_gap_identities() {
        let g = ConstantGenerator {
            latent_dim: 1,
            value: vec![0.5, -0.2, 1.0],
        };
        let quad = SmoothFeature::Quadratic {
            curvature: vec![1.0; 3],
            linear: vec![0.0; 3],
        };
        let lin = SmoothFeature::Quadratic {
            curvature: vec![0.0; 3],
            linear: vec![1.0, -2.0, 0.5],
        };
        let grid = [0.0, 0.1, 0.3];
        let q = smooth_gap_curve(&g, &quad, &grid, 20_000, Seed(12)).unwrap();
        assert_eq!(q[0].value, 0.0);
        for p in &q[1..] {
            let exact = 3.0 * p.sigma * p.sigma;
            assert!((p.value - exact).abs() < 3.0 * p.stderr, "{p:?}");
        }
        for p in smooth_gap_curve(&g, &lin, &grid, 1000, Seed(12)).unwrap() {
            assert!(p.value < 1e-12);
        }
    }

    #[test]
    fn smooth_gap_is_quadratic_in_sigma() {
        let grid: Vec<f64> = (0..6).map(|k| 0.02 * 1.8f64.powi(k)).collect();
        let f = SmoothFeature::Fourier {
            omega: vec![1.0, 2.0],
            phase: 0.3,
            amplitude: 1.0,
        };
        let pts = smooth_gap_curve(&curve(), &f, &grid, 4000, Seed(13)).unwrap();
        let fit = fit_sigma(pts.iter().map(|p| (p.sigma, p.value)));
        assert!((fit - 2.0).abs() < 0.3, "slope {fit}");
    }

    pub(crate) fn fit_sigma(pts: impl Iterator<Item = (f64, f64)>) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.map(|(s, v)| (s.ln(), v.ln())).unzip();
        crate::harness::ols(&xs, &ys).0
    }

    #[test]
    fn chi_mean_values() {
        assert!((chi_mean(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((chi_mean(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        // E|ξ| for D = 3 is 2√(2/π)
        assert!((chi_mean(3) - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_gap_linear_in_sigma() {
        let grid: Vec<f64> = (0..5).map(|k| 0.02 * 2.2f64.powi(k)).collect();
        let pts = lipschitz_gap_curve(&curve(), &grid, 600, Seed(14)).unwrap();
        for p in &pts {
            assert!(p.w1 <= p.coupling + 1e-9);
        }
        let fit = fit_sigma(pts.iter().map(|p| (p.sigma, p.w1)));
        assert!((fit - 1.0).abs() < 0.15, "slope {fit}");
        let zero = lipschitz_gap_curve(&curve(), &[0.0], 50, Seed(14)).unwrap();
        assert_eq!(zero[0].w1, 0.0);
    }

    #[test]
    fn holder_ipm_rate_is_root_n() {
        // Closed-form means of Fourier features under the uniform square.
        let fs = FeatureSet::random_fourier(2, 24, 3.0, Seed(15)).unwrap();
        let exact: Vec<f64> = fs
            .features
            .iter()
            .map(|f| match f {
                SmoothFeature::Fourier {
                    omega,
                    phase,
                    amplitude,
                } => {
                    // E e^{i(ω·U + φ)} = e^{iφ} ∏ (e^{iω_k} − 1)/(iω_k)
                    let (mut re, mut im) = (phase.cos(), phase.sin());
                    for w in omega {
                        let (fr, fi) = if w.abs() < 1e-12 {
                            (1.0, 0.0)
                        } else {
                            (w.sin() / w, (1.0 - w.cos()) / w)
                        };
                        (re, im) = (re * fr - im * fi, re * fi + im * fr);
                    }
                    amplitude * re
                }
                _ => unreachable!(),
            })
            .collect();
        let class = DiscriminatorClass::SmoothFeatureSet(fs);
        let grid = [64usize, 256, 1024, 4096];
        let means: Vec<(usize, f64)> = grid
            .iter()
            .map(|&n| {
                let reps = 40;
                let total: f64 = (0..reps)
                    .map(|r| {
                        let g = FnGenerator::new(2, 2, |z: &[f64], o: &mut [f64]| o.copy_from_slice(z));
                        let s = pushforward_sample(&g, n, Seed(16).child(n as u64).child(r)).unwrap();
                        let m = class.member_means(&s).unwrap();
                        m.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                    })
                    .sum();
                (n, total / reps as f64)
            })
            .collect();
        let fit = fit_points(&means).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.1, "slope {}", fit.slope);
    }
}
