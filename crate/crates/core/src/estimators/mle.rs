//! Sieve maximum likelihood on perturbed data.
//!
//! The data are first perturbed as `X̃ = X + σ̃ ξ`, which gives every model
//! `Q_g * N(0, σ²I)` a density. The log-likelihood is estimated with `M`
//! latent draws per step,
//!
//! ```text
//! ℓ(g, σ) = (1/n) Σ_i log[(1/M) Σ_m φ_σ(X̃_i − g(z_m))],   σ² = σ̃² + σ_fit²,
//! ```
//!
//! and ascended jointly in the network parameters and `σ_fit`.

use serde::{Deserialize, Serialize};

use super::adam::{descend, schedule, Adam};
use super::gan::{GeneratorArch, TraceRow};
use crate::error::{Error, Result};
use crate::measures::{perturb, sample_latent, EmpiricalMeasure, LatentSpec};
use crate::netgen::SparseReluNet;
use crate::par;
use crate::rng::Seed;

pub const SIGMA_FIT_MIN: f64 = 1e-3;
pub const SIGMA_FIT_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleConfig {
    pub arch: GeneratorArch,
    /// Latent draws `M` per step.
    pub m_latent: usize,
    pub steps: usize,
    pub step_size: f64,
    pub sigma_fit_init: f64,
    /// Fixed latent draws for recorded objectives.
    pub m_eval: usize,
    pub eval_every: usize,
    pub init: Option<SparseReluNet>,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            arch: GeneratorArch {
                widths: vec![1, 8, 8, 1],
                sparsity: 64,
                sup_bound: 1.0,
            },
            m_latent: 256,
            steps: 300,
            step_size: 0.02,
            sigma_fit_init: 0.1,
            m_eval: 1024,
            eval_every: 10,
            init: None,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if self.arch.widths.len() < 2 || self.arch.widths.contains(&0) {
            return bad("arch.widths", "need at least input and output widths, all >= 1");
        }
        if self.m_latent == 0 || self.m_eval == 0 {
            return bad("m_latent", "latent batch sizes must be >= 1");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size", "must be > 0");
        }
        if self.eval_every == 0 {
            return bad("eval_every", "must be >= 1");
        }
        if !(SIGMA_FIT_MIN..=SIGMA_FIT_MAX).contains(&self.sigma_fit_init) {
            return bad("sigma_fit_init", "must lie in [1e-3, 1]");
        }
        Ok(())
    }
}

/// The perturbation level `n^{−β*/(2(β*+t*))}` that balances the smoothing
/// bias against the likelihood rate.
pub fn default_sigma_tilde(n: usize, beta_star: f64, t_star: f64) -> f64 {
    (n as f64).powf(-beta_star / (2.0 * (beta_star + t_star)))
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub net: SparseReluNet,
    pub sigma_fit: f64,
    /// Best recorded objective on the fixed evaluation latents.
    pub objective: f64,
    pub trace: Vec<TraceRow>,
}

struct LikGrad {
    value: f64,
    /// `∂ℓ/∂g(z_m)`, row-major `M × D`.
    points: Vec<f64>,
    /// `∂ℓ/∂σ`.
    sigma: f64,
}

/// `ℓ` together with its gradient in the generated points and in `σ`.
fn likelihood(data: &EmpiricalMeasure, gen: &[f64], sigma: f64) -> LikGrad {
    let dim = data.dim();
    let n = data.len();
    let m = gen.len() / dim;
    let inv2 = 1.0 / (2.0 * sigma * sigma);
    let log_norm = -(m as f64).ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
    const CHUNK: usize = 128;
    let parts = par::map_range(n.div_ceil(CHUNK), |c| {
        let mut value = 0.0;
        let mut gpts = vec![0.0; m * dim];
        let mut gsig = 0.0;
        let mut e = vec![0.0; m];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let x = data.point(i);
            let wi = data.weights()[i];
            let mut top = f64::NEG_INFINITY;
            for k in 0..m {
                let y = &gen[k * dim..(k + 1) * dim];
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                e[k] = -d2 * inv2;
                top = top.max(e[k]);
            }
            let mut total = 0.0;
            for v in e.iter_mut() {
                *v = (*v - top).exp();
                total += *v;
            }
            value += wi * (top + total.ln() + log_norm);
            let s2 = sigma * sigma;
            for k in 0..m {
                let r = wi * e[k] / total;
                if r == 0.0 {
                    continue;
                }
                let y = &gen[k * dim..(k + 1) * dim];
                let mut d2 = 0.0;
                for j in 0..dim {
                    let diff = x[j] - y[j];
                    gpts[k * dim + j] += r * diff / s2;
                    d2 += diff * diff;
                }
                gsig += r * (d2 / (s2 * sigma) - dim as f64 / sigma);
            }
        }
        (value, gpts, gsig)
    });
    let mut out = LikGrad {
        value: 0.0,
        points: vec![0.0; m * dim],
        sigma: 0.0,
    };
    for (v, g, s) in parts {
        out.value += v;
        out.sigma += s;
        for (a, b) in out.points.iter_mut().zip(g) {
            *a += b;
        }
    }
    out
}

/// Monte Carlo log-likelihood of already-perturbed data under `Q_g * N(0, σ²I)`
/// with the given latent draws (weighted by the data weights).
pub fn mle_objective(net: &SparseReluNet, perturbed: &EmpiricalMeasure, latents: &[f64], sigma: f64) -> Result<f64> {
    let gen = net.forward_batch(latents)?;
    if net.output_dim() != perturbed.dim() {
        return Err(Error::ShapeMismatch {
            expected: perturbed.dim(),
            got: net.output_dim(),
        });
    }
    Ok(likelihood(perturbed, &gen, sigma).value)
}

/// Fits a generator by ascending the perturbed-data likelihood. The data
/// are perturbed with `seed.named("perturb")`; step `t` uses latent stream
/// `seed.child(t)`.
pub fn mle_fit(data: &EmpiricalMeasure, sigma_tilde: f64, cfg: &MleConfig, seed: Seed) -> Result<MleFit> {
    cfg.validate()?;
    if !(sigma_tilde > 0.0) {
        return Err(Error::config("sigma_tilde", "must be > 0"));
    }
    let perturbed = perturb(data, sigma_tilde, seed.named("perturb"))?;
    let spec = LatentSpec::new(cfg.arch.latent_dim())?;
    let eval_latents = sample_latent(spec, cfg.m_eval, seed.named("eval"));
    let mut net = match &cfg.init {
        Some(n) => n.project(),
        None => cfg.arch.random(seed.named("init"))?,
    };
    if net.output_dim() != data.dim() {
        return Err(Error::ShapeMismatch {
            expected: data.dim(),
            got: net.output_dim(),
        });
    }
    let mut log_sf = cfg.sigma_fit_init.ln();
    let sigma_of = |log_sf: f64| {
        let sf = log_sf.exp();
        (sigma_tilde * sigma_tilde + sf * sf).sqrt()
    };
    let mut adam = Adam::new(net.num_params());
    let mut adam_sigma = Adam::new(1);

    let record = |net: &SparseReluNet, log_sf: f64, step: usize| -> Result<TraceRow> {
        let v = mle_objective(net, &perturbed, &eval_latents, sigma_of(log_sf))?;
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        Ok(TraceRow {
            step,
            objective: v,
            nonzeros: net.nonzeros(),
        })
    };
    let first = record(&net, log_sf, 0)?;
    let mut trace = vec![first];
    let mut best = (net.clone(), log_sf.exp(), first.objective);

    for t in 0..cfg.steps {
        let z = sample_latent(spec, cfg.m_latent, seed.child(t as u64));
        let gen = net.forward_batch(&z)?;
        let sigma = sigma_of(log_sf);
        let lik = likelihood(&perturbed, &gen, sigma);
        if !lik.value.is_finite() {
            return Err(Error::NonFiniteLoss { step: t + 1 });
        }
        // descend −ℓ
        let up: Vec<f64> = lik.points.iter().map(|g| -g).collect();
        let grad = net.backward_batch(&z, &up)?;
        if !grad.is_finite() {
            return Err(Error::NonFiniteLoss { step: t + 1 });
        }
        let lr = schedule(cfg.step_size, t, cfg.steps);
        descend(&mut net, &mut adam, &grad, lr);
        let sf = log_sf.exp();
        let d_log_sf = -lik.sigma * sf * sf / sigma;
        log_sf -= lr * adam_sigma.direction(&[d_log_sf])[0];
        log_sf = log_sf.clamp(SIGMA_FIT_MIN.ln(), SIGMA_FIT_MAX.ln());

        let step = t + 1;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let row = record(&net, log_sf, step)?;
            trace.push(row);
            if row.objective > best.2 {
                best = (net.clone(), log_sf.exp(), row.objective);
            }
        }
    }
    Ok(MleFit {
        net: best.0,
        sigma_fit: best.1,
        objective: best.2,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::ConstantGenerator;
    use crate::measures::{noisy_sample, NoisyModel};

    fn affine_net(w: f64, c: f64) -> SparseReluNet {
        // f(z) = c + w z on [0, 1] via ρ(z + 1) with shift −1
        let mut net = SparseReluNet::zeros(vec![1, 2, 1], 8, 5.0).unwrap();
        net.weights[0] = vec![1.0, 0.0];
        net.shifts[0] = vec![-1.0, -1.0];
        net.weights[1] = vec![w, c - w];
        net
    }

    #[test]
    fn single_term_is_log_density() {
        let net = affine_net(0.5, 0.2);
        let z = [0.3];
        let x = 0.9;
        let sigma = 0.4;
        let data = EmpiricalMeasure::dirac(&[x]).unwrap();
        let v = mle_objective(&net, &data, &z, sigma).unwrap();
        let g = 0.2 + 0.5 * 0.3;
        let exact =
            -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - (x - g) * (x - g) / (2.0 * sigma * sigma);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let data = EmpiricalMeasure::new(2, vec![0.1, 0.3, -0.4, 0.8, 0.5, 0.5]).unwrap();
        let gen = vec![0.0, 0.2, 0.3, -0.1];
        let sigma = 0.6;
        let lik = likelihood(&data, &gen, sigma);
        let h = 1e-6;
        for k in 0..gen.len() {
            let mut p = gen.clone();
            let mut m = gen.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (likelihood(&data, &p, sigma).value - likelihood(&data, &m, sigma).value) / (2.0 * h);
            assert!((fd - lik.points[k]).abs() < 1e-7);
        }
        let fd = (likelihood(&data, &gen, sigma + h).value - likelihood(&data, &gen, sigma - h).value) / (2.0 * h);
        assert!((fd - lik.sigma).abs() < 1e-7);
    }

    #[test]
    fn permutation_invariant() {
        let net = affine_net(0.7, -0.1);
        let pts = vec![0.1, 0.5, -0.3, 0.9, 0.2];
        let mut rev = pts.clone();
        rev.reverse();
        let z = sample_latent(LatentSpec { dim: 1 }, 64, Seed(1));
        let a = mle_objective(&net, &EmpiricalMeasure::new(1, pts).unwrap(), &z, 0.3).unwrap();
        let b = mle_objective(&net, &EmpiricalMeasure::new(1, rev).unwrap(), &z, 0.3).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn location_mle_recovers_mean() {
        let c = 0.37;
        let model = NoisyModel::new(
            ConstantGenerator {
                latent_dim: 1,
                value: vec![c],
            },
            0.0,
        )
        .unwrap();
        let data = noisy_sample(&model, 2000, Seed(2)).unwrap();
        let cfg = MleConfig {
            arch: GeneratorArch {
                widths: vec![1, 2, 1],
                sparsity: 8,
                sup_bound: 5.0,
            },
            steps: 300,
            step_size: 0.02,
            m_latent: 32,
            init: Some(affine_net(0.0, 0.0)),
            ..MleConfig::default()
        };
        let fit = mle_fit(&data, 0.2, &cfg, Seed(3)).unwrap();
        let perturbed = perturb(&data, 0.2, Seed(3).named("perturb")).unwrap();
        let mean = perturbed.mean()[0];
        let z = sample_latent(LatentSpec { dim: 1 }, 4096, Seed(4));
        let out = fit.net.forward_batch(&z).unwrap();
        let fitted = out.iter().sum::<f64>() / out.len() as f64;
        assert!((fitted - mean).abs() < 1e-2, "{fitted} vs {mean}");
        assert!((SIGMA_FIT_MIN..=SIGMA_FIT_MAX).contains(&fit.sigma_fit));
    }

    #[test]
    fn variance_falls_with_more_latents() {
        let net = affine_net(1.0, 0.0);
        let data = EmpiricalMeasure::new(1, (0..50).map(|i| i as f64 / 50.0).collect()).unwrap();
        let var = |m: usize| {
            let vals: Vec<f64> = (0..20)
                .map(|s| {
                    let z = sample_latent(LatentSpec { dim: 1 }, m, Seed(100 + s));
                    mle_objective(&net, &data, &z, 0.05).unwrap()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / 20.0;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 19.0
        };
        let (a, b, c) = (var(8), var(32), var(128));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn default_perturbation_level() {
        assert!((default_sigma_tilde(16, 1.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
