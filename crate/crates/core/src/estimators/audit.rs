//! Evaluation against a known truth and the oracle-inequality audit.
//!
//! For a fit `ĝ` from a class `G`, the audit measures
//!
//! ```text
//! E d_eval(Q̂, Q₀) ≤ 2 d_F(P₀, Q₀) + 5ε₁ + ε₂ + 2ε₃ + 2ε₄
//! ```
//!
//! with `d_eval = W_1`. `G` is taken to be the candidate list plus `ĝ`
//! itself, which makes every term computable.

use serde::{Deserialize, Serialize};

use super::gan::GanFit;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::ipm::{deviation_check, ipm, mean_se, DiscriminatorClass};
use crate::measures::{noisy_sample, pushforward_of, pushforward_sample, EmpiricalMeasure, NoisyModel};
use crate::ot::w1_distance;
use crate::par;
use crate::rng::Seed;

pub const MIN_EVAL: usize = 1000;

/// `W_1` between fresh `n_eval`-sample pushforwards of `net` and of the
/// truth generator (noise-free on both sides).
pub fn evaluate_estimator<N: Generator, G: Generator>(
    net: &N,
    truth: &NoisyModel<G>,
    n_eval: usize,
    seed: Seed,
) -> Result<f64> {
    if n_eval < MIN_EVAL {
        return Err(Error::config("n_eval", format!("must be >= {MIN_EVAL}, got {n_eval}")));
    }
    let a = pushforward_sample(net, n_eval, seed.named("fit"))?;
    let b = pushforward_sample(&truth.generator, n_eval, seed.named("truth"))?;
    w1_distance(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Sample size for each `W_1` evaluation against the truth.
    pub n_eval: usize,
    /// Independent repetitions behind every Monte Carlo term.
    pub reps: usize,
    /// Size of the population proxies, as a multiple of `n`.
    pub proxy_factor: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            n_eval: 8192,
            reps: 4,
            proxy_factor: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub value: f64,
    pub stderr: f64,
}

impl Term {
    fn exact(value: f64) -> Self {
        Term { value, stderr: 0.0 }
    }

    fn from_samples(xs: &[f64]) -> Self {
        let (value, stderr) = mean_se(xs);
        Term { value, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTerms {
    /// Measured `d_eval(Q̂, Q₀)`.
    pub lhs: Term,
    /// `d_F(P₀, Q₀)`.
    pub base: Term,
    pub eps1: Term,
    pub eps2: Term,
    pub eps3: Term,
    /// Metric deviation over all pairs from `G ∪ {g₀}`.
    pub eps4: Term,
    /// Metric deviation over pairs of the candidates and `g₀` only.
    pub eps4_covered: f64,
    pub rhs: f64,
    pub combined_stderr: f64,
    pub verdict: bool,
}

/// Inputs shared by the audit terms.
pub struct AuditInput<'a, T: Generator, C: Generator> {
    pub truth: &'a NoisyModel<T>,
    pub candidates: &'a [C],
    pub class: &'a DiscriminatorClass,
    /// Latent rows on which all pairs for the deviation term are pushed forward.
    pub pair_latents: &'a [f64],
    pub data: &'a EmpiricalMeasure,
    pub fit: &'a GanFit,
}

/// Measures every term of the oracle inequality for one fitted instance.
pub fn oracle_audit<T: Generator, C: Generator>(
    input: &AuditInput<'_, T, C>,
    cfg: &AuditConfig,
    seed: Seed,
) -> Result<OracleTerms> {
    let AuditInput {
        truth,
        candidates,
        class,
        pair_latents,
        data,
        fit,
    } = *input;
    if cfg.reps == 0 || cfg.proxy_factor == 0 {
        return Err(Error::config("audit", "reps and proxy_factor must be >= 1"));
    }
    let n = data.len();
    let reps = cfg.reps;
    let eval_seed = seed.named("eval");

    let lhs_draws: Vec<f64> = (0..reps)
        .map(|r| evaluate_estimator(&fit.net, truth, cfg.n_eval, eval_seed.child(r as u64)))
        .collect::<Result<_>>()?;
    let lhs = Term::from_samples(&lhs_draws);

    // ε₁ over G = candidates ∪ {ĝ}
    let cand_draws = par::try_map_range(candidates.len(), |k| {
        (0..reps)
            .map(|r| evaluate_estimator(&candidates[k], truth, cfg.n_eval, eval_seed.child(r as u64)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let eps1 = std::iter::once(&lhs_draws)
        .chain(&cand_draws)
        .map(|d| Term::from_samples(d))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap_or(lhs);

    // ε₂: gap to the best member of G on the recorded objective
    let fit_push = pushforward_of(&fit.net, &fit.eval_latents)?;
    let fit_obj = ipm(class, &fit_push, data)?;
    let cand_obj = par::try_map_range(candidates.len(), |k| {
        ipm(class, &pushforward_of(&candidates[k], &fit.eval_latents)?, data)
    })?;
    let best_obj = cand_obj.iter().fold(fit_obj, |m, v| m.min(*v));
    let eps2 = Term::exact((fit_obj - best_obj).max(fit.eps_opt).max(0.0));

    // ε₃ = E d_F(ℙ_n, P₀) with a large P₀ proxy
    let proxy = noisy_sample(truth, cfg.proxy_factor * n, seed.named("p0"))?;
    let eps3_draws = par::try_map_range(reps, |r| {
        let fresh = noisy_sample(truth, n, seed.named("data").child(r as u64))?;
        ipm(class, &fresh, &proxy)
    })?;
    let eps3 = Term::from_samples(&eps3_draws);

    // d_F(P₀, Q₀) from paired large samples
    let base_draws = par::try_map_range(reps, |r| {
        let s = seed.named("base").child(r as u64);
        let p0 = noisy_sample(truth, cfg.proxy_factor * n, s)?;
        let q0 = pushforward_sample(&truth.generator, cfg.proxy_factor * n, s.named("clean"))?;
        ipm(class, &p0, &q0)
    })?;
    let base = Term::from_samples(&base_draws);

    // ε₄ on pushforwards over common latents
    let mut pushed: Vec<EmpiricalMeasure> = candidates
        .iter()
        .map(|g| pushforward_of(g, pair_latents))
        .collect::<Result<_>>()?;
    pushed.push(pushforward_of(&truth.generator, pair_latents)?);
    let covered_pairs = unordered_pairs(&pushed, &[]);
    let eps4_covered = deviation_check(class, &covered_pairs)?;
    let fit_pairs = unordered_pairs(&pushed, &[pushforward_of(&fit.net, pair_latents)?]);
    let eps4 = Term::exact(eps4_covered.max(deviation_check(class, &fit_pairs)?));

    let rhs = 2.0 * base.value + 5.0 * eps1.value + eps2.value + 2.0 * eps3.value + 2.0 * eps4.value;
    let combined_stderr =
        (lhs.stderr.powi(2) + (2.0 * base.stderr).powi(2) + (5.0 * eps1.stderr).powi(2) + (2.0 * eps3.stderr).powi(2))
            .sqrt();
    Ok(OracleTerms {
        verdict: lhs.value <= rhs + 1.1 * combined_stderr,
        lhs,
        base,
        eps1,
        eps2,
        eps3,
        eps4,
        eps4_covered,
        rhs,
        combined_stderr,
    })
}

/// Unordered pairs within `pool`, or between `extra` and `pool ∪ extra` when
/// `extra` is nonempty.
fn unordered_pairs(pool: &[EmpiricalMeasure], extra: &[EmpiricalMeasure]) -> Vec<(EmpiricalMeasure, EmpiricalMeasure)> {
    let mut out = Vec::new();
    if extra.is_empty() {
        for j in 0..pool.len() {
            for k in j + 1..pool.len() {
                out.push((pool[j].clone(), pool[k].clone()));
            }
        }
    } else {
        for e in extra {
            for p in pool.iter().chain(extra) {
                out.push((e.clone(), p.clone()));
            }
        }
    }
    out
}
