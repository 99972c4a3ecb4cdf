//! The GAN-type estimator: minimize `d_F(Q̂_g, ℙ_n)` over sparse ReLU generators.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::adam::{descend, schedule, Adam};
use crate::error::{Error, Result};
use crate::ipm::DiscriminatorClass;
use crate::measures::{pushforward_of, sample_latent, EmpiricalMeasure, LatentSpec};
use crate::netgen::{NetGrad, SparseReluNet};
use crate::ot::{w1_distance, w1_exact};
use crate::par;
use crate::rng::Seed;

/// Architecture `(L, p, s, F)` of the generator class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorArch {
    pub widths: Vec<usize>,
    pub sparsity: usize,
    pub sup_bound: f64,
}

impl GeneratorArch {
    pub fn random(&self, seed: Seed) -> Result<SparseReluNet> {
        SparseReluNet::init_connected(self.widths.clone(), self.sparsity, self.sup_bound, seed)
    }

    pub fn latent_dim(&self) -> usize {
        self.widths[0]
    }
}

/// The inner maximization of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Critic {
    /// A fixed class. Finite and smooth-feature classes are maximized
    /// exactly; a Lipschitz network is trained by alternating ascent.
    Class { class: DiscriminatorClass },
    /// All 1-Lipschitz functions, i.e. `d_F = W_1`, maximized exactly by an
    /// optimal transport solve.
    Wasserstein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub arch: GeneratorArch,
    pub critic: Critic,
    pub outer_steps: usize,
    pub step_size: f64,
    /// Fresh latent points per outer step.
    pub m_latent: usize,
    /// Fixed latent points on which recorded objectives are computed.
    pub m_eval: usize,
    pub eval_every: usize,
    pub restarts: usize,
    /// Random draws in the optimization-error search; defaults to `10 × restarts`.
    pub random_search: Option<usize>,
    /// Ascent steps per outer step for a network critic.
    pub critic_steps: usize,
    pub critic_step_size: f64,
    /// Starting point for restart 0.
    pub init: Option<SparseReluNet>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            arch: GeneratorArch {
                widths: vec![1, 8, 8, 1],
                sparsity: 64,
                sup_bound: 1.0,
            },
            critic: Critic::Wasserstein,
            outer_steps: 300,
            step_size: 0.02,
            m_latent: 512,
            m_eval: 2048,
            eval_every: 10,
            restarts: 2,
            random_search: None,
            critic_steps: 5,
            critic_step_size: 0.01,
            init: None,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if self.arch.widths.len() < 2 || self.arch.widths.contains(&0) {
            return bad("arch.widths", "need at least input and output widths, all >= 1");
        }
        if !(self.arch.sup_bound > 0.0) {
            return bad("arch.sup_bound", "must be > 0");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size", "must be > 0");
        }
        if self.m_latent == 0 || self.m_eval == 0 {
            return bad("m_latent", "latent batch sizes must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every", "must be >= 1");
        }
        if self.restarts == 0 {
            return bad("restarts", "must be >= 1");
        }
        if let Critic::Class {
            class: DiscriminatorClass::LipschitzNet { .. },
        } = self.critic
        {
            if !(self.critic_step_size > 0.0) {
                return bad("critic_step_size", "must be > 0");
            }
        }
        Ok(())
    }
}

/// One recorded objective value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub objective: f64,
    pub nonzeros: usize,
}

/// Writes `step,objective,nonzeros` rows.
pub fn write_trace<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "objective", "nonzeros"])?;
    for r in rows {
        out.write_record([r.step.to_string(), format!("{:e}", r.objective), r.nonzeros.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GanFit {
    /// Best iterate over all restarts.
    pub net: SparseReluNet,
    /// `d_F(Q̂_ĝ, ℙ_n)` with `Q̂_ĝ` the pushforward of `eval_latents`.
    pub objective: f64,
    /// Achieved objective minus the best value seen over restarts and the
    /// random search (never negative).
    pub eps_opt: f64,
    pub best_restart: usize,
    /// Per-restart traces; `None` for a restart aborted on a non-finite loss.
    pub traces: Vec<Option<Vec<TraceRow>>>,
    pub eval_latents: Vec<f64>,
    /// Critic state at the end of the best restart (for network critics the
    /// trained parameters; otherwise the configured class).
    pub critic: Critic,
}

/// Critic together with cached data-side quantities.
struct CriticState<'a> {
    critic: Critic,
    data: &'a EmpiricalMeasure,
    data_means: Vec<f64>,
}

impl<'a> CriticState<'a> {
    fn new(critic: &Critic, data: &'a EmpiricalMeasure) -> Result<Self> {
        let data_means = match critic {
            Critic::Class { class } if !matches!(class, DiscriminatorClass::LipschitzNet { .. }) => {
                if class.is_empty() {
                    return Err(Error::EmptyClass);
                }
                class.member_means(data)?
            }
            _ => Vec::new(),
        };
        Ok(CriticState {
            critic: critic.clone(),
            data,
            data_means,
        })
    }

    /// `d_F(gen, data)` at the current critic.
    fn objective(&self, gen: &EmpiricalMeasure) -> Result<f64> {
        match &self.critic {
            Critic::Wasserstein => w1_distance(gen, self.data),
            Critic::Class { class } => Ok(self.witness(class, gen)?.1.abs()),
        }
    }

    fn witness(&self, class: &DiscriminatorClass, gen: &EmpiricalMeasure) -> Result<(usize, f64)> {
        if self.data_means.is_empty() {
            return crate::ipm::witness(class, gen, self.data);
        }
        let means = class.member_means(gen)?;
        let mut best = (0, means[0] - self.data_means[0]);
        for (k, (a, b)) in means.iter().zip(&self.data_means).enumerate().skip(1) {
            if (a - b).abs() > best.1.abs() {
                best = (k, a - b);
            }
        }
        Ok(best)
    }

    /// Gradient of the objective with respect to each generated point.
    fn point_grads(&self, gen: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let dim = gen.dim();
        match &self.critic {
            Critic::Wasserstein => {
                let plan = w1_exact(gen, self.data)?;
                let mut up = vec![0.0; gen.len() * dim];
                for &(i, j, w) in &plan.entries {
                    let x = gen.point(i);
                    let y = self.data.point(j);
                    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if d > 0.0 {
                        for k in 0..dim {
                            up[i * dim + k] += w * (x[k] - y[k]) / d;
                        }
                    }
                }
                Ok(up)
            }
            Critic::Class { class } => {
                let (k, gap) = self.witness(class, gen)?;
                let s = if gap >= 0.0 { 1.0 } else { -1.0 };
                let rows = par::map_range(gen.len(), |i| {
                    let w = gen.weights()[i];
                    class
                        .member_grad(k, gen.point(i))
                        .into_iter()
                        .map(|g| s * w * g)
                        .collect::<Vec<f64>>()
                });
                Ok(rows.concat())
            }
        }
    }

    /// Alternating ascent on a network critic; no-op for other critics.
    fn ascend(&mut self, gen: &EmpiricalMeasure, adam: &mut Option<Adam>, steps: usize, lr: f64) -> Result<()> {
        let Critic::Class {
            class: DiscriminatorClass::LipschitzNet { net, bound },
        } = &mut self.critic
        else {
            return Ok(());
        };
        let adam = adam.get_or_insert_with(|| Adam::new(net.num_params()));
        for _ in 0..steps {
            let scale = {
                let lip = net.certified_lipschitz();
                if lip > *bound {
                    *bound / lip
                } else {
                    1.0
                }
            };
            let a: f64 = weighted_sum(&net.forward_batch(gen.points())?, gen.weights());
            let b: f64 = weighted_sum(&net.forward_batch(self.data.points())?, self.data.weights());
            let s = if a >= b { 1.0 } else { -1.0 };
            // ascend s·(gen f − data f): descend its negative
            let up_g: Vec<f64> = gen.weights().iter().map(|w| -s * scale * w).collect();
            let up_d: Vec<f64> = self.data.weights().iter().map(|w| s * scale * w).collect();
            let mut g = net.backward_batch(gen.points(), &up_g)?;
            g.add_assign(&net.backward_batch(self.data.points(), &up_d)?);
            if !g.is_finite() {
                return Err(Error::NonFiniteLoss { step: 0 });
            }
            descend(net, adam, &g, lr);
        }
        Ok(())
    }
}

fn weighted_sum(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

struct RestartResult {
    best: SparseReluNet,
    best_objective: f64,
    trace: Vec<TraceRow>,
    critic: Critic,
}

fn run_restart(
    data: &EmpiricalMeasure,
    cfg: &GanConfig,
    init: SparseReluNet,
    eval_latents: &[f64],
    seed: Seed,
) -> Result<RestartResult> {
    let mut state = CriticState::new(&cfg.critic, data)?;
    let mut net = init;
    let mut adam = Adam::new(net.num_params());
    let mut critic_adam = None;
    let spec = LatentSpec::new(cfg.arch.latent_dim())?;
    let dim = data.dim();

    let record = |net: &SparseReluNet, state: &CriticState, step: usize| -> Result<TraceRow> {
        let gen = pushforward_of(net, eval_latents)?;
        let objective = state.objective(&gen)?;
        if !objective.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        Ok(TraceRow {
            step,
            objective,
            nonzeros: net.nonzeros(),
        })
    };

    let first = record(&net, &state, 0)?;
    let mut trace = vec![first];
    let mut best = (net.clone(), first.objective);

    for t in 0..cfg.outer_steps {
        let z = sample_latent(spec, cfg.m_latent, seed.child(t as u64));
        let x = net.forward_batch(&z)?;
        let gen = EmpiricalMeasure::new(dim, x)?;
        state.ascend(&gen, &mut critic_adam, cfg.critic_steps, cfg.critic_step_size)?;
        let up = state.point_grads(&gen)?;
        let grad: NetGrad = net.backward_batch(&z, &up)?;
        if !grad.is_finite() {
            return Err(Error::NonFiniteLoss { step: t + 1 });
        }
        descend(&mut net, &mut adam, &grad, schedule(cfg.step_size, t, cfg.outer_steps));
        let step = t + 1;
        if step % cfg.eval_every == 0 || step == cfg.outer_steps {
            let row = record(&net, &state, step)?;
            trace.push(row);
            if row.objective < best.1 {
                best = (net.clone(), row.objective);
            }
        }
    }
    Ok(RestartResult {
        best: best.0,
        best_objective: best.1,
        trace,
        critic: state.critic,
    })
}

/// Fits `ĝ ≈ argmin_g d_F(Q̂_g, ℙ_n)` by projected Adam with fresh latent
/// batches, keeping the best recorded iterate over all restarts.
///
/// Restarts run in parallel; restart `r` draws from `seed.child(r)`. A
/// restart hitting a non-finite value is dropped, and the call fails only
/// when every restart does.
pub fn gan_fit(data: &EmpiricalMeasure, cfg: &GanConfig, seed: Seed) -> Result<GanFit> {
    cfg.validate()?;
    let out_dim = *cfg.arch.widths.last().unwrap_or(&0);
    if out_dim != data.dim() {
        return Err(Error::ShapeMismatch {
            expected: data.dim(),
            got: out_dim,
        });
    }
    let spec = LatentSpec::new(cfg.arch.latent_dim())?;
    let eval_latents = sample_latent(spec, cfg.m_eval, seed.named("eval"));
    let runs = par::map_range(cfg.restarts, |r| {
        let init = match (&cfg.init, r) {
            (Some(net), 0) => Ok(net.project()),
            _ => cfg.arch.random(seed.named("init").child(r as u64)),
        };
        init.and_then(|n| run_restart(data, cfg, n, &eval_latents, seed.child(r as u64)))
    });

    let mut best: Option<(usize, &RestartResult)> = None;
    for (r, res) in runs.iter().enumerate() {
        if let Ok(res) = res {
            if best.is_none_or(|(_, b)| res.best_objective < b.best_objective) {
                best = Some((r, res));
            }
        }
    }
    let Some((best_restart, winner)) = best else {
        return Err(runs
            .into_iter()
            .find_map(|r| r.err())
            .unwrap_or(Error::NonFiniteLoss { step: 0 }));
    };

    let state = CriticState::new(&cfg.critic, data)?;
    let budget = cfg.random_search.unwrap_or(10 * cfg.restarts);
    let search = par::map_range(budget, |k| {
        let net = cfg.arch.random(seed.named("search").child(k as u64))?;
        state.objective(&pushforward_of(&net, &eval_latents)?)
    });
    let best_random = search
        .into_iter()
        .filter_map(|v| v.ok())
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);

    let objective = winner.best_objective;
    Ok(GanFit {
        net: winner.best.clone(),
        objective,
        eps_opt: (objective - best_random).max(0.0),
        best_restart,
        critic: winner.critic.clone(),
        traces: runs.into_iter().map(|r| r.ok().map(|res| res.trace)).collect(),
        eval_latents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::FnGenerator;
    use crate::ipm::{ipm, FeatureSet};
    use crate::measures::pushforward_sample;
    use crate::ot::{kantorovich_potential, w1_uniform_1d};

    fn identity_net() -> SparseReluNet {
        let mut net = SparseReluNet::zeros(vec![1, 1, 1], 4, 2.0).unwrap();
        net.weights[0][0] = 1.0;
        net.weights[1][0] = 1.0;
        net.shifts[0][0] = 0.0;
        net
    }

    fn uniform_data(n: usize, seed: u64) -> EmpiricalMeasure {
        let g = FnGenerator::new(1, 1, |z: &[f64], o: &mut [f64]| o[0] = z[0]);
        pushforward_sample(&g, n, Seed(seed)).unwrap()
    }

    #[test]
    fn finite_objective_matches_ipm() {
        let data = uniform_data(256, 1);
        let truth_push = pushforward_of(&identity_net(), &sample_latent(LatentSpec { dim: 1 }, 256, Seed(2))).unwrap();
        let class = DiscriminatorClass::finite(vec![
            kantorovich_potential(&truth_push, &data).unwrap(),
            kantorovich_potential(&data, &truth_push).unwrap(),
        ]);
        let cfg = GanConfig {
            arch: GeneratorArch {
                widths: vec![1, 4, 1],
                sparsity: 8,
                sup_bound: 2.0,
            },
            critic: Critic::Class { class: class.clone() },
            outer_steps: 40,
            m_latent: 128,
            m_eval: 256,
            restarts: 2,
            init: Some(identity_net()),
            ..GanConfig::default()
        };
        let fit = gan_fit(&data, &cfg, Seed(3)).unwrap();
        let gen = pushforward_of(&fit.net, &fit.eval_latents).unwrap();
        assert!((ipm(&class, &gen, &data).unwrap() - fit.objective).abs() < 1e-9);
        // best-so-far never exceeds the starting value of the restart it came from
        let trace = fit.traces[fit.best_restart].as_ref().unwrap();
        assert!(fit.objective <= trace[0].objective);
        for t in fit.traces.iter().flatten() {
            for row in t {
                assert!(row.nonzeros <= 8);
            }
        }
    }

    #[test]
    fn zero_steps_returns_init() {
        let data = uniform_data(128, 4);
        let cfg = GanConfig {
            arch: GeneratorArch {
                widths: vec![1, 1, 1],
                sparsity: 4,
                sup_bound: 2.0,
            },
            outer_steps: 0,
            restarts: 1,
            init: Some(identity_net()),
            random_search: Some(20),
            ..GanConfig::default()
        };
        let fit = gan_fit(&data, &cfg, Seed(5)).unwrap();
        assert_eq!(fit.net, identity_net());
        let gen = pushforward_of(&identity_net(), &fit.eval_latents).unwrap();
        assert_eq!(fit.objective, w1_distance(&gen, &data).unwrap());
        assert_eq!(fit.traces[0].as_ref().unwrap().len(), 1);
        assert!(fit.eps_opt >= 0.0);
    }

    #[test]
    fn wasserstein_fit_beats_empirical_measure() {
        let n = 512;
        let data = uniform_data(n, 6);
        let cfg = GanConfig {
            arch: GeneratorArch {
                widths: vec![1, 8, 8, 1],
                sparsity: 60,
                sup_bound: 2.0,
            },
            outer_steps: 300,
            m_latent: 1024,
            restarts: 2,
            ..GanConfig::default()
        };
        let fit = gan_fit(&data, &cfg, Seed(7)).unwrap();
        // Q0 = U[0,1] through a fine quantile grid as the held-out proxy
        let proxy: Vec<f64> = (0..100_000).map(|i| (i as f64 + 0.5) / 100_000.0).collect();
        let z: Vec<f64> = proxy.clone();
        let fitted: Vec<f64> = fit.net.forward_batch(&z).unwrap();
        let fitted_w1 = w1_uniform_1d(&fitted, &proxy);
        let empirical_w1 = w1_uniform_1d(data.points(), &proxy);
        assert!(fitted_w1 <= empirical_w1, "{fitted_w1} vs {empirical_w1}");
    }

    #[test]
    fn smooth_and_network_critics_run() {
        let data = uniform_data(200, 8);
        let fs = FeatureSet::random_fourier(1, 8, 4.0, Seed(9)).unwrap();
        let mut cfg = GanConfig {
            critic: Critic::Class {
                class: DiscriminatorClass::SmoothFeatureSet(fs),
            },
            outer_steps: 30,
            m_latent: 128,
            m_eval: 256,
            restarts: 1,
            ..GanConfig::default()
        };
        let fit = gan_fit(&data, &cfg, Seed(10)).unwrap();
        assert!(fit.objective.is_finite());
        let critic = SparseReluNet::random(vec![1, 6, 1], 12, 10.0, Seed(11)).unwrap();
        cfg.critic = Critic::Class {
            class: DiscriminatorClass::lipschitz_net(critic, 1.0).unwrap(),
        };
        let fit = gan_fit(&data, &cfg, Seed(12)).unwrap();
        assert!(fit.objective.is_finite());
        let Critic::Class { class } = &fit.critic else { panic!() };
        assert!(matches!(class, DiscriminatorClass::LipschitzNet { .. }));
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = GanConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<GanConfig>(&s).unwrap(), cfg);
        let bad = GanConfig {
            restarts: 0,
            ..GanConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_config());
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace(
            &[TraceRow {
                step: 0,
                objective: 0.5,
                nonzeros: 3,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,objective,nonzeros\n0,5e-1,3\n");
    }
}
