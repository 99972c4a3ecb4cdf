use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::composite::{effective_smoothness, make_synthetic_truth, CompositeFunction, CompositeSpec};
use crate::error::{Error, Result};
use crate::estimators::{AuditConfig, GanConfig, MleConfig, MIN_EVAL};
use crate::measures::NoisyModel;
use crate::netgen::SizingConstants;
use crate::ot::RateLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rates,
    Gan,
    Mle,
    Fano,
    OtBench,
    Audit,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rates => "rates",
            Mode::Gan => "gan",
            Mode::Mle => "mle",
            Mode::Fano => "fano",
            Mode::OtBench => "ot-bench",
            Mode::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub spec: CompositeSpec,
    /// `σ₀`.
    #[serde(default)]
    pub noise_sd: f64,
    /// Seed of the random draw of the truth function itself.
    #[serde(default)]
    pub seed: u64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            spec: CompositeSpec::single_layer(1, 1, 1, 1.0, 8.0),
            noise_sd: 0.0,
            seed: 1,
        }
    }
}

impl TruthConfig {
    pub fn build(&self) -> Result<NoisyModel<CompositeFunction>> {
        NoisyModel::new(make_synthetic_truth(self.seed, &self.spec)?, self.noise_sd)
    }

    /// `(β*, t*)` of the spec.
    pub fn indices(&self) -> (f64, f64) {
        let e = effective_smoothness(&self.spec);
        (e.beta_star, e.t_star as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub dim: usize,
    pub law: RateLaw,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig {
            dim: 1,
            law: RateLaw::UniformCube,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FanoRunConfig {
    pub beta: f64,
    pub d: usize,
    /// Grid resolutions for the KL and `W_1` tables.
    pub m_grid: Vec<usize>,
    /// Latent draws per `W_1` check.
    pub n_mc: usize,
    /// Hamming-cube sizes `|J|` to pack.
    pub packing_sizes: Vec<usize>,
    /// Sample sizes at which the bound is evaluated.
    pub bound_n: Vec<f64>,
}

impl Default for FanoRunConfig {
    fn default() -> Self {
        FanoRunConfig {
            beta: 2.0,
            d: 1,
            m_grid: vec![2, 4, 8],
            n_mc: 20_000,
            packing_sizes: vec![16, 32, 64],
            bound_n: (20..=40).map(|k| 2f64.powi(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtBenchConfig {
    /// Random instances compared against brute force.
    pub instances: usize,
    pub max_atoms: usize,
    pub max_dim: usize,
    /// Support sizes for the duality-gap check.
    pub dual_sizes: Vec<usize>,
}

impl Default for OtBenchConfig {
    fn default() -> Self {
        OtBenchConfig {
            instances: 200,
            max_atoms: 6,
            max_dim: 3,
            dual_sizes: vec![8, 32, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditRunConfig {
    /// Seeded synthetic instances; instance `i` draws its truth from
    /// `truth.seed + i`.
    pub instances: usize,
    /// Random candidate generators besides the truth.
    pub candidates: usize,
    pub include_truth: bool,
    pub candidate_widths: Vec<usize>,
    pub candidate_sparsity: usize,
    /// Net parameter `ε` of the constructed discriminator.
    pub eps: f64,
    /// Atoms per pushforward in the constructed potentials.
    pub m_atoms: usize,
    /// Data size per instance.
    pub n: usize,
    pub audit: AuditConfig,
}

impl Default for AuditRunConfig {
    fn default() -> Self {
        AuditRunConfig {
            instances: 50,
            candidates: 4,
            include_truth: true,
            candidate_widths: vec![1, 4, 1],
            candidate_sparsity: 8,
            eps: 0.02,
            m_atoms: 4096,
            n: 256,
            audit: AuditConfig::default(),
        }
    }
}

/// Full description of one experiment. Every field except `mode` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub truth: TruthConfig,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Sample size of each `W_1` evaluation against the truth.
    pub n_eval: usize,
    /// Network size per `n`; `None` keeps `gan.arch` / `mle.arch` fixed.
    pub sizing: Option<SizingConstants>,
    /// Output bound `F` of sized networks.
    pub sup_bound: f64,
    pub gan: GanConfig,
    pub mle: MleConfig,
    /// Perturbation sd for the likelihood; defaults to `n^{-β*/(2(β*+t*))}`.
    pub sigma_tilde: Option<f64>,
    pub rates: RatesConfig,
    pub fano: FanoRunConfig,
    pub ot_bench: OtBenchConfig,
    pub audit: AuditRunConfig,
    /// Write the log-log SVG plot for rate-type modes.
    pub plot: bool,
    /// Write the GAN training trace of replicate 0 for each `n`.
    pub traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Rates,
            truth: TruthConfig::default(),
            n_grid: vec![256, 512, 1024, 2048, 4096],
            replicates: 20,
            n_eval: 1 << 18,
            sizing: Some(SizingConstants {
                c_depth: 0.2,
                c_width: 0.25,
                c_sparsity: 3.0,
            }),
            sup_bound: 2.0,
            gan: GanConfig {
                m_latent: 1024,
                m_eval: 4096,
                random_search: Some(4),
                ..GanConfig::default()
            },
            mle: MleConfig {
                m_latent: 512,
                ..MleConfig::default()
            },
            sigma_tilde: None,
            rates: RatesConfig::default(),
            fano: FanoRunConfig::default(),
            ot_bench: OtBenchConfig::default(),
            audit: AuditRunConfig::default(),
            plot: true,
            traces: false,
        }
    }
}

fn field(path: &str, ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, msg))
    }
}

impl ExperimentConfig {
    /// Reads and validates a JSON config. Unreadable or malformed files are
    /// reported as config errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let grid_ok = !self.n_grid.is_empty() && self.n_grid.windows(2).all(|w| w[0] < w[1]) && self.n_grid[0] >= 2;
        field("n_grid", grid_ok, "must be nonempty, strictly increasing and >= 2")?;
        field("replicates", self.replicates >= 1, "must be >= 1")?;
        match self.mode {
            Mode::Rates => {
                field("rates.dim", self.rates.dim >= 1, "must be >= 1")?;
            }
            Mode::Gan | Mode::Mle => {
                self.truth
                    .spec
                    .validate()
                    .map_err(|e| Error::config("truth.spec", e.to_string()))?;
                field("truth.noise_sd", self.truth.noise_sd >= 0.0, "must be >= 0")?;
                field("n_eval", self.n_eval >= MIN_EVAL, format!("must be >= {MIN_EVAL}"))?;
                field("sup_bound", self.sup_bound > 0.0, "must be > 0")?;
                if let Some(s) = self.sizing {
                    let ok = [s.c_depth, s.c_width, s.c_sparsity]
                        .iter()
                        .all(|c| *c >= 0.0 && c.is_finite());
                    field("sizing", ok, "constants must be finite and >= 0")?;
                }
                if self.mode == Mode::Gan {
                    self.gan.validate().map_err(|e| prefix("gan", e))?;
                } else {
                    self.mle.validate().map_err(|e| prefix("mle", e))?;
                    if let Some(s) = self.sigma_tilde {
                        field("sigma_tilde", s > 0.0, "must be > 0")?;
                    }
                }
            }
            Mode::Fano => {
                let f = &self.fano;
                field("fano.beta", f.beta > 0.0, "must be > 0")?;
                field("fano.d", (1..=2).contains(&f.d), "must be 1 or 2")?;
                field(
                    "fano.beta",
                    f.d as f64 + 2.0 * (f.beta - 1.0) > 0.0,
                    "needs d + 2(beta - 1) > 0",
                )?;
                field(
                    "fano.m_grid",
                    !f.m_grid.is_empty() && f.m_grid.iter().all(|&m| m >= 1),
                    "needs entries >= 1",
                )?;
                field("fano.n_mc", f.n_mc >= 1, "must be >= 1")?;
                field(
                    "fano.packing_sizes",
                    f.packing_sizes.iter().all(|&j| j >= 16),
                    "entries must be >= 16",
                )?;
                field(
                    "fano.bound_n",
                    f.bound_n.iter().all(|&n| n >= 2.0),
                    "entries must be >= 2",
                )?;
            }
            Mode::OtBench => {
                let o = &self.ot_bench;
                field(
                    "ot_bench.max_atoms",
                    (1..=8).contains(&o.max_atoms),
                    "must lie in 1..=8",
                )?;
                field("ot_bench.max_dim", o.max_dim >= 1, "must be >= 1")?;
                field(
                    "ot_bench.dual_sizes",
                    o.dual_sizes.iter().all(|&s| s >= 1),
                    "entries must be >= 1",
                )?;
            }
            Mode::Audit => {
                let a = &self.audit;
                field("audit.instances", a.instances >= 1, "must be >= 1")?;
                field("audit.eps", a.eps > 0.0, "must be > 0")?;
                field("audit.n", a.n >= 2, "must be >= 2")?;
                field(
                    "audit.candidates",
                    a.candidates + a.include_truth as usize >= 1,
                    "need at least one candidate",
                )?;
                field(
                    "audit.candidate_widths",
                    a.candidate_widths.len() >= 2
                        && a.candidate_widths.first() == Some(&self.truth.spec.latent_dim())
                        && a.candidate_widths.last() == Some(&self.truth.spec.output_dim()),
                    "must run from the truth's latent to its output dimension",
                )?;
                field(
                    "audit.audit.n_eval",
                    a.audit.n_eval >= MIN_EVAL,
                    format!("must be >= {MIN_EVAL}"),
                )?;
                self.gan.validate().map_err(|e| prefix("gan", e))?;
            }
        }
        Ok(())
    }
}

fn prefix(head: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{head}.{path}"), message),
        other => Error::config(head, other.to_string()),
    }
}
