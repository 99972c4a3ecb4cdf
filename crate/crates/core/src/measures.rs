//! Latent sampling, pushforward and noisy measures, and weighted point clouds.
//!
//! All sampling is done in fixed blocks of [`BLOCK`] draws, each with its own
//! child stream, so the output for a seed does not depend on the thread count.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::par;
use crate::rng::{fill_standard_normal, fill_uniform, Seed};

pub const BLOCK: usize = 4096;

/// Weighted atoms in `R^D`, points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform weights `1/n`.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: points.len(),
            });
        }
        let n = points.len() / dim;
        if n == 0 {
            return Err(Error::DegenerateInput("measure has no atoms".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite coordinate".into()));
        }
        Ok(EmpiricalMeasure {
            dim,
            points,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// Explicit weights, normalized to sum to one.
    pub fn with_weights(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(dim, points)?;
        if weights.len() != m.len() {
            return Err(Error::ShapeMismatch {
                expected: m.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateInput("measure has zero total mass".into()));
        }
        m.weights = weights.iter().map(|w| w / total).collect();
        let first = m.weights[0];
        m.uniform = m.weights.iter().all(|w| *w == first);
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DegenerateInput("ragged rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when all weights are equal.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `∫ f dμ = Σ w_i f(x_i)`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        if self.uniform {
            let s: f64 = (0..self.len()).map(|i| f(self.point(i))).sum();
            s / self.len() as f64
        } else {
            (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (a, b) in m.iter_mut().zip(self.point(i)) {
                *a += self.weights[i] * b;
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["w".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.weights[i].to_string()];
            rec.extend(self.point(i).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("w") || header.len() < 2 {
            return Err(Error::DegenerateInput("CSV header must be w,x1,...,xD".into()));
        }
        for (k, name) in header.iter().enumerate().skip(1) {
            if name != format!("x{k}") {
                return Err(Error::DegenerateInput(format!("unexpected column {name}")));
            }
        }
        let dim = header.len() - 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::DegenerateInput(format!("bad number {s:?}: {e}")))
            };
            weights.push(parse(&rec[0])?);
            for k in 1..=dim {
                points.push(parse(&rec[k])?);
            }
        }
        Self::with_weights(dim, points, weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Uniform law on `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub dim: usize,
}

impl LatentSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("latent dimension must be >= 1".into()));
        }
        Ok(LatentSpec { dim })
    }
}

/// `n` i.i.d. vectors of `width` values from `fill`, blockwise per child stream.
fn blocked<F>(n: usize, width: usize, seed: Seed, fill: F) -> Vec<f64>
where
    F: Fn(&mut crate::rng::StreamRng, &mut [f64]) + Sync + Send,
{
    let mut out = vec![0.0; n * width];
    par::for_each_chunk_mut(&mut out, BLOCK * width, |b, chunk| {
        let mut rng = seed.child(b as u64).rng();
        fill(&mut rng, chunk);
    });
    out
}

/// `n` i.i.d. uniform points in `[0,1]^d`, row-major.
pub fn sample_latent(spec: LatentSpec, n: usize, seed: Seed) -> Vec<f64> {
    blocked(n, spec.dim, seed, fill_uniform)
}

/// `n × width` i.i.d. standard normals.
pub fn sample_gaussian(n: usize, width: usize, seed: Seed) -> Vec<f64> {
    blocked(n, width, seed, fill_standard_normal)
}

/// Empirical measure of `g` applied to the given latent rows.
pub fn pushforward_of<G: Generator + ?Sized>(g: &G, latent: &[f64]) -> Result<EmpiricalMeasure> {
    let pts = g.generate_batch(latent)?;
    EmpiricalMeasure::new(g.output_dim(), pts)
}

/// `n` draws from `Q_g`. Latent points come from `seed.named("latent")`.
pub fn pushforward_sample<G: Generator + ?Sized>(g: &G, n: usize, seed: Seed) -> Result<EmpiricalMeasure> {
    let spec = LatentSpec::new(g.latent_dim())?;
    let z = sample_latent(spec, n, seed.named("latent"));
    pushforward_of(g, &z)
}

/// Generator plus isotropic Gaussian noise: the law `Q_g * N(0, σ² I)`.
#[derive(Debug, Clone)]
pub struct NoisyModel<G> {
    pub generator: G,
    pub noise_sd: f64,
}

impl<G: Generator> NoisyModel<G> {
    pub fn new(generator: G, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
            return Err(Error::InvalidSpec(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        Ok(NoisyModel { generator, noise_sd })
    }
}

/// `n` draws `g(Z_i) + σ ξ_i`. Uses the same latent stream as
/// [`pushforward_sample`], so `σ = 0` reproduces it exactly.
pub fn noisy_sample<G: Generator>(model: &NoisyModel<G>, n: usize, seed: Seed) -> Result<EmpiricalMeasure> {
    let clean = pushforward_sample(&model.generator, n, seed)?;
    if model.noise_sd == 0.0 {
        return Ok(clean);
    }
    add_noise(&clean, model.noise_sd, seed.named("noise"))
}

fn add_noise(data: &EmpiricalMeasure, sd: f64, seed: Seed) -> Result<EmpiricalMeasure> {
    let noise = sample_gaussian(data.len(), data.dim(), seed);
    let pts: Vec<f64> = data.points().iter().zip(&noise).map(|(x, e)| x + sd * e).collect();
    let mut out = EmpiricalMeasure::new(data.dim(), pts)?;
    out.weights = data.weights.clone();
    out.uniform = data.uniform;
    Ok(out)
}

/// Adds i.i.d. `N(0, σ̃² I)` to every atom; weights are kept.
pub fn perturb(data: &EmpiricalMeasure, sigma_tilde: f64, seed: Seed) -> Result<EmpiricalMeasure> {
    if !(sigma_tilde >= 0.0) {
        return Err(Error::InvalidSpec(format!(
            "perturbation sd must be >= 0, got {sigma_tilde}"
        )));
    }
    if sigma_tilde == 0.0 {
        return Ok(data.clone());
    }
    add_noise(data, sigma_tilde, seed)
}
