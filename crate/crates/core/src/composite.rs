//! Structured truth generators: compositions `h_q ∘ ⋯ ∘ h_0` of low-arity
//! Hölder maps, and the intrinsic dimension / smoothness they induce.
//!
//! Every component `h_ij` is a bounded-frequency trigonometric polynomial of
//! its active inputs,
//!
//! ```text
//! h(x) = offset + Σ_k [a_k cos(2π k·x_S) + b_k sin(2π k·x_S)],
//! ```
//!
//! optionally plus a linear part `Σ l_i x_i`. The Hölder norm of such a
//! function has a closed-form upper bound in terms of the coefficient
//! amplitudes and frequencies. All layer domains are the unit cube, so each
//! component must map into `[0, 1]`.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::rng::Seed;

/// Overshoot beyond `[0, 1]` tolerated (and clamped) between layers.
pub const RANGE_TOLERANCE: f64 = 1e-9;

/// Shape parameters `(q, d, t, β, K)` of the composite class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    /// `q`: number of layers minus one.
    pub depth: usize,
    /// `(d_0, …, d_{q+1})`, with `d_0 = d` and `d_{q+1} = D`.
    pub widths: Vec<usize>,
    /// `(t_0, …, t_q)`: inputs each component of layer `i` may depend on.
    pub arities: Vec<usize>,
    /// `(β_0, …, β_q)`.
    pub smoothnesses: Vec<f64>,
    /// Hölder-norm bound `K`.
    pub bound: f64,
}

/// Result of [`effective_smoothness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSmoothness {
    pub j_star: usize,
    pub beta_star: f64,
    pub t_star: usize,
}

impl CompositeSpec {
    /// Single-layer spec `q = 0` from `R^d` to `R^D`.
    pub fn single_layer(d: usize, dd: usize, arity: usize, beta: f64, bound: f64) -> Self {
        CompositeSpec {
            depth: 0,
            widths: vec![d, dd],
            arities: vec![arity],
            smoothnesses: vec![beta],
            bound,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.depth;
        if self.widths.len() != q + 2 {
            return Err(Error::InvalidSpec(format!(
                "widths has {} entries, expected q + 2 = {}",
                self.widths.len(),
                q + 2
            )));
        }
        if self.arities.len() != q + 1 || self.smoothnesses.len() != q + 1 {
            return Err(Error::InvalidSpec(format!(
                "arities/smoothnesses need q + 1 = {} entries",
                q + 1
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidSpec("widths must be >= 1".into()));
        }
        for (i, &t) in self.arities.iter().enumerate() {
            if t == 0 || t > self.widths[i] {
                return Err(Error::InvalidSpec(format!(
                    "arity t_{i} = {t} must lie in 1..=d_{i} = {}",
                    self.widths[i]
                )));
            }
        }
        if self.smoothnesses.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidSpec("smoothnesses must be positive".into()));
        }
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            return Err(Error::InvalidSpec("bound K must be positive".into()));
        }
        Ok(())
    }

    /// `β̃_j = β_j ∏_{l>j} (β_l ∧ 1)` for every layer.
    pub fn tilde_smoothnesses(&self) -> Vec<f64> {
        let q = self.depth;
        let mut out = vec![0.0; q + 1];
        let mut tail = 1.0;
        for j in (0..=q).rev() {
            out[j] = self.smoothnesses[j] * tail;
            tail *= self.smoothnesses[j].min(1.0);
        }
        out
    }
}

/// Intrinsic index `j*`, smoothness `β*` and dimension `t*` of a spec.
///
/// Ties in the worst ratio `t_j / β̃_j` go to the smallest `j`.
pub fn effective_smoothness(spec: &CompositeSpec) -> EffectiveSmoothness {
    let tilde = spec.tilde_smoothnesses();
    let mut j_star = 0;
    let mut best = spec.arities[0] as f64 / tilde[0];
    for j in 1..tilde.len() {
        let r = spec.arities[j] as f64 / tilde[j];
        if r > best {
            best = r;
            j_star = j;
        }
    }
    EffectiveSmoothness {
        j_star,
        beta_star: tilde[j_star],
        t_star: spec.arities[j_star],
    }
}

/// One trigonometric component `h_ij` acting on `arity` selected inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderComponent {
    pub arity: usize,
    pub smoothness: f64,
    pub bound: f64,
    pub active_indices: Vec<usize>,
    pub offset: f64,
    /// Integer frequency vectors, one per term, each of length `arity`.
    pub frequencies: Vec<Vec<u32>>,
    /// `[cos, sin]` coefficient pair per term.
    pub coefficients: Vec<[f64; 2]>,
    /// Optional linear coefficients over the active inputs (empty = none).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<f64>,
}

fn multi_indices(arity: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; arity];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out
}

impl HolderComponent {
    fn amplitude(c: &[f64; 2]) -> f64 {
        c[0].hypot(c[1])
    }

    /// Hölder-norm bound per unit amplitude for a term with frequency `k`,
    /// excluding the `α = 0` sup-norm part (handled with the offset).
    fn unit_derivative_bound(freq: &[u32], beta: f64) -> f64 {
        let floor = beta.floor() as usize;
        // Integer β: the top-order block uses exponent 0 and |α| < β stops at β - 1.
        let gamma = beta - beta.floor();
        let omega: Vec<f64> = freq.iter().map(|&k| 2.0 * PI * k as f64).collect();
        let omega_l1: f64 = omega.iter().sum();
        let deriv = |alpha: &[usize]| -> f64 { alpha.iter().zip(&omega).map(|(&a, &w)| w.powi(a as i32)).product() };
        let mut total = 0.0;
        for alpha in multi_indices(freq.len(), floor) {
            let order: usize = alpha.iter().sum();
            let d = deriv(&alpha);
            if order > 0 && (order as f64) < beta {
                total += d;
            }
            if order == floor {
                // sup |u(x) - u(y)| / |x - y|^γ ≤ (2 sup|u|)^{1-γ} (Lip u)^γ
                let lip = d * omega_l1;
                let semi = if gamma == 0.0 {
                    2.0 * d
                } else if d == 0.0 {
                    0.0
                } else {
                    (2.0 * d).powf(1.0 - gamma) * lip.powf(gamma)
                };
                total += semi;
            }
        }
        total
    }

    /// Linear part on the unit cube: sup ≤ Σ|l|, first derivatives |l_i|,
    /// and a γ-seminorm ≤ Σ|l| when β < 1.
    fn linear_norm(&self) -> f64 {
        let l1: f64 = self.linear.iter().map(|v| v.abs()).sum();
        let beta = self.smoothness;
        let mut total = l1;
        if beta > 1.0 {
            total += l1;
        }
        if beta < 1.0 {
            total += l1;
        }
        total
    }

    /// Closed-form upper bound on the β-Hölder norm.
    pub fn certified_norm(&self) -> f64 {
        let mut sup = self.offset.abs();
        let mut rest = self.linear_norm();
        for (f, c) in self.frequencies.iter().zip(&self.coefficients) {
            let a = Self::amplitude(c);
            sup += a;
            rest += a * Self::unit_derivative_bound(f, self.smoothness);
        }
        sup + rest
    }

    /// Upper bound on `sup |∂_i h|` for each active input `i`.
    pub fn partial_bounds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.arity];
        for (o, l) in out.iter_mut().zip(&self.linear) {
            *o += l.abs();
        }
        for (f, c) in self.frequencies.iter().zip(&self.coefficients) {
            let a = Self::amplitude(c);
            for (o, &k) in out.iter_mut().zip(f) {
                *o += a * 2.0 * PI * k as f64;
            }
        }
        out
    }

    /// Guaranteed output interval over the unit cube.
    pub fn range_bounds(&self) -> (f64, f64) {
        let s: f64 = self.coefficients.iter().map(Self::amplitude).sum();
        let neg: f64 = self.linear.iter().map(|v| v.min(0.0)).sum();
        let pos: f64 = self.linear.iter().map(|v| v.max(0.0)).sum();
        (self.offset + neg - s, self.offset + pos + s)
    }

    /// Evaluates on the full layer input (selects active coordinates itself).
    pub fn eval(&self, layer_input: &[f64]) -> f64 {
        let mut v = self.offset;
        for (l, &idx) in self.linear.iter().zip(&self.active_indices) {
            v += l * layer_input[idx];
        }
        for (f, c) in self.frequencies.iter().zip(&self.coefficients) {
            let mut phase = 0.0;
            for (&k, &idx) in f.iter().zip(&self.active_indices) {
                phase += k as f64 * layer_input[idx];
            }
            let (s, co) = (2.0 * PI * phase).sin_cos();
            v += c[0] * co + c[1] * s;
        }
        v
    }

    pub fn check(&self, input_width: usize) -> Result<()> {
        if self.active_indices.len() != self.arity {
            return Err(Error::InvalidSpec(format!(
                "component has {} active indices for arity {}",
                self.active_indices.len(),
                self.arity
            )));
        }
        if self.active_indices.iter().any(|&i| i >= input_width) {
            return Err(Error::InvalidSpec("active index out of range".into()));
        }
        if self.frequencies.len() != self.coefficients.len()
            || self.frequencies.iter().any(|f| f.len() != self.arity)
            || !(self.linear.is_empty() || self.linear.len() == self.arity)
        {
            return Err(Error::InvalidSpec(
                "frequency/coefficient arrays are inconsistent".into(),
            ));
        }
        let norm = self.certified_norm();
        if norm > self.bound * (1.0 + 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "certified Hölder norm {norm} exceeds K = {}",
                self.bound
            )));
        }
        let (lo, hi) = self.range_bounds();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidSpec(format!(
                "component range [{lo}, {hi}] not inside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// A concrete member `g₀ = h_q ∘ ⋯ ∘ h_0` of the composite class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComposite", into = "RawComposite")]
pub struct CompositeFunction {
    pub spec: CompositeSpec,
    /// `layers[i]` has `d_{i+1}` components.
    pub layers: Vec<Vec<HolderComponent>>,
}

#[derive(Serialize, Deserialize)]
struct RawComposite {
    #[serde(flatten)]
    spec: CompositeSpec,
    components: Vec<Vec<HolderComponent>>,
}

impl TryFrom<RawComposite> for CompositeFunction {
    type Error = Error;
    fn try_from(raw: RawComposite) -> Result<Self> {
        CompositeFunction::new(raw.spec, raw.components)
    }
}

impl From<CompositeFunction> for RawComposite {
    fn from(g: CompositeFunction) -> Self {
        RawComposite {
            spec: g.spec,
            components: g.layers,
        }
    }
}

impl CompositeFunction {
    pub fn new(spec: CompositeSpec, layers: Vec<Vec<HolderComponent>>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.depth + 1 {
            return Err(Error::InvalidSpec(format!(
                "{} layers for depth q = {}",
                layers.len(),
                spec.depth
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.len() != spec.widths[i + 1] {
                return Err(Error::InvalidSpec(format!(
                    "layer {i} has {} components, expected d_{} = {}",
                    layer.len(),
                    i + 1,
                    spec.widths[i + 1]
                )));
            }
            for h in layer {
                if h.arity != spec.arities[i] || h.smoothness != spec.smoothnesses[i] || h.bound != spec.bound {
                    return Err(Error::InvalidSpec(format!(
                        "layer {i} component does not match (t, β, K) of the spec"
                    )));
                }
                h.check(spec.widths[i])?;
            }
        }
        Ok(CompositeFunction { spec, layers })
    }

    /// Identity map on `[0,1]^d`: `q = 0`, component `j` returns `z_j`.
    pub fn identity(d: usize) -> Result<Self> {
        let spec = CompositeSpec::single_layer(d, d, 1, 1.0, 1.0);
        let layer = (0..d)
            .map(|j| HolderComponent {
                arity: 1,
                smoothness: 1.0,
                bound: 1.0,
                active_indices: vec![j],
                offset: 0.0,
                frequencies: vec![],
                coefficients: vec![],
                linear: vec![1.0],
            })
            .collect();
        CompositeFunction::new(spec, vec![layer])
    }

    /// Layer-by-layer evaluation of `g(z)`.
    ///
    /// Intermediate values overshooting `[0, 1]` by at most
    /// [`RANGE_TOLERANCE`] are clamped; larger overshoots are errors.
    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.spec.output_dim()];
        self.eval_into(z, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.spec.latent_dim();
        if z.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: z.len(),
            });
        }
        if z.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain {
                point: z.to_vec(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        let mut cur = z.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.len());
            for (ci, h) in layer.iter().enumerate() {
                let v = h.eval(&cur);
                let overshoot = (-v).max(v - 1.0);
                if overshoot > RANGE_TOLERANCE || v.is_nan() {
                    return Err(Error::RangeViolation {
                        layer: li,
                        component: ci,
                        overshoot: if v.is_nan() { f64::NAN } else { overshoot },
                    });
                }
                next.push(v.clamp(0.0, 1.0));
            }
            cur = next;
        }
        out.copy_from_slice(&cur);
        Ok(())
    }

    /// Lipschitz constant (Euclidean to Euclidean) certified from the
    /// coefficient bounds: `√D ∏_i max_j Σ_k sup|∂_k h_ij|`.
    pub fn certified_lipschitz(&self) -> f64 {
        let mut lip = 1.0;
        for layer in &self.layers {
            let layer_lip = layer
                .iter()
                .map(|h| h.partial_bounds().iter().sum::<f64>())
                .fold(0.0, f64::max);
            lip *= layer_lip;
        }
        lip * (self.spec.output_dim() as f64).sqrt()
    }

    pub fn max_certified_norm(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .map(HolderComponent::certified_norm)
            .fold(0.0, f64::max)
    }
}

impl Generator for CompositeFunction {
    fn latent_dim(&self) -> usize {
        self.spec.latent_dim()
    }
    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_into(z, out)
    }
}

/// Maximum per-coordinate frequency of generated components.
pub const SYNTHETIC_MAX_FREQUENCY: u32 = 2;
/// Cap on the number of trigonometric terms per generated component.
pub const SYNTHETIC_MAX_TERMS: usize = 8;
/// Generated components keep `|h - 1/2| ≤ 0.45`.
pub const SYNTHETIC_HALF_RANGE: f64 = 0.45;

fn all_frequencies(arity: usize, kmax: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let base = kmax as usize + 1;
    let total = base.pow(arity as u32);
    for code in 1..total {
        let mut c = code;
        let mut f = Vec::with_capacity(arity);
        for _ in 0..arity {
            f.push((c % base) as u32);
            c /= base;
        }
        out.push(f);
    }
    out
}

/// Draws a member of the class deterministically from `seed`.
///
/// Coefficients are scaled so the certified Hölder norm stays below `K` and
/// every component maps into `[0.05, 0.95]`.
pub fn make_synthetic_truth(seed: u64, spec: &CompositeSpec) -> Result<CompositeFunction> {
    spec.validate()?;
    if spec.bound < 1.0 {
        return Err(Error::InfeasibleSpec(format!(
            "K = {} < 1 cannot contain the unit-cube layer domains",
            spec.bound
        )));
    }
    let mut rng = Seed(seed).named("composite").rng();
    let mut layers = Vec::with_capacity(spec.depth + 1);
    for i in 0..=spec.depth {
        let t = spec.arities[i];
        let beta = spec.smoothnesses[i];
        let freqs_all = all_frequencies(t, SYNTHETIC_MAX_FREQUENCY);
        let mut layer = Vec::with_capacity(spec.widths[i + 1]);
        for _ in 0..spec.widths[i + 1] {
            let mut active: Vec<usize> = sample_indices(&mut rng, spec.widths[i], t).into_vec();
            active.sort_unstable();
            let chosen: Vec<Vec<u32>> = if freqs_all.len() <= SYNTHETIC_MAX_TERMS {
                freqs_all.clone()
            } else {
                let mut idx = sample_indices(&mut rng, freqs_all.len(), SYNTHETIC_MAX_TERMS).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|k| freqs_all[k].clone()).collect()
            };
            let raw: Vec<[f64; 2]> = chosen
                .iter()
                .map(|f| {
                    let norm1: u32 = f.iter().sum();
                    let decay = 1.0 / (1.0 + norm1 as f64).powf(beta + 1.0);
                    [rng.random_range(-1.0..1.0) * decay, rng.random_range(-1.0..1.0) * decay]
                })
                .collect();
            let mut comp = HolderComponent {
                arity: t,
                smoothness: beta,
                bound: spec.bound,
                active_indices: active,
                offset: 0.5,
                frequencies: chosen,
                coefficients: raw,
                linear: vec![],
            };
            let amp: f64 = comp.coefficients.iter().map(HolderComponent::amplitude).sum();
            let unit: f64 = comp.certified_norm() - 0.5;
            if !(amp > 0.0) || !(unit > 0.0) {
                return Err(Error::InfeasibleSpec(
                    "degenerate random draw produced a constant component".into(),
                ));
            }
            let budget = spec.bound - 0.5;
            let scale = (SYNTHETIC_HALF_RANGE / amp).min(budget / unit * (1.0 - 1e-9));
            if !(scale > 0.0) {
                return Err(Error::InfeasibleSpec(format!(
                    "K = {} admits no nonconstant member",
                    spec.bound
                )));
            }
            for c in comp.coefficients.iter_mut() {
                c[0] *= scale;
                c[1] *= scale;
            }
            layer.push(comp);
        }
        layers.push(layer);
    }
    CompositeFunction::new(spec.clone(), layers)
}
