//! Sparse ReLU networks of the class `D(L, p, s, F)`.
//!
//! A network with depth `L` and widths `p = (p_0, …, p_{L+1})` computes
//!
//! ```text
//! f(z) = W_L ρ_{v_L} W_{L-1} ρ_{v_{L-1}} ⋯ W_1 ρ_{v_1} W_0 z,
//! ```
//!
//! where `ρ_v(x)_k = max(x_k - v_k, 0)`. Class membership requires every
//! entry of every `W_j`, `v_j` to lie in `[-1, 1]`, at most `s` nonzero
//! parameters among `W_1..W_L` and `v_1..v_L`, and `|f|_∞ ≤ F` (enforced by
//! clamping the output).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::par;
use crate::rng::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct SparseReluNet {
    /// `p_0, …, p_{L+1}`; the depth is `widths.len() - 2`.
    pub widths: Vec<usize>,
    /// `W_0, …, W_L`, row-major `p_{j+1} × p_j`.
    pub weights: Vec<Vec<f64>>,
    /// `v_1, …, v_L`; `shifts[j - 1]` has length `p_j`.
    pub shifts: Vec<Vec<f64>>,
    pub sparsity: usize,
    pub sup_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNet {
    depth: usize,
    widths: Vec<usize>,
    sparsity: usize,
    sup_bound: f64,
    weights: Vec<Vec<f64>>,
    shifts: Vec<Vec<f64>>,
}

impl TryFrom<RawNet> for SparseReluNet {
    type Error = Error;
    fn try_from(raw: RawNet) -> Result<Self> {
        if raw.widths.len() != raw.depth + 2 {
            return Err(Error::ShapeMismatch {
                expected: raw.depth + 2,
                got: raw.widths.len(),
            });
        }
        let net = SparseReluNet {
            widths: raw.widths,
            weights: raw.weights,
            shifts: raw.shifts,
            sparsity: raw.sparsity,
            sup_bound: raw.sup_bound,
        };
        net.check_shapes()?;
        Ok(net)
    }
}

impl From<SparseReluNet> for RawNet {
    fn from(n: SparseReluNet) -> Self {
        RawNet {
            depth: n.depth(),
            widths: n.widths,
            sparsity: n.sparsity,
            sup_bound: n.sup_bound,
            weights: n.weights,
            shifts: n.shifts,
        }
    }
}

/// Parameter-shaped gradient (or update) of a [`SparseReluNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrad {
    pub weights: Vec<Vec<f64>>,
    pub shifts: Vec<Vec<f64>>,
}

impl NetGrad {
    pub fn zeros_like(net: &SparseReluNet) -> Self {
        NetGrad {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            shifts: net.shifts.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.shifts.iter_mut().zip(&other.shifts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for x in self.weights.iter_mut().flatten() {
            *x *= c;
        }
        for x in self.shifts.iter_mut().flatten() {
            *x *= c;
        }
    }

    /// Flattened view in the order W_0, …, W_L, v_1, …, v_L.
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(self.shifts.iter().flatten())
            .copied()
            .collect()
    }

    /// Overwrites every entry from a vector laid out as in [`flat`](Self::flat).
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let slots = self
            .weights
            .iter_mut()
            .flatten()
            .chain(self.shifts.iter_mut().flatten());
        for (x, v) in slots.zip(flat) {
            *x = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite()) && self.shifts.iter().flatten().all(|v| v.is_finite())
    }
}

/// Cached activations of one forward pass.
struct Tape {
    /// `h_j = W_{j-1} a_{j-1}` for `j = 1..=L` (pre-shift).
    pre: Vec<Vec<f64>>,
    /// `a_j = ρ(h_j - v_j)` for `j = 1..=L`.
    act: Vec<Vec<f64>>,
    /// Unclamped output.
    out: Vec<f64>,
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        out[r] = acc;
    }
}

impl SparseReluNet {
    /// All-zero network with the given architecture.
    pub fn zeros(widths: Vec<usize>, sparsity: usize, sup_bound: f64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidSpec(
                "network widths need at least p_0 and p_{L+1}, all >= 1".into(),
            ));
        }
        let l = widths.len() - 2;
        let weights = (0..=l).map(|j| vec![0.0; widths[j + 1] * widths[j]]).collect();
        let shifts = (1..=l).map(|j| vec![0.0; widths[j]]).collect();
        Ok(SparseReluNet {
            widths,
            weights,
            shifts,
            sparsity,
            sup_bound,
        })
    }

    /// Random member of the class: uniform entries, then [`project`](Self::project).
    ///
    /// Hidden weights are drawn on `[-1/√p_j, 1/√p_j]` so activations keep a
    /// comparable scale across layers.
    pub fn random(widths: Vec<usize>, sparsity: usize, sup_bound: f64, seed: Seed) -> Result<Self> {
        let mut net = Self::zeros(widths, sparsity, sup_bound)?;
        let mut rng = seed.rng();
        for (j, w) in net.weights.iter_mut().enumerate() {
            let scale = if j == 0 {
                1.0
            } else {
                1.0 / (net.widths[j] as f64).sqrt()
            };
            for x in w.iter_mut() {
                *x = rng.random_range(-1.0..1.0) * scale;
            }
        }
        for v in net.shifts.iter_mut() {
            for x in v.iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        net.project_in_place();
        Ok(net)
    }

    /// Random member intended as a training start: every unit of layer 1 is
    /// active on part of `[0,1]^{p_0}` and the sparsity budget is spent on
    /// connected paths. Layer 1 gets negative shifts (`p_1` of the budget),
    /// each unit of layers `2..=L+1` gets at least one incoming weight, and
    /// whatever remains is spread uniformly over the hidden weights.
    pub fn init_connected(widths: Vec<usize>, sparsity: usize, sup_bound: f64, seed: Seed) -> Result<Self> {
        let mut net = Self::zeros(widths, sparsity, sup_bound)?;
        let mut rng = seed.rng();
        let l = net.depth();
        for x in net.weights[0].iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        if l == 0 {
            return Ok(net);
        }
        let mut budget = sparsity;
        for v in net.shifts[0].iter_mut() {
            if budget == 0 {
                break;
            }
            *v = rng.random_range(-1.0..0.0);
            budget -= 1;
        }
        let draw = |rng: &mut crate::rng::StreamRng, fan: usize| {
            let m = rng.random_range(0.3..1.0) / (fan as f64).sqrt();
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        };
        // one incoming weight per unit, output layer first
        for j in (1..=l).rev() {
            let (rows, cols) = (net.widths[j + 1], net.widths[j]);
            for r in 0..rows {
                if budget == 0 {
                    break;
                }
                let c = rng.random_range(0..cols);
                // positive into hidden units so each stays live
                let w = draw(&mut rng, 1);
                net.weights[j][r * cols + c] = if j < l { w.abs() } else { w };
                budget -= 1;
            }
        }
        let free: Vec<(usize, usize)> = (1..=l)
            .flat_map(|j| (0..net.weights[j].len()).map(move |k| (j, k)))
            .filter(|&(j, k)| net.weights[j][k] == 0.0)
            .collect();
        let extra = budget.min(free.len());
        for idx in rand::seq::index::sample(&mut rng, free.len(), extra) {
            let (j, k) = free[idx];
            let fan = net.widths[j];
            net.weights[j][k] = draw(&mut rng, fan.min(1 + sparsity / net.widths[j + 1].max(1)));
        }
        net.project_in_place();
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn check_shapes(&self) -> Result<()> {
        let l = self.depth();
        if self.weights.len() != l + 1 {
            return Err(Error::ShapeMismatch {
                expected: l + 1,
                got: self.weights.len(),
            });
        }
        if self.shifts.len() != l {
            return Err(Error::ShapeMismatch {
                expected: l,
                got: self.shifts.len(),
            });
        }
        for j in 0..=l {
            let want = self.widths[j + 1] * self.widths[j];
            if self.weights[j].len() != want {
                return Err(Error::ShapeMismatch {
                    expected: want,
                    got: self.weights[j].len(),
                });
            }
        }
        for j in 1..=l {
            if self.shifts[j - 1].len() != self.widths[j] {
                return Err(Error::ShapeMismatch {
                    expected: self.widths[j],
                    got: self.shifts[j - 1].len(),
                });
            }
        }
        Ok(())
    }

    /// Nonzero parameters counted against `s` (layers `j ≥ 1`, weights and shifts).
    pub fn nonzeros(&self) -> usize {
        let w: usize = self.weights[1..]
            .iter()
            .map(|w| w.iter().filter(|x| **x != 0.0).count())
            .sum();
        let v: usize = self
            .shifts
            .iter()
            .map(|v| v.iter().filter(|x| **x != 0.0).count())
            .sum();
        w + v
    }

    pub fn max_entry(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .chain(self.shifts.iter().flatten())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Entry bounds and sparsity budget (the sup bound holds by clamping).
    pub fn is_feasible(&self) -> bool {
        self.max_entry() <= 1.0 && self.nonzeros() <= self.sparsity
    }

    fn tape(&self, z: &[f64]) -> Tape {
        let l = self.depth();
        let mut h = vec![0.0; self.widths[1]];
        matvec(&self.weights[0], self.widths[1], self.widths[0], z, &mut h);
        let mut pre = Vec::with_capacity(l);
        let mut act = Vec::with_capacity(l);
        for j in 1..=l {
            let a: Vec<f64> = h
                .iter()
                .zip(&self.shifts[j - 1])
                .map(|(x, v)| (x - v).max(0.0))
                .collect();
            let mut next = vec![0.0; self.widths[j + 1]];
            matvec(&self.weights[j], self.widths[j + 1], self.widths[j], &a, &mut next);
            pre.push(h);
            act.push(a);
            h = next;
        }
        Tape { pre, act, out: h }
    }

    /// Output before the `[-F, F]` clamp.
    pub fn forward_unclamped(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self.tape(z).out)
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.forward_unclamped(z)?;
        let f = self.sup_bound;
        for v in out.iter_mut() {
            *v = v.clamp(-f, f);
        }
        Ok(out)
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Reverse-mode gradient of `⟨upstream, f(z)⟩` with respect to all
    /// parameters. The clamp passes gradient only where `|f(z)| ≤ F`; ReLU
    /// kinks get subgradient 0. Also returns the input gradient.
    pub fn backward(&self, z: &[f64], upstream: &[f64]) -> Result<(NetGrad, Vec<f64>)> {
        self.check_input(z)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut grad = NetGrad::zeros_like(self);
        let dz = self.backward_accumulate(z, upstream, &mut grad);
        Ok((grad, dz))
    }

    fn backward_accumulate(&self, z: &[f64], upstream: &[f64], grad: &mut NetGrad) -> Vec<f64> {
        let tape = self.tape(z);
        let l = self.depth();
        let f = self.sup_bound;
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&tape.out)
            .map(|(u, o)| if o.abs() <= f { *u } else { 0.0 })
            .collect();
        for j in (1..=l).rev() {
            let rows = self.widths[j + 1];
            let cols = self.widths[j];
            let a = &tape.act[j - 1];
            let w = &self.weights[j];
            let gw = &mut grad.weights[j];
            let mut da = vec![0.0; cols];
            for r in 0..rows {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                let row = &w[r * cols..(r + 1) * cols];
                let grow = &mut gw[r * cols..(r + 1) * cols];
                for c in 0..cols {
                    grow[c] += dr * a[c];
                    da[c] += dr * row[c];
                }
            }
            let h = &tape.pre[j - 1];
            let v = &self.shifts[j - 1];
            let gv = &mut grad.shifts[j - 1];
            for c in 0..cols {
                let dh = if h[c] - v[c] > 0.0 { da[c] } else { 0.0 };
                da[c] = dh;
                gv[c] -= dh;
            }
            delta = da;
        }
        let rows = self.widths[1];
        let cols = self.widths[0];
        let mut dz = vec![0.0; cols];
        let w0 = &self.weights[0];
        let g0 = &mut grad.weights[0];
        for r in 0..rows {
            let dr = delta[r];
            if dr == 0.0 {
                continue;
            }
            for c in 0..cols {
                g0[r * cols + c] += dr * z[c];
                dz[c] += dr * w0[r * cols + c];
            }
        }
        dz
    }

    /// Batched forward pass over row-major inputs (clamped outputs).
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if !inputs.len().is_multiple_of(d) {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: inputs.len() % d,
            });
        }
        let n = inputs.len() / d;
        let dd = self.output_dim();
        let mut out = vec![0.0; n * dd];
        const CHUNK: usize = 256;
        par::for_each_chunk_mut(&mut out, CHUNK * dd, |ci, chunk| {
            let lo = ci * CHUNK;
            for (k, o) in chunk.chunks_mut(dd).enumerate() {
                let i = lo + k;
                let y = self.tape(&inputs[i * d..(i + 1) * d]).out;
                for (a, b) in o.iter_mut().zip(y) {
                    *a = b.clamp(-self.sup_bound, self.sup_bound);
                }
            }
        });
        Ok(out)
    }

    /// Sum over a batch of per-point gradients of `⟨upstream_i, f(z_i)⟩`.
    ///
    /// Chunk partial sums are reduced in chunk order, so the result does not
    /// depend on the number of threads.
    pub fn backward_batch(&self, inputs: &[f64], upstream: &[f64]) -> Result<NetGrad> {
        let d = self.input_dim();
        let dd = self.output_dim();
        if !inputs.len().is_multiple_of(d) || upstream.len() != inputs.len() / d * dd {
            return Err(Error::ShapeMismatch {
                expected: inputs.len() / d * dd,
                got: upstream.len(),
            });
        }
        let n = inputs.len() / d;
        const CHUNK: usize = 256;
        let chunks = n.div_ceil(CHUNK);
        let parts = par::map_range(chunks, |c| {
            let mut g = NetGrad::zeros_like(self);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let u = &upstream[i * dd..(i + 1) * dd];
                if u.iter().all(|x| *x == 0.0) {
                    continue;
                }
                self.backward_accumulate(&inputs[i * d..(i + 1) * d], u, &mut g);
            }
            g
        });
        let mut total = NetGrad::zeros_like(self);
        for p in &parts {
            total.add_assign(p);
        }
        Ok(total)
    }

    /// Applies `params += step * update` on every parameter.
    pub fn apply_update(&mut self, update: &NetGrad, step: f64) {
        for (w, u) in self.weights.iter_mut().zip(&update.weights) {
            for (x, y) in w.iter_mut().zip(u) {
                *x += step * y;
            }
        }
        for (v, u) in self.shifts.iter_mut().zip(&update.shifts) {
            for (x, y) in v.iter_mut().zip(u) {
                *x += step * y;
            }
        }
    }

    /// Projection onto the class constraints: clip every entry to `[-1, 1]`,
    /// then keep the `s` largest-magnitude parameters among layers `j ≥ 1`
    /// (weights and shifts jointly) and zero the rest. Magnitude ties are
    /// broken by parameter order (earlier wins). Idempotent.
    pub fn project(&self) -> Self {
        let mut out = self.clone();
        out.project_in_place();
        out
    }

    pub fn project_in_place(&mut self) {
        let clip = |x: &mut f64| {
            if x.is_nan() {
                *x = 0.0;
            } else {
                *x = x.clamp(-1.0, 1.0);
            }
        };
        self.weights.iter_mut().flatten().for_each(clip);
        self.shifts.iter_mut().flatten().for_each(clip);

        // (magnitude, group, layer, index); group 0 = weights, 1 = shifts.
        let mut entries: Vec<(f64, u8, usize, usize)> = Vec::new();
        for (j, w) in self.weights.iter().enumerate().skip(1) {
            for (k, x) in w.iter().enumerate() {
                if *x != 0.0 {
                    entries.push((x.abs(), 0, j, k));
                }
            }
        }
        for (j, v) in self.shifts.iter().enumerate() {
            for (k, x) in v.iter().enumerate() {
                if *x != 0.0 {
                    entries.push((x.abs(), 1, j, k));
                }
            }
        }
        if entries.len() <= self.sparsity {
            return;
        }
        entries.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        for &(_, group, j, k) in &entries[self.sparsity..] {
            if group == 0 {
                self.weights[j][k] = 0.0;
            } else {
                self.shifts[j][k] = 0.0;
            }
        }
    }

    /// Upper bound on the Euclidean Lipschitz constant:
    /// `∏_j min(‖W_j‖_F, √(‖W_j‖_1 ‖W_j‖_∞))`.
    pub fn certified_lipschitz(&self) -> f64 {
        let mut lip = 1.0;
        for (j, w) in self.weights.iter().enumerate() {
            let rows = self.widths[j + 1];
            let cols = self.widths[j];
            let frob = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let max_row = (0..rows)
                .map(|r| w[r * cols..(r + 1) * cols].iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            let max_col = (0..cols)
                .map(|c| (0..rows).map(|r| w[r * cols + c].abs()).sum::<f64>())
                .fold(0.0, f64::max);
            lip *= frob.min((max_row * max_col).sqrt());
        }
        lip
    }

    /// Number of parameters (all layers).
    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.shifts.iter().map(Vec::len).sum::<usize>()
    }
}

impl Generator for SparseReluNet {
    fn latent_dim(&self) -> usize {
        self.input_dim()
    }
    fn output_dim(&self) -> usize {
        SparseReluNet::output_dim(self)
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let y = self.forward(z)?;
        out.copy_from_slice(&y);
        Ok(())
    }
    fn generate_batch(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(latent)
    }
}

/// Multipliers in the sizing rule of [`size_for`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingConstants {
    pub c_depth: f64,
    pub c_width: f64,
    pub c_sparsity: f64,
}

impl Default for SizingConstants {
    fn default() -> Self {
        SizingConstants {
            c_depth: 1.0,
            c_width: 1.0,
            c_sparsity: 1.0,
        }
    }
}

/// Depth, uniform hidden width and sparsity chosen for a sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSize {
    pub depth: usize,
    pub width: usize,
    pub sparsity: usize,
}

impl NetSize {
    /// Full width vector `(d, width, …, width, D)`.
    pub fn widths(&self, input_dim: usize, output_dim: usize) -> Vec<usize> {
        let mut w = vec![input_dim];
        w.extend(std::iter::repeat_n(self.width, self.depth));
        w.push(output_dim);
        w
    }
}

/// Growth exponent `t*/(2β* + t*)` of width and sparsity in `n`.
pub fn size_exponent(beta_star: f64, t_star: f64) -> f64 {
    t_star / (2.0 * beta_star + t_star)
}

/// Network sizing for sample size `n ≥ 2`:
/// `L = ⌈c_L log n⌉`, width `⌈c_w n^{t*/(2β*+t*)} log n⌉`,
/// `s = ⌈c_s n^{t*/(2β*+t*)} log n⌉`.
pub fn size_for(n: f64, beta_star: f64, t_star: f64, c: SizingConstants) -> NetSize {
    let ln = n.max(2.0).ln();
    let growth = n.max(2.0).powf(size_exponent(beta_star, t_star)) * ln;
    NetSize {
        depth: (c.c_depth * ln).ceil().max(0.0) as usize,
        width: (c.c_width * growth).ceil().max(1.0) as usize,
        sparsity: (c.c_sparsity * growth).ceil().max(1.0) as usize,
    }
}

/// Metric-entropy bound
/// `(s+1){log 2 + log ε⁻¹ + log(L+1) + 2 Σ_{l=0}^{L+1} log(p_l + 1)}`.
pub fn covering_bound(depth: usize, widths: &[usize], sparsity: usize, eps: f64) -> f64 {
    let sum_p: f64 = widths.iter().map(|&p| (p as f64 + 1.0).ln()).sum();
    (sparsity as f64 + 1.0) * (std::f64::consts::LN_2 + (1.0 / eps).ln() + (depth as f64 + 1.0).ln() + 2.0 * sum_p)
}
