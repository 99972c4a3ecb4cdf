//! 1-Lipschitz functions in min-form: `f(x) = min_k (v_k + |x − a_k|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Min-form extension of values `v_k` given at anchors `a_k`. With no
/// anchors the function is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PotentialFn {
    dim: usize,
    anchors: Vec<f64>,
    values: Vec<f64>,
    line: Option<LineIndex>,
}

#[derive(Serialize, Deserialize)]
struct RawPotential {
    dim: usize,
    anchors: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawPotential> for PotentialFn {
    type Error = Error;
    fn try_from(r: RawPotential) -> Result<Self> {
        PotentialFn::new(r.dim, r.anchors, r.values)
    }
}

impl From<PotentialFn> for RawPotential {
    fn from(p: PotentialFn) -> Self {
        RawPotential {
            dim: p.dim,
            anchors: p.anchors,
            values: p.values,
        }
    }
}

/// Sorted anchors with prefix minima of `v − a` and suffix minima of `v + a`,
/// giving `O(log n)` evaluation on the line.
#[derive(Debug, Clone, PartialEq)]
struct LineIndex {
    xs: Vec<f64>,
    pre: Vec<f64>,
    suf: Vec<f64>,
}

impl LineIndex {
    fn build(anchors: &[f64], values: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..anchors.len()).collect();
        idx.sort_by(|&p, &q| anchors[p].total_cmp(&anchors[q]));
        let xs: Vec<f64> = idx.iter().map(|&k| anchors[k]).collect();
        let vs: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
        let n = xs.len();
        let mut pre = vec![0.0; n];
        let mut suf = vec![0.0; n];
        let mut run = f64::INFINITY;
        for k in 0..n {
            run = run.min(vs[k] - xs[k]);
            pre[k] = run;
        }
        run = f64::INFINITY;
        for k in (0..n).rev() {
            run = run.min(vs[k] + xs[k]);
            suf[k] = run;
        }
        LineIndex { xs, pre, suf }
    }

    /// Value and slope (±1) at `x`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let k = self.xs.partition_point(|a| *a <= x);
        let left = if k > 0 { x + self.pre[k - 1] } else { f64::INFINITY };
        let right = if k < self.xs.len() {
            self.suf[k] - x
        } else {
            f64::INFINITY
        };
        if left <= right {
            (left, 1.0)
        } else {
            (right, -1.0)
        }
    }
}

impl PotentialFn {
    pub fn new(dim: usize, anchors: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || anchors.len() != values.len() * dim {
            return Err(Error::ShapeMismatch {
                expected: values.len() * dim,
                got: anchors.len(),
            });
        }
        if anchors.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite potential data".into()));
        }
        let line = (dim == 1 && !values.is_empty()).then(|| LineIndex::build(&anchors, &values));
        Ok(PotentialFn {
            dim,
            anchors,
            values,
            line,
        })
    }

    pub fn zero(dim: usize) -> Self {
        PotentialFn {
            dim,
            anchors: Vec::new(),
            values: Vec::new(),
            line: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        if self.values.is_empty() {
            return 0.0;
        }
        if let Some(line) = &self.line {
            return line.eval(x[0]).0;
        }
        self.argmin(x).1
    }

    fn argmin(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, v) in self.values.iter().enumerate() {
            let a = &self.anchors[k * self.dim..(k + 1) * self.dim];
            let d2: f64 = a.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum();
            let val = v + d2.sqrt();
            if val < best.1 {
                best = (k, val);
            }
        }
        best
    }

    /// Value and a gradient (a subgradient at kinks).
    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        if self.values.is_empty() {
            return (0.0, vec![0.0; self.dim]);
        }
        if let Some(line) = &self.line {
            let (v, s) = line.eval(x[0]);
            return (v, vec![s]);
        }
        let (k, v) = self.argmin(x);
        let a = &self.anchors[k * self.dim..(k + 1) * self.dim];
        let diff: Vec<f64> = x.iter().zip(a).map(|(p, q)| p - q).collect();
        let norm = diff.iter().map(|t| t * t).sum::<f64>().sqrt();
        let grad = if norm > 0.0 {
            diff.iter().map(|t| t / norm).collect()
        } else {
            vec![0.0; self.dim]
        };
        (v, grad)
    }

    /// Shifts values so that `f(0) = 0`.
    pub fn recenter(&mut self) {
        let c = self.eval(&vec![0.0; self.dim]);
        self.shift(-c);
    }

    pub fn shift(&mut self, c: f64) {
        if self.values.is_empty() {
            return;
        }
        self.values.iter_mut().for_each(|v| *v += c);
        if self.line.is_some() {
            self.line = Some(LineIndex::build(&self.anchors, &self.values));
        }
    }
}
