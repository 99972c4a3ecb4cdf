//! The generator abstraction shared by truth functions and fitted networks.

use crate::error::{Error, Result};
use crate::par;

/// A measurable map from the latent cube `[0,1]^d` into `R^D`.
pub trait Generator: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Evaluates the map at one latent point, writing `output_dim()` values.
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()>;

    fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim()];
        self.generate_into(z, &mut out)?;
        Ok(out)
    }

    /// Evaluates a row-major batch of latent points.
    fn generate_batch(&self, latent: &[f64]) -> Result<Vec<f64>> {
        let d = self.latent_dim();
        let dd = self.output_dim();
        if d == 0 || !latent.len().is_multiple_of(d) {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: latent.len(),
            });
        }
        let n = latent.len() / d;
        const CHUNK: usize = 512;
        let chunks = n.div_ceil(CHUNK);
        let parts = par::try_map_range(chunks, |c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            let mut out = vec![0.0; (hi - lo) * dd];
            for i in lo..hi {
                self.generate_into(&latent[i * d..(i + 1) * d], &mut out[(i - lo) * dd..(i - lo + 1) * dd])?;
            }
            Ok::<_, Error>(out)
        })?;
        Ok(parts.concat())
    }
}

impl<G: Generator + ?Sized> Generator for &G {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).generate_into(z, out)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).generate_into(z, out)
    }
}

impl<G: Generator + ?Sized> Generator for std::sync::Arc<G> {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).generate_into(z, out)
    }
}

/// `z ↦ c` for a fixed point `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGenerator {
    pub latent_dim: usize,
    pub value: Vec<f64>,
}

impl Generator for ConstantGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }
    fn output_dim(&self) -> usize {
        self.value.len()
    }
    fn generate_into(&self, _z: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.value);
        Ok(())
    }
}

/// Wraps a closure `(z, out)` as a generator.
pub struct FnGenerator<F> {
    latent_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnGenerator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(latent_dim: usize, output_dim: usize, f: F) -> Self {
        FnGenerator {
            latent_dim,
            output_dim,
            f,
        }
    }
}

impl<F> Generator for FnGenerator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn generate_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(z, out);
        Ok(())
    }
}
