use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(n, replicate, value)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub rep: usize,
    pub value: f64,
}

/// Log-log least-squares fit `log mean ≈ intercept + slope · log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Observations plus the fitted exponent when at least three sizes exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub rows: Vec<RateRow>,
    pub fit: Option<ExponentFit>,
}

impl RateSeries {
    pub fn new(rows: Vec<RateRow>) -> Self {
        let mut s = RateSeries { rows, fit: None };
        s.fit = fit_exponent(&s).ok();
        s
    }

    /// `(n, mean over replicates)` in increasing `n`.
    pub fn means(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let vals: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.value).collect();
                (n, vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "rep", "value"])?;
        for r in &self.rows {
            wr.write_record([r.n.to_string(), r.rep.to_string(), format!("{:e}", r.value)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// `{"slope": .., "stderr": ..}`, with nulls when the fit is undefined.
    pub fn summary_json(&self) -> serde_json::Value {
        match self.fit {
            Some(f) => serde_json::json!({"slope": f.slope, "stderr": f.stderr}),
            None => serde_json::json!({"slope": null, "stderr": null, "degenerate": true}),
        }
    }
}

/// Ordinary least squares of `log(mean value)` on `log n`, over the means per
/// `n`. The standard error comes from the residuals (zero with an exact fit).
pub fn fit_exponent(series: &RateSeries) -> Result<ExponentFit> {
    fit_points(&series.means())
}

pub fn fit_points(means: &[(usize, f64)]) -> Result<ExponentFit> {
    if means.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 distinct n, got {}",
            means.len()
        )));
    }
    if let Some((n, v)) = means.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit(format!("nonpositive mean {v} at n = {n}")));
    }
    let xs: Vec<f64> = means.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|(_, v)| v.ln()).collect();
    let (slope, intercept, stderr) = ols(&xs, &ys);
    Ok(ExponentFit {
        slope,
        stderr,
        intercept,
    })
}

/// Simple linear regression: `(slope, intercept, slope stderr)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = if xs.len() > 2 {
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}
