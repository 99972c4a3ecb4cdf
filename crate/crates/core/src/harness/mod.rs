//! Experiment configuration, exponent fitting and report emission.

mod config;
mod fit;
mod run;
mod svg;

pub use config::{AuditRunConfig, ExperimentConfig, FanoRunConfig, Mode, OtBenchConfig, RatesConfig, TruthConfig};
pub use fit::{fit_exponent, fit_points, ols, ExponentFit, RateRow, RateSeries};
pub use run::{run, RunOutput};
pub use svg::loglog_svg;
