//! Convergence fits, anomaly detection, noise and denoising, timing.

mod anomaly;
mod bench;
mod fit;
mod noise;

pub use anomaly::{anomaly_scan, contrast_ratio, AnomalyBox, AnomalyReport, MAD_FACTOR};
pub use bench::{bench, bench_grid, BenchResult};
pub use fit::{estimate_constants, linear_fit, loglog_slope, Abscissa, ConstantsFit, ConvergenceTable, SlopeFit, TableMeta};
pub use noise::{add_noise_so3, denoise_filter, denoised_fit, DenoiseOutcome};
