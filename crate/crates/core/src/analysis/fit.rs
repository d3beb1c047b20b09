use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::multiscale::ConvergenceRow;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub mu: f64,
    pub nu: f64,
    pub degree: usize,
    pub function: String,
    pub seed: Option<u64>,
}

/// Per-level errors of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub meta: TableMeta,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(meta: TableMeta, mut rows: Vec<ConvergenceRow>) -> Result<Self> {
        rows.sort_by_key(|r| r.level);
        if let Some(r) = rows.iter().find(|r| !(r.linf > 0.0) || !r.linf.is_finite()) {
            return Err(Error::invalid(format!("level {} has non-positive error {}", r.level, r.linf)));
        }
        Ok(ConvergenceTable { meta, rows })
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.linf).collect()
    }

    /// Writes `level,h_nominal,h_measured,linf,seconds`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,h_nominal,h_measured,linf,seconds")?;
        for r in &self.rows {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e},{:.6}", r.level, r.h_nominal, r.h_measured, r.linf, r.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    Level,
    LogH,
}

/// Least-squares line with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Ordinary least squares of `y` on `x`. Standard errors are zero when the
/// fit has no residual degrees of freedom.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::invalid(format!("linear fit needs at least 2 matching points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("linear fit needs at least 2 distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_se, intercept_se) = if n > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let s2 = ssr / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    let fit = SlopeFit { slope, intercept, slope_se, intercept_se };
    if [slope, intercept, slope_se, intercept_se].iter().all(|v| v.is_finite()) {
        Ok(fit)
    } else {
        Err(Error::invalid("linear fit produced non-finite values"))
    }
}

/// Fits `log(error)` against the level index or `log h`.
pub fn loglog_slope(table: &ConvergenceTable, abscissa: Abscissa) -> Result<SlopeFit> {
    if table.rows.len() < 3 {
        return Err(Error::invalid(format!("slope fit needs at least 3 rows, got {}", table.rows.len())));
    }
    let x: Vec<f64> = table
        .rows
        .iter()
        .map(|r| match abscissa {
            Abscissa::Level => r.level as f64,
            Abscissa::LogH => r.h_nominal.ln(),
        })
        .collect();
    let y: Vec<f64> = table.rows.iter().map(|r| r.linf.ln()).collect();
    linear_fit(&x, &y)
}

/// `slope(mu) = log C + k log mu` across scaling factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFit {
    pub log_c: f64,
    pub c: f64,
    pub k: f64,
    pub log_c_se: f64,
    pub k_se: f64,
}

pub fn estimate_constants(mu_values: &[f64], slopes: &[SlopeFit]) -> Result<ConstantsFit> {
    if mu_values.len() != slopes.len() {
        return Err(Error::invalid("one slope per scaling factor required"));
    }
    if mu_values.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::invalid("scaling factors must be positive"));
    }
    let x: Vec<f64> = mu_values.iter().map(|m| m.ln()).collect();
    let y: Vec<f64> = slopes.iter().map(|s| s.slope).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(ConstantsFit { log_c: fit.intercept, c: fit.intercept.exp(), k: fit.slope, log_c_se: fit.intercept_se, k_se: fit.slope_se })
}
