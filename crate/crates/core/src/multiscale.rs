//! Residual-correction multiscale approximation of scalar fields and the
//! discrete max-norm error on a grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::parallel::{par_map, try_par_map};
use crate::pointset::{Domain, LevelSequence};
use crate::quasi_interp::QuasiInterpolant;
use crate::{Error, Point, Result};

/// Per-level corrections `s_1..s_n`; the approximation at level `j` is `s_1 + ... + s_j`.
#[derive(Debug, Clone)]
pub struct MultiscaleModel {
    corrections: Vec<QuasiInterpolant>,
    levels: LevelSequence,
    degree: usize,
}

impl MultiscaleModel {
    /// A model with no fitted level yet; levels are added by [`MultiscaleModel::fit_next`].
    pub fn empty(levels: &LevelSequence, degree: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("level sequence is empty"));
        }
        Ok(MultiscaleModel { corrections: Vec::new(), levels: levels.clone(), degree })
    }

    /// Fits the next level to the samples `values` at its sites.
    pub fn fit_next(&mut self, values: Vec<f64>) -> Result<()> {
        let j = self.corrections.len();
        if j >= self.levels.len() {
            return Err(Error::invalid("every level is already fitted"));
        }
        let set = self.levels.level(j).clone();
        if values.len() != set.len() {
            return Err(Error::invalid(format!("{} values for {} sites", values.len(), set.len())));
        }
        let residual = if j == 0 {
            values
        } else {
            let corrections = &self.corrections;
            try_par_map(set.sites(), |i, p| {
                let mut r = values[i];
                for s in corrections {
                    r -= s.evaluate(p).map_err(|e| e.at_level(j + 1, i))?;
                }
                Ok::<_, Error>(r)
            })?
        };
        let op = QuasiInterpolant::new(set, residual, self.levels.support_radii()[j], self.degree)?;
        self.corrections.push(op);
        Ok(())
    }

    pub fn corrections(&self) -> &[QuasiInterpolant] {
        &self.corrections
    }

    pub fn levels(&self) -> &LevelSequence {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    /// `f_n(x)`, or `None` where any level has no site within its radius.
    pub fn evaluate(&self, x: &Point) -> Result<Option<f64>> {
        self.evaluate_partial(x, self.len())
    }

    /// `f_j(x) = s_1(x) + ... + s_j(x)`.
    pub fn evaluate_partial(&self, x: &Point, j: usize) -> Result<Option<f64>> {
        let mut sum = 0.0;
        for s in &self.corrections[..j] {
            match s.try_evaluate(x)? {
                Some(v) => sum += v,
                None => return Ok(None),
            }
        }
        Ok(Some(sum))
    }

    /// `[f_1(x), ..., f_n(x)]`; a hole at level `j` poisons every later level.
    pub fn evaluate_levels(&self, x: &Point) -> Result<Vec<Option<f64>>> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = Some(0.0);
        for s in &self.corrections {
            acc = match acc {
                Some(a) => s.try_evaluate(x)?.map(|v| a + v),
                None => None,
            };
            out.push(acc);
        }
        Ok(out)
    }
}

/// Fits the multiscale model to `f` sampled on every level.
pub fn multiscale_fit<F>(f: F, levels: &LevelSequence, degree: usize) -> Result<MultiscaleModel>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let samples = levels
        .levels()
        .iter()
        .map(|set| par_map(set.sites(), |p| f(p)))
        .collect();
    multiscale_fit_samples(samples, levels, degree)
}

/// Fits from precomputed samples; `samples[j]` holds the data at the sites of level `j`.
pub fn multiscale_fit_samples(samples: Vec<Vec<f64>>, levels: &LevelSequence, degree: usize) -> Result<MultiscaleModel> {
    if samples.len() != levels.len() {
        return Err(Error::invalid(format!("{} sample sets for {} levels", samples.len(), levels.len())));
    }
    let mut model = MultiscaleModel::empty(levels, degree)?;
    for values in samples {
        model.fit_next(values)?;
    }
    Ok(model)
}

/// `|approx - reference|` on a grid, with its maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub linf: f64,
}

impl ErrorField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        let linf = values.iter().copied().fold(0.0, f64::max);
        ErrorField { grid, values, linf }
    }

    /// Builds the field from optional approximations; any hole is an error.
    pub fn from_optional(grid: Grid, approx: &[Option<f64>], reference: &[f64]) -> Result<Self> {
        let missing = approx.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            return Err(Error::MissingValues { count: missing });
        }
        let values = approx.iter().zip(reference).map(|(a, r)| (a.unwrap() - r).abs()).collect();
        Ok(ErrorField::from_values(grid, values))
    }

    /// Writes `x,y,abs_error` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,abs_error")?;
        for (k, v) in self.values.iter().enumerate() {
            let p = self.grid.node(k);
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
        }
        Ok(())
    }
}

/// Discrete max-norm error of `approx` against `reference` on `G(rect, h_grid)`.
pub fn linf_error<A, R>(approx: A, reference: R, rect: &Domain, h_grid: f64) -> Result<ErrorField>
where
    A: Fn(&Point) -> Result<Option<f64>> + Sync,
    R: Fn(&Point) -> f64 + Sync,
{
    let grid = Grid::over(rect, h_grid)?;
    let nodes = grid.nodes();
    let approx = try_par_map(&nodes, |_, p| approx(p))?;
    let reference = par_map(&nodes, |p| reference(p));
    ErrorField::from_optional(grid, &approx, &reference)
}

/// Error fields of every level `f_1..f_n` against `reference`, evaluated in one pass.
pub fn level_errors<R>(model: &MultiscaleModel, reference: R, grid: &Grid) -> Result<Vec<ErrorField>>
where
    R: Fn(&Point) -> f64 + Sync,
{
    let nodes = grid.nodes();
    let per_node = try_par_map(&nodes, |_, p| model.evaluate_levels(p))?;
    let reference = par_map(&nodes, |p| reference(p));
    (0..model.len())
        .map(|j| {
            let approx: Vec<Option<f64>> = per_node.iter().map(|v| v[j]).collect();
            ErrorField::from_optional(*grid, &approx, &reference)
        })
        .collect()
}

/// Default evaluation rectangle: the domain inset by `min(delta_1, shorter side / 4)`.
pub fn default_evaluation_rect(domain: &Domain, delta_1: f64) -> Result<(Domain, f64)> {
    let inset = delta_1.min(0.25 * domain.width().min(domain.height()));
    Ok((domain.inset(inset)?, inset))
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h_nominal: f64,
    pub h_measured: f64,
    pub linf: f64,
    pub seconds: f64,
}
