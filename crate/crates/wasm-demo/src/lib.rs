//! Browser bindings: site tiling, scalar error maps and manifold convergence.

use msqi_core::config::RunConfig;
use msqi_core::functions::{so3_field, spd_field, ScalarFunction};
use msqi_core::grid::Grid;
use msqi_core::manifold::{Manifold, ManifoldField, So3, Spd};
use msqi_core::manifold_multiscale::{
    base_from_first_level, manifold_level_errors, manifold_linf_error, manifold_multiscale_fit,
    try_manifold_quasi_interp,
};
use msqi_core::multiscale::{level_errors, linf_error, multiscale_fit};
use msqi_core::pointset::{build_level_sequence, halton_tile, Domain, LevelSequence};
use msqi_core::quasi_interp::QuasiInterpolant;
use msqi_core::{Error, Point, Result};
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn square() -> Domain {
    Domain { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 }
}

#[wasm_bindgen]
pub struct Tiling {
    sites: Vec<f64>,
    fill: f64,
    separation: f64,
}

#[wasm_bindgen]
impl Tiling {
    /// Interleaved `x, y` coordinates.
    #[wasm_bindgen(getter)]
    pub fn sites(&self) -> Vec<f64> {
        self.sites.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fill(&self) -> f64 {
        self.fill
    }

    #[wasm_bindgen(getter)]
    pub fn separation(&self) -> f64 {
        self.separation
    }
}

/// Halton tiling of `[-1, 1]²` with target fill distance `h`.
pub fn tile(h: f64) -> Result<Tiling> {
    let set = halton_tile(&square(), h)?;
    Ok(Tiling {
        sites: set.sites().iter().flatten().copied().collect(),
        fill: set.fill_distance(),
        separation: set.separation_radius(),
    })
}

#[wasm_bindgen]
pub struct ErrorMap {
    nx: usize,
    ny: usize,
    field: Vec<f64>,
    h: Vec<f64>,
    multiscale: Vec<f64>,
    single_scale: Vec<f64>,
}

#[wasm_bindgen]
impl ErrorMap {
    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Final-level absolute error, row-major from the bottom row (empty for manifold runs).
    #[wasm_bindgen(getter)]
    pub fn field(&self) -> Vec<f64> {
        self.field.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn h(&self) -> Vec<f64> {
        self.h.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn multiscale(&self) -> Vec<f64> {
        self.multiscale.clone()
    }

    #[wasm_bindgen(getter, js_name = singleScale)]
    pub fn single_scale(&self) -> Vec<f64> {
        self.single_scale.clone()
    }
}

fn setup(levels: usize, mu: f64, grid_step: f64) -> Result<(RunConfig, LevelSequence, Domain)> {
    let cfg = RunConfig { levels, mu, grid_step, ..RunConfig::default() };
    cfg.validate()?;
    let seq = build_level_sequence(&cfg.domain, cfg.h1, cfg.mu, cfg.nu, cfg.levels)?;
    let (rect, _) = cfg.evaluation_rect()?;
    Ok((cfg, seq, rect))
}

/// Scalar multiscale run on `h`, `f`, `g` or `f_tilde`.
pub fn scalar_run(function: &str, levels: usize, mu: f64, grid_step: f64) -> Result<ErrorMap> {
    let f = ScalarFunction::parse(function).ok_or_else(|| Error::invalid(format!("unknown function {function:?}")))?;
    let (cfg, seq, rect) = setup(levels, mu, grid_step)?;
    let grid = Grid::over(&rect, grid_step)?;
    let model = multiscale_fit(|p| f.eval(p), &seq, cfg.degree)?;
    let errors = level_errors(&model, |p| f.eval(p), &grid)?;
    let single_scale = seq
        .levels()
        .iter()
        .zip(seq.support_radii())
        .map(|(set, &delta)| {
            let values = set.sites().iter().map(|p| f.eval(p)).collect();
            let op = QuasiInterpolant::new(set.clone(), values, delta, cfg.degree)?;
            Ok(linf_error(|p| op.try_evaluate(p), |p| f.eval(p), &rect, grid_step)?.linf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorMap {
        nx: grid.nx,
        ny: grid.ny,
        field: errors.last().map(|e| e.values.clone()).unwrap_or_default(),
        h: seq.nominal_h().to_vec(),
        multiscale: errors.iter().map(|e| e.linf).collect(),
        single_scale,
    })
}

fn manifold_curve<M, F>(m: M, f: F, levels: usize, grid_step: f64) -> Result<ErrorMap>
where
    M: Manifold + Clone,
    F: Fn(&Point) -> M::Point + Sync + Send + Copy,
{
    let (cfg, seq, rect) = setup(levels, 0.8, grid_step)?;
    let grid = Grid::over(&rect, grid_step)?;
    let base = base_from_first_level(&seq, f)?;
    let model = manifold_multiscale_fit(m.clone(), f, &seq, base, cfg.karcher)?;
    let errors = manifold_level_errors(&model, f, &grid)?;
    let single_scale = seq
        .levels()
        .iter()
        .zip(seq.support_radii())
        .map(|(set, &delta)| {
            let field = ManifoldField::sample(set.clone(), f);
            let approx = |p: &Point| try_manifold_quasi_interp(&m, &field, p, delta, &cfg.karcher);
            Ok(manifold_linf_error(&m, approx, f, &rect, grid_step)?.linf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorMap {
        nx: grid.nx,
        ny: grid.ny,
        field: errors.last().map(|e| e.values.clone()).unwrap_or_default(),
        h: seq.nominal_h().to_vec(),
        multiscale: errors.iter().map(|e| e.linf).collect(),
        single_scale,
    })
}

/// Manifold multiscale run on `so3` or `spd`.
pub fn manifold_run(kind: &str, levels: usize, grid_step: f64) -> Result<ErrorMap> {
    match kind {
        "so3" => manifold_curve(So3, so3_field, levels, grid_step),
        "spd" => manifold_curve(Spd, spd_field, levels, grid_step),
        other => Err(Error::invalid(format!("unknown manifold {other:?}"))),
    }
}

#[wasm_bindgen(js_name = haltonTiling)]
pub fn halton_tiling(h: f64) -> std::result::Result<Tiling, JsError> {
    tile(h).map_err(js)
}

#[wasm_bindgen(js_name = scalarErrorMap)]
pub fn scalar_error_map(function: &str, levels: usize, mu: f64, grid_step: f64) -> std::result::Result<ErrorMap, JsError> {
    scalar_run(function, levels, mu, grid_step).map_err(js)
}

#[wasm_bindgen(js_name = manifoldConvergence)]
pub fn manifold_convergence(kind: &str, levels: usize, grid_step: f64) -> std::result::Result<ErrorMap, JsError> {
    manifold_run(kind, levels, grid_step).map_err(js)
}
