//! Experiment configuration: JSON file plus overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::manifold::KarcherConfig;
use crate::multiscale::default_evaluation_rect;
use crate::pointset::Domain;
use crate::{Error, Result};

/// Smallest accepted Shepard neighborhood anywhere on the evaluation grid.
pub const MIN_NEIGHBORHOOD: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    /// Target fill distance of the first level.
    pub h1: f64,
    pub mu: f64,
    /// Support radius factor, `delta_j = nu h_j`.
    pub nu: f64,
    pub levels: usize,
    pub degree: usize,
    pub kernel: Kernel,
    /// One of `h`, `f`, `g`, `f_tilde`, `so3`, `spd`.
    pub function: String,
    pub grid_step: f64,
    /// Evaluation rectangle; defaults to the domain inset by `min(delta_1, side / 4)`.
    pub rect: Option<Domain>,
    pub seed: u64,
    pub karcher: KarcherConfig,
    pub out_dir: Option<PathBuf>,
    /// Record wall times in convergence tables (otherwise written as 0).
    pub timings: bool,
    /// Scaling factors of the convergence sweep.
    pub mus: Vec<f64>,
    pub sigma: f64,
    pub threshold: f64,
    pub threshold_sweep: Vec<f64>,
    pub anomaly_window: usize,
    pub bench_reps: usize,
    pub image: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: Domain { x_min: -0.95, x_max: 0.95, y_min: -0.95, y_max: 0.95 },
            h1: 0.375,
            mu: 0.8,
            nu: 3.0,
            levels: 5,
            degree: 0,
            kernel: Kernel::Wendland31,
            function: "h".into(),
            grid_step: 0.02,
            rect: None,
            seed: 42,
            karcher: KarcherConfig::default(),
            out_dir: None,
            timings: true,
            mus: vec![0.5, 0.6, 0.7],
            sigma: 0.2,
            threshold: 0.9,
            threshold_sweep: vec![0.75, 0.85, 0.95],
            anomaly_window: 1,
            bench_reps: 5,
            image: None,
        }
    }
}

pub const PRESETS: [&str; 2] = ["default", "fig1"];

impl RunConfig {
    /// Named settings: `default` (the scalar study) or `fig1` (image demo:
    /// `[-1, 1]²`, five Shepard levels with `mu = 0.5` down to `h = 0.008`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(RunConfig::default()),
            "fig1" => Ok(RunConfig {
                domain: Domain { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 },
                h1: 0.128,
                mu: 0.5,
                levels: 5,
                degree: 0,
                function: "image".into(),
                grid_step: 0.005,
                rect: Some(Domain { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 }),
                ..RunConfig::default()
            }),
            other => Err(Error::invalid(format!("unknown preset {other:?} (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// Overrides the fields present in a JSON object, keeping the rest.
    pub fn merge_json(&self, text: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::invalid(format!("config: {e}"));
        let patch: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let serde_json::Value::Object(patch) = patch else {
            return Err(Error::invalid("config: expected a JSON object"));
        };
        let mut merged = serde_json::to_value(self)?;
        let fields = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in patch {
            fields.insert(k, v);
        }
        serde_json::from_value(merged).map_err(bad)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        Domain::new(d.x_min, d.x_max, d.y_min, d.y_max)?;
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(self.h1 > 0.0 && self.h1 < d.diameter(), format!("h1 must be in (0, {}), got {}", d.diameter(), self.h1))?;
        check(self.mu > 0.0 && self.mu < 1.0, format!("mu must be in (0, 1), got {}", self.mu))?;
        check(self.nu > 1.0 && self.nu.is_finite(), format!("nu must exceed 1, got {}", self.nu))?;
        check(self.levels >= 1, "levels must be at least 1".into())?;
        check(self.degree <= 4, format!("degree must be at most 4, got {}", self.degree))?;
        check(self.grid_step > 0.0 && self.grid_step.is_finite(), format!("grid_step must be positive, got {}", self.grid_step))?;
        check(self.mus.iter().all(|m| *m > 0.0 && *m < 1.0), "every sweep mu must be in (0, 1)".into())?;
        check(self.sigma >= 0.0 && self.sigma.is_finite(), format!("sigma must be nonnegative, got {}", self.sigma))?;
        let unit = |t: &f64| (0.0..=1.0).contains(t);
        check(unit(&self.threshold) && self.threshold_sweep.iter().all(unit), "thresholds must lie in [0, 1]".into())?;
        check(self.bench_reps >= 3, format!("bench_reps must be at least 3, got {}", self.bench_reps))?;
        self.karcher.validate()?;
        if let Some(r) = &self.rect {
            Domain::new(r.x_min, r.x_max, r.y_min, r.y_max)?;
            check(
                r.x_min >= d.x_min && r.x_max <= d.x_max && r.y_min >= d.y_min && r.y_max <= d.y_max,
                "rect must lie inside the domain".into(),
            )?;
        }
        Ok(())
    }

    /// First-level support radius.
    pub fn delta1(&self) -> f64 {
        self.nu * self.h1
    }

    /// Evaluation rectangle and the inset that produced it (0 when given explicitly).
    pub fn evaluation_rect(&self) -> Result<(Domain, f64)> {
        match self.rect {
            Some(r) => Ok((r, 0.0)),
            None => default_evaluation_rect(&self.domain, self.delta1()),
        }
    }
}

/// Parses `a,b,c,d` into a domain.
pub fn parse_domain(s: &str) -> Result<Domain> {
    let v = parse_list(s)?;
    if v.len() != 4 {
        return Err(Error::invalid(format!("expected xmin,xmax,ymin,ymax, got {s:?}")));
    }
    Domain::new(v[0], v[1], v[2], v[3])
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: {t:?}"))))
        .collect()
}
