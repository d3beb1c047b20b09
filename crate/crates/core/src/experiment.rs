//! Experiment pipelines and their on-disk artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    add_noise_so3, anomaly_scan, bench_grid, contrast_ratio, denoised_fit, estimate_constants, loglog_slope, Abscissa,
    AnomalyBox, BenchResult, ConstantsFit, ConvergenceTable, SlopeFit, TableMeta,
};
use crate::config::{RunConfig, MIN_NEIGHBORHOOD};
use crate::functions::{so3_field, spd_field, ScalarFunction, ANOMALY_RECT};
use crate::grid::Grid;
use crate::manifold::{Manifold, ManifoldField, So3, Spd};
use crate::manifold_multiscale::{
    manifold_level_errors, manifold_linf_error, try_manifold_quasi_interp, write_manifold_csv, BaseFunction,
    ManifoldMultiscaleModel,
};
use crate::multiscale::{level_errors, linf_error, ConvergenceRow, ErrorField, MultiscaleModel};
use crate::parallel::{par_map, try_par_map};
use crate::pgm::PgmImage;
use crate::pointset::{build_level_sequence, Domain, LevelSequence};
use crate::quasi_interp::QuasiInterpolant;
use crate::svg::{loglog_svg, Series};
use crate::{Error, Point, Result};

/// Writes files into an optional output directory.
struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Result<Self> {
        if let Some(dir) = &cfg.out_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Artifacts { dir: cfg.out_dir.clone() })
    }

    fn write<F>(&self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        if let Some(dir) = &self.dir {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            body(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if let Some(dir) = &self.dir {
            let text = serde_json::to_string_pretty(value)?;
            std::fs::write(dir.join(name), text + "\n")?;
        }
        Ok(())
    }
}

/// Geometry of one level of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMeta {
    pub level: usize,
    pub sites: usize,
    pub h_nominal: f64,
    pub h_measured: f64,
    pub q: f64,
    pub spacing_ratio: f64,
    pub delta: f64,
}

pub fn level_meta(levels: &LevelSequence) -> Vec<LevelMeta> {
    levels
        .levels()
        .iter()
        .enumerate()
        .map(|(j, s)| LevelMeta {
            level: j + 1,
            sites: s.len(),
            h_nominal: levels.nominal_h()[j],
            h_measured: s.fill_distance(),
            q: s.separation_radius(),
            spacing_ratio: s.spacing_ratio(),
            delta: levels.support_radii()[j],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct RunMeta<'a> {
    config: &'a RunConfig,
    rect: Domain,
    inset: f64,
    levels: Vec<LevelMeta>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn elapsed(cfg: &RunConfig, t: Instant) -> f64 {
    if cfg.timings {
        t.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn scalar_function(cfg: &RunConfig) -> Result<ScalarFunction> {
    ScalarFunction::parse(&cfg.function)
        .ok_or_else(|| Error::invalid(format!("{:?} is not a scalar test function (h, f, g, f_tilde)", cfg.function)))
}

/// Builds the level sequence and checks that every grid node and next-level
/// site sees enough sites.
pub fn build_levels(cfg: &RunConfig) -> Result<LevelSequence> {
    cfg.validate()?;
    let levels = stage("sites", build_level_sequence(&cfg.domain, cfg.h1, cfg.mu, cfg.nu, cfg.levels))?;
    let (rect, _) = cfg.evaluation_rect()?;
    let min = levels.min_neighborhood(&rect, cfg.grid_step);
    if min < MIN_NEIGHBORHOOD {
        return Err(Error::invalid(format!(
            "support radius too small: a neighborhood has {min} sites, at least {MIN_NEIGHBORHOOD} required (raise nu)"
        )));
    }
    Ok(levels)
}

/// Writes `level_j.csv` for every level and `meta.json`.
pub fn gen_points(cfg: &RunConfig) -> Result<Vec<LevelMeta>> {
    cfg.validate()?;
    let levels = stage("sites", build_level_sequence(&cfg.domain, cfg.h1, cfg.mu, cfg.nu, cfg.levels))?;
    let out = Artifacts::new(cfg)?;
    for (j, set) in levels.levels().iter().enumerate() {
        out.write(&format!("level_{}.csv", j + 1), |w| set.write_csv(w))?;
    }
    let meta = level_meta(&levels);
    out.json("meta.json", &meta)?;
    Ok(meta)
}

fn table_meta(cfg: &RunConfig, mu: f64) -> TableMeta {
    TableMeta { mu, nu: cfg.nu, degree: cfg.degree, function: cfg.function.clone(), seed: Some(cfg.seed) }
}

fn rows_from(levels: &LevelSequence, errors: &[f64], seconds: &[f64]) -> Vec<ConvergenceRow> {
    (0..errors.len())
        .map(|j| ConvergenceRow {
            level: j + 1,
            h_nominal: levels.nominal_h()[j],
            h_measured: levels.level(j).fill_distance(),
            linf: errors[j],
            seconds: seconds[j],
        })
        .collect()
}

struct ScalarRun {
    levels: LevelSequence,
    rect: Domain,
    inset: f64,
    model: MultiscaleModel,
    errors: Vec<ErrorField>,
    single: Vec<ErrorField>,
    seconds: Vec<f64>,
}

fn scalar_pipeline<F>(cfg: &RunConfig, f: F) -> Result<ScalarRun>
where
    F: Fn(&Point) -> f64 + Sync + Send,
{
    let levels = build_levels(cfg)?;
    let (rect, inset) = cfg.evaluation_rect()?;
    let grid = Grid::over(&rect, cfg.grid_step)?;
    let mut model = MultiscaleModel::empty(&levels, cfg.degree)?;
    let mut seconds = Vec::with_capacity(levels.len());
    for set in levels.levels() {
        let t = Instant::now();
        let values = par_map(set.sites(), &f);
        stage("fit", model.fit_next(values))?;
        seconds.push(elapsed(cfg, t));
    }
    let errors = stage("evaluate", level_errors(&model, &f, &grid))?;
    let single = levels
        .levels()
        .iter()
        .enumerate()
        .map(|(j, set)| {
            let values = par_map(set.sites(), &f);
            let op = QuasiInterpolant::new(set.clone(), values, levels.support_radii()[j], cfg.degree)?;
            linf_error(|p| op.try_evaluate(p), &f, &rect, cfg.grid_step)
        })
        .collect::<Result<Vec<_>>>();
    let single = stage("single-scale", single)?;
    Ok(ScalarRun { levels, rect, inset, model, errors, single, seconds })
}

fn linfs(fields: &[ErrorField]) -> Vec<f64> {
    fields.iter().map(|e| e.linf).collect()
}

fn series(name: &str, levels: &LevelSequence, errors: &[f64]) -> Series {
    Series { name: name.into(), points: levels.nominal_h().iter().copied().zip(errors.iter().copied()).collect() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiscaleReport {
    pub rect: Domain,
    pub inset: f64,
    pub table: ConvergenceTable,
    /// Single-scale error on the sites of each level.
    pub single_scale: Vec<f64>,
    pub slope: Option<SlopeFit>,
    pub levels: Vec<LevelMeta>,
}

/// Scalar multiscale run on a catalog function.
pub fn run_multiscale(cfg: &RunConfig) -> Result<MultiscaleReport> {
    let f = scalar_function(cfg)?;
    let run = scalar_pipeline(cfg, |p| f.eval(p))?;
    report_scalar(cfg, &run, "multiscale")
}

fn report_scalar(cfg: &RunConfig, run: &ScalarRun, title: &str) -> Result<MultiscaleReport> {
    let out = Artifacts::new(cfg)?;
    let errors = linfs(&run.errors);
    let single_scale = linfs(&run.single);
    let table = stage("table", ConvergenceTable::new(table_meta(cfg, cfg.mu), rows_from(&run.levels, &errors, &run.seconds)))?;
    let single_table = ConvergenceTable::new(table_meta(cfg, cfg.mu), rows_from(&run.levels, &single_scale, &vec![0.0; errors.len()]));
    let slope = if table.rows.len() >= 3 { Some(loglog_slope(&table, Abscissa::Level)?) } else { None };
    for (j, e) in run.errors.iter().enumerate() {
        out.write(&format!("errors_level_{}.csv", j + 1), |w| e.write_csv(w))?;
    }
    out.write("convergence.csv", |w| table.write_csv(w))?;
    if let Ok(t) = &single_table {
        out.write("single_scale.csv", |w| t.write_csv(w))?;
    }
    if let Some(s) = &slope {
        out.json("slope.json", s)?;
    }
    let svg = loglog_svg(
        title,
        "nominal fill distance h",
        "max error on grid",
        &[series("multiscale", &run.levels, &errors), series("single scale", &run.levels, &single_scale)],
    );
    out.write("convergence.svg", |w| w.write_all(svg.as_bytes()))?;
    let levels = level_meta(&run.levels);
    out.json("meta.json", &RunMeta { config: cfg, rect: run.rect, inset: run.inset, levels: levels.clone() })?;
    Ok(MultiscaleReport { rect: run.rect, inset: run.inset, table, single_scale, slope, levels })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub rect: Domain,
    pub level: usize,
    pub sites: usize,
    pub delta: f64,
    pub linf: f64,
}

/// Single-scale quasi-interpolation on the sites of the finest level.
pub fn run_approx(cfg: &RunConfig) -> Result<ApproxReport> {
    let f = scalar_function(cfg)?;
    let levels = build_levels(cfg)?;
    let (rect, inset) = cfg.evaluation_rect()?;
    let n = levels.len() - 1;
    let set = levels.level(n).clone();
    let values = par_map(set.sites(), |p| f.eval(p));
    let delta = levels.support_radii()[n];
    let op = stage("fit", QuasiInterpolant::new(set.clone(), values, delta, cfg.degree))?;
    let err = stage("evaluate", linf_error(|p| op.try_evaluate(p), |p| f.eval(p), &rect, cfg.grid_step))?;
    let out = Artifacts::new(cfg)?;
    out.write("errors.csv", |w| err.write_csv(w))?;
    let report = ApproxReport { rect, level: n + 1, sites: set.len(), delta, linf: err.linf };
    out.json("approx.json", &report)?;
    out.json("meta.json", &RunMeta { config: cfg, rect, inset, levels: level_meta(&levels) })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub mus: Vec<f64>,
    pub tables: Vec<ConvergenceTable>,
    pub slopes: Vec<SlopeFit>,
    pub constants: ConstantsFit,
}

/// Runs the multiscale pipeline for every `mu` in the sweep and fits
/// `slope(mu) = log C + k log mu`.
pub fn run_convergence(cfg: &RunConfig) -> Result<SweepReport> {
    let f = scalar_function(cfg)?;
    if cfg.levels < 3 {
        return Err(Error::invalid("the convergence sweep needs at least 3 levels"));
    }
    let out = Artifacts::new(cfg)?;
    let mut tables = Vec::new();
    let mut slopes = Vec::new();
    let mut plot = Vec::new();
    for &mu in &cfg.mus {
        let sub = RunConfig { mu, out_dir: None, ..cfg.clone() };
        let run = stage(&format!("mu = {mu}"), scalar_pipeline(&sub, |p| f.eval(p)))?;
        let errors = linfs(&run.errors);
        let table = ConvergenceTable::new(table_meta(cfg, mu), rows_from(&run.levels, &errors, &run.seconds))?;
        slopes.push(loglog_slope(&table, Abscissa::Level)?);
        out.write(&format!("convergence_mu_{mu}.csv"), |w| table.write_csv(w))?;
        plot.push(series(&format!("mu = {mu}"), &run.levels, &errors));
        tables.push(table);
    }
    let constants = stage("constants", estimate_constants(&cfg.mus, &slopes))?;
    out.json("slopes.json", &slopes)?;
    out.json("constants.json", &constants)?;
    let svg = loglog_svg("multiscale convergence", "nominal fill distance h", "max error on grid", &plot);
    out.write("convergence.svg", |w| w.write_all(svg.as_bytes()))?;
    let (rect, inset) = cfg.evaluation_rect()?;
    out.json("meta.json", &RunMeta { config: cfg, rect, inset, levels: Vec::new() })?;
    Ok(SweepReport { mus: cfg.mus.clone(), tables, slopes, constants })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalySummary {
    pub linf: f64,
    pub median: f64,
    pub mad: f64,
    pub threshold: f64,
    pub flagged: usize,
    pub boxes: Vec<AnomalyBox>,
    /// Whether any box meets the anomaly rectangle of the test function.
    pub hits_anomaly: bool,
    /// Peak error inside the anomaly rectangle over the median error.
    pub contrast: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub multiscale: AnomalySummary,
    pub single_scale: AnomalySummary,
}

fn summarize(field: &ErrorField, window: usize) -> AnomalySummary {
    let r = anomaly_scan(field, window);
    AnomalySummary {
        linf: field.linf,
        median: r.median,
        mad: r.mad,
        threshold: r.threshold,
        flagged: r.mask.iter().filter(|m| **m).count(),
        hits_anomaly: r.boxes.iter().any(|b| b.intersects(&ANOMALY_RECT)),
        boxes: r.boxes,
        contrast: contrast_ratio(field, &ANOMALY_RECT),
    }
}

/// Scans the finest multiscale and single-scale error maps for anomalies.
pub fn run_anomaly(cfg: &RunConfig) -> Result<AnomalyReport> {
    let f = scalar_function(cfg)?;
    let run = scalar_pipeline(cfg, |p| f.eval(p))?;
    let ms = run.errors.last().expect("at least one level");
    let ss = run.single.last().expect("at least one level");
    let report =
        AnomalyReport { multiscale: summarize(ms, cfg.anomaly_window), single_scale: summarize(ss, cfg.anomaly_window) };
    let out = Artifacts::new(cfg)?;
    out.write("anomaly_multiscale.csv", |w| ms.write_csv(w))?;
    out.write("anomaly_single.csv", |w| ss.write_csv(w))?;
    out.json("anomaly.json", &report)?;
    out.json("meta.json", &RunMeta { config: cfg, rect: run.rect, inset: run.inset, levels: level_meta(&run.levels) })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub manifold: String,
    pub rect: Domain,
    pub inset: f64,
    pub table: ConvergenceTable,
    pub single_scale: Vec<f64>,
    pub levels: Vec<LevelMeta>,
}

fn fit_manifold<M: Manifold + Clone>(
    cfg: &RunConfig,
    m: M,
    levels: &LevelSequence,
    samples: Vec<Vec<M::Point>>,
) -> Result<(ManifoldMultiscaleModel<M>, Vec<f64>)> {
    let base = BaseFunction::nearest(ManifoldField::new(levels.level(0).clone(), samples[0].clone())?)?;
    let mut model = ManifoldMultiscaleModel::new(m, base, cfg.karcher)?;
    let mut seconds = Vec::new();
    for (j, values) in samples.into_iter().enumerate() {
        let t = Instant::now();
        stage("fit", model.add_level(levels.level(j).clone(), levels.support_radii()[j], values))?;
        seconds.push(elapsed(cfg, t));
    }
    Ok((model, seconds))
}

fn manifold_pipeline<M, F>(cfg: &RunConfig, m: M, f: F) -> Result<ManifoldReport>
where
    M: Manifold + Clone,
    F: Fn(&Point) -> M::Point + Sync + Send + Copy,
{
    let levels = build_levels(cfg)?;
    let (rect, inset) = cfg.evaluation_rect()?;
    let grid = Grid::over(&rect, cfg.grid_step)?;
    let samples: Vec<Vec<M::Point>> = levels.levels().iter().map(|s| par_map(s.sites(), f)).collect();
    let (model, seconds) = fit_manifold(cfg, m.clone(), &levels, samples)?;
    let errors = stage("evaluate", manifold_level_errors(&model, f, &grid))?;
    let single = levels
        .levels()
        .iter()
        .enumerate()
        .map(|(j, set)| {
            let field = ManifoldField::sample(set.clone(), f);
            let delta = levels.support_radii()[j];
            manifold_linf_error(&m, |p| try_manifold_quasi_interp(&m, &field, p, delta, &cfg.karcher), f, &rect, cfg.grid_step)
                .map(|e| e.linf)
        })
        .collect::<Result<Vec<_>>>();
    let single = stage("single-scale", single)?;
    let linf = linfs(&errors);
    let table = ConvergenceTable::new(table_meta(cfg, cfg.mu), rows_from(&levels, &linf, &seconds))?;

    let out = Artifacts::new(cfg)?;
    for (j, e) in errors.iter().enumerate() {
        out.write(&format!("errors_level_{}.csv", j + 1), |w| e.write_csv(w))?;
    }
    out.write("convergence.csv", |w| table.write_csv(w))?;
    if out.dir.is_some() {
        let nodes = grid.nodes();
        let values = stage("evaluate", try_par_map(&nodes, |_, p| model.evaluate(p)))?;
        let values: Vec<M::Point> = values.into_iter().collect::<Option<_>>().ok_or(Error::MissingValues { count: 1 })?;
        out.write("field_final.csv", |w| write_manifold_csv(&m, &nodes, &values, w))?;
    }
    let svg = loglog_svg(
        &format!("{} multiscale", m.name()),
        "nominal fill distance h",
        "max geodesic error on grid",
        &[series("multiscale", &levels, &linf), series("single scale", &levels, &single)],
    );
    out.write("convergence.svg", |w| w.write_all(svg.as_bytes()))?;
    let meta = level_meta(&levels);
    out.json("meta.json", &RunMeta { config: cfg, rect, inset, levels: meta.clone() })?;
    Ok(ManifoldReport { manifold: m.name().into(), rect, inset, table, single_scale: single, levels: meta })
}

/// Manifold multiscale run on `so3` or `spd`.
pub fn run_manifold(cfg: &RunConfig) -> Result<ManifoldReport> {
    match cfg.function.as_str() {
        "so3" => manifold_pipeline(cfg, So3, so3_field),
        "spd" => manifold_pipeline(cfg, Spd, spd_field),
        other => Err(Error::invalid(format!("{other:?} is not a manifold test function (so3, spd)"))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdRun {
    pub threshold: f64,
    pub retained: usize,
    pub linf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub sigma: f64,
    pub seed: u64,
    /// Max distance between noisy and clean samples on the finest level.
    pub noise_linf: f64,
    pub final_sites: usize,
    pub unfiltered: Vec<f64>,
    pub filtered: ThresholdRun,
    pub filtered_levels: Vec<f64>,
    pub sweep: Vec<ThresholdRun>,
}

/// Noisy SO(3) samples on every level (seed `seed + j` on level `j`).
pub fn noisy_so3_samples(levels: &LevelSequence, sigma: f64, seed: u64) -> Result<Vec<Vec<crate::manifold::Rotation>>> {
    levels
        .levels()
        .iter()
        .enumerate()
        .map(|(j, s)| add_noise_so3(&ManifoldField::sample(s.clone(), so3_field), sigma, seed.wrapping_add(j as u64)).map(|f| f.values))
        .collect()
}

/// Denoising study on the rotation field.
pub fn run_denoise(cfg: &RunConfig) -> Result<DenoiseReport> {
    if cfg.function != "so3" {
        return Err(Error::invalid("denoising runs on the so3 test function"));
    }
    if cfg.levels < 2 {
        return Err(Error::invalid("denoising needs at least 2 levels"));
    }
    let levels = build_levels(cfg)?;
    let (rect, inset) = cfg.evaluation_rect()?;
    let grid = Grid::over(&rect, cfg.grid_step)?;
    let noisy = stage("noise", noisy_so3_samples(&levels, cfg.sigma, cfg.seed))?;
    let n = levels.len();
    let finest = levels.level(n - 1);
    let noise_linf = finest
        .sites()
        .iter()
        .zip(&noisy[n - 1])
        .map(|(p, r)| So3.dist(&so3_field(p), r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let base = BaseFunction::nearest(ManifoldField::new(levels.level(0).clone(), noisy[0].clone())?)?;
    let fit = |t: Option<f64>| {
        let outcome = stage("fit", denoised_fit(So3, noisy.clone(), &levels, base.clone(), cfg.karcher, t))?;
        let errors = stage("evaluate", manifold_level_errors(&outcome.model, so3_field, &grid))?;
        Ok::<_, Error>((outcome, errors))
    };
    let (_, plain) = fit(None)?;
    let (chosen, filtered_errors) = fit(Some(cfg.threshold))?;
    let unfiltered = linfs(&plain);
    let filtered_levels = linfs(&filtered_errors);
    let filtered =
        ThresholdRun { threshold: cfg.threshold, retained: chosen.retained.len(), linf: *filtered_levels.last().unwrap() };
    let mut sweep = Vec::new();
    for &t in &cfg.threshold_sweep {
        let (o, e) = fit(Some(t))?;
        sweep.push(ThresholdRun { threshold: t, retained: o.retained.len(), linf: e.last().unwrap().linf });
    }

    let out = Artifacts::new(cfg)?;
    let zeros = vec![0.0; n];
    let t_plain = ConvergenceTable::new(table_meta(cfg, cfg.mu), rows_from(&levels, &unfiltered, &zeros))?;
    let t_filtered = ConvergenceTable::new(table_meta(cfg, cfg.mu), rows_from(&levels, &filtered_levels, &zeros))?;
    out.write("convergence_unfiltered.csv", |w| t_plain.write_csv(w))?;
    out.write("convergence_filtered.csv", |w| t_filtered.write_csv(w))?;
    out.write("noisy_samples.csv", |w| write_manifold_csv(&So3, finest.sites(), &noisy[n - 1], w))?;
    if out.dir.is_some() {
        let nodes = grid.nodes();
        let values = stage("evaluate", try_par_map(&nodes, |_, p| chosen.model.evaluate(p)))?;
        let values: Vec<_> = values.into_iter().collect::<Option<_>>().ok_or(Error::MissingValues { count: 1 })?;
        out.write("field_denoised.csv", |w| write_manifold_csv(&So3, &nodes, &values, w))?;
    }
    let report = DenoiseReport {
        sigma: cfg.sigma,
        seed: cfg.seed,
        noise_linf,
        final_sites: finest.len(),
        unfiltered,
        filtered,
        filtered_levels,
        sweep,
    };
    out.json("denoise.json", &report)?;
    out.json("meta.json", &RunMeta { config: cfg, rect, inset, levels: level_meta(&levels) })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub sites: usize,
    pub grid_nodes: usize,
    pub shepard: BenchResult,
    pub mls_degree: usize,
    pub mls: BenchResult,
    pub shepard_per_point: f64,
    pub mls_per_point: f64,
}

/// Single-threaded grid evaluation time of Shepard and quadratic MLS on the finest level.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let f = scalar_function(cfg)?;
    let levels = build_levels(cfg)?;
    let (rect, _) = cfg.evaluation_rect()?;
    let grid = Grid::over(&rect, cfg.grid_step)?;
    let n = levels.len() - 1;
    let set = levels.level(n).clone();
    let values = par_map(set.sites(), |p| f.eval(p));
    let delta = levels.support_radii()[n];
    let shepard_op = QuasiInterpolant::new(set.clone(), values.clone(), delta, 0)?;
    let mls_degree = cfg.degree.max(2);
    let mls_op = QuasiInterpolant::new(set.clone(), values, delta, mls_degree)?;
    let shepard = stage("bench", bench_grid(&shepard_op, &grid, cfg.bench_reps))?;
    let mls = stage("bench", bench_grid(&mls_op, &grid, cfg.bench_reps))?;
    let nodes = grid.len().max(1) as f64;
    let report = BenchReport {
        sites: set.len(),
        grid_nodes: grid.len(),
        shepard_per_point: shepard.median_seconds / nodes,
        mls_per_point: mls.median_seconds / nodes,
        shepard,
        mls_degree,
        mls,
    };
    Artifacts::new(cfg)?.json("bench.json", &report)?;
    Ok(report)
}

/// Multiscale approximation of a PGM image on `[-1, 1]²`; writes the
/// reconstruction as `reconstruction.pgm`.
pub fn run_image_demo(cfg: &RunConfig, image: &Path) -> Result<MultiscaleReport> {
    let img = PgmImage::load(image)?;
    let oracle = |p: &Point| img.value(p);
    let run = scalar_pipeline(cfg, oracle)?;
    let report = report_scalar(cfg, &run, "image multiscale")?;
    let out = Artifacts::new(cfg)?;
    if out.dir.is_some() {
        let grid = Grid::over(&run.rect, cfg.grid_step)?;
        // image rows run top to bottom, grid rows bottom to top
        let flipped: Vec<Point> =
            (0..grid.ny).rev().flat_map(|j| (0..grid.nx).map(move |i| grid.node(j * grid.nx + i))).collect();
        let values = stage("evaluate", try_par_map(&flipped, |_, p| run.model.evaluate(p)))?;
        let values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        let rec = PgmImage::from_values(grid.nx, grid.ny, &values);
        out.write("reconstruction.pgm", |w| rec.write(w))?;
    }
    Ok(report)
}
