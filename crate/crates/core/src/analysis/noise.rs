use std::sync::Arc;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::manifold::{hat, rodrigues, KarcherConfig, Manifold, ManifoldField, Rotation};
use crate::manifold_multiscale::{BaseFunction, ManifoldMultiscaleModel};
use crate::parallel::try_par_map;
use crate::pointset::{LevelSequence, PointSet};
use crate::{Error, Result};

/// Right-multiplies every value by `expm(hat(w))`, `w ~ N(0, sigma² I₃)`,
/// drawn in site order from a seeded stream.
pub fn add_noise_so3(field: &ManifoldField<Rotation>, sigma: f64, seed: u64) -> Result<ManifoldField<Rotation>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise level must be a nonnegative number, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = field
        .values
        .iter()
        .map(|r| {
            let w = Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
            Rotation::new(r.matrix() * rodrigues(&hat(&w)))
        })
        .collect::<Result<_>>()?;
    ManifoldField::new(field.sites.clone(), values)
}

/// Filtered field, kept site indices and every site's deviation.
pub type Filtered<P> = (ManifoldField<P>, Vec<usize>, Vec<f64>);

/// Sites whose sample lies within `t` times the largest deviation from the
/// previous approximation, with every site's deviation.
pub fn denoise_filter<M, A>(m: &M, noisy: &ManifoldField<M::Point>, previous: A, t: f64) -> Result<Filtered<M::Point>>
where
    M: Manifold,
    A: Fn(&crate::Point) -> Result<Option<M::Point>> + Sync,
{
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold must lie in [0, 1], got {t}")));
    }
    let deviations = try_par_map(noisy.sites.sites(), |i, p| {
        let prev = previous(p)?.ok_or(Error::MissingValues { count: 1 })?;
        m.dist(&prev, &noisy.values[i])
    })?;
    let max = deviations.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..deviations.len()).filter(|&i| !(deviations[i] > t * max)).collect();
    if keep.is_empty() {
        return Err(Error::invalid("denoising removed every site"));
    }
    let sites = noisy.sites.sites();
    let set = PointSet::new(
        keep.iter().map(|&i| sites[i]).collect(),
        *noisy.sites.domain(),
        noisy.sites.fill_distance() / 10.0,
    )?;
    let values = keep.iter().map(|&i| noisy.values[i].clone()).collect();
    Ok((ManifoldField::new(Arc::new(set), values)?, keep, deviations))
}

#[derive(Debug, Clone)]
pub struct DenoiseOutcome<M: Manifold> {
    pub model: ManifoldMultiscaleModel<M>,
    /// Indices of the final-level sites that were kept.
    pub retained: Vec<usize>,
    pub deviations: Vec<f64>,
}

/// Multiscale fit of noisy samples that filters the final level against the
/// approximation of the previous levels. `threshold = None` keeps all sites.
pub fn denoised_fit<M: Manifold + Clone>(
    manifold: M,
    samples: Vec<Vec<M::Point>>,
    levels: &LevelSequence,
    base: BaseFunction<M::Point>,
    cfg: KarcherConfig,
    threshold: Option<f64>,
) -> Result<DenoiseOutcome<M>> {
    let n = levels.len();
    if n < 2 || samples.len() != n {
        return Err(Error::invalid("denoising needs at least 2 levels with samples for each"));
    }
    let mut model = ManifoldMultiscaleModel::new(manifold, base, cfg)?;
    let mut samples = samples;
    let last = samples.pop().expect("n >= 2");
    for (j, values) in samples.into_iter().enumerate() {
        model.add_level(levels.level(j).clone(), levels.support_radii()[j], values)?;
    }
    let noisy = ManifoldField::new(levels.level(n - 1).clone(), last)?;
    let delta = levels.support_radii()[n - 1];
    let (field, retained, deviations) = match threshold {
        Some(t) => denoise_filter(model.manifold(), &noisy, |p| model.evaluate(p), t)?,
        None => {
            let all = (0..noisy.len()).collect();
            (noisy, all, Vec::new())
        }
    };
    model.add_level(field.sites, delta, field.values)?;
    Ok(DenoiseOutcome { model, retained, deviations })
}
