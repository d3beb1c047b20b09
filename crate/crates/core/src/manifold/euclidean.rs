use nalgebra::SVector;

use super::Manifold;
use crate::{Error, Result};

/// Flat space `R^D`; used as a sanity instance of the manifold machinery.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean<const D: usize>;

impl<const D: usize> Manifold for Euclidean<D> {
    type Point = SVector<f64, D>;
    type Tangent = SVector<f64, D>;

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn exp(&self, p: &Self::Point, v: &Self::Tangent) -> Result<Self::Point> {
        Ok(p + v)
    }

    fn log(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent> {
        Ok(q - p)
    }

    fn dist(&self, p: &Self::Point, q: &Self::Point) -> Result<f64> {
        Ok((q - p).norm())
    }

    fn norm(&self, _p: &Self::Point, v: &Self::Tangent) -> f64 {
        v.norm()
    }

    fn transport(&self, _p: &Self::Point, _q: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent> {
        Ok(*v)
    }

    fn zero(&self, _p: &Self::Point) -> Self::Tangent {
        SVector::zeros()
    }

    fn check_point(&self, p: &Self::Point) -> Result<()> {
        if p.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("non-finite coordinate"))
        }
    }

    fn coords(&self, p: &Self::Point) -> Vec<f64> {
        p.iter().copied().collect()
    }

    fn from_coords(&self, c: &[f64]) -> Result<Self::Point> {
        if c.len() != D {
            return Err(Error::invalid(format!("expected {D} coordinates, got {}", c.len())));
        }
        Ok(SVector::from_column_slice(c))
    }
}
