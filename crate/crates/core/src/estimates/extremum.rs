use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{geodesic_shoot, orthonormal_frame, ChartDomain, GeodesicConfig, MetricField, Point};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::sampling::Halton;

type RegionMap = Arc<dyn Fn(&Point) -> Option<Point> + Send + Sync>;

/// A sampling region: a parameter box together with an optional map from
/// parameters to chart points (returning `None` outside the region).
#[derive(Clone)]
pub struct Region {
    bounds: Vec<(f64, f64)>,
    map: Option<RegionMap>,
    description: String,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region").field("bounds", &self.bounds).field("description", &self.description).finish()
    }
}

impl Region {
    pub fn boxed(bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_bounds(&bounds)?;
        Ok(Region { bounds, map: None, description: "box".into() })
    }

    pub fn mapped(
        bounds: Vec<(f64, f64)>,
        description: impl Into<String>,
        map: impl Fn(&Point) -> Option<Point> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_bounds(&bounds)?;
        Ok(Region { bounds, map: Some(Arc::new(map)), description: description.into() })
    }

    /// A box region restricted by a membership predicate.
    pub fn filtered(bounds: Vec<(f64, f64)>, keep: impl Fn(&Point) -> bool + Send + Sync + 'static) -> Result<Self> {
        Region::mapped(bounds, "filtered box", move |p| keep(p).then(|| p.clone()))
    }

    /// The whole chart, which must have finite bounds.
    pub fn from_domain(domain: &ChartDomain) -> Result<Self> {
        Region::boxed(domain.bounds().to_vec())
    }

    /// The closed geodesic ball of radius `r` about `x0`, parametrized by
    /// the unit ball of an orthonormal frame at `x0` through the
    /// exponential map.
    pub fn geodesic_ball(metric: &MetricField, x0: &Point, r: f64) -> Result<Self> {
        let g = metric.at(x0)?;
        let frame = orthonormal_frame(&g);
        let n = x0.len();
        let metric = metric.clone();
        let x0 = x0.clone();
        Region::mapped(vec![(-1.0, 1.0); n], format!("geodesic ball of radius {r}"), move |v| {
            if v.norm() > 1.0 {
                return None;
            }
            let mut w = Point::zeros(n);
            for (c, e) in v.iter().zip(&frame) {
                w += e * (*c * r);
            }
            if w.amax() == 0.0 {
                return Some(x0.clone());
            }
            geodesic_shoot(&metric, &x0, &w, 1.0, GeodesicConfig::default()).ok()
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Point for a parameter vector, `None` if outside the region.
    pub fn locate(&self, param: &Point) -> Option<Point> {
        if !param.iter().zip(&self.bounds).all(|(x, (lo, hi))| x >= lo && x <= hi) {
            return None;
        }
        match &self.map {
            Some(m) => m(param),
            None => Some(param.clone()),
        }
    }

    pub(crate) fn from_unit(&self, u: &[f64]) -> Point {
        Point::from_iterator(u.len(), u.iter().zip(&self.bounds).map(|(t, (lo, hi))| lo + t * (hi - lo)))
    }
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(GeoError::EmptyRegion);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sup,
    Inf,
}

/// An estimated supremum or infimum with the point where it was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// A sampled point: unit-cube parameter, region point and field value.
#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub unit: Vec<f64>,
    pub point: Point,
    pub value: f64,
}

/// Evaluates `f` at `budget` quasi-random points of the region, in
/// parallel, keeping the sampling order.
pub(crate) fn sample_field<F>(f: &F, region: &Region, budget: usize, seed: u64) -> Vec<Sample>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let units: Vec<Vec<f64>> = Halton::new(region.dim(), seed).take(budget).collect();
    units
        .into_par_iter()
        .filter_map(|u| {
            let point = region.locate(&region.from_unit(&u))?;
            let value = f(&point);
            value.is_finite().then_some(Sample { unit: u, point, value })
        })
        .collect()
}

/// Quasi-random sampling followed by simplex refinement of the best few
/// samples. Deterministic for a given seed. Sampling can only
/// under-estimate a supremum and over-estimate an infimum.
pub fn estimate_extremum<F>(f: F, region: &Region, mode: Mode, budget: usize, seed: u64) -> Result<Extremum>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let sign = match mode {
        Mode::Sup => -1.0,
        Mode::Inf => 1.0,
    };
    let mut samples = sample_field(&f, region, budget.max(1), seed);
    if samples.is_empty() {
        return Err(GeoError::EmptyRegion);
    }
    samples.sort_by(|a, b| (sign * a.value).total_cmp(&(sign * b.value)));
    let starts: Vec<&Sample> = samples.iter().take(4).collect();
    let objective = |u: &[f64]| {
        if u.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return f64::NAN;
        }
        match region.locate(&region.from_unit(u)) {
            Some(p) => sign * f(&p),
            None => f64::NAN,
        }
    };
    let d = region.dim();
    let refined: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, &s.unit, 0.02, NelderMeadOptions { max_evals: 60 * (d + 1), ftol: 1e-13, xtol: 1e-9 }))
        .collect();
    let mut best = (samples[0].unit.clone(), sign * samples[0].value);
    for (u, v) in refined {
        if v < best.1 {
            best = (u, v);
        }
    }
    let witness = region.locate(&region.from_unit(&best.0)).expect("refined point lies in the region");
    Ok(Extremum { value: sign * best.1, witness: witness.as_slice().to_vec(), samples: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vector;
    use std::f64::consts::PI;

    #[test]
    fn constant_field() {
        let region = Region::boxed(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let e = estimate_extremum(|_| 3.5, &region, Mode::Sup, 100, 1).unwrap();
        assert_eq!(e.value, 3.5);
    }

    #[test]
    fn finds_interior_maximum_and_is_deterministic() {
        let region = Region::boxed(vec![(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let f = |p: &Point| -(p[0] - 0.3).powi(2) - (p[1] + 0.7).powi(2) + 1.0;
        let a = estimate_extremum(f, &region, Mode::Sup, 200, 9).unwrap();
        let b = estimate_extremum(f, &region, Mode::Sup, 200, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.value - 1.0).abs() < 1e-10);
        assert!((a.witness[0] - 0.3).abs() < 1e-4);
        let m = estimate_extremum(f, &region, Mode::Inf, 200, 9).unwrap();
        assert!(m.value <= f(&Point::from_vec(vec![-2.0, 2.0])) + 1e-3);
    }

    #[test]
    fn empty_region_is_an_error() {
        let region = Region::filtered(vec![(0.0, 1.0)], |_| false).unwrap();
        assert_eq!(estimate_extremum(|_| 0.0, &region, Mode::Sup, 50, 0), Err(GeoError::EmptyRegion));
        assert!(Region::boxed(vec![(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn geodesic_ball_on_sphere_stays_within_radius() {
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-10.0, 10.0)], "sphere").unwrap();
        let m = MetricField::diagonal("S2", dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2)]));
        let x0 = Point::from_vec(vec![PI / 2.0, 0.0]);
        let region = Region::geodesic_ball(&m, &x0, 0.5).unwrap();
        let dist = |p: &Point| {
            let v = |q: &Point| nalgebra::Vector3::new(q[0].sin() * q[1].cos(), q[0].sin() * q[1].sin(), q[0].cos());
            v(&x0).dot(&v(p)).clamp(-1.0, 1.0).acos()
        };
        let e = estimate_extremum(dist, &region, Mode::Sup, 200, 3).unwrap();
        assert!(e.value <= 0.5 + 1e-9 && e.value > 0.49, "{}", e.value);
    }
}
