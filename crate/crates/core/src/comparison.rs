//! Comparison functions for an upper bound `b` on radial curvature, and
//! sampled checks of the radial bound and the Hessian comparison for the
//! distance from a point.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{
    fd, geodesic_flow, gram_schmidt, hessian, inner, riemann, ChartDomain, DistanceFunction, FdConfig, GeodesicConfig,
    MetricField, Point, ScalarField, Vector,
};
use crate::sampling::{random_unit, rng, stream};

/// Below this `|b|` is treated as zero.
const FLAT_TOLERANCE: f64 = 1e-14;
/// Slack allowed in the sampled inequalities.
pub const CHECK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    Positive(f64),
    Flat,
    Negative(f64),
}

fn branch(b: f64) -> Branch {
    if b.abs() < FLAT_TOLERANCE {
        Branch::Flat
    } else if b > 0.0 {
        Branch::Positive(b.sqrt())
    } else {
        Branch::Negative((-b).sqrt())
    }
}

/// The largest admissible radius for bound `b` (infinite unless `b > 0`).
pub fn max_radius(b: f64) -> f64 {
    match branch(b) {
        Branch::Positive(s) => PI / (2.0 * s),
        _ => f64::INFINITY,
    }
}

fn check_domain(b: f64, t: f64, allow_zero: bool) -> Result<Branch> {
    let ok_low = if allow_zero { t >= 0.0 } else { t > 0.0 };
    if !(ok_low && t < max_radius(b)) || !b.is_finite() {
        return Err(GeoError::DomainError(format!("t = {t} outside the domain for b = {b}")));
    }
    Ok(branch(b))
}

/// `√b cot(√b t)`, `1/t` or `√-b coth(√-b t)`.
pub fn c_b(b: f64, t: f64) -> Result<f64> {
    Ok(match check_domain(b, t, false)? {
        Branch::Positive(s) => s / (s * t).tan(),
        Branch::Flat => 1.0 / t,
        Branch::Negative(s) => s / (s * t).tanh(),
    })
}

/// `1 − cos(√b t)`, `t²` or `cosh(√-b t)`.
pub fn phi_b(b: f64, t: f64) -> Result<f64> {
    Ok(match check_domain(b, t, true)? {
        Branch::Positive(s) => 1.0 - (s * t).cos(),
        Branch::Flat => t * t,
        Branch::Negative(s) => (s * t).cosh(),
    })
}

pub fn phi_b_prime(b: f64, t: f64) -> Result<f64> {
    Ok(match check_domain(b, t, true)? {
        Branch::Positive(s) => s * (s * t).sin(),
        Branch::Flat => 2.0 * t,
        Branch::Negative(s) => s * (s * t).sinh(),
    })
}

pub fn phi_b_second(b: f64, t: f64) -> Result<f64> {
    Ok(match check_domain(b, t, true)? {
        Branch::Positive(s) => b * (s * t).cos(),
        Branch::Flat => 2.0,
        Branch::Negative(s) => -b * (s * t).cosh(),
    })
}

/// `φ_b'' − φ_b' C_b`, zero up to rounding.
pub fn ode_residual(b: f64, t: f64) -> Result<f64> {
    Ok(phi_b_second(b, t)? - phi_b_prime(b, t)? * c_b(b, t)?)
}

/// A curvature bound together with the radius of the ball it is used on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonConfig {
    pub b: f64,
    pub r: f64,
}

impl ComparisonConfig {
    pub fn new(b: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) || !b.is_finite() {
            return Err(GeoError::DomainError(format!("need r > 0 and finite b, got r = {r}, b = {b}")));
        }
        if r >= max_radius(b) - 1e-12 {
            return Err(GeoError::DomainError(format!("r = {r} must be below pi/(2 sqrt b) = {}", max_radius(b))));
        }
        Ok(ComparisonConfig { b, r })
    }

    pub fn c_b(&self) -> f64 {
        c_b(self.b, self.r).expect("validated radius")
    }

    pub fn phi_b(&self, t: f64) -> Result<f64> {
        phi_b(self.b, t)
    }

    pub fn phi_b_prime(&self, t: f64) -> Result<f64> {
        phi_b_prime(self.b, t)
    }

    /// `φ_b ∘ ρ` for a distance function `ρ`.
    pub fn comparison_function(&self, rho: &DistanceFunction) -> ScalarField {
        let (b, rho) = (self.b, rho.field());
        ScalarField::new("phi_b(rho)", rho.dim(), move |x| phi_b(b, rho.eval(x)).unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub samples: usize,
    pub seed: u64,
    pub inj_radius: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { samples: 64, seed: 0, inj_radius: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialBoundReport {
    pub max_radial_curvature: f64,
    pub witness: Vec<f64>,
    pub bound: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianComparisonReport {
    /// Minimum of `Hess ρ(X,X) − C_b(ρ)|X|²` over unit `X ⟂ grad ρ`.
    pub min_slack: f64,
    pub witness: Vec<f64>,
    /// Largest `|Hess ρ(grad ρ, ·)|` on unit vectors.
    pub max_radial_hessian: f64,
    pub samples: usize,
    pub pass: bool,
}

fn check_radius(r: f64, opts: &SamplingOptions) -> Result<()> {
    if r >= opts.inj_radius {
        return Err(GeoError::OutsideDeclaredInjRadius { distance: r, radius: opts.inj_radius });
    }
    if !(r > 0.0) {
        return Err(GeoError::DomainError(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// Points of the ball reached by unit-speed geodesics from `x0`, with the
/// geodesic velocity there. Radii below a tenth of `r` are skipped, since
/// the distance is not smooth at the center.
fn radial_samples(metric: &MetricField, x0: &Point, r: f64, opts: &SamplingOptions) -> Result<Vec<(Point, Vector)>> {
    let g0 = metric.at(x0)?;
    let mut gen = rng(opts.seed, stream::RADIAL);
    let mut out = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        let u = random_unit(&mut gen, &g0);
        let s = r * (0.1 + 0.9 * gen.random::<f64>());
        out.push(geodesic_flow(metric, x0, &u, s, GeodesicConfig::default())?);
    }
    Ok(out)
}

/// Orthonormal basis of the `g`-complement of a unit vector.
fn complement(g: &DMatrix<f64>, unit: &Vector) -> Vec<Vector> {
    let n = unit.len();
    let mut family = vec![unit.clone()];
    family.extend((0..n).map(|i| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })));
    gram_schmidt(g, &family, 1e-8).into_iter().skip(1).collect()
}

/// Largest sectional curvature of planes containing the radial direction,
/// sampled over `B(x0; r)`, compared with `b`.
pub fn radial_bound_check(metric: &MetricField, x0: &Point, r: f64, b: f64, opts: SamplingOptions) -> Result<RadialBoundReport> {
    check_radius(r, &opts)?;
    let mut best = (f64::NEG_INFINITY, x0.clone());
    for (x, v) in radial_samples(metric, x0, r, &opts)? {
        let tensor = riemann(metric, &x, FdConfig::default())?;
        let g = tensor.metric().clone();
        let v = &v / inner(&g, &v, &v).sqrt();
        let basis = complement(&g, &v);
        let m = basis.len();
        if m == 0 {
            continue;
        }
        let q = DMatrix::from_fn(m, m, |a, c| tensor.eval(&v, &basis[a], &v, &basis[c]));
        let top = ((&q + q.transpose()) * 0.5).symmetric_eigenvalues().max();
        if top > best.0 {
            best = (top, x);
        }
    }
    Ok(RadialBoundReport {
        max_radial_curvature: best.0,
        witness: best.1.as_slice().to_vec(),
        bound: b,
        samples: opts.samples,
        pass: best.0 <= b + CHECK_TOLERANCE,
    })
}

/// Samples `Hess ρ` over `B(x0; r)`: across `grad ρ` it should dominate
/// `C_b(ρ)`, along `grad ρ` it should vanish. Meaningful once the radial
/// bound holds.
pub fn hessian_comparison_check(
    metric: &MetricField,
    rho: &DistanceFunction,
    r: f64,
    b: f64,
    opts: SamplingOptions,
) -> Result<HessianComparisonReport> {
    check_radius(r, &opts)?;
    let field = rho.field();
    let cfg = FdConfig::with_step(1e-3);
    let mut min_slack = (f64::INFINITY, rho.x0().clone());
    let mut radial = 0.0f64;
    for (x, _) in radial_samples(metric, rho.x0(), r, &opts)? {
        let dist = rho.eval(&x)?;
        let g = metric.at(&x)?;
        let dr = fd::differential(|y: &Point| field.eval(y), &x, cfg.step);
        let grad = g.clone().lu().solve(&dr).expect("metric validated as positive definite");
        let unit = &grad / inner(&g, &grad, &grad).sqrt();
        let h = hessian(metric, &field, &x, cfg)?;
        let form = |a: &Vector, c: &Vector| (a.transpose() * &h * c)[(0, 0)];
        let basis = complement(&g, &unit);
        radial = radial.max(form(&unit, &unit).abs());
        for e in &basis {
            radial = radial.max(form(&unit, e).abs());
        }
        if basis.is_empty() {
            continue;
        }
        let m = basis.len();
        let q = DMatrix::from_fn(m, m, |a, c| form(&basis[a], &basis[c]));
        let slack = ((&q + q.transpose()) * 0.5).symmetric_eigenvalues().min() - c_b(b, dist)?;
        if slack < min_slack.0 {
            min_slack = (slack, x);
        }
    }
    Ok(HessianComparisonReport {
        min_slack: min_slack.0,
        witness: min_slack.1.as_slice().to_vec(),
        max_radial_hessian: radial,
        samples: opts.samples,
        pass: min_slack.0 >= -CHECK_TOLERANCE && radial < CHECK_TOLERANCE,
    })
}

/// A two-dimensional model of constant curvature with a base point, its
/// distance function in closed form and its injectivity radius.
#[derive(Debug, Clone)]
pub struct SpaceForm {
    pub curvature: f64,
    pub metric: MetricField,
    pub center: Point,
    pub distance: DistanceFunction,
    pub inj_radius: f64,
}

/// Sphere of radius `1/√b` in colatitude/longitude, the Euclidean plane, or
/// the half-plane scaled to curvature `b`.
pub fn space_form(b: f64) -> SpaceForm {
    match branch(b) {
        Branch::Positive(s) => {
            let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-2.0 * PI, 2.0 * PI)], "colatitude, longitude").expect("valid bounds");
            let metric = MetricField::diagonal("round-sphere", dom, move |p| Vector::from_vec(vec![1.0 / b, p[0].sin().powi(2) / b]));
            let center = Point::from_vec(vec![PI / 2.0, 0.0]);
            let c = center.clone();
            let unit = |p: &Point| nalgebra::Vector3::new(p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos());
            let field = ScalarField::new("spherical-distance", 2, move |p| unit(&c).dot(&unit(p)).clamp(-1.0, 1.0).acos() / s);
            SpaceForm { curvature: b, metric, distance: DistanceFunction::closed(center.clone(), field), center, inj_radius: PI / s }
        }
        Branch::Flat => {
            let center = Point::zeros(2);
            SpaceForm {
                curvature: 0.0,
                metric: MetricField::euclidean(2),
                distance: DistanceFunction::euclidean(center.clone()),
                center,
                inj_radius: f64::INFINITY,
            }
        }
        Branch::Negative(s) => {
            let c = 1.0 / s;
            let dom = ChartDomain::new(vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)], "upper half-plane").expect("valid bounds");
            let metric = MetricField::diagonal("hyperbolic-plane", dom, move |p| Vector::from_element(2, c * c / (p[1] * p[1])));
            let center = Point::from_vec(vec![0.0, 1.0]);
            let o = center.clone();
            let field = ScalarField::new("hyperbolic-distance", 2, move |p| {
                c * (1.0 + (p - &o).norm_squared() / (2.0 * o[1] * p[1])).acosh()
            });
            SpaceForm { curvature: b, metric, distance: DistanceFunction::closed(center.clone(), field), center, inj_radius: f64::INFINITY }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_b_values() {
        assert_eq!(c_b(0.0, 2.0).unwrap(), 0.5);
        assert!((c_b(1.0, PI / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((c_b(-4.0, 1.0).unwrap() - 2.0 / 2f64.tanh()).abs() < 1e-14);
        assert!((c_b(-4.0, 1.0).unwrap() - 2.07465).abs() < 5e-5);
        assert!(c_b(1.0, 2.0).is_err());
        assert!(c_b(0.0, 0.0).is_err());
        assert!(c_b(-1.0, -1.0).is_err());
    }

    #[test]
    fn phi_b_values() {
        assert_eq!(phi_b(0.0, 3.0).unwrap(), 9.0);
        assert!((phi_b(1.0, PI / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(phi_b(-1.0, 0.0).unwrap(), 1.0);
        assert!(phi_b(4.0, 1.0).is_err());
    }

    #[test]
    fn tiny_curvature_uses_the_flat_branch() {
        assert_eq!(c_b(1e-15, 2.0).unwrap(), 0.5);
        assert_eq!(phi_b(-1e-16, 3.0).unwrap(), 9.0);
    }

    #[test]
    fn ode_identity_holds() {
        assert_eq!(ode_residual(0.0, 2.0).unwrap(), 0.0);
        assert!(ode_residual(1.0, 0.7).unwrap().abs() < 1e-12);
        assert!(ode_residual(-2.0, 1.3).unwrap().abs() < 1e-12);
        for b in [-4.0, -1.0, 0.0, 1.0, 4.0] {
            let top = max_radius(b).min(5.0);
            for i in 1..1000 {
                let t = top * i as f64 / 1000.0;
                let res = ode_residual(b, t).unwrap();
                assert!(res.abs() < 1e-10 * (1.0 + phi_b_second(b, t).unwrap().abs()), "b={b} t={t} res={res}");
            }
        }
    }

    #[test]
    fn monotonicity_on_grids() {
        for b in [-4.0, -1.0, 0.0, 1.0, 4.0] {
            let top = max_radius(b).min(5.0);
            let ts: Vec<f64> = (1..1000).map(|i| top * i as f64 / 1000.0).collect();
            for w in ts.windows(2) {
                assert!(c_b(b, w[1]).unwrap() < c_b(b, w[0]).unwrap());
                assert!(phi_b(b, w[1]).unwrap() > phi_b(b, w[0]).unwrap());
                assert!(phi_b_prime(b, w[0]).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn config_rejects_large_radius() {
        assert!(ComparisonConfig::new(1.0, PI / 2.0).is_err());
        assert!(ComparisonConfig::new(1.0, 1.5).is_ok());
        assert!(ComparisonConfig::new(0.0, -1.0).is_err());
    }

    fn opts(samples: usize, inj: f64) -> SamplingOptions {
        SamplingOptions { samples, seed: 7, inj_radius: inj }
    }

    #[test]
    fn radial_bound_on_space_forms() {
        let e = space_form(0.0);
        let rep = radial_bound_check(&e.metric, &e.center, 1.0, 0.0, opts(8, e.inj_radius)).unwrap();
        assert!(rep.pass && rep.max_radial_curvature.abs() < 1e-8);

        let s = space_form(1.0);
        let rep = radial_bound_check(&s.metric, &s.center, 1.0, 1.0, opts(8, s.inj_radius)).unwrap();
        assert!(rep.pass && (rep.max_radial_curvature - 1.0).abs() < 1e-3, "{rep:?}");

        let h = space_form(-1.0);
        let rep = radial_bound_check(&h.metric, &h.center, 1.0, 0.0, opts(8, h.inj_radius)).unwrap();
        assert!(rep.pass && (rep.max_radial_curvature + 1.0).abs() < 1e-3, "{rep:?}");

        let rep = radial_bound_check(&s.metric, &s.center, 1.0, 0.5, opts(8, s.inj_radius)).unwrap();
        assert!(!rep.pass);
        assert!(matches!(
            radial_bound_check(&s.metric, &s.center, 1.0, 1.0, opts(8, 0.5)),
            Err(GeoError::OutsideDeclaredInjRadius { .. })
        ));
    }

    #[test]
    fn hessian_comparison_on_space_forms() {
        let e = space_form(0.0);
        let rep = hessian_comparison_check(&e.metric, &e.distance, 1.0, 0.0, opts(12, e.inj_radius)).unwrap();
        assert!(rep.pass && rep.min_slack.abs() < 1e-3, "{rep:?}");

        let h = space_form(-1.0);
        let rep = hessian_comparison_check(&h.metric, &h.distance, 1.0, -1.0, opts(12, h.inj_radius)).unwrap();
        assert!(rep.pass && rep.min_slack.abs() < 1e-3, "{rep:?}");

        let rep = hessian_comparison_check(&h.metric, &h.distance, 1.0, 0.0, opts(12, h.inj_radius)).unwrap();
        assert!(rep.pass && rep.min_slack > 1e-3, "{rep:?}");

        let s = space_form(4.0);
        let rep = hessian_comparison_check(&s.metric, &s.distance, 0.7, 4.0, opts(12, s.inj_radius)).unwrap();
        assert!(rep.pass && rep.min_slack.abs() < 1e-3, "{rep:?}");
    }
}
