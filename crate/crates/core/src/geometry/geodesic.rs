use nalgebra::DMatrix;

use super::curvature::christoffel_data;
use super::{inner, FdConfig, MetricField, Point, ScalarField, Vector};
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicConfig {
    /// RK4 steps per unit of arc length.
    pub steps_per_unit: f64,
    pub min_steps: usize,
    pub fd: FdConfig,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { steps_per_unit: 200.0, min_steps: 50, fd: FdConfig::default() }
    }
}

fn acceleration(metric: &MetricField, x: &Point, v: &Vector, h: f64) -> Vector {
    let n = x.len();
    let gamma = christoffel_data(metric, x, h);
    Vector::from_fn(n, |k, _| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gamma[(k * n + i) * n + j] * v[i] * v[j];
            }
        }
        -s
    })
}

/// Position and velocity at time `t` of the geodesic with initial data
/// `(p, v)`, by fixed-step classical Runge–Kutta.
pub fn geodesic_flow(metric: &MetricField, p: &Point, v: &Vector, t: f64, cfg: GeodesicConfig) -> Result<(Point, Vector)> {
    let g0 = metric.at(p)?;
    let speed = inner(&g0, v, v).max(0.0).sqrt();
    let steps = ((t.abs() * speed * cfg.steps_per_unit).ceil() as usize).max(cfg.min_steps);
    let dt = t / steps as f64;
    let h = cfg.fd.step;
    let mut x = p.clone();
    let mut xd = v.clone();
    for s in 0..steps {
        let a1 = acceleration(metric, &x, &xd, h);
        let x2 = &x + &xd * (0.5 * dt);
        let v2 = &xd + &a1 * (0.5 * dt);
        let a2 = acceleration(metric, &x2, &v2, h);
        let x3 = &x + &v2 * (0.5 * dt);
        let v3 = &xd + &a2 * (0.5 * dt);
        let a3 = acceleration(metric, &x3, &v3, h);
        let x4 = &x + &v3 * dt;
        let v4 = &xd + &a3 * dt;
        let a4 = acceleration(metric, &x4, &v4, h);
        x += (&xd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        xd += (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (dt / 6.0);
        if !metric.domain().contains(x.as_slice()) || x.iter().chain(xd.iter()).any(|c| !c.is_finite()) {
            return Err(GeoError::LeftChart { t: dt * (s + 1) as f64 });
        }
    }
    Ok((x, xd))
}

pub fn geodesic_shoot(metric: &MetricField, p: &Point, v: &Vector, t: f64, cfg: GeodesicConfig) -> Result<Point> {
    geodesic_flow(metric, p, v, t, cfg).map(|(x, _)| x)
}

/// Solves the boundary-value problem `exp_{x0}(w) = x` for the initial
/// velocity `w` by Newton iteration on the shooting map, restarting from
/// rescaled chord directions when a start fails.
pub fn shoot_to(metric: &MetricField, x0: &Point, x: &Point, cfg: GeodesicConfig) -> Result<Vector> {
    metric.domain().check(x)?;
    let chord = x - x0;
    let scale = chord.amax().max(1e-300);
    let mut last_err = String::from("no start attempted");
    for s in [1.0, 0.7, 1.3, 0.4, 2.0] {
        match newton_shoot(metric, x0, x, &chord * s, scale, cfg) {
            Ok(w) => return Ok(w),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(GeoError::NoConvergence(format!("geodesic shooting from {:?} to {:?}: {last_err}", x0.as_slice(), x.as_slice())))
}

fn newton_shoot(metric: &MetricField, x0: &Point, target: &Point, mut w: Vector, scale: f64, cfg: GeodesicConfig) -> Result<Vector> {
    let n = x0.len();
    let endpoint = |w: &Vector| geodesic_shoot(metric, x0, w, 1.0, cfg);
    let mut residual = endpoint(&w)? - target;
    let tol = 1e-13 * target.amax().max(1.0);
    for _ in 0..40 {
        if residual.amax() < tol {
            return Ok(w);
        }
        let eps = 1e-6 * scale.max(w.amax());
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = eps;
            let col = (endpoint(&(&w + &e))? - endpoint(&(&w - &e))?) / (2.0 * eps);
            jac.set_column(j, &col);
        }
        let step = jac.lu().solve(&residual).ok_or_else(|| GeoError::NoConvergence("singular shooting Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let trial = &w - &step * lambda;
            if let Ok(end) = endpoint(&trial) {
                let r = end - target;
                if r.norm() < residual.norm() || r.amax() < tol {
                    w = trial;
                    residual = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(GeoError::NoConvergence("line search stalled".into()));
            }
        }
    }
    if residual.amax() < 1e-10 * target.amax().max(1.0) {
        Ok(w)
    } else {
        Err(GeoError::NoConvergence(format!("residual {:e}", residual.amax())))
    }
}

/// Geodesic distance from `x0` to `x` by shooting, valid within the
/// declared injectivity radius.
pub fn distance(metric: &MetricField, x0: &Point, x: &Point, inj_radius: f64, cfg: GeodesicConfig) -> Result<f64> {
    if (x - x0).amax() == 0.0 {
        return Ok(0.0);
    }
    let w = shoot_to(metric, x0, x, cfg)?;
    let d = metric.norm(x0, &w)?;
    if d > inj_radius {
        return Err(GeoError::OutsideDeclaredInjRadius { distance: d, radius: inj_radius });
    }
    Ok(d)
}

/// The distance `ρ = dist(x0, ·)` on a base chart, either in closed form or
/// through geodesic shooting.
#[derive(Debug, Clone)]
pub enum DistanceFunction {
    Closed { x0: Point, field: ScalarField },
    Shooting { metric: MetricField, x0: Point, inj_radius: f64, cfg: GeodesicConfig },
}

impl DistanceFunction {
    pub fn closed(x0: Point, field: ScalarField) -> Self {
        DistanceFunction::Closed { x0, field }
    }

    pub fn euclidean(x0: Point) -> Self {
        let c = x0.clone();
        let field = ScalarField::new("euclidean-distance", x0.len(), move |p| (p - &c).norm());
        DistanceFunction::Closed { x0, field }
    }

    pub fn shooting(metric: MetricField, x0: Point, inj_radius: f64) -> Self {
        DistanceFunction::Shooting { metric, x0, inj_radius, cfg: GeodesicConfig::default() }
    }

    pub fn x0(&self) -> &Point {
        match self {
            DistanceFunction::Closed { x0, .. } | DistanceFunction::Shooting { x0, .. } => x0,
        }
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        match self {
            DistanceFunction::Closed { field, .. } => field.value(x),
            DistanceFunction::Shooting { metric, x0, inj_radius, cfg } => distance(metric, x0, x, *inj_radius, *cfg),
        }
    }

    /// The distance as a scalar field (NaN where it cannot be evaluated).
    pub fn field(&self) -> ScalarField {
        match self {
            DistanceFunction::Closed { field, .. } => field.clone(),
            DistanceFunction::Shooting { x0, .. } => {
                let me = self.clone();
                ScalarField::new("geodesic-distance", x0.len(), move |p| me.eval(p).unwrap_or(f64::NAN))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartDomain;
    use std::f64::consts::PI;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn sphere() -> MetricField {
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-10.0, 10.0)], "sphere").unwrap();
        MetricField::diagonal("S2", dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2)]))
    }

    fn half_plane() -> MetricField {
        let dom = ChartDomain::new(vec![(-50.0, 50.0), (1e-3, 1e3)], "H2").unwrap();
        MetricField::diagonal("H2", dom, |p| Vector::from_element(2, 1.0 / (p[1] * p[1])))
    }

    #[test]
    fn euclidean_straight_line() {
        let m = MetricField::euclidean(3);
        let x = geodesic_shoot(&m, &pt(&[0.0, 0.0, 0.0]), &pt(&[1.0, 0.0, 0.0]), 2.0, GeodesicConfig::default()).unwrap();
        assert!((x - pt(&[2.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn equatorial_great_circle_conserves_speed() {
        let m = sphere();
        let p = pt(&[PI / 2.0, 0.0]);
        let (x, v) = geodesic_flow(&m, &p, &pt(&[0.0, 1.0]), PI / 2.0, GeodesicConfig::default()).unwrap();
        assert!((&x - pt(&[PI / 2.0, PI / 2.0])).amax() < 1e-9);
        let speed = m.norm(&x, &v).unwrap();
        assert!((speed - 1.0).abs() < 1e-8);
    }

    #[test]
    fn oblique_great_circle_conserves_speed() {
        let m = sphere();
        let p = pt(&[1.0, 0.0]);
        let v = pt(&[0.6, 0.8 / 1f64.sin()]);
        let (x, vt) = geodesic_flow(&m, &p, &v, 1.0, GeodesicConfig::default()).unwrap();
        assert!((m.norm(&x, &vt).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vertical_hyperbolic_geodesic_stays_vertical() {
        let m = half_plane();
        let x = geodesic_shoot(&m, &pt(&[0.0, 1.0]), &pt(&[0.0, 1.0]), 1.0, GeodesicConfig::default()).unwrap();
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn shooting_distances_match_closed_forms() {
        let e = MetricField::euclidean(2);
        let d = distance(&e, &pt(&[0.0, 0.0]), &pt(&[3.0, 4.0]), 100.0, GeodesicConfig::default()).unwrap();
        assert!((d - 5.0).abs() < 1e-10);

        let h = half_plane();
        let d = distance(&h, &pt(&[0.0, 1.0]), &pt(&[0.0, 1f64.exp()]), 100.0, GeodesicConfig::default()).unwrap();
        assert!((d - 1.0).abs() < 1e-8);

        let s = sphere();
        let (a, b) = (pt(&[1.0, 0.2]), pt(&[1.9, 1.0]));
        let to_r3 = |p: &Point| nalgebra::Vector3::new(p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos());
        let exact = to_r3(&a).dot(&to_r3(&b)).acos();
        let d = distance(&s, &a, &b, PI, GeodesicConfig::default()).unwrap();
        assert!((d - exact).abs() < 1e-8, "{d} vs {exact}");
    }

    #[test]
    fn distance_beyond_declared_radius_is_rejected() {
        let e = MetricField::euclidean(2);
        let r = distance(&e, &pt(&[0.0, 0.0]), &pt(&[3.0, 4.0]), 1.0, GeodesicConfig::default());
        assert!(matches!(r, Err(GeoError::OutsideDeclaredInjRadius { .. })));
    }

    #[test]
    fn leaving_the_chart_is_reported() {
        let dom = ChartDomain::new(vec![(-1.0, 1.0)], "interval").unwrap();
        let m = MetricField::euclidean_on(dom);
        let r = geodesic_shoot(&m, &pt(&[0.0]), &pt(&[1.0]), 3.0, GeodesicConfig::default());
        assert!(matches!(r, Err(GeoError::LeftChart { .. })));
    }
}
