//! Parametrized immersions `φ: M → 𝓜` with the pulled-back metric.
//!
//! Tangent vectors of `M` are given in the parameter coordinates; ambient
//! vectors in the coordinates of the ambient chart.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GeoError, Result};
use crate::geometry::{
    christoffel, fd, gram_schmidt, hessian, inner, ChartDomain, DistanceFunction, FdConfig, MetricField, Point, ScalarField,
    Vector,
};
use crate::warped::{self, LiftKind, SplitVector, WarpedProduct};

/// Smallest admissible singular value of the differential.
pub const RANK_TOLERANCE: f64 = 1e-8;

type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub struct Immersion {
    name: String,
    domain: ChartDomain,
    ambient: MetricField,
    warped: Option<WarpedProduct>,
    map: MapFn,
    jacobian: Option<JacobianFn>,
    fd: FdConfig,
}

impl fmt::Debug for Immersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Immersion")
            .field("name", &self.name)
            .field("domain_dim", &self.domain_dim())
            .field("ambient", &self.ambient.name())
            .field("warped", &self.warped.is_some())
            .finish()
    }
}

/// Decomposition of `dφ(e)` into vertical and horizontal parts, the latter
/// further split along and across the base distance gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSplit {
    pub hor: Vector,
    pub ver: Vector,
    pub radial: Vector,
    pub transverse: Vector,
}

impl Immersion {
    pub fn new(
        name: impl Into<String>,
        domain: ChartDomain,
        ambient: MetricField,
        map: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Result<Self> {
        if domain.dim() > ambient.dim() {
            return Err(GeoError::DimensionError(format!(
                "cannot immerse dimension {} into dimension {}",
                domain.dim(),
                ambient.dim()
            )));
        }
        Ok(Immersion { name: name.into(), domain, ambient, warped: None, map: Arc::new(map), jacobian: None, fd: FdConfig::default() })
    }

    /// An immersion into a warped product, which enables the block formulas.
    pub fn into_warped(
        name: impl Into<String>,
        domain: ChartDomain,
        ambient: WarpedProduct,
        map: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut imm = Immersion::new(name, domain, ambient.metric(), map)?;
        imm.fd = ambient.fd();
        imm.warped = Some(ambient);
        Ok(imm)
    }

    /// Supplies the exact Jacobian `∂φ^a/∂t^i` (rows ambient, columns domain).
    pub fn with_jacobian(mut self, jac: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ambient(&self) -> &MetricField {
        &self.ambient
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn warped(&self) -> Option<&WarpedProduct> {
        self.warped.as_ref()
    }

    fn require_warped(&self) -> Result<&WarpedProduct> {
        self.warped.as_ref().ok_or(GeoError::AmbientNotWarped)
    }

    /// `φ(p)` without checks.
    pub fn map_raw(&self, p: &Point) -> Point {
        (self.map)(p)
    }

    pub fn map(&self, p: &Point) -> Result<Point> {
        self.domain.check(p)?;
        let q = self.map_raw(p);
        if q.len() != self.ambient_dim() {
            return Err(GeoError::DimensionMismatch { expected: self.ambient_dim(), got: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::NonFinite { point: p.as_slice().to_vec() });
        }
        Ok(q)
    }

    fn jacobian_raw(&self, p: &Point) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(p),
            None => fd::jacobian(|q: &Point| self.map_raw(q), p, self.fd.step),
        }
    }

    pub fn jacobian(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.map(p)?;
        Ok(self.jacobian_raw(p))
    }

    /// `dφ_p(e)`.
    pub fn push_forward(&self, p: &Point, e: &Vector) -> Result<Vector> {
        Ok(self.jacobian(p)? * e)
    }

    /// `φ*(g^𝓜)` at `p`, rejecting points where `dφ` loses rank.
    pub fn induced_metric(&self, p: &Point) -> Result<DMatrix<f64>> {
        let q = self.map(p)?;
        let j = self.jacobian_raw(p);
        let g = self.ambient.at(&q)?;
        let gm = j.transpose() * g * &j;
        let gm = (&gm + gm.transpose()) * 0.5;
        let sigma = gm.clone().symmetric_eigenvalues().min().max(0.0).sqrt();
        if !(sigma > RANK_TOLERANCE) {
            return Err(GeoError::RankDeficient { point: p.as_slice().to_vec(), sigma });
        }
        Ok(gm)
    }

    /// The induced metric as a field on the parameter chart.
    pub fn induced_metric_field(&self) -> MetricField {
        let me = self.clone();
        MetricField::new(format!("{}-induced", self.name), self.domain.clone(), move |p| {
            let j = me.jacobian_raw(p);
            let g = j.transpose() * me.ambient.raw(&me.map_raw(p)) * &j;
            (&g + g.transpose()) * 0.5
        })
    }

    /// `L ∘ φ` as a function on the parameter chart.
    pub fn pull_back(&self, l: &ScalarField) -> ScalarField {
        let map = self.map.clone();
        l.compose(self.domain_dim(), move |p| map(p))
    }

    /// A `g^M`-orthonormal tangent basis from the coordinate frame in order.
    pub fn tangent_frame(&self, p: &Point) -> Result<Vec<Vector>> {
        let g = self.induced_metric(p)?;
        let n = self.domain_dim();
        let coords: Vec<Vector> = (0..n).map(|i| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
        Ok(gram_schmidt(&g, &coords, 1e-300))
    }

    /// Component of an ambient vector normal to `dφ(T_pM)`.
    pub fn normal_part(&self, p: &Point, w: &Vector) -> Result<Vector> {
        let q = self.map(p)?;
        let g = self.ambient.at(&q)?;
        let j = self.jacobian_raw(p);
        let images: Vec<Vector> = self.tangent_frame(p)?.iter().map(|e| &j * e).collect();
        let mut out = w.clone();
        for _ in 0..2 {
            for b in &images {
                let c = inner(&g, b, &out);
                out -= b * c;
            }
        }
        Ok(out)
    }

    /// `∂²φ(e, e')` in ambient coordinates.
    fn second_derivative(&self, p: &Point, e: &Vector, e2: &Vector) -> Vector {
        let h = self.fd.step;
        match &self.jacobian {
            Some(j) => fd::directional(|q: &Point| j(q) * e2, p, e, h),
            None => fd::directional(|q: &Point| fd::directional(|s: &Point| self.map_raw(s), q, e2, h), p, e, h),
        }
    }

    /// `S(e, e') = (∇^𝓜_{dφe} dφe')^⊥`.
    pub fn second_fundamental_form(&self, p: &Point, e: &Vector, e2: &Vector) -> Result<Vector> {
        let q = self.map(p)?;
        let j = self.jacobian_raw(p);
        let gamma = christoffel(&self.ambient, &q, self.fd)?;
        let acc = self.second_derivative(p, e, e2) + gamma.contract(&(&j * e), &(&j * e2));
        self.normal_part(p, &acc)
    }

    /// Trace of `S` over a basis, which must be `g^M`-orthonormal.
    pub fn trace_second_fundamental_form(&self, p: &Point, basis: &[Vector]) -> Result<Vector> {
        let g = self.induced_metric(p)?;
        let n = self.domain_dim();
        if basis.len() != n {
            return Err(GeoError::DimensionMismatch { expected: n, got: basis.len() });
        }
        let gram = DMatrix::from_fn(n, n, |a, b| inner(&g, &basis[a], &basis[b]));
        let deviation = (gram - DMatrix::identity(n, n)).amax();
        if deviation > 1e-8 {
            return Err(GeoError::NotOrthonormal { deviation });
        }
        let mut h = Vector::zeros(self.ambient_dim());
        for e in basis {
            h += self.second_fundamental_form(p, e, e)?;
        }
        Ok(h)
    }

    pub fn mean_curvature_vector(&self, p: &Point) -> Result<Vector> {
        let frame = self.tangent_frame(p)?;
        self.trace_second_fundamental_form(p, &frame)
    }

    /// Ambient length of a vector based at `φ(p)`.
    pub fn ambient_norm(&self, p: &Point, w: &Vector) -> Result<f64> {
        self.ambient.norm(&self.map(p)?, w)
    }

    /// Gradient of `L ∘ φ` on `M` from the ambient differential of `L`.
    pub fn composed_gradient(&self, l: &ScalarField, p: &Point) -> Result<Vector> {
        let q = self.map(p)?;
        let g = self.induced_metric(p)?;
        let dl = fd::differential(|x: &Point| l.eval(x), &q, self.fd.step);
        let rhs = self.jacobian_raw(p).transpose() * dl;
        Ok(g.lu().solve(&rhs).expect("induced metric is positive definite"))
    }

    /// `Hess(L∘φ)(e,e) = Hess^𝓜 L(dφe, dφe) + dL(S(e,e))`.
    pub fn composed_hessian(&self, l: &ScalarField, p: &Point, e: &Vector) -> Result<f64> {
        let q = self.map(p)?;
        let de = self.jacobian_raw(p) * e;
        let h = hessian(&self.ambient, l, &q, self.fd)?;
        let dl = fd::differential(|x: &Point| l.eval(x), &q, self.fd.step);
        let s = self.second_fundamental_form(p, e, e)?;
        Ok((de.transpose() * h * &de)[(0, 0)] + dl.dot(&s))
    }

    /// `dφ(e)` split into base and fiber blocks.
    pub fn split_image(&self, p: &Point, e: &Vector) -> Result<SplitVector> {
        let wp = self.require_warped()?;
        Ok(wp.split(&self.push_forward(p, e)?))
    }

    /// Hessian of `G^v ∘ φ` from the fiber Hessian, the warping cross term
    /// and the vertical part of `S`.
    pub fn hessian_lift_vertical(&self, g: &ScalarField, p: &Point, e: &Vector) -> Result<f64> {
        let wp = self.require_warped()?;
        let q = self.map(p)?;
        let de = wp.split(&(self.jacobian_raw(p) * e));
        let s = wp.split(&self.second_fundamental_form(p, e, e)?);
        let (_, v) = wp.split_point(&q);
        let dg = fd::differential(|x: &Point| g.eval(x), &v, self.fd.step);
        Ok(wp.lift_hessian(&q, g, LiftKind::Fiber, &de, &de)? + dg.dot(&s.ver))
    }

    /// Hessian of `F^h ∘ φ` from the base Hessian, the warping term on the
    /// vertical part and the horizontal part of `S`.
    pub fn hessian_lift_horizontal(&self, f: &ScalarField, p: &Point, e: &Vector) -> Result<f64> {
        let wp = self.require_warped()?;
        let q = self.map(p)?;
        let de = wp.split(&(self.jacobian_raw(p) * e));
        let s = wp.split(&self.second_fundamental_form(p, e, e)?);
        let (x, _) = wp.split_point(&q);
        let df = fd::differential(|y: &Point| f.eval(y), &x, self.fd.step);
        Ok(wp.lift_hessian(&q, f, LiftKind::Base, &de, &de)? + df.dot(&s.hor))
    }

    /// `K_M(e1,e2) − K_𝓜(dφe1,dφe2)` via the Gauss equation.
    pub fn gauss_sectional_defect(&self, p: &Point, e1: &Vector, e2: &Vector) -> Result<f64> {
        let g = self.induced_metric(p)?;
        let gram = inner(&g, e1, e1) * inner(&g, e2, e2) - inner(&g, e1, e2).powi(2);
        if gram <= crate::geometry::PLANE_TOLERANCE {
            return Err(GeoError::DegeneratePlane { gram });
        }
        let q = self.map(p)?;
        let ga = self.ambient.at(&q)?;
        let s11 = self.second_fundamental_form(p, e1, e1)?;
        let s22 = self.second_fundamental_form(p, e2, e2)?;
        let s12 = self.second_fundamental_form(p, e1, e2)?;
        Ok((inner(&ga, &s11, &s22) - inner(&ga, &s12, &s12)) / gram)
    }

    /// Splits `dφ(e)` into vertical and horizontal parts and the horizontal
    /// part along and across `grad ρ` on the base.
    pub fn split_tangent(&self, p: &Point, e: &Vector, rho: &DistanceFunction) -> Result<TangentSplit> {
        let wp = self.require_warped()?;
        let q = self.map(p)?;
        let (x, _) = wp.split_point(&q);
        rho.eval(&x)?;
        let de = wp.split(&(self.jacobian_raw(p) * e));
        let gx = wp.base().at(&x)?;
        let field = rho.field();
        let dr = fd::differential(|y: &Point| field.eval(y), &x, self.fd.step);
        let grad = gx.clone().lu().solve(&dr).expect("base metric is positive definite");
        let norm = inner(&gx, &grad, &grad).sqrt();
        if !(norm > 0.0) {
            return Err(GeoError::NonFinite { point: x.as_slice().to_vec() });
        }
        let unit = grad / norm;
        let radial = &unit * inner(&gx, &de.hor, &unit);
        let transverse = &de.hor - &radial;
        Ok(TangentSplit { hor: de.hor, ver: de.ver, radial, transverse })
    }

    /// `Σ |dφ(e_i)^ver|²` over a `g^M`-orthonormal basis; at most the fiber
    /// dimension.
    pub fn vertical_hilbert_schmidt(&self, p: &Point, basis: &[Vector]) -> Result<f64> {
        let wp = self.require_warped()?;
        let q = self.map(p)?;
        let g = wp.metric_at(&q)?;
        let j = self.jacobian_raw(p);
        Ok(basis
            .iter()
            .map(|e| {
                let v = SplitVector::vertical(wp.n_base(), wp.split(&(&j * e)).ver).joined();
                inner(&g, &v, &v)
            })
            .sum())
    }
}

/// Map and Jacobian of the hyperspherical parametrization of the round
/// `k`-sphere of radius `a` in `ℝ^{k+1}`.
fn hypersphere(k: usize, a: f64) -> (impl Fn(&Point) -> Point + Clone, impl Fn(&Point) -> DMatrix<f64> + Clone) {
    // coordinate i is a * Π_{j<i} sin t_j * cos t_i; the last one ends in sin
    let factor = move |i: usize, j: usize, t: &Point, diff: bool| -> f64 {
        let (s, c) = t[j].sin_cos();
        if j < i || (i == k && j < k) {
            if diff {
                c
            } else {
                s
            }
        } else if j == i {
            if diff {
                -s
            } else {
                c
            }
        } else {
            f64::NAN
        }
    };
    let map = move |t: &Point| Point::from_fn(k + 1, |i, _| a * (0..=i.min(k - 1)).map(|j| factor(i, j, t, false)).product::<f64>());
    let jac = move |t: &Point| {
        DMatrix::from_fn(k + 1, k, |i, m| {
            if m > i.min(k - 1) {
                return 0.0;
            }
            a * (0..=i.min(k - 1)).map(|j| factor(i, j, t, j == m)).product::<f64>()
        })
    };
    (map, jac)
}

/// The parameter chart of the hyperspherical angles.
pub fn sphere_chart(k: usize) -> ChartDomain {
    let mut bounds = vec![(0.05, std::f64::consts::PI - 0.05); k.saturating_sub(1)];
    bounds.push((-std::f64::consts::PI, std::f64::consts::PI));
    ChartDomain::new(bounds, "hyperspherical angles").expect("valid bounds")
}

/// The round sphere `S^k(a)` centred at `center` in a `(k+1)`-dimensional
/// ambient chart, optionally a warped product.
pub fn sphere_in(ambient: Ambient, k: usize, a: f64, center: Point) -> Result<Immersion> {
    if k == 0 || center.len() != k + 1 {
        return Err(GeoError::DimensionError(format!("sphere of dimension {k} needs a center with {} coordinates", k + 1)));
    }
    let (map, jac) = hypersphere(k, a);
    let name = format!("S{k}({a})");
    let c = center.clone();
    let shifted = move |t: &Point| map(t) + &c;
    let imm = match ambient {
        Ambient::Metric(m) => Immersion::new(name, sphere_chart(k), m, shifted)?,
        Ambient::Warped(w) => Immersion::into_warped(name, sphere_chart(k), w, shifted)?,
    };
    Ok(imm.with_jacobian(jac))
}

/// Ambient of a builtin immersion.
#[derive(Debug, Clone)]
pub enum Ambient {
    Metric(MetricField),
    Warped(WarpedProduct),
}

pub fn sphere_in_euclidean(k: usize, a: f64) -> Immersion {
    sphere_in(Ambient::Metric(MetricField::euclidean(k + 1)), k, a, Point::zeros(k + 1)).expect("consistent dimensions")
}

/// `S^k(a) ⊂ ℝ^k × ℝ` with the last coordinate as fiber.
pub fn sphere_in_product(k: usize, a: f64) -> Immersion {
    let wp = warped::product(MetricField::euclidean(k), MetricField::euclidean(1));
    sphere_in(Ambient::Warped(wp), k, a, Point::zeros(k + 1)).expect("consistent dimensions")
}

/// Circle of radius `a` in the Euclidean plane.
pub fn circle(a: f64) -> Immersion {
    sphere_in_euclidean(1, a)
}

/// Graph `x ↦ (x, h(x))` of a function on `ℝ^n` in `ℝ^{n+1}`.
pub fn graph(height: ScalarField) -> Immersion {
    let n = height.dim();
    let h = height.clone();
    Immersion::new(format!("graph({})", height.name()), ChartDomain::unbounded(n), MetricField::euclidean(n + 1), move |x| {
        let mut q = Point::zeros(n + 1);
        q.rows_mut(0, n).copy_from(x);
        q[n] = h.eval(x);
        q
    })
    .expect("consistent dimensions")
}

/// The identity of an ambient chart, viewed as an immersion.
pub fn identity(ambient: Ambient) -> Immersion {
    let imm = match ambient {
        Ambient::Metric(m) => Immersion::new("identity", m.domain().clone(), m, |p| p.clone()),
        Ambient::Warped(w) => Immersion::into_warped("identity", w.domain(), w, |p| p.clone()),
    }
    .expect("equal dimensions");
    let n = imm.domain_dim();
    imm.with_jacobian(move |_| DMatrix::identity(n, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{riemann, sectional_curvature};
    use crate::sampling::{random_orthogonal, rng};
    use std::f64::consts::PI;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn hypersphere_jacobian_matches_finite_differences() {
        for k in 1..=4 {
            let (map, jac) = hypersphere(k, 0.7);
            let t = Point::from_fn(k, |i, _| 0.4 + 0.3 * i as f64);
            assert!((map(&t).norm() - 0.7).abs() < 1e-14);
            let num = fd::jacobian(&map, &t, 1e-4);
            assert!((num - jac(&t)).amax() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn circle_geometry() {
        let c = circle(1.0);
        let p = pt(&[0.6]);
        assert!((c.induced_metric(&p).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        let s = c.second_fundamental_form(&p, &pt(&[1.0]), &pt(&[1.0])).unwrap();
        assert!((s - pt(&[-(0.6f64).cos(), -(0.6f64).sin()])).amax() < 1e-8);
        assert!((c.mean_curvature_vector(&p).unwrap().norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sphere_is_umbilical_with_round_intrinsic_curvature() {
        let a = 2.0;
        let s = sphere_in_euclidean(2, a);
        let p = pt(&[1.1, 0.3]);
        let q = s.map(&p).unwrap();
        let nu = &q / a;
        let e = pt(&[0.3, -0.8]);
        let g = s.induced_metric(&p).unwrap();
        let sv = s.second_fundamental_form(&p, &e, &e).unwrap();
        assert!((sv + &nu * (inner(&g, &e, &e) / a)).amax() < 1e-7);
        assert!((s.mean_curvature_vector(&p).unwrap().norm() - 2.0 / a).abs() < 1e-7);
        let k = sectional_curvature(&s.induced_metric_field(), &p, &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0]), FdConfig::default()).unwrap();
        assert!((k - 1.0 / (a * a)).abs() < 1e-6);
    }

    #[test]
    fn affine_plane_is_totally_geodesic() {
        let plane = Immersion::new("plane", ChartDomain::unbounded(2), MetricField::euclidean(3), |t| {
            pt(&[t[0] + 2.0 * t[1], t[1] - 1.0, 0.5 * t[0]])
        })
        .unwrap();
        let p = pt(&[0.2, 0.1]);
        let s = plane.second_fundamental_form(&p, &pt(&[1.0, 0.0]), &pt(&[0.3, 1.0])).unwrap();
        assert!(s.amax() < 1e-8);
        assert!(plane.gauss_sectional_defect(&p, &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0])).unwrap().abs() < 1e-8);
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let bad = Immersion::new("fold", ChartDomain::unbounded(1), MetricField::euclidean(2), |t| pt(&[t[0] * t[0], t[0].powi(3)]))
            .unwrap();
        assert!(matches!(bad.induced_metric(&pt(&[0.0])), Err(GeoError::RankDeficient { .. })));
    }

    #[test]
    fn second_fundamental_form_is_symmetric_and_normal() {
        let imm = sphere_in_product(3, 0.5);
        let p = pt(&[0.9, 1.3, 0.4]);
        let (e1, e2) = (pt(&[1.0, 0.2, -0.3]), pt(&[0.1, -0.5, 0.7]));
        let a = imm.second_fundamental_form(&p, &e1, &e2).unwrap();
        let b = imm.second_fundamental_form(&p, &e2, &e1).unwrap();
        assert!((&a - &b).amax() < 1e-7);
        let j = imm.jacobian(&p).unwrap();
        for i in 0..3 {
            assert!(a.dot(&j.column(i)).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_curvature_is_basis_independent() {
        let imm = sphere_in_euclidean(3, 1.3);
        let p = pt(&[0.7, 2.0, -1.0]);
        let frame = imm.tangent_frame(&p).unwrap();
        let h0 = imm.trace_second_fundamental_form(&p, &frame).unwrap();
        let q = random_orthogonal(&mut rng(4, 0), 3);
        let rotated: Vec<Vector> = (0..3).map(|i| (0..3).fold(Vector::zeros(3), |acc, k| acc + &frame[k] * q[(k, i)])).collect();
        let h1 = imm.trace_second_fundamental_form(&p, &rotated).unwrap();
        assert!((h0 - h1).amax() < 1e-8);
        let skewed = vec![frame[0].clone() * 2.0, frame[1].clone(), frame[2].clone()];
        assert!(matches!(imm.trace_second_fundamental_form(&p, &skewed), Err(GeoError::NotOrthonormal { .. })));
    }

    #[test]
    fn composed_hessian_matches_intrinsic_hessian() {
        let s = sphere_in_euclidean(2, 1.0);
        let z = ScalarField::new("z", 3, |q| q[2]);
        let p = pt(&[0.8, 0.4]);
        let direct = hessian(&s.induced_metric_field(), &s.pull_back(&z), &p, FdConfig::default()).unwrap();
        for e in [pt(&[1.0, 0.0]), pt(&[0.0, 1.0]), pt(&[0.6, -0.9])] {
            let h = s.composed_hessian(&z, &p, &e).unwrap();
            assert!((h - (e.transpose() * &direct * &e)[(0, 0)]).abs() < 1e-4);
        }
        let c = circle(1.0);
        let r2 = ScalarField::new("r2", 2, |q| q.norm_squared());
        assert!(c.composed_hessian(&r2, &pt(&[0.3]), &pt(&[1.0])).unwrap().abs() < 1e-7);
    }

    #[test]
    fn composed_gradient_matches_intrinsic_gradient() {
        let s = sphere_in_euclidean(2, 1.0);
        let l = ScalarField::new("xz", 3, |q| q[0] * q[2]);
        let p = pt(&[1.0, 0.5]);
        let direct = crate::geometry::gradient(&s.induced_metric_field(), &s.pull_back(&l), &p, FdConfig::default()).unwrap();
        assert!((s.composed_gradient(&l, &p).unwrap() - direct).amax() < 1e-8);
    }

    #[test]
    fn warped_lift_hessians_agree_with_composition() {
        let wp = warped::polar_plane();
        let helix = Immersion::into_warped("spiral", ChartDomain::new(vec![(-1.0, 1.0)], "t").unwrap(), wp.clone(), |t| {
            pt(&[1.5 + 0.3 * t[0], 0.8 * t[0]])
        })
        .unwrap();
        let angle = ScalarField::coordinate(1, 0);
        let p = pt(&[0.2]);
        let e = pt(&[1.0]);
        let lifted = wp.lift_scalar(&angle, LiftKind::Fiber).unwrap();
        let a = helix.hessian_lift_vertical(&angle, &p, &e).unwrap();
        let b = helix.composed_hessian(&lifted, &p, &e).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");

        let s3 = sphere_in_product(3, 0.5);
        let f = ScalarField::new("rho2", 3, |x| x.norm_squared());
        let lifted = s3.warped().unwrap().lift_scalar(&f, LiftKind::Base).unwrap();
        let p = pt(&[1.0, 2.0, 0.5]);
        let e = pt(&[0.4, -1.0, 0.3]);
        let a = s3.hessian_lift_horizontal(&f, &p, &e).unwrap();
        let b = s3.composed_hessian(&lifted, &p, &e).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn lift_formulas_need_a_warped_ambient() {
        let f = ScalarField::coordinate(1, 0);
        assert_eq!(circle(1.0).hessian_lift_vertical(&f, &pt(&[0.0]), &pt(&[1.0])), Err(GeoError::AmbientNotWarped));
    }

    #[test]
    fn gauss_defect_matches_intrinsic_minus_extrinsic() {
        let s = sphere_in_euclidean(2, 1.0);
        let p = pt(&[1.2, -0.4]);
        let (e1, e2) = (pt(&[1.0, 0.0]), pt(&[0.2, 1.0]));
        let d = s.gauss_sectional_defect(&p, &e1, &e2).unwrap();
        assert!((d - 1.0).abs() < 1e-6);

        let r = 1.0 / 2f64.sqrt();
        let torus = Immersion::new("clifford", ChartDomain::unbounded(2), MetricField::euclidean(4), move |t| {
            pt(&[r * t[0].cos(), r * t[0].sin(), r * t[1].cos(), r * t[1].sin()])
        })
        .unwrap();
        let p = pt(&[0.3, 2.0]);
        let km = riemann(&torus.induced_metric_field(), &p, FdConfig::default()).unwrap().sectional(&e1, &e2).unwrap();
        let d = torus.gauss_sectional_defect(&p, &e1, &e2).unwrap();
        assert!((d - km).abs() < 1e-3 && d.abs() < 1e-6);
        assert!(matches!(torus.gauss_sectional_defect(&p, &e1, &(&e1 * 2.0)), Err(GeoError::DegeneratePlane { .. })));
    }

    #[test]
    fn tangent_split_is_pythagorean() {
        let wp = warped::polar_plane();
        let curve = Immersion::into_warped("c", ChartDomain::new(vec![(-1.0, 1.0)], "t").unwrap(), wp, |t| {
            pt(&[2.0 + 0.5 * t[0].sin(), PI / 4.0 + t[0]])
        })
        .unwrap();
        let rho = DistanceFunction::euclidean(pt(&[0.5]));
        let sp = curve.split_tangent(&pt(&[0.4]), &pt(&[1.0]), &rho).unwrap();
        assert!((sp.hor.norm_squared() - sp.radial.norm_squared() - sp.transverse.norm_squared()).abs() < 1e-10);
        assert!((sp.ver[0] - 1.0).abs() < 1e-9);
        let hs = curve.vertical_hilbert_schmidt(&pt(&[0.4]), &curve.tangent_frame(&pt(&[0.4])).unwrap()).unwrap();
        assert!(hs <= 1.0 + 1e-8);
    }

    #[test]
    fn identity_immersion_restricts_the_ambient_metric() {
        let wp = warped::polar_plane();
        let id = identity(Ambient::Warped(wp.clone()));
        let p = pt(&[1.7, 0.2]);
        assert!((id.induced_metric(&p).unwrap() - wp.metric_at(&p).unwrap()).amax() < 1e-14);
        assert!(id.mean_curvature_vector(&p).unwrap().amax() < 1e-12);
    }
}
