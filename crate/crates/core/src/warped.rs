//! Closed-form calculus on a warped product `X ×_ψ V` with metric
//! `g^X + ψ² g^V`.
//!
//! Points and vectors on the product use base coordinates first and fiber
//! coordinates second. Basic fields are stored on their own factor and
//! lifted by ignoring the other block of coordinates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{
    covariant_derivative, divergence, fd, gradient, hessian, inner, laplacian, ChartDomain, FdConfig, MetricField, Point,
    ScalarField, Vector, VectorField,
};

/// Which factor a lifted function or basic field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftKind {
    Base,
    Fiber,
}

/// A tangent vector of the product split into its base and fiber blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector {
    pub hor: Vector,
    pub ver: Vector,
}

impl SplitVector {
    pub fn new(hor: Vector, ver: Vector) -> Self {
        SplitVector { hor, ver }
    }

    pub fn horizontal(hor: Vector, n_fiber: usize) -> Self {
        SplitVector { hor, ver: Vector::zeros(n_fiber) }
    }

    pub fn vertical(n_base: usize, ver: Vector) -> Self {
        SplitVector { hor: Vector::zeros(n_base), ver }
    }

    pub fn joined(&self) -> Vector {
        let mut v = Vector::zeros(self.hor.len() + self.ver.len());
        v.rows_mut(0, self.hor.len()).copy_from(&self.hor);
        v.rows_mut(self.hor.len(), self.ver.len()).copy_from(&self.ver);
        v
    }
}

#[derive(Debug, Clone)]
pub struct WarpedProduct {
    name: String,
    base: MetricField,
    fiber: MetricField,
    psi: ScalarField,
    fd: FdConfig,
}

impl WarpedProduct {
    pub fn new(name: impl Into<String>, base: MetricField, fiber: MetricField, psi: ScalarField) -> Result<Self> {
        if psi.dim() != base.dim() {
            return Err(GeoError::DimensionMismatch { expected: base.dim(), got: psi.dim() });
        }
        Ok(WarpedProduct { name: name.into(), base, fiber, psi, fd: FdConfig::default() })
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn fiber(&self) -> &MetricField {
        &self.fiber
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn fd(&self) -> FdConfig {
        self.fd
    }

    pub fn n_base(&self) -> usize {
        self.base.dim()
    }

    pub fn n_fiber(&self) -> usize {
        self.fiber.dim()
    }

    pub fn dim(&self) -> usize {
        self.n_base() + self.n_fiber()
    }

    pub fn domain(&self) -> ChartDomain {
        self.base.domain().product(self.fiber.domain())
    }

    pub fn split_point(&self, p: &Point) -> (Point, Point) {
        (p.rows(0, self.n_base()).into_owned(), p.rows(self.n_base(), self.n_fiber()).into_owned())
    }

    pub fn join_point(&self, x: &Point, v: &Point) -> Point {
        SplitVector::new(x.clone(), v.clone()).joined()
    }

    pub fn split(&self, v: &Vector) -> SplitVector {
        let (hor, ver) = self.split_point(v);
        SplitVector { hor, ver }
    }

    /// `ψ(x)`, rejecting non-positive values.
    pub fn warp(&self, x: &Point) -> Result<f64> {
        let value = self.psi.value(x)?;
        if value <= 0.0 {
            return Err(GeoError::NonpositiveWarp { point: x.as_slice().to_vec(), value });
        }
        Ok(value)
    }

    fn check_point(&self, p: &Point) -> Result<(Point, Point, f64)> {
        if p.len() != self.dim() {
            return Err(GeoError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        let (x, v) = self.split_point(p);
        self.base.domain().check(&x)?;
        self.fiber.domain().check(&v)?;
        let psi = self.warp(&x)?;
        Ok((x, v, psi))
    }

    /// The block-diagonal product metric `diag(g^X, ψ² g^V)`. Where ψ is not
    /// positive the matrix is NaN, which checked evaluation rejects.
    pub fn metric(&self) -> MetricField {
        let (nx, nv) = (self.n_base(), self.n_fiber());
        let (base, fiber, psi) = (self.base.clone(), self.fiber.clone(), self.psi.clone());
        MetricField::new(format!("{}-metric", self.name), self.domain(), move |p| {
            let x = p.rows(0, nx).into_owned();
            let v = p.rows(nx, nv).into_owned();
            let w = psi.eval(&x);
            let mut g = DMatrix::zeros(nx + nv, nx + nv);
            if !(w > 0.0) {
                g.fill(f64::NAN);
                return g;
            }
            g.view_mut((0, 0), (nx, nx)).copy_from(&base.raw(&x));
            g.view_mut((nx, nx), (nv, nv)).copy_from(&(fiber.raw(&v) * (w * w)));
            g
        })
    }

    /// Checked metric matrix at `p`.
    pub fn metric_at(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        self.metric().at(p)
    }

    pub fn norm(&self, p: &Point, v: &SplitVector) -> Result<f64> {
        let g = self.metric_at(p)?;
        let j = v.joined();
        Ok(inner(&g, &j, &j).max(0.0).sqrt())
    }

    /// `grad^X ψ / ψ` at a base point.
    pub fn log_warp_gradient(&self, x: &Point) -> Result<Vector> {
        let w = self.warp(x)?;
        Ok(gradient(&self.base, &self.psi, x, self.fd)? / w)
    }

    /// `X(ψ)/ψ` for a base vector `X`.
    fn log_warp_derivative(&self, x: &Point, dir: &Vector) -> Result<f64> {
        let w = self.warp(x)?;
        let d: f64 = fd::directional(|q: &Point| self.psi.eval(q), x, dir, self.fd.step);
        Ok(d / w)
    }

    /// Covariant derivative of an h-basic field along a v-basic one (equal
    /// to the reverse order, the bracket being zero): `(X(ψ)/ψ) V`.
    pub fn connection_mixed(&self, p: &Point, x_vec: &Vector, v_vec: &Vector) -> Result<SplitVector> {
        let (x, _, _) = self.check_point(p)?;
        let k = self.log_warp_derivative(&x, x_vec)?;
        Ok(SplitVector::vertical(self.n_base(), v_vec * k))
    }

    /// `∇_V W` for v-basic fields: fiber connection vertically, and
    /// `−g(V,W) grad ψ/ψ` horizontally.
    pub fn connection_vertical(&self, p: &Point, v_field: &VectorField, w_field: &VectorField) -> Result<SplitVector> {
        let (x, v, psi) = self.check_point(p)?;
        self.check_kind(v_field, LiftKind::Fiber)?;
        self.check_kind(w_field, LiftKind::Fiber)?;
        let (vv, ww) = (v_field.eval(&v), w_field.eval(&v));
        let ver = covariant_derivative(&self.fiber, w_field, &v, &vv, self.fd)?;
        let gm = psi * psi * self.fiber.inner(&v, &vv, &ww)?;
        Ok(SplitVector::new(self.log_warp_gradient(&x)? * (-gm), ver))
    }

    /// `∇_X Y` for h-basic fields, which stays horizontal: the slices
    /// `X × {v}` are totally geodesic.
    pub fn connection_horizontal(&self, p: &Point, x_field: &VectorField, y_field: &VectorField) -> Result<SplitVector> {
        let (x, _, _) = self.check_point(p)?;
        self.check_kind(x_field, LiftKind::Base)?;
        self.check_kind(y_field, LiftKind::Base)?;
        let hor = covariant_derivative(&self.base, y_field, &x, &x_field.eval(&x), self.fd)?;
        Ok(SplitVector::horizontal(hor, self.n_fiber()))
    }

    /// Second fundamental form of the fiber through `p`, as a base vector.
    pub fn fiber_second_fundamental_form(&self, p: &Point, v_vec: &Vector, w_vec: &Vector) -> Result<Vector> {
        let (x, v, psi) = self.check_point(p)?;
        let gm = psi * psi * self.fiber.inner(&v, v_vec, w_vec)?;
        Ok(self.log_warp_gradient(&x)? * (-gm))
    }

    /// Mean curvature vector of the fiber through `p` (unnormalized trace).
    pub fn fiber_mean_curvature(&self, p: &Point) -> Result<Vector> {
        let (x, _, _) = self.check_point(p)?;
        Ok(self.log_warp_gradient(&x)? * -(self.n_fiber() as f64))
    }

    fn factor_dim(&self, kind: LiftKind) -> usize {
        match kind {
            LiftKind::Base => self.n_base(),
            LiftKind::Fiber => self.n_fiber(),
        }
    }

    fn check_kind(&self, field: &VectorField, kind: LiftKind) -> Result<()> {
        if field.dim() != self.factor_dim(kind) {
            return Err(GeoError::KindMismatch(format!(
                "{kind:?}-basic field must have dimension {}, got {}",
                self.factor_dim(kind),
                field.dim()
            )));
        }
        Ok(())
    }

    fn check_scalar_kind(&self, f: &ScalarField, kind: LiftKind) -> Result<()> {
        if f.dim() != self.factor_dim(kind) {
            return Err(GeoError::KindMismatch(format!(
                "{kind:?} function must have dimension {}, got {}",
                self.factor_dim(kind),
                f.dim()
            )));
        }
        Ok(())
    }

    /// `F^h = F ∘ π_X` or `G^v = G ∘ π_V` as a function on the product.
    pub fn lift_scalar(&self, f: &ScalarField, kind: LiftKind) -> Result<ScalarField> {
        self.check_scalar_kind(f, kind)?;
        let (nx, nv) = (self.n_base(), self.n_fiber());
        Ok(match kind {
            LiftKind::Base => f.compose(nx + nv, move |p| p.rows(0, nx).into_owned()),
            LiftKind::Fiber => f.compose(nx + nv, move |p| p.rows(nx, nv).into_owned()),
        })
    }

    /// The basic field on the product determined by a field on one factor.
    pub fn lift_field(&self, field: &VectorField, kind: LiftKind) -> Result<VectorField> {
        self.check_kind(field, kind)?;
        let (nx, nv) = (self.n_base(), self.n_fiber());
        let field = field.clone();
        Ok(VectorField::new(nx + nv, move |p| match kind {
            LiftKind::Base => SplitVector::horizontal(field.eval(&p.rows(0, nx).into_owned()), nv).joined(),
            LiftKind::Fiber => SplitVector::vertical(nx, field.eval(&p.rows(nx, nv).into_owned())).joined(),
        }))
    }

    pub fn divergence_lift(&self, p: &Point, field: &VectorField, kind: LiftKind) -> Result<f64> {
        let (x, v, _) = self.check_point(p)?;
        self.check_kind(field, kind)?;
        match kind {
            LiftKind::Base => {
                let div = divergence(&self.base, field, &x, self.fd)?;
                Ok(div + self.n_fiber() as f64 * self.log_warp_derivative(&x, &field.eval(&x))?)
            }
            LiftKind::Fiber => divergence(&self.fiber, field, &v, self.fd),
        }
    }

    pub fn lift_gradient(&self, p: &Point, f: &ScalarField, kind: LiftKind) -> Result<SplitVector> {
        let (x, v, psi) = self.check_point(p)?;
        self.check_scalar_kind(f, kind)?;
        Ok(match kind {
            LiftKind::Base => SplitVector::horizontal(gradient(&self.base, f, &x, self.fd)?, self.n_fiber()),
            LiftKind::Fiber => SplitVector::vertical(self.n_base(), gradient(&self.fiber, f, &v, self.fd)? / (psi * psi)),
        })
    }

    /// Hessian of a lifted function on a pair of product vectors, assembled
    /// from the six block cases.
    pub fn lift_hessian(&self, p: &Point, f: &ScalarField, kind: LiftKind, xi: &SplitVector, eta: &SplitVector) -> Result<f64> {
        let (x, v, psi) = self.check_point(p)?;
        self.check_scalar_kind(f, kind)?;
        match kind {
            LiftKind::Base => {
                let hx = hessian(&self.base, f, &x, self.fd)?;
                let hh = (xi.hor.transpose() * &hx * &eta.hor)[(0, 0)];
                let grad_f = gradient(&self.base, f, &x, self.fd)?;
                let coupling = self.base.inner(&x, &grad_f, &self.log_warp_gradient(&x)?)?;
                let vv = psi * psi * self.fiber.inner(&v, &xi.ver, &eta.ver)?;
                Ok(hh + coupling * vv)
            }
            LiftKind::Fiber => {
                let hv = hessian(&self.fiber, f, &v, self.fd)?;
                let vv = (xi.ver.transpose() * &hv * &eta.ver)[(0, 0)];
                let dg = fd::differential(|q: &Point| f.eval(q), &v, self.fd.step);
                let mixed = self.log_warp_derivative(&x, &xi.hor)? * dg.dot(&eta.ver)
                    + self.log_warp_derivative(&x, &eta.hor)? * dg.dot(&xi.ver);
                Ok(vv - mixed)
            }
        }
    }

    pub fn lift_laplacian(&self, p: &Point, f: &ScalarField, kind: LiftKind) -> Result<f64> {
        let (x, v, psi) = self.check_point(p)?;
        self.check_scalar_kind(f, kind)?;
        match kind {
            LiftKind::Base => {
                let grad_f = gradient(&self.base, f, &x, self.fd)?;
                let coupling = self.base.inner(&x, &grad_f, &self.log_warp_gradient(&x)?)?;
                Ok(laplacian(&self.base, f, &x, self.fd)? + self.n_fiber() as f64 * coupling)
            }
            LiftKind::Fiber => Ok(laplacian(&self.fiber, f, &v, self.fd)? / (psi * psi)),
        }
    }
}

/// `X × V` with `ψ ≡ 1`.
pub fn product(base: MetricField, fiber: MetricField) -> WarpedProduct {
    let psi = ScalarField::constant(base.dim(), 1.0);
    let name = format!("{}x{}", base.name(), fiber.name());
    WarpedProduct::new(name, base, fiber, psi).expect("dimensions agree by construction")
}

/// The flat plane in polar coordinates: `dr² + r² dφ²`.
pub fn polar_plane() -> WarpedProduct {
    let base = MetricField::euclidean_on(ChartDomain::new(vec![(0.0, f64::INFINITY)], "r > 0").expect("valid bounds"));
    let fiber = MetricField::euclidean_on(ChartDomain::new(vec![(-PI, PI)], "angle").expect("valid bounds"));
    WarpedProduct::new("polar-plane", base, fiber, ScalarField::new("r", 1, |x| x[0])).expect("dimensions agree")
}

/// Flat three-space in spherical coordinates: `dr² + r² g_{S²}`.
pub fn polar_space() -> WarpedProduct {
    let base = MetricField::euclidean_on(ChartDomain::new(vec![(0.0, f64::INFINITY)], "r > 0").expect("valid bounds"));
    let sphere = ChartDomain::new(vec![(0.0, PI), (-PI, PI)], "colatitude, longitude").expect("valid bounds");
    let fiber = MetricField::diagonal("round-S2", sphere, |v| Vector::from_vec(vec![1.0, v[0].sin().powi(2)]));
    WarpedProduct::new("polar-space", base, fiber, ScalarField::new("r", 1, |x| x[0])).expect("dimensions agree")
}

/// The hyperbolic plane as `dt² + e^{2t} ds²`.
pub fn hyperbolic_as_warped() -> WarpedProduct {
    WarpedProduct::new(
        "hyperbolic-as-warped",
        MetricField::euclidean(1),
        MetricField::euclidean(1),
        ScalarField::new("exp(t)", 1, |x| x[0].exp()),
    )
    .expect("dimensions agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{covariant_derivative, riemann, sectional_curvature};

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn assembled_metrics_match_closed_forms() {
        let g = polar_plane().metric_at(&pt(&[2.0, 0.4])).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        let h = hyperbolic_as_warped();
        let k = sectional_curvature(&h.metric(), &pt(&[0.3, 1.0]), &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0]), h.fd()).unwrap();
        assert!((k + 1.0).abs() < 1e-6);
        let r = riemann(&polar_plane().metric(), &pt(&[1.5, 0.0]), FdConfig::default()).unwrap();
        assert!(r.component(0, 1, 0, 1).abs() < 1e-7);
    }

    #[test]
    fn nonpositive_warp_is_rejected() {
        let wp = WarpedProduct::new("bad", MetricField::euclidean(1), MetricField::euclidean(1), ScalarField::new("x", 1, |x| x[0])).unwrap();
        assert!(matches!(wp.metric_at(&pt(&[-1.0, 0.0])), Err(GeoError::NonpositiveWarp { .. })));
        assert!(wp.metric().at(&pt(&[-1.0, 0.0])).is_err());
    }

    #[test]
    fn mixed_connection_in_polar_coordinates() {
        let wp = polar_plane();
        let p = pt(&[2.0, 0.3]);
        let c = wp.connection_mixed(&p, &pt(&[1.0]), &pt(&[1.0])).unwrap();
        assert!((c.ver[0] - 0.5).abs() < 1e-10 && c.hor[0] == 0.0);
        // oracle: ∇_{∂φ} ∂r on the assembled metric
        let radial = VectorField::constant(pt(&[1.0, 0.0]));
        let o = covariant_derivative(&wp.metric(), &radial, &p, &pt(&[0.0, 1.0]), wp.fd()).unwrap();
        assert!((o - c.joined()).amax() < 1e-9);
    }

    #[test]
    fn vertical_connection_in_polar_and_hyperbolic() {
        let wp = polar_plane();
        let e = VectorField::constant(pt(&[1.0]));
        let c = wp.connection_vertical(&pt(&[2.0, 0.1]), &e, &e).unwrap();
        assert!((c.hor[0] + 2.0).abs() < 1e-9 && c.ver[0].abs() < 1e-12);
        let c = hyperbolic_as_warped().connection_vertical(&pt(&[0.0, 0.0]), &e, &e).unwrap();
        assert!((c.hor[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn fiber_geometry() {
        let wp = polar_plane();
        // unit vertical vector at r = 2 is (1/2) ∂φ
        let s = wp.fiber_second_fundamental_form(&pt(&[2.0, 0.0]), &pt(&[0.5]), &pt(&[0.5])).unwrap();
        assert!((s[0] + 0.5).abs() < 1e-9);
        let h = polar_space().fiber_mean_curvature(&pt(&[3.0, 1.0, 0.0])).unwrap();
        assert!((h[0].abs() - 2.0 / 3.0).abs() < 1e-9);
        let bump = WarpedProduct::new(
            "bump",
            MetricField::euclidean(1),
            MetricField::euclidean(1),
            ScalarField::new("2+cos", 1, |x| 2.0 + x[0].cos()),
        )
        .unwrap();
        let s = bump.fiber_second_fundamental_form(&pt(&[0.0, 0.0]), &pt(&[1.0]), &pt(&[1.0])).unwrap();
        assert!(s[0].abs() < 1e-12);
    }

    #[test]
    fn lifted_calculus_in_polar_coordinates() {
        let wp = polar_plane();
        let p = pt(&[2.0, 0.7]);
        let r = ScalarField::coordinate(1, 0);
        assert!((wp.divergence_lift(&p, &VectorField::constant(pt(&[1.0])), LiftKind::Base).unwrap() - 0.5).abs() < 1e-9);
        let angle = ScalarField::coordinate(1, 0);
        let g = wp.lift_gradient(&p, &angle, LiftKind::Fiber).unwrap();
        assert!((g.ver[0] - 0.25).abs() < 1e-9);
        let vv = SplitVector::vertical(1, pt(&[1.0]));
        assert!((wp.lift_hessian(&p, &r, LiftKind::Base, &vv, &vv).unwrap() - 2.0).abs() < 1e-8);
        assert!((wp.lift_laplacian(&p, &r, LiftKind::Base).unwrap() - 0.5).abs() < 1e-8);
        let sin = ScalarField::new("sin", 1, |v| v[0].sin());
        assert!((wp.lift_laplacian(&p, &sin, LiftKind::Fiber).unwrap() + 0.7f64.sin() / 4.0).abs() < 1e-8);
    }

    #[test]
    fn mixed_hessian_of_fiber_lift() {
        let wp = hyperbolic_as_warped();
        let s = ScalarField::coordinate(1, 0);
        let x = SplitVector::horizontal(pt(&[1.0]), 1);
        let v = SplitVector::vertical(1, pt(&[1.0]));
        let h = wp.lift_hessian(&pt(&[0.0, 0.3]), &s, LiftKind::Fiber, &x, &v).unwrap();
        assert!((h + 1.0).abs() < 1e-9);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let wp = polar_space();
        let wrong = VectorField::constant(pt(&[1.0, 0.0]));
        assert!(matches!(wp.divergence_lift(&pt(&[1.0, 1.0, 0.0]), &wrong, LiftKind::Base), Err(GeoError::KindMismatch(_))));
    }
}
