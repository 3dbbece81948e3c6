//! Riemannian submersions `π: 𝓜 → X` given in charts, with O'Neill's
//! tensors `T` and `A` evaluated from covariant derivatives of extended
//! fields.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::estimates::{estimate_extremum, Extremum, Mode, Region};
use crate::geometry::{
    christoffel, fd, gradient, hessian, inner, riemann, Christoffel, FdConfig, MetricField, Point, ScalarField, Vector,
    PLANE_TOLERANCE,
};
use crate::immersion::Immersion;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::sampling::Halton;
use crate::warped::WarpedProduct;

/// Smallest admissible singular value of `dπ`.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Largest admissible deviation from isometry on horizontal vectors.
pub const ISOMETRY_TOLERANCE: f64 = 1e-6;
/// Largest admissible disagreement between two field extensions.
const EXTENSION_TOLERANCE: f64 = 1e-5;

type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub struct RiemannianSubmersion {
    name: String,
    total: MetricField,
    base: MetricField,
    projection: MapFn,
    jacobian: Option<JacobianFn>,
    fd: FdConfig,
}

impl fmt::Debug for RiemannianSubmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiemannianSubmersion")
            .field("name", &self.name)
            .field("total", &self.total.name())
            .field("base", &self.base.name())
            .finish()
    }
}

/// Splitting of a tangent space of the total space at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    pub metric: DMatrix<f64>,
    pub differential: DMatrix<f64>,
    /// `g`-orthogonal projector onto the horizontal space.
    pub horizontal: DMatrix<f64>,
    pub vertical: DMatrix<f64>,
    /// Maps a base vector to its horizontal lift.
    pub lift: DMatrix<f64>,
}

impl RiemannianSubmersion {
    pub fn new(
        name: impl Into<String>,
        total: MetricField,
        base: MetricField,
        projection: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Result<Self> {
        if base.dim() > total.dim() {
            return Err(GeoError::DimensionError(format!("base dimension {} exceeds total dimension {}", base.dim(), total.dim())));
        }
        Ok(RiemannianSubmersion { name: name.into(), total, base, projection: Arc::new(projection), jacobian: None, fd: FdConfig::default() })
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn total(&self) -> &MetricField {
        &self.total
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn n_total(&self) -> usize {
        self.total.dim()
    }

    pub fn n_base(&self) -> usize {
        self.base.dim()
    }

    pub fn n_fiber(&self) -> usize {
        self.n_total() - self.n_base()
    }

    pub fn project_raw(&self, p: &Point) -> Point {
        (self.projection)(p)
    }

    pub fn project(&self, p: &Point) -> Result<Point> {
        self.total.domain().check(p)?;
        let x = self.project_raw(p);
        self.base.domain().check(&x)?;
        Ok(x)
    }

    fn differential_raw(&self, p: &Point) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(p),
            None => fd::jacobian(|q: &Point| self.project_raw(q), p, self.fd.step),
        }
    }

    /// `dπ_p` as an `n_X × n_𝓜` matrix.
    pub fn differential(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.project(p)?;
        Ok(self.differential_raw(p))
    }

    fn splitting_raw(&self, p: &Point) -> Option<Splitting> {
        let g = self.total.raw(p);
        let d = self.differential_raw(p);
        let g_inv = g.clone().try_inverse()?;
        let gram = &d * &g_inv * d.transpose();
        let lift = &g_inv * d.transpose() * gram.try_inverse()?;
        let horizontal = &lift * &d;
        let vertical = DMatrix::identity(p.len(), p.len()) - &horizontal;
        Some(Splitting { metric: g, differential: d, horizontal, vertical, lift })
    }

    pub fn splitting(&self, p: &Point) -> Result<Splitting> {
        self.project(p)?;
        self.total.at(p)?;
        let d = self.differential_raw(p);
        let sigma = d.singular_values().min();
        if !(sigma > RANK_TOLERANCE) {
            return Err(GeoError::NotASubmersion { witness: p.as_slice().to_vec(), reason: format!("dπ loses rank (σ_min = {sigma:e})") });
        }
        self.splitting_raw(p).ok_or_else(|| GeoError::NotASubmersion { witness: p.as_slice().to_vec(), reason: "singular splitting".into() })
    }

    pub fn horizontal(&self, p: &Point, xi: &Vector) -> Result<Vector> {
        Ok(self.splitting(p)?.horizontal * xi)
    }

    pub fn vertical(&self, p: &Point, xi: &Vector) -> Result<Vector> {
        Ok(self.splitting(p)?.vertical * xi)
    }

    /// Horizontal lift of a base vector at `π(p)`.
    pub fn lift(&self, p: &Point, x: &Vector) -> Result<Vector> {
        Ok(self.splitting(p)?.lift * x)
    }

    /// Checks maximal rank of `dπ` and the isometry `dπ G⁻¹ dπᵀ = (g^X)⁻¹` at
    /// each point; the first failure is returned as an error.
    pub fn verify(&self, points: &[Point]) -> Result<SubmersionReport> {
        let mut worst = 0.0f64;
        let mut min_sigma = f64::INFINITY;
        for p in points {
            let x = self.project(p)?;
            let d = self.differential_raw(p);
            let sigma = if d.nrows() == 0 { f64::INFINITY } else { d.singular_values().min() };
            min_sigma = min_sigma.min(sigma);
            if !(sigma > RANK_TOLERANCE) {
                return Err(GeoError::NotASubmersion { witness: p.as_slice().to_vec(), reason: format!("dπ loses rank (σ_min = {sigma:e})") });
            }
            let g_inv = self.total.at(p)?.try_inverse().expect("metric validated as positive definite");
            let gx = self.base.at(&x)?;
            let defect = (&gx * (&d * g_inv * d.transpose()) - DMatrix::identity(d.nrows(), d.nrows())).amax();
            worst = worst.max(defect);
            if defect > ISOMETRY_TOLERANCE {
                return Err(GeoError::NotASubmersion {
                    witness: p.as_slice().to_vec(),
                    reason: format!("not isometric on horizontal vectors (defect {defect:e})"),
                });
            }
        }
        Ok(SubmersionReport { samples: points.len(), max_isometry_defect: worst, min_singular_value: min_sigma })
    }

    /// `[vertical | horizontal | lift]` side by side, NaN off the chart.
    fn stacked_splitting(&self, q: &Point) -> DMatrix<f64> {
        let (n, nb) = (self.n_total(), self.n_base());
        match self.splitting_raw(q) {
            Some(s) => {
                let mut m = DMatrix::zeros(n, 2 * n + nb);
                m.columns_mut(0, n).copy_from(&s.vertical);
                m.columns_mut(n, n).copy_from(&s.horizontal);
                m.columns_mut(2 * n, nb).copy_from(&s.lift);
                m
            }
            None => DMatrix::from_element(n, 2 * n + nb, f64::NAN),
        }
    }

    /// Splitting, Christoffel symbols and coordinate derivatives of the
    /// projectors at `p`, shared by all tensor evaluations there.
    fn local(&self, p: &Point) -> Result<LocalSplitting> {
        let s = self.splitting(p)?;
        let gamma = christoffel(&self.total, p, self.fd)?;
        let partials: Vec<DMatrix<f64>> = (0..self.n_total()).map(|k| fd::partial(|q: &Point| self.stacked_splitting(q), p, k, self.fd.step)).collect();
        if partials.iter().any(|m| m.iter().any(|c| !c.is_finite())) {
            return Err(GeoError::ExtensionFailure("the splitting is not defined around the point".into()));
        }
        Ok(LocalSplitting { s, gamma, partials })
    }

    /// `(∇_u E_ver)^hor + (∇_u E_hor)^ver` for extensions `E` of `eta`, the
    /// horizontal one checked against a second extension.
    fn tensor(&self, p: &Point, u: &Vector, eta: &Vector) -> Result<Vector> {
        self.local(p)?.tensor(u, eta)
    }

    /// `T_ξ η = (∇_{ξ^ver} η^ver)^hor + (∇_{ξ^ver} η^hor)^ver`.
    pub fn tensor_t(&self, p: &Point, xi: &Vector, eta: &Vector) -> Result<Vector> {
        let u = self.vertical(p, xi)?;
        self.tensor(p, &u, eta)
    }

    /// `A_ξ η = (∇_{ξ^hor} η^hor)^ver + (∇_{ξ^hor} η^ver)^hor`.
    pub fn tensor_a(&self, p: &Point, xi: &Vector, eta: &Vector) -> Result<Vector> {
        let u = self.horizontal(p, xi)?;
        self.tensor(p, &u, eta)
    }

    fn require_horizontal(&self, s: &Splitting, v: &Vector) -> Result<()> {
        let off = (&s.vertical * v).amax();
        if off > 1e-8 * (1.0 + v.amax()) {
            return Err(GeoError::KindMismatch(format!("vector is not horizontal (vertical part {off:e})")));
        }
        Ok(())
    }

    /// Both sides of `K_𝓜(X,Y) = K_X(X*,Y*) − 3|A_X Y|²/(|X|²|Y|² − g(X,Y)²)`.
    pub fn horizontal_sectional_curvature(&self, p: &Point, x: &Vector, y: &Vector) -> Result<HorizontalCurvature> {
        let s = self.splitting(p)?;
        self.require_horizontal(&s, x)?;
        self.require_horizontal(&s, y)?;
        let g = &s.metric;
        let gram = inner(g, x, x) * inner(g, y, y) - inner(g, x, y).powi(2);
        if !(gram > PLANE_TOLERANCE) {
            return Err(GeoError::DegeneratePlane { gram });
        }
        let total = riemann(&self.total, p, self.fd)?.sectional(x, y)?;
        let base_point = self.project(p)?;
        let base = riemann(&self.base, &base_point, self.fd)?.sectional(&(&s.differential * x), &(&s.differential * y))?;
        let a = self.tensor_a(p, x, y)?;
        let a_term = 3.0 * inner(g, &a, &a) / gram;
        Ok(HorizontalCurvature { total, base, a_term, residual: total - (base - a_term) })
    }

    /// A `g`-orthonormal basis of the horizontal space.
    pub fn horizontal_frame(&self, p: &Point) -> Result<Vec<Vector>> {
        let s = self.splitting(p)?;
        let lifts: Vec<Vector> = (0..self.n_base()).map(|i| s.lift.column(i).into_owned()).collect();
        Ok(crate::geometry::gram_schmidt(&s.metric, &lifts, 1e-12))
    }

    /// A `g`-orthonormal basis of the vertical space.
    pub fn vertical_frame(&self, p: &Point) -> Result<Vec<Vector>> {
        let s = self.splitting(p)?;
        let cols: Vec<Vector> = (0..self.n_total()).map(|i| s.vertical.column(i).into_owned()).collect();
        Ok(crate::geometry::gram_schmidt(&s.metric, &cols, 1e-7))
    }

    /// Smallest sectional curvature of horizontal planes at `p`.
    pub fn sec_hor(&self, p: &Point) -> Result<f64> {
        if self.n_base() < 2 {
            return Err(GeoError::DimensionError("horizontal planes need a base of dimension at least 2".into()));
        }
        let frame = self.horizontal_frame(p)?;
        Ok(riemann(&self.total, p, self.fd)?.sectional_range(&frame)?.min)
    }

    /// Infimum of `sec_hor` over a region of the total space.
    pub fn sec_hor_min(&self, region: &Region, budget: usize, seed: u64) -> Result<Extremum> {
        if self.n_base() < 2 {
            return Err(GeoError::DimensionError("horizontal planes need a base of dimension at least 2".into()));
        }
        estimate_extremum(|p: &Point| self.sec_hor(p).unwrap_or(f64::NAN), region, Mode::Inf, budget, seed)
    }

    /// `|Hess^𝓜 F^h(X,Y) − Hess^X F(X*,Y*)|` for horizontal `X`, `Y`.
    pub fn basic_hessian_check(&self, f: &ScalarField, p: &Point, x: &Vector, y: &Vector) -> Result<f64> {
        let s = self.splitting(p)?;
        self.require_horizontal(&s, x)?;
        self.require_horizontal(&s, y)?;
        let base_point = self.project(p)?;
        let me = self.clone();
        let lifted = f.compose(self.n_total(), move |q| me.project_raw(q));
        let total = hessian(&self.total, &lifted, p, self.fd)?;
        let base = hessian(&self.base, f, &base_point, self.fd)?;
        let (xs, ys) = (&s.differential * x, &s.differential * y);
        Ok(((x.transpose() * total * y)[(0, 0)] - (xs.transpose() * base * ys)[(0, 0)]).abs())
    }

    /// `F ∘ π`.
    pub fn lift_scalar(&self, f: &ScalarField) -> ScalarField {
        let me = self.clone();
        f.compose(self.n_total(), move |q| me.project_raw(q))
    }

    /// `grad^𝓜 F^h`, the horizontal lift of `grad^X F`.
    pub fn lift_gradient(&self, f: &ScalarField, p: &Point) -> Result<Vector> {
        let x = self.project(p)?;
        self.lift(p, &gradient(&self.base, f, &x, self.fd)?)
    }

    fn check_ambient(&self, imm: &Immersion) -> Result<()> {
        if imm.ambient_dim() != self.n_total() || imm.ambient().name() != self.total.name() {
            return Err(GeoError::AmbientMismatch);
        }
        Ok(())
    }

    /// The Hessian of `F^h ∘ φ` along `e`, split into the base Hessian, the
    /// `A` and `T` terms and the second fundamental form term.
    pub fn hessian_lift(&self, imm: &Immersion, f: &ScalarField, p: &Point, e: &Vector) -> Result<SubmersionHessian> {
        self.check_ambient(imm)?;
        let q = imm.map(p)?;
        let s = self.splitting(&q)?;
        let xi = imm.push_forward(p, e)?;
        let (xh, xv) = (&s.horizontal * &xi, &s.vertical * &xi);
        let x = self.project(&q)?;
        let hx = hessian(&self.base, f, &x, self.fd)?;
        let xs = &s.differential * &xh;
        let base_term = (xs.transpose() * hx * &xs)[(0, 0)];
        let grad = self.lift_gradient(f, &q)?;
        let g = &s.metric;
        let a_term = if xh.amax() > 0.0 && xv.amax() > 0.0 { 2.0 * inner(g, &self.tensor_a(&q, &xh, &grad)?, &xv) } else { 0.0 };
        let t_term = if xv.amax() > 0.0 { inner(g, &self.tensor_t(&q, &xv, &grad)?, &xv) } else { 0.0 };
        let s_term = inner(g, &grad, &imm.second_fundamental_form(p, e, e)?);
        Ok(SubmersionHessian { base_term, a_term, t_term, s_term, total: base_term + a_term + t_term + s_term })
    }

    /// Matrices of `T_{e_i}` and `A_{e_i}` in an orthonormal frame `e`.
    fn tensor_matrices(&self, p: &Point) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
        let local = self.local(p)?;
        let s = &local.s;
        let frame = crate::geometry::orthonormal_frame(&s.metric);
        let n = frame.len();
        let coords = |w: &Vector| Vector::from_fn(n, |k, _| inner(&s.metric, &frame[k], w));
        let mut t = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for ei in &frame {
            let (ver, hor) = (&s.vertical * ei, &s.horizontal * ei);
            let mut mt = DMatrix::zeros(n, n);
            let mut ma = DMatrix::zeros(n, n);
            for (j, ej) in frame.iter().enumerate() {
                mt.set_column(j, &coords(&local.tensor(&ver, ej)?));
                ma.set_column(j, &coords(&local.tensor(&hor, ej)?));
            }
            t.push(mt);
            a.push(ma);
        }
        Ok((t, a))
    }

    /// `(|T|, |A|)` at `p`: the largest operator norm of `T_ξ`, `A_ξ` over
    /// unit `ξ`.
    pub fn tensor_norms(&self, p: &Point) -> Result<(f64, f64)> {
        let (t, a) = self.tensor_matrices(p)?;
        Ok((operator_sup(&t), operator_sup(&a)))
    }

    /// Suprema of `|T|` and `|A|` over a region, typically `π⁻¹(B)`.
    pub fn tensor_sups(&self, region: &Region, budget: usize, seed: u64) -> Result<TensorSups> {
        let tau = estimate_extremum(|p: &Point| self.tensor_norms(p).map_or(f64::NAN, |v| v.0), region, Mode::Sup, budget, seed)?;
        let alpha = estimate_extremum(|p: &Point| self.tensor_norms(p).map_or(f64::NAN, |v| v.1), region, Mode::Sup, budget, seed)?;
        Ok(TensorSups { tau0: tau, alpha0: alpha })
    }
}

/// `sup_{|ξ|=1} σ_max(Σ ξ_i M_i)` by sampling the sphere and refining.
fn operator_sup(ms: &[DMatrix<f64>]) -> f64 {
    let n = ms.len();
    if n == 0 {
        return 0.0;
    }
    let value = |x: &[f64]| {
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return f64::NAN;
        }
        let m = x.iter().zip(ms).fold(DMatrix::zeros(n, n), |acc, (c, m)| acc + m * (*c / norm));
        -m.singular_values().max()
    };
    let mut starts: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
    starts.extend(Halton::new(n, 0x0e11).take(16 * n).map(|u| u.iter().map(|t| 2.0 * t - 1.0).collect()));
    let mut scored: Vec<(f64, Vec<f64>)> = starts.into_iter().map(|s| (value(&s), s)).filter(|(v, _)| v.is_finite()).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let refined = scored
        .par_iter()
        .take(3)
        .map(|(_, s)| nelder_mead(value, s, 0.1, NelderMeadOptions { max_evals: 200 * (n + 1), ..Default::default() }).1)
        .reduce(|| f64::INFINITY, f64::min);
    -(refined.min(scored.first().map_or(0.0, |s| s.0)))
}

struct LocalSplitting {
    s: Splitting,
    gamma: Christoffel,
    /// Coordinate partials of `[vertical | horizontal | lift]`.
    partials: Vec<DMatrix<f64>>,
}

impl LocalSplitting {
    /// Derivative of `[vertical | horizontal | lift]` along `u`.
    fn derivative(&self, u: &Vector) -> DMatrix<f64> {
        let first = &self.partials[0];
        self.partials.iter().zip(u.iter()).fold(DMatrix::zeros(first.nrows(), first.ncols()), |acc, (m, c)| acc + m * *c)
    }

    fn tensor(&self, u: &Vector, eta: &Vector) -> Result<Vector> {
        let s = &self.s;
        let n = s.metric.nrows();
        let nb = s.lift.ncols();
        let (eta_h, eta_v) = (&s.horizontal * eta, &s.vertical * eta);
        let image = &s.differential * &eta_h;
        let d = self.derivative(u);
        // the vertical extension V(q)η_v, the basic one L(q)dπ_p(η_h) and H(q)η_h
        let dv = d.columns(0, n) * &eta_v + self.gamma.contract(u, &eta_v);
        let dh = d.columns(2 * n, nb) * &image + self.gamma.contract(u, &(&s.lift * &image));
        let dh_alt = d.columns(n, n) * &eta_h + self.gamma.contract(u, &eta_h);
        let (a, b) = (&s.vertical * dh, &s.vertical * dh_alt);
        let scale = 1.0 + u.amax() * eta.amax();
        if (&a - &b).amax() > EXTENSION_TOLERANCE * scale || a.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::ExtensionFailure(format!("basic and projected extensions disagree by {:e}", (&a - &b).amax())));
        }
        Ok(&s.horizontal * dv + a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmersionReport {
    pub samples: usize,
    pub max_isometry_defect: f64,
    pub min_singular_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizontalCurvature {
    pub total: f64,
    pub base: f64,
    /// `3|A_X Y|²/(|X|²|Y|² − g(X,Y)²)`.
    pub a_term: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubmersionHessian {
    pub base_term: f64,
    pub a_term: f64,
    pub t_term: f64,
    pub s_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorSups {
    pub tau0: Extremum,
    pub alpha0: Extremum,
}

/// `Σ |L ξ_i|²` for a family `ξ` orthonormal in `g1`, measured in `g2`.
pub fn hilbert_schmidt_sum(map: &DMatrix<f64>, g1: &DMatrix<f64>, g2: &DMatrix<f64>, family: &[Vector]) -> Result<f64> {
    let m = family.len();
    let gram = DMatrix::from_fn(m, m, |a, b| inner(g1, &family[a], &family[b]));
    let deviation = (gram - DMatrix::identity(m, m)).amax();
    if deviation > 1e-10 {
        return Err(GeoError::NotOrthonormal { deviation });
    }
    Ok(family.iter().map(|x| {
        let y = map * x;
        inner(g2, &y, &y)
    })
    .sum())
}

fn coordinate_projection(n_total: usize, start: usize, len: usize) -> (impl Fn(&Point) -> Point + Clone, impl Fn(&Point) -> DMatrix<f64> + Clone) {
    let map = move |p: &Point| p.rows(start, len).into_owned();
    let jac = move |_: &Point| DMatrix::from_fn(len, n_total, |i, j| if j == start + i { 1.0 } else { 0.0 });
    (map, jac)
}

/// `π_X` on a warped product.
pub fn warped(wp: &WarpedProduct) -> RiemannianSubmersion {
    let (map, jac) = coordinate_projection(wp.dim(), 0, wp.n_base());
    RiemannianSubmersion::new(format!("{}-to-base", wp.name()), wp.metric(), wp.base().clone(), map)
        .expect("base is a factor")
        .with_jacobian(jac)
}

/// `π_X` on a product `X × V`.
pub fn product(base: MetricField, fiber: MetricField) -> RiemannianSubmersion {
    warped(&crate::warped::product(base, fiber))
}

/// `π_V` on a warped product, with the fiber metric on the target. Only a
/// Riemannian submersion when `ψ ≡ 1`.
pub fn fiber_projection(wp: &WarpedProduct) -> RiemannianSubmersion {
    let (map, jac) = coordinate_projection(wp.dim(), wp.n_base(), wp.n_fiber());
    RiemannianSubmersion::new(format!("{}-to-fiber", wp.name()), wp.metric(), wp.fiber().clone(), map)
        .expect("fiber is a factor")
        .with_jacobian(jac)
}

/// The identity of a chart, a submersion with zero-dimensional fibers.
pub fn identity(metric: MetricField) -> RiemannianSubmersion {
    let n = metric.dim();
    RiemannianSubmersion::new("identity", metric.clone(), metric, |p| p.clone())
        .expect("equal dimensions")
        .with_jacobian(move |_| DMatrix::identity(n, n))
}

/// The total space of the Hopf fibration `S³ → S²(1/2)` in the chart
/// `(η, ξ1, ξ2) ↦ (sin η e^{iξ1}, cos η e^{iξ2})`, projected to
/// `(θ, φ) = (2η, ξ1 − ξ2)`.
pub fn hopf_chart() -> RiemannianSubmersion {
    use crate::geometry::ChartDomain;
    use std::f64::consts::PI;
    let total_dom = ChartDomain::new(vec![(0.0, PI / 2.0), (-2.0 * PI, 2.0 * PI), (-2.0 * PI, 2.0 * PI)], "Hopf coordinates").expect("valid bounds");
    let total = MetricField::diagonal("unit-S3", total_dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2), p[0].cos().powi(2)]));
    let base_dom = ChartDomain::new(vec![(0.0, PI), (-4.0 * PI, 4.0 * PI)], "colatitude, longitude").expect("valid bounds");
    let base = MetricField::diagonal("S2(1/2)", base_dom, |x| Vector::from_vec(vec![0.25, 0.25 * x[0].sin().powi(2)]));
    RiemannianSubmersion::new("hopf-chart", total, base, |p| Point::from_vec(vec![2.0 * p[0], p[1] - p[2]]))
        .expect("dimensions 3 and 2")
        .with_jacobian(|_| DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, -1.0]))
}

/// Deterministic sample points of a region, for the pointwise checks.
pub fn region_points(region: &Region, count: usize, seed: u64) -> Vec<Point> {
    Halton::new(region.dim(), seed).take(count * 4).filter_map(|u| region.locate(&region.from_unit(&u))).take(count).collect()
}
