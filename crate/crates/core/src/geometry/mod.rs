//! Chart-based Riemannian geometry evaluated by finite differences.
//!
//! Everything here works on a single coordinate chart. Metrics, scalar
//! fields and vector fields are plain closures over chart coordinates; the
//! connection, curvature and differential operators are derived from them
//! numerically. This is the independent reference against which the
//! closed-form warped-product and submersion formulas are checked.

mod calculus;
mod curvature;
pub mod fd;
mod geodesic;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};

pub use calculus::{covariant_derivative, divergence, gradient, hessian, laplacian};
pub use curvature::{christoffel, riemann, scalar_curvature, sectional_curvature, Christoffel, RiemannTensor, SectionalRange};
pub use geodesic::{distance, geodesic_flow, geodesic_shoot, shoot_to, DistanceFunction, GeodesicConfig};

/// Coordinates of a point in a chart.
pub type Point = DVector<f64>;
/// Components of a tangent vector in the coordinate frame.
pub type Vector = DVector<f64>;

/// Smallest admissible metric eigenvalue.
pub const PD_TOLERANCE: f64 = 1e-10;
/// Smallest admissible Gram determinant of a 2-plane.
pub const PLANE_TOLERANCE: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Finite-difference configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step: 1e-4 }
    }
}

impl FdConfig {
    pub fn with_step(step: f64) -> Self {
        FdConfig { step }
    }
}

/// A box of open coordinate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    bounds: Vec<(f64, f64)>,
    description: String,
}

impl ChartDomain {
    pub fn new(bounds: Vec<(f64, f64)>, description: impl Into<String>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(GeoError::DimensionError("chart dimension must be at least 1".into()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(GeoError::DimensionError(format!("empty chart interval ({lo}, {hi})")));
        }
        Ok(ChartDomain { bounds, description: description.into() })
    }

    /// The whole of R^dim.
    pub fn unbounded(dim: usize) -> Self {
        ChartDomain {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); dim.max(1)],
            description: format!("R^{dim}"),
        }
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

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.bounds).all(|(x, (lo, hi))| x > lo && x < hi)
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeoError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        if !self.contains(p.as_slice()) {
            return Err(GeoError::OutOfChart { point: p.as_slice().to_vec() });
        }
        Ok(())
    }

    /// Cartesian product, `self` coordinates first.
    pub fn product(&self, other: &ChartDomain) -> ChartDomain {
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        ChartDomain { bounds, description: format!("{} x {}", self.description, other.description) }
    }
}

pub(crate) type MatrixFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;
pub(crate) type RealFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub(crate) type VectorFn = Arc<dyn Fn(&Point) -> Vector + Send + Sync>;

/// A Riemannian metric given by its coordinate matrix.
#[derive(Clone)]
pub struct MetricField {
    name: String,
    domain: ChartDomain,
    g: MatrixFn,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl MetricField {
    pub fn new(
        name: impl Into<String>,
        domain: ChartDomain,
        g: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        MetricField { name: name.into(), domain, g: Arc::new(g) }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::euclidean_on(ChartDomain::unbounded(dim))
    }

    pub fn euclidean_on(domain: ChartDomain) -> Self {
        let n = domain.dim();
        MetricField::new(format!("euclidean-{n}"), domain, move |_| DMatrix::identity(n, n))
    }

    /// Metric whose matrix is diagonal with the given entries.
    pub fn diagonal(
        name: impl Into<String>,
        domain: ChartDomain,
        diag: impl Fn(&Point) -> Vector + Send + Sync + 'static,
    ) -> Self {
        MetricField::new(name, domain, move |p| DMatrix::from_diagonal(&diag(p)))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    /// Unchecked evaluation, used inside difference stencils.
    #[inline]
    pub fn raw(&self, p: &Point) -> DMatrix<f64> {
        (self.g)(p)
    }

    /// Checked evaluation: point in chart, matrix finite, symmetric and
    /// positive definite.
    pub fn at(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.domain.check(p)?;
        let g = self.raw(p);
        validate_metric_matrix(&g, p)?;
        Ok(g)
    }

    pub fn inner(&self, p: &Point, u: &Vector, v: &Vector) -> Result<f64> {
        Ok(inner(&self.at(p)?, u, v))
    }

    pub fn norm(&self, p: &Point, u: &Vector) -> Result<f64> {
        Ok(self.inner(p, u, u)?.max(0.0).sqrt())
    }
}

pub(crate) fn validate_metric_matrix(g: &DMatrix<f64>, p: &Point) -> Result<()> {
    let n = p.len();
    if g.nrows() != n || g.ncols() != n {
        return Err(GeoError::DimensionMismatch { expected: n, got: g.nrows() });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::NonFinite { point: p.as_slice().to_vec() });
    }
    let scale = g.amax().max(1.0);
    let asym = (g - g.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(GeoError::AsymmetricMetric { point: p.as_slice().to_vec(), asymmetry: asym });
    }
    let min_eig = g.clone().symmetric_eigenvalues().min();
    if !(min_eig > PD_TOLERANCE) {
        return Err(GeoError::SingularMetric { point: p.as_slice().to_vec(), min_eigenvalue: min_eig });
    }
    Ok(())
}

/// g(u, v) for a metric matrix g.
#[inline]
pub fn inner(g: &DMatrix<f64>, u: &Vector, v: &Vector) -> f64 {
    (u.transpose() * g * v)[(0, 0)]
}

/// A real function on a chart.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    dim: usize,
    f: RealFn,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, dim: usize, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { name: name.into(), dim, f: Arc::new(f) }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField::new(format!("{value}"), dim, move |_| value)
    }

    /// The i-th coordinate function.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        ScalarField::new(format!("x{i}"), dim, move |p| p[i])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }

    /// Value at p, rejecting non-finite results.
    pub fn value(&self, p: &Point) -> Result<f64> {
        let v = self.eval(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeoError::NonFinite { point: p.as_slice().to_vec() })
        }
    }

    /// `self ∘ map`, where `map` goes from a `dim`-dimensional chart.
    pub fn compose(&self, dim: usize, map: impl Fn(&Point) -> Point + Send + Sync + 'static) -> ScalarField {
        let f = self.f.clone();
        ScalarField::new(format!("{}∘map", self.name), dim, move |p| f(&map(p)))
    }
}

/// A vector field on a chart, valued in coordinate components.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    f: VectorFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.dim).finish()
    }
}

impl VectorField {
    pub fn new(dim: usize, f: impl Fn(&Point) -> Vector + Send + Sync + 'static) -> Self {
        VectorField { dim, f: Arc::new(f) }
    }

    /// Field with the same coordinate components everywhere.
    pub fn constant(v: Vector) -> Self {
        let dim = v.len();
        VectorField::new(dim, move |_| v.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> Vector {
        (self.f)(p)
    }
}

/// Gram–Schmidt in the inner product `g`, dropping vectors whose residual
/// norm falls below `tol`.
pub fn gram_schmidt(g: &DMatrix<f64>, vectors: &[Vector], tol: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = inner(g, b, &w);
                w -= b * c;
            }
        }
        let n = inner(g, &w, &w).max(0.0).sqrt();
        if n > tol {
            basis.push(w / n);
        }
    }
    basis
}

/// Orthonormal basis of the whole tangent space built from the coordinate
/// frame in its natural order.
pub fn orthonormal_frame(g: &DMatrix<f64>) -> Vec<Vector> {
    let n = g.nrows();
    let coords: Vec<Vector> = (0..n).map(|i| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
    gram_schmidt(g, &coords, 1e-300)
}

/// Basis of the null space of `m` (columns with singular value below `tol`
/// relative to the largest one).
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<Vector> {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return (0..ncols).map(|i| Vector::from_fn(ncols, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
    }
    // pad to square so the SVD returns a full right-singular basis
    let mut a = DMatrix::zeros(m.nrows().max(ncols), ncols);
    a.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(1e-300);
    (0..ncols)
        .filter(|&i| svd.singular_values[i] <= tol * smax)
        .map(|i| v_t.row(i).transpose())
        .collect()
}

pub(crate) fn unit(n: usize, i: usize) -> Vector {
    Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}
