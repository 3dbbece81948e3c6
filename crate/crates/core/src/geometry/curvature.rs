use nalgebra::DMatrix;

use super::{fd, inner, FdConfig, MetricField, Point, Vector, PLANE_TOLERANCE};
use crate::error::{GeoError, Result};

/// Christoffel symbols of the second kind, `Γ^k_{ij}`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    data: Vector,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^k_{ij}`.
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// The vector `Γ(u, v)^k = Γ^k_{ij} u^i v^j`.
    pub fn contract(&self, u: &Vector, v: &Vector) -> Vector {
        let n = self.dim;
        Vector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.get(k, i, j) * u[i] * v[j];
                }
            }
            s
        })
    }
}

/// Raw symbol array, no validation, for use inside stencils.
pub(crate) fn christoffel_data(metric: &MetricField, p: &Point, h: f64) -> Vector {
    let n = p.len();
    let g = metric.raw(p);
    let g_inv = g.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let dg: Vec<DMatrix<f64>> = (0..n).map(|l| fd::partial(|q: &Point| metric.raw(q), p, l, h)).collect();
    let mut data = Vector::zeros(n * n * n);
    for i in 0..n {
        for j in 0..=i {
            // lowered symbol Γ_{l,ij}
            let lowered = Vector::from_fn(n, |l, _| 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]));
            let raised = &g_inv * lowered;
            for k in 0..n {
                data[(k * n + i) * n + j] = raised[k];
                data[(k * n + j) * n + i] = raised[k];
            }
        }
    }
    data
}

/// Levi-Civita Christoffel symbols at `p` by central differences of the
/// metric.
pub fn christoffel(metric: &MetricField, p: &Point, cfg: FdConfig) -> Result<Christoffel> {
    metric.at(p)?;
    let data = christoffel_data(metric, p, cfg.step);
    if data.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::NonFinite { point: p.as_slice().to_vec() });
    }
    Ok(Christoffel { dim: p.len(), data })
}

/// Fully covariant curvature tensor at a point, with the metric there.
///
/// Convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` and
/// `R_{ijkl} = g(R(∂_i, ∂_j)∂_l, ∂_k)`, so `K(u,v) = R(u,v,u,v)/|u∧v|²`
/// and the round sphere has `R_{θφθφ} = sin²θ`.
#[derive(Debug, Clone)]
pub struct RiemannTensor {
    dim: usize,
    data: Vec<f64>,
    metric: DMatrix<f64>,
}

impl RiemannTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    #[inline]
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.data[((i * n + j) * n + k) * n + l]
    }

    /// `R(a, b, c, d) = g(R(a,b)d, c)`.
    pub fn eval(&self, a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ab = a[i] * b[j];
                if ab == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        s += self.component(i, j, k, l) * ab * c[k] * d[l];
                    }
                }
            }
        }
        s
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &Vector, v: &Vector) -> Result<f64> {
        let gram = inner(&self.metric, u, u) * inner(&self.metric, v, v) - inner(&self.metric, u, v).powi(2);
        if !(gram > PLANE_TOLERANCE) {
            return Err(GeoError::DegeneratePlane { gram });
        }
        Ok(self.eval(u, v, u, v) / gram)
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.dim;
        let g_inv = self.metric.clone().try_inverse().expect("metric validated on construction");
        DMatrix::from_fn(n, n, |j, l| {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += g_inv[(i, k)] * self.component(i, j, k, l);
                }
            }
            s
        })
    }

    pub fn scalar(&self) -> f64 {
        let g_inv = self.metric.clone().try_inverse().expect("metric validated on construction");
        (g_inv.transpose().component_mul(&self.ricci())).sum()
    }
}

/// Curvature tensor by differentiating the numerically computed
/// Christoffel symbols once more.
pub fn riemann(metric: &MetricField, p: &Point, cfg: FdConfig) -> Result<RiemannTensor> {
    let g = metric.at(p)?;
    let n = p.len();
    let h = cfg.step;
    let gamma = christoffel_data(metric, p, h);
    let d_gamma: Vec<Vector> = (0..n).map(|m| fd::partial(|q: &Point| christoffel_data(metric, q, h), p, m, h)).collect();
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dgm = |m: usize, k: usize, i: usize, j: usize| d_gamma[m][(k * n + i) * n + j];
    // upper[l][k][i][j] = component l of R(∂_i, ∂_j)∂_k
    let mut upper = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = dgm(i, l, j, k) - dgm(j, l, i, k);
                    for m in 0..n {
                        r += gm(l, i, m) * gm(m, j, k) - gm(l, j, m) * gm(m, i, k);
                    }
                    upper[((l * n + k) * n + i) * n + j] = r;
                }
            }
        }
    }
    let mut data = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for q in 0..n {
                        s += g[(k, q)] * upper[((q * n + l) * n + i) * n + j];
                    }
                    data[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::NonFinite { point: p.as_slice().to_vec() });
    }
    Ok(RiemannTensor { dim: n, data, metric: g })
}

/// Extremes of the sectional curvature over the 2-planes contained in a
/// subspace.
#[derive(Debug, Clone)]
pub struct SectionalRange {
    pub min: f64,
    pub max: f64,
    pub min_plane: (Vector, Vector),
    pub max_plane: (Vector, Vector),
}

impl RiemannTensor {
    /// Minimum and maximum sectional curvature over planes inside the span
    /// of `basis`, which must be orthonormal for this tensor's metric.
    ///
    /// Up to dimension three every 2-vector is decomposable, so the extremes
    /// are eigenvalues of the curvature operator. Beyond that the planes are
    /// searched: seeded random pairs followed by simplex refinement.
    pub fn sectional_range(&self, basis: &[Vector]) -> Result<SectionalRange> {
        let m = basis.len();
        if m < 2 {
            return Err(GeoError::DimensionError(format!("need a subspace of dimension >= 2, got {m}")));
        }
        let mut rb = vec![0.0; m * m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        rb[((a * m + b) * m + c) * m + d] = self.eval(&basis[a], &basis[b], &basis[c], &basis[d]);
                    }
                }
            }
        }
        let r = |a: usize, b: usize, c: usize, d: usize| rb[((a * m + b) * m + c) * m + d];
        let lift = |coef: &[f64]| -> Vector {
            let mut v = Vector::zeros(self.dim);
            for (c, e) in coef.iter().zip(basis) {
                v += e * *c;
            }
            v
        };
        match m {
            2 => {
                let k = r(0, 1, 0, 1);
                let plane = (basis[0].clone(), basis[1].clone());
                Ok(SectionalRange { min: k, max: k, min_plane: plane.clone(), max_plane: plane })
            }
            3 => {
                let pairs = [(0, 1), (0, 2), (1, 2)];
                let q = DMatrix::from_fn(3, 3, |i, j| r(pairs[i].0, pairs[i].1, pairs[j].0, pairs[j].1));
                let eig = nalgebra::SymmetricEigen::new((&q + q.transpose()) * 0.5);
                let (imin, imax) = (eig.eigenvalues.imin(), eig.eigenvalues.imax());
                let plane_of = |k: usize| {
                    let w = eig.eigenvectors.column(k);
                    // Hodge dual of the unit 2-vector
                    let normal = nalgebra::Vector3::new(w[2], -w[1], w[0]);
                    let seed = if normal.x.abs() < 0.9 { nalgebra::Vector3::x() } else { nalgebra::Vector3::y() };
                    let u = normal.cross(&seed).normalize();
                    let v = normal.normalize().cross(&u);
                    (lift(u.as_slice()), lift(v.as_slice()))
                };
                Ok(SectionalRange {
                    min: eig.eigenvalues[imin],
                    max: eig.eigenvalues[imax],
                    min_plane: plane_of(imin),
                    max_plane: plane_of(imax),
                })
            }
            _ => {
                let k_of = |x: &[f64]| {
                    let (u, v) = x.split_at(m);
                    let uu: f64 = u.iter().map(|a| a * a).sum();
                    let vv: f64 = v.iter().map(|a| a * a).sum();
                    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    let gram = uu * vv - uv * uv;
                    if gram < 1e-10 * (uu * vv).max(1e-300) {
                        return f64::NAN;
                    }
                    let mut s = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            for c in 0..m {
                                for d in 0..m {
                                    s += r(a, b, c, d) * u[a] * v[b] * u[c] * v[d];
                                }
                            }
                        }
                    }
                    s / gram
                };
                let mut rng = crate::sampling::rng(0x5ec7, crate::sampling::stream::PLANES);
                let starts: Vec<Vec<f64>> =
                    (0..200).map(|_| crate::sampling::gaussian_vector(&mut rng, 2 * m).as_slice().to_vec()).collect();
                let search = |sign: f64| -> (Vec<f64>, f64) {
                    let mut scored: Vec<(f64, usize)> =
                        starts.iter().enumerate().map(|(i, x)| (sign * k_of(x), i)).filter(|(v, _)| v.is_finite()).collect();
                    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut best = (starts[scored[0].1].clone(), scored[0].0);
                    for &(_, i) in scored.iter().take(3) {
                        let (x, v) = crate::optimize::nelder_mead(
                            |x| sign * k_of(x),
                            &starts[i],
                            0.3,
                            crate::optimize::NelderMeadOptions { max_evals: 400 * m, ..Default::default() },
                        );
                        if v < best.1 {
                            best = (x, v);
                        }
                    }
                    best
                };
                let to_plane = |x: &[f64]| {
                    let (u, v) = x.split_at(m);
                    let basis_uv = super::gram_schmidt(&self.metric, &[lift(u), lift(v)], 1e-300);
                    (basis_uv[0].clone(), basis_uv[1].clone())
                };
                let (xmin, vmin) = search(1.0);
                let (xmax, vmax) = search(-1.0);
                Ok(SectionalRange { min: vmin, max: -vmax, min_plane: to_plane(&xmin), max_plane: to_plane(&xmax) })
            }
        }
    }
}

pub fn sectional_curvature(metric: &MetricField, p: &Point, u: &Vector, v: &Vector, cfg: FdConfig) -> Result<f64> {
    riemann(metric, p, cfg)?.sectional(u, v)
}

pub fn scalar_curvature(metric: &MetricField, p: &Point, cfg: FdConfig) -> Result<f64> {
    Ok(riemann(metric, p, cfg)?.scalar())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartDomain;
    use std::f64::consts::PI;

    fn round_sphere() -> MetricField {
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-10.0, 10.0)], "sphere").unwrap();
        MetricField::diagonal("S2", dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2)]))
    }

    fn half_plane() -> MetricField {
        let dom = ChartDomain::new(vec![(-50.0, 50.0), (1e-3, 1e3)], "H2").unwrap();
        MetricField::diagonal("H2", dom, |p| Vector::from_element(2, 1.0 / (p[1] * p[1])))
    }

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn euclidean_symbols_vanish() {
        let m = MetricField::euclidean(3);
        let c = christoffel(&m, &pt(&[0.3, -1.0, 2.0]), FdConfig::default()).unwrap();
        assert!(c.data.iter().all(|x| *x == 0.0));
        let r = riemann(&m, &pt(&[0.3, -1.0, 2.0]), FdConfig::default()).unwrap();
        assert!(r.data.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn sphere_symbol_matches_closed_form() {
        let c = christoffel(&round_sphere(), &pt(&[PI / 4.0, 0.3]), FdConfig::default()).unwrap();
        assert!((c.get(0, 1, 1) + 0.5).abs() < 1e-10);
        // Γ^φ_{θφ} = cot θ
        assert!((c.get(1, 0, 1) - 1.0).abs() < 1e-10);
        assert_eq!(c.get(1, 0, 1), c.get(1, 1, 0));
    }

    #[test]
    fn half_plane_symbol_matches_closed_form() {
        let c = christoffel(&half_plane(), &pt(&[0.0, 1.0]), FdConfig::default()).unwrap();
        assert!((c.get(0, 0, 1) + 1.0).abs() < 1e-10);
        assert!((c.get(1, 0, 0) - 1.0).abs() < 1e-10);
        assert!((c.get(1, 1, 1) + 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_curvature_component_and_sectional() {
        for theta in [0.4, 1.0, 2.2] {
            let r = riemann(&round_sphere(), &pt(&[theta, 0.1]), FdConfig::default()).unwrap();
            assert!((r.component(0, 1, 0, 1) - theta.sin().powi(2)).abs() < 1e-6);
            assert!((r.component(0, 1, 0, 1) + r.component(1, 0, 0, 1)).abs() < 1e-12);
            let k = r.sectional(&pt(&[1.0, 0.0]), &pt(&[0.3, 2.0])).unwrap();
            assert!((k - 1.0).abs() < 1e-4);
            assert!((r.scalar() - 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn half_plane_has_curvature_minus_one() {
        let k = sectional_curvature(&half_plane(), &pt(&[0.2, 1.5]), &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0]), FdConfig::default()).unwrap();
        assert!((k + 1.0).abs() < 1e-4);
    }

    #[test]
    fn round_three_sphere_scalar_curvature() {
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (0.05, PI - 0.05), (-10.0, 10.0)], "S3").unwrap();
        let m = MetricField::diagonal("S3", dom, |p| {
            let s = p[0].sin().powi(2);
            Vector::from_vec(vec![1.0, s, s * p[1].sin().powi(2)])
        });
        let s = scalar_curvature(&m, &pt(&[1.1, 0.7, 0.0]), FdConfig::default()).unwrap();
        assert!((s - 6.0).abs() < 1e-4);
    }

    #[test]
    fn sectional_range_on_product_of_sphere_and_line() {
        // S^2 x R: sectional curvatures range over [0, 1]
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-10.0, 10.0), (-10.0, 10.0)], "S2xR").unwrap();
        let m = MetricField::diagonal("S2xR", dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2), 1.0]));
        let p = pt(&[1.0, 0.0, 0.0]);
        let r = riemann(&m, &p, FdConfig::default()).unwrap();
        let frame = crate::geometry::orthonormal_frame(r.metric());
        let range = r.sectional_range(&frame).unwrap();
        assert!(range.min.abs() < 1e-6 && (range.max - 1.0).abs() < 1e-6);
        let k = r.sectional(&range.max_plane.0, &range.max_plane.1).unwrap();
        assert!((k - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sectional_range_searches_in_four_dimensions() {
        // S^2 x R^2
        let dom = ChartDomain::new(vec![(0.05, PI - 0.05), (-10.0, 10.0), (-10.0, 10.0), (-10.0, 10.0)], "S2xR2").unwrap();
        let m = MetricField::diagonal("S2xR2", dom, |p| Vector::from_vec(vec![1.0, p[0].sin().powi(2), 1.0, 1.0]));
        let r = riemann(&m, &pt(&[1.2, 0.0, 0.0, 0.0]), FdConfig::default()).unwrap();
        let frame = crate::geometry::orthonormal_frame(r.metric());
        let range = r.sectional_range(&frame).unwrap();
        assert!(range.min.abs() < 1e-5 && (range.max - 1.0).abs() < 1e-5, "{range:?}");
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let r = riemann(&round_sphere(), &pt(&[1.0, 0.0]), FdConfig::default()).unwrap();
        let u = pt(&[1.0, 1.0]);
        assert!(matches!(r.sectional(&u, &(&u * 2.0)), Err(GeoError::DegeneratePlane { .. })));
    }

    #[test]
    fn out_of_chart_and_singular_metrics_are_errors() {
        let m = round_sphere();
        assert!(matches!(christoffel(&m, &pt(&[4.0, 0.0]), FdConfig::default()), Err(GeoError::OutOfChart { .. })));
        let dom = ChartDomain::new(vec![(-1.0, 1.0), (-1.0, 1.0)], "bad").unwrap();
        let degenerate = MetricField::diagonal("bad", dom, |p| Vector::from_vec(vec![1.0, p[0] * p[0]]));
        assert!(matches!(christoffel(&degenerate, &pt(&[0.0, 0.0]), FdConfig::default()), Err(GeoError::SingularMetric { .. })));
    }
}
