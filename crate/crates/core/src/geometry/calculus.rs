use nalgebra::DMatrix;

use super::{christoffel, fd, FdConfig, MetricField, Point, ScalarField, Vector, VectorField};
use crate::error::Result;

/// Riemannian gradient: the differential with its index raised.
pub fn gradient(metric: &MetricField, f: &ScalarField, p: &Point, cfg: FdConfig) -> Result<Vector> {
    let g = metric.at(p)?;
    let df = fd::differential(|q: &Point| f.eval(q), p, cfg.step);
    Ok(g.lu().solve(&df).expect("metric validated as positive definite"))
}

/// Covariant Hessian `∂_i∂_j f − Γ^k_{ij} ∂_k f`, symmetrised.
pub fn hessian(metric: &MetricField, f: &ScalarField, p: &Point, cfg: FdConfig) -> Result<DMatrix<f64>> {
    let gamma = christoffel(metric, p, cfg)?;
    let n = p.len();
    let eval = |q: &Point| f.eval(q);
    let df = fd::differential(eval, p, cfg.step);
    let d2 = fd::second_partials(eval, p, cfg.step);
    let mut h = DMatrix::from_fn(n, n, |i, j| d2[(i, j)] - (0..n).map(|k| gamma.get(k, i, j) * df[k]).sum::<f64>());
    h = (&h + h.transpose()) * 0.5;
    Ok(h)
}

/// Laplace–Beltrami operator as the metric trace of the Hessian.
pub fn laplacian(metric: &MetricField, f: &ScalarField, p: &Point, cfg: FdConfig) -> Result<f64> {
    let g = metric.at(p)?;
    let h = hessian(metric, f, p, cfg)?;
    let g_inv = g.try_inverse().expect("metric validated as positive definite");
    Ok((g_inv.component_mul(&h)).sum())
}

/// `div X = ∂_i X^i + Γ^i_{ik} X^k`.
pub fn divergence(metric: &MetricField, field: &VectorField, p: &Point, cfg: FdConfig) -> Result<f64> {
    let gamma = christoffel(metric, p, cfg)?;
    let n = p.len();
    let x = field.eval(p);
    let mut div = 0.0;
    for i in 0..n {
        let dxi: Vector = fd::partial(|q: &Point| field.eval(q), p, i, cfg.step);
        div += dxi[i];
        for k in 0..n {
            div += gamma.get(i, i, k) * x[k];
        }
    }
    Ok(div)
}

/// `∇_u Y` at `p` for a vector field `Y`.
pub fn covariant_derivative(metric: &MetricField, field: &VectorField, p: &Point, u: &Vector, cfg: FdConfig) -> Result<Vector> {
    let gamma = christoffel(metric, p, cfg)?;
    let dy: Vector = fd::directional(|q: &Point| field.eval(q), p, u, cfg.step);
    Ok(dy + gamma.contract(u, &field.eval(p)))
}
