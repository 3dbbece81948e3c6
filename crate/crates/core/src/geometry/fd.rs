//! Central-difference stencils.
//!
//! First derivatives use the fourth-order five-point stencil, so truncation
//! error is O(h^4) and the dominant error at h = 1e-4 is roundoff. Curvature
//! needs two nested levels, which keeps it near 1e-8.

use std::ops::{Mul, Sub};

use super::{unit, Point, Vector};

/// Directional derivative of `f` at `p` along `dir`.
pub fn directional<T, F>(f: F, p: &Point, dir: &Vector, h: f64) -> T
where
    F: Fn(&Point) -> T,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    let f1 = f(&(p + dir * h)) - f(&(p - dir * h));
    let f2 = f(&(p + dir * (2.0 * h))) - f(&(p - dir * (2.0 * h)));
    (f1 * 8.0 - f2) * (1.0 / (12.0 * h))
}

/// Partial derivative along coordinate `i`.
pub fn partial<T, F>(f: F, p: &Point, i: usize, h: f64) -> T
where
    F: Fn(&Point) -> T,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    directional(f, p, &unit(p.len(), i), h)
}

/// Coordinate gradient (the differential's components).
pub fn differential<F>(f: F, p: &Point, h: f64) -> Vector
where
    F: Fn(&Point) -> f64,
{
    Vector::from_fn(p.len(), |i, _| partial(&f, p, i, h))
}

/// Matrix of second coordinate partials.
pub fn second_partials<F>(f: F, p: &Point, h: f64) -> nalgebra::DMatrix<f64>
where
    F: Fn(&Point) -> f64,
{
    let n = p.len();
    let f0 = f(p);
    let mut out = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = unit(n, i);
        let a = f(&(p + &ei * h)) + f(&(p - &ei * h));
        let b = f(&(p + &ei * (2.0 * h))) + f(&(p - &ei * (2.0 * h)));
        out[(i, i)] = (16.0 * a - b - 30.0 * f0) / (12.0 * h * h);
        for j in 0..i {
            let dj = |q: &Point| partial(&f, q, j, h);
            let v = directional(dj, p, &ei, h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Jacobian of a vector-valued map: column `j` is the partial along `j`.
pub fn jacobian<F>(f: F, p: &Point, h: f64) -> nalgebra::DMatrix<f64>
where
    F: Fn(&Point) -> Vector,
{
    let n = p.len();
    let cols: Vec<Vector> = (0..n).map(|j| partial(&f, p, j, h)).collect();
    nalgebra::DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_stencil_is_exact_on_quartics() {
        let f = |p: &Point| p[0].powi(4) - 3.0 * p[0] * p[0];
        let p = Point::from_vec(vec![0.7]);
        let d: f64 = partial(f, &p, 0, 1e-2);
        let exact = 4.0 * 0.7f64.powi(3) - 6.0 * 0.7;
        assert!((d - exact).abs() < 1e-10);
    }

    #[test]
    fn mixed_partials_of_a_product() {
        let f = |p: &Point| p[0].sin() * p[1].exp();
        let p = Point::from_vec(vec![0.3, -0.2]);
        let h = second_partials(f, &p, 1e-3);
        assert!((h[(0, 1)] - 0.3f64.cos() * (-0.2f64).exp()).abs() < 1e-9);
        assert!((h[(0, 0)] + 0.3f64.sin() * (-0.2f64).exp()).abs() < 1e-7);
        assert!((h[(1, 1)] - 0.3f64.sin() * (-0.2f64).exp()).abs() < 1e-7);
    }
}
