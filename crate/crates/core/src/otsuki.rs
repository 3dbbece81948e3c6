//! Symmetric vector-valued bilinear forms and the search for a pair
//! `v1, v2` with `β(v1,v1) = β(v2,v2)` and `β(v1,v2) = 0`.
//!
//! Such a pair exists whenever `β(v,v) ≠ 0` for `v ≠ 0` and the codomain is
//! smaller than the domain. The existence proof is topological, so the
//! pair is found by multi-start minimization and checked by substitution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{inner, Vector};
use crate::optimize::{levenberg_marquardt, nelder_mead, LmOptions, NelderMeadOptions};
use crate::sampling::{gaussian_vector, rng, stream};

/// `β(v,v)` smaller than this (relative to the size of `β`) counts as zero.
pub const DEFINITENESS_THRESHOLD: f64 = 1e-6;
/// Target for the pair residual.
pub const PAIR_RESIDUAL: f64 = 1e-12;
/// Minimum angle between the two vectors of a pair.
pub const MIN_ANGLE: f64 = 1e-3;
const RESTARTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBilinearForm {
    components: Vec<DMatrix<f64>>,
    v_inner: DMatrix<f64>,
    w_inner: DMatrix<f64>,
    /// Upper Cholesky factor of the codomain inner product, mapping to
    /// orthonormal coordinates.
    w_factor: DMatrix<f64>,
}

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(GeoError::DomainError(format!("{what} must be a symmetric matrix")));
    }
    if m.clone().cholesky().is_none() {
        return Err(GeoError::DomainError(format!("{what} must be positive definite")));
    }
    Ok(())
}

impl SymmetricBilinearForm {
    /// A form `V × V → W` from its component matrices, one per coordinate of
    /// `W`, with the given inner products on `V` and `W`.
    pub fn new(components: Vec<DMatrix<f64>>, v_inner: DMatrix<f64>, w_inner: DMatrix<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(GeoError::DimensionError("the codomain must have positive dimension".into()));
        }
        let n1 = v_inner.nrows();
        check_spd(&v_inner, "inner product on V")?;
        check_spd(&w_inner, "inner product on W")?;
        if w_inner.nrows() != components.len() {
            return Err(GeoError::DimensionMismatch { expected: components.len(), got: w_inner.nrows() });
        }
        for (k, c) in components.iter().enumerate() {
            if c.nrows() != n1 || c.ncols() != n1 {
                return Err(GeoError::DimensionMismatch { expected: n1, got: c.nrows() });
            }
            if (c - c.transpose()).amax() > 1e-12 * (1.0 + c.amax()) {
                return Err(GeoError::DomainError(format!("component {k} is not symmetric")));
            }
        }
        let w_factor = w_inner.clone().cholesky().expect("checked positive definite").l().transpose();
        Ok(SymmetricBilinearForm { components, v_inner, w_inner, w_factor })
    }

    /// Components with Euclidean inner products on both sides.
    pub fn euclidean(components: Vec<DMatrix<f64>>) -> Result<Self> {
        let n1 = components.first().map_or(0, |c| c.nrows());
        let n2 = components.len();
        SymmetricBilinearForm::new(components, DMatrix::identity(n1, n1), DMatrix::identity(n2, n2))
    }

    /// `β(v,w) = ⟨v,w⟩ ν` on Euclidean `ℝ^n`.
    pub fn umbilical(n: usize, normal: &Vector) -> Result<Self> {
        SymmetricBilinearForm::euclidean(normal.iter().map(|c| DMatrix::identity(n, n) * *c).collect())
    }

    pub fn dim_v(&self) -> usize {
        self.v_inner.nrows()
    }

    pub fn dim_w(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[DMatrix<f64>] {
        &self.components
    }

    pub fn v_inner(&self) -> &DMatrix<f64> {
        &self.v_inner
    }

    pub fn w_inner(&self) -> &DMatrix<f64> {
        &self.w_inner
    }

    pub fn eval(&self, v: &Vector, w: &Vector) -> Vector {
        Vector::from_iterator(self.dim_w(), self.components.iter().map(|c| (v.transpose() * c * w)[(0, 0)]))
    }

    /// `β(v,w)` in `W`-orthonormal coordinates.
    fn eval_orthonormal(&self, v: &Vector, w: &Vector) -> Vector {
        &self.w_factor * self.eval(v, w)
    }

    pub fn w_norm(&self, w: &Vector) -> f64 {
        inner(&self.w_inner, w, w).max(0.0).sqrt()
    }

    pub fn v_norm(&self, v: &Vector) -> f64 {
        inner(&self.v_inner, v, v).max(0.0).sqrt()
    }

    /// Largest component spectral norm, used to make thresholds relative.
    pub fn scale(&self) -> f64 {
        self.components.iter().map(|c| c.clone().symmetric_eigenvalues().amax()).fold(0.0, f64::max)
    }

    /// `|β(v1,v1) − β(v2,v2)|² + |β(v1,v2)|²`.
    pub fn pair_residual(&self, v1: &Vector, v2: &Vector) -> f64 {
        let d = self.eval_orthonormal(v1, v1) - self.eval_orthonormal(v2, v2);
        d.norm_squared() + self.eval_orthonormal(v1, v2).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Definiteness {
    pub definite: bool,
    /// Smallest `|β(v,v)|_W` found on the unit sphere of `V`.
    pub min_norm: f64,
    /// The unit vector attaining it.
    pub witness: Vec<f64>,
}

/// Searches the unit sphere of `V` for `v` with `β(v,v)` close to zero.
pub fn definiteness_check(form: &SymmetricBilinearForm, seed: u64) -> Definiteness {
    let n = form.dim_v();
    let mut gen = rng(seed, stream::OTSUKI);
    let starts: Vec<Vector> = (0..4 * n + 8).map(|_| gaussian_vector(&mut gen, n)).collect();
    let value = |x: &[f64]| {
        let v = Vector::from_column_slice(x);
        let len = form.v_norm(&v);
        if !(len > 1e-12) {
            return f64::NAN;
        }
        let u = v / len;
        form.eval_orthonormal(&u, &u).norm_squared()
    };
    let best = starts
        .par_iter()
        .map(|s| nelder_mead(value, s.as_slice(), 0.3, NelderMeadOptions { max_evals: 400 * (n + 1), ftol: 1e-30, xtol: 1e-12 }))
        .reduce_with(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one start");
    let v = Vector::from_vec(best.0);
    let u = &v / form.v_norm(&v);
    let min_norm = form.w_norm(&form.eval(&u, &u));
    Definiteness {
        definite: min_norm > DEFINITENESS_THRESHOLD * form.scale().max(1.0),
        min_norm,
        witness: u.as_slice().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtsukiPair {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// Residual recomputed by substitution.
    pub residual: f64,
    pub angle: f64,
}

impl OtsukiPair {
    pub fn first(&self) -> Vector {
        Vector::from_column_slice(&self.v1)
    }

    pub fn second(&self) -> Vector {
        Vector::from_column_slice(&self.v2)
    }
}

/// The pair encoded by `(a, c)`: `v1 = a/|a|`, `v2` the part of `c`
/// orthogonal to `v1`. Some solution always has this shape: on the plane
/// of any solution `β` is conformal, so a basis orthogonal for both `V` and
/// that conformal structure, rescaled, is again a solution.
fn decode(form: &SymmetricBilinearForm, x: &[f64]) -> Option<(Vector, Vector)> {
    let n = form.dim_v();
    let a = Vector::from_column_slice(&x[..n]);
    let c = Vector::from_column_slice(&x[n..]);
    let len = form.v_norm(&a);
    if !(len > 1e-12) {
        return None;
    }
    let v1 = a / len;
    let v2 = &c - &v1 * inner(&form.v_inner, &v1, &c);
    Some((v1, v2))
}

fn angle(form: &SymmetricBilinearForm, v1: &Vector, v2: &Vector) -> f64 {
    let (n1, n2) = (form.v_norm(v1), form.v_norm(v2));
    if !(n1 > 0.0 && n2 > 0.0) {
        return 0.0;
    }
    let cos = (inner(&form.v_inner, v1, v2) / (n1 * n2)).abs().min(1.0);
    cos.acos()
}

/// Finds `v1, v2` independent with `β(v1,v1) = β(v2,v2)`, `β(v1,v2) = 0`,
/// ordered so that `|v1| ≥ |v2|`.
pub fn find_otsuki_pair(form: &SymmetricBilinearForm, seed: u64) -> Result<OtsukiPair> {
    let (n1, n2) = (form.dim_v(), form.dim_w());
    if n2 >= n1 {
        return Err(GeoError::DimensionError(format!("codomain dimension {n2} must be below domain dimension {n1}")));
    }
    let mut gen = rng(seed, stream::OTSUKI);
    let starts: Vec<Vec<f64>> = (0..RESTARTS).map(|_| (0..2 * n1).map(|_| gen.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let objective = |x: &[f64]| match decode(form, x) {
        Some((v1, v2)) => form.pair_residual(&v1, &v2),
        None => f64::NAN,
    };
    let residuals = |x: &DVector<f64>| match decode(form, x.as_slice()) {
        Some((v1, v2)) => {
            let mut r = DVector::zeros(2 * n2);
            r.rows_mut(0, n2).copy_from(&(form.eval_orthonormal(&v1, &v1) - form.eval_orthonormal(&v2, &v2)));
            r.rows_mut(n2, n2).copy_from(&form.eval_orthonormal(&v1, &v2));
            r
        }
        None => DVector::from_element(2 * n2, f64::NAN),
    };
    let opts = NelderMeadOptions { max_evals: 300 * (2 * n1 + 1), ftol: 1e-30, xtol: 1e-12 };
    let mut candidates: Vec<(usize, Vec<f64>, f64)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (x, _) = nelder_mead(objective, s, 0.25, opts);
            let (x, cost) = levenberg_marquardt(residuals, &DVector::from_vec(x), LmOptions::default());
            (i, x.as_slice().to_vec(), cost)
        })
        .collect();
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));

    let scale = form.scale().max(1e-300);
    for (_, x, _) in &candidates {
        let Some((mut v1, mut v2)) = decode(form, x) else { continue };
        if form.v_norm(&v2) < form.v_norm(&v1) * 1e-8 {
            continue;
        }
        if form.v_norm(&v2) > form.v_norm(&v1) {
            std::mem::swap(&mut v1, &mut v2);
        }
        // normalize the overall scale so the residual is comparable across forms
        let s = form.v_norm(&v1);
        let (v1, v2) = (v1 / s, v2 / s);
        let residual = form.pair_residual(&v1, &v2) / (scale * scale);
        let theta = angle(form, &v1, &v2);
        if residual < PAIR_RESIDUAL && theta > MIN_ANGLE {
            return Ok(OtsukiPair { v1: v1.as_slice().to_vec(), v2: v2.as_slice().to_vec(), residual, angle: theta });
        }
    }
    let best = candidates.first().map_or(f64::INFINITY, |c| c.2);
    Err(GeoError::SearchFailed(format!("pair residual floor not reached after {RESTARTS} restarts (best {best:e})")))
}

/// Independent check of a pair: the relative residual and the angle.
pub fn verify_pair(form: &SymmetricBilinearForm, v1: &Vector, v2: &Vector) -> (f64, f64) {
    let scale = form.scale().max(1e-300);
    let s = form.v_norm(v1).max(form.v_norm(v2));
    let (a, b) = (v1 / s, v2 / s);
    (form.pair_residual(&a, &b) / (scale * scale), angle(form, v1, v2))
}

/// A random form `ℝ^{n1} × ℝ^{n1} → ℝ^{n2}` with Euclidean inner products
/// that passes the definiteness check. The first component is biased
/// towards positive definite matrices so that rejection is rare.
pub fn random_definite_form(r: &mut impl Rng, n1: usize, n2: usize, seed: u64) -> SymmetricBilinearForm {
    loop {
        let components: Vec<DMatrix<f64>> = (0..n2)
            .map(|k| {
                let a = DMatrix::from_fn(n1, n1, |_, _| r.sample::<f64, _>(rand_distr::StandardNormal));
                let sym = (&a + a.transpose()) * 0.5;
                if k == 0 {
                    sym * 0.5 + DMatrix::identity(n1, n1) * 1.5
                } else {
                    sym
                }
            })
            .collect();
        let form = SymmetricBilinearForm::euclidean(components).expect("symmetric by construction");
        if definiteness_check(&form, seed).definite {
            return form;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn euclidean_inner_product_is_definite() {
        let form = SymmetricBilinearForm::euclidean(vec![DMatrix::identity(3, 3)]).unwrap();
        let d = definiteness_check(&form, 1);
        assert!(d.definite && (d.min_norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_form_has_a_null_vector() {
        let form = SymmetricBilinearForm::euclidean(vec![diag(&[1.0, -1.0])]).unwrap();
        let d = definiteness_check(&form, 1);
        assert!(!d.definite);
        assert!((d.witness[0].abs() - d.witness[1].abs()).abs() < 1e-4);
        assert!(d.min_norm < 1e-7);
    }

    #[test]
    fn umbilical_form_is_definite_and_any_orthonormal_pair_works() {
        let form = SymmetricBilinearForm::umbilical(3, &Vector::from_vec(vec![0.3, -1.0])).unwrap();
        assert!(definiteness_check(&form, 2).definite);
        let (r, _) = verify_pair(&form, &Vector::from_vec(vec![1.0, 0.0, 0.0]), &Vector::from_vec(vec![0.0, 0.6, 0.8]));
        assert!(r < 1e-30);
        let pair = find_otsuki_pair(&form, 3).unwrap();
        assert!(pair.residual < 1e-12 && pair.angle > MIN_ANGLE);
    }

    #[test]
    fn scalar_form_in_the_plane() {
        let form = SymmetricBilinearForm::euclidean(vec![diag(&[1.0, 2.0])]).unwrap();
        let pair = find_otsuki_pair(&form, 0).unwrap();
        let (r, theta) = verify_pair(&form, &pair.first(), &pair.second());
        assert!(r < 1e-10 && theta > MIN_ANGLE);
        assert!(form.v_norm(&pair.first()) >= form.v_norm(&pair.second()));
    }

    #[test]
    fn random_definite_forms_have_pairs() {
        let mut gen = rng(42, 99);
        for (n1, n2) in [(3, 2), (4, 3), (5, 2), (6, 5)] {
            let form = random_definite_form(&mut gen, n1, n2, 5);
            let pair = find_otsuki_pair(&form, 11).unwrap();
            let (r, theta) = verify_pair(&form, &pair.first(), &pair.second());
            assert!(r < 1e-10 && theta > MIN_ANGLE, "n1={n1} n2={n2} r={r}");
        }
    }

    #[test]
    fn non_euclidean_inner_products() {
        let v_inner = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let w_inner = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let form = SymmetricBilinearForm::new(vec![diag(&[2.0, 1.0, 3.0]), diag(&[0.5, -1.0, 0.2])], v_inner, w_inner).unwrap();
        let pair = find_otsuki_pair(&form, 4).unwrap();
        assert!(verify_pair(&form, &pair.first(), &pair.second()).0 < 1e-10);
    }

    #[test]
    fn search_is_deterministic() {
        let form = random_definite_form(&mut rng(1, 1), 3, 2, 0);
        assert_eq!(find_otsuki_pair(&form, 9).unwrap(), find_otsuki_pair(&form, 9).unwrap());
    }

    #[test]
    fn codomain_too_large() {
        let form = SymmetricBilinearForm::euclidean(vec![DMatrix::identity(2, 2); 2]).unwrap();
        assert!(matches!(find_otsuki_pair(&form, 0), Err(GeoError::DimensionError(_))));
    }

    #[test]
    fn asymmetric_component_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SymmetricBilinearForm::euclidean(vec![m]).is_err());
    }
}
