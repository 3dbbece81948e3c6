//! Sufficient conditions for the Omori–Yau maximum principle: checks of a
//! pair `(h, γ)`, its transfer from a fiber to an immersed submanifold, the
//! extraction of almost-maximum sequences, and the scalar-curvature growth
//! predicate.
//!
//! The asymptotic conditions can only be sampled on finite horizons; reports
//! carry a `finite_horizon` flag whenever that is the case.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::estimates::{estimate_extremum, sample_field, Mode, Region};
use crate::geometry::{
    gradient, hessian, inner, laplacian, scalar_curvature, DistanceFunction, FdConfig, MetricField, Point, ScalarField,
    Vector,
};
use crate::immersion::Immersion;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::warped::LiftKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Hessian,
    Laplacian,
}

/// Outcome of one numbered condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub pass: bool,
    /// Verified on a bounded range only.
    pub finite_horizon: bool,
    /// The key number behind the verdict (a slope, ratio or minimum).
    pub value: f64,
    pub detail: String,
}

impl Check {
    fn new(pass: bool, finite_horizon: bool, value: f64, detail: impl Into<String>) -> Self {
        Check { pass, finite_horizon, value, detail: detail.into() }
    }
}

fn h_at(h: &ScalarField, t: f64) -> f64 {
    h.eval(&Point::from_element(1, t))
}

/// Sampling ranges for the conditions on `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HGrid {
    /// Monotonicity is checked on `[0, t_max]`.
    pub t_max: f64,
    pub points: usize,
    /// Range of `t` on which the growth ratio's trend is fitted.
    pub tail: (f64, f64),
    /// Decades `[10^k, 10^{k+1}]` for `k < decades` feed the integral test.
    pub decades: usize,
}

impl Default for HGrid {
    fn default() -> Self {
        HGrid { t_max: 1e3, points: 2001, tail: (1e6, 1e12), decades: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HReport {
    pub positive_nondecreasing: Check,
    pub bounded_growth_ratio: Check,
    pub divergent_integral: Check,
}

impl HReport {
    pub fn pass(&self) -> bool {
        self.positive_nondecreasing.pass && self.bounded_growth_ratio.pass && self.divergent_integral.pass
    }
}

/// Largest trend slope of `log(t h(√t)/h(t))` against `log t` still read as
/// bounded.
pub const RATIO_SLOPE_LIMIT: f64 = 0.05;
/// Decade increments of `∫ dt/√h` shrinking faster than this are read as
/// convergent.
pub const DECADE_RATIO_LIMIT: f64 = 0.5;

/// Checks `h(0) > 0` and `h' ≥ 0`, boundedness of `t h(√t)/h(t)` and
/// divergence of `∫ dt/√h`.
pub fn check_h_conditions(h: &ScalarField, grid: HGrid) -> HReport {
    let h0 = h_at(h, 0.0);
    let n = grid.points.max(2);
    let mut prev = h0;
    let mut worst_drop = 0.0f64;
    for i in 1..n {
        let v = h_at(h, grid.t_max * i as f64 / (n - 1) as f64);
        worst_drop = worst_drop.max(prev - v - 1e-12 * prev.abs());
        prev = v;
    }
    let first = Check::new(
        h0 > 0.0 && worst_drop <= 0.0 && h0.is_finite(),
        true,
        h0,
        format!("h(0) = {h0}, largest decrease {worst_drop:e} on [0, {}]", grid.t_max),
    );

    // least-squares slope of the log ratio over a geometric grid of the tail
    let (lo, hi) = (grid.tail.0.ln(), grid.tail.1.ln());
    let pts: Vec<(f64, f64)> = (0..=48)
        .map(|i| {
            let u = lo + (hi - lo) * i as f64 / 48.0;
            let t = u.exp();
            (u, (t * h_at(h, t.sqrt()) / h_at(h, t)).ln())
        })
        .collect();
    let m = pts.len() as f64;
    let (su, sv) = pts.iter().fold((0.0, 0.0), |(a, b), (u, v)| (a + u, b + v));
    let (mu, mv) = (su / m, sv / m);
    let slope = pts.iter().map(|(u, v)| (u - mu) * (v - mv)).sum::<f64>() / pts.iter().map(|(u, _)| (u - mu).powi(2)).sum::<f64>();
    let ratio_end = pts.last().map_or(f64::NAN, |p| p.1.exp());
    let second = Check::new(
        slope.is_finite() && slope < RATIO_SLOPE_LIMIT,
        true,
        slope,
        format!("log-log slope {slope:.4} of t h(sqrt t)/h(t) on [{:e}, {:e}], ratio {ratio_end:.4e} at the end", grid.tail.0, grid.tail.1),
    );

    // Simpson in u = ln t over each decade
    let decade = |k: usize| {
        let (a, b) = ((k as f64) * std::f64::consts::LN_10, (k + 1) as f64 * std::f64::consts::LN_10);
        let steps = 64;
        let dx = (b - a) / steps as f64;
        let g = |u: f64| u.exp() / h_at(h, u.exp()).sqrt();
        let mut s = g(a) + g(b);
        for i in 1..steps {
            s += g(a + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dx / 3.0
    };
    let increments: Vec<f64> = (0..grid.decades.max(2)).map(decade).collect();
    let k = increments.len();
    let ratio = increments[k - 1] / increments[k - 2];
    let third = Check::new(
        ratio.is_finite() && ratio >= DECADE_RATIO_LIMIT,
        true,
        ratio,
        format!("last decade increment {:.4e}, ratio to previous {ratio:.4}", increments[k - 1]),
    );
    HReport { positive_nondecreasing: first, bounded_growth_ratio: second, divergent_integral: third }
}

/// A candidate pair `(h, γ)` with its constants. Conditions on `γ` are
/// enforced where `γ ≥ cutoff`, standing in for "outside a compact set".
#[derive(Debug, Clone)]
pub struct OyPair {
    pub h: ScalarField,
    pub gamma: ScalarField,
    pub flavor: Flavor,
    pub c: f64,
    pub c_prime: f64,
    pub cutoff: f64,
}

/// A ray `t ↦ start + t·direction`, `t ∈ [0, t_max]`, along which `γ`
/// should grow without bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub start: Point,
    pub direction: Vector,
    pub t_max: f64,
}

/// Where to sample a manifold for the conditions on `γ`.
#[derive(Debug, Clone)]
pub struct GammaSampling {
    pub region: Region,
    pub rays: Vec<Ray>,
    pub compact: bool,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    pub proper: Check,
    pub gradient_bound: Check,
    pub hessian_bound: Check,
    /// Points with `γ ≥ cutoff` where (5) and (6) were evaluated.
    pub evaluated: usize,
}

impl GammaReport {
    pub fn pass(&self) -> bool {
        self.proper.pass && self.gradient_bound.pass && self.hessian_bound.pass
    }
}

/// Relative slack on the pointwise bounds.
const BOUND_TOLERANCE: f64 = 1e-6;

/// Largest eigenvalue of `g⁻¹ H`.
pub fn max_relative_eigenvalue(g: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let l = g.clone().cholesky().expect("metric validated as positive definite").l();
    let l_inv = l.try_inverse().expect("triangular factor is invertible");
    let m = &l_inv * h * l_inv.transpose();
    ((&m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
}

fn properness(gamma: &ScalarField, sampling: &GammaSampling) -> Result<Check> {
    if sampling.compact {
        return Ok(Check::new(true, false, 0.0, "compact manifold: every continuous function is proper"));
    }
    if sampling.rays.is_empty() {
        return Err(GeoError::NoDivergentRays);
    }
    let mut worst = f64::INFINITY;
    for ray in &sampling.rays {
        let at = |t: f64| gamma.eval(&(&ray.start + &ray.direction * t));
        let base = at(0.0).abs().max(1.0);
        let values: Vec<f64> = (0..=10).map(|k| at(ray.t_max * 0.5f64.powi(10 - k))).collect();
        let monotone_tail = values[5..].windows(2).all(|w| w[1] >= w[0]);
        let growth = values[10] / base;
        worst = worst.min(if monotone_tail { growth } else { 0.0 });
    }
    Ok(Check::new(
        worst >= 100.0,
        true,
        worst,
        format!("smallest growth factor of gamma along {} rays: {worst:.3e}", sampling.rays.len()),
    ))
}

/// Checks properness of `γ`, `|grad γ| ≤ c√γ` and the Hessian (or
/// Laplacian) bound `c'√(γ h(√γ))` on samples with `γ ≥ cutoff`.
pub fn check_gamma_conditions(pair: &OyPair, metric: &MetricField, sampling: &GammaSampling) -> Result<GammaReport> {
    let proper = properness(&pair.gamma, sampling)?;
    let cfg = FdConfig::default();
    let samples = sample_field(&|p: &Point| pair.gamma.eval(p), &sampling.region, sampling.budget, sampling.seed);
    let outside: Vec<Point> = samples.into_iter().filter(|s| s.value >= pair.cutoff).map(|s| s.point).collect();
    let ratios: Vec<Result<(f64, f64)>> = outside
        .par_iter()
        .map(|p| {
            let gamma = pair.gamma.value(p)?;
            let g = metric.at(p)?;
            let grad = gradient(metric, &pair.gamma, p, cfg)?;
            let grad_ratio = inner(&g, &grad, &grad).sqrt() / (pair.c * gamma.sqrt());
            let bound = pair.c_prime * (gamma * h_at(&pair.h, gamma.sqrt())).sqrt();
            let second = match pair.flavor {
                Flavor::Hessian => max_relative_eigenvalue(&g, &hessian(metric, &pair.gamma, p, cfg)?),
                Flavor::Laplacian => laplacian(metric, &pair.gamma, p, cfg)?,
            };
            Ok((grad_ratio, second / bound))
        })
        .collect();
    let mut worst = (0.0f64, f64::NEG_INFINITY);
    for r in ratios {
        let (a, b) = r?;
        worst = (worst.0.max(a), worst.1.max(b));
    }
    let n = outside.len();
    let vacuous = n == 0;
    if vacuous && !sampling.compact {
        let inconclusive = Check::new(false, true, f64::NAN, format!("no samples with gamma >= {}", pair.cutoff));
        return Ok(GammaReport { proper, gradient_bound: inconclusive.clone(), hessian_bound: inconclusive, evaluated: 0 });
    }
    let second_name = match pair.flavor {
        Flavor::Hessian => "Hess gamma",
        Flavor::Laplacian => "Laplacian of gamma",
    };
    Ok(GammaReport {
        proper,
        gradient_bound: Check::new(
            vacuous || worst.0 <= 1.0 + BOUND_TOLERANCE,
            !sampling.compact,
            worst.0,
            format!("max |grad gamma| / (c sqrt gamma) = {:.6} over {n} samples", worst.0),
        ),
        hessian_bound: Check::new(
            vacuous || worst.1 <= 1.0 + BOUND_TOLERANCE,
            !sampling.compact,
            worst.1,
            format!("max {second_name} / (c' sqrt(gamma h(sqrt gamma))) = {:.6} over {n} samples", worst.1),
        ),
        evaluated: n,
    })
}

/// Inputs for transferring a fiber pair `(h, Γ)` to an immersed manifold.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub h: ScalarField,
    /// `Γ` on the fiber.
    pub fiber_gamma: ScalarField,
    pub flavor: Flavor,
    pub c: f64,
    pub c_prime: f64,
    /// Constant in the bound on `S` (or on `H` for the Laplacian).
    pub alpha: f64,
    pub cutoff: f64,
    /// Compact box in base coordinates expected to contain `π_X(φ(M))`.
    pub base_box: Region,
    pub fiber_sampling: GammaSampling,
    pub manifold_sampling: GammaSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationReport {
    pub fiber: GammaReport,
    pub h: HReport,
    /// `max_K |grad ψ/ψ|`.
    pub a0: f64,
    /// `min_K ψ`.
    pub b0: f64,
    pub c_manifold: f64,
    pub c_second: f64,
    /// Largest `‖S‖/√h(√γ)` (or `|H|/√h(√γ)`) seen where `γ ≥ cutoff`.
    pub alpha_observed: f64,
    pub manifold: GammaReport,
}

/// Largest `|S(e,e')|` over pairs from an orthonormal frame, summed in
/// squares: the Hilbert–Schmidt norm, which dominates the operator norm.
pub fn second_fundamental_hs_norm(imm: &Immersion, p: &Point) -> Result<f64> {
    let frame = imm.tangent_frame(p)?;
    let mut total = 0.0;
    for (i, a) in frame.iter().enumerate() {
        for (j, b) in frame.iter().enumerate().skip(i) {
            let s = imm.ambient_norm(p, &imm.second_fundamental_form(p, a, b)?)?;
            total += if i == j { s * s } else { 2.0 * s * s };
        }
    }
    Ok(total.sqrt())
}

/// Builds `γ = Γ^v ∘ φ` and checks that `(h, γ)` is again a pair, with the
/// constants `c/B₀` and the combination of `A₀`, `B₀`, `c`, `c'`, `α` that
/// bounds `Hess γ` (or `Δγ`).
pub fn propagate_oy_pair(imm: &Immersion, prop: &Propagation) -> Result<PropagationReport> {
    let wp = imm.warped().ok_or(GeoError::AmbientNotWarped)?;
    let h_report = check_h_conditions(&prop.h, HGrid::default());
    if !h_report.pass() {
        return Err(GeoError::HypothesisFailed(format!("h does not satisfy (1)-(3): {h_report:?}")));
    }
    // the fiber pair must hold for the Hessian even for the Laplacian flavor
    let fiber_pair = OyPair {
        h: prop.h.clone(),
        gamma: prop.fiber_gamma.clone(),
        flavor: Flavor::Hessian,
        c: prop.c,
        c_prime: prop.c_prime,
        cutoff: prop.cutoff,
    };
    let fiber = check_gamma_conditions(&fiber_pair, wp.fiber(), &prop.fiber_sampling)?;
    if !fiber.pass() {
        return Err(GeoError::HypothesisFailed(format!("(h, Gamma) is not a pair for the Hessian on the fiber: {fiber:?}")));
    }

    let gamma = imm.pull_back(&wp.lift_scalar(&prop.fiber_gamma, LiftKind::Fiber)?);
    let samples = sample_field(&|p: &Point| gamma.eval(p), &prop.manifold_sampling.region, prop.manifold_sampling.budget, prop.manifold_sampling.seed);
    let n_m = imm.domain_dim() as f64;
    let n_v = wp.n_fiber() as f64;
    let mut alpha_observed = 0.0f64;
    for s in &samples {
        let q = imm.map(&s.point)?;
        let (x, _) = wp.split_point(&q);
        if !prop.base_box.bounds().iter().zip(x.iter()).all(|((lo, hi), c)| c >= lo && c <= hi) {
            return Err(GeoError::HypothesisFailed(format!("(b): base projection {:?} leaves the compact set", x.as_slice())));
        }
        if s.value < prop.cutoff {
            continue;
        }
        let size = match prop.flavor {
            Flavor::Hessian => second_fundamental_hs_norm(imm, &s.point)?,
            Flavor::Laplacian => imm.ambient_norm(&s.point, &imm.mean_curvature_vector(&s.point)?)?,
        };
        let ratio = size / h_at(&prop.h, s.value.sqrt()).sqrt();
        alpha_observed = alpha_observed.max(ratio);
    }
    if alpha_observed > prop.alpha * (1.0 + BOUND_TOLERANCE) {
        let which = if prop.flavor == Flavor::Hessian { "(c)" } else { "(c')" };
        return Err(GeoError::HypothesisFailed(format!(
            "{which}: second fundamental form needs alpha >= {alpha_observed:.6}, declared {}",
            prop.alpha
        )));
    }

    let budget = 256;
    let log_grad = |x: &Point| wp.log_warp_gradient(x).and_then(|v| wp.base().norm(x, &v)).unwrap_or(f64::NAN);
    let a0 = estimate_extremum(log_grad, &prop.base_box, Mode::Sup, budget, prop.manifold_sampling.seed)?.value;
    let b0 = estimate_extremum(|x: &Point| wp.psi().eval(x), &prop.base_box, Mode::Inf, budget, prop.manifold_sampling.seed)?.value;
    if !(b0 > 0.0) {
        return Err(GeoError::NonpositiveWarp { point: vec![], value: b0 });
    }
    let sqrt_h0 = h_at(&prop.h, 0.0).sqrt();
    let c_manifold = prop.c / b0;
    let c_second = match prop.flavor {
        Flavor::Hessian => 2.0 * a0 * prop.c / (b0 * sqrt_h0) + prop.c_prime / (b0 * b0) + prop.c * prop.alpha / b0,
        Flavor::Laplacian => n_m * 2.0 * a0 * prop.c / (b0 * sqrt_h0) + n_v * prop.c_prime / (b0 * b0) + prop.c * prop.alpha / b0,
    };
    let pair = OyPair { h: prop.h.clone(), gamma, flavor: prop.flavor, c: c_manifold, c_prime: c_second, cutoff: prop.cutoff };
    let manifold = check_gamma_conditions(&pair, &imm.induced_metric_field(), &prop.manifold_sampling)?;
    Ok(PropagationReport { fiber, h: h_report, a0, b0, c_manifold, c_second, alpha_observed, manifold })
}

/// Distance from the chart's edge kept by refined candidates.
const EDGE_MARGIN: f64 = 1e-3;
const REFINED_CANDIDATES: usize = 8;

/// Points `p_n` with `f(p_n) > sup f − 1/n` and `Hess f(p_n) ≤ (1/n) g`
/// (or `Δf(p_n) ≤ 1/n`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OySequence {
    pub flavor: Flavor,
    pub sup_estimate: f64,
    pub n: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Largest eigenvalue of `g⁻¹ Hess f`, or `Δf`, at each point.
    pub bounds: Vec<f64>,
}

fn second_order_bound(metric: &MetricField, f: &ScalarField, p: &Point, flavor: Flavor, cfg: FdConfig) -> Result<f64> {
    match flavor {
        Flavor::Hessian => Ok(max_relative_eigenvalue(&metric.at(p)?, &hessian(metric, f, p, cfg)?)),
        Flavor::Laplacian => laplacian(metric, f, p, cfg),
    }
}

/// Searches for an almost-maximum sequence of `f` over `region`. The
/// maximizer and the best samples are candidates; each choice is
/// re-evaluated with a different difference step before being accepted.
pub fn weak_oy_sequence(
    metric: &MetricField,
    f: &ScalarField,
    flavor: Flavor,
    n_list: &[f64],
    region: &Region,
    budget: usize,
    seed: u64,
) -> Result<OySequence> {
    let eval = |p: &Point| f.eval(p);
    let sup = estimate_extremum(eval, region, Mode::Sup, budget, seed)?;
    let mut candidates: Vec<(Point, f64)> = vec![(Point::from_vec(sup.witness.clone()), sup.value)];
    let mut samples = sample_field(&eval, region, budget, seed);
    samples.sort_by(|a, b| b.value.total_cmp(&a.value));
    // The maximizer may sit on the edge of the chart, where difference
    // stencils do not fit; maxima refined away from the edge are tried too.
    let inset: Vec<(f64, f64)> = metric.domain().bounds().iter().map(|&(lo, hi)| (lo + EDGE_MARGIN, hi - EDGE_MARGIN)).collect();
    let inside = |x: &[f64]| x.iter().zip(&inset).all(|(c, (lo, hi))| c > lo && c < hi);
    let refined: Vec<(Point, f64)> = samples
        .iter()
        .filter(|s| inside(s.point.as_slice()))
        .take(REFINED_CANDIDATES)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| {
            let neg = |x: &[f64]| if inside(x) { -f.eval(&Point::from_column_slice(x)) } else { f64::NAN };
            let (x, v) = nelder_mead(neg, s.point.as_slice(), 1e-2, NelderMeadOptions { max_evals: 1500, ftol: 1e-15, xtol: 1e-9 });
            (Point::from_vec(x), -v)
        })
        .collect();
    let sup_value = refined.iter().map(|c| c.1).fold(sup.value, f64::max);
    candidates.extend(refined);
    candidates.extend(samples.into_iter().take(64).map(|s| (s.point, s.value)));
    let cfg = FdConfig::default();
    let check_cfg = FdConfig::with_step(2e-4);
    let mut bounds: Vec<Option<f64>> = vec![None; candidates.len()];

    let mut out = OySequence { flavor, sup_estimate: sup_value, n: vec![], points: vec![], values: vec![], bounds: vec![] };
    for &n in n_list {
        let tol = 1.0 / n;
        let mut found = None;
        for (i, (p, v)) in candidates.iter().enumerate() {
            if *v <= sup_value - tol {
                continue;
            }
            let b = match bounds[i] {
                Some(b) => b,
                None => {
                    let b = second_order_bound(metric, f, p, flavor, cfg).unwrap_or(f64::INFINITY);
                    bounds[i] = Some(b);
                    b
                }
            };
            if b > tol {
                continue;
            }
            let value = f.value(p)?;
            let recheck = second_order_bound(metric, f, p, flavor, check_cfg)?;
            if value > sup_value - tol && recheck <= tol {
                found = Some((p.clone(), value, recheck));
                break;
            }
        }
        let (p, value, b) = found.ok_or(GeoError::NotFound { n })?;
        out.n.push(n);
        out.points.push(p.as_slice().to_vec());
        out.values.push(value);
        out.bounds.push(b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub holds: bool,
    /// Smallest `s_M − RHS` over the samples.
    pub min_slack: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// `−ρ² ∏_{j ≤ k} (log^{(j)} ρ)²`.
pub fn growth_bound(rho: f64, k: usize) -> Result<f64> {
    let mut prod = 1.0;
    let mut it = rho;
    for j in 1..=k {
        if !(it > 0.0) {
            return Err(GeoError::IterateDomainError { j, rho });
        }
        it = it.ln();
        if !(it > 0.0) {
            return Err(GeoError::IterateDomainError { j, rho });
        }
        prod *= it * it;
    }
    Ok(-rho * rho * prod)
}

/// Evaluates `s_M ≥ −ρ² ∏ (log^{(j)} ρ)²` at the given points.
pub fn scalar_growth_check(metric: &MetricField, rho: &DistanceFunction, k: usize, points: &[Point]) -> Result<GrowthReport> {
    let cfg = FdConfig::default();
    let mut worst = (f64::INFINITY, Vec::new());
    for p in points {
        let r = rho.eval(p)?;
        let rhs = growth_bound(r, k)?;
        let s = scalar_curvature(metric, p, cfg)?;
        let slack = s - rhs;
        if slack < worst.0 {
            worst = (slack, p.as_slice().to_vec());
        }
        if slack < -1e-4 * (1.0 + rhs.abs()) {
            return Ok(GrowthReport { holds: false, min_slack: slack, witness: p.as_slice().to_vec(), samples: points.len() });
        }
    }
    Ok(GrowthReport { holds: true, min_slack: worst.0, witness: worst.1, samples: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartDomain;
    use crate::immersion::sphere_in_product;
    use crate::warped::WarpedProduct;
    use std::f64::consts::PI;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn h_fn(f: fn(f64) -> f64) -> ScalarField {
        ScalarField::new("h", 1, move |t| f(t[0]))
    }

    #[test]
    fn h_conditions() {
        let quad = check_h_conditions(&h_fn(|t| t * t + 1.0), HGrid::default());
        assert!(quad.pass(), "{quad:?}");
        let lin = check_h_conditions(&h_fn(|t| t + 1.0), HGrid::default());
        assert!(lin.positive_nondecreasing.pass && !lin.bounded_growth_ratio.pass);
        let quartic = check_h_conditions(&h_fn(|t| t.powi(4) + 1.0), HGrid::default());
        assert!(!quartic.divergent_integral.pass);
        let decreasing = check_h_conditions(&h_fn(|t| 1.0 / (1.0 + t)), HGrid::default());
        assert!(!decreasing.positive_nondecreasing.pass);
    }

    #[test]
    fn constant_h_has_unbounded_growth_ratio() {
        let one = check_h_conditions(&h_fn(|_| 1.0), HGrid::default());
        assert!(one.positive_nondecreasing.pass && one.divergent_integral.pass);
        assert!(!one.bounded_growth_ratio.pass);
        assert!((one.bounded_growth_ratio.value - 1.0).abs() < 1e-9);
    }

    fn euclidean_sampling(n: usize) -> GammaSampling {
        let rays = (0..n).map(|i| Ray { start: Point::zeros(n), direction: crate::geometry::Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }), t_max: 1e3 }).collect();
        GammaSampling { region: Region::boxed(vec![(-50.0, 50.0); n]).unwrap(), rays, compact: false, budget: 200, seed: 3 }
    }

    #[test]
    fn squared_norm_is_a_pair_on_euclidean_space() {
        let pair = OyPair {
            h: h_fn(|t| t * t + 1.0),
            gamma: ScalarField::new("|x|^2", 3, |x| x.norm_squared()),
            flavor: Flavor::Hessian,
            c: 2.0,
            c_prime: 2.0,
            cutoff: 1.0,
        };
        let rep = check_gamma_conditions(&pair, &MetricField::euclidean(3), &euclidean_sampling(3)).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!((rep.gradient_bound.value - 1.0).abs() < 1e-6);
        let lap = OyPair { flavor: Flavor::Laplacian, c_prime: 6.0, ..pair.clone() };
        assert!(check_gamma_conditions(&lap, &MetricField::euclidean(3), &euclidean_sampling(3)).unwrap().pass());
        let tight = OyPair { c: 1.5, ..pair };
        assert!(!check_gamma_conditions(&tight, &MetricField::euclidean(3), &euclidean_sampling(3)).unwrap().gradient_bound.pass);
    }

    #[test]
    fn norm_is_a_pair_far_out() {
        let pair = OyPair {
            h: h_fn(|t| t * t + 1.0),
            gamma: ScalarField::new("|x|", 2, |x| x.norm()),
            flavor: Flavor::Hessian,
            c: 1.0,
            c_prime: 1.0,
            cutoff: 4.0,
        };
        assert!(check_gamma_conditions(&pair, &MetricField::euclidean(2), &euclidean_sampling(2)).unwrap().pass());
    }

    #[test]
    fn compact_and_rayless_cases() {
        let sampling = GammaSampling { region: Region::boxed(vec![(0.1, 3.0), (-3.0, 3.0)]).unwrap(), rays: vec![], compact: true, budget: 20, seed: 0 };
        let pair = OyPair {
            h: h_fn(|t| t * t + 1.0),
            gamma: ScalarField::constant(2, 0.0),
            flavor: Flavor::Hessian,
            c: 1.0,
            c_prime: 1.0,
            cutoff: 1.0,
        };
        assert!(check_gamma_conditions(&pair, &MetricField::euclidean(2), &sampling).unwrap().pass());
        let open = GammaSampling { compact: false, ..sampling };
        assert_eq!(check_gamma_conditions(&pair, &MetricField::euclidean(2), &open).unwrap_err(), GeoError::NoDivergentRays);
    }

    fn cylinder() -> (Immersion, Propagation) {
        let wp = WarpedProduct::new(
            "bowl",
            MetricField::euclidean(2),
            MetricField::euclidean(1),
            ScalarField::new("1+|x|^2/4", 2, |x| 1.0 + 0.25 * x.norm_squared()),
        )
        .unwrap();
        let radius = 0.8;
        let dom = ChartDomain::new(vec![(-PI, PI), (f64::NEG_INFINITY, f64::INFINITY)], "angle, height").unwrap();
        let imm = Immersion::into_warped("cylinder", dom, wp, move |p| pt(&[radius * p[0].cos(), radius * p[0].sin(), p[1]])).unwrap();
        let s2 = ScalarField::new("s^2", 1, |v| v[0] * v[0]);
        let prop = Propagation {
            h: h_fn(|t| t * t + 1.0),
            fiber_gamma: s2,
            flavor: Flavor::Hessian,
            c: 2.0,
            c_prime: 2.0,
            alpha: 2.0,
            cutoff: 1.0,
            base_box: Region::boxed(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            fiber_sampling: GammaSampling {
                region: Region::boxed(vec![(-100.0, 100.0)]).unwrap(),
                rays: vec![Ray { start: pt(&[0.0]), direction: pt(&[1.0]), t_max: 1e3 }],
                compact: false,
                budget: 64,
                seed: 1,
            },
            manifold_sampling: GammaSampling {
                region: Region::boxed(vec![(-3.0, 3.0), (-30.0, 30.0)]).unwrap(),
                rays: vec![Ray { start: pt(&[0.0, 0.0]), direction: pt(&[0.0, 1.0]), t_max: 1e3 }],
                compact: false,
                budget: 64,
                seed: 1,
            },
        };
        (imm, prop)
    }

    #[test]
    fn pair_propagates_to_a_cylinder() {
        let (imm, prop) = cylinder();
        let rep = propagate_oy_pair(&imm, &prop).unwrap();
        assert!(rep.manifold.pass(), "{rep:?}");
        assert!((rep.b0 - 1.0).abs() < 1e-6);
        assert!((rep.a0 - 2f64.sqrt() / 3.0).abs() < 1e-6, "{}", rep.a0);
        let lap = Propagation { flavor: Flavor::Laplacian, ..prop.clone() };
        assert!(propagate_oy_pair(&imm, &lap).unwrap().manifold.pass());
        let small_alpha = Propagation { alpha: 1e-3, ..prop };
        assert!(matches!(propagate_oy_pair(&imm, &small_alpha), Err(GeoError::HypothesisFailed(_))));
    }

    #[test]
    fn propagation_checks_base_containment() {
        let (imm, mut prop) = cylinder();
        prop.base_box = Region::boxed(vec![(-0.5, 0.5), (-0.5, 0.5)]).unwrap();
        assert!(matches!(propagate_oy_pair(&imm, &prop), Err(GeoError::HypothesisFailed(_))));
    }

    #[test]
    fn weak_sequence_on_a_compact_sphere() {
        let s = sphere_in_product(3, 0.5);
        let f = s.pull_back(&ScalarField::new("|x|^2", 4, |q| q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
        let region = Region::from_domain(s.domain()).unwrap();
        let n_list = [1.0, 10.0, 1e3, 1e6];
        let seq = weak_oy_sequence(&s.induced_metric_field(), &f, Flavor::Hessian, &n_list, &region, 256, 5).unwrap();
        assert!((seq.sup_estimate - 0.25).abs() < 1e-9);
        for (i, n) in n_list.iter().enumerate() {
            assert!(seq.values[i] > seq.sup_estimate - 1.0 / n);
            assert!(seq.bounds[i] <= 1.0 / n);
        }
    }

    #[test]
    fn weak_sequence_for_concave_function() {
        let f = ScalarField::new("-|x|^2", 2, |x| -x.norm_squared());
        let region = Region::boxed(vec![(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let seq = weak_oy_sequence(&MetricField::euclidean(2), &f, Flavor::Laplacian, &[1.0, 1e4], &region, 128, 2).unwrap();
        assert!(seq.points.iter().all(|p| p[0].abs() < 1e-2 && p[1].abs() < 1e-2));
    }

    #[test]
    fn weak_sequence_reports_failure() {
        // a strictly convex function has no almost-maximum with small Hessian
        let f = ScalarField::new("|x|^2", 1, |x| x[0] * x[0]);
        let region = Region::boxed(vec![(-1.0, 1.0)]).unwrap();
        let err = weak_oy_sequence(&MetricField::euclidean(1), &f, Flavor::Hessian, &[10.0], &region, 64, 0).unwrap_err();
        assert!(matches!(err, GeoError::NotFound { .. }));
    }

    fn rotational(name: &'static str, warp: fn(f64) -> f64) -> MetricField {
        let dom = ChartDomain::new(vec![(0.0, f64::INFINITY), (-PI, PI)], "polar").unwrap();
        MetricField::diagonal(name, dom, move |p| Vector::from_vec(vec![1.0, warp(p[0]).powi(2)]))
    }

    #[test]
    fn scalar_growth_on_model_surfaces() {
        let points: Vec<Point> = (0..6).map(|i| pt(&[3.0 + 0.2 * i as f64, 0.3 * i as f64 - 0.7])).collect();
        let radial = DistanceFunction::closed(pt(&[0.0, 0.0]), ScalarField::new("r", 2, |p| p[0]));
        let hyp = rotational("hyperbolic", f64::sinh);
        let rep = scalar_growth_check(&hyp, &radial, 1, &points).unwrap();
        assert!(rep.holds && rep.min_slack > 0.0, "{rep:?}");

        let steep = rotational("steep", |r| (r.powi(3) / 3.0).exp());
        let pts: Vec<Point> = (0..6).map(|i| pt(&[3.0 + 0.2 * i as f64, 0.1])).collect();
        assert!(!scalar_growth_check(&steep, &radial, 1, &pts).unwrap().holds);

        let flat = MetricField::euclidean(2);
        let rep = scalar_growth_check(&flat, &DistanceFunction::euclidean(pt(&[0.0, 0.0])), 2, &[pt(&[20.0, 0.0])]).unwrap();
        assert!(rep.holds && (rep.min_slack - 400.0 * 20f64.ln().ln().powi(2) * 20f64.ln().powi(2)).abs() < 1e-3);
    }

    #[test]
    fn iterated_logarithm_domain() {
        assert!(matches!(growth_bound(2.0, 2), Err(GeoError::IterateDomainError { j: 2, .. })));
        assert!(growth_bound(1e6, 2).is_ok());
        assert_eq!(growth_bound(0.5, 1), Err(GeoError::IterateDomainError { j: 1, rho: 0.5 }));
    }
}
