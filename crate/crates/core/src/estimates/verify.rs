use nalgebra::DMatrix;

use crate::comparison::{c_b, phi_b, phi_b_prime, phi_b_second, radial_bound_check, SamplingOptions};
use crate::error::{GeoError, Result};
use crate::estimates::report::*;
use crate::estimates::{estimate_extremum, sample_field, Estimate, Extremum, Mode, Region, Scenario};
use crate::geometry::{gram_schmidt, inner, null_space, orthonormal_frame, riemann, FdConfig, Point, ScalarField, Vector};
use crate::omori_yau::{weak_oy_sequence, Flavor};
use crate::otsuki::{definiteness_check, find_otsuki_pair, SymmetricBilinearForm};
use crate::submersion::region_points;

/// The levels `n` at which almost-maximum sequences are sought.
pub const SEQUENCE_LEVELS: [f64; 3] = [10.0, 1e3, 1e6];
/// Largest `|A_X Y|` on horizontal frames for the integrable branch.
pub const INTEGRABLE_TOLERANCE: f64 = 1e-6;
const DIAGNOSTIC_POINTS: usize = 24;
const RADIAL_SAMPLES: usize = 64;

pub fn verify(sc: &Scenario, estimate: Estimate) -> Result<EstimateReport> {
    match estimate {
        Estimate::Sectional => verify_sectional(sc),
        Estimate::Mean => verify_mean(sc),
        Estimate::SubSectional => verify_sub_sectional(sc),
        Estimate::SubMean => verify_sub_mean(sc),
    }
}

pub fn verify_sectional(sc: &Scenario) -> Result<EstimateReport> {
    if sc.warped().is_none() {
        return Err(GeoError::AmbientNotWarped);
    }
    sectional(sc, Estimate::Sectional)
}

pub fn verify_sub_sectional(sc: &Scenario) -> Result<EstimateReport> {
    sectional(sc, Estimate::SubSectional)
}

pub fn verify_mean(sc: &Scenario) -> Result<EstimateReport> {
    if sc.warped().is_none() {
        return Err(GeoError::AmbientNotWarped);
    }
    mean(sc, Estimate::Mean)
}

pub fn verify_sub_mean(sc: &Scenario) -> Result<EstimateReport> {
    mean(sc, Estimate::SubMean)
}

/// An orthonormal basis (in the induced metric) of the vectors of `T_pM`
/// whose images are horizontal.
pub fn horizontal_subspace(sc: &Scenario, p: &Point) -> Result<Vec<Vector>> {
    dimension_hypothesis(sc)?;
    horizontal_basis(sc, p)
}

fn horizontal_basis(sc: &Scenario, p: &Point) -> Result<Vec<Vector>> {
    let imm = sc.immersion();
    let q = imm.map(p)?;
    let j = imm.jacobian(p)?;
    let split = sc.projection().splitting(&q)?;
    let kernel = null_space(&(&split.vertical * &j), 1e-8);
    let basis = gram_schmidt(&imm.induced_metric(p)?, &kernel, 1e-10);
    let expected = sc.n_m().saturating_sub(sc.n_v());
    if basis.len() < expected {
        return Err(GeoError::HypothesisFailed(format!(
            "horizontal subspace at {:?} has dimension {} < n_M - n_V = {expected}",
            p.as_slice(),
            basis.len()
        )));
    }
    Ok(basis)
}

fn dimension_hypothesis(sc: &Scenario) -> Result<HypothesisResult> {
    let (m, v, x) = (sc.n_m(), sc.n_v(), sc.n_x());
    if 2 * m < 2 * v + x + 1 {
        return Err(GeoError::DimensionHypothesisFailed { n_m: m, n_v: v, n_x: x });
    }
    Ok(HypothesisResult::pass("dimension", format!("2*{m} >= 2*{v} + {x} + 1; n_X = {x}, n_X >= 3: {}", x >= 3)))
}

fn weak_oy_hypothesis(sc: &Scenario, flavor: Flavor) -> Result<HypothesisResult> {
    let which = match flavor {
        Flavor::Hessian => "Hessian",
        Flavor::Laplacian => "Laplacian",
    };
    let a = sc.assertions();
    if a.compact {
        Ok(HypothesisResult::pass("weak-oy", format!("M is compact, so the weak principle for the {which} holds")))
    } else if a.weak_oy {
        Ok(HypothesisResult::asserted("weak-oy", format!("weak principle for the {which} asserted by the scenario")))
    } else {
        Err(GeoError::HypothesisFailed(format!("weak Omori-Yau principle for the {which} is neither implied by compactness nor asserted")))
    }
}

fn radius_hypothesis(sc: &Scenario) -> HypothesisResult {
    HypothesisResult::pass("radius", format!("0 < r = {} < declared injectivity radius {}", sc.r(), sc.inj_radius()))
}

/// Base distance of the image of a point of `M`.
fn image_distance(sc: &Scenario, p: &Point) -> Result<f64> {
    let q = sc.immersion().map(p)?;
    let x = sc.projection().project(&q)?;
    sc.distance().eval(&x)
}

fn containment(sc: &Scenario) -> Result<HypothesisResult> {
    let value = |p: &Point| match image_distance(sc, p) {
        Ok(d) => d,
        Err(GeoError::OutsideDeclaredInjRadius { .. }) => f64::MAX,
        Err(_) => f64::NAN,
    };
    let samples = sample_field(&value, sc.region(), sc.budget(), sc.seed());
    let worst = samples.iter().max_by(|a, b| a.value.total_cmp(&b.value)).ok_or(GeoError::EmptyRegion)?;
    if worst.value >= sc.r() {
        let distance = if worst.value == f64::MAX { f64::INFINITY } else { worst.value };
        return Err(GeoError::ContainmentViolated { witness: worst.point.as_slice().to_vec(), distance, radius: sc.r() });
    }
    Ok(HypothesisResult::pass(
        "containment",
        format!("max base distance {:.6} < r over {} samples", worst.value, samples.len()),
    ))
}

fn radial_hypothesis(sc: &Scenario) -> Result<HypothesisResult> {
    let opts = SamplingOptions { samples: RADIAL_SAMPLES, seed: sc.seed(), inj_radius: sc.inj_radius() };
    let report = radial_bound_check(sc.base(), sc.x0(), sc.r(), sc.b(), opts)?;
    if !report.pass {
        return Err(GeoError::HypothesisFailed(format!(
            "radial sectional curvature {} exceeds b = {} at {:?}",
            report.max_radial_curvature,
            sc.b(),
            report.witness
        )));
    }
    let detail = if report.max_radial_curvature.is_finite() {
        format!("max radial curvature {:.6} <= b = {}", report.max_radial_curvature, sc.b())
    } else {
        "no planes through the radial direction".to_string()
    };
    Ok(HypothesisResult::pass("radial-curvature", detail))
}

fn extremum_point(e: &Extremum) -> Point {
    Point::from_vec(e.witness.clone())
}

fn sup_sectional(sc: &Scenario) -> Result<(f64, Witness)> {
    let metric = sc.immersion().induced_metric_field();
    let range = |p: &Point| riemann(&metric, p, FdConfig::default())?.sectional_range(&orthonormal_frame(&metric.at(p)?));
    let ext = estimate_extremum(|p: &Point| range(p).map_or(f64::NAN, |r| r.max), sc.region(), Mode::Sup, sc.budget(), sc.seed())?;
    let at = range(&extremum_point(&ext))?;
    let plane = [at.max_plane.0.as_slice().to_vec(), at.max_plane.1.as_slice().to_vec()];
    Ok((ext.value, Witness { point: ext.witness, plane: Some(plane), samples: ext.samples }))
}

fn sup_mean_curvature(sc: &Scenario) -> Result<(f64, Witness)> {
    let imm = sc.immersion();
    let norm = |p: &Point| imm.mean_curvature_vector(p).and_then(|h| imm.ambient_norm(p, &h)).unwrap_or(f64::NAN);
    let ext = estimate_extremum(norm, sc.region(), Mode::Sup, sc.budget(), sc.seed())?;
    Ok((ext.value, Witness { point: ext.witness, plane: None, samples: ext.samples }))
}

fn ball(sc: &Scenario) -> Result<Region> {
    Region::geodesic_ball(sc.base(), sc.x0(), sc.r())
}

fn inf_base_curvature(sc: &Scenario) -> Result<Extremum> {
    let base = sc.base();
    let value = |x: &Point| -> f64 {
        let min = || -> Result<f64> { Ok(riemann(base, x, FdConfig::default())?.sectional_range(&orthonormal_frame(&base.at(x)?))?.min) };
        min().unwrap_or(f64::NAN)
    };
    estimate_extremum(value, &ball(sc)?, Mode::Inf, sc.budget(), sc.seed())
}

fn psi0(sc: &Scenario) -> Result<Extremum> {
    let wp = sc.warped().ok_or(GeoError::AmbientNotWarped)?;
    let value = |x: &Point| -> f64 {
        let norm = || -> Result<f64> { wp.base().norm(x, &wp.log_warp_gradient(x)?) };
        norm().unwrap_or(f64::NAN)
    };
    estimate_extremum(value, &ball(sc)?, Mode::Sup, sc.budget(), sc.seed())
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    let w = 0.05 * (hi - lo) + 1e-3;
    (lo - w, hi + w)
}

/// Window of the total space covering the image of `M` and, for warped
/// products, the whole ball in the base directions.
fn default_preimage_box(sc: &Scenario) -> Result<Vec<(f64, f64)>> {
    let imm = sc.immersion();
    let n = sc.projection().n_total();
    let mut hull = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    let widen = |h: &mut Vec<(f64, f64)>, offset: usize, pt: &Point| {
        for (k, c) in pt.iter().enumerate() {
            h[offset + k].0 = h[offset + k].0.min(*c);
            h[offset + k].1 = h[offset + k].1.max(*c);
        }
    };
    for p in region_points(sc.region(), sc.budget(), sc.seed()) {
        if let Ok(q) = imm.map(&p) {
            widen(&mut hull, 0, &q);
        }
    }
    if sc.warped().is_some() {
        let nx = sc.n_x();
        for h in hull.iter_mut().take(nx) {
            *h = (f64::INFINITY, f64::NEG_INFINITY);
        }
        let ball = ball(sc)?;
        for x in region_points(&ball, sc.budget(), sc.seed()) {
            widen(&mut hull, 0, &x);
        }
    }
    let domain = sc.projection().total().domain().bounds();
    hull.iter()
        .zip(domain)
        .map(|(&(lo, hi), &(dlo, dhi))| {
            if !(lo <= hi) {
                return Err(GeoError::EmptyRegion);
            }
            let (lo, hi) = pad(lo, hi);
            let eps = |v: f64| 1e-9 * (1.0 + v.abs());
            Ok((lo.max(dlo + eps(dlo)), hi.min(dhi - eps(dhi))))
        })
        .collect()
}

/// `π⁻¹(B(x0; r))` inside a coordinate window.
pub fn preimage_region(sc: &Scenario) -> Result<Region> {
    let bounds = match sc.preimage_box() {
        Some(b) => b.to_vec(),
        None => default_preimage_box(sc)?,
    };
    let sub = sc.projection().clone();
    let rho = sc.distance().clone();
    let r = sc.r();
    Region::filtered(bounds, move |q| {
        sub.project(q).ok().and_then(|x| rho.eval(&x).ok()).is_some_and(|d| d <= r)
    })
}

fn tensor_budget(sc: &Scenario) -> usize {
    (sc.budget() / 4).max(25)
}

fn max_horizontal_a(sc: &Scenario, region: &Region) -> Result<f64> {
    let sub = sc.projection();
    let mut worst = 0.0f64;
    for q in region_points(region, 8, sc.seed()) {
        let frame = sub.horizontal_frame(&q)?;
        let g = sub.total().at(&q)?;
        for i in 0..frame.len() {
            for j in i + 1..frame.len() {
                let a = sub.tensor_a(&q, &frame[i], &frame[j])?;
                worst = worst.max(inner(&g, &a, &a).sqrt());
            }
        }
    }
    Ok(worst)
}

/// `φ_b ∘ ρ` on the base.
fn base_objective(sc: &Scenario) -> ScalarField {
    let rho = sc.distance().field();
    let b = sc.b();
    ScalarField::new("phi_b(rho)", sc.n_x(), move |x| phi_b(b, rho.eval(x)).unwrap_or(f64::NAN))
}

/// `f = φ_b ∘ ρ ∘ π ∘ φ` on `M`.
fn objective(sc: &Scenario) -> ScalarField {
    sc.immersion().pull_back(&sc.projection().lift_scalar(&base_objective(sc)))
}

fn caveats(hyps: &[HypothesisResult]) -> Vec<String> {
    hyps.iter().filter(|h| h.status == HypothesisStatus::Asserted).map(|h| format!("asserted: {}", h.name)).collect()
}

fn sectional(sc: &Scenario, estimate: Estimate) -> Result<EstimateReport> {
    let hypotheses = vec![
        dimension_hypothesis(sc)?,
        weak_oy_hypothesis(sc, Flavor::Hessian)?,
        radius_hypothesis(sc),
        containment(sc)?,
        radial_hypothesis(sc)?,
    ];
    let cb = c_b(sc.b(), sc.r())?;
    let (lhs, lhs_witness) = sup_sectional(sc)?;
    let inf_base = inf_base_curvature(sc)?;
    let mut breakdown = RhsBreakdown {
        n_m: sc.n_m(),
        n_v: sc.n_v(),
        n_x: sc.n_x(),
        c_b_r: cb,
        c_b_r_squared: Some(cb * cb),
        inf_base_curvature: Some(inf_base.clone()),
        inf_horizontal_curvature: None,
        psi0: None,
        tau0: None,
        alpha0: None,
    };
    let tol = sc.tolerance();
    let base_rhs = cb * cb + inf_base.value;
    let (rhs, integrable) = match estimate {
        Estimate::SubSectional => {
            let pre = preimage_region(sc)?;
            let sec = sc.projection().sec_hor_min(&pre, sc.budget(), sc.seed())?;
            let rhs = cb * cb + sec.value;
            breakdown.inf_horizontal_curvature = Some(sec);
            let max_a = max_horizontal_a(sc, &pre)?;
            let integrable = (max_a <= INTEGRABLE_TOLERANCE).then(|| IntegrableCase {
                max_horizontal_a: max_a,
                inf_base_curvature: inf_base.clone(),
                rhs: base_rhs,
                margin: lhs - base_rhs,
                verdict: Verdict::decide(lhs, base_rhs, tol),
            });
            (rhs, integrable)
        }
        _ => (base_rhs, None),
    };
    let diagnostics = sectional_diagnostics(sc);
    let mut caveats = caveats(&hypotheses);
    if let Some(e) = &diagnostics.error {
        caveats.push(format!("diagnostic: {e}"));
    }
    Ok(EstimateReport {
        scenario: sc.name().to_string(),
        estimate,
        hypotheses,
        lhs,
        lhs_witness,
        rhs,
        breakdown,
        tolerance: tol,
        margin: lhs - rhs,
        verdict: Verdict::decide(lhs, rhs, tol),
        vacuous: false,
        caveats,
        integrable,
        diagnostics: Diagnostics::Sectional(diagnostics),
    })
}

fn sectional_diagnostics(sc: &Scenario) -> SectionalDiagnostics {
    let metric = sc.immersion().induced_metric_field();
    let seq = match weak_oy_sequence(&metric, &objective(sc), Flavor::Hessian, &SEQUENCE_LEVELS, sc.region(), sc.budget(), sc.seed()) {
        Ok(seq) => seq,
        Err(e) => return SectionalDiagnostics { sequence: None, steps: vec![], min_s_n: None, error: Some(e.to_string()) },
    };
    let mut steps = Vec::new();
    let mut error = None;
    for (n, point) in seq.n.iter().zip(&seq.points) {
        match sectional_step(sc, *n, &Point::from_vec(point.clone())) {
            Ok(step) => steps.push(step),
            Err(e) => {
                error = Some(format!("step n = {n}: {e}"));
                break;
            }
        }
    }
    let min_s_n = steps.iter().map(|s| s.s_n).reduce(f64::min);
    SectionalDiagnostics { sequence: Some(seq), steps, min_s_n, error }
}

/// Orthonormal basis of the normal space of the image at `p`.
fn normal_frame(sc: &Scenario, p: &Point) -> Result<(DMatrix<f64>, Vec<Vector>)> {
    let imm = sc.immersion();
    let q = imm.map(p)?;
    let g = imm.ambient().at(&q)?;
    let j = imm.jacobian(p)?;
    let n = q.len();
    let mut family: Vec<Vector> = imm.tangent_frame(p)?.iter().map(|e| &j * e).collect();
    let m = family.len();
    family.extend((0..n).map(|i| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })));
    let frame = gram_schmidt(&g, &family, 1e-8).into_iter().skip(m).collect();
    Ok((g, frame))
}

fn sectional_step(sc: &Scenario, n: f64, p: &Point) -> Result<SectionalStep> {
    let imm = sc.immersion();
    let (b, tol) = (sc.b(), sc.tolerance());
    let s_n = image_distance(sc, p)?;
    let basis = horizontal_basis(sc, p)?;
    let (g, normal) = normal_frame(sc, p)?;
    let k = basis.len();
    let mut components = vec![DMatrix::zeros(k, k); normal.len()];
    for a in 0..k {
        for c in a..k {
            let s = imm.second_fundamental_form(p, &basis[a], &basis[c])?;
            for (comp, nu) in components.iter_mut().zip(&normal) {
                let v = inner(&g, &s, nu);
                comp[(a, c)] = v;
                comp[(c, a)] = v;
            }
        }
    }
    let phi_prime = phi_b_prime(b, s_n)?;
    let lower_bound = if s_n > 0.0 { c_b(b, s_n)? - 1.0 / (n * phi_prime) } else { f64::NEG_INFINITY };
    let mut step = SectionalStep {
        n,
        point: p.as_slice().to_vec(),
        s_n,
        horizontal_dim: k,
        normal_dim: normal.len(),
        min_second_fundamental: 0.0,
        lower_bound,
        lower_bound_holds: false,
        definite: false,
        pair: None,
        note: None,
    };
    if normal.is_empty() {
        step.note = Some("the image has no normal directions".into());
        return Ok(step);
    }
    let form = SymmetricBilinearForm::euclidean(components)?;
    let def = definiteness_check(&form, sc.seed());
    step.min_second_fundamental = def.min_norm;
    step.lower_bound_holds = def.min_norm >= lower_bound - tol * (1.0 + lower_bound.abs());
    step.definite = def.definite;
    if !def.definite {
        step.note = Some("second fundamental form has a null direction on the horizontal subspace".into());
        return Ok(step);
    }
    if normal.len() >= k {
        step.note = Some("normal space too large for an Otsuki pair".into());
        return Ok(step);
    }
    match find_otsuki_pair(&form, sc.seed()) {
        Ok(pair) => {
            let combine = |v: &Vector| basis.iter().zip(v.iter()).fold(Vector::zeros(sc.n_m()), |acc, (e, c)| acc + e * *c);
            let (e1, e2) = (combine(&pair.first()), combine(&pair.second()));
            let gauss_defect = imm.gauss_sectional_defect(p, &e1, &e2)?;
            let bound = (c_b(b, sc.r())? - 1.0 / (n * phi_prime)).max(0.0).powi(2);
            step.pair = Some(PairStep {
                residual: pair.residual,
                angle: pair.angle,
                gauss_defect,
                bound,
                holds: gauss_defect >= bound - tol * (1.0 + bound),
            });
        }
        Err(e) => step.note = Some(e.to_string()),
    }
    Ok(step)
}

fn mean(sc: &Scenario, estimate: Estimate) -> Result<EstimateReport> {
    let hypotheses = vec![weak_oy_hypothesis(sc, Flavor::Laplacian)?, radius_hypothesis(sc), containment(sc)?, radial_hypothesis(sc)?];
    let cb = c_b(sc.b(), sc.r())?;
    let (lhs, lhs_witness) = sup_mean_curvature(sc)?;
    let (n_m, n_v) = (sc.n_m() as f64, sc.n_v() as f64);
    let mut breakdown = RhsBreakdown {
        n_m: sc.n_m(),
        n_v: sc.n_v(),
        n_x: sc.n_x(),
        c_b_r: cb,
        c_b_r_squared: None,
        inf_base_curvature: None,
        inf_horizontal_curvature: None,
        psi0: None,
        tau0: None,
        alpha0: None,
    };
    let (correction, alpha0) = match estimate {
        Estimate::SubMean => {
            let sups = sc.projection().tensor_sups(&preimage_region(sc)?, tensor_budget(sc), sc.seed())?;
            let (tau, alpha) = (sups.tau0.value, sups.alpha0.value);
            breakdown.tau0 = Some(sups.tau0);
            breakdown.alpha0 = Some(sups.alpha0);
            (n_m * alpha + n_v * tau, Some(alpha))
        }
        _ => {
            let psi = psi0(sc)?;
            let c = n_v * psi.value;
            breakdown.psi0 = Some(psi);
            (c, None)
        }
    };
    let rhs = (n_m - n_v) * cb - correction;
    let tol = sc.tolerance();
    let diagnostics = mean_diagnostics(sc, correction, alpha0);
    let mut caveats = caveats(&hypotheses);
    if let Some(e) = &diagnostics.error {
        caveats.push(format!("diagnostic: {e}"));
    }
    Ok(EstimateReport {
        scenario: sc.name().to_string(),
        estimate,
        hypotheses,
        lhs,
        lhs_witness,
        rhs,
        breakdown,
        tolerance: tol,
        margin: lhs - rhs,
        verdict: Verdict::decide(lhs, rhs, tol),
        vacuous: rhs <= 0.0,
        caveats,
        integrable: None,
        diagnostics: Diagnostics::Mean(diagnostics),
    })
}

/// `φ_b'(s)[C_b(s)(n_M − n_V) − correction − |H|]`, written with `φ_b''`
/// so that it stays finite at `s = 0`.
fn mean_bound(sc: &Scenario, s: f64, correction: f64, h: f64) -> Result<f64> {
    let (b, dim) = (sc.b(), sc.n_m() as f64 - sc.n_v() as f64);
    Ok(phi_b_second(b, s)? * dim - phi_b_prime(b, s)? * (correction + h))
}

fn mean_curvature_norm(sc: &Scenario, p: &Point) -> Result<f64> {
    let imm = sc.immersion();
    imm.ambient_norm(p, &imm.mean_curvature_vector(p)?)
}

fn mean_diagnostics(sc: &Scenario, correction: f64, alpha0: Option<f64>) -> MeanDiagnostics {
    let mut out = MeanDiagnostics {
        sequence: None,
        steps: vec![],
        laplacian_slack: f64::INFINITY,
        laplacian_witness: vec![],
        laplacian_holds: false,
        max_vertical_sum: 0.0,
        vertical_sum_holds: false,
        min_a_term: None,
        a_term_holds: None,
        samples: 0,
        error: None,
    };
    if let Err(e) = pointwise_mean_checks(sc, correction, alpha0, &mut out) {
        out.error = Some(e.to_string());
        return out;
    }
    let metric = sc.immersion().induced_metric_field();
    match weak_oy_sequence(&metric, &objective(sc), Flavor::Laplacian, &SEQUENCE_LEVELS, sc.region(), sc.budget(), sc.seed()) {
        Ok(seq) => {
            for (n, point) in seq.n.iter().zip(&seq.points) {
                let p = Point::from_vec(point.clone());
                let step = || -> Result<MeanStep> {
                    let s_n = image_distance(sc, &p)?;
                    let value = mean_bound(sc, s_n, correction, mean_curvature_norm(sc, &p)?)?;
                    Ok(MeanStep { n: *n, point: point.clone(), s_n, value, holds: value < 1.0 / n + sc.tolerance() })
                };
                match step() {
                    Ok(s) => out.steps.push(s),
                    Err(e) => {
                        out.error = Some(format!("step n = {n}: {e}"));
                        break;
                    }
                }
            }
            out.sequence = Some(seq);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

fn pointwise_mean_checks(sc: &Scenario, correction: f64, alpha0: Option<f64>, out: &mut MeanDiagnostics) -> Result<()> {
    let imm = sc.immersion();
    let sub = sc.projection();
    let lifted = sub.lift_scalar(&base_objective(sc));
    let rho = sc.distance().field();
    let tol = sc.tolerance();
    let points = region_points(sc.region(), DIAGNOSTIC_POINTS, sc.seed());
    let mut worst_scale = 0.0f64;
    let mut min_a = f64::INFINITY;
    for p in &points {
        let q = imm.map(p)?;
        let split = sub.splitting(&q)?;
        let g = &split.metric;
        let j = imm.jacobian(p)?;
        let frame = imm.tangent_frame(p)?;
        let laplacian: f64 = frame.iter().map(|e| imm.composed_hessian(&lifted, p, e)).sum::<Result<f64>>()?;
        let bound = mean_bound(sc, image_distance(sc, p)?, correction, mean_curvature_norm(sc, p)?)?;
        worst_scale = worst_scale.max(bound.abs());
        let slack = laplacian - bound;
        if slack < out.laplacian_slack {
            out.laplacian_slack = slack;
            out.laplacian_witness = p.as_slice().to_vec();
        }
        let vertical: f64 = frame
            .iter()
            .map(|e| {
                let v = &split.vertical * (&j * e);
                inner(g, &v, &v)
            })
            .sum();
        out.max_vertical_sum = out.max_vertical_sum.max(vertical);
        if alpha0.is_some() {
            let grad = sub.lift_gradient(&rho, &q)?;
            for e in &frame {
                let xi = &j * e;
                let (xh, xv) = (&split.horizontal * &xi, &split.vertical * &xi);
                if xh.amax() == 0.0 || xv.amax() == 0.0 {
                    min_a = min_a.min(0.0);
                    continue;
                }
                min_a = min_a.min(2.0 * inner(g, &sub.tensor_a(&q, &xh, &grad)?, &xv));
            }
        }
    }
    out.samples = points.len();
    out.laplacian_holds = out.laplacian_slack >= -tol * (1.0 + worst_scale);
    out.vertical_sum_holds = out.max_vertical_sum <= sc.n_v() as f64 + 1e-8;
    if let Some(alpha) = alpha0 {
        out.min_a_term = Some(min_a);
        out.a_term_holds = Some(min_a >= -alpha - tol * (1.0 + alpha));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::{Assertions, ScenarioAmbient};
    use crate::geometry::{ChartDomain, DistanceFunction, MetricField};
    use crate::immersion::{self, sphere_chart, sphere_in_euclidean, sphere_in_product, Immersion};
    use crate::submersion;
    use crate::warped;

    const COMPACT: Assertions = Assertions { compact: true, proper: true, weak_oy: false };

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn sphere_scenario(k: usize, r: f64) -> Scenario {
        let imm = sphere_in_product(k, 0.5);
        let wp = imm.warped().unwrap().clone();
        Scenario::new(format!("S{k}-in-product"), ScenarioAmbient::Warped(wp), imm, Point::zeros(k), r, 0.0, 1e9)
            .unwrap()
            .with_distance(DistanceFunction::euclidean(Point::zeros(k)))
            .with_assertions(COMPACT)
    }

    #[test]
    fn sectional_estimate_on_round_sphere() {
        let sc = sphere_scenario(3, 0.6);
        let rep = verify_sectional(&sc).unwrap();
        assert!((rep.lhs - 4.0).abs() < 0.01, "{}", rep.lhs);
        assert!((rep.rhs - 1.0 / 0.36).abs() < 1e-6, "{}", rep.rhs);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert_eq!(rep.recomputed_verdict(), rep.verdict);
        assert!(rep.caveats.is_empty());
        let Diagnostics::Sectional(d) = &rep.diagnostics else { panic!("wrong diagnostics") };
        assert!(d.error.is_none(), "{:?}", d.error);
        assert_eq!(d.steps.len(), 3);
        for s in &d.steps {
            assert!(s.lower_bound_holds && s.definite && s.horizontal_dim >= 2, "{s:?}");
            assert!(s.pair.as_ref().unwrap().holds, "{s:?}");
        }
        let tight = verify_sectional(&sc.with_radius(0.501).unwrap()).unwrap();
        assert_eq!(tight.verdict, Verdict::Pass);
        assert!(tight.margin < rep.margin && tight.margin > 0.0);
    }

    #[test]
    fn dimension_hypothesis_failure() {
        let wp = warped::product(MetricField::euclidean(3), MetricField::euclidean(1));
        let s2 = sphere_in_euclidean(2, 0.5);
        let imm = Immersion::into_warped("S2-slice", sphere_chart(2), wp.clone(), move |t| s2.map_raw(t).insert_row(3, 0.0)).unwrap();
        let sc = Scenario::new("bad", ScenarioAmbient::Warped(wp), imm, Point::zeros(3), 0.6, 0.0, 1e9).unwrap().with_assertions(COMPACT);
        assert_eq!(verify_sectional(&sc).unwrap_err(), GeoError::DimensionHypothesisFailed { n_m: 2, n_v: 1, n_x: 3 });
        assert!(horizontal_subspace(&sc, &pt(&[1.0, 0.3])).is_err());
    }

    #[test]
    fn horizontal_subspaces() {
        let sc = sphere_scenario(3, 0.6);
        for p in region_points(sc.region(), 10, 4) {
            let basis = horizontal_subspace(&sc, &p).unwrap();
            assert!(basis.len() >= 2);
            let j = sc.immersion().jacobian(&p).unwrap();
            for e in &basis {
                assert!((&j * e)[3].abs() < 1e-8);
            }
        }
        let s3 = sphere_in_euclidean(3, 1.0);
        let flat = Scenario::new(
            "fiberless",
            ScenarioAmbient::Submersion(submersion::identity(MetricField::euclidean(4))),
            s3,
            Point::zeros(4),
            1.5,
            0.0,
            1e9,
        )
        .unwrap();
        assert_eq!(horizontal_subspace(&flat, &pt(&[1.0, 1.2, 0.3])).unwrap().len(), 3);
    }

    #[test]
    fn mean_estimate_on_round_sphere() {
        let sc = sphere_scenario(2, 0.6);
        let rep = verify_mean(&sc).unwrap();
        assert!((rep.lhs - 4.0).abs() < 0.01);
        assert!((rep.rhs - 1.0 / 0.6).abs() < 1e-6);
        assert_eq!(rep.breakdown.psi0.as_ref().unwrap().value, 0.0);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(!rep.vacuous);
        let Diagnostics::Mean(d) = &rep.diagnostics else { panic!("wrong diagnostics") };
        assert!(d.error.is_none(), "{:?}", d.error);
        assert!(d.laplacian_holds && d.vertical_sum_holds && d.max_vertical_sum <= 1.0 + 1e-8, "{d:?}");
        assert!(d.steps.iter().all(|s| s.holds));
    }

    #[test]
    fn fiber_circle_is_vacuous() {
        let wp = warped::polar_plane();
        let imm = Immersion::into_warped("fiber-circle", ChartDomain::new(vec![(-3.1, 3.1)], "angle").unwrap(), wp.clone(), |t| {
            pt(&[1.5, t[0]])
        })
        .unwrap();
        let sc = Scenario::new("polar-fiber-circle", ScenarioAmbient::Warped(wp), imm, pt(&[1.5]), 0.5, 0.0, 1.0)
            .unwrap()
            .with_distance(DistanceFunction::euclidean(pt(&[1.5])))
            .with_assertions(COMPACT);
        let rep = verify_mean(&sc).unwrap();
        let psi = rep.breakdown.psi0.as_ref().unwrap().value;
        assert!((psi - 1.0).abs() < 1e-4, "{psi}");
        assert!(rep.vacuous && rep.verdict == Verdict::Pass && rep.rhs < 0.0);
        assert!((rep.lhs - 1.0 / 1.5).abs() < 1e-3);
        let sub = verify_sub_mean(&sc).unwrap();
        let tau = sub.breakdown.tau0.as_ref().unwrap().value;
        assert!((tau - psi).abs() < 1e-4, "{tau} vs {psi}");
        assert!(sub.breakdown.alpha0.as_ref().unwrap().value.abs() < 1e-6);
        assert!((sub.rhs - rep.rhs).abs() < 1e-4);
    }

    #[test]
    fn submersion_verifiers_agree_on_products() {
        let sc = sphere_scenario(3, 0.6);
        let a = verify_sectional(&sc).unwrap();
        let sub = verify_sub_sectional(&sc).unwrap();
        assert!((a.lhs - sub.lhs).abs() < 1e-6 && (a.rhs - sub.rhs).abs() < 1e-6);
        let integrable = sub.integrable.as_ref().unwrap();
        assert!((integrable.rhs - a.rhs).abs() < 1e-12);
        let b = verify_mean(&sc).unwrap();
        let sub_b = verify_sub_mean(&sc).unwrap();
        assert!((b.rhs - sub_b.rhs).abs() < 1e-6 && (b.lhs - sub_b.lhs).abs() < 1e-6);
        assert!((sub_b.rhs - 2.0 / 0.6).abs() < 1e-6);
    }

    #[test]
    fn hopf_curve_mean_estimate() {
        let hopf = submersion::hopf_chart();
        let curve = Immersion::new("hopf-curve", ChartDomain::new(vec![(-3.1, 3.1)], "t").unwrap(), hopf.total().clone(), |t| {
            let s = t[0].sin();
            pt(&[std::f64::consts::FRAC_PI_4 + 0.1 * s, t[0], t[0] + 0.2 * s])
        })
        .unwrap();
        let x0 = pt(&[std::f64::consts::FRAC_PI_2, 0.0]);
        let c = x0.clone();
        let rho = ScalarField::new("sphere-distance", 2, move |x| {
            0.5 * (x[0].cos() * c[0].cos() + x[0].sin() * c[0].sin() * (x[1] - c[1]).cos()).clamp(-1.0, 1.0).acos()
        });
        let sc = Scenario::new("hopf-curve", ScenarioAmbient::Submersion(hopf), curve, x0.clone(), 0.3, 4.0, std::f64::consts::FRAC_PI_2)
            .unwrap()
            .with_distance(DistanceFunction::closed(x0, rho))
            .with_assertions(COMPACT);
        let rep = verify_sub_mean(&sc).unwrap();
        let alpha = rep.breakdown.alpha0.as_ref().unwrap().value;
        assert!((alpha - 1.0).abs() < 1e-3, "{alpha}");
        assert!((rep.rhs + alpha + rep.breakdown.tau0.as_ref().unwrap().value).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::Pass);
        let Diagnostics::Mean(d) = &rep.diagnostics else { panic!("wrong diagnostics") };
        assert!(d.a_term_holds.unwrap() && d.laplacian_holds, "{d:?}");
        assert!(matches!(verify_sub_sectional(&sc), Err(GeoError::DimensionHypothesisFailed { .. })));
        assert_eq!(verify_mean(&sc).unwrap_err(), GeoError::AmbientNotWarped);
    }

    #[test]
    fn slice_violates_containment() {
        let wp = warped::product(MetricField::euclidean(2), MetricField::euclidean(1));
        let chart = ChartDomain::new(vec![(-2.0, 2.0), (-2.0, 2.0)], "plane window").unwrap();
        let imm = Immersion::into_warped("slice", chart, wp.clone(), |x| x.clone().insert_row(2, 0.0)).unwrap();
        let sc = Scenario::new("flat-slice", ScenarioAmbient::Warped(wp), imm, Point::zeros(2), 0.6, 0.0, 1e9)
            .unwrap()
            .with_distance(DistanceFunction::euclidean(Point::zeros(2)))
            .with_assertions(Assertions { weak_oy: true, ..Default::default() });
        match verify_mean(&sc).unwrap_err() {
            GeoError::ContainmentViolated { distance, radius, .. } => assert!(distance >= radius),
            e => panic!("unexpected {e:?}"),
        }
        assert!(Scenario::new(
            "unbounded",
            ScenarioAmbient::Warped(warped::product(MetricField::euclidean(2), MetricField::euclidean(1))),
            Immersion::into_warped("slice", ChartDomain::unbounded(2), warped::product(MetricField::euclidean(2), MetricField::euclidean(1)), |x| {
                x.clone().insert_row(2, 0.0)
            })
            .unwrap(),
            Point::zeros(2),
            0.6,
            0.0,
            1e9
        )
        .is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let sc = sphere_scenario(2, 0.6).with_seed(9);
        let a = serde_json::to_string(&verify_mean(&sc).unwrap()).unwrap();
        let b = serde_json::to_string(&verify_mean(&sc).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_scenarios() {
        let imm = sphere_in_product(2, 0.5);
        let wp = imm.warped().unwrap().clone();
        let amb = || ScenarioAmbient::Warped(wp.clone());
        assert!(matches!(
            Scenario::new("x", amb(), imm.clone(), Point::zeros(2), 2.0, 0.0, 1.0),
            Err(GeoError::OutsideDeclaredInjRadius { .. })
        ));
        assert!(Scenario::new("x", amb(), imm.clone(), Point::zeros(2), 0.8, 4.0, 10.0).is_err());
        let ok = Scenario::new("x", amb(), imm.clone(), Point::zeros(2), 0.6, 0.0, 10.0).unwrap();
        assert!(ok.clone().with_budget(99).is_err());
        let not_compact = ok.with_assertions(Assertions::default());
        assert!(matches!(verify_mean(&not_compact), Err(GeoError::HypothesisFailed(_))));
        let asserted = not_compact.with_assertions(Assertions { weak_oy: true, ..Default::default() });
        let rep = verify_mean(&asserted.with_distance(DistanceFunction::euclidean(Point::zeros(2)))).unwrap();
        assert_eq!(rep.caveats, vec!["asserted: weak-oy".to_string()]);
        let wrong = immersion::circle(1.0);
        assert_eq!(Scenario::new("x", amb(), wrong, Point::zeros(2), 0.6, 0.0, 10.0).unwrap_err(), GeoError::AmbientMismatch);
    }
}
