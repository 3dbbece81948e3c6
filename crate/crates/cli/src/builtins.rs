//! Named ambients, immersions and scenarios.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use warpgeo::estimates::ScenarioAmbient;
use warpgeo::geometry::{ChartDomain, MetricField, Point, ScalarField};
use warpgeo::immersion::{sphere_chart, sphere_in_euclidean, Immersion};
use warpgeo::submersion::hopf_chart;
use warpgeo::warped::{self, WarpedProduct};

use crate::error::{invalid, Result};
use crate::scenario::{default_coords, BuiltAmbient, Params};

pub const AMBIENTS: &[(&str, &str)] = &[
    ("product", "flat R^base_dim x R^fiber_dim (params: base_dim, fiber_dim; default 1)"),
    ("bowl", "R^base_dim x_w R^fiber_dim with w = 1 + |x|^2/4 (params: base_dim, fiber_dim)"),
    ("polar-plane", "the flat plane as dr^2 + r^2 da^2; coordinates r, angle"),
    ("polar-space", "flat 3-space as dr^2 + r^2 g_S2; coordinates r, colatitude, longitude"),
    ("hyperbolic", "the hyperbolic plane as dt^2 + e^(2t) ds^2; coordinates t, s"),
    ("hopf", "the Hopf map from the unit 3-sphere (eta, xi1, xi2) to S2(1/2) (theta, phi)"),
];

pub const IMMERSIONS: &[(&str, &str)] = &[
    ("sphere", "round sphere S^dim(radius) in the first dim+1 ambient coordinates (params: dim, radius, center)"),
    ("fiber", "the fiber through a base point of a warped product (params: base_point, domain)"),
    ("slice", "a base box at a fixed fiber point (params: half_width, fiber_point)"),
    ("cylinder", "S1(radius) x (-half_length, half_length) in a 3-dimensional ambient (params: radius, half_length)"),
    ("hopf-curve", "the curve (pi/4 + amplitude sin t, t, t + twist sin t) in the Hopf chart (params: amplitude, twist, half_length)"),
];

pub const SCENARIOS: &[(&str, &str)] = &[
    ("sphere-in-product", include_str!("../scenarios/sphere-in-product.json")),
    ("sphere2-in-product", include_str!("../scenarios/sphere2-in-product.json")),
    ("sphere-in-bowl", include_str!("../scenarios/sphere-in-bowl.json")),
    ("polar-fiber-circle", include_str!("../scenarios/polar-fiber-circle.json")),
    ("hopf-curve", include_str!("../scenarios/hopf-curve.json")),
    ("cylinder-in-product", include_str!("../scenarios/cylinder-in-product.json")),
    ("asserted-flat-disc", include_str!("../scenarios/asserted-flat-disc.json")),
    ("bad-dimensions", include_str!("../scenarios/bad-dimensions.json")),
    ("flat-slice", include_str!("../scenarios/flat-slice.json")),
    ("beyond-injectivity", include_str!("../scenarios/beyond-injectivity.json")),
    ("bad-expression", include_str!("../scenarios/bad-expression.json")),
    ("degenerate-metric", include_str!("../scenarios/degenerate-metric.json")),
];

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

fn check_keys(params: &Params, allowed: &[&str], what: &str) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(invalid(format!("{what}: unknown parameter '{k}' (allowed: {})", allowed.join(", ")))),
        None => Ok(()),
    }
}

fn get<T: DeserializeOwned>(params: &Params, key: &str, what: &str) -> Result<Option<T>> {
    params
        .get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| invalid(format!("{what}: parameter '{key}': {e}"))))
        .transpose()
}

fn required<T: DeserializeOwned>(params: &Params, key: &str, what: &str) -> Result<T> {
    get(params, key, what)?.ok_or_else(|| invalid(format!("{what}: missing parameter '{key}'")))
}

fn positive(x: f64, key: &str, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{what}: parameter '{key}' must be positive, got {x}")))
    }
}

fn dims(params: &Params, what: &str) -> Result<(usize, usize)> {
    let base: usize = get(params, "base_dim", what)?.unwrap_or(1);
    let fiber: usize = get(params, "fiber_dim", what)?.unwrap_or(1);
    if base == 0 || fiber == 0 {
        return Err(invalid(format!("{what}: dimensions must be positive")));
    }
    Ok((base, fiber))
}

fn named(wp: WarpedProduct, base: &[&str], fiber: &[&str]) -> BuiltAmbient {
    BuiltAmbient {
        ambient: ScenarioAmbient::Warped(wp),
        base_coords: base.iter().map(|s| s.to_string()).collect(),
        fiber_coords: fiber.iter().map(|s| s.to_string()).collect(),
    }
}

/// `R^k ×_w R^m` with `w = 1 + |x|²/4`.
pub fn bowl(k: usize, m: usize) -> WarpedProduct {
    let psi = ScalarField::new("1 + |x|^2/4", k, |x| 1.0 + 0.25 * x.norm_squared());
    WarpedProduct::new("bowl", MetricField::euclidean(k), MetricField::euclidean(m), psi).expect("dimensions agree")
}

pub fn ambient(name: &str, params: &Params) -> Result<BuiltAmbient> {
    let what = format!("ambient '{name}'");
    match name {
        "product" | "bowl" => {
            check_keys(params, &["base_dim", "fiber_dim"], &what)?;
            let (k, m) = dims(params, &what)?;
            let wp = if name == "bowl" { bowl(k, m) } else { warped::product(MetricField::euclidean(k), MetricField::euclidean(m)) };
            Ok(BuiltAmbient { ambient: ScenarioAmbient::Warped(wp), base_coords: default_coords("x", k), fiber_coords: default_coords("v", m) })
        }
        "polar-plane" | "polar-space" | "hyperbolic" | "hopf" => {
            check_keys(params, &[], &what)?;
            Ok(match name {
                "polar-plane" => named(warped::polar_plane(), &["r"], &["angle"]),
                "polar-space" => named(warped::polar_space(), &["r"], &["colatitude", "longitude"]),
                "hyperbolic" => named(warped::hyperbolic_as_warped(), &["t"], &["s"]),
                _ => BuiltAmbient {
                    ambient: ScenarioAmbient::Submersion(hopf_chart()),
                    base_coords: vec!["theta".into(), "phi".into()],
                    fiber_coords: vec![],
                },
            })
        }
        _ => Err(invalid(format!("unknown ambient '{name}'; see list-builtins"))),
    }
}

/// An immersion into the total space of `ambient`.
pub fn immerse(
    ambient: &BuiltAmbient,
    name: impl Into<String>,
    domain: ChartDomain,
    map: impl Fn(&Point) -> Point + Send + Sync + 'static,
) -> Result<Immersion> {
    Ok(match &ambient.ambient {
        ScenarioAmbient::Warped(wp) => Immersion::into_warped(name, domain, wp.clone(), map)?,
        ScenarioAmbient::Submersion(s) => Immersion::new(name, domain, s.total().clone(), map)?,
    })
}

fn sphere(params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    let what = "immersion 'sphere'";
    check_keys(params, &["dim", "radius", "center"], what)?;
    let k: usize = required(params, "dim", what)?;
    let a = positive(required(params, "radius", what)?, "radius", what)?;
    let n = ambient.total_dim();
    if k == 0 || k + 1 > n {
        return Err(invalid(format!("{what}: a {k}-sphere does not fit in an ambient of dimension {n}")));
    }
    let center: Vec<f64> = get(params, "center", what)?.unwrap_or_else(|| vec![0.0; k + 1]);
    if center.len() != k + 1 {
        return Err(invalid(format!("{what}: center needs {} coordinates", k + 1)));
    }
    let round = sphere_in_euclidean(k, a);
    let shape = round.clone();
    let map = move |t: &Point| {
        let y = round.map_raw(t);
        Point::from_fn(n, |i, _| if i <= k { y[i] + center[i] } else { 0.0 })
    };
    let jac = move |t: &Point| {
        let j = shape.jacobian(t).unwrap_or_else(|_| DMatrix::from_element(k + 1, k, f64::NAN));
        DMatrix::from_fn(n, k, |i, c| if i <= k { j[(i, c)] } else { 0.0 })
    };
    Ok(immerse(ambient, format!("S{k}({a})"), sphere_chart(k), map)?.with_jacobian(jac))
}

fn warped_only<'a>(ambient: &'a BuiltAmbient, what: &str) -> Result<&'a WarpedProduct> {
    ambient.warped().ok_or_else(|| invalid(format!("{what} needs a warped-product ambient")))
}

fn intervals(bounds: Vec<[f64; 2]>, what: &str) -> Result<ChartDomain> {
    Ok(ChartDomain::new(bounds.into_iter().map(|[lo, hi]| (lo, hi)).collect(), what)?)
}

fn fiber(params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    let what = "immersion 'fiber'";
    check_keys(params, &["base_point", "domain"], what)?;
    let wp = warped_only(ambient, what)?;
    let (k, m) = (wp.n_base(), wp.n_fiber());
    let x: Vec<f64> = required(params, "base_point", what)?;
    if x.len() != k {
        return Err(invalid(format!("{what}: base_point needs {k} coordinates")));
    }
    let domain = match get::<Vec<[f64; 2]>>(params, "domain", what)? {
        Some(d) if d.len() == m => intervals(d, "fiber parameters")?,
        Some(_) => return Err(invalid(format!("{what}: domain needs {m} intervals"))),
        None => wp.fiber().domain().clone(),
    };
    let map = move |v: &Point| Point::from_fn(k + m, |i, _| if i < k { x[i] } else { v[i - k] });
    let jac = move |_: &Point| DMatrix::from_fn(k + m, m, |i, c| if i == k + c { 1.0 } else { 0.0 });
    Ok(immerse(ambient, "fiber", domain, map)?.with_jacobian(jac))
}

fn slice(params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    let what = "immersion 'slice'";
    check_keys(params, &["half_width", "fiber_point"], what)?;
    let wp = warped_only(ambient, what)?;
    let (k, m) = (wp.n_base(), wp.n_fiber());
    let w = positive(required(params, "half_width", what)?, "half_width", what)?;
    let v: Vec<f64> = get(params, "fiber_point", what)?.unwrap_or_else(|| vec![0.0; m]);
    if v.len() != m {
        return Err(invalid(format!("{what}: fiber_point needs {m} coordinates")));
    }
    let domain = intervals(vec![[-w, w]; k], "slice parameters")?;
    let map = move |x: &Point| Point::from_fn(k + m, |i, _| if i < k { x[i] } else { v[i - k] });
    let jac = move |_: &Point| DMatrix::from_fn(k + m, k, |i, c| if i == c { 1.0 } else { 0.0 });
    Ok(immerse(ambient, "slice", domain, map)?.with_jacobian(jac))
}

fn cylinder(params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    let what = "immersion 'cylinder'";
    check_keys(params, &["radius", "half_length"], what)?;
    if ambient.total_dim() != 3 {
        return Err(invalid(format!("{what} needs a 3-dimensional ambient")));
    }
    let a = positive(required(params, "radius", what)?, "radius", what)?;
    let l = positive(get(params, "half_length", what)?.unwrap_or(1.0), "half_length", what)?;
    let domain = intervals(vec![[-PI, PI], [-l, l]], "angle, height")?;
    let map = move |p: &Point| Point::from_vec(vec![a * p[0].cos(), a * p[0].sin(), p[1]]);
    let jac = move |p: &Point| DMatrix::from_row_slice(3, 2, &[-a * p[0].sin(), 0.0, a * p[0].cos(), 0.0, 0.0, 1.0]);
    Ok(immerse(ambient, format!("cylinder({a})"), domain, map)?.with_jacobian(jac))
}

fn hopf_curve(params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    let what = "immersion 'hopf-curve'";
    check_keys(params, &["amplitude", "twist", "half_length"], what)?;
    let total = ambient.total_metric();
    if total.name() != hopf_chart().total().name() {
        return Err(invalid(format!("{what} needs the 'hopf' ambient")));
    }
    let a: f64 = get(params, "amplitude", what)?.unwrap_or(0.1);
    let c: f64 = get(params, "twist", what)?.unwrap_or(0.2);
    let l = positive(get(params, "half_length", what)?.unwrap_or(3.1), "half_length", what)?;
    let domain = intervals(vec![[-l, l]], "curve parameter")?;
    let map = move |p: &Point| Point::from_vec(vec![PI / 4.0 + a * p[0].sin(), p[0], p[0] + c * p[0].sin()]);
    let jac = move |p: &Point| DMatrix::from_column_slice(3, 1, &[a * p[0].cos(), 1.0, 1.0 + c * p[0].cos()]);
    Ok(immerse(ambient, "hopf-curve", domain, map)?.with_jacobian(jac))
}

pub fn immersion(name: &str, params: &Params, ambient: &BuiltAmbient) -> Result<Immersion> {
    match name {
        "sphere" => sphere(params, ambient),
        "fiber" => fiber(params, ambient),
        "slice" => slice(params, ambient),
        "cylinder" => cylinder(params, ambient),
        "hopf-curve" => hopf_curve(params, ambient),
        _ => Err(invalid(format!("unknown immersion '{name}'; see list-builtins"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Overrides, ScenarioFile};

    fn params(json: &str) -> Params {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn padded_sphere_has_exact_jacobian() {
        let amb = ambient("product", &params(r#"{"base_dim": 3, "fiber_dim": 1}"#)).unwrap();
        let imm = immersion("sphere", &params(r#"{"dim": 2, "radius": 0.5}"#), &amb).unwrap();
        let p = Point::from_vec(vec![1.0, 0.4]);
        let q = imm.map(&p).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q[3], 0.0);
        assert!((q.rows(0, 3).norm() - 0.5).abs() < 1e-15);
        let fd = warpgeo::geometry::fd::jacobian(|t| imm.map_raw(t), &p, 1e-5);
        assert!((imm.jacobian(&p).unwrap() - fd).amax() < 1e-9);
    }

    #[test]
    fn unknown_names_and_parameters() {
        assert!(ambient("torus", &Params::new()).is_err());
        assert!(ambient("product", &params(r#"{"base": 2}"#)).is_err());
        let amb = ambient("hopf", &Params::new()).unwrap();
        assert!(immersion("fiber", &Params::new(), &amb).is_err());
        assert!(immersion("sphere", &params(r#"{"dim": 3, "radius": 1}"#), &amb).is_err());
    }

    #[test]
    fn every_embedded_scenario_parses() {
        for (name, text) in SCENARIOS {
            let file = ScenarioFile::from_json(text, name);
            if *name == "bad-expression" {
                assert!(file.unwrap().build(&Overrides::default()).is_err());
            } else {
                assert_eq!(&file.unwrap().name, name);
            }
        }
    }
}
