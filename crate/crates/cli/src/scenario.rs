//! The JSON scenario format and its translation into a [`Scenario`].

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use warpgeo::estimates::{Assertions, Estimate, Region, Scenario, ScenarioAmbient};
use warpgeo::geometry::{ChartDomain, DistanceFunction, MetricField, Point, ScalarField, Vector};
use warpgeo::immersion::Immersion;
use warpgeo::submersion::RiemannianSubmersion;
use warpgeo::warped::WarpedProduct;

use crate::builtins;
use crate::error::{invalid, CliError, Result};
use crate::expr::{self, BoundExpr};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BUDGET: usize = 200;

/// Builtin parameters: numbers or lists of numbers.
pub type Params = BTreeMap<String, serde_json::Value>;
/// A chart interval; `null` stands for an infinite end.
pub type Interval = [Option<f64>; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Vec<Interval>>,
    },
    /// Diagonal entries as expressions in `coords`.
    Diagonal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        coords: Vec<String>,
        components: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Vec<Interval>>,
    },
    /// All entries, row by row.
    Matrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        coords: Vec<String>,
        components: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Vec<Interval>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AmbientSpec {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: Params,
    },
    /// `base ×_warp fiber`, the warping function in base coordinates.
    Warped {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        base: MetricSpec,
        fiber: MetricSpec,
        warp: String,
    },
    /// A submersion given by its projection in total-space coordinates.
    Submersion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        total: MetricSpec,
        base: MetricSpec,
        projection: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ImmersionSpec {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: Params,
    },
    /// Ambient coordinates as expressions in `variables`.
    Map {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        variables: Vec<String>,
        domain: Vec<Interval>,
        components: Vec<String>,
    },
}

/// How the base distance `dist(x0, ·)` is computed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistanceSpec {
    /// Geodesic shooting in the base metric.
    #[default]
    Shooting,
    Euclidean,
    /// Great-circle distance on a round 2-sphere in colatitude/longitude.
    Sphere { radius: f64 },
    /// A closed form in base coordinates.
    Expression { expr: String },
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn is_default<T: Default + PartialEq>(t: &T) -> bool {
    *t == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub ambient: AmbientSpec,
    pub immersion: ImmersionSpec,
    pub x0: Vec<f64>,
    pub r: f64,
    pub b: f64,
    pub declared_inj_radius: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub distance: DistanceSpec,
    /// Box in immersion parameters to sample; defaults to the chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<[f64; 2]>>,
    /// Window of the total space in which the preimage of the ball is sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preimage_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_budget")]
    pub sample_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub asserted: Assertions,
    pub theorems: Vec<Estimate>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub tolerance: Option<f64>,
    /// Used when neither the command line nor the file sets a seed.
    pub fallback_seed: Option<u64>,
}

/// An ambient together with coordinate names for its expressions.
#[derive(Debug, Clone)]
pub struct BuiltAmbient {
    pub ambient: ScenarioAmbient,
    pub base_coords: Vec<String>,
    /// Empty unless the ambient is a warped product.
    pub fiber_coords: Vec<String>,
}

impl BuiltAmbient {
    pub fn total_dim(&self) -> usize {
        match &self.ambient {
            ScenarioAmbient::Warped(wp) => wp.dim(),
            ScenarioAmbient::Submersion(s) => s.n_total(),
        }
    }

    pub fn total_metric(&self) -> MetricField {
        match &self.ambient {
            ScenarioAmbient::Warped(wp) => wp.metric(),
            ScenarioAmbient::Submersion(s) => s.total().clone(),
        }
    }

    pub fn warped(&self) -> Option<&WarpedProduct> {
        match &self.ambient {
            ScenarioAmbient::Warped(wp) => Some(wp),
            ScenarioAmbient::Submersion(_) => None,
        }
    }
}

pub fn default_coords(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Parses and binds an expression, naming the field it came from in errors.
pub fn compile(text: &str, names: &[String], context: &str) -> Result<BoundExpr> {
    let e = expr::parse(text).map_err(|source| CliError::Expression { context: context.to_string(), source })?;
    e.bind(names).map_err(|source| CliError::Binding { context: context.to_string(), source })
}

pub fn chart(intervals: &[Interval], description: &str) -> Result<ChartDomain> {
    let bounds = intervals.iter().map(|[lo, hi]| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))).collect();
    Ok(ChartDomain::new(bounds, description)?)
}

fn optional_chart(domain: &Option<Vec<Interval>>, n: usize, description: &str) -> Result<ChartDomain> {
    match domain {
        None => Ok(ChartDomain::unbounded(n)),
        Some(d) if d.len() == n => chart(d, description),
        Some(d) => Err(invalid(format!("{description}: domain has {} intervals for {n} coordinates", d.len()))),
    }
}

fn check_coords(coords: &[String], what: &str) -> Result<()> {
    for (i, c) in coords.iter().enumerate() {
        if expr::parse(c).ok() != Some(expr::Expr::Var(c.clone())) {
            return Err(invalid(format!("{what}: coordinate name '{c}' is not an identifier")));
        }
        if coords[..i].contains(c) {
            return Err(invalid(format!("{what}: coordinate '{c}' appears twice")));
        }
    }
    Ok(())
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::Euclidean { dim, .. } => *dim,
            MetricSpec::Diagonal { coords, .. } | MetricSpec::Matrix { coords, .. } => coords.len(),
        }
    }

    /// The metric and its coordinate names; `prefix` names unnamed
    /// Euclidean coordinates.
    pub fn build(&self, prefix: &str, what: &str) -> Result<(MetricField, Vec<String>)> {
        let n = self.dim();
        if n == 0 {
            return Err(invalid(format!("{what}: dimension must be positive")));
        }
        match self {
            MetricSpec::Euclidean { coords, domain, .. } => {
                let names = coords.clone().unwrap_or_else(|| default_coords(prefix, n));
                if names.len() != n {
                    return Err(invalid(format!("{what}: {} coordinate names for dimension {n}", names.len())));
                }
                check_coords(&names, what)?;
                Ok((MetricField::euclidean_on(optional_chart(domain, n, what)?), names))
            }
            MetricSpec::Diagonal { name, coords, components, domain } => {
                check_coords(coords, what)?;
                if components.len() != n {
                    return Err(invalid(format!("{what}: {} diagonal entries for dimension {n}", components.len())));
                }
                let entries = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| compile(c, coords, &format!("{what} entry {i}")))
                    .collect::<Result<Vec<_>>>()?;
                let g = move |p: &Point| Vector::from_iterator(n, entries.iter().map(|e| e.value(p.as_slice())));
                let name = name.clone().unwrap_or_else(|| format!("{what}-metric"));
                Ok((MetricField::diagonal(name, optional_chart(domain, n, what)?, g), coords.clone()))
            }
            MetricSpec::Matrix { name, coords, components, domain } => {
                check_coords(coords, what)?;
                if components.len() != n || components.iter().any(|row| row.len() != n) {
                    return Err(invalid(format!("{what}: the matrix must be {n} by {n}")));
                }
                let entries = components
                    .iter()
                    .enumerate()
                    .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, c)| (i, j, c)))
                    .map(|(i, j, c)| compile(c, coords, &format!("{what} entry ({i}, {j})")))
                    .collect::<Result<Vec<_>>>()?;
                let g = move |p: &Point| DMatrix::from_row_iterator(n, n, entries.iter().map(|e| e.value(p.as_slice())));
                let name = name.clone().unwrap_or_else(|| format!("{what}-metric"));
                Ok((MetricField::new(name, optional_chart(domain, n, what)?, g), coords.clone()))
            }
        }
    }
}

impl AmbientSpec {
    pub fn build(&self) -> Result<BuiltAmbient> {
        match self {
            AmbientSpec::Builtin { name, params } => builtins::ambient(name, params),
            AmbientSpec::Warped { name, base, fiber, warp } => {
                let (base, base_coords) = base.build("x", "base")?;
                let (fiber, fiber_coords) = fiber.build("v", "fiber")?;
                if base_coords.iter().any(|c| fiber_coords.contains(c)) {
                    return Err(invalid("base and fiber coordinate names must differ"));
                }
                let psi = compile(warp, &base_coords, "warp")?;
                let field = ScalarField::new(warp.clone(), base.dim(), move |x| psi.value(x.as_slice()));
                let wp = WarpedProduct::new(name.clone().unwrap_or_else(|| "custom-warped".into()), base, fiber, field)?;
                Ok(BuiltAmbient { ambient: ScenarioAmbient::Warped(wp), base_coords, fiber_coords })
            }
            AmbientSpec::Submersion { name, total, base, projection } => {
                let (total, total_coords) = total.build("y", "total")?;
                let (base, base_coords) = base.build("x", "base")?;
                if projection.len() != base.dim() {
                    return Err(invalid(format!("projection has {} components for a base of dimension {}", projection.len(), base.dim())));
                }
                let comps = projection
                    .iter()
                    .enumerate()
                    .map(|(i, c)| compile(c, &total_coords, &format!("projection component {i}")))
                    .collect::<Result<Vec<_>>>()?;
                let k = comps.len();
                let proj = move |q: &Point| Point::from_iterator(k, comps.iter().map(|c| c.value(q.as_slice())));
                let sub = RiemannianSubmersion::new(name.clone().unwrap_or_else(|| "custom-submersion".into()), total, base, proj)?;
                Ok(BuiltAmbient { ambient: ScenarioAmbient::Submersion(sub), base_coords, fiber_coords: vec![] })
            }
        }
    }
}

impl ImmersionSpec {
    pub fn build(&self, ambient: &BuiltAmbient) -> Result<Immersion> {
        match self {
            ImmersionSpec::Builtin { name, params } => builtins::immersion(name, params, ambient),
            ImmersionSpec::Map { name, variables, domain, components } => {
                check_coords(variables, "immersion")?;
                if domain.len() != variables.len() {
                    return Err(invalid(format!("immersion: {} domain intervals for {} variables", domain.len(), variables.len())));
                }
                let n = ambient.total_dim();
                if components.len() != n {
                    return Err(invalid(format!("immersion: {} components for an ambient of dimension {n}", components.len())));
                }
                let comps = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| compile(c, variables, &format!("immersion component {i}")))
                    .collect::<Result<Vec<_>>>()?;
                let map = move |t: &Point| Point::from_iterator(n, comps.iter().map(|c| c.value(t.as_slice())));
                let domain = chart(domain, "immersion parameters")?;
                builtins::immerse(ambient, name.clone().unwrap_or_else(|| "custom-immersion".into()), domain, map)
            }
        }
    }
}

impl DistanceSpec {
    pub fn build(&self, x0: &Point, base_coords: &[String]) -> Result<Option<DistanceFunction>> {
        Ok(match self {
            DistanceSpec::Shooting => None,
            DistanceSpec::Euclidean => Some(DistanceFunction::euclidean(x0.clone())),
            DistanceSpec::Sphere { radius } => {
                if x0.len() != 2 || !(*radius > 0.0) {
                    return Err(invalid("sphere distance needs a 2-dimensional base and a positive radius"));
                }
                let (a, c) = (*radius, x0.clone());
                let field = ScalarField::new("great-circle-distance", 2, move |x| {
                    let cos = x[0].cos() * c[0].cos() + x[0].sin() * c[0].sin() * (x[1] - c[1]).cos();
                    a * cos.clamp(-1.0, 1.0).acos()
                });
                Some(DistanceFunction::closed(x0.clone(), field))
            }
            DistanceSpec::Expression { expr } => {
                let d = compile(expr, base_coords, "distance")?;
                let field = ScalarField::new(expr.clone(), x0.len(), move |x| d.value(x.as_slice()));
                Some(DistanceFunction::closed(x0.clone(), field))
            }
        })
    }
}

fn boxed(bounds: &[[f64; 2]]) -> Vec<(f64, f64)> {
    bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect()
}

impl ScenarioFile {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|source| CliError::Json { context: context.to_string(), source })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("{context}: unsupported schema_version {} (expected {SCHEMA_VERSION})", file.schema_version)));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// A file path, or the name of a builtin scenario when no such file
    /// exists.
    pub fn resolve(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if !path.exists() {
            if let Some(text) = builtins::scenario(arg) {
                return Self::from_json(text, arg);
            }
        }
        Self::load(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    pub fn seed(&self, overrides: &Overrides) -> u64 {
        overrides.seed.or(self.seed).or(overrides.fallback_seed).unwrap_or(0)
    }

    pub fn build(&self, overrides: &Overrides) -> Result<Scenario> {
        if self.theorems.is_empty() {
            return Err(invalid(format!("{}: the theorem list is empty", self.name)));
        }
        let ambient = self.ambient.build()?;
        let immersion = self.immersion.build(&ambient)?;
        let x0 = Point::from_vec(self.x0.clone());
        let distance = self.distance.build(&x0, &ambient.base_coords)?;
        let mut sc = Scenario::new(self.name.clone(), ambient.ambient, immersion, x0, self.r, self.b, self.declared_inj_radius)?
            .with_seed(self.seed(overrides))
            .with_budget(overrides.budget.unwrap_or(self.sample_budget))?
            .with_assertions(self.asserted);
        if let Some(t) = overrides.tolerance.or(self.tolerance) {
            sc = sc.with_tolerance(t)?;
        }
        if let Some(d) = distance {
            sc = sc.with_distance(d);
        }
        if let Some(region) = &self.region {
            sc = sc.with_region(Region::boxed(boxed(region))?)?;
        }
        if let Some(window) = &self.preimage_box {
            sc = sc.with_preimage_box(boxed(window))?;
        }
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "schema_version": 1,
            "name": "disc",
            "ambient": {"kind": "builtin", "name": "product", "params": {"base_dim": 2, "fiber_dim": 1}},
            "immersion": {"kind": "map", "variables": ["u", "w"], "domain": [[-0.2, 0.2], [-0.2, 0.2]],
                          "components": ["u", "w", "0.5 * (u^2 + w^2)"]},
            "x0": [0, 0], "r": 0.6, "b": 0, "declared_inj_radius": 1e9,
            "distance": {"kind": "euclidean"},
            "theorems": ["mean"]
        }"#
    }

    #[test]
    fn minimal_file_builds() {
        let file = ScenarioFile::from_json(minimal(), "test").unwrap();
        assert_eq!(file.sample_budget, DEFAULT_BUDGET);
        let sc = file.build(&Overrides::default()).unwrap();
        assert_eq!((sc.n_m(), sc.n_v(), sc.n_x()), (2, 1, 2));
        let q = sc.immersion().map(&Point::from_vec(vec![0.1, 0.15])).unwrap();
        assert!((q[2] - 0.01625).abs() < 1e-15);
        assert!((sc.distance().eval(&Point::from_vec(vec![0.3, 0.4])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn serialization_round_trips() {
        let file = ScenarioFile::from_json(minimal(), "test").unwrap();
        let again = ScenarioFile::from_json(&file.to_json(), "again").unwrap();
        assert_eq!(file, again);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut file = ScenarioFile::from_json(minimal(), "test").unwrap();
        assert_eq!(file.seed(&Overrides { fallback_seed: Some(7), ..Default::default() }), 7);
        file.seed = Some(3);
        assert_eq!(file.seed(&Overrides { fallback_seed: Some(7), ..Default::default() }), 3);
        let o = Overrides { seed: Some(11), budget: Some(150), tolerance: Some(0.0), fallback_seed: None };
        let sc = file.build(&o).unwrap();
        assert_eq!((sc.seed(), sc.budget(), sc.tolerance()), (11, 150, 0.0));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let bad_field = minimal().replace("\"b\": 0", "\"b\": 0, \"bee\": 1");
        assert!(matches!(ScenarioFile::from_json(&bad_field, "t"), Err(CliError::Json { .. })));
        let bad_version = minimal().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ScenarioFile::from_json(&bad_version, "t"), Err(CliError::Invalid(_))));
        let bad_expr = minimal().replace("0.5 * (u^2 + w^2)", "0.5 * (u^2 + ");
        let file = ScenarioFile::from_json(&bad_expr, "t").unwrap();
        assert!(matches!(file.build(&Overrides::default()), Err(CliError::Expression { .. })));
        let unbound = minimal().replace("0.5 * (u^2 + w^2)", "z");
        let file = ScenarioFile::from_json(&unbound, "t").unwrap();
        assert!(matches!(file.build(&Overrides::default()), Err(CliError::Binding { .. })));
    }

    #[test]
    fn custom_warped_metric() {
        let spec = AmbientSpec::Warped {
            name: None,
            base: MetricSpec::Diagonal {
                name: None,
                coords: vec!["r".into()],
                components: vec!["1".into()],
                domain: Some(vec![[Some(0.0), None]]),
            },
            fiber: MetricSpec::Euclidean { dim: 1, coords: Some(vec!["a".into()]), domain: None },
            warp: "r".into(),
        };
        let built = spec.build().unwrap();
        let g = built.total_metric().at(&Point::from_vec(vec![2.0, 0.3])).unwrap();
        assert_eq!(g[(1, 1)], 4.0);
        assert_eq!(built.base_coords, vec!["r".to_string()]);
    }
}
