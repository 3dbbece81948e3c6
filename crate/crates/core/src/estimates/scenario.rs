use std::fmt;

use serde::{Deserialize, Serialize};

use crate::comparison::max_radius;
use crate::error::{GeoError, Result};
use crate::estimates::Region;
use crate::geometry::{DistanceFunction, MetricField, Point};
use crate::immersion::Immersion;
use crate::submersion::{self, RiemannianSubmersion};
use crate::warped::WarpedProduct;

pub const MIN_BUDGET: usize = 100;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Which curvature estimate to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    /// `sup K_M ≥ C_b(r)² + inf K_X` in a warped product.
    Sectional,
    /// `sup |H| ≥ (n_M − n_V) C_b(r) − n_V Ψ₀` in a warped product.
    Mean,
    /// `sup K_M ≥ C_b(r)² + inf sec_hor` in a Riemannian submersion.
    SubSectional,
    /// `sup |H| ≥ (n_M − n_V) C_b(r) − n_M α₀ − n_V τ₀` in a Riemannian
    /// submersion.
    SubMean,
}

impl Estimate {
    pub const ALL: [Estimate; 4] = [Estimate::Sectional, Estimate::Mean, Estimate::SubSectional, Estimate::SubMean];

    pub fn id(self) -> &'static str {
        match self {
            Estimate::Sectional => "sectional",
            Estimate::Mean => "mean",
            Estimate::SubSectional => "sub-sectional",
            Estimate::SubMean => "sub-mean",
        }
    }

    pub fn is_mean(self) -> bool {
        matches!(self, Estimate::Mean | Estimate::SubMean)
    }

    pub fn needs_warped(self) -> bool {
        matches!(self, Estimate::Sectional | Estimate::Mean)
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Estimate {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        Estimate::ALL.into_iter().find(|e| e.id() == s).ok_or_else(|| GeoError::DomainError(format!("unknown estimate '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub enum ScenarioAmbient {
    Warped(WarpedProduct),
    Submersion(RiemannianSubmersion),
}

/// Analytic hypotheses that cannot be checked on samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Assertions {
    /// `M` is compact, which gives the weak Omori–Yau principle for free.
    pub compact: bool,
    pub proper: bool,
    /// The weak Omori–Yau principle holds on `M`.
    pub weak_oy: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    ambient: ScenarioAmbient,
    projection: RiemannianSubmersion,
    immersion: Immersion,
    region: Region,
    x0: Point,
    r: f64,
    b: f64,
    inj_radius: f64,
    distance: DistanceFunction,
    budget: usize,
    seed: u64,
    assertions: Assertions,
    tolerance: f64,
    preimage_box: Option<Vec<(f64, f64)>>,
}

impl Scenario {
    /// A scenario sampling `M` over its whole (bounded) chart, with the
    /// base distance obtained by geodesic shooting.
    pub fn new(
        name: impl Into<String>,
        ambient: ScenarioAmbient,
        immersion: Immersion,
        x0: Point,
        r: f64,
        b: f64,
        inj_radius: f64,
    ) -> Result<Self> {
        let projection = match &ambient {
            ScenarioAmbient::Warped(wp) => submersion::warped(wp),
            ScenarioAmbient::Submersion(s) => s.clone(),
        };
        if immersion.ambient_dim() != projection.n_total() || immersion.ambient().name() != projection.total().name() {
            return Err(GeoError::AmbientMismatch);
        }
        if x0.len() != projection.n_base() {
            return Err(GeoError::DimensionMismatch { expected: projection.n_base(), got: x0.len() });
        }
        projection.base().at(&x0)?;
        if !(r > 0.0) || !(inj_radius > 0.0) {
            return Err(GeoError::DomainError("radius and injectivity radius must be positive".into()));
        }
        if r >= inj_radius {
            return Err(GeoError::OutsideDeclaredInjRadius { distance: r, radius: inj_radius });
        }
        if r >= max_radius(b) {
            return Err(GeoError::DomainError(format!("r = {r} must stay below π/(2√b) = {}", max_radius(b))));
        }
        let region = Region::from_domain(immersion.domain())
            .map_err(|_| GeoError::DomainError("the immersion chart is unbounded; give a sampling region".into()))?;
        let distance = DistanceFunction::shooting(projection.base().clone(), x0.clone(), inj_radius);
        Ok(Scenario {
            name: name.into(),
            ambient,
            projection,
            immersion,
            region,
            x0,
            r,
            b,
            inj_radius,
            distance,
            budget: 200,
            seed: 0,
            assertions: Assertions::default(),
            tolerance: DEFAULT_TOLERANCE,
            preimage_box: None,
        })
    }

    pub fn with_region(mut self, region: Region) -> Result<Self> {
        if region.dim() != self.immersion.domain_dim() {
            return Err(GeoError::DimensionMismatch { expected: self.immersion.domain_dim(), got: region.dim() });
        }
        self.region = region;
        Ok(self)
    }

    pub fn with_distance(mut self, distance: DistanceFunction) -> Self {
        self.distance = distance;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        if budget < MIN_BUDGET {
            return Err(GeoError::DomainError(format!("sample budget must be at least {MIN_BUDGET}, got {budget}")));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_assertions(mut self, assertions: Assertions) -> Self {
        self.assertions = assertions;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0) {
            return Err(GeoError::DomainError(format!("tolerance must be nonnegative, got {tolerance}")));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    /// Coordinate window of the total space in which `π⁻¹(B)` is sampled.
    pub fn with_preimage_box(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.projection.n_total() {
            return Err(GeoError::DimensionMismatch { expected: self.projection.n_total(), got: bounds.len() });
        }
        Region::boxed(bounds.clone())?;
        self.preimage_box = Some(bounds);
        Ok(self)
    }

    /// The same scenario with another radius.
    pub fn with_radius(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(GeoError::DomainError("radius must be positive".into()));
        }
        if r >= self.inj_radius {
            return Err(GeoError::OutsideDeclaredInjRadius { distance: r, radius: self.inj_radius });
        }
        if r >= max_radius(self.b) {
            return Err(GeoError::DomainError(format!("r = {r} must stay below π/(2√b) = {}", max_radius(self.b))));
        }
        let mut out = self.clone();
        out.r = r;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient(&self) -> &ScenarioAmbient {
        &self.ambient
    }

    pub fn warped(&self) -> Option<&WarpedProduct> {
        match &self.ambient {
            ScenarioAmbient::Warped(wp) => Some(wp),
            ScenarioAmbient::Submersion(_) => None,
        }
    }

    /// The projection to the base; `π_X` for a warped product.
    pub fn projection(&self) -> &RiemannianSubmersion {
        &self.projection
    }

    pub fn base(&self) -> &MetricField {
        self.projection.base()
    }

    pub fn immersion(&self) -> &Immersion {
        &self.immersion
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn x0(&self) -> &Point {
        &self.x0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn inj_radius(&self) -> f64 {
        self.inj_radius
    }

    pub fn distance(&self) -> &DistanceFunction {
        &self.distance
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assertions(&self) -> Assertions {
        self.assertions
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn preimage_box(&self) -> Option<&[(f64, f64)]> {
        self.preimage_box.as_deref()
    }

    pub fn n_m(&self) -> usize {
        self.immersion.domain_dim()
    }

    pub fn n_v(&self) -> usize {
        self.projection.n_fiber()
    }

    pub fn n_x(&self) -> usize {
        self.projection.n_base()
    }
}
