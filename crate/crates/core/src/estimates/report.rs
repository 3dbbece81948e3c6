use serde::Serialize;

use crate::estimates::{Estimate, Extremum};
use crate::omori_yau::OySequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    /// `lhs ≥ rhs − tolerance·(1 + |rhs|)`.
    pub fn decide(lhs: f64, rhs: f64, tolerance: f64) -> Verdict {
        if lhs >= rhs - tolerance * (1.0 + rhs.abs()) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisStatus {
    Pass,
    Fail,
    Asserted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub name: String,
    pub status: HypothesisStatus,
    pub detail: String,
}

impl HypothesisResult {
    pub(crate) fn pass(name: &str, detail: impl Into<String>) -> Self {
        HypothesisResult { name: name.into(), status: HypothesisStatus::Pass, detail: detail.into() }
    }

    pub(crate) fn asserted(name: &str, detail: impl Into<String>) -> Self {
        HypothesisResult { name: name.into(), status: HypothesisStatus::Asserted, detail: detail.into() }
    }
}

/// Where the left-hand side was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    /// The tangent plane of `M` for sectional curvature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane: Option<[Vec<f64>; 2]>,
    pub samples: usize,
}

/// The ingredients of the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsBreakdown {
    pub n_m: usize,
    pub n_v: usize,
    pub n_x: usize,
    pub c_b_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_b_r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_base_curvature: Option<Extremum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_horizontal_curvature: Option<Extremum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Extremum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<Extremum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Extremum>,
}

/// The sectional estimate with `inf K_X` in place of `inf sec_hor`, valid
/// when the horizontal distribution is integrable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrableCase {
    /// Largest `|A_X Y|` seen on horizontal frames.
    pub max_horizontal_a: f64,
    pub inf_base_curvature: Extremum,
    pub rhs: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

/// One step of the sectional argument at a point of an almost-maximum
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionalStep {
    pub n: f64,
    pub point: Vec<f64>,
    /// Base distance `s_n` of the image point.
    pub s_n: f64,
    /// Dimension of the subspace of `T_pM` mapped to horizontal vectors.
    pub horizontal_dim: usize,
    pub normal_dim: usize,
    /// Smallest `|S(e,e)|` over unit `e` in that subspace.
    pub min_second_fundamental: f64,
    /// `C_b(s_n) − 1/(n φ_b'(s_n))`.
    pub lower_bound: f64,
    pub lower_bound_holds: bool,
    pub definite: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The Gauss-equation step on an Otsuki pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStep {
    pub residual: f64,
    pub angle: f64,
    /// `K_M(e1,e2) − K_𝓜(dφe1,dφe2)`.
    pub gauss_defect: f64,
    /// `max(0, C_b(r) − 1/(n φ_b'(s_n)))²`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionalDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<OySequence>,
    pub steps: Vec<SectionalStep>,
    /// Smallest `s_n` along the sequence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_s_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanStep {
    pub n: f64,
    pub point: Vec<f64>,
    pub s_n: f64,
    /// `φ_b'(s_n)[C_b(s_n)(n_M − n_V) − correction − |H|]`, below `1/n`.
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<OySequence>,
    pub steps: Vec<MeanStep>,
    /// Smallest `Δf − φ_b'(ρ)[C_b(ρ)(n_M − n_V) − correction − |H|]` over
    /// sampled points.
    pub laplacian_slack: f64,
    pub laplacian_witness: Vec<f64>,
    pub laplacian_holds: bool,
    /// Largest `Σ |dφ(e_i)^ver|²` over sampled points, at most `n_V`.
    pub max_vertical_sum: f64,
    pub vertical_sum_holds: bool,
    /// Smallest `2 g(A_{ξ^hor} grad ρ, ξ^ver)` over unit tangent vectors,
    /// at least `−α₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_a_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_term_holds: Option<bool>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnostics {
    Sectional(SectionalDiagnostics),
    Mean(MeanDiagnostics),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub scenario: String,
    pub estimate: Estimate,
    pub hypotheses: Vec<HypothesisResult>,
    pub lhs: f64,
    pub lhs_witness: Witness,
    pub rhs: f64,
    pub breakdown: RhsBreakdown,
    pub tolerance: f64,
    pub margin: f64,
    pub verdict: Verdict,
    /// The right-hand side is nonpositive, so the mean curvature bound
    /// holds trivially.
    pub vacuous: bool,
    pub caveats: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrable: Option<IntegrableCase>,
    pub diagnostics: Diagnostics,
}

impl EstimateReport {
    /// The verdict recomputed from the stored numbers.
    pub fn recomputed_verdict(&self) -> Verdict {
        Verdict::decide(self.lhs, self.rhs, self.tolerance)
    }
}
