//! Command-line parsing and the subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use warpgeo::estimates::{verify, Estimate, Region};
use warpgeo::geometry::{orthonormal_frame, riemann, FdConfig, Point, ScalarField, Vector};
use warpgeo::omori_yau::{
    check_gamma_conditions, check_h_conditions, propagate_oy_pair, Flavor, GammaReport, GammaSampling, HGrid, HReport,
    OyPair, Propagation, PropagationReport, Ray,
};
use warpgeo::otsuki::{definiteness_check, find_otsuki_pair, verify_pair, Definiteness, OtsukiPair, SymmetricBilinearForm};

use crate::builtins;
use crate::emit::{self, Format, ScenarioOutcome, Status, TheoremOutcome};
use crate::error::{combine, geo_exit_code, invalid, CliError, Result, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_INPUT, EXIT_PASS};
use crate::scenario::{compile, MetricSpec, Overrides, ScenarioFile};

pub const SEED_VARIABLE: &str = "WARPGEO_SEED";

#[derive(Debug, Parser)]
#[command(name = "warpgeo", version, about = "Curvature estimates for submanifolds of warped products and Riemannian submersions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for output files; standard output if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for all sampling; falls back on the scenario, then on WARPGEO_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample budget per estimate.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Relative tolerance of the verdicts.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    R,
    B,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the theorems listed in scenario files (paths or builtin names).
    Verify {
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Sectional, scalar and mean curvature of the immersed manifold at a point.
    Curvature {
        scenario: String,
        /// Parameters of the point, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
    },
    /// Search a symmetric bilinear form for an Otsuki pair.
    Otsuki { form: PathBuf },
    /// Check a pair (h, gamma) of Omori-Yau functions, optionally transferring it to an immersion.
    OyCheck { pair: PathBuf },
    /// Verify a scenario over a range of r or b values.
    Sweep {
        scenario: String,
        #[arg(long, value_enum, default_value = "r")]
        param: SweepParam,
        /// `start:end:count`, inclusive.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
    },
    /// List builtin ambients, immersions and scenarios.
    ListBuiltins,
}

struct Context<'a> {
    cli: &'a Cli,
    overrides: Overrides,
    stdout: Vec<u8>,
}

impl Context<'_> {
    fn format(&self, default: Format) -> Format {
        self.cli.format.unwrap_or(default)
    }

    /// Writes an artifact to `--out` (reporting the path) or to stdout.
    fn emit(&mut self, stem: &str, format: Format, contents: &str) -> Result<()> {
        match &self.cli.out {
            Some(dir) => {
                let path = emit::output_path(dir, stem, format);
                emit::write_atomic(&path, contents)?;
                let _ = writeln!(self.stdout, "wrote {}", path.display());
            }
            None => {
                let _ = self.stdout.write_all(contents.as_bytes());
            }
        }
        Ok(())
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn fallback_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VARIABLE) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| invalid(format!("{SEED_VARIABLE} must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let overrides = Overrides { seed: cli.seed, budget: cli.budget, tolerance: cli.tolerance, fallback_seed: fallback_seed()? };
    let mut ctx = Context { cli, overrides, stdout: Vec::new() };
    let work = |ctx: &mut Context| match &cli.command {
        Command::Verify { scenarios } => verify_command(ctx, scenarios),
        Command::Curvature { scenario, at } => curvature_command(ctx, scenario, at),
        Command::Otsuki { form } => otsuki_command(ctx, form),
        Command::OyCheck { pair } => oy_command(ctx, pair),
        Command::Sweep { scenario, param, range } => sweep_command(ctx, scenario, *param, range),
        Command::ListBuiltins => list_command(ctx),
    };
    let result = match cli.jobs {
        Some(0) => Err(invalid("--jobs must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| invalid(e.to_string()))?;
            pool.install(|| work(&mut ctx))
        }
        None => work(&mut ctx),
    };
    let _ = stdout.write_all(&ctx.stdout);
    result
}

/// Loads, builds and verifies one scenario.
pub fn verify_scenario(arg: &str, overrides: &Overrides) -> ScenarioOutcome {
    let file = match ScenarioFile::resolve(arg) {
        Ok(f) => f,
        Err(e) => return ScenarioOutcome::failed(arg, None, &e),
    };
    verify_file(&file, overrides)
}

pub fn verify_file(file: &ScenarioFile, overrides: &Overrides) -> ScenarioOutcome {
    let seed = file.seed(overrides);
    let sc = match file.build(overrides) {
        Ok(sc) => sc,
        Err(e) => return ScenarioOutcome::failed(file.name.clone(), Some(seed), &e),
    };
    let results = file.theorems.iter().map(|&t| TheoremOutcome::from_result(t, verify(&sc, t))).collect();
    ScenarioOutcome::completed(file.name.clone(), seed, results)
}

fn summary(o: &ScenarioOutcome) -> String {
    let mut lines = Vec::new();
    if let Some(e) = &o.error {
        lines.push(format!("{}: {} ({e})", o.scenario, Status::from_code(o.exit_code).label()));
    }
    for r in &o.results {
        let line = match &r.report {
            Some(rep) => format!(
                "{}/{}: {} lhs {:.6} rhs {:.6} margin {:.6}{}",
                o.scenario,
                r.estimate,
                r.status.label(),
                rep.lhs,
                rep.rhs,
                rep.margin,
                if rep.vacuous { " (vacuous)" } else { "" }
            ),
            None => format!("{}/{}: {} ({})", o.scenario, r.estimate, r.status.label(), r.error.as_deref().unwrap_or("")),
        };
        lines.push(line);
    }
    lines.join("\n") + "\n"
}

fn verify_command(ctx: &mut Context, scenarios: &[String]) -> Result<i32> {
    let overrides = ctx.overrides;
    let outcomes: Vec<ScenarioOutcome> = scenarios.par_iter().map(|s| verify_scenario(s, &overrides)).collect();
    let format = ctx.format(Format::Json);
    if ctx.cli.out.is_some() {
        for o in &outcomes {
            let text = match format {
                Format::Json => emit::json(o),
                Format::Csv => emit::csv(std::slice::from_ref(o))?,
                Format::Plotdata => emit::plotdata(std::slice::from_ref(o)),
            };
            ctx.emit(&o.scenario, format, &text)?;
            let _ = ctx.stdout.write_all(summary(o).as_bytes());
        }
    } else {
        let text = match (format, outcomes.as_slice()) {
            (Format::Json, [one]) => emit::json(one),
            (Format::Json, many) => emit::json(many),
            (Format::Csv, all) => emit::csv(all)?,
            (Format::Plotdata, all) => emit::plotdata(all),
        };
        ctx.emit("report", format, &text)?;
    }
    Ok(combine(outcomes.iter().map(|o| o.exit_code)))
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCurvature {
    pub scenario: String,
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    /// Extremes of the sectional curvature over planes at the point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sectional_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sectional_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
    pub mean_curvature: Vec<f64>,
    pub mean_curvature_norm: f64,
}

pub fn point_curvature(file: &ScenarioFile, overrides: &Overrides, at: &[f64]) -> Result<PointCurvature> {
    let sc = file.build(overrides)?;
    let imm = sc.immersion();
    let p = Point::from_vec(at.to_vec());
    if p.len() != imm.domain_dim() {
        return Err(invalid(format!("--at needs {} coordinates, got {}", imm.domain_dim(), p.len())));
    }
    // a point the user picked outside the chart is bad input, not a numerical failure
    let image = imm.map(&p).map_err(|e| match e {
        warpgeo::GeoError::OutOfChart { .. } => invalid(e.to_string()),
        e => CliError::Geo(e),
    })?;
    let h = imm.mean_curvature_vector(&p)?;
    let norm = imm.ambient_norm(&p, &h)?;
    let (mut kmin, mut kmax, mut scalar) = (None, None, None);
    if imm.domain_dim() >= 2 {
        let metric = imm.induced_metric_field();
        let tensor = riemann(&metric, &p, FdConfig::default())?;
        let range = tensor.sectional_range(&orthonormal_frame(&metric.at(&p)?))?;
        kmin = Some(range.min);
        kmax = Some(range.max);
        scalar = Some(tensor.scalar());
    }
    Ok(PointCurvature {
        scenario: file.name.clone(),
        point: at.to_vec(),
        image: image.as_slice().to_vec(),
        sectional_min: kmin,
        sectional_max: kmax,
        scalar,
        mean_curvature: h.as_slice().to_vec(),
        mean_curvature_norm: norm,
    })
}

fn curvature_command(ctx: &mut Context, scenario: &str, at: &[f64]) -> Result<i32> {
    let file = ScenarioFile::resolve(scenario)?;
    let pc = point_curvature(&file, &ctx.overrides, at)?;
    let format = ctx.format(Format::Json);
    let text = match format {
        Format::Json => emit::json(&pc),
        Format::Csv => {
            let mut rows = vec!["quantity,value".to_string()];
            let mut push = |k: &str, v: Option<f64>| {
                if let Some(v) = v {
                    rows.push(format!("{k},{v}"));
                }
            };
            push("sectional_min", pc.sectional_min);
            push("sectional_max", pc.sectional_max);
            push("scalar", pc.scalar);
            push("mean_curvature_norm", Some(pc.mean_curvature_norm));
            rows.join("\n") + "\n"
        }
        Format::Plotdata => return Err(invalid("curvature supports json and csv output")),
    };
    ctx.emit(&format!("{}-curvature", file.name), format, &text)?;
    Ok(EXIT_PASS)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { context: path.display().to_string(), source })
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{what} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

/// A form `V × V → W` by its component matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFile {
    pub components: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_inner: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_inner: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtsukiOutcome {
    pub dim_v: usize,
    pub dim_w: usize,
    pub definiteness: Definiteness,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<OtsukiPair>,
    /// Relative residual recomputed from the returned vectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
}

pub fn otsuki(file: &FormFile, seed: u64) -> Result<OtsukiOutcome> {
    let components = file.components.iter().map(|c| matrix(c, "form component")).collect::<Result<Vec<_>>>()?;
    let n1 = components.first().map_or(0, |c| c.nrows());
    let n2 = components.len();
    let v = file.v_inner.as_ref().map(|m| matrix(m, "v_inner")).transpose()?.unwrap_or_else(|| DMatrix::identity(n1, n1));
    let w = file.w_inner.as_ref().map(|m| matrix(m, "w_inner")).transpose()?.unwrap_or_else(|| DMatrix::identity(n2, n2));
    let form = SymmetricBilinearForm::new(components, v, w)?;
    let definiteness = definiteness_check(&form, seed);
    let mut out = OtsukiOutcome { dim_v: n1, dim_w: n2, definiteness, pair: None, check_residual: None, error: None, exit_code: EXIT_PASS };
    if n2 >= n1 {
        out.error = Some(format!("need dim W = {n2} below dim V = {n1}"));
        out.exit_code = EXIT_HYPOTHESIS;
    } else if !out.definiteness.definite {
        out.error = Some("the form has a null direction".into());
        out.exit_code = EXIT_HYPOTHESIS;
    } else {
        match find_otsuki_pair(&form, seed) {
            Ok(pair) => {
                out.check_residual = Some(verify_pair(&form, &pair.first(), &pair.second()).0);
                out.pair = Some(pair);
            }
            Err(e) => {
                out.exit_code = geo_exit_code(&e);
                out.error = Some(e.to_string());
            }
        }
    }
    Ok(out)
}

fn otsuki_command(ctx: &mut Context, path: &Path) -> Result<i32> {
    let file: FormFile = read_json(path)?;
    let seed = ctx.overrides.seed.or(file.seed).or(ctx.overrides.fallback_seed).unwrap_or(0);
    let out = otsuki(&file, seed)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "form".into());
    ctx.emit(&format!("{stem}-otsuki"), Format::Json, &emit::json(&out))?;
    Ok(out.exit_code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlavorSpec {
    #[default]
    Hessian,
    Laplacian,
}

impl From<FlavorSpec> for Flavor {
    fn from(f: FlavorSpec) -> Flavor {
        match f {
            FlavorSpec::Hessian => Flavor::Hessian,
            FlavorSpec::Laplacian => Flavor::Laplacian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub region: Vec<[f64; 2]>,
    #[serde(default)]
    pub rays: Vec<RaySpec>,
    #[serde(default)]
    pub compact: bool,
    #[serde(default = "default_pair_budget")]
    pub budget: usize,
}

fn default_pair_budget() -> usize {
    200
}

impl SamplingSpec {
    fn build(&self, seed: u64) -> Result<GammaSampling> {
        let rays = self
            .rays
            .iter()
            .map(|r| Ray { start: Point::from_vec(r.start.clone()), direction: Vector::from_vec(r.direction.clone()), t_max: r.t_max })
            .collect();
        let region = Region::boxed(self.region.iter().map(|[lo, hi]| (*lo, *hi)).collect())?;
        Ok(GammaSampling { region, rays, compact: self.compact, budget: self.budget, seed })
    }
}

/// Transfer of a fiber pair to the immersion of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateSpec {
    /// Scenario file or builtin name; its ambient must be a warped product.
    pub scenario: String,
    pub alpha: f64,
    pub base_box: Vec<[f64; 2]>,
    pub manifold: SamplingSpec,
}

/// A pair `(h, γ)` with `h` in the variable `t` and `γ` in the metric's
/// coordinates (the fiber's when propagating).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub h: String,
    pub gamma: String,
    #[serde(default)]
    pub flavor: FlavorSpec,
    pub c: f64,
    pub c_prime: f64,
    #[serde(default)]
    pub cutoff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    pub sampling: SamplingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagate: Option<PropagateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairOutcome {
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<HReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagation: Option<PropagationReport>,
}

fn h_field(text: &str) -> Result<ScalarField> {
    let h = compile(text, &["t".to_string()], "h")?;
    Ok(ScalarField::new(text, 1, move |t| h.value(t.as_slice())))
}

pub fn oy_check(file: &PairFile, overrides: &Overrides) -> Result<PairOutcome> {
    let seed = overrides.seed.or(file.seed).or(overrides.fallback_seed).unwrap_or(0);
    let h = h_field(&file.h)?;
    let flavor: Flavor = file.flavor.into();
    match &file.propagate {
        None => {
            let spec = file.metric.as_ref().ok_or_else(|| invalid("a pair without 'propagate' needs a 'metric'"))?;
            let (metric, coords) = spec.build("x", "metric")?;
            let g = compile(&file.gamma, &coords, "gamma")?;
            let gamma = ScalarField::new(file.gamma.clone(), coords.len(), move |p| g.value(p.as_slice()));
            let pair = OyPair { h: h.clone(), gamma, flavor, c: file.c, c_prime: file.c_prime, cutoff: file.cutoff };
            let h_report = check_h_conditions(&h, HGrid::default());
            let gamma_report = check_gamma_conditions(&pair, &metric, &file.sampling.build(seed)?)?;
            Ok(PairOutcome { certified: h_report.pass() && gamma_report.pass(), h: Some(h_report), gamma: Some(gamma_report), propagation: None })
        }
        Some(prop) => {
            let sc_file = ScenarioFile::resolve(&prop.scenario)?;
            let ambient = sc_file.ambient.build()?;
            if ambient.warped().is_none() {
                return Err(CliError::Geo(warpgeo::GeoError::AmbientNotWarped));
            }
            let imm = sc_file.immersion.build(&ambient)?;
            let g = compile(&file.gamma, &ambient.fiber_coords, "gamma")?;
            let fiber_gamma = ScalarField::new(file.gamma.clone(), ambient.fiber_coords.len(), move |p| g.value(p.as_slice()));
            let propagation = Propagation {
                h,
                fiber_gamma,
                flavor,
                c: file.c,
                c_prime: file.c_prime,
                alpha: prop.alpha,
                cutoff: file.cutoff,
                base_box: Region::boxed(prop.base_box.iter().map(|[lo, hi]| (*lo, *hi)).collect())?,
                fiber_sampling: file.sampling.build(seed)?,
                manifold_sampling: prop.manifold.build(seed)?,
            };
            let report = propagate_oy_pair(&imm, &propagation)?;
            let certified = report.fiber.pass() && report.h.pass() && report.manifold.pass();
            Ok(PairOutcome { certified, h: None, gamma: None, propagation: Some(report) })
        }
    }
}

fn oy_command(ctx: &mut Context, path: &Path) -> Result<i32> {
    let file: PairFile = read_json(path)?;
    let out = oy_check(&file, &ctx.overrides)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "pair".into());
    ctx.emit(&format!("{stem}-oy"), Format::Json, &emit::json(&out))?;
    Ok(if out.certified { EXIT_PASS } else { EXIT_FAIL })
}

/// `start:end:count`, evenly spaced and inclusive.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || invalid(format!("range '{text}' is not start:end:count"));
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub estimate: Estimate,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sweep(file: &ScenarioFile, param: SweepParam, values: &[f64], overrides: &Overrides) -> Vec<SweepRow> {
    let name = match param {
        SweepParam::R => "r",
        SweepParam::B => "b",
    };
    let outcomes: Vec<(f64, ScenarioOutcome)> = values
        .par_iter()
        .map(|&v| {
            let mut f = file.clone();
            match param {
                SweepParam::R => f.r = v,
                SweepParam::B => f.b = v,
            }
            (v, verify_file(&f, overrides))
        })
        .collect();
    let mut rows = Vec::new();
    for (v, o) in outcomes {
        let results: Vec<TheoremOutcome> = if o.results.is_empty() {
            let status = Status::from_code(o.exit_code);
            file.theorems.iter().map(|&t| TheoremOutcome { estimate: t, status, report: None, error: o.error.clone() }).collect()
        } else {
            o.results
        };
        for r in results {
            let rep = r.report.as_ref();
            rows.push(SweepRow {
                param: name.into(),
                value: v,
                estimate: r.estimate,
                status: r.status,
                lhs: rep.map(|x| x.lhs),
                rhs: rep.map(|x| x.rhs),
                margin: rep.map(|x| x.margin),
                error: r.error.clone(),
            });
        }
    }
    rows
}

fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let param = rows.first().map_or("r", |r| r.param.as_str());
    w.write_record([param, "estimate", "lhs", "rhs", "margin", "verdict"])?;
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.value.to_string(), r.estimate.to_string(), num(r.lhs), num(r.rhs), num(r.margin), r.status.label().to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 strings"))
}

fn sweep_plotdata(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let mut estimates: Vec<Estimate> = rows.iter().map(|r| r.estimate).collect();
    estimates.dedup();
    for e in estimates {
        for (label, pick) in [("rhs", (|r: &SweepRow| r.rhs) as fn(&SweepRow) -> Option<f64>), ("lhs", |r: &SweepRow| r.lhs)] {
            let param = rows.first().map_or("r", |r| r.param.as_str());
            out.push_str(&format!("# {e}: {param} {label}\n"));
            for r in rows.iter().filter(|r| r.estimate == e) {
                if let Some(y) = pick(r) {
                    out.push_str(&format!("{} {y}\n", r.value));
                }
            }
            out.push_str("\n\n");
        }
    }
    out
}

fn sweep_command(ctx: &mut Context, scenario: &str, param: SweepParam, range: &str) -> Result<i32> {
    let file = ScenarioFile::resolve(scenario)?;
    let values = parse_range(range)?;
    let rows = sweep(&file, param, &values, &ctx.overrides);
    let format = ctx.format(Format::Csv);
    let text = match format {
        Format::Csv => sweep_csv(&rows)?,
        Format::Json => emit::json(&rows),
        Format::Plotdata => sweep_plotdata(&rows),
    };
    ctx.emit(&format!("{}-sweep", file.name), format, &text)?;
    Ok(combine(rows.iter().map(|r| r.status.exit_code())))
}

#[derive(Debug, Serialize)]
struct Entry {
    name: String,
    description: String,
}

fn list_command(ctx: &mut Context) -> Result<i32> {
    let entries = |list: &[(&str, &str)]| -> Vec<Entry> {
        list.iter().map(|(n, d)| Entry { name: n.to_string(), description: d.to_string() }).collect()
    };
    let scenarios: Vec<Entry> = builtins::SCENARIOS
        .iter()
        .map(|(n, text)| {
            let description = ScenarioFile::from_json(text, n).ok().and_then(|f| f.description).unwrap_or_default();
            Entry { name: n.to_string(), description }
        })
        .collect();
    let sections = [("ambients", entries(builtins::AMBIENTS)), ("immersions", entries(builtins::IMMERSIONS)), ("scenarios", scenarios)];
    let text = match ctx.cli.format {
        Some(Format::Json) => {
            let map: serde_json::Map<String, serde_json::Value> = sections
                .iter()
                .map(|(k, v)| (k.to_string(), serde_json::to_value(v).expect("entries serialize")))
                .collect();
            emit::json(&map)
        }
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kind", "name", "description"])?;
            for (kind, list) in &sections {
                for e in list {
                    w.write_record([kind, e.name.as_str(), e.description.as_str()])?;
                }
            }
            String::from_utf8(w.into_inner().map_err(|e| invalid(e.to_string()))?).expect("UTF-8")
        }
        Some(Format::Plotdata) => return Err(invalid("list-builtins supports json and csv output")),
        None => {
            let mut s = String::new();
            for (kind, list) in &sections {
                s.push_str(&format!("{kind}:\n"));
                for e in list {
                    s.push_str(&format!("  {:<22} {}\n", e.name, e.description));
                }
            }
            s
        }
    };
    let _ = ctx.stdout.write_all(text.as_bytes());
    Ok(EXIT_PASS)
}
