//! The `nonarch` command line: one job per process, one JSON report per job.

use std::fmt::Display;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{self, DEFAULT_SEED, RESIDUAL_PRECISION};
use crate::cubical_homology::{
    build_complex, compare_n_c, full_differential, per_variable_module, polynomial_cylinder, polynomial_module, random_module,
    unit_complex, cylinder_homotopy_check, CubicalModule, ViewKind,
};
use crate::face_lifting::{
    all_faces, approximate_tuple, exactness_check, generators_reproduce, intersect, lift, modular_law_check, parse_constraints,
    parse_tuple_job, FaceMap, Layout,
};
use crate::implicit_solver::{
    certify_bounds, homotopy_factor, normalize_system, pullback_check, residual_valuation, solve_at_point, solve_formal,
    tower_system, ImplicitSeries, PolySystem,
};
use crate::linalg::fmt_rat;
use crate::report::{all_passed, Check};
use crate::tate_series::TateSeries;
use crate::tilt_engine::{
    additive_congruence_check, b1perf_maps, from_flat, max_depth, residue_of, sharp_of_flat, unit_transfer, verify_b1perf,
};
use crate::valued_field::{fmt_q, parse_q, Characteristic, FieldElement, Valuation, Q};

#[derive(Debug, Parser)]
#[command(name = "nonarch", version, about = "Exact non-archimedean verification jobs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Residue characteristic.
    #[arg(long, global = true)]
    pub p: Option<u32>,
    /// Tower level `h` (ambient level where a field is built).
    #[arg(long, visible_alias = "h", global = true)]
    pub level: Option<u32>,
    /// Precision exponent `k` (work modulo `π^k`).
    #[arg(long, global = true)]
    pub prec: Option<i64>,
    #[arg(long = "deg-cap", global = true)]
    pub deg_cap: Option<i64>,
    /// Accuracy in valuation form, `a/b`.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Record wall-clock timing (makes the report run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Polynomial,
    PerVariable,
    Constant,
    Unit,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve `P(σ, τ) = 0` for `τ = F(σ)` (Catalan system without `--in`).
    SolveImplicit,
    /// Check the coefficient bounds of the solution series.
    Certify,
    /// Homotopy from a point `(s, t)` to a finite-level point.
    HomotopyFactor,
    /// `F_{h+1}(σ) = F_h(σ^p)` along the tower `h = 0..level`.
    PullbackCheck,
    /// `♯` of a characteristic-p element.
    TiltSharp,
    /// Transfer a unit to the tilt and certify `v(b♯·a⁻¹ − 1) ≥ 1`.
    UnitTransfer,
    /// Coordinate maps between the disk and the perfectoid piece.
    B1perfVerify,
    /// Homology of a cubical module, simple against normalized.
    CubicalHomology {
        #[arg(long, value_enum)]
        example: Option<Example>,
        #[arg(long, default_value_t = 3)]
        nmax: usize,
    },
    /// The cylinder identity on the polynomial cylinder.
    CylinderCheck {
        #[arg(long, default_value_t = 2)]
        nmax: usize,
    },
    /// Integer generators of `∩ I_σ` in degree `≤ D`.
    FaceIntersect,
    /// Exactness of the face-restriction sequence and the modular law.
    ExactnessCheck,
    /// Lift compatible face values.
    Lift,
    /// Approximate a tuple over the tower, keeping face coincidences.
    ApproximateTuple,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveImplicit => "solve-implicit",
            Command::Certify => "certify",
            Command::HomotopyFactor => "homotopy-factor",
            Command::PullbackCheck => "pullback-check",
            Command::TiltSharp => "tilt-sharp",
            Command::UnitTransfer => "unit-transfer",
            Command::B1perfVerify => "b1perf-verify",
            Command::CubicalHomology { .. } => "cubical-homology",
            Command::CylinderCheck { .. } => "cylinder-check",
            Command::FaceIntersect => "face-intersect",
            Command::ExactnessCheck => "exactness-check",
            Command::Lift => "lift",
            Command::ApproximateTuple => "approximate-tuple",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobError {
    /// Malformed input: exit 2, no report.
    Parse(String),
    /// Well-formed input that violates a precondition: exit 3 with an error report.
    Precondition(String),
}

fn parse_err(e: impl Display) -> JobError {
    JobError::Parse(e.to_string())
}

fn pre(e: impl Display) -> JobError {
    JobError::Precondition(e.to_string())
}

/// What the binary prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Option<String>,
    pub message: Option<String>,
}

struct Job {
    params: Map<String, Value>,
    checks: Vec<Check>,
    result: Value,
}

impl Job {
    fn new() -> Self {
        Job { params: Map::new(), checks: Vec::new(), result: Value::Null }
    }

    fn param(&mut self, k: &str, v: impl Into<Value>) {
        self.params.insert(k.to_string(), v.into());
    }
}

/// Input file contents, parsed, with their digest.
pub fn read_input(path: &PathBuf) -> Result<(Value, String), JobError> {
    let bytes = std::fs::read(path).map_err(|e| JobError::Parse(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_slice(&bytes).map_err(parse_err)?;
    Ok((v, digest(&bytes)))
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one job from already-read input.
pub fn run_job(command: &Command, common: &Common, input: Option<&Value>) -> Result<(Value, bool), JobError> {
    let mut job = Job::new();
    let seed = common.seed.unwrap_or(DEFAULT_SEED);
    match command {
        Command::SolveImplicit => solve_job(&mut job, common, input)?,
        Command::Certify => certify_job(&mut job, common, input)?,
        Command::HomotopyFactor => homotopy_job(&mut job, common, input)?,
        Command::PullbackCheck => pullback_job(&mut job, common, input)?,
        Command::TiltSharp => tilt_job(&mut job, need(input)?)?,
        Command::UnitTransfer => transfer_job(&mut job, need(input)?)?,
        Command::B1perfVerify => b1perf_job(&mut job, common)?,
        Command::CubicalHomology { example, nmax } => cubical_job(&mut job, common, input, *example, *nmax, seed)?,
        Command::CylinderCheck { nmax } => cylinder_job(&mut job, common, *nmax)?,
        Command::FaceIntersect => intersect_job(&mut job, common, need(input)?)?,
        Command::ExactnessCheck => exactness_job(&mut job, common, need(input)?)?,
        Command::Lift => lift_job(&mut job, common, need(input)?)?,
        Command::ApproximateTuple => approximate_job(&mut job, common, need(input)?)?,
    }
    let passed = all_passed(&job.checks);
    let report = json!({
        "command": command.name(),
        "status": if passed { "pass" } else { "fail" },
        "params": Value::Object(job.params),
        "seed": seed,
        "checks": job.checks,
        "result": job.result,
    });
    Ok((report, passed))
}

fn need(input: Option<&Value>) -> Result<&Value, JobError> {
    input.ok_or_else(|| JobError::Parse("this command needs --in".into()))
}

/// Parses arguments, runs the job and renders the report; never touches the filesystem
/// except to read `--in`.
pub fn execute(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let (input, digest) = match &cli.common.input {
        None => (None, Value::Null),
        Some(path) => match read_input(path) {
            Ok((v, d)) => (Some(v), Value::String(d)),
            Err(e) => return failure(e),
        },
    };
    let (mut report, passed) = match run_job(&cli.command, &cli.common, input.as_ref()) {
        Ok(x) => x,
        Err(JobError::Parse(m)) => return failure(JobError::Parse(m)),
        Err(JobError::Precondition(m)) => (
            json!({
                "command": cli.command.name(),
                "status": "error",
                "params": {},
                "seed": cli.common.seed.unwrap_or(DEFAULT_SEED),
                "checks": [],
                "result": null,
                "error": m,
            }),
            false,
        ),
    };
    let errored = report["status"] == "error";
    let obj = report.as_object_mut().expect("report object");
    obj.insert("tool_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    obj.insert("input_digest".into(), digest);
    let timing = if cli.common.timing { json!({"elapsed_ms": start.elapsed().as_millis() as u64}) } else { Value::Null };
    obj.insert("timing".into(), timing);
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    let exit_code = if errored {
        3
    } else if passed {
        0
    } else {
        1
    };
    Outcome { exit_code, report: Some(text), message: None }
}

fn failure(e: JobError) -> Outcome {
    match e {
        JobError::Parse(m) => Outcome { exit_code: 2, report: None, message: Some(format!("parse error: {m}")) },
        JobError::Precondition(m) => Outcome { exit_code: 3, report: None, message: Some(m) },
    }
}

fn epsilon(common: &Common, default: Q) -> Result<Q, JobError> {
    common.epsilon.as_deref().map_or(Ok(default), |s| parse_q(s).map_err(parse_err))
}

fn system_input(job: &mut Job, common: &Common, input: Option<&Value>, d: i64) -> Result<PolySystem, JobError> {
    match input {
        Some(v) => {
            job.param("system", "input");
            PolySystem::from_json(v).map_err(parse_err)
        }
        None => {
            let p = common.p.unwrap_or(2);
            job.param("system", "catalan");
            job.param("p", p);
            if !crate::valued_field::is_prime(p) {
                return Err(pre(format!("{p} is not prime")));
            }
            Ok(corpus::catalan_system(p, d))
        }
    }
}

fn coefficient_string(c: &FieldElement) -> Value {
    match c.to_rational() {
        Some(r) => Value::String(fmt_rat(&r)),
        None => serde_json::to_value(c).expect("serializable"),
    }
}

fn series_result(f: &ImplicitSeries) -> Value {
    let mut out = f.to_json();
    if f.sigma_params.nvars() == 1 {
        let dense: Vec<Vec<Value>> = f
            .series
            .iter()
            .map(|s| (1..=f.degree()).map(|k| coefficient_string(&s.coefficient(&[Q::from_integer(k)]))).collect())
            .collect();
        out["coefficients"] = json!(dense);
    }
    out
}

fn residual_check(sys: &PolySystem, f: &ImplicitSeries, prec: i64) -> Result<Check, JobError> {
    let rv = residual_valuation(sys, f).map_err(pre)?;
    Ok(Check::new("residual", rv >= Valuation::Finite(Q::from_integer(prec)), format!(">= {prec}"), rv.to_string()))
}

fn solve_job(job: &mut Job, common: &Common, input: Option<&Value>) -> Result<(), JobError> {
    let d = common.deg_cap.unwrap_or(8);
    let prec = common.prec.unwrap_or(RESIDUAL_PRECISION);
    job.param("deg_cap", d);
    job.param("prec", prec);
    let sys = system_input(job, common, input, d)?;
    let f = solve_at_point(&sys, d).map_err(pre)?;
    job.checks.push(residual_check(&sys, &f, prec)?);
    job.result = series_result(&f);
    Ok(())
}

fn certify_job(job: &mut Job, common: &Common, input: Option<&Value>) -> Result<(), JobError> {
    let d = common.deg_cap.unwrap_or(8);
    job.param("deg_cap", d);
    let sys = system_input(job, common, input, d)?;
    if sys.center_sigma.iter().chain(&sys.center_tau).any(|c| !c.is_zero()) {
        job.param("recentered", true);
    }
    let norm = normalize_system(&sys).map_err(pre)?;
    let f = solve_formal(&norm, d).map_err(pre)?;
    let cert = certify_bounds(&f, &norm);
    let vars = f.sigma_params.vars().to_vec();
    let j = cert.to_json(&vars);
    job.checks.push(
        Check::new("coefficient_bound", cert.bound_ok, "v(d_iI) >= -|I|*beta", format!("{} coefficients", cert.coefficients_checked))
            .with_witness(j["witness"].clone()),
    );
    job.checks.push(Check::new(
        "composition_tree_bound",
        cert.tree_bound_violations == 0,
        "v(d_iI) >= -(2|I|-1)*beta",
        format!("{} violations", cert.tree_bound_violations),
    ));
    job.result = json!({"certification": j, "series": f.to_json()});
    Ok(())
}

fn homotopy_job(job: &mut Job, common: &Common, input: Option<&Value>) -> Result<(), JobError> {
    let v = need(input)?;
    let sys = PolySystem::from_json(v.get("system").ok_or_else(|| parse_err("missing system"))?).map_err(parse_err)?;
    let read = |k: &str| -> Result<Vec<TateSeries>, JobError> {
        v.get(k)
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(format!("missing {k}")))?
            .iter()
            .map(|x| TateSeries::from_json(x).map_err(parse_err))
            .collect()
    };
    let (s, t) = (read("s")?, read("t")?);
    let eps = epsilon(common, Q::from_integer(0))?;
    job.param("epsilon", fmt_q(eps));
    let hf = homotopy_factor(&sys, &s, &t, eps).map_err(pre)?;
    let space = s.first().or(t.first()).expect("nonempty point").params().clone();
    let start = hf.homotopy.face(0, &space).map_err(pre)?;
    let start_ok = start.iter().zip(s.iter().chain(&t)).all(|(a, b)| a == b);
    let end = hf.homotopy.face(1, &space).map_err(pre)?;
    let level = end.iter().map(TateSeries::support_level).max().unwrap_or(0);
    let bounded = end[s.len()..].iter().all(|f| f.gauss_norm() >= Valuation::Finite(Q::from_integer(0)));
    let close = hf.s_tilde.iter().zip(&s).map(|(a, b)| (a - b).gauss_norm()).min().unwrap_or(Valuation::Infinite);
    job.checks.push(Check::new("start_face_is_point", start_ok, true, start_ok));
    job.checks.push(Check::new("end_face_level", level <= hf.h_bar, hf.h_bar, level));
    job.checks.push(Check::new("end_face_power_bounded", bounded, true, bounded));
    job.checks.push(Check::new(
        "truncation_within_threshold",
        close > Valuation::Finite(hf.threshold),
        format!("> {}", fmt_q(hf.threshold)),
        close.to_string(),
    ));
    job.result = json!({
        "h_bar": hf.h_bar,
        "radius_valuation": fmt_q(hf.radius_valuation),
        "threshold": fmt_q(hf.threshold),
        "s_tilde": hf.s_tilde.iter().map(TateSeries::to_json).collect::<Vec<_>>(),
        "homotopy": {
            "sigma": hf.homotopy.sigma.iter().map(TateSeries::to_json).collect::<Vec<_>>(),
            "tau": hf.homotopy.tau.iter().map(TateSeries::to_json).collect::<Vec<_>>(),
            "constant_in_chi": hf.homotopy.is_constant_in_chi(),
        },
    });
    Ok(())
}

fn pullback_job(job: &mut Job, common: &Common, input: Option<&Value>) -> Result<(), JobError> {
    let d = common.deg_cap.unwrap_or(8);
    let top = common.level.unwrap_or(2);
    job.param("deg_cap", d);
    job.param("level", top);
    let sys = system_input(job, common, input, d)?;
    let mut prev = solve_at_point(&tower_system(&sys, 0).map_err(pre)?, d).map_err(pre)?;
    for h in 0..top {
        let next = solve_at_point(&tower_system(&sys, h + 1).map_err(pre)?, d).map_err(pre)?;
        let ok = pullback_check(&prev, &next);
        job.checks.push(Check::new(&format!("pullback_h{h}_to_h{}", h + 1), ok, true, ok));
        prev = next;
    }
    job.result = json!({"top_series": prev.to_json()});
    Ok(())
}

fn tilt_job(job: &mut Job, v: &Value) -> Result<(), JobError> {
    let a: FieldElement = serde_json::from_value(v.clone()).map_err(parse_err)?;
    if a.params().characteristic() != Characteristic::P {
        return Err(pre("tilt-sharp takes a characteristic-p element"));
    }
    let k = a.params().with_characteristic(Characteristic::Zero);
    job.param("p", k.p());
    job.param("level", k.level());
    job.param("prec", fmt_q(k.cap()));
    let depth = max_depth(&a, k);
    let el = from_flat(&a, k, depth).map_err(pre)?;
    let integrity = el.validate().is_ok();
    job.checks.push(Check::new("sequence_integrity", integrity, true, integrity));
    if a.valuation() == Valuation::Finite(Q::from_integer(0)) {
        let ok = additive_congruence_check(&el).map_err(pre)?;
        job.checks.push(Check::new("additive_congruence", ok, true, ok));
    }
    let (sharp, stable) = sharp_of_flat(&a, k).map_err(pre)?;
    job.result = json!({"depth": depth, "sharp": sharp, "stable_below": stable.to_string(), "element": el.to_json()});
    Ok(())
}

fn transfer_job(job: &mut Job, v: &Value) -> Result<(), JobError> {
    let a: FieldElement = serde_json::from_value(v.clone()).map_err(parse_err)?;
    job.param("p", a.params().p());
    job.param("level", a.params().level());
    let t = unit_transfer(&a).map_err(pre)?;
    let ok = t.certificate >= Valuation::Finite(Q::from_integer(1));
    job.checks.push(Check::new("certificate", ok, ">= 1", t.certificate.to_string()));
    let back = residue_of(&t.element).map_err(pre)?;
    let round = back == t.element.flat;
    job.checks.push(Check::new("residue_round_trip", round, true, round));
    job.result = json!({"element": t.element.to_json(), "certificate": t.certificate.to_string()});
    Ok(())
}

fn b1perf_job(job: &mut Job, common: &Common) -> Result<(), JobError> {
    let p = common.p.unwrap_or(2);
    let h = common.level.unwrap_or(1);
    let k = common.prec.unwrap_or(12);
    job.param("p", p);
    job.param("h", h);
    job.param("prec", k);
    let data = b1perf_maps(p, h, k).map_err(pre)?;
    job.checks = verify_b1perf(&data).map_err(pre)?;
    job.result = json!({
        "upsilon_of_chi": data.upsilon_of_chi.to_json(),
        "omega_of_chi": data.omega_of_chi.to_json(),
        "chi_of": data.chi_of.to_json(),
    });
    Ok(())
}

fn boundary_check(m: &CubicalModule) -> Check {
    let bad = (2..=m.nmax).find(|&n| !full_differential(m, n - 1).mul(&full_differential(m, n)).is_zero());
    Check::new("boundary_squared_zero", bad.is_none(), true, bad.is_none()).with_witness(bad.map_or(Value::Null, |n| json!({"degree": n})))
}

fn cubical_job(
    job: &mut Job,
    common: &Common,
    input: Option<&Value>,
    example: Option<Example>,
    nmax: usize,
    seed: u64,
) -> Result<(), JobError> {
    let d = common.deg_cap.unwrap_or(2).max(0) as u32;
    let mut extra = Value::Null;
    let m = match (input, example) {
        (Some(v), _) => {
            job.param("module", "input");
            CubicalModule::from_json(v).map_err(parse_err)?
        }
        (None, ex) => {
            let ex = ex.unwrap_or(Example::Polynomial);
            job.param("module", format!("{ex:?}").to_lowercase());
            job.param("nmax", nmax);
            match ex {
                Example::Polynomial => {
                    job.param("deg_cap", d);
                    polynomial_module(nmax, d)
                }
                Example::PerVariable => {
                    job.param("deg_cap", d);
                    per_variable_module(nmax, d)
                }
                Example::Constant => CubicalModule::constant(1, nmax),
                Example::Random => random_module(&mut corpus::rng(seed), nmax, 6),
                Example::Unit => {
                    let p = common.p.unwrap_or(2);
                    job.param("p", p);
                    job.param("deg_cap", d);
                    let (m, rep) = unit_complex(p, nmax, d, 2).map_err(pre)?;
                    let acyclic = rep.homology.iter().skip(1).take(nmax.saturating_sub(1)).all(|&h| h == 0);
                    job.checks.push(Check::new("unit_contraction", rep.contraction_ok, true, rep.contraction_ok));
                    job.checks.push(Check::new("unit_acyclic_above_zero", acyclic, 0, json!(rep.homology)));
                    extra = json!({"unit_homology": rep.homology, "cycles_checked": rep.cycles_checked});
                    m
                }
            }
        }
    };
    let ident = m.check_identities();
    job.checks.push(Check::new("cubical_identities", ident.is_ok(), true, ident.is_ok()).with_witness(match &ident {
        Ok(()) => Value::Null,
        Err(e) => Value::String(e.to_string()),
    }));
    if ident.is_err() {
        return Ok(());
    }
    job.checks.push(boundary_check(&m));
    let rep = compare_n_c(&m).map_err(pre)?;
    job.checks.push(Check::new("normalized_equals_simple", rep.equal, json!(rep.simple), json!(rep.normalized)));
    let full = build_complex(&m, ViewKind::Full).map_err(pre)?;
    job.result = json!({
        "nmax": m.nmax,
        "dims": m.dims,
        "simple": rep.simple,
        "normalized": rep.normalized,
        "full": (0..=m.nmax).map(|n| full.homology(n)).collect::<Vec<_>>(),
        "equal_at_top": rep.equal_at_top,
        "extra": extra,
    });
    Ok(())
}

fn cylinder_job(job: &mut Job, common: &Common, nmax: usize) -> Result<(), JobError> {
    let d = common.deg_cap.unwrap_or(2).max(0) as u32;
    job.param("nmax", nmax);
    job.param("deg_cap", d);
    let data = polynomial_cylinder(nmax, d);
    job.checks = cylinder_homotopy_check(&data).map_err(pre)?;
    job.result = json!({"base_dims": data.base.dims, "cylinder_dims": data.cylinder.dims});
    Ok(())
}

fn constraints(job: &mut Job, common: &Common, v: &Value) -> Result<(usize, Vec<FaceMap>, u32), JobError> {
    let (n, maps) = parse_constraints(v).map_err(parse_err)?;
    let d = common.deg_cap.unwrap_or(4).max(0) as u32;
    job.param("n", n);
    job.param("deg_cap", d);
    Ok((n, maps, d))
}

fn intersect_job(job: &mut Job, common: &Common, v: &Value) -> Result<(), JobError> {
    let (n, maps, d) = constraints(job, common, v)?;
    let ideal = intersect(&maps, n, d);
    let ok = generators_reproduce(&ideal);
    job.checks.push(Check::new("generators_reproduce", ok, ideal.basis.cols() as u64, ok));
    job.result = ideal.to_json();
    Ok(())
}

fn exactness_job(job: &mut Job, common: &Common, v: &Value) -> Result<(), JobError> {
    let (n, maps, d) = constraints(job, common, v)?;
    job.checks = exactness_check(&maps, n, d);
    let bad = all_faces(n).into_iter().find(|eta| !modular_law_check(&maps, eta, n, d));
    job.checks.push(
        Check::new("modular_law", bad.is_none(), true, bad.is_none()).with_witness(bad.map_or(Value::Null, |eta| json!({"eta": eta.to_json()}))),
    );
    job.result = json!({"intersection_dimension": intersect(&maps, n, d).basis.cols()});
    Ok(())
}

fn lift_job(job: &mut Job, common: &Common, v: &Value) -> Result<(), JobError> {
    let g = TateSeries::from_json(v.get("g").ok_or_else(|| parse_err("missing g"))?).map_err(parse_err)?;
    let n = Layout::of(g.params()).map_err(parse_err)?.n();
    let faces = v
        .get("faces")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing faces"))?
        .iter()
        .map(|f| {
            let map = FaceMap::from_json(f, n).map_err(parse_err)?;
            let value = TateSeries::from_json(f.get("value").ok_or_else(|| parse_err("missing value"))?).map_err(parse_err)?;
            Ok((map, value))
        })
        .collect::<Result<Vec<_>, JobError>>()?;
    let level = common.level.or(v.get("level").and_then(Value::as_u64).map(|h| h as u32));
    job.param("n", n);
    job.param("level", level.map_or(Value::Null, |h| json!(h)));
    let r = lift(&faces, &g, level).map_err(pre)?;
    job.checks = r.checks.clone();
    job.result = json!({
        "f": r.f.to_json(),
        "lift_constant": fmt_q(r.constant),
        "valuation_loss": r.loss,
        "input_gap": r.input_gap.to_string(),
        "achieved": r.achieved.to_string(),
    });
    Ok(())
}

fn approximate_job(job: &mut Job, common: &Common, v: &Value) -> Result<(), JobError> {
    let (s, e, mode) = parse_tuple_job(v).map_err(parse_err)?;
    let e = epsilon(common, e)?;
    job.param("epsilon", fmt_q(e));
    job.param("elements", s.len());
    let r = approximate_tuple(&s, e, &mode).map_err(pre)?;
    job.checks = r.checks.clone();
    job.result = json!({"h": r.h, "s_tilde": r.s_tilde.iter().map(TateSeries::to_json).collect::<Vec<_>>()});
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Outcome {
        let mut full = vec!["nonarch"];
        full.extend_from_slice(args);
        execute(&Cli::try_parse_from(full).unwrap())
    }

    fn report(o: &Outcome) -> Value {
        serde_json::from_str(o.report.as_ref().unwrap()).unwrap()
    }

    #[test]
    fn catalan_coefficients() {
        let o = run(&["solve-implicit", "--deg-cap", "8"]);
        assert_eq!(o.exit_code, 0);
        let r = report(&o);
        let want: Vec<String> = [1, 1, 2, 5, 14, 42, 132, 429].iter().map(|c| format!("{c}/1")).collect();
        assert_eq!(r["result"]["coefficients"][0], json!(want));
    }

    #[test]
    fn b1perf_report() {
        let o = run(&["b1perf-verify", "--p", "2", "--h", "1", "--prec", "12"]);
        assert_eq!(o.exit_code, 0);
        assert_eq!(report(&o)["checks"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn precondition_exit() {
        let o = run(&["b1perf-verify", "--prec", "1"]);
        assert_eq!(o.exit_code, 3);
        assert_eq!(report(&o)["status"], "error");
    }

    #[test]
    fn cubical_examples() {
        for ex in ["polynomial", "per-variable", "constant", "unit", "random"] {
            let o = run(&["cubical-homology", "--example", ex, "--nmax", "2"]);
            assert_eq!(o.exit_code, 0, "{ex}: {:?}", o.report);
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let a = run(&["cubical-homology", "--example", "random", "--seed", "5"]);
        let b = run(&["cubical-homology", "--example", "random", "--seed", "5"]);
        assert_eq!(a, b);
    }
}
