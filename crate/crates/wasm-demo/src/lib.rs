//! JSON-in, JSON-out wrappers around three `nonarch` jobs for the browser page in `www/`.
//! Each function returns the same report object the CLI prints, minus the
//! run metadata (`tool_version`, `input_digest`, `timing`).

use nonarch::cli::{run_job, Command, Common, Example, Format, JobError};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn common() -> Common {
    Common {
        p: None,
        level: None,
        prec: None,
        deg_cap: None,
        epsilon: None,
        seed: None,
        input: None,
        out: None,
        format: Format::Json,
        timing: false,
    }
}

fn render(command: &Command, common: &Common, input: Option<&Value>) -> String {
    let v = match run_job(command, common, input) {
        Ok((report, _)) => report,
        Err(JobError::Parse(m)) => json!({"command": command.name(), "status": "error", "error": format!("parse error: {m}")}),
        Err(JobError::Precondition(m)) => json!({"command": command.name(), "status": "error", "error": m}),
    };
    serde_json::to_string_pretty(&v).expect("serializable")
}

/// Coordinate maps between the disk and `X_h` with their three checks.
#[wasm_bindgen]
pub fn b1perf_verify(p: u32, h: u32, prec: i32) -> String {
    let c = Common { p: Some(p), level: Some(h), prec: Some(prec as i64), ..common() };
    render(&Command::B1perfVerify, &c, None)
}

/// Solves the system given as JSON, or the Catalan system `τ = σ + τ²` over `Q_p` when
/// `system` is blank.
#[wasm_bindgen]
pub fn solve_implicit(system: &str, p: u32, degree: i32) -> String {
    let c = Common { p: Some(p), deg_cap: Some(degree as i64), ..common() };
    if system.trim().is_empty() {
        return render(&Command::SolveImplicit, &c, None);
    }
    match serde_json::from_str::<Value>(system) {
        Ok(v) => render(&Command::SolveImplicit, &c, Some(&v)),
        Err(e) => serde_json::to_string_pretty(&json!({"command": "solve-implicit", "status": "error", "error": format!("parse error: {e}")}))
            .expect("serializable"),
    }
}

/// Simple and normalized homology of a generated module: `polynomial`, `per-variable`,
/// `constant`, `unit` or `random` (seeded).
#[wasm_bindgen]
pub fn cubical_homology(example: &str, nmax: u32, degree: u32, seed: u32) -> String {
    let example = match example {
        "polynomial" => Example::Polynomial,
        "per-variable" => Example::PerVariable,
        "constant" => Example::Constant,
        "unit" => Example::Unit,
        "random" => Example::Random,
        other => {
            return serde_json::to_string_pretty(&json!({"command": "cubical-homology", "status": "error", "error": format!("unknown example {other}")}))
                .expect("serializable")
        }
    };
    let c = Common { deg_cap: Some(degree as i64), seed: Some(seed as u64), ..common() };
    render(&Command::CubicalHomology { example: Some(example), nmax: nmax.clamp(1, 4) as usize }, &c, None)
}
