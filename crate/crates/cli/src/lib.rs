//! Command-line front end: parse connection definitions, run traces,
//! classification and checks, emit CSV/JSON/SVG.
//!
//! Exit codes: 0 ok, 1 input error, 2 residue-defect, 3 property failure.

mod check;
mod svg;

use merogeo::classify::{
    classify_omega, detect_closure, winding_number, ClosureTolerances, GeodesicCycle,
    HorizonOptions, OmegaTag,
};
use merogeo::expr::{parse_complex, parse_form, print_form};
use merogeo::integrate::{invariant_drift, trace, TraceOptions};
use merogeo::json::Value;
use merogeo::sphere::{PoleId, SphereConnection};
use merogeo::torus::{classify_torus, torus_max_interval, torus_trace, TorusSpec};
use merogeo::Complex64;

pub use check::run_checks;

/// Result of one command invocation.
#[derive(Debug)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn ok(stdout: String) -> CmdOutput {
        CmdOutput {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, msg: impl Into<String>) -> CmdOutput {
        CmdOutput {
            code,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }
}

const USAGE: &str = "\
usage: merogeo <command> [flags]

commands:
  residues --form SRC [--json PATH]
      pole catalog, residue at infinity, and the sum defect; exit 2 when
      the defect exceeds 1e-9
  trace --form SRC --z0 Z --v0 V --t T [--csv PATH] [--json PATH]
        [--svg PATH] [--tol X]
      integrate a geodesic and report its terminal event and drift
  classify --form SRC --z0 Z --v0 V --horizon T [--tol X]
      omega-limit verdict for the geodesic, with residue checks
  torus --lambda L --a A --z0 Z --v0 V [--t T] [--svg PATH]
        [--max-den N] [--tol X]
      classify a constant connection on the torus C/(Z + L Z)
  check --seed N --n N [--tol X]
      randomized property suite; exit 3 on any failure

complex flags accept expressions like `i`, `-1.5+0.3i`, `2e-3`.
MEROGEO_TOL overrides the default integrator tolerance.
";

struct Flags {
    pairs: Vec<(String, String)>,
}

impl Flags {
    fn parse(args: &[&str]) -> Result<Flags, String> {
        let mut pairs = Vec::new();
        let mut k = 0;
        while k < args.len() {
            let key = args[k];
            if !key.starts_with("--") {
                return Err(format!("unexpected argument `{key}`"));
            }
            let Some(value) = args.get(k + 1) else {
                return Err(format!("flag `{key}` needs a value"));
            };
            pairs.push((key[2..].to_string(), value.to_string()));
            k += 2;
        }
        Ok(Flags { pairs })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing --{key}"))
    }

    fn complex(&self, key: &str) -> Result<Complex64, String> {
        parse_complex(self.require(key)?).map_err(|e| format!("--{key}: {e}"))
    }

    fn real(&self, key: &str) -> Result<f64, String> {
        let raw = self.require(key)?;
        raw.parse::<f64>()
            .map_err(|_| format!("--{key}: `{raw}` is not a number"))
    }

    fn real_opt(&self, key: &str) -> Result<Option<f64>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|_| format!("--{key}: `{raw}` is not a number")),
        }
    }
}

/// Entry point used by `main` and by the integration tests; `env_tol` is the
/// already-read value of `MEROGEO_TOL`.
pub fn run_with(args: &[&str], env_tol: Option<f64>) -> CmdOutput {
    let Some((&cmd, rest)) = args.split_first() else {
        return CmdOutput::fail(1, format!("no command given\n{USAGE}"));
    };
    let flags = match Flags::parse(rest) {
        Ok(f) => f,
        Err(msg) => return CmdOutput::fail(1, msg),
    };
    match cmd {
        "residues" => cmd_residues(&flags),
        "trace" => cmd_trace(&flags, env_tol),
        "classify" => cmd_classify(&flags, env_tol),
        "torus" => cmd_torus(&flags),
        "check" => cmd_check(&flags),
        "help" | "--help" | "-h" => CmdOutput::ok(USAGE.to_string()),
        other => CmdOutput::fail(1, format!("unknown command `{other}`\n{USAGE}")),
    }
}

/// Reads `MEROGEO_TOL` from the process environment.
pub fn env_tolerance() -> Option<f64> {
    std::env::var("MEROGEO_TOL").ok().and_then(|s| s.parse().ok())
}

fn trace_options(flags: &Flags, env_tol: Option<f64>) -> Result<TraceOptions, String> {
    let mut opts = TraceOptions::default();
    let tol = match flags.real_opt("tol")? {
        Some(t) => Some(t),
        None => env_tol,
    };
    if let Some(t) = tol {
        if !t.is_finite() || t <= 0.0 {
            return Err(format!("tolerance must be positive, got {t}"));
        }
        opts.abs_tol = t;
        opts.rel_tol = t;
    }
    Ok(opts)
}

fn write_file(path: &str, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write `{path}`: {e}"))
}

// ---------------------------------------------------------------------------
// residues
// ---------------------------------------------------------------------------

fn cmd_residues(flags: &Flags) -> CmdOutput {
    let src = match flags.require("form") {
        Ok(s) => s,
        Err(msg) => return CmdOutput::fail(1, msg),
    };
    let form = match parse_form(src) {
        Ok(f) => f,
        Err(e) => return CmdOutput::fail(1, e.to_string()),
    };
    let conn = match SphereConnection::new(form.clone()) {
        Ok(c) => c,
        Err(e) => return CmdOutput::fail(1, e.to_string()),
    };
    let (sum, defect) = conn.residue_sum_report();
    let mut root = conn.catalog_json();
    root.push("form", Value::str(print_form(&form)));
    root.push("sum", merogeo::json::complex(sum.re, sum.im));
    root.push("defect", Value::Float(defect));
    let rendered = root.render();
    if let Some(path) = flags.get("json") {
        if let Err(msg) = write_file(path, &rendered) {
            return CmdOutput::fail(1, msg);
        }
    }
    CmdOutput {
        code: if defect < 1e-9 { 0 } else { 2 },
        stdout: rendered + "\n",
        stderr: String::new(),
    }
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

fn cmd_trace(flags: &Flags, env_tol: Option<f64>) -> CmdOutput {
    let inner = || -> Result<CmdOutput, String> {
        let src = flags.require("form")?;
        let z0 = flags.complex("z0")?;
        let v0 = flags.complex("v0")?;
        let t_end = flags.real("t")?;
        let opts = trace_options(flags, env_tol)?;
        let conn = SphereConnection::parse(src).map_err(|e| e.to_string())?;
        let tr = trace(&conn, z0, v0, t_end, &opts).map_err(|e| e.to_string())?;
        if let Some(path) = flags.get("csv") {
            write_file(path, &tr.to_csv())?;
        }
        if let Some(path) = flags.get("json") {
            write_file(path, &tr.to_json().render())?;
        }
        if let Some(path) = flags.get("svg") {
            write_file(path, &svg::trace_svg(&conn, &tr))?;
        }
        let mut summary = Value::object();
        summary.push("event", Value::str(tr.event.tag()));
        summary.push("event_t", Value::Float(tr.event_t));
        summary.push("samples", Value::Int(tr.samples.len() as i64));
        summary.push("max_invariant_drift", Value::Float(invariant_drift(&tr)));
        summary.push(
            "chart_switches",
            Value::Array(tr.switch_times().into_iter().map(Value::Float).collect()),
        );
        Ok(CmdOutput::ok(summary.render() + "\n"))
    };
    inner().unwrap_or_else(|msg| CmdOutput::fail(1, msg))
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn cmd_classify(flags: &Flags, env_tol: Option<f64>) -> CmdOutput {
    let inner = || -> Result<CmdOutput, String> {
        let src = flags.require("form")?;
        let z0 = flags.complex("z0")?;
        let v0 = flags.complex("v0")?;
        let horizon = flags.real("horizon")?;
        let opts = trace_options(flags, env_tol)?;
        let conn = SphereConnection::parse(src).map_err(|e| e.to_string())?;
        let tr = trace(&conn, z0, v0, horizon, &opts).map_err(|e| e.to_string())?;
        let hopts = HorizonOptions::default();
        let verdict = classify_omega(&conn, &tr, &hopts);
        let mut root = verdict.to_json();
        let mut checks = Vec::new();
        if matches!(
            verdict.tag,
            OmegaTag::ClosedGeodesic { .. }
                | OmegaTag::LimitCycleCandidate
                | OmegaTag::BoundaryGraphCandidate
        ) {
            let ids = enclosed_or_all(&conn, &tr);
            checks.push(
                merogeo::classify::residue_condition_report(&conn, &ids, 0).to_json(),
            );
        }
        root.push("residue_checks", Value::Array(checks));
        Ok(CmdOutput::ok(root.render() + "\n"))
    };
    inner().unwrap_or_else(|msg| CmdOutput::fail(1, msg))
}

/// Poles enclosed by the closed loop of the trace when one exists and fits a
/// chart, otherwise every finite pole.
fn enclosed_or_all(
    conn: &SphereConnection,
    tr: &merogeo::integrate::GeodesicTrace,
) -> Vec<PoleId> {
    let all = || -> Vec<PoleId> {
        (0..conn.catalog(merogeo::sphere::Chart::Z).entries.len())
            .map(PoleId::Finite)
            .collect()
    };
    let report = detect_closure(tr, &ClosureTolerances::default());
    let Some(period) = report.period else {
        return all();
    };
    let Ok(cycle) = GeodesicCycle::from_closed_trace(tr, period) else {
        return all();
    };
    let mut ids = Vec::new();
    for (k, e) in conn.catalog(cycle.chart).entries.iter().enumerate() {
        if let Ok(w) = winding_number(&cycle, e.location) {
            if w != 0 {
                if let Some(id) = conn.pole_id_at(cycle.chart, e.location) {
                    ids.push(id);
                } else {
                    ids.push(PoleId::Finite(k));
                }
            }
        }
    }
    if ids.is_empty() {
        all()
    } else {
        ids
    }
}

// ---------------------------------------------------------------------------
// torus
// ---------------------------------------------------------------------------

fn cmd_torus(flags: &Flags) -> CmdOutput {
    let inner = || -> Result<CmdOutput, String> {
        let lambda = flags.complex("lambda")?;
        let a = flags.complex("a")?;
        let z0 = flags.complex("z0")?;
        let v0 = flags.complex("v0")?;
        let max_den = match flags.real_opt("max-den")? {
            Some(x) if x >= 1.0 => x as u64,
            Some(x) => return Err(format!("--max-den must be at least 1, got {x}")),
            None => 1_000_000,
        };
        let tol = flags.real_opt("tol")?.unwrap_or(1e-9);
        let spec = TorusSpec::new(lambda, a, z0, v0).map_err(|e| e.to_string())?;
        let verdict = classify_torus(&spec, max_den, tol);
        let mut root = verdict.to_json();
        let (lo, hi) = torus_max_interval(&spec);
        let mut interval = Value::object();
        interval.push(
            "lo",
            if lo.is_finite() {
                Value::Float(lo)
            } else {
                Value::Null
            },
        );
        interval.push(
            "hi",
            if hi.is_finite() {
                Value::Float(hi)
            } else {
                Value::Null
            },
        );
        root.push("max_interval", interval);
        let mut resolution = Value::object();
        resolution.push("max_den", Value::Int(max_den as i64));
        resolution.push("tol", Value::Float(tol));
        root.push("resolution", resolution);
        if let Some(path) = flags.get("svg") {
            let t_end = flags.real_opt("t")?.unwrap_or(20.0);
            let tr = torus_trace(&spec, t_end, 0.02).map_err(|e| e.to_string())?;
            write_file(path, &svg::torus_svg(&spec, &tr))?;
        }
        Ok(CmdOutput::ok(root.render() + "\n"))
    };
    inner().unwrap_or_else(|msg| CmdOutput::fail(1, msg))
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn cmd_check(flags: &Flags) -> CmdOutput {
    let inner = || -> Result<CmdOutput, String> {
        let seed = flags.real("seed")? as u64;
        let n = flags.real("n")?;
        if n < 1.0 {
            return Err(format!("--n must be at least 1, got {n}"));
        }
        let tol = flags.real_opt("tol")?;
        let (results, all_pass) = run_checks(seed, n as usize, tol);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<18} {:>5} {:>5} {:>5}  {:<13} {}\n",
            "property", "cases", "pass", "fail", "worst", "first_fail_seed"
        ));
        for r in &results {
            out.push_str(&format!(
                "{:<18} {:>5} {:>5} {:>5}  {:<13} {}\n",
                r.name,
                r.cases,
                r.cases - r.failures,
                r.failures,
                format!("{:.3e}", r.worst),
                match r.first_fail_seed {
                    Some(s) => s.to_string(),
                    None => "-".to_string(),
                },
            ));
        }
        out.push_str(if all_pass {
            "all properties passed\n"
        } else {
            "PROPERTY FAILURES\n"
        });
        Ok(CmdOutput {
            code: if all_pass { 0 } else { 3 },
            stdout: out,
            stderr: String::new(),
        })
    };
    inner().unwrap_or_else(|msg| CmdOutput::fail(1, msg))
}
