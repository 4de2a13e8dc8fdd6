//! Command-line front end for `bellscope`.
//!
//! Every command builds a versioned JSON report; the text output is rendered
//! from that report.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use bellscope::dataset::{self, inequality, serialize_functional};
use bellscope::linprog::{serialize_certificate, visibility_wrt_inequality, visibility_wrt_local_set, LocalVisibility};
use bellscope::moment::{di_negativity_lower_bound, nearest_quantum_correlation, quantum_upper_bound, Level};
use bellscope::polytope::{face_analysis, local_bound_max, local_bound_min, FaceAnalysis, LocalBound, Side};
use bellscope::quantum::{
    correlation, infer_state_visibility, parse_realization, phi3_i3plus_realization, qutrit_i12_realization,
    seesaw_maximize, seesaw_minimize, serialize_realization, MeasurementMode, Realization, SeesawOptions,
};
use bellscope::scenario::io::{parse_functional, parse_table_or_counts, serialize_correlation, serialize_counts, TableInput};
use bellscope::scenario::{frequencies_from_counts, signaling_deltas, signaling_report_with_counts, SignalingDelta, SignalingReport, NONSIGNALING_TOL};
use bellscope::sdp::SdpOptions;
use bellscope::simulate::{simulate_counts, ShotPlan};
use bellscope::{BellFunctional, Error, ProbabilityTable};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "BELLSCOPE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bellscope", version, about = "Bell nonlocality analysis in the {[3 3 3][3 3 3]} scenario")]
struct Cli {
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Artifact path: certificate, realization, counts, nearest table or report.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Local maximum and minimum of a functional.
    LocalBound { functional: String },
    /// Face dimension on both sides of the local polytope.
    FacetCheck { functional: String },
    /// White-noise visibility w.r.t. an inequality or the whole local set.
    Visibility {
        correlation: String,
        #[arg(long, value_name = "FUNCTIONAL")]
        inequality: Option<String>,
    },
    /// Facet inequality separating a nonlocal correlation from the local set.
    FacetFrom { correlation: String },
    /// Seesaw lower bound on the quantum maximum.
    Seesaw {
        functional: String,
        #[arg(long, num_args = 2, value_names = ["DA", "DB"], required = true)]
        dims: Vec<usize>,
        /// General POVMs (default).
        #[arg(long, conflicts_with = "projective")]
        povm: bool,
        /// Restrict to projective measurements.
        #[arg(long)]
        projective: bool,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Moment-relaxation upper bound on the quantum maximum.
    UpperBound {
        functional: String,
        #[arg(long, value_parser = parse_level)]
        level: Level,
    },
    /// ℓ1-nearest correlation in a moment relaxation.
    NearestQuantum {
        correlation: String,
        #[arg(long, value_parser = parse_level)]
        level: Level,
        /// Keep this functional's value on the input fixed.
        #[arg(long, value_name = "FUNCTIONAL")]
        pin_bell: Option<String>,
    },
    /// Device-independent lower bound on the negativity.
    NegativityBound {
        correlation: String,
        #[arg(long, value_parser = parse_level)]
        level: Level,
    },
    /// Marginal differences, with significance when given counts.
    SignalingReport { input: String },
    /// Multinomial counts from a realization.
    Simulate {
        realization: String,
        #[arg(long)]
        shots: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Local bounds, seesaw values, visibilities and d_min per inequality.
    Table2 {
        /// Inclusive range `a..b`, or a single row.
        #[arg(long, value_parser = parse_rows, default_value = "1..19")]
        rows: (usize, usize),
    },
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse::<Level>().map_err(|e| e.to_string())
}

fn parse_rows(s: &str) -> Result<(usize, usize), String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a row number"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if a == 0 || b > dataset::INEQUALITY_COUNT || a > b {
        return Err(format!("rows must satisfy 1 <= a <= b <= {}", dataset::INEQUALITY_COUNT));
    }
    Ok((a, b))
}

/// Exit status and captured streams of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LpFailure(_) | Error::SdpFailure(_) => Failure::Solver(e.to_string()),
            Error::Signaling { max_delta } => Failure::Validation(format!(
                "correlation is signaling (max |Δ| {max_delta:.3e}); run `bellscope nearest-quantum` on it first"
            )),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn context<'a>(what: &str, source: &'a str) -> impl FnOnce(Error) -> Failure + 'a {
    let what = what.to_string();
    move |e| match Failure::from(e) {
        Failure::Validation(m) => Failure::Validation(format!("{what} `{source}`: {m}")),
        f => f,
    }
}

/// Runs one command line (`args[0]` is the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => failure(2, text),
            };
        }
    };
    let result = match threads() {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Failure::Validation(format!("thread pool: {e}"))),
        },
        Ok(None) => execute(&cli),
        Err(f) => Err(f),
    };
    match result.and_then(|out| finish(&cli, out)) {
        Ok(stdout) => Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(Failure::Validation(m)) => failure(2, format!("error: {m}\n")),
        Err(Failure::Solver(m)) => failure(3, format!("error: {m}\n")),
    }
}

fn failure(code: i32, stderr: String) -> Outcome {
    Outcome {
        code,
        stdout: String::new(),
        stderr,
    }
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Validation(format!("{THREADS_VAR}: expected a positive integer, got `{v}`"))),
        },
    }
}

#[derive(Debug, Serialize)]
struct Versions {
    bellscope: &'static str,
    bellscope_cli: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct InputRecord {
    role: &'static str,
    source: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Report {
    schema: u32,
    command: &'static str,
    versions: Versions,
    inputs: Vec<InputRecord>,
    seed: Option<u64>,
    tolerances: BTreeMap<&'static str, f64>,
    parameters: Value,
    result: Value,
}

/// File written by `--output` in place of the report.
struct Artifact {
    text: String,
    /// Also write the report next to the artifact.
    sidecar: bool,
}

struct Execution {
    report: Report,
    artifact: Option<Artifact>,
}

fn finish(cli: &Cli, out: Execution) -> Result<String, Failure> {
    let value = serde_json::to_value(&out.report).map_err(|e| Failure::Validation(e.to_string()))?;
    let json = serde_json::to_string_pretty(&value).map_err(|e| Failure::Validation(e.to_string()))? + "\n";
    if let Some(path) = &cli.output {
        match out.artifact {
            Some(a) => {
                write(path, &a.text)?;
                if a.sidecar {
                    let mut side = path.clone().into_os_string();
                    side.push(".json");
                    write(Path::new(&side), &json)?;
                }
            }
            None => write(path, &json)?,
        }
    }
    Ok(match cli.format {
        Format::Json => json,
        Format::Text => render_text(&value),
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Validation(format!("output `{}`: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// File contents, or `None` when no such file exists.
fn read_file(arg: &str) -> Result<Option<String>, Failure> {
    let path = Path::new(arg);
    if !path.is_file() {
        return Ok(None);
    }
    fs::read_to_string(path)
        .map(Some)
        .map_err(|e| Failure::Validation(format!("`{arg}`: {e}")))
}

fn record(role: &'static str, source: String, bytes: &[u8]) -> InputRecord {
    InputRecord {
        role,
        source,
        sha256: sha256_hex(bytes),
    }
}

/// A functional file, or a built-in (`row:N`, `N`, `i3plus`).
fn load_functional(role: &'static str, arg: &str) -> Result<(BellFunctional, InputRecord), Failure> {
    if let Some(text) = read_file(arg)? {
        let f = parse_functional(&text).map_err(context(role, arg))?;
        return Ok((f, record(role, arg.to_string(), text.as_bytes())));
    }
    let f = dataset::builtin(arg).map_err(|_| {
        Failure::Validation(format!("{role} `{arg}`: no such file and no built-in of that name (try row:1..row:19 or i3plus)"))
    })?;
    let canonical = serialize_functional(&f);
    Ok((f, record(role, format!("builtin:{arg}"), canonical.as_bytes())))
}

const BUILTIN_REALIZATIONS: [&str; 2] = ["phi3-i3plus", "qutrit-i12"];

fn builtin_realization(name: &str) -> Option<Realization> {
    match name.trim().to_ascii_lowercase().as_str() {
        "phi3-i3plus" => Some(phi3_i3plus_realization()),
        "qutrit-i12" => Some(qutrit_i12_realization()),
        _ => None,
    }
}

fn unknown(role: &str, arg: &str) -> Failure {
    Failure::Validation(format!(
        "{role} `{arg}`: no such file and no built-in of that name (try {})",
        BUILTIN_REALIZATIONS.join(" or ")
    ))
}

/// A realization file, or a built-in realization.
fn load_realization(arg: &str) -> Result<(Realization, InputRecord), Failure> {
    let role = "realization";
    if let Some(text) = read_file(arg)? {
        let r = parse_realization(&text).map_err(context(role, arg))?;
        return Ok((r, record(role, arg.to_string(), text.as_bytes())));
    }
    let r = builtin_realization(arg).ok_or_else(|| unknown(role, arg))?;
    let canonical = serialize_realization(&r);
    Ok((r, record(role, format!("builtin:{arg}"), canonical.as_bytes())))
}

/// A correlation file, a counts file (read as frequencies), or the Born-rule
/// table of a built-in realization.
fn load_correlation(arg: &str) -> Result<(ProbabilityTable, InputRecord), Failure> {
    let role = "correlation";
    if let Some(text) = read_file(arg)? {
        let p = match parse_table_or_counts(&text).map_err(context(role, arg))? {
            TableInput::Table(p) => p,
            TableInput::Counts(c) => frequencies_from_counts(&c).map_err(context(role, arg))?,
        };
        return Ok((p, record(role, arg.to_string(), text.as_bytes())));
    }
    let r = builtin_realization(arg).ok_or_else(|| unknown(role, arg))?;
    let p = correlation(&r)?;
    let canonical = serialize_correlation(&p);
    Ok((p, record(role, format!("builtin:{arg}"), canonical.as_bytes())))
}

fn table_input(arg: &str) -> Result<(TableInput, InputRecord), Failure> {
    let role = "input";
    if let Some(text) = read_file(arg)? {
        let t = parse_table_or_counts(&text).map_err(context(role, arg))?;
        return Ok((t, record(role, arg.to_string(), text.as_bytes())));
    }
    let (p, rec) = load_correlation(arg)?;
    Ok((TableInput::Table(p), rec))
}

fn report(
    command: &'static str,
    inputs: Vec<InputRecord>,
    seed: Option<u64>,
    tolerances: &[(&'static str, f64)],
    parameters: Value,
    result: Value,
) -> Report {
    Report {
        schema: SCHEMA,
        command,
        versions: Versions {
            bellscope: bellscope::VERSION,
            bellscope_cli: env!("CARGO_PKG_VERSION"),
        },
        inputs,
        seed,
        tolerances: tolerances.iter().copied().collect(),
        parameters,
        result,
    }
}

fn sdp_tolerances() -> [(&'static str, f64); 2] {
    let o = SdpOptions::default();
    [("sdp_gap", o.gap_tol), ("sdp_feasibility", o.feas_tol)]
}

fn bound_json(b: &LocalBound) -> Value {
    json!({
        "value": b.value,
        "exact": b.exact.map(|r| r.to_string()),
        "saturating_vertices": b.saturating.len(),
    })
}

fn face_json(f: &FaceAnalysis) -> Value {
    json!({
        "bound": f.bound,
        "saturating_vertices": f.saturating_count,
        "affine_dimension": f.affine_dimension,
        "independent_vertices": f.independent_vertices,
        "facet": f.is_facet,
    })
}

fn certificate_json(v: &LocalVisibility) -> Value {
    match &v.certificate {
        None => Value::Null,
        Some(c) => json!({
            "functional": serialize_functional(&c.functional),
            "local_max": c.functional.local_max,
            "face": face_json(&c.face),
        }),
    }
}

fn execute(cli: &Cli) -> Result<Execution, Failure> {
    let plain = |report| Execution { report, artifact: None };
    match &cli.command {
        Command::LocalBound { functional } => {
            let (f, rec) = load_functional("functional", functional)?;
            let (max, min) = (local_bound_max(&f)?, local_bound_min(&f)?);
            let result = json!({ "max": bound_json(&max), "min": bound_json(&min) });
            Ok(plain(report("local-bound", vec![rec], None, &[], json!({}), result)))
        }
        Command::FacetCheck { functional } => {
            let (f, rec) = load_functional("functional", functional)?;
            let max = face_analysis(&f, Side::Max)?;
            let min = face_analysis(&f, Side::Min)?;
            let result = json!({
                "dimension": f.scenario().cg_dim(),
                "max": face_json(&max),
                "min": face_json(&min),
            });
            let tol = [("rank_relative", bellscope::polytope::RANK_REL_TOL)];
            Ok(plain(report("facet-check", vec![rec], None, &tol, json!({}), result)))
        }
        Command::Visibility { correlation, inequality } => {
            let (p, rec) = load_correlation(correlation)?;
            let tol = [("nonsignaling", NONSIGNALING_TOL)];
            match inequality {
                Some(arg) => {
                    let (f, frec) = load_functional("inequality", arg)?;
                    let v = visibility_wrt_inequality(&p, &f)?;
                    let result = json!({ "target": "inequality", "visibility": v });
                    Ok(plain(report("visibility", vec![rec, frec], None, &tol, json!({}), result)))
                }
                None => {
                    let v = visibility_wrt_local_set(&p)?;
                    let result = json!({
                        "target": "local_set",
                        "visibility": v.v_cr,
                        "lp_value": v.lp_value,
                        "lp_iterations": v.lp.iterations,
                        "certificate": certificate_json(&v),
                    });
                    let artifact = v.certificate.as_ref().map(|c| Artifact {
                        text: serialize_certificate(c, v.v_cr, v.lp.iterations, &rec.sha256),
                        sidecar: false,
                    });
                    Ok(Execution {
                        report: report("visibility", vec![rec], None, &tol, json!({}), result),
                        artifact,
                    })
                }
            }
        }
        Command::FacetFrom { correlation } => {
            let (p, rec) = load_correlation(correlation)?;
            let v = visibility_wrt_local_set(&p)?;
            let c = v.certificate.as_ref().ok_or_else(|| Failure::from(Error::LocalInput))?;
            let text = serialize_certificate(c, v.v_cr, v.lp.iterations, &rec.sha256);
            let result = json!({
                "visibility": v.v_cr,
                "lp_iterations": v.lp.iterations,
                "certificate": certificate_json(&v),
            });
            let tol = [("nonsignaling", NONSIGNALING_TOL)];
            Ok(Execution {
                report: report("facet-from", vec![rec], None, &tol, json!({}), result),
                artifact: Some(Artifact { text, sidecar: false }),
            })
        }
        Command::Seesaw {
            functional,
            dims,
            povm: _,
            projective,
            restarts,
            seed,
        } => {
            let (f, rec) = load_functional("functional", functional)?;
            let mode = if *projective { MeasurementMode::Projective } else { MeasurementMode::Povm };
            let opts = SeesawOptions {
                restarts: *restarts,
                seed: *seed,
                mode,
                ..SeesawOptions::default()
            };
            let r = seesaw_maximize(&f, dims[0], dims[1], &opts)?;
            let params = json!({ "dims": dims, "mode": mode_tag(mode), "restarts": restarts });
            let result = json!({
                "value": r.value,
                "restart": r.restart,
                "converged": r.converged,
                "sweeps": r.trace.len(),
                "restart_values": r.restart_values,
                "realization": serialize_realization(&r.realization),
            });
            let tol = [("sweep_gain", opts.tolerance)];
            Ok(Execution {
                report: report("seesaw", vec![rec], Some(*seed), &tol, params, result),
                artifact: Some(Artifact {
                    text: serialize_realization(&r.realization),
                    sidecar: false,
                }),
            })
        }
        Command::UpperBound { functional, level } => {
            let (f, rec) = load_functional("functional", functional)?;
            let ub = quantum_upper_bound(&f, *level)?;
            let result = json!({ "upper_bound": ub, "local_max": f.local_max });
            let params = json!({ "level": level.tag() });
            Ok(plain(report("upper-bound", vec![rec], None, &sdp_tolerances(), params, result)))
        }
        Command::NearestQuantum { correlation, level, pin_bell } => {
            let (p, rec) = load_correlation(correlation)?;
            let mut inputs = vec![rec];
            let pin = match pin_bell {
                Some(arg) => {
                    let (f, frec) = load_functional("pin-bell", arg)?;
                    inputs.push(frec);
                    let v = f.evaluate(&p)?;
                    Some((f, v))
                }
                None => None,
            };
            let near = nearest_quantum_correlation(&p, *level, pin.as_ref().map(|(f, v)| (f, *v)))?;
            let pinned = pin.as_ref().map(|(f, v)| json!({ "target": v, "achieved": f.evaluate(&near.table).ok() }));
            let table = serialize_correlation(&near.table);
            let result = json!({
                "l1_distance": near.l1_distance,
                "l2_distance": near.l2_distance,
                "max_signaling": signaling_deltas(&near.table).max_delta,
                "pinned": pinned,
                "status": format!("{:?}", near.solver.status),
                "iterations": near.solver.iterations + near.tie_break.iterations,
                "table": table,
            });
            let params = json!({ "level": level.tag() });
            Ok(Execution {
                report: report("nearest-quantum", inputs, None, &sdp_tolerances(), params, result),
                artifact: Some(Artifact { text: table, sidecar: true }),
            })
        }
        Command::NegativityBound { correlation, level } => {
            let (p, rec) = load_correlation(correlation)?;
            let n = di_negativity_lower_bound(&p, *level)?;
            let result = json!({ "negativity_lower_bound": n });
            let params = json!({ "level": level.tag() });
            let mut tol = sdp_tolerances().to_vec();
            tol.push(("nonsignaling", bellscope::moment::NS_INPUT_TOL));
            Ok(plain(report("negativity-bound", vec![rec], None, &tol, params, result)))
        }
        Command::SignalingReport { input } => {
            let (t, rec) = table_input(input)?;
            let (kind, rep) = match &t {
                TableInput::Table(p) => ("table", signaling_deltas(p)),
                TableInput::Counts(c) => ("counts", signaling_report_with_counts(c)?),
            };
            let result = signaling_json(kind, &rep);
            let tol = [("nonsignaling", NONSIGNALING_TOL), ("family_alpha", FAMILY_ALPHA)];
            Ok(plain(report("signaling-report", vec![rec], None, &tol, json!({}), result)))
        }
        Command::Simulate { realization, shots, seed } => {
            let (r, rec) = load_realization(realization)?;
            let counts = simulate_counts(&r, &ShotPlan::new(*shots, *seed))?;
            let text = serialize_counts(&counts);
            let result = json!({ "counts": text });
            let params = json!({ "shots": shots });
            Ok(Execution {
                report: report("simulate", vec![rec], Some(*seed), &[], params, result),
                artifact: Some(Artifact { text, sidecar: false }),
            })
        }
        Command::Table2 { rows } => {
            let rows = (rows.0..=rows.1)
                .into_par_iter()
                .map(table2_row)
                .collect::<Result<Vec<_>, Failure>>()?;
            let csv = table2_csv(&rows);
            let result = json!({ "rows": rows, "csv": csv });
            let params = json!({ "restarts": TABLE2_RESTARTS });
            let tol = [("violation", VIOLATION_TOL)];
            Ok(Execution {
                report: report("table2", vec![], Some(0), &tol, params, result),
                artifact: Some(Artifact { text: csv, sidecar: false }),
            })
        }
    }
}

fn mode_tag(m: MeasurementMode) -> &'static str {
    match m {
        MeasurementMode::Projective => "projective",
        MeasurementMode::Povm => "povm",
    }
}

const FAMILY_ALPHA: f64 = 0.05;

fn delta_json(party: &str, d: &SignalingDelta) -> Value {
    json!({
        "party": party,
        "setting": d.setting,
        "outcome": d.outcome,
        "other_settings": [d.other.0, d.other.1],
        "delta": d.delta,
        "sigma": d.sigma,
        "z": d.z_score(),
    })
}

fn signaling_json(kind: &str, rep: &SignalingReport) -> Value {
    let deltas: Vec<Value> = rep
        .delta_alice
        .iter()
        .map(|d| delta_json("alice", d))
        .chain(rep.delta_bob.iter().map(|d| delta_json("bob", d)))
        .collect();
    let (band, flagged, consistent) = if kind == "counts" {
        let band = rep.family_band(FAMILY_ALPHA);
        let flagged: Vec<usize> = rep
            .delta_alice
            .iter()
            .chain(&rep.delta_bob)
            .enumerate()
            .filter(|(_, d)| d.z_score().is_some_and(|z| z > band))
            .map(|(i, _)| i)
            .collect();
        let ok = flagged.is_empty();
        (Some(band), flagged, ok)
    } else {
        (None, Vec::new(), rep.max_delta <= NONSIGNALING_TOL)
    };
    json!({
        "kind": kind,
        "max_delta": rep.max_delta,
        "max_z": rep.max_z(),
        "comparisons": deltas.len(),
        "above_2sigma": rep.flagged(2.0).len(),
        "family_band": band,
        "flagged": flagged,
        "consistent_with_nonsignaling": consistent,
        "deltas": deltas,
    })
}

const TABLE2_RESTARTS: usize = 50;
const VIOLATION_TOL: f64 = 1e-6;

/// Local dimension and measurement mode on the maximizing side.
fn max_setup(row: usize) -> (usize, MeasurementMode) {
    match row {
        15 | 18 => (2, MeasurementMode::Povm),
        16 | 17 | 19 => (3, MeasurementMode::Projective),
        _ => (2, MeasurementMode::Projective),
    }
}

/// Minimizing side: the small violations of rows 8 to 12 and 16 need qutrits.
fn min_setup(row: usize) -> (usize, MeasurementMode) {
    match row {
        8..=12 => (3, MeasurementMode::Projective),
        16 => (3, MeasurementMode::Povm),
        19 => (2, MeasurementMode::Povm),
        _ => max_setup(row),
    }
}

#[derive(Debug, Serialize)]
struct Table2Row {
    row: usize,
    local_max: f64,
    /// Best of the seesaw and the local bound; local points are quantum.
    quantum_max: f64,
    quantum_max_reference: f64,
    state_visibility_max: Option<f64>,
    noise_visibility_max: Option<f64>,
    local_min: f64,
    quantum_min: f64,
    quantum_min_reference: f64,
    state_visibility_min: Option<f64>,
    noise_visibility_min: Option<f64>,
    min_face_vertices: usize,
    min_face_vertices_reference: usize,
    seesaw_max: f64,
    seesaw_min: f64,
    max_setup: (usize, &'static str),
    min_setup: (usize, &'static str),
}

fn table2_row(n: usize) -> Result<Table2Row, Failure> {
    let rec = inequality(n)?;
    let f = &rec.functional;
    let lmax = local_bound_max(f)?.value;
    let lmin = local_bound_min(f)?.value;
    let dmin = face_analysis(f, Side::Min)?.independent_vertices;
    let (d, mode) = max_setup(n);
    let opts = SeesawOptions {
        restarts: TABLE2_RESTARTS,
        mode,
        ..SeesawOptions::default()
    };
    let hi = seesaw_maximize(f, d, d, &opts)?;
    let (state_max, noise_max) = if hi.value > lmax + VIOLATION_TOL {
        let p = correlation(&hi.realization)?;
        (
            Some(infer_state_visibility(lmax, &hi.realization, f)?),
            Some(visibility_wrt_inequality(&p, f)?),
        )
    } else {
        (None, None)
    };
    let (dm, mode_min) = min_setup(n);
    let lo = seesaw_minimize(f, dm, dm, &SeesawOptions { mode: mode_min, ..opts })?;
    let (state_min, noise_min) = if lo.value < lmin - VIOLATION_TOL {
        let p = correlation(&lo.realization)?;
        (
            Some(infer_state_visibility(lmin, &lo.realization, f)?),
            Some(visibility_wrt_inequality(&p, &f.negated())?),
        )
    } else {
        (None, None)
    };
    Ok(Table2Row {
        row: n,
        local_max: lmax,
        quantum_max: hi.value.max(lmax),
        quantum_max_reference: rec.properties.quantum_max,
        state_visibility_max: state_max,
        noise_visibility_max: noise_max,
        local_min: lmin,
        quantum_min: lo.value.min(lmin),
        quantum_min_reference: rec.properties.quantum_min,
        state_visibility_min: state_min,
        noise_visibility_min: noise_min,
        min_face_vertices: dmin,
        min_face_vertices_reference: rec.properties.min_face_vertices,
        seesaw_max: hi.value,
        seesaw_min: lo.value,
        max_setup: (d, mode_tag(mode)),
        min_setup: (dm, mode_tag(mode_min)),
    })
}

const TABLE2_HEADER: &str = "row,local_max,quantum_max,state_vis_max,noise_vis_max,local_min,quantum_min,state_vis_min,noise_vis_min,d_min";

fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn table2_csv(rows: &[Table2Row]) -> String {
    let mut out = String::from(TABLE2_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{},{},{:.4},{},{},{}\n",
            r.row,
            r.local_max,
            r.quantum_max,
            opt4(r.state_visibility_max),
            opt4(r.noise_visibility_max),
            r.local_min,
            r.quantum_min,
            opt4(r.state_visibility_min),
            opt4(r.noise_visibility_min),
            r.min_face_vertices,
        ));
    }
    out
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn bound_text(b: &Value) -> String {
    match b["exact"].as_str() {
        Some(s) => s.to_string(),
        None => format!("{}", num(&b["value"])),
    }
}

fn face_text(side: &str, f: &Value, dim: u64) -> String {
    format!(
        "{side} side: bound {}, {} saturating vertices, affine dimension {} of {}; {}\n",
        num(&f["bound"]),
        f["saturating_vertices"],
        f["affine_dimension"],
        dim.saturating_sub(1),
        if f["facet"].as_bool() == Some(true) { "facet" } else { "not a facet" },
    )
}

fn certificate_text(c: &Value) -> String {
    if c.is_null() {
        return "local; no separating inequality\n".into();
    }
    format!(
        "certificate: local max {}, affine dimension {}{}\n",
        num(&c["local_max"]),
        c["face"]["affine_dimension"],
        if c["face"]["facet"].as_bool() == Some(true) { " (facet)" } else { "" },
    )
}

fn sci(v: &Value) -> String {
    format!("{:.3e}", num(v))
}

fn signaling_text(r: &Value) -> String {
    let max = num(&r["max_delta"]);
    let verdict = if r["consistent_with_nonsignaling"].as_bool() == Some(true) {
        "consistent with non-signaling"
    } else {
        "signaling"
    };
    let head = if max < 1e-12 {
        "max |Δ| < 1e-12".to_string()
    } else {
        format!("max |Δ| = {max:.3e}")
    };
    if r["kind"] != "counts" {
        return format!("{head}; {verdict}\n");
    }
    let mut out = format!(
        "{head}; max z {:.2}; {} of {} comparisons above 2σ; family band {:.2}σ at 5%\n{verdict}\n",
        num(&r["max_z"]),
        r["above_2sigma"],
        r["comparisons"],
        num(&r["family_band"]),
    );
    for i in r["flagged"].as_array().into_iter().flatten() {
        let d = &r["deltas"][i.as_u64().unwrap_or(0) as usize];
        let (me, other) = if d["party"] == "alice" { ("Alice", "Bob") } else { ("Bob", "Alice") };
        out.push_str(&format!(
            "  {me} setting {} outcome {}, {other} settings {} vs {}: Δ {:.3e}, z {:.2}\n",
            d["setting"],
            d["outcome"],
            d["other_settings"][0],
            d["other_settings"][1],
            num(&d["delta"]),
            num(&d["z"]),
        ));
    }
    out
}

fn table2_text(r: &Value) -> String {
    let mut out = format!(
        "{:>3} {:>4} {:>8} {:>7} {:>7} {:>4} {:>8} {:>7} {:>7} {:>5}\n",
        "row", "L+", "Q+", "nu+", "v+", "L-", "Q-", "nu-", "v-", "d_min"
    );
    let o = |v: &Value| if v.is_null() { "-".to_string() } else { format!("{:.4}", num(v)) };
    for row in r["rows"].as_array().into_iter().flatten() {
        out.push_str(&format!(
            "{:>3} {:>4} {:>8.4} {:>7} {:>7} {:>4} {:>8.4} {:>7} {:>7} {:>5}\n",
            row["row"].as_u64().unwrap_or(0),
            num(&row["local_max"]),
            num(&row["quantum_max"]),
            o(&row["state_visibility_max"]),
            o(&row["noise_visibility_max"]),
            num(&row["local_min"]),
            num(&row["quantum_min"]),
            o(&row["state_visibility_min"]),
            o(&row["noise_visibility_min"]),
            row["min_face_vertices"].as_u64().unwrap_or(0),
        ));
    }
    out
}

/// Human-readable view of a report.
fn render_text(report: &Value) -> String {
    let r = &report["result"];
    let p = &report["parameters"];
    match report["command"].as_str().unwrap_or_default() {
        "local-bound" => format!("max {} min {}\n", bound_text(&r["max"]), bound_text(&r["min"])),
        "facet-check" => {
            let dim = r["dimension"].as_u64().unwrap_or(0);
            face_text("max", &r["max"], dim) + &face_text("min", &r["min"], dim)
        }
        "visibility" if r["target"] == "inequality" => format!("visibility {:.6}\n", num(&r["visibility"])),
        "visibility" => format!("visibility {:.6} (local set)\n", num(&r["visibility"])) + &certificate_text(&r["certificate"]),
        "facet-from" => {
            let c = &r["certificate"];
            format!("visibility {:.6}\n", num(&r["visibility"]))
                + &certificate_text(c)
                + c["functional"].as_str().unwrap_or_default()
        }
        "seesaw" => format!(
            "value {:.6}\n{} measurements, dims {}x{}, best restart {} of {}, {}\n",
            num(&r["value"]),
            p["mode"].as_str().unwrap_or_default(),
            p["dims"][0],
            p["dims"][1],
            r["restart"],
            p["restarts"],
            if r["converged"].as_bool() == Some(true) { "converged" } else { "sweep limit reached" },
        ),
        "upper-bound" => format!("upper bound {:.6} (level {})\n", num(&r["upper_bound"]), p["level"].as_str().unwrap_or_default()),
        "nearest-quantum" => {
            let mut out = format!(
                "l1 distance {}\nl2 distance {}\nmax |Δ| {} (level {})\n",
                sci(&r["l1_distance"]),
                sci(&r["l2_distance"]),
                sci(&r["max_signaling"]),
                p["level"].as_str().unwrap_or_default(),
            );
            if !r["pinned"].is_null() {
                out.push_str(&format!(
                    "Bell value pinned at {:.6} (achieved {:.6})\n",
                    num(&r["pinned"]["target"]),
                    num(&r["pinned"]["achieved"]),
                ));
            }
            out
        }
        "negativity-bound" => format!(
            "negativity >= {:.6} (level {})\n",
            num(&r["negativity_lower_bound"]),
            p["level"].as_str().unwrap_or_default()
        ),
        "signaling-report" => signaling_text(r),
        "simulate" => r["counts"].as_str().unwrap_or_default().to_string(),
        "table2" => table2_text(r),
        other => format!("{other}: no text view\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_failures_map_to_exit_3() {
        assert!(matches!(Failure::from(Error::SdpFailure("stalled".into())), Failure::Solver(_)));
        assert!(matches!(Failure::from(Error::LpFailure("cycling".into())), Failure::Solver(_)));
        assert!(matches!(Failure::from(Error::LocalInput), Failure::Validation(_)));
        assert!(matches!(Failure::from(Error::UnsupportedLevel("x".into())), Failure::Validation(_)));
    }

    #[test]
    fn row_ranges() {
        assert_eq!(parse_rows("3..7"), Ok((3, 7)));
        assert_eq!(parse_rows("1..=19"), Ok((1, 19)));
        assert_eq!(parse_rows("12"), Ok((12, 12)));
        assert!(parse_rows("0..3").is_err());
        assert!(parse_rows("5..4").is_err());
        assert!(parse_rows("a..b").is_err());
    }
}
