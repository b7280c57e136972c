//! `flgame`: evaluate rules, check properties, search for rules and build the
//! existence matrix on facility location games over invitation trees.
//!
//! Exit codes: 0 pass / sat, 2 fail / unsat, 3 budget or inconclusive,
//! 1 usage, parse or validation error. Errors go to stderr as JSON.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use flgame_core::cspsearch::{encode, solve, verify_model, CspError, CspVerdict, EncodeOptions, SolveOptions};
use flgame_core::enumeration::{DeviationMode, DEFAULT_BUDGET};
use flgame_core::gen::{generate, minimal_instance, GenOptions, Shape};
use flgame_core::io::{instance_to_json, load_instance, load_reports, parse_scf, IoError};
use flgame_core::matrix::{build_matrix, CellVerdict, MatrixOptions};
use flgame_core::model::{Instance, Observation, PreferenceModel};
use flgame_core::properties::{CheckError, CheckOptions, Checker, Property};

const EXIT_USAGE: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "flgame", version, about = "Facility location games over invitation trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    DiffusionOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Symmetric,
    Robust,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a rule on one report profile (truthful unless --reports).
    Evaluate {
        #[arg(long)]
        scf: String,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Check one property exhaustively and print the report.
    Check {
        #[arg(long)]
        scf: String,
        #[arg(long)]
        instance: PathBuf,
        /// SP, SPD, PE, ONTO, AN, ANS, AND, ANSD, VR-<d> or D1HULL.
        #[arg(long)]
        property: String,
        /// Deviation space for SP.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Under the robust model, do not count incomparable outcomes as violations.
        #[arg(long)]
        lenient: bool,
    },
    /// Fill the relevance-by-anonymity existence matrix.
    Matrix {
        /// Defaults to the built-in minimal instance.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also write the markdown table here.
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Write every cell's evidence to <dir>/<id>.json.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        /// Seconds per constraint search.
        #[arg(long, default_value_t = 120)]
        time_limit: u64,
    },
    /// Generate an instance file.
    Gen {
        #[arg(long)]
        shape: String,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        voters: Option<usize>,
        /// Number of evenly spaced grid points.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "symmetric")]
        preference_model: Model,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether any rule on the instance satisfies a property set.
    SearchCsp {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated, e.g. SP,PE,AND,VR-2.
        #[arg(long, value_delimiter = ',', required = true)]
        properties: Vec<String>,
        /// Add the implied depth-1 hull constraint.
        #[arg(long)]
        depth1_hull: bool,
        /// Shuffle the search order.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        node_limit: Option<u64>,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<u64>,
        #[arg(long, default_value_t = flgame_core::cspsearch::DEFAULT_VARIABLE_BUDGET)]
        variable_budget: usize,
        /// Include every situation and its domain.
        #[arg(long)]
        dump_variables: bool,
    },
}

/// Error to print on stderr and its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::usage(e.kind(), e.to_string())
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        if e.is_budget() {
            Failure {
                code: EXIT_BUDGET,
                kind: "budget",
                message: e.to_string(),
            }
        } else {
            let kind = match e {
                CheckError::UnknownProperty(_) => "usage",
                _ => "validation",
            };
            Failure::usage(kind, e.to_string())
        }
    }
}

impl From<CspError> for Failure {
    fn from(e: CspError) -> Self {
        match e {
            CspError::Check(inner) => inner.into(),
            e if e.is_budget() => Failure {
                code: EXIT_BUDGET,
                kind: "budget",
                message: e.to_string(),
            },
            CspError::UnsupportedProperty(_) => Failure::usage("usage", e.to_string()),
            e => Failure::usage("validation", e.to_string()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::usage("write", format!("{}: {e}", path.display())))
}

fn emit(text: &str) {
    // A closed pipe downstream is not an error worth reporting.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn print_json(value: &Value) {
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(value).expect("output serializes")
    ));
}

fn evaluate(scf: &str, instance: &Path, reports: Option<&Path>) -> Result<u8, Failure> {
    let instance = load_instance(instance)?;
    let rule = parse_scf(scf, &instance)?;
    let profile = match reports {
        Some(path) => load_reports(path, &instance)?,
        None => instance.truthful_profile(),
    };
    let observation = Observation::new(&instance, &profile).map_err(|e| Failure::usage("validation", e.to_string()))?;
    let outcome = rule
        .outcome(&observation)
        .map_err(|e| Failure::usage("evaluation", e.to_string()))?;
    let graph = instance.graph();
    let depths: BTreeMap<&str, u32> = observation
        .participants()
        .iter()
        .map(|v| (graph.name(v), observation.depth(v).expect("participant")))
        .collect();
    let weights = rule.weights(&observation).map(|w| {
        w.0.iter()
            .map(|(v, w)| (graph.name(*v).to_string(), *w))
            .collect::<BTreeMap<String, u64>>()
    });
    print_json(&json!({
        "schema_version": 1,
        "scf": rule.name(),
        "outcome": outcome,
        "participants": graph.set_names(observation.participants()),
        "depths": depths,
        "weights": weights,
    }));
    Ok(0)
}

fn check(
    scf: &str,
    instance: &Path,
    property: &str,
    mode: Option<Mode>,
    budget: usize,
    lenient: bool,
) -> Result<u8, Failure> {
    let property: Property = property.parse()?;
    let instance = load_instance(instance)?;
    let rule = parse_scf(scf, &instance)?;
    let options = CheckOptions {
        budget,
        ambiguous_is_violation: !lenient,
    };
    let mut checker = Checker::new(rule.as_ref(), &instance, options);
    let report = match (property, mode) {
        (Property::Sp, Some(Mode::DiffusionOnly)) => checker.sp(DeviationMode::DiffusionOnly)?,
        (Property::Sp | Property::Spd, Some(_)) | (_, None) => checker.check(property)?,
        (_, Some(_)) => return Err(Failure::usage("usage", "--mode only applies to SP")),
    };
    emit(&format!("{}\n", report.to_json()));
    Ok(if report.passed() { 0 } else { EXIT_FAIL })
}

fn matrix(
    instance: Option<&Path>,
    format: Format,
    markdown: Option<&Path>,
    artifacts: Option<&Path>,
    time_limit: u64,
) -> Result<u8, Failure> {
    let instance: Instance = match instance {
        Some(path) => load_instance(path)?,
        None => minimal_instance().map_err(|e| Failure::usage("validation", e.to_string()))?,
    };
    let mut options = MatrixOptions::default();
    options.solve.time_limit = Some(Duration::from_secs(time_limit));
    let report = build_matrix(&instance, &options).map_err(|e| match e {
        flgame_core::matrix::MatrixError::Csp(e) => Failure::from(e),
        flgame_core::matrix::MatrixError::Check(e) => Failure::from(e),
        flgame_core::matrix::MatrixError::Io(e) => Failure::from(e),
        e => Failure::usage("internal", e.to_string()),
    })?;
    let table = report.to_markdown();
    if let Some(path) = markdown {
        write_file(path, &table)?;
    }
    if let Some(dir) = artifacts {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage("write", format!("{}: {e}", dir.display())))?;
        for cell in &report.cells {
            if let Some(id) = cell.evidence.id() {
                let text = serde_json::to_string_pretty(&cell.evidence).expect("evidence serializes");
                write_file(&dir.join(format!("{id}.json")), &text)?;
            }
        }
    }
    match format {
        Format::Json => emit(&format!("{}\n", report.to_json())),
        Format::Markdown => emit(&table),
    }
    let inconclusive = report.cells.iter().any(|c| c.verdict == CellVerdict::Inconclusive);
    Ok(if inconclusive { EXIT_BUDGET } else { 0 })
}

#[allow(clippy::too_many_arguments)]
fn gen(
    shape: &str,
    depth: Option<u32>,
    voters: Option<usize>,
    grid: Option<usize>,
    seed: u64,
    model: Model,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let shape: Shape = shape
        .parse()
        .map_err(|e: flgame_core::gen::GenError| Failure::usage("usage", e.to_string()))?;
    let options = GenOptions {
        shape,
        voters,
        depth,
        grid,
        seed,
        preference_model: match model {
            Model::Symmetric => PreferenceModel::Symmetric,
            Model::Robust => PreferenceModel::Robust,
        },
    };
    let instance = generate(&options).map_err(|e| Failure::usage("usage", e.to_string()))?;
    let text = instance_to_json(&instance);
    match out {
        Some(path) => write_file(path, &text)?,
        None => emit(&text),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn search_csp(
    instance: &Path,
    properties: &[String],
    depth1_hull: bool,
    seed: Option<u64>,
    node_limit: Option<u64>,
    time_limit: Option<u64>,
    variable_budget: usize,
    dump_variables: bool,
) -> Result<u8, Failure> {
    let properties = properties
        .iter()
        .map(|p| p.trim().parse::<Property>())
        .collect::<Result<Vec<_>, _>>()?;
    let instance = load_instance(instance)?;
    let encode_options = EncodeOptions {
        variable_budget,
        depth1_hull,
        ..EncodeOptions::default()
    };
    let csp = encode(&instance, &properties, &encode_options)?;
    let solve_options = SolveOptions {
        seed,
        node_limit,
        time_limit: time_limit.map(Duration::from_secs),
    };
    let result = match solve(&csp, &solve_options) {
        Ok(result) => result,
        Err(CspError::Inconclusive { limit, stats }) => {
            print_json(&json!({
                "schema_version": 1,
                "csp": csp.summary(dump_variables),
                "verdict": "inconclusive",
                "reason": format!("{limit} limit"),
                "stats": stats,
            }));
            return Ok(EXIT_BUDGET);
        }
        Err(e) => return Err(e.into()),
    };
    let mut output: Value = serde_json::to_value(result.to_json(&csp)).expect("result serializes");
    if dump_variables {
        output["csp"] = serde_json::to_value(csp.summary(true)).expect("summary serializes");
    }
    if let Some(model) = result.model_scf(&csp, "search") {
        let verification = verify_model(&instance, &model, &properties)?;
        output["verified"] = json!(verification.iter().all(|r| r.passed()));
        output["verification"] = serde_json::to_value(&verification).expect("reports serialize");
    }
    print_json(&output);
    Ok(match result.verdict {
        CspVerdict::Sat => 0,
        CspVerdict::Unsat => EXIT_FAIL,
    })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Evaluate { scf, instance, reports } => evaluate(&scf, &instance, reports.as_deref()),
        Command::Check {
            scf,
            instance,
            property,
            mode,
            budget,
            lenient,
        } => check(&scf, &instance, &property, mode, budget, lenient),
        Command::Matrix {
            instance,
            format,
            markdown,
            artifacts,
            time_limit,
        } => matrix(
            instance.as_deref(),
            format,
            markdown.as_deref(),
            artifacts.as_deref(),
            time_limit,
        ),
        Command::Gen {
            shape,
            depth,
            voters,
            grid,
            seed,
            preference_model,
            out,
        } => gen(&shape, depth, voters, grid, seed, preference_model, out.as_deref()),
        Command::SearchCsp {
            instance,
            properties,
            depth1_hull,
            seed,
            node_limit,
            time_limit,
            variable_budget,
            dump_variables,
        } => search_csp(
            &instance,
            &properties,
            depth1_hull,
            seed,
            node_limit,
            time_limit,
            variable_budget,
            dump_variables,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                emit(&e.to_string());
                return ExitCode::SUCCESS;
            }
            eprintln!(
                "{}",
                json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}})
            );
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": failure.kind, "message": failure.message}})
            );
            ExitCode::from(failure.code)
        }
    }
}
