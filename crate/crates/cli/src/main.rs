use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use spectra::eigen::{parse_slope, seed_from_env};
use spectra_cli::commands::{report, run, Command, Request};
use spectra_cli::datum::{load_path, parse_sample_arg, LoadError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Cmd {
    Charpoly,
    Polygon,
    Factor,
    Riesz,
    Eigen,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

/// Slopes, Riesz decompositions and local eigenalgebras of p-adic spectral data.
#[derive(Parser, Debug)]
#[command(name = "spectra", version)]
struct Cli {
    command: Cmd,
    datum: PathBuf,
    /// Slope bound h, e.g. `1`, `5/2` or `2.5`.
    #[arg(long, allow_hyphen_values = true)]
    slope: Option<String>,
    /// Number of series coefficients past the constant term.
    #[arg(long)]
    degree: Option<usize>,
    /// Fiber points: comma-separated coordinates, or one literal for all.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    samples: Option<Vec<String>>,
    /// Overrides the datum's relative precision.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Adds the wall time to the report (breaks byte-for-byte determinism).
    #[arg(long)]
    timing: bool,
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_failure(cli: &Cli, e: &LoadError) -> ExitCode {
    let violations: Vec<serde_json::Value> =
        e.violations.iter().map(|(at, msg)| serde_json::json!({ "pointer": at, "message": msg })).collect();
    let doc = serde_json::json!({
        "request": { "command": format!("{:?}", cli.command).to_lowercase(), "datum": cli.datum.display().to_string() },
        "status": "error",
        "error": { "kind": format!("{:?}", e.kind), "message": e.to_string(), "violations": violations },
    });
    let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
    if let Err(msg) = emit(&text, &cli.out) {
        return usage(&msg);
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let command = match cli.command {
        Cmd::Charpoly => Command::Charpoly,
        Cmd::Polygon => Command::Polygon,
        Cmd::Factor => Command::Factor,
        Cmd::Riesz => Command::Riesz,
        Cmd::Eigen => Command::Eigen,
        Cmd::Verify => Command::Verify,
    };
    if cli.format == Format::Tsv && !command.has_table() {
        return usage(&format!("unsupported format: {} has no tabular payload", command.name()));
    }
    let slope = match cli.slope.as_deref().map(parse_slope).transpose() {
        Ok(s) => s,
        Err(e) => return usage(&e.to_string()),
    };
    let mut req = Request { command, slope, degree: cli.degree, samples: None, seed: seed_from_env() };
    if let Err(msg) = req.check() {
        return usage(&msg);
    }
    let loaded = match load_path(&cli.datum, cli.precision) {
        Ok(l) => l,
        Err(e) => return load_failure(&cli, &e),
    };
    if let Some(raw) = &cli.samples {
        match raw.iter().map(|s| parse_sample_arg(&loaded, s)).collect::<Result<Vec<_>, _>>() {
            Ok(pts) => req.samples = Some(pts),
            Err(e) => return usage(&e.to_string()),
        }
    }
    let result = run(&loaded, &req);
    let text = match (&result, cli.format) {
        (Ok(o), Format::Tsv) => o.table.as_ref().map(|t| t.to_tsv()).unwrap_or_default(),
        _ => {
            let mut doc = report(&cli.datum.display().to_string(), &req, cli.precision, &result);
            if cli.timing {
                doc["wall_time_ms"] = serde_json::Value::String(format!("{}", started.elapsed().as_millis()));
            }
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
    };
    if let Err(msg) = emit(&text, &cli.out) {
        return usage(&msg);
    }
    match result {
        Ok(o) if !o.failed => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    }
}
