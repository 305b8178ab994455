//! Command-line front end: flag parsing, scenario dispatch and the JSON/CSV
//! output formats.
//!
//! Exit codes: 0 when every pass flag holds, 1 when a statistical or
//! algebraic gate fails, 2 on configuration or output errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::models::{ColemanHeppSpec, MeasurementModel, VonNeumannSpec, MAX_DENSE_ATOMS};
use crate::scenarios::{self, EventRecord, ScenarioConfig, ScenarioId, SummaryStats};

pub const TOOL_VERSION: &str = concat!("relmeas ", env!("CARGO_PKG_VERSION"));
/// Amplitude normalization accepted on the command line; accepted pairs are
/// renormalized exactly before use.
pub const CLI_NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Vn,
    Ch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "relmeas", version, about = "Event-state measurement scenarios")]
pub struct Args {
    #[arg(long, value_enum)]
    pub scenario: ScenarioId,
    #[arg(long, value_enum, default_value = "vn")]
    pub model: ModelKind,
    /// Amplitude of the first branch as RE IM.
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true, default_values = ["0.6", "0"])]
    pub a1: Vec<f64>,
    /// Amplitude of the second branch as RE IM.
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true, default_values = ["0.8", "0"])]
    pub a2: Vec<f64>,
    /// Chain length for the Coleman-Hepp model.
    #[arg(long, default_value_t = 4)]
    pub n_atoms: usize,
    /// Route the Von Neumann chain through a detector factor.
    #[arg(long)]
    pub detector: bool,
    #[arg(long, default_value_t = 10_000)]
    pub events: u64,
    #[arg(long, env = "RELMEAS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = scenarios::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Include per-event records in JSON output.
    #[arg(long)]
    pub emit_events: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub format: Format,
    pub emit_events: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] scenarios::ScenarioError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            _ => 2,
        }
    }
}

fn amplitude(values: &[f64], name: &str) -> Result<Complex64, CliError> {
    match values {
        [re, im] if re.is_finite() && im.is_finite() => Ok(Complex64::new(*re, *im)),
        _ => Err(CliError::Config(format!("--{name} needs two finite reals"))),
    }
}

pub fn parse_config<I, T>(args: I) -> Result<(ScenarioConfig, OutputOptions), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(args)?;
    let a1 = amplitude(&args.a1, "a1")?;
    let a2 = amplitude(&args.a2, "a2")?;
    let norm = a1.norm_sqr() + a2.norm_sqr();
    if (norm - 1.0).abs() > CLI_NORMALIZATION_TOL {
        return Err(CliError::Config(format!(
            "amplitudes not normalized: |a1|² + |a2|² = {norm}"
        )));
    }
    let scale = norm.sqrt();
    let (a1, a2) = (a1 / scale, a2 / scale);
    let model = match args.model {
        ModelKind::Vn => MeasurementModel::VonNeumann(
            VonNeumannSpec::new(a1, a2, args.detector).map_err(|e| CliError::Config(e.to_string()))?,
        ),
        ModelKind::Ch => {
            if args.n_atoms == 0 || args.n_atoms > MAX_DENSE_ATOMS {
                return Err(CliError::Config(format!(
                    "--n-atoms {} outside 1..={MAX_DENSE_ATOMS}",
                    args.n_atoms
                )));
            }
            MeasurementModel::ColemanHepp(
                ColemanHeppSpec::new(a1, a2, args.n_atoms).map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
    };
    let config = ScenarioConfig::new(args.scenario, model, args.events, args.seed)
        .and_then(|c| c.with_sigma(args.sigma))
        .map_err(|e| CliError::Config(e.to_string()))?;
    if args.format == Format::Csv && args.out.is_none() {
        return Err(CliError::Config("--format csv needs --out".into()));
    }
    Ok((
        config,
        OutputOptions {
            format: args.format,
            emit_events: args.emit_events,
            out: args.out,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputDocument {
    pub config: ScenarioConfig,
    pub summary: SummaryStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<EventRecord>>,
    /// Observer names in CSV column order (CSV summaries only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observers: Option<Vec<String>>,
    pub tool_version: String,
}

impl OutputDocument {
    pub fn new(config: ScenarioConfig, summary: SummaryStats, events: Option<Vec<EventRecord>>) -> Self {
        Self {
            config,
            summary,
            events,
            observers: None,
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

/// Compact JSON with every float printed to 17 significant digits.
struct FixedPrecision;

impl serde_json::ser::Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedPrecision);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

fn observer_names(events: &[EventRecord]) -> Vec<String> {
    let mut names: Vec<String> = events
        .iter()
        .flat_map(|e| e.final_registers.keys().cloned())
        .collect();
    names.sort();
    names.dedup();
    names
}

/// `run.csv` → `run.summary.json`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Writes the document. JSON goes to `dest` (stdout when `None`); CSV writes
/// one row per draw to `dest` and the summary next to it.
pub fn emit(doc: &OutputDocument, format: Format, dest: Option<&Path>) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let bytes = to_json_bytes(doc)?;
            match dest {
                Some(path) => File::create(path)?.write_all(&bytes)?,
                None => io::stdout().lock().write_all(&bytes)?,
            }
        }
        Format::Csv => {
            let path = dest.ok_or_else(|| CliError::Config("csv output needs a path".into()))?;
            let events = doc.events.as_deref().unwrap_or_default();
            let names = observer_names(events);
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
            w.write_record(["event", "stream", "observer", "step", "outcome"])?;
            for e in events {
                for (name, draws) in &e.outcomes {
                    let obs = names.iter().position(|n| n == name).expect("name collected");
                    for (step, outcome) in draws {
                        w.serialize((e.event, e.stream, obs, step, outcome))?;
                    }
                }
            }
            w.flush()?;
            let summary = OutputDocument {
                events: None,
                observers: Some(names),
                ..doc.clone()
            };
            File::create(summary_path(path))?.write_all(&to_json_bytes(&summary)?)?;
        }
    }
    Ok(())
}

/// Full CLI run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (config, opts) = match parse_config(args) {
        Ok(x) => x,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            return CliError::Usage(e).exit_code();
        }
        Err(e) => {
            eprintln!("relmeas: {e}");
            return e.exit_code();
        }
    };
    let output = match scenarios::run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("relmeas: {e}");
            return 2;
        }
    };
    let passed = output.summary.all_passed();
    let events = (opts.emit_events || opts.format == Format::Csv).then_some(output.records);
    let doc = OutputDocument::new(config, output.summary, events);
    if let Err(e) = emit(&doc, opts.format, opts.out.as_deref()) {
        eprintln!("relmeas: {e}");
        return e.exit_code();
    }
    if passed {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(extra: &str) -> Result<(ScenarioConfig, OutputOptions), CliError> {
        let mut args = vec!["relmeas"];
        args.extend(extra.split_whitespace());
        parse_config(args)
    }

    #[test]
    fn parses_full_ensemble_flags() {
        let (cfg, opts) =
            parse("--scenario ensemble --model vn --a1 0.6 0 --a2 0.8 0 --events 100000 --seed 42").unwrap();
        assert_eq!(cfg.scenario, ScenarioId::Ensemble);
        assert_eq!(cfg.n_events, 100_000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(opts.format, Format::Json);
        assert!(!opts.emit_events);
    }

    #[test]
    fn rejects_unnormalized_amplitudes() {
        let err = parse("--scenario ensemble --a1 1 0 --a2 1 0").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_scenario_is_usage_error() {
        let err = parse("--scenario collapse").unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn coleman_hepp_undoing_and_cap() {
        let (cfg, _) = parse("--scenario undoing --model ch --n-atoms 4 --events 10").unwrap();
        assert!(matches!(cfg.model, MeasurementModel::ColemanHepp(s) if s.n_atoms == 4));
        assert!(matches!(
            parse("--scenario undoing --model ch --n-atoms 9"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn negative_and_complex_amplitudes() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (cfg, _) = parse(&format!("--scenario discrimination --a1 {h} 0 --a2 0 -{h}")).unwrap();
        let (a1, a2) = cfg.model.amplitudes();
        assert!((a1.norm_sqr() + a2.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(a2.im < 0.0);
    }

    #[test]
    fn csv_requires_out() {
        assert!(matches!(
            parse("--scenario ensemble --format csv"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let bytes = to_json_bytes(&vec![0.36f64, 1.0]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "[3.5999999999999999e-1,1.0000000000000000e0]\n"
        );
    }
}
