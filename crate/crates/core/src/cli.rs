//! Command-line front end. Every subcommand only parses arguments, calls the
//! library and prints the result.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fit::fit_trend;
use crate::harness::{emit_report, evaluate_collection, ConfigFile, EvaluationReport, ReportFormat};
use crate::levels::Run;
use crate::observation::{canonical_stream, read_csv_file, write_csv};
use crate::pattern::PowerLawParams;
use crate::simulate::{generate, generate_folds, SyntheticLearner};
use crate::trace::build_full_trace;

#[derive(Debug, Parser)]
#[command(name = "curvecast", version, about = "Early learning-curve prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the power-law trend of one level of an observation file.
    Fit {
        observations: PathBuf,
        /// Level to fit (number of leading observations); defaults to all.
        #[arg(long)]
        level: Option<usize>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Print the trend fitted at every level.
    Trace {
        observations: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Detect the working, prediction and convergence levels of a run.
    Levels {
        observations: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Evaluate every run of an experiment config.
    Evaluate {
        #[arg(env = "CURVECAST_CONFIG")]
        config: PathBuf,
        /// Also save the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Sample a synthetic learner into an observation file.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        /// Noise standard deviation, in accuracy points.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Last word position sampled.
        #[arg(long, default_value_t = 700_000)]
        max_words: u64,
        #[command(flatten)]
        settings: Settings,
    },
    /// Re-render a report saved with `evaluate --json`.
    Report {
        report: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Flags mirroring the config keys; set flags override file values.
#[derive(Debug, Default, Args)]
pub struct Settings {
    #[arg(long)]
    pub kernel: Option<u64>,
    #[arg(long)]
    pub step: Option<u64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub slowdown: Option<u32>,
    #[arg(long)]
    pub lookahead: Option<u32>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Sampling window `lo:hi`.
    #[arg(long)]
    pub window: Option<String>,
    /// Control levels `lo:hi:step`.
    #[arg(long)]
    pub controls: Option<String>,
    #[arg(long)]
    pub folds: Option<u32>,
    /// table, csv or plot-series.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Settings {
    fn as_config(&self) -> ConfigFile {
        ConfigFile {
            kernel: self.kernel,
            step: self.step,
            nu: self.nu,
            slowdown: self.slowdown,
            lookahead: self.lookahead,
            tau: self.tau,
            window: self.window.clone(),
            controls: self.controls.clone(),
            folds: self.folds,
            format: self.format.clone(),
            output: self.output.clone(),
            ..ConfigFile::default()
        }
    }
}

/// Runs one invocation; `out` receives the primary output, `err` the
/// diagnostics and summaries.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fit {
            observations,
            level,
            settings,
        } => {
            let config = settings.as_config().resolve(Path::new("."))?;
            let obs = canonical_stream(&read_csv_file(&observations)?)?;
            let trend = fit_trend(&obs, level.unwrap_or(obs.len()), &config.fit)?;
            let p = trend.params;
            let text = format!(
                "level {}\na {:.6}\nb {:.6}\nc {:.6}\nrss {:.6}\nconverged {}\n",
                trend.level, p.a, p.b, p.c, trend.rss, trend.converged
            );
            write_output(settings.output.as_deref(), text.as_bytes(), out)
        }
        Command::Trace { observations, settings } => {
            let config = settings.as_config().resolve(Path::new("."))?;
            let trace = build_full_trace(&read_csv_file(&observations)?, &config.fit)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["level", "x_words", "a", "b", "c", "asymptote", "rss", "converged"])
                .map_err(csv_error)?;
            for t in &trace.trends {
                let x = trace.x(t.level).unwrap_or_default();
                w.write_record([
                    t.level.to_string(),
                    x.to_string(),
                    format!("{:.6}", t.params.a),
                    format!("{:.6}", t.params.b),
                    format!("{:.6}", t.params.c),
                    format!("{:.6}", t.asymptote()),
                    format!("{:.6}", t.rss),
                    t.converged.to_string(),
                ])
                .map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            write_output(settings.output.as_deref(), &bytes, out)
        }
        Command::Levels { observations, settings } => {
            let config = settings.as_config().resolve(Path::new("."))?;
            let trace = build_full_trace(&read_csv_file(&observations)?, &config.fit)?;
            let run = Run::analyze(trace, config.levels)?;
            let mut text = String::new();
            for (name, level) in [("wlevel", run.wlevel), ("plevel", run.plevel), ("clevel", run.clevel)] {
                text.push_str(&match level {
                    Some(l) => format!("{name} {l} {}\n", run.word_position(Some(l)).unwrap_or_default()),
                    None => format!("{name} --\n"),
                });
            }
            if let Some(t) = run.predictor() {
                let p = t.params;
                text.push_str(&format!("predictor {:.6} {:.6} {:.6}\n", p.a, p.b, p.c));
            }
            write_output(settings.output.as_deref(), text.as_bytes(), out)
        }
        Command::Evaluate { config, json, settings } => {
            let file = ConfigFile::load(&config)?.merge(settings.as_config());
            let format: ReportFormat = file.format.as_deref().unwrap_or("table").parse()?;
            let base = config.parent().unwrap_or(Path::new("."));
            let experiment = file.resolve(base)?;
            let report = evaluate_collection(&experiment)?;
            let output = file.output.as_ref().map(|p| base.join(p));
            if let Some(path) = &json {
                let text = serde_json::to_vec_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
                fs::write(path, text).map_err(|e| Error::io(path, e))?;
            }
            write_output(output.as_deref(), &emit_report(&report, format)?, out)?;
            summarize(&report, err)
        }
        Command::Simulate {
            a,
            b,
            c,
            sigma,
            seed,
            max_words,
            settings,
        } => {
            let kernel = settings.kernel.unwrap_or(5_000);
            let step = settings.step.unwrap_or(5_000);
            if kernel == 0 || step == 0 {
                return Err(Error::Usage("kernel and step must be positive".into()));
            }
            let x_grid: Vec<u64> = (0..)
                .map(|i: u64| kernel + i * step)
                .take_while(|&x| x <= max_words)
                .collect();
            let learner = SyntheticLearner {
                truth: PowerLawParams::new(a, b, c)?,
                noise_sigma: sigma,
                seed,
                x_grid,
            };
            let obs = match settings.folds {
                Some(k) => generate_folds(&learner, k)?,
                None => generate(&learner)?,
            };
            let mut bytes = Vec::new();
            write_csv(&mut bytes, &obs)?;
            write_output(settings.output.as_deref(), &bytes, out)
        }
        Command::Report { report, format, output } => {
            let format: ReportFormat = format.parse()?;
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let parsed: EvaluationReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: report.display().to_string(),
                line: e.line() as u64,
                message: e.to_string(),
            })?;
            write_output(output.as_deref(), &emit_report(&parsed, format)?, out)
        }
    }
}

fn summarize(report: &EvaluationReport, err: &mut dyn Write) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or("--".to_string(), |v| format!("{v:.2}"));
    for row in &report.rows {
        let line = match &row.error {
            Some(e) => format!("{}: failed: {e}\n", row.name),
            None => format!(
                "{}: plevel {} clevel {} mape {} dmr {} rr {}\n",
                row.name,
                row.plevel.map_or("--".to_string(), |p| p.to_string()),
                row.clevel.map_or("--".to_string(), |p| p.to_string()),
                fmt(row.mape),
                fmt(row.dmr),
                fmt(row.rr)
            ),
        };
        err.write_all(line.as_bytes()).map_err(|e| Error::io("<stderr>", e))?;
    }
    Ok(())
}

fn write_output(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => out.write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("writing csv: {e}"))
}
