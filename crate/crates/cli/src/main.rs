use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdn_loop::compensator::{design_lead_with, DesignOptions, DEFAULT_C_CANDIDATES};
use pdn_loop::config::{load_config, AnalysisConfig};
use pdn_loop::emit::{render, Artifact, Format, Report};
use pdn_loop::injection::measure_loop_gain;
use pdn_loop::measured::import_measured;
use pdn_loop::stability::{self, margins_of, sweep, BodeData, Verdict};
use pdn_loop::transient::{simulate_step, LoadStep};
use pdn_loop::Error;

/// Worst margins below these fail `margins --assert-stable`.
const REQUIRED_GM_DB: f64 = 10.0;
const REQUIRED_PM_DEG: f64 = 45.0;

#[derive(Parser)]
#[command(name = "pdnloop", version, about = "Regulator loop-gain, margin and load-step analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON analysis config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "HZ")]
    fmin: Option<f64>,
    #[arg(long, value_name = "HZ")]
    fmax: Option<f64>,
    #[arg(long, value_name = "N")]
    ppd: Option<u32>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Svg,
    Txt,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Svg => Format::Svg,
            OutFormat::Txt => Format::Txt,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Loop-gain Bode data.
    Bode {
        #[command(flatten)]
        common: Common,
    },
    /// Gain and phase margins of the configured loop.
    Margins {
        #[command(flatten)]
        common: Common,
        /// Exit with status 1 unless GM >= 10 dB and PM >= 45 deg.
        #[arg(long)]
        assert_stable: bool,
    },
    /// Search for a phase-lead network.
    Compensate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated capacitor candidates in farads.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        c_candidates: Option<Vec<f64>>,
        /// Use this lead corner instead of searching.
        #[arg(long, value_name = "HZ")]
        f0: Option<f64>,
    },
    /// Load-step response of the closed-loop output impedance.
    Transient {
        #[command(flatten)]
        common: Common,
        /// Current step size in amps.
        #[arg(long, value_name = "X")]
        step_amps: Option<f64>,
        #[arg(long, value_name = "S")]
        duration: Option<f64>,
        #[arg(long, value_name = "S")]
        dt: Option<f64>,
    },
    /// Simulated injection measurement of the loop gain.
    Inject {
        #[command(flatten)]
        common: Common,
        /// Injection amplitude in volts.
        #[arg(long, default_value_t = 0.01)]
        amplitude: f64,
    },
    /// Margins from a measured `freq_hz,mag_db,phase_deg` CSV.
    ImportMeasure {
        #[command(flatten)]
        common: Common,
        csv: PathBuf,
    },
}

enum Failure {
    Assertion(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::NonMonotonicFrequency { .. }
        | Error::InvalidArgument(_)
        | Error::Io(_) => 2,
        _ => 3,
    }
}

fn load(common: &Common) -> Result<AnalysisConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--config is required".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(f) = common.fmin {
        cfg.sweep.f_min_hz = f;
    }
    if let Some(f) = common.fmax {
        cfg.sweep.f_max_hz = f;
    }
    if let Some(n) = common.ppd {
        cfg.sweep.points_per_decade = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(common: &Common, artifact: Artifact<'_>, default: Format) -> Result<(), Error> {
    let format = common.format.map_or(default, Format::from);
    let text = render(&artifact, format)?;
    match &common.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn title(cfg: &AnalysisConfig, what: &str) -> String {
    match &cfg.name {
        Some(n) => format!("{n}: {what}"),
        None => what.to_string(),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Bode { common } => {
            let cfg = load(&common)?;
            let t = cfg.loop_model()?.loop_gain()?;
            write(&common, Artifact::Bode(&sweep(&t, &cfg.sweep)?), Format::Csv)?;
        }
        Command::Margins { common, assert_stable } => {
            let cfg = load(&common)?;
            let t = cfg.loop_model()?.loop_gain()?;
            let report = margins_of(&t, &cfg.sweep)?;
            let passed = report.verdict() == Verdict::Stable
                && report.pole_stable != Some(false)
                && report.gain_margin_db >= REQUIRED_GM_DB
                && report.phase_margin_deg >= REQUIRED_PM_DEG;
            let summary = format!(
                "GM {:.2} dB, PM {:.2} deg (need {REQUIRED_GM_DB} dB / {REQUIRED_PM_DEG} deg)",
                report.gain_margin_db, report.phase_margin_deg
            );
            let r = Report {
                title: title(&cfg, "loop margins"),
                stability: Some(report),
                ..Report::default()
            };
            write(&common, Artifact::Report(&r), Format::Txt)?;
            if assert_stable && !passed {
                return Err(Failure::Assertion(summary));
            }
        }
        Command::Compensate {
            common,
            c_candidates,
            f0,
        } => {
            let cfg = load(&common)?;
            let caps = c_candidates.unwrap_or_else(|| DEFAULT_C_CANDIDATES.to_vec());
            let model = cfg.loop_model()?;
            let opts = DesignOptions {
                band: cfg.sweep,
                ..DesignOptions::default()
            };
            let design = design_lead_with(&model, &caps, f0, &opts)?;
            let r = Report {
                title: title(&cfg, "lead compensation"),
                stability: Some(design.achieved.clone()),
                design: Some(design),
                ..Report::default()
            };
            write(&common, Artifact::Report(&r), Format::Txt)?;
        }
        Command::Transient {
            common,
            step_amps,
            duration,
            dt,
        } => {
            let cfg = load(&common)?;
            let mut step = cfg.step.unwrap_or(LoadStep {
                i_before_amps: 0.0,
                i_after_amps: 0.0,
                t_step_s: 0.0,
                dt_s: 0.0,
                duration_s: 0.0,
                rise_time_s: 0.0,
            });
            if let Some(x) = step_amps {
                step.i_after_amps = step.i_before_amps + x;
            }
            if let Some(d) = duration {
                step.duration_s = d;
            }
            if let Some(d) = dt {
                step.dt_s = d;
            }
            let z = cfg.loop_model()?.closed_loop_output_impedance()?;
            let result = simulate_step(&z, &step)?;
            write(&common, Artifact::Waveform(&result), Format::Csv)?;
        }
        Command::Inject { common, amplitude } => {
            let cfg = load(&common)?;
            let model = cfg.loop_model()?;
            let freqs = cfg.sweep.grid();
            let m = measure_loop_gain(&model, &freqs, amplitude)?;
            let bode = BodeData::from_response(&m.response)?;
            if common.format.map_or(Format::Csv, Format::from) == Format::Txt {
                let r = Report {
                    title: title(&cfg, "injected loop gain"),
                    stability: Some(stability::margins(&bode)),
                    notes: m
                        .ill_conditioned_hz
                        .iter()
                        .map(|f| format!("|1+GH| < 1e-6 at {f} Hz"))
                        .collect(),
                    ..Report::default()
                };
                write(&common, Artifact::Report(&r), Format::Txt)?;
            } else {
                write(&common, Artifact::Bode(&bode), Format::Csv)?;
            }
        }
        Command::ImportMeasure { common, csv } => {
            let bode = import_measured(&csv)?.to_bode()?;
            if common.format.map_or(Format::Txt, Format::from) == Format::Txt {
                let r = Report {
                    title: format!("measured: {}", csv.display()),
                    stability: Some(stability::margins(&bode)),
                    ..Report::default()
                };
                write(&common, Artifact::Report(&r), Format::Txt)?;
            } else {
                write(&common, Artifact::Bode(&bode), Format::Csv)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("stability assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
