use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;

use homspec::estimator::FitMode;
use homspec::simulator::Engine;
use homspec::statistics::GateKernel;

use crate::commands::{self, ModelParams};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{read_scan, render_json, render_scan, write_file};

#[derive(Debug, Parser)]
#[command(name = "homspec", version, about = "HOM beat spectroscopy of weak coherent states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Kernel,
    Field,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Kernel => Engine::TwoPhotonKernel,
            EngineArg::Field => Engine::SemiclassicalField,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file, or directory for `beat` and `compare`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Gate width of both detectors, seconds.
    #[arg(long)]
    pub gate_width: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the analytic coincidence curve on a delay grid.
    Model {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma_s: Option<f64>,
        #[arg(long)]
        delta_hz: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delay_min_s: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delay_max_s: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Use the two-gate triangular kernel instead of a boxcar.
        #[arg(long)]
        triangular: bool,
    },
    /// Simulate a coincidence scan.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the beat model to a scan file.
    Fit {
        scan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Hold visibility at 1/2 and center and phase at 0.
        #[arg(long)]
        pure: bool,
    },
    /// Synthesize a heterodyne beat and fit its line.
    Beat {
        #[command(flatten)]
        common: Common,
    },
    /// Compare HOM and beat-note estimates across settings.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    apply_overrides(&mut cfg, common);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(e) = common.engine {
        cfg.engine = e.into();
    }
    if let Some(w) = common.gate_width {
        cfg.set_gate_width(w);
    }
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> CliResult<()> {
    write_file(&path, text)?;
    written.push(path);
    Ok(())
}

/// Runs one command and returns the files it wrote, in order.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    match cli.command {
        Command::Model {
            common,
            sigma_s,
            delta_hz,
            delay_min_s,
            delay_max_s,
            points,
            triangular,
        } => {
            let cfg = match &common.config {
                Some(_) => Some(load(&common)?),
                None => None,
            };
            let need = |v: Option<f64>, from_cfg: Option<f64>, name: &str| {
                v.or(from_cfg)
                    .ok_or_else(|| CliError::Usage(format!("--{name} is required without --config")))
            };
            let scan = cfg.as_ref().and_then(|c| c.scan.clone());
            let cfg_delta = match &cfg {
                Some(c) => Some(homspec::rad_to_hz(c.delta()?)),
                None => None,
            };
            let params = ModelParams {
                sigma_s: need(sigma_s, cfg.as_ref().map(|c| c.source.sigma_s), "sigma-s")?,
                delta_hz: need(delta_hz, cfg_delta, "delta-hz")?,
                delay_min_s: need(delay_min_s, scan.as_ref().map(|s| s.delay_min_s), "delay-min-s")?,
                delay_max_s: need(delay_max_s, scan.as_ref().map(|s| s.delay_max_s), "delay-max-s")?,
                points: points
                    .or(scan.as_ref().map(|s| s.points))
                    .ok_or_else(|| CliError::Usage("--points is required without --config".into()))?,
                gate_width_s: common.gate_width,
                gate_kernel: if triangular { GateKernel::Triangular } else { GateKernel::Boxcar },
            };
            let seed = common.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            write(out_path(&common, "model.csv"), &commands::model(&params, seed)?, &mut written)?;
        }
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            let file = commands::simulate(&cfg)?;
            if file.scan.truncation_warning {
                eprintln!("warning: mu = {} exceeds the two-photon truncation bound", cfg.source.mu);
            }
            write(out_path(&common, "scan.csv"), &render_scan(&file), &mut written)?;
        }
        Command::Fit { scan, out, pure } => {
            let text = std::fs::read_to_string(&scan).map_err(|e| CliError::io(&scan, e))?;
            let file = read_scan(&scan)?;
            let mode = if pure { FitMode::Pure } else { FitMode::Full };
            let report = commands::fit(&file, &text, mode)?;
            if !report.converged {
                eprintln!("warning: fit did not converge: {}", report.diagnostics.join("; "));
            }
            write(out.unwrap_or_else(|| PathBuf::from("fit.json")), &render_json(&report), &mut written)?;
        }
        Command::Beat { common } => {
            let cfg = load(&common)?;
            let dir = out_path(&common, "beat");
            let out = commands::beat(&cfg)?;
            write(dir.join("spectrum.csv"), &out.spectrum_csv, &mut written)?;
            write(dir.join("line_fit.json"), &render_json(&out.report), &mut written)?;
        }
        Command::Compare { common } => {
            let cfg = load(&common)?;
            let dir = out_path(&common, "compare");
            let out = commands::compare(&cfg)?;
            for (i, (scan, spectrum)) in out.scans.iter().zip(&out.spectra_csv).enumerate() {
                write(dir.join(format!("scan_{i}.csv")), &render_scan(scan), &mut written)?;
                write(dir.join(format!("spectrum_{i}.csv")), spectrum, &mut written)?;
            }
            write(dir.join("comparison.csv"), &out.comparison_csv, &mut written)?;
            write(dir.join("report.json"), &render_json(&out.report), &mut written)?;
        }
    }
    Ok(written)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
