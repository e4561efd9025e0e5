//! The five batch commands, as pure functions from inputs to artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

use homspec::beat_oracle::{estimate_spectrum, fit_gaussian_line, synthesize_beat, BeatSpectrum, LineFit};
use homspec::estimator::{
    correlate_techniques, fit_hom_model_with, ComparisonRow, FitMode, FitOptions, FitResult, Param,
};
use homspec::rng::derive_seed;
use homspec::simulator::{simulate_scan, uniform_grid};
use homspec::statistics::{gate_averaged_model_with, model_coincidence, GateKernel, SourcePairSpec};
use homspec::{hz_to_rad, rad_to_hz, Error};

use crate::config::{ExperimentConfig, ScanGrid};
use crate::error::{CliError, CliResult};
use crate::formats::{render_model, render_spectrum, Provenance, ScanFile};

/// A width comparison is resolution-limited below this many resolution
/// bandwidths.
pub const RBW_LIMIT_FACTOR: f64 = 10.0;

/// Half-span of a comparison scan, in coherence times, when a setting does
/// not give its own delay bounds.
pub const DEFAULT_SPAN_SIGMAS: f64 = 7.0;

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        config: cfg.to_json(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub sigma_s: f64,
    pub delta_hz: f64,
    pub delay_min_s: f64,
    pub delay_max_s: f64,
    pub points: usize,
    pub gate_width_s: Option<f64>,
    pub gate_kernel: GateKernel,
}

/// Analytic coincidence curve, optionally averaged over the detector gate.
pub fn model(p: &ModelParams, seed: u64) -> CliResult<String> {
    if !(p.sigma_s > 0.0) {
        return Err(Error::InvalidParameter { name: "sigma_s", reason: "must be positive".into() }.into());
    }
    if p.gate_width_s.is_some_and(|w| !(w >= 0.0)) {
        return Err(Error::InvalidParameter { name: "gate_width_s", reason: "must be non-negative".into() }.into());
    }
    let tau = uniform_grid(p.delay_min_s, p.delay_max_s, p.points)?;
    let delta = hz_to_rad(p.delta_hz);
    let prob: Vec<f64> = tau
        .iter()
        .map(|&t| match p.gate_width_s {
            Some(w) if w > 0.0 => gate_averaged_model_with(t, p.sigma_s, delta, w, p.gate_kernel),
            _ => model_coincidence(t, p.sigma_s, delta),
        })
        .collect();
    let json = serde_json::to_value(p).expect("serializable");
    let text = serde_json::to_string(&json).expect("serializable");
    let prov = Provenance {
        config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        seed,
        config: json,
    };
    Ok(render_model(&prov, &tau, &prob))
}

pub fn simulate(cfg: &ExperimentConfig) -> CliResult<ScanFile> {
    let grid = cfg.require_scan()?;
    let scan_cfg = cfg.scan_config(cfg.source_spec()?, grid, cfg.seed)?;
    Ok(ScanFile {
        provenance: provenance(cfg),
        engine: cfg.engine.name().into(),
        scan: simulate_scan(&scan_cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub format: &'static str,
    pub input_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
    pub engine: String,
    pub mode: FitMode,
    pub delta_hz: f64,
    pub delta_err_hz: Option<f64>,
    pub sigma_s: f64,
    pub sigma_err_s: Option<f64>,
    pub visibility: f64,
    pub visibility_err: Option<f64>,
    pub baseline: f64,
    pub baseline_err: Option<f64>,
    pub center_s: f64,
    pub center_err_s: Option<f64>,
    pub phase_rad: f64,
    pub phase_err_rad: Option<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub converged: bool,
    pub delta_fixed: bool,
    pub singular: bool,
    pub iterations: usize,
    pub free_parameters: Vec<Param>,
    /// Over `free_parameters`, SI units with delta in rad/s.
    pub covariance: Vec<Vec<f64>>,
    pub diagnostics: Vec<String>,
    pub config: serde_json::Value,
}

impl FitReport {
    fn new(fit: &FitResult, file: &ScanFile, input_sha256: String, mode: FitMode) -> Self {
        let se = |p| fit.std_error(p);
        Self {
            format: "homspec-fit/1",
            input_sha256,
            config_sha256: file.provenance.config_sha256.clone(),
            seed: file.provenance.seed,
            engine: file.engine.clone(),
            mode,
            delta_hz: rad_to_hz(fit.delta_hat),
            delta_err_hz: se(Param::Delta).map(rad_to_hz),
            sigma_s: fit.sigma_hat,
            sigma_err_s: se(Param::Sigma),
            visibility: fit.visibility_hat,
            visibility_err: se(Param::Visibility),
            baseline: fit.baseline_hat,
            baseline_err: se(Param::Baseline),
            center_s: fit.center_hat,
            center_err_s: se(Param::Center),
            phase_rad: fit.phase_hat,
            phase_err_rad: se(Param::Phase),
            chi2: fit.chi2,
            dof: fit.dof,
            chi2_per_dof: fit.chi2_per_dof,
            converged: fit.converged,
            delta_fixed: fit.delta_fixed,
            singular: fit.singular,
            iterations: fit.iterations,
            free_parameters: fit.free_parameters.clone(),
            covariance: fit.covariance.clone(),
            diagnostics: fit.diagnostics.clone(),
            config: file.provenance.config.clone(),
        }
    }
}

/// Fits a scan; `input_text` is the file content, hashed for provenance.
pub fn fit(file: &ScanFile, input_text: &str, mode: FitMode) -> CliResult<FitReport> {
    let opts = FitOptions {
        mode,
        ..FitOptions::default()
    };
    let result = fit_hom_model_with(&file.scan, None, &opts)?;
    let hash = hex::encode(Sha256::digest(input_text.as_bytes()));
    Ok(FitReport::new(&result, file, hash, mode))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineReport {
    pub format: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub delta_true_hz: f64,
    pub sigma_true_s: f64,
    pub center_hz: f64,
    pub center_err_hz: f64,
    pub halfwidth_e2_hz: f64,
    pub halfwidth_e2_err_hz: f64,
    pub fwhm_hz: f64,
    pub expected_halfwidth_e2_hz: f64,
    pub resolution_bw_hz: f64,
    pub segments: usize,
    pub chi2_per_dof: f64,
    pub converged: bool,
    pub config: serde_json::Value,
}

pub struct BeatOutput {
    pub spectrum_csv: String,
    pub spectrum: BeatSpectrum,
    pub line: LineFit,
    pub report: LineReport,
}

fn beat_for(cfg: &ExperimentConfig, delta: f64, sigma: f64, seed: u64) -> CliResult<(BeatSpectrum, LineFit)> {
    let (spec, opts) = cfg.beat_spec(delta, sigma, seed)?;
    let samples = synthesize_beat(&spec)?;
    let spectrum = estimate_spectrum(&samples, spec.sample_rate_hz, &opts)?;
    let line = fit_gaussian_line(&spectrum)?;
    Ok((spectrum, line))
}

pub fn beat(cfg: &ExperimentConfig) -> CliResult<BeatOutput> {
    let delta = cfg.delta()?;
    let sigma = cfg.source.sigma_s;
    let (spectrum, line) = beat_for(cfg, delta, sigma, cfg.seed)?;
    let prov = provenance(cfg);
    let report = LineReport {
        format: "homspec-beat/1",
        config_sha256: prov.config_sha256.clone(),
        seed: cfg.seed,
        delta_true_hz: rad_to_hz(delta),
        sigma_true_s: sigma,
        center_hz: line.center_hz,
        center_err_hz: line.center_err_hz,
        halfwidth_e2_hz: line.width_hz,
        halfwidth_e2_err_hz: line.width_err_hz,
        fwhm_hz: line.fwhm_hz(),
        expected_halfwidth_e2_hz: homspec::beat_oracle::expected_line_width(sigma),
        resolution_bw_hz: spectrum.resolution_bw_hz,
        segments: spectrum.segments,
        chi2_per_dof: line.chi2_per_dof,
        converged: line.converged,
        config: prov.config.clone(),
    };
    Ok(BeatOutput {
        spectrum_csv: render_spectrum(&prov, &spectrum),
        spectrum,
        line,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRowReport {
    pub setting: usize,
    pub delta_true_hz: f64,
    pub sigma_true_s: f64,
    pub delta_hom_hz: f64,
    pub delta_hom_err_hz: Option<f64>,
    pub delta_fixed: bool,
    pub sigma_hom_s: f64,
    pub width_hom_hz: f64,
    pub delta_esa_hz: f64,
    pub delta_esa_err_hz: f64,
    pub width_esa_hz: f64,
    pub resolution_bw_hz: f64,
    pub rbw_limited: bool,
    pub rel_err_delta: Option<f64>,
    pub rel_err_width: Option<f64>,
    pub fit_converged: bool,
    pub scan_seed: u64,
    pub beat_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub format: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub slope: f64,
    pub slope_err: f64,
    pub intercept_hz: f64,
    pub intercept_err_hz: f64,
    pub rows: Vec<CompareRowReport>,
    pub config: serde_json::Value,
}

pub struct CompareOutput {
    pub report: CompareReport,
    pub comparison_csv: String,
    pub scans: Vec<ScanFile>,
    pub spectra_csv: Vec<String>,
}

pub fn compare(cfg: &ExperimentConfig) -> CliResult<CompareOutput> {
    let settings = &cfg
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no [compare] table".into()))?
        .settings;
    if settings.len() < 3 {
        return Err(Error::TooFewSettings(settings.len()).into());
    }
    let prov = provenance(cfg);
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut scans = Vec::new();
    let mut spectra_csv = Vec::new();
    for (i, s) in settings.iter().enumerate() {
        let i64 = i as u64;
        let delta = hz_to_rad(s.delta_hz);
        let source = SourcePairSpec::new(cfg.source.mu, s.sigma_s, delta)?;
        let base = cfg.scan.as_ref();
        let grid = ScanGrid {
            delay_min_s: s.delay_min_s.unwrap_or(-DEFAULT_SPAN_SIGMAS * s.sigma_s),
            delay_max_s: s.delay_max_s.unwrap_or(DEFAULT_SPAN_SIGMAS * s.sigma_s),
            points: s
                .points
                .or(base.map(|g| g.points))
                .ok_or_else(|| CliError::Usage(format!("setting {i}: points not given and no [scan] table")))?,
            trials_per_point: base
                .map(|g| g.trials_per_point)
                .ok_or_else(|| CliError::Usage("compare needs [scan].trials_per_point".into()))?,
            baseline_min_abs_delay_s: None,
        };
        let scan_seed = derive_seed(cfg.seed, "compare-scan", i64);
        let beat_seed = derive_seed(cfg.seed, "compare-beat", i64);
        let scan = simulate_scan(&cfg.scan_config(source, &grid, scan_seed)?)?;
        let fit = fit_hom_model_with(&scan, None, &FitOptions::default())?;
        let (spectrum, line) = beat_for(cfg, delta, s.sigma_s, beat_seed)?;
        let row = ComparisonRow::new(fit.delta_hat, fit.sigma_hat, line.center_hz, line.width_hz);
        rows.push(CompareRowReport {
            setting: i,
            delta_true_hz: s.delta_hz,
            sigma_true_s: s.sigma_s,
            delta_hom_hz: row.delta_hom_hz,
            delta_hom_err_hz: fit.std_error(Param::Delta).map(rad_to_hz),
            delta_fixed: fit.delta_fixed,
            sigma_hom_s: fit.sigma_hat,
            width_hom_hz: row.width_hom_hz,
            delta_esa_hz: row.delta_esa_hz,
            delta_esa_err_hz: line.center_err_hz,
            width_esa_hz: row.width_esa_hz,
            resolution_bw_hz: spectrum.resolution_bw_hz,
            rbw_limited: line.width_hz < RBW_LIMIT_FACTOR * spectrum.resolution_bw_hz,
            rel_err_delta: row.rel_err_delta,
            rel_err_width: row.rel_err_width,
            fit_converged: fit.converged,
            scan_seed,
            beat_seed,
        });
        pairs.push(row);
        scans.push(ScanFile {
            provenance: Provenance {
                seed: scan_seed,
                ..prov.clone()
            },
            engine: cfg.engine.name().into(),
            scan,
        });
        spectra_csv.push(render_spectrum(
            &Provenance {
                seed: beat_seed,
                ..prov.clone()
            },
            &spectrum,
        ));
    }
    let line = correlate_techniques(pairs)?;
    let report = CompareReport {
        format: "homspec-compare/1",
        config_sha256: prov.config_sha256.clone(),
        seed: cfg.seed,
        slope: line.slope,
        slope_err: line.slope_err,
        intercept_hz: line.intercept_hz,
        intercept_err_hz: line.intercept_err_hz,
        rows,
        config: prov.config.clone(),
    };
    let comparison_csv = comparison_csv(&prov, &report);
    Ok(CompareOutput {
        report,
        comparison_csv,
        scans,
        spectra_csv,
    })
}

fn comparison_csv(p: &Provenance, r: &CompareReport) -> String {
    use std::fmt::Write as _;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut out = String::new();
    writeln!(out, "# format: homspec-comparison/1").unwrap();
    writeln!(out, "# config_sha256: {}", p.config_sha256).unwrap();
    writeln!(out, "# seed: {}", p.seed).unwrap();
    writeln!(
        out,
        "setting,delta_true_hz,sigma_true_s,delta_hom_hz,delta_hom_err_hz,delta_esa_hz,width_hom_hz,width_esa_hz,resolution_bw_hz,rel_err_delta,rel_err_width"
    )
    .unwrap();
    for row in &r.rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{},{}",
            row.setting,
            row.delta_true_hz,
            row.sigma_true_s,
            row.delta_hom_hz,
            opt(row.delta_hom_err_hz),
            row.delta_esa_hz,
            row.width_hom_hz,
            row.width_esa_hz,
            row.resolution_bw_hz,
            opt(row.rel_err_delta),
            opt(row.rel_err_width)
        )
        .unwrap();
    }
    out
}
