//! TOML experiment configuration.
//!
//! ```toml
//! seed = 42
//! engine = "kernel"          # or "field"
//!
//! [source]
//! mu = 0.1
//! sigma_s = 10e-9
//! delta_hz = 80e6            # or a [source.fm] table
//!
//! [detector_m]
//! efficiency = 0.15
//! gate_width_s = 1e-12
//!
//! [scan]
//! delay_min_s = -70e-9
//! delay_max_s = 70e-9
//! points = 281
//! trials_per_point = 10_000_000
//!
//! [beat]
//! duration_s = 2e-3
//! sample_rate_hz = 1.6e9
//!
//! [[compare.settings]]
//! delta_hz = 0.0
//! sigma_s = 25e-9
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use homspec::beat_oracle::{BeatSynthesisSpec, SpectrumOptions};
use homspec::simulator::{delta_from_fm, uniform_grid, BaselineWindow, DetectorSpec, Engine, FmEmulationSpec, ScanConfig};
use homspec::statistics::{GateKernel, SourcePairSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub gate_kernel: GateKernel,
    pub source: SourceConfig,
    #[serde(default)]
    pub detector_m: DetectorSpec,
    #[serde(default)]
    pub detector_n: DetectorSpec,
    pub scan: Option<ScanGrid>,
    pub beat: Option<BeatConfig>,
    pub compare: Option<CompareConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mu: f64,
    pub sigma_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fm: Option<FmEmulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub delay_min_s: f64,
    pub delay_max_s: f64,
    pub points: usize,
    pub trials_per_point: u64,
    /// Defaults to five coherence times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_min_abs_delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeatConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    #[serde(default = "default_segment")]
    pub segment_length: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
}

fn default_segment() -> usize {
    SpectrumOptions::default().segment_length
}

fn default_overlap() -> f64 {
    SpectrumOptions::default().overlap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub settings: Vec<CompareSetting>,
}

/// One comparison setting. The delay grid defaults to seven coherence times
/// either side of zero with `[scan].points` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSetting {
    pub delta_hz: f64,
    pub sigma_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_min_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_max_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        match (&self.source.delta_hz, &self.source.fm) {
            (Some(_), Some(_)) => Err("source: give either delta_hz or [source.fm], not both".into()),
            (None, None) => Err("source: one of delta_hz or [source.fm] is required".into()),
            _ => Ok(()),
        }
    }

    /// Frequency mismatch in rad/s, from `delta_hz` or the FM emulation.
    pub fn delta(&self) -> CliResult<f64> {
        match (&self.source.delta_hz, &self.source.fm) {
            (Some(d), None) => Ok(homspec::hz_to_rad(*d)),
            (None, Some(fm)) => Ok(delta_from_fm(fm)?),
            _ => Err(CliError::Usage("source needs exactly one of delta_hz or [source.fm]".into())),
        }
    }

    pub fn source_spec(&self) -> CliResult<SourcePairSpec> {
        Ok(SourcePairSpec::new(self.source.mu, self.source.sigma_s, self.delta()?)?)
    }

    pub fn set_gate_width(&mut self, width: f64) {
        self.detector_m.gate_width = width;
        self.detector_n.gate_width = width;
    }

    pub fn require_scan(&self) -> CliResult<&ScanGrid> {
        self.scan
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [scan] table".into()))
    }

    pub fn require_beat(&self) -> CliResult<&BeatConfig> {
        self.beat
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [beat] table".into()))
    }

    pub fn scan_config(&self, source: SourcePairSpec, grid: &ScanGrid, seed: u64) -> CliResult<ScanConfig> {
        let window = BaselineWindow::outside(grid.baseline_min_abs_delay_s.unwrap_or(5.0 * source.sigma));
        Ok(ScanConfig {
            delay_grid: uniform_grid(grid.delay_min_s, grid.delay_max_s, grid.points)?,
            trials_per_point: grid.trials_per_point,
            rng_seed: seed,
            source,
            detectors: [self.detector_m, self.detector_n],
            engine: self.engine,
            gate_kernel: self.gate_kernel,
            baseline_window: Some(window),
        })
    }

    pub fn beat_spec(&self, delta: f64, sigma: f64, seed: u64) -> CliResult<(BeatSynthesisSpec, SpectrumOptions)> {
        let b = self.require_beat()?;
        Ok((
            BeatSynthesisSpec {
                delta,
                sigma,
                sample_rate_hz: b.sample_rate_hz,
                duration_s: b.duration_s,
                seed,
            },
            SpectrumOptions {
                segment_length: b.segment_length,
                overlap: b.overlap,
            },
        ))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
