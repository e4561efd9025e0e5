//! Classical beat-note oracle: a two-laser heterodyne signal with
//! quasi-static Gaussian frequency noise, its Welch power spectrum, and a
//! Gaussian line fit.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU as TWO_PI};

use crate::lsq::{levenberg_marquardt, CurveModel, LmOptions};
use crate::rng::{stream, Domain};
use crate::{Error, Result};

/// Correlation time of the frequency noise, in units of the coherence time.
pub const NOISE_CORRELATION_SIGMAS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatSynthesisSpec {
    /// Mean frequency difference, rad/s.
    pub delta: f64,
    /// Coherence time of each laser, s. `f64::INFINITY` gives a pure tone.
    pub sigma: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl BeatSynthesisSpec {
    /// Minimum sample rate: four times the highest significant frequency
    /// `delta / 2 pi + 2 / sigma`.
    pub fn required_sample_rate(&self) -> f64 {
        let spread = if self.sigma.is_finite() { 2.0 / self.sigma } else { 0.0 };
        4.0 * (self.delta.abs() / TWO_PI + spread)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::invalid("duration_s", "must be positive"));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        let required = self.required_sample_rate();
        if !(self.sample_rate_hz > required) || !self.sample_rate_hz.is_finite() {
            return Err(Error::Nyquist {
                rate: self.sample_rate_hz,
                required,
            });
        }
        Ok(())
    }
}

/// Gaussian-correlated noise with unit variance and autocorrelation
/// `exp(-t^2 / (2 tc^2))`, on a grid of spacing `h`.
fn correlated_noise<R: Rng>(rng: &mut R, points: usize, h: f64, tc: f64) -> Vec<f64> {
    // White noise through a Gaussian kernel of width tc / sqrt(2).
    let kw = tc / 2f64.sqrt();
    let half = (4.0 * kw / h).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) * h;
            (-0.5 * t * t / (kw * kw)).exp()
        })
        .collect();
    let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
    let white: Vec<f64> = (0..points + 2 * half).map(|_| rng.sample(StandardNormal)).collect();
    (0..points)
        .map(|i| kernel.iter().zip(&white[i..]).map(|(k, w)| k * w).sum::<f64>() / norm)
        .collect()
}

/// Detector photocurrent `1 + sin(phase)` of the interfering lasers, sampled
/// at `sample_rate_hz`.
///
/// Each laser carries frequency noise of variance `1/(2 sigma^2)` (rad/s)^2
/// with correlation time `20 sigma`, which is slow on the scale of the
/// coherence time and yields a Gaussian beat line of half-width at `1/e^2`
/// equal to `1/(pi sigma)` Hz.
pub fn synthesize_beat(spec: &BeatSynthesisSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = (spec.duration_s * spec.sample_rate_hz).round() as usize;
    if n < 2 {
        return Err(Error::invalid("duration_s", "shorter than two samples"));
    }
    let dt = 1.0 / spec.sample_rate_hz;
    let mut rng = stream(spec.seed, Domain::BeatSynthesis, 0);
    let theta0 = TWO_PI * rng.random::<f64>();

    let offset: Vec<f64> = if spec.sigma.is_finite() {
        let tc = NOISE_CORRELATION_SIGMAS * spec.sigma;
        let h = tc / 16.0;
        let coarse = (spec.duration_s / h).ceil() as usize + 2;
        let per_source = 1.0 / (2f64.sqrt() * spec.sigma);
        let a = correlated_noise(&mut rng, coarse, h, tc);
        let b = correlated_noise(&mut rng, coarse, h, tc);
        let rel: Vec<f64> = a.iter().zip(&b).map(|(x, y)| per_source * (x - y)).collect();
        (0..n)
            .map(|i| {
                let t = i as f64 * dt / h;
                let j = (t as usize).min(coarse - 2);
                let f = t - j as f64;
                rel[j] + f * (rel[j + 1] - rel[j])
            })
            .collect()
    } else {
        vec![0.0; n]
    };

    let mut out = Vec::with_capacity(n);
    let mut phase = theta0;
    out.push(1.0 + phase.sin());
    for i in 1..n {
        phase += dt * (spec.delta + 0.5 * (offset[i - 1] + offset[i]));
        if phase > TWO_PI {
            phase -= TWO_PI;
        }
        out.push(1.0 + phase.sin());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub segment_length: usize,
    /// Fractional overlap of consecutive segments, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            segment_length: 4096,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatSpectrum {
    pub frequency_hz: Vec<f64>,
    /// One-sided power spectral density, signal units^2 / Hz.
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of the window.
    pub resolution_bw_hz: f64,
    pub sample_rate_hz: f64,
    pub segments: usize,
}

impl BeatSpectrum {
    /// Integrated power, `sum(psd) * df`.
    pub fn total_power(&self) -> f64 {
        let df = self.sample_rate_hz / (2 * (self.psd.len() - 1)) as f64;
        self.psd.iter().sum::<f64>() * df
    }
}

/// Welch estimate with a Hann window, after removing the record mean.
pub fn estimate_spectrum(samples: &[f64], sample_rate_hz: f64, opts: &SpectrumOptions) -> Result<BeatSpectrum> {
    let l = opts.segment_length;
    if l < 8 || l % 2 != 0 {
        return Err(Error::Segmentation(format!("segment length {l} must be even and at least 8")));
    }
    if !(opts.overlap >= 0.0 && opts.overlap < 1.0) {
        return Err(Error::Segmentation(format!("overlap {} outside [0, 1)", opts.overlap)));
    }
    if samples.len() < l {
        return Err(Error::Segmentation(format!(
            "{} samples are fewer than one segment of {l}",
            samples.len()
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid("sample_rate_hz", "must be positive"));
    }
    let step = ((l as f64 * (1.0 - opts.overlap)).round() as usize).max(1);
    let segments = (samples.len() - l) / step + 1;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let window: Vec<f64> = (0..l).map(|i| 0.5 * (1.0 - (TWO_PI * i as f64 / l as f64).cos())).collect();
    let s1: f64 = window.iter().sum();
    let s2: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(l);
    let mut acc = vec![0.0; l / 2 + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for s in 0..segments {
        let seg = &samples[s * step..s * step + l];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (sample_rate_hz * s2 * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| if k == 0 || k == l / 2 { a * scale } else { 2.0 * a * scale })
        .collect();
    Ok(BeatSpectrum {
        frequency_hz: (0..=l / 2).map(|k| k as f64 * sample_rate_hz / l as f64).collect(),
        psd,
        resolution_bw_hz: sample_rate_hz * s2 / (s1 * s1),
        sample_rate_hz,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub center_hz: f64,
    /// Half-width at `1/e^2` of the peak.
    pub width_hz: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub center_err_hz: f64,
    pub width_err_hz: f64,
    pub chi2_per_dof: f64,
    pub converged: bool,
}

impl LineFit {
    pub fn fwhm_hz(&self) -> f64 {
        self.width_hz * (2.0 * 2f64.ln()).sqrt()
    }
}

/// One-sided line of a real signal: `A [g(f - f0) + g(f + f0)] + c` with
/// `g(x) = exp(-2 x^2 / w^2)`, parameters `[A, f0, w, c]`. The image term
/// folds the negative-frequency half back onto the axis and only matters
/// for lines within a few widths of DC.
struct FoldedGaussianLine;

impl CurveModel for FoldedGaussianLine {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, p: &[f64], f: f64) -> f64 {
        let (u, v) = ((f - p[1]) / p[2], (f + p[1]) / p[2]);
        p[0] * ((-2.0 * u * u).exp() + (-2.0 * v * v).exp()) + p[3]
    }

    fn gradient(&self, p: &[f64], f: f64, g: &mut [f64]) {
        let (u, v) = ((f - p[1]) / p[2], (f + p[1]) / p[2]);
        let (eu, ev) = ((-2.0 * u * u).exp(), (-2.0 * v * v).exp());
        g[0] = eu + ev;
        g[1] = p[0] * 4.0 * (u * eu - v * ev) / p[2];
        g[2] = p[0] * 4.0 * (u * u * eu + v * v * ev) / p[2];
        g[3] = 1.0;
    }
}

/// The folded line with its center held at DC: `[A, w, c]`.
struct DcGaussianLine;

impl CurveModel for DcGaussianLine {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, p: &[f64], f: f64) -> f64 {
        FoldedGaussianLine.eval(&[p[0], 0.0, p[1], p[2]], f)
    }

    fn gradient(&self, p: &[f64], f: f64, g: &mut [f64]) {
        let mut full = [0.0; 4];
        FoldedGaussianLine.gradient(&[p[0], 0.0, p[1], p[2]], f, &mut full);
        g.copy_from_slice(&[full[0], full[2], full[3]]);
    }
}

/// Bins below this index are disturbed by mean removal and skipped.
const FIRST_BIN: usize = 2;

/// Fits a Gaussian line to the dominant spectral peak.
///
/// The peak must exceed three times the median level, and no other maximum
/// farther than three widths away may reach half its height.
pub fn fit_gaussian_line(spectrum: &BeatSpectrum) -> Result<LineFit> {
    let psd = &spectrum.psd;
    let freq = &spectrum.frequency_hz;
    if psd.len() < FIRST_BIN + 8 {
        return Err(Error::NoDominantPeak("spectrum has too few bins".into()));
    }
    let mut k0 = FIRST_BIN;
    for k in FIRST_BIN..psd.len() {
        if psd[k] > psd[k0] {
            k0 = k;
        }
    }
    let peak = psd[k0];
    let mut sorted = psd[FIRST_BIN..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[sorted.len() / 2];
    if !(peak > 3.0 * med) {
        return Err(Error::NoDominantPeak(format!("peak {peak:e} is within 3x of the median {med:e}")));
    }

    // Width from the 1/e^2 crossings above the floor.
    let level = med + (peak - med) * (-2f64).exp();
    let mut hi = k0;
    while hi + 1 < psd.len() && psd[hi] > level {
        hi += 1;
    }
    let mut lo = k0;
    while lo > FIRST_BIN && psd[lo] > level {
        lo -= 1;
    }
    let df = freq[1] - freq[0];
    let half_widths: Vec<f64> = [
        (lo > FIRST_BIN || psd[lo] <= level).then(|| freq[k0] - freq[lo]),
        (psd[hi] <= level).then(|| freq[hi] - freq[k0]),
    ]
    .into_iter()
    .flatten()
    .collect();
    let w0 = if half_widths.is_empty() {
        df
    } else {
        (half_widths.iter().sum::<f64>() / half_widths.len() as f64).max(df)
    };

    let f0 = freq[k0];
    let rival = (FIRST_BIN..psd.len())
        .filter(|&k| (freq[k] - f0).abs() > 3.0 * w0)
        .filter(|&k| psd[k] >= psd[k - 1] && (k + 1 == psd.len() || psd[k] >= psd[k + 1]))
        .map(|k| psd[k])
        .fold(0.0f64, f64::max);
    if rival >= 0.5 * peak {
        return Err(Error::NoDominantPeak(format!(
            "secondary maximum {rival:e} reaches {:.0}% of the peak",
            100.0 * rival / peak
        )));
    }

    let sel: Vec<usize> = (FIRST_BIN..psd.len())
        .filter(|&k| (freq[k] - f0).abs() <= 4.0 * w0)
        .collect();
    if sel.len() < 6 {
        return Err(Error::NoDominantPeak(format!("line spans only {} bins", sel.len())));
    }
    // Scaled units: frequency in w0, power in peak.
    let x: Vec<f64> = sel.iter().map(|&k| freq[k] / w0).collect();
    let y: Vec<f64> = sel.iter().map(|&k| psd[k] / peak).collect();
    let w = vec![1.0; sel.len()];
    let floor = med / peak;
    // Within one width of DC the center is unmeasurable and the free fit
    // stalls on that flat direction, so hold it at zero.
    let (params, cov, chi2, converged, n) = if f0 < w0 {
        let p0 = [(1.0 - floor) / 2.0, 1.0, floor];
        let opts = LmOptions::new(vec![1.0; 3]);
        let out = levenberg_marquardt(&DcGaussianLine, &p0, &x, &y, &w, &opts);
        let mut cov = DMatrix::zeros(4, 4);
        for (i, a) in [0, 2, 3].into_iter().enumerate() {
            for (j, b) in [0, 2, 3].into_iter().enumerate() {
                cov[(a, b)] = out.covariance[(i, j)];
            }
        }
        let p = &out.params;
        ([p[0], 0.0, p[1], p[2]], cov, out.chi2, out.converged, 3)
    } else {
        let p0 = [1.0 - floor, f0 / w0, 1.0, floor];
        let opts = LmOptions::new(vec![1.0, 1.0 + f0 / w0, 1.0, 1.0]);
        let out = levenberg_marquardt(&FoldedGaussianLine, &p0, &x, &y, &w, &opts);
        let p = &out.params;
        ([p[0], p[1], p[2], p[3]], out.covariance, out.chi2, out.converged, 4)
    };
    let dof = sel.len() - n;
    let chi2_per_dof = chi2 / dof as f64;
    let var = |i: usize| (cov[(i, i)] * chi2_per_dof).max(0.0);
    Ok(LineFit {
        center_hz: params[1].abs() * w0,
        width_hz: params[2].abs() * w0,
        amplitude: params[0] * peak,
        offset: params[3] * peak,
        center_err_hz: var(1).sqrt() * w0,
        width_err_hz: var(2).sqrt() * w0,
        chi2_per_dof,
        converged,
    })
}

/// Half-width at `1/e^2` of the beat line expected for coherence time `sigma`.
pub fn expected_line_width(sigma: f64) -> f64 {
    1.0 / (PI * sigma)
}
