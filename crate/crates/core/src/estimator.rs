//! Quantum-beat model fitting and cross-technique comparison.
//!
//! Scans are fitted with the nuisance-extended beat model of
//! [`BeatModel`](crate::statistics::BeatModel),
//! `y = B [1 - V exp(-(tau - tc)^2/(2 sigma^2)) cos((tau - tc) delta + phi)]`,
//! by damped Gauss-Newton with Poisson weights.

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU as TWO_PI};

use crate::lsq::{invert_normal, levenberg_marquardt, CurveModel, LmOptions, LmOutcome};
use crate::simulator::CoincidenceScan;
use crate::statistics::BeatModel;
use crate::{Error, Result};

/// `chi^2` drop (2 extra parameters, 99.73 %) required before a beat that the
/// DFT could not resolve is released from `delta = 0`.
pub const RELEASE_CHI2: f64 = 11.83;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Baseline,
    Visibility,
    Center,
    Sigma,
    Delta,
    Phase,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::Baseline,
        Param::Visibility,
        Param::Center,
        Param::Sigma,
        Param::Delta,
        Param::Phase,
    ];
}

/// Data prepared for fitting: abscissa, values and one-sigma errors.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub tau: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma_y: Vec<f64>,
}

impl FitData {
    pub fn new(tau: Vec<f64>, y: Vec<f64>, sigma_y: Vec<f64>) -> Result<Self> {
        if tau.len() != y.len() || tau.len() != sigma_y.len() {
            return Err(Error::invalid("fit data", "tau, y and sigma_y lengths differ"));
        }
        if tau.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if sigma_y.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("sigma_y", "errors must be positive"));
        }
        Ok(Self { tau, y, sigma_y })
    }

    /// Normalized values of a scan with Poisson errors
    /// (`sqrt(max(counts, 1)) / baseline`).
    pub fn from_scan(scan: &CoincidenceScan) -> Result<Self> {
        if scan.coincidences.iter().all(|&c| c == 0) {
            return Err(Error::AllZeroCounts);
        }
        let (y, e) = match (&scan.normalized, &scan.norm_err) {
            (Some(y), Some(e)) => (y.clone(), e.clone()),
            _ => return Err(Error::NotNormalized),
        };
        Self::new(scan.delay_grid.clone(), y, e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialGuess {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub sigma: f64,
    /// rad/s; zero means the beat was not resolved from the envelope.
    pub delta: f64,
    pub phase: f64,
}

impl InitialGuess {
    fn to_params(self) -> [f64; 6] {
        [self.baseline, self.visibility, self.center, self.sigma, self.delta, self.phase]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `B, V, tc, sigma, delta, phi` free.
    #[default]
    Full,
    /// Verification mode: `V = 1/2, tc = 0, phi = 0` held; `B, sigma, delta` free.
    Pure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub release_chi2: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Full,
            max_iterations: 200,
            step_tolerance: 1e-8,
            release_chi2: RELEASE_CHI2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub delta_hat: f64,
    pub sigma_hat: f64,
    pub visibility_hat: f64,
    pub baseline_hat: f64,
    pub center_hat: f64,
    pub phase_hat: f64,
    pub free_parameters: Vec<Param>,
    /// Covariance over `free_parameters`, physical units.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub converged: bool,
    pub iterations: usize,
    pub singular: bool,
    /// `delta` (and `phi`) held at zero because no beat was resolved.
    pub delta_fixed: bool,
    pub diagnostics: Vec<String>,
}

impl FitResult {
    pub fn std_error(&self, p: Param) -> Option<f64> {
        let i = self.free_parameters.iter().position(|&q| q == p)?;
        let v = self.covariance[i][i];
        (v >= 0.0).then(|| v.sqrt())
    }

    pub fn model(&self) -> BeatModel {
        BeatModel {
            baseline: self.baseline_hat,
            visibility: self.visibility_hat,
            center: self.center_hat,
            sigma: self.sigma_hat,
            delta: self.delta_hat,
            phase: self.phase_hat,
        }
    }
}

/// The beat model in scaled time units, restricted to a set of free
/// parameters.
struct ScaledBeat {
    fixed: [f64; 6],
    free: Vec<usize>,
}

impl ScaledBeat {
    fn full(&self, p: &[f64]) -> [f64; 6] {
        let mut f = self.fixed;
        for (k, &i) in self.free.iter().enumerate() {
            f[i] = p[k];
        }
        f
    }
}

fn beat_gradient(q: &[f64; 6], x: f64, g: &mut [f64; 6]) -> f64 {
    let [b, v, tc, s, d, ph] = *q;
    let u = x - tc;
    let env = (-0.5 * u * u / (s * s)).exp();
    let arg = u * d + ph;
    let (sn, cs) = arg.sin_cos();
    let y = b * (1.0 - v * env * cs);
    g[0] = 1.0 - v * env * cs;
    g[1] = -b * env * cs;
    g[2] = -b * v * env * (u * cs / (s * s) + sn * d);
    g[3] = -b * v * env * cs * u * u / (s * s * s);
    g[4] = b * v * env * sn * u;
    g[5] = b * v * env * sn;
    y
}

impl CurveModel for ScaledBeat {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn eval(&self, p: &[f64], x: f64) -> f64 {
        let q = self.full(p);
        let mut g = [0.0; 6];
        beat_gradient(&q, x, &mut g)
    }

    fn gradient(&self, p: &[f64], x: f64, grad: &mut [f64]) {
        let q = self.full(p);
        let mut g = [0.0; 6];
        beat_gradient(&q, x, &mut g);
        for (k, &i) in self.free.iter().enumerate() {
            grad[k] = g[i];
        }
    }
}

/// Physical-to-scaled conversion factors: time-like parameters are divided by
/// `t_unit`, delta is multiplied by it.
fn unit_factors(t_unit: f64) -> [f64; 6] {
    [1.0, 1.0, 1.0 / t_unit, 1.0 / t_unit, t_unit, 1.0]
}

struct Attempt {
    params: [f64; 6],
    free: Vec<usize>,
    outcome: LmOutcome,
}

fn run_lm(data: &FitData, t_unit: f64, start: [f64; 6], free: Vec<usize>, opts: &FitOptions) -> Attempt {
    let k = unit_factors(t_unit);
    let scaled_start: [f64; 6] = std::array::from_fn(|i| start[i] * k[i]);
    let x: Vec<f64> = data.tau.iter().map(|t| t / t_unit).collect();
    let w: Vec<f64> = data.sigma_y.iter().map(|s| 1.0 / (s * s)).collect();
    let model = ScaledBeat {
        fixed: scaled_start,
        free: free.clone(),
    };
    let p0: Vec<f64> = free.iter().map(|&i| scaled_start[i]).collect();
    let typical = [1.0, 0.1, 1.0, 1.0, 1.0, 1.0];
    let mut lm = LmOptions::new(free.iter().map(|&i| typical[i]).collect());
    lm.max_iterations = opts.max_iterations;
    lm.step_tolerance = opts.step_tolerance;
    let outcome = levenberg_marquardt(&model, &p0, &x, &data.y, &w, &lm);
    let scaled = model.full(&outcome.params);
    let params = std::array::from_fn(|i| scaled[i] / k[i]);
    // Covariance back to physical units.
    let mut outcome = outcome;
    let n = free.len();
    outcome.covariance = DMatrix::from_fn(n, n, |a, b| outcome.covariance[(a, b)] / (k[free[a]] * k[free[b]]));
    Attempt { params, free, outcome }
}

fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(TWO_PI) - PI;
    if w <= -PI {
        w + TWO_PI
    } else {
        w
    }
}

fn finish(data: &FitData, attempt: Attempt, delta_fixed: bool, mut diagnostics: Vec<String>) -> FitResult {
    let Attempt { mut params, free, outcome } = attempt;
    let mut flip = [1.0; 6];
    if params[3] < 0.0 {
        params[3] = -params[3];
        flip[3] = -1.0;
    }
    if params[4] < 0.0 {
        // cos is even: (delta, phi) -> (-delta, -phi)
        params[4] = -params[4];
        params[5] = -params[5];
        flip[4] = -1.0;
        flip[5] = -1.0;
    }
    if params[1] < 0.0 {
        params[1] = -params[1];
        params[5] += PI;
        flip[1] = -flip[1];
    }
    params[5] = wrap_phase(params[5]);
    let n = free.len();
    let covariance: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| outcome.covariance[(a, b)] * flip[free[a]] * flip[free[b]]).collect())
        .collect();
    let dof = data.tau.len().saturating_sub(n);
    if outcome.singular {
        diagnostics.push("normal equations are singular at the solution; covariance is a pseudo-inverse".into());
    }
    if !outcome.converged {
        diagnostics.push(format!("iteration cap of {} reached", outcome.iterations));
    }
    FitResult {
        baseline_hat: params[0],
        visibility_hat: params[1],
        center_hat: params[2],
        sigma_hat: params[3],
        delta_hat: params[4],
        phase_hat: params[5],
        free_parameters: free.iter().map(|&i| Param::ALL[i]).collect(),
        covariance,
        chi2: outcome.chi2,
        dof,
        chi2_per_dof: if dof > 0 { outcome.chi2 / dof as f64 } else { 0.0 },
        converged: outcome.converged,
        iterations: outcome.iterations,
        singular: outcome.singular,
        delta_fixed,
        diagnostics,
    }
}

/// Fits the beat model to arbitrary data.
///
/// When the starting `delta` is zero (the beat is not resolved from the
/// envelope) the model is first fitted with `delta = phi = 0`; `delta` is then
/// released from a few starting points of order `1/sigma` and kept only if
/// chi^2 drops by more than `opts.release_chi2`.
pub fn fit_curve(data: &FitData, init: Option<InitialGuess>, opts: &FitOptions) -> Result<FitResult> {
    let init = match init {
        Some(g) => g,
        None => initial_guess_data(data, None)?,
    };
    if !(init.sigma > 0.0) {
        return Err(Error::invalid("sigma", "initial sigma must be positive"));
    }
    let mut start = init.to_params();
    let mut free: Vec<usize> = (0..6).collect();
    if opts.mode == FitMode::Pure {
        start[1] = 0.5;
        start[2] = 0.0;
        start[5] = 0.0;
        free = vec![0, 3, 4];
    }
    if data.tau.len() < free.len() {
        return Err(Error::TooFewPoints {
            points: data.tau.len(),
            params: free.len(),
        });
    }
    let t_unit = init.sigma;

    if init.delta != 0.0 {
        let attempt = run_lm(data, t_unit, start, free, opts);
        return Ok(finish(data, attempt, false, Vec::new()));
    }

    let pinned_free: Vec<usize> = free.iter().copied().filter(|&i| i != 4 && i != 5).collect();
    let mut pinned_start = start;
    pinned_start[4] = 0.0;
    pinned_start[5] = 0.0;
    let pinned = run_lm(data, t_unit, pinned_start, pinned_free, opts);
    let sigma_pinned = pinned.params[3].abs();

    let mut best: Option<Attempt> = None;
    for c in [0.5, 1.0, 1.5, 2.0] {
        let mut s = pinned.params;
        s[4] = c / sigma_pinned;
        let a = run_lm(data, t_unit, s, free.clone(), opts);
        if a.outcome.chi2.is_finite() && best.as_ref().is_none_or(|b| a.outcome.chi2 < b.outcome.chi2) {
            best = Some(a);
        }
    }
    match best {
        Some(b) if pinned.outcome.chi2 - b.outcome.chi2 > opts.release_chi2 => {
            let note = format!(
                "beat unresolved by DFT; released delta lowered chi2 by {:.3}",
                pinned.outcome.chi2 - b.outcome.chi2
            );
            Ok(finish(data, b, false, vec![note]))
        }
        _ => Ok(finish(
            data,
            pinned,
            true,
            vec!["no beat resolved: delta and phase held at 0".into()],
        )),
    }
}

/// Fits a baseline-normalized scan.
pub fn fit_hom_model(scan: &CoincidenceScan, init: Option<InitialGuess>) -> Result<FitResult> {
    fit_hom_model_with(scan, init, &FitOptions::default())
}

pub fn fit_hom_model_with(scan: &CoincidenceScan, init: Option<InitialGuess>, opts: &FitOptions) -> Result<FitResult> {
    let data = FitData::from_scan(scan)?;
    let init = match init {
        Some(g) => g,
        None => initial_guess_data(&data, Some(1.0))?,
    };
    fit_curve(&data, Some(init), opts)
}

/// Starting values for a normalized scan (`B0 = 1`).
pub fn initial_guess(scan: &CoincidenceScan) -> Result<InitialGuess> {
    initial_guess_data(&FitData::from_scan(scan)?, Some(1.0))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    let j = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
    let (x0, x1) = (x[j - 1], x[j]);
    let a = (t - x0) / (x1 - x0);
    y[j - 1] + a * (y[j] - y[j - 1])
}

/// Starting values from moments and the DFT of `baseline - y`.
///
/// `baseline` defaults to the median of the outer fifth of the delay span.
/// Non-uniform grids are resampled linearly onto a uniform grid of the same
/// number of points.
pub fn initial_guess_data(data: &FitData, baseline: Option<f64>) -> Result<InitialGuess> {
    let n = data.tau.len();
    if n < 4 {
        return Err(Error::TooFewPoints { points: n, params: 4 });
    }
    let span = data.tau[n - 1] - data.tau[0];
    if !(span > 0.0) {
        return Err(Error::NonIncreasingGrid("tau"));
    }
    let step = span / (n - 1) as f64;
    let uniform = data
        .tau
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step);
    let (x, y, e) = if uniform {
        (data.tau.clone(), data.y.clone(), data.sigma_y.clone())
    } else {
        let x: Vec<f64> = (0..n).map(|i| data.tau[0] + step * i as f64).collect();
        let y = x.iter().map(|&t| interpolate(&data.tau, &data.y, t)).collect();
        let e = x.iter().map(|&t| interpolate(&data.tau, &data.sigma_y, t)).collect();
        (x, y, e)
    };

    let b0 = match baseline {
        Some(b) => b,
        None => {
            let mid = 0.5 * (x[0] + x[n - 1]);
            median(
                x.iter()
                    .zip(&y)
                    .filter(|(t, _)| (**t - mid).abs() >= 0.4 * span)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        }
    };
    if !(b0 > 0.0) {
        return Err(Error::ZeroBaseline);
    }
    let r: Vec<f64> = y.iter().map(|v| b0 - v).collect();

    let max_dev = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chi2_flat = r.iter().zip(&e).map(|(ri, ei)| (ri / ei).powi(2)).sum::<f64>() / n as f64;
    if max_dev <= 1e-12 * b0 || chi2_flat < 2.0 {
        return Err(Error::NothingToFit(format!(
            "data consistent with a constant (chi2/point = {chi2_flat:.3})"
        )));
    }

    // Envelope moments from points that stand out of the noise.
    let w: Vec<f64> = r
        .iter()
        .zip(&e)
        .map(|(ri, ei)| if ri.abs() > 3.0 * ei { ri * ri } else { 0.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::NothingToFit("no point deviates from the baseline by 3 sigma".into()));
    }
    let center = w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>() / sw;
    let var = w.iter().zip(&x).map(|(wi, xi)| wi * (xi - center).powi(2)).sum::<f64>() / sw;
    let sigma = (2.0 * var).sqrt().max(step);
    let peak = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let visibility = (peak / b0).clamp(1e-3, 1.0);

    let delta = dominant_frequency(&r, step)?;
    Ok(InitialGuess {
        baseline: b0,
        visibility,
        center,
        sigma,
        delta,
        phase: 0.0,
    })
}

/// Angular frequency of the dominant DFT peak of `r` (zero-padded 8x with
/// parabolic refinement). Peaks closer to DC than one native bin count as
/// "no beat" and return 0. Ties go to the lower frequency.
fn dominant_frequency(r: &[f64], step: f64) -> Result<f64> {
    let n = r.len();
    let pad = 8;
    let m = (pad * n).next_power_of_two();
    let mut buf: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mag: Vec<f64> = buf[..=m / 2].iter().map(|c| c.norm()).collect();
    let mut k_best = 0;
    for (k, &v) in mag.iter().enumerate() {
        if v > mag[k_best] {
            k_best = k;
        }
    }
    let native_bin = m as f64 / n as f64;
    if (k_best as f64) < native_bin {
        return Ok(0.0);
    }
    let mut k = k_best as f64;
    if k_best + 1 < mag.len() {
        let (a, b, c) = (mag[k_best - 1], mag[k_best], mag[k_best + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            k += 0.5 * (a - c) / denom;
        }
    }
    Ok(TWO_PI * k / (m as f64 * step))
}

/// Beat amplitude at a known frequency and envelope, by weighted linear
/// least squares of `y = b + a g cos(d u) + q g sin(d u)` with
/// `g = exp(-u^2/(2 sigma^2))`, `u = tau - center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatProjection {
    pub baseline: f64,
    pub in_phase: f64,
    pub quadrature: f64,
    /// `sqrt(a^2 + q^2) / b`, comparable to a visibility.
    pub amplitude: f64,
    /// `[a, q] C^-1 [a, q]^T`; chi-square with 2 degrees of freedom under
    /// the zero-beat hypothesis.
    pub significance_chi2: f64,
}

pub fn project_beat(data: &FitData, delta: f64, sigma: f64, center: f64) -> Result<BeatProjection> {
    if data.tau.len() < 3 {
        return Err(Error::TooFewPoints {
            points: data.tau.len(),
            params: 3,
        });
    }
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut aty = DVector::<f64>::zeros(3);
    for i in 0..data.tau.len() {
        let u = data.tau[i] - center;
        let g = (-0.5 * u * u / (sigma * sigma)).exp();
        let row = [1.0, g * (delta * u).cos(), g * (delta * u).sin()];
        let w = 1.0 / (data.sigma_y[i] * data.sigma_y[i]);
        for a in 0..3 {
            aty[a] += w * row[a] * data.y[i];
            for b in 0..3 {
                ata[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let (cov, singular) = invert_normal(&ata);
    if singular {
        return Err(Error::NoConvergence("beat projection design is singular".into()));
    }
    let p = &cov * &aty;
    let sub = DMatrix::from_fn(2, 2, |i, j| cov[(i + 1, j + 1)]);
    let v = DVector::from_vec(vec![p[1], p[2]]);
    let chi2 = match sub.try_inverse() {
        Some(inv) => (v.transpose() * inv * &v)[(0, 0)],
        None => f64::INFINITY,
    };
    Ok(BeatProjection {
        baseline: p[0],
        in_phase: p[1],
        quadrature: p[2],
        amplitude: (p[1].hypot(p[2])) / p[0],
        significance_chi2: chi2,
    })
}

/// `|a - b| / ((a + b) / 2)`.
pub fn relative_error(a: f64, b: f64) -> Result<f64> {
    let mean = 0.5 * (a + b);
    if mean == 0.0 {
        return Err(Error::DegenerateMean(a, b));
    }
    Ok((a - b).abs() / mean.abs())
}

/// Half-width at 1/e^2 of the beat line, Hz, implied by a coherence time.
pub fn width_from_sigma(sigma: f64) -> f64 {
    1.0 / (PI * sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub delta_hom_hz: f64,
    pub delta_esa_hz: f64,
    pub width_hom_hz: f64,
    pub width_esa_hz: f64,
    /// `None` when both values are zero.
    pub rel_err_delta: Option<f64>,
    pub rel_err_width: Option<f64>,
}

impl ComparisonRow {
    /// Builds a row from a HOM fit (`delta` in rad/s, `sigma` in s) and an
    /// ESA line fit (center and half-width at 1/e^2 in Hz).
    pub fn new(delta_hom: f64, sigma_hom: f64, center_esa_hz: f64, width_esa_hz: f64) -> Self {
        let delta_hom_hz = crate::rad_to_hz(delta_hom);
        let width_hom_hz = width_from_sigma(sigma_hom);
        Self {
            delta_hom_hz,
            delta_esa_hz: center_esa_hz,
            width_hom_hz,
            width_esa_hz,
            rel_err_delta: relative_error(delta_hom_hz, center_esa_hz).ok(),
            rel_err_width: relative_error(width_hom_hz, width_esa_hz).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub slope: f64,
    pub intercept_hz: f64,
    pub slope_err: f64,
    pub intercept_err_hz: f64,
}

/// Ordinary least-squares line `delta_hom = slope * delta_esa + intercept`.
pub fn correlate_techniques(rows: Vec<ComparisonRow>) -> Result<ComparisonReport> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::TooFewSettings(n));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.delta_esa_hz).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.delta_hom_hz).collect();
    let nf = n as f64;
    let xm = xs.iter().sum::<f64>() / nf;
    let ym = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("delta_esa_hz", "all settings share one value"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let s2 = rss / (nf - 2.0);
    Ok(ComparisonReport {
        slope,
        intercept_hz: intercept,
        slope_err: (s2 / sxx).sqrt(),
        intercept_err_hz: (s2 * (1.0 / nf + xm * xm / sxx)).sqrt(),
        rows,
    })
}
