//! Monte Carlo coincidence scans for the gated HOM interferometer.
//!
//! SPD M runs on its own gate train; each M click triggers SPD N after the
//! scanned delay. A scan point reports the number of M clicks (heralds) and
//! of joint M/N clicks (coincidences) over `trials_per_point` M gates.
//!
//! Two engines are available:
//!
//! * [`Engine::TwoPhotonKernel`] samples input Fock pairs truncated at two
//!   photons and routes the (1,1) class through the two-photon kernel by
//!   rejection sampling of the emission delay.
//! * [`Engine::SemiclassicalField`] draws the relative phase and a
//!   quasi-static frequency offset of two classical fields, forms the
//!   beamsplitter output intensities and detects them as Poisson light.
//!
//! Both thin the gate population before per-event work, which is what makes
//! 1e8 gates per point affordable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU as TWO_PI;

use crate::rng::{stream, Domain};
use crate::statistics::{GateKernel, SourcePairSpec};
use crate::{Error, Result};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Group index assumed for standard single-mode fiber.
pub const FIBER_GROUP_INDEX: f64 = 1.468;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSpec {
    pub efficiency: f64,
    #[serde(rename = "gate_width_s")]
    pub gate_width: f64,
    #[serde(rename = "gate_rate_hz")]
    pub gate_rate: f64,
    #[serde(default)]
    pub dark_count_prob: f64,
}

impl Default for DetectorSpec {
    /// InGaAs gated SPD: 15 % efficiency, 2.5 ns gates at 1 MHz, no darks.
    fn default() -> Self {
        Self {
            efficiency: 0.15,
            gate_width: 2.5e-9,
            gate_rate: 1e6,
            dark_count_prob: 0.0,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("efficiency", format!("must lie in (0, 1], got {}", self.efficiency)));
        }
        if !(self.gate_width > 0.0) || !self.gate_width.is_finite() {
            return Err(Error::invalid("gate_width", format!("must be positive, got {}", self.gate_width)));
        }
        if !(self.gate_rate > 0.0) || !self.gate_rate.is_finite() {
            return Err(Error::invalid("gate_rate", format!("must be positive, got {}", self.gate_rate)));
        }
        if !(self.dark_count_prob >= 0.0 && self.dark_count_prob < 1.0) {
            return Err(Error::invalid("dark_count_prob", format!("must lie in [0, 1), got {}", self.dark_count_prob)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Engine {
    #[default]
    #[serde(rename = "kernel")]
    TwoPhotonKernel,
    #[serde(rename = "field")]
    SemiclassicalField,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::TwoPhotonKernel => "kernel",
            Engine::SemiclassicalField => "field",
        }
    }
}

/// Delay points used to estimate the uncorrelated coincidence level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineWindow {
    /// Points with `min_abs_delay_s <= |tau|`, and `|tau| <= max_abs_delay_s`
    /// when an upper bound is given.
    Symmetric {
        min_abs_delay_s: f64,
        #[serde(default)]
        max_abs_delay_s: Option<f64>,
    },
    /// Points with `lo_s <= tau <= hi_s`.
    Range { lo_s: f64, hi_s: f64 },
}

impl BaselineWindow {
    pub fn outside(min_abs_delay: f64) -> Self {
        BaselineWindow::Symmetric {
            min_abs_delay_s: min_abs_delay,
            max_abs_delay_s: None,
        }
    }

    pub fn contains(&self, tau: f64) -> bool {
        match *self {
            BaselineWindow::Symmetric {
                min_abs_delay_s,
                max_abs_delay_s,
            } => tau.abs() >= min_abs_delay_s && max_abs_delay_s.is_none_or(|m| tau.abs() <= m),
            BaselineWindow::Range { lo_s, hi_s } => tau >= lo_s && tau <= hi_s,
        }
    }

    /// Whether the window reaches into `|tau| <= 4 sigma`.
    fn overlaps_dip(&self, sigma: f64) -> bool {
        let dip = 4.0 * sigma;
        match *self {
            BaselineWindow::Symmetric { min_abs_delay_s, .. } => min_abs_delay_s <= dip,
            BaselineWindow::Range { lo_s, hi_s } => lo_s <= dip && hi_s >= -dip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub estimate: f64,
    pub std_error: f64,
    pub points: usize,
    pub window: BaselineWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    #[serde(rename = "delay_grid_s")]
    pub delay_grid: Vec<f64>,
    pub trials_per_point: u64,
    pub rng_seed: u64,
    pub source: SourcePairSpec,
    /// `[M, N]`: the free-gated herald detector and the triggered one.
    pub detectors: [DetectorSpec; 2],
    pub engine: Engine,
    #[serde(default)]
    pub gate_kernel: GateKernel,
    /// When set, the scan is normalized before it is returned.
    #[serde(default)]
    pub baseline_window: Option<BaselineWindow>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.delay_grid.iter().any(|t| !t.is_finite()) || self.delay_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonIncreasingGrid("delay_grid"));
        }
        if self.trials_per_point == 0 {
            return Err(Error::ZeroTrials);
        }
        if self.delay_grid.len() as u64 >= 1 << 48 {
            return Err(Error::invalid("delay_grid", "too many points"));
        }
        self.source.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceScan {
    #[serde(rename = "delay_grid_s")]
    pub delay_grid: Vec<f64>,
    pub coincidences: Vec<u64>,
    pub heralds: Vec<u64>,
    /// `coincidences / baseline`, present once a baseline is estimated.
    pub normalized: Option<Vec<f64>>,
    /// Poisson error of `normalized`: `sqrt(max(c, 1)) / baseline`.
    pub norm_err: Option<Vec<f64>>,
    pub baseline: Option<Baseline>,
    pub truncation_warning: bool,
}

impl CoincidenceScan {
    pub fn len(&self) -> usize {
        self.delay_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delay_grid.is_empty()
    }
}

/// Self-heterodyne frequency-offset emulation: a triangular FM sweep seen
/// through a fiber delay, with an amplitude-modulator gate picking the
/// segment where the two arms differ by a constant offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmEmulationSpec {
    /// Modulation depth `A`, Hz.
    #[serde(rename = "mod_depth_hz")]
    pub mod_depth: f64,
    #[serde(rename = "period_s")]
    pub period: f64,
    #[serde(rename = "fiber_delay_s")]
    pub fiber_delay: f64,
    #[serde(rename = "am_gate_width_s")]
    pub am_gate_width: f64,
}

impl FmEmulationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mod_depth", self.mod_depth),
            ("period", self.period),
            ("fiber_delay", self.fiber_delay),
            ("am_gate_width", self.am_gate_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.am_gate_width < 0.5 * self.period) {
            return Err(Error::invalid("am_gate_width", "must be shorter than half the FM period"));
        }
        Ok(())
    }

    /// Duration per ramp during which the two arms keep a constant offset.
    pub fn constant_offset_window(&self) -> f64 {
        (0.5 * self.period - self.fiber_delay).max(0.0)
    }
}

/// Propagation delay of `length_m` of fiber with group index `group_index`.
pub fn fiber_delay(length_m: f64, group_index: f64) -> f64 {
    group_index * length_m / SPEED_OF_LIGHT
}

/// Emulated mismatch `2 pi * 2 A tau / T`, rad/s.
pub fn delta_from_fm(spec: &FmEmulationSpec) -> Result<f64> {
    spec.validate()?;
    Ok(TWO_PI * 2.0 * spec.mod_depth * spec.fiber_delay / spec.period)
}

/// Number of SPD-M clicks in `duration` seconds of free gating with `mu`
/// photons per gate from each source (so `mu` reaches detector M).
pub fn heralded_gate_stream(detector: &DetectorSpec, mu: f64, duration: f64, seed: u64) -> Result<u64> {
    detector.validate()?;
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    if !(mu >= 0.0) {
        return Err(Error::invalid("mu", "must be non-negative"));
    }
    let gates = (duration * detector.gate_rate).round() as u64;
    let p = click_probability(detector, mu);
    let mut rng = stream(seed, Domain::Heralds, 0);
    Ok(binomial(&mut rng, gates, p))
}

/// `1 - (1 - dark) exp(-eta * mean)`.
fn click_probability(d: &DetectorSpec, mean_photons: f64) -> f64 {
    -(1.0 - d.dark_count_prob) * (-d.efficiency * mean_photons).exp() + 1.0
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Sequential-binomial multinomial; `probs` may sum to less than one, the
/// remainder is an implicit last category that is not returned.
fn multinomial<const K: usize>(rng: &mut ChaCha8Rng, n: u64, probs: [f64; K]) -> [u64; K] {
    let mut out = [0; K];
    let mut left = n;
    let mut mass = 1.0;
    for (o, &p) in out.iter_mut().zip(probs.iter()) {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let k = binomial(rng, left, (p / mass).min(1.0));
        *o = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Photon-click pattern counts before dark counts are added.
#[derive(Debug, Default, Clone, Copy)]
struct Patterns {
    m_only: u64,
    n_only: u64,
    both: u64,
}

/// One shot of the delay smearing from finite gates.
fn gate_offset(rng: &mut ChaCha8Rng, kernel: GateKernel, widths: [f64; 2]) -> f64 {
    match kernel {
        GateKernel::Boxcar => {
            let w = widths[0].max(widths[1]);
            w * (rng.random::<f64>() - 0.5)
        }
        GateKernel::Triangular => {
            widths[0] * (rng.random::<f64>() - 0.5) + widths[1] * (rng.random::<f64>() - 0.5)
        }
    }
}

/// Decides whether a (1,1) pair leaves through different ports, given the
/// delay `tau` between the detection windows.
///
/// The target is the joint density in the emission delay `d`,
/// `f(d) = exp(-(tau^2 + d^2)/(2 s^2)) [cosh(tau d / s^2) - cos(tau delta)]`.
/// Because `cosh - cos <= cosh + 1 <= 2 cosh`, it is bounded by
/// `g(d) = exp(-(d - tau)^2/(2 s^2)) + exp(-(d + tau)^2/(2 s^2))`, a two-lobe
/// Gaussian mixture that is sampled exactly. Accepting with `f/g` gives
/// `P(accept) = int f / int g = (1/2)[1 - exp(-tau^2/(2 s^2)) cos(tau delta)]`
/// without any window truncation, for every `tau`.
fn rejection_split(rng: &mut ChaCha8Rng, tau: f64, sigma: f64, delta: f64) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    let lobe = if rng.random::<bool>() { tau } else { -tau };
    let d = lobe + sigma * z;
    let accept = 0.5 * (1.0 - (tau * delta).cos() / (tau * d / (sigma * sigma)).cosh());
    rng.random::<f64>() < accept
}

fn add_darks(rng: &mut ChaCha8Rng, trials: u64, pat: Patterns, det: &[DetectorSpec; 2]) -> (u64, u64) {
    let (dm, dn) = (det[0].dark_count_prob, det[1].dark_count_prob);
    let none = trials - pat.m_only - pat.n_only - pat.both;
    // Vacuum pattern: M needs a dark; N then needs its own dark.
    let none_m = binomial(rng, none, dm);
    let none_mn = binomial(rng, none_m, dn);
    // M-only photons: heralds; N by dark.
    let m_n = binomial(rng, pat.m_only, dn);
    // N-only photons: herald only by an M dark, then coincident.
    let n_m = binomial(rng, pat.n_only, dm);
    let heralds = none_m + pat.m_only + n_m + pat.both;
    let coincidences = none_mn + m_n + n_m + pat.both;
    (coincidences, heralds)
}

/// Both photon thinning helpers share this: `k` gates where exactly one
/// surviving photon reaches the beamsplitter output, at C or D with equal
/// odds regardless of the two-photon routing.
fn single_survivors(rng: &mut ChaCha8Rng, k: u64, r: [f64; 2], pat: &mut Patterns) {
    let [m, n] = multinomial(rng, k, [0.5 * r[0], 0.5 * r[1]]);
    pat.m_only += m;
    pat.n_only += n;
}

fn split_pairs(rng: &mut ChaCha8Rng, k: u64, r: [f64; 2], pat: &mut Patterns) {
    let [both, m, n] = multinomial(rng, k, [r[0] * r[1], r[0] * (1.0 - r[1]), (1.0 - r[0]) * r[1]]);
    pat.both += both;
    pat.m_only += m;
    pat.n_only += n;
}

fn bunched_pairs(rng: &mut ChaCha8Rng, k: u64, r: [f64; 2], pat: &mut Patterns) {
    let at_c = binomial(rng, k, 0.5);
    pat.m_only += binomial(rng, at_c, 1.0 - (1.0 - r[0]).powi(2));
    pat.n_only += binomial(rng, k - at_c, 1.0 - (1.0 - r[1]).powi(2));
}

fn kernel_point(cfg: &ScanConfig, tau: f64, rng: &mut ChaCha8Rng) -> (u64, u64) {
    let src = &cfg.source;
    let det = &cfg.detectors;
    let trials = cfg.trials_per_point;
    let mu = src.mu;

    // Input Fock pairs restricted to m + n <= 2, renormalized.
    let p0 = 1.0;
    let p1 = 2.0 * mu;
    let p2 = 2.0 * mu * mu;
    let z = p0 + p1 + p2;
    let [n1, n2] = multinomial(rng, trials, [p1 / z, p2 / z]);
    // (1,1) carries half of the two-photon weight, (2,0)+(0,2) the other half.
    let n11 = binomial(rng, n2, 0.5);
    let n_same = n2 - n11;

    // Every photon survives with eta_max; survivors reaching a detector with
    // lower efficiency are thinned again by eta / eta_max.
    let eta = det[0].efficiency.max(det[1].efficiency);
    let r = [det[0].efficiency / eta, det[1].efficiency / eta];
    let mut pat = Patterns::default();

    let s1 = binomial(rng, n1, eta);
    single_survivors(rng, s1, r, &mut pat);

    let two = |rng: &mut ChaCha8Rng, k: u64| {
        let [both, one] = multinomial(rng, k, [eta * eta, 2.0 * eta * (1.0 - eta)]);
        (both, one)
    };

    let (same_both, same_one) = two(rng, n_same);
    single_survivors(rng, same_one, r, &mut pat);
    let same_split = binomial(rng, same_both, crate::statistics::SAME_PORT_COINCIDENCE);
    split_pairs(rng, same_split, r, &mut pat);
    bunched_pairs(rng, same_both - same_split, r, &mut pat);

    let (pair_both, pair_one) = two(rng, n11);
    single_survivors(rng, pair_one, r, &mut pat);
    let widths = [det[0].gate_width, det[1].gate_width];
    let mut pair_split = 0;
    for _ in 0..pair_both {
        let t = tau + gate_offset(rng, cfg.gate_kernel, widths);
        if rejection_split(rng, t, src.sigma, src.delta) {
            pair_split += 1;
        }
    }
    split_pairs(rng, pair_split, r, &mut pat);
    bunched_pairs(rng, pair_both - pair_split, r, &mut pat);

    add_darks(rng, trials, pat, det)
}

fn field_point(cfg: &ScanConfig, tau: f64, rng: &mut ChaCha8Rng) -> (u64, u64) {
    let src = &cfg.source;
    let [dm, dn] = &cfg.detectors;
    // Each output carries mean mu (two sources of mu, split in half) times the
    // normalized intensity, which ranges over [0, 2].
    let p_m = |i: f64| click_probability(dm, src.mu * i);
    let p_n = |i: f64| click_probability(dn, src.mu * i);
    let p_max = p_m(2.0);
    let candidates = binomial(rng, cfg.trials_per_point, p_max);
    let widths = [dm.gate_width, dn.gate_width];
    let (mut heralds, mut coincidences) = (0u64, 0u64);
    for _ in 0..candidates {
        let theta = TWO_PI * rng.random::<f64>();
        let i_c = 1.0 + theta.sin();
        if rng.random::<f64>() * p_max >= p_m(i_c) {
            continue;
        }
        heralds += 1;
        // Relative frequency offset of the two fields, quasi-static over the
        // delay: variance 1/sigma^2, i.e. 1/(2 sigma^2) per source.
        let z: f64 = rng.sample(StandardNormal);
        let nu = z / src.sigma;
        let t = tau + gate_offset(rng, cfg.gate_kernel, widths);
        let i_d = 1.0 - (theta + (src.delta + nu) * t).sin();
        if rng.random::<f64>() < p_n(i_d) {
            coincidences += 1;
        }
    }
    (coincidences, heralds)
}

/// Runs the configured scan. Each delay point draws from its own stream, so
/// the output is identical for any thread count.
pub fn simulate_scan(config: &ScanConfig) -> Result<CoincidenceScan> {
    config.validate()?;
    let domain = match config.engine {
        Engine::TwoPhotonKernel => Domain::KernelScan,
        Engine::SemiclassicalField => Domain::FieldScan,
    };
    let counts: Vec<(u64, u64)> = config
        .delay_grid
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = stream(config.rng_seed, domain, i as u64);
            match config.engine {
                Engine::TwoPhotonKernel => kernel_point(config, tau, &mut rng),
                Engine::SemiclassicalField => field_point(config, tau, &mut rng),
            }
        })
        .collect();
    let mut scan = CoincidenceScan {
        delay_grid: config.delay_grid.clone(),
        coincidences: counts.iter().map(|c| c.0).collect(),
        heralds: counts.iter().map(|c| c.1).collect(),
        normalized: None,
        norm_err: None,
        baseline: None,
        truncation_warning: config.source.truncation_warning(),
    };
    if let Some(window) = config.baseline_window {
        estimate_baseline(&mut scan, window, config.source.sigma)?;
    }
    Ok(scan)
}

/// Mean coincidence count over `window`, with its Poisson standard error.
/// Populates `scan.normalized` and `scan.norm_err`.
pub fn estimate_baseline(scan: &mut CoincidenceScan, window: BaselineWindow, sigma: f64) -> Result<Baseline> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    if window.overlaps_dip(sigma) {
        return Err(Error::BaselineWindow(format!(
            "window {window:?} reaches into the dip region |tau| <= 4 sigma = {:e} s",
            4.0 * sigma
        )));
    }
    let selected: Vec<u64> = scan
        .delay_grid
        .iter()
        .zip(&scan.coincidences)
        .filter(|(t, _)| window.contains(**t))
        .map(|(_, &c)| c)
        .collect();
    if selected.is_empty() {
        return Err(Error::BaselineWindow("window contains no delay points".into()));
    }
    if selected.len() < 5 {
        return Err(Error::BaselineWindow(format!(
            "window contains {} points, at least 5 are required",
            selected.len()
        )));
    }
    let n = selected.len() as f64;
    let total: f64 = selected.iter().map(|&c| c as f64).sum();
    let estimate = total / n;
    if estimate <= 0.0 {
        return Err(Error::ZeroBaseline);
    }
    let baseline = Baseline {
        estimate,
        std_error: total.sqrt() / n,
        points: selected.len(),
        window,
    };
    scan.normalized = Some(scan.coincidences.iter().map(|&c| c as f64 / estimate).collect());
    scan.norm_err = Some(
        scan.coincidences
            .iter()
            .map(|&c| (c.max(1) as f64).sqrt() / estimate)
            .collect(),
    );
    scan.baseline = Some(baseline);
    Ok(baseline)
}

/// Uniform delay grid with `points` samples over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::invalid("delay grid", "need hi > lo and at least 2 points"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}
