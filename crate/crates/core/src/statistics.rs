//! Photon-number statistics of a WCS pair and the normalized quantum-beat
//! coincidence model.

use serde::{Deserialize, Serialize};

use crate::quadrature::{integrate, Quadrature};
use crate::{Error, Result};

/// Largest mean photon number per gate for which the two-photon truncation
/// of the model stays at the percent level.
pub const TRUNCATION_MU_BOUND: f64 = 0.22;

/// Same-port (2,0)/(0,2) coincidence probability for CW sources.
pub const SAME_PORT_COINCIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePairSpec {
    /// Mean photons per detection gate, per source.
    pub mu: f64,
    /// Shared wave-packet half-width at 1/e, s.
    pub sigma: f64,
    /// `omega_B - omega_A`, rad/s, stored non-negative.
    pub delta: f64,
    /// Mean optical angular frequency. Record-keeping only.
    #[serde(default)]
    pub omega_mean: f64,
}

impl SourcePairSpec {
    pub fn new(mu: f64, sigma: f64, delta: f64) -> Result<Self> {
        let spec = Self {
            mu,
            sigma,
            delta: delta.abs(),
            omega_mean: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_omega_mean(mut self, omega_mean: f64) -> Self {
        self.omega_mean = omega_mean;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid("delta", format!("must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// True when `mu` exceeds [`TRUNCATION_MU_BOUND`].
    pub fn truncation_warning(&self) -> bool {
        self.mu > TRUNCATION_MU_BOUND
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventClassWeights {
    pub p11: f64,
    pub p20: f64,
    pub p02: f64,
    pub normalizer: f64,
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn factorial(n: u32) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

/// Poisson probability `mu^n e^-mu / n!`.
pub fn poisson_pn(n: u32, mu: f64) -> f64 {
    if n > 20 {
        (n as f64 * mu.ln() - mu - ln_factorial(n)).exp()
    } else {
        mu.powi(n as i32) * (-mu).exp() / factorial(n)
    }
}

/// Probability of the input Fock pair `|m, n>` for two sources of mean `mu`.
pub fn joint_fock_probability(m: u32, n: u32, mu: f64) -> f64 {
    let k = m + n;
    if k > 20 {
        (k as f64 * mu.ln() - 2.0 * mu - ln_factorial(m) - ln_factorial(n)).exp()
    } else {
        mu.powi(k as i32) * (-2.0 * mu).exp() / (factorial(m) * factorial(n))
    }
}

/// `P(m + n >= 3)`: the Poisson(2 mu) mass the two-photon model drops.
pub fn truncation_tail(mu: f64) -> f64 {
    let x = 2.0 * mu;
    if x > 1.0 {
        return 1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x);
    }
    // e^-x * sum_{k>=3} x^k/k!, summed directly to avoid cancellation.
    let mut term = x * x * x / 6.0;
    let mut sum = 0.0;
    let mut k = 3.0;
    while term > sum * 1e-18 {
        sum += term;
        k += 1.0;
        term *= x / k;
    }
    (-x).exp() * sum
}

/// `P(m + n >= 3 | m + n >= 2)`, the conditional alternative to
/// [`truncation_tail`].
pub fn conditional_truncation_tail(mu: f64) -> f64 {
    let x = 2.0 * mu;
    let p2 = (-x).exp() * 0.5 * x * x;
    let tail = truncation_tail(mu);
    tail / (tail + p2)
}

/// Smallest `mu` whose [`truncation_tail`] reaches `level` (bisection).
pub fn truncation_threshold(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while truncation_tail(hi) < level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncation_tail(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-photon event-class weights.
pub fn event_weights(mu: f64) -> EventClassWeights {
    let p11 = mu * mu * (-2.0 * mu).exp();
    let p20 = 0.5 * p11;
    EventClassWeights {
        p11,
        p20,
        p02: p20,
        normalizer: p11 + 2.0 * p20,
    }
}

/// Normalized coincidence probability `1/2 - (1/4) exp(-tau^2/(2 sigma^2)) cos(tau delta)`.
pub fn model_coincidence(tau: f64, sigma: f64, delta: f64) -> f64 {
    let x = tau / sigma;
    0.5 - 0.25 * (-0.5 * x * x).exp() * (tau * delta).cos()
}

/// Visibility `(baseline - minimum) / baseline`.
pub fn visibility(baseline: f64, minimum: f64) -> Result<f64> {
    if baseline == 0.0 || !baseline.is_finite() {
        return Err(Error::ZeroBaseline);
    }
    Ok((baseline - minimum) / baseline)
}

/// Visibility of a sampled curve against a given baseline.
pub fn curve_visibility(values: &[f64], baseline: f64) -> Result<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EmptyGrid);
    }
    visibility(baseline, min)
}

/// Visibility of the unaveraged model at zero mismatch: exactly 1/2.
pub fn model_visibility() -> f64 {
    let baseline = model_coincidence(1e3, 1.0, 0.0);
    let minimum = model_coincidence(0.0, 1.0, 0.0);
    (baseline - minimum) / baseline
}

/// Detector-gate smearing of the delay axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKernel {
    /// Unit-area boxcar of width `T_g`.
    #[default]
    Boxcar,
    /// Two gates of width `T_g`: triangle of base `2 T_g`.
    Triangular,
}

/// Factor multiplying the beat term for `sigma >> T_g`.
pub fn gate_beat_factor(delta: f64, gate_width: f64, kernel: GateKernel) -> f64 {
    let x = 0.5 * delta * gate_width;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    match kernel {
        GateKernel::Boxcar => sinc,
        GateKernel::Triangular => sinc * sinc,
    }
}

/// Coincidence model smeared by a unit-area boxcar of width `gate_width`.
pub fn gate_averaged_model(tau: f64, sigma: f64, delta: f64, gate_width: f64) -> f64 {
    gate_averaged_model_with(tau, sigma, delta, gate_width, GateKernel::Boxcar)
}

pub fn gate_averaged_model_with(
    tau: f64,
    sigma: f64,
    delta: f64,
    gate_width: f64,
    kernel: GateKernel,
) -> f64 {
    if gate_width <= 0.0 {
        return model_coincidence(tau, sigma, delta);
    }
    let q = Quadrature {
        rel_tol: 1e-12,
        initial_pieces: 4,
        ..Quadrature::default()
    };
    let t = gate_width;
    let f = |s: f64| model_coincidence(tau + s, sigma, delta);
    match kernel {
        GateKernel::Boxcar => integrate(f, -0.5 * t, 0.5 * t, &q).value / t,
        GateKernel::Triangular => {
            let w = |s: f64| f(s) * (t - s.abs()) / (t * t);
            integrate(w, -t, 0.0, &q).value + integrate(w, 0.0, t, &q).value
        }
    }
}

/// Nuisance-extended beat model
/// `y = B [1 - V exp(-(tau - tc)^2/(2 sigma^2)) cos((tau - tc) delta + phi)]`.
///
/// `V` is the visibility of the dip; the unnormalized coincidence
/// probability is `B = 1/2, V = 1/2, tc = 0, phi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatModel {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub sigma: f64,
    pub delta: f64,
    pub phase: f64,
}

impl BeatModel {
    pub fn pure(sigma: f64, delta: f64) -> Self {
        Self {
            baseline: 0.5,
            visibility: 0.5,
            center: 0.0,
            sigma,
            delta,
            phase: 0.0,
        }
    }

    /// Baseline-normalized form (`B = 1`).
    pub fn normalized(sigma: f64, delta: f64) -> Self {
        Self {
            baseline: 1.0,
            ..Self::pure(sigma, delta)
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let x = tau - self.center;
        let z = x / self.sigma;
        self.baseline * (1.0 - self.visibility * (-0.5 * z * z).exp() * (x * self.delta + self.phase).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepackets::integrate_over_dtau;
    use std::f64::consts::PI;

    #[test]
    fn poisson_values() {
        assert!((poisson_pn(0, 0.1) - (-0.1f64).exp()).abs() < 1e-16);
        assert!((poisson_pn(0, 0.1) - 0.904_837).abs() < 1e-6);
        let mu = 1e-6;
        assert!((poisson_pn(1, mu) / mu - 1.0).abs() < 2e-6);
        let s: f64 = (0..60).map(|n| poisson_pn(n, 3.7)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        // log-space branch is continuous with the direct branch
        let direct = 3.0f64.powi(21) * (-3.0f64).exp() / factorial(21);
        assert!((poisson_pn(21, 3.0) / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_fock_values() {
        let v = joint_fock_probability(1, 1, 0.1);
        assert!((v - 0.01 * (-0.2f64).exp()).abs() < 1e-17);
        assert!((v - 0.008_187_3).abs() < 1e-7);
        for &mu in &[0.01, 0.1, 0.22, 1.5] {
            let lhs = joint_fock_probability(2, 0, mu) + joint_fock_probability(0, 2, mu);
            assert!((lhs - joint_fock_probability(1, 1, mu)).abs() <= 1e-16 * lhs);
        }
        let s: f64 = (0..40)
            .flat_map(|m| (0..40).map(move |n| (m, n)))
            .map(|(m, n)| joint_fock_probability(m, n, 0.8))
            .sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_tail_is_cubic_for_small_mu() {
        for &mu in &[1e-2, 1e-3, 1e-4] {
            let t = truncation_tail(mu);
            let lead = (2.0 * mu).powi(3) / 6.0;
            assert!((t / lead - 1.0).abs() < 3.0 * mu);
        }
        assert!(truncation_tail(1e-9) > 0.0);
    }

    #[test]
    fn truncation_tail_branches_agree() {
        let a = truncation_tail(0.5);
        let x: f64 = 1.0;
        let b = 1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn conditional_metric_is_larger() {
        let c = conditional_truncation_tail(0.22);
        assert!(c > 0.12 && c < 0.16, "{c}");
    }

    #[test]
    fn weights_identities() {
        let w = event_weights(0.1);
        assert!((w.p11 - 0.008_187_3).abs() < 1e-7);
        assert!((w.p20 - 0.004_093_7).abs() < 1e-7);
        for &mu in &[0.01, 0.1, 0.5, 3.0] {
            let w = event_weights(mu);
            assert_eq!(w.p11 / (w.p20 + w.p02), 1.0);
            assert_eq!(w.p11 / w.normalizer, 0.5);
            assert!((w.normalizer - 2.0 * mu * mu * (-2.0 * mu).exp()).abs() < 1e-16);
        }
    }

    #[test]
    fn model_fixed_points() {
        assert_eq!(model_coincidence(0.0, 1e-8, 0.0), 0.25);
        assert_eq!(model_coincidence(1e-6, 1e-8, 3e8), 0.5);
        let v = model_coincidence(1e-3, 1.0, PI / 1e-3);
        assert!((v - 0.75).abs() < 1e-6);
        assert_eq!(model_visibility(), 0.5);
    }

    #[test]
    fn model_composes_event_classes() {
        for &mu in &[0.01, 0.1, 0.22, 2.0] {
            let w = event_weights(mu);
            for &(t, s, d) in &[(0.0, 1.0, 0.0), (0.3, 1.0, 4.0), (-2.2, 0.7, 9.0)] {
                let composed =
                    (w.p11 * integrate_over_dtau(s, d, t) + (w.p20 + w.p02) * SAME_PORT_COINCIDENCE) / w.normalizer;
                assert!((composed - model_coincidence(t, s, d)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn visibility_errors_on_zero_baseline() {
        assert_eq!(visibility(0.0, 0.0), Err(Error::ZeroBaseline));
        assert_eq!(visibility(0.5, 0.25), Ok(0.5));
        // (1,1) class alone: full suppression
        let v = curve_visibility(&[integrate_over_dtau(1.0, 0.0, 0.0), 0.3], 0.5).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn gate_average_reduces_to_model_and_sinc() {
        assert_eq!(gate_averaged_model(0.3, 1.0, 2.0, 0.0), model_coincidence(0.3, 1.0, 2.0));
        let delta = 2.0 * PI * 200e6;
        let tg = 2.5e-9;
        let sigma = 1e-6;
        let beat = 0.5 - gate_averaged_model(0.0, sigma, delta, tg);
        let factor = beat / 0.25;
        assert!((factor - 2.0 / PI).abs() < 1e-3, "{factor}");
        assert!((gate_beat_factor(delta, tg, GateKernel::Boxcar) - 2.0 / PI).abs() < 1e-12);
        let beat = 0.5 - gate_averaged_model(0.0, sigma, delta, 2.0 * tg);
        assert!((beat / 0.25).abs() < 1e-3);
    }

    #[test]
    fn triangular_kernel_gives_sinc_squared() {
        let delta = 2.0 * PI * 200e6;
        let beat = 0.5 - gate_averaged_model_with(0.0, 1e-6, delta, 2.5e-9, GateKernel::Triangular);
        assert!((beat / 0.25 - 4.0 / (PI * PI)).abs() < 1e-3);
    }

    #[test]
    fn beat_model_pure_point() {
        let m = BeatModel::pure(3e-9, 4e8);
        for &t in &[-5e-9, 0.0, 1e-9, 7e-9] {
            assert!((m.eval(t) - model_coincidence(t, 3e-9, 4e8)).abs() < 1e-15);
        }
    }

    #[test]
    fn source_spec_validation() {
        assert!(SourcePairSpec::new(0.0, 1e-9, 0.0).is_err());
        assert!(SourcePairSpec::new(0.1, 0.0, 0.0).is_err());
        let s = SourcePairSpec::new(0.3, 1e-9, -5.0).unwrap();
        assert_eq!(s.delta, 5.0);
        assert!(s.truncation_warning());
        assert!(!SourcePairSpec::new(0.22, 1e-9, 0.0).unwrap().truncation_warning());
    }
}
