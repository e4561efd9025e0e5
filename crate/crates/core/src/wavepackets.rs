//! Gaussian spatio-temporal modes and two-photon coincidence kernels at a
//! symmetric beamsplitter.
//!
//! Mode A carries the `+dtau/2` time shift and `-delta/2` frequency offset,
//! mode B the opposite signs. The shared optical carrier cancels in every
//! `|.|^2` kernel and is never represented here.
//!
//! The chain of reductions is
//!
//! 1. [`coincidence_kernel_11`]: the (1,1) joint detection density at
//!    detection times `tau0` and `tau0 + tau`, from complex mode arithmetic;
//! 2. [`kernel_closed_form`]: the same density in closed form;
//! 3. [`integrate_over_tau0`]: marginal over the first detection time;
//! 4. [`integrate_over_dtau`]: marginal over the emission delay (CW sources).
//!
//! Steps 3 and 4 keep the printed prefactors of the closed forms, which are
//! not mutually consistent: the quadrature of step 2 over `tau0` equals
//! [`TAU0_MARGINAL_RATIO`] times step 3, and the quadrature of step 3 over
//! `dtau` equals [`DTAU_MARGINAL_RATIO`] times step 4. Downstream code only
//! uses normalized shapes.

use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

use crate::quadrature::{integrate, Quadrature};
use crate::{Error, Result};

/// `(integral of kernel_closed_form over tau0) / integrate_over_tau0`.
pub const TAU0_MARGINAL_RATIO: f64 = 2.0;
/// `(integral of integrate_over_tau0 over dtau) / integrate_over_dtau`.
pub const DTAU_MARGINAL_RATIO: f64 = 0.5;

/// Half-width of the quadrature windows in units of sigma.
pub const WINDOW_SIGMAS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode {
    /// Envelope center (the `+-dtau/2` shift), s.
    pub center_time: f64,
    /// Envelope half-width at 1/e, s.
    pub sigma: f64,
    /// Angular frequency offset from the shared carrier, rad/s.
    pub omega_offset: f64,
}

impl GaussianMode {
    pub fn new(center_time: f64, sigma: f64, omega_offset: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be positive and finite, got {sigma}")));
        }
        if !center_time.is_finite() || !omega_offset.is_finite() {
            return Err(Error::invalid("mode", "center_time and omega_offset must be finite"));
        }
        Ok(Self {
            center_time,
            sigma,
            omega_offset,
        })
    }

    /// Real envelope `epsilon(t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center_time) / self.sigma;
        (PI * self.sigma * self.sigma).powf(-0.25) * (-0.5 * x * x).exp()
    }

    /// Phase `phi(t)` in the convention `xi = epsilon * exp(-j phi)`.
    pub fn phase(&self, t: f64) -> f64 {
        self.omega_offset * t
    }

    /// Complex amplitude `xi(t)`.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.envelope(t), -self.phase(t))
    }

    /// Quadrature of `|xi|^2` over `center +- 10 sigma`.
    pub fn norm_integral(&self, q: &Quadrature) -> f64 {
        let w = 10.0 * self.sigma;
        integrate(
            |t| self.amplitude(t).norm_sqr(),
            self.center_time - w,
            self.center_time + w,
            q,
        )
        .value
    }
}

/// The two input modes for a source pair separated by `delta` (rad/s) with
/// relative emission delay `dtau`.
pub fn mode_pair(sigma: f64, delta: f64, dtau: f64) -> Result<(GaussianMode, GaussianMode)> {
    Ok((
        GaussianMode::new(0.5 * dtau, sigma, -0.5 * delta)?,
        GaussianMode::new(-0.5 * dtau, sigma, 0.5 * delta)?,
    ))
}

/// Complex amplitude of the mode at `t` (free-function form).
pub fn mode_amplitude(mode: &GaussianMode, t: f64) -> Complex64 {
    mode.amplitude(t)
}

/// (1,1) coincidence density from the antisymmetrized amplitude
/// `(1/4)|xi_A(t0+t) xi_B(t0) - xi_A(t0) xi_B(t0+t)|^2`.
pub fn coincidence_kernel_11(a: &GaussianMode, b: &GaussianMode, tau0: f64, tau: f64) -> f64 {
    let t1 = tau0 + tau;
    let amp = a.amplitude(t1) * b.amplitude(tau0) - a.amplitude(tau0) * b.amplitude(t1);
    0.25 * amp.norm_sqr()
}

/// Same density written out in envelopes and phases.
pub fn coincidence_kernel_11_expanded(
    a: &GaussianMode,
    b: &GaussianMode,
    tau0: f64,
    tau: f64,
) -> f64 {
    let t1 = tau0 + tau;
    let (ea0, ea1) = (a.envelope(tau0), a.envelope(t1));
    let (eb0, eb1) = (b.envelope(tau0), b.envelope(t1));
    let phase = a.phase(tau0) - b.phase(tau0) - a.phase(t1) + b.phase(t1);
    0.25 * ea1 * ea1 * eb0 * eb0 + 0.25 * ea0 * ea0 * eb1 * eb1
        - 0.5 * ea0 * eb0 * ea1 * eb1 * phase.cos()
}

/// `exp(log_scale) * (cosh(x) - cos(y))` without overflow or cancellation.
///
/// Near the origin the bracket is rewritten as `2 sinh^2(x/2) + 2 sin^2(y/2)`,
/// which has no cancellation. Away from it the dominant exponential of cosh
/// is folded into the scale so that `cosh` itself is never formed.
pub fn scaled_beat_bracket(log_scale: f64, x: f64, y: f64) -> f64 {
    let ax = x.abs();
    if ax <= 1.0 {
        let sh = (0.5 * x).sinh();
        let sn = (0.5 * y).sin();
        log_scale.exp() * 2.0 * (sh * sh + sn * sn)
    } else {
        let e = (-ax).exp();
        let rest = 1.0 + e * e - 2.0 * y.cos() * e;
        (log_scale + ax - LN_2).exp() * rest
    }
}

/// Closed-form (1,1) density for the Gaussian mode pair.
pub fn kernel_closed_form(sigma: f64, delta: f64, dtau: f64, tau0: f64, tau: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_scale = -(0.5 * dtau * dtau + tau * tau) / s2
        - (2.0 * tau0 * tau0 + 2.0 * tau0 * tau) / s2
        - (2.0 * PI * s2).ln();
    scaled_beat_bracket(log_scale, tau * dtau / s2, tau * delta)
}

/// Marginal over `tau0` with its printed prefactor `sqrt(pi)/(4 sqrt(2) pi sigma)`.
pub fn integrate_over_tau0(sigma: f64, delta: f64, dtau: f64, tau: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_scale = (PI.sqrt() / (4.0 * 2f64.sqrt() * PI * sigma)).ln()
        - tau * tau / (2.0 * s2)
        - dtau * dtau / (2.0 * s2);
    scaled_beat_bracket(log_scale, tau * dtau / s2, tau * delta)
}

/// Quadrature of [`kernel_closed_form`] over `tau0`, on a window of
/// `+-12 sigma` around the integrand's peak at `tau0 = -tau/2`.
pub fn integrate_over_tau0_numeric(sigma: f64, delta: f64, dtau: f64, tau: f64, q: &Quadrature) -> f64 {
    let c = -0.5 * tau;
    let w = WINDOW_SIGMAS * sigma;
    integrate(|t0| kernel_closed_form(sigma, delta, dtau, t0, tau), c - w, c + w, q).value
}

/// Marginal over the emission delay: `(1/2)[1 - exp(-tau^2/(2 sigma^2)) cos(tau delta)]`.
pub fn integrate_over_dtau(sigma: f64, delta: f64, tau: f64) -> f64 {
    let x = tau / sigma;
    let env = (-0.5 * x * x).exp();
    // 1 - env*cos = (1 - env) + 2 env sin^2(y/2), both terms non-negative.
    let sn = (0.5 * tau * delta).sin();
    0.5 * (-(-0.5 * x * x).exp_m1() + 2.0 * env * sn * sn)
}

/// Quadrature of [`integrate_over_tau0`] over `dtau`. The integrand's mass
/// sits at `dtau = +-tau`, so the window is `+-(|tau| + 12 sigma)`, split at
/// zero and at the two lobes.
pub fn integrate_over_dtau_numeric(sigma: f64, delta: f64, tau: f64, q: &Quadrature) -> f64 {
    let w = tau.abs() + WINDOW_SIGMAS * sigma;
    integrate(|d| integrate_over_tau0(sigma, delta, d, tau), -w, w, q).value
}

/// Sampled two-photon coincidence density on a `(tau0, tau)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub tau0_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    /// `values[i][j]` is the density at `(tau0_values[i], tau_values[j])`, 1/s^2.
    pub values: Vec<Vec<f64>>,
}

fn check_increasing(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonIncreasingGrid(name));
    }
    Ok(())
}

impl KernelGrid {
    pub fn sample(
        sigma: f64,
        delta: f64,
        dtau: f64,
        tau0_values: Vec<f64>,
        tau_values: Vec<f64>,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        check_increasing("tau0_values", &tau0_values)?;
        check_increasing("tau_values", &tau_values)?;
        let values = tau0_values
            .iter()
            .map(|&t0| {
                tau_values
                    .iter()
                    .map(|&t| kernel_closed_form(sigma, delta, dtau, t0, t))
                    .collect()
            })
            .collect();
        Ok(Self {
            tau0_values,
            tau_values,
            values,
        })
    }
}
