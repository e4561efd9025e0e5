//! Weighted nonlinear least squares by damped Gauss-Newton
//! (Levenberg-Marquardt with Marquardt diagonal scaling).

use nalgebra::{DMatrix, DVector};

/// A model `y = f(params, x)` with an analytic parameter gradient.
pub trait CurveModel {
    fn n_params(&self) -> usize;
    fn eval(&self, params: &[f64], x: f64) -> f64;
    /// Writes `df/dp` into `grad` (length `n_params`).
    fn gradient(&self, params: &[f64], x: f64, grad: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when every `|step_i| <= step_tolerance * (|p_i| + scale_i)`.
    pub step_tolerance: f64,
    /// Absolute floor per parameter for the relative step test; parameters
    /// whose optimum is near zero need one.
    pub scales: Vec<f64>,
    pub initial_lambda: f64,
}

impl LmOptions {
    pub fn new(scales: Vec<f64>) -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-8,
            scales,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(J^T W J)^-1` at the solution; pseudo-inverse when singular.
    pub covariance: DMatrix<f64>,
    pub singular: bool,
}

struct Normal {
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
    chi2: f64,
}

fn normal_equations<M: CurveModel>(model: &M, p: &[f64], x: &[f64], y: &[f64], w: &[f64]) -> Normal {
    let n = model.n_params();
    let mut jtj = DMatrix::zeros(n, n);
    let mut jtr = DVector::zeros(n);
    let mut grad = vec![0.0; n];
    let mut chi2 = 0.0;
    for i in 0..x.len() {
        let r = y[i] - model.eval(p, x[i]);
        model.gradient(p, x[i], &mut grad);
        chi2 += w[i] * r * r;
        for a in 0..n {
            let ga = w[i] * grad[a];
            jtr[a] += ga * r;
            for b in 0..=a {
                jtj[(a, b)] += ga * grad[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[(b, a)] = jtj[(a, b)];
        }
    }
    Normal { jtj, jtr, chi2 }
}

fn chi2_at<M: CurveModel>(model: &M, p: &[f64], x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| {
            let r = yi - model.eval(p, xi);
            wi * r * r
        })
        .sum()
}

/// Covariance `(J^T W J)^-1`, falling back to a pseudo-inverse.
pub fn invert_normal(jtj: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = jtj.nrows();
    // Solve in the diagonally scaled basis so that parameters of very
    // different magnitude (seconds vs rad/s) do not wreck the conditioning.
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)].abs().sqrt()).collect();
    if d.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        let pinv = jtj.clone().pseudo_inverse(1e-300).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
        return (pinv, true);
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let unscale = |m: DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]));
    match scaled.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            let svd = scaled.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            (unscale(inv), smin <= smax * 1e-14)
        }
        None => {
            let pinv = scaled.pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
            (unscale(pinv), true)
        }
    }
}

/// Minimizes `sum w_i (y_i - f(p, x_i))^2` from `p0`. Non-convergence is
/// reported in the outcome, never raised.
pub fn levenberg_marquardt<M: CurveModel>(
    model: &M,
    p0: &[f64],
    x: &[f64],
    y: &[f64],
    w: &[f64],
    opts: &LmOptions,
) -> LmOutcome {
    let n = model.n_params();
    assert_eq!(p0.len(), n);
    assert_eq!(opts.scales.len(), n);
    let mut p = p0.to_vec();
    let mut lambda = opts.initial_lambda;
    let mut normal = normal_equations(model, &p, x, y, w);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut accepted = false;
        // Inner loop: raise damping until the step lowers chi^2.
        while lambda < 1e16 {
            let mut a = normal.jtj.clone();
            for i in 0..n {
                let dii = normal.jtj[(i, i)];
                a[(i, i)] = dii + lambda * if dii > 0.0 { dii } else { 1e-300 };
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&normal.jtr),
                None => match a.lu().solve(&normal.jtr) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(pi, si)| pi + si).collect();
            let chi2 = chi2_at(model, &trial, x, y, w);
            if chi2.is_finite() && chi2 <= normal.chi2 {
                let small = step
                    .iter()
                    .zip(&p)
                    .zip(&opts.scales)
                    .all(|((s, pi), sc)| s.abs() <= opts.step_tolerance * (pi.abs() + sc));
                p = trial;
                normal = normal_equations(model, &p, x, y, w);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No damping level improves chi^2: stationary to working precision.
            converged = true;
            break;
        }
    }

    let (covariance, singular) = invert_normal(&normal.jtj);
    LmOutcome {
        params: p,
        chi2: normal.chi2,
        iterations,
        converged,
        covariance,
        singular,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp;
    impl CurveModel for Exp {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, p: &[f64], x: f64) -> f64 {
            p[0] * (-p[1] * x).exp()
        }
        fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
            let e = (-p[1] * x).exp();
            g[0] = e;
            g[1] = -p[0] * x * e;
        }
    }

    #[test]
    fn recovers_exponential_decay() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|&t| 2.5 * (-1.3 * t).exp()).collect();
        let w = vec![1.0; x.len()];
        let out = levenberg_marquardt(&Exp, &[1.0, 0.5], &x, &y, &w, &LmOptions::new(vec![1.0, 1.0]));
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-9);
        assert!((out.params[1] - 1.3).abs() < 1e-9);
        assert!(!out.singular);
    }

    #[test]
    fn linear_fit_covariance_matches_closed_form() {
        struct Line;
        impl CurveModel for Line {
            fn n_params(&self) -> usize {
                2
            }
            fn eval(&self, p: &[f64], x: f64) -> f64 {
                p[0] + p[1] * x
            }
            fn gradient(&self, _: &[f64], x: f64, g: &mut [f64]) {
                g[0] = 1.0;
                g[1] = x;
            }
        }
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.1, 4.9, 7.2];
        let w = [4.0; 4];
        let out = levenberg_marquardt(&Line, &[0.0, 0.0], &x, &y, &w, &LmOptions::new(vec![1.0, 1.0]));
        // var(slope) = 1 / (w * Sxx) with Sxx = 5
        assert!((out.covariance[(1, 1)] - 1.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design_is_flagged() {
        struct Degenerate;
        impl CurveModel for Degenerate {
            fn n_params(&self) -> usize {
                2
            }
            fn eval(&self, p: &[f64], x: f64) -> f64 {
                (p[0] + p[1]) * x
            }
            fn gradient(&self, _: &[f64], x: f64, g: &mut [f64]) {
                g[0] = x;
                g[1] = x;
            }
        }
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let out = levenberg_marquardt(&Degenerate, &[0.0, 0.0], &x, &y, &[1.0; 3], &LmOptions::new(vec![1.0, 1.0]));
        assert!(out.singular);
        assert!(((out.params[0] + out.params[1]) - 2.0).abs() < 1e-8);
    }
}
