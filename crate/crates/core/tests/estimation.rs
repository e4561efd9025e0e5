use homspec::beat_oracle::{estimate_spectrum, fit_gaussian_line, synthesize_beat, BeatSynthesisSpec, SpectrumOptions};
use homspec::estimator::{fit_curve, fit_hom_model, FitData, FitOptions, Param};
use homspec::hz_to_rad;
use homspec::rng::derive_seed;
use homspec::simulator::{simulate_scan, uniform_grid, BaselineWindow, DetectorSpec, Engine, ScanConfig};
use homspec::statistics::{BeatModel, GateKernel, SourcePairSpec};

#[test]
fn noiseless_grid_is_recovered() {
    for sigma in [2e-9f64, 5e-9, 10e-9, 20e-9, 50e-9] {
        for delta_hz in [0.0f64, 40e6, 80e6, 120e6, 160e6, 200e6] {
            let delta = hz_to_rad(delta_hz);
            let step = if delta_hz > 0.0 { (sigma / 4.0).min(1.0 / (12.0 * delta_hz)) } else { sigma / 4.0 };
            let points = (14.0 * sigma / step).ceil() as usize + 1;
            let tau = uniform_grid(-7.0 * sigma, 7.0 * sigma, points).unwrap();
            let m = BeatModel::normalized(sigma, delta);
            let y: Vec<f64> = tau.iter().map(|&t| m.eval(t)).collect();
            let data = FitData::new(tau, y, vec![1e-4; points]).unwrap();
            let fit = fit_curve(&data, None, &FitOptions::default()).unwrap();
            let tag = format!("sigma={sigma} delta={delta_hz}");
            assert!(fit.converged, "{tag}");
            assert!((fit.sigma_hat / sigma - 1.0).abs() < 1e-6, "{tag}: sigma {}", fit.sigma_hat);
            assert!((fit.visibility_hat - 0.5).abs() < 5e-7, "{tag}: V {}", fit.visibility_hat);
            assert!((fit.baseline_hat - 1.0).abs() < 1e-6, "{tag}: B {}", fit.baseline_hat);
            if delta_hz == 0.0 {
                assert!(fit.delta_fixed && fit.delta_hat == 0.0, "{tag}: delta {}", fit.delta_hat);
            } else {
                assert!((fit.delta_hat / delta - 1.0).abs() < 1e-6, "{tag}: delta {}", fit.delta_hat);
            }
        }
    }
}

#[test]
fn delta_interval_coverage() {
    let sigma = 10e-9;
    let delta = hz_to_rad(80e6);
    let narrow = DetectorSpec {
        gate_width: 1e-12,
        ..DetectorSpec::default()
    };
    let mut covered = 0;
    for i in 0..100 {
        let cfg = ScanConfig {
            delay_grid: uniform_grid(-6e-8, 6e-8, 81).unwrap(),
            trials_per_point: 3_000_000,
            rng_seed: derive_seed(77, "coverage", i),
            source: SourcePairSpec::new(0.1, sigma, delta).unwrap(),
            detectors: [narrow, narrow],
            engine: Engine::TwoPhotonKernel,
            gate_kernel: GateKernel::Boxcar,
            baseline_window: Some(BaselineWindow::outside(5.0 * sigma)),
        };
        let fit = fit_hom_model(&simulate_scan(&cfg).unwrap(), None).unwrap();
        let se = fit.std_error(Param::Delta).unwrap();
        if (fit.delta_hat - delta).abs() <= se {
            covered += 1;
        }
    }
    assert!((60..=75).contains(&covered), "1-sigma coverage {covered}/100");
}

#[test]
fn beat_center_is_unbiased() {
    let truth = 120e6;
    let centers: Vec<f64> = (0..20)
        .map(|i| {
            let spec = BeatSynthesisSpec {
                delta: hz_to_rad(truth),
                sigma: 20e-9,
                sample_rate_hz: 1.6e9,
                duration_s: 1e-3,
                seed: derive_seed(5, "unbiased", i),
            };
            let x = synthesize_beat(&spec).unwrap();
            let sp = estimate_spectrum(&x, spec.sample_rate_hz, &SpectrumOptions::default()).unwrap();
            fit_gaussian_line(&sp).unwrap().center_hz
        })
        .collect();
    let n = centers.len() as f64;
    let mean = centers.iter().sum::<f64>() / n;
    let sd = (centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - truth).abs() < sd, "mean error {} vs dispersion {sd}", mean - truth);
}
