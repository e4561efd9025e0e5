//! Acceptance run: every criterion at its stated tolerance, one pass/fail
//! line each. Exits non-zero if any criterion outside `KNOWN_RED` fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use homspec::estimator::{fit_hom_model, project_beat, FitData};
use homspec::rng::derive_seed;
use homspec::simulator::{simulate_scan, uniform_grid, BaselineWindow, CoincidenceScan, DetectorSpec, Engine, ScanConfig};
use homspec::statistics::{
    model_coincidence, model_visibility, truncation_tail, truncation_threshold, GateKernel, SourcePairSpec,
};
use homspec::wavepackets::{
    integrate_over_dtau, integrate_over_dtau_numeric, integrate_over_tau0, integrate_over_tau0_numeric,
};
use homspec::{hz_to_rad, quadrature::Quadrature};
use homspec_cli::commands::{self, CompareOutput};
use homspec_cli::ExperimentConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, name: &str, started: Instant, o: &Outcome) {
    println!(
        "criterion {n} [{}] {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

/// Uniform deviate in `[0, 1)` from a derived seed.
fn uniform(seed: u64, label: &str, i: u64) -> f64 {
    (derive_seed(seed, label, i) >> 11) as f64 / (1u64 << 53) as f64
}

fn model_fixed_points() -> Outcome {
    let at_zero = model_coincidence(0.0, 10e-9, 0.0);
    let far = model_coincidence(1e-6, 10e-9, 0.0);
    let far_beat = model_coincidence(2e-6, 10e-9, hz_to_rad(120e6));
    let vis = model_visibility();
    Outcome {
        pass: at_zero == 0.25 && far == 0.5 && far_beat == 0.5 && vis == 0.5,
        detail: format!("P(0,0)={at_zero}, P(|tau|>>sigma)={far}, visibility={vis}"),
    }
}

fn quadrature_chain() -> Outcome {
    let q = Quadrature::default();
    let (mut r0, mut r1) = (Vec::new(), Vec::new());
    for i in 0..100 {
        let u = |k: u64| uniform(2024, "quadrature-chain", 4 * i + k);
        let s = 0.1 + 9.9 * u(0);
        let d = 20.0 * u(1);
        let dt = (10.0 * u(2) - 5.0) * s;
        let t = (10.0 * u(3) - 5.0) * s;
        let a = integrate_over_tau0(s, d, dt, t);
        if a > 1e-280 {
            r0.push(integrate_over_tau0_numeric(s, d, dt, t, &q) / a);
        }
        let b = integrate_over_dtau(s, d, t);
        if b > 1e-280 {
            r1.push(integrate_over_dtau_numeric(s, d, t, &q) / b);
        }
    }
    let spread = |r: &[f64]| r.iter().map(|x| (x / r[0] - 1.0).abs()).fold(0.0, f64::max);
    let (s0, s1) = (spread(&r0), spread(&r1));
    Outcome {
        pass: s0 < 1e-8 && s1 < 1e-8 && r0.len() >= 95 && r1.len() >= 95,
        detail: format!(
            "d tau0: constant {:.12} spread {s0:.1e} over {} draws; d dtau: constant {:.12} spread {s1:.1e} over {} draws",
            r0[0],
            r0.len(),
            r1[0],
            r1.len()
        ),
    }
}

/// `P(N >= 3)` for `N ~ Poisson(2 mu)`, summed term by term.
fn brute_tail(mu: f64) -> f64 {
    let lambda = 2.0 * mu;
    let mut term = (-lambda).exp() * lambda.powi(3) / 6.0;
    let mut sum = 0.0;
    for n in 3..400 {
        sum += term;
        term *= lambda / (n + 1) as f64;
    }
    sum
}

fn truncation_bound() -> Outcome {
    let tail = truncation_tail(0.22);
    let oracle = brute_tail(0.22);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if brute_tail(mid) < 0.01 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = truncation_threshold(0.01).unwrap();
    let tail_ok = (tail - 0.0103).abs() <= 1e-4 && (tail - oracle).abs() < 1e-12;
    let threshold_ok = (threshold - 0.216).abs() <= 1e-3 && (threshold - lo).abs() < 1e-9;
    let mark = |ok: bool| if ok { "ok" } else { "off target" };
    Outcome {
        pass: tail_ok && threshold_ok,
        detail: format!(
            "P(>=3 | mu=0.22)={tail:.6} (oracle {oracle:.6}, target 0.0103 +- 1e-4) {}; \
             threshold mu={threshold:.6} (oracle {lo:.6}, target 0.216 +- 0.001) {}",
            mark(tail_ok),
            mark(threshold_ok)
        ),
    }
}

const SETTINGS: [(f64, f64); 6] = [
    (0.0, 25e-9),
    (40e6, 23e-9),
    (80e6, 21e-9),
    (120e6, 19e-9),
    (160e6, 17e-9),
    (200e6, 15e-9),
];

fn compare_config() -> String {
    let mut toml = String::from(
        r#"
seed = 20241014
engine = "kernel"

[source]
mu = 0.1
sigma_s = 20e-9
delta_hz = 0.0

[detector_m]
efficiency = 0.15
gate_width_s = 1e-12

[detector_n]
efficiency = 0.15
gate_width_s = 1e-12

[scan]
delay_min_s = -1e-7
delay_max_s = 1e-7
points = 401
trials_per_point = 120_000_000

[beat]
duration_s = 4e-3
sample_rate_hz = 1.6e9
segment_length = 4096
overlap = 0.5
"#,
    );
    for (d, s) in SETTINGS {
        let points = (14.0 * s / 0.5e-9).round() as usize + 1;
        toml.push_str(&format!("\n[[compare.settings]]\ndelta_hz = {d:e}\nsigma_s = {s:e}\npoints = {points}\n"));
    }
    toml
}

fn delta_recovery(out: &CompareOutput) -> Outcome {
    let min_counts = out
        .scans
        .iter()
        .flat_map(|s| s.scan.coincidences.iter().copied())
        .min()
        .unwrap();
    let mut pass = min_counts >= 10_000;
    let mut parts = Vec::new();
    for r in &out.report.rows {
        if r.delta_true_hz == 0.0 {
            // Relative error is undefined at zero: require the fit to stay within
            // 3 % of the lowest nonzero setting.
            let ok = r.delta_hom_hz.abs() <= 0.03 * 40e6;
            pass &= ok;
            parts.push(format!("0 MHz: {:.3} MHz{}", r.delta_hom_hz / 1e6, if r.delta_fixed { " (pinned)" } else { "" }));
        } else {
            let rel = (r.delta_hom_hz - r.delta_true_hz).abs() / r.delta_true_hz;
            let tol = if r.delta_true_hz >= 160e6 { 0.005 } else { 0.03 };
            pass &= rel <= tol;
            parts.push(format!("{:.0} MHz: {:.3}%", r.delta_true_hz / 1e6, 100.0 * rel));
        }
    }
    Outcome {
        pass,
        detail: format!("min coincidences/point {min_counts}; {}", parts.join(", ")),
    }
}

fn cross_technique(out: &CompareOutput) -> Outcome {
    let r = &out.report;
    let slope_ok = (r.slope - 1.0).abs() <= 0.01;
    let intercept_ok = r.intercept_hz.abs() <= 2.0 * r.intercept_err_hz;
    let widths: Vec<f64> = r
        .rows
        .iter()
        .filter(|row| !row.rbw_limited)
        .map(|row| (row.width_hom_hz - row.width_esa_hz).abs() / (0.5 * (row.width_hom_hz + row.width_esa_hz)))
        .collect();
    let worst = widths.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: slope_ok && intercept_ok && worst <= 0.05 && widths.len() >= 3,
        detail: format!(
            "slope {:.5} ± {:.5}; intercept {:.3} ± {:.3} MHz; worst width mismatch {:.2}% over {} unlimited rows",
            r.slope,
            r.slope_err,
            r.intercept_hz / 1e6,
            r.intercept_err_hz / 1e6,
            100.0 * worst,
            widths.len()
        ),
    }
}

fn scan_config(engine: Engine, seed: u64, sigma: f64, delta_hz: f64, grid: Vec<f64>, trials: u64, gate: f64) -> ScanConfig {
    let det = DetectorSpec {
        gate_width: gate,
        ..DetectorSpec::default()
    };
    ScanConfig {
        delay_grid: grid,
        trials_per_point: trials,
        rng_seed: seed,
        source: SourcePairSpec::new(0.1, sigma, hz_to_rad(delta_hz)).unwrap(),
        detectors: [det, det],
        engine,
        gate_kernel: GateKernel::Boxcar,
        baseline_window: Some(BaselineWindow::outside(5.0 * sigma)),
    }
}

fn normalized(scan: &CoincidenceScan) -> (&[f64], &[f64]) {
    (scan.normalized.as_deref().unwrap(), scan.norm_err.as_deref().unwrap())
}

fn engine_equivalence() -> Outcome {
    let mut fractions = Vec::new();
    for (i, (delta_hz, sigma)) in [(0.0, 10e-9), (80e6, 10e-9), (200e6, 15e-9)].into_iter().enumerate() {
        let grid = uniform_grid(-7.0 * sigma, 7.0 * sigma, 100).unwrap();
        let seed = derive_seed(6, "engines", i as u64);
        let a = simulate_scan(&scan_config(Engine::TwoPhotonKernel, seed, sigma, delta_hz, grid.clone(), 20_000_000, 1e-12)).unwrap();
        let b = simulate_scan(&scan_config(Engine::SemiclassicalField, seed, sigma, delta_hz, grid, 20_000_000, 1e-12)).unwrap();
        let ((ya, ea), (yb, eb)) = (normalized(&a), normalized(&b));
        let within = (0..ya.len())
            .filter(|&k| (ya[k] - yb[k]).abs() <= 3.0 * ea[k].hypot(eb[k]))
            .count();
        fractions.push(within as f64 / ya.len() as f64);
    }
    let worst = fractions.iter().copied().fold(1.0, f64::min);
    Outcome {
        pass: worst >= 0.95,
        detail: format!(
            "points within combined 3 sigma: {}",
            fractions.iter().map(|f| format!("{:.0}%", 100.0 * f)).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn gate_averaging() -> Outcome {
    let sigma = 40e-9;
    let delta_hz = 200e6;
    let delta = hz_to_rad(delta_hz);
    let grid = uniform_grid(-7.0 * sigma, 7.0 * sigma, 1121).unwrap();
    let run = |gate: f64, label: &str| {
        let cfg = scan_config(Engine::TwoPhotonKernel, derive_seed(7, label, 0), sigma, delta_hz, grid.clone(), 110_000_000, gate);
        simulate_scan(&cfg).unwrap()
    };
    let narrow = fit_hom_model(&run(1e-12, "narrow"), None).unwrap();
    let gated = fit_hom_model(&run(2.5e-9, "half-period"), None).unwrap();
    let ratio = gated.visibility_hat / narrow.visibility_hat;
    let full_gate = 2.0 * PI / delta;
    let full = run(full_gate, "full-period");
    let proj = project_beat(&FitData::from_scan(&full).unwrap(), delta, sigma, 0.0).unwrap();
    let pass = (ratio - 0.637).abs() <= 0.02 && proj.significance_chi2 < homspec::estimator::RELEASE_CHI2;
    Outcome {
        pass,
        detail: format!(
            "T_g=2.5 ns amplitude ratio {ratio:.4} (expected 2/pi = {:.4}); T_g={:.2} ns beat amplitude {:.1e}, chi2(2 dof) {:.2}",
            2.0 / PI,
            full_gate * 1e9,
            proj.amplitude,
            proj.significance_chi2
        ),
    }
}

const SMALL: &str = r#"
seed = 99
[source]
mu = 0.1
sigma_s = 15e-9
delta_hz = 120e6
[detector_m]
gate_width_s = 1e-12
[detector_n]
gate_width_s = 1e-12
[scan]
delay_min_s = -105e-9
delay_max_s = 105e-9
points = 141
trials_per_point = 3_000_000
[beat]
duration_s = 2e-4
sample_rate_hz = 1.6e9
[[compare.settings]]
delta_hz = 40e6
sigma_s = 20e-9
[[compare.settings]]
delta_hz = 120e6
sigma_s = 20e-9
[[compare.settings]]
delta_hz = 200e6
sigma_s = 20e-9
"#;

/// Regular files directly under `dir`, sorted by name.
fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let c = config.to_str().unwrap();
    let run_all = |tag: &str| {
        let d = root.path().join(tag);
        let d = d.to_str().unwrap();
        let cmds: Vec<Vec<String>> = vec![
            vec!["model".into(), "--config".into(), c.into(), "--gate-width".into(), "2.5e-9".into(), "--out".into(), format!("{d}/model.csv")],
            vec!["simulate".into(), "--config".into(), c.into(), "--out".into(), format!("{d}/kernel.csv")],
            vec!["simulate".into(), "--config".into(), c.into(), "--engine".into(), "field".into(), "--out".into(), format!("{d}/field.csv")],
            vec!["fit".into(), format!("{d}/kernel.csv"), "--out".into(), format!("{d}/fit.json")],
            vec!["beat".into(), "--config".into(), c.into(), "--out".into(), format!("{d}/beat")],
            vec!["compare".into(), "--config".into(), c.into(), "--out".into(), format!("{d}/compare")],
        ];
        let mut codes = Vec::new();
        for args in cmds {
            let mut full = vec!["homspec".to_string()];
            full.extend(args);
            codes.push(homspec_cli::main_with(full));
        }
        codes
    };
    let (ca, cb) = (run_all("a"), run_all("b"));
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let mut same = ca.iter().all(|&c| c == 0) && ca == cb;
    let mut compared = 0;
    for sub in ["", "beat", "compare"] {
        let (ta, tb) = (tree(&a.join(sub)), tree(&b.join(sub)));
        compared += ta.len();
        same &= ta == tb;
    }
    Outcome {
        pass: same && compared == 14,
        detail: format!("{compared} artifacts from model/simulate/fit/beat/compare rerun byte-identical: {same}"),
    }
}

/// Criteria whose targets cannot all hold at once. Criterion 3 asks for a
/// tail of 0.0103 at mu = 0.22 and a 1% crossing at mu = 0.216, but the tail
/// is increasing in mu and already below 0.01 at 0.216.
const KNOWN_RED: [usize; 1] = [3];

fn check(n: usize, name: &str, f: fn() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    report(n, name, t, &o);
    o.pass
}

fn main() {
    let mut passed = vec![
        check(1, "model fixed points", model_fixed_points),
        check(2, "quadrature chain", quadrature_chain),
        check(3, "truncation bound", truncation_bound),
    ];

    let t = Instant::now();
    let cfg = ExperimentConfig::parse(&compare_config()).expect("acceptance config");
    let out = commands::compare(&cfg).expect("six-setting comparison");
    let o4 = delta_recovery(&out);
    report(4, "end-to-end delta recovery", t, &o4);
    let o5 = cross_technique(&out);
    report(5, "cross-technique equivalence", t, &o5);
    passed.extend([o4.pass, o5.pass]);

    passed.push(check(6, "engine equivalence", engine_equivalence));
    passed.push(check(7, "gate-averaging limitation", gate_averaging));
    passed.push(check(8, "determinism", determinism));

    let failed: Vec<usize> = (1..).zip(&passed).filter(|(_, p)| !**p).map(|(n, _)| n).collect();
    println!("acceptance: {} of {} criteria passed", passed.len() - failed.len(), passed.len());
    let unexpected: Vec<usize> = failed.iter().copied().filter(|n| !KNOWN_RED.contains(n)).collect();
    if !failed.is_empty() && unexpected.is_empty() {
        println!("acceptance: remaining failures {failed:?} are known and do not fail the run");
    }
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
