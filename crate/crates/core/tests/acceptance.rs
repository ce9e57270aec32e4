//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use sbfd_core::channel::complex_gaussian;
use sbfd_core::esprit::{esprit_phases, periodogram_peaks, smoothed_covariance};
use sbfd_core::grid::{build_map, parse_pattern, validate_numerology, SegmentKind};
use sbfd_core::harness::{self, run_trials, summary_csv, trials_csv, Execution};
use sbfd_core::radar::{self, range_from_phase, ApStreams};
use sbfd_core::rng::{stream, Purpose};
use sbfd_core::scenario::{
    default_scenario, wrap_angle, AccessPoint, ScenarioConfig, Target, SPEED_OF_LIGHT,
};
use sbfd_core::uplink;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn single_target_scenario(range_m: f64, rate_mps: f64, n_antennas: usize) -> ScenarioConfig {
    let mut cfg = default_scenario();
    cfg.aps = vec![AccessPoint {
        id: 0,
        position: [0.0, 0.0],
        n_antennas,
        array_bearing_rad: 0.0,
    }];
    cfg.targets = vec![Target {
        id: 0,
        position: [range_m, 0.0],
        velocity: [rate_mps, 0.0],
        rcs_scale: 1.0,
    }];
    cfg.ues.clear();
    cfg.residual_si_inr_db = f64::NEG_INFINITY;
    cfg
}

fn grid_exactness() -> Outcome {
    let start = Instant::now();
    let fc = parse_pattern("DL:50,GB:3,UL:27,GB:3,DL:50").unwrap();
    let map = build_map(&fc).unwrap();
    let occupied = validate_numerology(&fc, 30e3, 50e6).unwrap();
    let elapsed = start.elapsed();
    let bounds: Vec<(usize, usize)> = map
        .segments
        .iter()
        .map(|s| (s.range.start, s.range.end))
        .collect();
    let ok = map.total_sc == 1596
        && map.sc_count(SegmentKind::Dl) == 1200
        && map.sc_count(SegmentKind::Ul) == 324
        && map.sc_count(SegmentKind::Gb) == 72
        && bounds == [(0, 600), (600, 636), (636, 960), (960, 996), (996, 1596)]
        && occupied == 47.88e6
        && occupied <= 50e6
        && within(elapsed, Duration::from_millis(1));
    outcome(
        ok,
        format!(
            "{} sc, occupied {} MHz, segments {bounds:?}, {elapsed:?}",
            map.total_sc,
            occupied / 1e6
        ),
    )
}

fn noiseless_exactness() -> Outcome {
    let start = Instant::now();
    let mut cfg = single_target_scenario(150.0, -30.0, 4);
    cfg.thermal_noise = false;
    let x = radar::dl_waveform(&cfg, 0).unwrap();
    let shapes_ok = x.iter().all(|g| g.shape() == (600, 14));
    let est = radar::run_ap(0, &cfg, &x, 0).unwrap();
    let elapsed = start.elapsed();
    let dr = (est[0].range_m - 150.0).abs();
    let dv = (est[0].range_rate_mps + 30.0).abs();
    outcome(
        shapes_ok && dr < 1e-6 && dv < 1e-6 && within(elapsed, Duration::from_secs(1)),
        format!("range error {dr:.3e} m, rate error {dv:.3e} m/s, {elapsed:?}"),
    )
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    // One receive element at the calibration distance: the per-element echo
    // SNR equals the configured 10 dB.
    let cfg = single_target_scenario(100.0, 12.0, 1);
    let n_fft = 4096;
    let bin_m = SPEED_OF_LIGHT / (2.0 * cfg.scs_hz) / n_fft as f64;
    let n_trials = 200u64;
    let mut agree = 0;
    for trial in 0..n_trials {
        let x = radar::dl_waveform(&cfg, trial).unwrap();
        let mut streams = ApStreams::new(cfg.seed, trial, 0);
        let y = radar::receive_ap(0, &cfg, &x, &mut streams).unwrap();
        let q = radar::quotient_grid(&y[0], &x[0], &cfg).unwrap();
        let cov = smoothed_covariance(&q.f, cfg.esprit_subarray_freq).unwrap();
        let e = esprit_phases(&cov, 1).unwrap().phases[0];
        let p = periodogram_peaks(&q.f, 1, n_fft).unwrap().phases[0];
        let de = range_from_phase(e, cfg.scs_hz);
        let dp = range_from_phase(p, cfg.scs_hz);
        if wrap_angle(e - p).abs() <= 2.0 * PI / n_fft as f64 && (de - dp).abs() <= bin_m {
            agree += 1;
        }
    }
    let elapsed = start.elapsed();
    let frac = agree as f64 / n_trials as f64;
    outcome(
        frac >= 0.99 && within(elapsed, Duration::from_secs(30)),
        format!("{agree}/{n_trials} within one bin ({bin_m:.4} m), {elapsed:?}"),
    )
}

fn default_scenario_sanity() -> Outcome {
    let start = Instant::now();
    let cfg = default_scenario();
    let run = run_trials(&cfg, cfg.n_trials, Execution::Parallel).unwrap();
    let elapsed = start.elapsed();
    let range_bound = SPEED_OF_LIGHT / (2.0 * 18e6);
    let cpi = cfg.n_symbols as f64 * cfg.symbol_duration_s();
    let rate_bound = SPEED_OF_LIGHT / (2.0 * cfg.carrier_hz * cpi);
    let worst_r = run
        .report
        .rows
        .iter()
        .map(|r| r.rmse_range_m)
        .fold(0.0, f64::max);
    let worst_v = run
        .report
        .rows
        .iter()
        .map(|r| r.rmse_rate_mps)
        .fold(0.0, f64::max);
    let all_trials = run.report.rows.iter().all(|r| r.n_trials == cfg.n_trials);
    outcome(
        cfg.residual_si_inr_db <= -10.0
            && all_trials
            && worst_r < range_bound
            && worst_v < rate_bound
            && within(elapsed, Duration::from_secs(300)),
        format!(
            "INR {} dB, {} trials: worst range RMSE {worst_r:.4} m (< {range_bound:.3}), worst rate RMSE {worst_v:.3} m/s (< {rate_bound:.3}), {elapsed:?}",
            cfg.residual_si_inr_db, cfg.n_trials
        ),
    )
}

fn interference_degradation() -> Outcome {
    let start = Instant::now();
    let cfg = default_scenario();
    let n = cfg.n_trials;
    let grid = [-10.0, -5.0, 0.0, 3.0, 5.0, 10.0];
    let baseline = run_trials(
        &cfg.with_residual_inr_db(f64::NEG_INFINITY),
        n,
        Execution::Parallel,
    )
    .unwrap()
    .report
    .median_rmse_range_m();
    let sweep = harness::sweep_inr(&cfg, &grid, n, Execution::Parallel).unwrap();
    let medians: Vec<f64> = sweep
        .points
        .iter()
        .map(|(_, r)| r.median_rmse_range_m())
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] >= w[0]);

    let op = grid
        .iter()
        .zip(&medians)
        .find(|(_, &m)| m > 2.0 * baseline)
        .map(|(&g, &m)| (g, m));
    let (step_ok, detail) = match op {
        Some((op_db, op_med)) => {
            let doubled_db = op_db + 3.0;
            let doubled = match grid.iter().position(|&g| g == doubled_db) {
                Some(i) => medians[i],
                None => run_trials(
                    &cfg.with_residual_inr_db(doubled_db),
                    n,
                    Execution::Parallel,
                )
                .unwrap()
                .report
                .median_rmse_range_m(),
            };
            (
                doubled > op_med,
                format!(
                    "operating point {op_db} dB ({op_med:.4} m) -> {doubled_db} dB ({doubled:.4} m), increase {:.0}%",
                    100.0 * (doubled / op_med - 1.0)
                ),
            )
        }
        None => (false, "no INR exceeds twice the baseline".to_string()),
    };
    let elapsed = start.elapsed();
    let series: Vec<String> = grid
        .iter()
        .zip(&medians)
        .map(|(g, m)| format!("{g}:{m:.4}"))
        .collect();
    outcome(
        monotone && step_ok && within(elapsed, Duration::from_secs(900)),
        format!(
            "baseline {baseline:.4} m; medians [{}]; {detail}, {elapsed:?}",
            series.join(" ")
        ),
    )
}

fn cisoids(n: usize, s: usize, steps: &[f64], seed: u64) -> DMatrix<Complex64> {
    let mut r = stream(seed, 0, 0, Purpose::EchoPhase);
    let amps: Vec<Vec<Complex64>> = (0..s)
        .map(|_| {
            steps
                .iter()
                .map(|_| Complex64::from_polar(1.0, r.random_range(0.0..2.0 * PI)))
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, s, |k, j| {
        steps
            .iter()
            .zip(&amps[j])
            .map(|(&phi, &a)| a * Complex64::from_polar(1.0, phi * k as f64))
            .sum()
    })
}

fn add_noise(d: &DMatrix<Complex64>, var: f64, seed: u64) -> DMatrix<Complex64> {
    let mut r = stream(seed, 0, 0, Purpose::Noise);
    d.map(|z| z + complex_gaussian(&mut r, var))
}

fn esprit_properties() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();

    for seed in 0..20u64 {
        let d = add_noise(&cisoids(48, 6, &[0.4, -1.1], seed), 0.1, seed);
        let base = esprit_phases(&smoothed_covariance(&d, 16).unwrap(), 2)
            .unwrap()
            .phases;
        let scaled = d.map(|z| z * Complex64::new(3.0, -2.0));
        let s = esprit_phases(&smoothed_covariance(&scaled, 16).unwrap(), 2)
            .unwrap()
            .phases;
        if base.iter().zip(&s).any(|(a, b)| (a - b).abs() > 1e-9) {
            failures.push(format!("scale seed {seed}"));
        }
        let conj = esprit_phases(&smoothed_covariance(&d.map(|z| z.conj()), 16).unwrap(), 2)
            .unwrap()
            .phases;
        let mut negated: Vec<f64> = base.iter().map(|p| -p).collect();
        negated.sort_by(f64::total_cmp);
        if negated.iter().zip(&conj).any(|(a, b)| (a - b).abs() > 1e-9) {
            failures.push(format!("conjugation seed {seed}"));
        }

        let cov = smoothed_covariance(&d, 16).unwrap();
        let herm = (&cov.r - cov.r.adjoint()).norm() / cov.r.norm();
        let l = cov.dim();
        let jr = DMatrix::from_fn(l, l, |i, k| cov.r[(l - 1 - i, l - 1 - k)].conj());
        let persym = (&cov.r - jr).norm() / cov.r.norm();
        let min_eig = nalgebra::SymmetricEigen::new(cov.r.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if herm > 1e-12 || persym > 1e-12 || min_eig < -1e-9 * cov.trace() {
            failures.push(format!("covariance seed {seed}"));
        }
    }

    let two = cisoids(64, 4, &[0.3, -0.3], 99);
    let p = esprit_phases(&smoothed_covariance(&two, 16).unwrap(), 2)
        .unwrap()
        .phases;
    let two_err = (p[0] + 0.3).abs().max((p[1] - 0.3).abs());
    if two_err >= 1e-8 {
        failures.push(format!("two-line error {two_err:.2e}"));
    }

    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, Duration::from_secs(10)),
        format!("two-line error {two_err:.2e}, failures {failures:?}, {elapsed:?}"),
    )
}

fn ul_validation() -> Outcome {
    let start = Instant::now();
    let base = default_scenario();

    let mut quiet = base.clone();
    quiet.ues.truncate(1);
    quiet.thermal_noise = false;
    let ser0 = uplink::evaluate_ul(&quiet, 0, 1).unwrap().ues[0].ser;

    let slots = uplink::slots_for(&base, 100_000).unwrap();
    let mc = uplink::evaluate_ul(&base, 0, slots).unwrap();
    let worst_rel = mc
        .ues
        .iter()
        .map(|u| (u.measured_sinr_linear / u.sinr_linear - 1.0).abs())
        .fold(0.0, f64::max);

    let mut single = base.clone();
    single.ues.truncate(1);
    let ch = uplink::draw_channels(&single, 0).unwrap();
    let h: DVector<Complex64> = DVector::from_iterator(
        ch.channels[0].iter().map(|v| v.len()).sum(),
        ch.channels[0].iter().flat_map(|v| v.iter().cloned()),
    );
    let p = single.ues[0].tx_power;
    let mrc = uplink::post_combining_snr(&h, &h, p).unwrap();
    let mut r = stream(single.seed, 0, 0, Purpose::BeamJitter);
    let beaten = (0..100)
        .filter(|_| {
            let v = uplink::random_unit_vector(h.len(), &mut r);
            uplink::post_combining_snr(&v, &h, p).unwrap() > mrc * (1.0 + 1e-9)
        })
        .count();

    let elapsed = start.elapsed();
    outcome(
        ser0 == 0.0
            && mc.n_resource_elements >= 100_000
            && worst_rel < 0.05
            && beaten == 0
            && within(elapsed, Duration::from_secs(30)),
        format!(
            "noiseless SER {ser0}, worst SINR deviation {:.2}% over {} REs, MRC beaten {beaten}/100, {elapsed:?}",
            100.0 * worst_rel,
            mc.n_resource_elements
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = default_scenario();
    let n = 24;
    let render = |exec| {
        let run = run_trials(&cfg, n, exec).unwrap();
        (
            trials_csv(&run.report.run_id, &run.records),
            summary_csv(&run.report),
        )
    };
    let serial = render(Execution::Serial);
    let parallel = render(Execution::Parallel);
    let again = render(Execution::Parallel);
    let ok = serial == parallel && parallel == again;
    outcome(
        ok,
        format!(
            "{n} trials: trials CSV {} bytes, summary CSV {} bytes, serial == parallel == rerun: {ok}",
            serial.0.len(),
            serial.1.len()
        ),
    )
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("grid exactness", grid_exactness),
        ("noiseless exactness", noiseless_exactness),
        ("oracle agreement", oracle_agreement),
        ("default-scenario sanity", default_scenario_sanity),
        (
            "residual-interference degradation",
            interference_degradation,
        ),
        ("ESPRIT property suite", esprit_properties),
        ("UL validation", ul_validation),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.to_lowercase())
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.to_lowercase().contains(f.as_str()))
        {
            continue;
        }
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
