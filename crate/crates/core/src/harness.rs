//! Monte Carlo driver: trial execution, RMSE aggregation, residual
//! interference sweeps and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::complex_gaussian;
use crate::error::{Error, Result};
use crate::radar::{self, ApStreams};
use crate::scenario::ScenarioConfig;

/// Largest tolerated share of failed (AP, trial) runs.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub ap_id: u32,
    pub target_id: u32,
    pub true_range_m: f64,
    pub est_range_m: f64,
    pub true_rate_mps: f64,
    pub est_rate_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub ap_id: u32,
    pub target_id: u32,
    pub n_trials: usize,
    pub rmse_range_m: f64,
    pub rmse_rate_mps: f64,
    pub bias_range_m: f64,
    pub bias_rate_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub ap_id: u32,
    pub trial: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
    pub n_trials: usize,
    pub failures: Vec<TrialFailure>,
    /// Hex digest identifying the scenario.
    pub run_id: String,
    pub seed: u64,
}

impl RmseReport {
    pub fn median_rmse_range_m(&self) -> f64 {
        median(self.rows.iter().map(|r| r.rmse_range_m))
    }

    pub fn median_rmse_rate_mps(&self) -> f64 {
        median(self.rows.iter().map(|r| r.rmse_rate_mps))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub records: Vec<TrialRecord>,
    pub report: RmseReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub points: Vec<(f64, RmseReport)>,
}

/// Median of the finite values; NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// First 16 hex digits of the SHA-256 of the serialized scenario.
pub fn run_id(cfg: &ScenarioConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml_string().as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

type ApOutcome = std::result::Result<Vec<TrialRecord>, TrialFailure>;

fn run_one_trial(cfg: &ScenarioConfig, trial: u64) -> Vec<ApOutcome> {
    let fail_all = |reason: String| {
        cfg.aps
            .iter()
            .map(|ap| {
                Err(TrialFailure {
                    ap_id: ap.id,
                    trial,
                    reason: reason.clone(),
                })
            })
            .collect()
    };
    let x = match radar::dl_waveform(cfg, trial) {
        Ok(x) => x,
        Err(e) => return fail_all(e.to_string()),
    };
    (0..cfg.aps.len())
        .map(|j| {
            let ap_id = cfg.aps[j].id;
            let attempt = || -> Result<Vec<TrialRecord>> {
                let est = radar::run_ap(j, cfg, &x, trial)?;
                let truth = radar::truth_for_ap(cfg, j)?;
                let assoc = radar::associate_and_error(&est, &truth)?;
                Ok(assoc
                    .iter()
                    .map(|a| {
                        let (r, v) = truth[a.target_index];
                        let e = &est[a.estimate_index];
                        TrialRecord {
                            trial,
                            ap_id,
                            target_id: cfg.targets[a.target_index].id,
                            true_range_m: r,
                            est_range_m: e.range_m,
                            true_rate_mps: v,
                            est_rate_mps: e.range_rate_mps,
                        }
                    })
                    .collect())
            };
            attempt().map_err(|e| TrialFailure {
                ap_id,
                trial,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn aggregate(cfg: &ScenarioConfig, records: &[TrialRecord]) -> Vec<RmseRow> {
    let mut rows = Vec::with_capacity(cfg.aps.len() * cfg.targets.len());
    for ap in &cfg.aps {
        for tgt in &cfg.targets {
            let mut n = 0usize;
            let (mut sr, mut sv, mut qr, mut qv) = (0.0, 0.0, 0.0, 0.0);
            for rec in records
                .iter()
                .filter(|r| r.ap_id == ap.id && r.target_id == tgt.id)
            {
                let er = rec.est_range_m - rec.true_range_m;
                let ev = rec.est_rate_mps - rec.true_rate_mps;
                n += 1;
                sr += er;
                sv += ev;
                qr += er * er;
                qv += ev * ev;
            }
            let nf = n as f64;
            rows.push(RmseRow {
                ap_id: ap.id,
                target_id: tgt.id,
                n_trials: n,
                rmse_range_m: (qr / nf).sqrt(),
                rmse_rate_mps: (qv / nf).sqrt(),
                bias_range_m: sr / nf,
                bias_rate_mps: sv / nf,
            });
        }
    }
    rows
}

/// Runs `n_trials` independent trials of every AP and aggregates per
/// (AP, target). Failing (AP, trial) runs are excluded and listed; more than
/// [`MAX_FAILURE_FRACTION`] of them is an error.
pub fn run_trials(cfg: &ScenarioConfig, n_trials: usize, exec: Execution) -> Result<TrialRun> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    cfg.validate()?;
    if cfg.targets.is_empty() {
        return Err(Error::InvalidArgument("scenario has no targets".into()));
    }
    let trials = 0..n_trials as u64;
    let outcomes: Vec<Vec<ApOutcome>> = match exec {
        Execution::Serial => trials.map(|t| run_one_trial(cfg, t)).collect(),
        Execution::Parallel => trials
            .into_par_iter()
            .map(|t| run_one_trial(cfg, t))
            .collect(),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => records.extend(r),
            Err(f) => failures.push(f),
        }
    }
    let total = n_trials * cfg.aps.len();
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    let rows = aggregate(cfg, &records);
    Ok(TrialRun {
        records,
        report: RmseReport {
            rows,
            n_trials,
            failures,
            run_id: run_id(cfg),
            seed: cfg.seed,
        },
    })
}

/// `run_trials` at each residual INR with everything else, including the
/// seed, held fixed.
pub fn sweep_inr(
    cfg: &ScenarioConfig,
    inr_list_db: &[f64],
    n_trials: usize,
    exec: Execution,
) -> Result<SweepReport> {
    if inr_list_db.is_empty() {
        return Err(Error::InvalidArgument("INR list is empty".into()));
    }
    if inr_list_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "INR list must be strictly increasing".into(),
        ));
    }
    let points = inr_list_db
        .iter()
        .map(|&inr| {
            let point = cfg.with_residual_inr_db(inr);
            run_trials(&point, n_trials, exec).map(|r| (inr, r.report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { points })
}

/// Digest of the thermal noise that AP `ap_index` receives in `trial`.
pub fn noise_fingerprint(cfg: &ScenarioConfig, trial: u64, ap_index: usize) -> Result<String> {
    let map = cfg.subband_map()?;
    let mut streams = ApStreams::new(cfg.seed, trial, ap_index);
    let mut h = Sha256::new();
    for seg in map.dl_segments() {
        for _ in 0..seg.len() * cfg.n_symbols {
            let z = complex_gaussian(&mut streams.rx.noise, 1.0);
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
    Ok(h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Renders with 9 significant digits in the style of C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const TRIALS_HEADER: &str =
    "run_id,trial,ap_id,target_id,true_range_m,est_range_m,true_rate_mps,est_rate_mps";
pub const SUMMARY_HEADER: &str =
    "ap_id,target_id,n_trials,rmse_range_m,rmse_rate_mps,bias_range_m,bias_rate_mps";

pub fn trials_csv(run_id: &str, records: &[TrialRecord]) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{run_id},{},{},{},{},{},{},{}",
            r.trial,
            r.ap_id,
            r.target_id,
            fmt_sig9(r.true_range_m),
            fmt_sig9(r.est_range_m),
            fmt_sig9(r.true_rate_mps),
            fmt_sig9(r.est_rate_mps)
        );
    }
    out
}

fn summary_fields(r: &RmseRow) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.ap_id,
        r.target_id,
        r.n_trials,
        fmt_sig9(r.rmse_range_m),
        fmt_sig9(r.rmse_rate_mps),
        fmt_sig9(r.bias_range_m),
        fmt_sig9(r.bias_rate_mps)
    )
}

pub fn summary_csv(report: &RmseReport) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&summary_fields(r));
        out.push('\n');
    }
    out
}

pub fn sweep_csv(sweep: &SweepReport) -> String {
    let mut out = format!("inr_db,{SUMMARY_HEADER}\n");
    for (inr, report) in &sweep.points {
        for r in &report.rows {
            let _ = writeln!(out, "{},{}", fmt_sig9(*inr), summary_fields(r));
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
