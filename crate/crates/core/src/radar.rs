//! Per-AP monostatic sensing chain.
//!
//! Each DL sub-band is processed on its own: the received grid is divided by
//! the known transmit symbols, ESPRIT runs once along subcarriers (range) and
//! once along OFDM symbols (Doppler), and the two axes are paired by the
//! assignment that best explains the grid under a least-squares amplitude
//! fit. Sub-band results are then fused by averaging.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::assign::{min_cost_injection, permutations};
use crate::channel::{self, InterferenceSpec, RxStreams};
use crate::error::{Error, Result};
use crate::esprit::{esprit_phases, smoothed_covariance};
use crate::rng::{self, Purpose, SimRng, CPU_NODE};
use crate::scenario::{target_geometry, ScenarioConfig, SPEED_OF_LIGHT};
use crate::signal::{conjugate_beamformer, generate_qpsk_grid, ResourceGrid};

/// Largest model order paired by exhaustive search.
pub const MAX_EXHAUSTIVE_PAIRING: usize = 6;

/// Normalisation scales for matching estimates in (range, range rate).
pub const MATCH_RANGE_SCALE_M: f64 = 10.0;
pub const MATCH_RATE_SCALE_MPS: f64 = 10.0;

/// Sub-band estimates farther apart than this (normalised units) are not
/// averaged.
pub const FUSION_GATE: f64 = 5.0;

const UNIT_MODULUS_GUARD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGrid {
    pub f: DMatrix<Complex64>,
    pub scs_hz: f64,
    pub sym_duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub range_m: f64,
    pub range_rate_mps: f64,
    pub amplitude: Complex64,
}

/// Signed estimation error for one truth entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociatedError {
    /// Index into the truth list.
    pub target_index: usize,
    /// Index into the estimate list.
    pub estimate_index: usize,
    pub range_error_m: f64,
    pub rate_error_mps: f64,
}

/// `F = Y / X` elementwise. Rejects transmit symbols below 0.99 magnitude.
pub fn quotient_grid(
    y: &ResourceGrid,
    x: &ResourceGrid,
    cfg: &ScenarioConfig,
) -> Result<QuotientGrid> {
    if y.shape() != x.shape() {
        return Err(Error::Dimension {
            context: "quotient grid",
            expected: x.shape(),
            found: y.shape(),
        });
    }
    let (rows, cols) = x.shape();
    for m in 0..cols {
        for n in 0..rows {
            let magnitude = x.data[(n, m)].norm();
            if !(magnitude >= UNIT_MODULUS_GUARD) {
                return Err(Error::NonUnitSymbol {
                    row: n,
                    col: m,
                    magnitude,
                });
            }
        }
    }
    Ok(QuotientGrid {
        f: y.data.component_div(&x.data),
        scs_hz: cfg.scs_hz,
        sym_duration_s: cfg.symbol_duration_s(),
    })
}

pub fn range_from_phase(phase: f64, scs_hz: f64) -> f64 {
    let tau = (-phase).rem_euclid(2.0 * PI) / (2.0 * PI * scs_hz);
    SPEED_OF_LIGHT * tau / 2.0
}

pub fn phase_from_range(range_m: f64, scs_hz: f64) -> f64 {
    crate::scenario::wrap_angle(-2.0 * PI * scs_hz * 2.0 * range_m / SPEED_OF_LIGHT)
}

pub fn rate_from_phase(phase: f64, sym_duration_s: f64, carrier_hz: f64) -> f64 {
    let doppler = phase / (2.0 * PI * sym_duration_s);
    -doppler * SPEED_OF_LIGHT / (2.0 * carrier_hz)
}

fn phasor_matrix(len: usize, phases: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(len, phases.len(), |k, t| {
        Complex64::from_polar(1.0, phases[t] * k as f64)
    })
}

/// Outcome of pairing range lines with Doppler lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// `doppler_of[t]` is the Doppler line assigned to range line t.
    pub doppler_of: Vec<usize>,
    pub amplitudes: Vec<Complex64>,
    /// Squared residual `‖F − model‖²` of every candidate, ascending.
    /// Empty when the greedy fallback was used.
    pub residuals: Vec<f64>,
}

struct PairingProblem {
    ga: DMatrix<Complex64>,
    gb: DMatrix<Complex64>,
    /// proj[(t, k)] = a_tᴴ·F·conj(b_k)
    proj: DMatrix<Complex64>,
    energy: f64,
}

impl PairingProblem {
    fn new(f: &DMatrix<Complex64>, range_phases: &[f64], doppler_phases: &[f64]) -> Self {
        let a = phasor_matrix(f.nrows(), range_phases);
        let b = phasor_matrix(f.ncols(), doppler_phases);
        let proj = a.adjoint() * f * b.map(|z| z.conj());
        Self {
            ga: a.adjoint() * &a,
            gb: b.adjoint() * &b,
            proj,
            energy: f.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Least-squares amplitudes and squared residual for one assignment.
    fn fit(&self, doppler_of: &[usize]) -> (Vec<Complex64>, f64) {
        let t = doppler_of.len();
        let gram = DMatrix::from_fn(t, t, |i, j| {
            self.ga[(i, j)] * self.gb[(doppler_of[i], doppler_of[j])]
        });
        let rhs = DVector::from_fn(t, |i, _| self.proj[(i, doppler_of[i])]);
        let alpha = gram
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-12 * gram.norm())
            .unwrap_or_else(|_| DVector::zeros(t));
        let explained: Complex64 = rhs
            .iter()
            .zip(alpha.iter())
            .map(|(r, a)| r.conj() * a)
            .sum();
        let residual = (self.energy - explained.re).max(0.0);
        (alpha.iter().cloned().collect(), residual)
    }
}

/// Pairs every range line with one Doppler line. Exhaustive over all T!
/// assignments up to [`MAX_EXHAUSTIVE_PAIRING`], greedy by normalised
/// rank-one fit strength beyond.
pub fn pair_lines(
    f: &DMatrix<Complex64>,
    range_phases: &[f64],
    doppler_phases: &[f64],
) -> Result<Pairing> {
    let t = range_phases.len();
    if doppler_phases.len() != t {
        return Err(Error::LengthMismatch(format!(
            "{t} range lines vs {} Doppler lines",
            doppler_phases.len()
        )));
    }
    let problem = PairingProblem::new(f, range_phases, doppler_phases);
    if t <= MAX_EXHAUSTIVE_PAIRING {
        let mut scored: Vec<(f64, Vec<usize>, Vec<Complex64>)> = permutations(t)
            .into_iter()
            .map(|p| {
                let (alpha, res) = problem.fit(&p);
                (res, p, alpha)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let residuals = scored.iter().map(|s| s.0).collect();
        let (_, doppler_of, amplitudes) = scored.swap_remove(0);
        Ok(Pairing {
            doppler_of,
            amplitudes,
            residuals,
        })
    } else {
        let cost: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                (0..t)
                    .map(|k| {
                        let strength = problem.proj[(i, k)].norm_sqr()
                            / (problem.ga[(i, i)].re * problem.gb[(k, k)].re);
                        -strength
                    })
                    .collect()
            })
            .collect();
        let doppler_of = min_cost_injection(&cost);
        let (amplitudes, _) = problem.fit(&doppler_of);
        Ok(Pairing {
            doppler_of,
            amplitudes,
            residuals: Vec::new(),
        })
    }
}

/// Range and range-rate estimates of `order` targets from one sub-band,
/// sorted by range.
pub fn estimate_subband(
    q: &QuotientGrid,
    order: usize,
    cfg: &ScenarioConfig,
) -> Result<Vec<TargetEstimate>> {
    if order == 0 {
        return Err(Error::InvalidArgument(
            "model order must be at least 1".into(),
        ));
    }
    let range_cov = smoothed_covariance(&q.f, cfg.esprit_subarray_freq)?;
    let range_phases = esprit_phases(&range_cov, order)?.phases;
    let doppler_cov = smoothed_covariance(&q.f.transpose(), cfg.esprit_subarray_time)?;
    let doppler_phases = esprit_phases(&doppler_cov, order)?.phases;

    let pairing = pair_lines(&q.f, &range_phases, &doppler_phases)?;
    let mut out: Vec<TargetEstimate> = range_phases
        .iter()
        .enumerate()
        .map(|(t, &phi_r)| TargetEstimate {
            range_m: range_from_phase(phi_r, q.scs_hz),
            range_rate_mps: rate_from_phase(
                doppler_phases[pairing.doppler_of[t]],
                q.sym_duration_s,
                cfg.carrier_hz,
            ),
            amplitude: pairing.amplitudes[t],
        })
        .collect();
    sort_estimates(&mut out);
    Ok(out)
}

fn match_distance(a: &TargetEstimate, b: &TargetEstimate) -> f64 {
    let dr = (a.range_m - b.range_m) / MATCH_RANGE_SCALE_M;
    let dv = (a.range_rate_mps - b.range_rate_mps) / MATCH_RATE_SCALE_MPS;
    dr.hypot(dv)
}

fn sort_estimates(v: &mut [TargetEstimate]) {
    v.sort_by(|a, b| {
        a.range_m
            .total_cmp(&b.range_m)
            .then(a.range_rate_mps.total_cmp(&b.range_rate_mps))
    });
}

/// Averages matched estimates of two sub-bands; pairs beyond
/// [`FUSION_GATE`] keep the lower-band value. Output is sorted by range and
/// carries the lower-band amplitude.
pub fn fuse_subbands(
    lower: &[TargetEstimate],
    upper: &[TargetEstimate],
) -> Result<Vec<TargetEstimate>> {
    if lower.len() != upper.len() {
        return Err(Error::LengthMismatch(format!(
            "{} lower-band vs {} upper-band estimates",
            lower.len(),
            upper.len()
        )));
    }
    let cost: Vec<Vec<f64>> = lower
        .iter()
        .map(|l| upper.iter().map(|u| match_distance(l, u).powi(2)).collect())
        .collect();
    let matched = min_cost_injection(&cost);
    let mut fused: Vec<TargetEstimate> = lower
        .iter()
        .zip(&matched)
        .map(|(l, &j)| {
            let u = &upper[j];
            if match_distance(l, u) <= FUSION_GATE {
                TargetEstimate {
                    range_m: 0.5 * (l.range_m + u.range_m),
                    range_rate_mps: 0.5 * (l.range_rate_mps + u.range_rate_mps),
                    amplitude: l.amplitude,
                }
            } else {
                *l
            }
        })
        .collect();
    sort_estimates(&mut fused);
    Ok(fused)
}

/// Assigns estimates to truths `(range_m, range_rate_mps)` by minimum total
/// normalised squared distance. Surplus estimates (model order above the
/// target count) stay unassigned.
pub fn associate_and_error(
    est: &[TargetEstimate],
    truth: &[(f64, f64)],
) -> Result<Vec<AssociatedError>> {
    if est.len() < truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates for {} truths",
            est.len(),
            truth.len()
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&(r, v)| {
            est.iter()
                .map(|e| {
                    ((e.range_m - r) / MATCH_RANGE_SCALE_M).powi(2)
                        + ((e.range_rate_mps - v) / MATCH_RATE_SCALE_MPS).powi(2)
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_injection(&cost);
    Ok(truth
        .iter()
        .zip(assignment)
        .enumerate()
        .map(|(i, (&(r, v), j))| AssociatedError {
            target_index: i,
            estimate_index: j,
            range_error_m: est[j].range_m - r,
            rate_error_mps: est[j].range_rate_mps - v,
        })
        .collect())
}

/// Shared DL transmit grids of one trial, one per DL segment.
pub fn dl_waveform(cfg: &ScenarioConfig, trial: u64) -> Result<Vec<ResourceGrid>> {
    let map = cfg.subband_map()?;
    let mut rng = rng::stream(cfg.seed, trial, CPU_NODE, Purpose::Waveform);
    Ok(map
        .dl_segments()
        .iter()
        .map(|r| generate_qpsk_grid(r.len(), cfg.n_symbols, r.start, &mut rng))
        .collect())
}

/// Random streams of one AP in one trial.
#[derive(Debug, Clone)]
pub struct ApStreams {
    pub rx: RxStreams<SimRng>,
    pub echo_phase: SimRng,
    pub jitter: SimRng,
}

impl ApStreams {
    pub fn new(seed: u64, trial: u64, ap_index: usize) -> Self {
        let node = ap_index as u64;
        Self {
            rx: RxStreams {
                noise: rng::stream(seed, trial, node, Purpose::Noise),
                si: rng::stream(seed, trial, node, Purpose::SelfInterference),
                cli: rng::stream(seed, trial, node, Purpose::CrossLink),
            },
            echo_phase: rng::stream(seed, trial, node, Purpose::EchoPhase),
            jitter: rng::stream(seed, trial, node, Purpose::BeamJitter),
        }
    }
}

/// True (range, range rate) of every target seen from AP `ap_index`.
pub fn truth_for_ap(cfg: &ScenarioConfig, ap_index: usize) -> Result<Vec<(f64, f64)>> {
    let ap = &cfg.aps[ap_index];
    cfg.targets
        .iter()
        .map(|t| target_geometry(ap, t).map(|g| (g.range_m, g.range_rate_mps)))
        .collect()
}

/// AP received DL grids for one trial (exposed for diagnostics and tests).
pub fn receive_ap(
    ap_index: usize,
    cfg: &ScenarioConfig,
    x: &[ResourceGrid],
    streams: &mut ApStreams,
) -> Result<Vec<ResourceGrid>> {
    if cfg.targets.is_empty() {
        return Err(Error::InvalidArgument("no targets to sense".into()));
    }
    let ap = cfg
        .aps
        .get(ap_index)
        .ok_or_else(|| Error::InvalidArgument(format!("AP index {ap_index} out of range")))?;
    let mut angles = Vec::with_capacity(cfg.targets.len());
    for t in &cfg.targets {
        angles.push(target_geometry(ap, t)?.bearing_rad);
    }
    if cfg.beam_angle_jitter_rad > 0.0 {
        let jitter = Normal::new(0.0, cfg.beam_angle_jitter_rad)
            .map_err(|e| Error::field("beam_angle_jitter_rad", e.to_string()))?;
        for a in &mut angles {
            *a += jitter.sample(&mut streams.jitter);
        }
    }
    let beam = conjugate_beamformer(&angles, ap.n_antennas)?;
    let echoes = cfg
        .targets
        .iter()
        .map(|t| channel::echo_params(ap, t, cfg, &beam, &mut streams.echo_phase))
        .collect::<Result<Vec<_>>>()?;
    let interf = InterferenceSpec::from_config(cfg);
    channel::synthesize_dl_rx(ap_index, cfg, x, &echoes, &interf, &mut streams.rx)
}

/// Full monostatic chain of one AP in one trial.
pub fn run_ap(
    ap_index: usize,
    cfg: &ScenarioConfig,
    x: &[ResourceGrid],
    trial: u64,
) -> Result<Vec<TargetEstimate>> {
    let mut streams = ApStreams::new(cfg.seed, trial, ap_index);
    let rx = receive_ap(ap_index, cfg, x, &mut streams)?;
    let order = cfg.effective_model_order();
    let mut per_band = Vec::with_capacity(rx.len());
    for (y, xs) in rx.iter().zip(x) {
        let q = quotient_grid(y, xs, cfg)?;
        per_band.push(estimate_subband(&q, order, cfg)?);
    }
    let mut bands = per_band.into_iter();
    let first = bands
        .next()
        .ok_or_else(|| Error::InvalidArgument("no DL segments".into()))?;
    bands.try_fold(first, |acc, next| fuse_subbands(&acc, &next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{delay_for_range, doppler_for_rate, EchoParams};
    use crate::rng::stream;
    use crate::scenario::{default_scenario, CliMode};

    fn est(r: f64, v: f64) -> TargetEstimate {
        TargetEstimate {
            range_m: r,
            range_rate_mps: v,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    fn quotient_of(
        cfg: &ScenarioConfig,
        echoes: &[(f64, f64, Complex64)],
        rows: usize,
    ) -> QuotientGrid {
        let f = DMatrix::from_fn(rows, cfg.n_symbols, |n, m| {
            echoes
                .iter()
                .map(|&(r, v, a)| {
                    let tau = delay_for_range(r);
                    let fd = doppler_for_rate(v, cfg.carrier_hz);
                    a * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * cfg.scs_hz * tau)
                        * Complex64::from_polar(
                            1.0,
                            2.0 * PI * m as f64 * cfg.symbol_duration_s() * fd,
                        )
                })
                .sum()
        });
        QuotientGrid {
            f,
            scs_hz: cfg.scs_hz,
            sym_duration_s: cfg.symbol_duration_s(),
        }
    }

    #[test]
    fn quotient_examples() {
        let cfg = default_scenario();
        let mut r = stream(1, 0, 0, Purpose::Waveform);
        let x = generate_qpsk_grid(20, 14, 0, &mut r);
        let q = quotient_grid(&x, &x, &cfg).unwrap();
        assert!(q
            .f
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let y = ResourceGrid {
            data: x.data.map(|z| z * Complex64::new(0.0, 2.0)),
            base_sc: 0,
        };
        let q = quotient_grid(&y, &x, &cfg).unwrap();
        assert!(q
            .f
            .iter()
            .all(|z| (z - Complex64::new(0.0, 2.0)).norm() < 1e-12));

        let mut bad = x.clone();
        bad.data[(3, 4)] *= 0.5;
        assert!(matches!(
            quotient_grid(&x, &bad, &cfg),
            Err(Error::NonUnitSymbol { row: 3, col: 4, .. })
        ));
        assert!(quotient_grid(&ResourceGrid::zeros(3, 14, 0), &x, &cfg).is_err());
    }

    #[test]
    fn quotient_preserves_noise_variance() {
        let cfg = default_scenario();
        let mut r = stream(2, 0, 0, Purpose::Waveform);
        let mut noise = stream(2, 0, 0, Purpose::Noise);
        let x = generate_qpsk_grid(7200, 14, 0, &mut r);
        let h = Complex64::new(0.7, -0.2);
        let y = ResourceGrid {
            data: x
                .data
                .map(|s| h * s + channel::complex_gaussian(&mut noise, 1.0)),
            base_sc: 0,
        };
        let q = quotient_grid(&y, &x, &cfg).unwrap();
        let var = q.f.iter().map(|z| (z - h).norm_sqr()).sum::<f64>() / q.f.len() as f64;
        assert!(q.f.len() >= 100_000);
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn phase_range_round_trip() {
        let cfg = default_scenario();
        let r_max = cfg.unambiguous_range_m();
        assert!((r_max - 4996.541).abs() < 1e-2);
        for &r in &[0.0, 1.0, 150.0, 2500.0, 4996.0] {
            let back = range_from_phase(phase_from_range(r, cfg.scs_hz), cfg.scs_hz);
            assert!((back - r).abs() <= 1e-9 * r.max(1.0), "{r} -> {back}");
        }
        let v = rate_from_phase(PI, cfg.symbol_duration_s(), cfg.carrier_hz);
        assert!((v.abs() - cfg.unambiguous_rate_mps()).abs() < 1e-9);
    }

    #[test]
    fn single_target_noiseless() {
        let cfg = default_scenario();
        let q = quotient_of(&cfg, &[(150.0, -30.0, Complex64::new(0.8, 0.3))], 600);
        let e = estimate_subband(&q, 1, &cfg).unwrap();
        assert!((e[0].range_m - 150.0).abs() < 1e-6, "{}", e[0].range_m);
        assert!(
            (e[0].range_rate_mps + 30.0).abs() < 1e-6,
            "{}",
            e[0].range_rate_mps
        );
        assert!((e[0].amplitude - Complex64::new(0.8, 0.3)).norm() < 1e-9);
    }

    #[test]
    fn zero_grid_fails() {
        let cfg = default_scenario();
        let q = QuotientGrid {
            f: DMatrix::zeros(600, 14),
            scs_hz: cfg.scs_hz,
            sym_duration_s: cfg.symbol_duration_s(),
        };
        assert!(matches!(
            estimate_subband(&q, 1, &cfg),
            Err(Error::Estimator(_))
        ));
    }

    #[test]
    fn two_targets_pairing_is_unique() {
        let cfg = default_scenario();
        let truth = [
            (90.0, 20.0, Complex64::new(1.0, 0.0)),
            (210.0, -15.0, Complex64::new(0.2, 0.6)),
        ];
        let q = quotient_of(&cfg, &truth, 600);
        let e = estimate_subband(&q, 2, &cfg).unwrap();
        assert!(
            (e[0].range_m - 90.0).abs() < 1e-5 && (e[0].range_rate_mps - 20.0).abs() < 1e-5,
            "{e:?}"
        );
        assert!(
            (e[1].range_m - 210.0).abs() < 1e-5 && (e[1].range_rate_mps + 15.0).abs() < 1e-5,
            "{e:?}"
        );

        let range_phases: Vec<f64> = truth
            .iter()
            .map(|t| phase_from_range(t.0, cfg.scs_hz))
            .collect();
        let doppler_phases: Vec<f64> = truth
            .iter()
            .rev()
            .map(|t| 2.0 * PI * cfg.symbol_duration_s() * doppler_for_rate(t.1, cfg.carrier_hz))
            .collect();
        let p = pair_lines(&q.f, &range_phases, &doppler_phases).unwrap();
        assert_eq!(p.doppler_of, vec![1, 0]);
        assert_eq!(p.residuals.len(), 2);
        assert!(p.residuals[1] > 1e3 * p.residuals[0].max(1e-300));
    }

    #[test]
    fn scaled_grid_gives_same_estimates() {
        let cfg = default_scenario();
        let mut q = quotient_of(
            &cfg,
            &[
                (120.0, 8.0, Complex64::new(1.0, 0.0)),
                (160.0, -20.0, Complex64::new(0.5, 0.0)),
            ],
            600,
        );
        let mut noise = stream(3, 0, 0, Purpose::Noise);
        q.f.apply(|z| *z += channel::complex_gaussian(&mut noise, 0.01));
        let a = estimate_subband(&q, 2, &cfg).unwrap();
        let scaled = QuotientGrid {
            f: q.f.map(|z| z * Complex64::new(2.0, 1.0)),
            ..q.clone()
        };
        let b = estimate_subband(&scaled, 2, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.range_m - y.range_m).abs() < 1e-9);
            assert!((x.range_rate_mps - y.range_rate_mps).abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_examples() {
        let a = vec![est(50.0, 3.0), est(120.0, -8.0), est(200.0, 15.0)];
        assert_eq!(fuse_subbands(&a, &a).unwrap(), a);

        let mut up = a.clone();
        up[1].range_m += 0.2;
        let mut lo = a.clone();
        lo[1].range_m -= 0.2;
        let f = fuse_subbands(&lo, &up).unwrap();
        assert!((f[1].range_m - 120.0).abs() < 1e-12);

        let permuted = vec![a[2], a[0], a[1]];
        assert_eq!(fuse_subbands(&permuted, &a).unwrap(), a);
        assert_eq!(fuse_subbands(&a, &permuted).unwrap(), a);

        // Far outlier keeps the lower-band value.
        let far = vec![est(50.0, 3.0), est(120.0, -8.0), est(900.0, 15.0)];
        let f = fuse_subbands(&a, &far).unwrap();
        assert_eq!(f[2], a[2]);

        assert!(fuse_subbands(&a, &a[..2]).is_err());
    }

    #[test]
    fn association_examples() {
        let truth = vec![(50.0, 3.0), (120.0, -8.0), (200.0, 15.0)];
        let est_perm = vec![est(200.0, 15.0), est(50.0, 3.0), est(120.0, -8.0)];
        let e = associate_and_error(&est_perm, &truth).unwrap();
        assert_eq!(
            e.iter().map(|x| x.estimate_index).collect::<Vec<_>>(),
            vec![1, 2, 0]
        );
        assert!(e
            .iter()
            .all(|x| x.range_error_m == 0.0 && x.rate_error_mps == 0.0));

        let shifted: Vec<_> = truth.iter().map(|&(r, v)| est(r + 1.0, v)).collect();
        let e = associate_and_error(&shifted, &truth).unwrap();
        assert!(e.iter().all(|x| (x.range_error_m - 1.0).abs() < 1e-12));

        assert!(associate_and_error(&shifted[..2], &truth).is_err());
    }

    #[test]
    fn association_near_swap_matches_enumeration() {
        // Truths 3 m apart; each estimate sits 1 m from the other truth.
        let truth = vec![(100.0, 0.0), (103.0, 0.0)];
        let est_list = vec![est(102.0, 0.0), est(101.0, 0.0)];
        let cost = |p: [usize; 2]| {
            (0..2)
                .map(|i| {
                    ((est_list[p[i]].range_m - truth[i].0) / 10.0).powi(2)
                        + ((est_list[p[i]].range_rate_mps - truth[i].1) / 10.0).powi(2)
                })
                .sum::<f64>()
        };
        let oracle = if cost([0, 1]) <= cost([1, 0]) {
            [0, 1]
        } else {
            [1, 0]
        };
        let e = associate_and_error(&est_list, &truth).unwrap();
        assert_eq!([e[0].estimate_index, e[1].estimate_index], oracle);
    }

    #[test]
    fn default_scenario_noiseless_is_exact() {
        let mut cfg = default_scenario();
        cfg.thermal_noise = false;
        cfg.residual_si_inr_db = f64::NEG_INFINITY;
        let x = dl_waveform(&cfg, 0).unwrap();
        for j in 0..cfg.aps.len() {
            let e = run_ap(j, &cfg, &x, 0).unwrap();
            let truth = truth_for_ap(&cfg, j).unwrap();
            for a in associate_and_error(&e, &truth).unwrap() {
                assert!(a.range_error_m.abs() < 1e-4, "AP {j}: {a:?}");
                assert!(a.rate_error_mps.abs() < 1e-4, "AP {j}: {a:?}");
            }
        }
    }

    #[test]
    fn empty_target_list_rejected() {
        let mut cfg = default_scenario();
        cfg.targets.clear();
        let x = dl_waveform(&cfg, 0).unwrap();
        assert!(run_ap(0, &cfg, &x, 0).is_err());
    }

    #[test]
    fn structured_cli_bias_shrinks_with_extra_order() {
        // One target, two APs; strong CLI from the neighbour.
        let mut cfg = default_scenario();
        cfg.aps.truncate(2);
        cfg.targets.truncate(1);
        cfg.thermal_noise = true;
        cfg.cli_mode = CliMode::Structured;
        cfg.residual_si_inr_db = 0.0;
        let truth = truth_for_ap(&cfg, 0).unwrap();
        let median_err = |cfg: &ScenarioConfig| {
            let mut errs: Vec<f64> = (0..20)
                .map(|trial| {
                    let x = dl_waveform(cfg, trial).unwrap();
                    let e = run_ap(0, cfg, &x, trial).unwrap();
                    associate_and_error(&e, &truth).unwrap()[0]
                        .range_error_m
                        .abs()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let mut no_cli = cfg.clone();
        no_cli.cli_mode = CliMode::Off;
        let baseline = median_err(&no_cli);
        let biased = median_err(&cfg);
        let mut wider = cfg.clone();
        wider.model_order = Some(2);
        let corrected = median_err(&wider);
        assert!(biased > baseline, "biased {biased} vs baseline {baseline}");
        assert!(
            corrected < biased,
            "corrected {corrected} vs biased {biased}"
        );
    }

    #[test]
    fn echo_param_helpers_agree_with_synthesis() {
        let cfg = default_scenario();
        let e = EchoParams {
            delay_s: delay_for_range(150.0),
            doppler_hz: doppler_for_rate(-30.0, cfg.carrier_hz),
            amp: Complex64::new(1.0, 0.0),
        };
        assert!(
            (range_from_phase(-2.0 * PI * cfg.scs_hz * e.delay_s, cfg.scs_hz) - 150.0).abs() < 1e-9
        );
    }
}
