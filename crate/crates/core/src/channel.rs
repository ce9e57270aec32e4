//! What each AP receives: monostatic echoes on the DL sub-bands, residual
//! self-interference and AP-to-AP cross-link interference (CLI), thermal
//! noise, and UE signals on the UL sub-band.
//!
//! Every power is relative to unit-variance thermal noise per complex
//! resource element after receive combining. Sign conventions:
//! delay phase `-2π·n·Δf·τ`, Doppler phase `+2π·m·T_o·f_D`, `f_D = -2ṙf_c/c`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scenario::{self, db_to_linear, AccessPoint, ScenarioConfig, Target, SPEED_OF_LIGHT};
use crate::signal::{BeamWeights, ResourceGrid};

pub use crate::scenario::CliMode;

/// Log-distance exponent of the UL large-scale fading.
pub const UL_PATHLOSS_EXPONENT: f64 = 3.67;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoParams {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub amp: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceSpec {
    /// Residual interference over noise in dB; `-inf` disables SI and CLI.
    pub si_inr_db: f64,
    pub cli_mode: CliMode,
    pub cli_suppression_db: f64,
}

impl InterferenceSpec {
    pub fn off() -> Self {
        Self {
            si_inr_db: f64::NEG_INFINITY,
            cli_mode: CliMode::Off,
            cli_suppression_db: 0.0,
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            si_inr_db: cfg.residual_si_inr_db,
            cli_mode: cfg.cli_mode,
            cli_suppression_db: cfg.cli_suppression_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.si_inr_db.is_nan() || self.si_inr_db == f64::INFINITY {
            return Err(Error::field("si_inr_db", "must be finite or -inf"));
        }
        if !(self.cli_suppression_db >= 0.0) || !self.cli_suppression_db.is_finite() {
            return Err(Error::field(
                "cli_suppression_db",
                "must be a finite value ≥ 0 dB",
            ));
        }
        Ok(())
    }

    /// Linear residual SI power per resource element.
    pub fn si_power(&self) -> f64 {
        db_to_linear(self.si_inr_db)
    }

    /// CLI power received from an AP at distance `d`: the residual level
    /// scaled by one-way (ref/d)² spreading and the extra CLI suppression.
    pub fn cli_power(&self, d: f64, ref_distance_m: f64) -> f64 {
        if self.cli_mode == CliMode::Off {
            return 0.0;
        }
        self.si_power() * (ref_distance_m / d).powi(2) * db_to_linear(-self.cli_suppression_db)
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * (variance / 2.0).sqrt()
}

/// Echo amplitude of a unit-gain, unit-RCS target at the reference distance.
pub fn reference_amplitude(cfg: &ScenarioConfig) -> f64 {
    cfg.snr_linear().sqrt()
}

pub fn delay_for_range(range_m: f64) -> f64 {
    2.0 * range_m / SPEED_OF_LIGHT
}

pub fn doppler_for_rate(range_rate_mps: f64, carrier_hz: f64) -> f64 {
    -2.0 * range_rate_mps * carrier_hz / SPEED_OF_LIGHT
}

/// Round-trip echo of `tgt` at `ap`, transmitted and combined with `beam`.
/// The carrier phase is drawn uniformly from `rng`.
pub fn echo_params<R: Rng + ?Sized>(
    ap: &AccessPoint,
    tgt: &Target,
    cfg: &ScenarioConfig,
    beam: &BeamWeights,
    rng: &mut R,
) -> Result<EchoParams> {
    let geo = scenario::target_geometry(ap, tgt)?;
    let gain = beam.gain(geo.bearing_rad);
    let path = (cfg.ref_distance_m / geo.range_m).powi(2);
    let phase = rng.random_range(0.0..2.0 * PI);
    let amp =
        Complex64::from_polar(reference_amplitude(cfg) * tgt.rcs_scale * path, phase) * gain * gain;
    Ok(EchoParams {
        delay_s: delay_for_range(geo.range_m),
        doppler_hz: doppler_for_rate(geo.range_rate_mps, cfg.carrier_hz),
        amp,
    })
}

/// Independent random streams consumed while synthesizing one AP's DL
/// reception.
#[derive(Debug, Clone)]
pub struct RxStreams<R> {
    pub noise: R,
    pub si: R,
    pub cli: R,
}

fn delay_phasors(rows: usize, base_sc: usize, scs_hz: f64, delay_s: f64) -> Vec<Complex64> {
    (0..rows)
        .map(|n| Complex64::from_polar(1.0, -2.0 * PI * (base_sc + n) as f64 * scs_hz * delay_s))
        .collect()
}

fn doppler_phasors(cols: usize, sym_s: f64, doppler_hz: f64) -> Vec<Complex64> {
    (0..cols)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 * sym_s * doppler_hz))
        .collect()
}

/// Adds `amp·a(τ)·b(f_D)ᵀ ∘ X` to `y`.
fn add_path(
    y: &mut ResourceGrid,
    x: &ResourceGrid,
    cfg: &ScenarioConfig,
    delay_s: f64,
    doppler_hz: f64,
    amp: Complex64,
) {
    let (rows, cols) = x.shape();
    let a = delay_phasors(rows, x.base_sc, cfg.scs_hz, delay_s);
    let b = doppler_phasors(cols, cfg.symbol_duration_s(), doppler_hz);
    for m in 0..cols {
        let bm = amp * b[m];
        for n in 0..rows {
            y.data[(n, m)] += a[n] * bm * x.data[(n, m)];
        }
    }
}

fn add_gaussian<R: Rng + ?Sized>(y: &mut ResourceGrid, variance: f64, rng: &mut R) {
    let (rows, cols) = y.shape();
    for n in 0..rows {
        for m in 0..cols {
            y.data[(n, m)] += complex_gaussian(rng, variance);
        }
    }
}

/// Interfering APs seen from `ap_index`: (distance, phase) per other AP.
fn cli_sources<R: Rng + ?Sized>(
    ap_index: usize,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    let me = cfg.aps[ap_index].position;
    cfg.aps
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != ap_index)
        .map(|(_, other)| {
            (
                scenario::distance(me, other.position),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect()
}

fn add_interference<R: Rng + ?Sized>(
    y: &mut ResourceGrid,
    x: &ResourceGrid,
    cfg: &ScenarioConfig,
    interf: &InterferenceSpec,
    cli: &[(f64, f64)],
    si_rng: &mut R,
    cli_rng: &mut R,
) {
    let si = interf.si_power();
    if si > 0.0 {
        add_gaussian(y, si, si_rng);
    }
    match interf.cli_mode {
        CliMode::Off => {}
        CliMode::Gaussian => {
            let total: f64 = cli
                .iter()
                .map(|&(d, _)| interf.cli_power(d, cfg.ref_distance_m))
                .sum();
            if total > 0.0 {
                add_gaussian(y, total, cli_rng);
            }
        }
        CliMode::Structured => {
            for &(d, phase) in cli {
                let p = interf.cli_power(d, cfg.ref_distance_m);
                if p > 0.0 {
                    // One-way propagation, stationary transmitter.
                    add_path(
                        y,
                        x,
                        cfg,
                        d / SPEED_OF_LIGHT,
                        0.0,
                        Complex64::from_polar(p.sqrt(), phase),
                    );
                }
            }
        }
    }
}

/// Residual SI plus CLI contribution for one DL segment of `ap_index`.
pub fn interference_grid<R: Rng + ?Sized>(
    ap_index: usize,
    cfg: &ScenarioConfig,
    x: &ResourceGrid,
    interf: &InterferenceSpec,
    si_rng: &mut R,
    cli_rng: &mut R,
) -> Result<ResourceGrid> {
    interf.validate()?;
    check_ap(ap_index, cfg)?;
    let cli = cli_sources(ap_index, cfg, cli_rng);
    let mut y = ResourceGrid::zeros(x.rows(), x.cols(), x.base_sc);
    add_interference(&mut y, x, cfg, interf, &cli, si_rng, cli_rng);
    Ok(y)
}

fn check_ap(ap_index: usize, cfg: &ScenarioConfig) -> Result<()> {
    if ap_index >= cfg.aps.len() {
        return Err(Error::InvalidArgument(format!(
            "AP index {ap_index} out of range ({} APs)",
            cfg.aps.len()
        )));
    }
    Ok(())
}

/// Post-combining DL reception of AP `ap_index`, one grid per DL segment.
///
/// `x` holds the shared transmit grid of every DL segment in frequency order.
/// Thermal noise is skipped when `cfg.thermal_noise` is false.
pub fn synthesize_dl_rx<R: Rng>(
    ap_index: usize,
    cfg: &ScenarioConfig,
    x: &[ResourceGrid],
    echoes: &[EchoParams],
    interf: &InterferenceSpec,
    streams: &mut RxStreams<R>,
) -> Result<Vec<ResourceGrid>> {
    interf.validate()?;
    check_ap(ap_index, cfg)?;
    let map = cfg.subband_map()?;
    let dl = map.dl_segments();
    if dl.len() != x.len() {
        return Err(Error::LengthMismatch(format!(
            "{} transmit grids for {} DL segments",
            x.len(),
            dl.len()
        )));
    }
    let cli = cli_sources(ap_index, cfg, &mut streams.cli);
    let mut out = Vec::with_capacity(x.len());
    for (seg, grid) in dl.iter().zip(x) {
        if grid.shape() != (seg.len(), cfg.n_symbols) || grid.base_sc != seg.start {
            return Err(Error::Dimension {
                context: "DL transmit grid",
                expected: (seg.len(), cfg.n_symbols),
                found: grid.shape(),
            });
        }
        let mut y = ResourceGrid::zeros(grid.rows(), grid.cols(), grid.base_sc);
        for e in echoes {
            add_path(&mut y, grid, cfg, e.delay_s, e.doppler_hz, e.amp);
        }
        add_interference(
            &mut y,
            grid,
            cfg,
            interf,
            &cli,
            &mut streams.si,
            &mut streams.cli,
        );
        if cfg.thermal_noise {
            add_gaussian(&mut y, 1.0, &mut streams.noise);
        }
        out.push(y);
    }
    Ok(out)
}

/// Rayleigh UL channel with log-distance large-scale gain (ref/d)^3.67.
pub fn ul_channel<R: Rng + ?Sized>(
    ap: &AccessPoint,
    ue_position: [f64; 2],
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    let d = scenario::distance(ap.position, ue_position);
    if !(d > 0.0) {
        return Err(Error::Geometry(format!("UE co-located with AP {}", ap.id)));
    }
    let beta = (cfg.ref_distance_m / d).powf(UL_PATHLOSS_EXPONENT);
    Ok(DVector::from_fn(ap.n_antennas, |_, _| {
        complex_gaussian(rng, beta)
    }))
}

/// Per-antenna UL reception: `y_p = Σ_u h_u[p]·√p_u·s_u + w_p`. Pass `None`
/// for a noiseless receiver.
pub fn synthesize_ul_rx<R: Rng + ?Sized>(
    n_antennas: usize,
    ue_grids: &[ResourceGrid],
    channels: &[DVector<Complex64>],
    powers: &[f64],
    shape: (usize, usize),
    mut noise: Option<&mut R>,
) -> Result<Vec<ResourceGrid>> {
    if ue_grids.len() != channels.len() || ue_grids.len() != powers.len() {
        return Err(Error::LengthMismatch(format!(
            "{} UE grids, {} channels, {} powers",
            ue_grids.len(),
            channels.len(),
            powers.len()
        )));
    }
    let base_sc = ue_grids.first().map_or(0, |g| g.base_sc);
    for (g, h) in ue_grids.iter().zip(channels) {
        if g.shape() != shape {
            return Err(Error::Dimension {
                context: "UE grid",
                expected: shape,
                found: g.shape(),
            });
        }
        if h.len() != n_antennas {
            return Err(Error::Dimension {
                context: "UL channel",
                expected: (n_antennas, 1),
                found: (h.len(), 1),
            });
        }
    }
    let mut out = Vec::with_capacity(n_antennas);
    for p in 0..n_antennas {
        let mut y = ResourceGrid::zeros(shape.0, shape.1, base_sc);
        for ((g, h), &pw) in ue_grids.iter().zip(channels).zip(powers) {
            let coeff = h[p] * pw.sqrt();
            y.data.zip_apply(&g.data, |acc, s| *acc += coeff * s);
        }
        if let Some(rng) = noise.as_deref_mut() {
            add_gaussian(&mut y, 1.0, rng);
        }
        out.push(y);
    }
    Ok(out)
}
