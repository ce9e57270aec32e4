//! Uplink reception on the UL sub-band: local MRC at every AP, equal-weight
//! combining at the CPU, QPSK detection and SINR bookkeeping.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{self, complex_gaussian};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scenario::ScenarioConfig;
use crate::signal::{generate_qpsk_grid, qpsk_detect, ResourceGrid};

/// Per-UE uplink figures.
#[derive(Debug, Clone, PartialEq)]
pub struct UeLinkResult {
    pub ue_id: u32,
    /// Closed-form post-combining SINR.
    pub sinr_linear: f64,
    /// SINR measured from the combined grid.
    pub measured_sinr_linear: f64,
    pub spectral_efficiency_bps_hz: f64,
    pub ser: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlResult {
    pub ues: Vec<UeLinkResult>,
    /// Resource elements per UE that entered the measurement.
    pub n_resource_elements: usize,
}

/// Channel realisation: `channels[u][j]` is UE u as seen by AP j.
#[derive(Debug, Clone, PartialEq)]
pub struct UlChannels {
    pub channels: Vec<Vec<DVector<Complex64>>>,
}

/// `z[n,m] = Σ_p conj(h[p])·y_p[n,m]`.
pub fn mrc_combine(y: &[ResourceGrid], h: &DVector<Complex64>) -> Result<ResourceGrid> {
    if y.len() != h.len() {
        return Err(Error::Dimension {
            context: "MRC antennas",
            expected: (h.len(), 1),
            found: (y.len(), 1),
        });
    }
    let first = y
        .first()
        .ok_or_else(|| Error::InvalidArgument("MRC needs at least one antenna".into()))?;
    let mut z = ResourceGrid::zeros(first.rows(), first.cols(), first.base_sc);
    for (yp, hp) in y.iter().zip(h.iter()) {
        if yp.shape() != z.shape() {
            return Err(Error::Dimension {
                context: "MRC antenna grid",
                expected: z.shape(),
                found: yp.shape(),
            });
        }
        let c = hp.conj();
        z.data.zip_apply(&yp.data, |acc, v| *acc += c * v);
    }
    Ok(z)
}

/// Equal-weight sum of the local MRC outputs.
pub fn cpu_combine(z: &[ResourceGrid]) -> Result<ResourceGrid> {
    let first = z
        .first()
        .ok_or_else(|| Error::InvalidArgument("CPU combining needs at least one AP".into()))?;
    let mut out = first.clone();
    for zj in &z[1..] {
        if zj.shape() != out.shape() {
            return Err(Error::Dimension {
                context: "CPU combining",
                expected: out.shape(),
                found: zj.shape(),
            });
        }
        out.data += &zj.data;
    }
    Ok(out)
}

/// Closed-form SINR of MRC + CPU sum with unit noise variance.
pub fn sinr_closed_form(ch: &UlChannels, powers: &[f64]) -> Result<Vec<f64>> {
    let n_ue = ch.channels.len();
    if n_ue == 0 {
        return Err(Error::InvalidArgument("no UEs".into()));
    }
    if powers.len() != n_ue {
        return Err(Error::LengthMismatch(format!(
            "{} powers for {n_ue} UEs",
            powers.len()
        )));
    }
    let gains: Vec<f64> = ch
        .channels
        .iter()
        .map(|hs| hs.iter().map(|h| h.norm_squared()).sum())
        .collect();
    (0..n_ue)
        .map(|u| {
            if !(gains[u] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "UE index {u} has an all-zero channel"
                )));
            }
            let mut interference = 0.0;
            for v in (0..n_ue).filter(|&v| v != u) {
                let cross: Complex64 = ch.channels[u]
                    .iter()
                    .zip(&ch.channels[v])
                    .map(|(hu, hv)| hu.dotc(hv))
                    .sum();
                interference += powers[v] * cross.norm_sqr();
            }
            Ok(powers[u] * gains[u] * gains[u] / (interference + gains[u]))
        })
        .collect()
}

/// Single-UE post-combining SNR `p·|vᴴh|² / ‖v‖²` of an arbitrary combiner
/// over the stacked antennas of all APs.
pub fn post_combining_snr(
    v: &DVector<Complex64>,
    h: &DVector<Complex64>,
    power: f64,
) -> Result<f64> {
    if v.len() != h.len() {
        return Err(Error::Dimension {
            context: "combiner",
            expected: (h.len(), 1),
            found: (v.len(), 1),
        });
    }
    let vv = v.norm_squared();
    if !(vv > 0.0) {
        return Err(Error::InvalidArgument("zero combiner".into()));
    }
    Ok(power * v.dotc(h).norm_sqr() / vv)
}

pub fn draw_channels(cfg: &ScenarioConfig, trial: u64) -> Result<UlChannels> {
    let mut per_ap = Vec::with_capacity(cfg.aps.len());
    for (j, ap) in cfg.aps.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, trial, j as u64, Purpose::UlChannel);
        per_ap.push(
            cfg.ues
                .iter()
                .map(|ue| channel::ul_channel(ap, ue.position, cfg, &mut r))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let channels = (0..cfg.ues.len())
        .map(|u| per_ap.iter().map(|hs| hs[u].clone()).collect())
        .collect();
    Ok(UlChannels { channels })
}

/// One trial of UL transmission over `n_slots` slots of a block-fading
/// channel, using every UL resource element.
pub fn evaluate_ul(cfg: &ScenarioConfig, trial: u64, n_slots: usize) -> Result<UlResult> {
    if cfg.ues.is_empty() {
        return Err(Error::InvalidArgument("no UEs configured".into()));
    }
    if n_slots == 0 {
        return Err(Error::InvalidArgument("n_slots must be at least 1".into()));
    }
    let map = cfg.subband_map()?;
    let rows = map.ul_segments().iter().map(|r| r.len()).sum::<usize>();
    let base_sc = map.ul_segments().first().map_or(0, |r| r.start);
    let shape = (rows, cfg.n_symbols * n_slots);

    let ch = draw_channels(cfg, trial)?;
    let powers: Vec<f64> = cfg.ues.iter().map(|u| u.tx_power).collect();
    let sinr = sinr_closed_form(&ch, &powers)?;

    let symbols: Vec<ResourceGrid> = (0..cfg.ues.len())
        .map(|u| {
            let mut r = rng::stream(cfg.seed, trial, u as u64, Purpose::UlSymbols);
            generate_qpsk_grid(shape.0, shape.1, base_sc, &mut r)
        })
        .collect();

    let mut rx = Vec::with_capacity(cfg.aps.len());
    for (j, ap) in cfg.aps.iter().enumerate() {
        let hs: Vec<DVector<Complex64>> = ch.channels.iter().map(|c| c[j].clone()).collect();
        let mut noise = rng::stream(cfg.seed, trial, j as u64, Purpose::UlNoise);
        let noise = cfg.thermal_noise.then_some(&mut noise);
        rx.push(channel::synthesize_ul_rx(
            ap.n_antennas,
            &symbols,
            &hs,
            &powers,
            shape,
            noise,
        )?);
    }

    let n_re = shape.0 * shape.1;
    let mut ues = Vec::with_capacity(cfg.ues.len());
    for (u, ue) in cfg.ues.iter().enumerate() {
        let local = rx
            .iter()
            .zip(&ch.channels[u])
            .map(|(y, h)| mrc_combine(y, h))
            .collect::<Result<Vec<_>>>()?;
        let z = cpu_combine(&local)?;
        let gain: f64 =
            powers[u].sqrt() * ch.channels[u].iter().map(|h| h.norm_squared()).sum::<f64>();
        let mut err_power = 0.0;
        let mut errors = 0usize;
        for (zv, s) in z.data.iter().zip(symbols[u].data.iter()) {
            err_power += (zv - gain * s).norm_sqr();
            if qpsk_detect(zv / gain) != *s {
                errors += 1;
            }
        }
        let measured = if err_power > 0.0 {
            gain * gain * n_re as f64 / err_power
        } else {
            f64::INFINITY
        };
        ues.push(UeLinkResult {
            ue_id: ue.id,
            sinr_linear: sinr[u],
            measured_sinr_linear: measured,
            spectral_efficiency_bps_hz: (1.0 + sinr[u]).log2(),
            ser: errors as f64 / n_re as f64,
        });
    }
    Ok(UlResult {
        ues,
        n_resource_elements: n_re,
    })
}

/// Random unit-norm complex vector.
pub fn random_unit_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0));
    let norm = v.norm();
    v.unscale(norm)
}

/// Slots needed for at least `n_re` UL resource elements.
pub fn slots_for(cfg: &ScenarioConfig, n_re: usize) -> Result<usize> {
    let per_slot = cfg.subband_map()?.sc_count(crate::grid::SegmentKind::Ul) * cfg.n_symbols;
    Ok(n_re.div_ceil(per_slot.max(1)))
}
