//! Experiment configuration, deployment geometry and per-pair derived quantities.
//!
//! Configurations are TOML documents: flat scalar keys at the top level and
//! repeated `[[aps]]`, `[[targets]]` and `[[ues]]` tables. Unknown keys are
//! rejected.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{self, FrameConfig, SubbandMap};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Normal-CP ratio 144/2048.
pub const DEFAULT_CP_FRACTION: f64 = 0.0703125;

/// Every position must lie inside `[-WORLD_HALF_EXTENT_M, WORLD_HALF_EXTENT_M]²`.
pub const WORLD_HALF_EXTENT_M: f64 = 10_000.0;

/// Minimum separation below which two APs count as co-located.
const COLOCATION_EPS_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CliMode {
    Off,
    Gaussian,
    #[default]
    Structured,
}

impl fmt::Display for CliMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CliMode::Off => "off",
            CliMode::Gaussian => "gaussian",
            CliMode::Structured => "structured",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoint {
    pub id: u32,
    pub position: [f64; 2],
    #[serde(default = "default_antennas")]
    pub n_antennas: usize,
    /// Boresight direction of the ULA, measured from the +x axis.
    #[serde(default)]
    pub array_bearing_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub id: u32,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    #[serde(default = "one")]
    pub rcs_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEquipment {
    pub id: u32,
    pub position: [f64; 2],
    /// Linear transmit power; unit power at `ref_distance_m` gives unit
    /// per-antenna SNR.
    pub tx_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_hz: f64,
    pub scs_hz: f64,
    pub n_symbols: usize,
    #[serde(default = "default_cp_fraction")]
    pub cp_fraction: f64,
    pub bandwidth_hz: f64,
    pub pattern: String,
    /// Per-element echo SNR of a unit-RCS target at `ref_distance_m` with
    /// unit beamforming gains.
    pub snr_db: f64,
    #[serde(default = "default_ref_distance")]
    pub ref_distance_m: f64,
    /// Residual SI power over noise per DL resource element. Also scales the
    /// AP-to-AP cross-link residual. `-inf` (or `"off"`) disables both.
    #[serde(
        default = "neg_inf",
        deserialize_with = "de_level_db",
        serialize_with = "ser_level_db"
    )]
    pub residual_si_inr_db: f64,
    #[serde(default)]
    pub cli_mode: CliMode,
    #[serde(default)]
    pub cli_suppression_db: f64,
    /// Paths assumed by the estimator; defaults to the number of targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_order: Option<usize>,
    #[serde(default = "default_seed", with = "seed_repr")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_subarray_freq")]
    pub esprit_subarray_freq: usize,
    #[serde(default = "default_subarray_time")]
    pub esprit_subarray_time: usize,
    #[serde(default)]
    pub beam_angle_jitter_rad: f64,
    /// Disables thermal noise everywhere when false (noiseless studies).
    #[serde(default = "yes")]
    pub thermal_noise: bool,
    pub aps: Vec<AccessPoint>,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub ues: Vec<UserEquipment>,
}

fn default_antennas() -> usize {
    4
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}
fn default_cp_fraction() -> f64 {
    DEFAULT_CP_FRACTION
}
fn default_ref_distance() -> f64 {
    100.0
}
fn default_seed() -> u64 {
    1
}
fn default_trials() -> usize {
    200
}
fn default_subarray_freq() -> usize {
    64
}
fn default_subarray_time() -> usize {
    7
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LevelRepr {
    Number(f64),
    Integer(i64),
    Text(String),
}

fn de_level_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match LevelRepr::deserialize(d)? {
        LevelRepr::Number(v) => Ok(v),
        LevelRepr::Integer(v) => Ok(v as f64),
        LevelRepr::Text(s) if s.eq_ignore_ascii_case("off") => Ok(f64::NEG_INFINITY),
        LevelRepr::Text(s) => Err(serde::de::Error::custom(format!(
            "expected a dB value or \"off\", found \"{s}\""
        ))),
    }
}

fn ser_level_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(*v)
}

/// Seeds are TOML integers when they fit in i64 and `"0x…"` strings otherwise.
mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&format!("{v:#x}")),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(i) => {
                u64::try_from(i).map_err(|_| serde::de::Error::custom("seed must be non-negative"))
            }
            Repr::Text(t) => {
                let parsed = match t.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => t.parse(),
                };
                parsed.map_err(|_| serde::de::Error::custom(format!("invalid seed \"{t}\"")))
            }
        }
    }
}

/// Range, bearing and range rate of a target as seen from one AP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGeometry {
    pub range_m: f64,
    /// Angle from array boresight, folded into [-π/2, π/2] (a ULA cannot
    /// tell front from back).
    pub bearing_rad: f64,
    /// Positive when receding.
    pub range_rate_mps: f64,
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub(crate) fn fold_bearing(a: f64) -> f64 {
    let a = wrap_angle(a);
    if a > FRAC_PI_2 {
        PI - a
    } else if a < -FRAC_PI_2 {
        -PI - a
    } else {
        a
    }
}

/// Bearing of `to` relative to the boresight of an array at `from`.
pub fn relative_bearing(from: [f64; 2], boresight_rad: f64, to: [f64; 2]) -> f64 {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    fold_bearing(dy.atan2(dx) - boresight_rad)
}

pub fn target_geometry(ap: &AccessPoint, tgt: &Target) -> Result<TargetGeometry> {
    let dx = tgt.position[0] - ap.position[0];
    let dy = tgt.position[1] - ap.position[1];
    let range_m = dx.hypot(dy);
    if !(range_m > 0.0) {
        return Err(Error::Geometry(format!(
            "target {} is co-located with AP {}",
            tgt.id, ap.id
        )));
    }
    let range_rate_mps = (tgt.velocity[0] * dx + tgt.velocity[1] * dy) / range_m;
    Ok(TargetGeometry {
        range_m,
        bearing_rad: relative_bearing(ap.position, ap.array_bearing_rad, tgt.position),
        range_rate_mps,
    })
}

impl ScenarioConfig {
    /// CP-inclusive OFDM symbol duration.
    pub fn symbol_duration_s(&self) -> f64 {
        (1.0 + self.cp_fraction) / self.scs_hz
    }

    pub fn frame(&self) -> Result<FrameConfig> {
        grid::parse_pattern(&self.pattern)
    }

    pub fn subband_map(&self) -> Result<SubbandMap> {
        grid::build_map(&self.frame()?)
    }

    pub fn effective_model_order(&self) -> usize {
        self.model_order.unwrap_or(self.targets.len())
    }

    pub fn unambiguous_range_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.scs_hz)
    }

    pub fn unambiguous_rate_mps(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.carrier_hz * self.symbol_duration_s())
    }

    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.snr_db)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialization cannot fail")
    }

    /// Same scenario at a different residual interference level.
    pub fn with_residual_inr_db(&self, inr_db: f64) -> Self {
        Self {
            residual_si_inr_db: inr_db,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::field(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        }
        fn in_world(field: String, p: [f64; 2]) -> Result<()> {
            if p.iter()
                .all(|c| c.is_finite() && c.abs() <= WORLD_HALF_EXTENT_M)
            {
                Ok(())
            } else {
                Err(Error::field(
                    field,
                    format!("position {p:?} outside ±{WORLD_HALF_EXTENT_M} m"),
                ))
            }
        }

        positive("carrier_hz", self.carrier_hz)?;
        positive("scs_hz", self.scs_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("ref_distance_m", self.ref_distance_m)?;
        if self.n_symbols < 2 {
            return Err(Error::field("n_symbols", "must be at least 2"));
        }
        if !(self.cp_fraction >= 0.0) || !self.cp_fraction.is_finite() {
            return Err(Error::field("cp_fraction", "must be non-negative"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::field("snr_db", "must be finite"));
        }
        if self.residual_si_inr_db.is_nan() || self.residual_si_inr_db == f64::INFINITY {
            return Err(Error::field(
                "residual_si_inr_db",
                "must be finite or -inf (off)",
            ));
        }
        if !(self.cli_suppression_db >= 0.0) || !self.cli_suppression_db.is_finite() {
            return Err(Error::field(
                "cli_suppression_db",
                "must be a finite value ≥ 0 dB",
            ));
        }
        if !(self.beam_angle_jitter_rad >= 0.0) || !self.beam_angle_jitter_rad.is_finite() {
            return Err(Error::field("beam_angle_jitter_rad", "must be ≥ 0"));
        }
        if self.n_trials == 0 {
            return Err(Error::field("n_trials", "must be at least 1"));
        }

        let frame = grid::parse_pattern(&self.pattern)
            .map_err(|e| Error::field("pattern", e.to_string()))?;
        let map = grid::build_map(&frame).map_err(|e| Error::field("pattern", e.to_string()))?;
        grid::validate_numerology(&frame, self.scs_hz, self.bandwidth_hz)
            .map_err(|e| Error::field("bandwidth_hz", e.to_string()))?;

        let shortest_dl = map.dl_segments().iter().map(|r| r.len()).min().unwrap_or(0);
        if self.esprit_subarray_freq < 2 || self.esprit_subarray_freq > shortest_dl {
            return Err(Error::field(
                "esprit_subarray_freq",
                format!("must lie in [2, {shortest_dl}]"),
            ));
        }
        if self.esprit_subarray_time < 2 || self.esprit_subarray_time > self.n_symbols {
            return Err(Error::field(
                "esprit_subarray_time",
                format!("must lie in [2, {}]", self.n_symbols),
            ));
        }
        if let Some(order) = self.model_order {
            let limit = self.esprit_subarray_freq.min(self.esprit_subarray_time) / 2;
            if order == 0 || order > limit {
                return Err(Error::field(
                    "model_order",
                    format!("must lie in [1, {limit}] for the configured subarrays"),
                ));
            }
        }

        if self.aps.is_empty() {
            return Err(Error::field("aps", "at least one access point is required"));
        }
        for (i, ap) in self.aps.iter().enumerate() {
            in_world(format!("aps[{i}].position"), ap.position)?;
            if ap.n_antennas == 0 {
                return Err(Error::field(format!("aps[{i}].n_antennas"), "must be ≥ 1"));
            }
            if !ap.array_bearing_rad.is_finite() {
                return Err(Error::field(
                    format!("aps[{i}].array_bearing_rad"),
                    "must be finite",
                ));
            }
            for (k, other) in self.aps.iter().enumerate().take(i) {
                if other.id == ap.id {
                    return Err(Error::field(
                        format!("aps[{i}].id"),
                        format!("duplicate id {}", ap.id),
                    ));
                }
                if distance(other.position, ap.position) < COLOCATION_EPS_M {
                    return Err(Error::field(
                        format!("aps[{i}].position"),
                        format!("co-located with aps[{k}]"),
                    ));
                }
            }
        }

        let r_max = self.unambiguous_range_m();
        let v_max = self.unambiguous_rate_mps();
        for (i, t) in self.targets.iter().enumerate() {
            in_world(format!("targets[{i}].position"), t.position)?;
            if !t.velocity.iter().all(|v| v.is_finite()) {
                return Err(Error::field(
                    format!("targets[{i}].velocity"),
                    "must be finite",
                ));
            }
            if !(t.rcs_scale > 0.0) || !t.rcs_scale.is_finite() {
                return Err(Error::field(
                    format!("targets[{i}].rcs_scale"),
                    "must be > 0",
                ));
            }
            if self.targets[..i].iter().any(|o| o.id == t.id) {
                return Err(Error::field(
                    format!("targets[{i}].id"),
                    format!("duplicate id {}", t.id),
                ));
            }
            for ap in &self.aps {
                let g = target_geometry(ap, t)
                    .map_err(|e| Error::field(format!("targets[{i}].position"), e.to_string()))?;
                if g.range_m >= r_max {
                    return Err(Error::field(
                        format!("targets[{i}].position"),
                        format!(
                            "range {:.1} m from AP {} exceeds unambiguous {r_max:.1} m",
                            g.range_m, ap.id
                        ),
                    ));
                }
                if g.range_rate_mps.abs() >= v_max {
                    return Err(Error::field(
                        format!("targets[{i}].velocity"),
                        format!("range rate exceeds unambiguous ±{v_max:.1} m/s"),
                    ));
                }
            }
        }

        for (i, ue) in self.ues.iter().enumerate() {
            in_world(format!("ues[{i}].position"), ue.position)?;
            if !(ue.tx_power > 0.0) || !ue.tx_power.is_finite() {
                return Err(Error::field(format!("ues[{i}].tx_power"), "must be > 0"));
            }
            if self
                .aps
                .iter()
                .any(|ap| distance(ap.position, ue.position) == 0.0)
            {
                return Err(Error::field(
                    format!("ues[{i}].position"),
                    "co-located with an AP",
                ));
            }
            if self.ues[..i].iter().any(|o| o.id == ue.id) {
                return Err(Error::field(
                    format!("ues[{i}].id"),
                    format!("duplicate id {}", ue.id),
                ));
            }
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario_file(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario(&text)
}

/// Default AP lattice: columns at x = 40, 125, 210 m and rows at
/// y = 62.5, 187.5 m; every array faces the area centre (125, 125).
pub const DEFAULT_AP_POSITIONS: [[f64; 2]; 6] = [
    [40.0, 62.5],
    [125.0, 62.5],
    [210.0, 62.5],
    [40.0, 187.5],
    [125.0, 187.5],
    [210.0, 187.5],
];

pub const DEFAULT_TARGET_POSITIONS: [[f64; 2]; 3] = [[150.0, 190.0], [70.0, 135.0], [155.0, 30.0]];

pub const DEFAULT_TARGET_VELOCITIES: [[f64; 2]; 3] = [[18.0, 28.0], [10.0, -28.0], [21.0, 26.0]];

pub const DEFAULT_UE_POSITIONS: [[f64; 2]; 5] = [
    [30.0, 30.0],
    [220.0, 35.0],
    [125.0, 125.0],
    [35.0, 220.0],
    [215.0, 215.0],
];

/// The 250 m × 250 m deployment with 6 APs, 3 targets and 5 UEs.
pub fn default_scenario() -> ScenarioConfig {
    let centre = [125.0, 125.0];
    let aps = DEFAULT_AP_POSITIONS
        .iter()
        .enumerate()
        .map(|(i, &p)| AccessPoint {
            id: i as u32,
            position: p,
            n_antennas: 4,
            array_bearing_rad: (centre[1] - p[1]).atan2(centre[0] - p[0]),
        })
        .collect();
    let targets = DEFAULT_TARGET_POSITIONS
        .iter()
        .zip(DEFAULT_TARGET_VELOCITIES.iter())
        .enumerate()
        .map(|(i, (&p, &v))| Target {
            id: i as u32,
            position: p,
            velocity: v,
            rcs_scale: 1.0,
        })
        .collect();
    let ues = DEFAULT_UE_POSITIONS
        .iter()
        .enumerate()
        .map(|(i, &p)| UserEquipment {
            id: i as u32,
            position: p,
            tx_power: 100.0,
        })
        .collect();
    ScenarioConfig {
        carrier_hz: 7e9,
        scs_hz: 30e3,
        n_symbols: 14,
        cp_fraction: DEFAULT_CP_FRACTION,
        bandwidth_hz: 50e6,
        pattern: "DL:50,GB:3,UL:27,GB:3,DL:50".to_string(),
        snr_db: 10.0,
        ref_distance_m: 100.0,
        residual_si_inr_db: -10.0,
        cli_mode: CliMode::Structured,
        cli_suppression_db: 0.0,
        model_order: None,
        seed: 1,
        n_trials: 200,
        esprit_subarray_freq: 64,
        esprit_subarray_time: 7,
        beam_angle_jitter_rad: 0.0,
        thermal_noise: true,
        aps,
        targets,
        ues,
    }
}
