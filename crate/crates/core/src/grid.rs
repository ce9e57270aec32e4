//! SBFD frequency-domain partition of one slot into DL, UL and guard sub-bands.
//!
//! Patterns are written as `KIND:count` pairs separated by commas, e.g.
//! `DL:50,GB:3,UL:27,GB:3,DL:50`, and are laid out left to right starting at
//! subcarrier 0 (the lowest occupied frequency).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Subcarriers per resource block.
pub const RB_SIZE_SC: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Dl,
    Ul,
    Gb,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Dl => "DL",
            SegmentKind::Ul => "UL",
            SegmentKind::Gb => "GB",
        }
    }
}

impl FromStr for SegmentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "DL" => Ok(SegmentKind::Dl),
            "UL" => Ok(SegmentKind::Ul),
            "GB" => Ok(SegmentKind::Gb),
            other => Err(format!("unknown segment kind `{other}`")),
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered segment list of one SBFD slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameConfig {
    pub segments: Vec<(SegmentKind, usize)>,
    pub rb_size_sc: usize,
}

impl FrameConfig {
    pub fn total_rbs(&self) -> usize {
        self.segments.iter().map(|&(_, n)| n).sum()
    }

    pub fn rbs_of(&self, kind: SegmentKind) -> usize {
        self.segments
            .iter()
            .filter(|(k, _)| *k == kind)
            .map(|&(_, n)| n)
            .sum()
    }

    pub fn total_sc(&self) -> usize {
        self.total_rbs() * self.rb_size_sc
    }
}

impl fmt::Display for FrameConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (kind, n)) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{kind}:{n}")?;
        }
        Ok(())
    }
}

pub fn parse_pattern(text: &str) -> Result<FrameConfig> {
    let err = |reason: String| Error::Pattern {
        pattern: text.to_string(),
        reason,
    };
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(err("empty pattern".into()));
    }
    let mut segments = Vec::new();
    for token in trimmed.split(',') {
        let token = token.trim();
        let (kind, count) = token
            .split_once(':')
            .ok_or_else(|| err(format!("token `{token}` is not KIND:count")))?;
        let kind: SegmentKind = kind.trim().parse().map_err(err)?;
        let count: i64 = count
            .trim()
            .parse()
            .map_err(|_| err(format!("malformed RB count in `{token}`")))?;
        if count <= 0 {
            return Err(err(format!("RB count must be positive in `{token}`")));
        }
        segments.push((kind, count as usize));
    }
    Ok(FrameConfig {
        segments,
        rb_size_sc: RB_SIZE_SC,
    })
}

/// Contiguous subcarrier range of one segment, `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub range: Range<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandMap {
    pub total_sc: usize,
    pub rb_size_sc: usize,
    /// All segments in frequency order.
    pub segments: Vec<Segment>,
}

impl SubbandMap {
    fn ranges_of(&self, kind: SegmentKind) -> Vec<Range<usize>> {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.range.clone())
            .collect()
    }

    pub fn dl_segments(&self) -> Vec<Range<usize>> {
        self.ranges_of(SegmentKind::Dl)
    }

    pub fn ul_segments(&self) -> Vec<Range<usize>> {
        self.ranges_of(SegmentKind::Ul)
    }

    pub fn gb_segments(&self) -> Vec<Range<usize>> {
        self.ranges_of(SegmentKind::Gb)
    }

    pub fn sc_count(&self, kind: SegmentKind) -> usize {
        self.ranges_of(kind).iter().map(|r| r.len()).sum()
    }
}

/// Lays the segments out left to right. Fails when the pattern lacks a DL or
/// a UL segment.
pub fn build_map(fc: &FrameConfig) -> Result<SubbandMap> {
    let err = |reason: &str| Error::Pattern {
        pattern: fc.to_string(),
        reason: reason.to_string(),
    };
    if fc.rb_size_sc == 0 {
        return Err(err("resource block size must be positive"));
    }
    if fc.segments.iter().any(|&(_, n)| n == 0) {
        return Err(err("every segment needs at least one RB"));
    }
    if !fc.segments.iter().any(|(k, _)| *k == SegmentKind::Dl) {
        return Err(err("at least one DL segment is required"));
    }
    if !fc.segments.iter().any(|(k, _)| *k == SegmentKind::Ul) {
        return Err(err("at least one UL segment is required"));
    }
    let mut start = 0;
    let segments = fc
        .segments
        .iter()
        .map(|&(kind, rbs)| {
            let end = start + rbs * fc.rb_size_sc;
            let seg = Segment {
                kind,
                range: start..end,
            };
            start = end;
            seg
        })
        .collect();
    Ok(SubbandMap {
        total_sc: start,
        rb_size_sc: fc.rb_size_sc,
        segments,
    })
}

/// Occupied bandwidth in Hz after checking it fits the channel (inclusive).
pub fn validate_numerology(fc: &FrameConfig, scs_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(scs_hz > 0.0) || !scs_hz.is_finite() {
        return Err(Error::field("scs_hz", "must be positive and finite"));
    }
    let occupied_hz = fc.total_sc() as f64 * scs_hz;
    if occupied_hz > bandwidth_hz {
        return Err(Error::BandwidthOverflow {
            occupied_hz,
            bandwidth_hz,
        });
    }
    Ok(occupied_hz)
}
