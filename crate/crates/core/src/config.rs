//! System constants, unit conversions, uplink stream layout and scenarios.
//!
//! Everything stored in [`SystemConfig`] is linear scale (watts, linear gains,
//! meters). Logarithmic units only appear at the config-file boundary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS transmit antennas.
    pub n_t: usize,
    /// BS receive antennas.
    pub n_r: usize,
    /// Downlink users.
    pub n_dl: usize,
    /// Uplink users; the first `n_ul - 1` split their message in two.
    pub n_ul: usize,
    /// Propagation paths per link side.
    pub n_paths: usize,
    pub wavelength: f64,
    /// Movable region half extent per axis, meters.
    pub region_half: f64,
    /// Minimum spacing between BS antennas of the same array, meters.
    pub min_spacing: f64,
    /// Side of the square cell centred on the BS, meters.
    pub cell_size: f64,
    /// Path-loss gain at 1 m for BS links.
    pub g0: f64,
    /// Path-loss gain at 1 m for UL-UE to DL-UE links.
    pub g0_xlink: f64,
    pub alpha: f64,
    pub alpha_xlink: f64,
    /// Residual self-interference power (linear).
    pub si_power: f64,
    pub noise_dl: f64,
    pub noise_ul: f64,
    pub p_bs: f64,
    /// Per-UE uplink budget, watts.
    pub p_ue_max: f64,
    pub rate_th_dl: f64,
    pub rate_th_ul: f64,
    /// Decode rank per uplink stream (1-based). `None` selects [`default_decode_ranks`].
    pub decoding_order: Option<Vec<usize>>,
    /// Use the all-other-streams interference sets instead of SIC-aware ones.
    pub literal_interference: bool,
    /// Only rescale the beamformers when the BS budget is exceeded.
    pub project_only_if_exceeded: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let wavelength = 0.01;
        Self {
            n_t: 4,
            n_r: 4,
            n_dl: 2,
            n_ul: 2,
            n_paths: 6,
            wavelength,
            region_half: 2.0 * wavelength,
            min_spacing: wavelength / 2.0,
            cell_size: 200.0,
            g0: db_to_linear(-40.0),
            g0_xlink: db_to_linear(-50.0),
            alpha: 2.8,
            alpha_xlink: 3.5,
            si_power: db_to_linear(-90.0),
            noise_dl: dbm_to_watts(-90.0),
            noise_ul: dbm_to_watts(-90.0),
            p_bs: dbm_to_watts(30.0),
            p_ue_max: dbm_to_watts(23.0),
            rate_th_dl: 1.0,
            rate_th_ul: 1.0,
            decoding_order: None,
            literal_interference: false,
            project_only_if_exceeded: false,
        }
    }
}

impl SystemConfig {
    pub fn n_streams(&self) -> usize {
        n_streams(self.n_ul)
    }

    pub fn ue_budgets(&self) -> Vec<f64> {
        vec![self.p_ue_max; self.n_ul]
    }

    /// Decode rank of every uplink stream, validated.
    pub fn decode_ranks(&self) -> Result<Vec<usize>> {
        match &self.decoding_order {
            Some(r) => {
                validate_ranks(r, self.n_streams())?;
                Ok(r.clone())
            }
            None => Ok(default_decode_ranks(self.n_ul)),
        }
    }

    pub fn streams(&self) -> Result<Vec<StreamId>> {
        let ranks = self.decode_ranks()?;
        Ok((0..self.n_streams()).map(|s| StreamId { kind: stream_kind(s, self.n_ul), decode_rank: ranks[s] }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("cell_size", self.cell_size),
            ("g0", self.g0),
            ("g0_xlink", self.g0_xlink),
            ("noise_dl", self.noise_dl),
            ("noise_ul", self.noise_ul),
            ("p_bs", self.p_bs),
            ("p_ue_max", self.p_ue_max),
            ("region_half", self.region_half),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.si_power >= 0.0 && self.si_power.is_finite()) {
            return Err(Error::Config(format!("si_power must be nonnegative, got {}", self.si_power)));
        }
        if self.min_spacing < 0.0 {
            return Err(Error::Config("min_spacing must be nonnegative".into()));
        }
        if self.n_t == 0 || self.n_r == 0 || self.n_paths == 0 {
            return Err(Error::Config("n_t, n_r and n_paths must be at least 1".into()));
        }
        if self.n_ul == 0 {
            return Err(Error::Config("at least one uplink user is required".into()));
        }
        self.decode_ranks()?;
        Ok(())
    }
}

/// Number of uplink streams: two sub-messages for each of the first `U - 1`
/// users plus one for the last.
pub fn n_streams(n_ul: usize) -> usize {
    if n_ul == 0 {
        0
    } else {
        2 * (n_ul - 1) + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamKind {
    /// Sub-message `part` (0 or 1) of split user `user`.
    Split { user: usize, part: usize },
    /// The single message of the last uplink user.
    Unsplit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub kind: StreamKind,
    pub decode_rank: usize,
}

/// Stream index `s` maps to `Split { user: s / 2, part: s % 2 }` for
/// `s < 2(U-1)`, the last index is the unsplit user.
pub fn stream_kind(s: usize, n_ul: usize) -> StreamKind {
    if s + 1 == n_streams(n_ul) {
        StreamKind::Unsplit
    } else {
        StreamKind::Split { user: s / 2, part: s % 2 }
    }
}

/// Uplink user that owns stream `s`.
pub fn stream_owner(s: usize, n_ul: usize) -> usize {
    match stream_kind(s, n_ul) {
        StreamKind::Split { user, .. } => user,
        StreamKind::Unsplit => n_ul - 1,
    }
}

/// Indices of the streams owned by user `u`.
pub fn user_streams(u: usize, n_ul: usize) -> Vec<usize> {
    if u + 1 == n_ul {
        vec![n_streams(n_ul) - 1]
    } else {
        vec![2 * u, 2 * u + 1]
    }
}

/// First sub-messages of the split users, then the unsplit user, then the
/// second sub-messages. For two users this is `s_{1,1} < s_2 < s_{1,2}`.
pub fn default_decode_ranks(n_ul: usize) -> Vec<usize> {
    let n = n_streams(n_ul);
    let mut ranks = vec![0; n];
    let split = n_ul.saturating_sub(1);
    for u in 0..split {
        ranks[2 * u] = u + 1;
        ranks[2 * u + 1] = split + 2 + u;
    }
    if n > 0 {
        ranks[n - 1] = split + 1;
    }
    ranks
}

pub fn validate_ranks(ranks: &[usize], n: usize) -> Result<()> {
    if ranks.len() != n {
        return Err(Error::DecodingOrder(format!("expected {n} ranks, got {}", ranks.len())));
    }
    let mut seen = vec![false; n];
    for &r in ranks {
        if r == 0 || r > n || seen[r - 1] {
            return Err(Error::DecodingOrder(format!("{ranks:?} is not a permutation of 1..={n}")));
        }
        seen[r - 1] = true;
    }
    Ok(())
}

/// Which antenna groups may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Movable antennas at the UEs only.
    UeSide,
    /// Movable antennas at the BS only.
    BsSide,
    /// Movable antennas on both sides.
    BothSides,
    /// Fixed-position antennas everywhere.
    Fpa,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::UeSide, Scenario::BsSide, Scenario::BothSides, Scenario::Fpa];

    pub fn mobility(self) -> crate::variables::Mobility {
        use crate::variables::Mobility;
        match self {
            Scenario::UeSide => Mobility { bs: false, ue: true },
            Scenario::BsSide => Mobility { bs: true, ue: false },
            Scenario::BothSides => Mobility { bs: true, ue: true },
            Scenario::Fpa => Mobility { bs: false, ue: false },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::UeSide => "1",
            Scenario::BsSide => "2",
            Scenario::BothSides => "3",
            Scenario::Fpa => "fpa",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "ue" | "ue-side" => Ok(Scenario::UeSide),
            "2" | "bs" | "bs-side" => Ok(Scenario::BsSide),
            "3" | "both" | "both-sides" => Ok(Scenario::BothSides),
            "fpa" | "fpa-baseline" | "0" => Ok(Scenario::Fpa),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let c = SystemConfig::default();
        assert!((c.p_bs - 1.0).abs() < 1e-12);
        assert!((c.p_ue_max - 0.199_526_231_496_887_96).abs() < 1e-12);
        assert!((c.noise_dl - 1e-12).abs() < 1e-24);
        assert!((c.si_power - 1e-9).abs() < 1e-21);
        assert!((c.g0 - 1e-4).abs() < 1e-16);
        assert!((c.g0_xlink - 1e-5).abs() < 1e-17);
        assert_eq!(c.n_paths, 6);
        assert!((c.region_half - 0.02).abs() < 1e-15);
        assert!((c.min_spacing - 0.005).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn two_user_order() {
        // streams: s_{1,1}, s_{1,2}, s_2
        assert_eq!(default_decode_ranks(2), vec![1, 3, 2]);
        assert_eq!(default_decode_ranks(1), vec![1]);
        assert_eq!(default_decode_ranks(3), vec![1, 4, 2, 5, 3]);
    }

    #[test]
    fn rank_validation() {
        assert!(validate_ranks(&[1, 3, 2], 3).is_ok());
        assert!(validate_ranks(&[1, 1, 2], 3).is_err());
        assert!(validate_ranks(&[0, 1, 2], 3).is_err());
        assert!(validate_ranks(&[1, 2], 3).is_err());
    }

    #[test]
    fn stream_layout() {
        assert_eq!(stream_kind(0, 2), StreamKind::Split { user: 0, part: 0 });
        assert_eq!(stream_kind(1, 2), StreamKind::Split { user: 0, part: 1 });
        assert_eq!(stream_kind(2, 2), StreamKind::Unsplit);
        assert_eq!(stream_owner(2, 2), 1);
        assert_eq!(user_streams(0, 2), vec![0, 1]);
        assert_eq!(user_streams(1, 2), vec![2]);
    }

    #[test]
    fn unit_round_trips() {
        assert!((watts_to_dbm(dbm_to_watts(17.5)) - 17.5).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(-63.0)) + 63.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_parse() {
        for s in Scenario::ALL {
            assert_eq!(s.label().parse::<Scenario>().unwrap(), s);
        }
        assert!("4".parse::<Scenario>().is_err());
    }
}
