//! Pulse schedule construction and validation.
//!
//! A [`PulseSchedule`] is the ground truth every spectral quantity derives
//! from: per-qubit ordered pulse center times on `[0, T]`, a shared
//! rectangular pulse width, and a scheme tag. Constructors are provided for
//! the collective symmetric sequence (uniform CPMG-style timing applied to
//! all qubits at once), nested Uhrig sequences, and custom timing lists.
//!
//! Times are stored as absolute values, not fractions of `T`; use
//! [`PulseSchedule::rescaled`] to move a schedule to a new total duration.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

/// Relative tolerance for "strictly increasing": times on the same qubit
/// must differ by more than `1e-12 * T` to avoid spurious zero-length
/// intervals from floating-point `sin^2` evaluation.
pub const MIN_GAP_REL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("total duration must be positive, got {0}")]
    NonpositiveDuration(f64),
    #[error("pulse width must be nonnegative, got {0}")]
    NegativeWidth(f64),
    #[error("qubit {qubit}: time {time} is not strictly increasing")]
    Unsorted { qubit: usize, time: f64 },
    #[error("qubit {qubit}: time {time} lies outside the open interval (0, T)")]
    OutOfRange { qubit: usize, time: f64 },
    #[error("qubit {qubit}: pulse of width {width} centered at {time} overlaps its neighbor or the boundary")]
    PulseOverlap { qubit: usize, time: f64, width: f64 },
    #[error("pulse count {0} must be a positive even number")]
    OddPulseCount(usize),
    #[error("number of qubits must be positive")]
    NoQubits,
    #[error("level counts invalid: {0}")]
    BadLevelCounts(String),
    #[error("schedule JSON: {0}")]
    Json(String),
}

/// Which family produced a schedule.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeTag {
    #[serde(rename = "SDD")]
    Sdd,
    #[serde(rename = "NUDD")]
    Nudd,
    #[serde(rename = "CUSTOM")]
    Custom,
}

impl std::fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeTag::Sdd => write!(f, "SDD"),
            SchemeTag::Nudd => write!(f, "NUDD"),
            SchemeTag::Custom => write!(f, "CUSTOM"),
        }
    }
}

/// Nesting level counts `[L_{N-1}, ..., L_0]`, outermost first.
///
/// Every entry except possibly the first must be even. Zero entries are
/// allowed (the level's qubit receives no pulses); constructors report them
/// through [`NuddLevelCounts::has_degenerate_level`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NuddLevelCounts {
    counts: Vec<u32>,
}

impl NuddLevelCounts {
    pub fn new(counts: Vec<u32>) -> Result<Self, ScheduleError> {
        if counts.is_empty() {
            return Err(ScheduleError::BadLevelCounts("empty level list".into()));
        }
        for (i, &l) in counts.iter().enumerate().skip(1) {
            if l % 2 != 0 {
                return Err(ScheduleError::BadLevelCounts(format!(
                    "inner level count L_{} = {} must be even",
                    counts.len() - 1 - i,
                    l
                )));
            }
        }
        Ok(NuddLevelCounts { counts })
    }

    /// Two-qubit convenience: `(L_0, L_1)` as used in sweep tables.
    pub fn two_qubit(l0: u32, l1: u32) -> Result<Self, ScheduleError> {
        NuddLevelCounts::new(vec![l1, l0])
    }

    /// Number of qubits / nesting levels.
    pub fn num_levels(&self) -> usize {
        self.counts.len()
    }

    /// Count for a level, `level = 0` innermost .. `N-1` outermost.
    pub fn level_count(&self, level: usize) -> u32 {
        self.counts[self.counts.len() - 1 - level]
    }

    /// Outermost-first slice as stored.
    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    pub fn has_degenerate_level(&self) -> bool {
        self.counts.iter().any(|&l| l == 0)
    }

    /// Pulses the qubit hosting `level` receives: `L_level * prod_{k>level}(L_k + 1)`.
    pub fn pulses_at_level(&self, level: usize) -> u64 {
        let mut n = u64::from(self.level_count(level));
        for k in (level + 1)..self.num_levels() {
            n *= u64::from(self.level_count(k)) + 1;
        }
        n
    }

    /// Total pulse count over all levels.
    pub fn total_pulses(&self) -> u64 {
        (0..self.num_levels()).map(|l| self.pulses_at_level(l)).sum()
    }
}

/// Per-qubit ordered pulse center times on `[0, T]` plus a shared width.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub num_qubits: usize,
    pub total_duration: f64,
    pub pulse_width: f64,
    pub scheme: SchemeTag,
    /// `times[j]` is qubit `j`'s ascending list of pulse centers.
    pub times: Vec<Vec<f64>>,
}

/// Uhrig timing: `t_start + (t_end - t_start) * sin^2(l*pi / (2L+2))` for
/// `l = 1..=L`. `L = 0` yields an empty list. Strictly increasing and
/// symmetric about the interval midpoint.
pub fn udd_times(l: u32, t_start: f64, t_end: f64) -> Vec<f64> {
    assert!(t_start < t_end, "udd_times: empty interval");
    let span = t_end - t_start;
    (1..=l)
        .map(|k| {
            let s = (f64::from(k) * PI / (2.0 * f64::from(l) + 2.0)).sin();
            t_start + span * s * s
        })
        .collect()
}

/// Collective symmetric schedule: every qubit gets the identical centers
/// `T_d = (2d - 1) T / (2D)`, `d = 1..=D`, i.e. the four-slot cell with
/// pulses at the second and third slot boundaries repeated `D/2` times.
/// Pulses are simultaneous multi-qubit operations.
pub fn sdd_schedule(
    num_qubits: usize,
    d: usize,
    total_duration: f64,
    pulse_width: f64,
) -> Result<PulseSchedule, ScheduleError> {
    if num_qubits == 0 {
        return Err(ScheduleError::NoQubits);
    }
    if d == 0 || d % 2 != 0 {
        return Err(ScheduleError::OddPulseCount(d));
    }
    let step = total_duration / (2.0 * d as f64);
    let row: Vec<f64> = (1..=d).map(|k| (2 * k - 1) as f64 * step).collect();
    let schedule = PulseSchedule {
        num_qubits,
        total_duration,
        pulse_width,
        scheme: SchemeTag::Sdd,
        times: vec![row; num_qubits],
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Nested Uhrig schedule with the identity level-to-qubit assignment
/// (level `n` drives qubit `n`; outermost level on qubit `N-1`).
pub fn nudd_schedule(
    counts: &NuddLevelCounts,
    total_duration: f64,
    pulse_width: f64,
) -> Result<PulseSchedule, ScheduleError> {
    let n = counts.num_levels();
    let identity: Vec<usize> = (0..n).collect();
    nudd_schedule_permuted(counts, &identity, total_duration, pulse_width)
}

/// Nested Uhrig schedule with an explicit level-to-qubit assignment:
/// `assignment[level]` is the qubit that hosts `level`. The physics fixes
/// no particular assignment, so it is exposed here; permutations must be
/// bijective on `0..N`.
pub fn nudd_schedule_permuted(
    counts: &NuddLevelCounts,
    assignment: &[usize],
    total_duration: f64,
    pulse_width: f64,
) -> Result<PulseSchedule, ScheduleError> {
    let n = counts.num_levels();
    if assignment.len() != n {
        return Err(ScheduleError::BadLevelCounts(
            "assignment length must equal the number of levels".into(),
        ));
    }
    let mut seen = vec![false; n];
    for &q in assignment {
        if q >= n || seen[q] {
            return Err(ScheduleError::BadLevelCounts("assignment is not a permutation".into()));
        }
        seen[q] = true;
    }
    if total_duration <= 0.0 {
        return Err(ScheduleError::NonpositiveDuration(total_duration));
    }

    let per_level = nudd_level_times(counts, total_duration);
    let mut times = vec![Vec::new(); n];
    for (level, level_times) in per_level.into_iter().enumerate() {
        debug_assert_eq!(level_times.len() as u64, counts.pulses_at_level(level));
        times[assignment[level]] = level_times;
    }

    let schedule = PulseSchedule {
        num_qubits: n,
        total_duration,
        pulse_width,
        scheme: SchemeTag::Nudd,
        times,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Pulse times for every nesting level, index `0` = innermost level.
pub(crate) fn nudd_level_times(counts: &NuddLevelCounts, total: f64) -> Vec<Vec<f64>> {
    let n = counts.num_levels();
    let mut result = vec![Vec::new(); n];
    let mut boundaries = vec![0.0, total];
    for level in (0..n).rev() {
        let l = counts.level_count(level);
        let mut level_times = Vec::with_capacity(boundaries.len() - 1);
        for w in boundaries.windows(2) {
            level_times.extend(udd_times(l, w[0], w[1]));
        }
        if l > 0 {
            let mut merged = Vec::with_capacity(boundaries.len() + level_times.len());
            merged.extend_from_slice(&boundaries);
            merged.extend_from_slice(&level_times);
            merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
            boundaries = merged;
        }
        result[level] = level_times;
    }
    result
}

/// The contiguous intervals seen by `level` — the partition of `[0, T]` by
/// all coarser levels. For the outermost level this is the single interval
/// `(0, T)`.
pub(crate) fn nudd_level_intervals(counts: &NuddLevelCounts, level: usize, total: f64) -> Vec<(f64, f64)> {
    let n = counts.num_levels();
    let mut boundaries = vec![0.0, total];
    for outer in ((level + 1)..n).rev() {
        let l = counts.level_count(outer);
        if l == 0 {
            continue;
        }
        let mut merged = boundaries.clone();
        for w in boundaries.windows(2) {
            merged.extend(udd_times(l, w[0], w[1]));
        }
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        boundaries = merged;
    }
    boundaries.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Validates an arbitrary timing list and tags it `CUSTOM`.
pub fn custom_schedule(
    times_per_qubit: Vec<Vec<f64>>,
    total_duration: f64,
    pulse_width: f64,
) -> Result<PulseSchedule, ScheduleError> {
    let schedule = PulseSchedule {
        num_qubits: times_per_qubit.len(),
        total_duration,
        pulse_width,
        scheme: SchemeTag::Custom,
        times: times_per_qubit,
    };
    schedule.validate()?;
    Ok(schedule)
}

impl PulseSchedule {
    /// Checks every schedule invariant, reporting the first violation with
    /// its qubit index and offending time.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.num_qubits == 0 || self.times.len() != self.num_qubits {
            return Err(ScheduleError::NoQubits);
        }
        if !(self.total_duration > 0.0) {
            return Err(ScheduleError::NonpositiveDuration(self.total_duration));
        }
        if !(self.pulse_width >= 0.0) {
            return Err(ScheduleError::NegativeWidth(self.pulse_width));
        }
        let t = self.total_duration;
        let w = self.pulse_width;
        let half = w / 2.0;
        let min_gap = MIN_GAP_REL * t;
        for (qubit, row) in self.times.iter().enumerate() {
            let mut prev: Option<f64> = None;
            for &time in row {
                if time - half < 0.0 || time + half > t {
                    if w > 0.0 && time > 0.0 && time < t {
                        return Err(ScheduleError::PulseOverlap { qubit, time, width: w });
                    }
                    return Err(ScheduleError::OutOfRange { qubit, time });
                }
                if w == 0.0 && (time <= 0.0 || time >= t) {
                    return Err(ScheduleError::OutOfRange { qubit, time });
                }
                if let Some(p) = prev {
                    if time - p <= min_gap {
                        return Err(ScheduleError::Unsorted { qubit, time });
                    }
                    if w > 0.0 && time - p < w * (1.0 - 1e-12) {
                        return Err(ScheduleError::PulseOverlap { qubit, time, width: w });
                    }
                }
                prev = Some(time);
            }
        }
        if self.scheme == SchemeTag::Sdd {
            for (qubit, row) in self.times.iter().enumerate().skip(1) {
                if row != &self.times[0] {
                    return Err(ScheduleError::BadLevelCounts(format!(
                        "SDD requires identical time lists; qubit {qubit} differs"
                    )));
                }
            }
            if self.times[0].len() % 2 != 0 {
                return Err(ScheduleError::OddPulseCount(self.times[0].len()));
            }
        }
        Ok(())
    }

    /// Pulse count on one qubit.
    pub fn pulse_count(&self, qubit: usize) -> usize {
        self.times[qubit].len()
    }

    /// Sum of pulse counts over all qubits.
    pub fn total_pulses(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// The same schedule stretched to a new total duration; pulse centers
    /// and width scale proportionally, so all dimensionless quantities are
    /// unchanged.
    pub fn rescaled(&self, new_duration: f64) -> PulseSchedule {
        let ratio = new_duration / self.total_duration;
        PulseSchedule {
            num_qubits: self.num_qubits,
            total_duration: new_duration,
            pulse_width: self.pulse_width * ratio,
            scheme: self.scheme,
            times: self
                .times
                .iter()
                .map(|row| row.iter().map(|&t| t * ratio).collect())
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<PulseSchedule, ScheduleError> {
        let schedule: PulseSchedule =
            serde_json::from_str(s).map_err(|e| ScheduleError::Json(e.to_string()))?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }

    pub fn read_json(path: &Path) -> Result<PulseSchedule, ScheduleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScheduleError::Json(format!("{}: {e}", path.display())))?;
        PulseSchedule::from_json_str(&text)
    }
}
