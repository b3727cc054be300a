//! Figure-level diagnostics: rolloff fitting, spectral-peak localization,
//! protected-subspace detection, and factor sweep tables.

use crate::filter::{FilterEval, FilterLabel, FilterSpec, PulseModel, Topology};
use crate::sampling::FrequencyGrid;
use crate::schedule::{self, NuddLevelCounts, PulseSchedule, SchemeTag};
use crate::spectra::{self, SpectraError};
use rayon::prelude::*;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("band is not a straight power law (r^2 = {r_squared:.6} < 0.999)")]
    PoorFit { r_squared: f64 },
    #[error("two lobes within 1% of the maximum, at z = {z1:.6} and z = {z2:.6}")]
    AmbiguousPeak { z1: f64, z2: f64 },
    #[error("fit band needs at least {needed} points inside it, found {found}")]
    BandTooNarrow { needed: usize, found: usize },
    #[error("sweep config: {0}")]
    Config(String),
    #[error("sweep table: {0}")]
    Csv(String),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// A filter function evaluated on a frequency grid.
#[derive(Clone, Debug)]
pub struct FilterCurve {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
}

impl FilterCurve {
    /// Evaluates the filter on the grid, escalating to extended precision
    /// where plain `f64` would return cancellation noise.
    pub fn evaluate(spec: &FilterSpec, schedule: &PulseSchedule, grid: &FrequencyGrid) -> FilterCurve {
        let eval = FilterEval::new(spec, schedule);
        let z: Vec<f64> = grid.values().to_vec();
        let f = z.iter().map(|&zi| eval.value_model_accurate(zi)).collect();
        FilterCurve { z, f }
    }

    /// Arbitrary per-point transformation, e.g. dividing by a weight.
    pub fn map_values(mut self, g: impl Fn(f64, f64) -> f64) -> FilterCurve {
        for (z, f) in self.z.iter().zip(self.f.iter_mut()) {
            *f = g(*z, *f);
        }
        self
    }
}

/// Slope of a filter's low-frequency suppression in dB per octave.
#[derive(Clone, Copy, Debug)]
pub struct RolloffFit {
    pub db_per_octave: f64,
    pub fit_band: (f64, f64),
    pub r_squared: f64,
}

impl RolloffFit {
    /// Filter order under the 6 dB/octave-per-order convention.
    pub fn order(&self) -> f64 {
        self.db_per_octave / 6.0
    }
}

/// Least-squares slope of `10 log10 F` against `log2 z` over the band.
///
/// The band must lie inside the curve's power-law regime and contain at
/// least 8 points; a poor straight-line fit (`r^2 < 0.999`) is an error
/// because it means the band strayed into oscillation or noise.
pub fn rolloff_db_per_octave(curve: &FilterCurve, band: (f64, f64)) -> Result<RolloffFit, AnalysisError> {
    let pts: Vec<(f64, f64)> = curve
        .z
        .iter()
        .zip(curve.f.iter())
        .filter(|&(&z, &f)| z >= band.0 && z <= band.1 && f > 0.0)
        .map(|(&z, &f)| (z.log2(), 10.0 * f.log10()))
        .collect();
    if pts.len() < 8 {
        return Err(AnalysisError::BandTooNarrow { needed: 8, found: pts.len() });
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let ss_res: f64 = pts.iter().map(|&(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    if r_squared < 0.999 {
        return Err(AnalysisError::PoorFit { r_squared });
    }
    Ok(RolloffFit { db_per_octave: slope, fit_band: band, r_squared })
}

/// Default fit band: two decades ending where the curve first reaches
/// `1e-6` of its maximum. When that band is not a clean power law (it can
/// cross filter nulls or the numeric floor), the upper edge is halved
/// until the fit straightens.
pub fn fit_rolloff_auto(curve: &FilterCurve) -> Result<RolloffFit, AnalysisError> {
    let f_max = curve.f.iter().cloned().fold(0.0f64, f64::max);
    let z_rise = curve
        .z
        .iter()
        .zip(curve.f.iter())
        .find(|&(_, &f)| f >= 1e-6 * f_max)
        .map(|(&z, _)| z)
        .ok_or(AnalysisError::BandTooNarrow { needed: 8, found: 0 })?;
    let mut hi = z_rise;
    let mut last = Err(AnalysisError::BandTooNarrow { needed: 8, found: 0 });
    for _ in 0..12 {
        last = rolloff_db_per_octave(curve, (hi / 100.0, hi));
        match &last {
            Ok(_) => return last,
            Err(AnalysisError::BandTooNarrow { .. }) => return last,
            Err(_) => hi /= 2.0,
        }
    }
    last
}

/// Location of the dominant lobe of a curve, refined by three-point
/// quadratic interpolation in `log z`.
///
/// Reports [`AnalysisError::AmbiguousPeak`] when a second, separated lobe
/// comes within 1% of the maximum.
pub fn spectral_peak(curve: &FilterCurve) -> Result<f64, AnalysisError> {
    let n = curve.f.len();
    assert!(n >= 3, "peak search needs at least three points");
    let mut i_max = 0;
    for (i, &f) in curve.f.iter().enumerate() {
        if f > curve.f[i_max] {
            i_max = i;
        }
    }
    let f_max = curve.f[i_max];

    // A second lobe: a local maximum separated from the global one.
    for i in 1..n - 1 {
        if (i as i64 - i_max as i64).unsigned_abs() as usize <= 2 {
            continue;
        }
        if curve.f[i] >= curve.f[i - 1]
            && curve.f[i] >= curve.f[i + 1]
            && curve.f[i] >= 0.99 * f_max
        {
            return Err(AnalysisError::AmbiguousPeak { z1: curve.z[i_max], z2: curve.z[i] });
        }
    }

    if i_max == 0 || i_max == n - 1 {
        return Ok(curve.z[i_max]);
    }
    // Parabola vertex through the three points around the maximum, in
    // log-z coordinates.
    let (x0, x1, x2) = (curve.z[i_max - 1].ln(), curve.z[i_max].ln(), curve.z[i_max + 1].ln());
    let (y0, y1, y2) = (curve.f[i_max - 1], curve.f[i_max], curve.f[i_max + 1]);
    let num = (y0 - y1) * (x2 - x1) * (x2 - x1) - (y2 - y1) * (x1 - x0) * (x1 - x0);
    let den = (y0 - y1) * (x2 - x1) + (y2 - y1) * (x1 - x0);
    if den == 0.0 {
        return Ok(curve.z[i_max]);
    }
    let vertex = x1 + 0.5 * num / den;
    Ok(vertex.exp())
}

/// Protection verdict for one coherence element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DfsEntry {
    /// 1-based ket labels of the element.
    pub pair: (usize, usize),
    pub protected: bool,
    /// Largest filter value seen over the standard grid.
    pub max_filter: f64,
}

/// Evaluation-based protected-subspace detection for a two-qubit schedule:
/// an element is protected when its filter stays under
/// `1e-18 * (2 sum D_j + 2N)^2` over a standard log grid. Invariant under
/// schedule rescaling (the grid is dimensionless).
pub fn dfs_check(schedule: &PulseSchedule, topology: Topology) -> Vec<DfsEntry> {
    assert_eq!(schedule.num_qubits, 2, "protected-subspace scan is defined for two qubits");
    let total: usize = schedule.total_pulses();
    let bound = 2.0 * total as f64 + 2.0 * schedule.num_qubits as f64;
    let threshold = 1e-18 * bound * bound;
    let grid = FrequencyGrid::logarithmic(1e-2, 100f64.max(20.0 * total as f64), 512).unwrap();

    let mut entries = Vec::new();
    for row in 1..=4usize {
        for col in (row + 1)..=4 {
            let spec = FilterSpec::from_ket_labels(row, col, 2, topology, PulseModel::Ideal)
                .expect("two-qubit labels are valid");
            let eval = FilterEval::new(&spec, schedule);
            let max_filter = grid
                .values()
                .iter()
                .map(|&z| eval.value(z))
                .fold(0.0f64, f64::max);
            entries.push(DfsEntry { pair: (row, col), protected: max_filter < threshold, max_filter });
        }
    }
    entries
}

/// One row of a factor sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: SchemeTag,
    /// Per-qubit pulse counts `(q0, q1)`: nesting counts for the nested
    /// scheme, the shared count twice for the collective scheme.
    pub counts: (u32, u32),
    pub filter: FilterLabel,
    pub alpha: f64,
    /// The factor `I`; infinite when the integral diverges at the origin.
    pub factor: f64,
    pub converged: bool,
}

/// Configuration of a paired two-qubit sweep: for every nesting pair
/// `(L0, L1)` the collective comparison partner uses the same total pulse
/// number (`D = (L0 + (L0+1) L1) / 2` per qubit) and the same duration.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub duration: f64,
    pub nudd_pairs: Vec<(u32, u32)>,
    pub alphas: Vec<f64>,
    pub filters: Vec<FilterLabel>,
    pub rel_tol: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.nudd_pairs.is_empty() || self.alphas.is_empty() || self.filters.is_empty() {
            return Err(AnalysisError::Config("empty pair, alpha, or filter list".into()));
        }
        if !(self.duration > 0.0) || !(self.rel_tol > 0.0) {
            return Err(AnalysisError::Config("duration and tolerance must be positive".into()));
        }
        for &(l0, l1) in &self.nudd_pairs {
            let total = u64::from(l0) + (u64::from(l0) + 1) * u64::from(l1);
            if total == 0 || total % 2 != 0 {
                return Err(AnalysisError::Config(format!(
                    "pair ({l0},{l1}) has total pulse number {total}, which has no even split"
                )));
            }
            if l0 % 2 != 0 {
                return Err(AnalysisError::Config(format!("inner count L0 = {l0} must be even")));
            }
        }
        Ok(())
    }

    /// The matched collective pulse count per qubit for one nesting pair.
    pub fn matched_collective_count(l0: u32, l1: u32) -> u32 {
        let total = u64::from(l0) + (u64::from(l0) + 1) * u64::from(l1);
        (total / 2) as u32
    }
}

/// Runs every `(pair, scheme, filter, alpha)` combination; divergent rows
/// are flagged rather than aborting the sweep. Rows come back in config
/// order regardless of worker count.
pub fn factor_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, AnalysisError> {
    config.validate()?;

    struct Task {
        scheme: SchemeTag,
        counts: (u32, u32),
        schedule: PulseSchedule,
    }

    let mut tasks = Vec::new();
    for &(l0, l1) in &config.nudd_pairs {
        let counts = NuddLevelCounts::two_qubit(l0, l1)
            .map_err(|e| AnalysisError::Config(e.to_string()))?;
        let nudd = schedule::nudd_schedule(&counts, config.duration, 0.0)
            .map_err(|e| AnalysisError::Config(e.to_string()))?;
        tasks.push(Task { scheme: SchemeTag::Nudd, counts: (l0, l1), schedule: nudd });

        let d = SweepConfig::matched_collective_count(l0, l1);
        let sdd = schedule::sdd_schedule(2, d as usize, config.duration, 0.0)
            .map_err(|e| AnalysisError::Config(e.to_string()))?;
        tasks.push(Task { scheme: SchemeTag::Sdd, counts: (d, d), schedule: sdd });
    }

    let groups: Result<Vec<Vec<SweepRow>>, SpectraError> = tasks
        .par_iter()
        .map(|task| {
            let mut rows = Vec::new();
            for &label in &config.filters {
                for &alpha in &config.alphas {
                    let spec = label.to_spec(PulseModel::Ideal);
                    let row = match spectra::factor_i(&spec, &task.schedule, alpha, config.rel_tol)
                    {
                        Ok(r) => SweepRow {
                            scheme: task.scheme,
                            counts: task.counts,
                            filter: label,
                            alpha,
                            factor: r.value,
                            converged: r.converged,
                        },
                        Err(SpectraError::DivergentIntegral { .. }) => SweepRow {
                            scheme: task.scheme,
                            counts: task.counts,
                            filter: label,
                            alpha,
                            factor: f64::INFINITY,
                            converged: false,
                        },
                        Err(other) => return Err(other),
                    };
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect();

    Ok(groups?.into_iter().flatten().collect())
}

/// Serializes sweep rows as CSV with the fixed header
/// `scheme,counts,filter,alpha,I,converged` and 17-significant-digit
/// floats; identical rows produce byte-identical output.
pub fn write_sweep_csv(rows: &[SweepRow], writer: impl Write) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "counts", "filter", "alpha", "I", "converged"])
        .map_err(|e| AnalysisError::Csv(e.to_string()))?;
    for row in rows {
        w.write_record([
            row.scheme.to_string(),
            format!("({},{})", row.counts.0, row.counts.1),
            row.filter.to_string(),
            format!("{:.16e}", row.alpha),
            format!("{:.16e}", row.factor),
            row.converged.to_string(),
        ])
        .map_err(|e| AnalysisError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))?;
    Ok(())
}

/// Parses a sweep table produced by [`write_sweep_csv`].
pub fn read_sweep_csv(reader: impl Read) -> Result<Vec<SweepRow>, AnalysisError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| AnalysisError::Csv(e.to_string()))?;
        if record.len() != 6 {
            return Err(AnalysisError::Csv(format!("expected 6 columns, got {}", record.len())));
        }
        let scheme = match &record[0] {
            "SDD" => SchemeTag::Sdd,
            "NUDD" => SchemeTag::Nudd,
            "CUSTOM" => SchemeTag::Custom,
            other => return Err(AnalysisError::Csv(format!("unknown scheme '{other}'"))),
        };
        let counts_text = record[1].trim_matches(|c| c == '(' || c == ')');
        let mut it = counts_text.split(',');
        let parse_count = |s: Option<&str>| {
            s.and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| AnalysisError::Csv(format!("bad counts '{}'", &record[1])))
        };
        let counts = (parse_count(it.next())?, parse_count(it.next())?);
        let filter: FilterLabel =
            record[2].parse().map_err(AnalysisError::Csv)?;
        let alpha: f64 =
            record[3].parse().map_err(|e| AnalysisError::Csv(format!("alpha: {e}")))?;
        let factor: f64 = match &record[4] {
            "inf" => f64::INFINITY,
            v => v.parse().map_err(|e| AnalysisError::Csv(format!("I: {e}")))?,
        };
        let converged: bool =
            record[5].parse().map_err(|e| AnalysisError::Csv(format!("converged: {e}")))?;
        rows.push(SweepRow { scheme, counts, filter, alpha, factor, converged });
    }
    Ok(rows)
}
