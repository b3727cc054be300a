//! Coherence-element filter functions.
//!
//! A coherence element is labeled by a pair of basis states `(m, n)` of the
//! `N`-qubit register. Each qubit contributes its sampling function with
//! weight `m_j - n_j` (binary digits); a common reservoir adds the weighted
//! amplitudes coherently, independent reservoirs add intensities:
//!
//! ```text
//! F_mn^c(z) = | sum_j (m_j - n_j) f_j(z) |^2
//! F_mn^i(z) = sum_j |m_j - n_j| |f_j(z)|^2
//! ```
//!
//! Basis-label conventions: internally states are zero-based integers whose
//! binary digits give the per-qubit spin (`1` = up). The 1-based ket labels
//! used in two-qubit tables enumerate states from all-up downward, so ket
//! `|i>` is computational index `2^N - i`; [`ket_label_to_index`] and
//! [`index_to_ket_label`] translate.

use crate::doubledouble::DdComplex;
use crate::sampling::{self, SamplingTerms};
use crate::schedule::{PulseSchedule, SchemeTag};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Absolute floor under which an ideal filter value is treated as an exact
/// zero by the finite/ideal ratio: below any physically meaningful filter
/// value but above subnormal hazards.
pub const SINGULARITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("basis index {index} out of range for {num_qubits} qubits")]
    BadBasisIndex { index: usize, num_qubits: usize },
    #[error("ket label {label} out of range for {num_qubits} qubits")]
    BadKetLabel { label: usize, num_qubits: usize },
    #[error("modified filter needs z > 0, got {0}")]
    NonpositiveFrequency(f64),
}

/// Reservoir topology: one shared bath or one bath per qubit.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    Common,
    Independent,
}

/// Ideal delta pulses or rectangular pulses of the schedule's width.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PulseModel {
    Ideal,
    FiniteWidth,
}

/// Ket label `|label>` (1-based, all-up first) to computational index.
pub fn ket_label_to_index(label: usize, num_qubits: usize) -> Result<usize, FilterError> {
    let dim = 1usize << num_qubits;
    if label == 0 || label > dim {
        return Err(FilterError::BadKetLabel { label, num_qubits });
    }
    Ok(dim - label)
}

/// Computational index back to the 1-based ket label.
pub fn index_to_ket_label(index: usize, num_qubits: usize) -> Result<usize, FilterError> {
    let dim = 1usize << num_qubits;
    if index >= dim {
        return Err(FilterError::BadBasisIndex { index, num_qubits });
    }
    Ok(dim - index)
}

/// Selects a coherence element, reservoir topology, and pulse model.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct FilterSpec {
    /// Computational (zero-based) basis index of the row state.
    pub m: usize,
    /// Computational (zero-based) basis index of the column state.
    pub n: usize,
    pub topology: Topology,
    pub pulse_model: PulseModel,
}

impl FilterSpec {
    pub fn new(
        m: usize,
        n: usize,
        num_qubits: usize,
        topology: Topology,
        pulse_model: PulseModel,
    ) -> Result<FilterSpec, FilterError> {
        let dim = 1usize << num_qubits;
        if m >= dim {
            return Err(FilterError::BadBasisIndex { index: m, num_qubits });
        }
        if n >= dim {
            return Err(FilterError::BadBasisIndex { index: n, num_qubits });
        }
        Ok(FilterSpec { m, n, topology, pulse_model })
    }

    /// Build from 1-based ket labels, e.g. `(1, 4)` or `(2, 3)` for two
    /// qubits.
    pub fn from_ket_labels(
        row: usize,
        col: usize,
        num_qubits: usize,
        topology: Topology,
        pulse_model: PulseModel,
    ) -> Result<FilterSpec, FilterError> {
        Ok(FilterSpec {
            m: ket_label_to_index(row, num_qubits)?,
            n: ket_label_to_index(col, num_qubits)?,
            topology,
            pulse_model,
        })
    }

    /// The digit differences `m_j - n_j` for each qubit.
    pub fn digit_weights(&self, num_qubits: usize) -> Vec<i8> {
        (0..num_qubits)
            .map(|j| ((self.m >> j) & 1) as i8 - ((self.n >> j) & 1) as i8)
            .collect()
    }
}

/// The four named two-qubit filter labels used in sweep tables.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FilterLabel {
    F14c,
    F23c,
    F14i,
    F23i,
}

impl FilterLabel {
    pub const ALL: [FilterLabel; 4] =
        [FilterLabel::F14c, FilterLabel::F23c, FilterLabel::F14i, FilterLabel::F23i];

    pub fn ket_pair(self) -> (usize, usize) {
        match self {
            FilterLabel::F14c | FilterLabel::F14i => (1, 4),
            FilterLabel::F23c | FilterLabel::F23i => (2, 3),
        }
    }

    pub fn topology(self) -> Topology {
        match self {
            FilterLabel::F14c | FilterLabel::F23c => Topology::Common,
            FilterLabel::F14i | FilterLabel::F23i => Topology::Independent,
        }
    }

    pub fn to_spec(self, pulse_model: PulseModel) -> FilterSpec {
        let (row, col) = self.ket_pair();
        FilterSpec::from_ket_labels(row, col, 2, self.topology(), pulse_model)
            .expect("two-qubit labels are always valid")
    }
}

impl std::fmt::Display for FilterLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FilterLabel::F14c => "F14c",
            FilterLabel::F23c => "F23c",
            FilterLabel::F14i => "F14i",
            FilterLabel::F23i => "F23i",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for FilterLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "F14c" => Ok(FilterLabel::F14c),
            "F23c" => Ok(FilterLabel::F23c),
            "F14i" => Ok(FilterLabel::F14i),
            "F23i" => Ok(FilterLabel::F23i),
            other => Err(format!("unknown filter label '{other}' (expected F14c, F23c, F14i, F23i)")),
        }
    }
}

/// One distinct pulse row shared by one or more qubits.
#[derive(Clone, Debug)]
enum RowEval {
    Terms(SamplingTerms),
    /// Collective-sequence closed form; orders of magnitude faster for
    /// large pulse counts and accurate at low frequency without extended
    /// precision.
    SddClosed { d: usize, width_frac: f64 },
}

impl RowEval {
    fn eval_parts(&self, z: f64) -> (Complex64, Complex64, f64) {
        match self {
            RowEval::Terms(t) => {
                let (b, s) = t.eval_parts(z);
                (b, s, t.width_factor(z))
            }
            RowEval::SddClosed { d, width_frac } => {
                let f = sampling::sampling_sdd_closed(*d, z);
                // Even pulse count: boundary = 1 - e^{-iz}, with the real
                // part in the cancellation-free form 2 sin^2(z/2).
                let hs = (z / 2.0).sin();
                let b = Complex64::new(2.0 * hs * hs, z.sin());
                let wf = if *width_frac == 0.0 { 1.0 } else { (z * width_frac / 2.0).cos() };
                (b, f - b, wf)
            }
        }
    }

    /// `(boundary, interior, width_factor - 1)` in extended precision.
    fn eval_parts_dd(&self, z: f64) -> (DdComplex, DdComplex, f64) {
        use crate::doubledouble::Dd;
        match self {
            RowEval::Terms(t) => {
                let (b, s) = t.eval_parts_dd(z);
                (b, s, t.width_factor_minus_one(z))
            }
            RowEval::SddClosed { d, width_frac } => {
                // The closed form is a product of small factors: full
                // relative accuracy in f64 already.
                let f = sampling::sampling_sdd_closed(*d, z);
                let hs = (z / 2.0).sin();
                let b = Complex64::new(2.0 * hs * hs, z.sin());
                let s = DdComplex {
                    re: Dd::from_f64(f.re).add_f64(-b.re),
                    im: Dd::from_f64(f.im).add_f64(-b.im),
                };
                let b = DdComplex { re: Dd::from_f64(b.re), im: Dd::from_f64(b.im) };
                let wf1 = if *width_frac == 0.0 {
                    0.0
                } else {
                    let sw = (z * width_frac / 4.0).sin();
                    -2.0 * sw * sw
                };
                (b, s, wf1)
            }
        }
    }

    fn pulse_count(&self) -> usize {
        match self {
            RowEval::Terms(t) => t.pulse_count(),
            RowEval::SddClosed { d, .. } => *d,
        }
    }
}

/// Prepared evaluator for one filter spec against one schedule.
///
/// Qubits with identical pulse rows share an evaluation; in particular
/// collective schedules evaluate each distinct row once, which makes the
/// all-qubit coherent cancellation exact.
#[derive(Clone, Debug)]
pub struct FilterEval {
    rows: Vec<RowEval>,
    /// Per row: (coherent signed weight, incoherent absolute weight).
    weights: Vec<(f64, f64)>,
    topology: Topology,
    pulse_model: PulseModel,
    /// Merged coherent coefficient list for high-frequency averaging:
    /// (time fraction, coefficient, is_interior).
    coherent_coeffs: Vec<(f64, f64, bool)>,
}

impl FilterEval {
    pub fn new(spec: &FilterSpec, schedule: &PulseSchedule) -> FilterEval {
        let nq = schedule.num_qubits;
        let digit_weights = spec.digit_weights(nq);

        // Group qubits with identical time rows.
        let mut row_times: Vec<&Vec<f64>> = Vec::new();
        let mut weights: Vec<(f64, f64)> = Vec::new();
        for (j, w) in digit_weights.iter().enumerate() {
            if *w == 0 {
                continue;
            }
            let times = &schedule.times[j];
            let pos = row_times.iter().position(|r| *r == times);
            match pos {
                Some(i) => {
                    weights[i].0 += f64::from(*w);
                    weights[i].1 += 1.0;
                }
                None => {
                    row_times.push(times);
                    weights.push((f64::from(*w), 1.0));
                }
            }
        }

        let use_sdd_closed = schedule.scheme == SchemeTag::Sdd;
        let rows: Vec<RowEval> = row_times
            .iter()
            .map(|times| {
                if use_sdd_closed {
                    RowEval::SddClosed {
                        d: times.len(),
                        width_frac: schedule.pulse_width / schedule.total_duration,
                    }
                } else {
                    RowEval::Terms(SamplingTerms::new(
                        times,
                        schedule.total_duration,
                        schedule.pulse_width,
                    ))
                }
            })
            .collect();

        // Merged coherent coefficient list (used for the oscillation
        // average of F at high frequency).
        let mut coeffs: Vec<(f64, f64, bool)> = Vec::new();
        for (times, &(w, _)) in row_times.iter().zip(weights.iter()) {
            let d = times.len();
            let end = if d % 2 == 0 { -1.0 } else { 1.0 };
            coeffs.push((0.0, w, false));
            coeffs.push((1.0, w * end, false));
            let mut sign = -2.0;
            for &t in times.iter() {
                coeffs.push((t / schedule.total_duration, w * sign, true));
                sign = -sign;
            }
        }
        coeffs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64, bool)> = Vec::new();
        for (t, c, interior) in coeffs {
            match merged.last_mut() {
                Some(last) if (t - last.0).abs() <= 1e-12 && last.2 == interior => last.1 += c,
                _ => merged.push((t, c, interior)),
            }
        }

        FilterEval {
            rows,
            weights,
            topology: spec.topology,
            pulse_model: spec.pulse_model,
            coherent_coeffs: merged,
        }
    }

    /// `(F_ideal, F_finite)` from one pass over the sampling terms.
    pub fn value_pair(&self, z: f64) -> (f64, f64) {
        match self.topology {
            Topology::Common => {
                let mut ideal = Complex64::new(0.0, 0.0);
                let mut finite = Complex64::new(0.0, 0.0);
                for (row, &(w, _)) in self.rows.iter().zip(self.weights.iter()) {
                    if w == 0.0 {
                        continue;
                    }
                    let (b, s, wf) = row.eval_parts(z);
                    ideal += w * (b + s);
                    finite += w * (b + wf * s);
                }
                (ideal.norm_sqr(), finite.norm_sqr())
            }
            Topology::Independent => {
                let mut ideal = 0.0;
                let mut finite = 0.0;
                for (row, &(_, wa)) in self.rows.iter().zip(self.weights.iter()) {
                    let (b, s, wf) = row.eval_parts(z);
                    ideal += wa * (b + s).norm_sqr();
                    finite += wa * (b + wf * s).norm_sqr();
                }
                (ideal, finite)
            }
        }
    }

    /// Filter value under the spec's pulse model.
    pub fn value(&self, z: f64) -> f64 {
        let (ideal, finite) = self.value_pair(z);
        match self.pulse_model {
            PulseModel::Ideal => ideal,
            PulseModel::FiniteWidth => finite,
        }
    }

    /// Filter value under the spec's pulse model in double-double
    /// precision; needed below the `f64` cancellation floor of high-order
    /// sequences.
    pub fn value_dd(&self, z: f64) -> f64 {
        let finite = self.pulse_model == PulseModel::FiniteWidth;
        let model_value = |row: &RowEval| {
            let (b, s, wf1) = row.eval_parts_dd(z);
            let mut f = b.add(s);
            if finite && wf1 != 0.0 {
                f = f.add(DdComplex { re: s.re.mul_f64(wf1), im: s.im.mul_f64(wf1) });
            }
            f
        };
        match self.topology {
            Topology::Common => {
                let mut acc = DdComplex::ZERO;
                for (row, &(w, _)) in self.rows.iter().zip(self.weights.iter()) {
                    if w == 0.0 {
                        continue;
                    }
                    let f = model_value(row);
                    acc = acc.add(DdComplex { re: f.re.mul_f64(w), im: f.im.mul_f64(w) });
                }
                acc.norm_sqr()
            }
            Topology::Independent => {
                let mut acc = 0.0;
                for (row, &(_, wa)) in self.rows.iter().zip(self.weights.iter()) {
                    acc += wa * model_value(row).norm_sqr();
                }
                acc
            }
        }
    }

    /// Value under the spec's pulse model, switching to double-double when
    /// the `f64` result sits below the cancellation noise floor.
    pub fn value_model_accurate(&self, z: f64) -> f64 {
        let v = self.value(z);
        if v > self.noise_floor() {
            v
        } else {
            self.value_dd(z)
        }
    }

    /// Estimated squared cancellation noise of the plain f64 evaluation.
    ///
    /// Only term-sum rows cancel catastrophically; the collective closed
    /// form is a product of small factors and stays accurate at any
    /// magnitude, so closed rows contribute nothing here.
    pub fn noise_floor(&self) -> f64 {
        let amp: f64 = self
            .rows
            .iter()
            .zip(self.weights.iter())
            .filter(|(row, _)| matches!(row, RowEval::Terms(_)))
            .map(|(row, &(_, wa))| wa * (2.0 * row.pulse_count() as f64 + 2.0))
            .sum();
        let noise = amp * 1e-15;
        100.0 * noise * noise
    }

    /// Below this value, an evaluated filter cannot be distinguished from
    /// an exact zero at `z`: a one-ulp perturbation of the argument moves
    /// the sampling sums by up to `amp * z * eps`.
    pub fn zero_resolution(&self, z: f64) -> f64 {
        let amp: f64 = self
            .rows
            .iter()
            .zip(self.weights.iter())
            .map(|(row, &(_, wa))| wa * (2.0 * row.pulse_count() as f64 + 2.0))
            .sum();
        let wiggle = 2.0 * amp * z.abs() * f64::EPSILON;
        wiggle * wiggle
    }

    /// Triangle-inequality bound on the filter value.
    pub fn amplitude_bound(&self) -> f64 {
        match self.topology {
            Topology::Common => {
                let a: f64 = self
                    .rows
                    .iter()
                    .zip(self.weights.iter())
                    .map(|(row, &(w, _))| w.abs() * (2.0 * row.pulse_count() as f64 + 2.0))
                    .sum();
                a * a
            }
            Topology::Independent => self
                .rows
                .iter()
                .zip(self.weights.iter())
                .map(|(row, &(_, wa))| {
                    let a = 2.0 * row.pulse_count() as f64 + 2.0;
                    wa * a * a
                })
                .sum(),
        }
    }

    /// Oscillation average of `F(z)` for `z -> infinity`: squared
    /// coefficients of the distinct complex exponentials, with interior
    /// terms halved under the finite-width model (`<cos^2> = 1/2`).
    pub fn mean_high_freq(&self) -> f64 {
        let finite = self.pulse_model == PulseModel::FiniteWidth;
        match self.topology {
            Topology::Common => self
                .coherent_coeffs
                .iter()
                .map(|&(_, c, interior)| {
                    if interior && finite {
                        0.5 * c * c
                    } else {
                        c * c
                    }
                })
                .sum(),
            Topology::Independent => self
                .rows
                .iter()
                .zip(self.weights.iter())
                .map(|(row, &(_, wa))| {
                    let d = row.pulse_count() as f64;
                    let interior = if finite { 2.0 * d } else { 4.0 * d };
                    wa * (2.0 + interior)
                })
                .sum(),
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Total pulse count over participating distinct rows, weighted by
    /// multiplicity.
    pub fn total_pulses(&self) -> f64 {
        self.rows
            .iter()
            .zip(self.weights.iter())
            .map(|(row, &(_, wa))| wa * row.pulse_count() as f64)
            .sum()
    }

    /// Largest per-qubit pulse count among participating rows; sets the
    /// longest oscillation period (`~4 pi D`) of the filter.
    pub fn max_row_pulses(&self) -> usize {
        self.rows.iter().map(RowEval::pulse_count).max().unwrap_or(0)
    }
}

/// Common-reservoir filter `|sum_j (m_j - n_j) f_j(z)|^2`.
///
/// Panics if the spec's topology is not `Common` (programmer error).
pub fn filter_common(spec: &FilterSpec, schedule: &PulseSchedule, z: f64) -> f64 {
    assert_eq!(spec.topology, Topology::Common, "filter_common needs a common-topology spec");
    FilterEval::new(spec, schedule).value(z)
}

/// Independent-reservoir filter `sum_j |m_j - n_j| |f_j(z)|^2`.
pub fn filter_independent(spec: &FilterSpec, schedule: &PulseSchedule, z: f64) -> f64 {
    assert_eq!(
        spec.topology,
        Topology::Independent,
        "filter_independent needs an independent-topology spec"
    );
    FilterEval::new(spec, schedule).value(z)
}

/// Dimensionless modified filter `F(z) / z^2`; rejects `z <= 0` (the pole
/// of the weight belongs to the integrator, not this accessor).
pub fn modified_filter(spec: &FilterSpec, schedule: &PulseSchedule, z: f64) -> Result<f64, FilterError> {
    if z <= 0.0 {
        return Err(FilterError::NonpositiveFrequency(z));
    }
    Ok(FilterEval::new(spec, schedule).value(z) / (z * z))
}

/// A frequency at which the ideal filter is numerically indistinguishable
/// from zero while the finite-width filter is not.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SingularityMarker {
    pub z: f64,
}

/// Finite/ideal filter ratio, or a marker where the ideal filter vanishes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum RatioValue {
    Finite(f64),
    Singular(SingularityMarker),
}

impl RatioValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RatioValue::Finite(v) => Some(v),
            RatioValue::Singular(_) => None,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, RatioValue::Singular(_))
    }
}

/// `F_finite(z) / F_ideal(z)` for the schedule's pulse width.
///
/// Returns [`RatioValue::Singular`] when the ideal value sits below
/// [`SINGULARITY_FLOOR`] or below the evaluation noise floor — the ratio
/// is unbounded there (for collective sequences this happens exactly at
/// `z = 4 k D pi` when `sin(z tau_pi / 4T) != 0`).
pub fn ratio_finite_ideal(spec: &FilterSpec, schedule: &PulseSchedule, z: f64) -> RatioValue {
    FilterEval::new(spec, schedule).ratio(z)
}

impl FilterEval {
    /// Finite/ideal ratio at one frequency; see [`ratio_finite_ideal`].
    pub fn ratio(&self, z: f64) -> RatioValue {
        let (ideal, finite) = self.value_pair(z);
        let floor = SINGULARITY_FLOOR
            .max(self.noise_floor())
            .max(self.zero_resolution(z));
        if ideal < floor {
            RatioValue::Singular(SingularityMarker { z })
        } else {
            RatioValue::Finite(finite / ideal)
        }
    }
}

/// Predicted singular frequencies of the collective-sequence ratio:
/// `{4 k D pi : k = 1..=k_max}`.
pub fn sdd_singularity_grid(d: usize, k_max: usize) -> Vec<f64> {
    assert!(d % 2 == 0 && d > 0, "pulse count must be positive and even");
    (1..=k_max).map(|k| 4.0 * (k * d) as f64 * PI).collect()
}

/// Scans a frequency band for singular points of the finite/ideal ratio.
///
/// The band is sampled on `points` linear nodes; local spikes of the ratio
/// are refined by golden-section minimization of the ideal filter, and a
/// candidate is kept only when the refined minimum drops at least fifteen
/// orders of magnitude under the band's median — the signature of a true
/// zero rather than a deep oscillation dip.
pub fn detect_singularities(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    band: (f64, f64),
    points: usize,
) -> Vec<SingularityMarker> {
    assert!(points >= 16 && band.1 > band.0 && band.0 > 0.0);
    let eval = FilterEval::new(spec, schedule);
    let step = (band.1 - band.0) / (points - 1) as f64;
    let zs: Vec<f64> = (0..points).map(|i| band.0 + step * i as f64).collect();
    let mut ideal = Vec::with_capacity(points);
    let mut ratio = Vec::with_capacity(points);
    for &z in &zs {
        let (fi, ff) = eval.value_pair(z);
        ideal.push(fi);
        let floor = SINGULARITY_FLOOR
            .max(eval.noise_floor())
            .max(eval.zero_resolution(z));
        ratio.push(if fi < floor { f64::INFINITY } else { ff / fi });
    }

    let mut sorted_ideal = ideal.clone();
    sorted_ideal.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ideal = sorted_ideal[points / 2];
    let mut finite_ratios: Vec<f64> = ratio.iter().copied().filter(|r| r.is_finite()).collect();
    finite_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ratio = finite_ratios.get(finite_ratios.len() / 2).copied().unwrap_or(1.0);
    let threshold = 1e3_f64.max(1e3 * median_ratio);

    let mut markers: Vec<SingularityMarker> = Vec::new();
    for i in 1..points - 1 {
        let r = ratio[i];
        if !(r > threshold) || r < ratio[i - 1] || r < ratio[i + 1] {
            continue;
        }
        let z_star = golden_min(|z| eval.value_pair(z).0, zs[i - 1], zs[i + 1]);
        let f_min = eval.value_pair(z_star).0;
        if f_min < 1e-15 * median_ideal {
            let resolved = markers.last().map_or(true, |m| z_star - m.z > 2.0 * step);
            if resolved {
                markers.push(SingularityMarker { z: z_star });
            }
        }
    }
    markers
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
