//! Per-qubit complex sampling functions `f(z)` at dimensionless frequency
//! `z = omega * T`.
//!
//! The normative definition is the finite sum over a qubit's pulse times
//! `t_d` (fractions of the total duration):
//!
//! ```text
//! f(z) = 1 + (-1)^(D+1) e^(-i z) + 2 sum_{d=1..D} (-1)^d e^(-i z t_d)
//! ```
//!
//! Scheme-specific closed forms ([`sampling_sdd_closed`],
//! [`sampling_nudd_closed`]) evaluate the same quantity and are verified
//! against the generic sum; the finite-width modification multiplies only
//! the interior-pulse sum by `cos(z * tau_pi / (2T))`.
//!
//! All entry points take `z = omega * T`; callers holding a physical
//! frequency divide by `T` once at the boundary.

use crate::doubledouble::{Dd, DdComplex};
use crate::schedule::{self, NuddLevelCounts, PulseSchedule};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Below this magnitude of `cos(z / 2D)` the collective-sequence closed
/// form switches to the generic sum; the zero of the denominator is
/// removable for even pulse counts but catastrophically cancels nearby.
/// At `1e-3` the closed form's absolute error stays under `~1e-11` for
/// pulse counts up to 32 (the error grows like `(2D+2) eps / |cos|`).
const SDD_COS_FLOOR: f64 = 1e-3;

/// Generic sampling sum over explicit pulse center times.
///
/// `times` are absolute times in `(0, total)`; the result only depends on
/// the fractions `times / total`.
pub fn sampling_generic(times: &[f64], total: f64, z: f64) -> Complex64 {
    let d = times.len();
    let end_coeff = if d % 2 == 0 { -1.0 } else { 1.0 };
    let mut acc = Complex64::new(1.0, 0.0) + end_coeff * Complex64::from_polar(1.0, -z);
    let mut sign = -2.0;
    for &t in times {
        acc += sign * Complex64::from_polar(1.0, -z * (t / total));
        sign = -sign;
    }
    acc
}

/// Generic sampling sum carried in double-double precision.
///
/// Use this where the true value sits far below the `~1e-16` cancellation
/// floor of [`sampling_generic`] (low-frequency tails of high-order
/// sequences). The absolute noise floor is roughly `1e-31` per term.
pub fn sampling_generic_dd(times: &[f64], total: f64, z: f64) -> Complex64 {
    let d = times.len();
    let end_coeff = if d % 2 == 0 { -1.0 } else { 1.0 };
    let mut acc = DdComplex { re: Dd::ONE, im: Dd::ZERO };
    acc = acc.add_weighted_cis_neg(end_coeff, Dd::from_f64(z));
    let mut sign = -2.0;
    for &t in times {
        // theta = z * (t / total) in double-double: the division first, as
        // an exact-quotient correction, then the product.
        let frac = Dd::from_f64(t).div_f64(total);
        let theta = frac.mul_f64(z);
        acc = acc.add_weighted_cis_neg(sign, theta);
        sign = -sign;
    }
    acc.to_complex64()
}

/// Closed form for the collective symmetric sequence with `D` pulses per
/// qubit (even): `-4i e^(-iz/2) sin(z/2) sin^2(z/4D) / cos(z/2D)`.
///
/// At zeros of the denominator (`z = (2k+1) D pi`) the singularity is
/// removable; the implementation falls back to the generic sum there, so
/// the function is total.
pub fn sampling_sdd_closed(d: usize, z: f64) -> Complex64 {
    assert!(d > 0 && d % 2 == 0, "collective sequence needs positive even D");
    let dn = d as f64;
    let den = (z / (2.0 * dn)).cos();
    if den.abs() < SDD_COS_FLOOR {
        let times: Vec<f64> = (1..=d).map(|k| (2 * k - 1) as f64 / (2.0 * dn)).collect();
        return sampling_generic(&times, 1.0, z);
    }
    let half = z / 2.0;
    let s = (z / (4.0 * dn)).sin();
    let amp = 4.0 * half.sin() * s * s / den;
    // -i * amp * e^{-i z/2}
    Complex64::new(-amp * half.sin(), -amp * half.cos())
}

/// Closed form for one nesting level of the nested Uhrig construction.
///
/// Each interval `(a, b)` of the partition induced by the coarser levels
/// contributes `e^(-i z m / T) * K(z (b-a) / 2T)` with `m` the interval
/// midpoint and `K` the single-interval Uhrig kernel
/// `sum_{l=-L-1..L} (-1)^l e^(i x cos(l pi / (L+1)))`. The result equals
/// [`sampling_generic`] on the level's pulse times.
pub fn sampling_nudd_closed(counts: &NuddLevelCounts, level: usize, total: f64, z: f64) -> Complex64 {
    assert!(level < counts.num_levels());
    let l = counts.level_count(level);
    let intervals = schedule::nudd_level_intervals(counts, level, total);
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in intervals {
        let x = z * (b - a) / (2.0 * total);
        let kernel = udd_kernel(l, x);
        let mid = 0.5 * (a + b);
        acc += Complex64::from_polar(1.0, -z * mid / total) * kernel;
    }
    acc
}

/// `sum_{l=-L-1..L} (-1)^l e^(i x cos(l pi / (L+1)))`, folded over the
/// even symmetry of the cosine.
fn udd_kernel(l: u32, x: f64) -> Complex64 {
    let end_sign = if l % 2 == 0 { -1.0 } else { 1.0 };
    let mut k = Complex64::from_polar(1.0, x) + end_sign * Complex64::from_polar(1.0, -x);
    let mut sign = -2.0;
    for li in 1..=l {
        let c = (f64::from(li) * PI / f64::from(l + 1)).cos();
        k += sign * Complex64::from_polar(1.0, x * c);
        sign = -sign;
    }
    k
}

/// Sampling value of one qubit under rectangular pulses of the schedule's
/// width: only the interior-pulse sum picks up the factor
/// `cos(z tau_pi / 2T)`, the boundary terms are untouched. Identical to
/// the ideal value at zero width.
pub fn sampling_finite_width(schedule: &PulseSchedule, qubit: usize, z: f64) -> Complex64 {
    if schedule.pulse_width == 0.0 {
        return sampling_generic(&schedule.times[qubit], schedule.total_duration, z);
    }
    let terms = SamplingTerms::for_qubit(schedule, qubit);
    let (boundary, interior) = terms.eval_parts(z);
    boundary + terms.width_factor(z) * interior
}

/// Uhrig timing carried in double-double precision.
///
/// Schedules store `f64` times; the rounding perturbs the exactly-zero low
/// moments of the pulse coefficients by about 1e-16, which floors the
/// stored schedule's low-frequency suppression near `|f| ~ 1e-16 z`. For
/// order-`L` slopes beyond what that floor allows (large `L` at small
/// `z`), evaluate from these extended-precision times instead.
pub fn udd_times_dd(l: u32, start: Dd, end: Dd) -> Vec<Dd> {
    // pi as a double-double constant.
    const PI_DD: Dd = Dd { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };
    let span = end.sub(start);
    (1..=l)
        .map(|k| {
            let angle = PI_DD.mul_f64(f64::from(k)).div_f64(2.0 * f64::from(l) + 2.0);
            let (s, _) = crate::doubledouble::sincos(angle);
            start.add(span.mul(s.sqr()))
        })
        .collect()
}

/// Pulse-time fractions of every nesting level in double-double precision
/// (total duration normalized to 1); index 0 is the innermost level.
pub fn nudd_level_times_dd(counts: &NuddLevelCounts) -> Vec<Vec<Dd>> {
    let n = counts.num_levels();
    let mut result = vec![Vec::new(); n];
    let mut boundaries = vec![Dd::ZERO, Dd::ONE];
    for level in (0..n).rev() {
        let l = counts.level_count(level);
        let mut level_times = Vec::new();
        for w in boundaries.windows(2) {
            level_times.extend(udd_times_dd(l, w[0], w[1]));
        }
        if l > 0 {
            let mut merged = Vec::with_capacity(boundaries.len() + level_times.len());
            merged.extend_from_slice(&boundaries);
            merged.extend_from_slice(&level_times);
            merged.sort_by(|a, b| a.hi.partial_cmp(&b.hi).unwrap());
            boundaries = merged;
        }
        result[level] = level_times;
    }
    result
}

/// Generic sampling sum over extended-precision time fractions.
pub fn sampling_generic_dd_times(times: &[Dd], z: f64) -> DdComplex {
    let d = times.len();
    let end_coeff = if d % 2 == 0 { -1.0 } else { 1.0 };
    let mut acc = DdComplex { re: Dd::ONE, im: Dd::ZERO };
    acc = acc.add_weighted_cis_neg(end_coeff, Dd::from_f64(z));
    let mut sign = -2.0;
    for &t in times {
        acc = acc.add_weighted_cis_neg(sign, t.mul_f64(z));
        sign = -sign;
    }
    acc
}

/// Precomputed per-qubit term list for repeated evaluation on grids.
///
/// Splits the sum into the boundary part `1 + (-1)^(D+1) e^(-iz)` and the
/// interior part `2 sum (-1)^d e^(-i z t_d)` so that ideal and finite-width
/// values come out of a single pass.
#[derive(Clone, Debug)]
pub struct SamplingTerms {
    fracs: Vec<f64>,
    end_coeff: f64,
    width_frac: f64,
}

impl SamplingTerms {
    pub fn for_qubit(schedule: &PulseSchedule, qubit: usize) -> SamplingTerms {
        SamplingTerms::new(
            &schedule.times[qubit],
            schedule.total_duration,
            schedule.pulse_width,
        )
    }

    pub fn new(times: &[f64], total: f64, pulse_width: f64) -> SamplingTerms {
        SamplingTerms {
            fracs: times.iter().map(|&t| t / total).collect(),
            end_coeff: if times.len() % 2 == 0 { -1.0 } else { 1.0 },
            width_frac: pulse_width / total,
        }
    }

    pub fn pulse_count(&self) -> usize {
        self.fracs.len()
    }

    /// Triangle-inequality bound `2D + 2` on `|f|`.
    pub fn amplitude_bound(&self) -> f64 {
        2.0 * self.fracs.len() as f64 + 2.0
    }

    /// `cos(z tau_pi / 2T)` applied to interior terms under finite width.
    #[inline]
    pub fn width_factor(&self, z: f64) -> f64 {
        if self.width_frac == 0.0 {
            1.0
        } else {
            (z * self.width_frac / 2.0).cos()
        }
    }

    /// `width_factor(z) - 1` evaluated without cancellation:
    /// `-2 sin^2(z tau_pi / 4T)`.
    #[inline]
    pub fn width_factor_minus_one(&self, z: f64) -> f64 {
        if self.width_frac == 0.0 {
            0.0
        } else {
            let s = (z * self.width_frac / 4.0).sin();
            -2.0 * s * s
        }
    }

    /// `(boundary, interior)` with `f_ideal = boundary + interior` and
    /// `f_finite = boundary + width_factor(z) * interior`.
    pub fn eval_parts(&self, z: f64) -> (Complex64, Complex64) {
        let (s, c) = z.sin_cos();
        let boundary = Complex64::new(1.0 + self.end_coeff * c, -self.end_coeff * s);
        let mut interior = Complex64::new(0.0, 0.0);
        let mut sign = -2.0;
        for &t in &self.fracs {
            let (st, ct) = (z * t).sin_cos();
            interior += Complex64::new(sign * ct, -sign * st);
            sign = -sign;
        }
        (boundary, interior)
    }

    #[inline]
    pub fn ideal(&self, z: f64) -> Complex64 {
        let (b, s) = self.eval_parts(z);
        b + s
    }

    #[inline]
    pub fn finite(&self, z: f64) -> Complex64 {
        let (b, s) = self.eval_parts(z);
        b + self.width_factor(z) * s
    }

    /// Double-double evaluation of `(boundary, interior)`.
    pub fn eval_parts_dd(&self, z: f64) -> (DdComplex, DdComplex) {
        let mut boundary = DdComplex { re: Dd::ONE, im: Dd::ZERO };
        boundary = boundary.add_weighted_cis_neg(self.end_coeff, Dd::from_f64(z));
        let mut interior = DdComplex::ZERO;
        let mut sign = -2.0;
        for &t in &self.fracs {
            let theta = Dd::from_prod(z, t);
            interior = interior.add_weighted_cis_neg(sign, theta);
            sign = -sign;
        }
        (boundary, interior)
    }

    pub fn ideal_dd(&self, z: f64) -> DdComplex {
        let (b, s) = self.eval_parts_dd(z);
        b.add(s)
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least two points")]
    TooFew,
    #[error("grid values must be positive, got {0}")]
    Nonpositive(f64),
    #[error("grid values must be strictly increasing at {0}")]
    NotIncreasing(f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GridSpacing {
    Linear,
    Logarithmic,
    Custom,
}

/// Ordered positive dimensionless frequencies `z = omega * T`.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    values: Vec<f64>,
    spacing: GridSpacing,
}

impl FrequencyGrid {
    pub fn linear(min: f64, max: f64, points: usize) -> Result<FrequencyGrid, GridError> {
        if points < 2 {
            return Err(GridError::TooFew);
        }
        let step = (max - min) / (points - 1) as f64;
        let values = (0..points).map(|i| min + step * i as f64).collect();
        Self::checked(values, GridSpacing::Linear)
    }

    pub fn logarithmic(min: f64, max: f64, points: usize) -> Result<FrequencyGrid, GridError> {
        if points < 2 {
            return Err(GridError::TooFew);
        }
        if min <= 0.0 {
            return Err(GridError::Nonpositive(min));
        }
        let lmin = min.ln();
        let step = (max.ln() - lmin) / (points - 1) as f64;
        let values = (0..points).map(|i| (lmin + step * i as f64).exp()).collect();
        Self::checked(values, GridSpacing::Logarithmic)
    }

    pub fn custom(values: Vec<f64>) -> Result<FrequencyGrid, GridError> {
        Self::checked(values, GridSpacing::Custom)
    }

    /// The hard-coded figure sampling plan: step `1e-4` on `[1e-3, 10]`,
    /// then step `100` up to `1e8`.
    pub fn fig4() -> FrequencyGrid {
        let mut values = Vec::with_capacity(1_100_000);
        let mut k = 0u64;
        loop {
            let z = 1e-3 + 1e-4 * k as f64;
            if z > 10.0 + 1e-9 {
                break;
            }
            values.push(z);
            k += 1;
        }
        let mut k = 1u64;
        loop {
            let z = 10.0 + 100.0 * k as f64;
            if z > 1e8 {
                break;
            }
            values.push(z);
            k += 1;
        }
        FrequencyGrid { values, spacing: GridSpacing::Custom }
    }

    fn checked(values: Vec<f64>, spacing: GridSpacing) -> Result<FrequencyGrid, GridError> {
        if values.len() < 2 {
            return Err(GridError::TooFew);
        }
        if values[0] <= 0.0 {
            return Err(GridError::Nonpositive(values[0]));
        }
        for w in values.windows(2) {
            if w[1] <= w[0] {
                return Err(GridError::NotIncreasing(w[1]));
            }
        }
        Ok(FrequencyGrid { values, spacing })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> GridSpacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{custom_schedule, nudd_schedule, sdd_schedule};

    fn assert_complex_close(a: Complex64, b: Complex64, tol: f64) {
        assert!((a - b).norm() <= tol, "{a} vs {b} (|diff| = {:e})", (a - b).norm());
    }

    #[test]
    fn generic_free_evolution() {
        for &z in &[0.1, 1.0, 5.5, 100.0] {
            let f = sampling_generic(&[], 1.0, z);
            let expected = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -z);
            assert_complex_close(f, expected, 1e-15);
        }
    }

    #[test]
    fn generic_even_count_vanishes_at_zero() {
        let f = sampling_generic(&[0.25, 0.75], 1.0, 0.0);
        assert_eq!(f, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn generic_two_pulse_at_two_pi() {
        let f = sampling_generic(&[0.25, 0.75], 1.0, 2.0 * PI);
        assert_complex_close(f, Complex64::new(0.0, 4.0), 1e-14);
    }

    #[test]
    fn generic_conjugate_symmetry() {
        let times = [0.11, 0.34, 0.56, 0.9];
        for &z in &[0.3, 2.0, 17.5] {
            let plus = sampling_generic(&times, 1.0, z);
            let minus = sampling_generic(&times, 1.0, -z);
            assert_complex_close(minus, plus.conj(), 1e-14);
        }
    }

    #[test]
    fn sdd_closed_matches_generic() {
        for &d in &[2usize, 4, 8, 24] {
            let s = sdd_schedule(1, d, 1.0, 0.0).unwrap();
            let mut z = 1e-3;
            while z < 1e4 {
                let closed = sampling_sdd_closed(d, z);
                let generic = sampling_generic(&s.times[0], 1.0, z);
                let tol = 1e-10 * (2.0 * d as f64 + 2.0);
                assert_complex_close(closed, generic, tol);
                z *= 1.7;
            }
        }
    }

    #[test]
    fn sdd_closed_small_z() {
        let f = sampling_sdd_closed(2, 1e-9);
        assert!(f.norm() < 1e-12);
    }

    #[test]
    fn sdd_removable_point_falls_back() {
        // z = 2 pi is a removable 0/0 point for D = 2.
        let f = sampling_sdd_closed(2, 2.0 * PI);
        assert_complex_close(f, Complex64::new(0.0, 4.0), 1e-12);
        // D = 4 at z = 1 against the explicit times.
        let f4 = sampling_sdd_closed(4, 1.0);
        let g4 = sampling_generic(&[0.125, 0.375, 0.625, 0.875], 1.0, 1.0);
        assert_complex_close(f4, g4, 1e-12);
    }

    #[test]
    fn nudd_closed_outermost_hahn() {
        let counts = NuddLevelCounts::new(vec![1, 0]).unwrap();
        let f = sampling_nudd_closed(&counts, 1, 1.0, PI);
        assert_complex_close(f, Complex64::new(0.0, 2.0), 1e-14);
    }

    #[test]
    fn nudd_closed_vanishes_at_zero_for_even_level() {
        let counts = NuddLevelCounts::two_qubit(2, 2).unwrap();
        let f = sampling_nudd_closed(&counts, 1, 1.0, 1e-12);
        assert!(f.norm() < 1e-10);
    }

    #[test]
    fn nudd_closed_matches_generic_inner_level() {
        let counts = NuddLevelCounts::two_qubit(2, 2).unwrap();
        let s = nudd_schedule(&counts, 1.0, 0.0).unwrap();
        for &z in &[1.0, 2.7, 9.3, 50.0] {
            let closed = sampling_nudd_closed(&counts, 0, 1.0, z);
            let generic = sampling_generic(&s.times[0], 1.0, z);
            assert_complex_close(closed, generic, 1e-12);
        }
        // Three levels, including a degenerate one.
        let counts3 = NuddLevelCounts::new(vec![3, 2, 2]).unwrap();
        let s3 = nudd_schedule(&counts3, 2.0, 0.0).unwrap();
        for level in 0..3 {
            for &z in &[0.7, 4.1, 23.0] {
                let closed = sampling_nudd_closed(&counts3, level, 2.0, z);
                let generic = sampling_generic(&s3.times[level], 2.0, z);
                assert_complex_close(closed, generic, 1e-11);
            }
        }
    }

    #[test]
    fn finite_width_reduces_to_ideal_at_zero_width() {
        let s = sdd_schedule(2, 4, 1.0, 0.0).unwrap();
        for &z in &[0.5, 3.3, 40.0] {
            let fw = sampling_finite_width(&s, 0, z);
            let ideal = sampling_generic(&s.times[0], 1.0, z);
            assert_eq!(fw, ideal);
        }
    }

    #[test]
    fn finite_width_sdd_example() {
        let s = sdd_schedule(2, 2, 1.0, 0.01).unwrap();
        let z = 2.0 * PI;
        let fw = sampling_finite_width(&s, 0, z);
        let expected = (0.01 * PI).cos() * Complex64::new(0.0, 4.0);
        // The boundary correction (1 - e^{-2 pi i}) vanishes.
        assert_complex_close(fw, expected, 1e-12);
    }

    #[test]
    fn finite_width_boundary_correction_identity() {
        // f_r = cos(w) f + (1 - cos(w)) (1 + (-1)^(D+1) e^{-iz}) exactly.
        let counts = NuddLevelCounts::two_qubit(2, 2).unwrap();
        let s = nudd_schedule(&counts, 1.0, 0.005).unwrap();
        let z = 10.0;
        for qubit in 0..2 {
            let fw = sampling_finite_width(&s, qubit, z);
            let ideal = sampling_generic(&s.times[qubit], 1.0, z);
            let w = (z * 0.005 / 2.0).cos();
            let d = s.times[qubit].len();
            let end = if d % 2 == 0 { -1.0 } else { 1.0 };
            let boundary = Complex64::new(1.0, 0.0) + end * Complex64::from_polar(1.0, -z);
            let expected = w * ideal + (1.0 - w) * boundary;
            assert_complex_close(fw, expected, 1e-13);
        }
    }

    #[test]
    fn boundedness_on_random_schedules() {
        // Deterministic pseudo-random times via a simple LCG.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let d = 1 + (next() * 12.0) as usize;
            let mut times: Vec<f64> = (0..d).map(|_| 0.01 + 0.98 * next()).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let z = 10f64.powf(next() * 6.0 - 3.0);
            let f = sampling_generic(&times, 1.0, z);
            assert!(f.norm() <= 2.0 * times.len() as f64 + 2.0 + 1e-12);
        }
    }

    #[test]
    fn dd_agrees_with_f64_at_moderate_z() {
        let times = [0.11, 0.34, 0.56, 0.9];
        for &z in &[0.5, 3.0, 25.0] {
            let a = sampling_generic(&times, 1.0, z);
            let b = sampling_generic_dd(&times, 1.0, z);
            assert_complex_close(a, b, 1e-13);
        }
    }

    #[test]
    fn dd_resolves_low_frequency_power_law() {
        // Uhrig order 2: |f| ~ |mu_3| z^3 / 6, far below the f64
        // cancellation floor at z = 1e-4. The double-double value must
        // scale by 8 when z doubles.
        let times = udd_fracs(2);
        let f1 = sampling_generic_dd(&times, 1.0, 1e-4);
        let f2 = sampling_generic_dd(&times, 1.0, 2e-4);
        let ratio = f2.norm() / f1.norm();
        assert!((ratio / 8.0 - 1.0).abs() < 1e-3, "ratio {ratio}");
        // Leading coefficient: mu_3 = -0.1875 for Uhrig-2.
        let expected = 0.1875 * 1e-12 / 6.0;
        assert!((f1.norm() / expected - 1.0).abs() < 1e-3);
    }

    fn udd_fracs(l: u32) -> Vec<f64> {
        crate::schedule::udd_times(l, 0.0, 1.0)
    }

    #[test]
    fn dd_timing_restores_exact_moment_cancellation() {
        use crate::doubledouble::Dd;
        // Stored f64 times leave ~1e-16 in the first moment; the
        // double-double timing path leaves ~1e-31.
        let f64_times = udd_fracs(4);
        let dd_times = udd_times_dd(4, Dd::ZERO, Dd::ONE);
        for (a, b) in f64_times.iter().zip(dd_times.iter()) {
            assert!((a - b.hi).abs() < 1e-15);
        }
        let mu1 = |ts: &[(f64, f64)]| {
            // sum c t with coefficients [1, -2, +2, ..., (-1)^(D+1)] at
            // t = 0, t_d, 1.
            let mut acc = Dd::ZERO;
            let mut sign = -2.0;
            for &(hi, lo) in ts {
                acc = acc.add(Dd { hi, lo }.mul_f64(sign));
                sign = -sign;
            }
            acc.add_f64(-1.0) // boundary t=1 coefficient for even D
        };
        let m_f64 = mu1(&f64_times.iter().map(|&t| (t, 0.0)).collect::<Vec<_>>());
        let m_dd = mu1(&dd_times.iter().map(|&t| (t.hi, t.lo)).collect::<Vec<_>>());
        assert!(m_dd.to_f64().abs() < 1e-29, "dd first moment {:e}", m_dd.to_f64());
        assert!(m_f64.to_f64().abs() < 1e-14);

        // Order-8 Uhrig at z = 0.02: |f|^2 follows z^18 only on the exact
        // timing path; the stored times flatten it twelve orders higher.
        let e8 = udd_times_dd(8, Dd::ZERO, Dd::ONE);
        let f1 = sampling_generic_dd_times(&e8, 0.02).norm_sqr();
        let f2 = sampling_generic_dd_times(&e8, 0.04).norm_sqr();
        let ratio = f2 / f1;
        assert!((ratio / 262144.0 - 1.0).abs() < 0.02, "ratio {ratio}");
        let stored = udd_fracs(8);
        let contaminated = sampling_generic_dd(&stored, 1.0, 0.02).norm_sqr();
        assert!(contaminated > 100.0 * f1, "stored-time floor should dominate");
    }

    #[test]
    fn dd_timing_nested_levels() {
        let counts = NuddLevelCounts::two_qubit(2, 2).unwrap();
        let per_level = nudd_level_times_dd(&counts);
        let s = nudd_schedule(&counts, 1.0, 0.0).unwrap();
        for level in 0..2 {
            assert_eq!(per_level[level].len(), s.times[level].len());
            for (a, b) in per_level[level].iter().zip(s.times[level].iter()) {
                assert!((a.hi - b).abs() < 1e-15);
            }
            // Moderate z: dd-timing value matches the generic sum.
            let f_dd = sampling_generic_dd_times(&per_level[level], 3.7).to_complex64();
            let f_gen = sampling_generic(&s.times[level], 1.0, 3.7);
            assert_complex_close(f_dd, f_gen, 1e-13);
        }
    }

    #[test]
    fn terms_split_consistency() {
        let s = custom_schedule(vec![vec![0.2, 0.5, 0.7]], 1.0, 0.002).unwrap();
        let terms = SamplingTerms::for_qubit(&s, 0);
        for &z in &[0.4, 7.0, 300.0] {
            assert_complex_close(terms.ideal(z), sampling_generic(&s.times[0], 1.0, z), 1e-13);
            assert_complex_close(terms.finite(z), sampling_finite_width(&s, 0, z), 1e-13);
        }
        assert_eq!(terms.amplitude_bound(), 8.0);
    }

    #[test]
    fn grid_constructors() {
        let lin = FrequencyGrid::linear(1.0, 2.0, 11).unwrap();
        assert_eq!(lin.len(), 11);
        assert!((lin.values()[5] - 1.5).abs() < 1e-15);

        let log = FrequencyGrid::logarithmic(1e-3, 1e3, 7).unwrap();
        assert!((log.values()[3] - 1.0).abs() < 1e-12);

        assert!(FrequencyGrid::custom(vec![1.0, 0.5]).is_err());
        assert!(FrequencyGrid::custom(vec![-1.0, 0.5]).is_err());
        assert!(FrequencyGrid::linear(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn fig4_grid_plan() {
        let grid = FrequencyGrid::fig4();
        let v = grid.values();
        assert!((v[0] - 1e-3).abs() < 1e-18);
        assert!((v[1] - v[0] - 1e-4).abs() < 1e-12);
        // Fine segment ends at 10, coarse segment steps by 100.
        let split = v.iter().position(|&z| z > 10.0 + 1e-9).unwrap();
        assert!((v[split - 1] - 10.0).abs() < 1e-9);
        assert!((v[split] - 110.0).abs() < 1e-9);
        assert!((v[split + 1] - v[split] - 100.0).abs() < 1e-9);
        assert!(*v.last().unwrap() <= 1e8);
        assert!(*v.last().unwrap() > 1e8 - 200.0);
        for w in v.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
