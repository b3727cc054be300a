//! Noise models, the decoherence functional, and the convergent improper
//! integral `I`.
//!
//! For power-law noise `S(omega) = S0 / omega^alpha` the decoherence
//! exponent factorizes as `chi(T) = S0 * T^(alpha+1) * I` with
//!
//! ```text
//! I = integral_0^inf F(z) / z^(alpha+2) dz
//! ```
//!
//! a duration-independent figure of merit of the pulse sequence alone
//! (smaller is better). The integral is split into three segments:
//!
//! 1. `[0, z_lo]`: the filter follows a power law `C z^s`; fitted on a
//!    verified band and integrated analytically. The integral diverges at
//!    the origin when `s <= alpha + 1`, which is reported as
//!    [`SpectraError::DivergentIntegral`] carrying the fitted exponent.
//! 2. `[z_lo, z_hi]`: composite Gauss-Kronrod quadrature with panels no
//!    wider than the filter's fastest oscillation scale.
//! 3. `(z_hi, inf)`: the oscillation average of `F` integrated in closed
//!    form, plus a rigorous bound from the triangle inequality reported as
//!    `tail_bound`.

use crate::filter::{FilterEval, FilterSpec};
use crate::quad;
use crate::schedule::PulseSchedule;
use num_complex::Complex64;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("integral diverges at the origin: fitted filter exponent {exponent:.3} <= alpha + 1")]
    DivergentIntegral { exponent: f64 },
    #[error("could not isolate a low-frequency power law (r^2 = {r_squared:.6})")]
    DegenerateFit { r_squared: f64 },
    #[error("spectral table: {0}")]
    Table(String),
    #[error("noise model: {0}")]
    BadModel(String),
}

/// Tabulated spectral density `J(omega)`: linear interpolation between
/// samples, zero outside the table.
#[derive(Clone, Debug)]
pub struct TabulatedDensity {
    omegas: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(omegas: Vec<f64>, values: Vec<f64>) -> Result<TabulatedDensity, SpectraError> {
        if omegas.len() != values.len() || omegas.len() < 2 {
            return Err(SpectraError::Table("need at least two (omega, J) rows".into()));
        }
        for w in omegas.windows(2) {
            if w[1] <= w[0] {
                return Err(SpectraError::Table(format!("omega not increasing at {}", w[1])));
            }
        }
        if omegas[0] <= 0.0 {
            return Err(SpectraError::Table("omega values must be positive".into()));
        }
        if values.iter().any(|&j| j < 0.0 || !j.is_finite()) {
            return Err(SpectraError::Table("J(omega) must be finite and nonnegative".into()));
        }
        Ok(TabulatedDensity { omegas, values })
    }

    /// Two-column CSV `omega,J`; a non-numeric first row is treated as a
    /// header.
    pub fn from_csv_reader(reader: impl Read) -> Result<TabulatedDensity, SpectraError> {
        let (a, b) = read_two_columns(reader).map_err(SpectraError::Table)?;
        TabulatedDensity::new(a, b)
    }

    pub fn from_csv_path(path: &Path) -> Result<TabulatedDensity, SpectraError> {
        let file = std::fs::File::open(path)
            .map_err(|e| SpectraError::Table(format!("{}: {e}", path.display())))?;
        TabulatedDensity::from_csv_reader(file)
    }

    pub fn value(&self, omega: f64) -> f64 {
        if omega < self.omegas[0] || omega > *self.omegas.last().unwrap() {
            return 0.0;
        }
        let idx = match self.omegas.binary_search_by(|o| o.partial_cmp(&omega).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (o0, o1) = (self.omegas[idx - 1], self.omegas[idx]);
        let (j0, j1) = (self.values[idx - 1], self.values[idx]);
        j0 + (j1 - j0) * (omega - o0) / (o1 - o0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.omegas[0], *self.omegas.last().unwrap())
    }
}

pub(crate) fn read_two_columns(reader: impl Read) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != 2 {
            return Err(format!("row {}: expected 2 columns, got {}", i + 1, record.len()));
        }
        let a = record[0].trim().parse::<f64>();
        let b = record[1].trim().parse::<f64>();
        match (a, b) {
            (Ok(a), Ok(b)) => {
                first.push(a);
                second.push(b);
            }
            _ if i == 0 => continue, // header row
            _ => return Err(format!("row {}: could not parse numbers", i + 1)),
        }
    }
    Ok((first, second))
}

/// Parametric or tabulated spectral density.
#[derive(Clone, Debug)]
pub enum SpectralDensity {
    /// `J(omega) = amplitude * omega * exp(-omega / cutoff)`.
    Ohmic { amplitude: f64, cutoff: f64 },
    Tabulated(TabulatedDensity),
}

impl SpectralDensity {
    pub fn value(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Ohmic { amplitude, cutoff } => {
                amplitude * omega * (-omega / cutoff).exp()
            }
            SpectralDensity::Tabulated(t) => t.value(omega),
        }
    }

    /// Frequency range outside which the density is negligible or zero.
    fn support(&self) -> (f64, f64) {
        match self {
            SpectralDensity::Ohmic { cutoff, .. } => (cutoff * 1e-9, cutoff * 50.0),
            SpectralDensity::Tabulated(t) => t.support(),
        }
    }
}

/// Noise spectrum entering the decoherence integral.
#[derive(Clone, Debug)]
pub enum NoiseModel {
    /// `S(omega) = s0 / omega^alpha`, `alpha > 0`.
    PowerLaw { s0: f64, alpha: f64 },
    /// `S(omega) = J(omega) coth(omega / (2 Te))`; `Te = 0` uses the
    /// zero-temperature limit `coth -> 1`.
    Thermal { density: SpectralDensity, temperature: f64 },
}

impl NoiseModel {
    pub fn power_law(s0: f64, alpha: f64) -> Result<NoiseModel, SpectraError> {
        if !(s0 > 0.0) || !(alpha > 0.0) {
            return Err(SpectraError::BadModel(format!(
                "power law needs s0 > 0 and alpha > 0, got s0 = {s0}, alpha = {alpha}"
            )));
        }
        Ok(NoiseModel::PowerLaw { s0, alpha })
    }

    pub fn thermal(density: SpectralDensity, temperature: f64) -> Result<NoiseModel, SpectraError> {
        if !(temperature >= 0.0) {
            return Err(SpectraError::BadModel(format!("temperature must be >= 0, got {temperature}")));
        }
        Ok(NoiseModel::Thermal { density, temperature })
    }
}

/// `coth(x)` for `x > 0`, stable at both ends: series below `1e-4`,
/// `1 + 2/expm1(2x)` in the middle, exactly 1 beyond the double-precision
/// saturation point.
pub fn coth(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 1e-4 {
        1.0 / x + x / 3.0 - x.powi(3) / 45.0
    } else if x > 19.0 {
        1.0
    } else {
        1.0 + 2.0 / (2.0 * x).exp_m1()
    }
}

/// Value of `I` with convergence diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct FactorResult {
    /// The integral `I`.
    pub value: f64,
    /// Fitted low-frequency exponent `s` of `F(z) ~ C z^s`.
    pub low_freq_exponent: f64,
    /// Absolute error estimate of `value` (quadrature + segment models).
    pub abs_error_estimate: f64,
    /// Rigorous bound on the discarded tail from the triangle inequality.
    pub tail_bound: f64,
    /// True when the error estimate meets the requested relative tolerance
    /// and the origin is integrable.
    pub converged: bool,
}

struct LowFreqFit {
    exponent: f64,
    ln_coeff: f64,
    z_upper: f64,
    /// True when two adjacent sub-bands agreed on the slope, so the
    /// power-law extrapolation below `z_upper` is trustworthy to a couple
    /// of percent.
    stationary: bool,
}

/// Least-squares line through `(ln z, ln F)`; returns (slope, intercept, r^2).
fn log_log_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Locates the low-frequency power law of a filter curve: finds the rise
/// point where `F` first reaches `1e-6` of its scale, then slides
/// factor-3 fit windows down from it until two adjacent windows agree on
/// the slope. Accepting a single straight window (`r^2 >= 0.999`) without
/// that agreement is the fallback when the measurable range is too narrow.
///
/// Points under one hundred times the schedule's argument-rounding
/// resolution are excluded: the f64-stored pulse times leave `~1e-16`
/// residues in the low moments, flooring the stored schedule's true
/// suppression near `|f| ~ eps * z`. The fit measures the intended
/// decoupling order on the window above that floor (whose own integral
/// contribution is of order `eps^2` and negligible).
fn fit_low_frequency(eval: &FilterEval) -> Result<LowFreqFit, SpectraError> {
    let n_probe = 96;
    let z_top = 10.0 * (eval.total_pulses() + 2.0);
    let lmin = (1e-4f64).ln();
    let lmax = z_top.ln();
    let mut f_scale = 0.0f64;
    let mut probes = Vec::with_capacity(n_probe);
    for i in 0..n_probe {
        let z = (lmin + (lmax - lmin) * i as f64 / (n_probe - 1) as f64).exp();
        let f = eval.value(z);
        f_scale = f_scale.max(f);
        probes.push((z, f));
    }
    let threshold = 1e-6 * f_scale;
    let z_rise = probes
        .iter()
        .find(|&&(_, f)| f >= threshold)
        .map(|&(z, _)| z)
        .unwrap_or(probes[0].0);

    // Smallest frequency where the value clears the rounding floor.
    let mut z_clean = z_rise * 1e-3;
    for i in 0..64 {
        let z = z_rise * 1e-3 * 1000f64.powf(i as f64 / 63.0);
        if eval.value_model_accurate(z) >= 100.0 * eval.zero_resolution(z) {
            z_clean = z;
            break;
        }
    }

    // Fit in factor-3 windows: slide the band down until two adjacent
    // windows agree on the slope (the power law is stationary there).
    // Curvature near the rise point biases a single-window fit by enough
    // to matter when the low segment decays slowly.
    let fit_window = |hi: f64| -> Option<(f64, f64, f64)> {
        let l_hi = hi.ln();
        let l_lo = (hi / 3.0).max(z_clean).ln();
        if l_hi - l_lo < 0.14 {
            return None;
        }
        let mut pts = Vec::with_capacity(24);
        for i in 0..24 {
            let z = (l_lo + (l_hi - l_lo) * i as f64 / 23.0).exp();
            let f = eval.value_model_accurate(z);
            if !(f > 0.0) || !f.is_finite() || f < 100.0 * eval.zero_resolution(z) {
                continue;
            }
            pts.push((z.ln(), f.ln()));
        }
        if pts.len() < 10 {
            return None;
        }
        let (slope, intercept, r2) = log_log_fit(&pts);
        (r2 >= 0.999).then_some((slope, intercept, r2))
    };

    let mut z_up = z_rise / 3.0;
    let mut fallback: Option<LowFreqFit> = None;
    let mut last_r2 = 0.0;
    for _ in 0..24 {
        let upper = fit_window(z_up);
        let lower = fit_window(z_up / 3.0);
        match (upper, lower) {
            (Some((s_up, _, _)), Some((s_lo, c_lo, _))) => {
                if (s_up - s_lo).abs() <= 0.01f64.max(0.005 * s_lo.abs()) {
                    return Ok(LowFreqFit {
                        exponent: s_lo,
                        ln_coeff: c_lo,
                        z_upper: z_up / 3.0,
                        stationary: true,
                    });
                }
                fallback = Some(LowFreqFit {
                    exponent: s_lo,
                    ln_coeff: c_lo,
                    z_upper: z_up / 3.0,
                    stationary: false,
                });
            }
            (Some((s, c, r2)), None) => {
                last_r2 = r2;
                if fallback.is_none() {
                    fallback =
                        Some(LowFreqFit { exponent: s, ln_coeff: c, z_upper: z_up, stationary: false });
                }
            }
            _ => {}
        }
        z_up /= 3.0;
        if z_up / 3.0 < 1.3 * z_clean || z_up < 1e-8 {
            break;
        }
    }
    fallback.ok_or(SpectraError::DegenerateFit { r_squared: last_r2 })
}

/// Computes the factor `I` for a filter/schedule pair under power-law
/// noise of exponent `alpha`, to relative tolerance `rel_tol`.
pub fn factor_i(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    alpha: f64,
    rel_tol: f64,
) -> Result<FactorResult, SpectraError> {
    assert!(alpha > 0.0 && rel_tol > 0.0);
    let eval = FilterEval::new(spec, schedule);
    factor_i_eval(&eval, alpha, rel_tol)
}

pub(crate) fn factor_i_eval(
    eval: &FilterEval,
    alpha: f64,
    rel_tol: f64,
) -> Result<FactorResult, SpectraError> {
    // Identically-zero filters (protected coherence elements) integrate
    // to zero without quadrature.
    let mut probe_max = 0.0f64;
    for i in 0..48 {
        let z = 10f64.powf(-2.0 + 6.0 * i as f64 / 47.0);
        probe_max = probe_max.max(eval.value(z));
    }
    if probe_max <= 1e-28 * eval.amplitude_bound().max(1.0) {
        return Ok(FactorResult {
            value: 0.0,
            low_freq_exponent: f64::INFINITY,
            abs_error_estimate: 0.0,
            tail_bound: 0.0,
            converged: true,
        });
    }

    let fit = fit_low_frequency(eval)?;
    // Integrand exponent at the origin is s - alpha - 2; convergence needs
    // it above -1. A small margin absorbs slope-fit uncertainty.
    if fit.exponent <= alpha + 1.0 + 0.05 {
        return Err(SpectraError::DivergentIntegral { exponent: fit.exponent });
    }

    let alpha_p1 = alpha + 1.0;
    let power = fit.exponent - alpha_p1;
    let i_low_at = |z_lo: f64| fit.ln_coeff.exp() * z_lo.powf(power) / power;
    // Model allowances: a few percent of the analytic low segment when the
    // slope was verified stationary (30% otherwise — the budget loop then
    // simply pushes the analytic piece further down), and the oscillating
    // remainder of the averaged tail, which integrates to about one filter
    // period (4 pi D) against the weight's derivative.
    let low_frac = if fit.stationary { 0.02 } else { 0.30 };
    let period = 4.0 * std::f64::consts::PI * (eval.max_row_pulses() as f64 + 1.0);
    let tail_allowance_at =
        |z_hi: f64| eval.mean_high_freq() / (alpha_p1 * z_hi.powf(alpha_p1))
            * (2.0 * alpha_p1 * period / z_hi).min(0.6);

    let integrand = |z: f64| eval.value_model_accurate(z) / z.powf(alpha + 2.0);
    let pi = std::f64::consts::PI;

    // The analytic piece starts well below the verified fit band; the
    // numeric range is then extended at both ends until the model
    // allowances fit the requested error budget.
    let mut z_lo = fit.z_upper / 16.0;
    let mut z_hi = 1e3f64.max(100.0 * eval.total_pulses());
    let edges = quad::panel_edges(z_lo, z_hi, 1.22, pi);
    let mut mid = quad::integrate_edges(&integrand, &edges, rel_tol / 2.0, 1e-300, 4000);
    let mut mid_value = mid.value;
    let mut mid_error = mid.error;
    let mut mid_converged = mid.converged;

    for _ in 0..3 {
        let value_estimate = i_low_at(z_lo) + mid_value + eval.mean_high_freq() / (alpha_p1 * z_hi.powf(alpha_p1));
        let budget = 0.25 * rel_tol * value_estimate.abs();
        let low_excess = low_frac * i_low_at(z_lo) > budget && z_lo > 1e-10;
        let tail_excess = tail_allowance_at(z_hi) > budget && z_hi < 1e7;
        if !low_excess && !tail_excess {
            break;
        }
        if low_excess {
            let shrink = (budget / (low_frac * i_low_at(z_lo))).powf(1.0 / power).max(1e-4);
            let z_new = (z_lo * shrink).max(1e-10);
            let extra = quad::panel_edges(z_new, z_lo, 1.22, pi);
            let seg = quad::integrate_edges(&integrand, &extra, rel_tol / 2.0, 1e-300, 2000);
            mid_value += seg.value;
            mid_error += seg.error;
            mid_converged &= seg.converged;
            z_lo = z_new;
        }
        if tail_excess {
            let stretch = (tail_allowance_at(z_hi) / budget).powf(1.0 / (alpha + 2.0)).min(40.0);
            let z_new = (z_hi * stretch).min(1e7);
            let extra = quad::panel_edges(z_hi, z_new, 1.22, pi);
            let seg = quad::integrate_edges(&integrand, &extra, rel_tol / 2.0, 1e-300, 2000);
            mid_value += seg.value;
            mid_error += seg.error;
            mid_converged &= seg.converged;
            z_hi = z_new;
        }
    }
    mid.value = mid_value;
    mid.error = mid_error;
    mid.converged = mid_converged;

    let i_low = i_low_at(z_lo);
    let i_tail = eval.mean_high_freq() / (alpha_p1 * z_hi.powf(alpha_p1));
    let tail_bound = eval.amplitude_bound() / (alpha_p1 * z_hi.powf(alpha_p1));

    let value = i_low + mid.value + i_tail;
    let abs_error = mid.error + low_frac * i_low + tail_allowance_at(z_hi);
    Ok(FactorResult {
        value,
        low_freq_exponent: fit.exponent,
        abs_error_estimate: abs_error,
        tail_bound,
        converged: mid.converged && abs_error <= rel_tol * value.abs() + 1e-300,
    })
}

/// Decoherence exponent `chi` for a filter/schedule pair under a noise
/// model; the schedule's own duration is the evolution time (rescale the
/// schedule to change it).
pub fn decoherence_chi(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    noise: &NoiseModel,
    rel_tol: f64,
) -> Result<f64, SpectraError> {
    match noise {
        NoiseModel::PowerLaw { s0, alpha } => {
            let factor = factor_i(spec, schedule, *alpha, rel_tol)?;
            Ok(s0 * schedule.total_duration.powf(alpha + 1.0) * factor.value)
        }
        NoiseModel::Thermal { density, temperature } => {
            thermal_chi(spec, schedule, density, *temperature, rel_tol)
        }
    }
}

fn thermal_chi(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    density: &SpectralDensity,
    temperature: f64,
    rel_tol: f64,
) -> Result<f64, SpectraError> {
    let eval = FilterEval::new(spec, schedule);
    let t_total = schedule.total_duration;
    let (lo, hi) = density.support();
    if !(hi > lo) {
        return Err(SpectraError::BadModel("empty spectral support".into()));
    }
    let weight = move |omega: f64| {
        let th = if temperature > 0.0 { coth(omega / (2.0 * temperature)) } else { 1.0 };
        density.value(omega) * th / (omega * omega)
    };
    let integrand = |omega: f64| weight(omega) * eval.value(omega * t_total);
    // Panels no wider than a quarter oscillation of F(omega T) in omega.
    let lin = std::f64::consts::PI / t_total;
    let edges = quad::panel_edges(lo, hi, 1.25, lin);
    let r = quad::integrate_edges(&integrand, &edges, rel_tol, 1e-300, 4000);
    Ok(r.value)
}

/// Applies a decoherence exponent to an initial coherence element:
/// `rho(T) = rho(0) e^(-chi)`. Diagonal elements have `chi = 0` (their
/// filter vanishes) and pass through unchanged.
pub fn coherence_element(rho0: Complex64, chi: f64) -> Complex64 {
    debug_assert!(chi >= 0.0);
    rho0 * (-chi).exp()
}
