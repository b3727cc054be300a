//! Independent brute-force cross-checks.
//!
//! Everything here reaches the same quantities as the main modules through
//! deliberately different routes: the sampling function from the
//! time-domain switching trace instead of the spectral sum, decoherence
//! from an explicit discrete mode sum instead of a continuum integral, and
//! the factor `I` from fixed-step trapezoid sums instead of adaptive
//! Gauss-Kronrod panels. Agreement between the routes is the central
//! anti-drift check of the crate.

use crate::filter::{FilterEval, FilterSpec};
use crate::schedule::PulseSchedule;
use crate::spectra::{self, coth};
use num_complex::Complex64;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("discrete bath: {0}")]
    BadBath(String),
}

/// The piecewise-constant sign history of one qubit's toggled coupling:
/// breakpoints `0 = T_0 < ... < T_(D+1) = T`, sign `(-1)^d` on interval
/// `d`, zero exactly at breakpoints (`theta(0) = 0` convention).
#[derive(Clone, Debug)]
pub struct SwitchingTrace {
    breakpoints: Vec<f64>,
}

impl SwitchingTrace {
    pub fn for_qubit(schedule: &PulseSchedule, qubit: usize) -> SwitchingTrace {
        let mut breakpoints = Vec::with_capacity(schedule.times[qubit].len() + 2);
        breakpoints.push(0.0);
        breakpoints.extend_from_slice(&schedule.times[qubit]);
        breakpoints.push(schedule.total_duration);
        SwitchingTrace { breakpoints }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Sign at time `t`: `(-1)^d` strictly inside interval `d`, `0` at
    /// breakpoints.
    pub fn sign_at(&self, t: f64) -> i8 {
        if self.breakpoints.iter().any(|&b| b == t) {
            return 0;
        }
        let d = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if d % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// `integral_0^T F(t) dt = sum (-1)^d (T_{d+1} - T_d)`; zero for
    /// sequences that balance the two signs.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        let mut sign = 1.0;
        for w in self.breakpoints.windows(2) {
            acc += sign * (w[1] - w[0]);
            sign = -sign;
        }
        acc
    }
}

/// Sign of qubit `j`'s switching function at time `t` in `[0, T]`.
pub fn switching_function(t: f64, schedule: &PulseSchedule, qubit: usize) -> i8 {
    assert!((0.0..=schedule.total_duration).contains(&t));
    SwitchingTrace::for_qubit(schedule, qubit).sign_at(t)
}

/// Sampling value from the time domain: each constant-sign interval of the
/// switching trace integrates the complex exponential in closed form, and
/// the `D + 1` interval contributions are summed in order. Matches
/// [`crate::sampling::sampling_generic`] to roundoff.
pub fn sampling_time_quadrature(schedule: &PulseSchedule, qubit: usize, z: f64) -> Complex64 {
    let trace = SwitchingTrace::for_qubit(schedule, qubit);
    let total = schedule.total_duration;
    // i w * int_a^b e^{-i w t} dt = e^{-i z a/T} - e^{-i z b/T}
    let mut acc = Complex64::new(0.0, 0.0);
    let mut sign = 1.0;
    for w in trace.breakpoints.windows(2) {
        let ea = Complex64::from_polar(1.0, -z * (w[0] / total));
        let eb = Complex64::from_polar(1.0, -z * (w[1] / total));
        acc += sign * (ea - eb);
        sign = -sign;
    }
    acc
}

/// An explicit set of bath modes `(omega_k, |q_k|^2)` at a temperature.
#[derive(Clone, Debug)]
pub struct DiscreteBath {
    modes: Vec<(f64, f64)>,
    pub temperature: f64,
}

impl DiscreteBath {
    pub fn new(modes: Vec<(f64, f64)>, temperature: f64) -> Result<DiscreteBath, OracleError> {
        if modes.is_empty() {
            return Err(OracleError::BadBath("no modes".into()));
        }
        for (i, &(omega, weight)) in modes.iter().enumerate() {
            if !(omega > 0.0) {
                return Err(OracleError::BadBath(format!("mode {i}: frequency must be positive")));
            }
            if !(weight >= 0.0) {
                return Err(OracleError::BadBath(format!("mode {i}: weight must be nonnegative")));
            }
        }
        let mut sorted: Vec<f64> = modes.iter().map(|m| m.0).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(OracleError::BadBath(format!("duplicate frequency {}", w[0])));
            }
        }
        if !(temperature >= 0.0) {
            return Err(OracleError::BadBath("temperature must be nonnegative".into()));
        }
        Ok(DiscreteBath { modes, temperature })
    }

    /// Two-column CSV `omega,weight`; a non-numeric first row is treated
    /// as a header.
    pub fn from_csv_reader(reader: impl Read, temperature: f64) -> Result<DiscreteBath, OracleError> {
        let (omegas, weights) = spectra::read_two_columns(reader).map_err(OracleError::BadBath)?;
        DiscreteBath::new(omegas.into_iter().zip(weights).collect(), temperature)
    }

    pub fn from_csv_path(path: &Path, temperature: f64) -> Result<DiscreteBath, OracleError> {
        let file = std::fs::File::open(path)
            .map_err(|e| OracleError::BadBath(format!("{}: {e}", path.display())))?;
        DiscreteBath::from_csv_reader(file, temperature)
    }

    /// Log-spaced midpoint discretization of a continuum density `J`:
    /// `n` modes on `[lo, hi]` with weights `J(omega_k) * d omega_k`.
    pub fn from_density(
        density: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        n: usize,
        temperature: f64,
    ) -> Result<DiscreteBath, OracleError> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(OracleError::BadBath("need 0 < lo < hi and n >= 2".into()));
        }
        let du = (hi / lo).ln() / n as f64;
        let modes = (0..n)
            .map(|k| {
                // Geometric midpoint of the k-th log cell, weighted by the
                // exact cell width.
                let omega = lo * ((k as f64 + 0.5) * du).exp();
                let left = lo * ((k as f64) * du).exp();
                let right = lo * ((k as f64 + 1.0) * du).exp();
                (omega, density(omega) * (right - left))
            })
            .collect();
        DiscreteBath::new(modes, temperature)
    }

    pub fn modes(&self) -> &[(f64, f64)] {
        &self.modes
    }
}

/// Decoherence exponent from the exact finite mode sum:
/// `chi = sum_k |q_k|^2 coth(omega_k / 2 Te) / omega_k^2 * F(omega_k T)`.
///
/// As the mode density grows with weights sampling a continuum density,
/// this converges to the continuum `decoherence_chi` (Riemann-sum
/// consistency).
pub fn discrete_bath_decoherence(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    bath: &DiscreteBath,
) -> f64 {
    let eval = FilterEval::new(spec, schedule);
    let t_total = schedule.total_duration;
    let te = bath.temperature;
    bath.modes
        .iter()
        .map(|&(omega, weight)| {
            let th = if te > 0.0 { coth(omega / (2.0 * te)) } else { 1.0 };
            weight * th / (omega * omega) * eval.value(omega * t_total)
        })
        .sum()
}

/// Grid plan of the fixed-step trapezoid factor oracle.
///
/// The default is a log grid of 400 points per decade over
/// `[1e-6, 1e6]` plus the analytic oscillation-average tail. That
/// resolution cannot follow the filter's period-`2 pi` oscillations beyond
/// `z` of a few hundred, so [`TrapezoidOracle::resolving`] switches to a
/// uniform step of `pi / 8` once the log step would exceed it, with the
/// range end scaled to the schedule's pulse count. Both variants remain
/// plain trapezoid sums, independent of the adaptive engine.
#[derive(Clone, Debug)]
pub struct TrapezoidOracle {
    pub z_min: f64,
    pub z_max: f64,
    pub points_per_decade: usize,
    /// Switch to this uniform step where the log step would exceed it.
    pub linear_step: Option<f64>,
}

impl Default for TrapezoidOracle {
    fn default() -> Self {
        TrapezoidOracle {
            z_min: 1e-6,
            z_max: 1e6,
            points_per_decade: 400,
            linear_step: None,
        }
    }
}

impl TrapezoidOracle {
    /// A plan that resolves every oscillation of the given schedule's
    /// filters over the band that matters for `alpha >= 1`.
    pub fn resolving(schedule: &PulseSchedule) -> TrapezoidOracle {
        let total_pulses = schedule.total_pulses() as f64;
        TrapezoidOracle {
            z_min: 1e-6,
            z_max: 2e4f64.max(200.0 * total_pulses),
            points_per_decade: 400,
            linear_step: Some(std::f64::consts::PI / 8.0),
        }
    }

    fn nodes(&self) -> Vec<f64> {
        let ratio = (std::f64::consts::LN_10 / self.points_per_decade as f64).exp();
        let mut nodes = Vec::new();
        let mut z = self.z_min;
        while z < self.z_max {
            nodes.push(z);
            if let Some(h) = self.linear_step {
                if z * (ratio - 1.0) >= h {
                    // Uniform tail of the grid.
                    let mut k = 1u64;
                    loop {
                        let zz = z + h * k as f64;
                        if zz >= self.z_max {
                            break;
                        }
                        nodes.push(zz);
                        k += 1;
                    }
                    break;
                }
            }
            z *= ratio;
        }
        nodes.push(self.z_max);
        nodes
    }
}

/// Factor `I` by fixed-step trapezoid summation plus the analytic
/// oscillation-average tail beyond the grid end.
pub fn factor_oracle(
    spec: &FilterSpec,
    schedule: &PulseSchedule,
    alpha: f64,
    plan: &TrapezoidOracle,
) -> f64 {
    let eval = FilterEval::new(spec, schedule);
    let nodes = plan.nodes();
    // The low end of the grid sits deep in the filter's suppression tail
    // where plain f64 returns cancellation noise; the inverse-power weight
    // amplifies that noise catastrophically, so the escalating evaluation
    // is required here just as in the adaptive engine.
    let g = |z: f64| eval.value_model_accurate(z) / z.powf(alpha + 2.0);
    let mut acc = 0.0;
    let mut prev_z = nodes[0];
    let mut prev_g = g(prev_z);
    for &z in &nodes[1..] {
        let gz = g(z);
        acc += 0.5 * (prev_g + gz) * (z - prev_z);
        prev_z = z;
        prev_g = gz;
    }
    let tail = eval.mean_high_freq() / ((alpha + 1.0) * plan.z_max.powf(alpha + 1.0));
    acc + tail
}
