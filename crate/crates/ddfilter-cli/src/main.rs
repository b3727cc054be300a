//! Command-line surface for schedule generation, filter-curve evaluation,
//! factor sweeps, and figure-level diagnostics.
//!
//! All frequencies are dimensionless `z = omega * T`. Outputs use fixed
//! 17-significant-digit float formatting, so identical invocations produce
//! byte-identical files.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical
//! failure.

use clap::{Args, Parser, Subcommand};
use ddfilter::analysis::{
    self, dfs_check, fit_rolloff_auto, spectral_peak, AnalysisError, FilterCurve, SweepConfig,
};
use ddfilter::filter::{
    detect_singularities, sdd_singularity_grid, FilterEval, FilterLabel, FilterSpec, PulseModel,
    RatioValue, Topology,
};
use ddfilter::sampling::FrequencyGrid;
use ddfilter::schedule::{
    custom_schedule, nudd_schedule, sdd_schedule, NuddLevelCounts, PulseSchedule, SchemeTag,
};
use ddfilter::spectra::SpectraError;
use serde::Deserialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ddfilter",
    about = "Dynamical-decoupling schedules, noise filter functions, and decoherence diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pulse schedule and write it as JSON.
    Schedule(ScheduleArgs),
    /// Evaluate a filter function over a frequency grid into CSV.
    Filter(FilterArgs),
    /// Run a paired factor sweep from a JSON config into CSV.
    Sweep(SweepArgs),
    /// Aggregate rolloff, peak, subspace, and singularity diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(subcommand)]
    scheme: SchemeCommand,
}

#[derive(Subcommand)]
enum SchemeCommand {
    /// Collective symmetric sequence: identical uniform timing on every
    /// qubit.
    Sdd {
        /// Pulses per qubit (must be even).
        #[arg(long = "D")]
        d: usize,
        /// Total duration.
        #[arg(long = "T")]
        duration: f64,
        /// Number of qubits.
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        /// Pulse width in time units.
        #[arg(long = "tau-pi", default_value_t = 0.0)]
        tau_pi: f64,
        #[arg(long, default_value = "schedule.json")]
        out: PathBuf,
    },
    /// Nested Uhrig sequence.
    Nudd {
        /// Level counts, innermost first: `L0,L1[,...]`.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u32>,
        #[arg(long = "T")]
        duration: f64,
        #[arg(long = "tau-pi", default_value_t = 0.0)]
        tau_pi: f64,
        #[arg(long, default_value = "schedule.json")]
        out: PathBuf,
    },
    /// Custom timing lists: qubits separated by ';', times by ','.
    Custom {
        /// e.g. `0.25,0.75;0.5` for two qubits (empty segment = no pulses).
        #[arg(long)]
        times: String,
        #[arg(long = "T")]
        duration: f64,
        #[arg(long = "tau-pi", default_value_t = 0.0)]
        tau_pi: f64,
        #[arg(long, default_value = "schedule.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FilterArgs {
    /// Schedule JSON produced by the `schedule` command.
    #[arg(long)]
    schedule: PathBuf,
    /// Two-qubit filter label: F14c, F23c, F14i, F23i.
    #[arg(long, value_parser = parse_label)]
    label: Option<FilterLabel>,
    /// Computational basis index of the row state (with --n/--topology).
    #[arg(long)]
    m: Option<usize>,
    /// Computational basis index of the column state.
    #[arg(long)]
    n: Option<usize>,
    /// common | independent (only with --m/--n).
    #[arg(long, value_parser = parse_topology)]
    topology: Option<Topology>,
    /// Grid spec `min:max:points:spacing` with spacing linear|log.
    #[arg(long)]
    grid: Option<String>,
    /// Named grid preset: `fig4` (step 1e-4 on [1e-3, 10], step 100 to 1e8).
    #[arg(long)]
    preset: Option<String>,
    /// Evaluate under the schedule's finite pulse width.
    #[arg(long = "finite-width")]
    finite_width: bool,
    /// Append the finite/ideal ratio column (singular points print inf).
    #[arg(long)]
    ratio: bool,
    #[arg(long, default_value = "filter.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config: {"duration", "nudd_pairs", "alphas", "filters", "rel_tol"}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Worker threads (defaults to the rayon heuristic).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// common | independent.
    #[arg(long, value_parser = parse_topology, default_value = "common")]
    topology: Topology,
    /// Filter label the rolloff/peak curves use.
    #[arg(long, value_parser = parse_label, default_value = "F14i")]
    label: FilterLabel,
    /// Pulse width override for the singularity scan (in time units).
    #[arg(long = "tau-pi")]
    tau_pi: Option<f64>,
    /// Singularity scan band `lo:hi` in z.
    #[arg(long, default_value = "250:1000")]
    band: String,
    /// Points in the scan band.
    #[arg(long, default_value_t = 40_000)]
    band_points: usize,
    #[arg(long, default_value = "diagnose.json")]
    out: PathBuf,
}

fn parse_label(s: &str) -> Result<FilterLabel, String> {
    s.parse()
}

fn parse_topology(s: &str) -> Result<Topology, String> {
    match s {
        "common" => Ok(Topology::Common),
        "independent" => Ok(Topology::Independent),
        other => Err(format!("unknown topology '{other}' (expected common or independent)")),
    }
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Spectra(SpectraError::DivergentIntegral { .. }) => {
                CliError::Numerical(e.to_string())
            }
            AnalysisError::PoorFit { .. } | AnalysisError::AmbiguousPeak { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schedule(args) => cmd_schedule(args),
        Command::Filter(args) => cmd_filter(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), CliError> {
    let (schedule, out, note) = match args.scheme {
        SchemeCommand::Sdd { d, duration, qubits, tau_pi, out } => {
            if d % 2 != 0 {
                return Err(CliError::Usage(format!("D must be even, got {d}")));
            }
            let s = sdd_schedule(qubits, d, duration, tau_pi).map_err(CliError::usage)?;
            (s, out, None)
        }
        SchemeCommand::Nudd { counts, duration, tau_pi, out } => {
            // CLI takes innermost-first; the library stores outermost-first.
            let mut level_counts = counts.clone();
            level_counts.reverse();
            let counts = NuddLevelCounts::new(level_counts).map_err(CliError::usage)?;
            let note = counts
                .has_degenerate_level()
                .then(|| "note: schedule contains zero-pulse levels".to_string());
            let s = nudd_schedule(&counts, duration, tau_pi).map_err(CliError::usage)?;
            (s, out, note)
        }
        SchemeCommand::Custom { times, duration, tau_pi, out } => {
            let per_qubit: Vec<Vec<f64>> = times
                .split(';')
                .map(|row| {
                    row.split(',')
                        .filter(|t| !t.trim().is_empty())
                        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("time '{t}': {e}")))
                        .collect::<Result<Vec<f64>, String>>()
                })
                .collect::<Result<_, _>>()
                .map_err(CliError::Usage)?;
            let s = custom_schedule(per_qubit, duration, tau_pi).map_err(CliError::usage)?;
            (s, out, None)
        }
    };

    schedule.write_json(&out)?;
    let per_qubit: Vec<String> = schedule.times.iter().map(|t| t.len().to_string()).collect();
    println!(
        "wrote {}: scheme={} qubits={} pulses={} ({}) T={} tau_pi={}",
        out.display(),
        schedule.scheme,
        schedule.num_qubits,
        schedule.total_pulses(),
        per_qubit.join("+"),
        schedule.total_duration,
        schedule.pulse_width,
    );
    if let Some(note) = note {
        println!("{note}");
    }
    Ok(())
}

fn resolve_spec(
    schedule: &PulseSchedule,
    label: Option<FilterLabel>,
    m: Option<usize>,
    n: Option<usize>,
    topology: Option<Topology>,
    model: PulseModel,
) -> Result<FilterSpec, CliError> {
    match (label, m, n, topology) {
        (Some(label), None, None, None) => {
            if schedule.num_qubits != 2 {
                return Err(CliError::Usage(format!(
                    "label {label} is a two-qubit shorthand; this schedule has {} qubit(s) — use --m/--n/--topology",
                    schedule.num_qubits
                )));
            }
            Ok(label.to_spec(model))
        }
        (None, Some(m), Some(n), Some(topology)) => {
            FilterSpec::new(m, n, schedule.num_qubits, topology, model).map_err(CliError::usage)
        }
        _ => Err(CliError::Usage(
            "specify either --label, or all of --m/--n/--topology".into(),
        )),
    }
}

fn parse_grid(spec: &str) -> Result<FrequencyGrid, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(CliError::Usage(format!(
            "grid '{spec}' must be min:max:points:spacing"
        )));
    }
    let min: f64 = parts[0].parse().map_err(CliError::usage)?;
    let max: f64 = parts[1].parse().map_err(CliError::usage)?;
    let points: usize = parts[2].parse().map_err(CliError::usage)?;
    match parts[3] {
        "linear" => FrequencyGrid::linear(min, max, points).map_err(CliError::usage),
        "log" => FrequencyGrid::logarithmic(min, max, points).map_err(CliError::usage),
        other => Err(CliError::Usage(format!("spacing '{other}' must be linear or log"))),
    }
}

fn cmd_filter(args: FilterArgs) -> Result<(), CliError> {
    let schedule = PulseSchedule::read_json(&args.schedule).map_err(CliError::usage)?;
    let model = if args.finite_width { PulseModel::FiniteWidth } else { PulseModel::Ideal };
    let spec = resolve_spec(&schedule, args.label, args.m, args.n, args.topology, model)?;

    let grid = match (&args.preset, &args.grid) {
        (Some(name), None) if name == "fig4" => FrequencyGrid::fig4(),
        (Some(name), None) => {
            return Err(CliError::Usage(format!("unknown preset '{name}' (expected fig4)")))
        }
        (None, Some(spec_str)) => parse_grid(spec_str)?,
        (None, None) => FrequencyGrid::logarithmic(1e-3, 1e3, 2000).map_err(CliError::usage)?,
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--preset and --grid are mutually exclusive".into()))
        }
    };

    let eval = FilterEval::new(&spec, &schedule);
    let file = std::fs::File::create(&args.out)?;
    let mut w = std::io::BufWriter::new(file);
    if args.ratio {
        writeln!(w, "z,F,F_modified,ratio")?;
    } else {
        writeln!(w, "z,F,F_modified")?;
    }
    for &z in grid.values() {
        let f = eval.value(z);
        let modified = f / (z * z);
        if args.ratio {
            let ratio = match eval.ratio(z) {
                RatioValue::Finite(r) => format!("{r:.16e}"),
                RatioValue::Singular(_) => "inf".to_string(),
            };
            writeln!(w, "{z:.16e},{f:.16e},{modified:.16e},{ratio}")?;
        } else {
            writeln!(w, "{z:.16e},{f:.16e},{modified:.16e}")?;
        }
    }
    w.flush()?;
    println!("wrote {} ({} rows)", args.out.display(), grid.len());
    Ok(())
}

#[derive(Deserialize)]
struct SweepConfigFile {
    duration: f64,
    nudd_pairs: Vec<(u32, u32)>,
    alphas: Vec<f64>,
    filters: Vec<String>,
    #[serde(default = "default_rel_tol")]
    rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-5
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if let Some(jobs) = args.jobs {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let text = std::fs::read_to_string(&args.config)?;
    let file: SweepConfigFile = serde_json::from_str(&text).map_err(CliError::usage)?;
    let filters = file
        .filters
        .iter()
        .map(|s| s.parse::<FilterLabel>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Usage)?;
    let config = SweepConfig {
        duration: file.duration,
        nudd_pairs: file.nudd_pairs,
        alphas: file.alphas,
        filters,
        rel_tol: file.rel_tol,
    };
    config.validate().map_err(CliError::from)?;
    let rows = analysis::factor_sweep(&config)?;
    let out = std::fs::File::create(&args.out)?;
    analysis::write_sweep_csv(&rows, out)?;
    let divergent = rows.iter().filter(|r| !r.converged).count();
    println!("wrote {} ({} rows, {} flagged)", args.out.display(), rows.len(), divergent);
    Ok(())
}

fn parse_band(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("band '{s}' must be lo:hi")));
    }
    let lo: f64 = parts[0].parse().map_err(CliError::usage)?;
    let hi: f64 = parts[1].parse().map_err(CliError::usage)?;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Usage(format!("band '{s}' needs 0 < lo < hi")));
    }
    Ok((lo, hi))
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let mut schedule = PulseSchedule::read_json(&args.schedule).map_err(CliError::usage)?;
    if schedule.num_qubits != 2 {
        return Err(CliError::Usage(format!(
            "diagnose works on two-qubit schedules; this one has {} qubit(s)",
            schedule.num_qubits
        )));
    }
    if let Some(tau_pi) = args.tau_pi {
        schedule.pulse_width = tau_pi;
        schedule.validate().map_err(CliError::usage)?;
    }
    let band = parse_band(&args.band)?;
    let mut warnings: Vec<String> = Vec::new();

    // Rolloff and spectral peak use the requested label's ideal curve.
    let curve_spec = resolve_spec(&schedule, Some(args.label), None, None, None, PulseModel::Ideal)?;
    let bound = 2.0 * schedule.total_pulses() as f64 + 2.0 * schedule.num_qubits as f64;
    let grid = FrequencyGrid::logarithmic(1e-3, 10.0 * bound, 6000).map_err(CliError::usage)?;
    let curve = FilterCurve::evaluate(&curve_spec, &schedule, &grid);

    let rolloff = match fit_rolloff_auto(&curve) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warnings.push(format!("rolloff: {e}"));
            None
        }
    };
    let modified = curve.clone().map_values(|z, f| f / (z * z));
    let peak = match spectral_peak(&modified) {
        Ok(z) => Some(z),
        Err(e) => {
            warnings.push(format!("spectral peak: {e}"));
            None
        }
    };

    let dfs = if schedule.num_qubits == 2 {
        dfs_check(&schedule, args.topology)
    } else {
        warnings.push("subspace scan skipped: defined for two qubits".into());
        Vec::new()
    };

    let (predicted, detected) = if schedule.pulse_width > 0.0 {
        let predicted: Vec<f64> = if schedule.scheme == SchemeTag::Sdd {
            let d = schedule.times[0].len();
            sdd_singularity_grid(d, 64)
                .into_iter()
                .filter(|z| *z >= band.0 && *z <= band.1)
                .collect()
        } else {
            Vec::new()
        };
        let ratio_spec =
            resolve_spec(&schedule, Some(args.label), None, None, None, PulseModel::FiniteWidth)?;
        let markers = detect_singularities(&ratio_spec, &schedule, band, args.band_points);
        (predicted, markers.into_iter().map(|m| m.z).collect::<Vec<f64>>())
    } else {
        warnings.push("singularity scan skipped: pulse width is zero".into());
        (Vec::new(), Vec::new())
    };

    let report = serde_json::json!({
        "schedule": {
            "scheme": schedule.scheme.to_string(),
            "num_qubits": schedule.num_qubits,
            "pulses": schedule.times.iter().map(Vec::len).collect::<Vec<_>>(),
            "total_duration": schedule.total_duration,
            "pulse_width": schedule.pulse_width,
        },
        "filter_label": args.label.to_string(),
        "topology": match args.topology { Topology::Common => "common", Topology::Independent => "independent" },
        "rolloff": rolloff.map(|f| serde_json::json!({
            "db_per_octave": f.db_per_octave,
            "order": f.order(),
            "fit_band": [f.fit_band.0, f.fit_band.1],
            "r_squared": f.r_squared,
        })),
        "spectral_peak": peak,
        "dfs": dfs.iter().map(|e| serde_json::json!({
            "pair": [e.pair.0, e.pair.1],
            "protected": e.protected,
            "max_filter": e.max_filter,
        })).collect::<Vec<_>>(),
        "singularities": {
            "band": [band.0, band.1],
            "predicted": predicted,
            "detected": detected,
        },
        "warnings": warnings,
    });
    std::fs::write(&args.out, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
