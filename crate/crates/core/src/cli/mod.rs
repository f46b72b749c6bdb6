//! The `algmech` command line: `simulate`, `verify` and `report`.

pub mod report;
pub mod spec;
mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::algebroid::{check_anchor_compatibility, check_antisymmetry, check_gh_invertibility, check_jacobi};
use crate::dynamics::{integrate_rk4, synthesize_semispray_ode, synthesize_spray_ode, Monitor, Trajectory};
use crate::error::{Error, Result};
use crate::mechanics::Payload;
use report::Report;
use spec::{LoadedSystem, SystemSpec};
pub use verify::{verify_system, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SPEC: i32 = 4;

/// Column name for the energy monitor.
pub const ENERGY_COLUMN: &str = "E_L";

#[derive(Parser, Debug)]
#[command(name = "algmech", version, about = "Mechanical systems on generalized Lie algebroids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a system and write its trajectory as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reject unknown fields and failing axioms instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Run the verification suite and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Chart transition, e.g. `identity`, `linear_scale(2)`, `rotation(0.5)`.
        #[arg(long)]
        transition: Option<String>,
        #[arg(long)]
        strict: bool,
    },
    /// Render a JSON report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Maps a library error to a process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::NonFiniteState { .. } => EXIT_ABORTED,
        _ => EXIT_SPEC,
    }
}

/// Loads and builds a spec file, then runs the algebroid axioms on a few
/// samples. Axiom failures are errors under `strict`, warnings otherwise.
pub fn load_system(path: &Path, strict: bool, warnings: &mut Vec<String>) -> Result<LoadedSystem> {
    let (mut spec, w) = SystemSpec::load(path, strict)?;
    warnings.extend(w);
    if let Ok(seed) = std::env::var("ALGMECH_SEED") {
        let seed = seed
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Format(format!("ALGMECH_SEED is not an unsigned integer: {seed:?}")))?;
        spec.sample_plan.seed = seed;
    }
    let loaded = spec.build()?;
    let sys = &loaded.system;
    let a = &sys.algebroid;
    let plan = loaded.plan.clone().with_count(8);
    for (name, v) in [
        ("antisymmetry", check_antisymmetry(a, &plan)?),
        ("jacobi", check_jacobi(a, &plan)?),
        ("anchor_compatibility", check_anchor_compatibility(a, &plan)?),
        ("gh_invertibility", check_gh_invertibility(a, &sys.gh, &plan)?),
    ] {
        if !(v <= 1e-8) {
            let msg = format!("{name} residual {v:e} exceeds 1e-8");
            if strict {
                return Err(Error::Schema {
                    path: "structure".into(),
                    message: msg,
                });
            }
            warnings.push(msg);
        }
    }
    Ok(loaded)
}

/// Integrates a loaded system from its initial state. The energy column is
/// recorded under [`ENERGY_COLUMN`] when a Lagrangian is present.
pub fn simulate(loaded: &LoadedSystem) -> Result<Trajectory> {
    let sys = &loaded.system;
    let ode = match &sys.payload {
        None => return Err(Error::MissingPayload("simulate needs a payload".into())),
        Some(Payload::Connection(c)) => synthesize_spray_ode(sys, c),
        Some(_) => synthesize_semispray_ode(sys, &sys.semispray()?),
    };
    let mut monitors = Vec::new();
    if let Some(e) = sys.energy_field() {
        monitors.push(Monitor::new(ENERGY_COLUMN, e));
    }
    monitors.extend(loaded.monitors.iter().cloned());
    let it = &loaded.spec.integrate;
    integrate_rk4(&ode, &loaded.spec.initial_x, &loaded.spec.initial_y, it.t0, it.t_end, it.dt, &monitors)
}

/// Renders a trajectory as CSV, ending with an `# aborted:` line if the
/// integration stopped early.
pub fn trajectory_csv(traj: &Trajectory, monitor_names: &[String]) -> String {
    let mut out = String::from("t");
    for i in 1..=traj.m {
        write!(out, ",x{i}").unwrap();
    }
    for a in 1..=traj.r {
        write!(out, ",y{a}").unwrap();
    }
    out.push_str(",E_L");
    for n in monitor_names {
        write!(out, ",{n}").unwrap();
    }
    out.push('\n');
    let energy = traj.monitor(ENERGY_COLUMN);
    let columns: Vec<Option<&[f64]>> = monitor_names.iter().map(|n| traj.monitor(n)).collect();
    for k in 0..traj.len() {
        write!(out, "{:?}", traj.times[k]).unwrap();
        for v in &traj.states[k] {
            write!(out, ",{v:?}").unwrap();
        }
        write!(out, ",{:?}", energy.map_or(f64::NAN, |e| e[k])).unwrap();
        for c in &columns {
            write!(out, ",{:?}", c.map_or(f64::NAN, |c| c[k])).unwrap();
        }
        out.push('\n');
    }
    if let Some(e) = &traj.abort {
        writeln!(out, "# aborted: {e}").unwrap();
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn flush_warnings(w: &[String]) {
    for m in w {
        eprintln!("warning: {m}");
    }
}

fn cmd_simulate(config: &Path, out: &Path, strict: bool) -> i32 {
    let mut warnings = Vec::new();
    let loaded = load_system(config, strict, &mut warnings);
    flush_warnings(&warnings);
    let loaded = match loaded {
        Ok(l) => l,
        Err(e) => return fail(&e),
    };
    let traj = match simulate(&loaded) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let names: Vec<String> = loaded.monitors.iter().map(|m| m.name.clone()).collect();
    if let Err(e) = write_file(out, &trajectory_csv(&traj, &names)) {
        return fail(&e);
    }
    match &traj.abort {
        Some(e) => {
            eprintln!("integration aborted: {e}");
            EXIT_ABORTED
        }
        None => EXIT_OK,
    }
}

fn cmd_verify(config: &Path, out: &Path, opts: &VerifyOptions, strict: bool) -> i32 {
    let mut warnings = Vec::new();
    let loaded = load_system(config, strict, &mut warnings);
    flush_warnings(&warnings);
    let report = match loaded.and_then(|l| verify_system(&l, opts)) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_file(out, &report.to_json()) {
        return fail(&e);
    }
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn cmd_report(input: &Path, format: Format) -> i32 {
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => return fail(&Error::Io(format!("{}: {e}", input.display()))),
    };
    let report = match Report::from_json(&text) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    match format {
        Format::Json => print!("{text}"),
        Format::Text => print!("{}", report.to_text()),
    }
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Simulate { config, out, strict } => cmd_simulate(&config, &out, strict),
        Command::Verify {
            config,
            out,
            samples,
            tol,
            transition,
            strict,
        } => cmd_verify(
            &config,
            &out,
            &VerifyOptions {
                samples,
                tol,
                transition,
            },
            strict,
        ),
        Command::Report { input, format } => cmd_report(&input, format),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_spec;

    fn loaded(id: &str) -> LoadedSystem {
        builtin_spec(id, &[]).unwrap().build().unwrap()
    }

    #[test]
    fn oscillator_to_pi_has_3143_rows() {
        let mut l = loaded("harmonic_oscillator");
        l.spec.integrate.t_end = std::f64::consts::PI;
        let traj = simulate(&l).unwrap();
        let csv = trajectory_csv(&traj, &[]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,y1,E_L"));
        assert_eq!(lines.count(), 3143);
        assert_eq!(traj.len(), 3143);
    }

    #[test]
    fn csv_floats_round_trip() {
        let mut l = loaded("rigid_body_so3");
        l.spec.integrate.t_end = 0.01;
        let traj = simulate(&l).unwrap();
        let csv = trajectory_csv(&traj, &["casimir".to_string()]);
        assert!(csv.starts_with("t,x1,x2,x3,y1,y2,y3,E_L,casimir\n"));
        let last = csv.lines().last().unwrap();
        let vals: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&vals[1..7], traj.last());
    }

    #[test]
    fn no_payload_is_spec_error() {
        let mut spec = builtin_spec("free_particle", &[]).unwrap();
        spec.payload = None;
        let e = simulate(&spec.build().unwrap()).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_SPEC);
    }

    #[test]
    fn missing_payload_skips_lagrange_checks() {
        let mut spec = builtin_spec("free_particle", &[]).unwrap();
        spec.payload = None;
        let r = verify_system(&spec.build().unwrap(), &VerifyOptions::default()).unwrap();
        for name in ["cartan_equation", "semispray_property", "transport_equivalence"] {
            assert!(r.get(name).unwrap().skipped.is_some(), "{name}");
        }
        assert!(r.all_pass());
    }

    #[test]
    fn unknown_transition_is_error() {
        let opts = VerifyOptions {
            transition: Some("shear(1)".into()),
            ..Default::default()
        };
        assert!(matches!(
            verify_system(&loaded("harmonic_oscillator"), &opts),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn bad_arguments_exit_4() {
        assert_eq!(run(["algmech", "simulate"]), EXIT_SPEC);
        assert_eq!(run(["algmech", "--help"]), EXIT_OK);
    }
}
