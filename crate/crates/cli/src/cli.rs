use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use fingering_core::coupling::Observer;
use fingering_core::verification::{self, VerificationReport};
use fingering_core::{Simulation, SimulationState, StepDiagnostics, StructuredQuadMesh};

use crate::config::{self, ConfigError, ParsedConfig};
use crate::io::{self as files, DiagnosticsWriter, SnapshotData};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fingering", version, about = "Quarter five-spot viscous fingering with SUPG/SOLD stabilization")]
pub struct Args {
    /// Sectioned key = value config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// galerkin, supg, supg-iso, supg-cw or supg-both.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub ny: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long = "t-end")]
    pub t_end: Option<String>,
    #[arg(long = "out-dir", value_name = "PATH", default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long = "snapshot-every", value_name = "N")]
    pub snapshot_every: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Also write legacy VTK files next to the CSV snapshots.
    #[arg(long)]
    pub vtk: bool,
    /// Run the patch test and convergence suite instead of the benchmark.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(fingering_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("verification failed")]
    Verification,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Verification => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn core_err(e: fingering_core::Error) -> CliError {
    match e {
        fingering_core::Error::Validation(_) | fingering_core::Error::InvalidArgument(_) => {
            CliError::Config(ConfigError { line: None, key: None, message: e.to_string() })
        }
        other => CliError::Solver(other),
    }
}

/// Reads the config file (if any) and applies the command-line overrides.
pub fn resolve_config(args: &Args) -> Result<ParsedConfig, CliError> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?,
        None => String::new(),
    };
    let mut parsed = config::parse_document(&text)?;
    let overrides = [
        ("scheme", &args.scheme),
        ("nx", &args.nx),
        ("ny", &args.ny),
        ("dt", &args.dt),
        ("t_end", &args.t_end),
        ("snapshot_every", &args.snapshot_every),
        ("seed", &args.seed),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            parsed.override_value(key, v)?;
        }
    }
    parsed.validate()?;
    Ok(parsed)
}

struct FileObserver<'a> {
    mesh: &'a StructuredQuadMesh,
    out_dir: &'a Path,
    vtk: bool,
    diagnostics: DiagnosticsWriter<BufWriter<fs::File>>,
    last: Option<SimulationState>,
    error: Option<CliError>,
}

impl FileObserver<'_> {
    fn write_state(&self, state: &SimulationState, stem: &str) -> Result<(), CliError> {
        let data = SnapshotData::from_state(self.mesh, state);
        let csv = self.out_dir.join(format!("{stem}.csv"));
        files::write_snapshot_file(&csv, &data).map_err(io_err(format!("writing {}", csv.display())))?;
        if self.vtk {
            let vtk = self.out_dir.join(format!("{stem}.vtk"));
            files::write_vtk_file(&vtk, self.mesh, &data, &format!("step {} t = {}", state.step, state.time))
                .map_err(io_err(format!("writing {}", vtk.display())))?;
        }
        Ok(())
    }

    fn record(&mut self, state: &SimulationState, d: &StepDiagnostics, snapshot: bool) -> Result<(), CliError> {
        self.diagnostics.write(d).map_err(io_err("writing diagnostics.csv"))?;
        if snapshot {
            self.write_state(state, &format!("snap_{}", state.step))?;
        }
        Ok(())
    }
}

impl Observer for FileObserver<'_> {
    fn observe(&mut self, state: &SimulationState, d: &StepDiagnostics, snapshot: bool) -> ControlFlow<()> {
        if d.concentration.violated() {
            log::debug!("step {}: c outside [0, 1]: [{}, {}]", d.step, d.concentration.min, d.concentration.max);
        }
        self.last = Some(state.clone());
        match self.record(state, d, snapshot) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

fn write_manifest(out_dir: &Path, parsed: &ParsedConfig, started: Instant, outcome: &str) -> Result<(), CliError> {
    let path = out_dir.join("manifest.txt");
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err(format!("creating {}", path.display())))?);
    files::write_manifest(
        &mut w,
        &config::render_config(&parsed.config),
        &parsed.provenance(),
        started.elapsed().as_secs_f64(),
        outcome,
    )
    .and_then(|()| w.flush())
    .map_err(io_err(format!("writing {}", path.display())))
}

/// Runs the benchmark described by `parsed`, writing every output file
/// into `out_dir`.
pub fn run_benchmark(parsed: &ParsedConfig, out_dir: &Path, vtk: bool) -> Result<(), CliError> {
    let started = Instant::now();
    for e in parsed.provenance() {
        log::info!("{}.{} = {} ({})", e.section, e.key, e.value, e.source);
    }
    fs::create_dir_all(out_dir).map_err(io_err(format!("creating {}", out_dir.display())))?;
    let mut sim = Simulation::new(parsed.config.clone()).map_err(core_err)?;
    let diag_path = out_dir.join("diagnostics.csv");
    let diag_file = fs::File::create(&diag_path).map_err(io_err(format!("creating {}", diag_path.display())))?;
    let diagnostics = DiagnosticsWriter::new(BufWriter::new(diag_file)).map_err(io_err("writing diagnostics.csv"))?;
    let mesh = sim.mesh.clone();
    let mut observer = FileObserver { mesh: &mesh, out_dir, vtk, diagnostics, last: None, error: None };

    let result = sim.run(&mut observer);
    observer.diagnostics.flush().map_err(io_err("writing diagnostics.csv"))?;
    match result {
        Ok(outcome) => {
            if let Some(e) = observer.error.take() {
                return Err(e);
            }
            let d = outcome.diagnostics.last().expect("initial state is always recorded");
            println!(
                "{} steps to t = {}: c in [{}, {}], theta in [{}, {}], interface length {}",
                outcome.state.step,
                outcome.state.time,
                outcome.diagnostics.concentration_min(),
                outcome.diagnostics.concentration_max(),
                d.temperature.min,
                d.temperature.max,
                d.interface_length
            );
            write_manifest(out_dir, parsed, started, "completed")
        }
        Err(e) => {
            if let Some(last) = &observer.last {
                let stem = format!("snap_{}_failure", last.step);
                observer.write_state(last, &stem)?;
                log::error!("solver failed after step {}; last good state written to {stem}.csv", last.step);
            }
            write_manifest(out_dir, parsed, started, &format!("solver failure: {e}"))?;
            Err(CliError::Solver(e))
        }
    }
}

fn print_verification(r: &VerificationReport) {
    println!(
        "patch test: velocity error {:e}, pressure error {:e} (tolerance {:e})",
        r.patch.velocity_error,
        r.patch.pressure_error,
        verification::PATCH_TOLERANCE
    );
    for (name, c, min) in
        [("spatial", &r.spatial, verification::SPATIAL_ORDER_MIN), ("temporal", &r.temporal, verification::TEMPORAL_ORDER_MIN)]
    {
        for (s, e) in c.sizes.iter().zip(&c.errors) {
            println!("{name}: size {s:e}, L2 error {e:e}");
        }
        println!("{name} orders {:?} (required {min})", c.orders);
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    if args.verify {
        let report = verification::run_verification().map_err(CliError::Solver)?;
        print_verification(&report);
        return if report.passed() { Ok(()) } else { Err(CliError::Verification) };
    }
    let parsed = resolve_config(args)?;
    run_benchmark(&parsed, &args.out_dir, args.vtk)
}

/// Entry point behind the binary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
