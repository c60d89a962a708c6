//! Snapshot, diagnostics and manifest files.
//!
//! Floats are written as the shortest decimal that parses back to the same
//! `f64` (scientific notation for very small or very large magnitudes), so
//! reading a snapshot returns the in-memory fields bit for bit.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use fingering_core::{SimulationState, StepDiagnostics, StructuredQuadMesh};

use crate::config::ProvenanceEntry;

/// Shortest round-trip formatting; `Display` alone would spell out every
/// leading zero of values like 1e-300.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

pub const SNAPSHOT_HEADER: &str = "x,y,c,theta,p,vx,vy";
pub const DIAGNOSTICS_HEADER: &str =
    "t,c_min,c_max,frac_below,frac_above,theta_min,theta_max,interface_len,balance_res";

/// Nodal fields of one snapshot, in file row order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl SnapshotData {
    pub fn from_state(mesh: &StructuredQuadMesh, state: &SimulationState) -> Self {
        let v = state.flow.corner_velocity(mesh);
        Self {
            x: mesh.corner_nodes.iter().map(|p| p[0]).collect(),
            y: mesh.corner_nodes.iter().map(|p| p[1]).collect(),
            c: state.c.values.clone(),
            theta: state.theta.values.clone(),
            p: state.flow.pressure.clone(),
            vx: v.iter().map(|v| v[0]).collect(),
            vy: v.iter().map(|v| v[1]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// One row per corner node. Corner nodes are numbered row by row from the
/// bottom, so rows come out sorted by `(y, x)`.
pub fn write_snapshot(out: &mut impl Write, data: &SnapshotData) -> io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for i in 0..data.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            Num(data.x[i]),
            Num(data.y[i]),
            Num(data.c[i]),
            Num(data.theta[i]),
            Num(data.p[i]),
            Num(data.vx[i]),
            Num(data.vy[i])
        )?;
    }
    Ok(())
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

pub fn read_snapshot(input: impl BufRead) -> io::Result<SnapshotData> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != SNAPSHOT_HEADER {
        return Err(invalid(1, format!("expected header `{SNAPSHOT_HEADER}`, got `{header}`")));
    }
    let mut data = SnapshotData::default();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| invalid(idx + 2, e))?;
        let [x, y, c, theta, p, vx, vy] = fields[..] else {
            return Err(invalid(idx + 2, format!("expected 7 fields, got {}", fields.len())));
        };
        data.x.push(x);
        data.y.push(y);
        data.c.push(c);
        data.theta.push(theta);
        data.p.push(p);
        data.vx.push(vx);
        data.vy.push(vy);
    }
    Ok(data)
}

pub fn write_snapshot_file(path: &Path, data: &SnapshotData) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, data)?;
    w.flush()
}

/// Legacy ASCII VTK structured-points file with the snapshot fields as point
/// data.
pub fn write_vtk(out: &mut impl Write, mesh: &StructuredQuadMesh, data: &SnapshotData, title: &str) -> io::Result<()> {
    let (nx, ny) = (mesh.nx + 1, mesh.ny + 1);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {nx} {ny} 1")?;
    writeln!(out, "ORIGIN 0 0 0")?;
    writeln!(out, "SPACING {} {} 1", mesh.length / mesh.nx as f64, mesh.length / mesh.ny as f64)?;
    writeln!(out, "POINT_DATA {}", nx * ny)?;
    for (name, values) in [("c", &data.c), ("theta", &data.theta), ("p", &data.p)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(out, "{}", Num(*v))?;
        }
    }
    writeln!(out, "VECTORS velocity double")?;
    for (vx, vy) in data.vx.iter().zip(&data.vy) {
        writeln!(out, "{} {} 0", Num(*vx), Num(*vy))?;
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, mesh: &StructuredQuadMesh, data: &SnapshotData, title: &str) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, mesh, data, title)?;
    w.flush()
}

/// Streams `diagnostics.csv` one row per step.
pub struct DiagnosticsWriter<W: Write> {
    out: W,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, d: &StepDiagnostics) -> io::Result<()> {
        let c = &d.concentration;
        let th = &d.temperature;
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            Num(d.time),
            Num(c.min),
            Num(c.max),
            Num(c.below_area_fraction),
            Num(c.above_area_fraction),
            Num(th.min),
            Num(th.max),
            Num(d.interface_length),
            Num(d.balance_residual)
        )
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Resolved config, provenance of every value and the wall-clock time.
pub fn write_manifest(
    out: &mut impl Write,
    config_text: &str,
    provenance: &[ProvenanceEntry],
    wall_clock_seconds: f64,
    outcome: &str,
) -> io::Result<()> {
    writeln!(out, "# resolved configuration")?;
    out.write_all(config_text.as_bytes())?;
    writeln!(out)?;
    writeln!(out, "# provenance")?;
    for e in provenance {
        writeln!(out, "{}.{} = {} ({})", e.section, e.key, e.value, e.source)?;
    }
    writeln!(out)?;
    writeln!(out, "# run")?;
    writeln!(out, "outcome = {outcome}")?;
    writeln!(out, "wall_clock_seconds = {wall_clock_seconds:.3}")?;
    Ok(())
}
