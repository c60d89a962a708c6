//! Bound violations, front length and discrete balance checks.

use alloc::vec::Vec;

use crate::mesh::StructuredQuadMesh;
use crate::transport::{ScalarField, TransportProblem};

/// Default tolerance below/above the physical bounds before a value counts
/// as a violation.
pub const DEFAULT_VIOLATION_TOL: f64 = 1e-8;

/// Level whose contour length serves as the fingering measure.
pub const FRONT_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub field: &'static str,
    pub time: f64,
    pub min: f64,
    pub max: f64,
    pub below_count: usize,
    pub below_node_fraction: f64,
    pub below_area_fraction: f64,
    pub above_count: usize,
    pub above_node_fraction: f64,
    pub above_area_fraction: f64,
    /// Clamped viscosity evaluations in the flow solve that produced this state.
    pub clamp_events: usize,
}

impl BoundsReport {
    pub fn violated(&self) -> bool {
        self.below_count > 0 || self.above_count > 0
    }
}

/// Nodal extrema and violation counts of `field` against `[lower, upper]`.
/// Element areas count as violating when the centroid value does.
pub fn bounds_report(
    mesh: &StructuredQuadMesh,
    name: &'static str,
    field: &ScalarField,
    lower: f64,
    upper: f64,
    tol: f64,
) -> BoundsReport {
    let values = &field.values;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut below, mut above) = (0usize, 0usize);
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        below += usize::from(v < lower - tol);
        above += usize::from(v > upper + tol);
    }
    let (mut area, mut area_below, mut area_above) = (0.0, 0.0, 0.0);
    for e in 0..mesh.num_elements() {
        let a = mesh.element_area(e);
        let centroid = 0.25 * mesh.elem_conn_q4[e].iter().map(|&n| values[n]).sum::<f64>();
        area += a;
        if centroid < lower - tol {
            area_below += a;
        }
        if centroid > upper + tol {
            area_above += a;
        }
    }
    let n = values.len().max(1) as f64;
    BoundsReport {
        field: name,
        time: field.time,
        min,
        max,
        below_count: below,
        below_node_fraction: below as f64 / n,
        below_area_fraction: if area > 0.0 { area_below / area } else { 0.0 },
        above_count: above,
        above_node_fraction: above as f64 / n,
        above_area_fraction: if area > 0.0 { area_above / area } else { 0.0 },
        clamp_events: 0,
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], va: f64, vb: f64, level: f64) -> [f64; 2] {
    let t = (level - va) / (vb - va);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(b[0] - a[0], b[1] - a[1])
}

/// Total length of the `level` contour of the bilinear nodal field,
/// extracted cell by cell with marching squares. Saddle cells are resolved
/// by comparing the cell average with the level.
pub fn interface_length(mesh: &StructuredQuadMesh, field: &ScalarField, level: f64) -> f64 {
    let values = &field.values;
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(level > min && level < max) {
        return 0.0;
    }
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let conn = mesh.elem_conn_q4[e];
        let p = conn.map(|n| mesh.corner_nodes[n]);
        let v = conn.map(|n| values[n]);
        let above = v.map(|x| x > level);
        // crossing on edge k between corners k and k+1
        let mut cross: [Option<[f64; 2]>; 4] = [None; 4];
        for k in 0..4 {
            let k1 = (k + 1) % 4;
            if above[k] != above[k1] {
                cross[k] = Some(lerp(p[k], p[k1], v[k], v[k1], level));
            }
        }
        let points: Vec<[f64; 2]> = cross.iter().flatten().copied().collect();
        match points.len() {
            2 => total += dist(points[0], points[1]),
            4 => {
                let center_above = 0.25 * (v[0] + v[1] + v[2] + v[3]) > level;
                // Cut off the corners whose class differs from the center;
                // corner k touches edges k-1 and k.
                let cut: [usize; 2] = if above[0] != center_above { [0, 2] } else { [1, 3] };
                for k in cut {
                    let prev = (k + 3) % 4;
                    if let (Some(a), Some(b)) = (cross[prev], cross[k]) {
                        total += dist(a, b);
                    }
                }
            }
            _ => {}
        }
    }
    total
}

/// `|(∫u_new − ∫u_old)/Δt − ∫f + ∫σ u_new|` normalized by `max(|∫f|, 1e-30)`.
/// Zero up to round-off for any scheme with zero boundary flux.
pub fn balance_residual(
    mesh: &StructuredQuadMesh,
    u_new: &ScalarField,
    u_old: &ScalarField,
    problem: &TransportProblem,
    dt: f64,
) -> f64 {
    let source = problem.source_integral(mesh, u_new.time);
    let change = (u_new.integral(mesh) - u_old.integral(mesh)) / dt;
    let sink = problem.sink_integral(mesh, u_new);
    (change - source + sink).abs() / source.abs().max(1e-30)
}

/// Diagnostics recorded after one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub concentration: BoundsReport,
    pub temperature: BoundsReport,
    /// Length of the `c = 0.5` contour.
    pub interface_length: f64,
    /// Larger of the concentration and temperature balance residuals.
    pub balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsSeries {
    pub steps: Vec<StepDiagnostics>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, d: StepDiagnostics) {
        debug_assert!(self.steps.last().is_none_or(|last| last.time <= d.time));
        self.steps.push(d);
    }

    pub fn last(&self) -> Option<&StepDiagnostics> {
        self.steps.last()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Smallest concentration seen over the series.
    pub fn concentration_min(&self) -> f64 {
        self.steps.iter().map(|s| s.concentration.min).fold(f64::INFINITY, f64::min)
    }

    pub fn concentration_max(&self) -> f64 {
        self.steps.iter().map(|s| s.concentration.max).fold(f64::NEG_INFINITY, f64::max)
    }
}
