//! Stabilized advection-diffusion-reaction solver for one scalar field.
//!
//! Solves `∂u/∂t + div[v u − d grad u] = f − σ u` with backward Euler on
//! bilinear (Q4) elements. The advective term is integrated by parts, so
//! the natural boundary condition prescribes the total flux
//! `(v u − d grad u) · n`. Stabilization is residual based: SUPG weights the
//! strong residual with `τ v · grad w`, the isotropic SOLD variant adds the
//! same residual weighted by `τ₁ v∥ · grad w`, and the crosswind variant adds
//! the diffusion `τ₂ (P⊥ grad w; grad u)`.
//!
//! `v∥` depends on the gradient of the unknown. It is taken from a lagged
//! field, optionally refreshed by fixed-point iteration.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{map_with, QuadratureTables};
use crate::flow::FlowSolution;
use crate::linalg::{DirectSolver, SparseSystem, SparsityPattern};
use crate::mesh::{StructuredQuadMesh, Subdomain};

/// Below this argument `ξ₀` is evaluated from its Taylor series.
pub const XI_SERIES_LIMIT: f64 = 1e-3;
/// Speeds below this use the zero-velocity limit of `τ`.
pub const ZERO_SPEED: f64 = 1e-12;
pub const DEFAULT_GRAD_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StabilizationScheme {
    Galerkin,
    #[default]
    Supg,
    SupgIsoSold,
    SupgCrosswindSold,
    SupgBothSold,
}

impl StabilizationScheme {
    pub const ALL: [StabilizationScheme; 5] = [
        StabilizationScheme::Galerkin,
        StabilizationScheme::Supg,
        StabilizationScheme::SupgIsoSold,
        StabilizationScheme::SupgCrosswindSold,
        StabilizationScheme::SupgBothSold,
    ];

    pub fn uses_supg(self) -> bool {
        self != StabilizationScheme::Galerkin
    }

    pub fn uses_isotropic_sold(self) -> bool {
        matches!(self, StabilizationScheme::SupgIsoSold | StabilizationScheme::SupgBothSold)
    }

    pub fn uses_crosswind_sold(self) -> bool {
        matches!(self, StabilizationScheme::SupgCrosswindSold | StabilizationScheme::SupgBothSold)
    }

    pub fn name(self) -> &'static str {
        match self {
            StabilizationScheme::Galerkin => "galerkin",
            StabilizationScheme::Supg => "supg",
            StabilizationScheme::SupgIsoSold => "supg-iso",
            StabilizationScheme::SupgCrosswindSold => "supg-cw",
            StabilizationScheme::SupgBothSold => "supg-both",
        }
    }
}

impl fmt::Display for StabilizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StabilizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StabilizationScheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}` (expected galerkin, supg, supg-iso, supg-cw or supg-both)")))
    }
}

// ---------------------------------------------------------------------------
// Stabilization parameters

/// Upwind function `ξ₀(χ) = coth χ − 1/χ`.
pub fn upwind_xi(chi: f64) -> Result<f64> {
    if !(chi >= 0.0) {
        return Err(Error::invalid(format!("upwind function needs a non-negative argument, got {chi}")));
    }
    if chi < XI_SERIES_LIMIT {
        return Ok(chi / 3.0 - chi * chi * chi / 45.0);
    }
    Ok(1.0 / libm::tanh(chi) - 1.0 / chi)
}

/// `Pe_h = h ‖v‖ / (2 λ_min)`.
pub fn element_peclet(h: f64, speed: f64, lambda_min: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("element length must be positive, got {h}")));
    }
    if !(lambda_min > 0.0) {
        return Err(Error::invalid(format!("diffusivity must be positive, got {lambda_min}")));
    }
    if !(speed >= 0.0) {
        return Err(Error::invalid(format!("speed must be non-negative, got {speed}")));
    }
    Ok(h * speed / (2.0 * lambda_min))
}

fn norm(v: [f64; 2]) -> f64 {
    libm::hypot(v[0], v[1])
}

fn tau_for_speed(speed: f64, h: f64, lambda_min: f64) -> f64 {
    if speed < ZERO_SPEED {
        return h * h / (12.0 * lambda_min);
    }
    let pe = h * speed / (2.0 * lambda_min);
    // pe >= 0 here, so ξ₀ is defined
    let xi = upwind_xi(pe).unwrap_or(0.0);
    h / (2.0 * speed) * xi
}

/// SUPG parameter `τ(v) = h / (2‖v‖) ξ₀(Pe_h)`, continuous as `‖v‖ → 0`.
pub fn compute_tau(v: [f64; 2], h: f64, lambda_min: f64) -> f64 {
    tau_for_speed(norm(v), h, lambda_min)
}

/// Projection of `v` onto the direction of `grad c`; zero when the gradient
/// is below `threshold`.
pub fn sold_parallel_velocity(v: [f64; 2], grad_c: [f64; 2], threshold: f64) -> [f64; 2] {
    let g2 = grad_c[0] * grad_c[0] + grad_c[1] * grad_c[1];
    if libm::sqrt(g2) <= threshold {
        return [0.0; 2];
    }
    let s = (v[0] * grad_c[0] + v[1] * grad_c[1]) / g2;
    [s * grad_c[0], s * grad_c[1]]
}

/// `τ₁ = max{0, τ(v∥) − τ(v)}`.
pub fn tau_iso(v: [f64; 2], v_parallel: [f64; 2], h: f64, lambda_min: f64) -> f64 {
    (compute_tau(v_parallel, h, lambda_min) - compute_tau(v, h, lambda_min)).max(0.0)
}

/// `P⊥ = I − v ⊗ v / ‖v‖²`, or the zero tensor for a vanishing velocity.
pub fn crosswind_projector(v: [f64; 2]) -> [[f64; 2]; 2] {
    let s = norm(v);
    if s <= ZERO_SPEED {
        return [[0.0; 2]; 2];
    }
    let (a, b) = (v[0] / s, v[1] / s);
    [[1.0 - a * a, -a * b], [-a * b, 1.0 - b * b]]
}

/// `τ₂ = max{0, ‖v‖ h^{2/3} − λ_min}`.
pub fn tau_crosswind(v: [f64; 2], h: f64, lambda_min: f64) -> f64 {
    (norm(v) * libm::cbrt(h * h) - lambda_min).max(0.0)
}

// ---------------------------------------------------------------------------
// Problem description

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl ScalarField {
    pub fn constant(mesh: &StructuredQuadMesh, value: f64, time: f64) -> Self {
        Self { values: vec![value; mesh.num_corner_nodes()], time }
    }

    pub fn from_fn(mesh: &StructuredQuadMesh, time: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self { values: mesh.corner_nodes.iter().map(|&x| f(x)).collect(), time }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// `∫ u dΩ` of the bilinear interpolant.
    pub fn integral(&self, mesh: &StructuredQuadMesh) -> f64 {
        (0..mesh.num_elements())
            .map(|e| {
                // exact for bilinear data on parallelograms
                let avg: f64 = mesh.elem_conn_q4[e].iter().map(|&n| self.values[n]).sum::<f64>() * 0.25;
                avg * mesh.element_area(e)
            })
            .sum()
    }
}

pub type SourceFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SourceField {
    /// Constant value per element.
    Elementwise(Vec<f64>),
    /// `f(x, t)`.
    Function(SourceFn),
}

impl fmt::Debug for SourceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceField::Elementwise(v) => f.debug_tuple("Elementwise").field(&v.len()).finish(),
            SourceField::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl SourceField {
    fn at(&self, e: usize, x: [f64; 2], t: f64) -> f64 {
        match self {
            SourceField::Elementwise(v) => v[e],
            SourceField::Function(f) => f(x, t),
        }
    }
}

/// Fixed-point settings for the gradient-dependent SOLD term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoldIteration {
    /// 1 means a single lag: gradients from the previous time level.
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SoldIteration {
    fn default() -> Self {
        Self { max_iterations: 1, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct TransportProblem {
    /// Isotropic diffusivity `d` (so `λ_min = d`).
    pub diffusivity: f64,
    pub source: SourceField,
    /// Linear sink coefficient `σ ≥ 0` per element (reaction `−σ u`).
    pub sink: Vec<f64>,
    /// `(Q4 node, value)` pairs.
    pub dirichlet: Vec<(usize, f64)>,
    /// `(index into mesh.boundary_edges, outward total flux)` pairs.
    pub neumann: Vec<(usize, f64)>,
    pub initial: ScalarField,
    pub scheme: StabilizationScheme,
    pub grad_threshold: f64,
    pub sold_iteration: SoldIteration,
}

impl TransportProblem {
    /// Source `φ^I` on the injection square, sink `φ^P u` on the production
    /// square, zero flux on the whole boundary.
    pub fn well_driven(
        mesh: &StructuredQuadMesh,
        diffusivity: f64,
        phi_injection: f64,
        phi_production: f64,
        initial: ScalarField,
        scheme: StabilizationScheme,
    ) -> Self {
        let source = mesh.subdomain_tag.iter().map(|&t| if t == Subdomain::Injection { phi_injection } else { 0.0 }).collect();
        let sink = mesh.subdomain_tag.iter().map(|&t| if t == Subdomain::Production { phi_production } else { 0.0 }).collect();
        Self {
            diffusivity,
            source: SourceField::Elementwise(source),
            sink,
            dirichlet: Vec::new(),
            neumann: Vec::new(),
            initial,
            scheme,
            grad_threshold: DEFAULT_GRAD_THRESHOLD,
            sold_iteration: SoldIteration::default(),
        }
    }

    pub fn validate(&self, mesh: &StructuredQuadMesh) -> Result<()> {
        if !(self.diffusivity > 0.0) {
            return Err(Error::invalid(format!("diffusivity must be positive, got {}", self.diffusivity)));
        }
        if self.sink.len() != mesh.num_elements() || self.sink.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::invalid("sink coefficient must be non-negative on every element"));
        }
        if let SourceField::Elementwise(v) = &self.source {
            if v.len() != mesh.num_elements() {
                return Err(Error::invalid("elementwise source must have one value per element"));
            }
        }
        if self.initial.len() != mesh.num_corner_nodes() {
            return Err(Error::invalid("initial field does not match the mesh"));
        }
        if !(self.grad_threshold >= 0.0) {
            return Err(Error::invalid("SOLD gradient threshold must be non-negative"));
        }
        let nc = mesh.num_corner_nodes();
        for &(node, _) in &self.dirichlet {
            if node >= nc {
                return Err(Error::IndexOutOfRange { index: node, dim: nc });
            }
        }
        for &(edge, _) in &self.neumann {
            let Some(be) = mesh.boundary_edges.get(edge) else {
                return Err(Error::IndexOutOfRange { index: edge, dim: mesh.boundary_edges.len() });
            };
            let conn = &mesh.elem_conn_q4[be.element];
            let [a, b] = be.edge.corners().map(|k| conn[k]);
            if self.dirichlet.iter().any(|&(n, _)| n == a || n == b) {
                return Err(Error::invalid(format!("boundary edge {edge} is both Dirichlet and Neumann")));
            }
        }
        Ok(())
    }

    /// `∫ f(x, t) dΩ` with the standard quadrature.
    pub fn source_integral(&self, mesh: &StructuredQuadMesh, t: f64) -> f64 {
        let tables = QuadratureTables::standard();
        let mut total = 0.0;
        for e in 0..mesh.num_elements() {
            let corners = mesh.element_corners(e);
            for (qp, (_, w)) in tables.rule.iter().enumerate() {
                if let Ok(m) = map_with(&corners, &tables.geometry[qp], &tables.q4[qp]) {
                    total += self.source.at(e, m.x, t) * w * m.det_j;
                }
            }
        }
        total
    }

    /// `∫ σ u dΩ`.
    pub fn sink_integral(&self, mesh: &StructuredQuadMesh, u: &ScalarField) -> f64 {
        (0..mesh.num_elements())
            .filter(|&e| self.sink[e] != 0.0)
            .map(|e| {
                let avg: f64 = mesh.elem_conn_q4[e].iter().map(|&n| u.values[n]).sum::<f64>() * 0.25;
                self.sink[e] * avg * mesh.element_area(e)
            })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Assembly and time stepping

#[derive(Debug, Clone)]
pub struct TransportSolver {
    pattern: Arc<SparsityPattern>,
    tables: QuadratureTables,
    solver: DirectSolver,
}

impl TransportSolver {
    pub fn new(mesh: &StructuredQuadMesh) -> Result<Self> {
        let pattern = SparsityPattern::from_element_maps(mesh.num_corner_nodes(), mesh.elem_conn_q4.iter().map(|c| &c[..]))?;
        Ok(Self { pattern: Arc::new(pattern), tables: QuadratureTables::standard(), solver: DirectSolver::new() })
    }

    /// Backward-Euler system for `u` at `u_prev.time + dt`. `u_lag` supplies
    /// the gradient used in `v∥`.
    pub fn assemble_step(
        &self,
        mesh: &StructuredQuadMesh,
        problem: &TransportProblem,
        flow: &FlowSolution,
        u_prev: &ScalarField,
        u_lag: &ScalarField,
        dt: f64,
    ) -> Result<SparseSystem> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        problem.validate(mesh)?;
        let nc = mesh.num_corner_nodes();
        if u_prev.len() != nc || u_lag.len() != nc {
            return Err(Error::invalid("scalar field does not match the mesh"));
        }
        if flow.velocity.len() != mesh.num_q9_nodes() {
            return Err(Error::invalid("velocity field does not match the mesh"));
        }

        let t_new = u_prev.time + dt;
        let d = problem.diffusivity;
        let scheme = problem.scheme;
        let mut system = SparseSystem::new(self.pattern.clone());
        let mut k = [0.0f64; 16];
        let mut rhs = [0.0f64; 4];

        for e in 0..mesh.num_elements() {
            k.fill(0.0);
            rhs.fill(0.0);
            let corners = mesh.element_corners(e);
            let conn = mesh.elem_conn_q4[e];
            let h = mesh.h_elem[e];
            let sigma = problem.sink[e];
            for (qp, (_, w)) in self.tables.rule.iter().enumerate() {
                let geo = &self.tables.geometry[qp];
                let m4 = map_with(&corners, geo, &self.tables.q4[qp]).map_err(|err| err.at_element(e))?;
                let m9 = map_with(&corners, geo, &self.tables.q9[qp]).map_err(|err| err.at_element(e))?;
                let n = &m4.basis;
                let dv = w * m4.det_j;
                let (v, div_v) = flow.velocity_at(mesh, e, &m9.basis);
                let f = problem.source.at(e, m4.x, t_new);
                let (u_old, _) = n.interpolate(|a| u_prev.values[conn[a]]);

                let (tau, tau1, v_par) = if scheme.uses_supg() {
                    let tau = compute_tau(v, h, d);
                    if scheme.uses_isotropic_sold() {
                        let (_, grad_lag) = n.interpolate(|a| u_lag.values[conn[a]]);
                        let v_par = sold_parallel_velocity(v, grad_lag, problem.grad_threshold);
                        (tau, tau_iso(v, v_par, h, d), v_par)
                    } else {
                        (tau, 0.0, [0.0; 2])
                    }
                } else {
                    (0.0, 0.0, [0.0; 2])
                };
                let (tau2, proj) = if scheme.uses_crosswind_sold() {
                    (tau_crosswind(v, h, d), crosswind_projector(v))
                } else {
                    (0.0, [[0.0; 2]; 2])
                };

                let known = u_old / dt + f;
                for i in 0..4 {
                    let gi = n.grads[i];
                    let ni = n.values[i];
                    let stab_weight = tau * (v[0] * gi[0] + v[1] * gi[1]) + tau1 * (v_par[0] * gi[0] + v_par[1] * gi[1]);
                    let p_gi = [proj[0][0] * gi[0] + proj[0][1] * gi[1], proj[1][0] * gi[0] + proj[1][1] * gi[1]];
                    for j in 0..4 {
                        let gj = n.grads[j];
                        let nj = n.values[j];
                        let hj = n.hessians[j];
                        let galerkin = ni * nj / dt - (gi[0] * v[0] + gi[1] * v[1]) * nj
                            + d * (gi[0] * gj[0] + gi[1] * gj[1])
                            + sigma * ni * nj;
                        let strong = nj / dt + v[0] * gj[0] + v[1] * gj[1] + nj * div_v - d * (hj[0] + hj[2]) + sigma * nj;
                        let crosswind = tau2 * (p_gi[0] * gj[0] + p_gi[1] * gj[1]);
                        k[i * 4 + j] += (galerkin + stab_weight * strong + crosswind) * dv;
                    }
                    rhs[i] += (ni + stab_weight) * known * dv;
                }
            }
            system.scatter_add(&k, &conn)?;
            system.scatter_add_rhs(&rhs, &conn)?;
        }

        for &(edge, flux) in &problem.neumann {
            let be = mesh.boundary_edges[edge];
            let conn = &mesh.elem_conn_q4[be.element];
            let [a, b] = be.edge.corners().map(|k| conn[k]);
            let (pa, pb) = (mesh.corner_nodes[a], mesh.corner_nodes[b]);
            let half = 0.5 * libm::hypot(pb[0] - pa[0], pb[1] - pa[1]) * flux;
            system.rhs[a] -= half;
            system.rhs[b] -= half;
        }
        system.constraints.extend(problem.dirichlet.iter().copied());
        Ok(system)
    }

    /// One backward-Euler step. With the isotropic SOLD term and more than
    /// one allowed iteration, the lagged gradient is refreshed until the
    /// relative change drops below the tolerance.
    pub fn advance(
        &mut self,
        mesh: &StructuredQuadMesh,
        problem: &TransportProblem,
        flow: &FlowSolution,
        u_prev: &ScalarField,
        dt: f64,
    ) -> Result<ScalarField> {
        let iterations = if problem.scheme.uses_isotropic_sold() { problem.sold_iteration.max_iterations.max(1) } else { 1 };
        let mut lag = u_prev.clone();
        let mut values = Vec::new();
        for it in 0..iterations {
            let system = self.assemble_step(mesh, problem, flow, u_prev, &lag, dt)?;
            values = self.solver.solve(&system)?;
            if it + 1 < iterations {
                let diff = values.iter().zip(&lag.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let scale = values.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1e-300);
                let converged = it > 0 && diff / scale < problem.sold_iteration.tolerance;
                lag.values.clone_from(&values);
                if converged {
                    break;
                }
            }
        }
        let out = ScalarField { values, time: u_prev.time + dt };
        if let Some(node) = out.first_non_finite() {
            return Err(Error::NonFinite { field: "scalar", node, step: 0 });
        }
        Ok(out)
    }
}

pub fn assemble_transport_step(
    mesh: &StructuredQuadMesh,
    problem: &TransportProblem,
    flow: &FlowSolution,
    u_prev: &ScalarField,
    u_lag: &ScalarField,
    dt: f64,
) -> Result<SparseSystem> {
    TransportSolver::new(mesh)?.assemble_step(mesh, problem, flow, u_prev, u_lag, dt)
}

pub fn advance_scalar(
    mesh: &StructuredQuadMesh,
    problem: &TransportProblem,
    flow: &FlowSolution,
    u_prev: &ScalarField,
    dt: f64,
) -> Result<ScalarField> {
    TransportSolver::new(mesh)?.advance(mesh, problem, flow, u_prev, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn xi_values() {
        assert_eq!(upwind_xi(0.0).unwrap(), 0.0);
        assert!(upwind_xi(1e-9).unwrap() < 1e-9);
        let coth1 = libm::cosh(1.0) / libm::sinh(1.0);
        assert!(rel(upwind_xi(1.0).unwrap(), coth1 - 1.0) < 1e-12);
        assert!((upwind_xi(1.0).unwrap() - 0.3130).abs() < 1e-4);
        assert!(rel(upwind_xi(1e6).unwrap(), 1.0 - 1e-6) < 1e-12);
        assert!(upwind_xi(-0.1).is_err());
        assert!(upwind_xi(f64::NAN).is_err());
    }

    #[test]
    fn xi_series_boundary_is_continuous() {
        let below = upwind_xi(XI_SERIES_LIMIT * (1.0 - 1e-12)).unwrap();
        let above = upwind_xi(XI_SERIES_LIMIT * (1.0 + 1e-12)).unwrap();
        assert!(rel(below, above) < 1e-6);
    }

    #[test]
    fn peclet_values() {
        assert!(rel(element_peclet(0.01, 1.0, 1e-7).unwrap(), 5e4) < 1e-12);
        assert_eq!(element_peclet(0.01, 0.0, 1e-7).unwrap(), 0.0);
        assert!(rel(element_peclet(0.01, 1.0, 0.005).unwrap(), 1.0) < 1e-12);
        assert!(element_peclet(0.0, 1.0, 1.0).is_err());
        assert!(element_peclet(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn tau_values() {
        assert!(rel(compute_tau([0.0, 0.0], 0.01, 1e-7), 1e-4 / 12e-7) < 1e-12);
        let coth1 = libm::cosh(1.0) / libm::sinh(1.0);
        assert!(rel(compute_tau([1.0, 0.0], 0.01, 0.005), 0.005 * (coth1 - 1.0)) < 1e-12);
        assert!(rel(compute_tau([0.0, 1.0], 0.01, 1e-9), 0.005) < 1e-6);
    }

    #[test]
    fn parallel_velocity() {
        assert_eq!(sold_parallel_velocity([1.0, 2.0], [0.0, 0.0], 1e-10), [0.0, 0.0]);
        assert_eq!(sold_parallel_velocity([1.0, 0.0], [0.0, 1.0], 1e-10), [0.0, 0.0]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let p = sold_parallel_velocity([1.0, 0.0], [s, s], 1e-10);
        assert!(rel(p[0], 0.5) < 1e-12 && rel(p[1], 0.5) < 1e-12);
        assert_eq!(sold_parallel_velocity([1.0, 0.0], [1e-11, 0.0], 1e-10), [0.0, 0.0]);
    }

    #[test]
    fn projector_values() {
        assert_eq!(crosswind_projector([1.0, 0.0]), [[0.0, 0.0], [0.0, 1.0]]);
        assert_eq!(crosswind_projector([0.0, 0.0]), [[0.0; 2]; 2]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let p = crosswind_projector([s, s]);
        assert!(rel(p[0][0], 0.5) < 1e-12 && rel(p[0][1], -0.5) < 1e-12 && rel(p[1][1], 0.5) < 1e-12);
    }

    #[test]
    fn crosswind_tau_values() {
        let expected = libm::pow(0.01, 2.0 / 3.0) - 1e-7;
        assert!(rel(tau_crosswind([1.0, 0.0], 0.01, 1e-7), expected) < 1e-12);
        assert!((expected - 0.046416).abs() < 1e-6);
        assert_eq!(tau_crosswind([0.0, 0.0], 0.01, 1e-7), 0.0);
        assert_eq!(tau_crosswind([1e-3, 0.0], 0.01, 1.0), 0.0);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in StabilizationScheme::ALL {
            assert_eq!(s.name().parse::<StabilizationScheme>().unwrap(), s);
        }
        assert!("upwind".parse::<StabilizationScheme>().is_err());
    }

    #[test]
    fn rejects_non_positive_dt() {
        let mesh = build_structured_mesh(4, 4, 1.0, 0.25).unwrap();
        let u = ScalarField::constant(&mesh, 0.3, 0.0);
        let p = TransportProblem::well_driven(&mesh, 1e-3, 0.0, 0.0, u.clone(), StabilizationScheme::Galerkin);
        let flow = FlowSolution::zeros(&mesh);
        assert!(matches!(assemble_transport_step(&mesh, &p, &flow, &u, &u, 0.0), Err(Error::InvalidArgument(_))));
        assert!(assemble_transport_step(&mesh, &p, &flow, &u, &u, -1.0).is_err());
    }

    #[test]
    fn pure_diffusion_keeps_constant() {
        let mesh = build_structured_mesh(6, 6, 1.0, 0.2).unwrap();
        let u = ScalarField::constant(&mesh, 0.3, 0.0);
        let p = TransportProblem::well_driven(&mesh, 1e-2, 0.0, 0.0, u.clone(), StabilizationScheme::Galerkin);
        let next = advance_scalar(&mesh, &p, &FlowSolution::zeros(&mesh), &u, 0.5).unwrap();
        assert!(next.values.iter().all(|x| (x - 0.3).abs() < 1e-14));
        assert_eq!(next.time, 0.5);
    }

    #[test]
    fn uniform_decay_is_backward_euler() {
        let mesh = build_structured_mesh(6, 6, 1.0, 0.2).unwrap();
        let u0 = 0.8;
        let (s, dt) = (0.4, 0.25);
        let u = ScalarField::constant(&mesh, u0, 0.0);
        for scheme in StabilizationScheme::ALL {
            let mut p = TransportProblem::well_driven(&mesh, 1e-3, 0.0, 0.0, u.clone(), scheme);
            p.sink = vec![s; mesh.num_elements()];
            let next = advance_scalar(&mesh, &p, &FlowSolution::zeros(&mesh), &u, dt).unwrap();
            let expected = u0 / (1.0 + s * dt);
            assert!(next.values.iter().all(|x| (x - expected).abs() < 1e-14), "{scheme}");
        }
    }

    #[test]
    fn dirichlet_and_neumann_on_same_edge_rejected() {
        let mesh = build_structured_mesh(4, 4, 1.0, 0.25).unwrap();
        let u = ScalarField::constant(&mesh, 0.0, 0.0);
        let mut p = TransportProblem::well_driven(&mesh, 1e-3, 0.0, 0.0, u, StabilizationScheme::Supg);
        p.dirichlet.push((0, 1.0));
        p.neumann.push((0, 0.0));
        assert!(p.validate(&mesh).is_err());
    }
}
