//! Quasistatic mixed Darcy solve with Q9 velocity and Q4 pressure.
//!
//! The discrete problem is the saddle-point system
//!
//! ```text
//! (w; μ/k v) − (div w; p)            = (w; ρb) − (w·n; p₀)_Γp
//!            − (q; div v)            = −(q; φ)
//! ```
//!
//! with the normal velocity prescribed strongly on Γv edges. When no edge
//! carries a pressure condition the pressure is fixed by requiring its nodal
//! values to have zero mean.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::fem::{map_with, BasisValues, QuadratureTables};
use crate::linalg::{DirectSolver, Factorization, SparseSystem, SparsityPattern};
use crate::mesh::{LocalEdge, StructuredQuadMesh, Subdomain};

/// Largest magnitude of the viscosity exponent before clamping.
pub const EXPONENT_CLAMP: f64 = 50.0;

/// `μ = μ₀ exp[R_c (1 − c) + R_θ (1 − θ)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityLaw {
    pub mu0: f64,
    pub r_c: f64,
    pub r_theta: f64,
}

impl Default for ViscosityLaw {
    fn default() -> Self {
        Self { mu0: 1.0, r_c: 2.0, r_theta: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityEval {
    pub value: f64,
    pub clamped: bool,
}

/// Anything that maps `(c, θ)` to a viscosity. The flow assembly only sees
/// this trait, which lets tests observe exactly which fields it was fed.
pub trait ViscosityModel {
    fn evaluate(&self, c: f64, theta: f64) -> ViscosityEval;
}

impl ViscosityModel for ViscosityLaw {
    fn evaluate(&self, c: f64, theta: f64) -> ViscosityEval {
        let exponent = self.r_c * (1.0 - c) + self.r_theta * (1.0 - theta);
        let clamped_exp = exponent.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
        ViscosityEval { value: self.mu0 * libm::exp(clamped_exp), clamped: clamped_exp != exponent }
    }
}

pub fn viscosity(c: f64, theta: f64, law: &ViscosityLaw) -> f64 {
    law.evaluate(c, theta).value
}

pub type PressureData = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Boundary condition carried by one boundary edge.
#[derive(Clone)]
pub enum EdgeCondition {
    /// `v · n = value`.
    NormalVelocity(f64),
    /// `p = p₀(x)`, imposed weakly.
    Pressure(PressureData),
}

impl fmt::Debug for EdgeCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeCondition::NormalVelocity(v) => write!(f, "NormalVelocity({v})"),
            EdgeCondition::Pressure(_) => f.write_str("Pressure(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub permeability: f64,
    /// Optional per-element multiplier on the permeability.
    pub permeability_factor: Option<Vec<f64>>,
    pub viscosity: ViscosityLaw,
    /// Piecewise-constant mass source per element.
    pub source: Vec<f64>,
    pub body_force: [f64; 2],
    /// One condition per entry of `mesh.boundary_edges`.
    pub boundary: Vec<EdgeCondition>,
}

impl FlowProblem {
    /// Sealed box driven by the two wells: `φ^I` on the injection square,
    /// `−φ^P` on the production square and `v · n = 0` everywhere.
    pub fn quarter_five_spot(
        mesh: &StructuredQuadMesh,
        permeability: f64,
        viscosity: ViscosityLaw,
        phi_injection: f64,
        phi_production: f64,
    ) -> Self {
        let source = mesh
            .subdomain_tag
            .iter()
            .map(|t| match t {
                Subdomain::Injection => phi_injection,
                Subdomain::Production => -phi_production,
                Subdomain::Interior => 0.0,
            })
            .collect();
        Self {
            permeability,
            permeability_factor: None,
            viscosity,
            source,
            body_force: [0.0; 2],
            boundary: vec![EdgeCondition::NormalVelocity(0.0); mesh.boundary_edges.len()],
        }
    }

    pub fn has_pressure_boundary(&self) -> bool {
        self.boundary.iter().any(|b| matches!(b, EdgeCondition::Pressure(_)))
    }

    fn element_permeability(&self, e: usize) -> f64 {
        match &self.permeability_factor {
            Some(f) => self.permeability * f[e],
            None => self.permeability,
        }
    }

    fn validate(&self, mesh: &StructuredQuadMesh) -> Result<()> {
        if !(self.permeability > 0.0) {
            return Err(Error::invalid(format!("permeability must be positive, got {}", self.permeability)));
        }
        if !(self.viscosity.mu0 > 0.0) {
            return Err(Error::invalid(format!("mu0 must be positive, got {}", self.viscosity.mu0)));
        }
        if self.source.len() != mesh.num_elements() {
            return Err(Error::invalid("flow source must have one value per element"));
        }
        if self.boundary.len() != mesh.boundary_edges.len() {
            return Err(Error::invalid("flow boundary must have one condition per boundary edge"));
        }
        if let Some(f) = &self.permeability_factor {
            if f.len() != mesh.num_elements() || f.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid("permeability factor must be positive on every element"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Velocity at every Q9 node.
    pub velocity: Vec<[f64; 2]>,
    /// Pressure at every Q4 node.
    pub pressure: Vec<f64>,
    /// Quadrature points at which the viscosity exponent was clamped.
    pub clamp_events: usize,
}

impl FlowSolution {
    pub fn zeros(mesh: &StructuredQuadMesh) -> Self {
        Self { velocity: vec![[0.0; 2]; mesh.num_q9_nodes()], pressure: vec![0.0; mesh.num_corner_nodes()], clamp_events: 0 }
    }

    /// Velocity and its divergence at a point of element `e`, given the
    /// physical Q9 basis there.
    pub fn velocity_at(&self, mesh: &StructuredQuadMesh, e: usize, q9: &BasisValues) -> ([f64; 2], f64) {
        let conn = &mesh.elem_conn_q9[e];
        let mut v = [0.0; 2];
        let mut div = 0.0;
        for a in 0..9 {
            let va = self.velocity[conn[a]];
            v[0] += q9.values[a] * va[0];
            v[1] += q9.values[a] * va[1];
            div += q9.grads[a][0] * va[0] + q9.grads[a][1] * va[1];
        }
        (v, div)
    }

    /// Velocity sampled at the Q4 nodes.
    pub fn corner_velocity(&self, mesh: &StructuredQuadMesh) -> Vec<[f64; 2]> {
        (0..mesh.num_corner_nodes()).map(|n| self.velocity[mesh.corner_to_q9(n)]).collect()
    }
}

fn velocity_dof(q9_node: usize, component: usize) -> usize {
    2 * q9_node + component
}

/// Cached sparsity pattern and symbolic factorization for repeated flow
/// solves on one mesh.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    pattern: Arc<SparsityPattern>,
    tables: QuadratureTables,
    solver: DirectSolver,
}

impl FlowSolver {
    pub fn new(mesh: &StructuredQuadMesh) -> Result<Self> {
        let n9 = mesh.num_q9_nodes();
        let dim = 2 * n9 + mesh.num_corner_nodes();
        let maps: Vec<[usize; 22]> = (0..mesh.num_elements()).map(|e| element_dofs(mesh, e)).collect();
        let pattern = SparsityPattern::from_element_maps(dim, maps.iter().map(|m| &m[..]))?;
        let n9 = mesh.num_q9_nodes();
        let solver = DirectSolver::with_factorization(Factorization::SaddlePoint {
            constraint_block: 2 * n9..2 * n9 + mesh.num_corner_nodes(),
        });
        Ok(Self { pattern: Arc::new(pattern), tables: QuadratureTables::standard(), solver })
    }

    pub fn assemble(
        &self,
        mesh: &StructuredQuadMesh,
        problem: &FlowProblem,
        c: &[f64],
        theta: &[f64],
        viscosity: &dyn ViscosityModel,
    ) -> Result<(SparseSystem, usize)> {
        problem.validate(mesh)?;
        let nc = mesh.num_corner_nodes();
        if c.len() != nc || theta.len() != nc {
            return Err(Error::invalid(format!("scalar fields must have {nc} nodal values")));
        }
        let n9 = mesh.num_q9_nodes();
        let mut system = SparseSystem::new(self.pattern.clone());
        let mut clamps = 0usize;

        let mut local = [0.0f64; 22 * 22];
        let mut local_rhs = [0.0f64; 22];
        for e in 0..mesh.num_elements() {
            local.fill(0.0);
            local_rhs.fill(0.0);
            let corners = mesh.element_corners(e);
            let k_e = problem.element_permeability(e);
            let conn4 = &mesh.elem_conn_q4[e];
            for (qp, (_, w)) in self.tables.rule.iter().enumerate() {
                let q9 = map_with(&corners, &self.tables.geometry[qp], &self.tables.q9[qp])
                    .map_err(|err| err.at_element(e))?;
                let m4 = &self.tables.q4[qp];
                let dv = w * q9.det_j;
                let cq: f64 = (0..4).map(|a| m4.values[a] * c[conn4[a]]).sum();
                let tq: f64 = (0..4).map(|a| m4.values[a] * theta[conn4[a]]).sum();
                let mu = viscosity.evaluate(cq, tq);
                clamps += usize::from(mu.clamped);
                let coef = mu.value / k_e;
                let b = &q9.basis;
                for a in 0..9 {
                    for bb in 0..9 {
                        let m = coef * b.values[a] * b.values[bb] * dv;
                        local[(2 * a) * 22 + 2 * bb] += m;
                        local[(2 * a + 1) * 22 + 2 * bb + 1] += m;
                    }
                    for p in 0..4 {
                        for d in 0..2 {
                            let val = -b.grads[a][d] * m4.values[p] * dv;
                            local[(2 * a + d) * 22 + 18 + p] += val;
                            local[(18 + p) * 22 + 2 * a + d] += val;
                        }
                    }
                    local_rhs[2 * a] += b.values[a] * problem.body_force[0] * dv;
                    local_rhs[2 * a + 1] += b.values[a] * problem.body_force[1] * dv;
                }
                for p in 0..4 {
                    local_rhs[18 + p] -= m4.values[p] * problem.source[e] * dv;
                }
            }
            let map = element_dofs(mesh, e);
            system.scatter_add(&local, &map)?;
            system.scatter_add_rhs(&local_rhs, &map)?;
        }

        // Boundary conditions.
        let gauss = crate::fem::gauss_rule(3)?;
        let edge_points: Vec<(f64, f64)> = gauss.points[..3].iter().map(|p| p[0]).zip([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]).collect();
        let mut fixed: alloc::collections::BTreeMap<usize, f64> = alloc::collections::BTreeMap::new();
        for (be, cond) in mesh.boundary_edges.iter().zip(&problem.boundary) {
            let conn = &mesh.elem_conn_q9[be.element];
            let nodes = be.edge.q9_nodes().map(|a| conn[a]);
            let component = match be.edge {
                LocalEdge::Left | LocalEdge::Right => 0,
                LocalEdge::Bottom | LocalEdge::Top => 1,
            };
            match cond {
                EdgeCondition::NormalVelocity(vn) => {
                    let value = vn * be.normal[component];
                    for node in nodes {
                        let dof = velocity_dof(node, component);
                        match fixed.get(&dof) {
                            Some(&old) if old != value => {
                                return Err(Error::invalid(format!(
                                    "conflicting normal velocity at Q9 node {node}: {old} vs {value}"
                                )))
                            }
                            _ => {
                                fixed.insert(dof, value);
                            }
                        }
                    }
                }
                EdgeCondition::Pressure(p0) => {
                    let a = mesh.q9_nodes[nodes[0]];
                    let bpt = mesh.q9_nodes[nodes[2]];
                    let half_len = 0.5 * libm::hypot(bpt[0] - a[0], bpt[1] - a[1]);
                    for &(s, w) in &edge_points {
                        let x = [0.5 * (1.0 - s) * a[0] + 0.5 * (1.0 + s) * bpt[0], 0.5 * (1.0 - s) * a[1] + 0.5 * (1.0 + s) * bpt[1]];
                        let shape = [0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)];
                        let p = p0(x);
                        for (k, node) in nodes.iter().enumerate() {
                            system.rhs[velocity_dof(*node, component)] -= w * half_len * shape[k] * be.normal[component] * p;
                        }
                    }
                }
            }
        }
        system.constraints.extend(fixed);

        if !problem.has_pressure_boundary() {
            let source_integral: f64 = (0..mesh.num_elements()).map(|e| problem.source[e] * mesh.element_area(e)).sum();
            let boundary_flux: f64 = mesh
                .boundary_edges
                .iter()
                .zip(&problem.boundary)
                .map(|(be, cond)| match cond {
                    EdgeCondition::NormalVelocity(vn) => {
                        let [a, b] = be.edge.corners().map(|k| mesh.corner_nodes[mesh.elem_conn_q4[be.element][k]]);
                        vn * libm::hypot(b[0] - a[0], b[1] - a[1])
                    }
                    EdgeCondition::Pressure(_) => 0.0,
                })
                .sum();
            let mismatch = source_integral - boundary_flux;
            if mismatch.abs() > 1e-12 {
                return Err(Error::Compatibility { integral: mismatch });
            }
            system.mean_zero = Some(2 * n9..2 * n9 + nc);
        }
        Ok((system, clamps))
    }

    pub fn solve(
        &mut self,
        mesh: &StructuredQuadMesh,
        problem: &FlowProblem,
        c: &[f64],
        theta: &[f64],
        viscosity: &dyn ViscosityModel,
    ) -> Result<FlowSolution> {
        let (system, clamp_events) = self.assemble(mesh, problem, c, theta, viscosity)?;
        let x = self.solver.solve(&system)?;
        let n9 = mesh.num_q9_nodes();
        let velocity = (0..n9).map(|n| [x[2 * n], x[2 * n + 1]]).collect();
        let pressure = x[2 * n9..].to_vec();
        Ok(FlowSolution { velocity, pressure, clamp_events })
    }
}

fn element_dofs(mesh: &StructuredQuadMesh, e: usize) -> [usize; 22] {
    let n9 = mesh.num_q9_nodes();
    let mut map = [0usize; 22];
    for (a, &node) in mesh.elem_conn_q9[e].iter().enumerate() {
        map[2 * a] = velocity_dof(node, 0);
        map[2 * a + 1] = velocity_dof(node, 1);
    }
    for (p, &node) in mesh.elem_conn_q4[e].iter().enumerate() {
        map[18 + p] = 2 * n9 + node;
    }
    map
}

/// Assembles the flow system with the problem's own viscosity law. Returns
/// the system and the number of clamped viscosity evaluations.
pub fn assemble_flow(mesh: &StructuredQuadMesh, problem: &FlowProblem, c: &[f64], theta: &[f64]) -> Result<(SparseSystem, usize)> {
    FlowSolver::new(mesh)?.assemble(mesh, problem, c, theta, &problem.viscosity)
}

pub fn solve_flow(mesh: &StructuredQuadMesh, problem: &FlowProblem, c: &[f64], theta: &[f64]) -> Result<FlowSolution> {
    FlowSolver::new(mesh)?.solve(mesh, problem, c, theta, &problem.viscosity)
}

/// Largest `|Σ_e ∫_e q (div v − φ)|` over the nodal pressure test functions.
pub fn mass_balance_defect(mesh: &StructuredQuadMesh, problem: &FlowProblem, solution: &FlowSolution) -> f64 {
    let tables = QuadratureTables::standard();
    let mut per_node = vec![0.0; mesh.num_corner_nodes()];
    for e in 0..mesh.num_elements() {
        let corners = mesh.element_corners(e);
        for (qp, (_, w)) in tables.rule.iter().enumerate() {
            let Ok(q9) = map_with(&corners, &tables.geometry[qp], &tables.q9[qp]) else { continue };
            let (_, div) = solution.velocity_at(mesh, e, &q9.basis);
            let r = (div - problem.source[e]) * w * q9.det_j;
            for (p, &node) in mesh.elem_conn_q4[e].iter().enumerate() {
                per_node[node] += tables.q4[qp].values[p] * r;
            }
        }
    }
    per_node.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Net outflow from the injection square measured with the discrete
/// pressure test function `q_I = Σ N_i` over the corner nodes of the
/// injection elements, i.e. `(q_I; div v)`. `q_I` is one on `Ω^I` and its
/// support reaches only one element ring further, where `φ = 0`, so the
/// discrete constraint makes this equal to `φ^I |Ω^I|`. The plain integral of
/// `div v` over `Ω^I` is not pinned by the pressure-tested constraint.
pub fn injection_outflow(mesh: &StructuredQuadMesh, solution: &FlowSolution) -> f64 {
    let mut in_well = vec![false; mesh.num_corner_nodes()];
    for e in (0..mesh.num_elements()).filter(|&e| mesh.subdomain_tag[e] == Subdomain::Injection) {
        for &n in &mesh.elem_conn_q4[e] {
            in_well[n] = true;
        }
    }
    let tables = QuadratureTables::standard();
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let conn = mesh.elem_conn_q4[e];
        if !conn.iter().any(|&n| in_well[n]) {
            continue;
        }
        let corners = mesh.element_corners(e);
        for (qp, (_, w)) in tables.rule.iter().enumerate() {
            let geo = &tables.geometry[qp];
            let (Ok(q4), Ok(q9)) = (map_with(&corners, geo, &tables.q4[qp]), map_with(&corners, geo, &tables.q9[qp])) else {
                continue;
            };
            let weight: f64 = (0..4).filter(|&a| in_well[conn[a]]).map(|a| q4.basis.values[a]).sum();
            total += weight * solution.velocity_at(mesh, e, &q9.basis).1 * w * q9.det_j;
        }
    }
    total
}
