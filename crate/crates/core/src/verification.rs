//! Built-in verification runs: a constant-flow patch test for the Darcy
//! discretization and manufactured-solution convergence studies for the
//! transport step.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::Result;
use crate::fem::{map_with, QuadratureTables};
use crate::flow::{EdgeCondition, FlowProblem, FlowSolution, FlowSolver, ViscosityLaw};
use crate::mesh::{build_structured_mesh, StructuredQuadMesh};
use crate::transport::{
    ScalarField, SoldIteration, SourceField, StabilizationScheme, TransportProblem, TransportSolver, DEFAULT_GRAD_THRESHOLD,
};

pub const PATCH_TOLERANCE: f64 = 1e-10;
pub const SPATIAL_ORDER_MIN: f64 = 1.9;
pub const TEMPORAL_ORDER_MIN: f64 = 0.9;

/// Constant advection velocity of the manufactured problem.
pub const MMS_VELOCITY: [f64; 2] = [1.0, 0.5];
pub const MMS_DIFFUSIVITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchReport {
    pub velocity_error: f64,
    pub pressure_error: f64,
}

impl PatchReport {
    pub fn passed(&self) -> bool {
        self.velocity_error <= PATCH_TOLERANCE && self.pressure_error <= PATCH_TOLERANCE
    }
}

/// Unit square with `p₀ = 1 − x` on every edge, `μ = k = 1` and no source,
/// so the exact solution `v = (1, 0)`, `p = 1 − x` lies in the discrete space.
pub fn flow_patch_test(n: usize) -> Result<PatchReport> {
    let mesh = build_structured_mesh(n, n, 1.0, 0.25)?;
    let law = ViscosityLaw { mu0: 1.0, r_c: 0.0, r_theta: 0.0 };
    let mut problem = FlowProblem::quarter_five_spot(&mesh, 1.0, law, 0.0, 0.0);
    let p0: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync> = Arc::new(|x: [f64; 2]| 1.0 - x[0]);
    problem.boundary = mesh.boundary_edges.iter().map(|_| EdgeCondition::Pressure(p0.clone())).collect();
    let zeros = alloc::vec![0.0; mesh.num_corner_nodes()];
    let sol = FlowSolver::new(&mesh)?.solve(&mesh, &problem, &zeros, &zeros, &law)?;
    let velocity_error = sol.velocity.iter().map(|v| (v[0] - 1.0).abs().max(v[1].abs())).fold(0.0, f64::max);
    let pressure_error =
        sol.pressure.iter().zip(&mesh.corner_nodes).map(|(p, x)| (p - (1.0 - x[0])).abs()).fold(0.0, f64::max);
    Ok(PatchReport { velocity_error, pressure_error })
}

/// `c = e^{−t} sin(πx) sin(πy)`.
pub fn mms_exact(x: [f64; 2], t: f64) -> f64 {
    libm::exp(-t) * libm::sin(PI * x[0]) * libm::sin(PI * x[1])
}

fn mms_source(x: [f64; 2], t: f64) -> f64 {
    let (sx, cx) = (libm::sin(PI * x[0]), libm::cos(PI * x[0]));
    let (sy, cy) = (libm::sin(PI * x[1]), libm::cos(PI * x[1]));
    let e = libm::exp(-t);
    let [vx, vy] = MMS_VELOCITY;
    -e * sx * sy + e * PI * (vx * cx * sy + vy * sx * cy) + 2.0 * MMS_DIFFUSIVITY * PI * PI * e * sx * sy
}

/// Manufactured transport problem on an `n × n` unit square with
/// homogeneous Dirichlet data.
pub fn mms_problem(mesh: &StructuredQuadMesh, scheme: StabilizationScheme) -> (TransportProblem, FlowSolution) {
    let dirichlet = mesh.boundary_corner_nodes().into_iter().map(|n| (n, 0.0)).collect();
    let problem = TransportProblem {
        diffusivity: MMS_DIFFUSIVITY,
        source: SourceField::Function(Arc::new(mms_source)),
        sink: alloc::vec![0.0; mesh.num_elements()],
        dirichlet,
        neumann: Vec::new(),
        initial: ScalarField::from_fn(mesh, 0.0, |x| mms_exact(x, 0.0)),
        scheme,
        grad_threshold: DEFAULT_GRAD_THRESHOLD,
        sold_iteration: SoldIteration::default(),
    };
    let mut flow = FlowSolution::zeros(mesh);
    flow.velocity.iter_mut().for_each(|v| *v = MMS_VELOCITY);
    (problem, flow)
}

/// L2 norm of `u_h − c(·, t)` with 3×3 Gauss quadrature.
pub fn l2_error(mesh: &StructuredQuadMesh, u: &ScalarField, exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let tables = QuadratureTables::standard();
    let mut sum = 0.0;
    for e in 0..mesh.num_elements() {
        let corners = mesh.element_corners(e);
        let conn = mesh.elem_conn_q4[e];
        for (qp, (_, w)) in tables.rule.iter().enumerate() {
            let Ok(m) = map_with(&corners, &tables.geometry[qp], &tables.q4[qp]) else { continue };
            let (uh, _) = m.basis.interpolate(|a| u.values[conn[a]]);
            let d = uh - exact(m.x);
            sum += d * d * w * m.det_j;
        }
    }
    libm::sqrt(sum)
}

/// Runs the manufactured problem on an `n × n` mesh to `t_end` and returns
/// the final L2 error.
pub fn mms_error(n: usize, dt: f64, t_end: f64, scheme: StabilizationScheme) -> Result<f64> {
    let mesh = build_structured_mesh(n, n, 1.0, 0.25)?;
    let (problem, flow) = mms_problem(&mesh, scheme);
    let mut solver = TransportSolver::new(&mesh)?;
    let steps = libm::round(t_end / dt) as usize;
    let mut u = problem.initial.clone();
    for _ in 0..steps {
        u = solver.advance(&mesh, &problem, &flow, &u, dt)?;
    }
    let t = steps as f64 * dt;
    Ok(l2_error(&mesh, &u, |x| mms_exact(x, t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Mesh size or time step of each run, coarse to fine.
    pub sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Observed order between consecutive runs.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    fn from_runs(sizes: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = sizes
            .windows(2)
            .zip(errors.windows(2))
            .map(|(h, e)| libm::log(e[0] / e[1]) / libm::log(h[0] / h[1]))
            .collect();
        Self { sizes, errors, orders }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub const MMS_T_END: f64 = 0.25;

/// Spatial refinement with `Δt = h²`, so the first-order time error shrinks
/// at the same rate as the expected second-order spatial error.
pub fn spatial_convergence(meshes: &[usize], scheme: StabilizationScheme) -> Result<ConvergenceReport> {
    let mut sizes = Vec::new();
    let mut errors = Vec::new();
    for &n in meshes {
        let h = 1.0 / n as f64;
        sizes.push(h);
        errors.push(mms_error(n, h * h, MMS_T_END, scheme)?);
    }
    Ok(ConvergenceReport::from_runs(sizes, errors))
}

/// Time-step halving on a fixed mesh fine enough that the spatial error is
/// negligible.
pub fn temporal_convergence(n: usize, steps: &[f64], scheme: StabilizationScheme) -> Result<ConvergenceReport> {
    let mut errors = Vec::new();
    for &dt in steps {
        errors.push(mms_error(n, dt, MMS_T_END, scheme)?);
    }
    Ok(ConvergenceReport::from_runs(steps.to_vec(), errors))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub patch: PatchReport,
    pub spatial: ConvergenceReport,
    pub temporal: ConvergenceReport,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.patch.passed() && self.spatial.min_order() >= SPATIAL_ORDER_MIN && self.temporal.min_order() >= TEMPORAL_ORDER_MIN
    }
}

/// The standard verification suite: patch test on 8×8 and SUPG convergence
/// on 16/32/64 meshes and three halvings of the time step.
pub fn run_verification() -> Result<VerificationReport> {
    Ok(VerificationReport {
        patch: flow_patch_test(8)?,
        spatial: spatial_convergence(&[16, 32, 64], StabilizationScheme::Supg)?,
        temporal: temporal_convergence(64, &[0.05, 0.025, 0.0125], StabilizationScheme::Supg)?,
    })
}
