//! Staggered time loop coupling the flow solve to the two scalar fields.
//!
//! Each step solves the flow with the viscosity of the current `(c, θ)`,
//! advances the concentration with the configured scheme, then advances the
//! temperature with SUPG, both with the new velocity. With Picard iteration
//! enabled the three solves repeat, feeding the flow the latest iterates,
//! until the fields stop changing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{self, BoundsReport, DiagnosticsSeries, StepDiagnostics, DEFAULT_VIOLATION_TOL, FRONT_LEVEL};
use crate::error::{Error, Result};
use crate::flow::{FlowProblem, FlowSolution, FlowSolver, ViscosityLaw, ViscosityModel};
use crate::mesh::{build_structured_mesh, StructuredQuadMesh};
use crate::transport::{
    ScalarField, SoldIteration, StabilizationScheme, TransportProblem, TransportSolver, DEFAULT_GRAD_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// Nodal values on the Q4 node set.
    Field(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub enabled: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self { enabled: false, max_iterations: 10, tolerance: 1e-6 }
    }
}

/// Every knob of a quarter five-spot run. Defaults reproduce the benchmark
/// table; `permeability`, `kappa_theta`, `dt` and the initial fields are not
/// part of it and carry their own documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub well_size: f64,

    pub permeability: f64,
    pub mu0: f64,
    pub r_c: f64,
    pub r_theta: f64,
    /// Amplitude δ of the seeded permeability perturbation `k (1 + δ r)`.
    pub perturbation: f64,
    pub seed: u64,

    pub d_m: f64,
    pub kappa_theta: f64,
    pub phi_injection: f64,
    pub phi_production: f64,
    pub grad_threshold: f64,

    pub scheme: StabilizationScheme,
    pub sold_iteration: SoldIteration,

    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub picard: PicardSettings,

    pub c0: InitialCondition,
    pub theta0: InitialCondition,

    pub violation_tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            nx: 100,
            ny: 100,
            length: 1.0,
            well_size: 0.1,
            permeability: 1.0,
            mu0: 1.0,
            r_c: 2.0,
            r_theta: 2.0,
            perturbation: 0.0,
            seed: 0,
            d_m: 1e-7,
            kappa_theta: 1e-5,
            phi_injection: 0.1,
            phi_production: 0.1,
            grad_threshold: DEFAULT_GRAD_THRESHOLD,
            scheme: StabilizationScheme::Supg,
            sold_iteration: SoldIteration::default(),
            dt: 0.5,
            t_end: 250.0,
            snapshot_every: 50,
            picard: PicardSettings::default(),
            c0: InitialCondition::Constant(0.0),
            theta0: InitialCondition::Constant(0.0),
            violation_tol: DEFAULT_VIOLATION_TOL,
        }
    }
}

impl SimulationConfig {
    /// Checks every constraint and reports all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let mut check = |ok: bool, key: &str, msg: String| {
            if !ok {
                bad.push(format!("{key}: {msg}"));
            }
        };
        check(self.nx >= 2, "nx", format!("must be at least 2, got {}", self.nx));
        check(self.ny >= 2, "ny", format!("must be at least 2, got {}", self.ny));
        check(self.length > 0.0 && self.length.is_finite(), "length", format!("must be positive, got {}", self.length));
        check(
            self.well_size > 0.0 && self.well_size < 0.5 * self.length,
            "well_size",
            format!("must lie in (0, length/2), got {}", self.well_size),
        );
        check(self.permeability > 0.0, "permeability", format!("must be positive, got {}", self.permeability));
        check(self.mu0 > 0.0, "mu0", format!("must be positive, got {}", self.mu0));
        check(self.r_c.is_finite(), "r_c", format!("must be finite, got {}", self.r_c));
        check(self.r_theta.is_finite(), "r_theta", format!("must be finite, got {}", self.r_theta));
        check(
            (0.0..1.0).contains(&self.perturbation),
            "perturbation",
            format!("must lie in [0, 1), got {}", self.perturbation),
        );
        check(self.d_m > 0.0, "d_m", format!("must be positive, got {}", self.d_m));
        check(self.kappa_theta > 0.0, "kappa_theta", format!("must be positive, got {}", self.kappa_theta));
        check(self.phi_injection >= 0.0, "phi_injection", format!("must be non-negative, got {}", self.phi_injection));
        check(self.phi_production >= 0.0, "phi_production", format!("must be non-negative, got {}", self.phi_production));
        check(self.grad_threshold >= 0.0, "grad_threshold", format!("must be non-negative, got {}", self.grad_threshold));
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", format!("must be positive, got {}", self.dt));
        check(self.t_end >= 0.0 && self.t_end.is_finite(), "t_end", format!("must be non-negative, got {}", self.t_end));
        check(self.snapshot_every >= 1, "snapshot_every", format!("must be at least 1, got {}", self.snapshot_every));
        check(
            self.picard.max_iterations >= 1,
            "picard_max_iterations",
            format!("must be at least 1, got {}", self.picard.max_iterations),
        );
        check(self.picard.tolerance > 0.0, "picard_tolerance", format!("must be positive, got {}", self.picard.tolerance));
        check(
            self.sold_iteration.max_iterations >= 1,
            "sold_max_iterations",
            format!("must be at least 1, got {}", self.sold_iteration.max_iterations),
        );
        check(
            self.sold_iteration.tolerance > 0.0,
            "sold_tolerance",
            format!("must be positive, got {}", self.sold_iteration.tolerance),
        );
        check(self.violation_tol >= 0.0, "violation_tol", format!("must be non-negative, got {}", self.violation_tol));
        let nodes = (self.nx + 1) * (self.ny + 1);
        for (key, ic) in [("c0", &self.c0), ("theta0", &self.theta0)] {
            match ic {
                InitialCondition::Constant(v) => check(v.is_finite(), key, format!("must be finite, got {v}")),
                InitialCondition::Field(f) => check(
                    f.len() == nodes && f.iter().all(|v| v.is_finite()),
                    key,
                    format!("needs {nodes} finite nodal values, got {}", f.len()),
                ),
            }
        }
        // Only the fraction of the well area matters for compatibility.
        check(
            (self.phi_injection - self.phi_production).abs() <= 1e-12 * self.phi_injection.max(1.0),
            "phi_production",
            format!("sealed box needs phi_production = phi_injection ({}), got {}", self.phi_injection, self.phi_production),
        );
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn viscosity_law(&self) -> ViscosityLaw {
        ViscosityLaw { mu0: self.mu0, r_c: self.r_c, r_theta: self.r_theta }
    }

    /// Number of steps taken to reach `t_end`.
    pub fn num_steps(&self) -> usize {
        if self.t_end <= 0.0 {
            return 0;
        }
        libm::ceil(self.t_end / self.dt - 1e-9) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub step: usize,
    pub time: f64,
    pub c: ScalarField,
    pub theta: ScalarField,
    pub flow: FlowSolution,
}

/// Receives every state produced by [`Simulation::run`].
pub trait Observer {
    /// `snapshot` marks the states on the configured output cadence.
    /// Returning `Break` stops the run after this state.
    fn observe(&mut self, state: &SimulationState, diagnostics: &StepDiagnostics, snapshot: bool) -> ControlFlow<()>;
}

impl Observer for () {
    fn observe(&mut self, _: &SimulationState, _: &StepDiagnostics, _: bool) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: SimulationState,
    pub diagnostics: DiagnosticsSeries,
    pub stopped_early: bool,
}

/// A configured quarter five-spot run: mesh, problem data and cached
/// solver state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimulationConfig,
    pub mesh: StructuredQuadMesh,
    pub flow_problem: FlowProblem,
    pub concentration: TransportProblem,
    pub temperature: TransportProblem,
    flow_solver: FlowSolver,
    c_solver: TransportSolver,
    theta_solver: TransportSolver,
}

fn initial_field(mesh: &StructuredQuadMesh, ic: &InitialCondition) -> ScalarField {
    match ic {
        InitialCondition::Constant(v) => ScalarField::constant(mesh, *v, 0.0),
        InitialCondition::Field(values) => ScalarField { values: values.clone(), time: 0.0 },
    }
}

/// Seeded per-element permeability factors `1 + δ r`, `r ~ U[-1, 1]`.
pub fn permeability_perturbation(num_elements: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_elements).map(|_| 1.0 + amplitude * rng.random_range(-1.0..=1.0)).collect()
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let mesh = build_structured_mesh(config.nx, config.ny, config.length, config.well_size)?;
        let mut flow_problem =
            FlowProblem::quarter_five_spot(&mesh, config.permeability, config.viscosity_law(), config.phi_injection, config.phi_production);
        if config.perturbation > 0.0 {
            flow_problem.permeability_factor =
                Some(permeability_perturbation(mesh.num_elements(), config.perturbation, config.seed));
        }
        let make = |d: f64, ic: &InitialCondition, scheme| {
            let mut p = TransportProblem::well_driven(
                &mesh,
                d,
                config.phi_injection,
                config.phi_production,
                initial_field(&mesh, ic),
                scheme,
            );
            p.grad_threshold = config.grad_threshold;
            p.sold_iteration = config.sold_iteration;
            p
        };
        let concentration = make(config.d_m, &config.c0, config.scheme);
        // The thermal field always uses plain SUPG.
        let temperature = make(config.kappa_theta, &config.theta0, StabilizationScheme::Supg);
        let flow_solver = FlowSolver::new(&mesh)?;
        let c_solver = TransportSolver::new(&mesh)?;
        let theta_solver = c_solver.clone();
        Ok(Self { config, mesh, flow_problem, concentration, temperature, flow_solver, c_solver, theta_solver })
    }

    pub fn initialize(&mut self) -> Result<SimulationState> {
        let law = self.flow_problem.viscosity;
        self.initialize_with(&law)
    }

    pub fn initialize_with(&mut self, viscosity: &dyn ViscosityModel) -> Result<SimulationState> {
        let c = self.concentration.initial.clone();
        let theta = self.temperature.initial.clone();
        let flow = self.flow_solver.solve(&self.mesh, &self.flow_problem, &c.values, &theta.values, viscosity)?;
        Ok(SimulationState { step: 0, time: 0.0, c, theta, flow })
    }

    pub fn advance_step(&mut self, state: &SimulationState) -> Result<SimulationState> {
        let law = self.flow_problem.viscosity;
        self.advance_step_with(state, &law)
    }

    /// One staggered step with an explicit viscosity model.
    pub fn advance_step_with(&mut self, state: &SimulationState, viscosity: &dyn ViscosityModel) -> Result<SimulationState> {
        let dt = self.config.dt;
        let step = state.step + 1;
        let time = step as f64 * dt;
        let sweeps = if self.config.picard.enabled { self.config.picard.max_iterations } else { 1 };

        let mut c_iter = state.c.clone();
        let mut theta_iter = state.theta.clone();
        let mut flow = state.flow.clone();
        for sweep in 0..sweeps {
            flow = self.flow_solver.solve(&self.mesh, &self.flow_problem, &c_iter.values, &theta_iter.values, viscosity)?;
            let c_new = self.c_solver.advance(&self.mesh, &self.concentration, &flow, &state.c, dt).map_err(|e| tag(e, "c", step))?;
            let theta_new =
                self.theta_solver.advance(&self.mesh, &self.temperature, &flow, &state.theta, dt).map_err(|e| tag(e, "theta", step))?;
            let change = relative_change(&c_new.values, &c_iter.values).max(relative_change(&theta_new.values, &theta_iter.values));
            c_iter = c_new;
            theta_iter = theta_new;
            if sweep > 0 && change < self.config.picard.tolerance {
                break;
            }
        }
        c_iter.time = time;
        theta_iter.time = time;
        for (name, f) in [("c", &c_iter), ("theta", &theta_iter)] {
            if let Some(node) = f.first_non_finite() {
                return Err(Error::NonFinite { field: name, node, step });
            }
        }
        Ok(SimulationState { step, time, c: c_iter, theta: theta_iter, flow })
    }

    pub fn diagnose(&self, state: &SimulationState, previous: Option<&SimulationState>) -> StepDiagnostics {
        let tol = self.config.violation_tol;
        let mut concentration = diagnostics::bounds_report(&self.mesh, "c", &state.c, 0.0, 1.0, tol);
        concentration.clamp_events = state.flow.clamp_events;
        let mut temperature: BoundsReport = diagnostics::bounds_report(&self.mesh, "theta", &state.theta, 0.0, 1.0, tol);
        temperature.clamp_events = state.flow.clamp_events;
        let balance = previous.map_or(0.0, |prev| {
            let rc = diagnostics::balance_residual(&self.mesh, &state.c, &prev.c, &self.concentration, self.config.dt);
            let rt = diagnostics::balance_residual(&self.mesh, &state.theta, &prev.theta, &self.temperature, self.config.dt);
            rc.max(rt)
        });
        StepDiagnostics {
            step: state.step,
            time: state.time,
            concentration,
            temperature,
            interface_length: diagnostics::interface_length(&self.mesh, &state.c, FRONT_LEVEL),
            balance_residual: balance,
        }
    }

    /// Steps from the initial state to `t_end`, handing every state to the
    /// observer.
    pub fn run(&mut self, observer: &mut dyn Observer) -> Result<RunOutcome> {
        let n_steps = self.config.num_steps();
        let every = self.config.snapshot_every;
        let mut state = self.initialize()?;
        let mut series = DiagnosticsSeries::default();
        let d0 = self.diagnose(&state, None);
        let mut stopped_early = observer.observe(&state, &d0, true).is_break();
        series.push(d0);
        while !stopped_early && state.step < n_steps {
            let next = self.advance_step(&state)?;
            let d = self.diagnose(&next, Some(&state));
            let snapshot = next.step % every == 0 || next.step == n_steps;
            stopped_early = observer.observe(&next, &d, snapshot).is_break();
            series.push(d);
            state = next;
        }
        Ok(RunOutcome { state, diagnostics: series, stopped_early })
    }
}

fn tag(err: Error, field: &'static str, step: usize) -> Error {
    match err {
        Error::NonFinite { node, .. } => Error::NonFinite { field, node, step },
        other => other,
    }
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new.iter().zip(old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = new.iter().map(|a| a.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Builds the simulation and runs it to completion.
pub fn run(config: SimulationConfig, observer: &mut dyn Observer) -> Result<RunOutcome> {
    Simulation::new(config)?.run(observer)
}

/// Builds the simulation and returns its initial state.
pub fn initialize(config: SimulationConfig) -> Result<SimulationState> {
    Simulation::new(config)?.initialize()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimulationConfig {
        SimulationConfig { nx: 10, ny: 10, dt: 1.0, t_end: 3.0, ..SimulationConfig::default() }
    }

    #[test]
    fn defaults_validate() {
        SimulationConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_lists_keys() {
        let cfg = SimulationConfig { dt: 0.0, d_m: -1.0, ..SimulationConfig::default() };
        match cfg.validate() {
            Err(Error::Validation(keys)) => {
                assert!(keys.iter().any(|k| k.starts_with("dt")));
                assert!(keys.iter().any(|k| k.starts_with("d_m")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_counts() {
        assert_eq!(SimulationConfig { t_end: 0.0, ..small() }.num_steps(), 0);
        assert_eq!(small().num_steps(), 3);
        assert_eq!(SimulationConfig { dt: 0.1, t_end: 0.3, ..small() }.num_steps(), 3);
        assert_eq!(SimulationConfig::default().num_steps(), 500);
    }

    #[test]
    fn initial_state_defaults() {
        let state = initialize(small()).unwrap();
        assert_eq!((state.step, state.time), (0, 0.0));
        assert!(state.c.values.iter().all(|&v| v == 0.0));
        assert!(state.theta.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let out = run(SimulationConfig { t_end: 0.0, ..small() }, &mut ()).unwrap();
        assert_eq!(out.state.step, 0);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn three_steps() {
        let out = run(small(), &mut ()).unwrap();
        assert_eq!(out.state.step, 3);
        assert_eq!(out.state.time, 3.0);
        assert_eq!(out.diagnostics.len(), 4);
    }

    #[test]
    fn perturbation_is_seeded() {
        let a = permeability_perturbation(50, 0.1, 7);
        let b = permeability_perturbation(50, 0.1, 7);
        let c = permeability_perturbation(50, 0.1, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&f| (0.9..=1.1).contains(&f)));
    }
}
