use std::cell::RefCell;
use std::ops::ControlFlow;

use fingering_core::coupling::{InitialCondition, Observer, PicardSettings};
use fingering_core::flow::{ViscosityEval, ViscosityLaw, ViscosityModel};
use fingering_core::{Simulation, SimulationConfig, SimulationState, StabilizationScheme, StepDiagnostics};

fn small(nx: usize) -> SimulationConfig {
    SimulationConfig { nx, ny: nx, dt: 1.0, t_end: 5.0, ..SimulationConfig::default() }
}

#[test]
fn zero_end_time_records_only_the_initial_state() {
    let mut sim = Simulation::new(SimulationConfig { t_end: 0.0, ..small(10) }).unwrap();
    let out = sim.run(&mut ()).unwrap();
    assert_eq!(out.state.step, 0);
    assert_eq!(out.diagnostics.len(), 1);
}

#[test]
fn three_steps_reach_three_dt() {
    let mut sim = Simulation::new(SimulationConfig { dt: 0.5, t_end: 1.5, ..small(10) }).unwrap();
    let out = sim.run(&mut ()).unwrap();
    assert_eq!(out.state.step, 3);
    assert_eq!(out.state.time, 1.5);
    assert_eq!(out.diagnostics.len(), 4);
}

struct Snapshots(Vec<usize>);

impl Observer for Snapshots {
    fn observe(&mut self, state: &SimulationState, _: &StepDiagnostics, snapshot: bool) -> ControlFlow<()> {
        if snapshot {
            self.0.push(state.step);
        }
        ControlFlow::Continue(())
    }
}

#[test]
fn snapshots_follow_the_cadence_and_the_final_step() {
    let mut sim = Simulation::new(SimulationConfig { t_end: 7.0, snapshot_every: 3, ..small(8) }).unwrap();
    let mut obs = Snapshots(Vec::new());
    sim.run(&mut obs).unwrap();
    assert_eq!(obs.0, vec![0, 3, 6, 7]);
}

#[test]
fn constant_viscosity_freezes_the_flow() {
    let config = SimulationConfig { r_c: 0.0, r_theta: 0.0, ..small(10) };
    let mut sim = Simulation::new(config).unwrap();
    let s0 = sim.initialize().unwrap();
    let mut s = s0.clone();
    for _ in 0..3 {
        s = sim.advance_step(&s).unwrap();
        let dv = s.flow.velocity.iter().zip(&s0.flow.velocity).map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
        assert!(dv.fold(0.0, f64::max) < 1e-14);
    }
}

/// Remembers every `(c, θ)` pair the flow assembly asks about.
struct Recording {
    law: ViscosityLaw,
    seen: RefCell<Vec<(f64, f64)>>,
}

impl ViscosityModel for Recording {
    fn evaluate(&self, c: f64, theta: f64) -> ViscosityEval {
        self.seen.borrow_mut().push((c, theta));
        self.law.evaluate(c, theta)
    }
}

#[test]
fn flow_sees_the_previous_time_level() {
    let config = SimulationConfig {
        c0: InitialCondition::Constant(0.25),
        theta0: InitialCondition::Constant(0.75),
        ..small(8)
    };
    let mut sim = Simulation::new(config).unwrap();
    let rec = Recording { law: sim.flow_problem.viscosity, seen: RefCell::new(Vec::new()) };
    let s0 = sim.initialize_with(&rec).unwrap();
    assert!(rec.seen.borrow().iter().all(|&p| p == (0.25, 0.75)));
    rec.seen.borrow_mut().clear();
    let s1 = sim.advance_step_with(&s0, &rec).unwrap();
    assert!(rec.seen.borrow().iter().all(|&p| p == (0.25, 0.75)));
    rec.seen.borrow_mut().clear();
    // the uniform field has started to change near the wells by now
    sim.advance_step_with(&s1, &rec).unwrap();
    let (cmin, cmax) = s1.c.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let seen = rec.seen.borrow();
    assert!(cmax > cmin);
    assert!(seen.iter().all(|&(c, _)| c >= cmin - 1e-12 && c <= cmax + 1e-12));
    assert!(seen.iter().any(|&(c, _)| c != 0.25));
}

#[test]
fn runs_are_deterministic() {
    let config = SimulationConfig { perturbation: 0.3, seed: 42, scheme: StabilizationScheme::SupgBothSold, ..small(10) };
    let a = Simulation::new(config.clone()).unwrap().run(&mut ()).unwrap();
    let b = Simulation::new(config).unwrap().run(&mut ()).unwrap();
    assert_eq!(a.diagnostics, b.diagnostics);
    assert_eq!(a.state, b.state);
}

#[test]
fn unperturbed_run_stays_symmetric_about_the_diagonal() {
    let mut sim = Simulation::new(SimulationConfig { t_end: 10.0, ..small(16) }).unwrap();
    let mut s = sim.initialize().unwrap();
    for _ in 0..10 {
        s = sim.advance_step(&s).unwrap();
        for i in 0..s.c.len() {
            let m = sim.mesh.diagonal_mirror(i);
            assert!((s.c.values[i] - s.c.values[m]).abs() <= 1e-8);
        }
    }
}

#[test]
fn picard_sweeps_converge_to_a_nearby_state() {
    let lagged = Simulation::new(small(10)).unwrap().run(&mut ()).unwrap();
    let config = SimulationConfig { picard: PicardSettings { enabled: true, ..PicardSettings::default() }, ..small(10) };
    let coupled = Simulation::new(config).unwrap().run(&mut ()).unwrap();
    let diff = lagged.state.c.values.iter().zip(&coupled.state.c.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 0.05, "{diff}");
    assert!(coupled.diagnostics.last().unwrap().balance_residual < 1e-8);
}

#[test]
fn halving_dt_behaves_first_order() {
    // Richardson estimate: with backward Euler the differences between
    // successive halvings should shrink by about two.
    let run = |dt: f64| {
        let config = SimulationConfig { dt, t_end: 4.0, ..small(8) };
        Simulation::new(config).unwrap().run(&mut ()).unwrap().state.c.values
    };
    let (a, b, c) = (run(1.0), run(0.5), run(0.25));
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let ratio = d(&a, &b) / d(&b, &c);
    assert!(ratio > 1.6 && ratio < 2.6, "{ratio}");
}
