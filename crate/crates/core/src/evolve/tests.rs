use std::sync::Arc;

use super::*;
use crate::field::random_divfree;
use crate::grid::build_radial_grid;
use crate::oper::assemble_dynamo_block;
use crate::spectra::mode_spectrum;
use crate::steady::solve_tc_coefficients;

fn preset() -> TCProfile {
    solve_tc_coefficients(1.0, 2.0, 3.0, 1.0).unwrap()
}

fn grid(nr: usize) -> Arc<RadialGrid> {
    Arc::new(build_radial_grid(1.0, 2.0, nr).unwrap())
}

/// Leading dynamo eigenpair of one mode, as a real field of unit L² norm.
fn leading_field(md: ModeIndex, eps: f64, g: Arc<RadialGrid>, ms: ModeSet) -> (C64, SpectralField) {
    let op = assemble_dynamo_block(md, &preset(), eps, g.clone(), &ms).unwrap();
    let rep = mode_spectrum(&op).unwrap();
    let b = real_mode_field(g, ms, BcTag::ConductingMagnetic, md, rep.leader_vector().unwrap(), 1.0);
    (rep.leader().unwrap(), b)
}

fn growth_error(dt: f64) -> (f64, f64) {
    let ms = ModeSet::new(2, 2);
    let (lam, b0) = leading_field(ModeIndex::new(1, -1), 0.05, grid(24), ms);
    let tr = run_linear(&b0, 0.05, &preset(), 4.0, dt, 1).unwrap();
    let fit = measured_growth_rate(&tr, (0.0, 4.0)).unwrap();
    (fit.slope, lam.re)
}

#[test]
fn linear_run_grows_at_the_leading_rate() {
    let (measured, lam) = growth_error(0.02);
    assert!((measured - lam).abs() <= 1e-4 * (1.0 + lam.abs()), "{measured} vs {lam}");
}

#[test]
fn linear_error_is_second_order_in_dt() {
    let (a, lam) = growth_error(0.2);
    let (b, _) = growth_error(0.1);
    let ratio = (a - lam).abs() / (b - lam).abs();
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_data_stays_zero() {
    let ms = ModeSet::new(2, 2);
    let g = grid(16);
    let z = SpectralField::zeros(g.clone(), ms, BcTag::DirichletVelocity);
    let zb = SpectralField::zeros(g, ms, BcTag::ConductingMagnetic);
    let out = run_nonlinear(
        &z,
        &zb,
        1.0,
        0.1,
        &preset(),
        StepParams::new(0.1),
        RunOptions { t_end: 1.0, sample_every: 2, p: 2.0, escape: None },
    )
    .unwrap();
    assert_eq!(out.stop, StopReason::EndTime);
    assert!(out.trace.samples.iter().all(|s| s.ev == 0.0 && s.eb == 0.0));
}

#[test]
fn non_solenoidal_data_is_rejected() {
    let ms = ModeSet::new(1, 1);
    let g = grid(16);
    let mut b = SpectralField::zeros(g.clone(), ms, BcTag::ConductingMagnetic);
    let md = ModeIndex::new(1, 1);
    let x: Vec<C64> = (0..3 * g.len()).map(|i| C64::new(1.0 + i as f64, 0.0)).collect();
    b.set_mode_vector(md, &x);
    b.enforce_reality();
    assert!(matches!(Integrator::linear_dynamo(&b, 0.1, &preset(), 0.1), Err(Error::Precondition(_))));
}

#[test]
fn closure_of_a_single_mode_is_its_sublattice() {
    let ms = ModeSet::new(16, 16);
    let c = interaction_closure(&[ModeIndex::new(1, -2)], &ms);
    assert_eq!(c.len(), 9);
    assert!(c.iter().all(|m| m.k == -2 * m.m));
    let c = interaction_closure(&[ModeIndex::new(1, 0), ModeIndex::new(0, 1)], &ModeSet::new(2, 2));
    assert_eq!(c.len(), 13);
}

fn small_mhd(amp: f64, dt: f64) -> Integrator {
    let ms = ModeSet::new(2, 2);
    let g = grid(16);
    let v = random_divfree(3, BcTag::DirichletVelocity, g.clone(), ms);
    let b = random_divfree(4, BcTag::ConductingMagnetic, g, ms);
    let v = v.scaled(amp / v.l2_norm());
    let b = b.scaled(amp / b.l2_norm());
    let params = StepParams { budget: true, monitor: true, ..StepParams::new(dt) };
    Integrator::mhd(&v, &b, 0.5, 0.2, &preset(), params).unwrap()
}

#[test]
fn nonlinear_run_keeps_constraints_and_closes_the_budget() {
    let mut it = small_mhd(0.5, 0.01);
    let out = run(&mut it, RunOptions { t_end: 0.5, sample_every: 10, p: 2.0, escape: None }).unwrap();
    assert_eq!(out.stop, StopReason::EndTime);
    assert!(out.trace.is_well_formed());
    for s in &out.trace.samples[1..] {
        assert!(s.div_v < 1e-8 && s.div_b < 1e-8, "{s:?}");
        assert!(s.bc_v < 1e-8 && s.bc_b < 1e-8, "{s:?}");
        assert!(s.budget_closure.unwrap() < 1e-4, "{s:?}");
    }
    assert_eq!(out.monitor.steps, 50);
    let m = out.monitor;
    assert!(m.max_div_v < 1e-9 && m.max_div_b < 1e-9 && m.max_bc_v < 1e-8 && m.max_bc_b < 1e-8, "{m:?}");
    let st = it.state();
    assert!(st.v.reality_defect() < 1e-12 && st.b.reality_defect() < 1e-12);
}

#[test]
fn nonlinear_terms_exchange_but_do_not_create_energy() {
    // Without the background flow and diffusion the quadratic terms alone
    // conserve energy up to the time-stepping error.
    let ms = ModeSet::new(2, 2);
    let g = grid(16);
    let v = random_divfree(5, BcTag::DirichletVelocity, g.clone(), ms).scaled(0.1);
    let b = random_divfree(6, BcTag::ConductingMagnetic, g, ms).scaled(0.1);
    let energy = |it: &Integrator| it.energy();
    let mut it = Integrator::mhd(&v, &b, 1e-12, 1e-12, &preset().scaled(0.0), StepParams::new(0.01)).unwrap();
    let e0 = energy(&it);
    for _ in 0..20 {
        it.step().unwrap();
    }
    let e1 = energy(&it);
    assert!((e1 - e0).abs() <= 1e-4 * e0, "{e0} -> {e1}");
}

#[test]
fn oversized_step_is_refused_with_a_suggestion() {
    let mut it = small_mhd(50.0, 0.5);
    match it.step() {
        Err(Error::StepTooLarge { dt, suggested }) => assert!(suggested < dt),
        other => panic!("{other:?}"),
    }
    assert_eq!(it.steps(), 0);
}

#[test]
fn escape_stops_the_run() {
    let ms = ModeSet::new(2, 2);
    let eps = 0.003;
    let (lam, b0) = leading_field(ModeIndex::new(1, -1), eps, grid(24), ms);
    assert!(lam.re > 0.0, "{lam}");
    let mut it = Integrator::linear_dynamo(&b0.scaled(1e-3), eps, &preset(), 0.1).unwrap();
    let out = run(
        &mut it,
        RunOptions { t_end: 1e4, sample_every: 1, p: 2.0, escape: Some(Escape { chi: 1.05e-3, on: Series::B }) },
    )
    .unwrap();
    assert_eq!(out.stop, StopReason::Escape);
    assert!(out.trace.last().unwrap().eb >= 1.05e-3);
}
