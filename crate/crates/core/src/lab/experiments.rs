//! The experiments behind the command-line subcommands.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::evolve::{
    detect_crossing, measured_growth_rate, measured_growth_rate_of, real_mode_field, run, run_linear, EnergyTrace,
    Escape, Integrator, RunOptions, RunOutcome, Series, StepParams, StopReason,
};
use crate::field::{random_divfree, BcTag, SpectralField};
use crate::fit::linear_fit;
use crate::linalg;
use crate::oper::{assemble_kz, OperatorKind};
use crate::physical::sobolev_norm;
use crate::spectra::{
    epsilon_scaling_sweep, log_times, mode_spectrum, rightmost_eigen, smoothing_study, Block, Calculus, DIV_TOL,
    DRIFT_TOL, RESIDUAL_TOL,
};
use crate::steady::{ns_residual, ns_residual_collocated, ns_residual_with, PressureForm};

use super::cache::{EigenCache, Leader};
use super::config::{Initial, Resolved, SimConfig};
use super::report::{num, Report};

/// Subcommand names, in documentation order.
pub const COMMANDS: [&str; 8] = [
    "steady-check",
    "spectrum",
    "scaling",
    "semigroup-check",
    "evolve-linear",
    "evolve-nonlinear",
    "instability-sweep",
    "energy-transfer",
];

/// Divergence bound after every accepted step, relative to the field.
pub const DIV_STEP_TOL: f64 = 1e-9;
/// Boundary residual bound relative to the field scale.
pub const BC_TOL: f64 = 1e-8;
/// Energy budget closure per sample interval.
pub const BUDGET_TOL: f64 = 0.05;
/// Amplitude, relative to `χ`, at which the nonlinear step must still pass
/// the Courant check.
pub const ESCAPE_MARGIN: f64 = 1.25;
const MAX_RESTARTS: usize = 4;

/// Rounds down to two significant digits.
fn round_down(x: f64) -> f64 {
    let p = 10f64.powi(x.log10().floor() as i32 - 1);
    (x / p).floor() * p
}

/// Configuration, derived quantities and the eigenpair cache.
pub struct Lab {
    pub cfg: SimConfig,
    pub res: Resolved,
    cache: Arc<EigenCache>,
}

impl Lab {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        let cache =
            if cfg.output.cache { EigenCache::on_disk(cfg.output.dir.join("cache")) } else { EigenCache::in_memory() };
        Self::with_cache(cfg, Arc::new(cache))
    }

    pub fn with_cache(cfg: SimConfig, cache: Arc<EigenCache>) -> Result<Self> {
        cfg.validate()?;
        let res = cfg.resolve()?;
        Ok(Self { cfg, res, cache })
    }

    /// Leading dynamo pair at the configured `ε`.
    pub fn leader(&self) -> Result<Arc<Leader>> {
        let r = &self.res;
        self.cache.leader(&r.profile, r.eps, r.grid.clone(), &r.modes, self.cfg.fixed_mode())
    }

    /// Real field of the leading mode with unit L² norm.
    pub fn leader_field(&self, l: &Leader) -> SpectralField {
        real_mode_field(self.res.grid.clone(), self.res.modes, BcTag::ConductingMagnetic, l.mode, &l.vector, 1.0)
    }

    fn growing(&self, l: &Leader) -> Result<f64> {
        if l.lambda.re > 0.0 {
            Ok(l.lambda.re)
        } else {
            Err(Error::Precondition(format!(
                "no growing dynamo mode at eps = {}: leader {} on {}",
                self.res.eps, l.lambda, l.mode
            )))
        }
    }

    /// Initial perturbation of size `delta`.
    pub fn initial_state(&self, l: &Leader, delta: f64) -> (SpectralField, SpectralField) {
        let r = &self.res;
        match self.cfg.experiment.initial {
            Initial::Leader => (
                SpectralField::zeros(r.grid.clone(), r.modes, BcTag::DirichletVelocity),
                self.leader_field(l).scaled(delta),
            ),
            Initial::Random => {
                let seed = self.cfg.experiment.seed;
                let v = random_divfree(seed, BcTag::DirichletVelocity, r.grid.clone(), r.modes);
                let b = random_divfree(seed.wrapping_add(1), BcTag::ConductingMagnetic, r.grid.clone(), r.modes);
                let (nv, nb) = (v.l2_norm(), b.l2_norm());
                (v.scaled(delta / nv), b.scaled(delta / nb))
            }
        }
    }

    /// Configured horizon, or `1.5·log(χ/δ)/Re λ`.
    fn horizon(&self, delta: f64, rate: f64) -> f64 {
        self.cfg.integrator.t_end.unwrap_or_else(|| {
            if delta > 0.0 {
                1.5 * (self.res.chi / delta).ln().max(1.0) / rate
            } else {
                10.0 * self.cfg.integrator.dt
            }
        })
    }

    fn step_params(&self, dt: f64) -> StepParams {
        StepParams { budget: true, monitor: true, cfl: self.cfg.integrator.cfl, ..StepParams::new(dt) }
    }

    /// Fixed step for nonlinear runs: the configured `dt`, reduced if the
    /// leader at amplitude `ESCAPE_MARGIN·χ` would violate the Courant bound.
    pub fn nonlinear_dt(&self, l: &Leader) -> Result<f64> {
        let r = &self.res;
        let dt = self.cfg.integrator.dt;
        let v = SpectralField::zeros(r.grid.clone(), r.modes, BcTag::DirichletVelocity);
        let b = self.leader_field(l).scaled(ESCAPE_MARGIN * r.chi);
        let it = Integrator::mhd(&v, &b, r.nu, r.eps, &r.profile, self.step_params(dt))?;
        let c = it.courant_number();
        Ok(if c <= self.cfg.integrator.cfl { dt } else { round_down(dt * self.cfg.integrator.cfl / c) })
    }

    /// Nonlinear run from `(v0, b0)` stopping at `escape`. A step refused by
    /// the Courant check restarts the run with a smaller fixed step.
    pub fn nonlinear_run(
        &self,
        v0: &SpectralField,
        b0: &SpectralField,
        dt: f64,
        t_end: f64,
        escape: Option<Escape>,
    ) -> Result<(RunOutcome, Integrator)> {
        let r = &self.res;
        let mut dt = dt;
        for _ in 0..MAX_RESTARTS {
            let mut it = Integrator::mhd(v0, b0, r.nu, r.eps, &r.profile, self.step_params(dt))?;
            let opts =
                RunOptions { t_end, sample_every: self.cfg.integrator.sample_every, p: self.cfg.experiment.p, escape };
            match run(&mut it, opts) {
                Ok(out) => return Ok((out, it)),
                Err(Error::StepTooLarge { suggested, .. }) => dt = round_down(0.9 * suggested),
                Err(e) => return Err(e),
            }
        }
        Err(Error::Precondition(format!("Courant bound still violated after {MAX_RESTARTS} restarts (dt = {dt})")))
    }

    pub fn run(&self, command: &str) -> Result<Report> {
        match command {
            "steady-check" => steady_check(self),
            "spectrum" => spectrum(self),
            "scaling" => scaling(self),
            "semigroup-check" => semigroup_check(self),
            "evolve-linear" => evolve_linear(self),
            "evolve-nonlinear" => evolve_nonlinear(self),
            "instability-sweep" => instability_sweep(self),
            "energy-transfer" => energy_transfer_experiment(self),
            other => Err(Error::InvalidArgument(format!("unknown command `{other}`"))),
        }
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Largest budget mismatch over the samples of a trace.
fn worst_budget(trace: &EnergyTrace) -> f64 {
    trace.samples.iter().filter_map(|s| s.budget_closure).fold(0.0, f64::max)
}

fn constraint_checks(rep: &mut Report, label: &str, out: &RunOutcome) {
    let m = out.monitor;
    rep.check(
        &format!("{label}: divergence after every step"),
        m.max_div_v <= DIV_STEP_TOL && m.max_div_b <= DIV_STEP_TOL,
        format!("max |div v|/|v| = {:.2e}, max |div B|/|B| = {:.2e} over {} steps", m.max_div_v, m.max_div_b, m.steps),
    );
    rep.check(
        &format!("{label}: boundary conditions after every step"),
        m.max_bc_v <= BC_TOL && m.max_bc_b <= BC_TOL,
        format!("max residual v {:.2e}, B {:.2e}", m.max_bc_v, m.max_bc_b),
    );
    let b = worst_budget(&out.trace);
    rep.check(
        &format!("{label}: energy budget closure"),
        b <= BUDGET_TOL && out.trace.samples.iter().skip(1).all(|s| s.budget_closure.is_some()),
        format!("worst interval mismatch {b:.2e} (bound {BUDGET_TOL})"),
    );
}

/// Residual of the steady state at several resolutions and viscosities,
/// with the pressure expansion that drops the cross term as a control.
pub fn steady_check(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("steady-check");
    let g = &lab.cfg.geometry;
    let mut nrs = vec![8, 32, 96];
    if !nrs.contains(&lab.cfg.resolution.nr) {
        nrs.push(lab.cfg.resolution.nr);
    }
    let mut rows = Vec::new();
    let (mut worst, mut weakest_control) = (0.0f64, f64::INFINITY);
    for &nr in &nrs {
        let grid = Arc::new(crate::grid::build_radial_grid(g.r1, g.r2, nr)?);
        for nu in [0.1, 1.0, 100.0] {
            let r = ns_residual(&lab.res.profile, nu, &grid)?;
            let c = ns_residual_collocated(&lab.res.profile, nu, grid.clone())?;
            let bad = ns_residual_with(&lab.res.profile, nu, &grid, PressureForm::WithoutCrossTerm)?;
            worst = worst.max(r);
            weakest_control = weakest_control.min(bad);
            rows.push(vec![nr.to_string(), num(nu), num(r), num(c), num(bad)]);
        }
    }
    rep.csv("steady.csv", &["nr", "nu", "residual", "residual_collocated", "residual_without_cross_term"], &rows);
    let bc = lab.res.profile.bc_residuals().iter().copied().fold(0.0, f64::max);
    rep.check("steady residual", worst <= 1e-10, format!("max {worst:.2e} (bound 1e-10)"));
    rep.check(
        "pressure without the cross term is rejected",
        weakest_control > 1e-2,
        format!("min residual {weakest_control:.2e} (must exceed 1e-2)"),
    );
    rep.check("wall data", bc <= 1e-12, format!("max wall mismatch {bc:.2e}"));
    rep.summary("profile", lab.res.profile);
    rep.timing("total", secs(t0));
    Ok(rep)
}

/// Leading dynamo eigenpair and the retained spectrum of its mode.
pub fn spectrum(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("spectrum");
    let r = &lab.res;
    let l = lab.leader()?;
    rep.timing("scan", secs(t0));
    let op =
        assemble_kz(OperatorKind::Dynamo { eps: r.eps }, l.mode, r.modes.kz(l.mode.k), &r.profile, r.grid.clone())?;
    let spec = mode_spectrum(&op)?;
    let rows: Vec<Vec<String>> = spec
        .rows()
        .iter()
        .map(|s| {
            vec![
                s.m.to_string(),
                s.k.to_string(),
                num(s.re),
                num(s.im),
                num(s.residual),
                num(s.div_score),
                num(s.drift),
            ]
        })
        .collect();
    rep.csv("spectrum.csv", &["m", "k", "re", "im", "residual", "div_score", "drift"], &rows);
    let lam = l.lambda;
    rep.csv(
        "leader.csv",
        &["m", "k", "re", "im", "residual", "div_score", "drift", "retained"],
        &[vec![
            l.mode.m.to_string(),
            l.mode.k.to_string(),
            num(lam.re),
            num(lam.im),
            num(l.residual),
            num(l.div_score),
            num(l.drift),
            l.retained.to_string(),
        ]],
    );
    let scale = 1.0 + lam.norm();
    rep.check("growing leader", lam.re > 0.0, format!("lambda = {lam} on mode {}", l.mode));
    rep.check("leader residual", l.residual <= RESIDUAL_TOL, format!("{:.2e} (bound {RESIDUAL_TOL:.0e})", l.residual));
    rep.check("leader divergence", l.div_score <= DIV_TOL, format!("{:.2e} (bound {DIV_TOL:.0e})", l.div_score));
    rep.check(
        "leader resolution drift",
        l.drift <= DRIFT_TOL * scale,
        format!("|lambda(Nr) - lambda(2Nr)| = {:.2e} (bound {:.2e})", l.drift, DRIFT_TOL * scale),
    );
    rep.summary("mode", l.mode);
    rep.summary("lambda", lam);
    rep.timing("total", secs(t0));
    Ok(rep)
}

/// Growth rate of the leader against `ε` on a log-log scale.
pub fn scaling(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("scaling");
    let r = &lab.res;
    let fit = epsilon_scaling_sweep(&r.profile, &lab.cfg.experiment.eps_list, &r.modes, r.grid.clone())?;
    let rows: Vec<Vec<String>> = fit
        .points
        .iter()
        .map(|p| {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            vec![
                num(p.eps),
                opt(p.leader.map(|l| l.re)),
                opt(p.leader.map(|l| l.im)),
                p.mode.map(|m| m.m.to_string()).unwrap_or_default(),
                p.mode.map(|m| m.k.to_string()).unwrap_or_default(),
                p.window.mmax.to_string(),
                p.window.kmax.to_string(),
                opt(p.residual),
                opt(p.drift),
                p.note.clone().unwrap_or_default().replace(',', ";"),
            ]
        })
        .collect();
    rep.csv("scaling.csv", &["eps", "re", "im", "m", "k", "mmax", "kmax", "residual", "drift", "note"], &rows);
    let f = fit.fit;
    rep.csv(
        "scaling_fit.csv",
        &["slope", "intercept", "stderr", "n"],
        &[vec![num(f.slope), num(f.intercept), num(f.stderr), f.n.to_string()]],
    );
    rep.check(
        "growth-rate exponent",
        (0.23..=0.43).contains(&f.slope),
        format!("slope {:.4} (target [0.23, 0.43])", f.slope),
    );
    rep.check("exponent standard error", f.stderr < 0.05, format!("{:.4} (bound 0.05)", f.stderr));
    rep.summary("fit", f);
    rep.timing("total", secs(t0));
    Ok(rep)
}

/// Smoothing envelopes of the dynamo semigroup and inverse-gradient norms
/// on the leader's mode under radial refinement.
pub fn semigroup_check(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("semigroup-check");
    let r = &lab.res;
    let e = &lab.cfg.experiment;
    let mode = match lab.cfg.fixed_mode() {
        Some(m) => m,
        None => lab.leader()?.mode,
    };
    let times = log_times(e.t_range[0], e.t_range[1], e.t_samples);
    let study = smoothing_study(
        OperatorKind::Dynamo { eps: r.eps },
        mode,
        &r.modes,
        &r.profile,
        &r.grid,
        &e.nr_levels,
        &e.alphas,
        e.eta,
        &times,
        Calculus::Auto,
    )?;
    let mut rows = Vec::new();
    let mut env = Vec::new();
    let mut fg = Vec::new();
    for lvl in &study.levels {
        for s in &lvl.semigroup {
            rows.push(vec![
                lvl.nr.to_string(),
                num(s.alpha),
                num(s.sup),
                num(s.t_at_sup),
                num(s.lambda),
                num(s.eta),
                num(s.spectral_abscissa),
                num(s.numerical_abscissa),
                num(s.eigvec_cond),
                format!("{:?}", s.method).to_lowercase(),
            ]);
            for p in &s.samples {
                env.push(vec![lvl.nr.to_string(), num(s.alpha), num(p.t), num(p.norm), num(p.weighted)]);
            }
        }
        for f in &lvl.frac_grad {
            fg.push(vec![lvl.nr.to_string(), num(f.alpha), num(f.norm)]);
        }
    }
    rep.csv(
        "semigroup.csv",
        &[
            "nr",
            "alpha",
            "sup",
            "t_at_sup",
            "lambda",
            "eta",
            "spectral_abscissa",
            "numerical_abscissa",
            "eigvec_cond",
            "method",
        ],
        &rows,
    );
    rep.csv("envelope.csv", &["nr", "alpha", "t", "norm", "weighted"], &env);
    rep.csv("frac_grad.csv", &["nr", "alpha", "norm"], &fg);
    rep.check("all envelopes finite", study.all_finite(), format!("mode {mode}, levels {:?}", e.nr_levels));
    let finest = study.levels.last().expect("at least two levels");
    for (s, c) in finest.semigroup.iter().zip(study.semigroup_changes()) {
        rep.check(
            &format!("envelope stable under refinement, alpha = {}", s.alpha),
            c < 0.25,
            format!("relative change {c:.3e} (bound 0.25), sup {:.4}", s.sup),
        );
    }
    for (f, g) in finest.frac_grad.iter().zip(study.frac_grad_growth()) {
        rep.check(
            &format!("inverse fractional gradient bounded, alpha = {}", f.alpha),
            f.norm.is_finite() && g < 0.25,
            format!("growth {g:.3e} (bound 0.25), norm {:.4e}", f.norm),
        );
    }
    rep.summary("mode", mode);
    rep.summary("semigroup_changes", study.semigroup_changes());
    rep.summary("frac_grad_growth", study.frac_grad_growth());
    rep.timing("total", secs(t0));
    Ok(rep)
}

/// `log ‖B‖` at `t`, linearly interpolated between samples.
fn log_norm_at(trace: &EnergyTrace, t: f64) -> Option<f64> {
    trace.samples.windows(2).find(|w| w[0].t <= t && t <= w[1].t).map(|w| {
        let f = (t - w[0].t) / (w[1].t - w[0].t);
        (1.0 - f) * w[0].eb.ln() + f * w[1].eb.ln()
    })
}

/// Kinematic dynamo from its leading eigenmode at `dt` and `dt/2`.
pub fn evolve_linear(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("evolve-linear");
    let r = &lab.res;
    let l = lab.leader()?;
    let rate = lab.growing(&l)?;
    let b0 = lab.leader_field(&l);
    let t_end = lab.cfg.integrator.t_end.unwrap_or(5.0 / rate);
    let dt = lab.cfg.integrator.dt;
    let every = lab.cfg.integrator.sample_every;
    let coarse = run_linear(&b0, r.eps, &r.profile, t_end, dt, every)?;
    let fine = run_linear(&b0, r.eps, &r.profile, t_end, 0.5 * dt, 2 * every)?;
    let fc = measured_growth_rate(&coarse, (0.0, t_end))?;
    let ff = measured_growth_rate(&fine, (0.0, t_end))?;
    let (ec, ef) = ((fc.slope - rate).abs(), (ff.slope - rate).abs());
    let ratio = ec / ef;
    rep.trace("linear_trace", &coarse);
    rep.trace("linear_trace_half_dt", &fine);
    rep.csv(
        "linear_rates.csv",
        &["dt", "rate", "stderr", "eigen_rate", "abs_error"],
        &[
            vec![num(dt), num(fc.slope), num(fc.stderr), num(rate), num(ec)],
            vec![num(0.5 * dt), num(ff.slope), num(ff.stderr), num(rate), num(ef)],
        ],
    );
    rep.check(
        "growth rate matches the eigenvalue",
        ec <= 0.01 * rate,
        format!("measured {:.8e}, eigenvalue {:.8e}, relative error {:.2e}", fc.slope, rate, ec / rate),
    );
    rep.check(
        "second-order convergence in dt",
        (3.0..=5.0).contains(&ratio),
        format!("error ratio {ratio:.3} between dt = {dt} and dt/2"),
    );
    let efold = log_norm_at(&coarse, 1.0 / rate).map(|x| (x - coarse.samples[0].eb.ln()).exp());
    rep.check(
        "one e-folding over 1/Re(lambda)",
        efold.is_some_and(|f| (f / std::f64::consts::E - 1.0).abs() <= 0.01),
        format!("growth factor {efold:?}"),
    );
    rep.summary("lambda", l.lambda);
    rep.summary("measured_rate", fc.slope);
    rep.summary("error_ratio", ratio);
    rep.timing("total", secs(t0));
    Ok(rep)
}

fn ckpt_bytes(out: &SpectralField, b: &SpectralField, t: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    checkpoint::write(&mut buf, &[out, b], t)?;
    Ok(buf)
}

/// One nonlinear run from the first `δ` of the list.
pub fn evolve_nonlinear(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("evolve-nonlinear");
    let l = lab.leader()?;
    let rate = lab.growing(&l)?;
    let delta = lab.cfg.experiment.delta_list[0];
    let (v0, b0) = lab.initial_state(&l, delta);
    let t_end = lab.horizon(delta, rate);
    let escape = Escape { chi: lab.res.chi, on: lab.cfg.experiment.escape_on };
    let dt = lab.nonlinear_dt(&l)?;
    let (out, it) = lab.nonlinear_run(&v0, &b0, dt, t_end, Some(escape))?;
    rep.trace("trace", &out.trace);
    rep.file("final.ckpt", ckpt_bytes(&it.velocity(), &it.magnetic(), it.time())?);
    constraint_checks(&mut rep, "run", &out);
    rep.check(
        "reached the escape threshold",
        out.stop == StopReason::Escape,
        format!("stopped by {:?} at t = {}", out.stop, it.time()),
    );
    rep.summary("delta", delta);
    rep.summary("dt", it.dt());
    rep.summary("chi", lab.res.chi);
    rep.summary("stop", out.stop);
    rep.summary("monitor", out.monitor);
    rep.timing("total", secs(t0));
    Ok(rep)
}

struct SweepRow {
    delta: f64,
    t_star: Option<f64>,
    out: RunOutcome,
    sobolev: [f64; 3],
}

fn joint_sobolev(v: &SpectralField, b: &SpectralField, s: u32, p: f64) -> Result<f64> {
    let nv = if v.max_abs() > 0.0 { sobolev_norm(v, s, p)? } else { 0.0 };
    let nb = if b.max_abs() > 0.0 { sobolev_norm(b, s, p)? } else { 0.0 };
    Ok((nv.powf(p) + nb.powf(p)).powf(1.0 / p))
}

/// Escape time against `δ`.
pub fn instability_sweep(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("instability-sweep");
    let deltas = &lab.cfg.experiment.delta_list;
    if deltas.len() < 4 {
        return Err(Error::config("experiment.delta_list", format!("needs at least 4 values, got {}", deltas.len())));
    }
    let q = deltas[1] / deltas[0];
    if deltas.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9) || q == 1.0 {
        return Err(Error::config("experiment.delta_list", "must be a geometric sequence"));
    }
    let l = lab.leader()?;
    let rate = lab.growing(&l)?;
    let chi = lab.res.chi;
    let on = lab.cfg.experiment.escape_on;
    let p = lab.cfg.experiment.p;
    let dt = lab.nonlinear_dt(&l)?;
    let rows: Vec<SweepRow> = deltas
        .par_iter()
        .map(|&delta| -> Result<SweepRow> {
            let (v0, b0) = lab.initial_state(&l, delta);
            let mut sobolev = [0.0; 3];
            for (s, slot) in sobolev.iter_mut().enumerate() {
                *slot = joint_sobolev(&v0, &b0, s as u32, p)?;
            }
            let (out, _) = lab.nonlinear_run(&v0, &b0, dt, lab.horizon(delta, rate), Some(Escape { chi, on }))?;
            let t_star = match detect_crossing(&out.trace, on, chi) {
                Ok(t) => Some(t),
                Err(Error::NoCrossing { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow { delta, t_star, out, sobolev })
        })
        .collect::<Result<Vec<_>>>()?;
    rep.timing("runs", secs(t0));

    let mut table = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let m = row.out.monitor;
        table.push(vec![
            num(row.delta),
            row.t_star.map(num).unwrap_or_default(),
            (row.t_star.is_some() as u8).to_string(),
            row.out.steps.to_string(),
            num(row.sobolev[0]),
            num(row.sobolev[1]),
            num(row.sobolev[2]),
            num(m.max_div_v),
            num(m.max_div_b),
            num(m.max_bc_v),
            num(m.max_bc_b),
            num(worst_budget(&row.out.trace)),
        ]);
        rep.trace(&format!("trace_delta_{i}"), &row.out.trace);
    }
    rep.csv(
        "sweep.csv",
        &[
            "delta",
            "t_star",
            "escaped",
            "steps",
            "w_s0",
            "w_s1",
            "w_s2",
            "max_div_v",
            "max_div_b",
            "max_bc_v",
            "max_bc_b",
            "max_budget_closure",
        ],
        &table,
    );

    let escaped: Vec<&SweepRow> = rows.iter().filter(|r| r.t_star.is_some()).collect();
    rep.check(
        "every run escaped",
        escaped.len() == rows.len(),
        format!("{} of {} runs crossed chi = {chi:.4e}", escaped.len(), rows.len()),
    );
    let mut by_size: Vec<&SweepRow> = escaped.clone();
    by_size.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let increasing = by_size.windows(2).all(|w| w[1].t_star.unwrap() > w[0].t_star.unwrap());
    rep.check(
        "escape time increases as delta decreases",
        increasing && by_size.len() >= 2,
        format!("{:?}", by_size.iter().map(|r| r.t_star.unwrap()).collect::<Vec<_>>()),
    );
    let x: Vec<f64> = escaped.iter().map(|r| (1.0 / r.delta).ln()).collect();
    let y: Vec<f64> = escaped.iter().map(|r| r.t_star.unwrap()).collect();
    match linear_fit(&x, &y) {
        Ok(f) => {
            let ratio = f.slope * rate;
            rep.csv(
                "sweep_fit.csv",
                &["slope", "intercept", "stderr", "n", "inverse_rate", "ratio"],
                &[vec![num(f.slope), num(f.intercept), num(f.stderr), f.n.to_string(), num(1.0 / rate), num(ratio)]],
            );
            rep.check(
                "escape-time slope against 1/Re(lambda)",
                (0.85..=1.15).contains(&ratio),
                format!("slope {:.4}, 1/Re(lambda) = {:.4}, ratio {ratio:.4}", f.slope, 1.0 / rate),
            );
            rep.summary("fit", f);
            rep.summary("ratio", ratio);
        }
        Err(e) => rep.check("escape-time slope against 1/Re(lambda)", false, format!("no fit: {e}")),
    }
    let per_delta: Vec<f64> = rows.iter().map(|r| r.sobolev[2] / r.delta).collect();
    let spread = per_delta.iter().fold(0.0f64, |m, x| m.max((x / per_delta[0] - 1.0).abs()));
    rep.check(
        "initial W^{s,p} norms proportional to delta",
        spread <= 1e-10,
        format!("relative spread of |w0|_(2,p)/delta {spread:.2e}"),
    );
    if let Some(shortest) = by_size.first() {
        constraint_checks(&mut rep, &format!("shortest run (delta = {})", shortest.delta), &shortest.out);
    }
    rep.summary("lambda", l.lambda);
    rep.summary("mode", l.mode);
    rep.summary("chi", chi);
    rep.summary("dt", dt);
    rep.timing("total", secs(t0));
    Ok(rep)
}

/// Large-viscosity run from the magnetic leader: the velocity block is
/// stable, the magnetic block is not, and the field reaches `χ`.
pub fn energy_transfer_experiment(lab: &Lab) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new("energy-transfer");
    let r = &lab.res;
    let threshold = 10.0 * r.w1inf;
    let large = r.nu >= threshold * (1.0 - 1e-12);
    rep.check(
        "viscosity at least 10 |u_TC|_(W^1,inf)",
        large || lab.cfg.experiment.allow_small_nu,
        format!("nu = {:.6}, threshold {:.6}{}", r.nu, threshold, if large { "" } else { " (below)" }),
    );
    if !large && !lab.cfg.experiment.allow_small_nu {
        return Ok(rep);
    }
    let a1 = rightmost_eigen(OperatorKind::LinNs { nu: r.nu }, &r.profile, r.grid.clone(), &r.modes)?;
    let l1 = a1.leader().expect("report has a leader");
    rep.check("velocity block stable", l1.re < 0.0, format!("rightmost {l1} on {}", a1.mode));
    rep.timing("velocity scan", secs(t0));
    let l = lab.leader()?;
    rep.check("magnetic block unstable", l.lambda.re > 0.0, format!("leader {} on {}", l.lambda, l.mode));
    if l.lambda.re <= 0.0 {
        return Ok(rep);
    }
    let blk = assemble_kz(
        OperatorKind::Block { nu: r.nu, eps: r.eps },
        l.mode,
        r.modes.kz(l.mode.k),
        &r.profile,
        r.grid.clone(),
    )?;
    let bs = mode_spectrum(&blk)?;
    let n = 3 * r.grid.len();
    let (lb, vb) = (bs.leader().expect("block leader"), bs.leader_vector().expect("block vector"));
    let v_part = linalg::vec_norm(&vb[..n]);
    rep.check(
        "block leader is (0, B0)",
        bs.leader_block() == Some(Block::Magnetic)
            && v_part == 0.0
            && (lb - l.lambda).norm() <= 1e-8 * (1.0 + lb.norm()),
        format!("block leader {lb}, |v part| = {v_part:.1e}"),
    );
    let rate = l.lambda.re;
    let delta = lab.cfg.experiment.transfer_delta;
    let v0 = SpectralField::zeros(r.grid.clone(), r.modes, BcTag::DirichletVelocity);
    let b0 = lab.leader_field(&l).scaled(delta);
    let chi = r.chi;
    let dt = lab.nonlinear_dt(&l)?;
    let (out, _) = lab.nonlinear_run(&v0, &b0, dt, lab.horizon(delta, rate), Some(Escape { chi, on: Series::BLp }))?;
    rep.trace("transfer_trace", &out.trace);
    rep.timing("run", secs(t0));
    if delta == 0.0 {
        let zero = out.trace.samples.iter().all(|s| s.ev == 0.0 && s.eb == 0.0);
        rep.check("delta = 0 stays zero (escape assertion vacuous)", zero, "trivial run");
        return Ok(rep);
    }
    let last = *out.trace.last().expect("trace has samples");
    let first = out.trace.samples[0];
    rep.check(
        "|B(t*)| reaches chi",
        out.stop == StopReason::Escape && last.b_lp >= chi,
        format!("|B| = {:.4e} at t = {:.2}, chi = {chi:.4e}, stop {:?}", last.b_lp, last.t, out.stop),
    );
    let growth = last.eb / first.eb;
    rep.check("magnetic growth factor", growth >= 100.0, format!("{growth:.3e} (at least 100)"));
    let t_star = detect_crossing(&out.trace, Series::BLp, chi).ok();
    let w_star = detect_crossing(&out.trace, Series::WLp, chi).ok();
    let mut ratio = f64::NAN;
    if let Some(ts) = t_star {
        let window = (0.25 * ts, 0.75 * ts);
        let sv = measured_growth_rate_of(&out.trace, Series::V, window);
        let sb = measured_growth_rate_of(&out.trace, Series::B, window);
        if let (Ok(sv), Ok(sb)) = (sv, sb) {
            ratio = sv.slope / sb.slope;
            rep.csv(
                "transfer.csv",
                &["t_star_b", "t_star_w", "window_start", "window_end", "slope_v", "slope_b", "ratio", "growth_b"],
                &[vec![
                    num(ts),
                    w_star.map(num).unwrap_or_default(),
                    num(window.0),
                    num(window.1),
                    num(sv.slope),
                    num(sb.slope),
                    num(ratio),
                    num(growth),
                ]],
            );
        }
    }
    rep.check(
        "velocity grows at twice the magnetic rate",
        (1.7..=2.3).contains(&ratio),
        format!("slope ratio {ratio:.4} over the middle half of [0, t*]"),
    );
    constraint_checks(&mut rep, "transfer run", &out);
    rep.summary("a1_leader", l1);
    rep.summary("a2_leader", l.lambda);
    rep.summary("t_star", t_star);
    rep.summary("slope_ratio", ratio);
    rep.summary("dt", dt);
    rep.timing("total", secs(t0));
    Ok(rep)
}
