//! Time integration of the kinematic dynamo and of the perturbation system
//! about the Taylor–Couette state.
//!
//! The state is kept as Galerkin coordinates on each active Fourier mode
//! (one of each conjugate pair), so every stored field is exactly
//! solenoidal and satisfies its wall conditions up to round-off. The linear
//! operator of each mode is advanced by Crank–Nicolson; the quadratic terms
//! by second-order Adams–Bashforth, the first step taking a Heun
//! predictor–corrector instead.

mod budget;
mod trace;

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, BcTag, SpectralField, R, TH, Z};
use crate::grid::{ModeIndex, ModeSet, RadialGrid};
use crate::linalg::{self, CMat, Lu, ZERO};
use crate::oper::{assemble_kz, tensor_divergence, NonlinearOptions, OperatorKind, Subspace};
use crate::physical::{lp_norm, lp_norm_joint, ProductPath};
use crate::steady::TCProfile;

pub use budget::{curl_norm_sq, gradient_norm_sq, shear_production};
pub use trace::{
    detect_crossing, detect_escape_time, measured_growth_rate, measured_growth_rate_of, EnergyTrace, Series,
    TraceSample, DIAGNOSTICS_HEADER, TRACE_HEADER,
};

/// Largest admissible explicit Courant number of the quadratic terms.
pub const DEFAULT_CFL: f64 = 0.5;

/// Relative part of an initial field allowed to fall outside the admissible
/// subspace.
const ADMISSIBLE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub dt: f64,
    /// Include `−N(v,v) + N(B,B)` and `M(v,B)`.
    pub nonlinear: bool,
    /// Track the energy budget at every step.
    pub budget: bool,
    pub cfl: f64,
    /// Record divergence and boundary residuals after every step.
    #[serde(default)]
    pub monitor: bool,
    #[serde(skip)]
    pub path: Option<ProductPath>,
}

impl StepParams {
    pub fn new(dt: f64) -> Self {
        Self { dt, nonlinear: true, budget: false, cfl: DEFAULT_CFL, monitor: false, path: None }
    }
}

/// Linear operator of one field on one mode: `(I − dt/2 A)` factorised.
struct ModeStepper {
    sub: Subspace,
    a: CMat,
    lu: Lu,
}

impl ModeStepper {
    fn new(
        kind: OperatorKind,
        mode: ModeIndex,
        kz: f64,
        profile: &TCProfile,
        grid: Arc<RadialGrid>,
        dt: f64,
    ) -> Result<Self> {
        let op = assemble_kz(kind, mode, kz, profile, grid)?;
        let a = op.reduced;
        let sub = op.subspaces.into_iter().next().expect("single-field operator");
        let lhs = linalg::shift(&linalg::scale(&a, C64::new(-0.5 * dt, 0.0)), linalg::ONE);
        let lu = Lu::new(&lhs)?;
        Ok(Self { sub, a, lu })
    }

    /// `(I − dt/2 A)⁻¹ ((I + dt/2 A) y + dt f)`.
    fn advance(&self, y: &[C64], f: Option<&[C64]>, dt: f64) -> Vec<C64> {
        let ay = linalg::matvec(&self.a, y);
        let mut rhs: Vec<C64> = y.iter().zip(&ay).map(|(a, b)| a + b * (0.5 * dt)).collect();
        if let Some(f) = f {
            for (r, fi) in rhs.iter_mut().zip(f) {
                *r += fi * dt;
            }
        }
        self.lu.solve(&rhs)
    }
}

/// `(v, B)` snapshot.
#[derive(Clone, Debug)]
pub struct EvolveState {
    pub t: f64,
    pub v: SpectralField,
    pub b: SpectralField,
    pub dt: f64,
    pub steps: usize,
}

type Coords = Vec<Vec<C64>>;

/// Modes reachable from `seeds` by sums and conjugation inside `modes`;
/// canonical representatives in index order.
pub fn interaction_closure(seeds: &[ModeIndex], modes: &ModeSet) -> Vec<ModeIndex> {
    let mut set: BTreeSet<ModeIndex> = BTreeSet::new();
    for s in seeds {
        set.insert(*s);
        set.insert(s.conj());
    }
    loop {
        let cur: Vec<ModeIndex> = set.iter().copied().collect();
        let before = set.len();
        for a in &cur {
            for b in &cur {
                let c = ModeIndex::new(a.m + b.m, a.k + b.k);
                if modes.contains(c) {
                    set.insert(c);
                }
            }
        }
        if set.len() == before {
            break;
        }
    }
    let mut out: Vec<ModeIndex> = set.into_iter().filter(|m| m.is_canonical()).collect();
    out.sort_by_key(|m| modes.index(*m));
    out
}

/// Worst constraint residuals seen after accepted steps. Divergences are
/// relative to the field's L² norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMonitor {
    pub steps: usize,
    pub max_div_v: f64,
    pub max_div_b: f64,
    pub max_bc_v: f64,
    pub max_bc_b: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct BudgetAccumulator {
    predicted: f64,
    scale: f64,
}

pub struct Integrator {
    profile: TCProfile,
    grid: Arc<RadialGrid>,
    modes: ModeSet,
    params: StepParams,
    nu: Option<f64>,
    eps: f64,
    active: Vec<ModeIndex>,
    vel: Vec<ModeStepper>,
    mag: Vec<ModeStepper>,
    yv: Coords,
    yb: Coords,
    prev_forcing: Option<(Coords, Coords)>,
    t: f64,
    steps: usize,
    budget: BudgetAccumulator,
    monitor: StepMonitor,
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn multiplicity(md: ModeIndex) -> f64 {
    if md.is_mean() {
        1.0
    } else {
        2.0
    }
}

impl Integrator {
    /// Kinematic dynamo `∂_t B = A₂ B`; the velocity stays zero.
    pub fn linear_dynamo(b0: &SpectralField, eps: f64, profile: &TCProfile, dt: f64) -> Result<Self> {
        let params = StepParams { nonlinear: false, ..StepParams::new(dt) };
        let v0 = SpectralField::zeros(b0.grid.clone(), b0.modes, BcTag::DirichletVelocity);
        Self::build(&v0, b0, None, eps, profile, params)
    }

    /// Perturbation system about the Taylor–Couette state.
    pub fn mhd(
        v0: &SpectralField,
        b0: &SpectralField,
        nu: f64,
        eps: f64,
        profile: &TCProfile,
        params: StepParams,
    ) -> Result<Self> {
        Self::build(v0, b0, Some(nu), eps, profile, params)
    }

    fn build(
        v0: &SpectralField,
        b0: &SpectralField,
        nu: Option<f64>,
        eps: f64,
        profile: &TCProfile,
        params: StepParams,
    ) -> Result<Self> {
        if !(params.dt > 0.0 && params.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", params.dt)));
        }
        if v0.modes != b0.modes || v0.grid.nr != b0.grid.nr {
            return Err(Error::InvalidArgument("v0 and B0 live on different discretisations".into()));
        }
        let modes = b0.modes;
        let grid = b0.grid.clone();
        let mut seeds: Vec<ModeIndex> = v0.active_modes();
        seeds.extend(b0.active_modes());
        seeds.sort_by_key(|m| modes.index(*m));
        seeds.dedup();
        let active = if params.nonlinear && nu.is_some() {
            interaction_closure(&seeds, &modes)
        } else {
            let mut c: Vec<ModeIndex> = seeds.iter().map(|m| m.canonical()).collect();
            c.sort_by_key(|m| modes.index(*m));
            c.dedup();
            c
        };
        let mut vel = Vec::new();
        let mut mag = Vec::with_capacity(active.len());
        for &md in &active {
            let kz = modes.kz(md.k);
            if let Some(nu) = nu {
                vel.push(ModeStepper::new(OperatorKind::LinNs { nu }, md, kz, profile, grid.clone(), params.dt)?);
            }
            mag.push(ModeStepper::new(OperatorKind::Dynamo { eps }, md, kz, profile, grid.clone(), params.dt)?);
        }
        let mut it = Self {
            profile: *profile,
            grid,
            modes,
            params,
            nu,
            eps,
            active,
            vel,
            mag,
            yv: Vec::new(),
            yb: Vec::new(),
            prev_forcing: None,
            t: 0.0,
            steps: 0,
            budget: BudgetAccumulator::default(),
            monitor: StepMonitor::default(),
        };
        it.yb = it.coords_of(b0, &it.mag, "B0")?;
        it.yv = if it.vel.is_empty() {
            if v0.max_abs() > 0.0 {
                return Err(Error::InvalidArgument("the kinematic dynamo has no velocity perturbation".into()));
            }
            Vec::new()
        } else {
            it.coords_of(v0, &it.vel, "v0")?
        };
        Ok(it)
    }

    fn coords_of(&self, f: &SpectralField, steppers: &[ModeStepper], name: &str) -> Result<Coords> {
        let mut out = Vec::with_capacity(self.active.len());
        let mut lost = 0.0;
        let w: Vec<f64> = steppers.first().map(|s| s.sub.weights.clone()).unwrap_or_default();
        for (md, st) in self.active.iter().zip(steppers) {
            let x = f.mode_vector(*md);
            let y = st.sub.coords(&x);
            let back = st.sub.lift(&y);
            let d: Vec<C64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
            lost += linalg::wdot(&w, &d, &d).re * multiplicity(*md);
            out.push(y);
        }
        let total = f.inner(f).re / self.modes.periodic_area();
        if lost > (ADMISSIBLE_TOL * ADMISSIBLE_TOL) * total.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!(
                "{name} is not solenoidal with its boundary conditions (relative defect {:.2e})",
                (lost / total).sqrt()
            )));
        }
        Ok(out)
    }

    /// Restarts the clock, e.g. when resuming from a checkpoint.
    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Writes `(v, B)` at the current time.
    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        crate::checkpoint::save(path, &[&self.velocity(), &self.magnetic()], self.t)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn active_modes(&self) -> &[ModeIndex] {
        &self.active
    }

    pub fn has_velocity(&self) -> bool {
        !self.vel.is_empty()
    }

    fn field_from(&self, ys: &Coords, steppers: &[ModeStepper], bc: BcTag) -> SpectralField {
        let mut f = SpectralField::zeros(self.grid.clone(), self.modes, bc);
        for ((md, y), st) in self.active.iter().zip(ys).zip(steppers) {
            let x = st.sub.lift(y);
            f.set_mode_vector(*md, &x);
            if !md.is_mean() {
                let c: Vec<C64> = x.iter().map(|v| v.conj()).collect();
                f.set_mode_vector(md.conj(), &c);
            }
        }
        f
    }

    pub fn velocity(&self) -> SpectralField {
        if self.vel.is_empty() {
            return SpectralField::zeros(self.grid.clone(), self.modes, BcTag::DirichletVelocity);
        }
        self.field_from(&self.yv, &self.vel, BcTag::DirichletVelocity)
    }

    pub fn magnetic(&self) -> SpectralField {
        self.field_from(&self.yb, &self.mag, BcTag::ConductingMagnetic)
    }

    pub fn state(&self) -> EvolveState {
        EvolveState { t: self.t, v: self.velocity(), b: self.magnetic(), dt: self.params.dt, steps: self.steps }
    }

    /// `‖y‖²` of a coordinate set as the L² norm squared of the real field.
    fn norm_sq(&self, ys: &Coords) -> f64 {
        self.active.iter().zip(ys).map(|(md, y)| multiplicity(*md) * linalg::vec_norm(y).powi(2)).sum::<f64>()
            * self.modes.periodic_area()
    }

    fn project(&self, f: &SpectralField, steppers: &[ModeStepper]) -> Coords {
        self.active.iter().zip(steppers).map(|(md, st)| st.sub.coords(&f.mode_vector(*md))).collect()
    }

    /// Galerkin coordinates of `(−∇·(v⊗v) + ∇·(B⊗B), ∇×(v×B))`.
    fn forcing(&self, yv: &Coords, yb: &Coords) -> Result<(Coords, Coords)> {
        let v = self.field_from(yv, &self.vel, BcTag::DirichletVelocity);
        let b = self.field_from(yb, &self.mag, BcTag::ConductingMagnetic);
        self.check_cfl(&v, &b)?;
        let opts = NonlinearOptions { path: self.params.path };
        let mut fv = tensor_divergence(&b, opts);
        fv.axpy(-1.0, &tensor_divergence(&v, opts));
        let fb = crate::oper::apply_nonlinear_m(&v, &b, opts);
        Ok((self.project(&fv, &self.vel), self.project(&fb, &self.mag)))
    }

    /// Explicit Courant number bound: nodal speeds summed over modes.
    fn courant(&self, v: &SpectralField, b: &SpectralField) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let mut speed_r = vec![0.0; n];
        let mut speed_t = vec![0.0; n];
        let mut speed_z = vec![0.0; n];
        let mmax = self.modes.mmax as f64;
        let kmax = self.modes.kz(self.modes.kmax as i32).abs();
        for f in [v, b] {
            for md in &self.active {
                let mult = multiplicity(*md);
                for j in 0..n {
                    speed_r[j] += mult * f.mode(R, *md)[j].norm();
                    speed_t[j] += mult * f.mode(TH, *md)[j].norm();
                    speed_z[j] += mult * f.mode(Z, *md)[j].norm();
                }
            }
        }
        (0..n)
            .map(|j| {
                self.params.dt * (speed_r[j] / g.local_spacing(j) + speed_t[j] * mmax / g.nodes[j] + speed_z[j] * kmax)
            })
            .fold(0.0, f64::max)
    }

    /// Courant number of the current state at the configured `dt`.
    pub fn courant_number(&self) -> f64 {
        self.courant(&self.velocity(), &self.magnetic())
    }

    fn check_cfl(&self, v: &SpectralField, b: &SpectralField) -> Result<()> {
        let c = self.courant(v, b);
        if c > self.params.cfl {
            return Err(Error::StepTooLarge { dt: self.params.dt, suggested: self.params.dt * self.params.cfl / c });
        }
        Ok(())
    }

    fn advance_all(&self, ys: &Coords, steppers: &[ModeStepper], f: Option<&Coords>) -> Coords {
        ys.iter()
            .zip(steppers)
            .enumerate()
            .map(|(i, (y, st))| st.advance(y, f.map(|f| f[i].as_slice()), self.params.dt))
            .collect()
    }

    /// Keeps the mean mode real.
    fn realify(&self, ys: &mut Coords, steppers: &[ModeStepper]) {
        for ((md, y), st) in self.active.iter().zip(ys.iter_mut()).zip(steppers) {
            if md.is_mean() {
                let x: Vec<C64> = st.sub.lift(y).iter().map(|v| C64::new(v.re, 0.0)).collect();
                *y = st.sub.coords(&x);
            }
        }
    }

    fn combine(a: &Coords, b: &Coords, ca: f64, cb: f64) -> Coords {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * ca + q * cb).collect()).collect()
    }

    /// One step. Returns an error, leaving the state untouched, if the
    /// explicit Courant bound is exceeded or the result is not finite.
    pub fn step(&mut self) -> Result<()> {
        let nonlinear = self.params.nonlinear && self.has_velocity();
        let (nv, nb, forcing) = if nonlinear {
            let f_now = self.forcing(&self.yv, &self.yb)?;
            match &self.prev_forcing {
                Some((pv, pb)) => {
                    let fv = Self::combine(&f_now.0, pv, 1.5, -0.5);
                    let fb = Self::combine(&f_now.1, pb, 1.5, -0.5);
                    let nv = self.advance_all(&self.yv, &self.vel, Some(&fv));
                    let nb = self.advance_all(&self.yb, &self.mag, Some(&fb));
                    (nv, nb, Some((f_now, fv, fb)))
                }
                None => {
                    let pv = self.advance_all(&self.yv, &self.vel, Some(&f_now.0));
                    let pb = self.advance_all(&self.yb, &self.mag, Some(&f_now.1));
                    let f_pred = self.forcing(&pv, &pb)?;
                    let fv = Self::combine(&f_now.0, &f_pred.0, 0.5, 0.5);
                    let fb = Self::combine(&f_now.1, &f_pred.1, 0.5, 0.5);
                    let nv = self.advance_all(&self.yv, &self.vel, Some(&fv));
                    let nb = self.advance_all(&self.yb, &self.mag, Some(&fb));
                    (nv, nb, Some((f_now, fv, fb)))
                }
            }
        } else {
            (self.advance_all(&self.yv, &self.vel, None), self.advance_all(&self.yb, &self.mag, None), None)
        };
        let finite = nv.iter().chain(&nb).all(|y| y.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::NonFinite { t: self.t + self.params.dt, what: "state".into() });
        }
        let (mut nv, mut nb) = (nv, nb);
        self.realify(&mut nv, &self.vel);
        self.realify(&mut nb, &self.mag);
        if self.params.budget {
            let explicit = forcing.as_ref().map(|(_, fv, fb)| (fv, fb));
            self.accumulate_budget(&nv, &nb, explicit);
        }
        self.yv = nv;
        self.yb = nb;
        self.prev_forcing = forcing.map(|(f, _, _)| f);
        self.t += self.params.dt;
        self.steps += 1;
        if self.params.monitor {
            self.record_constraints();
        }
        Ok(())
    }

    fn record_constraints(&mut self) {
        let v = self.velocity();
        let b = self.magnetic();
        let ev = self.norm_sq(&self.yv).sqrt();
        let eb = self.norm_sq(&self.yb).sqrt();
        let m = &mut self.monitor;
        m.steps += 1;
        m.max_div_v = m.max_div_v.max(relative(field::divergence(&v).l2_norm(), ev));
        m.max_div_b = m.max_div_b.max(relative(field::divergence(&b).l2_norm(), eb));
        m.max_bc_v = m.max_bc_v.max(v.boundary_residual());
        m.max_bc_b = m.max_bc_b.max(b.boundary_residual());
    }

    /// Constraint residuals over all steps so far; empty unless
    /// [`StepParams::monitor`] is set.
    pub fn monitor(&self) -> StepMonitor {
        self.monitor
    }

    /// `½‖v‖² + ½‖B‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.norm_sq(&self.yv) + self.norm_sq(&self.yb))
    }

    /// Adds `dt·(shear − dissipation + exchange)` at the step midpoint.
    fn accumulate_budget(&mut self, nv: &Coords, nb: &Coords, explicit: Option<(&Coords, &Coords)>) {
        let dt = self.params.dt;
        let mv = Self::combine(&self.yv, nv, 0.5, 0.5);
        let mb = Self::combine(&self.yb, nb, 0.5, 0.5);
        let v = self.field_from(&mv, &self.vel, BcTag::DirichletVelocity);
        let b = self.field_from(&mb, &self.mag, BcTag::ConductingMagnetic);
        let mut shear = shear_production(&b, &self.profile, true);
        let mut diss = self.eps * curl_norm_sq(&b);
        if let Some(nu) = self.nu {
            shear += shear_production(&v, &self.profile, false);
            diss += nu * gradient_norm_sq(&v);
        }
        let mut exchange = 0.0;
        if let Some((fv, fb)) = explicit {
            for (i, md) in self.active.iter().enumerate() {
                let mult = multiplicity(*md);
                let dv: C64 = mv[i].iter().zip(&fv[i]).map(|(a, b)| a.conj() * b).sum();
                let db: C64 = mb[i].iter().zip(&fb[i]).map(|(a, b)| a.conj() * b).sum();
                exchange += mult * (dv.re + db.re);
            }
            exchange *= self.modes.periodic_area();
        }
        self.budget.predicted += dt * (shear - diss + exchange);
        self.budget.scale += dt * (shear.abs() + diss.abs() + exchange.abs());
    }

    /// Samples the diagnostics at the current time. `closure` is the budget
    /// mismatch accumulated since `energy_prev`.
    fn sample(&mut self, p: f64, energy_prev: Option<f64>) -> Result<TraceSample> {
        let v = self.velocity();
        let b = self.magnetic();
        let ev = self.norm_sq(&self.yv).sqrt();
        let eb = self.norm_sq(&self.yb).sqrt();
        let (v_lp, b_lp, w_lp) = if p == 2.0 {
            (ev, eb, (ev * ev + eb * eb).sqrt())
        } else {
            (lp_norm(&v, p)?, lp_norm(&b, p)?, lp_norm_joint(&[&v, &b], p)?)
        };
        let rel = relative;
        let div_v = rel(field::divergence(&v).l2_norm(), ev);
        let div_b = rel(field::divergence(&b).l2_norm(), eb);
        let budget_closure = match (self.params.budget, energy_prev) {
            (true, Some(e0)) => {
                let de = self.energy() - e0;
                let c = rel((de - self.budget.predicted).abs(), self.budget.scale);
                self.budget = BudgetAccumulator::default();
                Some(c)
            }
            _ => {
                self.budget = BudgetAccumulator::default();
                None
            }
        };
        Ok(TraceSample {
            t: self.t,
            ev,
            eb,
            v_lp,
            b_lp,
            w_lp,
            div_v,
            div_b,
            dt: self.params.dt,
            bc_v: v.boundary_residual(),
            bc_b: b.boundary_residual(),
            budget_closure,
        })
    }
}

/// When a run stops early.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    /// The escape norm reached its threshold at the last sample.
    Escape,
    NonFinite {
        t: f64,
    },
}

/// Stop condition on a norm column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub chi: f64,
    pub on: Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub t_end: f64,
    pub sample_every: usize,
    /// Exponent of the `L^p` trace columns.
    pub p: f64,
    pub escape: Option<Escape>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: EnergyTrace,
    pub stop: StopReason,
    pub steps: usize,
    pub monitor: StepMonitor,
}

/// Advances `it` to `t_end`, sampling every `sample_every` steps and at the
/// end. A non-finite state stops the run with the trace so far.
pub fn run(it: &mut Integrator, opts: RunOptions) -> Result<RunOutcome> {
    if opts.sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
    }
    if !(opts.t_end > it.time()) {
        return Err(Error::InvalidArgument(format!("t_end = {} is not after t = {}", opts.t_end, it.time())));
    }
    let mut trace = EnergyTrace::new(opts.p);
    let mut e_prev = it.energy();
    trace.push(it.sample(opts.p, None)?);
    let nsteps = ((opts.t_end - it.time()) / it.dt() - 1e-9).ceil() as usize;
    let escaped = |s: &TraceSample| opts.escape.map_or(false, |e| e.on.of(s) >= e.chi);
    for i in 1..=nsteps {
        match it.step() {
            Ok(()) => {}
            Err(Error::NonFinite { t, .. }) => {
                return Ok(RunOutcome {
                    trace,
                    stop: StopReason::NonFinite { t },
                    steps: it.steps(),
                    monitor: it.monitor(),
                })
            }
            Err(e) => return Err(e),
        }
        if i % opts.sample_every == 0 || i == nsteps {
            let s = it.sample(opts.p, Some(e_prev))?;
            e_prev = it.energy();
            let done = escaped(&s);
            if !(s.ev.is_finite() && s.eb.is_finite()) {
                trace.push(s);
                return Ok(RunOutcome {
                    trace,
                    stop: StopReason::NonFinite { t: it.time() },
                    steps: it.steps(),
                    monitor: it.monitor(),
                });
            }
            trace.push(s);
            if done {
                return Ok(RunOutcome { trace, stop: StopReason::Escape, steps: it.steps(), monitor: it.monitor() });
            }
        }
    }
    Ok(RunOutcome { trace, stop: StopReason::EndTime, steps: it.steps(), monitor: it.monitor() })
}

/// Kinematic dynamo from `b0` up to `t_end`.
pub fn run_linear(
    b0: &SpectralField,
    eps: f64,
    profile: &TCProfile,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<EnergyTrace> {
    let mut it = Integrator::linear_dynamo(b0, eps, profile, dt)?;
    let out = run(&mut it, RunOptions { t_end, sample_every, p: 2.0, escape: None })?;
    match out.stop {
        StopReason::NonFinite { t } => Err(Error::NonFinite { t, what: "magnetic field".into() }),
        _ => Ok(out.trace),
    }
}

/// Perturbation system from `(v0, b0)`.
#[allow(clippy::too_many_arguments)]
pub fn run_nonlinear(
    v0: &SpectralField,
    b0: &SpectralField,
    nu: f64,
    eps: f64,
    profile: &TCProfile,
    params: StepParams,
    opts: RunOptions,
) -> Result<RunOutcome> {
    let mut it = Integrator::mhd(v0, b0, nu, eps, profile, params)?;
    run(&mut it, opts)
}

/// Stacked node vector scaled so that the real field built from it has the
/// given L² norm.
pub fn real_mode_field(
    grid: Arc<RadialGrid>,
    modes: ModeSet,
    bc: BcTag,
    mode: ModeIndex,
    x: &[C64],
    l2: f64,
) -> SpectralField {
    let f = SpectralField::from_mode_real(grid, modes, bc, mode, x);
    let n = f.l2_norm();
    if n > 0.0 {
        f.scaled(l2 / n)
    } else {
        f
    }
}

/// Zero node vector helper for tests and callers building single modes.
pub fn zero_mode_vector(grid: &RadialGrid) -> Vec<C64> {
    vec![ZERO; 3 * grid.len()]
}

#[cfg(test)]
mod tests;
