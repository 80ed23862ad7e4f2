//! Sampled norm histories and the estimators run on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};

/// One sample of a run. `ev` and `eb` are L² norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub ev: f64,
    pub eb: f64,
    pub v_lp: f64,
    pub b_lp: f64,
    pub w_lp: f64,
    /// `‖div v‖/‖v‖`, zero for a vanishing field.
    pub div_v: f64,
    pub div_b: f64,
    pub dt: f64,
    /// Boundary-condition residuals relative to the field scale.
    pub bc_v: f64,
    pub bc_b: f64,
    /// `|ΔE − ∫ budget| / ∫ |budget terms|` over the interval ending here;
    /// absent for the first sample or when the budget is not tracked.
    pub budget_closure: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    /// Exponent of the `L^p` columns.
    pub p: f64,
    pub samples: Vec<TraceSample>,
}

/// Which norm column an estimator reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    /// `‖v‖_{L²}`.
    V,
    /// `‖B‖_{L²}`.
    B,
    /// `‖v‖_{L^p}`.
    VLp,
    /// `‖B‖_{L^p}`.
    BLp,
    /// `‖(v, B)‖_{L^p}`.
    WLp,
}

impl Series {
    pub fn of(self, s: &TraceSample) -> f64 {
        match self {
            Series::V => s.ev,
            Series::B => s.eb,
            Series::VLp => s.v_lp,
            Series::BLp => s.b_lp,
            Series::WLp => s.w_lp,
        }
    }
}

pub const TRACE_HEADER: &str = "t,Ev,EB,v_Lp,B_Lp,w_Lp,div_v,div_B,dt";
pub const DIAGNOSTICS_HEADER: &str = "t,bc_v,bc_B,budget_closure";

impl EnergyTrace {
    pub fn new(p: f64) -> Self {
        Self { p, samples: Vec::new() }
    }

    pub fn push(&mut self, s: TraceSample) {
        debug_assert!(self.samples.last().map_or(true, |l| s.t > l.t));
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn series(&self, which: Series) -> Vec<f64> {
        self.samples.iter().map(|s| which.of(s)).collect()
    }

    /// Times strictly increasing and every entry finite.
    pub fn is_well_formed(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].t > w[0].t)
            && self.samples.iter().all(|s| {
                [s.t, s.ev, s.eb, s.v_lp, s.b_lp, s.w_lp, s.div_v, s.div_b, s.dt].iter().all(|v| v.is_finite())
            })
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t, s.ev, s.eb, s.v_lp, s.b_lp, s.w_lp, s.div_v, s.div_b, s.dt
            )?;
        }
        Ok(())
    }

    pub fn write_diagnostics_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for s in &self.samples {
            let b = s.budget_closure.map(|b| format!("{b:e}")).unwrap_or_default();
            writeln!(w, "{:e},{:e},{:e},{b}", s.t, s.bc_v, s.bc_b)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log ‖B‖_{L²}` over samples with `t0 ≤ t ≤ t1`.
pub fn measured_growth_rate(trace: &EnergyTrace, window: (f64, f64)) -> Result<LineFit> {
    measured_growth_rate_of(trace, Series::B, window)
}

/// As [`measured_growth_rate`] for any norm column.
pub fn measured_growth_rate_of(trace: &EnergyTrace, which: Series, window: (f64, f64)) -> Result<LineFit> {
    let (t0, t1) = window;
    let pts: Vec<&TraceSample> = trace.samples.iter().filter(|s| s.t >= t0 && s.t <= t1).collect();
    if pts.len() < 10 {
        return Err(Error::Precondition(format!(
            "growth-rate window [{t0}, {t1}] holds {} samples, need 10",
            pts.len()
        )));
    }
    let mut x = Vec::with_capacity(pts.len());
    let mut y = Vec::with_capacity(pts.len());
    for s in pts {
        let v = which.of(s);
        if !(v > 0.0) {
            return Err(Error::Precondition(format!("non-positive norm {v} at t = {}", s.t)));
        }
        x.push(s.t);
        y.push(v.ln());
    }
    linear_fit(&x, &y)
}

/// First time `‖w‖_{L^p}` reaches `chi`, interpolating `log ‖w‖` linearly
/// between samples.
pub fn detect_escape_time(trace: &EnergyTrace, chi: f64) -> Result<f64> {
    detect_crossing(trace, Series::WLp, chi)
}

/// As [`detect_escape_time`] for any norm column.
pub fn detect_crossing(trace: &EnergyTrace, which: Series, chi: f64) -> Result<f64> {
    let first = trace.samples.first().ok_or_else(|| Error::Precondition("empty trace".into()))?;
    let n0 = which.of(first);
    if !(chi > n0) {
        return Err(Error::Precondition(format!("threshold {chi} is not above the initial norm {n0}")));
    }
    for w in trace.samples.windows(2) {
        let (a, b) = (which.of(&w[0]), which.of(&w[1]));
        if b >= chi {
            if !(a > 0.0) {
                return Ok(w[1].t);
            }
            let frac = (chi.ln() - a.ln()) / (b.ln() - a.ln());
            return Ok(w[0].t + frac * (w[1].t - w[0].t));
        }
    }
    Err(Error::NoCrossing { chi, t_end: trace.last().map_or(0.0, |s| s.t) })
}
