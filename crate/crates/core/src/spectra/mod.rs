//! Dense per-mode eigenanalysis, the rightmost-eigenvalue scan, the ε-scaling
//! study, and (in [`calculus`]) fractional functional calculus of the
//! shifted operator.
//!
//! Eigenproblems are solved on the Galerkin-reduced matrices, whose basis is
//! orthonormal in the quadrature inner product. Every pair is re-checked in
//! node space afterwards.

mod calculus;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};
use crate::grid::{build_radial_grid, ModeIndex, ModeSet, RadialGrid};
use crate::linalg;
use crate::oper::{assemble_kz, ModeOperator, OperatorKind};
use crate::steady::TCProfile;

pub use calculus::{
    inverse_frac_grad_apply, inverse_frac_grad_check, log_times, semigroup_envelope, semigroup_smoothing_check,
    smoothing_study, Calculus, Eta, FracGradReport, SemigroupReport, SemigroupSample, ShiftedOperator, SmoothingLevel,
    SmoothingStudy, MAX_EIGVEC_COND,
};

/// Relative eigen-residual cut, scaled by `1 + |λ|`.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DIV_TOL: f64 = 1e-6;
/// Resolution-drift cut, scaled by `1 + |λ|`.
pub const DRIFT_TOL: f64 = 1e-6;

/// Which diagonal block of `A₁ ⊕ A₂` a pair belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Velocity,
    Magnetic,
}

impl Block {
    fn of(kind: OperatorKind) -> Block {
        match kind {
            OperatorKind::LinNs { .. } => Block::Velocity,
            _ => Block::Magnetic,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenReport {
    pub mode: ModeIndex,
    pub kind: OperatorKind,
    pub nr: usize,
    /// Sorted by descending real part (ties by descending imaginary part).
    pub eigenvalues: Vec<C64>,
    /// `‖Π A x − λ x‖ / ‖x‖` in the quadrature norm.
    pub residuals: Vec<f64>,
    /// `‖div x‖ / ‖x‖`.
    pub div_scores: Vec<f64>,
    /// Distance to the nearest eigenvalue computed at `2·Nr`.
    pub resolution_drift: Vec<f64>,
    pub blocks: Vec<Block>,
    /// Indices of retained pairs, ascending.
    pub retained: Vec<usize>,
    /// Eigenvectors of the retained pairs (stacked node vectors, unit
    /// quadrature norm, largest entry real positive).
    pub vectors: Vec<Vec<C64>>,
}

impl EigenReport {
    pub fn leader_index(&self) -> Option<usize> {
        self.retained.first().copied()
    }

    pub fn leader(&self) -> Option<C64> {
        self.leader_index().map(|i| self.eigenvalues[i])
    }

    pub fn leader_vector(&self) -> Option<&[C64]> {
        self.vectors.first().map(|v| v.as_slice())
    }

    pub fn leader_block(&self) -> Option<Block> {
        self.leader_index().map(|i| self.blocks[i])
    }

    pub fn is_retained(&self, i: usize) -> bool {
        self.retained.binary_search(&i).is_ok()
    }

    /// One row per retained pair: `m, k, Re λ, Im λ, residual, div_score, drift`.
    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.retained
            .iter()
            .map(|&i| SpectrumRow {
                m: self.mode.m,
                k: self.mode.k,
                re: self.eigenvalues[i].re,
                im: self.eigenvalues[i].im,
                residual: self.residuals[i],
                div_score: self.div_scores[i],
                drift: self.resolution_drift[i],
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub m: i32,
    pub k: i32,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub div_score: f64,
    pub drift: f64,
}

fn by_real_part_desc(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// `div x` at the nodes for a stacked `(x_r, x_θ, x_z)` vector on one mode.
fn node_divergence(grid: &RadialGrid, m: i32, kz: f64, x: &[C64]) -> Vec<C64> {
    let n = grid.len();
    let rx: Vec<C64> = (0..n).map(|j| x[j] * grid.nodes[j]).collect();
    let d = grid.d1.apply_cv(&rx);
    (0..n)
        .map(|i| {
            let r = grid.nodes[i];
            d[i] / r + C64::new(0.0, m as f64 / r) * x[n + i] + C64::new(0.0, kz) * x[2 * n + i]
        })
        .collect()
}

fn wnorm(w: &[f64], x: &[C64]) -> f64 {
    linalg::wdot(w, x, x).re.max(0.0).sqrt()
}

fn normalise(w: &[f64], x: &mut [C64]) {
    let nx = wnorm(w, x);
    let big = x.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(linalg::ONE);
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { linalg::ONE };
    let s = phase / nx;
    for v in x.iter_mut() {
        *v *= s;
    }
}

fn eig_err(mode: ModeIndex, e: Error) -> Error {
    Error::Eigensolve { mode: mode.to_string(), reason: e.to_string() }
}

/// The same operator on a grid with twice the radial resolution.
fn refined(op: &ModeOperator) -> Result<ModeOperator> {
    let g = &op.grid;
    let fine = Arc::new(build_radial_grid(g.r1, g.r2, 2 * g.nr)?);
    assemble_kz(op.kind, op.mode, op.kz, &op.profile, fine)
}

/// Spectrum of a single-field operator.
fn single_spectrum(op: &ModeOperator) -> Result<EigenReport> {
    let evd = linalg::eigen(&op.reduced).map_err(|e| eig_err(op.mode, e))?;
    let fine = refined(op)?;
    let fine_ev = linalg::eigenvalues(&fine.reduced).map_err(|e| eig_err(op.mode, e))?;
    let w = op.weights();
    let block = Block::of(op.kind);

    let mut order: Vec<usize> = (0..evd.values.len()).collect();
    order.sort_by(|&a, &b| by_real_part_desc(&evd.values[a], &evd.values[b]).then(a.cmp(&b)));

    let d = order.len();
    let mut rep = EigenReport {
        mode: op.mode,
        kind: op.kind,
        nr: op.grid.nr,
        eigenvalues: Vec::with_capacity(d),
        residuals: Vec::with_capacity(d),
        div_scores: Vec::with_capacity(d),
        resolution_drift: Vec::with_capacity(d),
        blocks: vec![block; d],
        retained: Vec::new(),
        vectors: Vec::new(),
    };
    for (pos, &i) in order.iter().enumerate() {
        let lam = evd.values[i];
        let y = linalg::col_to_vec(&evd.vectors, i);
        let mut x = op.lift(&y);
        let nx = wnorm(&w, &x);
        let ax = op.apply_projected(&x);
        let r: Vec<C64> = ax.iter().zip(&x).map(|(a, b)| a - lam * b).collect();
        let residual = wnorm(&w, &r) / nx;
        let div = node_divergence(&op.grid, op.mode.m, op.kz, &x);
        let div_score = wnorm(&op.grid.weights, &div) / nx;
        let drift = fine_ev.iter().map(|mu| (mu - lam).norm()).fold(f64::INFINITY, f64::min);
        let scale = 1.0 + lam.norm();
        let keep = residual <= RESIDUAL_TOL * scale && div_score <= DIV_TOL && drift <= DRIFT_TOL * scale;
        rep.eigenvalues.push(lam);
        rep.residuals.push(residual);
        rep.div_scores.push(div_score);
        rep.resolution_drift.push(drift);
        if keep {
            normalise(&w, &mut x);
            rep.retained.push(pos);
            rep.vectors.push(x);
        }
    }
    Ok(rep)
}

/// Full eigendecomposition of `op` with spurious pairs filtered out.
///
/// A pair is retained when its residual is at most `RESIDUAL_TOL·(1+|λ|)`,
/// its divergence score at most `DIV_TOL`, and an eigenvalue within
/// `DRIFT_TOL·(1+|λ|)` exists at twice the radial resolution. For a block
/// operator the two diagonal blocks are solved separately and eigenvectors
/// are padded with zeros in the other block.
pub fn mode_spectrum(op: &ModeOperator) -> Result<EigenReport> {
    let parts = op.split();
    if parts.len() == 1 {
        return single_spectrum(op);
    }
    let reps = parts.iter().map(single_spectrum).collect::<Result<Vec<_>>>()?;
    let n = op.field_len();
    let mut entries: Vec<(C64, usize, usize)> = Vec::new();
    for (b, rep) in reps.iter().enumerate() {
        entries.extend(rep.eigenvalues.iter().enumerate().map(|(i, l)| (*l, b, i)));
    }
    entries.sort_by(|a, b| by_real_part_desc(&a.0, &b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut out = EigenReport {
        mode: op.mode,
        kind: op.kind,
        nr: op.grid.nr,
        eigenvalues: Vec::new(),
        residuals: Vec::new(),
        div_scores: Vec::new(),
        resolution_drift: Vec::new(),
        blocks: Vec::new(),
        retained: Vec::new(),
        vectors: Vec::new(),
    };
    for (pos, &(lam, b, i)) in entries.iter().enumerate() {
        let rep = &reps[b];
        out.eigenvalues.push(lam);
        out.residuals.push(rep.residuals[i]);
        out.div_scores.push(rep.div_scores[i]);
        out.resolution_drift.push(rep.resolution_drift[i]);
        out.blocks.push(rep.blocks[i]);
        if let Ok(slot) = rep.retained.binary_search(&i) {
            let mut x = vec![linalg::ZERO; 2 * n];
            x[b * n..(b + 1) * n].copy_from_slice(&rep.vectors[slot]);
            out.retained.push(pos);
            out.vectors.push(x);
        }
    }
    Ok(out)
}

/// Modes visited by a scan: `0 ≤ m ≤ mmax`, `|k| ≤ kmax`, one of each
/// conjugate pair.
pub fn scan_modes(modes: &ModeSet) -> Vec<ModeIndex> {
    let mut out = Vec::new();
    for m in 0..=modes.mmax as i32 {
        for k in -(modes.kmax as i32)..=modes.kmax as i32 {
            let md = ModeIndex::new(m, k);
            if md.is_canonical() {
                out.push(md);
            }
        }
    }
    out
}

fn top_eigenvalue(
    kind: OperatorKind,
    mode: ModeIndex,
    profile: &TCProfile,
    grid: &Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<C64> {
    let op = assemble_kz(kind, mode, modes.kz(mode.k), profile, grid.clone())?;
    let ev = linalg::eigenvalues(&op.reduced).map_err(|e| eig_err(mode, e))?;
    ev.into_iter().min_by(by_real_part_desc).ok_or_else(|| eig_err(mode, Error::Linalg("empty spectrum".into())))
}

/// Rightmost eigenvalue of every scanned mode (unfiltered), in scan order.
pub fn scan_top_eigenvalues(
    kind: OperatorKind,
    profile: &TCProfile,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<Vec<(ModeIndex, C64)>> {
    let list = scan_modes(modes);
    list.par_iter().map(|&md| top_eigenvalue(kind, md, profile, &grid, modes).map(|l| (md, l))).collect()
}

/// Globally rightmost retained pair over the scan window.
///
/// Modes are first ranked by their unfiltered rightmost eigenvalue; full
/// filtered spectra are then computed in that order until the best retained
/// leader is at least the next mode's unfiltered bound. For a block operator
/// both blocks are scanned and the report is the block spectrum of the
/// winning mode, so `leader_block` names the winning block.
pub fn rightmost_eigen(
    kind: OperatorKind,
    profile: &TCProfile,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<EigenReport> {
    if let OperatorKind::Block { nu, eps } = kind {
        let v = rightmost_eigen(OperatorKind::LinNs { nu }, profile, grid.clone(), modes)?;
        let b = rightmost_eigen(OperatorKind::Dynamo { eps }, profile, grid.clone(), modes)?;
        let (lv, lb) = (v.leader().unwrap(), b.leader().unwrap());
        let winner = if lb.re >= lv.re { b.mode } else { v.mode };
        let op = assemble_kz(kind, winner, modes.kz(winner.k), profile, grid)?;
        return mode_spectrum(&op);
    }
    let mut tops = scan_top_eigenvalues(kind, profile, grid.clone(), modes)?;
    // Stable sort keeps scan order among ties.
    tops.sort_by(|a, b| by_real_part_desc(&a.1, &b.1));
    let mut best: Option<EigenReport> = None;
    for (i, &(md, _)) in tops.iter().enumerate() {
        let op = assemble_kz(kind, md, modes.kz(md.k), profile, grid.clone())?;
        let rep = mode_spectrum(&op)?;
        let better = match (&best, rep.leader()) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(b), Some(l)) => l.re > b.leader().unwrap().re,
        };
        if better {
            best = Some(rep);
        }
        if let (Some(b), Some(next)) = (&best, tops.get(i + 1)) {
            if b.leader().unwrap().re >= next.1.re {
                break;
            }
        }
    }
    best.ok_or_else(|| {
        Error::NoRetained(format!("{} over m ≤ {}, |k| ≤ {} at Nr = {}", kind.label(), modes.mmax, modes.kmax, grid.nr))
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub eps: f64,
    pub leader: Option<C64>,
    pub mode: Option<ModeIndex>,
    /// Scan window actually used after widening.
    pub window: ModeSet,
    pub residual: Option<f64>,
    pub drift: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fit of `log Re λ` against `log ε` over the points with `Re λ > 0`.
    pub fit: LineFit,
    pub points: Vec<ScalingPoint>,
}

impl ScalingFit {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }
}

/// Widening cap for either scan direction.
const MAX_WINDOW: usize = 64;

fn on_boundary(md: ModeIndex, w: &ModeSet) -> (bool, bool) {
    (md.m.unsigned_abs() as usize >= w.mmax, md.k.unsigned_abs() as usize >= w.kmax)
}

fn scaling_point(profile: &TCProfile, eps: f64, grid: &Arc<RadialGrid>, modes: &ModeSet) -> Result<ScalingPoint> {
    let mut window = *modes;
    loop {
        let rep = match rightmost_eigen(OperatorKind::Dynamo { eps }, profile, grid.clone(), &window) {
            Ok(r) => r,
            Err(Error::NoRetained(msg)) => {
                return Ok(ScalingPoint {
                    eps,
                    leader: None,
                    mode: None,
                    window,
                    residual: None,
                    drift: None,
                    note: Some(msg),
                })
            }
            Err(e) => return Err(e),
        };
        let (bm, bk) = on_boundary(rep.mode, &window);
        let capped = (bm && window.mmax >= MAX_WINDOW) || (bk && window.kmax >= MAX_WINDOW);
        if (bm || bk) && !capped {
            if bm {
                window.mmax = (window.mmax + window.mmax.max(8) / 2).min(MAX_WINDOW);
            }
            if bk {
                window.kmax = (window.kmax + window.kmax.max(8) / 2).min(MAX_WINDOW);
            }
            continue;
        }
        let i = rep.leader_index().unwrap();
        let lam = rep.eigenvalues[i];
        let mut note = None;
        if capped {
            note = Some(format!("leader {} on the capped scan boundary", rep.mode));
        } else if lam.re <= 0.0 {
            note = Some("no growing mode".to_string());
        }
        return Ok(ScalingPoint {
            eps,
            leader: Some(lam),
            mode: Some(rep.mode),
            window,
            residual: Some(rep.residuals[i]),
            drift: Some(rep.resolution_drift[i]),
            note,
        });
    }
}

/// Leaders of the magnetic block for each `ε` and a log-log fit of their real
/// parts. Scan windows grow until each leader lies strictly inside.
pub fn epsilon_scaling_sweep(
    profile: &TCProfile,
    eps_list: &[f64],
    modes: &ModeSet,
    grid: Arc<RadialGrid>,
) -> Result<ScalingFit> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 values of eps, got {}", eps_list.len())));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("eps values must be positive and finite".into()));
    }
    let lo = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 - 1e-12 {
        return Err(Error::InvalidArgument(format!("eps values span {:.2} decades, need 1.5", (hi / lo).log10())));
    }
    let points = eps_list.iter().map(|&eps| scaling_point(profile, eps, &grid, modes)).collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) =
        points.iter().filter_map(|p| p.leader.filter(|l| l.re > 0.0).map(|l| (p.eps.ln(), l.re.ln()))).unzip();
    if x.len() < 4 {
        return Err(Error::NoRetained(format!(
            "only {} of {} eps values have a growing leader",
            x.len(),
            points.len()
        )));
    }
    let fit = linear_fit(&x, &y)?;
    Ok(ScalingFit { fit, points })
}

/// Fits `log Re λ` against `log ε` for precomputed leaders.
pub fn scaling_fit(eps: &[f64], re_lambda: &[f64]) -> Result<LineFit> {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = re_lambda.iter().map(|l| l.ln()).collect();
    linear_fit(&x, &y)
}

#[cfg(test)]
mod tests;
