//! Functional calculus of the shifted operator `A_η = A − (λ + η)I` on the
//! reduced (quadrature-orthonormal) coordinates of one mode: the smoothing
//! envelope `t^α‖(−A_η)^α e^{A_η t}‖₂` and the norm of `(−A_η)^{−α}∇·`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_radial_grid, ModeIndex, ModeSet, RadialGrid};
use crate::linalg::{self, CMat};
use crate::oper::{assemble_kz, ModeOperator, OperatorKind};
use crate::steady::TCProfile;

/// Eigenvector-matrix condition number above which the eigendecomposition
/// route is abandoned.
pub const MAX_EIGVEC_COND: f64 = 1e12;

/// Extra shift beyond the leader.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta {
    Absolute(f64),
    /// Multiple of `|Re λ|`.
    Relative(f64),
}

/// How matrix functions are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calculus {
    /// Eigendecomposition unless its eigenvector matrix is too ill
    /// conditioned, then Padé exponential and logarithm.
    Auto,
    Eigen,
    PadeLog,
}

#[derive(Clone, Debug)]
enum Route {
    Eigen { mu: Vec<C64>, v: CMat, vinv: CMat },
    PadeLog { log_neg: CMat },
}

/// `A_η` together with what is needed to evaluate functions of it.
#[derive(Clone, Debug)]
pub struct ShiftedOperator {
    pub a_eta: CMat,
    /// Real part of the rightmost eigenvalue of the unshifted matrix.
    pub lambda: f64,
    pub eta: f64,
    /// Largest real part in the spectrum of `A_η`.
    pub spectral_abscissa: f64,
    /// Largest eigenvalue of the Hermitian part of `A_η`.
    pub numerical_abscissa: f64,
    pub eigvec_cond: f64,
    pub method: Calculus,
    route: Route,
}

impl ShiftedOperator {
    /// Shifts `a` by its rightmost real part plus `eta`.
    pub fn new(a: &CMat, eta: Eta, method: Calculus) -> Result<Self> {
        let ev = linalg::eigenvalues(a)?;
        let lambda = ev.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let eta = match eta {
            Eta::Absolute(e) => e,
            Eta::Relative(f) => f * lambda.abs(),
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("shift eta must be positive, got {eta}")));
        }
        let a_eta = linalg::shift(a, C64::new(-(lambda + eta), 0.0));
        Self::build(a_eta, lambda, eta, method)
    }

    /// Uses `a_eta` as given; its spectrum must lie in the open left half-plane.
    pub fn unshifted(a_eta: &CMat, method: Calculus) -> Result<Self> {
        Self::build(a_eta.clone(), 0.0, 0.0, method)
    }

    fn build(a_eta: CMat, lambda: f64, eta: f64, method: Calculus) -> Result<Self> {
        let evd = linalg::eigen(&a_eta)?;
        let spectral_abscissa = evd.values.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if spectral_abscissa >= 0.0 {
            return Err(Error::Precondition(format!(
                "shifted operator has spectral abscissa {spectral_abscissa:.3e} >= 0"
            )));
        }
        let herm = linalg::scale(&(&a_eta + a_eta.adjoint()), C64::new(0.5, 0.0));
        let numerical_abscissa = herm
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Linalg(format!("hermitian eigenvalues: {e:?}")))?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let eigvec_cond = linalg::cond2(&evd.vectors)?;
        let use_eigen = match method {
            Calculus::Eigen => true,
            Calculus::PadeLog => false,
            Calculus::Auto => eigvec_cond <= MAX_EIGVEC_COND,
        };
        let route = if use_eigen {
            let vinv = linalg::inverse(&evd.vectors)?;
            Route::Eigen { mu: evd.values, v: evd.vectors, vinv }
        } else {
            let neg = linalg::scale(&a_eta, C64::new(-1.0, 0.0));
            Route::PadeLog { log_neg: linalg::logm(&neg)? }
        };
        let method = if use_eigen { Calculus::Eigen } else { Calculus::PadeLog };
        Ok(Self { a_eta, lambda, eta, spectral_abscissa, numerical_abscissa, eigvec_cond, method, route })
    }

    pub fn dim(&self) -> usize {
        self.a_eta.nrows()
    }

    fn eigen_fn(mu: &[C64], v: &CMat, vinv: &CMat, f: impl Fn(C64) -> C64) -> CMat {
        let n = mu.len();
        let vf = CMat::from_fn(n, n, |i, j| v[(i, j)] * f(mu[j]));
        &vf * vinv
    }

    /// `(−A_η)^α` on the principal branch; `α` may be negative.
    pub fn frac_power(&self, alpha: f64) -> Result<CMat> {
        match &self.route {
            Route::Eigen { mu, v, vinv } => Ok(Self::eigen_fn(mu, v, vinv, |m| (-m).powf(alpha))),
            Route::PadeLog { log_neg } => linalg::expm(&linalg::scale(log_neg, C64::new(alpha, 0.0))),
        }
    }

    /// `e^{A_η t}`.
    pub fn exp(&self, t: f64) -> Result<CMat> {
        match &self.route {
            Route::Eigen { mu, v, vinv } => Ok(Self::eigen_fn(mu, v, vinv, |m| (m * t).exp())),
            Route::PadeLog { .. } => linalg::expm(&linalg::scale(&self.a_eta, C64::new(t, 0.0))),
        }
    }

    /// `(−A_η)^α e^{A_η t}`.
    pub fn smoothing(&self, alpha: f64, t: f64) -> Result<CMat> {
        match &self.route {
            Route::Eigen { mu, v, vinv } => Ok(Self::eigen_fn(mu, v, vinv, |m| {
                if alpha == 0.0 {
                    (m * t).exp()
                } else {
                    (-m).powf(alpha) * (m * t).exp()
                }
            })),
            Route::PadeLog { .. } => Ok(&self.frac_power(alpha)? * &self.exp(t)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSample {
    pub t: f64,
    /// `‖(−A_η)^α e^{A_η t}‖₂`.
    pub norm: f64,
    /// `t^α` times `norm`.
    pub weighted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub alpha: f64,
    pub lambda: f64,
    pub eta: f64,
    pub spectral_abscissa: f64,
    pub numerical_abscissa: f64,
    pub eigvec_cond: f64,
    pub method: Calculus,
    pub samples: Vec<SemigroupSample>,
    pub sup: f64,
    pub t_at_sup: f64,
}

fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("time grid must be non-empty with positive entries".into()));
    }
    Ok(())
}

fn check_alpha(alpha: f64, lo: f64, lo_open: bool) -> Result<()> {
    let ok = alpha.is_finite() && alpha < 1.0 && if lo_open { alpha > lo } else { alpha >= lo };
    if !ok {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside its admissible range")));
    }
    Ok(())
}

/// Smoothing envelope of an already shifted operator.
pub fn semigroup_envelope(s: &ShiftedOperator, alpha: f64, t_grid: &[f64]) -> Result<SemigroupReport> {
    check_alpha(alpha, 0.0, false)?;
    check_times(t_grid)?;
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let norm = linalg::norm2(&s.smoothing(alpha, t)?)?;
        samples.push(SemigroupSample { t, norm, weighted: t.powf(alpha) * norm });
    }
    let (sup, t_at_sup) =
        samples
            .iter()
            .fold((f64::NEG_INFINITY, f64::NAN), |acc, x| if x.weighted > acc.0 { (x.weighted, x.t) } else { acc });
    Ok(SemigroupReport {
        alpha,
        lambda: s.lambda,
        eta: s.eta,
        spectral_abscissa: s.spectral_abscissa,
        numerical_abscissa: s.numerical_abscissa,
        eigvec_cond: s.eigvec_cond,
        method: s.method,
        samples,
        sup,
        t_at_sup,
    })
}

/// `sup_t t^α ‖(−A_η)^α e^{A_η t}‖₂` over `t_grid` for the reduced operator
/// of `op`, with `λ` its rightmost real part.
pub fn semigroup_smoothing_check(
    op: &ModeOperator,
    alpha: f64,
    eta: Eta,
    t_grid: &[f64],
    method: Calculus,
) -> Result<SemigroupReport> {
    let s = ShiftedOperator::new(&op.reduced, eta, method)?;
    semigroup_envelope(&s, alpha, t_grid)
}

/// Cylindrical gradient tensor `∂_a x_b` of a stacked node vector on one
/// mode, rows ordered `(a, b)` with `a, b ∈ (r, θ, z)`.
fn gradient_tensor_matrix(grid: &RadialGrid, m: i32, kz: f64) -> CMat {
    let n = grid.len();
    let mut g = linalg::zeros(9 * n, 3 * n);
    let row = |a: usize, b: usize, i: usize| (3 * a + b) * n + i;
    for i in 0..n {
        let r = grid.nodes[i];
        let im_r = C64::new(0.0, m as f64 / r);
        for b in 0..3 {
            for j in 0..n {
                g[(row(0, b, i), b * n + j)] = C64::new(grid.d1.get(i, j), 0.0);
            }
            g[(row(1, b, i), b * n + i)] = im_r;
            g[(row(2, b, i), b * n + i)] = C64::new(0.0, kz);
        }
        g[(row(1, 0, i), n + i)] += C64::new(-1.0 / r, 0.0);
        g[(row(1, 1, i), i)] += C64::new(1.0 / r, 0.0);
    }
    g
}

/// `(G Z)` per subspace, stacked block-diagonally, and the tensor weights.
fn gradient_of_basis(op: &ModeOperator) -> (CMat, Vec<f64>) {
    let grid = &op.grid;
    let g = gradient_tensor_matrix(grid, op.mode.m, op.kz);
    let rows: usize = op.subspaces.len() * 9 * grid.len();
    let cols: usize = op.subspaces.iter().map(|s| s.dim()).sum();
    let mut out = linalg::zeros(rows, cols);
    let mut c0 = 0;
    for (b, s) in op.subspaces.iter().enumerate() {
        let gz = &g * &s.basis;
        for j in 0..gz.ncols() {
            for i in 0..gz.nrows() {
                out[(b * 9 * grid.len() + i, c0 + j)] = gz[(i, j)];
            }
        }
        c0 += s.dim();
    }
    let w: Vec<f64> = (0..rows / grid.len()).flat_map(|_| grid.weights.iter().copied()).collect();
    (out, w)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FracGradReport {
    pub alpha: f64,
    pub lambda: f64,
    pub eta: f64,
    /// `‖(−A_η)^{−α} ∇·‖` from L² tensors to L² fields.
    pub norm: f64,
    pub method: Calculus,
}

/// Reduced coordinates of `(−A_η)^{−α} Π ∇·H` for a tensor field `H` given
/// at the nodes (9 components per field block, ordered as the gradient).
/// The divergence is taken weakly against the admissible basis.
pub fn inverse_frac_grad_apply(op: &ModeOperator, s: &ShiftedOperator, alpha: f64, h: &[C64]) -> Result<Vec<C64>> {
    let (gz, w) = gradient_of_basis(op);
    if h.len() != gz.nrows() {
        return Err(Error::ShapeMismatch { expected: gz.nrows(), got: h.len() });
    }
    let wh: Vec<C64> = h.iter().zip(&w).map(|(x, w)| -x * *w).collect();
    let div = linalg::matvec_adj(&gz, &wh);
    Ok(linalg::matvec(&s.frac_power(-alpha)?, &div))
}

fn frac_grad_norm(op: &ModeOperator, s: &ShiftedOperator, alpha: f64) -> Result<FracGradReport> {
    check_alpha(alpha, 0.5, true)?;
    let (gz, w) = gradient_of_basis(op);
    let wgz = CMat::from_fn(gz.nrows(), gz.ncols(), |i, j| gz[(i, j)] * w[i]);
    let k = gz.adjoint() * &wgz;
    let evd = k.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Linalg(format!("hermitian eigen: {e:?}")))?;
    let sv = evd.S().column_vector();
    let u = evd.U();
    let l = CMat::from_fn(k.nrows(), k.ncols(), |i, j| u[(i, j)] * sv[j].re.max(0.0).sqrt());
    let x = s.frac_power(-alpha)?;
    let norm = linalg::norm2(&(&x * &l))?;
    Ok(FracGradReport { alpha, lambda: s.lambda, eta: s.eta, norm, method: s.method })
}

/// Operator norm of `(−A_η)^{−α}∇·` on L² tensor fields, `α ∈ (1/2, 1)`.
pub fn inverse_frac_grad_check(op: &ModeOperator, alpha: f64, eta: Eta, method: Calculus) -> Result<FracGradReport> {
    let s = ShiftedOperator::new(&op.reduced, eta, method)?;
    frac_grad_norm(op, &s, alpha)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingLevel {
    pub nr: usize,
    pub semigroup: Vec<SemigroupReport>,
    pub frac_grad: Vec<FracGradReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingStudy {
    pub mode: ModeIndex,
    pub kind: OperatorKind,
    pub levels: Vec<SmoothingLevel>,
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

impl SmoothingStudy {
    /// Relative change of each semigroup sup between the two finest levels.
    pub fn semigroup_changes(&self) -> Vec<f64> {
        let [.., a, b] = self.levels.as_slice() else { return Vec::new() };
        a.semigroup.iter().zip(&b.semigroup).map(|(x, y)| rel_change(x.sup, y.sup)).collect()
    }

    /// Relative growth of each inverse-gradient norm between the two finest
    /// levels (negative when it shrinks).
    pub fn frac_grad_growth(&self) -> Vec<f64> {
        let [.., a, b] = self.levels.as_slice() else { return Vec::new() };
        a.frac_grad.iter().zip(&b.frac_grad).map(|(x, y)| (y.norm - x.norm) / x.norm).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.semigroup.iter().all(|r| r.sup.is_finite()) && l.frac_grad.iter().all(|r| r.norm.is_finite()))
    }
}

/// Semigroup envelopes and inverse-gradient norms of one mode operator at
/// several radial resolutions.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_study(
    kind: OperatorKind,
    mode: ModeIndex,
    modes: &ModeSet,
    profile: &TCProfile,
    grid: &RadialGrid,
    nrs: &[usize],
    alphas: &[f64],
    eta: Eta,
    t_grid: &[f64],
    method: Calculus,
) -> Result<SmoothingStudy> {
    let mut levels = Vec::with_capacity(nrs.len());
    for &nr in nrs {
        let g = Arc::new(build_radial_grid(grid.r1, grid.r2, nr)?);
        let op = assemble_kz(kind, mode, modes.kz(mode.k), profile, g)?;
        let s = ShiftedOperator::new(&op.reduced, eta, method)?;
        let semigroup = alphas.iter().map(|&a| semigroup_envelope(&s, a, t_grid)).collect::<Result<Vec<_>>>()?;
        let frac_grad =
            alphas.iter().filter(|&&a| a > 0.5).map(|&a| frac_grad_norm(&op, &s, a)).collect::<Result<Vec<_>>>()?;
        levels.push(SmoothingLevel { nr, semigroup, frac_grad });
    }
    Ok(SmoothingStudy { mode, kind, levels })
}

/// Logarithmically spaced times.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn diag(v: &[f64]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { ZERO })
    }

    #[test]
    fn diagonal_closed_form() {
        let a = diag(&[-1.0, -2.0]);
        for method in [Calculus::Eigen, Calculus::PadeLog] {
            let s = ShiftedOperator::unshifted(&a, method).unwrap();
            let n = linalg::norm2(&s.smoothing(0.5, 1.0).unwrap()).unwrap();
            let expect = (-1.0f64).exp().max(2f64.sqrt() * (-2.0f64).exp());
            assert!((n - expect).abs() < 1e-12, "{method:?}: {n}");
        }
    }

    #[test]
    fn alpha_zero_starts_at_one() {
        let a = CMat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => C64::new(-1.0, 0.0),
            (1, 1) => C64::new(-3.0, 0.5),
            (2, 2) => C64::new(-5.0, 0.0),
            (0, 1) => C64::new(0.7, 0.0),
            (1, 2) => C64::new(0.2, -0.1),
            _ => ZERO,
        });
        let s = ShiftedOperator::unshifted(&a, Calculus::Eigen).unwrap();
        let r = semigroup_envelope(&s, 0.0, &log_times(1e-8, 1e-6, 3)).unwrap();
        assert!((r.samples[0].norm - 1.0).abs() < 1e-6);
        assert!(r.sup.is_finite());
    }

    #[test]
    fn routes_agree_on_a_non_normal_matrix() {
        let a = CMat::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(-(1.0 + i as f64), 0.3 * i as f64)
            } else if j == i + 1 {
                C64::new(2.0, 0.0)
            } else {
                ZERO
            }
        });
        let e = ShiftedOperator::unshifted(&a, Calculus::Eigen).unwrap();
        let p = ShiftedOperator::unshifted(&a, Calculus::PadeLog).unwrap();
        for alpha in [-0.75, 0.3, 0.95] {
            let d = linalg::frobenius(&(&e.frac_power(alpha).unwrap() - &p.frac_power(alpha).unwrap()));
            assert!(d < 1e-9, "alpha {alpha}: {d}");
        }
        let d = linalg::frobenius(&(&e.exp(0.7).unwrap() - &p.exp(0.7).unwrap()));
        assert!(d < 1e-10);
        // Powers compose: (−A)^{1/2} (−A)^{1/2} = −A.
        let h = e.frac_power(0.5).unwrap();
        let d = linalg::frobenius(&(&h * &h + &a));
        assert!(d < 1e-10);
    }

    #[test]
    fn shift_sets_the_abscissa() {
        let a = diag(&[0.5, -1.0, -4.0]);
        let s = ShiftedOperator::new(&a, Eta::Relative(0.1), Calculus::Auto).unwrap();
        assert!((s.lambda - 0.5).abs() < 1e-14);
        assert!((s.eta - 0.05).abs() < 1e-14);
        assert!((s.spectral_abscissa + 0.05).abs() < 1e-12);
        assert_eq!(s.method, Calculus::Eigen);
        assert!(ShiftedOperator::unshifted(&a, Calculus::Auto).is_err());
        assert!(ShiftedOperator::new(&a, Eta::Absolute(0.0), Calculus::Auto).is_err());
    }

    #[test]
    fn log_times_are_geometric() {
        let t = log_times(1e-3, 10.0, 5);
        assert!((t[0] - 1e-3).abs() < 1e-18 && (t[4] - 10.0).abs() < 1e-12);
        assert!((t[1] / t[0] - 10.0).abs() < 1e-9);
    }
}
