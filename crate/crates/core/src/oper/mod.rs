//! Per-mode realisations of the linearised operator about the Taylor–Couette
//! profile, the Leray projector, and the quadratic terms.
//!
//! Velocity block (A₁): `P(−(u·∇)v − (v·∇)u + νΔv)` with `v = 0` at the walls.
//! Magnetic block (A₂): `−(u·∇)B + (B·∇)u + εΔB` with perfectly conducting
//! walls. With `σ = mV/r + kW` the transport parts on one mode are
//!
//! ```text
//! A₂:  r: −iσB_r
//!      θ: −iσB_θ + (V' − V/r) B_r
//!      z: −iσB_z + W' B_r
//! A₁:  r: −iσv_r + (2V/r) v_θ
//!      θ: −iσv_θ − (V/r + V') v_r
//!      z: −iσv_z − W' v_r
//! ```

mod leray;
mod nonlinear;
mod subspace;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::BcTag;
use crate::grid::{ModeIndex, ModeSet, RadialGrid, RealMatrix};
use crate::linalg::{self, CMat, ZERO};
use crate::steady::TCProfile;

pub use leray::{leray_matrix, leray_project};
pub use nonlinear::{apply_nonlinear_m, apply_nonlinear_n, hodge_dissipativity, tensor_divergence, NonlinearOptions};
pub use subspace::{constraint_matrix, Subspace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    Dynamo { eps: f64 },
    LinNs { nu: f64 },
    Block { nu: f64, eps: f64 },
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::Dynamo { .. } => "dynamo",
            OperatorKind::LinNs { .. } => "linns",
            OperatorKind::Block { .. } => "block",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad =
            |name: &str, v: f64| Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
        match *self {
            OperatorKind::Dynamo { eps } if !(eps > 0.0 && eps.is_finite()) => bad("eps", eps),
            OperatorKind::LinNs { nu } if !(nu > 0.0 && nu.is_finite()) => bad("nu", nu),
            OperatorKind::Block { nu, .. } if !(nu > 0.0 && nu.is_finite()) => bad("nu", nu),
            OperatorKind::Block { eps, .. } if !(eps > 0.0 && eps.is_finite()) => bad("eps", eps),
            _ => Ok(()),
        }
    }
}

/// Whether the mean magnetic mode keeps its two flux-carrying harmonic
/// fields. They are exact zero-eigenvalue modes decoupled from everything
/// else, so the lab removes them; tests may keep them.
pub(crate) fn excludes_flux(mode: ModeIndex) -> bool {
    mode.is_mean()
}

/// Dense realisation of the linearised operator on one Fourier mode.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub mode: ModeIndex,
    pub kind: OperatorKind,
    pub profile: TCProfile,
    pub grid: Arc<RadialGrid>,
    pub kz: f64,
    /// Collocation matrix with boundary rows replaced by the boundary
    /// conditions. For the velocity block the interior rows are the Leray
    /// projector composed with the momentum rows.
    pub matrix: CMat,
    pub bc_rows: Vec<usize>,
    /// Momentum/induction rows at every node, before projection or row
    /// replacement.
    pub raw: CMat,
    /// Admissible subspaces: velocity then magnetic for a block operator.
    pub subspaces: Vec<Subspace>,
    /// Galerkin restriction of `raw` to the admissible subspace(s); the
    /// block operator is block diagonal.
    pub reduced: CMat,
}

impl ModeOperator {
    /// Size of one stacked field vector, `3(Nr+1)`.
    pub fn field_len(&self) -> usize {
        3 * self.grid.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced.nrows()
    }

    /// Lifts reduced coordinates to stacked node vectors.
    pub fn lift(&self, y: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.matrix.nrows());
        let mut off = 0;
        for s in &self.subspaces {
            out.extend(s.lift(&y[off..off + s.dim()]));
            off += s.dim();
        }
        out
    }

    /// Coordinates of the orthogonal projection of `x` onto the subspace.
    pub fn coords(&self, x: &[C64]) -> Vec<C64> {
        let n = self.field_len();
        let mut out = Vec::with_capacity(self.reduced_dim());
        for (i, s) in self.subspaces.iter().enumerate() {
            out.extend(s.coords(&x[i * n..(i + 1) * n]));
        }
        out
    }

    /// Quadrature weights matching the rows of `matrix`.
    pub fn weights(&self) -> Vec<f64> {
        self.subspaces.iter().flat_map(|s| s.weights.iter().copied()).collect()
    }

    /// The diagonal pieces of a block operator (velocity, magnetic); a
    /// single-field operator is returned as is.
    pub fn split(&self) -> Vec<ModeOperator> {
        let OperatorKind::Block { nu, eps } = self.kind else {
            return vec![self.clone()];
        };
        let n = self.field_len();
        let d0 = self.subspaces[0].dim();
        let sub = |a: &CMat, lo: usize, hi: usize| a.as_ref().submatrix(lo, lo, hi - lo, hi - lo).to_owned();
        let kinds = [OperatorKind::LinNs { nu }, OperatorKind::Dynamo { eps }];
        (0..2)
            .map(|i| {
                let (lo, hi) = (i * n, (i + 1) * n);
                let (rlo, rhi) = if i == 0 { (0, d0) } else { (d0, self.reduced_dim()) };
                ModeOperator {
                    mode: self.mode,
                    kind: kinds[i],
                    profile: self.profile,
                    grid: self.grid.clone(),
                    kz: self.kz,
                    matrix: sub(&self.matrix, lo, hi),
                    bc_rows: self.bc_rows.iter().filter(|&&r| r >= lo && r < hi).map(|r| r - lo).collect(),
                    raw: sub(&self.raw, lo, hi),
                    subspaces: vec![self.subspaces[i].clone()],
                    reduced: sub(&self.reduced, rlo, rhi),
                }
            })
            .collect()
    }

    /// Projected action `Π(raw · x)` on a node vector.
    pub fn apply_projected(&self, x: &[C64]) -> Vec<C64> {
        let ax = linalg::matvec(&self.raw, x);
        self.lift(&self.coords(&ax))
    }
}

fn block_l(grid: &RadialGrid, m: i32, kz: f64) -> RealMatrix {
    let n = grid.len();
    let mut l = RealMatrix::zeros(n);
    let m2 = (m as f64).powi(2);
    for i in 0..n {
        let r = grid.nodes[i];
        for j in 0..n {
            l.set(i, j, grid.d2.get(i, j) + grid.d1.get(i, j) / r);
        }
        l.set(i, i, l.get(i, i) - m2 / (r * r) - kz * kz);
    }
    l
}

struct Assembler<'a> {
    grid: &'a RadialGrid,
    a: CMat,
}

impl<'a> Assembler<'a> {
    fn new(grid: &'a RadialGrid, size: usize) -> Self {
        Self { grid, a: linalg::zeros(size, size) }
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    fn add_real(&mut self, bi: usize, bj: usize, mat: &RealMatrix, coef: C64) {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let v = mat.get(i, j);
                if v != 0.0 {
                    self.a[(bi * n + i, bj * n + j)] += coef * v;
                }
            }
        }
    }

    fn add_diag(&mut self, bi: usize, bj: usize, f: impl Fn(f64) -> C64) {
        let n = self.n();
        for i in 0..n {
            self.a[(bi * n + i, bj * n + i)] += f(self.grid.nodes[i]);
        }
    }

    /// `coef · Δ_vec` on the component blocks starting at `base`.
    fn add_vector_laplacian(&mut self, base: usize, m: i32, kz: f64, coef: f64) {
        let l = block_l(self.grid, m, kz);
        let c = C64::new(coef, 0.0);
        let two_im = C64::new(0.0, 2.0 * m as f64);
        for comp in 0..3 {
            self.add_real(base + comp, base + comp, &l, c);
        }
        self.add_diag(base, base, |r| -c / (r * r));
        self.add_diag(base + 1, base + 1, |r| -c / (r * r));
        self.add_diag(base, base + 1, |r| -c * two_im / (r * r));
        self.add_diag(base + 1, base, |r| c * two_im / (r * r));
    }
}

fn sigma(p: &TCProfile, m: i32, kz: f64, r: f64) -> f64 {
    m as f64 * p.omega(r) + kz * p.w(r)
}

/// Induction rows at every node (no boundary rows).
pub fn raw_dynamo(grid: &RadialGrid, profile: &TCProfile, m: i32, kz: f64, eps: f64) -> CMat {
    let mut asm = Assembler::new(grid, 3 * grid.len());
    let p = *profile;
    for c in 0..3 {
        asm.add_diag(c, c, |r| C64::new(0.0, -sigma(&p, m, kz, r)));
    }
    asm.add_diag(1, 0, |r| C64::new(p.dv(r) - p.v(r) / r, 0.0));
    asm.add_diag(2, 0, |r| C64::new(p.dw(r), 0.0));
    asm.add_vector_laplacian(0, m, kz, eps);
    asm.a
}

/// Momentum rows at every node, before projection.
pub fn raw_linns(grid: &RadialGrid, profile: &TCProfile, m: i32, kz: f64, nu: f64) -> CMat {
    let mut asm = Assembler::new(grid, 3 * grid.len());
    let p = *profile;
    for c in 0..3 {
        asm.add_diag(c, c, |r| C64::new(0.0, -sigma(&p, m, kz, r)));
    }
    asm.add_diag(0, 1, |r| C64::new(2.0 * p.v(r) / r, 0.0));
    asm.add_diag(1, 0, |r| C64::new(-(p.v(r) / r + p.dv(r)), 0.0));
    asm.add_diag(2, 0, |r| C64::new(-p.dw(r), 0.0));
    asm.add_vector_laplacian(0, m, kz, nu);
    asm.a
}

/// Replaces the wall rows of `a` (stacked `3(Nr+1)` layout, offset `base`
/// field blocks) with the boundary conditions of `bc`.
fn apply_bc_rows(a: &mut CMat, grid: &RadialGrid, bc: BcTag, base: usize) -> Vec<usize> {
    let n = grid.len();
    let off = base * 3 * n;
    let mut rows = Vec::new();
    for b in [0, grid.nr] {
        for comp in 0..3 {
            let row = off + comp * n + b;
            for j in 0..a.ncols() {
                a[(row, j)] = ZERO;
            }
            match (bc, comp) {
                (BcTag::DirichletVelocity, _) | (BcTag::ConductingMagnetic, 0) | (BcTag::None, _) => {
                    a[(row, row)] = C64::new(1.0, 0.0);
                }
                (BcTag::ConductingMagnetic, 1) => {
                    for j in 0..n {
                        a[(row, off + n + j)] = C64::new(grid.d1.get(b, j) * grid.nodes[j], 0.0);
                    }
                }
                (BcTag::ConductingMagnetic, _) => {
                    for j in 0..n {
                        a[(row, off + 2 * n + j)] = C64::new(grid.d1.get(b, j), 0.0);
                    }
                }
            }
            rows.push(row);
        }
    }
    rows
}

fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = linalg::zeros(na + nb, na + nb);
    for j in 0..na {
        for i in 0..na {
            out[(i, j)] = a[(i, j)];
        }
    }
    for j in 0..nb {
        for i in 0..nb {
            out[(na + i, na + j)] = b[(i, j)];
        }
    }
    out
}

struct Part {
    matrix: CMat,
    raw: CMat,
    bc_rows: Vec<usize>,
    sub: Subspace,
    reduced: CMat,
}

fn dynamo_part(grid: &RadialGrid, profile: &TCProfile, mode: ModeIndex, kz: f64, eps: f64) -> Result<Part> {
    let raw = raw_dynamo(grid, profile, mode.m, kz, eps);
    let mut matrix = raw.clone();
    let bc_rows = apply_bc_rows(&mut matrix, grid, BcTag::ConductingMagnetic, 0);
    let sub = Subspace::build(grid, mode.m, kz, BcTag::ConductingMagnetic, excludes_flux(mode))?;
    let reduced = sub.restrict(&raw);
    Ok(Part { matrix, raw, bc_rows, sub, reduced })
}

fn linns_part(grid: &RadialGrid, profile: &TCProfile, mode: ModeIndex, kz: f64, nu: f64) -> Result<Part> {
    let raw = raw_linns(grid, profile, mode.m, kz, nu);
    let p = leray_matrix(grid, mode.m, kz)?;
    let mut matrix = &p * &raw;
    let bc_rows = apply_bc_rows(&mut matrix, grid, BcTag::DirichletVelocity, 0);
    let sub = Subspace::build(grid, mode.m, kz, BcTag::DirichletVelocity, false)?;
    let reduced = sub.restrict(&raw);
    Ok(Part { matrix, raw, bc_rows, sub, reduced })
}

fn from_parts(
    mode: ModeIndex,
    kind: OperatorKind,
    profile: &TCProfile,
    grid: Arc<RadialGrid>,
    kz: f64,
    parts: Vec<Part>,
) -> ModeOperator {
    let field = 3 * grid.len();
    let mut it = parts.into_iter();
    let first = it.next().expect("at least one part");
    let (matrix, raw, mut bc_rows, mut subspaces, reduced) =
        (first.matrix, first.raw, first.bc_rows, vec![first.sub], first.reduced);
    let (matrix, raw, reduced) = match it.next() {
        None => (matrix, raw, reduced),
        Some(second) => {
            bc_rows.extend(second.bc_rows.iter().map(|r| r + field));
            subspaces.push(second.sub);
            (block_diag(&matrix, &second.matrix), block_diag(&raw, &second.raw), block_diag(&reduced, &second.reduced))
        }
    };
    ModeOperator { mode, kind, profile: *profile, grid, kz, matrix, bc_rows, raw, subspaces, reduced }
}

/// A₂ on one mode.
pub fn assemble_dynamo_block(
    mode: ModeIndex,
    profile: &TCProfile,
    eps: f64,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<ModeOperator> {
    assemble(OperatorKind::Dynamo { eps }, mode, profile, grid, modes)
}

/// A₁ on one mode.
pub fn assemble_linns_block(
    mode: ModeIndex,
    profile: &TCProfile,
    nu: f64,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<ModeOperator> {
    assemble(OperatorKind::LinNs { nu }, mode, profile, grid, modes)
}

/// `A₁ ⊕ A₂` on one mode, velocity block first.
pub fn assemble_block(
    mode: ModeIndex,
    profile: &TCProfile,
    nu: f64,
    eps: f64,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<ModeOperator> {
    assemble(OperatorKind::Block { nu, eps }, mode, profile, grid, modes)
}

/// Assembles the operator of `kind`.
pub fn assemble(
    kind: OperatorKind,
    mode: ModeIndex,
    profile: &TCProfile,
    grid: Arc<RadialGrid>,
    modes: &ModeSet,
) -> Result<ModeOperator> {
    assemble_kz(kind, mode, modes.kz(mode.k), profile, grid)
}

/// As [`assemble`] with the axial wavenumber given directly.
pub fn assemble_kz(
    kind: OperatorKind,
    mode: ModeIndex,
    kz: f64,
    profile: &TCProfile,
    grid: Arc<RadialGrid>,
) -> Result<ModeOperator> {
    kind.validate()?;
    let parts = match kind {
        OperatorKind::Dynamo { eps } => vec![dynamo_part(&grid, profile, mode, kz, eps)?],
        OperatorKind::LinNs { nu } => vec![linns_part(&grid, profile, mode, kz, nu)?],
        OperatorKind::Block { nu, eps } => {
            vec![linns_part(&grid, profile, mode, kz, nu)?, dynamo_part(&grid, profile, mode, kz, eps)?]
        }
    };
    Ok(from_parts(mode, kind, profile, grid, kz, parts))
}
