//! Vector and scalar fields stored as Fourier(θ, z) × radial-node samples,
//! with the cylindrical calculus used throughout the crate.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ModeIndex, ModeSet, RadialGrid};
use crate::linalg::ZERO;

/// Boundary conditions a vector field is expected to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcTag {
    /// `v = 0` at both walls.
    DirichletVelocity,
    /// `B_r = 0`, `∂_r(r B_θ) = 0`, `∂_r B_z = 0` at both walls.
    ConductingMagnetic,
    None,
}

/// Three-component field; component order `(r, θ, z)`.
///
/// Storage is `((comp · nm + im) · nk + ik) · (Nr+1) + j` with `m` running
/// over `−Mmax..=Mmax` and `k` over `−Kmax..=Kmax`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub grid: Arc<RadialGrid>,
    pub modes: ModeSet,
    pub bc: BcTag,
    pub(crate) coeffs: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<RadialGrid>,
    pub modes: ModeSet,
    pub(crate) coeffs: Vec<C64>,
}

macro_rules! modal_access {
    ($ty:ty, $ncomp:expr) => {
        impl $ty {
            pub const NCOMP: usize = $ncomp;

            #[inline]
            pub fn nr1(&self) -> usize {
                self.grid.len()
            }

            #[inline]
            fn offset(&self, comp: usize, mode: ModeIndex) -> usize {
                debug_assert!(comp < $ncomp);
                (comp * self.modes.count() + self.modes.index(mode)) * self.nr1()
            }

            /// Radial profile of one component on one Fourier mode.
            pub fn mode(&self, comp: usize, mode: ModeIndex) -> &[C64] {
                let o = self.offset(comp, mode);
                &self.coeffs[o..o + self.nr1()]
            }

            pub fn mode_mut(&mut self, comp: usize, mode: ModeIndex) -> &mut [C64] {
                let o = self.offset(comp, mode);
                let n = self.nr1();
                &mut self.coeffs[o..o + n]
            }

            /// Contiguous block of one component over all modes.
            pub fn component(&self, comp: usize) -> &[C64] {
                let len = self.modes.count() * self.nr1();
                &self.coeffs[comp * len..(comp + 1) * len]
            }

            pub fn component_mut(&mut self, comp: usize) -> &mut [C64] {
                let len = self.modes.count() * self.nr1();
                &mut self.coeffs[comp * len..(comp + 1) * len]
            }

            pub fn coeffs(&self) -> &[C64] {
                &self.coeffs
            }

            pub fn coeffs_mut(&mut self) -> &mut [C64] {
                &mut self.coeffs
            }

            pub fn max_abs(&self) -> f64 {
                self.coeffs.iter().fold(0.0, |m, v| m.max(v.norm()))
            }

            pub fn is_finite(&self) -> bool {
                self.coeffs.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            }

            pub fn scale_in_place(&mut self, s: f64) {
                for v in &mut self.coeffs {
                    *v *= s;
                }
            }

            pub fn scaled(&self, s: f64) -> Self {
                let mut out = self.clone();
                out.scale_in_place(s);
                out
            }

            /// `self += s · other`.
            pub fn axpy(&mut self, s: f64, other: &Self) {
                assert_eq!(self.coeffs.len(), other.coeffs.len());
                for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
                    *a += b * s;
                }
            }

            /// Modes carrying any nonzero entry, in storage order.
            pub fn active_modes(&self) -> Vec<ModeIndex> {
                self.modes
                    .iter()
                    .filter(|&md| (0..$ncomp).any(|c| self.mode(c, md).iter().any(|v| *v != ZERO)))
                    .collect()
            }

            /// Largest violation of `f(−m,−k) = conj f(m,k)`.
            pub fn reality_defect(&self) -> f64 {
                let mut worst = 0.0f64;
                for c in 0..$ncomp {
                    for md in self.modes.canonical() {
                        let a = self.mode(c, md);
                        let b = self.mode(c, md.conj());
                        for (x, y) in a.iter().zip(b) {
                            worst = worst.max((x - y.conj()).norm());
                        }
                    }
                }
                worst
            }

            /// Overwrites non-canonical modes with the conjugates of their
            /// partners and makes the mean mode real.
            pub fn enforce_reality(&mut self) {
                let canon: Vec<ModeIndex> = self.modes.canonical().collect();
                for c in 0..$ncomp {
                    for &md in &canon {
                        if md.is_mean() {
                            for v in self.mode_mut(c, md) {
                                v.im = 0.0;
                            }
                            continue;
                        }
                        let src: Vec<C64> = self.mode(c, md).iter().map(|v| v.conj()).collect();
                        self.mode_mut(c, md.conj()).copy_from_slice(&src);
                    }
                }
            }
        }
    };
}

modal_access!(SpectralField, 3);
modal_access!(ScalarField, 1);

pub const R: usize = 0;
pub const TH: usize = 1;
pub const Z: usize = 2;

impl SpectralField {
    pub fn zeros(grid: Arc<RadialGrid>, modes: ModeSet, bc: BcTag) -> Self {
        let len = 3 * modes.count() * grid.len();
        Self { grid, modes, bc, coeffs: vec![ZERO; len] }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.grid.clone(), self.modes, self.bc)
    }

    pub fn from_coeffs(grid: Arc<RadialGrid>, modes: ModeSet, bc: BcTag, coeffs: Vec<C64>) -> Result<Self> {
        let len = 3 * modes.count() * grid.len();
        if coeffs.len() != len {
            return Err(Error::ShapeMismatch { expected: len, got: coeffs.len() });
        }
        Ok(Self { grid, modes, bc, coeffs })
    }

    pub fn with_bc(mut self, bc: BcTag) -> Self {
        self.bc = bc;
        self
    }

    /// Stacked `(f_r, f_θ, f_z)` node vector of one mode, length `3(Nr+1)`.
    pub fn mode_vector(&self, mode: ModeIndex) -> Vec<C64> {
        let mut v = Vec::with_capacity(3 * self.nr1());
        for c in 0..3 {
            v.extend_from_slice(self.mode(c, mode));
        }
        v
    }

    pub fn set_mode_vector(&mut self, mode: ModeIndex, v: &[C64]) {
        let n = self.nr1();
        assert_eq!(v.len(), 3 * n);
        for c in 0..3 {
            self.mode_mut(c, mode).copy_from_slice(&v[c * n..(c + 1) * n]);
        }
    }

    /// Real field `x e^{i(mθ+kz)} + c.c.` scaled so that its L² norm equals
    /// the per-mode L² norm of `x`.
    pub fn from_mode_real(grid: Arc<RadialGrid>, modes: ModeSet, bc: BcTag, mode: ModeIndex, x: &[C64]) -> Self {
        let mut f = Self::zeros(grid, modes, bc);
        if mode.is_mean() {
            let re: Vec<C64> = x.iter().map(|v| C64::new(v.re, 0.0)).collect();
            f.set_mode_vector(mode, &re);
        } else {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let a: Vec<C64> = x.iter().map(|v| v * s).collect();
            let b: Vec<C64> = a.iter().map(|v| v.conj()).collect();
            f.set_mode_vector(mode, &a);
            f.set_mode_vector(mode.conj(), &b);
        }
        f
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner_blocks(&self.grid, &self.modes, &self.coeffs, &other.coeffs)
    }

    /// L² norm from the mode sum (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// Largest boundary-condition violation for `self.bc`, relative to the
    /// field scale and to the size of the boundary stencil.
    pub fn boundary_residual(&self) -> f64 {
        boundary_residual(self, self.bc)
    }
}

impl ScalarField {
    pub fn zeros(grid: Arc<RadialGrid>, modes: ModeSet) -> Self {
        let len = modes.count() * grid.len();
        Self { grid, modes, coeffs: vec![ZERO; len] }
    }

    pub fn from_coeffs(grid: Arc<RadialGrid>, modes: ModeSet, coeffs: Vec<C64>) -> Result<Self> {
        let len = modes.count() * grid.len();
        if coeffs.len() != len {
            return Err(Error::ShapeMismatch { expected: len, got: coeffs.len() });
        }
        Ok(Self { grid, modes, coeffs })
    }

    /// Field whose only content is `f(r)` on the given mode.
    pub fn from_profile(grid: Arc<RadialGrid>, modes: ModeSet, mode: ModeIndex, f: impl Fn(f64) -> C64) -> Self {
        let mut s = Self::zeros(grid.clone(), modes);
        let vals = grid.sample_c(f);
        s.mode_mut(0, mode).copy_from_slice(&vals);
        s
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner_blocks(&self.grid, &self.modes, &self.coeffs, &other.coeffs)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

fn inner_blocks(grid: &RadialGrid, modes: &ModeSet, a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len());
    let n = grid.len();
    let mut acc = ZERO;
    for (ca, cb) in a.chunks_exact(n).zip(b.chunks_exact(n)) {
        for ((x, y), w) in ca.iter().zip(cb).zip(&grid.weights) {
            acc += x.conj() * y * *w;
        }
    }
    acc * modes.periodic_area()
}

fn check_same(a: &SpectralField, b: &SpectralField) -> Result<()> {
    if a.coeffs.len() != b.coeffs.len() || a.modes != b.modes || a.grid.nr != b.grid.nr {
        return Err(Error::ShapeMismatch { expected: a.coeffs.len(), got: b.coeffs.len() });
    }
    Ok(())
}

/// `a + b` with the tag of `a`.
pub fn add(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    check_same(a, b)?;
    let mut out = a.clone();
    out.axpy(1.0, b);
    Ok(out)
}

// Per-mode kernels. `kz` is the axial wavenumber k/Lz.

pub(crate) fn div_mode(g: &RadialGrid, m: i32, kz: f64, fr: &[C64], ft: &[C64], fz: &[C64], out: &mut [C64]) {
    let n = g.len();
    let rfr: Vec<C64> = fr.iter().zip(&g.nodes).map(|(f, r)| f * r).collect();
    g.d1.apply_c(&rfr, out);
    let im = C64::new(0.0, m as f64);
    let ik = C64::new(0.0, kz);
    for j in 0..n {
        let r = g.nodes[j];
        out[j] = out[j] / r + im * ft[j] / r + ik * fz[j];
    }
}

pub(crate) fn curl_mode(g: &RadialGrid, m: i32, kz: f64, f: [&[C64]; 3], out: [&mut [C64]; 3]) {
    let n = g.len();
    let [fr, ft, fz] = f;
    let [or, ot, oz] = out;
    let im = C64::new(0.0, m as f64);
    let ik = C64::new(0.0, kz);
    let dfz = g.d1.apply_cv(fz);
    let rft: Vec<C64> = ft.iter().zip(&g.nodes).map(|(f, r)| f * r).collect();
    let drft = g.d1.apply_cv(&rft);
    for j in 0..n {
        let r = g.nodes[j];
        or[j] = im * fz[j] / r - ik * ft[j];
        ot[j] = ik * fr[j] - dfz[j];
        oz[j] = drft[j] / r - im * fr[j] / r;
    }
}

pub(crate) fn grad_mode(g: &RadialGrid, m: i32, kz: f64, phi: &[C64], out: [&mut [C64]; 3]) {
    let [or, ot, oz] = out;
    g.d1.apply_c(phi, or);
    let im = C64::new(0.0, m as f64);
    let ik = C64::new(0.0, kz);
    for j in 0..g.len() {
        ot[j] = im * phi[j] / g.nodes[j];
        oz[j] = ik * phi[j];
    }
}

/// Scalar `Δ_{m,k} f = f'' + f'/r − (m²/r² + k²) f`.
pub(crate) fn lap_mode(g: &RadialGrid, m: i32, kz: f64, f: &[C64], out: &mut [C64]) {
    let d1 = g.d1.apply_cv(f);
    g.d2.apply_c(f, out);
    let m2 = (m as f64).powi(2);
    for j in 0..g.len() {
        let r = g.nodes[j];
        out[j] += d1[j] / r - f[j] * (m2 / (r * r) + kz * kz);
    }
}

pub(crate) fn veclap_mode(g: &RadialGrid, m: i32, kz: f64, f: [&[C64]; 3], out: [&mut [C64]; 3]) {
    let [fr, ft, fz] = f;
    let [or, ot, oz] = out;
    lap_mode(g, m, kz, fr, or);
    lap_mode(g, m, kz, ft, ot);
    lap_mode(g, m, kz, fz, oz);
    let two_im = C64::new(0.0, 2.0 * m as f64);
    for j in 0..g.len() {
        let r2 = g.nodes[j] * g.nodes[j];
        let (a, b) = (fr[j], ft[j]);
        or[j] += (-a - two_im * b) / r2;
        ot[j] += (-b + two_im * a) / r2;
    }
}

fn for_each_mode_vec(
    f: &SpectralField,
    mut op: impl FnMut(ModeIndex, [&[C64]; 3], [&mut [C64]; 3]),
    out: &mut SpectralField,
) {
    let n = f.nr1();
    let len = f.modes.count() * n;
    let (o_r, rest) = out.coeffs.split_at_mut(len);
    let (o_t, o_z) = rest.split_at_mut(len);
    for (idx, md) in f.modes.iter().enumerate() {
        let s = idx * n..(idx + 1) * n;
        let inp = [f.mode(R, md), f.mode(TH, md), f.mode(Z, md)];
        // Every caller is linear per mode; `out` starts zeroed.
        if inp.iter().all(|c| c.iter().all(|v| *v == ZERO)) {
            continue;
        }
        op(md, inp, [&mut o_r[s.clone()], &mut o_t[s.clone()], &mut o_z[s]]);
    }
}

pub fn divergence(f: &SpectralField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid.clone(), f.modes);
    for md in f.modes.iter() {
        if [R, TH, Z].iter().all(|&c| f.mode(c, md).iter().all(|v| *v == ZERO)) {
            continue;
        }
        let kz = f.modes.kz(md.k);
        let mut buf = vec![ZERO; f.nr1()];
        div_mode(&f.grid, md.m, kz, f.mode(R, md), f.mode(TH, md), f.mode(Z, md), &mut buf);
        out.mode_mut(0, md).copy_from_slice(&buf);
    }
    out
}

pub fn curl(f: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(f.grid.clone(), f.modes, BcTag::None);
    let g = f.grid.clone();
    let modes = f.modes;
    for_each_mode_vec(f, |md, inp, o| curl_mode(&g, md.m, modes.kz(md.k), inp, o), &mut out);
    out
}

pub fn gradient(phi: &ScalarField) -> SpectralField {
    let mut out = SpectralField::zeros(phi.grid.clone(), phi.modes, BcTag::None);
    let n = phi.nr1();
    let len = phi.modes.count() * n;
    let (o_r, rest) = out.coeffs.split_at_mut(len);
    let (o_t, o_z) = rest.split_at_mut(len);
    for (idx, md) in phi.modes.iter().enumerate() {
        let s = idx * n..(idx + 1) * n;
        grad_mode(
            &phi.grid,
            md.m,
            phi.modes.kz(md.k),
            phi.mode(0, md),
            [&mut o_r[s.clone()], &mut o_t[s.clone()], &mut o_z[s]],
        );
    }
    out
}

pub fn scalar_laplacian(phi: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(phi.grid.clone(), phi.modes);
    for md in phi.modes.iter() {
        let mut buf = vec![ZERO; phi.nr1()];
        lap_mode(&phi.grid, md.m, phi.modes.kz(md.k), phi.mode(0, md), &mut buf);
        out.mode_mut(0, md).copy_from_slice(&buf);
    }
    out
}

pub fn vector_laplacian(f: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(f.grid.clone(), f.modes, BcTag::None);
    let g = f.grid.clone();
    let modes = f.modes;
    for_each_mode_vec(f, |md, inp, o| veclap_mode(&g, md.m, modes.kz(md.k), inp, o), &mut out);
    out
}

/// Boundary-condition residual of `f` for `bc`, relative to `max|f|` and to
/// the absolute row sum of each boundary stencil.
pub fn boundary_residual(f: &SpectralField, bc: BcTag) -> f64 {
    let g = &f.grid;
    let scale = f.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let n = g.nr;
    let mut worst = 0.0f64;
    for md in f.modes.iter() {
        for b in [0, n] {
            match bc {
                BcTag::None => {}
                BcTag::DirichletVelocity => {
                    for c in 0..3 {
                        worst = worst.max(f.mode(c, md)[b].norm() / scale);
                    }
                }
                BcTag::ConductingMagnetic => {
                    worst = worst.max(f.mode(R, md)[b].norm() / scale);
                    let row = g.d1.row(b);
                    let ft = f.mode(TH, md);
                    let fz = f.mode(Z, md);
                    let mut a = ZERO;
                    let mut bz = ZERO;
                    let mut na = 0.0;
                    let mut nz = 0.0;
                    for j in 0..=n {
                        a += ft[j] * (row[j] * g.nodes[j]);
                        bz += fz[j] * row[j];
                        na += (row[j] * g.nodes[j]).abs();
                        nz += row[j].abs();
                    }
                    worst = worst.max(a.norm() / (na * scale));
                    worst = worst.max(bz.norm() / (nz * scale));
                }
            }
        }
    }
    worst
}

/// Degree of the random polynomial factors in [`random_divfree`].
const RANDOM_DEGREE: usize = 2;

/// Smallest radial degree for which [`random_divfree`] is exactly polynomial
/// at the collocation resolution.
pub const RANDOM_MIN_NR: usize = 12 + RANDOM_DEGREE;

/// Value, first and second derivative of a polynomial with ascending
/// coefficients.
fn poly_eval(c: &[C64], r: f64) -> [C64; 3] {
    let mut p = [ZERO; 3];
    for &a in c.iter().rev() {
        p[2] = p[2] * r + p[1] * 2.0;
        p[1] = p[1] * r + p[0];
        p[0] = p[0] * r + a;
    }
    p
}

/// Deterministic random real field satisfying the boundary conditions of
/// `bc` and solenoidal at the discrete level.
///
/// Each mode is `curl(ψ ẑ) + curl curl(χ ẑ)` with `ψ = r s³ P`,
/// `χ = r² s⁴ Q`, `s = (r − R1)(R2 − r)` and random `P`, `Q`. The factors of
/// `r` make every component a polynomial, so collocation derivatives are
/// exact once `Nr ≥ RANDOM_MIN_NR`. Components are evaluated in product
/// form; expanding into monomials loses digits to cancellation. Both tags are
/// satisfied simultaneously; `bc` only sets the tag on the result.
pub fn random_divfree(seed: u64, bc: BcTag, grid: Arc<RadialGrid>, modes: ModeSet) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid.clone(), modes, bc);
    let (r1, r2) = (grid.r1, grid.r2);
    let n = grid.len();
    for md in modes.canonical() {
        let kz = modes.kz(md.k);
        let m = md.m as f64;
        let damp = 1.0 / (1.0 + (md.m * md.m + md.k * md.k) as f64);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<C64> {
            (0..=RANDOM_DEGREE)
                .map(|_| {
                    let re: f64 = rng.random_range(-1.0..1.0);
                    let im: f64 = if md.is_mean() { 0.0 } else { rng.random_range(-1.0..1.0) };
                    C64::new(re, im) * damp
                })
                .collect()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let im = C64::new(0.0, m);
        let ik = C64::new(0.0, kz);
        let mut br = vec![ZERO; n];
        let mut bt = vec![ZERO; n];
        let mut bz = vec![ZERO; n];
        for (j, &r) in grid.nodes.iter().enumerate() {
            let s = (r - r1) * (r2 - r);
            let ds = r1 + r2 - 2.0 * r;
            let [p0, p1, _] = poly_eval(&p, r);
            let [q0, q1, q2] = poly_eval(&q, r);
            // G = s³P, F = s⁴Q and their derivatives.
            let g0 = p0 * s.powi(3);
            let g1 = p0 * (3.0 * s * s * ds) + p1 * s.powi(3);
            let f0 = q0 * s.powi(4);
            let f1 = q0 * (4.0 * s.powi(3) * ds) + q1 * s.powi(4);
            let f2 = q0 * (12.0 * s * s * ds * ds - 8.0 * s.powi(3)) + q1 * (8.0 * s.powi(3) * ds) + q2 * s.powi(4);
            // ψ = rG: B_r = (im/r)ψ + ikχ', B_θ = −ψ' − (mk/r)χ,
            // B_z = −(1/r)(rχ')' + (m²/r²)χ with χ = r²F.
            br[j] = im * g0 + ik * (f0 * (2.0 * r) + f1 * (r * r));
            bt[j] = -(g0 + g1 * r) - f0 * (m * kz * r);
            bz[j] = -(f0 * 4.0 + f1 * (5.0 * r) + f2 * (r * r)) + f0 * (m * m);
        }
        f.mode_mut(R, md).copy_from_slice(&br);
        f.mode_mut(TH, md).copy_from_slice(&bt);
        f.mode_mut(Z, md).copy_from_slice(&bz);
    }
    f.enforce_reality();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_radial_grid;

    fn setup(nr: usize, mmax: usize, kmax: usize) -> (Arc<RadialGrid>, ModeSet) {
        (Arc::new(build_radial_grid(1.0, 2.0, nr).unwrap()), ModeSet::new(mmax, kmax))
    }

    fn tc(grid: &Arc<RadialGrid>, modes: ModeSet) -> SpectralField {
        let (a1, a2, a3, a4) = (-2.0, 1.0 / 2f64.ln(), 2.0, 0.0);
        let mut f = SpectralField::zeros(grid.clone(), modes, BcTag::None);
        let v = grid.sample_c(|r| C64::new(a1 / r + a3 * r, 0.0));
        let w = grid.sample_c(|r| C64::new(a2 * r.ln() + a4, 0.0));
        f.mode_mut(TH, ModeIndex::new(0, 0)).copy_from_slice(&v);
        f.mode_mut(Z, ModeIndex::new(0, 0)).copy_from_slice(&w);
        f
    }

    #[test]
    fn tc_is_solenoidal_and_harmonic() {
        let (g, ms) = setup(32, 2, 2);
        let u = tc(&g, ms);
        assert!(divergence(&u).max_abs() < 1e-12);
        let lap = vector_laplacian(&u);
        assert!(lap.max_abs() < 1e-9, "{}", lap.max_abs());
    }

    #[test]
    fn curl_of_tc_matches_closed_form() {
        let (g, ms) = setup(32, 1, 1);
        let u = tc(&g, ms);
        let w = curl(&u);
        let md = ModeIndex::new(0, 0);
        let a2 = 1.0 / 2f64.ln();
        for (j, &r) in g.nodes.iter().enumerate() {
            assert!(w.mode(R, md)[j].norm() < 1e-12);
            assert!((w.mode(TH, md)[j] - C64::new(-a2 / r, 0.0)).norm() < 1e-10);
            assert!((w.mode(Z, md)[j] - C64::new(4.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn gradient_closed_forms() {
        let (g, ms) = setup(32, 2, 2);
        let c = ScalarField::from_profile(g.clone(), ms, ModeIndex::new(0, 0), |_| C64::new(2.5, 0.0));
        assert!(gradient(&c).max_abs() < 1e-10);
        let lg = ScalarField::from_profile(g.clone(), ms, ModeIndex::new(0, 0), |r| C64::new(r.ln(), 0.0));
        let gl = gradient(&lg);
        for (j, &r) in g.nodes.iter().enumerate() {
            assert!((gl.mode(R, ModeIndex::new(0, 0))[j].re - 1.0 / r).abs() < 1e-9);
        }
        // Re{e^{i(θ+z)}} stores 1/2 on (1,1) and (−1,−1).
        let md = ModeIndex::new(1, 1);
        let mut phi = ScalarField::zeros(g.clone(), ms);
        phi.mode_mut(0, md).fill(C64::new(0.5, 0.0));
        phi.mode_mut(0, md.conj()).fill(C64::new(0.5, 0.0));
        let gp = gradient(&phi);
        for (j, &r) in g.nodes.iter().enumerate() {
            assert!(gp.mode(R, md)[j].norm() < 1e-10);
            assert!((gp.mode(TH, md)[j] - C64::new(0.0, 0.5 / r)).norm() < 1e-12);
            assert!((gp.mode(Z, md)[j] - C64::new(0.0, 0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn div_grad_is_laplacian() {
        let (g, ms) = setup(48, 2, 2);
        let md = ModeIndex::new(1, 1);
        let mut phi = ScalarField::zeros(g.clone(), ms);
        let vals = g.sample_c(|r| C64::new(0.5 * r * r, 0.0));
        phi.mode_mut(0, md).copy_from_slice(&vals);
        let vals: Vec<C64> = vals.iter().map(|v| v.conj()).collect();
        phi.mode_mut(0, md.conj()).copy_from_slice(&vals);
        let a = divergence(&gradient(&phi));
        let b = scalar_laplacian(&phi);
        let scale = b.max_abs();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn random_field_identities() {
        let (g, ms) = setup(24, 3, 3);
        for seed in 0..5 {
            let f = random_divfree(seed, BcTag::ConductingMagnetic, g.clone(), ms);
            let scale = f.max_abs();
            assert!(scale > 0.0);
            assert!(divergence(&f).max_abs() <= 1e-10 * scale * 100.0);
            assert!(f.boundary_residual() <= 1e-10, "{}", f.boundary_residual());
            assert!(boundary_residual(&f, BcTag::DirichletVelocity) <= 1e-12);
            assert!(f.reality_defect() == 0.0);
            let dc = divergence(&curl(&f));
            assert!(dc.max_abs() <= 1e-10 * curl(&f).max_abs() * 100.0);
        }
        let a = random_divfree(9, BcTag::None, g.clone(), ms);
        let b = random_divfree(9, BcTag::None, g.clone(), ms);
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn divergence_of_random_field_is_relative_roundoff() {
        let (g, ms) = setup(32, 4, 4);
        let f = random_divfree(3, BcTag::ConductingMagnetic, g, ms);
        let d = divergence(&f).l2_norm();
        assert!(d <= 1e-10 * f.l2_norm(), "{d}");
    }

    #[test]
    fn curl_grad_vanishes() {
        let (g, ms) = setup(32, 2, 2);
        let mut phi = ScalarField::zeros(g.clone(), ms);
        for md in ms.canonical() {
            let vals = g.sample_c(|r| C64::new((r * (md.m + 2) as f64).sin(), (r * md.k as f64).cos()));
            phi.mode_mut(0, md).copy_from_slice(&vals);
        }
        let gp = gradient(&phi);
        let cg = curl(&gp);
        assert!(cg.max_abs() <= 1e-10 * gp.max_abs() * 10.0, "{}", cg.max_abs() / gp.max_abs());
    }
}
