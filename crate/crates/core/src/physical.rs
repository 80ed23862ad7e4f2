//! Physical-space evaluation: transforms between Fourier modes and the
//! oversampled `(θ, z)` grid, dealiased products, and L^p / W^{s,p} norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, R, TH, Z};
use crate::grid::{ModeIndex, ModeSet};
use crate::linalg::{I, ZERO};

/// Smallest 5-smooth length `n ≥ max(3·nmax + 1, ⌈3/2 (2·nmax + 1)⌉)`.
///
/// `3·nmax + 1` points keep quadratic products free of aliasing on the
/// retained modes; the second bound is the 3/2 oversampling rule.
pub fn physical_len(nmax: usize) -> usize {
    let need = (3 * nmax + 1).max((3 * (2 * nmax + 1)).div_ceil(2));
    (need..)
        .find(|&n| {
            let mut x = n;
            for p in [2, 3, 5] {
                while x % p == 0 {
                    x /= p;
                }
            }
            x == 1
        })
        .expect("5-smooth numbers are unbounded")
}

/// 2D FFT over the `(θ, z)` grid. Physical samples are stored `[z][θ]`.
pub struct Fft2 {
    pub nt: usize,
    pub nz: usize,
    inv_t: Arc<dyn Fft<f64>>,
    inv_z: Arc<dyn Fft<f64>>,
    fwd_t: Arc<dyn Fft<f64>>,
    fwd_z: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(nt: usize, nz: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nt,
            nz,
            inv_t: planner.plan_fft_inverse(nt),
            inv_z: planner.plan_fft_inverse(nz),
            fwd_t: planner.plan_fft_forward(nt),
            fwd_z: planner.plan_fft_forward(nz),
        }
    }

    pub fn for_modes(modes: &ModeSet) -> Self {
        Self::new(physical_len(modes.mmax), physical_len(modes.kmax))
    }

    pub fn plane(&self) -> usize {
        self.nt * self.nz
    }

    /// Synthesises `Σ c_{mk}(r_j) e^{i(mθ + k z/Lz)}` for every node.
    pub fn to_physical(&self, block: &[C64], modes: &ModeSet, nr1: usize) -> Vec<C64> {
        assert_eq!(block.len(), modes.count() * nr1);
        let (nt, nz) = (self.nt, self.nz);
        let mut out = vec![ZERO; nr1 * nt * nz];
        let mut spec = vec![ZERO; nt * nz];
        for j in 0..nr1 {
            spec.fill(ZERO);
            for (idx, md) in modes.iter().enumerate() {
                let it = md.m.rem_euclid(nt as i32) as usize;
                let iz = md.k.rem_euclid(nz as i32) as usize;
                spec[it * nz + iz] += block[idx * nr1 + j];
            }
            self.inv_z.process(&mut spec);
            let plane = &mut out[j * nt * nz..(j + 1) * nt * nz];
            transpose(&spec, plane, nt, nz);
            self.inv_t.process(plane);
        }
        out
    }

    /// Analysis onto `modes`; the inverse of [`Fft2::to_physical`] on
    /// band-limited data.
    pub fn from_physical(&self, phys: &[C64], modes: &ModeSet, nr1: usize) -> Vec<C64> {
        let (nt, nz) = (self.nt, self.nz);
        assert_eq!(phys.len(), nr1 * nt * nz);
        let norm = 1.0 / (nt * nz) as f64;
        let mut out = vec![ZERO; modes.count() * nr1];
        let mut work = vec![ZERO; nt * nz];
        let mut spec = vec![ZERO; nt * nz];
        for j in 0..nr1 {
            work.copy_from_slice(&phys[j * nt * nz..(j + 1) * nt * nz]);
            self.fwd_t.process(&mut work);
            transpose(&work, &mut spec, nz, nt);
            self.fwd_z.process(&mut spec);
            for (idx, md) in modes.iter().enumerate() {
                let it = md.m.rem_euclid(nt as i32) as usize;
                let iz = md.k.rem_euclid(nz as i32) as usize;
                out[idx * nr1 + j] = spec[it * nz + iz] * norm;
            }
        }
        out
    }
}

/// `dst[c][r] = src[r][c]` for an `rows × cols` source.
fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Keeps canonical modes and rebuilds their conjugate partners, so the result
/// is exactly the coefficient set of a real field.
pub(crate) fn symmetrize(block: &mut [C64], modes: &ModeSet, nr1: usize) {
    for md in modes.canonical() {
        let a = modes.index(md) * nr1;
        if md.is_mean() {
            for v in &mut block[a..a + nr1] {
                v.im = 0.0;
            }
            continue;
        }
        let b = modes.index(md.conj()) * nr1;
        for j in 0..nr1 {
            block[b + j] = block[a + j].conj();
        }
    }
}

/// How quadratic products are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductPath {
    /// Padded transforms, pointwise products, truncation.
    Fft,
    /// Direct convolution over the modes that carry data. Exact and
    /// equivalent to the dealiased transform path; cheap when few modes are
    /// excited.
    Sparse,
}

fn active_mask(blocks: &[&[C64]], modes: &ModeSet, nr1: usize) -> Vec<bool> {
    (0..modes.count())
        .map(|idx| blocks.iter().any(|b| b[idx * nr1..(idx + 1) * nr1].iter().any(|v| *v != ZERO)))
        .collect()
}

/// Chooses the cheaper product path for the given real inputs.
pub fn choose_path(inputs: &[&[C64]], npairs: usize, modes: &ModeSet, nr1: usize) -> ProductPath {
    let active = active_mask(inputs, modes, nr1).iter().filter(|&&a| a).count();
    let p = (physical_len(modes.mmax) * physical_len(modes.kmax)) as f64;
    let fft_cost = (inputs.len() + npairs) as f64 * p * p.log2().max(1.0) * 2.0 + modes.count() as f64 * npairs as f64;
    let sparse_cost = (active * active) as f64 * npairs as f64 / 2.0;
    if sparse_cost <= fft_cost {
        ProductPath::Sparse
    } else {
        ProductPath::Fft
    }
}

/// Products `inputs[a] · inputs[b]` for each `(a, b)` in `pairs`, truncated
/// to `modes`. Inputs and outputs are coefficient blocks of real scalar
/// fields (one component, layout as in [`SpectralField::component`]).
pub fn pairwise_products(
    inputs: &[&[C64]],
    pairs: &[(usize, usize)],
    modes: &ModeSet,
    nr1: usize,
    path: Option<ProductPath>,
) -> Vec<Vec<C64>> {
    let path = path.unwrap_or_else(|| choose_path(inputs, pairs.len(), modes, nr1));
    match path {
        ProductPath::Fft => products_fft(inputs, pairs, modes, nr1),
        ProductPath::Sparse => products_sparse(inputs, pairs, modes, nr1),
    }
}

fn products_fft(inputs: &[&[C64]], pairs: &[(usize, usize)], modes: &ModeSet, nr1: usize) -> Vec<Vec<C64>> {
    let fft = Fft2::for_modes(modes);
    let phys: Vec<Vec<f64>> =
        inputs.iter().map(|b| fft.to_physical(b, modes, nr1).into_iter().map(|v| v.re).collect()).collect();
    pairs
        .iter()
        .map(|&(a, b)| {
            let prod: Vec<C64> = phys[a].iter().zip(&phys[b]).map(|(x, y)| C64::new(x * y, 0.0)).collect();
            let mut out = fft.from_physical(&prod, modes, nr1);
            symmetrize(&mut out, modes, nr1);
            out
        })
        .collect()
}

fn products_sparse(inputs: &[&[C64]], pairs: &[(usize, usize)], modes: &ModeSet, nr1: usize) -> Vec<Vec<C64>> {
    let masks: Vec<Vec<bool>> = inputs.iter().map(|b| active_mask(&[b], modes, nr1)).collect();
    let lists: Vec<Vec<ModeIndex>> =
        masks.iter().map(|mask| modes.iter().filter(|md| mask[modes.index(*md)]).collect()).collect();
    let canon: Vec<ModeIndex> = modes.canonical().collect();
    pairs
        .iter()
        .map(|&(a, b)| {
            let mut out = vec![ZERO; modes.count() * nr1];
            let (fa, fb) = (inputs[a], inputs[b]);
            for &o in &canon {
                let oi = modes.index(o) * nr1;
                for &ma in &lists[a] {
                    let mb = ModeIndex::new(o.m - ma.m, o.k - ma.k);
                    if !modes.contains(mb) || !masks[b][modes.index(mb)] {
                        continue;
                    }
                    let ai = modes.index(ma) * nr1;
                    let bi = modes.index(mb) * nr1;
                    for j in 0..nr1 {
                        out[oi + j] += fa[ai + j] * fb[bi + j];
                    }
                }
            }
            symmetrize(&mut out, modes, nr1);
            out
        })
        .collect()
}

/// Pointwise magnitudes of a multi-channel field on the physical grid,
/// reduced to `(∫|f|^p dV)^{1/p}` or the sampled maximum for `p = ∞`.
fn lp_of_channels(channels: &[&ScalarField], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let first = channels[0];
    let grid = &first.grid;
    let modes = first.modes;
    let nr1 = grid.len();
    let fft = Fft2::for_modes(&modes);
    let plane = fft.plane();
    let mut mag2 = vec![0.0f64; nr1 * plane];
    for ch in channels {
        let phys = fft.to_physical(ch.coeffs(), &modes, nr1);
        for (m, v) in mag2.iter_mut().zip(&phys) {
            *m += v.norm_sqr();
        }
    }
    if p.is_infinite() {
        return Ok(mag2.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt());
    }
    let cell = (2.0 * PI / fft.nt as f64) * (2.0 * PI * modes.lz / fft.nz as f64);
    let mut total = 0.0;
    for j in 0..nr1 {
        let s: f64 = mag2[j * plane..(j + 1) * plane].iter().map(|m| m.powf(p / 2.0)).sum();
        total += grid.weights[j] * s;
    }
    Ok((total * cell).powf(1.0 / p))
}

/// `(∫_Ω |f|^p dV)^{1/p}` by quadrature on the oversampled physical grid.
/// For `p = ∞` this is the largest sampled magnitude, a lower bound of the
/// true supremum.
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    let chans = split(f);
    lp_of_channels(&[&chans[0], &chans[1], &chans[2]], p)
}

pub fn lp_norm_scalar(f: &ScalarField, p: f64) -> Result<f64> {
    lp_of_channels(&[f], p)
}

/// `(∫ (Σ_i |f_i|²)^{p/2} dV)^{1/p}` for several vector fields on one grid,
/// e.g. the pair `(v, B)`.
pub fn lp_norm_joint(fields: &[&SpectralField], p: f64) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::InvalidArgument("no fields".into()));
    }
    let chans: Vec<ScalarField> = fields.iter().flat_map(|f| split(f)).collect();
    let refs: Vec<&ScalarField> = chans.iter().collect();
    lp_of_channels(&refs, p)
}

fn split(f: &SpectralField) -> [ScalarField; 3] {
    [R, TH, Z].map(|c| ScalarField::from_coeffs(f.grid.clone(), f.modes, f.component(c).to_vec()).expect("shape"))
}

fn widen(modes: ModeSet) -> ModeSet {
    ModeSet { mmax: modes.mmax + 1, ..modes }
}

fn copy_into(src: &ScalarField, dst_modes: ModeSet) -> ScalarField {
    let mut out = ScalarField::zeros(src.grid.clone(), dst_modes);
    for md in src.modes.iter() {
        out.mode_mut(0, md).copy_from_slice(src.mode(0, md));
    }
    out
}

/// Cartesian components `(f_x, f_y, f_z)` of a cylindrical field, as
/// scalar fields on a mode set one wider in `m`.
///
/// Uses `f_x ± i f_y = e^{±iθ}(f_r ± i f_θ)`.
pub fn cartesian_components(f: &SpectralField) -> [ScalarField; 3] {
    let wide = widen(f.modes);
    let nr1 = f.nr1();
    let mut fx = ScalarField::zeros(f.grid.clone(), wide);
    let mut fy = ScalarField::zeros(f.grid.clone(), wide);
    for md in f.modes.iter() {
        let (fr, ft) = (f.mode(R, md), f.mode(TH, md));
        let up = ModeIndex::new(md.m + 1, md.k);
        let dn = ModeIndex::new(md.m - 1, md.k);
        for j in 0..nr1 {
            let plus = fr[j] + I * ft[j];
            let minus = fr[j] - I * ft[j];
            // f_x = (f₊ + f₋)/2, f_y = (f₊ − f₋)/(2i)
            fx.mode_mut(0, up)[j] += plus * 0.5;
            fx.mode_mut(0, dn)[j] += minus * 0.5;
            fy.mode_mut(0, up)[j] += plus / (2.0 * I);
            fy.mode_mut(0, dn)[j] -= minus / (2.0 * I);
        }
    }
    let fz = ScalarField::from_coeffs(f.grid.clone(), f.modes, f.component(Z).to_vec()).expect("shape");
    [fx, fy, copy_into(&fz, wide)]
}

/// Cartesian `∂_x` (`dir = 0`), `∂_y` (`dir = 1`) or `∂_z` (`dir = 2`) of a
/// scalar field. Planar derivatives widen the mode set by one in `m`.
pub fn cartesian_derivative(g: &ScalarField, dir: usize) -> ScalarField {
    let grid = &g.grid;
    let nr1 = grid.len();
    if dir == 2 {
        let mut out = g.clone();
        for md in g.modes.iter() {
            let ik = I * g.modes.kz(md.k);
            for v in out.mode_mut(0, md) {
                *v *= ik;
            }
        }
        return out;
    }
    let wide = widen(g.modes);
    let mut out = ScalarField::zeros(grid.clone(), wide);
    for md in g.modes.iter() {
        let gm = g.mode(0, md);
        let dg = grid.d1.apply_cv(gm);
        let m = md.m as f64;
        let up = ModeIndex::new(md.m + 1, md.k);
        let dn = ModeIndex::new(md.m - 1, md.k);
        for j in 0..nr1 {
            let r = grid.nodes[j];
            // ∂₊ = e^{iθ}(∂_r + (i/r)∂_θ), ∂₋ = e^{−iθ}(∂_r − (i/r)∂_θ)
            let plus = dg[j] - gm[j] * (m / r);
            let minus = dg[j] + gm[j] * (m / r);
            if dir == 0 {
                out.mode_mut(0, up)[j] += plus * 0.5;
                out.mode_mut(0, dn)[j] += minus * 0.5;
            } else {
                out.mode_mut(0, up)[j] += plus / (2.0 * I);
                out.mode_mut(0, dn)[j] -= minus / (2.0 * I);
            }
        }
    }
    out
}

fn harmonise(chans: [ScalarField; 3]) -> [ScalarField; 3] {
    let mmax = chans.iter().map(|c| c.modes.mmax).max().unwrap();
    chans.map(|c| {
        if c.modes.mmax == mmax {
            c
        } else {
            let target = ModeSet { mmax, ..c.modes };
            copy_into(&c, target)
        }
    })
}

/// Integer-order Sobolev norm `Σ_{|α| ≤ s} ‖∂^α f‖_{L^p}` with Cartesian
/// derivatives of the Cartesian components, over unordered multi-indices.
pub fn sobolev_norm(f: &SpectralField, s: u32, p: f64) -> Result<f64> {
    if s > 2 {
        return Err(Error::InvalidArgument(format!("Sobolev order {s} unsupported; only s in {{0, 1, 2}}")));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("Sobolev exponent must exceed 1, got {p}")));
    }
    let mut total = lp_norm(f, p)?;
    if s == 0 {
        return Ok(total);
    }
    let base = cartesian_components(f);
    let deriv = |chans: &[ScalarField; 3], dir: usize| -> [ScalarField; 3] {
        harmonise([0, 1, 2].map(|c| cartesian_derivative(&chans[c], dir)))
    };
    let first: Vec<[ScalarField; 3]> = (0..3).map(|d| deriv(&base, d)).collect();
    for ch in &first {
        total += lp_of_channels(&[&ch[0], &ch[1], &ch[2]], p)?;
    }
    if s == 2 {
        for a in 0..3 {
            for b in a..3 {
                let ch = deriv(&first[a], b);
                total += lp_of_channels(&[&ch[0], &ch[1], &ch[2]], p)?;
            }
        }
    }
    Ok(total)
}
