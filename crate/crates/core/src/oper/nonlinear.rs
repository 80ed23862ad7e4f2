//! Quadratic terms `N(a, a) = P ∇·(a ⊗ a)` and `M(v, B) = ∇ × (v × B)`.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::field::{self, BcTag, SpectralField, R, TH, Z};
use crate::linalg::ZERO;
use crate::physical::{pairwise_products, ProductPath};

use super::leray::leray_project;

#[derive(Clone, Copy, Debug, Default)]
pub struct NonlinearOptions {
    /// Force a product path; `None` picks the cheaper one.
    pub path: Option<ProductPath>,
}

/// `∇·(a ⊗ a)` including the cylindrical curvature terms, unprojected.
pub fn tensor_divergence(a: &SpectralField, opts: NonlinearOptions) -> SpectralField {
    let g = &a.grid;
    let modes = a.modes;
    let nr1 = a.nr1();
    let inputs = [a.component(R), a.component(TH), a.component(Z)];
    // rr, rθ, rz, θθ, θz, zz
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let t = pairwise_products(&inputs, &pairs, &modes, nr1, opts.path);
    let mut out = SpectralField::zeros(a.grid.clone(), modes, BcTag::None);
    let mut rt = vec![ZERO; nr1];
    for (idx, md) in modes.iter().enumerate() {
        let s = idx * nr1..(idx + 1) * nr1;
        let [trr, trt, trz, ttt, ttz, tzz] = [0, 1, 2, 3, 4, 5].map(|p| &t[p][s.clone()]);
        if [trr, trt, trz, ttt, ttz, tzz].iter().all(|c| c.iter().all(|v| *v == ZERO)) {
            continue;
        }
        let im = C64::new(0.0, md.m as f64);
        let ik = C64::new(0.0, modes.kz(md.k));
        let drr = radial_flux_derivative(g, trr, &mut rt);
        let drt = radial_flux_derivative(g, trt, &mut rt);
        let drz = radial_flux_derivative(g, trz, &mut rt);
        let mut orr = vec![ZERO; nr1];
        let mut ott = vec![ZERO; nr1];
        let mut ozz = vec![ZERO; nr1];
        for j in 0..nr1 {
            let r = g.nodes[j];
            orr[j] = drr[j] + im * trt[j] / r + ik * trz[j] - ttt[j] / r;
            ott[j] = drt[j] + im * ttt[j] / r + ik * ttz[j] + trt[j] / r;
            ozz[j] = drz[j] + im * ttz[j] / r + ik * tzz[j];
        }
        out.mode_mut(R, md).copy_from_slice(&orr);
        out.mode_mut(TH, md).copy_from_slice(&ott);
        out.mode_mut(Z, md).copy_from_slice(&ozz);
    }
    out
}

/// `(1/r) ∂_r (r t)` at the nodes.
fn radial_flux_derivative(g: &crate::grid::RadialGrid, t: &[C64], scratch: &mut [C64]) -> Vec<C64> {
    for (s, (v, r)) in scratch.iter_mut().zip(t.iter().zip(&g.nodes)) {
        *s = v * r;
    }
    let mut d = g.d1.apply_cv(scratch);
    for (v, r) in d.iter_mut().zip(&g.nodes) {
        *v /= r;
    }
    d
}

/// `N(a, a) = P ∇·(a ⊗ a)`.
pub fn apply_nonlinear_n(a: &SpectralField, opts: NonlinearOptions) -> Result<SpectralField> {
    let div = tensor_divergence(a, opts);
    leray_project(&div)
}

/// `v × B`.
pub fn cross(v: &SpectralField, b: &SpectralField, opts: NonlinearOptions) -> SpectralField {
    let modes = v.modes;
    let nr1 = v.nr1();
    let inputs = [v.component(R), v.component(TH), v.component(Z), b.component(R), b.component(TH), b.component(Z)];
    // E_r = v_θ B_z − v_z B_θ, E_θ = v_z B_r − v_r B_z, E_z = v_r B_θ − v_θ B_r
    let pairs = [(1, 5), (2, 4), (2, 3), (0, 5), (0, 4), (1, 3)];
    let p = pairwise_products(&inputs, &pairs, &modes, nr1, opts.path);
    let mut e = SpectralField::zeros(v.grid.clone(), modes, BcTag::None);
    for (c, (plus, minus)) in [(R, (0, 1)), (TH, (2, 3)), (Z, (4, 5))] {
        let dst = e.component_mut(c);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = p[plus][i] - p[minus][i];
        }
    }
    e
}

/// `M(v, B) = ∇ × (v × B)`.
pub fn apply_nonlinear_m(v: &SpectralField, b: &SpectralField, opts: NonlinearOptions) -> SpectralField {
    field::curl(&cross(v, b, opts))
}

/// `(⟨ΔB, B⟩, −‖∇×B‖²)` in L².
pub fn hodge_dissipativity(b: &SpectralField) -> (f64, f64) {
    let lap = field::vector_laplacian(b);
    let lhs = lap.inner(b).re;
    let c = field::curl(b);
    let rhs = -c.inner(&c).re;
    (lhs, rhs)
}
