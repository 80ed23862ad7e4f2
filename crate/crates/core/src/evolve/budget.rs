//! Energy budget terms evaluated from fields, independently of the
//! assembled operators.

use num_complex::Complex64 as C64;

use crate::field::{self, SpectralField, R, TH, Z};
use crate::linalg::ZERO;
use crate::steady::TCProfile;

/// Quadrature of `f(r, a, b)` summed over all modes of two fields, times the
/// periodic area.
fn mode_sum(a: &SpectralField, b: &SpectralField, f: impl Fn(f64, &[&[C64]; 3], &[&[C64]; 3], usize) -> f64) -> f64 {
    let g = &a.grid;
    let mut total = 0.0;
    for md in a.modes.iter() {
        let xa = [a.mode(R, md), a.mode(TH, md), a.mode(Z, md)];
        let xb = [b.mode(R, md), b.mode(TH, md), b.mode(Z, md)];
        if xa.iter().chain(&xb).all(|c| c.iter().all(|v| *v == ZERO)) {
            continue;
        }
        for j in 0..g.len() {
            total += g.weights[j] * f(g.nodes[j], &xa, &xb, j);
        }
    }
    total * a.modes.periodic_area()
}

/// Energy drawn from the background by a perturbation `f`:
/// `−⟨v, (v·∇)u⟩` for a velocity, `⟨B, (B·∇)u⟩` for a magnetic field.
/// With `u = V(r) θ̂ + W(r) ẑ`, `(f·∇)u = f_r V' θ̂ + f_r W' ẑ − (f_θ V/r) r̂`.
pub fn shear_production(f: &SpectralField, profile: &TCProfile, magnetic: bool) -> f64 {
    let p = *profile;
    let s = mode_sum(f, f, |r, x, _, j| {
        let (fr, ft, fz) = (x[0][j], x[1][j], x[2][j]);
        let stretch = ft.conj() * fr * p.dv(r) + fz.conj() * fr * p.dw(r) - fr.conj() * ft * (p.v(r) / r);
        stretch.re
    });
    if magnetic {
        s
    } else {
        -s
    }
}

/// `‖∇f‖²` with the cylindrical gradient tensor.
pub fn gradient_norm_sq(f: &SpectralField) -> f64 {
    let g = &f.grid;
    let modes = f.modes;
    let mut total = 0.0;
    for md in modes.iter() {
        let x = [f.mode(R, md), f.mode(TH, md), f.mode(Z, md)];
        if x.iter().all(|c| c.iter().all(|v| *v == ZERO)) {
            continue;
        }
        let dr: Vec<Vec<C64>> = x.iter().map(|c| g.d1.apply_cv(c)).collect();
        let im = C64::new(0.0, md.m as f64);
        let ik = C64::new(0.0, modes.kz(md.k));
        for j in 0..g.len() {
            let r = g.nodes[j];
            let (fr, ft, fz) = (x[0][j], x[1][j], x[2][j]);
            let entries = [
                dr[0][j],
                dr[1][j],
                dr[2][j],
                im * fr / r - ft / r,
                im * ft / r + fr / r,
                im * fz / r,
                ik * fr,
                ik * ft,
                ik * fz,
            ];
            total += g.weights[j] * entries.iter().map(|e| e.norm_sqr()).sum::<f64>();
        }
    }
    total * modes.periodic_area()
}

/// `‖∇×B‖²`.
pub fn curl_norm_sq(b: &SpectralField) -> f64 {
    let c = field::curl(b);
    c.inner(&c).re
}
