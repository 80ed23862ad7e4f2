//! Leray projection by a pressure-Poisson solve per mode.
//!
//! `P f = f − ∇φ` with `Δφ = ∇·f` at interior nodes and `∂_r φ = f_r` at the
//! walls, so the result has zero normal component. On the mean mode the
//! Neumann problem fixes `φ` only up to a constant; one interior equation is
//! traded for `∫ φ r dr = 0`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{SpectralField, R, TH, Z};
use crate::grid::RadialGrid;
use crate::linalg::{self, CMat, Lu, ZERO};

fn gradient_matrix(grid: &RadialGrid, m: i32, kz: f64) -> CMat {
    let n = grid.len();
    let mut g = linalg::zeros(3 * n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = C64::new(grid.d1.get(i, j), 0.0);
        }
        g[(n + i, i)] = C64::new(0.0, m as f64 / grid.nodes[i]);
        g[(2 * n + i, i)] = C64::new(0.0, kz);
    }
    g
}

fn divergence_matrix(grid: &RadialGrid, m: i32, kz: f64) -> CMat {
    let n = grid.len();
    let mut d = linalg::zeros(n, 3 * n);
    for i in 0..n {
        let r = grid.nodes[i];
        for j in 0..n {
            d[(i, j)] = C64::new(grid.d1.get(i, j) * grid.nodes[j] / r, 0.0);
        }
        d[(i, n + i)] = C64::new(0.0, m as f64 / r);
        d[(i, 2 * n + i)] = C64::new(0.0, kz);
    }
    d
}

/// Poisson matrix `S` and right-hand-side map `Rhs` with `S φ = Rhs f`.
fn poisson_system(grid: &RadialGrid, m: i32, kz: f64) -> (CMat, CMat, CMat) {
    let n = grid.len();
    let g = gradient_matrix(grid, m, kz);
    let d = divergence_matrix(grid, m, kz);
    let mut s = &d * &g;
    let mut rhs = d;
    for b in [0, grid.nr] {
        for j in 0..n {
            s[(b, j)] = C64::new(grid.d1.get(b, j), 0.0);
        }
        for j in 0..3 * n {
            rhs[(b, j)] = ZERO;
        }
        rhs[(b, b)] = C64::new(1.0, 0.0);
    }
    if m == 0 && kz == 0.0 {
        let mid = grid.nr / 2;
        for j in 0..n {
            s[(mid, j)] = C64::new(grid.weights[j], 0.0);
        }
        for j in 0..3 * n {
            rhs[(mid, j)] = ZERO;
        }
    }
    (s, rhs, g)
}

fn factor(s: &CMat, m: i32, kz: f64) -> Result<Lu> {
    let lu =
        Lu::new(s).map_err(|_| Error::Linalg(format!("pressure Poisson matrix singular on mode m={m}, k/Lz={kz}")))?;
    Ok(lu)
}

/// Dense projector `I − G S⁻¹ Rhs` on stacked node vectors of one mode.
pub fn leray_matrix(grid: &RadialGrid, m: i32, kz: f64) -> Result<CMat> {
    let (s, rhs, g) = poisson_system(grid, m, kz);
    let lu = factor(&s, m, kz)?;
    let sol = lu.solve_mat(&rhs);
    let gs = &g * &sol;
    Ok(linalg::identity(3 * grid.len()) - gs)
}

/// Leray projection of every mode of `f`, with one pass of iterative
/// refinement on each Poisson solve.
pub fn leray_project(f: &SpectralField) -> Result<SpectralField> {
    let grid = &f.grid;
    let n = grid.len();
    let real = f.reality_defect() == 0.0;
    let mut out = f.clone();
    for md in f.modes.iter() {
        let x = f.mode_vector(md);
        if x.iter().all(|v| *v == ZERO) {
            continue;
        }
        let kz = f.modes.kz(md.k);
        let (s, rhs, g) = poisson_system(grid, md.m, kz);
        let lu = factor(&s, md.m, kz)?;
        let b = linalg::matvec(&rhs, &x);
        let mut phi = lu.solve(&b);
        let resid: Vec<C64> = b.iter().zip(linalg::matvec(&s, &phi)).map(|(a, c)| a - c).collect();
        for (p, c) in phi.iter_mut().zip(lu.solve(&resid)) {
            *p += c;
        }
        let gphi = linalg::matvec(&g, &phi);
        for (c, comp) in [R, TH, Z].into_iter().enumerate() {
            let dst = out.mode_mut(comp, md);
            for j in 0..n {
                dst[j] = x[c * n + j] - gphi[c * n + j];
            }
        }
    }
    if real {
        out.enforce_reality();
    }
    Ok(out)
}
