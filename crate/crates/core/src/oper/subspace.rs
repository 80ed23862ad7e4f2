//! Discretely solenoidal subspaces with boundary conditions built in.
//!
//! For one Fourier mode the admissible node vectors are the null space of a
//! constraint matrix (divergence at every node plus the wall conditions).
//! The basis is orthonormal in the quadrature inner product, so coordinates
//! preserve L² norms up to the periodic area factor and `Z Zᴴ W` is the
//! orthogonal projector onto the subspace.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::field::BcTag;
use crate::grid::RadialGrid;
use crate::linalg::{self, CMat, ZERO};

/// Rows of `C` with `C x = 0` for admissible stacked vectors `x = (f_r, f_θ, f_z)`.
pub fn constraint_matrix(grid: &RadialGrid, m: i32, kz: f64, bc: BcTag, exclude_flux: bool) -> CMat {
    let n = grid.len();
    let nn = grid.nr;
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let im = C64::new(0.0, m as f64);
    let ik = C64::new(0.0, kz);
    for i in 0..n {
        let mut row = vec![ZERO; 3 * n];
        let ri = grid.nodes[i];
        for j in 0..n {
            row[j] = C64::new(grid.d1.get(i, j) * grid.nodes[j] / ri, 0.0);
        }
        row[n + i] = im / ri;
        row[2 * n + i] = ik;
        rows.push(row);
    }
    for b in [0, nn] {
        match bc {
            BcTag::DirichletVelocity => {
                for c in 0..3 {
                    let mut row = vec![ZERO; 3 * n];
                    row[c * n + b] = C64::new(1.0, 0.0);
                    rows.push(row);
                }
            }
            BcTag::ConductingMagnetic => {
                let mut row = vec![ZERO; 3 * n];
                row[b] = C64::new(1.0, 0.0);
                rows.push(row);
                let mut row = vec![ZERO; 3 * n];
                for j in 0..n {
                    row[n + j] = C64::new(grid.d1.get(b, j) * grid.nodes[j], 0.0);
                }
                rows.push(row);
                let mut row = vec![ZERO; 3 * n];
                for j in 0..n {
                    row[2 * n + j] = C64::new(grid.d1.get(b, j), 0.0);
                }
                rows.push(row);
            }
            BcTag::None => {}
        }
    }
    if exclude_flux {
        // Orthogonality to (0, 1/r, 0) and (0, 0, 1): zero azimuthal and
        // axial flux on the mean mode.
        let mut row = vec![ZERO; 3 * n];
        for j in 0..n {
            row[n + j] = C64::new(grid.weights[j] / grid.nodes[j], 0.0);
        }
        rows.push(row);
        let mut row = vec![ZERO; 3 * n];
        for j in 0..n {
            row[2 * n + j] = C64::new(grid.weights[j], 0.0);
        }
        rows.push(row);
    }
    linalg::from_cols(3 * n, &rows).transpose().to_owned()
}

/// Relative singular-value cut separating the constraint rank from
/// round-off.
const RANK_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct Subspace {
    /// `Z`, `3(Nr+1) × d`, with `Zᴴ W Z = I`.
    pub basis: CMat,
    /// `Zᴴ W`, mapping node vectors to coordinates.
    pub coords_map: CMat,
    /// Quadrature weights repeated per component.
    pub weights: Vec<f64>,
}

impl Subspace {
    pub fn build(grid: &RadialGrid, m: i32, kz: f64, bc: BcTag, exclude_flux: bool) -> Result<Self> {
        let n = grid.len();
        let weights: Vec<f64> = (0..3).flat_map(|_| grid.weights.iter().copied()).collect();
        let inv_sqrt: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let c = constraint_matrix(grid, m, kz, bc, exclude_flux);
        // Work in y = W^{1/2} x, and normalise rows so the rank cut is
        // insensitive to the very different row scales.
        let mut cs = CMat::from_fn(c.nrows(), 3 * n, |i, j| c[(i, j)] * inv_sqrt[j]);
        for i in 0..cs.nrows() {
            let norm = (0..cs.ncols()).map(|j| cs[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in 0..cs.ncols() {
                    cs[(i, j)] /= norm;
                }
            }
        }
        let y = linalg::null_space(&cs, RANK_TOL)?;
        let basis = CMat::from_fn(3 * n, y.ncols(), |i, j| y[(i, j)] * inv_sqrt[i]);
        let coords_map = CMat::from_fn(y.ncols(), 3 * n, |i, j| basis[(j, i)].conj() * weights[j]);
        Ok(Self { basis, coords_map, weights })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn coords(&self, x: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.coords_map, x)
    }

    pub fn lift(&self, y: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.basis, y)
    }

    /// Orthogonal projection in the quadrature inner product.
    pub fn project(&self, x: &[C64]) -> Vec<C64> {
        self.lift(&self.coords(x))
    }

    /// Galerkin restriction `Zᴴ W A Z` of a node-space operator.
    pub fn restrict(&self, a: &CMat) -> CMat {
        &self.coords_map * (a * &self.basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_radial_grid;

    #[test]
    fn basis_is_orthonormal_and_admissible() {
        let g = build_radial_grid(1.0, 2.0, 24).unwrap();
        for (m, k, bc, flux) in [
            (1, -2.0, BcTag::ConductingMagnetic, false),
            (0, 3.0, BcTag::ConductingMagnetic, false),
            (0, 0.0, BcTag::ConductingMagnetic, true),
            (2, 1.0, BcTag::DirichletVelocity, false),
            (0, 0.0, BcTag::DirichletVelocity, false),
        ] {
            let s = Subspace::build(&g, m, k, bc, flux).unwrap();
            let gram = &s.coords_map * &s.basis;
            let id = linalg::identity(s.dim());
            assert!(linalg::max_abs(&(gram - id)) < 1e-10, "m={m} k={k}");
            let c = constraint_matrix(&g, m, k, bc, flux);
            let cz = &c * &s.basis;
            let scale = linalg::max_abs(&c) * linalg::max_abs(&s.basis);
            assert!(linalg::max_abs(&cz) < 1e-12 * scale, "m={m} k={k}: {}", linalg::max_abs(&cz) / scale);
        }
    }

    #[test]
    fn dimensions_follow_the_constraint_count() {
        let g = build_radial_grid(1.0, 2.0, 20).unwrap();
        let n = g.len();
        let s = Subspace::build(&g, 1, 1.0, BcTag::ConductingMagnetic, false).unwrap();
        assert_eq!(s.dim(), 3 * n - (n + 6));
        let s = Subspace::build(&g, 3, -2.0, BcTag::DirichletVelocity, false).unwrap();
        assert_eq!(s.dim(), 3 * n - (n + 6));
        // Mean mode: B_r vanishes identically, the two flux rows bite.
        let s = Subspace::build(&g, 0, 0.0, BcTag::ConductingMagnetic, true).unwrap();
        assert_eq!(s.dim(), 2 * n - 6);
    }
}
