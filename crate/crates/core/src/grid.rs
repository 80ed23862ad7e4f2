//! Radial Chebyshev–Gauss–Lobatto collocation on `[R1, R2]` and Fourier
//! bookkeeping for the periodic `θ` and `z` directions.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major real matrix. Only what the collocation operators need.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, rhs: &RealMatrix) -> RealMatrix {
        let n = self.n;
        let mut out = RealMatrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(l);
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `out = self · x` for complex node samples.
    pub fn apply_c(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for (a, b) in self.row(i).iter().zip(x) {
                re += a * b.re;
                im += a * b.im;
            }
            *o = C64::new(re, im);
        }
    }

    pub fn apply_cv(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        self.apply_c(x, &mut out);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Collocation grid in the radial direction.
///
/// Nodes run from `R2` (index 0) down to `R1` (index `nr`). The quadrature
/// weights approximate `∫ f(r) r dr`, i.e. the cylindrical Jacobian is folded
/// in once.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub r1: f64,
    pub r2: f64,
    pub nr: usize,
    pub nodes: Vec<f64>,
    pub d1: RealMatrix,
    pub d2: RealMatrix,
    pub weights: Vec<f64>,
}

/// Radial derivative order accepted by [`radial_derivative`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

impl TryFrom<u32> for DerivOrder {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        match v {
            1 => Ok(DerivOrder::First),
            2 => Ok(DerivOrder::Second),
            other => Err(Error::InvalidArgument(format!("derivative order must be 1 or 2, got {other}"))),
        }
    }
}

impl RadialGrid {
    pub fn new(r1: f64, r2: f64, nr: usize) -> Result<Self> {
        build_radial_grid(r1, r2, nr)
    }

    pub fn len(&self) -> usize {
        self.nr + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest spacing between neighbouring nodes.
    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[0] - w[1]).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Local spacing at node `j`: half the distance between its neighbours.
    pub fn local_spacing(&self, j: usize) -> f64 {
        let n = self.nr;
        match j {
            0 => self.nodes[0] - self.nodes[1],
            j if j == n => self.nodes[n - 1] - self.nodes[n],
            j => 0.5 * (self.nodes[j - 1] - self.nodes[j + 1]),
        }
    }

    /// Sample a function of `r` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    pub fn sample_c(&self, f: impl Fn(f64) -> C64) -> Vec<C64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }
}

/// Builds the Gauss–Lobatto grid `r_j = (R1+R2)/2 + (R2−R1)/2 · cos(jπ/N)`.
pub fn build_radial_grid(r1: f64, r2: f64, nr: usize) -> Result<RadialGrid> {
    if !(r1 > 0.0) || !r1.is_finite() {
        return Err(Error::InvalidArgument(format!("inner radius must be positive (the axis is excluded), got {r1}")));
    }
    if !(r2 > r1) || !r2.is_finite() {
        return Err(Error::InvalidArgument(format!("outer radius must exceed inner radius, got R1={r1}, R2={r2}")));
    }
    if nr < 4 {
        return Err(Error::InvalidArgument(format!("radial degree must be at least 4, got {nr}")));
    }
    let n = nr;
    let half = 0.5 * (r2 - r1);
    let mid = 0.5 * (r1 + r2);
    let x: Vec<f64> = (0..=n).map(|j| (j as f64 * PI / n as f64).cos()).collect();
    let mut nodes: Vec<f64> = x.iter().map(|&x| mid + half * x).collect();
    nodes[0] = r2;
    nodes[n] = r1;

    // Chebyshev differentiation on [-1, 1]; differences through the sine
    // identity to avoid cancellation, diagonal by the negative-sum trick.
    let c = |j: usize| -> f64 {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = RealMatrix::zeros(n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            let a = ((i + j) as f64) * PI / (2.0 * n as f64);
            let b = ((j as f64) - (i as f64)) * PI / (2.0 * n as f64);
            let dx = 2.0 * a.sin() * b.sin();
            d.set(i, j, c(i) / c(j) / dx);
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d.get(i, j)).sum();
        d.set(i, i, -s);
    }
    let mut d1 = RealMatrix::zeros(n + 1);
    for i in 0..=n {
        for j in 0..=n {
            d1.set(i, j, d.get(i, j) / half);
        }
    }
    let d2 = d1.matmul(&d1);

    let cc = clenshaw_curtis(n);
    let weights = cc.iter().zip(&nodes).map(|(w, r)| w * half * r).collect();

    Ok(RadialGrid { r1, r2, nr, nodes, d1, d2, weights })
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the nodes `cos(jπ/N)`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n.saturating_sub(1)];
    let theta = |j: usize| j as f64 * PI / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta(idx + 1)).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(idx + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta(idx + 1)).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    w
}

/// `D1·values` or `D2·values`.
pub fn radial_derivative(grid: &RadialGrid, values: &[f64], order: DerivOrder) -> Result<Vec<f64>> {
    check_len(grid, values.len())?;
    Ok(match order {
        DerivOrder::First => grid.d1.apply(values),
        DerivOrder::Second => grid.d2.apply(values),
    })
}

/// `≈ ∫_{R1}^{R2} f(r) r dr`.
pub fn radial_integral(grid: &RadialGrid, values: &[f64]) -> Result<f64> {
    check_len(grid, values.len())?;
    Ok(grid.weights.iter().zip(values).map(|(w, f)| w * f).sum())
}

fn check_len(grid: &RadialGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), got: len });
    }
    Ok(())
}

/// Azimuthal and axial wavenumber pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: i32,
    pub k: i32,
}

impl ModeIndex {
    pub const fn new(m: i32, k: i32) -> Self {
        Self { m, k }
    }

    pub fn conj(self) -> Self {
        Self { m: -self.m, k: -self.k }
    }

    pub fn is_mean(self) -> bool {
        self.m == 0 && self.k == 0
    }

    /// One representative of each `{(m,k), (−m,−k)}` pair.
    pub fn is_canonical(self) -> bool {
        self.m > 0 || (self.m == 0 && self.k >= 0)
    }

    pub fn canonical(self) -> Self {
        if self.is_canonical() {
            self
        } else {
            self.conj()
        }
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.m, self.k)
    }
}

/// Fourier truncation `|m| ≤ mmax`, `|k| ≤ kmax` with axial period `2π·lz`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub mmax: usize,
    pub kmax: usize,
    pub lz: f64,
}

impl ModeSet {
    pub fn new(mmax: usize, kmax: usize) -> Self {
        Self { mmax, kmax, lz: 1.0 }
    }

    pub fn with_lz(mut self, lz: f64) -> Self {
        self.lz = lz;
        self
    }

    pub fn nm(&self) -> usize {
        2 * self.mmax + 1
    }

    pub fn nk(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn count(&self) -> usize {
        self.nm() * self.nk()
    }

    pub fn contains(&self, mode: ModeIndex) -> bool {
        mode.m.unsigned_abs() as usize <= self.mmax && mode.k.unsigned_abs() as usize <= self.kmax
    }

    /// Flat index, `m` outer and `k` inner.
    pub fn index(&self, mode: ModeIndex) -> usize {
        debug_assert!(self.contains(mode), "mode {mode} outside truncation");
        let im = (mode.m + self.mmax as i32) as usize;
        let ik = (mode.k + self.kmax as i32) as usize;
        im * self.nk() + ik
    }

    pub fn mode_at(&self, idx: usize) -> ModeIndex {
        let im = idx / self.nk();
        let ik = idx % self.nk();
        ModeIndex::new(im as i32 - self.mmax as i32, ik as i32 - self.kmax as i32)
    }

    pub fn iter(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        (0..self.count()).map(move |i| self.mode_at(i))
    }

    pub fn canonical(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.iter().filter(|m| m.is_canonical())
    }

    /// Axial wavenumber `k / lz`.
    pub fn kz(&self, k: i32) -> f64 {
        k as f64 / self.lz
    }

    /// Volume factor `(2π)·(2π·lz)` contributed by the periodic directions.
    pub fn periodic_area(&self) -> f64 {
        4.0 * PI * PI * self.lz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_follow_cosine_map() {
        let g = build_radial_grid(1.0, 2.0, 4).unwrap();
        let expected = [2.0, 1.853_553_390_593_273_7, 1.5, 1.146_446_609_406_726_3, 1.0];
        for (a, b) in g.nodes.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(g.nodes.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(build_radial_grid(0.0, 2.0, 8).is_err());
        assert!(build_radial_grid(-1.0, 2.0, 8).is_err());
        assert!(build_radial_grid(2.0, 2.0, 8).is_err());
        assert!(build_radial_grid(3.0, 2.0, 8).is_err());
        assert!(build_radial_grid(1.0, 2.0, 3).is_err());
    }

    #[test]
    fn derivative_annihilates_constants() {
        for n in [4, 8, 17, 32, 64] {
            let g = build_radial_grid(1.0, 2.0, n).unwrap();
            let d = g.d1.apply(&vec![1.0; n + 1]);
            let worst = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst <= 1e-12 * g.d1.max_abs(), "n={n}: {worst}");
            let d2 = radial_derivative(&g, &vec![1.0; n + 1], DerivOrder::Second).unwrap();
            assert!(d2.iter().all(|v| v.abs() < 1e-8 * g.d2.max_abs()));
        }
    }

    #[test]
    fn derivative_exact_on_polynomials() {
        let n = 16;
        let g = build_radial_grid(1.0, 2.0, n).unwrap();
        for p in 1..=n as i32 {
            let f = g.sample(|r| r.powi(p));
            let df = g.d1.apply(&f);
            let scale = p as f64 * 2f64.powi(p - 1);
            for (j, &r) in g.nodes.iter().enumerate() {
                let exact = p as f64 * r.powi(p - 1);
                assert!((df[j] - exact).abs() <= 1e-10 * scale, "p={p} j={j}");
            }
        }
    }

    #[test]
    fn r_squared_first_derivative() {
        let g = build_radial_grid(1.0, 2.0, 12).unwrap();
        let f = g.sample(|r| r * r);
        let df = radial_derivative(&g, &f, DerivOrder::First).unwrap();
        for (d, r) in df.iter().zip(&g.nodes) {
            assert!((d - 2.0 * r).abs() <= 1e-10);
        }
    }

    #[test]
    fn log_derivative_converges_spectrally() {
        let err = |n: usize| {
            let g = build_radial_grid(1.0, 2.0, n).unwrap();
            let f = g.sample(f64::ln);
            let df = g.d1.apply(&f);
            df.iter().zip(&g.nodes).map(|(d, r)| (d - 1.0 / r).abs()).fold(0.0, f64::max)
        };
        let e8 = err(8);
        let e16 = err(16);
        let e32 = err(32);
        let e64 = err(64);
        assert!(e16 <= e8 / 10.0);
        assert!(e32 <= e16 / 10.0 || e32 < 1e-12);
        assert!(e64 <= e32 / 10.0 || e64 < 1e-10, "e32={e32} e64={e64}");
    }

    #[test]
    fn weights_integrate_jacobian() {
        let g = build_radial_grid(1.0, 2.0, 16).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 1.5).abs() < 1e-12 * 1.5);
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let inv = radial_integral(&g, &g.sample(|r| 1.0 / r)).unwrap();
        assert!((inv - 1.0).abs() < 1e-12);
        assert_eq!(radial_integral(&g, &vec![0.0; 17]).unwrap(), 0.0);
        for n in [5, 7, 9, 33] {
            let g = build_radial_grid(0.5, 3.0, n).unwrap();
            let total: f64 = g.weights.iter().sum();
            assert!((total - (9.0 - 0.25) / 2.0).abs() < 1e-12 * 4.375, "n={n}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = build_radial_grid(1.0, 2.0, 8).unwrap();
        assert!(radial_integral(&g, &[1.0; 3]).is_err());
        assert!(radial_derivative(&g, &[1.0; 3], DerivOrder::First).is_err());
        assert!(DerivOrder::try_from(3).is_err());
    }

    #[test]
    fn integration_by_parts_holds_discretely() {
        // f vanishing at both ends: ∫ f' r dr = -∫ f dr.
        let g = build_radial_grid(1.0, 2.0, 40).unwrap();
        let f = g.sample(|r| (r - 1.0) * (2.0 - r) * (3.0 * r).sin());
        let df = g.d1.apply(&f);
        let lhs = radial_integral(&g, &df).unwrap();
        let over_r: Vec<f64> = f.iter().zip(&g.nodes).map(|(f, r)| f / r).collect();
        let rhs = -radial_integral(&g, &over_r).unwrap();
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn mode_set_indexing_round_trips() {
        let ms = ModeSet::new(3, 2);
        for (i, mode) in ms.iter().enumerate() {
            assert_eq!(ms.index(mode), i);
        }
        assert_eq!(ms.canonical().count(), (ms.count() + 1) / 2);
        assert!(ModeIndex::new(0, 0).is_canonical());
        assert!(!ModeIndex::new(0, -1).is_canonical());
        assert_eq!(ModeIndex::new(-2, 1).canonical(), ModeIndex::new(2, -1));
    }
}
