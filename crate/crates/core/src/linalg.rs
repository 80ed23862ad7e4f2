//! Thin wrappers over `faer` for the dense complex kernels used per mode.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn matvec(a: &CMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
    out
}

/// `a^H · x`.
pub fn matvec_adj(a: &CMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            let mut s = ZERO;
            for (i, xi) in x.iter().enumerate() {
                s += col[i].conj() * xi;
            }
            s
        })
        .collect()
}

pub fn col_to_vec(a: &CMat, j: usize) -> Vec<C64> {
    a.col(j).iter().copied().collect()
}

pub fn from_cols(rows: usize, cols: &[Vec<C64>]) -> CMat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `a + s·I`.
pub fn shift(a: &CMat, s: C64) -> CMat {
    let mut out = a.clone();
    for i in 0..a.nrows().min(a.ncols()) {
        out[(i, i)] += s;
    }
    out
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for v in a.col(j).iter() {
            m = m.max(v.norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis (columns) of the null space of `c`.
///
/// Singular values below `rel_tol · σ_max` count as zero.
pub fn null_space(c: &CMat, rel_tol: f64) -> Result<CMat> {
    let n = c.ncols();
    if c.nrows() == 0 {
        return Ok(identity(n));
    }
    let svd = c.svd().map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
    let rank = (0..s.nrows()).filter(|&i| s[i].re > rel_tol * smax).count();
    let v = svd.V();
    Ok(Mat::from_fn(n, n - rank, |i, j| v[(i, rank + j)]))
}

pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMat,
}

pub fn eigen(a: &CMat) -> Result<EigenDecomposition> {
    let evd = a.eigen().map_err(|e| Error::Linalg(format!("eigen: {e:?}")))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok(EigenDecomposition { values, vectors: evd.U().to_owned() })
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    a.eigenvalues().map_err(|e| Error::Linalg(format!("eigenvalues: {e:?}")))
}

/// Largest singular value.
pub fn norm2(a: &CMat) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let s = a.singular_values().map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Spectral condition number `σ_max/σ_min`.
pub fn cond2(a: &CMat) -> Result<f64> {
    let s = a.singular_values().map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        _ => Ok(f64::INFINITY),
    }
}

/// Partial-pivoting LU factorisation kept for repeated solves.
pub struct Lu {
    inner: faer::linalg::solvers::PartialPivLu<C64>,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Linalg("LU of non-square matrix".into()));
        }
        let lu = Self { inner: a.partial_piv_lu(), n: a.nrows() };
        // Partial pivoting does not fail on singular input; probe instead.
        let probe = lu.solve(&vec![ONE; lu.n]);
        if probe.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Linalg("singular matrix in LU".into()));
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.inner.solve_in_place(rhs.as_mut());
        rhs.col(0).iter().copied().collect()
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.inner.solve(b)
    }

    pub fn inverse(&self) -> CMat {
        self.inner.inverse()
    }
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    Ok(Lu::new(a)?.inverse())
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.col(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let a = scale(a, C64::new(0.5f64.powi(s), 0.0));
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| C64::new(B[k], 0.0);
    let u_inner = &a6 * (scale(&a6, c(13)) + scale(&a4, c(11)) + scale(&a2, c(9)))
        + scale(&a6, c(7))
        + scale(&a4, c(5))
        + scale(&a2, c(3))
        + scale(&id, c(1));
    let u = &a * u_inner;
    let v = &a6 * (scale(&a6, c(12)) + scale(&a4, c(10)) + scale(&a2, c(8)))
        + scale(&a6, c(6))
        + scale(&a4, c(4))
        + scale(&a2, c(2))
        + scale(&id, c(0));
    let p = &v + &u;
    let q = &v - &u;
    let mut r = Lu::new(&q)?.solve_mat(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Principal square root by the Denman–Beavers iteration.
pub fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yi = inverse(&y)?;
        let zi = inverse(&z)?;
        let y_next = scale(&(&y + &zi), C64::new(0.5, 0.0));
        let z_next = scale(&(&z + &yi), C64::new(0.5, 0.0));
        let change = frobenius(&(&y_next - &y)) / frobenius(&y_next).max(f64::MIN_POSITIVE);
        y = y_next;
        z = z_next;
        if change < 1e-14 {
            return Ok(y);
        }
    }
    Err(Error::Linalg("square-root iteration did not converge".into()))
}

/// Principal logarithm by inverse scaling and squaring.
pub fn logm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = identity(n);
    let mut x = a.clone();
    let mut k = 0;
    while frobenius(&(&x - &id)) > 0.1 {
        x = sqrtm(&x)?;
        k += 1;
        if k > 60 {
            return Err(Error::Linalg("logarithm: spectrum too close to the branch cut".into()));
        }
    }
    // log(I + E) through the Gregory series log((I+Y)/(I-Y)) = 2Σ Y^{2j+1}/(2j+1),
    // Y = E(2I + E)^{-1}, which converges fast for ‖E‖ ≤ 0.1.
    let e = &x - &id;
    let y = Lu::new(&(&e + scale(&id, C64::new(2.0, 0.0))))?.solve_mat(&e);
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for j in 1..40 {
        term = &term * &y2;
        let add = scale(&term, C64::new(1.0 / (2 * j + 1) as f64, 0.0));
        let small = frobenius(&add) < 1e-18 * frobenius(&sum).max(1e-300);
        sum = sum + add;
        if small {
            break;
        }
    }
    Ok(scale(&sum, C64::new(2.0 * 2f64.powi(k), 0.0)))
}

/// `x^H · diag(w) · y`.
pub fn wdot(w: &[f64], x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).zip(w).map(|((a, b), w)| a.conj() * b * *w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_matrix(n: usize) -> CMat {
        Mat::from_fn(n, n, |i, j| {
            let x = (i * 7 + j * 13) as f64;
            c((x * 0.37).sin(), (x * 0.11).cos() * 0.5) + if i == j { c(-3.0, 0.0) } else { ZERO }
        })
    }

    #[test]
    fn null_space_is_annihilated_and_orthonormal() {
        let a = Mat::from_fn(2, 5, |i, j| c((i + j) as f64, (i * j) as f64));
        let z = null_space(&a, 1e-13).unwrap();
        assert_eq!(z.ncols(), 3);
        assert!(max_abs(&(&a * &z)) < 1e-12);
        let g = z.adjoint() * &z;
        assert!(max_abs(&(g - identity(3))) < 1e-12);
    }

    #[test]
    fn expm_matches_diagonal_and_rotation() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { c(-(i as f64) * 4.0, 1.0) } else { ZERO });
        let e = expm(&d).unwrap();
        for i in 0..3 {
            let exact = c(-(i as f64) * 4.0, 1.0).exp();
            assert!((e[(i, i)] - exact).norm() < 1e-13);
        }
        // exp of a large rotation generator stays unitary.
        let t = 30.0;
        let r = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(t, 0.0),
            (1, 0) => c(-t, 0.0),
            _ => ZERO,
        });
        let e = expm(&r).unwrap();
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-11);
        assert!((e[(0, 1)].re - t.sin()).abs() < 1e-11);
    }

    #[test]
    fn expm_agrees_with_eigendecomposition() {
        let a = sample_matrix(6);
        let e = expm(&a).unwrap();
        let ev = eigen(&a).unwrap();
        let vinv = inverse(&ev.vectors).unwrap();
        let d = Mat::from_fn(6, 6, |i, j| if i == j { ev.values[i].exp() } else { ZERO });
        let e2 = &ev.vectors * d * vinv;
        assert!(max_abs(&(e - e2)) < 1e-11);
    }

    #[test]
    fn sqrt_and_log_invert_square_and_exp() {
        let a = shift(&sample_matrix(5), c(8.0, 0.0));
        let s = sqrtm(&a).unwrap();
        assert!(max_abs(&(&s * &s - &a)) < 1e-11 * max_abs(&a));
        let l = logm(&a).unwrap();
        let back = expm(&l).unwrap();
        assert!(max_abs(&(back - &a)) < 1e-10 * max_abs(&a));
    }

    #[test]
    fn lu_solves_and_detects_singularity() {
        let a = sample_matrix(7);
        let lu = Lu::new(&a).unwrap();
        let b: Vec<C64> = (0..7).map(|i| c(i as f64, 1.0)).collect();
        let x = lu.solve(&b);
        let r = matvec(&a, &x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-12));
        assert!(Lu::new(&zeros(3, 3)).is_err());
    }

    #[test]
    fn norm2_of_diagonal() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { c(i as f64 + 1.0, 0.0) } else { ZERO });
        assert!((norm2(&d).unwrap() - 3.0).abs() < 1e-14);
        assert!((cond2(&d).unwrap() - 3.0).abs() < 1e-13);
    }
}
