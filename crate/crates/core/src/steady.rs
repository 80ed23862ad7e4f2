//! The Taylor–Couette base flow `u = (0, a1/r + a3 r, a2 log r + a4)` and its
//! steady-state audit.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BcTag, SpectralField, TH, Z};
use crate::grid::{build_radial_grid, ModeIndex, ModeSet, RadialGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TCProfile {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub r1: f64,
    pub r2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Which radial pressure gradient the audit balances against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureForm {
    /// `∂_r p = V²/r = a1²/r³ + 2 a1 a3 / r + a3² r`.
    Centripetal,
    /// `a1²/r³ + a3² r`, the expansion without the cross term.
    WithoutCrossTerm,
}

pub fn solve_tc_coefficients(r1: f64, r2: f64, beta1: f64, beta2: f64) -> Result<TCProfile> {
    if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < R1 < R2, got R1={r1}, R2={r2}")));
    }
    if beta1 == 0.0 || beta2 == 0.0 || !beta1.is_finite() || !beta2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wall speeds must be finite and nonzero, got beta1={beta1}, beta2={beta2}"
        )));
    }
    let a3 = beta1 * r2 / (r2 * r2 - r1 * r1);
    let a1 = -a3 * r1 * r1;
    let a2 = beta2 / (r2 / r1).ln();
    let a4 = -a2 * r1.ln();
    Ok(TCProfile { a1, a2, a3, a4, r1, r2, beta1, beta2 })
}

impl TCProfile {
    /// Same geometry with every coefficient multiplied by `s`. `s = 0` gives
    /// the motionless profile used to isolate diffusion in tests.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a1: self.a1 * s,
            a2: self.a2 * s,
            a3: self.a3 * s,
            a4: self.a4 * s,
            beta1: self.beta1 * s,
            beta2: self.beta2 * s,
            ..*self
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a1 == 0.0 && self.a2 == 0.0 && self.a3 == 0.0 && self.a4 == 0.0
    }

    /// Azimuthal velocity `V(r)`.
    pub fn v(&self, r: f64) -> f64 {
        self.a1 / r + self.a3 * r
    }

    pub fn dv(&self, r: f64) -> f64 {
        -self.a1 / (r * r) + self.a3
    }

    pub fn d2v(&self, r: f64) -> f64 {
        2.0 * self.a1 / (r * r * r)
    }

    /// Axial velocity `W(r)`.
    pub fn w(&self, r: f64) -> f64 {
        self.a2 * r.ln() + self.a4
    }

    pub fn dw(&self, r: f64) -> f64 {
        self.a2 / r
    }

    pub fn d2w(&self, r: f64) -> f64 {
        -self.a2 / (r * r)
    }

    /// Angular velocity `Ω = V/r`.
    pub fn omega(&self, r: f64) -> f64 {
        self.v(r) / r
    }

    pub fn pressure_gradient(&self, r: f64, form: PressureForm) -> f64 {
        match form {
            PressureForm::Centripetal => self.v(r).powi(2) / r,
            PressureForm::WithoutCrossTerm => self.a1 * self.a1 / r.powi(3) + self.a3 * self.a3 * r,
        }
    }

    /// `[V(R1), W(R1), V(R2) − β1, W(R2) − β2]`.
    pub fn bc_residuals(&self) -> [f64; 4] {
        [self.v(self.r1), self.w(self.r1), self.v(self.r2) - self.beta1, self.w(self.r2) - self.beta2]
    }

    /// `‖u‖_{L²(Ω)}` with the periodic area of `modes`.
    pub fn l2_norm(&self, modes: &ModeSet) -> f64 {
        let g = reference_grid(self.r1, self.r2);
        let integrand: Vec<f64> = g.nodes.iter().map(|&r| self.v(r).powi(2) + self.w(r).powi(2)).collect();
        let s: f64 = integrand.iter().zip(&g.weights).map(|(f, w)| f * w).sum();
        (modes.periodic_area() * s).sqrt()
    }

    /// `max_j |u| + |∂_r u| + |u|/r` over the nodes of `grid`.
    pub fn w1inf_norm(&self, grid: &RadialGrid) -> f64 {
        grid.nodes
            .iter()
            .map(|&r| {
                let u = self.v(r).hypot(self.w(r));
                let du = self.dv(r).hypot(self.dw(r));
                u + du + u / r
            })
            .fold(0.0, f64::max)
    }
}

fn reference_grid(r1: f64, r2: f64) -> RadialGrid {
    build_radial_grid(r1, r2, 64).expect("profile geometry was validated")
}

/// The profile as a field supported on the mean mode.
pub fn evaluate_tc(profile: &TCProfile, grid: Arc<RadialGrid>, modes: ModeSet) -> SpectralField {
    let mut f = SpectralField::zeros(grid.clone(), modes, BcTag::None);
    let md = ModeIndex::new(0, 0);
    let v = grid.sample_c(|r| C64::new(profile.v(r), 0.0));
    let w = grid.sample_c(|r| C64::new(profile.w(r), 0.0));
    f.mode_mut(TH, md).copy_from_slice(&v);
    f.mode_mut(Z, md).copy_from_slice(&w);
    f
}

/// `‖(u·∇)u + ∇p − νΔu‖_{L²} / ‖u‖_{L²}` with the centripetal pressure.
pub fn ns_residual(profile: &TCProfile, nu: f64, grid: &RadialGrid) -> Result<f64> {
    ns_residual_with(profile, nu, grid, PressureForm::Centripetal)
}

/// As [`ns_residual`] for a chosen pressure gradient.
///
/// The profile and its derivatives are evaluated in closed form at the
/// nodes; `1/r` and `log r` are not polynomials, so collocation derivatives
/// would bury the balance under truncation error on coarse grids.
pub fn ns_residual_with(profile: &TCProfile, nu: f64, grid: &RadialGrid, form: PressureForm) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    let mut res2 = 0.0;
    let mut u2 = 0.0;
    for (&r, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = profile.v(r);
        let wz = profile.w(r);
        // (u·∇)u = (−V²/r, 0, 0); Δu = (0, V'' + V'/r − V/r², W'' + W'/r).
        let adv_r = -v * v / r;
        let lap_t = profile.d2v(r) + profile.dv(r) / r - v / (r * r);
        let lap_z = profile.d2w(r) + profile.dw(r) / r;
        let rr = adv_r + profile.pressure_gradient(r, form);
        let rt = -nu * lap_t;
        let rz = -nu * lap_z;
        res2 += w * (rr * rr + rt * rt + rz * rz);
        u2 += w * (v * v + wz * wz);
    }
    if u2 == 0.0 {
        return Ok(res2.sqrt());
    }
    Ok((res2 / u2).sqrt())
}

/// Same residual with every derivative taken by collocation; converges
/// spectrally to [`ns_residual`] and is reported alongside it.
pub fn ns_residual_collocated(profile: &TCProfile, nu: f64, grid: Arc<RadialGrid>) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    let modes = ModeSet::new(0, 0);
    let u = evaluate_tc(profile, grid.clone(), modes);
    let lap = crate::field::vector_laplacian(&u);
    let md = ModeIndex::new(0, 0);
    let mut res = SpectralField::zeros(grid.clone(), modes, BcTag::None);
    for j in 0..grid.len() {
        let r = grid.nodes[j];
        let v = profile.v(r);
        res.mode_mut(0, md)[j] = C64::new(-v * v / r + profile.pressure_gradient(r, PressureForm::Centripetal), 0.0);
        res.mode_mut(TH, md)[j] = -lap.mode(TH, md)[j] * nu;
        res.mode_mut(Z, md)[j] = -lap.mode(Z, md)[j] * nu;
    }
    Ok(res.l2_norm() / u.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> TCProfile {
        solve_tc_coefficients(1.0, 2.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn preset_coefficients() {
        let p = preset();
        assert!((p.a1 + 2.0).abs() < 1e-15);
        assert!((p.a2 - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((p.a2 - 1.442_695_040_888_963_4).abs() < 1e-12);
        assert!((p.a3 - 2.0).abs() < 1e-15);
        assert!(p.a4.abs() < 1e-15);
        assert!((p.v(2.0) - 3.0).abs() < 1e-14);
        for r in p.bc_residuals() {
            assert!(r.abs() <= 1e-12 * 3.0);
        }
    }

    #[test]
    fn unit_log_ratio() {
        let e = std::f64::consts::E;
        let p = solve_tc_coefficients(1.0, e, 0.7, 1.0).unwrap();
        assert!((p.a2 - 1.0).abs() < 1e-15);
        assert!(p.a4.abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(solve_tc_coefficients(1.0, 2.0, 0.0, 1.0).is_err());
        assert!(solve_tc_coefficients(1.0, 2.0, 1.0, 0.0).is_err());
        assert!(solve_tc_coefficients(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(solve_tc_coefficients(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn evaluated_profile_matches_wall_data() {
        let p = preset();
        let g = Arc::new(build_radial_grid(1.0, 2.0, 16).unwrap());
        let u = evaluate_tc(&p, g.clone(), ModeSet::new(1, 1));
        let md = ModeIndex::new(0, 0);
        let n = g.nr;
        assert!(u.mode(TH, md)[n].norm() < 1e-15 && u.mode(Z, md)[n].norm() < 1e-15);
        assert!((u.mode(TH, md)[0].re - 3.0).abs() < 1e-14);
        assert!((u.mode(Z, md)[0].re - 1.0).abs() < 1e-14);
        assert!(crate::field::divergence(&u).max_abs() < 1e-13);
    }

    #[test]
    fn residual_vanishes_for_all_viscosities() {
        let p = preset();
        for nr in [8, 32, 96] {
            let g = build_radial_grid(1.0, 2.0, nr).unwrap();
            for nu in [0.1, 1.0, 100.0] {
                assert!(ns_residual(&p, nu, &g).unwrap() <= 1e-10);
            }
            let bad = ns_residual_with(&p, 1.0, &g, PressureForm::WithoutCrossTerm).unwrap();
            assert!(bad > 1e-2, "{bad}");
        }
        assert!(ns_residual(&p, 0.0, &build_radial_grid(1.0, 2.0, 8).unwrap()).is_err());
    }

    #[test]
    fn printed_pressure_residual_is_the_cross_term() {
        // Oracle: ‖2a1a3/r‖ / ‖u‖ with both norms by independent quadrature.
        let p = preset();
        let g = build_radial_grid(1.0, 2.0, 64).unwrap();
        let num: f64 = g.nodes.iter().zip(&g.weights).map(|(&r, &w)| w * (2.0 * p.a1 * p.a3 / r).powi(2)).sum();
        let den: f64 = g.nodes.iter().zip(&g.weights).map(|(&r, &w)| w * (p.v(r).powi(2) + p.w(r).powi(2))).sum();
        let bad = ns_residual_with(&p, 3.0, &g, PressureForm::WithoutCrossTerm).unwrap();
        assert!((bad - (num / den).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collocated_residual_converges() {
        let p = preset();
        let coarse = ns_residual_collocated(&p, 1.0, Arc::new(build_radial_grid(1.0, 2.0, 8).unwrap())).unwrap();
        let fine = ns_residual_collocated(&p, 1.0, Arc::new(build_radial_grid(1.0, 2.0, 32).unwrap())).unwrap();
        assert!(fine < coarse / 100.0 && fine < 1e-9, "{coarse} {fine}");
    }

    #[test]
    fn w1inf_increases_to_the_analytic_value() {
        let p = preset();
        // Maximum sits at the outer wall: √10 (1 + 1/2) + √(2.5² + (a2/2)²).
        let exact = 10f64.sqrt() * 1.5 + (2.5f64.powi(2) + (p.a2 / 2.0).powi(2)).sqrt();
        let mut prev = 0.0;
        for nr in [8, 16, 32] {
            let v = p.w1inf_norm(&build_radial_grid(1.0, 2.0, nr).unwrap());
            assert!(v >= prev && v <= exact + 1e-12);
            prev = v;
        }
        assert!((prev - exact).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_matches_closed_form() {
        // ∫(V² + W²) r dr on [1,2] for the preset, by hand:
        // V² r = 4/r − 8 r + 4 r³, W² r = r log² r / log² 2.
        let p = preset();
        let ln2 = 2f64.ln();
        let v_part = 4.0 * ln2 - 12.0 + 15.0;
        let w_part = (2.0 * ln2 * ln2 - 2.0 * ln2 + 0.75) / (ln2 * ln2);
        let area = 4.0 * std::f64::consts::PI.powi(2);
        let exact = (area * (v_part + w_part)).sqrt();
        assert!((p.l2_norm(&ModeSet::new(0, 0)) - exact).abs() < 1e-12 * exact);
    }
}
