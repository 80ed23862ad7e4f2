use std::sync::Arc;

use super::*;
use crate::oper::{assemble, assemble_block, assemble_dynamo_block};
use crate::steady::solve_tc_coefficients;

fn preset() -> TCProfile {
    solve_tc_coefficients(1.0, 2.0, 3.0, 1.0).unwrap()
}

fn grid(nr: usize) -> Arc<RadialGrid> {
    Arc::new(build_radial_grid(1.0, 2.0, nr).unwrap())
}

#[test]
fn motionless_dynamo_keeps_real_dissipative_pairs() {
    let ms = ModeSet::new(2, 2);
    let eps = 0.05;
    let op = assemble_dynamo_block(ModeIndex::new(1, 1), &preset().scaled(0.0), eps, grid(24), &ms).unwrap();
    let rep = mode_spectrum(&op).unwrap();
    assert!(rep.retained.len() >= 6, "{}", rep.retained.len());
    for &i in &rep.retained {
        let l = rep.eigenvalues[i];
        assert!(l.im.abs() <= 1e-8 * l.norm());
        assert!(l.re <= -eps);
    }
    let lead = rep.leader().unwrap();
    assert_eq!(rep.eigenvalues[0], lead);
}

#[test]
fn retained_pairs_pass_the_filters_and_are_normalised() {
    let ms = ModeSet::new(2, 2);
    let op = assemble_dynamo_block(ModeIndex::new(1, -1), &preset(), 0.05, grid(24), &ms).unwrap();
    let rep = mode_spectrum(&op).unwrap();
    assert!(!rep.retained.is_empty());
    let w = op.weights();
    for (slot, &i) in rep.retained.iter().enumerate() {
        let s = 1.0 + rep.eigenvalues[i].norm();
        assert!(rep.residuals[i] <= RESIDUAL_TOL * s);
        assert!(rep.div_scores[i] <= DIV_TOL);
        assert!(rep.resolution_drift[i] <= DRIFT_TOL * s);
        let x = &rep.vectors[slot];
        assert!((linalg::wdot(&w, x, x).re - 1.0).abs() < 1e-12);
        let big = x.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        assert!(big.im.abs() < 1e-14 && big.re > 0.0);
    }
    for w in rep.eigenvalues.windows(2) {
        assert!(w[0].re >= w[1].re);
    }
    // The highest radial modes are under-resolved and must be dropped.
    assert!(rep.retained.len() < rep.eigenvalues.len());
    let rows = rep.rows();
    assert_eq!(rows.len(), rep.retained.len());
    assert_eq!((rows[0].m, rows[0].k), (1, -1));
}

#[test]
fn conjugate_modes_have_conjugate_leaders() {
    let ms = ModeSet::new(2, 2);
    let p = preset();
    let a = mode_spectrum(&assemble_dynamo_block(ModeIndex::new(2, 1), &p, 0.05, grid(24), &ms).unwrap()).unwrap();
    let b = mode_spectrum(&assemble_dynamo_block(ModeIndex::new(-2, -1), &p, 0.05, grid(24), &ms).unwrap()).unwrap();
    let (la, lb) = (a.leader().unwrap(), b.leader().unwrap());
    assert!((la - lb.conj()).norm() <= 1e-9 * (1.0 + la.norm()), "{la} vs {lb}");
}

#[test]
fn block_spectrum_is_the_union_of_its_blocks() {
    let ms = ModeSet::new(2, 2);
    let p = preset();
    let md = ModeIndex::new(1, 0);
    let g = grid(20);
    let blk = mode_spectrum(&assemble_block(md, &p, 2.0, 0.1, g.clone(), &ms).unwrap()).unwrap();
    let v = mode_spectrum(&assemble(OperatorKind::LinNs { nu: 2.0 }, md, &p, g.clone(), &ms).unwrap()).unwrap();
    let b = mode_spectrum(&assemble(OperatorKind::Dynamo { eps: 0.1 }, md, &p, g.clone(), &ms).unwrap()).unwrap();
    assert_eq!(blk.eigenvalues.len(), v.eigenvalues.len() + b.eigenvalues.len());
    assert_eq!(blk.retained.len(), v.retained.len() + b.retained.len());
    let n = 3 * g.len();
    for (slot, &i) in blk.retained.iter().enumerate() {
        let x = &blk.vectors[slot];
        let (zero, other) = match blk.blocks[i] {
            Block::Velocity => (&x[n..], &x[..n]),
            Block::Magnetic => (&x[..n], &x[n..]),
        };
        assert!(zero.iter().all(|c| *c == linalg::ZERO));
        assert!(other.iter().any(|c| *c != linalg::ZERO));
    }
    let top = if v.leader().unwrap().re > b.leader().unwrap().re { Block::Velocity } else { Block::Magnetic };
    assert_eq!(blk.leader_block(), Some(top));
}

#[test]
fn scan_visits_one_of_each_conjugate_pair() {
    let ms = ModeSet::new(2, 3);
    let list = scan_modes(&ms);
    assert_eq!(list.len(), 4 + 2 * 7);
    assert!(list.iter().all(|m| m.is_canonical()));
}

#[test]
fn rightmost_scan_is_deterministic_and_maximal() {
    let ms = ModeSet::new(2, 2);
    let p = preset();
    let kind = OperatorKind::Dynamo { eps: 0.05 };
    let a = rightmost_eigen(kind, &p, grid(24), &ms).unwrap();
    let b = rightmost_eigen(kind, &p, grid(24), &ms).unwrap();
    assert_eq!(a.mode, b.mode);
    assert_eq!(a.leader().unwrap().re.to_bits(), b.leader().unwrap().re.to_bits());
    assert_eq!(a.vectors[0], b.vectors[0]);
    for md in scan_modes(&ms) {
        let op = assemble_kz(kind, md, ms.kz(md.k), &p, grid(24)).unwrap();
        if let Some(l) = mode_spectrum(&op).unwrap().leader() {
            assert!(l.re <= a.leader().unwrap().re, "{md}: {l}");
        }
    }
}

#[test]
fn strong_diffusion_has_no_growing_block_mode() {
    let ms = ModeSet::new(1, 1);
    let rep = rightmost_eigen(OperatorKind::Block { nu: 100.0, eps: 1e3 }, &preset(), grid(16), &ms).unwrap();
    assert!(rep.leader().unwrap().re < 0.0);
}

#[test]
fn sweep_rejects_short_or_narrow_lists() {
    let ms = ModeSet::new(1, 1);
    let p = preset();
    assert!(epsilon_scaling_sweep(&p, &[1e-2, 1e-3, 1e-4], &ms, grid(16)).is_err());
    assert!(epsilon_scaling_sweep(&p, &[1e-2, 8e-3, 6e-3, 4e-3], &ms, grid(16)).is_err());
    assert!(epsilon_scaling_sweep(&p, &[1e-2, -1e-3, 1e-4, 1e-5], &ms, grid(16)).is_err());
}

#[test]
fn scaling_fit_is_invariant_under_unit_change() {
    let eps = [1e-2, 10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5), 1e-4];
    let lam: Vec<f64> = eps.iter().map(|e| 0.7 * e.powf(0.31) * (1.0 + 0.05 * e.ln().sin())).collect();
    let a = scaling_fit(&eps, &lam).unwrap();
    let scaled: Vec<f64> = eps.iter().map(|e| 37.0 * e).collect();
    let b = scaling_fit(&scaled, &lam).unwrap();
    assert!((a.slope - b.slope).abs() < 1e-12);
    assert!((a.stderr - b.stderr).abs() < 1e-12);
    assert!((b.intercept - (a.intercept - a.slope * 37f64.ln())).abs() < 1e-12);
}

#[test]
fn frac_grad_of_zero_is_zero_and_norm_is_finite() {
    let ms = ModeSet::new(2, 2);
    let op = assemble_dynamo_block(ModeIndex::new(1, 1), &preset(), 0.05, grid(16), &ms).unwrap();
    let s = ShiftedOperator::new(&op.reduced, Eta::Relative(0.1), Calculus::Auto).unwrap();
    let h = vec![linalg::ZERO; 9 * op.grid.len()];
    let y = inverse_frac_grad_apply(&op, &s, 0.75, &h).unwrap();
    assert!(y.iter().all(|c| c.norm() == 0.0));
    for alpha in [0.55, 0.95] {
        let r = inverse_frac_grad_check(&op, alpha, Eta::Relative(0.1), Calculus::Auto).unwrap();
        assert!(r.norm.is_finite() && r.norm > 0.0);
    }
    assert!(inverse_frac_grad_check(&op, 0.5, Eta::Relative(0.1), Calculus::Auto).is_err());
}

#[test]
fn frac_grad_norm_bounds_every_tensor() {
    let ms = ModeSet::new(2, 2);
    let op = assemble_dynamo_block(ModeIndex::new(1, 1), &preset(), 0.05, grid(16), &ms).unwrap();
    let s = ShiftedOperator::new(&op.reduced, Eta::Relative(0.1), Calculus::Auto).unwrap();
    let norm = inverse_frac_grad_check(&op, 0.75, Eta::Relative(0.1), Calculus::Auto).unwrap().norm;
    let n = op.grid.len();
    let w: Vec<f64> = (0..9).flat_map(|_| op.grid.weights.iter().copied()).collect();
    for seed in 0..5u32 {
        let h: Vec<C64> = (0..9 * n)
            .map(|i| {
                let t = (i as f64 + 1.0) * (seed as f64 + 0.37);
                C64::new(t.sin(), (1.3 * t).cos())
            })
            .collect();
        let y = inverse_frac_grad_apply(&op, &s, 0.75, &h).unwrap();
        let ny = linalg::vec_norm(&y);
        let nh = linalg::wdot(&w, &h, &h).re.sqrt();
        assert!(ny <= norm * nh * (1.0 + 1e-9), "{ny} > {norm}·{nh}");
    }
}

#[test]
fn semigroup_check_on_a_mode_operator() {
    let ms = ModeSet::new(2, 2);
    let op = assemble_dynamo_block(ModeIndex::new(1, 1), &preset(), 0.05, grid(16), &ms).unwrap();
    let t = log_times(1e-3, 10.0, 9);
    let r = semigroup_smoothing_check(&op, 0.75, Eta::Relative(0.1), &t, Calculus::Auto).unwrap();
    assert!(r.sup.is_finite() && r.sup > 0.0);
    assert!(r.spectral_abscissa < 0.0);
    assert!((r.spectral_abscissa + r.eta).abs() <= 1e-9 * (1.0 + r.lambda.abs()));
    let r0 = semigroup_smoothing_check(&op, 0.0, Eta::Relative(0.1), &[1e-9], Calculus::Auto).unwrap();
    assert!((r0.sup - 1.0).abs() < 1e-3, "{}", r0.sup);
}
