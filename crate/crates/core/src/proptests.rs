//! Property tests across modules.

use std::sync::Arc;

use proptest::prelude::*;

use crate::checkpoint;
use crate::evolve::{detect_crossing, measured_growth_rate, EnergyTrace, Series, TraceSample};
use crate::field::{self, random_divfree, BcTag};
use crate::fit::linear_fit;
use crate::grid::{build_radial_grid, ModeSet};
use crate::lab::{parse_str, SimConfig};
use crate::oper::leray_project;

fn trace_of(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> EnergyTrace {
    let mut tr = EnergyTrace::new(2.0);
    for i in 0..n {
        let t = i as f64 * dt;
        let v = f(t);
        tr.push(TraceSample {
            t,
            ev: 0.0,
            eb: v,
            v_lp: 0.0,
            b_lp: v,
            w_lp: v,
            div_v: 0.0,
            div_b: 0.0,
            dt,
            bc_v: 0.0,
            bc_b: 0.0,
            budget_closure: None,
        });
    }
    tr
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn quadrature_integrates_polynomials(r1 in 0.2f64..3.0, gap in 0.1f64..3.0, nr in 8usize..48, deg in 0u32..8) {
        let g = build_radial_grid(r1, r1 + gap, nr).unwrap();
        let r2 = r1 + gap;
        let q: f64 = g.nodes.iter().zip(&g.weights).map(|(r, w)| w * r.powi(deg as i32)).sum();
        // The weights carry the cylindrical factor r.
        let exact = (r2.powi(deg as i32 + 2) - r1.powi(deg as i32 + 2)) / (deg + 2) as f64;
        prop_assert!((q - exact).abs() <= 1e-11 * exact.abs().max(1.0));
        prop_assert!(g.weights.iter().all(|w| *w > 0.0));
        prop_assert!(g.nodes.windows(2).all(|w| w[1] < w[0]));
        prop_assert_eq!(g.nodes[0], r2);
        prop_assert_eq!(g.nodes[nr], r1);
    }

    #[test]
    fn random_fields_are_solenoidal_and_admissible(seed in any::<u64>(), nr in 16usize..28) {
        let g = Arc::new(build_radial_grid(1.0, 2.0, nr).unwrap());
        let f = random_divfree(seed, BcTag::ConductingMagnetic, g.clone(), ModeSet::new(2, 2));
        let scale = f.l2_norm();
        prop_assert!(field::divergence(&f).l2_norm() <= 1e-10 * scale);
        prop_assert!(field::boundary_residual(&f, BcTag::ConductingMagnetic) <= 1e-10 * f.max_abs());
        prop_assert!(field::boundary_residual(&f, BcTag::DirichletVelocity) <= 1e-10 * f.max_abs());
        prop_assert_eq!(f.reality_defect(), 0.0);
    }

    #[test]
    fn leray_projection_is_idempotent(seed in any::<u64>()) {
        let g = Arc::new(build_radial_grid(1.0, 2.0, 20).unwrap());
        let f = random_divfree(seed, BcTag::None, g.clone(), ModeSet::new(1, 2));
        let c = field::curl(&f);
        let p1 = leray_project(&c).unwrap();
        let p2 = leray_project(&p1).unwrap();
        let mut d = p2.clone();
        d.axpy(-1.0, &p1);
        prop_assert!(d.l2_norm() <= 1e-9 * p1.l2_norm().max(1e-300));
        prop_assert!(p1.l2_norm() <= c.l2_norm() * (1.0 + 1e-10));
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>(), t in -1e6f64..1e6, scale in -300i32..300) {
        let g = Arc::new(build_radial_grid(0.5, 1.75, 14).unwrap());
        let ms = ModeSet::new(1, 2);
        let v = random_divfree(seed, BcTag::DirichletVelocity, g.clone(), ms).scaled(10f64.powi(scale));
        let b = random_divfree(seed ^ 1, BcTag::ConductingMagnetic, g, ms);
        let mut buf = Vec::new();
        checkpoint::write(&mut buf, &[&v, &b], t).unwrap();
        let ck = checkpoint::read(buf.as_slice()).unwrap();
        prop_assert_eq!(ck.time.to_bits(), t.to_bits());
        let (v2, b2) = ck.into_pair().unwrap();
        prop_assert_eq!(v.coeffs(), v2.coeffs());
        prop_assert_eq!(b.coeffs(), b2.coeffs());
    }

    #[test]
    fn line_fit_recovers_exact_lines(a in -10f64..10.0, b in -10f64..10.0, n in 3usize..40) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|x| a + b * x).collect();
        let f = linear_fit(&x, &y).unwrap();
        prop_assert!((f.slope - b).abs() <= 1e-10 * (1.0 + b.abs()));
        prop_assert!((f.intercept - a).abs() <= 1e-10 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn escape_time_of_an_exponential_is_exact(lam in 0.01f64..2.0, delta in 1e-8f64..1e-2, ratio in 2.0f64..1e4) {
        let chi = delta * ratio;
        let t_star = (chi / delta).ln() / lam;
        let tr = trace_of(|t| delta * (lam * t).exp(), 400, 1.1 * t_star / 300.0);
        let t = detect_crossing(&tr, Series::WLp, chi).unwrap();
        prop_assert!((t - t_star).abs() <= 1e-9 * t_star);
        let fit = measured_growth_rate(&tr, (0.0, t_star)).unwrap();
        prop_assert!((fit.slope - lam).abs() <= 1e-9 * lam);
    }

    #[test]
    fn config_survives_a_json_round_trip(eps in 1e-6f64..1.0, nr in 8usize..200, dt in 1e-3f64..10.0, seed in any::<u64>()) {
        let mut cfg = SimConfig::default();
        cfg.physics.eps = eps;
        cfg.resolution.nr = nr;
        cfg.integrator.dt = dt;
        cfg.experiment.seed = seed;
        let back = parse_str(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
