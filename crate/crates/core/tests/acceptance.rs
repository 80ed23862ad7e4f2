//! End-to-end acceptance checks at the default (production) setup.
//!
//! Each test writes one `criterion N: PASS|FAIL` line straight to stdout so
//! the summary survives output capture. The sweep and the leading eigenpair
//! are computed once and shared.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use mhdtc::field::{self, random_divfree, BcTag, ScalarField};
use mhdtc::grid::{build_radial_grid, ModeSet};
use mhdtc::lab::{EigenCache, Lab, Report, SimConfig};
use mhdtc::oper::{hodge_dissipativity, leray_project};
use num_complex::Complex64 as C64;

fn line(n: usize, passed: bool, what: &str, detail: &str) {
    let s = format!("criterion {n:>2}: {} {what} | {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes()).unwrap();
    out.flush().unwrap();
}

/// Prints the criterion line for a report and panics on failure.
fn verdict(n: usize, what: &str, rep: &Report, filter: impl Fn(&str) -> bool) {
    let checks: Vec<_> = rep.checks.iter().filter(|c| filter(&c.name)).collect();
    assert!(!checks.is_empty(), "criterion {n}: no checks selected");
    let passed = checks.iter().all(|c| c.passed);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    line(n, passed, what, &detail.join("; "));
    assert!(passed, "{}", rep.render_checks());
}

fn shared_cache() -> Arc<EigenCache> {
    static CACHE: OnceLock<Arc<EigenCache>> = OnceLock::new();
    CACHE.get_or_init(|| Arc::new(EigenCache::in_memory())).clone()
}

fn lab() -> Lab {
    Lab::with_cache(SimConfig::default(), shared_cache()).unwrap()
}

fn sweep() -> &'static Report {
    static SWEEP: OnceLock<Report> = OnceLock::new();
    SWEEP.get_or_init(|| lab().run("instability-sweep").unwrap())
}

fn spectrum() -> &'static Report {
    static SPECTRUM: OnceLock<Report> = OnceLock::new();
    SPECTRUM.get_or_init(|| lab().run("spectrum").unwrap())
}

#[test]
fn c01_steady_state_audit() {
    let rep = lab().run("steady-check").unwrap();
    verdict(1, "steady state audit", &rep, |_| true);
}

fn rel(num: f64, den: f64) -> f64 {
    num / den.max(f64::MIN_POSITIVE)
}

#[test]
fn c02_calculus_identities() {
    let g = Arc::new(build_radial_grid(1.0, 2.0, 24).unwrap());
    let ms = ModeSet::new(2, 2);
    let mut worst = [0.0f64; 5];
    for seed in 0..100u64 {
        let f = random_divfree(seed, BcTag::ConductingMagnetic, g.clone(), ms);
        let c = field::curl(&f);
        worst[0] = worst[0].max(rel(field::divergence(&field::curl(&c)).l2_norm(), field::curl(&c).l2_norm()));

        let mut phi = ScalarField::zeros(g.clone(), ms);
        let shift = seed as f64 * 0.1;
        for md in ms.canonical() {
            let vals = g.sample_c(|r| C64::new((r * (1 + md.m) as f64 + shift).cos(), 0.3 * r * r * md.k as f64));
            phi.mode_mut(0, md).copy_from_slice(&vals);
        }
        phi.enforce_reality();
        let gp = field::gradient(&phi);
        worst[1] = worst[1].max(rel(field::curl(&gp).l2_norm(), gp.l2_norm()));

        let mut h = random_divfree(seed + 1000, BcTag::None, g.clone(), ms);
        h.axpy(0.7, &gp);
        let p1 = leray_project(&h).unwrap();
        let p2 = leray_project(&p1).unwrap();
        let mut d = p2.clone();
        d.axpy(-1.0, &p1);
        worst[2] = worst[2].max(rel(d.l2_norm(), p1.l2_norm()));
        let mut resid = h.clone();
        resid.axpy(-1.0, &p1);
        worst[3] = worst[3].max(rel(p1.inner(&resid).norm(), p1.l2_norm() * resid.l2_norm()));

        let (lhs, rhs) = hodge_dissipativity(&f);
        worst[4] = worst[4].max(rel((lhs - rhs).abs(), rhs.abs()));
    }
    let names = ["div curl", "curl grad", "Leray idempotence", "Leray orthogonality", "<Lap B, B> = -|curl B|^2"];
    let passed = worst.iter().all(|w| *w <= 1e-8);
    let detail: Vec<String> = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.2e}")).collect();
    line(2, passed, "calculus identities over 100 seeded fields", &detail.join(", "));
    assert!(passed, "{worst:?}");
}

#[test]
fn c03_dynamo_growing_mode() {
    verdict(3, "growing dynamo mode", spectrum(), |_| true);
}

#[test]
fn c04_growth_rate_scaling() {
    let rep = lab().run("scaling").unwrap();
    verdict(4, "growth-rate exponent in eps", &rep, |_| true);
}

#[test]
fn c05_linear_exponential_growth() {
    let rep = lab().run("evolve-linear").unwrap();
    verdict(5, "linear exponential growth", &rep, |_| true);
}

#[test]
fn c06_semigroup_smoothing() {
    let rep = lab().run("semigroup-check").unwrap();
    verdict(6, "semigroup smoothing under refinement", &rep, |_| true);
}

#[test]
fn c07_escape_time_law() {
    verdict(7, "escape-time law", sweep(), |n| !n.starts_with("shortest run"));
}

#[test]
fn c08_energy_transfer() {
    let rep = lab().run("energy-transfer").unwrap();
    verdict(8, "energy transfer at large viscosity", &rep, |n| !n.starts_with("transfer run"));
}

#[test]
fn c09_constraints_on_shortest_run() {
    verdict(9, "constraints over the shortest sweep run", sweep(), |n| n.starts_with("shortest run"));
}

fn csvs(rep: &Report) -> Vec<(&str, &[u8])> {
    rep.files.iter().filter(|f| f.name.ends_with(".csv")).map(|f| (f.name.as_str(), f.contents.as_slice())).collect()
}

#[test]
fn c10_determinism() {
    let fresh = || Lab::with_cache(SimConfig::default(), Arc::new(EigenCache::in_memory())).unwrap();
    let spec = fresh().run("spectrum").unwrap();
    let sw = fresh().run("instability-sweep").unwrap();
    let mut diffs = Vec::new();
    let mut count = 0;
    for (a, b) in [(spectrum(), &spec), (sweep(), &sw)] {
        let (x, y) = (csvs(a), csvs(b));
        count += x.len();
        if x.len() != y.len() {
            diffs.push(format!("{}: file lists differ", a.command));
        }
        for ((na, ca), (nb, cb)) in x.iter().zip(&y) {
            if na != nb || ca != cb {
                diffs.push(format!("{}/{na}", a.command));
            }
        }
    }
    let passed = diffs.is_empty() && count > 0;
    line(
        10,
        passed,
        "repeat runs give byte-identical CSV files",
        &format!("{count} files compared, differing: {diffs:?}"),
    );
    assert!(passed, "{diffs:?}");
}
