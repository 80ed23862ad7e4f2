//! Leading dynamo eigenpairs, memoised in memory and optionally on disk.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{ModeIndex, ModeSet, RadialGrid};
use crate::oper::{assemble_kz, OperatorKind};
use crate::spectra::{mode_spectrum, rightmost_eigen, EigenReport};
use crate::steady::TCProfile;

/// Leading retained eigenpair of the kinematic dynamo operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leader {
    pub mode: ModeIndex,
    pub lambda: C64,
    /// Stacked node vector, unit `Σ w |x|²`.
    pub vector: Vec<C64>,
    pub residual: f64,
    pub div_score: f64,
    pub drift: f64,
    pub retained: usize,
}

impl Leader {
    pub fn from_report(rep: &EigenReport) -> Result<Self> {
        let i = rep.leader_index().ok_or_else(|| Error::NoRetained(format!("mode {}", rep.mode)))?;
        Ok(Self {
            mode: rep.mode,
            lambda: rep.eigenvalues[i],
            vector: rep.leader_vector().expect("leader has a vector").to_vec(),
            residual: rep.residuals[i],
            div_score: rep.div_scores[i],
            drift: rep.resolution_drift[i],
            retained: rep.retained.len(),
        })
    }
}

#[derive(Serialize)]
struct Key<'a> {
    what: &'static str,
    profile: &'a TCProfile,
    eps: f64,
    r1: f64,
    r2: f64,
    nr: usize,
    modes: ModeSet,
    mode: Option<ModeIndex>,
}

/// Cache keyed by the hash of (profile, ε, grid, truncation, fixed mode).
#[derive(Debug, Default)]
pub struct EigenCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, Arc<Leader>>>,
}

impl EigenCache {
    /// Memory only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Also persisted as JSON under `dir`.
    pub fn on_disk(dir: PathBuf) -> Self {
        Self { dir: Some(dir), mem: Mutex::default() }
    }

    pub fn key(profile: &TCProfile, eps: f64, grid: &RadialGrid, modes: &ModeSet, mode: Option<ModeIndex>) -> String {
        let k = Key { what: "dynamo-leader", profile, eps, r1: grid.r1, r2: grid.r2, nr: grid.nr, modes: *modes, mode };
        let bytes = serde_json::to_vec(&k).expect("key serialises");
        hex::encode(&Sha256::digest(bytes)[..16])
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("leader-{key}.json")))
    }

    /// Leader over the scan window, or on `mode` if given.
    pub fn leader(
        &self,
        profile: &TCProfile,
        eps: f64,
        grid: Arc<RadialGrid>,
        modes: &ModeSet,
        mode: Option<ModeIndex>,
    ) -> Result<Arc<Leader>> {
        let key = Self::key(profile, eps, &grid, modes, mode);
        if let Some(hit) = self.mem.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        if let Some(p) = self.path(&key) {
            if let Ok(text) = std::fs::read_to_string(&p) {
                if let Ok(l) = serde_json::from_str::<Leader>(&text) {
                    let l = Arc::new(l);
                    self.mem.lock().expect("cache lock").insert(key, l.clone());
                    return Ok(l);
                }
            }
        }
        let kind = OperatorKind::Dynamo { eps };
        let rep = match mode {
            Some(md) => mode_spectrum(&assemble_kz(kind, md, modes.kz(md.k), profile, grid)?)?,
            None => rightmost_eigen(kind, profile, grid, modes)?,
        };
        let l = Arc::new(Leader::from_report(&rep)?);
        if let Some(p) = self.path(&key) {
            let dir = p.parent().expect("cache file has a parent");
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let text = serde_json::to_string(&*l).expect("leader serialises");
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        self.mem.lock().expect("cache lock").insert(key, l.clone());
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_radial_grid;
    use crate::steady::solve_tc_coefficients;

    #[test]
    fn disk_cache_returns_identical_bits() {
        let p = solve_tc_coefficients(1.0, 2.0, 3.0, 1.0).unwrap();
        let g = Arc::new(build_radial_grid(1.0, 2.0, 20).unwrap());
        let ms = ModeSet::new(2, 2);
        let dir = tempfile::tempdir().unwrap();
        let a = EigenCache::on_disk(dir.path().to_path_buf()).leader(&p, 0.01, g.clone(), &ms, None).unwrap();
        let b = EigenCache::on_disk(dir.path().to_path_buf()).leader(&p, 0.01, g.clone(), &ms, None).unwrap();
        assert_eq!(*a, *b);
        let fresh = EigenCache::in_memory().leader(&p, 0.01, g.clone(), &ms, None).unwrap();
        assert_eq!(*a, *fresh);
        assert_ne!(EigenCache::key(&p, 0.01, &g, &ms, None), EigenCache::key(&p, 0.02, &g, &ms, None));
        let fixed = EigenCache::in_memory().leader(&p, 0.01, g, &ms, Some(ModeIndex::new(1, 1))).unwrap();
        assert_eq!(fixed.mode, ModeIndex::new(1, 1));
    }
}
