//! Run configuration: one JSON document, overridable by dotted paths.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::Series;
use crate::grid::{build_radial_grid, ModeIndex, ModeSet, RadialGrid};
use crate::spectra::Eta;
use crate::steady::{solve_tc_coefficients, TCProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub geometry: Geometry,
    pub walls: Walls,
    pub physics: Physics,
    pub resolution: Resolution,
    pub integrator: IntegratorConfig,
    pub experiment: Experiment,
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub r1: f64,
    pub r2: f64,
}

/// Wall data of the steady flow: `β1` is the inner angular velocity, `β2`
/// the inner axial velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Walls {
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub eps: f64,
    /// Viscosity; `null` means `nu_factor · ‖u_TC‖_{W^{1,∞}}`.
    pub nu: Option<f64>,
    pub nu_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolution {
    pub nr: usize,
    pub mmax: usize,
    pub kmax: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Largest explicit Courant number of the perturbation.
    pub cfl: f64,
    /// `null` picks a horizon from the leading growth rate.
    pub t_end: Option<f64>,
    pub sample_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// `δ·(0, B₀)` with `B₀` the leading dynamo mode of unit L² norm.
    Leader,
    /// Seeded random solenoidal `(v, B)`, each of L² norm `δ`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub delta_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    /// Escape threshold; `null` means `chi_factor · ‖u_TC‖_{L²}`.
    pub chi: Option<f64>,
    pub chi_factor: f64,
    pub p: f64,
    pub escape_on: Series,
    pub initial: Initial,
    /// Initial size for the energy-transfer run.
    pub transfer_delta: f64,
    /// Proceed with the energy-transfer run below the viscosity threshold.
    pub allow_small_nu: bool,
    pub alphas: Vec<f64>,
    /// Semigroup shift beyond the rightmost eigenvalue.
    pub eta: Eta,
    pub nr_levels: Vec<usize>,
    pub t_range: [f64; 2],
    pub t_samples: usize,
    /// Fix the mode instead of scanning for the leader.
    pub mode: Option<[i32; 2]>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    /// Reuse leading eigenpairs stored under `dir/cache`.
    pub cache: bool,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { r1: 1.0, r2: 2.0 }
    }
}

impl Default for Walls {
    fn default() -> Self {
        Self { beta1: 3.0, beta2: 1.0 }
    }
}

impl Default for Physics {
    fn default() -> Self {
        Self { eps: 1e-3, nu: None, nu_factor: 10.0 }
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self { nr: 96, mmax: 16, kmax: 16 }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 0.5, cfl: crate::evolve::DEFAULT_CFL, t_end: None, sample_every: 2 }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            delta_list: vec![1e-3, 1e-4, 1e-5, 1e-6],
            eps_list: vec![1e-2, 10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5), 1e-4],
            chi: None,
            chi_factor: 0.01,
            p: 2.0,
            escape_on: Series::WLp,
            initial: Initial::Leader,
            transfer_delta: 1e-5,
            allow_small_nu: false,
            alphas: vec![0.55, 0.75, 0.95],
            eta: Eta::Relative(0.1),
            nr_levels: vec![64, 128],
            t_range: [1e-3, 10.0],
            t_samples: 41,
            mode: None,
            seed: 1,
        }
    }
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), cache: true }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            walls: Walls::default(),
            physics: Physics::default(),
            resolution: Resolution::default(),
            integrator: IntegratorConfig::default(),
            experiment: Experiment::default(),
            output: Output::default(),
        }
    }
}

/// Named starting points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// The documented defaults.
    PaperDefault,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "paper-default" => Ok(Preset::PaperDefault),
            other => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }

    pub fn config(self) -> SimConfig {
        match self {
            Preset::PaperDefault => SimConfig::default(),
        }
    }
}

/// Section-wise merge: keys inside a section replace whole values, so an
/// enum written as `{"absolute": 1}` does not mix with a default variant.
fn merge(base: &mut Value, over: Value, depth: usize) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if depth < 2 => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, depth + 1),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets `path` (dot separated) in `doc`. The value is read as JSON, or as
/// a string if it does not parse.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(path, "malformed override path"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    for (i, k) in keys.iter().enumerate() {
        let obj = match cur {
            Value::Object(o) => o,
            _ => return Err(Error::config(keys[..i].join("."), "not a section")),
        };
        if i + 1 == keys.len() {
            obj.insert((*k).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*k).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one key")
}

fn from_value(doc: Value) -> Result<SimConfig> {
    let cfg: SimConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a JSON document.
pub fn parse_str(text: &str) -> Result<SimConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    from_value(doc)
}

/// Preset (or defaults), then the file, then the overrides, then
/// validation.
pub fn parse_config(file: Option<&Path>, preset: Option<Preset>, overrides: &[(String, String)]) -> Result<SimConfig> {
    let base = preset.map(Preset::config).unwrap_or_default();
    let mut doc = serde_json::to_value(&base).expect("config serialises");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let over: Value =
            serde_json::from_str(&text).map_err(|e| Error::config("<root>", format!("{}: {e}", path.display())))?;
        if !over.is_object() {
            return Err(Error::config("<root>", "the configuration must be a JSON object"));
        }
        // Unknown keys must be caught by the schema, not merged away.
        let probe: std::result::Result<SimConfig, _> = serde_path_to_error::deserialize(over.clone());
        if let Err(e) = probe {
            return Err(Error::config(e.path().to_string(), e.into_inner().to_string()));
        }
        merge(&mut doc, over, 0);
    }
    for (path, raw) in overrides {
        apply_override(&mut doc, path, raw)?;
    }
    from_value(doc)
}

fn check(ok: bool, field: &str, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, msg()))
    }
}

fn positive(x: f64, field: &str) -> Result<()> {
    check(x > 0.0 && x.is_finite(), field, || format!("must be positive and finite, got {x}"))
}

/// Derived quantities shared by the experiments.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub profile: TCProfile,
    pub grid: Arc<RadialGrid>,
    pub modes: ModeSet,
    pub nu: f64,
    pub eps: f64,
    pub chi: f64,
    /// `‖u_TC‖_{W^{1,∞}}`.
    pub w1inf: f64,
    /// `‖u_TC‖_{L²}` over one period.
    pub u_l2: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        positive(g.r1, "geometry.r1")?;
        check(g.r2 > g.r1 && g.r2.is_finite(), "geometry.r2", || format!("must exceed r1 = {}, got {}", g.r1, g.r2))?;
        check(self.walls.beta1.is_finite(), "walls.beta1", || "must be finite".into())?;
        check(self.walls.beta2.is_finite(), "walls.beta2", || "must be finite".into())?;
        positive(self.physics.eps, "physics.eps")?;
        if let Some(nu) = self.physics.nu {
            positive(nu, "physics.nu")?;
        }
        positive(self.physics.nu_factor, "physics.nu_factor")?;
        let r = &self.resolution;
        check(r.nr >= 8, "resolution.nr", || format!("must be at least 8, got {}", r.nr))?;
        check(r.mmax >= 1, "resolution.mmax", || "must be at least 1".into())?;
        check(r.kmax >= 1, "resolution.kmax", || "must be at least 1".into())?;
        let it = &self.integrator;
        positive(it.dt, "integrator.dt")?;
        positive(it.cfl, "integrator.cfl")?;
        if let Some(t) = it.t_end {
            positive(t, "integrator.t_end")?;
        }
        check(it.sample_every >= 1, "integrator.sample_every", || "must be at least 1".into())?;
        let e = &self.experiment;
        check(!e.delta_list.is_empty(), "experiment.delta_list", || "must not be empty".into())?;
        for (i, d) in e.delta_list.iter().enumerate() {
            check(*d > 0.0 && *d < 1.0, &format!("experiment.delta_list[{i}]"), || {
                format!("must lie in (0, 1), got {d}")
            })?;
        }
        for (i, x) in e.eps_list.iter().enumerate() {
            positive(*x, &format!("experiment.eps_list[{i}]"))?;
        }
        if let Some(chi) = e.chi {
            positive(chi, "experiment.chi")?;
        }
        positive(e.chi_factor, "experiment.chi_factor")?;
        check(e.p >= 1.0, "experiment.p", || format!("must be at least 1, got {}", e.p))?;
        check(e.transfer_delta >= 0.0 && e.transfer_delta < 1.0, "experiment.transfer_delta", || {
            format!("must lie in [0, 1), got {}", e.transfer_delta)
        })?;
        for (i, a) in e.alphas.iter().enumerate() {
            check(*a > 0.0 && *a < 1.0, &format!("experiment.alphas[{i}]"), || format!("must lie in (0, 1), got {a}"))?;
        }
        match e.eta {
            Eta::Absolute(x) | Eta::Relative(x) => positive(x, "experiment.eta")?,
        }
        check(e.nr_levels.len() >= 2, "experiment.nr_levels", || "needs at least two resolutions".into())?;
        check(e.nr_levels.windows(2).all(|w| w[1] > w[0]) && e.nr_levels[0] >= 8, "experiment.nr_levels", || {
            "must be increasing and at least 8".into()
        })?;
        let [t0, t1] = e.t_range;
        check(t0 > 0.0 && t1 > t0 && t1.is_finite(), "experiment.t_range", || {
            format!("need 0 < t0 < t1, got [{t0}, {t1}]")
        })?;
        check(e.t_samples >= 2, "experiment.t_samples", || "must be at least 2".into())?;
        if let Some([m, k]) = e.mode {
            check(
                m.unsigned_abs() as usize <= r.mmax && k.unsigned_abs() as usize <= r.kmax,
                "experiment.mode",
                || format!("({m}, {k}) lies outside the truncation"),
            )?;
        }
        check(!self.output.dir.as_os_str().is_empty(), "output.dir", || "must not be empty".into())?;
        Ok(())
    }

    /// Hex SHA-256 of the serialised configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn fixed_mode(&self) -> Option<ModeIndex> {
        self.experiment.mode.map(|[m, k]| ModeIndex::new(m, k))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let g = &self.geometry;
        let profile = solve_tc_coefficients(g.r1, g.r2, self.walls.beta1, self.walls.beta2)?;
        let grid = Arc::new(build_radial_grid(g.r1, g.r2, self.resolution.nr)?);
        let modes = ModeSet::new(self.resolution.mmax, self.resolution.kmax);
        let w1inf = profile.w1inf_norm(&grid);
        let u_l2 = profile.l2_norm(&modes);
        let nu = self.physics.nu.unwrap_or(self.physics.nu_factor * w1inf);
        let chi = self.experiment.chi.unwrap_or(self.experiment.chi_factor * u_l2);
        Ok(Resolved { profile, grid, modes, nu, eps: self.physics.eps, chi, w1inf, u_l2 })
    }
}
