use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve;
use crate::krylov::DEFAULT_ZERO_TOL;
use crate::metrics::DEFAULT_EPSILON_REL;
use crate::models::{self, Axis, ImpurityNorm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tki,
    Ti,
    Xxz,
    Coe,
    Goe,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tki => "tki",
            ModelKind::Ti => "ti",
            ModelKind::Xxz => "xxz",
            ModelKind::Coe => "coe",
            ModelKind::Goe => "goe",
        }
    }

    /// Generated by a Hamiltonian, so the Krylov pipeline applies.
    pub fn time_independent(self) -> bool {
        matches!(self, ModelKind::Ti | ModelKind::Xxz | ModelKind::Goe)
    }

    pub fn default_sweep(self) -> SweepParam {
        match self {
            ModelKind::Tki | ModelKind::Ti => SweepParam::Hz,
            ModelKind::Xxz => SweepParam::G,
            ModelKind::Coe | ModelKind::Goe => SweepParam::Sample,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tki" => Ok(ModelKind::Tki),
            "ti" => Ok(ModelKind::Ti),
            "xxz" => Ok(ModelKind::Xxz),
            "coe" => Ok(ModelKind::Coe),
            "goe" => Ok(ModelKind::Goe),
            other => Err(Error::Config(format!("unknown model '{other}' (tki, ti, xxz, coe, goe)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The chaos parameter a sweep varies. `Sample` indexes independent
/// random-matrix draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "h_z")]
    Hz,
    #[serde(rename = "h_x")]
    Hx,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "sample")]
    Sample,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Hz => "h_z",
            SweepParam::Hx => "h_x",
            SweepParam::G => "g",
            SweepParam::Sample => "sample",
        }
    }

    fn applies_to(self, model: ModelKind) -> bool {
        match self {
            SweepParam::Hz | SweepParam::Hx => matches!(model, ModelKind::Tki | ModelKind::Ti),
            SweepParam::G => model == ModelKind::Xxz,
            SweepParam::Sample => matches!(model, ModelKind::Coe | ModelKind::Goe),
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "h_z" | "hz" => Ok(SweepParam::Hz),
            "h_x" | "hx" => Ok(SweepParam::Hx),
            "g" => Ok(SweepParam::G),
            "sample" => Ok(SweepParam::Sample),
            other => Err(Error::Config(format!("unknown sweep parameter '{other}' (h_z, h_x, g, sample)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Fidelity,
    Entropy,
    Fisher,
    Rank,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Fidelity => "fidelity",
            Metric::Entropy => "entropy",
            Metric::Fisher => "fisher",
            Metric::Rank => "rank",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fidelity" => Ok(Metric::Fidelity),
            "entropy" => Ok(Metric::Entropy),
            "fisher" => Ok(Metric::Fisher),
            "rank" => Ok(Metric::Rank),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// Krylov profile grid; `None` bounds resolve to `t_switch = d`,
/// `t_max = 10·d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGridSpec {
    pub t_min: f64,
    pub t_switch: Option<f64>,
    pub t_max: Option<f64>,
    pub n_geom: usize,
    pub n_lin: usize,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        Self { t_min: 0.01, t_switch: None, t_max: None, n_geom: 40, n_lin: 400 }
    }
}

impl TimeGridSpec {
    pub fn resolve(&self, d: usize) -> (f64, f64, f64) {
        (self.t_min, self.t_switch.unwrap_or(d as f64), self.t_max.unwrap_or(10.0 * d as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub sites: usize,
    pub coupling: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub j_xy: f64,
    pub j_zz: f64,
    pub g: f64,
    /// 1-based; `None` is the central site.
    pub impurity_site: Option<usize>,
    pub impurity_axis: Axis,
    /// `None` follows [`ImpurityNorm::default_for`].
    pub impurity_norm: Option<ImpurityNorm>,
    /// Evolution time per record for Hamiltonian models.
    pub time_step: f64,
    pub observable: String,
    /// Seed of a single-qubit Haar unitary `u` applied on every site,
    /// `O ↦ u^{⊗L}† O u^{⊗L}`.
    pub observable_rotation: Option<u64>,
    pub sweep: Option<SweepParam>,
    pub values: Vec<f64>,
    /// Number of records; `None` means `2·d²`.
    pub horizon: Option<usize>,
    pub checkpoint_stride: usize,
    pub ensemble_size: usize,
    pub sigma: f64,
    pub epsilon: Option<f64>,
    pub epsilon_rel: f64,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub metrics: Vec<Metric>,
    pub krylov: bool,
    pub zero_tol: f64,
    pub time_grid: TimeGridSpec,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Tki,
            sites: 2,
            coupling: 1.0,
            h_x: 1.4,
            h_z: 1.4,
            j_xy: 1.0,
            j_zz: 1.1,
            g: 0.94,
            impurity_site: None,
            impurity_axis: Axis::Z,
            impurity_norm: None,
            time_step: 1.0,
            observable: "s1y".into(),
            observable_rotation: None,
            sweep: None,
            values: Vec::new(),
            horizon: None,
            checkpoint_stride: 1,
            ensemble_size: 80,
            sigma: 0.0,
            epsilon: None,
            epsilon_rel: DEFAULT_EPSILON_REL,
            seed: None,
            out: None,
            metrics: vec![Metric::Fidelity, Metric::Entropy, Metric::Fisher, Metric::Rank],
            krylov: false,
            zero_tol: DEFAULT_ZERO_TOL,
            time_grid: TimeGridSpec::default(),
            solver_max_iter: 5000,
            solver_tol: 1e-10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) =
            spec.split_once('=').ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let none = value.is_empty() || value.eq_ignore_ascii_case("none");
        match key {
            "model" => self.model = value.parse()?,
            "sites" | "L" => self.sites = parse(key, value)?,
            "J" | "coupling" => self.coupling = parse(key, value)?,
            "h_x" => self.h_x = parse(key, value)?,
            "h_z" => self.h_z = parse(key, value)?,
            "j_xy" => self.j_xy = parse(key, value)?,
            "j_zz" => self.j_zz = parse(key, value)?,
            "g" => self.g = parse(key, value)?,
            "impurity_site" => self.impurity_site = if none { None } else { Some(parse(key, value)?) },
            "impurity_axis" => {
                self.impurity_axis = value.parse().map_err(|e: Error| Error::Config(format!("{key}: {e}")))?
            }
            "impurity_norm" => {
                self.impurity_norm = if none {
                    None
                } else {
                    Some(value.parse().map_err(|e: Error| Error::Config(format!("{key}: {e}")))?)
                }
            }
            "time_step" => self.time_step = parse(key, value)?,
            "observable" => self.observable = value.to_string(),
            "observable_rotation" => self.observable_rotation = if none { None } else { Some(parse(key, value)?) },
            "sweep" => self.sweep = if none { None } else { Some(value.parse()?) },
            "values" => self.values = parse_list(key, value)?,
            "horizon" => self.horizon = if none { None } else { Some(parse(key, value)?) },
            "checkpoint_stride" => self.checkpoint_stride = parse(key, value)?,
            "ensemble_size" => self.ensemble_size = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "epsilon" => self.epsilon = if none { None } else { Some(parse(key, value)?) },
            "epsilon_rel" => self.epsilon_rel = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "out" => self.out = if none { None } else { Some(PathBuf::from(value)) },
            "metrics" => self.metrics = parse_list(key, value)?,
            "krylov" => self.krylov = parse_bool(key, value)?,
            "zero_tol" => self.zero_tol = parse(key, value)?,
            "t_min" => self.time_grid.t_min = parse(key, value)?,
            "t_switch" => self.time_grid.t_switch = if none { None } else { Some(parse(key, value)?) },
            "t_max" => self.time_grid.t_max = if none { None } else { Some(parse(key, value)?) },
            "n_geom" => self.time_grid.n_geom = parse(key, value)?,
            "n_lin" => self.time_grid.n_lin = parse(key, value)?,
            "solver_max_iter" => self.solver_max_iter = parse(key, value)?,
            "solver_tol" => self.solver_tol = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Every key with its current value, in the syntax [`Self::set`] accepts.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        put("model", self.model.to_string());
        put("sites", self.sites.to_string());
        put("J", self.coupling.to_string());
        put("h_x", self.h_x.to_string());
        put("h_z", self.h_z.to_string());
        put("j_xy", self.j_xy.to_string());
        put("j_zz", self.j_zz.to_string());
        put("g", self.g.to_string());
        put("impurity_site", opt(self.impurity_site.map(|s| s.to_string())));
        put("impurity_axis", self.impurity_axis.to_string());
        put(
            "impurity_norm",
            opt(self.impurity_norm.map(|n| match n {
                ImpurityNorm::Pauli => "pauli".into(),
                ImpurityNorm::Spin => "spin".into(),
            })),
        );
        put("time_step", self.time_step.to_string());
        put("observable", self.observable.clone());
        put("observable_rotation", opt(self.observable_rotation.map(|s| s.to_string())));
        put("sweep", opt(self.sweep.map(|s| s.name().to_string())));
        put("values", join(&self.values));
        put("horizon", opt(self.horizon.map(|h| h.to_string())));
        put("checkpoint_stride", self.checkpoint_stride.to_string());
        put("ensemble_size", self.ensemble_size.to_string());
        put("sigma", self.sigma.to_string());
        put("epsilon", opt(self.epsilon.map(|e| e.to_string())));
        put("epsilon_rel", self.epsilon_rel.to_string());
        if let Some(seed) = self.seed {
            put("seed", seed.to_string());
        }
        put("out", opt(self.out.as_ref().map(|p| p.display().to_string())));
        put("metrics", self.metrics.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        put("krylov", self.krylov.to_string());
        put("zero_tol", self.zero_tol.to_string());
        put("t_min", self.time_grid.t_min.to_string());
        put("t_switch", opt(self.time_grid.t_switch.map(|t| t.to_string())));
        put("t_max", opt(self.time_grid.t_max.map(|t| t.to_string())));
        put("n_geom", self.time_grid.n_geom.to_string());
        put("n_lin", self.time_grid.n_lin.to_string());
        put("solver_max_iter", self.solver_max_iter.to_string());
        put("solver_tol", self.solver_tol.to_string());
        m
    }

    /// Serializes to the flat text format.
    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hilbert_dim(&self) -> usize {
        models::hilbert_dim(self.sites)
    }

    pub fn sweep_param(&self) -> SweepParam {
        self.sweep.unwrap_or_else(|| self.model.default_sweep())
    }

    /// Chaos-parameter values, one independent job each.
    pub fn sweep_values(&self) -> Vec<f64> {
        if !self.values.is_empty() {
            return self.values.clone();
        }
        vec![match self.sweep_param() {
            SweepParam::Hz => self.h_z,
            SweepParam::Hx => self.h_x,
            SweepParam::G => self.g,
            SweepParam::Sample => 0.0,
        }]
    }

    pub fn resolved_horizon(&self) -> usize {
        self.horizon.unwrap_or_else(|| evolve::default_horizon(self.hilbert_dim()))
    }

    pub fn resolved_impurity_site(&self) -> usize {
        self.impurity_site.unwrap_or(self.sites.div_ceil(2))
    }

    pub fn resolved_impurity_norm(&self) -> ImpurityNorm {
        self.impurity_norm.unwrap_or_else(|| ImpurityNorm::default_for(self.impurity_axis))
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.seed.is_none() {
            return cfg("seed is required".into());
        }
        if !(2..=models::MAX_SITES).contains(&self.sites) {
            return cfg(format!("sites = {} outside 2..={}", self.sites, models::MAX_SITES));
        }
        if self.ensemble_size == 0 {
            return cfg("ensemble_size must be >= 1".into());
        }
        if self.checkpoint_stride == 0 {
            return cfg("checkpoint_stride must be >= 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return cfg(format!("sigma = {} must be finite and >= 0", self.sigma));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return cfg(format!("time_step = {} must be > 0", self.time_step));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return cfg(format!("epsilon = {e} must be > 0"));
            }
        }
        if !(self.epsilon_rel > 0.0) {
            return cfg(format!("epsilon_rel = {} must be > 0", self.epsilon_rel));
        }
        if !(self.zero_tol > 0.0 && self.zero_tol < 1.0) {
            return cfg(format!("zero_tol = {} must lie in (0, 1)", self.zero_tol));
        }
        let d = self.hilbert_dim();
        let horizon = self.resolved_horizon();
        let max = evolve::default_max_steps(d);
        if horizon == 0 || horizon > max {
            return cfg(format!("horizon = {horizon} outside 1..={max}"));
        }
        models::parse_observable(&self.observable, self.sites)
            .map_err(|e| Error::Config(format!("observable '{}': {e}", self.observable)))?;
        let site = self.resolved_impurity_site();
        if site == 0 || site > self.sites {
            return cfg(format!("impurity_site = {site} outside 1..={}", self.sites));
        }
        let sweep = self.sweep_param();
        if !sweep.applies_to(self.model) {
            return cfg(format!("sweep '{}' does not apply to model '{}'", sweep.name(), self.model));
        }
        for &v in &self.sweep_values() {
            if !v.is_finite() {
                return cfg(format!("sweep value {v} is not finite"));
            }
            if sweep == SweepParam::Sample && (v < 0.0 || v.fract() != 0.0) {
                return cfg(format!("sample index {v} must be a non-negative integer"));
            }
        }
        if self.krylov {
            if !self.model.time_independent() {
                return cfg(format!("krylov = true needs a Hamiltonian model (ti, xxz, goe), not '{}'", self.model));
            }
            let (t_min, t_switch, t_max) = self.time_grid.resolve(d);
            if !(t_min > 0.0 && t_switch > t_min && t_max > t_switch) {
                return cfg(format!("time grid needs 0 < t_min < t_switch < t_max, got {t_min}, {t_switch}, {t_max}"));
            }
        }
        if self.metrics.is_empty() {
            return cfg("metrics list is empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "# example\nmodel = xxz\nsites = 3\ng = 0.16  # weak\nsweep = g\nvalues = 0, 0.16, 0.94\nseed = 7\nimpurity_axis = y\nkrylov = true\n";
        let cfg = ExperimentConfig::parse_text(text).unwrap();
        assert_eq!(cfg.model, ModelKind::Xxz);
        assert_eq!(cfg.values, vec![0.0, 0.16, 0.94]);
        assert_eq!(cfg.resolved_impurity_norm(), ImpurityNorm::Spin);
        cfg.validate().unwrap();
        let again = ExperimentConfig::parse_text(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::parse_text("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse_text("sites 3"), Err(Error::Config(_))));
        let no_seed = ExperimentConfig::parse_text("model = tki\nsites = 2").unwrap();
        assert!(no_seed.validate().is_err());
        let mut c = ExperimentConfig::parse_text("model = tki\nsites = 2\nseed = 1").unwrap();
        c.validate().unwrap();
        c.apply_override("observable=s3y").unwrap();
        assert!(c.validate().is_err());
        c.apply_override("observable=s1y").unwrap();
        c.apply_override("krylov=true").unwrap();
        assert!(c.validate().is_err());
        c.apply_override("krylov=false").unwrap();
        c.apply_override("sweep=g").unwrap();
        assert!(c.validate().is_err());
        assert!(c.apply_override("ensemble_size").is_err());
    }
}
