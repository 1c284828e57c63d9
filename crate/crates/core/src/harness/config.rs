//! Flat TOML run configuration with named presets and `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, NormWindow};
use crate::noise::ConfusionMatrix;
use crate::pde::WindowMode;
use crate::runtime::{DelayModel, Jitter, Strategy};
use crate::statevector::DEFAULT_WIDTH_CAP;

/// Presets compiled into the binary; the same files live in `presets/`.
pub const PRESETS: &[(&str, &str)] = &[
    ("heat-default", include_str!("../../../../presets/heat-default.toml")),
    (
        "burgers-paper-setup",
        include_str!("../../../../presets/burgers-paper-setup.toml"),
    ),
    (
        "burgers-paper-pde",
        include_str!("../../../../presets/burgers-paper-pde.toml"),
    ),
    ("hardware-style", include_str!("../../../../presets/hardware-style.toml")),
    (
        "brisbane-snapshot",
        include_str!("../../../../presets/brisbane-snapshot.toml"),
    ),
    ("brisbane-table4", include_str!("../../../../presets/brisbane-table4.toml")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// SHA-256 (hex) of a preset file's text.
pub fn preset_hash(name: &str) -> Option<String> {
    preset_source(name).map(|s| hex::encode(Sha256::digest(s.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Heat,
    Burgers,
}

/// What drives each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Shot-sampled kernels; the sampled field feeds the next step.
    Sampled,
    /// Kernels evaluated at infinite shots (exact readout probabilities).
    Exact,
    /// Deterministic classical update, no kernels.
    Classical,
    /// Each step samples from the classical trajectory instead of the
    /// sampled one, isolating per-step variance.
    VarianceProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// `exp(-nu pi^2 t) sin(pi x)` (Heat only).
    Analytic,
    /// Same grid, same `dt` classical run.
    Classical,
    /// Classical run on a grid refined by `refine` (Burgers only).
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: String,
    pub problem: Problem,
    pub n: usize,
    pub nu: f64,
    /// Fixed time step; derived from the CFL bound when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub safety: f64,
    /// Speed bound used by the automatic time step.
    pub u_max_abs: f64,
    pub kernel: KernelKind,
    pub shots: u64,
    pub mode: Mode,
    pub steps: usize,
    pub sweep_steps: usize,
    pub shots_sweep: Vec<u64>,
    pub propagation_shots: Vec<u64>,
    pub repetitions: usize,
    pub seed: u64,
    pub window: WindowMode,
    pub window_lo: f64,
    pub window_hi: f64,
    pub reference: Reference,
    pub refine: usize,
    pub noise: String,
    pub mitigation: bool,
    /// Shots per basis state to estimate the mitigation matrix; 0 uses the
    /// injected matrix itself.
    pub calibration_shots: u64,
    pub strategy: Strategy,
    pub width_cap: usize,
    pub max_batch: usize,
    pub gamma: f64,
    pub delay: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<Jitter>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: "custom".into(),
            problem: Problem::Heat,
            n: 64,
            nu: 1.0,
            dt: None,
            safety: 0.9,
            u_max_abs: 0.0,
            kernel: KernelKind::Branching,
            shots: 4000,
            mode: Mode::Sampled,
            steps: 100,
            sweep_steps: 50,
            shots_sweep: vec![500, 1000, 2000, 4000, 8000],
            propagation_shots: vec![1000, 4000],
            repetitions: 5,
            seed: 1,
            window: WindowMode::Fixed,
            window_lo: 0.0,
            window_hi: 1.0,
            reference: Reference::Analytic,
            refine: 1,
            noise: "none".into(),
            mitigation: false,
            calibration_shots: 0,
            strategy: Strategy::Batch,
            width_cap: DEFAULT_WIDTH_CAP,
            max_batch: 8,
            gamma: 1.5,
            delay: "brisbane-table4".into(),
            jitter: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

const MAX_BASE_DEPTH: usize = 8;

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Merge a table over its `base` chain (base keys first, own keys win).
fn resolve(mut table: toml::Table, origin: &str, depth: usize) -> Result<toml::Table> {
    let Some(base) = table.remove("base") else {
        return Ok(table);
    };
    if depth >= MAX_BASE_DEPTH {
        return Err(Error::Config(format!("{origin}: base chain too deep")));
    }
    let name = base
        .as_str()
        .ok_or_else(|| Error::Config(format!("{origin}: `base` must be a preset name")))?;
    let source = preset_source(name)
        .ok_or_else(|| Error::Config(format!("{origin}: unknown base preset `{name}`")))?;
    let mut merged = resolve(parse_table(source, name)?, name, depth + 1)?;
    merged.extend(table);
    Ok(merged)
}

fn from_table(table: toml::Table) -> Result<RunConfig> {
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Load one of the problem presets by name.
    pub fn preset(name: &str) -> Result<Self> {
        let source = preset_source(name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
        Self::from_toml_str(source, name)
    }

    /// Parse config text; a `base = "<preset>"` key layers it over a preset.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        from_table(resolve(parse_table(text, origin)?, origin, 0)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Apply `key=value` overrides; values are read as TOML, falling back to
    /// a bare string. `dt=auto` clears a fixed time step.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let key = key.trim().replace('-', "_");
            let raw = raw.trim();
            if (key == "dt" || key == "jitter") && raw == "auto" {
                table.remove(&key);
                continue;
            }
            table.insert(key, override_value(raw));
        }
        from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.shots == 0 {
            return bad("shots must be >= 1".into());
        }
        if self.steps == 0 || self.sweep_steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.shots_sweep.is_empty() || self.shots_sweep.contains(&0) {
            return bad("shots_sweep needs positive shot counts".into());
        }
        if self.propagation_shots.is_empty() || self.propagation_shots.contains(&0) {
            return bad("propagation_shots needs positive shot counts".into());
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad(format!("nu = {} must be >= 0", self.nu));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety = {} outside (0, 1]", self.safety));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt = {dt} must be > 0"));
            }
        }
        if self.refine == 0 {
            return bad("refine must be >= 1".into());
        }
        if self.width_cap == 0 || self.max_batch == 0 {
            return bad("width_cap and max_batch must be >= 1".into());
        }
        if !(self.gamma >= 1.0) {
            return bad(format!("gamma = {} must be >= 1", self.gamma));
        }
        NormWindow::new(self.window_lo, self.window_hi)
            .map_err(|e| Error::Config(e.to_string()))?;
        match (self.problem, self.reference) {
            (Problem::Burgers, Reference::Analytic) => {
                return bad("burgers has no analytic reference; use classical or refined".into())
            }
            (Problem::Heat, Reference::Refined) => {
                return bad("refined reference is only implemented for burgers".into())
            }
            _ => {}
        }
        self.noise_matrix()?;
        self.delay_model()?;
        Ok(())
    }

    pub fn norm_window(&self) -> NormWindow {
        NormWindow {
            lo: self.window_lo,
            hi: self.window_hi,
        }
    }

    /// Injected readout matrix, `None` for the `none` preset.
    pub fn noise_matrix(&self) -> Result<Option<ConfusionMatrix>> {
        if self.noise == "none" {
            return Ok(None);
        }
        let source = preset_source(&self.noise)
            .ok_or_else(|| Error::Config(format!("unknown noise preset `{}`", self.noise)))?;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct NoisePreset {
            matrix: ConfusionMatrix,
        }
        let p: NoisePreset = toml::from_str(source)
            .map_err(|e| Error::Config(format!("noise preset `{}`: {e}", self.noise)))?;
        Ok(Some(p.matrix))
    }

    pub fn delay_model(&self) -> Result<DelayModel> {
        let mut model = if self.delay == "none" {
            DelayModel::zero()
        } else {
            let source = preset_source(&self.delay)
                .ok_or_else(|| Error::Config(format!("unknown delay preset `{}`", self.delay)))?;
            toml::from_str::<DelayModel>(source)
                .map_err(|e| Error::Config(format!("delay preset `{}`: {e}", self.delay)))?
        };
        if let Some(j) = self.jitter {
            model.jitter = j;
        }
        Ok(model)
    }

    /// Names of every preset file this config draws on.
    pub fn presets_used(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut next = Some(self.preset.clone());
        while let Some(name) = next.take() {
            let Some(source) = preset_source(&name) else { break };
            if names.contains(&name) {
                break;
            }
            next = parse_table(source, &name)
                .ok()
                .and_then(|t| t.get("base").and_then(|b| b.as_str()).map(String::from));
            names.push(name);
        }
        for extra in [&self.noise, &self.delay] {
            if preset_source(extra).is_some() && !names.contains(extra) {
                names.push(extra.clone());
            }
        }
        names
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
