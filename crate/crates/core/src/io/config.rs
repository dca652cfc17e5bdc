use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{load_target, IoError};
use crate::geometry::PinholeCamera;
use crate::knot::{Architecture, KnotModel, TemplateKnot};
use crate::loss::{Budgets, LossWeights};
use crate::optimize::{OptimizationProblem, Scene};
use crate::render::{Compositor, RendererKind, SilhouetteImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-scale hyperparameters.
    #[default]
    Full,
    /// Small images, few samples and a shallow network; runs in minutes.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset `{other}` (expected full or desk)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub camera: PinholeCamera,
    /// Target silhouette (PNG or PGM); relative paths resolve against the
    /// config file's directory.
    pub target: Option<PathBuf>,
    /// Read black-on-white artwork.
    pub invert: bool,
    /// Resample targets whose size differs from the camera's.
    pub resize: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            camera: PinholeCamera::default(),
            target: None,
            invert: false,
            resize: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnotConfig {
    pub center: [f64; 3],
    pub template: TemplateKnot,
}

impl Default for KnotConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0, 4.0],
            template: TemplateKnot::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnConfig {
    pub depth: usize,
    pub width: usize,
    /// Initialization seed of the first knot; knot `k` uses `seed + k`.
    pub seed: u64,
}

impl Default for InnConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            width: 1024,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenes: Vec<SceneConfig>,
    pub knots: Vec<KnotConfig>,
    pub inn: InnConfig,
    pub renderer: RendererKind,
    pub compositor: Compositor,
    pub tau: f64,
    pub samples: usize,
    pub radius: f64,
    pub mobius_batch: usize,
    pub weights: LossWeights,
    pub budgets: Budgets,
    pub iterations: u64,
    pub learning_rate: f64,
    pub seed: u64,
    pub jitter: bool,
    pub clip_norm: Option<f64>,
    pub parallel: bool,
    pub record_wall_clock: bool,
    pub out_dir: PathBuf,
    /// Write silhouettes every this many iterations; 0 disables.
    pub dump_every: u64,
    /// Write a checkpoint every this many iterations; 0 writes only the last.
    pub checkpoint_every: u64,
    pub mesh_sides: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenes: vec![SceneConfig::default()],
            knots: vec![KnotConfig::default()],
            inn: InnConfig::default(),
            renderer: RendererKind::Capsule,
            compositor: Compositor::Max,
            tau: 100.0,
            samples: 1000,
            radius: 0.05,
            mobius_batch: 100_000,
            weights: LossWeights::default(),
            budgets: Budgets::default(),
            iterations: 20_000,
            learning_rate: 1e-5,
            seed: 0,
            jitter: true,
            clip_norm: Some(10.0),
            parallel: false,
            record_wall_clock: true,
            out_dir: PathBuf::from("out"),
            dump_every: 0,
            checkpoint_every: 0,
            mesh_sides: 16,
        }
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Full => Self::default(),
            Preset::Desk => {
                let mut c = Self::default();
                for s in &mut c.scenes {
                    s.camera.width = 64;
                    s.camera.height = 64;
                }
                c.samples = 128;
                c.inn.depth = 2;
                c.inn.width = 32;
                c.mobius_batch = 2000;
                c.iterations = 2000;
                c.learning_rate = 1e-3;
                c
            }
        }
    }

    /// Checks ranges; `field` names in errors follow the config keys.
    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |f: &str, m: String| Err(IoError::invalid(f, m));
        if self.scenes.is_empty() {
            return bad("scenes", "at least one scene is required".into());
        }
        for (k, s) in self.scenes.iter().enumerate() {
            s.camera
                .validate()
                .map_err(|e| IoError::invalid(format!("scenes[{k}].camera"), e.to_string()))?;
        }
        if self.knots.is_empty() {
            return bad("knots", "at least one knot is required".into());
        }
        for (k, kn) in self.knots.iter().enumerate() {
            if kn.center.iter().any(|c| !c.is_finite()) {
                return bad(&format!("knots[{k}].center"), "must be finite".into());
            }
            if !(kn.template.radius > 0.0 && kn.template.radius.is_finite()) {
                return bad(
                    &format!("knots[{k}].template.radius"),
                    format!("must be > 0, got {}", kn.template.radius),
                );
            }
        }
        if self.inn.width == 0 {
            return bad("inn.width", "must be >= 1, got 0".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", format!("must be > 0, got {}", self.tau));
        }
        if self.samples < 3 {
            return bad("samples", format!("must be >= 3, got {}", self.samples));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius", format!("must be > 0, got {}", self.radius));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad("clip_norm", format!("must be > 0 or null, got {c}"));
            }
        }
        if let Compositor::LogSumExp { temperature } = self.compositor {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return bad("compositor.temperature", format!("must be > 0, got {temperature}"));
            }
        }
        if self.mesh_sides < 3 {
            return bad("mesh_sides", format!("must be >= 3, got {}", self.mesh_sides));
        }
        self.weights.validate().map_err(|m| IoError::invalid("weights", m))?;
        self.budgets
            .validate()
            .map_err(|e| IoError::invalid("budgets", e.to_string()))?;
        Ok(())
    }

    /// Fresh knot models at their configured centers.
    pub fn knot_models(&self) -> Vec<KnotModel> {
        let arch = Architecture {
            depth: self.inn.depth,
            width: self.inn.width,
        };
        self.knots
            .iter()
            .enumerate()
            .map(|(k, kc)| {
                KnotModel::new(arch, self.inn.seed.wrapping_add(k as u64))
                    .with_center(kc.center)
                    .with_template(kc.template)
            })
            .collect()
    }

    /// Reads every scene's target image.
    pub fn load_targets(&self) -> Result<Vec<SilhouetteImage<f64>>, IoError> {
        self.scenes
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let path = s
                    .target
                    .as_ref()
                    .ok_or_else(|| IoError::invalid(format!("scenes[{k}].target"), "a target image is required"))?;
                load_target(path, s.camera.width, s.camera.height, s.resize, s.invert)
            })
            .collect()
    }

    /// Optimization problem with the given targets, one per scene.
    pub fn problem_with_targets(&self, targets: Vec<SilhouetteImage<f64>>) -> Result<OptimizationProblem, IoError> {
        self.validate()?;
        if targets.len() != self.scenes.len() {
            return Err(IoError::invalid(
                "scenes",
                format!("{} targets for {} scenes", targets.len(), self.scenes.len()),
            ));
        }
        Ok(OptimizationProblem {
            scenes: self
                .scenes
                .iter()
                .zip(targets)
                .map(|(s, target)| Scene {
                    camera: s.camera.clone(),
                    target,
                })
                .collect(),
            knots: self.knot_models(),
            radius: self.radius,
            weights: self.weights,
            budgets: self.budgets.clone(),
            renderer: self.renderer,
            compositor: self.compositor,
            tau: self.tau,
            samples: self.samples,
            mobius_batch: self.mobius_batch,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            seed: self.seed,
            jitter: self.jitter,
            clip_norm: self.clip_norm,
            parallel: self.parallel,
            record_wall_clock: self.record_wall_clock,
        })
    }

    pub fn problem(&self) -> Result<OptimizationProblem, IoError> {
        self.validate()?;
        let targets = self.load_targets()?;
        self.problem_with_targets(targets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Overlays `user` onto `base`. Objects merge key by key; list elements
/// merge onto `base`'s first element so partially specified scenes and knots
/// keep the preset's values.
fn overlay(base: &Value, user: &Value) -> Value {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            let mut out = b.clone();
            for (k, v) in u {
                let merged = match b.get(k) {
                    Some(bv) => overlay(bv, v),
                    None => v.clone(),
                };
                out.insert(k.clone(), merged);
            }
            Value::Object(out)
        }
        (Value::Array(b), Value::Array(u)) => match b.first() {
            Some(template @ Value::Object(_)) => Value::Array(u.iter().map(|v| overlay(template, v)).collect()),
            _ => user.clone(),
        },
        _ => user.clone(),
    }
}

/// Parses config text on top of `preset`. `origin` names the source in
/// errors and anchors relative target paths.
pub fn parse_config(text: &str, origin: &Path, preset: Preset) -> Result<RunConfig, IoError> {
    let parse_err = |e: serde_json::Error| IoError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    // strict pass against the text for typo and type errors with positions
    serde_json::from_str::<RunConfig>(text).map_err(parse_err)?;
    let user: Value = serde_json::from_str(text).map_err(parse_err)?;
    let base = serde_json::to_value(RunConfig::preset(preset)).expect("config serializes");
    let mut config: RunConfig = serde_json::from_value(overlay(&base, &user)).map_err(|e| IoError::Parse {
        path: origin.to_path_buf(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let dir = origin.parent().unwrap_or(Path::new(""));
    for s in &mut config.scenes {
        if let Some(t) = &s.target {
            if t.is_relative() {
                s.target = Some(dir.join(t));
            }
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, preset: Preset) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_config(&text, path, preset)
}
