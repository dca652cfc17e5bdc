//! Adam over the parameters of one or more knots, with per-scene rendering,
//! deterministic per-iteration random streams and checkpoints.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Scalar, Tape, Var, Vec3};
use crate::geometry::PinholeCamera;
use crate::knot::{sample_template_with, Architecture, Inn, KnotError, KnotModel, SampledKnot, TemplateKnot};
use crate::loss::{image_loss, knot_losses, Budgets, LossError, LossTerms, LossWeights, MobiusBatch};
use crate::render::{render, Compositor, RenderError, RenderSettings, RendererKind, SilhouetteImage};

const CHECKPOINT_MAGIC: &str = "knot-art checkpoint v1";
const STREAM_TEMPLATE: u64 = 0x7465_6d70_6c61_7465;
const STREAM_MOBIUS: u64 = 0x6d6f_6269_7573_0000;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Knot(#[from] KnotError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite gradient for parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("parameter and gradient lengths differ: {params} vs {grads}")]
    Length { params: usize, grads: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("iteration {iteration} failed (last total loss {last_total:?}): {source}")]
    Aborted {
        iteration: u64,
        last_total: Option<f64>,
        source: Box<OptimizeError>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` in place. Nothing is
    /// modified when a gradient is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), OptimizeError> {
        if params.len() != grads.len() || self.m.len() != grads.len() {
            return Err(OptimizeError::Length {
                params: params.len(),
                grads: grads.len(),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(OptimizeError::NonFiniteGradient { index });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// One view: a camera and the silhouette it should see.
#[derive(Clone, Debug)]
pub struct Scene {
    pub camera: PinholeCamera,
    pub target: SilhouetteImage<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    pub scenes: Vec<Scene>,
    pub knots: Vec<KnotModel>,
    pub radius: f64,
    pub weights: LossWeights,
    pub budgets: Budgets,
    pub renderer: RendererKind,
    pub compositor: Compositor,
    pub tau: f64,
    pub samples: usize,
    pub mobius_batch: usize,
    pub iterations: u64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Jitter the template samples every iteration.
    pub jitter: bool,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Render scenes on worker threads. Results are merged in scene order,
    /// so values match the single-threaded run.
    pub parallel: bool,
    /// Fill the wall-clock column of the loss log.
    pub record_wall_clock: bool,
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Invalid(m));
        if self.scenes.is_empty() {
            return bad("at least one scene is required".into());
        }
        if self.knots.is_empty() {
            return bad("at least one knot is required".into());
        }
        for (k, s) in self.scenes.iter().enumerate() {
            s.camera.validate().map_err(|e| OptimizeError::Invalid(format!("scene {k}: {e}")))?;
            if (s.target.width, s.target.height) != (s.camera.width, s.camera.height) {
                return bad(format!(
                    "scene {k}: target is {}x{}, camera is {}x{}",
                    s.target.width, s.target.height, s.camera.width, s.camera.height
                ));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.samples < 3 {
            return bad(format!("need at least 3 samples, got {}", self.samples));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip norm must be positive, got {c}"));
            }
        }
        self.weights.validate().map_err(OptimizeError::Invalid)?;
        self.budgets.validate()?;
        Ok(())
    }

    fn settings(&self) -> RenderSettings {
        RenderSettings {
            kind: self.renderer,
            radius: self.radius,
            tau: self.tau,
            compositor: self.compositor,
        }
    }

    /// Template parameters used for knot `k` at `iteration`.
    pub fn template_samples(&self, k: usize, iteration: u64) -> Result<Vec<f64>, KnotError> {
        if self.jitter {
            let mut rng = stream(self.seed, STREAM_TEMPLATE.wrapping_add(k as u64), iteration);
            sample_template_with(self.samples, Some(&mut rng))
        } else {
            sample_template_with::<ChaCha8Rng>(self.samples, None)
        }
    }

    /// Pair batch for knot `k` at `iteration`, or `None` when the repulsion
    /// term is switched off.
    pub fn mobius_pairs(&self, k: usize, iteration: u64) -> Result<Option<MobiusBatch>, LossError> {
        if self.weights.mobius == 0.0 || self.mobius_batch == 0 {
            return Ok(None);
        }
        let mut rng = stream(self.seed, STREAM_MOBIUS.wrapping_add(k as u64), iteration);
        MobiusBatch::sample(self.samples, self.mobius_batch, &mut rng).map(Some)
    }

    /// Renders every scene with the given plain knots.
    pub fn render_scenes(&self, knots: &[SampledKnot<f64>]) -> Result<Vec<SilhouetteImage<f64>>, RenderError> {
        let pts: Vec<&[Vec3<f64>]> = knots.iter().map(|k| k.points.as_slice()).collect();
        self.scenes
            .iter()
            .map(|s| render(&pts, &s.camera, &self.settings()))
            .collect()
    }
}

/// Independent stream for `(tag, iteration)`: no state carries between
/// iterations, which keeps checkpoints small and restarts exact.
fn stream(seed: u64, tag: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag);
    rng.set_stream(iteration);
    rng
}

/// One row of the loss log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: u64,
    pub terms: LossTerms<f64>,
    pub total: f64,
    pub wall_ms: Option<f64>,
}

impl LogRow {
    pub const HEADER: &'static str = "iteration,L_I,L_L,L_M,L_R,L_B,total,wall_ms";

    pub fn csv(&self) -> String {
        let t = &self.terms;
        let mut s = format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},",
            self.iteration, t.image, t.length, t.mobius, t.region, t.bending, self.total
        );
        if let Some(ms) = self.wall_ms {
            let _ = write!(s, "{ms:.3}");
        }
        s
    }
}

/// Parameters and optimizer state of a run in progress.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    /// Number of completed iterations.
    pub iteration: u64,
    pub params: Vec<Vec<f64>>,
    pub adam: Vec<AdamState>,
}

impl RunState {
    pub fn new(problem: &OptimizationProblem) -> Self {
        Self {
            iteration: 0,
            params: problem.knots.iter().map(|k| k.params.clone()).collect(),
            adam: problem
                .knots
                .iter()
                .map(|k| AdamState::new(k.param_count(), problem.learning_rate))
                .collect(),
        }
    }

    /// Problem knots carrying this state's parameters.
    pub fn knots(&self, problem: &OptimizationProblem) -> Vec<KnotModel> {
        problem
            .knots
            .iter()
            .zip(&self.params)
            .map(|(k, p)| KnotModel {
                params: p.clone(),
                ..k.clone()
            })
            .collect()
    }
}

/// Values of the loss and its gradient with respect to every knot's
/// parameters, for one iteration's sampling.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: LossTerms<f64>,
    pub total: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Image loss of one scene and its gradient with respect to every knot
/// point coordinate, computed on a private tape.
fn scene_gradient(
    problem: &OptimizationProblem,
    scene: &Scene,
    points: &[Vec<[f64; 3]>],
) -> Result<(f64, Vec<f64>), OptimizeError> {
    let tape = Tape::new();
    let leaves: Vec<Vec<Vec3<Var>>> = points
        .iter()
        .map(|k| {
            k.iter()
                .map(|p| Ok(Vec3::new(tape.var(p[0])?, tape.var(p[1])?, tape.var(p[2])?)))
                .collect::<Result<Vec<_>, AutodiffError>>()
        })
        .collect::<Result<_, _>>()?;
    let slices: Vec<&[Vec3<Var>]> = leaves.iter().map(|k| k.as_slice()).collect();
    let img = render(&slices, &scene.camera, &problem.settings())?;
    let loss = image_loss(&img, &scene.target)?;
    let g = tape.backward(loss)?;
    let grads = leaves
        .iter()
        .flat_map(|k| k.iter().flat_map(|p| [g.get(p.x), g.get(p.y), g.get(p.z)]))
        .collect();
    Ok((loss.value(), grads))
}

/// Loss and gradients at `params` for the sampling of `iteration`.
pub fn evaluate(problem: &OptimizationProblem, params: &[Vec<f64>], iteration: u64) -> Result<Evaluation, OptimizeError> {
    let tape = Tape::new();
    let mut vars = Vec::with_capacity(problem.knots.len());
    let mut knots = Vec::with_capacity(problem.knots.len());
    let mut batches = Vec::with_capacity(problem.knots.len());
    for (k, model) in problem.knots.iter().enumerate() {
        let p = tape.vars(&params[k])?;
        let s = problem.template_samples(k, iteration)?;
        knots.push(model.sample(&p, &s)?);
        vars.push(p);
        batches.push(problem.mobius_pairs(k, iteration)?);
    }
    let points: Vec<Vec<[f64; 3]>> = knots.iter().map(|k| k.point_values()).collect();
    let per_scene: Vec<Result<(f64, Vec<f64>), OptimizeError>> = if problem.parallel {
        problem
            .scenes
            .par_iter()
            .map(|s| scene_gradient(problem, s, &points))
            .collect()
    } else {
        problem.scenes.iter().map(|s| scene_gradient(problem, s, &points)).collect()
    };
    let coords: Vec<Var> = knots
        .iter()
        .flat_map(|k| k.points.iter().flat_map(|p| [p.x, p.y, p.z]))
        .collect();
    let mut image_terms = Vec::with_capacity(per_scene.len());
    for r in per_scene {
        let (value, grads) = r?;
        image_terms.push(tape.fused(value, &coords, &grads));
    }
    let image = Var::sum(&image_terms) / problem.scenes.len() as f64;
    let zero = tape.constant(0.0);
    let mut geo = [zero; 4];
    for (knot, batch) in knots.iter().zip(&batches) {
        let terms = knot_losses(knot, &problem.budgets, batch.as_ref(), problem.radius)?;
        for (slot, t) in geo.iter_mut().zip(terms) {
            *slot = *slot + t;
        }
    }
    let [length, mobius, region, bending] = geo;
    let terms = LossTerms {
        image,
        length,
        mobius,
        region,
        bending,
    };
    let total = terms.total(&problem.weights);
    let g = tape.backward(total)?;
    Ok(Evaluation {
        terms: terms.values(),
        total: total.value(),
        grads: vars.iter().map(|v| g.wrt(v)).collect(),
    })
}

/// Scales all gradients so their joint norm is at most `cap`.
pub fn clip_global_norm(grads: &mut [Vec<f64>], cap: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > cap {
        let s = cap / norm;
        for g in grads.iter_mut().flatten() {
            *g *= s;
        }
    }
    norm
}

/// Runs one iteration and advances `state`. The logged loss belongs to the
/// parameters before the update.
pub fn step(problem: &OptimizationProblem, state: &mut RunState) -> Result<LogRow, OptimizeError> {
    let start = Instant::now();
    let eval = evaluate(problem, &state.params, state.iteration)?;
    let mut grads = eval.grads;
    if let Some(cap) = problem.clip_norm {
        clip_global_norm(&mut grads, cap);
    }
    // validate everything before touching any parameter
    for g in &grads {
        if let Some(index) = g.iter().position(|x| !x.is_finite()) {
            return Err(OptimizeError::NonFiniteGradient { index });
        }
    }
    for ((p, a), g) in state.params.iter_mut().zip(&mut state.adam).zip(&grads) {
        a.step(p, g)?;
    }
    let row = LogRow {
        iteration: state.iteration,
        terms: eval.terms,
        total: eval.total,
        wall_ms: problem
            .record_wall_clock
            .then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    state.iteration += 1;
    Ok(row)
}

/// Runs until `problem.iterations` iterations are complete, calling
/// `observer` after each one.
pub fn run_from(
    problem: &OptimizationProblem,
    state: &mut RunState,
    mut observer: impl FnMut(&RunState, &LogRow),
) -> Result<Vec<LogRow>, OptimizeError> {
    problem.validate()?;
    if state.params.len() != problem.knots.len() {
        return Err(OptimizeError::Invalid("state does not match the problem's knots".into()));
    }
    let mut history = Vec::new();
    while state.iteration < problem.iterations {
        let row = step(problem, state).map_err(|e| OptimizeError::Aborted {
            iteration: state.iteration,
            last_total: history.last().map(|r: &LogRow| r.total),
            source: Box::new(e),
        })?;
        observer(state, &row);
        history.push(row);
    }
    Ok(history)
}

/// Fresh run over the whole iteration budget.
pub fn run(problem: &OptimizationProblem) -> Result<(RunState, Vec<LogRow>), OptimizeError> {
    let mut state = RunState::new(problem);
    let history = run_from(problem, &mut state, |_, _| {})?;
    Ok((state, history))
}

pub fn loss_csv(rows: &[LogRow]) -> String {
    let mut s = String::from(LogRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotCheckpoint {
    pub architecture: Architecture,
    pub permutations: Vec<[usize; 3]>,
    pub init_seed: u64,
    pub center: [f64; 3],
    pub template: TemplateKnot,
    pub params: Vec<f64>,
}

impl KnotCheckpoint {
    pub fn from_model(model: &KnotModel) -> Self {
        Self {
            architecture: model.architecture(),
            permutations: model.inn.permutations.clone(),
            init_seed: model.seed,
            center: model.center,
            template: model.template,
            params: model.params.clone(),
        }
    }

    pub fn to_model(&self) -> Result<KnotModel, KnotError> {
        let inn = Inn::new(self.architecture, self.permutations.clone())?;
        if self.params.len() != inn.param_count() {
            return Err(KnotError::Shape(format!(
                "{} parameters for an architecture with {}",
                self.params.len(),
                inn.param_count()
            )));
        }
        Ok(KnotModel {
            template: self.template,
            center: self.center,
            seed: self.init_seed,
            inn,
            params: self.params.clone(),
        })
    }
}

/// Everything needed to resume a run bit-exactly. Random streams are
/// derived from `(seed, iteration)`, so no generator state is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub seed: u64,
    pub iteration: u64,
    pub knots: Vec<KnotCheckpoint>,
    pub adam: Vec<AdamState>,
}

impl Checkpoint {
    pub fn capture(problem: &OptimizationProblem, state: &RunState) -> Self {
        Self {
            seed: problem.seed,
            iteration: state.iteration,
            knots: state
                .knots(problem)
                .iter()
                .map(KnotCheckpoint::from_model)
                .collect(),
            adam: state.adam.clone(),
        }
    }

    pub fn to_string(&self) -> String {
        let payload = serde_json::to_string(self).expect("checkpoint serializes");
        let digest = hex::encode(Sha256::digest(payload.as_bytes()));
        format!("{CHECKPOINT_MAGIC} sha256={digest}\n{payload}\n")
    }

    pub fn parse(text: &str) -> Result<Self, OptimizeError> {
        let bad = |m: &str| OptimizeError::Checkpoint(m.to_string());
        let (header, payload) = text.split_once('\n').ok_or_else(|| bad("missing header"))?;
        let digest = header
            .strip_prefix(CHECKPOINT_MAGIC)
            .and_then(|r| r.strip_prefix(" sha256="))
            .ok_or_else(|| bad("unknown format or version"))?;
        let payload = payload.strip_suffix('\n').unwrap_or(payload);
        if hex::encode(Sha256::digest(payload.as_bytes())) != digest {
            return Err(bad("checksum mismatch"));
        }
        let ck: Checkpoint = serde_json::from_str(payload).map_err(|e| bad(&e.to_string()))?;
        if ck.knots.len() != ck.adam.len() {
            return Err(bad("knot and optimizer counts differ"));
        }
        for (k, a) in ck.knots.iter().zip(&ck.adam) {
            k.to_model().map_err(|e| bad(&e.to_string()))?;
            if a.m.len() != k.params.len() || a.v.len() != k.params.len() {
                return Err(bad("optimizer state length differs from parameter count"));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), OptimizeError> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, OptimizeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn models(&self) -> Result<Vec<KnotModel>, KnotError> {
        self.knots.iter().map(|k| k.to_model()).collect()
    }

    /// Run state for `problem`; the knots must have the same shape.
    pub fn restore(&self, problem: &OptimizationProblem) -> Result<RunState, OptimizeError> {
        if self.knots.len() != problem.knots.len() {
            return Err(OptimizeError::Checkpoint(format!(
                "checkpoint has {} knots, problem has {}",
                self.knots.len(),
                problem.knots.len()
            )));
        }
        for (k, (ck, model)) in self.knots.iter().zip(&problem.knots).enumerate() {
            if ck.architecture != model.architecture() {
                return Err(OptimizeError::Checkpoint(format!(
                    "knot {k}: architecture {:?} does not match {:?}",
                    ck.architecture,
                    model.architecture()
                )));
            }
            if ck.permutations != model.inn.permutations {
                return Err(OptimizeError::Checkpoint(format!("knot {k}: coupling permutations differ")));
            }
        }
        if self.seed != problem.seed {
            return Err(OptimizeError::Checkpoint(format!(
                "checkpoint seed {} differs from problem seed {}",
                self.seed, problem.seed
            )));
        }
        Ok(RunState {
            iteration: self.iteration,
            params: self.knots.iter().map(|k| k.params.clone()).collect(),
            adam: self.adam.clone(),
        })
    }
}
