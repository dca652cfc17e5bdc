//! Command-line front end. Exit codes: 0 success, 1 invalid input, 2 runtime
//! failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::geometry::PinholeCamera;
use crate::io::{
    load_config, save_mask, save_silhouette, tube_mesh, write_polyline_csv, write_polyline_obj, IoError, Preset,
    RunConfig,
};
use crate::knot::{sample_template, KnotModel};
use crate::optimize::{run_from, Checkpoint, LogRow, RunState};
use crate::render::{render_oracle, RenderSettings, RendererKind};
use crate::targets::render_knot;

#[derive(Parser, Debug)]
#[command(name = "knot-art", version, about = "Optimize knotted tubes to match target silhouettes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RendererArg {
    Ellipse,
    Capsule,
}

impl From<RendererArg> for RendererKind {
    fn from(r: RendererArg) -> Self {
        match r {
            RendererArg::Ellipse => RendererKind::Ellipse,
            RendererArg::Capsule => RendererKind::Capsule,
        }
    }
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(Preset), default_value = "full")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    renderer: Option<RendererArg>,
    /// Save silhouettes every K iterations.
    #[arg(long, value_name = "K")]
    dump_every: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the optimization described by a config file.
    Optimize {
        #[command(flatten)]
        args: ConfigArgs,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Render saved knots through another camera.
    Render {
        checkpoint: PathBuf,
        camera: PathBuf,
        #[arg(long, default_value = "render.png")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "capsule")]
        renderer: RendererArg,
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long, default_value_t = 100.0)]
        tau: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Write polylines and tube meshes of saved knots.
    Export {
        checkpoint: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 16)]
        sides: usize,
        /// Wind mesh faces inward.
        #[arg(long)]
        flip: bool,
    },
    /// Ray-traced reference masks for every scene.
    Oracle {
        #[command(flatten)]
        args: ConfigArgs,
        /// Knots to trace instead of the freshly initialized ones.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Check a config and print it with defaults filled in.
    Validate {
        #[command(flatten)]
        args: ConfigArgs,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Degenerate(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn resolve(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut c = load_config(&args.config, args.preset)?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(i) = args.iters {
        c.iterations = i;
    }
    if let Some(o) = &args.out {
        c.out_dir = o.clone();
    }
    if let Some(r) = args.renderer {
        c.renderer = r.into();
    }
    if let Some(d) = args.dump_every {
        c.dump_every = d;
    }
    c.validate()?;
    Ok(c)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| runtime(IoError::file(dir, e)))
}

fn write_knots(models: &[KnotModel], dir: &Path, samples: usize, radius: f64, sides: usize, flip: bool) -> Result<(), Failure> {
    let s = sample_template(samples, false, 0).map_err(|e| Failure::Invalid(e.to_string()))?;
    for (k, m) in models.iter().enumerate() {
        let knot = m.sample_values(&s).map_err(runtime)?;
        write_polyline_csv(&knot, &dir.join(format!("knot{k}.csv"))).map_err(runtime)?;
        write_polyline_obj(&knot, &dir.join(format!("knot{k}.obj"))).map_err(runtime)?;
        let mesh = tube_mesh(&knot.point_values(), radius, sides, flip)?;
        mesh.write_obj(&dir.join(format!("tube{k}.obj"))).map_err(runtime)?;
    }
    Ok(())
}

fn optimize(args: &ConfigArgs, resume: Option<&Path>) -> Result<(), Failure> {
    let config = resolve(args)?;
    let problem = config.problem()?;
    let out = &config.out_dir;
    create_dir(out)?;
    fs::write(out.join("config.json"), config.to_json()).map_err(|e| runtime(IoError::file(out, e)))?;
    let mut state = match resume {
        Some(path) => Checkpoint::load(path)
            .and_then(|c| c.restore(&problem))
            .map_err(|e| Failure::Invalid(e.to_string()))?,
        None => RunState::new(&problem),
    };
    let dumps = out.join("dumps");
    if config.dump_every > 0 {
        create_dir(&dumps)?;
    }
    let ck_path = out.join("checkpoint.txt");
    let mut csv = String::from(LogRow::HEADER);
    csv.push('\n');
    let mut side_error: Option<Failure> = None;
    let report_every = (problem.iterations / 20).max(1);
    let result = run_from(&problem, &mut state, |st, row| {
        csv.push_str(&row.csv());
        csv.push('\n');
        if side_error.is_some() {
            return;
        }
        let done = st.iteration;
        if row.iteration % report_every == 0 || done == problem.iterations {
            eprintln!("iter {:>7}  total {:.6e}  image {:.6e}", row.iteration, row.total, row.terms.image);
        }
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 {
            if let Err(e) = Checkpoint::capture(&problem, st).save(&ck_path) {
                side_error = Some(runtime(e));
            }
        }
        if config.dump_every > 0 && done % config.dump_every == 0 {
            let knots: Result<Vec<_>, _> = st
                .knots(&problem)
                .iter()
                .enumerate()
                .map(|(k, m)| m.sample_values(&problem.template_samples(k, 0)?))
                .collect();
            let images = knots.map_err(runtime).and_then(|k| problem.render_scenes(&k).map_err(runtime));
            match images {
                Ok(images) => {
                    for (s, img) in images.iter().enumerate() {
                        if let Err(e) = save_silhouette(img, &dumps.join(format!("iter{done:07}_scene{s}.png"))) {
                            side_error = Some(runtime(e));
                        }
                    }
                }
                Err(e) => side_error = Some(e),
            }
        }
    });
    fs::write(out.join("loss.csv"), &csv).map_err(|e| runtime(IoError::file(out, e)))?;
    Checkpoint::capture(&problem, &state).save(&ck_path).map_err(runtime)?;
    result.map_err(runtime)?;
    if let Some(e) = side_error {
        return Err(e);
    }
    let models = state.knots(&problem);
    let s = sample_template(problem.samples, false, 0).map_err(runtime)?;
    let knots = models
        .iter()
        .map(|m| m.sample_values(&s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    for (k, img) in problem.render_scenes(&knots).map_err(runtime)?.iter().enumerate() {
        save_silhouette(img, &out.join(format!("final_scene{k}.png"))).map_err(runtime)?;
    }
    write_knots(&models, out, problem.samples, problem.radius, config.mesh_sides, false)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn load_models(path: &Path) -> Result<Vec<KnotModel>, Failure> {
    Checkpoint::load(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        .models()
        .map_err(|e| Failure::Invalid(e.to_string()))
}

fn render_cmd(
    checkpoint: &Path,
    camera: &Path,
    out: &Path,
    settings: RenderSettings,
    samples: usize,
) -> Result<(), Failure> {
    let models = load_models(checkpoint)?;
    let text = fs::read_to_string(camera).map_err(|e| IoError::file(camera, e))?;
    let cam: PinholeCamera = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: camera.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cam.validate().map_err(|e| Failure::Invalid(e.to_string()))?;
    let s = sample_template(samples, false, 0).map_err(|e| Failure::Invalid(e.to_string()))?;
    let knots = models
        .iter()
        .map(|m| m.sample_values(&s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    let pts: Vec<&[_]> = knots.iter().map(|k| k.points.as_slice()).collect();
    let img = crate::render::render(&pts, &cam, &settings).map_err(runtime)?;
    save_silhouette(&img, out).map_err(runtime)?;
    Ok(())
}

fn oracle_cmd(args: &ConfigArgs, checkpoint: Option<&Path>) -> Result<(), Failure> {
    let config = resolve(args)?;
    let models = match checkpoint {
        Some(p) => load_models(p)?,
        None => config.knot_models(),
    };
    let out = &config.out_dir;
    create_dir(out)?;
    let s = sample_template(config.samples, false, 0).map_err(runtime)?;
    let settings = RenderSettings {
        kind: config.renderer,
        radius: config.radius,
        tau: config.tau,
        compositor: config.compositor,
    };
    for (k, scene) in config.scenes.iter().enumerate() {
        let mut oracle: Option<crate::render::Mask> = None;
        let mut soft: Option<crate::render::Mask> = None;
        for m in &models {
            let knot = m.sample_values(&s).map_err(runtime)?;
            let o = render_oracle(&knot, config.radius, &scene.camera);
            let r = render_knot(&knot, &scene.camera, &settings).map_err(runtime)?.mask(0.5);
            oracle = Some(union(oracle, o));
            soft = Some(union(soft, r));
        }
        let (o, r) = (oracle.expect("one knot"), soft.expect("one knot"));
        println!("scene {k}: oracle pixels {}, render IoU {:.6}", o.count(), r.iou(&o));
        save_mask(&o, &out.join(format!("oracle_scene{k}.png"))).map_err(runtime)?;
    }
    Ok(())
}

fn union(acc: Option<crate::render::Mask>, m: crate::render::Mask) -> crate::render::Mask {
    match acc {
        None => m,
        Some(mut a) => {
            for (x, y) in a.data.iter_mut().zip(&m.data) {
                *x |= *y;
            }
            a
        }
    }
}

/// Parses `args` (program name first) and runs the chosen command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Optimize { args, resume } => optimize(args, resume.as_deref()),
        Command::Render {
            checkpoint,
            camera,
            out,
            renderer,
            radius,
            tau,
            samples,
        } => render_cmd(
            checkpoint,
            camera,
            out,
            RenderSettings::new((*renderer).into(), *radius, *tau),
            *samples,
        ),
        Command::Export {
            checkpoint,
            out,
            radius,
            samples,
            sides,
            flip,
        } => load_models(checkpoint).and_then(|m| {
            create_dir(out)?;
            write_knots(&m, out, *samples, *radius, *sides, *flip)
        }),
        Command::Oracle { args, checkpoint } => oracle_cmd(args, checkpoint.as_deref()),
        Command::Validate { args } => resolve(args).map(|c| println!("{}", c.to_json())),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}
