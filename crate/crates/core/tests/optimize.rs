use knot_art::geometry::PinholeCamera;
use knot_art::knot::{Architecture, KnotModel};
use knot_art::loss::{Budgets, LossWeights, Region};
use knot_art::optimize::{
    evaluate, loss_csv, run, run_from, step, Checkpoint, OptimizationProblem, OptimizeError, RunState, Scene,
};
use knot_art::render::{Compositor, RendererKind};
use knot_art::targets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(size: usize, samples: usize, depth: usize, width: usize) -> OptimizationProblem {
    let camera = PinholeCamera::with_size(size, size);
    let target = targets::annulus(&camera, [0.05, -0.03], 0.42, 0.03);
    OptimizationProblem {
        scenes: vec![Scene { camera, target }],
        knots: vec![KnotModel::new(Architecture { depth, width }, 3).with_center([0.0, 0.0, 4.0])],
        radius: 0.05,
        weights: LossWeights::default(),
        budgets: Budgets {
            length: Some(5.0),
            curvature: Some(10.0),
            region: Some(Region::Sphere {
                center: [0.0, 0.0, 4.0],
                radius: 1.02,
            }),
        },
        renderer: RendererKind::Capsule,
        compositor: Compositor::Max,
        tau: 100.0,
        samples,
        mobius_batch: 500,
        iterations: 20,
        learning_rate: 1e-3,
        seed: 11,
        jitter: true,
        clip_norm: Some(10.0),
        parallel: false,
        record_wall_clock: false,
    }
}

fn perturb(p: &mut OptimizationProblem, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in &mut p.knots {
        for v in &mut k.params {
            *v += scale * (rng.random::<f64>() - 0.5);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut p = problem(32, 64, 2, 8);
    perturb(&mut p, 0.2, 1);
    let params = vec![p.knots[0].params.clone()];
    let eval = evaluate(&p, &params, 4).unwrap();
    assert!(eval.terms.length > 0.0 || eval.terms.region > 0.0 || eval.terms.bending > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.random_range(0..params[0].len());
        let mut plus = params.clone();
        plus[0][k] += h;
        let mut minus = params.clone();
        minus[0][k] -= h;
        let fd = (evaluate(&p, &plus, 4).unwrap().total - evaluate(&p, &minus, 4).unwrap().total) / (2.0 * h);
        let an = eval.grads[0][k];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        worst = worst.max(rel);
        assert!(rel <= 1e-3, "param {k}: analytic {an} fd {fd}");
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn runs_are_deterministic() {
    let p = problem(32, 48, 1, 8);
    let (a_state, a) = run(&p).unwrap();
    let (b_state, b) = run(&p).unwrap();
    assert_eq!(loss_csv(&a), loss_csv(&b));
    assert_eq!(a_state, b_state);
    assert_eq!(a.len(), 20);
}

#[test]
fn parallel_scenes_match_serial() {
    let mut p = problem(32, 48, 1, 8);
    let cam2 = PinholeCamera {
        orientation: [0.0, 0.3, 0.0],
        ..PinholeCamera::with_size(32, 32)
    };
    p.scenes.push(Scene {
        target: targets::disc(&cam2, [0.0, 0.0], 0.3),
        camera: cam2,
    });
    p.iterations = 5;
    let (s1, serial) = run(&p).unwrap();
    p.parallel = true;
    let (s2, parallel) = run(&p).unwrap();
    assert_eq!(loss_csv(&serial), loss_csv(&parallel));
    assert_eq!(s1, s2);
}

#[test]
fn resume_from_checkpoint_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.txt");
    let mut p = problem(32, 48, 1, 8);
    p.iterations = 14;
    let (_, straight) = run(&p).unwrap();

    p.iterations = 9;
    let (state, first) = run(&p).unwrap();
    Checkpoint::capture(&p, &state).save(&path).unwrap();
    p.iterations = 14;
    let mut resumed = Checkpoint::load(&path).unwrap().restore(&p).unwrap();
    let rest = run_from(&p, &mut resumed, |_, _| {}).unwrap();
    let joined: Vec<_> = first.into_iter().chain(rest).collect();
    assert_eq!(loss_csv(&straight), loss_csv(&joined));
}

#[test]
fn checkpoint_rejects_mismatch_and_corruption() {
    let mut p = problem(32, 48, 1, 8);
    p.iterations = 2;
    let (state, _) = run(&p).unwrap();
    let text = Checkpoint::capture(&p, &state).to_string();
    assert!(text.starts_with("knot-art checkpoint v1 sha256="));
    assert_eq!(Checkpoint::parse(&text).unwrap().restore(&p).unwrap(), state);

    let deeper = problem(32, 48, 2, 8);
    assert!(matches!(
        Checkpoint::parse(&text).unwrap().restore(&deeper),
        Err(OptimizeError::Checkpoint(_))
    ));

    let corrupted = text.replacen("\"iteration\":2", "\"iteration\":3", 1);
    assert_ne!(corrupted, text);
    assert!(matches!(Checkpoint::parse(&corrupted), Err(OptimizeError::Checkpoint(_))));
    let truncated = &text[..text.len() / 2];
    assert!(Checkpoint::parse(truncated).is_err());
    assert!(Checkpoint::parse(&text.replace("v1", "v9")).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, &corrupted).unwrap();
    let mut live = state.clone();
    if let Ok(ck) = Checkpoint::load(&path) {
        live = ck.restore(&p).unwrap();
    }
    assert_eq!(live, state);
}

#[test]
fn self_rendered_target_is_a_fixed_point() {
    let mut p = problem(32, 64, 1, 8);
    p.jitter = false;
    p.weights.mobius = 0.0;
    p.budgets = Budgets::default();
    let s = p.template_samples(0, 0).unwrap();
    let knot = p.knots[0].sample_values(&s).unwrap();
    p.scenes[0].target = p.render_scenes(&[knot]).unwrap().remove(0);
    p.iterations = 100;
    let (_, history) = run(&p).unwrap();
    for row in &history {
        assert!(row.total < 1e-12, "{}: {}", row.iteration, row.total);
    }
}

#[test]
fn step_failure_leaves_state_untouched() {
    let mut p = problem(32, 48, 1, 8);
    // a tube that swallows the camera has no silhouette conic
    p.radius = 5.0;
    let mut state = RunState::new(&p);
    let before = state.clone();
    assert!(step(&p, &mut state).is_err());
    assert_eq!(state, before);
    match run_from(&p, &mut state, |_, _| {}) {
        Err(OptimizeError::Aborted { iteration, .. }) => assert_eq!(iteration, 0),
        other => panic!("{other:?}"),
    }
}
