//! Acceptance suite. Every criterion runs, prints one PASS/FAIL line, and
//! the process exits non-zero if any of them failed.
//!
//! Optimization budgets (preset, iterations, learning rates) are desk-scale
//! choices made for this suite.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use knot_art::autodiff::{Vec2, Vec3};
use knot_art::geometry::PinholeCamera;
use knot_art::io::{tube_mesh, Preset, RunConfig};
use knot_art::knot::{sample_template, Architecture, KnotModel, SampledKnot};
use knot_art::loss::{image_loss, Budgets, Region};
use knot_art::optimize::{evaluate, loss_csv, run_from, LogRow, OptimizationProblem, RunState, Scene};
use knot_art::render::{
    project_capsule, project_sphere, render_capsule, render_ellipse, render_oracle, segment_distance_sq,
    tangent_lines, vanishing_point, Mask, ProjectedConic, SilhouetteImage, VanishingPoint,
};
use knot_art::targets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = 0.05;

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), pass, detail));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn uniform(model: &KnotModel, n: usize) -> SampledKnot<f64> {
    model.sample_values(&sample_template(n, false, 0).unwrap()).unwrap()
}

fn perturbed(depth: usize, width: usize, seed: u64, scale: f64) -> KnotModel {
    let mut m = KnotModel::new(Architecture { depth, width }, seed).with_center([0.0, 0.0, 4.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in &mut m.params {
        *v += scale * (2.0 * rng.random::<f64>() - 1.0);
    }
    m
}

fn desk() -> RunConfig {
    let mut c = RunConfig::preset(Preset::Desk);
    c.record_wall_clock = false;
    c.parallel = false;
    c
}

fn dist(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    (a - b).norm()
}

// ---------- 1 ----------

fn renderer_matches_oracle(report: &mut Report) {
    let cam = PinholeCamera::with_size(64, 64);
    let (results, t) = timed(|| {
        (0..20)
            .map(|k| {
                let knot = uniform(&perturbed(2, 8, 100 + k, 0.3), 256);
                let soft = render_capsule(&knot, R, &cam, 100.0).unwrap().mask(0.5);
                let oracle = render_oracle(&knot, R, &cam);
                (soft.iou(&oracle), oracle.count())
            })
            .collect::<Vec<_>>()
    });
    let worst = results.iter().map(|r| r.0).fold(1.0, f64::min);
    let smallest = results.iter().map(|r| r.1).min().unwrap();
    report.record(
        "1",
        worst >= 0.98 && smallest > 0 && t.as_secs_f64() <= 60.0,
        format!(
            "min IoU over 20 knots {worst:.4} (>= 0.98), smallest oracle mask {smallest} pixels, {:.1}s",
            t.as_secs_f64()
        ),
    );
}

// ---------- 2 ----------

/// Discriminant of `through + t dir` substituted into the center-normalized
/// conic, for unit `dir`.
fn tangency(c: &ProjectedConic<f64>, through: [f64; 2], dir: [f64; 2]) -> f64 {
    let [a, b, cc, d, e, f] = c.coefficients();
    let det = a * cc - 0.25 * b * b;
    let cx = (0.25 * b * e - 0.5 * cc * d) / det;
    let cy = (0.25 * b * d - 0.5 * a * e) / det;
    let kappa = -(f + 0.5 * (d * cx + e * cy));
    let n = [a / kappa, 0.5 * b / kappa, cc / kappa];
    let len = dir[0].hypot(dir[1]);
    let u = [dir[0] / len, dir[1] / len];
    let form = |x: [f64; 2], y: [f64; 2]| n[0] * x[0] * y[0] + n[1] * (x[0] * y[1] + x[1] * y[0]) + n[2] * x[1] * y[1];
    let o = [through[0] - cx, through[1] - cy];
    let qa = form(u, u);
    let qb = 2.0 * form(u, o);
    let qc = form(o, o) - 1.0;
    (qb * qb - 4.0 * qa * qc).abs() / (4.0 * qa.abs())
}

fn intersect(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> [f64; 2] {
    let (da, db) = ([a1[0] - a0[0], a1[1] - a0[1]], [b1[0] - b0[0], b1[1] - b0[1]]);
    let den = da[0] * db[1] - da[1] * db[0];
    let t = ((b0[0] - a0[0]) * db[1] - (b0[1] - a0[1]) * db[0]) / den;
    [a0[0] + t * da[0], a0[1] + t * da[1]]
}

fn appendix_math(report: &mut Report) {
    let fz = 2.0;
    let ((coeff_ok, contact, tangent, vanish, checked), t) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut coeff_ok = 0;
        for _ in 0..1000 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.5..8.0)];
            let r = rng.random_range(0.01..0.4);
            let c = project_sphere(Vec3::from(p), r, fz).unwrap();
            let [l, m, n] = p;
            let s = l * l + m * m + n * n;
            let k2 = s * s / (s + r * r);
            let expect = [l * l - k2, l * m * 2.0, m * m - k2, l * n * (2.0 * fz), m * n * (2.0 * fz), (n * n - k2) * (fz * fz)];
            if c.coefficients() == expect && (n <= r || c.discriminant() < 0.0) {
                coeff_ok += 1;
            }
        }

        let (mut contact, mut tangent, mut vanish, mut checked) = (0f64, 0f64, 0f64, 0);
        while checked < 1000 {
            let mut point = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(2.0..6.0));
            let (p1, p2) = (point(), point());
            let cap = project_capsule(p1, p2, R, fz).unwrap();
            let Some(q) = cap.quad else { continue };
            let q = q.map(|p| p.values());
            for (k, frame) in [(0, &cap.frame1), (1, &cap.frame1), (2, &cap.frame2), (3, &cap.frame2)] {
                contact = contact.max((frame.rho_sq(q[k]) - 1.0).abs());
            }
            for (u, v) in [(0, 2), (1, 3)] {
                let dir = [q[v][0] - q[u][0], q[v][1] - q[u][1]];
                tangent = tangent.max(tangency(&cap.conic1, q[u], dir)).max(tangency(&cap.conic2, q[u], dir));
            }
            if let Ok(VanishingPoint::Finite(v)) = vanishing_point(p1, p2, fz) {
                // a parallel segment's image meets this one's at the vanishing point
                let w = Vec3::new(0.3, -0.2, 0.5);
                let proj = |p: Vec3<f64>| [fz * p.x / p.z, fz * p.y / p.z];
                let direct = intersect(proj(p1), proj(p2), proj(p1 + w), proj(p2 + w));
                let v = v.values();
                let scale = 1f64.max(v[0].abs()).max(v[1].abs());
                vanish = vanish.max((direct[0] - v[0]).abs().max((direct[1] - v[1]).abs()) / scale);
                // and the tangents from it touch each end conic
                for c in [&cap.conic1, &cap.conic2] {
                    if let Ok(lines) = tangent_lines(c, Vec2::from(v)) {
                        for l in lines {
                            tangent = tangent.max(tangency(c, l.contact.values(), l.direction.values()));
                        }
                    }
                }
            }
            checked += 1;
        }
        (coeff_ok, contact, tangent, vanish, checked)
    });
    let pass = coeff_ok == 1000 && contact <= 1e-7 && tangent <= 1e-6 && vanish <= 1e-9 && t.as_secs_f64() <= 10.0;
    report.record(
        "2",
        pass,
        format!(
            "conic identities {coeff_ok}/1000, {checked} capsules: contact residual {contact:.2e} (<= 1e-7), \
             tangency {tangent:.2e} (<= 1e-6), vanishing point {vanish:.2e} (<= 1e-9), {:.2}s",
            t.as_secs_f64()
        ),
    );
}

// ---------- 3 ----------

fn on_axis_radius(report: &mut Report) {
    let (r, n, fz) = (0.05, 4.0, 2.0);
    let e = project_sphere(Vec3::new(0.0, 0.0, n), r, fz).unwrap().canonical().unwrap();
    let centered = e.center[0].abs() <= 1e-12 && e.center[1].abs() <= 1e-12;
    let radius_err = e.semi_axes.iter().map(|a| (a - 0.025).abs()).fold(0.0, f64::max);

    // Exact silhouette: the image radius whose ray passes at distance r from
    // the sphere center, found by bisection.
    let ray_miss = |rho: f64| {
        let len = (rho * rho + fz * fz).sqrt();
        // |p x d| for p = (0, 0, n), d = (rho, 0, fz) / len
        n * rho / len
    };
    let (mut lo, mut hi) = (0.0, 0.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ray_miss(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let exact = 0.5 * (lo + hi);
    let gap = (exact - 0.025).abs() / exact;

    // the oracle mask agrees with that radius away from one pixel of it
    let cam = PinholeCamera::default();
    let knot = SampledKnot::new(vec![0.0], vec![Vec3::new(0.0, 0.0, n)]);
    let mask = render_oracle(&knot, r, &cam);
    let pitch = cam.pixel_pitch()[0];
    let mut disagree = 0;
    for j in 0..cam.height {
        for i in 0..cam.width {
            let [x, y] = cam.pixel_coord(i, j);
            let d = x.hypot(y);
            if (d - exact).abs() > pitch && mask.get(i, j) != (d < exact) {
                disagree += 1;
            }
        }
    }
    report.record(
        "3",
        centered && radius_err <= 1e-9 && gap < 1e-4 && disagree == 0,
        format!(
            "conic radius error {radius_err:.1e} (<= 1e-9), exact radius {exact:.9} gap {:.4}% (< 0.01%), \
             oracle pixels off the exact disc {disagree}",
            gap * 100.0
        ),
    );
}

// ---------- 4 ----------

fn inn_invertibility(report: &mut Report) {
    let ((worst, ident), t) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points: Vec<[f64; 3]> = (0..10_000).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect();
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let m = perturbed(1 + (k % 4) as usize, 4 + (k % 13) as usize, 400 + k, 0.3);
            for &p in &points {
                let back = m.inverse(m.forward(p).unwrap()).unwrap();
                worst = worst.max((0..3).map(|i| (back[i] - p[i]).abs()).fold(0.0, f64::max));
            }
        }
        let fresh = KnotModel::new(Architecture { depth: 8, width: 1024 }, 7);
        let ident = points[..200]
            .iter()
            .map(|&p| {
                let q = fresh.forward(p).unwrap();
                (0..3).map(|i| (q[i] - p[i]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        (worst, ident)
    });
    report.record(
        "4",
        worst <= 1e-8 && ident <= 1e-12 && t.as_secs_f64() <= 30.0,
        format!(
            "round trip {worst:.2e} (<= 1e-8) over 10^4 points x 50 models, fresh depth-8 width-1024 model \
             identity error {ident:.1e} (<= 1e-12), {:.1}s",
            t.as_secs_f64()
        ),
    );
}

// ---------- 5 ----------

fn gradient_check(report: &mut Report) {
    let (worst, t) = timed(|| {
        let camera = PinholeCamera::with_size(32, 32);
        let target = targets::annulus(&camera, [0.05, -0.03], 0.42, 0.03);
        let mut c = desk();
        c.samples = 64;
        c.inn.depth = 2;
        c.inn.width = 8;
        c.scenes[0].camera = camera;
        let mut p = c.problem_with_targets(vec![target]).unwrap();
        p.knots[0] = perturbed(2, 8, 5, 0.2);
        p.budgets = Budgets {
            length: Some(5.0),
            curvature: Some(10.0),
            region: Some(Region::Sphere {
                center: [0.0, 0.0, 4.0],
                radius: 1.02,
            }),
        };
        let params = vec![p.knots[0].params.clone()];
        let eval = evaluate(&p, &params, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let k = rng.random_range(0..params[0].len());
            let (mut plus, mut minus) = (params.clone(), params.clone());
            plus[0][k] += h;
            minus[0][k] -= h;
            let fd = (evaluate(&p, &plus, 3).unwrap().total - evaluate(&p, &minus, 3).unwrap().total) / (2.0 * h);
            let an = eval.grads[0][k];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
        }
        worst
    });
    report.record(
        "5",
        worst <= 1e-3 && t.as_secs_f64() <= 300.0,
        format!("worst relative error over 20 coordinates {worst:.2e} (<= 1e-3), {:.1}s", t.as_secs_f64()),
    );
}

// ---------- 6 ----------

struct Run {
    problem: OptimizationProblem,
    state: RunState,
    rows: Vec<LogRow>,
}

impl Run {
    fn model(&self) -> KnotModel {
        self.state.knots(&self.problem).remove(0)
    }

    fn knot(&self, n: usize) -> SampledKnot<f64> {
        uniform(&self.model(), n)
    }

    fn images(&self) -> Vec<SilhouetteImage<f64>> {
        self.problem.render_scenes(&[self.knot(self.problem.samples)]).unwrap()
    }

    fn image_loss(&self) -> f64 {
        let imgs = self.images();
        let sum: f64 = imgs.iter().zip(&self.problem.scenes).map(|(i, s)| image_loss(i, &s.target).unwrap()).sum();
        sum / imgs.len() as f64
    }
}

fn optimize(problem: OptimizationProblem, mut observe: impl FnMut(&OptimizationProblem, &RunState)) -> Run {
    let mut state = RunState::new(&problem);
    let rows = run_from(&problem, &mut state, |s, _| observe(&problem, s)).unwrap();
    Run { problem, state, rows }
}

/// Circle problem: the target is the desk render of the undeformed circle and
/// the run starts from a perturbed network.
fn circle_problem(tau: f64) -> (OptimizationProblem, Mask) {
    let c = desk();
    let truth = c.knot_models().remove(0);
    let oracle = render_oracle(&uniform(&truth, 1000), c.radius, &c.scenes[0].camera);
    let mut p = c.problem_with_targets(vec![SilhouetteImage { width: 64, height: 64, values: vec![0.0; 64 * 64] }]).unwrap();
    p.scenes[0].target = p.render_scenes(&[uniform(&truth, p.samples)]).unwrap().remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for v in &mut p.knots[0].params {
        *v += 0.05 * (2.0 * rng.random::<f64>() - 1.0);
    }
    p.tau = tau;
    (p, oracle)
}

fn band(img: &SilhouetteImage<f64>) -> usize {
    img.values.iter().filter(|&&v| v > 0.1 && v < 0.9).count()
}

fn optimization_smoke(report: &mut Report, runs: &mut Vec<(String, Run)>) {
    let start = Instant::now();
    let (p, oracle) = circle_problem(100.0);
    let start_iou = p.render_scenes(&[uniform(&p.knots[0], p.samples)]).unwrap()[0].mask(0.5).iou(&oracle);
    let mut reached = None;
    let circle = optimize(p, |p, s| {
        if s.iteration % 100 == 0 && reached.is_none() {
            let iou = p.render_scenes(&[uniform(&s.knots(p)[0], p.samples)]).unwrap()[0].mask(0.5).iou(&oracle);
            if iou >= 0.95 {
                reached = Some((s.iteration, iou));
            }
        }
    });
    let final_iou = circle.images()[0].mask(0.5).iou(&oracle);
    report.record(
        "6a",
        reached.is_some(),
        format!(
            "IoU vs oracle {start_iou:.4} at start, first >= 0.95 at {}, final {final_iou:.4} after {} iterations",
            reached.map_or("never".to_string(), |(i, v)| format!("iteration {i} ({v:.4})")),
            circle.problem.iterations
        ),
    );

    // descent, on the same problem with frozen sampling: with jitter the loss
    // settles onto a noise floor whose window means wander by about 1%
    let (mut frozen, _) = circle_problem(100.0);
    frozen.jitter = false;
    let frozen = optimize(frozen, |_, _| {});
    let blocks: Vec<f64> = frozen.rows.chunks(200).map(|c| c.iter().map(|r| r.total).sum::<f64>() / c.len() as f64).collect();
    let rises = blocks.windows(2).filter(|w| w[1] > w[0]).count();
    report.record(
        "descent",
        rises == 0,
        format!(
            "200-iteration window means {}",
            blocks.iter().map(|b| format!("{b:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    );

    let cam = PinholeCamera::default();
    let model = circle.model();
    let coarse = uniform(&model, 64);
    let truth = render_oracle(&uniform(&model, 2048), R, &cam);
    let ce = render_ellipse(&coarse, R, &cam, 100.0).unwrap().mask(0.5).iou(&truth);
    let cc = render_capsule(&coarse, R, &cam, 100.0).unwrap().mask(0.5).iou(&truth);
    report.record("6b", cc > ce, format!("N=64 at 256x256: capsule IoU {cc:.4} > ellipse IoU {ce:.4}"));

    // the same knot rendered soft and sharp
    let knot = circle.knot(circle.problem.samples);
    let cam = &circle.problem.scenes[0].camera;
    let wide = band(&render_capsule(&knot, R, cam, 5.0).unwrap());
    let sharp = band(&render_capsule(&knot, R, cam, 100.0).unwrap());
    let ratio = wide as f64 / sharp.max(1) as f64;
    report.record(
        "6c",
        ratio >= 4.0,
        format!("pixels in the 0.1..0.9 band: tau=5 {wide}, tau=100 {sharp}, ratio {ratio:.1} (>= 4)"),
    );
    let (p5, _) = circle_problem(5.0);
    let soft = optimize(p5, |_, _| {});
    println!(
        "note: optimizing at tau=5 instead ends with {} band pixels at tau=5 (the knot shrinks to cut the blur)",
        band(&soft.images()[0])
    );
    let secs = start.elapsed().as_secs_f64();
    report.record("6-time", secs <= 900.0, format!("{secs:.0}s (<= 900s)"));

    // determinism: the circle problem again, single-threaded
    let again = optimize(circle.problem.clone(), |_, _| {});
    let same = loss_csv(&again.rows) == loss_csv(&circle.rows);
    report.record("8", same, format!("two runs of the circle problem give identical loss CSVs: {same}"));

    runs.push(("circle tau=100".into(), circle));
    runs.push(("circle tau=5".into(), soft));
    runs.push(("circle frozen".into(), frozen));
}

// ---------- 7 ----------

const HALF: [f64; 2] = [0.6, 0.35];

fn rectangle_problem(c: &RunConfig) -> OptimizationProblem {
    let target = targets::rectangle_outline(&c.scenes[0].camera, [0.0, 0.0], HALF, 0.025);
    c.problem_with_targets(vec![target]).unwrap()
}

fn curvature(knot: &SampledKnot<f64>) -> Vec<f64> {
    (0..knot.len()).map(|i| knot.curvature_sq(i).unwrap()).collect()
}

/// Largest squared curvature among samples whose image lies within 0.2 of a
/// rectangle corner.
fn corner_curvature(knot: &SampledKnot<f64>, cam: &PinholeCamera) -> f64 {
    let k2 = curvature(knot);
    (0..knot.len())
        .filter(|&i| {
            let q = cam.project(cam.world_to_camera(knot.points[i])).values();
            (q[0].abs() - HALF[0]).hypot(q[1].abs() - HALF[1]) < 0.2
        })
        .map(|i| k2[i])
        .fold(0.0, f64::max)
}

/// Smallest distance between samples at least `pi r` apart along the curve.
fn clearance(knot: &SampledKnot<f64>, r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..knot.len() {
        for j in i + 1..knot.len() {
            if knot.geodesic_distance(i, j).unwrap() >= PI * r {
                best = best.min(dist(knot.points[i], knot.points[j]));
            }
        }
    }
    best
}

fn crossing_problem(w_mob: f64) -> OptimizationProblem {
    let c = desk();
    let front = c.scenes[0].camera.clone();
    let top = PinholeCamera {
        position: [0.0, 4.0, 4.0],
        orientation: [FRAC_PI_2, 0.0, 0.0],
        ..front.clone()
    };
    let line = |cam: &PinholeCamera| targets::strokes(cam, &[[[-0.5, 0.0], [0.5, 0.0]]], 0.025);
    let mut p = c.problem_with_targets(vec![line(&front)]).unwrap();
    p.scenes.push(Scene { target: line(&top), camera: top });
    p.weights.mobius = w_mob;
    p
}

fn ablations(report: &mut Report, runs: &mut Vec<(String, Run)>) {
    let start = Instant::now();
    let c = desk();

    let mut free = rectangle_problem(&c);
    free.weights.length = 0.0;
    let free = optimize(free, |_, _| {});
    let lu = free.knot(c.samples).length;
    let mut capped = rectangle_problem(&c);
    capped.budgets.length = Some(0.8 * lu);
    let capped = optimize(capped, |_, _| {});
    let (lc, l0) = (capped.knot(c.samples).length, 0.8 * lu);
    let (iu, ic) = (free.image_loss(), capped.image_loss());
    report.record(
        "7a",
        lc <= 1.05 * l0 && ic > iu,
        format!("length {lc:.4} <= 1.05 L0 = {:.4}; image loss {ic:.3e} > unconstrained {iu:.3e}", 1.05 * l0),
    );

    let cam = c.scenes[0].camera.clone();
    let bend = |b0: f64| {
        let mut p = rectangle_problem(&c);
        p.budgets.curvature = Some(b0);
        optimize(p, |_, _| {})
    };
    let (tight, loose) = (bend(0.5), bend(50.0));
    let max_k2 = curvature(&tight.knot(c.samples)).into_iter().fold(0.0, f64::max);
    let (ct, cl) = (corner_curvature(&tight.knot(c.samples), &cam), corner_curvature(&loose.knot(c.samples), &cam));
    report.record(
        "7b",
        max_k2 <= 1.10 * 0.5 && ct < cl,
        format!("B0=0.5: max k^2 {max_k2:.4} (<= 0.55); corner k^2 {ct:.3} < {cl:.3} at B0=50"),
    );

    let region = Region::Box {
        center: [0.0, 0.0, 4.0],
        half_extents: [0.5; 3],
    };
    let occ = |w: f64| {
        let mut p = rectangle_problem(&c);
        p.budgets.region = Some(region.clone());
        p.weights.occupancy = w;
        optimize(p, |_, _| {})
    };
    let violations = |run: &Run| run.knot(c.samples).points.iter().filter(|&&q| region.sdf(q) < R - R / 10.0).count();
    let (held, ignored) = (occ(1e-2), occ(0.0));
    let (vh, vi) = (violations(&held), violations(&ignored));
    report.record(
        "7c",
        vh == 0 && vi >= 1,
        format!("samples outside the box: {vh} with w_occ=1e-2 (== 0), {vi} with w_occ=0 (>= 1)"),
    );

    let (mob, bare) = (optimize(crossing_problem(1e-3), |_, _| {}), optimize(crossing_problem(0.0), |_, _| {}));
    let (cm, cb) = (clearance(&mob.knot(512), R), clearance(&bare.knot(512), R));
    report.record(
        "7d",
        cm >= 2.0 * R && cb < 2.0 * R,
        format!("clearance {cm:.4} with w_mob=1e-3 (>= {}), {cb:.4} with w_mob=0 (< {})", 2.0 * R, 2.0 * R),
    );
    let strong = optimize(crossing_problem(1e-1), |_, _| {});
    println!("note: same problem with w_mob=1e-1 reaches clearance {:.4}", clearance(&strong.knot(512), R));

    let secs = start.elapsed().as_secs_f64();
    report.record("7-time", secs <= 2700.0, format!("{secs:.0}s (<= 2700s)"));

    for (name, run) in [
        ("length free", free),
        ("length capped", capped),
        ("bending 0.5", tight),
        ("bending 50", loose),
        ("occupancy 1e-2", held),
        ("occupancy 0", ignored),
        ("mobius 1e-3", mob),
        ("mobius 0", bare),
        ("mobius 1e-1", strong),
    ] {
        runs.push((name.into(), run));
    }
}

// ---------- 9 ----------

/// Non-adjacent polygon edges closer than `tol`.
fn polygon_crossings(points: &[[f64; 3]], tol: f64) -> usize {
    let n = points.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let d = segment_distance_sq(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n]);
            if d <= tol * tol {
                count += 1;
            }
        }
    }
    count
}

fn meshes(report: &mut Report, runs: &[(String, Run)]) {
    let (bad, t) = timed(|| {
        runs.iter()
            .filter_map(|(name, run)| {
                let mesh = tube_mesh(&run.knot(run.problem.samples).point_values(), R, 16, false).unwrap();
                (!mesh.is_watertight() || mesh.euler_characteristic() != 0).then(|| name.clone())
            })
            .collect::<Vec<_>>()
    });
    report.record(
        "9",
        bad.is_empty() && t.as_secs_f64() <= 5.0,
        format!("{} converged knots, not watertight: {bad:?}, {:.2}s", runs.len(), t.as_secs_f64()),
    );

    let crossing: Vec<String> = runs
        .iter()
        .filter(|(_, run)| polygon_crossings(&run.knot(run.problem.samples).point_values(), 1e-9) > 0)
        .map(|(name, _)| name.clone())
        .collect();
    report.record("topology", crossing.is_empty(), format!("optimized polygons with self-intersections: {crossing:?}"));
}

fn main() {
    // cargo passes libtest flags; `--list` must succeed without running anything
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut report = Report { lines: Vec::new() };
    let mut runs = Vec::new();
    renderer_matches_oracle(&mut report);
    appendix_math(&mut report);
    on_axis_radius(&mut report);
    inn_invertibility(&mut report);
    gradient_check(&mut report);
    optimization_smoke(&mut report, &mut runs);
    ablations(&mut report, &mut runs);
    meshes(&mut report, &runs);

    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        report.lines.len() - failed.len(),
        failed.len(),
        failed
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
