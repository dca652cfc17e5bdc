use knot_art::autodiff::{Scalar, Tape, Vec3};
use knot_art::geometry::PinholeCamera;
use knot_art::knot::{sample_template, Architecture, KnotModel, SampledKnot};
use knot_art::render::{
    render, render_capsule, render_ellipse, render_oracle, Compositor, RenderSettings, RendererKind, FLOOR_LOGIT,
};

fn circle(n: usize, z: f64) -> SampledKnot<f64> {
    let model = KnotModel::new(Architecture { depth: 1, width: 4 }, 0).with_center([0.0, 0.0, z]);
    model.sample_values(&sample_template(n, false, 0).unwrap()).unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn on_axis_point_is_a_soft_disc() {
    let cam = PinholeCamera::with_size(64, 64);
    let knot = SampledKnot::new(vec![0.0], vec![Vec3::new(0.0, 0.0, 4.0)]);
    let img = render_ellipse(&knot, 0.05, &cam, 100.0).unwrap();
    let radius = 2.0 * 0.05 / 4.0;
    for j in 0..64 {
        for i in 0..64 {
            let [x, y] = cam.pixel_coord(i, j);
            let d = (x * x + y * y).sqrt();
            let expect = sigmoid(100.0 * (radius - d)).max(sigmoid(FLOOR_LOGIT));
            assert!((img.get(i, j) - expect).abs() < 1e-9, "({i},{j})");
        }
    }
}

#[test]
fn annulus_matches_oracle() {
    let cam = PinholeCamera::default();
    let knot = circle(512, 4.0);
    let oracle = render_oracle(&knot, 0.05, &cam);
    let e = render_ellipse(&knot, 0.05, &cam, 100.0).unwrap().mask(0.5);
    let c = render_capsule(&knot, 0.05, &cam, 100.0).unwrap().mask(0.5);
    assert!(e.iou(&oracle) >= 0.98, "{}", e.iou(&oracle));
    assert!(c.iou(&oracle) >= 0.98, "{}", c.iou(&oracle));

    let coarse = circle(64, 4.0);
    let oracle = render_oracle(&coarse, 0.05, &cam);
    let e64 = render_ellipse(&coarse, 0.05, &cam, 100.0).unwrap().mask(0.5).iou(&oracle);
    let c64 = render_capsule(&coarse, 0.05, &cam, 100.0).unwrap().mask(0.5).iou(&oracle);
    eprintln!("N=64: ellipse {e64} capsule {c64}");
    assert!(c64 >= 0.98);
    assert!(e64 < e.iou(&render_oracle(&knot, 0.05, &cam)));
    assert!(c64 > e64);
}

#[test]
fn two_point_knot_is_a_stadium() {
    let cam = PinholeCamera::with_size(128, 128);
    let knot = SampledKnot::new(vec![0.0, 0.5], vec![Vec3::new(-0.4, 0.1, 4.0), Vec3::new(0.5, -0.2, 4.6)]);
    let c = render_capsule(&knot, 0.05, &cam, 100.0).unwrap().mask(0.5);
    let o = render_oracle(&knot, 0.05, &cam);
    assert!(c.iou(&o) >= 0.98, "{}", c.iou(&o));
}

#[test]
fn values_stay_in_unit_interval_and_sharpen_with_tau() {
    let cam = PinholeCamera::with_size(48, 48);
    let knot = circle(64, 4.0);
    let mut prev: Option<Vec<f64>> = None;
    for tau in [5.0, 20.0, 100.0, 400.0] {
        let img = render_capsule(&knot, 0.05, &cam, tau).unwrap();
        assert!(img.values.iter().all(|v| (0.0..=1.0).contains(v)));
        // same winner, larger |tau * S|, except where the floor clamps
        if let Some(p) = &prev {
            for (a, b) in p.iter().zip(&img.values) {
                let floor = sigmoid(FLOOR_LOGIT);
                if *a > floor + 1e-12 && *b > floor + 1e-12 {
                    assert!((b - 0.5).abs() >= (a - 0.5).abs() - 1e-12);
                }
            }
        }
        prev = Some(img.values.clone());
    }
}

#[test]
fn bounding_box_clamp_is_below_floor_error() {
    // a brute-force max over every primitive and pixel
    let cam = PinholeCamera::with_size(40, 40);
    let knot = circle(24, 4.0);
    let tau = 100.0;
    let img = render_ellipse(&knot, 0.05, &cam, tau).unwrap();
    let grid = cam.pixel_grid().unwrap();
    for (p, q) in grid.coordinates.iter().enumerate() {
        let mut best = 0.0f64;
        for pt in &knot.points {
            let frame = knot_art::render::project_sphere(*pt, 0.05, 2.0).unwrap().frame().unwrap();
            best = best.max(sigmoid(tau * frame.sdf(*q)));
        }
        assert!((img.values[p] - best).abs() <= sigmoid(FLOOR_LOGIT) + 1e-12);
    }
}

#[test]
fn log_sum_exp_compositor_is_an_upper_soft_max() {
    let cam = PinholeCamera::with_size(32, 32);
    let knot = circle(32, 4.0);
    let hard = render_capsule(&knot, 0.05, &cam, 100.0).unwrap();
    let mut settings = RenderSettings::new(RendererKind::Capsule, 0.05, 100.0);
    settings.compositor = Compositor::LogSumExp { temperature: 200.0 };
    let soft = render(&[&knot.points], &cam, &settings).unwrap();
    for (h, s) in hard.values.iter().zip(&soft.values) {
        assert!(*s >= h - 1e-12 && *s <= 1.0);
        assert!(s - h < 0.05);
    }
}

#[test]
fn multi_knot_render_is_pixelwise_max() {
    let cam = PinholeCamera::with_size(40, 40);
    let a = circle(48, 4.0);
    let model = KnotModel::new(Architecture { depth: 1, width: 4 }, 0).with_center([0.3, 0.2, 5.0]);
    let b = model.sample_values(&sample_template(48, false, 0).unwrap()).unwrap();
    let settings = RenderSettings::new(RendererKind::Capsule, 0.05, 100.0);
    let both = render(&[&a.points, &b.points], &cam, &settings).unwrap();
    let ia = render(&[&a.points], &cam, &settings).unwrap();
    let ib = render(&[&b.points], &cam, &settings).unwrap();
    for k in 0..both.values.len() {
        assert_eq!(both.values[k], ia.values[k].max(ib.values[k]));
    }
}

#[test]
fn image_gradient_matches_finite_differences() {
    let cam = PinholeCamera::with_size(48, 48);
    let base = circle(16, 4.0);
    let pts: Vec<[f64; 3]> = base.point_values();
    for kind in [RendererKind::Ellipse, RendererKind::Capsule] {
        let settings = RenderSettings::new(kind, 0.05, 20.0);
        let mean = |pts: &[[f64; 3]]| {
            let p: Vec<Vec3<f64>> = pts.iter().map(|&p| Vec3::from(p)).collect();
            let img = render(&[&p], &cam, &settings).unwrap();
            img.values.iter().sum::<f64>() / img.values.len() as f64
        };
        let tape = Tape::new();
        let vars: Vec<Vec3<_>> = pts
            .iter()
            .map(|p| Vec3::new(tape.var(p[0]).unwrap(), tape.var(p[1]).unwrap(), tape.var(p[2]).unwrap()))
            .collect();
        let img = render(&[&vars], &cam, &settings).unwrap();
        let m = <knot_art::autodiff::Var as Scalar>::sum(&img.values) / img.values.len() as f64;
        let g = tape.backward(m).unwrap();
        let h = 1e-4;
        for (k, axis) in [(0, 0), (3, 1), (5, 2), (9, 0)] {
            let mut plus = pts.clone();
            let mut minus = pts.clone();
            plus[k][axis] += h;
            minus[k][axis] -= h;
            let fd = (mean(&plus) - mean(&minus)) / (2.0 * h);
            let ad = g.get(vars[k].get(axis));
            assert!((fd - ad).abs() <= 2e-2 * fd.abs().max(ad.abs()) + 1e-7, "{kind:?} {k} {axis}: {fd} vs {ad}");
        }
    }
}
