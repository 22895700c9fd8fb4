use labelprop_core::flow::{compose_flows, estimate_flow, FlowDirection, FlowField, FlowMethod, FlowParams};
use labelprop_core::raster::GrayImage;

/// Smooth band-limited texture on the 0–255 scale, defined at any real position.
fn texture(x: f64, y: f64) -> f64 {
    128.0
        + 40.0 * (0.31 * x + 0.17 * y).sin()
        + 30.0 * (0.23 * y - 0.11 * x + 1.0).cos()
        + 20.0 * (0.41 * x + 0.37 * y + 2.0).sin()
}

fn shifted_pair(dx: f64, dy: f64) -> (GrayImage<f64>, GrayImage<f64>) {
    let a = GrayImage::from_fn(64, 64, |u, v| texture(u as f64, v as f64));
    let b = GrayImage::from_fn(64, 64, |u, v| texture(u as f64 - dx, v as f64 - dy));
    (a, b)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn interior(field: &FlowField<f64>, margin: usize) -> Vec<(f64, f64)> {
    let (w, h) = field.dims();
    let mut out = Vec::new();
    for v in margin..h - margin {
        for u in margin..w - margin {
            out.push(field.get(u, v));
        }
    }
    out
}

#[test]
fn horn_schunck_recovers_three_pixel_shift() {
    let (a, b) = shifted_pair(3.0, 0.0);
    let est = estimate_flow(&a, &b, FlowDirection::new(0, 1), &FlowParams::default()).unwrap();
    let pts = interior(&est.field, 8);
    let epe: f64 = pts.iter().map(|&(x, y)| ((x - 3.0).powi(2) + y.powi(2)).sqrt()).sum::<f64>() / pts.len() as f64;
    assert!(epe < 0.5, "interior EPE {epe}");
    let mx = median(pts.iter().map(|p| p.0).collect());
    let my = median(pts.iter().map(|p| p.1).collect());
    assert_eq!((mx.round(), my.round()), (3.0, 0.0), "median ({mx}, {my})");
}

#[test]
fn lucas_kanade_recovers_diagonal_shift() {
    let (a, b) = shifted_pair(2.0, -1.0);
    let params = FlowParams { method: FlowMethod::PyramidalLk, ..FlowParams::default() };
    let est = estimate_flow(&a, &b, FlowDirection::new(0, 1), &params).unwrap();
    let pts = interior(&est.field, 10);
    let epe: f64 =
        pts.iter().map(|&(x, y)| ((x - 2.0).powi(2) + (y + 1.0).powi(2)).sqrt()).sum::<f64>() / pts.len() as f64;
    assert!(epe < 0.5, "interior EPE {epe}");
}

#[test]
fn energy_traces_never_increase() {
    let (a, b) = shifted_pair(1.5, 0.5);
    let est = estimate_flow(&a, &b, FlowDirection::new(0, 1), &FlowParams { iterations: 40, ..Default::default() }).unwrap();
    assert!(!est.energy_trace.is_empty());
    for trace in &est.energy_trace {
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "energy rose {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn identical_images_give_exact_zero_field() {
    let (a, _) = shifted_pair(0.0, 0.0);
    for method in [FlowMethod::HornSchunck, FlowMethod::PyramidalLk] {
        let est = estimate_flow(&a, &a, FlowDirection::new(0, 1), &FlowParams { method, ..Default::default() }).unwrap();
        assert!(est.field.is_zero(), "{method:?}");
    }
}

#[test]
fn flat_images_are_under_constrained() {
    let a = GrayImage::from_fn(16, 16, |_, _| 90.0f32);
    let est = estimate_flow(&a, &a, FlowDirection::new(0, 1), &FlowParams::default()).unwrap();
    assert!(est.under_constrained);
    assert!(est.field.is_zero());
}

fn rotation(deg: f64, dir: FlowDirection) -> FlowField<f64> {
    let (c, s) = (deg.to_radians().cos(), deg.to_radians().sin());
    let (cx, cy) = (31.5, 31.5);
    FlowField::from_fn(64, 64, dir, |u, v| {
        let (x, y) = (u as f64 - cx, v as f64 - cy);
        (c * x - s * y - x, s * x + c * y - y)
    })
}

#[test]
fn composing_two_rotations_gives_the_sum() {
    let ab = rotation(5.0, FlowDirection::new(0, 1));
    let bc = rotation(5.0, FlowDirection::new(1, 2));
    let ac = compose_flows(&ab, &bc).unwrap();
    assert_eq!(ac.field.direction(), FlowDirection::new(0, 2));
    let expect = rotation(10.0, FlowDirection::new(0, 2));
    // interior only: near the corners the intermediate point leaves the canvas
    let mut worst = 0.0f64;
    for v in 12..52 {
        for u in 12..52 {
            let (x, y) = ac.field.get(u, v);
            let (ex, ey) = expect.get(u, v);
            worst = worst.max(((x - ex).powi(2) + (y - ey).powi(2)).sqrt());
        }
    }
    assert!(worst < 0.1, "worst EPE {worst}");
}
