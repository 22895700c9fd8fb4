use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use labelprop_core::io::{read_rgb, sha256_file, MANIFEST_FILE};
use labelprop_core::raster::GrayImage;
use labelprop_core::synth::SynthScene;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelprop")).args(args).output().expect("spawn labelprop")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "labelprop {}: {}", args.join(" "), stderr(&o));
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a synthetic video under `root/data` and returns its directory.
fn synth(root: &Path, extra: &[&str]) -> PathBuf {
    let data = root.join("data");
    let mut args = vec!["synth", "--out", s(&data)];
    args.extend_from_slice(extra);
    let out = ok(&args);
    let line = out.lines().find_map(|l| l.strip_prefix("video = ")).expect("video line");
    PathBuf::from(line)
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn num(report: &str, key: &str) -> f64 {
    value(report, key).parse().unwrap_or_else(|_| panic!("`{key}` is not a number in\n{report}"))
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["interpolate", "--max-hop", "many"]).status.code(), Some(1));
    let o = run(&["interpolate", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing required key `dataset`"), "{}", stderr(&o));
    assert_eq!(run(&["evaluate", "anticipation", "--pred", "a", "--gt", "b"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_dataset_exits_2_and_unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["interpolate", "--dataset", s(&tmp.path().join("absent")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let video = synth(tmp.path(), &[]);
    std::fs::remove_file(video.join("masks").join("000030.png")).unwrap();
    let o = run(&["interpolate", "--dataset", s(&video), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing mask for key frame 30"), "{}", stderr(&o));

    let video = synth(&tmp.path().join("fresh"), &[]);
    let plain = tmp.path().join("plain");
    std::fs::write(&plain, b"").unwrap();
    let o = run(&["interpolate", "--dataset", s(&video), "--out", s(&plain.join("o")), "--flow-source", "files"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn config_file_run_covers_every_frame() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "dataset = \"data\"\nout = \"labels\"\n\n[flow]\nsource = \"files\"\n").unwrap();
    let report = ok(&["interpolate", "--config", s(&cfg), "--jobs", "2"]);
    assert_eq!(value(&report, "coverage_pct"), "100.0000");
    assert_eq!(value(&report, "synth_translate.uncovered_frames"), "[]");
    let labels = tmp.path().join("labels");
    for f in [MANIFEST_FILE, "report.json", "report.txt"] {
        assert!(labels.join(f).is_file(), "{f}");
    }
    let side = std::fs::read_to_string(labels.join("synth_translate/labels/000012.json")).unwrap();
    let side: serde_json::Value = serde_json::from_str(&side).unwrap();
    assert_eq!(side["loss_weight"], 0.03);
    assert_eq!(side["hop_distance"], 12);
}

#[test]
fn short_hop_limit_leaves_frames_uncovered() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &[]);
    let out = tmp.path().join("o");
    let report = ok(&["interpolate", "--dataset", s(&video), "--out", s(&out), "--flow-source", "files", "--max-hop", "5"]);
    let expected: Vec<String> = (6..=24).map(|f| f.to_string()).collect();
    assert_eq!(value(&report, "synth_translate.uncovered_frames"), format!("[{}]", expected.join(", ")));
    let side = std::fs::read_to_string(out.join("synth_translate/labels/000015.json")).unwrap();
    assert!(side.contains("\"covered\": false"), "{side}");
}

#[test]
fn pseudo_weight_flag_reaches_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &["--scene", "static"]);
    let out = tmp.path().join("o");
    ok(&["interpolate", "--dataset", s(&video), "--out", s(&out), "--flow-source", "files", "--pseudo-weight", "0.25"]);
    let read = |f: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(out.join("synth_static/labels").join(f)).unwrap()).unwrap()
    };
    assert_eq!(read("000003.json")["loss_weight"], 0.25);
    assert_eq!(read("000030.json")["loss_weight"], 1.0);
}

#[test]
fn evaluate_seg_on_identical_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &[]);
    let gt = video.join("gt_masks");
    let out = tmp.path().join("report");
    let report = ok(&["evaluate", "seg", "--pred", s(&gt), "--gt", s(&gt), "--out", s(&out)]);
    assert_eq!(num(&report, "miou"), 1.0);
    assert_eq!(num(&report, "mciou"), 1.0);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["images"], 31);
    assert_eq!(json["miou"], 1.0);
}

#[test]
fn evaluate_seg_rejects_mismatched_frame_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &[]);
    let o = run(&["evaluate", "seg", "--pred", s(&video.join("masks")), "--gt", s(&video.join("gt_masks"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("only in ground truth"), "{}", stderr(&o));
}

#[test]
fn evaluate_det_single_match() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.json");
    let pred = tmp.path().join("pred.json");
    std::fs::write(&gt, r#"[{"frame": 0, "bbox": [0, 0, 10, 10], "class_id": 1}]"#).unwrap();
    // IoU 0.6 with the ground truth
    std::fs::write(&pred, r#"[{"frame": 0, "bbox": [0, 0, 10, 6], "class_id": 1, "score": 0.9}]"#).unwrap();
    let report = ok(&["evaluate", "det", "--pred", s(&pred), "--gt", s(&gt)]);
    assert_eq!(num(&report, "map"), 1.0);
    assert_eq!(num(&report, "iou_thresh"), 0.5);
    let strict = ok(&["evaluate", "det", "--pred", s(&pred), "--gt", s(&gt), "--iou", "0.7"]);
    assert_eq!(num(&strict, "map"), 0.0);
}

#[test]
fn evaluate_cls_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.csv");
    let gt = tmp.path().join("gt.csv");
    std::fs::write(&pred, "frame,c0,c1\n0,0.9,0.1\n1,0.4,0.6\n2,0.2,0.8\n3,0.3,0.7\n").unwrap();
    std::fs::write(&gt, "frame,label\n0,0\n1,0\n2,1\n3,1\n").unwrap();
    let report = ok(&["evaluate", "cls", "--pred", s(&pred), "--gt", s(&gt)]);
    assert_eq!(num(&report, "accuracy"), 0.75);
    assert!((num(&report, "macro_f1") - 11.0 / 15.0).abs() < 1e-9);
}

#[test]
fn evaluate_anticipation_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.csv");
    let gt = tmp.path().join("gt.csv");
    std::fs::write(&pred, "frame,remaining\n0,25\n1,18\n2,12\n3,0\n").unwrap();
    std::fs::write(&gt, "frame,remaining\n0,30\n1,20\n2,10\n3,0\n").unwrap();
    let report = ok(&["evaluate", "anticipation", "--pred", s(&pred), "--gt", s(&gt), "--horizon", "25"]);
    assert_eq!(num(&report, "mae_in"), 2.0);
    assert_eq!(value(&report, "mae_e"), "undefined");
}

fn write_gray(path: &Path, f: impl Fn(u32, u32) -> f64) {
    image::GrayImage::from_fn(48, 40, |x, y| image::Luma([f(x, y).round() as u8])).save(path).unwrap();
}

fn texture(x: f64, y: f64) -> f64 {
    128.0 + 50.0 * (0.35 * x + 0.2 * y).sin() + 40.0 * (0.27 * y - 0.13 * x + 1.0).cos()
}

#[test]
fn flow_estimate_and_check() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.png"), tmp.path().join("b.png"));
    write_gray(&a, |x, y| texture(x as f64, y as f64));
    write_gray(&b, |x, y| texture(x as f64 - 3.0, y as f64));
    let (fwd, bwd, zero) = (tmp.path().join("f.flo"), tmp.path().join("b.flo"), tmp.path().join("z.flo"));
    ok(&["flow", "estimate", s(&a), s(&b), "--out", s(&fwd)]);
    ok(&["flow", "estimate", s(&b), s(&a), "--out", s(&bwd)]);
    ok(&["flow", "estimate", s(&a), s(&a), "--out", s(&zero)]);

    let dir = labelprop_core::flow::FlowDirection::new(0, 1);
    let f = labelprop_core::flow::load_flow(&fwd, dir).unwrap();
    let mut xs: Vec<f32> = Vec::new();
    let mut ys: Vec<f32> = Vec::new();
    for v in 6..34 {
        for u in 6..42 {
            let (x, y) = f.get(u, v);
            xs.push(x);
            ys.push(y);
        }
    }
    xs.sort_by(f32::total_cmp);
    ys.sort_by(f32::total_cmp);
    assert_eq!((xs[xs.len() / 2].round(), ys[ys.len() / 2].round()), (3.0, 0.0));
    assert!(labelprop_core::flow::load_flow(&zero, dir).unwrap().is_zero());

    let report = ok(&["flow", "check", s(&fwd), s(&bwd)]);
    let valid: f64 = value(&report, "valid_fraction").parse().unwrap();
    assert!(valid > 0.8, "{report}");
}

#[test]
fn overlay_panels_compose_frame_labels_and_blend() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &[]);
    let out = tmp.path().join("panels");
    let msg = ok(&["overlay", "--frames", s(&video.join("frames")), "--masks", s(&video.join("gt_masks")), "--out", s(&out)]);
    assert_eq!(value(&msg, "panels"), "31");

    let scene = SynthScene::translating(7);
    let panel = read_rgb(&out.join("000017.png")).unwrap();
    let frame = read_rgb(&video.join("frames/000017.png")).unwrap();
    let mask = scene.mask(17);
    assert_eq!(panel.dimensions(), (64 * 3, 64));
    let mut colour_of: BTreeMap<u8, [u8; 3]> = BTreeMap::new();
    for y in 0..64u32 {
        for x in 0..64u32 {
            let rgb = frame.get_pixel(x, y).0;
            let label = panel.get_pixel(x + 64, y).0;
            let blend = panel.get_pixel(x + 128, y).0;
            assert_eq!(panel.get_pixel(x, y).0, rgb);
            let id = mask.get(x as usize, y as usize);
            assert_eq!(*colour_of.entry(id).or_insert(label), label, "label {id} has two colours");
            for c in 0..3 {
                assert_eq!(blend[c], ((rgb[c] as u16 + label[c] as u16 + 1) / 2) as u8);
            }
        }
    }
    assert_eq!(colour_of[&0], [0, 0, 0]);
    assert_eq!(colour_of.len(), 3);
    let distinct: std::collections::BTreeSet<_> = colour_of.values().collect();
    assert_eq!(distinct.len(), 3);

    // regression pin for the encoded panel
    let (digest, _) = sha256_file(&out.join("000017.png")).unwrap();
    assert_eq!(digest, "5c5a770773c37a3e3fc02c1f5cd5427fb4879ae7e81ac4a8144d8295eb3e803d");
}

#[test]
fn overlay_of_all_void_masks_shows_frames_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let (frames, masks, out) = (tmp.path().join("f"), tmp.path().join("m"), tmp.path().join("o"));
    std::fs::create_dir_all(&frames).unwrap();
    std::fs::create_dir_all(&masks).unwrap();
    write_gray(&frames.join("000000.png"), |x, y| texture(x as f64, y as f64));
    image::GrayImage::from_pixel(48, 40, image::Luma([255])).save(masks.join("000000.png")).unwrap();
    ok(&["overlay", "--frames", s(&frames), "--masks", s(&masks), "--out", s(&out)]);
    let panel = read_rgb(&out.join("000000.png")).unwrap();
    let gray = GrayImage::<f64>::from_luma8(&image::open(frames.join("000000.png")).unwrap().to_luma8());
    for y in 0..40u32 {
        for x in 0..48u32 {
            let v = gray.get(x as usize, y as usize) as u8;
            assert_eq!(panel.get_pixel(x + 96, y).0, [v, v, v]);
        }
    }
}

#[test]
fn interpolation_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let video = synth(tmp.path(), &["--scene", "crossing", "--prob-peak", "0.95"]);
    let mut manifests = Vec::new();
    for jobs in ["1", "3", "8"] {
        let out = tmp.path().join(format!("o{jobs}"));
        ok(&["interpolate", "--dataset", s(&video), "--out", s(&out), "--flow-source", "files", "--jobs", jobs]);
        manifests.push(std::fs::read(out.join(MANIFEST_FILE)).unwrap());
    }
    assert!(manifests.windows(2).all(|w| w[0] == w[1]));
}
