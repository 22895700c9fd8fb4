use labelprop_core::flow::{read_flo, write_flo, FlowDirection, FlowField, FLO_MAGIC};
use labelprop_core::fuse::{read_prob, write_prob, ProbMap};
use labelprop_core::io::{
    read_confidence, read_mask_png, read_pseudo_labels, write_confidence, write_mask_png, write_pseudo_labels,
    PseudoLabelSet,
};
use labelprop_core::model::{ConfidenceMap, LabelMask, MaskKind, PseudoLabel};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..12, 1usize..12)
}

fn field() -> impl Strategy<Value = FlowField<f32>> {
    dims().prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec(proptest::num::f32::NORMAL | proptest::num::f32::ZERO, w * h),
            proptest::collection::vec(proptest::num::f32::NORMAL | proptest::num::f32::ZERO, w * h),
        )
            .prop_map(move |(fx, fy)| FlowField::new(w, h, fx, fy, FlowDirection::new(2, 9)).unwrap())
    })
}

fn mask() -> impl Strategy<Value = LabelMask> {
    dims().prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h).prop_map(move |d| LabelMask::semantic(w, h, d).unwrap())
    })
}

fn confidence() -> impl Strategy<Value = ConfidenceMap<f32>> {
    dims().prop_flat_map(|(w, h)| {
        proptest::collection::vec(0.0f32..=1.0, w * h).prop_map(move |d| ConfidenceMap::new(w, h, d).unwrap())
    })
}

fn prob_map() -> impl Strategy<Value = ProbMap<f32>> {
    (dims(), 1usize..5).prop_flat_map(|((w, h), c)| {
        proptest::collection::vec(proptest::collection::vec(0.01f32..1.0, c), w * h).prop_map(move |rows| {
            let n = w * h;
            let mut planes = vec![0.0f32; c * n];
            for (i, row) in rows.iter().enumerate() {
                let s: f32 = row.iter().sum();
                for (k, v) in row.iter().enumerate() {
                    planes[k * n + i] = v / s;
                }
            }
            ProbMap::new(w, h, c, planes).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn flo_round_trip_is_bit_exact(f in field()) {
        let mut buf = Vec::new();
        write_flo(&mut buf, &f).unwrap();
        prop_assert_eq!(&buf[..4], &FLO_MAGIC.to_le_bytes());
        let back = read_flo(buf.as_slice(), f.direction()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn mask_png_round_trip(m in mask()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        write_mask_png(&m, &p).unwrap();
        prop_assert_eq!(read_mask_png(&p, &MaskKind::Semantic).unwrap(), m);
    }

    #[test]
    fn prob_map_round_trip(p in prob_map()) {
        let mut buf = Vec::new();
        write_prob(&p, &mut buf).unwrap();
        prop_assert_eq!(read_prob(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn confidence_round_trip(c in confidence()) {
        let mut buf = Vec::new();
        write_confidence(&c, &mut buf).unwrap();
        prop_assert_eq!(read_confidence(buf.as_slice()).unwrap(), c);
    }
}

fn labels(n: u32) -> Vec<PseudoLabel<f32>> {
    (0..n)
        .map(|f| {
            let data: Vec<u8> = (0..20u32).map(|i| ((i * 7 + f) % 4) as u8).collect();
            let conf: Vec<f32> = (0..20u32).map(|i| ((i + f) % 9) as f32 / 8.0).collect();
            PseudoLabel {
                frame: f,
                mask: LabelMask::semantic(5, 4, data).unwrap(),
                confidence: ConfidenceMap::new(5, 4, conf).unwrap(),
                loss_weight: if f == 0 { 1.0 } else { 0.03 },
                source_key_frame: 0,
                hop_distance: f,
                covered: true,
            }
        })
        .collect()
}

#[test]
fn pseudo_label_sets_round_trip_and_manifest_is_stable() {
    let sets = vec![
        PseudoLabelSet { video_id: "a".into(), labels: labels(4), params: serde_json::json!({"k": 1}) },
        PseudoLabelSet { video_id: "b".into(), labels: labels(2), params: serde_json::json!({"k": 1}) },
    ];
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = write_pseudo_labels(d1.path(), &sets).unwrap();
    let m2 = write_pseudo_labels(d2.path(), &sets).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(
        std::fs::read(d1.path().join("manifest.json")).unwrap(),
        std::fs::read(d2.path().join("manifest.json")).unwrap()
    );
    assert_eq!(read_pseudo_labels(d1.path()).unwrap(), sets);
}

#[test]
fn instance_masks_keep_their_class_table() {
    let kind = MaskKind::Instance { class_of_instance: [(1u8, 3u8), (2, 3), (4, 1)].into_iter().collect() };
    let m = LabelMask::new(3, 1, vec![1, 2, 4], kind).unwrap();
    let l = PseudoLabel {
        frame: 7,
        mask: m,
        confidence: ConfidenceMap::ones(3, 1),
        loss_weight: 0.03f32,
        source_key_frame: 0,
        hop_distance: 7,
        covered: true,
    };
    let sets = vec![PseudoLabelSet { video_id: "v".into(), labels: vec![l], params: serde_json::Value::Null }];
    let d = tempfile::tempdir().unwrap();
    write_pseudo_labels(d.path(), &sets).unwrap();
    assert_eq!(read_pseudo_labels(d.path()).unwrap(), sets);
}
