use std::collections::BTreeMap;

use labelprop_core::flow::{forward_backward_confidence, ConsistencyParams};
use labelprop_core::model::{ConfidenceMap, VOID_ID};
use labelprop_core::synth::{ShapeGeom, SynthScene, SynthShape};
use labelprop_core::warp::{propagate_labels, warp_mask, FlowChain, PropagationConfig};

fn disk_scene(velocity: (f64, f64)) -> SynthScene {
    let shapes = vec![SynthShape {
        geom: ShapeGeom::Disk { radius: 10.0 },
        class_id: 1,
        center: (24.0, 40.0),
        velocity,
        angular_velocity: 0.0,
    }];
    SynthScene::new("disk", 64, 64, 3, 2, 5, shapes).unwrap()
}

#[test]
fn analytic_flow_warps_translated_disk_exactly() {
    let s = disk_scene((4.0, -3.0));
    for t in 1..3 {
        let f = s.flow::<f64>(t, 0);
        let (out, _) = warp_mask(&s.mask(0), 0, &f, &ConfidenceMap::ones(64, 64)).unwrap();
        let gt = s.mask(t);
        let vis = s.visibility(t, 0);
        for i in 0..vis.len() {
            if vis[i] {
                assert_eq!(out.data()[i], gt.data()[i], "frame {t} pixel {i}");
            }
        }
    }
}

#[test]
fn consistency_gate_voids_exactly_the_disoccluded_pixels() {
    let s = disk_scene((4.0, -3.0));
    let t = s.timeline();
    let masks: BTreeMap<u32, _> = t.key_frames.iter().map(|&k| (k, s.mask(k))).collect();
    let cfg = PropagationConfig { brightness_tol: None, ..Default::default() };
    let out = propagate_labels(&t, &masks, &|a, b| Ok(s.flow::<f64>(a, b)), &cfg, Some(1)).unwrap();
    let p = &out[&1];
    let gt = s.mask(1);
    let vis = s.visibility(1, 0);
    for i in 0..vis.len() {
        let expect = if vis[i] { gt.data()[i] } else { VOID_ID };
        assert_eq!(p.mask.data()[i], expect, "pixel {i}");
    }
}

#[test]
fn analytic_translation_is_fb_consistent_in_bounds() {
    let s = disk_scene((4.0, -3.0));
    let fwd = s.flow::<f64>(0, 1);
    let bwd = s.flow::<f64>(1, 0);
    let c = forward_backward_confidence(&fwd, &bwd, &ConsistencyParams::default()).unwrap();
    let vis = s.visibility(0, 1);
    for i in 0..vis.len() {
        if vis[i] && c.in_bounds[i] {
            assert!(c.valid[i], "pixel {i}");
        }
    }
}

#[test]
fn static_scene_propagation_reproduces_key_mask() {
    let s = SynthScene::static_scene(4);
    let t = s.timeline();
    let masks: BTreeMap<u32, _> = t.key_frames.iter().map(|&k| (k, s.mask(k))).collect();
    for chain in [FlowChain::Direct, FlowChain::Composed, FlowChain::Hopwise] {
        let cfg = PropagationConfig { chain, ..Default::default() };
        let out = propagate_labels(&t, &masks, &|a, b| Ok(s.flow::<f32>(a, b)), &cfg, Some(1)).unwrap();
        for (f, p) in &out {
            assert!(s.flow::<f32>(*f, 0).is_zero());
            assert_eq!(p.mask, s.mask(0), "{chain:?} frame {f}");
        }
    }
}

#[test]
fn occluded_pixels_lose_confidence_when_shapes_cross() {
    let s = SynthScene::crossing(2);
    let t = s.timeline();
    let masks: BTreeMap<u32, _> = t.key_frames.iter().map(|&k| (k, s.mask(k))).collect();
    let out = propagate_labels(&t, &masks, &|a, b| Ok(s.flow::<f64>(a, b)), &PropagationConfig::default(), Some(1)).unwrap();
    let mut checked = 0;
    for (f, p) in &out {
        if p.hop == 0 {
            continue;
        }
        let vis = s.visibility(*f, p.source_key);
        for (i, &v) in vis.iter().enumerate() {
            if !v {
                assert!(p.confidence.data()[i] < 1.0, "frame {f} pixel {i}");
                checked += 1;
            }
        }
        // visible pixels are never given a wrong label
        let gt = s.mask(*f);
        for (i, (&l, &g)) in p.mask.data().iter().zip(gt.data()).enumerate() {
            assert!(l == VOID_ID || l == g, "frame {f} pixel {i}: {l} vs {g}");
        }
    }
    assert!(checked > 0);
}
