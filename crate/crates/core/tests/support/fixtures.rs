//! Hand-computed evaluation fixtures. Every expected value is worked out
//! by hand in the comment beside it.

use std::collections::BTreeMap;

use vsg_core::eval::{
    attribute_recall, cohens_kappa, hungarian_match, interval_iou, object_accuracy, relation_recall,
    spatiotemporal_iou, triplet_recall, average_recall, verify_labels, EvalConfig, LexiconJudge, ObjectMode,
    RELAXED_TEMPORAL_IOU,
};
use vsg_core::model::{BinaryMask, Relation, RelationCategory, Span, Trajectory, CAMERA_ID};

pub struct Fixture {
    pub name: &'static str,
    pub got: f64,
    pub expected: f64,
}

pub fn labels(pairs: &[(i64, &str)]) -> BTreeMap<i64, String> {
    pairs.iter().map(|&(i, l)| (i, l.to_string())).collect()
}

pub fn rel(s: i64, p: &str, o: i64, spans: &[Span]) -> Relation {
    Relation {
        subject_id: s,
        predicate: p.into(),
        object_id: o,
        spans: spans.to_vec(),
        category: RelationCategory::Spatial,
    }
}

fn traj(id: u32, frames: &[(usize, BinaryMask)]) -> Trajectory {
    Trajectory::new(id, frames.iter().cloned().collect()).unwrap()
}

fn cols(lo: usize, hi: usize) -> BinaryMask {
    BinaryMask::from_fn(4, 4, |x, _| x >= lo && x < hi).unwrap()
}

pub fn fixture_book() -> Vec<Fixture> {
    let j = LexiconJudge::builtin();
    let cfg = EvalConfig::default();
    let relaxed = EvalConfig {
        temporal_iou_thresh: RELAXED_TEMPORAL_IOU,
        ..cfg
    };
    let mut book = Vec::new();
    let mut add = |name, got, expected| book.push(Fixture { name, got, expected });

    // frames 5..=10 shared (6) of 0..=15 (16)
    add("interval_iou overlap [0,10] vs [5,15]", interval_iou(&[(0, 10)], &[(5, 15)]), 0.375);
    add("interval_iou identical", interval_iou(&[(3, 7)], &[(3, 7)]), 1.0);
    add("interval_iou disjoint", interval_iou(&[(0, 2)], &[(3, 9)]), 0.0);
    // {0,1,4,5} vs {1,2,3,4}: shared {1,4}, union 6
    add("interval_iou multi-span", interval_iou(&[(0, 1), (4, 5)], &[(1, 4)]), 2.0 / 6.0);

    let gt_obj = labels(&[(1, "person"), (2, "dog")]);
    let pred_obj = labels(&[(1, "human"), (2, "dog")]);
    add("objects exact strict", object_accuracy(&gt_obj, &gt_obj, ObjectMode::Strict, &j).unwrap(), 1.0);
    add("objects exact lenient", object_accuracy(&gt_obj, &gt_obj, ObjectMode::Lenient, &j).unwrap(), 1.0);
    add("objects one synonym strict", object_accuracy(&pred_obj, &gt_obj, ObjectMode::Strict, &j).unwrap(), 0.5);
    add("objects one synonym lenient", object_accuracy(&pred_obj, &gt_obj, ObjectMode::Lenient, &j).unwrap(), 1.0);
    // dog vs animal is a hypernym pair; chair vs dog is a mismatch
    let hyper = labels(&[(1, "animal"), (2, "chair")]);
    let gt_dogs = labels(&[(1, "dog"), (2, "dog")]);
    add("objects hypernym lenient", object_accuracy(&hyper, &gt_dogs, ObjectMode::Lenient, &j).unwrap(), 0.5);
    add("objects hypernym strict", object_accuracy(&hyper, &gt_dogs, ObjectMode::Strict, &j).unwrap(), 0.0);

    let gt_attr = BTreeMap::from([(1, vec!["red".to_string(), "round".to_string()])]);
    let pred_attr = BTreeMap::from([(1, vec!["crimson".to_string()])]);
    add("attributes identical", attribute_recall(&gt_attr, &gt_attr, &j).unwrap(), 1.0);
    add("attributes empty prediction", attribute_recall(&BTreeMap::new(), &gt_attr, &j).unwrap(), 0.0);
    add("attributes crimson for red", attribute_recall(&pred_attr, &gt_attr, &j).unwrap(), 0.5);

    let gt_rel = [rel(1, "holding", 2, &[(0, 9)])];
    add("relations identical", relation_recall(&gt_rel, &gt_rel, &j, &cfg).unwrap(), 1.0);
    // [0,5] vs [0,9]: 6 / 10 = 0.6 > 0.5 with a synonym predicate
    let syn = [rel(1, "grasping", 2, &[(0, 5)])];
    add("relation synonym at IoU 0.6", relation_recall(&syn, &gt_rel, &j, &cfg).unwrap(), 1.0);
    // [0,5] vs [2,7]: 4 / 8 = 0.5, not above 0.5
    let gt_b = [rel(1, "holding", 2, &[(0, 5)])];
    let boundary = [rel(1, "holding", 2, &[(2, 7)])];
    add("relation at IoU exactly 0.5 excluded", relation_recall(&boundary, &gt_b, &j, &cfg).unwrap(), 0.0);
    add("relation at IoU 0.5 with relaxed 0.1", relation_recall(&boundary, &gt_b, &j, &relaxed).unwrap(), 1.0);
    let swapped = [rel(2, "holding", 1, &[(0, 9)])];
    add("relation with swapped endpoints", relation_recall(&swapped, &gt_rel, &j, &cfg).unwrap(), 0.0);

    let gl = labels(&[(1, "person"), (2, "cup")]);
    let good = labels(&[(1, "human"), (2, "mug")]);
    let bad_subject = labels(&[(1, "chair"), (2, "cup")]);
    add("triplet exact labels", triplet_recall(&gt_rel, &gt_rel, &gl, &gl, &j, &cfg).unwrap(), 1.0);
    add("triplet synonym labels", triplet_recall(&gt_rel, &gt_rel, &good, &gl, &j, &cfg).unwrap(), 1.0);
    add("triplet subject mismatch", triplet_recall(&gt_rel, &gt_rel, &bad_subject, &gl, &j, &cfg).unwrap(), 0.0);
    let cam = [rel(CAMERA_ID, "looking at", 2, &[(0, 3)])];
    add("triplet camera subject", triplet_recall(&cam, &cam, &gl, &gl, &j, &cfg).unwrap(), 1.0);

    // frame 0: cols 0..2 vs 0..4 -> 8/16; frame 1 only in a -> 0/8; 8/24
    let a = traj(1, &[(0, cols(0, 2)), (1, cols(0, 2))]);
    let b = traj(2, &[(0, cols(0, 4))]);
    add("spatiotemporal half overlap", spatiotemporal_iou(&a, &b).unwrap(), 1.0 / 3.0);
    add("spatiotemporal identical", spatiotemporal_iou(&a, &a).unwrap(), 1.0);
    add("spatiotemporal disjoint in time", spatiotemporal_iou(&a, &traj(3, &[(2, cols(0, 2))])).unwrap(), 0.0);

    let gts = [traj(1, &[(0, cols(0, 1))]), traj(2, &[(0, cols(3, 4))])];
    add("AR half matched", average_recall(&gts[..1], &gts, 0.5).unwrap(), 0.5);
    add("AR perfect", average_recall(&gts, &gts, 0.5).unwrap(), 1.0);
    // cols 0..2 vs 0..4 gives 0.5, counted at the inclusive 0.5 threshold
    add("AR at IoU exactly 0.5 included", average_recall(&[traj(9, &[(0, cols(0, 2))])], &[traj(1, &[(0, cols(0, 4))])], 0.5).unwrap(), 1.0);

    // candidates matched at 0.5 and 0.25
    let cands = [traj(1, &[(0, cols(0, 2))]), traj(2, &[(0, cols(0, 4))])];
    let top_left = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2).unwrap();
    let top_right = BinaryMask::from_fn(4, 4, |x, y| x >= 2 && y < 2).unwrap();
    let verifier = [traj(10, &[(0, top_left)]), traj(11, &[(0, top_right)])];
    let kept = verify_labels(&cands, &verifier, 0.3).unwrap();
    add("verify keeps one of two", kept.len() as f64, 1.0);
    add("verify keeps first", f64::from(kept[0]), 1.0);

    add("hungarian anti-diagonal", hungarian_match(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap().total, 4.0);
    add("kappa identical", cohens_kappa(&["x", "y", "y"], &["x", "y", "y"]).unwrap(), 1.0);
    add("kappa chance", cohens_kappa(&["x", "x", "y", "y"], &["x", "y", "x", "y"]).unwrap(), 0.0);
    // p_o 3/4, p_e 1/2
    add("kappa partial", cohens_kappa(&["x", "x", "x", "y"], &["x", "x", "y", "y"]).unwrap(), 0.5);
    book
}
