//! Aggregate reports for scene-graph and trajectory evaluation.

use std::collections::BTreeMap;

use serde::Serialize;

use super::metrics::{
    attribute_matches, average_recall_detail, object_accuracy_from, object_tiers, relation_matches,
    triplet_matches, AttributeMatch, EvalConfig, ObjectMatch, ObjectMode, RelationMatch, TrajectoryMatch,
    TripletMatch,
};
use super::tier::{Judge, MatchTier};
use crate::error::Result;
use crate::model::{SceneGraph, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneGraphMetrics {
    /// Accuracy under the configured object mode.
    pub object_accuracy: f64,
    pub object_accuracy_strict: f64,
    pub object_accuracy_lenient: f64,
    pub attribute_recall: f64,
    pub relation_recall: f64,
    pub triplet_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneGraphCounts {
    pub gt_objects: usize,
    pub gt_attributes: usize,
    pub gt_relations: usize,
    pub pred_objects: usize,
    pub pred_relations: usize,
    pub attributes_recalled: usize,
    pub relations_recalled: usize,
    pub triplets_recalled: usize,
    /// Object tier histogram in fidelity order.
    pub object_tiers: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub config: EvalConfig,
    pub metrics: SceneGraphMetrics,
    pub counts: SceneGraphCounts,
    pub objects: Vec<ObjectMatch>,
    pub attributes: Vec<AttributeMatch>,
    pub relations: Vec<RelationMatch>,
    pub triplets: Vec<TripletMatch>,
}

fn ratio(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Score a predicted scene graph against ground truth. Both graphs are
/// normalized first; object ids are assumed to refer to shared trajectories.
pub fn evaluate_scene_graph(pred: &SceneGraph, gt: &SceneGraph, judge: &dyn Judge, cfg: &EvalConfig) -> Result<MatchReport> {
    cfg.validate()?;
    let (pred, gt) = (pred.normalized(), gt.normalized());
    let label_map = |g: &SceneGraph| -> BTreeMap<i64, String> {
        g.objects.iter().map(|o| (i64::from(o.object_id), o.label.clone())).collect()
    };
    let attr_map = |g: &SceneGraph| -> BTreeMap<i64, Vec<String>> {
        g.objects.iter().map(|o| (i64::from(o.object_id), o.attributes.clone())).collect()
    };
    let (pred_labels, gt_labels) = (label_map(&pred), label_map(&gt));

    let objects = object_tiers(&pred_labels, &gt_labels, judge)?;
    let attributes = attribute_matches(&attr_map(&pred), &attr_map(&gt), judge)?;
    let relations = relation_matches(&pred.relations, &gt.relations, judge, cfg)?;
    let triplets = triplet_matches(&relations, &gt.relations, &pred_labels, &gt_labels, judge)?;
    let triplets_recalled = triplets.iter().filter(|t| t.recalled).count();

    let mut tier_hist: BTreeMap<String, usize> = BTreeMap::new();
    for t in MatchTier::ALL {
        tier_hist.insert(t.as_str().to_string(), objects.iter().filter(|o| o.tier == t).count());
    }
    let strict = object_accuracy_from(&objects, ObjectMode::Strict, cfg);
    let lenient = object_accuracy_from(&objects, ObjectMode::Lenient, cfg);
    Ok(MatchReport {
        config: *cfg,
        metrics: SceneGraphMetrics {
            object_accuracy: match cfg.object_mode {
                ObjectMode::Strict => strict,
                ObjectMode::Lenient => lenient,
            },
            object_accuracy_strict: strict,
            object_accuracy_lenient: lenient,
            attribute_recall: attributes.recall(),
            relation_recall: relations.recall(),
            triplet_recall: ratio(triplets_recalled, gt.relations.len()),
        },
        counts: SceneGraphCounts {
            gt_objects: gt.objects.len(),
            gt_attributes: attributes.total,
            gt_relations: gt.relations.len(),
            pred_objects: pred.objects.len(),
            pred_relations: pred.relations.len(),
            attributes_recalled: attributes.recalled,
            relations_recalled: relations.matches.len(),
            triplets_recalled,
            object_tiers: tier_hist,
        },
        objects,
        attributes: attributes.matches,
        relations: relations.matches,
        triplets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    pub mask_iou_thresh: f64,
    pub average_recall: f64,
    pub recalled: usize,
    pub gt_trajectories: usize,
    pub pred_trajectories: usize,
    pub matches: Vec<TrajectoryMatch>,
}

pub fn evaluate_trajectories(pred: &[Trajectory], gt: &[Trajectory], mask_iou_thresh: f64) -> Result<TrackingReport> {
    let out = average_recall_detail(pred, gt, mask_iou_thresh)?;
    Ok(TrackingReport {
        mask_iou_thresh,
        average_recall: out.recall(),
        recalled: out.recalled,
        gt_trajectories: out.total,
        pred_trajectories: pred.len(),
        matches: out.matches,
    })
}
