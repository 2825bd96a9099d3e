//! Object, attribute, relation and triplet metrics, temporal and
//! spatiotemporal IoU, label verification and average recall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian_match;
use super::tier::{match_tier, Judge, MatchKind, MatchTier};
use crate::error::{Error, Result};
use crate::mask_ops::{area, intersection_area};
use crate::model::{merge_spans, ObjectId, Relation, Span, Trajectory, CAMERA_ID};

pub const DEFAULT_TEMPORAL_IOU: f64 = 0.5;
pub const RELAXED_TEMPORAL_IOU: f64 = 0.1;
pub const DEFAULT_MASK_IOU: f64 = 0.5;
pub const DEFAULT_VERIFY_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub temporal_iou_thresh: f64,
    pub object_mode: ObjectMode,
    pub mask_iou_thresh: f64,
    /// Count `Synonym` as a strict object match as well as `Identical`.
    pub strict_includes_synonym: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            temporal_iou_thresh: DEFAULT_TEMPORAL_IOU,
            object_mode: ObjectMode::Strict,
            mask_iou_thresh: DEFAULT_MASK_IOU,
            strict_includes_synonym: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("temporal_iou_thresh", self.temporal_iou_thresh),
            ("mask_iou_thresh", self.mask_iou_thresh),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn counts(&self, tier: MatchTier, mode: ObjectMode) -> bool {
        match mode {
            ObjectMode::Lenient => tier.is_lenient_match(),
            ObjectMode::Strict => {
                tier == MatchTier::Identical || (self.strict_includes_synonym && tier == MatchTier::Synonym)
            }
        }
    }
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectMatch {
    pub object_id: i64,
    pub predicted: Option<String>,
    pub ground_truth: String,
    pub tier: MatchTier,
}

/// Tier of each ground-truth object's predicted label, in ascending id. A
/// missing prediction is a `Mismatch`.
pub fn object_tiers(
    pred: &BTreeMap<i64, String>,
    gt: &BTreeMap<i64, String>,
    judge: &dyn Judge,
) -> Result<Vec<ObjectMatch>> {
    gt.iter()
        .map(|(&id, gt_label)| {
            let predicted = pred.get(&id).cloned();
            let tier = match &predicted {
                Some(p) => match_tier(p, gt_label, MatchKind::Object, judge)?,
                None => MatchTier::Mismatch,
            };
            Ok(ObjectMatch {
                object_id: id,
                predicted,
                ground_truth: gt_label.clone(),
                tier,
            })
        })
        .collect()
}

pub fn object_accuracy_from(tiers: &[ObjectMatch], mode: ObjectMode, cfg: &EvalConfig) -> f64 {
    fraction(tiers.iter().filter(|m| cfg.counts(m.tier, mode)).count(), tiers.len())
}

pub fn object_accuracy(
    pred: &BTreeMap<i64, String>,
    gt: &BTreeMap<i64, String>,
    mode: ObjectMode,
    judge: &dyn Judge,
) -> Result<f64> {
    let cfg = EvalConfig::default();
    Ok(object_accuracy_from(&object_tiers(pred, gt, judge)?, mode, &cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeMatch {
    pub object_id: i64,
    pub ground_truth: String,
    pub predicted: Option<String>,
    pub tier: MatchTier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeOutcome {
    pub matches: Vec<AttributeMatch>,
    pub recalled: usize,
    pub total: usize,
}

impl AttributeOutcome {
    pub fn recall(&self) -> f64 {
        fraction(self.recalled, self.total)
    }
}

/// Per object, each predicted attribute satisfies at most one ground-truth
/// attribute; pairs are taken greedily by tier, then gt order, then
/// prediction order.
pub fn attribute_matches(
    pred: &BTreeMap<i64, Vec<String>>,
    gt: &BTreeMap<i64, Vec<String>>,
    judge: &dyn Judge,
) -> Result<AttributeOutcome> {
    let mut matches = Vec::new();
    let mut recalled = 0;
    let mut total = 0;
    let none = Vec::new();
    for (&id, gt_attrs) in gt {
        let pred_attrs = pred.get(&id).unwrap_or(&none);
        let mut candidates = Vec::new();
        for (gi, g) in gt_attrs.iter().enumerate() {
            for (pi, p) in pred_attrs.iter().enumerate() {
                let tier = match_tier(p, g, MatchKind::Attribute, judge)?;
                if tier.is_lenient_match() {
                    candidates.push((tier, gi, pi));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut gt_hit: Vec<Option<(usize, MatchTier)>> = vec![None; gt_attrs.len()];
        let mut pred_used = vec![false; pred_attrs.len()];
        for (tier, gi, pi) in candidates {
            if gt_hit[gi].is_none() && !pred_used[pi] {
                gt_hit[gi] = Some((pi, tier));
                pred_used[pi] = true;
            }
        }
        for (gi, hit) in gt_hit.into_iter().enumerate() {
            total += 1;
            if hit.is_some() {
                recalled += 1;
            }
            matches.push(AttributeMatch {
                object_id: id,
                ground_truth: gt_attrs[gi].clone(),
                predicted: hit.map(|(pi, _)| pred_attrs[pi].clone()),
                tier: hit.map_or(MatchTier::Mismatch, |(_, t)| t),
            });
        }
    }
    Ok(AttributeOutcome {
        matches,
        recalled,
        total,
    })
}

pub fn attribute_recall(
    pred: &BTreeMap<i64, Vec<String>>,
    gt: &BTreeMap<i64, Vec<String>>,
    judge: &dyn Judge,
) -> Result<f64> {
    attribute_matches(pred, gt, judge).map(|o| o.recall())
}

fn frames_in(spans: &[Span]) -> u64 {
    spans.iter().map(|&(s, e)| u64::from(e - s) + 1).sum()
}

/// IoU of the inclusive frame sets covered by two span lists; 0 if both
/// are empty.
pub fn interval_iou(a: &[Span], b: &[Span]) -> f64 {
    let (a, b) = (merge_spans(a), merge_spans(b));
    let (mut i, mut j, mut inter) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo <= hi {
            inter += u64::from(hi - lo) + 1;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = frames_in(&a) + frames_in(&b) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationMatch {
    pub gt_index: usize,
    pub pred_index: usize,
    pub temporal_iou: f64,
    pub tier: MatchTier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationOutcome {
    /// Sorted by ground-truth index.
    pub matches: Vec<RelationMatch>,
    pub total: usize,
}

impl RelationOutcome {
    pub fn recall(&self) -> f64 {
        fraction(self.matches.len(), self.total)
    }
}

/// One-to-one matching of predicted to ground-truth relations. A pair is
/// eligible with equal endpoints, a lenient predicate match, and temporal
/// IoU strictly above the threshold; pairs are taken greedily by
/// descending IoU.
pub fn relation_matches(
    pred: &[Relation],
    gt: &[Relation],
    judge: &dyn Judge,
    cfg: &EvalConfig,
) -> Result<RelationOutcome> {
    let mut candidates = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            if p.subject_id != g.subject_id || p.object_id != g.object_id {
                continue;
            }
            let t_iou = interval_iou(&p.spans, &g.spans);
            if t_iou <= cfg.temporal_iou_thresh {
                continue;
            }
            let tier = match_tier(&p.predicate, &g.predicate, MatchKind::Relation, judge)?;
            if tier.is_lenient_match() {
                candidates.push(RelationMatch {
                    gt_index: gi,
                    pred_index: pi,
                    temporal_iou: t_iou,
                    tier,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.temporal_iou
            .total_cmp(&a.temporal_iou)
            .then(b.tier.cmp(&a.tier))
            .then(a.gt_index.cmp(&b.gt_index))
            .then(a.pred_index.cmp(&b.pred_index))
    });
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut matches = Vec::new();
    for c in candidates {
        if !gt_used[c.gt_index] && !pred_used[c.pred_index] {
            gt_used[c.gt_index] = true;
            pred_used[c.pred_index] = true;
            matches.push(c);
        }
    }
    matches.sort_by_key(|m| m.gt_index);
    Ok(RelationOutcome {
        matches,
        total: gt.len(),
    })
}

pub fn relation_recall(pred: &[Relation], gt: &[Relation], judge: &dyn Judge, cfg: &EvalConfig) -> Result<f64> {
    relation_matches(pred, gt, judge, cfg).map(|o| o.recall())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletMatch {
    pub gt_index: usize,
    pub subject_tier: MatchTier,
    pub object_tier: MatchTier,
    pub recalled: bool,
}

fn endpoint_tier(
    id: i64,
    pred_labels: &BTreeMap<i64, String>,
    gt_labels: &BTreeMap<i64, String>,
    judge: &dyn Judge,
) -> Result<MatchTier> {
    if id == CAMERA_ID {
        return Ok(MatchTier::Identical);
    }
    match (pred_labels.get(&id), gt_labels.get(&id)) {
        (Some(p), Some(g)) => match_tier(p, g, MatchKind::Object, judge),
        _ => Ok(MatchTier::Mismatch),
    }
}

/// Relation matches whose subject and object labels also match leniently.
pub fn triplet_matches(
    relations: &RelationOutcome,
    gt: &[Relation],
    pred_labels: &BTreeMap<i64, String>,
    gt_labels: &BTreeMap<i64, String>,
    judge: &dyn Judge,
) -> Result<Vec<TripletMatch>> {
    relations
        .matches
        .iter()
        .map(|m| {
            let g = &gt[m.gt_index];
            let subject_tier = endpoint_tier(g.subject_id, pred_labels, gt_labels, judge)?;
            let object_tier = endpoint_tier(g.object_id, pred_labels, gt_labels, judge)?;
            Ok(TripletMatch {
                gt_index: m.gt_index,
                subject_tier,
                object_tier,
                recalled: subject_tier.is_lenient_match() && object_tier.is_lenient_match(),
            })
        })
        .collect()
}

pub fn triplet_recall(
    pred: &[Relation],
    gt: &[Relation],
    pred_labels: &BTreeMap<i64, String>,
    gt_labels: &BTreeMap<i64, String>,
    judge: &dyn Judge,
    cfg: &EvalConfig,
) -> Result<f64> {
    let rel = relation_matches(pred, gt, judge, cfg)?;
    let trip = triplet_matches(&rel, gt, pred_labels, gt_labels, judge)?;
    Ok(fraction(trip.iter().filter(|t| t.recalled).count(), gt.len()))
}

/// Summed per-frame intersections over summed per-frame unions; frames
/// where a trajectory is absent count as empty. 0 when both are empty.
pub fn spatiotemporal_iou(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let (mut inter, mut union) = (0usize, 0usize);
    for (frame, ma) in &a.masks {
        match b.masks.get(frame) {
            Some(mb) => {
                let i = intersection_area(ma, mb)?;
                inter += i;
                union += area(ma) + area(mb) - i;
            }
            None => union += area(ma),
        }
    }
    union += b
        .masks
        .iter()
        .filter(|(f, _)| !a.masks.contains_key(f))
        .map(|(_, m)| area(m))
        .sum::<usize>();
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

fn siou_matrix(rows: &[Trajectory], cols: &[Trajectory]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| cols.iter().map(|c| spatiotemporal_iou(r, c)).collect())
        .collect()
}

/// Candidates kept because a Hungarian-matched verifier trajectory reaches
/// `iou_floor`. Masks are never modified; returns ids in input order.
pub fn verify_labels(candidates: &[Trajectory], verifier: &[Trajectory], iou_floor: f64) -> Result<Vec<ObjectId>> {
    let scores = siou_matrix(candidates, verifier)?;
    let assignment = hungarian_match(&scores)?;
    Ok(assignment
        .pairs
        .iter()
        .filter(|&&(r, c)| scores[r][c] >= iou_floor)
        .map(|&(r, _)| candidates[r].object_id)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMatch {
    pub gt_id: ObjectId,
    pub pred_id: Option<ObjectId>,
    pub st_iou: f64,
    pub recalled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallOutcome {
    pub matches: Vec<TrajectoryMatch>,
    pub recalled: usize,
    pub total: usize,
}

impl RecallOutcome {
    pub fn recall(&self) -> f64 {
        fraction(self.recalled, self.total)
    }
}

pub fn average_recall_detail(pred: &[Trajectory], gt: &[Trajectory], mask_iou_thresh: f64) -> Result<RecallOutcome> {
    let scores = siou_matrix(gt, pred)?;
    let assignment = hungarian_match(&scores)?;
    let matches: Vec<TrajectoryMatch> = gt
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let col = assignment.col_of(gi);
            let st_iou = col.map_or(0.0, |c| scores[gi][c]);
            TrajectoryMatch {
                gt_id: g.object_id,
                pred_id: col.map(|c| pred[c].object_id),
                st_iou,
                recalled: col.is_some() && st_iou >= mask_iou_thresh,
            }
        })
        .collect();
    let recalled = matches.iter().filter(|m| m.recalled).count();
    Ok(RecallOutcome {
        matches,
        recalled,
        total: gt.len(),
    })
}

/// Fraction of ground-truth trajectories whose one-to-one matched
/// prediction reaches `mask_iou_thresh` spatiotemporal IoU (inclusive).
pub fn average_recall(pred: &[Trajectory], gt: &[Trajectory], mask_iou_thresh: f64) -> Result<f64> {
    average_recall_detail(pred, gt, mask_iou_thresh).map(|o| o.recall())
}
