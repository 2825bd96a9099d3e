//! Open-vocabulary scene-graph evaluation: tiered label matching, recall
//! metrics, trajectory matching and rater agreement.

pub mod bridge;
pub mod hungarian;
pub mod kappa;
pub mod metrics;
pub mod report;
pub mod tier;

pub use bridge::{serve_judge, BridgeJudge};
pub use hungarian::{hungarian_match, Assignment};
pub use kappa::cohens_kappa;
pub use metrics::*;
pub use report::{evaluate_scene_graph, evaluate_trajectories, MatchReport, TrackingReport};
pub use tier::{match_tier, normalize_label, Judge, LexiconJudge, MatchKind, MatchTier};
