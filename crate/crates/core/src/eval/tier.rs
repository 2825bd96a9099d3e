//! Semantic match tiers and judges that assign them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declaration order is ascending fidelity, so `Identical` is the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Mismatch,
    SemanticOverlap,
    HypernymHyponym,
    Synonym,
    Identical,
}

impl MatchTier {
    pub const ALL: [MatchTier; 5] = [
        MatchTier::Identical,
        MatchTier::Synonym,
        MatchTier::HypernymHyponym,
        MatchTier::SemanticOverlap,
        MatchTier::Mismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MatchTier::Identical => "identical",
            MatchTier::Synonym => "synonym",
            MatchTier::HypernymHyponym => "hypernym_hyponym",
            MatchTier::SemanticOverlap => "semantic_overlap",
            MatchTier::Mismatch => "mismatch",
        }
    }

    /// Any tier above `Mismatch`.
    pub fn is_lenient_match(self) -> bool {
        self != MatchTier::Mismatch
    }
}

impl fmt::Display for MatchTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatchTier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown match tier {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Object,
    Attribute,
    Relation,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::Object => "object",
            MatchKind::Attribute => "attribute",
            MatchKind::Relation => "relation",
        }
    }
}

/// Assigns a tier to a (predicted, ground-truth) label pair. Must be
/// deterministic per input within a session and safe to call concurrently.
pub trait Judge: Send + Sync {
    fn judge(&self, pred: &str, gt: &str, kind: MatchKind) -> Result<MatchTier>;
}

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Exact equality after normalization short-circuits to `Identical`; every
/// other pair goes to the judge.
pub fn match_tier(pred: &str, gt: &str, kind: MatchKind, judge: &dyn Judge) -> Result<MatchTier> {
    let (p, g) = (normalize_label(pred), normalize_label(gt));
    if p.is_empty() || g.is_empty() {
        return Err(Error::InvalidInput(format!("empty {} label", kind.as_str())));
    }
    if p == g {
        return Ok(MatchTier::Identical);
    }
    judge.judge(&p, &g, kind)
}

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.tsv");

/// Rule-based judge over a word-relation table. Rows are
/// `relation<TAB>first<TAB>second` with relation one of `synonym`,
/// `hypernym` (first is broader) or `overlap`. Pairs with no edge that share
/// a word fall back to `SemanticOverlap`.
#[derive(Debug, Clone, Default)]
pub struct LexiconJudge {
    synonyms: BTreeSet<(String, String)>,
    /// broader -> narrower
    hyponyms: BTreeMap<String, BTreeSet<String>>,
    overlaps: BTreeSet<(String, String)>,
    token_fallback: bool,
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl LexiconJudge {
    pub fn parse(text: &str) -> Result<Self> {
        let mut judge = LexiconJudge {
            token_fallback: true,
            ..Default::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| Error::Parse {
                line: i + 1,
                column: 1,
                message,
            };
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let (a, b) = (normalize_label(cols[1]), normalize_label(cols[2]));
            if a.is_empty() || b.is_empty() {
                return Err(bad("empty term".into()));
            }
            match cols[0].trim() {
                "synonym" => {
                    judge.synonyms.insert(ordered(a, b));
                }
                "hypernym" => {
                    judge.hyponyms.entry(a).or_default().insert(b);
                }
                "overlap" => {
                    judge.overlaps.insert(ordered(a, b));
                }
                other => return Err(bad(format!("unknown relation {other:?}"))),
            }
        }
        Ok(judge)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("builtin lexicon is well formed")
    }

    pub fn with_token_fallback(mut self, enabled: bool) -> Self {
        self.token_fallback = enabled;
        self
    }

    fn is_broader(&self, broad: &str, narrow: &str) -> bool {
        // transitive closure over hypernym edges
        let mut stack = vec![broad];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur) {
                continue;
            }
            if let Some(kids) = self.hyponyms.get(cur) {
                if kids.contains(narrow) {
                    return true;
                }
                stack.extend(kids.iter().map(String::as_str));
            }
        }
        false
    }

    fn classify(&self, a: &str, b: &str) -> MatchTier {
        if a == b {
            return MatchTier::Identical;
        }
        let key = ordered(a.to_string(), b.to_string());
        if self.synonyms.contains(&key) {
            return MatchTier::Synonym;
        }
        if self.is_broader(a, b) || self.is_broader(b, a) {
            return MatchTier::HypernymHyponym;
        }
        if self.overlaps.contains(&key) {
            return MatchTier::SemanticOverlap;
        }
        if self.token_fallback {
            let words: BTreeSet<&str> = a.split(' ').collect();
            if b.split(' ').any(|w| words.contains(w)) {
                return MatchTier::SemanticOverlap;
            }
        }
        MatchTier::Mismatch
    }
}

impl Judge for LexiconJudge {
    fn judge(&self, pred: &str, gt: &str, _kind: MatchKind) -> Result<MatchTier> {
        Ok(self.classify(&normalize_label(pred), &normalize_label(gt)))
    }
}
