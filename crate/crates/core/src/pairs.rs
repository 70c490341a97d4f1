//! Pairwise preference construction from raw human ratings.
//!
//! Candidates for the same segment are paired when their normalized
//! rating difference on a shared scale reaches that scale's threshold
//! (a difference exactly at the threshold pairs). The rating difference
//! becomes the pair's margin, optionally rescaled per scale. Scales are
//! never mixed inside one pair.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{HumanRating, Orientation, RatingScale, TranslationInstance};

/// A preferred/rejected candidate pair with its normalized ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub segment_id: String,
    pub lang_pair: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub chosen: String,
    pub rejected: String,
    pub h_plus: f64,
    pub h_minus: f64,
    pub margin: f64,
}

/// Per-scale pairing thresholds and margin multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConfig {
    pub thresholds: BTreeMap<RatingScale, f64>,
    pub margin_scales: BTreeMap<RatingScale, f64>,
}

impl Default for PairConfig {
    fn default() -> Self {
        let thresholds = [
            (RatingScale::Da, 25.0),
            (RatingScale::Mqm, 0.1),
            (RatingScale::Sqm, 25.0),
            (RatingScale::Esa, 25.0),
        ]
        .into_iter()
        .collect();
        let margin_scales = RatingScale::ALL.iter().map(|&s| (s, 1.0)).collect();
        PairConfig { thresholds, margin_scales }
    }
}

impl PairConfig {
    fn builtin_threshold(scale: RatingScale) -> f64 {
        match scale {
            RatingScale::Mqm => 0.1,
            _ => 25.0,
        }
    }

    pub fn threshold(&self, scale: RatingScale) -> f64 {
        self.thresholds
            .get(&scale)
            .copied()
            .unwrap_or_else(|| Self::builtin_threshold(scale))
    }

    pub fn margin_scale(&self, scale: RatingScale) -> f64 {
        self.margin_scales.get(&scale).copied().unwrap_or(1.0)
    }
}

/// Pairs plus counts of instances that could not participate.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBuildOutcome {
    pub pairs: Vec<PreferencePair>,
    /// Instances with no rating on any scale.
    pub skipped_unrated: usize,
    /// Candidate pairs whose texts are identical strings.
    pub skipped_identical: usize,
}

/// Map a raw rating to higher-is-better: penalty-oriented values flip to
/// scale_max − value, higher-is-better values pass through.
pub fn normalize_rating(rating: &HumanRating) -> f64 {
    match rating.orientation {
        Orientation::HigherBetter => rating.value,
        Orientation::Penalty => rating.scale.max_value() - rating.value,
    }
}

/// Build preference pairs from rated instances.
///
/// Instances are grouped by (lang_pair, segment_id); each group must
/// share one source and one reference. Within a group, every unordered
/// candidate pair rated on a common scale yields a pair when the
/// normalized difference is at least the scale's threshold. Exact rating
/// ties never pair, and pairs whose two texts are identical are dropped
/// and counted. Output is deterministically sorted.
pub fn build_pairs(
    instances: &[TranslationInstance],
    ratings: &[HumanRating],
    config: &PairConfig,
) -> Result<PairBuildOutcome> {
    let mut rated: HashMap<(&str, &str), BTreeMap<RatingScale, f64>> = HashMap::new();
    for rating in ratings {
        rated
            .entry((rating.segment_id.as_str(), rating.system_id.as_str()))
            .or_default()
            .insert(rating.scale, normalize_rating(rating));
    }

    let mut groups: BTreeMap<(&str, &str), Vec<&TranslationInstance>> = BTreeMap::new();
    for instance in instances {
        groups
            .entry((instance.lang_pair.as_str(), instance.segment_id.as_str()))
            .or_default()
            .push(instance);
    }

    let mut pairs = Vec::new();
    let mut skipped_unrated = 0usize;
    let mut skipped_identical = 0usize;
    for ((lang_pair, segment_id), members) in &groups {
        let first = members[0];
        for other in &members[1..] {
            if other.source != first.source {
                return Err(Error::Conflict(format!(
                    "group ({lang_pair}, {segment_id}) mixes different sources"
                )));
            }
            if other.reference != first.reference {
                return Err(Error::Conflict(format!(
                    "group ({lang_pair}, {segment_id}) mixes different references"
                )));
            }
        }
        skipped_unrated += members
            .iter()
            .filter(|m| !rated.contains_key(&(m.segment_id.as_str(), m.system_id.as_str())))
            .count();
        for (i, a) in members.iter().enumerate() {
            let Some(ratings_a) = rated.get(&(a.segment_id.as_str(), a.system_id.as_str())) else {
                continue;
            };
            for b in &members[i + 1..] {
                let Some(ratings_b) = rated.get(&(b.segment_id.as_str(), b.system_id.as_str()))
                else {
                    continue;
                };
                for (&scale, &h_a) in ratings_a {
                    let Some(&h_b) = ratings_b.get(&scale) else { continue };
                    let diff = (h_a - h_b).abs();
                    if diff == 0.0 || diff < config.threshold(scale) {
                        continue;
                    }
                    let (winner, loser, h_plus, h_minus) =
                        if h_a > h_b { (a, b, h_a, h_b) } else { (b, a, h_b, h_a) };
                    if winner.candidate == loser.candidate {
                        skipped_identical += 1;
                        continue;
                    }
                    pairs.push(PreferencePair {
                        segment_id: (*segment_id).to_string(),
                        lang_pair: (*lang_pair).to_string(),
                        source: first.source.clone(),
                        reference: first.reference.clone(),
                        chosen: winner.candidate.clone(),
                        rejected: loser.candidate.clone(),
                        h_plus,
                        h_minus,
                        margin: config.margin_scale(scale) * (h_plus - h_minus),
                    });
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        (&a.lang_pair, &a.segment_id, &a.chosen, &a.rejected)
            .cmp(&(&b.lang_pair, &b.segment_id, &b.chosen, &b.rejected))
            .then(a.h_plus.total_cmp(&b.h_plus))
            .then(a.h_minus.total_cmp(&b.h_minus))
            .then(a.margin.total_cmp(&b.margin))
    });
    Ok(PairBuildOutcome { pairs, skipped_unrated, skipped_identical })
}

/// Write pairs as JSONL.
pub fn write_pairs(pairs: &[PreferencePair], path: &Path) -> Result<()> {
    let mut out = String::new();
    for pair in pairs {
        let line = serde_json::to_string(pair)
            .map_err(|e| Error::Contract(format!("pair serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load pairs written by `write_pairs`.
pub fn load_pairs(path: &Path) -> Result<Vec<PreferencePair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
