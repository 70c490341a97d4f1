//! Meta-evaluation of a metric against human judgments: system-level
//! pairwise accuracy, tie-calibrated segment accuracy, soft pairwise
//! accuracy, a paired permutation significance test, and the weighted
//! challenge-set composite.
//!
//! All resampling is counter-seeded per resample, so results are
//! identical no matter how many threads the pool runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::counter_seed;
use crate::ingest::{HumanRating, ScoreMatrix, TranslationInstance};
use crate::pairs::normalize_rating;

/// Tie band selected by `tie_calibrated_accuracy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieThreshold {
    pub epsilon: f64,
}

/// Metric and human scores for two systems on the same segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPair {
    pub metric_a: f64,
    pub metric_b: f64,
    pub human_a: f64,
    pub human_b: f64,
}

/// Per-system (metric mean, human mean) over cells where both sides are
/// present; None when a system has no comparable cell.
fn system_means(sm: &ScoreMatrix) -> Vec<Option<(f64, f64)>> {
    (0..sm.systems.len())
        .map(|sys| {
            let mut metric_sum = 0.0;
            let mut human_sum = 0.0;
            let mut n = 0.0;
            for seg in 0..sm.segments.len() {
                if sm.comparable(sys, seg) {
                    metric_sum += sm.metric[sys][seg].unwrap();
                    human_sum += sm.human[sys][seg].unwrap();
                    n += 1.0;
                }
            }
            (n > 0.0).then(|| (metric_sum / n, human_sum / n))
        })
        .collect()
}

/// Sign agreement with a strict zero rule: a zero difference on either
/// side matches only a zero difference on the other.
fn signs_agree(dm: f64, dh: f64) -> bool {
    (dm > 0.0 && dh > 0.0) || (dm < 0.0 && dh < 0.0) || (dm == 0.0 && dh == 0.0)
}

/// Fraction of unordered system pairs whose metric-mean difference has
/// the same sign as the human-mean difference. Systems with no
/// comparable cells are skipped.
pub fn system_pairwise_accuracy(sm: &ScoreMatrix) -> Result<f64> {
    let means: Vec<(f64, f64)> = system_means(sm).into_iter().flatten().collect();
    if means.len() < 2 {
        return Err(Error::Contract(format!(
            "system accuracy needs ≥ 2 scored systems, got {}",
            means.len()
        )));
    }
    let mut matches = 0usize;
    let mut total = 0usize;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            total += 1;
            let dm = means[i].0 - means[j].0;
            let dh = means[i].1 - means[j].1;
            if signs_agree(dm, dh) {
                matches += 1;
            }
        }
    }
    Ok(matches as f64 / total as f64)
}

/// Sign agreement over all unordered index pairs of two aligned lists.
/// The flat-list counterpart of `system_pairwise_accuracy`, usable as a
/// `perm_both` correlation function.
pub fn pairwise_agreement(metric: &[f64], human: &[f64]) -> f64 {
    let n = metric.len().min(human.len());
    if n < 2 {
        return 0.0;
    }
    let mut matches = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if signs_agree(metric[i] - metric[j], human[i] - human[j]) {
                matches += 1;
            }
        }
    }
    matches as f64 / total as f64
}

/// All within-segment system pairs with both sides fully scored
/// (group-by-item pairing).
pub fn segment_pairs(sm: &ScoreMatrix) -> Vec<SegmentPair> {
    let mut pairs = Vec::new();
    for seg in 0..sm.segments.len() {
        for i in 0..sm.systems.len() {
            if !sm.comparable(i, seg) {
                continue;
            }
            for j in i + 1..sm.systems.len() {
                if !sm.comparable(j, seg) {
                    continue;
                }
                pairs.push(SegmentPair {
                    metric_a: sm.metric[i][seg].unwrap(),
                    metric_b: sm.metric[j][seg].unwrap(),
                    human_a: sm.human[i][seg].unwrap(),
                    human_b: sm.human[j][seg].unwrap(),
                });
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairLabel {
    ABetter,
    BBetter,
    Tie,
}

fn metric_label(diff: f64, epsilon: f64) -> PairLabel {
    if diff.abs() <= epsilon {
        PairLabel::Tie
    } else if diff > 0.0 {
        PairLabel::ABetter
    } else {
        PairLabel::BBetter
    }
}

fn human_label(diff: f64) -> PairLabel {
    if diff == 0.0 {
        PairLabel::Tie
    } else if diff > 0.0 {
        PairLabel::ABetter
    } else {
        PairLabel::BBetter
    }
}

/// Segment accuracy at a fixed tie band: the metric calls a pair a tie
/// when |metric_a − metric_b| ≤ ε; humans tie on exact equality.
pub fn accuracy_at_epsilon(pairs: &[SegmentPair], epsilon: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Contract("segment accuracy over no pairs".to_string()));
    }
    let matches = pairs
        .iter()
        .filter(|p| metric_label(p.metric_a - p.metric_b, epsilon) == human_label(p.human_a - p.human_b))
        .count();
    Ok(matches as f64 / pairs.len() as f64)
}

/// Search the tie band ε maximizing segment accuracy. Accuracy is a step
/// function of ε changing only at the |metric difference| values, so the
/// finite candidate set {0} ∪ midpoints of consecutive distinct sorted
/// differences ∪ {max difference} covers every achievable accuracy.
/// Returns the maximal accuracy and the smallest candidate achieving it.
pub fn tie_calibrated_accuracy(pairs: &[SegmentPair]) -> Result<(f64, TieThreshold)> {
    if pairs.is_empty() {
        return Err(Error::Contract("tie calibration over no pairs".to_string()));
    }
    let mut diffs: Vec<f64> = pairs.iter().map(|p| (p.metric_a - p.metric_b).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    diffs.dedup();
    let mut candidates = vec![0.0];
    for w in diffs.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    if let Some(&max) = diffs.last() {
        candidates.push(max);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best_acc = -1.0;
    let mut best_eps = 0.0;
    for &eps in &candidates {
        let acc = accuracy_at_epsilon(pairs, eps)?;
        if acc > best_acc {
            best_acc = acc;
            best_eps = eps;
        }
    }
    Ok((best_acc, TieThreshold { epsilon: best_eps }))
}

/// One-sided sign-flip p-values for the metric and human difference
/// lists, sharing the same flips per resample. Identical lists therefore
/// get identical p-values, making the SPA of a metric against itself
/// exactly 1.
fn sign_flip_p_values(
    metric_diffs: &[f64],
    human_diffs: &[f64],
    iterations: usize,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let obs_m: f64 = metric_diffs.iter().sum();
    let obs_h: f64 = human_diffs.iter().sum();
    let (count_m, count_h) = (0..iterations as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(counter_seed(seed, stream, t));
            let mut sum_m = 0.0;
            let mut sum_h = 0.0;
            for k in 0..metric_diffs.len() {
                let sign = if rng.random::<bool>() { -1.0 } else { 1.0 };
                sum_m += sign * metric_diffs[k];
                sum_h += sign * human_diffs[k];
            }
            ((sum_m >= obs_m) as u64, (sum_h >= obs_h) as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let denom = (iterations + 1) as f64;
    ((count_m + 1) as f64 / denom, (count_h + 1) as f64 / denom)
}

/// Soft pairwise accuracy: mean over unordered system pairs of
/// 1 − |p_human − p_metric|, where each p is a one-sided paired
/// sign-flip permutation p-value over the segments both systems share.
pub fn soft_pairwise_accuracy(sm: &ScoreMatrix, iterations: usize, seed: u64) -> Result<f64> {
    if sm.systems.len() < 2 {
        return Err(Error::Contract(format!(
            "soft pairwise accuracy needs ≥ 2 systems, got {}",
            sm.systems.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut stream = 0u64;
    for i in 0..sm.systems.len() {
        for j in i + 1..sm.systems.len() {
            stream += 1;
            let mut metric_diffs = Vec::new();
            let mut human_diffs = Vec::new();
            for seg in 0..sm.segments.len() {
                if sm.comparable(i, seg) && sm.comparable(j, seg) {
                    metric_diffs.push(sm.metric[i][seg].unwrap() - sm.metric[j][seg].unwrap());
                    human_diffs.push(sm.human[i][seg].unwrap() - sm.human[j][seg].unwrap());
                }
            }
            if metric_diffs.is_empty() {
                continue;
            }
            let (p_m, p_h) = sign_flip_p_values(&metric_diffs, &human_diffs, iterations, seed, stream);
            total += 1.0 - (p_h - p_m).abs();
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::Contract("no system pair shares a fully scored segment".to_string()));
    }
    Ok(total / pairs as f64)
}

/// Paired permutation test for "metric A correlates better with human
/// than metric B". Per resample each item's A/B scores are swapped with
/// probability ½; p = (#{Δ' ≥ Δ} + 1)/(iterations + 1) where
/// Δ = corr(A, human) − corr(B, human).
pub fn perm_both<F>(
    metric_a: &[f64],
    metric_b: &[f64],
    human: &[f64],
    corr: F,
    iterations: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let n = metric_a.len();
    if n == 0 || metric_b.len() != n || human.len() != n {
        return Err(Error::Contract(format!(
            "perm-both needs equal-length non-empty score lists, got {}, {}, {}",
            metric_a.len(),
            metric_b.len(),
            human.len()
        )));
    }
    let observed = corr(metric_a, human) - corr(metric_b, human);
    let count = (0..iterations as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(counter_seed(seed, 0, t));
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for k in 0..n {
                if rng.random::<bool>() {
                    a.push(metric_b[k]);
                    b.push(metric_a[k]);
                } else {
                    a.push(metric_a[k]);
                    b.push(metric_b[k]);
                }
            }
            let delta = corr(&a, human) - corr(&b, human);
            (delta >= observed) as u64
        })
        .sum::<u64>();
    Ok((count + 1) as f64 / (iterations + 1) as f64)
}

/// Challenge-set phenomenon categories, in composite order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcesPhenomenon {
    Addition,
    Omission,
    Mistranslation,
    Untranslated,
    DoNotTranslate,
    Overtranslation,
    Undertranslation,
    RealWorldKnowledge,
    WrongLanguage,
    Punctuation,
}

impl AcesPhenomenon {
    pub const ALL: [AcesPhenomenon; 10] = [
        AcesPhenomenon::Addition,
        AcesPhenomenon::Omission,
        AcesPhenomenon::Mistranslation,
        AcesPhenomenon::Untranslated,
        AcesPhenomenon::DoNotTranslate,
        AcesPhenomenon::Overtranslation,
        AcesPhenomenon::Undertranslation,
        AcesPhenomenon::RealWorldKnowledge,
        AcesPhenomenon::WrongLanguage,
        AcesPhenomenon::Punctuation,
    ];

    /// Snake-case wire name, matching the serialized encoding.
    pub fn as_str(self) -> &'static str {
        match self {
            AcesPhenomenon::Addition => "addition",
            AcesPhenomenon::Omission => "omission",
            AcesPhenomenon::Mistranslation => "mistranslation",
            AcesPhenomenon::Untranslated => "untranslated",
            AcesPhenomenon::DoNotTranslate => "do_not_translate",
            AcesPhenomenon::Overtranslation => "overtranslation",
            AcesPhenomenon::Undertranslation => "undertranslation",
            AcesPhenomenon::RealWorldKnowledge => "real_world_knowledge",
            AcesPhenomenon::WrongLanguage => "wrong_language",
            AcesPhenomenon::Punctuation => "punctuation",
        }
    }

    /// Composite weight: 5 for critical accuracy errors, 1 for fluency
    /// and knowledge categories, 0.1 for punctuation.
    pub fn weight(self) -> f64 {
        match self {
            AcesPhenomenon::Addition
            | AcesPhenomenon::Omission
            | AcesPhenomenon::Mistranslation
            | AcesPhenomenon::Overtranslation
            | AcesPhenomenon::Undertranslation => 5.0,
            AcesPhenomenon::Punctuation => 0.1,
            _ => 1.0,
        }
    }
}

/// One challenge-set example: the metric's score for the good
/// translation and for the incorrect one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcesItem {
    pub phenomenon: AcesPhenomenon,
    pub good_score: f64,
    pub incorrect_score: f64,
}

/// Kendall-tau-like score (C − D)/(C + D) over one category's items;
/// ties count as discordant.
pub fn tau_like(items: &[AcesItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Contract("tau over no items".to_string()));
    }
    let concordant = items.iter().filter(|i| i.good_score > i.incorrect_score).count();
    let n = items.len();
    Ok((2.0 * concordant as f64 - n as f64) / n as f64)
}

/// Weighted sum of per-category tau scores; all 10 categories required.
pub fn aces_composite(taus: &BTreeMap<AcesPhenomenon, f64>) -> Result<f64> {
    let mut total = 0.0;
    for phenomenon in AcesPhenomenon::ALL {
        let tau = taus.get(&phenomenon).ok_or_else(|| {
            Error::Contract(format!(
                "composite requires all categories; missing {}",
                phenomenon.as_str()
            ))
        })?;
        total += phenomenon.weight() * tau;
    }
    Ok(total)
}

/// A score attached to one (lang_pair, segment, system) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScore {
    pub lang_pair: String,
    pub segment_id: String,
    pub system_id: String,
    pub value: f64,
}

/// Normalize ratings into higher-is-better labeled scores, resolving the
/// language pair through the instances. When one (segment, system) cell
/// carries ratings on several scales, the finest-grained wins: MQM over
/// DA over SQM over ESA. Ratings without a matching instance are
/// dropped.
pub fn human_scores(
    instances: &[TranslationInstance],
    ratings: &[HumanRating],
) -> Vec<LabeledScore> {
    use crate::ingest::RatingScale;
    fn priority(scale: RatingScale) -> u8 {
        match scale {
            RatingScale::Mqm => 0,
            RatingScale::Da => 1,
            RatingScale::Sqm => 2,
            RatingScale::Esa => 3,
        }
    }
    let lang_of: BTreeMap<(&str, &str), &str> = instances
        .iter()
        .map(|i| ((i.segment_id.as_str(), i.system_id.as_str()), i.lang_pair.as_str()))
        .collect();
    let mut chosen: BTreeMap<(&str, &str), &HumanRating> = BTreeMap::new();
    for rating in ratings {
        let key = (rating.segment_id.as_str(), rating.system_id.as_str());
        match chosen.get(&key) {
            Some(current) if priority(current.scale) <= priority(rating.scale) => {}
            _ => {
                chosen.insert(key, rating);
            }
        }
    }
    let mut out: Vec<LabeledScore> = chosen
        .into_iter()
        .filter_map(|((seg, sys), rating)| {
            lang_of.get(&(seg, sys)).map(|&lang_pair| LabeledScore {
                lang_pair: lang_pair.to_string(),
                segment_id: seg.to_string(),
                system_id: sys.to_string(),
                value: normalize_rating(rating),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.lang_pair, &a.segment_id, &a.system_id).cmp(&(&b.lang_pair, &b.segment_id, &b.system_id))
    });
    out
}

/// Join metric and human scores into one matrix per language pair, with
/// systems and segments sorted. Cells missing on either side stay None.
pub fn assemble_matrices(
    metric: &[LabeledScore],
    human: &[LabeledScore],
) -> Result<Vec<ScoreMatrix>> {
    type CellMap = BTreeMap<(String, String), f64>;
    let mut by_lang: BTreeMap<String, (CellMap, CellMap)> = BTreeMap::new();
    let mut insert = |side: usize, score: &LabeledScore| -> Result<()> {
        let entry = by_lang.entry(score.lang_pair.clone()).or_default();
        let cells = if side == 0 { &mut entry.0 } else { &mut entry.1 };
        let key = (score.segment_id.clone(), score.system_id.clone());
        if let Some(&existing) = cells.get(&key) {
            if existing != score.value {
                return Err(Error::Conflict(format!(
                    "two scores for ({}, {}, {}): {} and {}",
                    score.lang_pair, score.segment_id, score.system_id, existing, score.value
                )));
            }
        }
        cells.insert(key, score.value);
        Ok(())
    };
    for score in metric {
        insert(0, score)?;
    }
    for score in human {
        insert(1, score)?;
    }
    let mut matrices = Vec::new();
    for (lang_pair, (metric_cells, human_cells)) in by_lang {
        let mut systems: Vec<String> = metric_cells
            .keys()
            .chain(human_cells.keys())
            .map(|(_, sys)| sys.clone())
            .collect();
        systems.sort();
        systems.dedup();
        let mut segments: Vec<String> = metric_cells
            .keys()
            .chain(human_cells.keys())
            .map(|(seg, _)| seg.clone())
            .collect();
        segments.sort();
        segments.dedup();
        let lookup = |cells: &CellMap| -> Vec<Vec<Option<f64>>> {
            systems
                .iter()
                .map(|sys| {
                    segments
                        .iter()
                        .map(|seg| cells.get(&(seg.clone(), sys.clone())).copied())
                        .collect()
                })
                .collect()
        };
        let metric_matrix = lookup(&metric_cells);
        let human_matrix = lookup(&human_cells);
        matrices.push(ScoreMatrix::new(
            lang_pair,
            systems,
            segments,
            metric_matrix,
            human_matrix,
        )?);
    }
    Ok(matrices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Orientation, RatingScale};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Matrix with one segment per value so system means equal the values.
    fn matrix_from_means(metric: &[f64], human: &[f64]) -> ScoreMatrix {
        let systems: Vec<String> = (0..metric.len()).map(|i| format!("sys{i}")).collect();
        ScoreMatrix::new(
            "en-de".to_string(),
            systems,
            vec!["seg0".to_string()],
            metric.iter().map(|&m| vec![Some(m)]).collect(),
            human.iter().map(|&h| vec![Some(h)]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn system_accuracy_perfect_and_reversed() {
        let sm = matrix_from_means(&[4.0, 3.0, 2.0, 1.0], &[40.0, 30.0, 20.0, 10.0]);
        assert_eq!(system_pairwise_accuracy(&sm).unwrap(), 1.0);
        let sm = matrix_from_means(&[1.0, 2.0, 3.0, 4.0], &[40.0, 30.0, 20.0, 10.0]);
        assert_eq!(system_pairwise_accuracy(&sm).unwrap(), 0.0);
    }

    #[test]
    fn system_accuracy_two_thirds_case() {
        let sm = matrix_from_means(&[3.0, 1.0, 2.0], &[3.0, 2.0, 1.0]);
        let acc = system_pairwise_accuracy(&sm).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_differences_match_only_zero() {
        let sm = matrix_from_means(&[1.0, 1.0], &[2.0, 2.0]);
        assert_eq!(system_pairwise_accuracy(&sm).unwrap(), 1.0);
        let sm = matrix_from_means(&[1.0, 1.0], &[2.0, 3.0]);
        assert_eq!(system_pairwise_accuracy(&sm).unwrap(), 0.0);
    }

    #[test]
    fn system_means_use_only_comparable_cells() {
        // sys0's second segment has no human score; its huge metric value
        // must not leak into the mean.
        let sm = ScoreMatrix::new(
            "en-de".to_string(),
            vec!["sys0".to_string(), "sys1".to_string()],
            vec!["s0".to_string(), "s1".to_string()],
            vec![vec![Some(1.0), Some(1000.0)], vec![Some(2.0), Some(2.0)]],
            vec![vec![Some(10.0), None], vec![Some(20.0), Some(20.0)]],
        )
        .unwrap();
        // sys0 mean = 1.0 < sys1 mean = 2.0, matching human 10 < 20.
        assert_eq!(system_pairwise_accuracy(&sm).unwrap(), 1.0);
    }

    #[test]
    fn system_accuracy_requires_two_scored_systems() {
        let sm = matrix_from_means(&[1.0], &[1.0]);
        assert!(matches!(system_pairwise_accuracy(&sm), Err(Error::Contract(_))));
        let sm = ScoreMatrix::new(
            "en-de".to_string(),
            vec!["a".to_string(), "b".to_string()],
            vec!["s".to_string()],
            vec![vec![Some(1.0)], vec![Some(2.0)]],
            vec![vec![Some(1.0)], vec![None]],
        )
        .unwrap();
        assert!(matches!(system_pairwise_accuracy(&sm), Err(Error::Contract(_))));
    }

    #[test]
    fn pairwise_agreement_matches_system_accuracy_semantics() {
        let acc = pairwise_agreement(&[3.0, 1.0, 2.0], &[3.0, 2.0, 1.0]);
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    }

    fn pair(metric_a: f64, metric_b: f64, human_a: f64, human_b: f64) -> SegmentPair {
        SegmentPair { metric_a, metric_b, human_a, human_b }
    }

    #[test]
    fn exact_metric_needs_no_tie_band() {
        let pairs = [pair(1.0, 2.0, 1.0, 2.0), pair(3.0, 1.0, 3.0, 1.0), pair(2.0, 2.0, 2.0, 2.0)];
        let (acc, eps) = tie_calibrated_accuracy(&pairs).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(eps.epsilon, 0.0);
    }

    #[test]
    fn all_human_ties_select_a_wide_band() {
        let pairs = [
            pair(0.500, 0.505, 1.0, 1.0),
            pair(0.30, 0.29, 2.0, 2.0),
            pair(0.70, 0.71, 3.0, 3.0),
        ];
        let (acc, eps) = tie_calibrated_accuracy(&pairs).unwrap();
        assert_eq!(acc, 1.0);
        assert!(eps.epsilon <= 0.01 + 1e-12);
        assert!(accuracy_at_epsilon(&pairs, 0.0).unwrap() < 1.0);
    }

    #[test]
    fn calibrated_accuracy_dominates_zero_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let pairs: Vec<SegmentPair> = (0..12)
                .map(|_| {
                    pair(
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                        (rng.random::<f64>() * 3.0).floor(),
                        (rng.random::<f64>() * 3.0).floor(),
                    )
                })
                .collect();
            let (acc, eps) = tie_calibrated_accuracy(&pairs).unwrap();
            assert!(acc >= accuracy_at_epsilon(&pairs, 0.0).unwrap());
            assert_eq!(acc, accuracy_at_epsilon(&pairs, eps.epsilon).unwrap());
        }
    }

    /// Brute-force oracle: accuracy changes only at the |diff| values, so
    /// scanning {0} ∪ all distinct |diffs| visits every achievable value.
    fn oracle_best_accuracy(pairs: &[SegmentPair]) -> f64 {
        let mut candidates: Vec<f64> =
            pairs.iter().map(|p| (p.metric_a - p.metric_b).abs()).collect();
        candidates.push(0.0);
        candidates
            .iter()
            .map(|&eps| accuracy_at_epsilon(pairs, eps).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn tie_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = 1 + (rng.random::<u32>() % 12) as usize;
            let pairs: Vec<SegmentPair> = (0..n)
                .map(|_| {
                    pair(
                        (rng.random::<f64>() * 4.0).round() / 4.0,
                        (rng.random::<f64>() * 4.0).round() / 4.0,
                        (rng.random::<f64>() * 2.0).floor(),
                        (rng.random::<f64>() * 2.0).floor(),
                    )
                })
                .collect();
            let (acc, _) = tie_calibrated_accuracy(&pairs).unwrap();
            assert_eq!(acc, oracle_best_accuracy(&pairs));
        }
    }

    #[test]
    fn empty_segment_pairs_are_contract_errors() {
        assert!(matches!(tie_calibrated_accuracy(&[]), Err(Error::Contract(_))));
        assert!(matches!(accuracy_at_epsilon(&[], 0.0), Err(Error::Contract(_))));
    }

    fn grid_matrix(metric: Vec<Vec<Option<f64>>>, human: Vec<Vec<Option<f64>>>) -> ScoreMatrix {
        let systems = (0..metric.len()).map(|i| format!("sys{i}")).collect();
        let segments = (0..metric[0].len()).map(|i| format!("seg{i}")).collect();
        ScoreMatrix::new("en-de".to_string(), systems, segments, metric, human).unwrap()
    }

    #[test]
    fn segment_pairs_require_full_cells() {
        let sm = grid_matrix(
            vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), None]],
            vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]],
        );
        let pairs = segment_pairs(&sm);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0], pair(1.0, 3.0, 1.0, 3.0));
    }

    #[test]
    fn spa_is_exactly_one_for_identical_scores() {
        let values = vec![
            vec![Some(0.3), Some(0.9), Some(0.1)],
            vec![Some(0.5), Some(0.2), Some(0.8)],
            vec![Some(0.4), Some(0.4), Some(0.6)],
        ];
        let sm = grid_matrix(values.clone(), values);
        assert_eq!(soft_pairwise_accuracy(&sm, 500, 7).unwrap(), 1.0);
    }

    #[test]
    fn spa_near_zero_for_opposed_scores() {
        let metric: Vec<Vec<Option<f64>>> = vec![
            (0..12).map(|_| Some(0.0)).collect(),
            (0..12).map(|_| Some(1.0)).collect(),
        ];
        let human: Vec<Vec<Option<f64>>> = vec![
            (0..12).map(|_| Some(10.0)).collect(),
            (0..12).map(|_| Some(0.0)).collect(),
        ];
        let sm = grid_matrix(metric, human);
        let spa = soft_pairwise_accuracy(&sm, 2000, 3).unwrap();
        assert!(spa < 0.05, "spa = {spa}");
    }

    #[test]
    fn spa_is_deterministic_for_a_seed() {
        let sm = grid_matrix(
            vec![
                vec![Some(0.1), Some(0.7), Some(0.4)],
                vec![Some(0.6), Some(0.2), Some(0.9)],
            ],
            vec![
                vec![Some(1.0), Some(5.0), Some(2.0)],
                vec![Some(4.0), Some(1.0), Some(6.0)],
            ],
        );
        let a = soft_pairwise_accuracy(&sm, 300, 11).unwrap();
        let b = soft_pairwise_accuracy(&sm, 300, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perm_both_identical_metrics_p_at_least_half() {
        let scores = [0.4, 0.9, 0.1, 0.7, 0.3];
        let human = [1.0, 5.0, 0.0, 4.0, 2.0];
        let p = perm_both(&scores, &scores, &human, pairwise_agreement, 1000, 5).unwrap();
        assert!(p >= 0.5, "p = {p}");
    }

    #[test]
    fn perm_both_detects_clear_winner() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let human: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 10.0).collect();
        let anti: Vec<f64> = human.iter().map(|&h| -h).collect();
        let p = perm_both(&human, &anti, &human, pairwise_agreement, 1000, 5).unwrap();
        assert!(p < 0.05, "p = {p}");
    }

    #[test]
    fn perm_both_role_swap_complements() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let human: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
        let a: Vec<f64> = human.iter().map(|&h| h + 0.2 * rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
        let p_ab = perm_both(&a, &b, &human, pairwise_agreement, 4000, 77).unwrap();
        let p_ba = perm_both(&b, &a, &human, pairwise_agreement, 4000, 78).unwrap();
        assert!((p_ab + p_ba - 1.0).abs() < 0.05, "p_ab {p_ab} p_ba {p_ba}");
    }

    #[test]
    fn perm_both_rejects_misaligned_lists() {
        assert!(matches!(
            perm_both(&[1.0], &[1.0, 2.0], &[1.0], pairwise_agreement, 10, 0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            perm_both(&[], &[], &[], pairwise_agreement, 10, 0),
            Err(Error::Contract(_))
        ));
    }

    fn aces_item(phenomenon: AcesPhenomenon, good: f64, bad: f64) -> AcesItem {
        AcesItem { phenomenon, good_score: good, incorrect_score: bad }
    }

    #[test]
    fn tau_like_cases() {
        let all_good: Vec<AcesItem> = (0..5)
            .map(|_| aces_item(AcesPhenomenon::Addition, 1.0, 0.0))
            .collect();
        assert_eq!(tau_like(&all_good).unwrap(), 1.0);

        let all_bad: Vec<AcesItem> = (0..4)
            .map(|i| aces_item(AcesPhenomenon::Omission, 0.0, if i % 2 == 0 { 0.0 } else { 1.0 }))
            .collect();
        assert_eq!(tau_like(&all_bad).unwrap(), -1.0);

        let mixed = vec![
            aces_item(AcesPhenomenon::Punctuation, 1.0, 0.0),
            aces_item(AcesPhenomenon::Punctuation, 1.0, 0.5),
            aces_item(AcesPhenomenon::Punctuation, 0.9, 0.2),
            aces_item(AcesPhenomenon::Punctuation, 0.1, 0.2),
        ];
        assert_eq!(tau_like(&mixed).unwrap(), 0.5);

        assert!(matches!(tau_like(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn composite_weight_sum_is_exact() {
        let all_ones: BTreeMap<AcesPhenomenon, f64> =
            AcesPhenomenon::ALL.iter().map(|&p| (p, 1.0)).collect();
        assert_eq!(aces_composite(&all_ones).unwrap(), 29.1);

        let all_zero: BTreeMap<AcesPhenomenon, f64> =
            AcesPhenomenon::ALL.iter().map(|&p| (p, 0.0)).collect();
        assert_eq!(aces_composite(&all_zero).unwrap(), 0.0);
    }

    #[test]
    fn composite_reference_row() {
        let taus: BTreeMap<AcesPhenomenon, f64> = AcesPhenomenon::ALL
            .iter()
            .zip([0.75, 0.44, -0.23, 0.36, 0.60, -0.84, -0.86, -0.77, 0.66, 0.64])
            .map(|(&p, t)| (p, t))
            .collect();
        let composite = aces_composite(&taus).unwrap();
        assert!((composite - (-2.786)).abs() < 1e-9);
    }

    #[test]
    fn composite_requires_every_category() {
        let mut taus: BTreeMap<AcesPhenomenon, f64> =
            AcesPhenomenon::ALL.iter().map(|&p| (p, 0.5)).collect();
        taus.remove(&AcesPhenomenon::WrongLanguage);
        assert!(matches!(aces_composite(&taus), Err(Error::Contract(_))));
    }

    #[test]
    fn aces_item_json_uses_snake_case() {
        let item = aces_item(AcesPhenomenon::RealWorldKnowledge, 0.9, 0.4);
        let json = serde_json::to_string(&item).unwrap();
        assert!(json.contains("\"real_world_knowledge\""));
        let back: AcesItem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, item);
    }

    fn labeled(lang: &str, seg: &str, sys: &str, value: f64) -> LabeledScore {
        LabeledScore {
            lang_pair: lang.to_string(),
            segment_id: seg.to_string(),
            system_id: sys.to_string(),
            value,
        }
    }

    #[test]
    fn assemble_sorts_and_keeps_missing_cells_none() {
        let metric = vec![
            labeled("en-de", "s2", "b", 0.4),
            labeled("en-de", "s1", "a", 0.1),
            labeled("en-de", "s1", "b", 0.2),
            labeled("zh-en", "s1", "a", 0.9),
        ];
        let human = vec![
            labeled("en-de", "s1", "a", 50.0),
            labeled("en-de", "s2", "a", 60.0),
            labeled("en-de", "s1", "b", 70.0),
        ];
        let matrices = assemble_matrices(&metric, &human).unwrap();
        assert_eq!(matrices.len(), 2);
        let ende = &matrices[0];
        assert_eq!(ende.lang_pair, "en-de");
        assert_eq!(ende.systems, vec!["a", "b"]);
        assert_eq!(ende.segments, vec!["s1", "s2"]);
        assert_eq!(ende.metric[0][0], Some(0.1));
        assert_eq!(ende.metric[0][1], None);
        assert_eq!(ende.human[0][1], Some(60.0));
        assert!(ende.comparable(0, 0));
        assert!(!ende.comparable(1, 1));
        assert_eq!(matrices[1].lang_pair, "zh-en");
    }

    #[test]
    fn assemble_rejects_conflicting_duplicates() {
        let metric = vec![
            labeled("en-de", "s1", "a", 0.1),
            labeled("en-de", "s1", "a", 0.2),
        ];
        assert!(matches!(assemble_matrices(&metric, &[]), Err(Error::Conflict(_))));
        let same = vec![
            labeled("en-de", "s1", "a", 0.1),
            labeled("en-de", "s1", "a", 0.1),
        ];
        assert!(assemble_matrices(&same, &[]).is_ok());
    }

    #[test]
    fn human_scores_prefer_finer_scales_and_normalize() {
        let instances = vec![TranslationInstance {
            segment_id: "s1".into(),
            system_id: "a".into(),
            lang_pair: "en-de".into(),
            source: "x".into(),
            candidate: "y".into(),
            reference: None,
        }];
        let ratings = vec![
            HumanRating {
                segment_id: "s1".into(),
                system_id: "a".into(),
                value: 80.0,
                scale: RatingScale::Da,
                orientation: Orientation::HigherBetter,
            },
            HumanRating {
                segment_id: "s1".into(),
                system_id: "a".into(),
                value: 5.0,
                scale: RatingScale::Mqm,
                orientation: Orientation::Penalty,
            },
            HumanRating {
                segment_id: "orphan".into(),
                system_id: "a".into(),
                value: 10.0,
                scale: RatingScale::Da,
                orientation: Orientation::HigherBetter,
            },
        ];
        let scores = human_scores(&instances, &ratings);
        assert_eq!(scores.len(), 1);
        // MQM wins over DA; penalty 5 on a 25 scale normalizes to 20.
        assert_eq!(scores[0].value, 20.0);
        assert_eq!(scores[0].lang_pair, "en-de");
    }
}
