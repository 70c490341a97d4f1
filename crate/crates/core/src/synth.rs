//! Seeded synthetic data: separable preference sets, reward populations
//! with known shapes, and toy score matrices with a planted system
//! ordering. Tests and the ablation experiment run on these.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{HumanRating, Orientation, RatingScale, TranslationInstance};

pub const SYNTH_LANG_PAIR: &str = "aa-bb";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Two systems per segment: a near-copy of the reference versus the
    /// same copy with its final two characters trimmed, so the worse
    /// side's length and overlap features all shrink by the same small
    /// fraction; DA ratings 80 vs 40.
    SeparablePairs,
    /// Rewards concentrated in [4, 6.5] (right-skewed population).
    SkewedRewards,
    /// Rewards symmetric around 0 with spread roughly ±3.
    CenteredRewards,
    /// Planted quality ordering over systems; human scores are a noisy
    /// function of the planted quality.
    ScoreMatrix,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable_pairs" => Ok(SynthKind::SeparablePairs),
            "skewed_rewards" => Ok(SynthKind::SkewedRewards),
            "centered_rewards" => Ok(SynthKind::CenteredRewards),
            "score_matrix" => Ok(SynthKind::ScoreMatrix),
            other => Err(Error::Config(format!(
                "unknown synth kind {other:?} (expected separable_pairs, skewed_rewards, centered_rewards, or score_matrix)"
            ))),
        }
    }
}

/// What to generate. `n` is the segment count for rated kinds and the
/// sample count for reward kinds; `systems` only applies to
/// `ScoreMatrix`; `noise` is the corruption/jitter level (0 = clean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub systems: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthData {
    Rated {
        instances: Vec<TranslationInstance>,
        ratings: Vec<HumanRating>,
    },
    Rewards(Vec<f64>),
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(3..=8);
    (0..len)
        .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
        .collect()
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    sentence_between(rng, 4, 10)
}

fn sentence_between(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let words = rng.random_range(lo..=hi);
    (0..words).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

/// Replace each word with a random one with probability `rate`.
fn corrupt(rng: &mut ChaCha8Rng, text: &str, rate: f64) -> String {
    text.split(' ')
        .map(|w| {
            if rng.random::<f64>() < rate {
                word(rng)
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn da_rating(seg: &str, sys: &str, value: f64) -> HumanRating {
    HumanRating {
        segment_id: seg.to_string(),
        system_id: sys.to_string(),
        value,
        scale: RatingScale::Da,
        orientation: Orientation::HigherBetter,
    }
}

fn instance(
    seg: &str,
    sys: &str,
    source: &str,
    candidate: String,
    reference: &str,
) -> TranslationInstance {
    TranslationInstance {
        segment_id: seg.to_string(),
        system_id: sys.to_string(),
        lang_pair: SYNTH_LANG_PAIR.to_string(),
        source: source.to_string(),
        candidate,
        reference: Some(reference.to_string()),
    }
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Contract(format!("noise must be ≥ 0, got {}", spec.noise)));
    }
    let min_n = match spec.kind {
        SynthKind::SkewedRewards | SynthKind::CenteredRewards => 2,
        _ => 1,
    };
    if spec.n < min_n {
        return Err(Error::Contract(format!(
            "n must be ≥ {min_n} for this kind, got {}",
            spec.n
        )));
    }
    if spec.kind == SynthKind::ScoreMatrix && spec.systems < 2 {
        return Err(Error::Contract(format!(
            "score_matrix needs ≥ 2 systems, got {}",
            spec.systems
        )));
    }
    Ok(())
}

fn gen_separable(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> SynthData {
    let mut instances = Vec::new();
    let mut ratings = Vec::new();
    for k in 0..spec.n {
        let seg = format!("seg{k:04}");
        let source = sentence(rng);
        let reference = sentence_between(rng, 8, 16);
        let good = corrupt(rng, &reference, spec.noise);
        // Words are at least three characters, so trimming two always
        // leaves a non-empty string strictly shorter than the original.
        let bad: String = good.chars().take(good.chars().count() - 2).collect();
        instances.push(instance(&seg, "good", &source, good, &reference));
        instances.push(instance(&seg, "bad", &source, bad, &reference));
        ratings.push(da_rating(&seg, "good", 80.0));
        ratings.push(da_rating(&seg, "bad", 40.0));
    }
    SynthData::Rated { instances, ratings }
}

fn gen_score_matrix(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> SynthData {
    let qualities: Vec<f64> = (0..spec.systems)
        .map(|k| 0.9 - 0.6 * k as f64 / (spec.systems - 1) as f64)
        .collect();
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut instances = Vec::new();
    let mut ratings = Vec::new();
    for i in 0..spec.n {
        let seg = format!("seg{i:04}");
        let source = sentence(rng);
        let reference = sentence(rng);
        for (k, &q) in qualities.iter().enumerate() {
            let sys = format!("sys{k:02}");
            let candidate = corrupt(rng, &reference, 1.0 - q);
            let human = (100.0 * q + spec.noise * jitter.sample(rng)).clamp(0.0, 100.0);
            instances.push(instance(&seg, &sys, &source, candidate, &reference));
            ratings.push(da_rating(&seg, &sys, human));
        }
    }
    SynthData::Rated { instances, ratings }
}

/// Generate the dataset described by `spec`; a pure function of its fields.
pub fn gen(spec: &SynthSpec) -> Result<SynthData> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match spec.kind {
        SynthKind::SeparablePairs => gen_separable(spec, &mut rng),
        SynthKind::ScoreMatrix => gen_score_matrix(spec, &mut rng),
        SynthKind::SkewedRewards => {
            let normal = Normal::<f64>::new(5.4, 0.55).expect("valid normal");
            SynthData::Rewards(
                (0..spec.n)
                    .map(|_| normal.sample(&mut rng).clamp(4.0, 6.5))
                    .collect(),
            )
        }
        SynthKind::CenteredRewards => {
            let normal = Normal::<f64>::new(0.0, 1.25).expect("valid normal");
            SynthData::Rewards((0..spec.n).map(|_| normal.sample(&mut rng)).collect())
        }
    })
}
