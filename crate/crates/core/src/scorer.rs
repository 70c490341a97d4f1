//! Deterministic text features plus a small differentiable scorer.
//!
//! The scorer is a one-hidden-layer tanh network over a fixed-length feature
//! vector: r = out_weights · tanh(hidden_weights·x + hidden_bias) + out_bias.
//! Features are a deterministic function of (source, candidate, reference)
//! only; ids and language pair never influence them.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::ingest::TranslationInstance;

/// Slots 0..6 are fixed statistics; the rest hold hashed 3-gram counts.
pub const RESERVED_SLOTS: usize = 6;
pub const DEFAULT_INPUT_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 16;

/// Length statistics are clamped to this ceiling.
const LENGTH_CLAMP: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Raw scalar reward for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardScore {
    pub value: f64,
}

/// Produces feature vectors of a fixed dimension.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    dim: usize,
}

fn char_trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return Vec::new();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Jaccard overlap of char-3-gram sets; 0 when either set is empty.
fn trigram_overlap(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = char_trigrams(a).into_iter().collect();
    let sb: BTreeSet<String> = char_trigrams(b).into_iter().collect();
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    inter / union
}

impl FeatureExtractor {
    pub fn new(dim: usize) -> Result<Self> {
        if dim <= RESERVED_SLOTS {
            return Err(Error::Config(format!(
                "feature dimension must exceed {RESERVED_SLOTS}, got {dim}"
            )));
        }
        Ok(FeatureExtractor { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slot layout: [0] bias 1.0; [1] |mt| in chars / 8, saturating at 64
    /// chars; [2] |mt|/|src|; [3] |mt|/|ref| (ratios clamped to [0, 8]);
    /// [4] 3-gram overlap mt↔ref; [5] 3-gram overlap mt↔src; [6..] hashed
    /// mt 3-gram counts, log(1+c)-scaled and L2-normalized as a block.
    /// Reference-dependent slots are 0 when the reference is absent.
    pub fn extract(&self, instance: &TranslationInstance) -> FeatureVector {
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        let mt = instance.candidate.as_str();
        let src = instance.source.as_str();
        let reference = instance.reference.as_deref().filter(|r| !r.is_empty());
        let mt_len = mt.chars().count() as f64;
        let src_len = src.chars().count() as f64;
        v[1] = (mt_len / 8.0).clamp(0.0, LENGTH_CLAMP);
        if src_len > 0.0 {
            v[2] = (mt_len / src_len).clamp(0.0, LENGTH_CLAMP);
        }
        if let Some(r) = reference {
            let ref_len = r.chars().count() as f64;
            if ref_len > 0.0 {
                v[3] = (mt_len / ref_len).clamp(0.0, LENGTH_CLAMP);
            }
            v[4] = trigram_overlap(mt, r);
        }
        v[5] = trigram_overlap(mt, src);

        let block = self.dim - RESERVED_SLOTS;
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for gram in char_trigrams(mt) {
            let slot = RESERVED_SLOTS + (fnv1a64(gram.as_bytes()) % block as u64) as usize;
            *counts.entry(slot).or_insert(0.0) += 1.0;
        }
        for (slot, count) in &counts {
            v[*slot] = count.ln_1p();
        }
        let norm = v[RESERVED_SLOTS..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v[RESERVED_SLOTS..] {
                *x /= norm;
            }
        }
        FeatureVector { values: v }
    }
}

/// Weights of the scorer. `hidden_weights` is row-major H×D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    #[serde(rename = "D")]
    pub input_dim: usize,
    #[serde(rename = "H")]
    pub hidden_dim: usize,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub out_bias: f64,
}

impl ScorerParams {
    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        if d == 0 || h == 0 {
            return Err(Error::Contract("scorer dims must be ≥ 1".to_string()));
        }
        if self.hidden_weights.len() != h * d
            || self.hidden_bias.len() != h
            || self.out_weights.len() != h
        {
            return Err(Error::Contract(format!(
                "scorer shape mismatch: D={d}, H={h}, hidden_weights {}, hidden_bias {}, out_weights {}",
                self.hidden_weights.len(),
                self.hidden_bias.len(),
                self.out_weights.len()
            )));
        }
        let finite = self
            .hidden_weights
            .iter()
            .chain(&self.hidden_bias)
            .chain(&self.out_weights)
            .chain(std::iter::once(&self.out_bias))
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Contract("scorer params contain non-finite values".to_string()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("params serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: ScorerParams = serde_json::from_str(text).map_err(|e| Error::Schema {
            line: 1,
            message: format!("invalid params document: {e}"),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Reproducible initialization: weights ~ uniform(−s, s) with
/// s = sqrt(6/(D+H)), biases 0. Draw order (hidden_weights row-major,
/// then out_weights) is fixed; golden fixtures depend on it.
pub fn init_params(seed: u64, input_dim: usize, hidden_dim: usize) -> ScorerParams {
    assert!(input_dim >= 1 && hidden_dim >= 1, "dims must be ≥ 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s)
            .collect()
    };
    let hidden_weights = draw(hidden_dim * input_dim);
    let out_weights = draw(hidden_dim);
    ScorerParams {
        input_dim,
        hidden_dim,
        hidden_weights,
        hidden_bias: vec![0.0; hidden_dim],
        out_weights,
        out_bias: 0.0,
    }
}

/// Reward and hidden activations; shapes are the caller's responsibility.
pub(crate) fn forward_parts(params: &ScorerParams, x: &[f64]) -> (f64, Vec<f64>) {
    let d = params.input_dim;
    let mut activations = Vec::with_capacity(params.hidden_dim);
    let mut r = params.out_bias;
    for i in 0..params.hidden_dim {
        let row = &params.hidden_weights[i * d..(i + 1) * d];
        let pre: f64 = row.iter().zip(x).map(|(w, xj)| w * xj).sum::<f64>() + params.hidden_bias[i];
        let a = pre.tanh();
        r += params.out_weights[i] * a;
        activations.push(a);
    }
    (r, activations)
}

pub fn forward(params: &ScorerParams, features: &FeatureVector) -> Result<RewardScore> {
    params.validate()?;
    if features.values.len() != params.input_dim {
        return Err(Error::Contract(format!(
            "feature length {} does not match D={}",
            features.values.len(),
            params.input_dim
        )));
    }
    let (value, _) = forward_parts(params, &features.values);
    Ok(RewardScore { value })
}

/// Score a batch in parallel; output order matches input order.
pub fn score_instances(
    params: &ScorerParams,
    extractor: &FeatureExtractor,
    instances: &[TranslationInstance],
) -> Result<Vec<f64>> {
    params.validate()?;
    if extractor.dim() != params.input_dim {
        return Err(Error::Contract(format!(
            "extractor dim {} does not match D={}",
            extractor.dim(),
            params.input_dim
        )));
    }
    Ok(instances
        .par_iter()
        .map(|inst| forward_parts(params, &extractor.extract(inst).values).0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(src: &str, mt: &str, reference: Option<&str>) -> TranslationInstance {
        TranslationInstance {
            segment_id: "seg".into(),
            system_id: "sys".into(),
            lang_pair: "en-de".into(),
            source: src.into(),
            candidate: mt.into(),
            reference: reference.map(String::from),
        }
    }

    #[test]
    fn dim_must_exceed_reserved_slots() {
        assert!(FeatureExtractor::new(6).is_err());
        assert!(FeatureExtractor::new(7).is_ok());
    }

    #[test]
    fn candidate_equal_to_reference_has_full_overlap() {
        let fx = FeatureExtractor::new(16).unwrap();
        let v = fx.extract(&instance("la fuente", "the sentence", Some("the sentence")));
        assert_eq!(v.values[4], 1.0);
        assert_eq!(v.values[3], 1.0);
    }

    #[test]
    fn empty_candidate_yields_zeros_except_bias() {
        let fx = FeatureExtractor::new(16).unwrap();
        let v = fx.extract(&instance("source text", "", Some("reference text")));
        assert_eq!(v.values[0], 1.0);
        assert!(v.values[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reference_absent_zeroes_reference_slots() {
        let fx = FeatureExtractor::new(16).unwrap();
        let with_ref = fx.extract(&instance("src text", "candidate", Some("candidate")));
        let without = fx.extract(&instance("src text", "candidate", None));
        assert_eq!(without.values[3], 0.0);
        assert_eq!(without.values[4], 0.0);
        assert!(with_ref.values[3] > 0.0);
        assert_eq!(with_ref.values[5], without.values[5]);
        assert_eq!(&with_ref.values[6..], &without.values[6..]);
    }

    #[test]
    fn features_ignore_metadata() {
        let fx = FeatureExtractor::new(32).unwrap();
        let mut a = instance("src", "mt text", Some("ref"));
        let mut b = instance("src", "mt text", Some("ref"));
        a.segment_id = "x".into();
        b.segment_id = "y".into();
        a.system_id = "p".into();
        b.system_id = "q".into();
        a.lang_pair = "en-de".into();
        b.lang_pair = "zh-en".into();
        assert_eq!(fx.extract(&a), fx.extract(&b));
    }

    #[test]
    fn length_statistics_clamp_to_eight() {
        let fx = FeatureExtractor::new(16).unwrap();
        let long = "x".repeat(100);
        let v = fx.extract(&instance("ab", &long, Some("ab")));
        assert_eq!(v.values[1], 8.0);
        assert_eq!(v.values[2], 8.0);
        assert_eq!(v.values[3], 8.0);
    }

    // Frozen golden fixture: src = mt = ref = "abc", D = 64. The single
    // 3-gram "abc" hashes to slot 6 + (0xe71fa2190541574b mod 58) = 21 and
    // normalizes to 1.0.
    #[test]
    fn golden_abc_features() {
        let fx = FeatureExtractor::new(64).unwrap();
        let v = fx.extract(&instance("abc", "abc", Some("abc")));
        let mut expected = vec![0.0; 64];
        expected[0] = 1.0;
        expected[1] = 0.375;
        expected[2] = 1.0;
        expected[3] = 1.0;
        expected[4] = 1.0;
        expected[5] = 1.0;
        expected[21] = 1.0;
        assert_eq!(v.values, expected);
    }

    #[test]
    fn hashed_block_is_l2_normalized() {
        let fx = FeatureExtractor::new(64).unwrap();
        let v = fx.extract(&instance("src", "some longer candidate text here", None));
        let norm: f64 = v.values[6..].iter().map(|x| x * x).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = init_params(7, 64, 16);
        let b = init_params(7, 64, 16);
        let c = init_params(8, 64, 16);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s = (6.0 / 80.0_f64).sqrt();
        assert!(a.hidden_weights.iter().all(|w| w.abs() <= s));
        assert!(a.hidden_bias.iter().all(|&b| b == 0.0));
        assert_eq!(a.out_bias, 0.0);
    }

    // Frozen on first materialization; guards the draw order and the
    // uniform(−s, s) transform against accidental change.
    #[test]
    fn golden_init_seed0_d4_h2() {
        let p = init_params(0, 4, 2);
        let expected_hidden = [
            GOLDEN_HW[0], GOLDEN_HW[1], GOLDEN_HW[2], GOLDEN_HW[3], GOLDEN_HW[4], GOLDEN_HW[5],
            GOLDEN_HW[6], GOLDEN_HW[7],
        ];
        assert_eq!(p.hidden_weights, expected_hidden);
        assert_eq!(p.out_weights, [GOLDEN_OW[0], GOLDEN_OW[1]]);
        assert_eq!(p.hidden_bias, [0.0, 0.0]);
        assert_eq!(p.out_bias, 0.0);
    }

    // Values printed by `print_init_fixture` below and frozen here.
    const GOLDEN_HW: [f64; 8] = [
        0.41815083085312366,
        -0.0681565554207797,
        0.3982864853494634,
        -0.8796576687316564,
        0.7582214359172372,
        0.09906253757889294,
        0.6579689520479985,
        0.8708530058262582,
    ];
    const GOLDEN_OW: [f64; 2] = [0.6075632844559271, -0.6914174515282874];

    #[test]
    #[ignore = "regenerates the init fixture values"]
    fn print_init_fixture() {
        let p = init_params(0, 4, 2);
        println!("hidden_weights = {:?}", p.hidden_weights);
        println!("out_weights = {:?}", p.out_weights);
    }

    #[test]
    fn forward_zero_weights_passes_bias_through() {
        let params = ScorerParams {
            input_dim: 4,
            hidden_dim: 2,
            hidden_weights: vec![0.0; 8],
            hidden_bias: vec![0.0; 2],
            out_weights: vec![0.0; 2],
            out_bias: 0.7,
        };
        let x = FeatureVector { values: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(forward(&params, &x).unwrap().value, 0.7);
    }

    #[test]
    fn forward_saturated_tanh_approaches_out_weight() {
        let params = ScorerParams {
            input_dim: 1,
            hidden_dim: 1,
            hidden_weights: vec![20.0],
            hidden_bias: vec![0.0],
            out_weights: vec![2.0],
            out_bias: 0.0,
        };
        let x = FeatureVector { values: vec![1.0] };
        let r = forward(&params, &x).unwrap().value;
        assert!((r - 2.0).abs() < 1e-8);
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let params = init_params(0, 4, 2);
        let x = FeatureVector { values: vec![1.0, 2.0] };
        assert!(matches!(forward(&params, &x), Err(Error::Contract(_))));
    }

    #[test]
    fn reward_is_bounded_by_out_weights() {
        let params = init_params(3, 16, 4);
        let bound: f64 =
            params.out_weights.iter().map(|w| w.abs()).sum::<f64>() + params.out_bias.abs();
        let fx = FeatureExtractor::new(16).unwrap();
        for text in ["one sample", "another longer candidate", ""] {
            let r = forward(&params, &fx.extract(&instance("src", text, None))).unwrap();
            assert!(r.value.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn params_json_round_trip() {
        let p = init_params(5, 8, 3);
        let text = p.to_json().unwrap();
        assert!(text.contains("\"D\"") && text.contains("\"H\""));
        let q = ScorerParams::from_json(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn score_instances_matches_forward_order() {
        let params = init_params(1, 16, 4);
        let fx = FeatureExtractor::new(16).unwrap();
        let batch = vec![
            instance("src a", "first candidate", Some("ref a")),
            instance("src b", "second candidate", None),
            instance("src c", "", Some("ref c")),
        ];
        let scores = score_instances(&params, &fx, &batch).unwrap();
        for (inst, score) in batch.iter().zip(&scores) {
            assert_eq!(forward(&params, &fx.extract(inst)).unwrap().value, *score);
        }
    }
}
