//! Deterministic minibatch training over preference pairs, with
//! per-step reward-distribution telemetry.
//!
//! The telemetry exists to make the reward-explosion ablation
//! observable: with the band penalty disabled the ranking loss is
//! translation invariant and rewards drift without bound; with it
//! enabled they settle inside the band.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::ingest::TranslationInstance;
use crate::objective::{
    combined_loss_and_grad, flatten_params, params_from_flat, LossConfig, PairExample,
};
use crate::pairs::PreferencePair;
use crate::scorer::{forward_parts, init_params, FeatureExtractor, FeatureVector, ScorerParams};

/// Optimizer choice; Adam is the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::default()),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?} (expected sgd or adam)"
            ))),
        }
    }
}

/// Training hyperparameters. The defaults suit the small built-in
/// scorer, not LLM-scale fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub margin_enabled: bool,
    pub reg_enabled: bool,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub hidden_dim: usize,
    pub beta_upper: f64,
    pub beta_lower: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 50,
            lambda: 0.1,
            margin_enabled: true,
            reg_enabled: true,
            seed: 0,
            optimizer: Optimizer::default(),
            hidden_dim: 16,
            beta_upper: 3.0,
            beta_lower: -3.0,
        }
    }
}

/// One optimizer step's losses and the full-dataset reward statistics
/// measured after the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub bt: f64,
    pub reg: f64,
    pub total: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
}

/// One record per optimizer step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,bt,reg,total,reward_mean,reward_std\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.bt, r.reg, r.total, r.reward_mean, r.reward_std
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Population mean and standard deviation; needs ≥ 2 values.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Contract(format!(
            "statistics need ≥ 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Reward mean/std of the scorer over featurized instances.
pub fn reward_stats(params: &ScorerParams, features: &[FeatureVector]) -> Result<(f64, f64)> {
    params.validate()?;
    let rewards: Vec<f64> = features
        .iter()
        .map(|f| forward_parts(params, &f.values).0)
        .collect();
    mean_std(&rewards)
}

/// Featurize preference pairs for training. Features depend only on the
/// texts, so the pair's metadata carries over untouched; the segment id
/// becomes the diagnostic label.
pub fn featurize_pairs(pairs: &[PreferencePair], extractor: &FeatureExtractor) -> Vec<PairExample> {
    let as_instance = |pair: &PreferencePair, candidate: &str| TranslationInstance {
        segment_id: pair.segment_id.clone(),
        system_id: String::new(),
        lang_pair: pair.lang_pair.clone(),
        source: pair.source.clone(),
        candidate: candidate.to_string(),
        reference: pair.reference.clone(),
    };
    pairs
        .iter()
        .map(|pair| PairExample {
            chosen: extractor.extract(&as_instance(pair, &pair.chosen)),
            rejected: extractor.extract(&as_instance(pair, &pair.rejected)),
            margin: pair.margin,
            label: pair.segment_id.clone(),
        })
        .collect()
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

impl OptimizerState {
    fn new(optimizer: Optimizer, dim: usize) -> Self {
        match optimizer {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam { beta1, beta2, epsilon } => OptimizerState::Adam(AdamState {
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
                beta1,
                beta2,
                epsilon,
            }),
        }
    }

    fn apply(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            OptimizerState::Adam(state) => {
                state.t += 1;
                let bc1 = 1.0 - state.beta1.powi(state.t as i32);
                let bc2 = 1.0 - state.beta2.powi(state.t as i32);
                for k in 0..theta.len() {
                    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grad[k];
                    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grad[k] * grad[k];
                    let m_hat = state.m[k] / bc1;
                    let v_hat = state.v[k] / bc2;
                    theta[k] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
                }
            }
        }
    }
}

fn validate_config(config: &TrainConfig) -> Result<()> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Contract(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if config.batch_size < 1 {
        return Err(Error::Contract("batch size must be ≥ 1".to_string()));
    }
    if config.hidden_dim < 1 {
        return Err(Error::Contract("hidden dim must be ≥ 1".to_string()));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::Contract(format!("lambda must be ≥ 0, got {}", config.lambda)));
    }
    if config.beta_lower.partial_cmp(&config.beta_upper) != Some(Ordering::Less) {
        return Err(Error::Contract(format!(
            "reward band [{}, {}] is empty",
            config.beta_lower, config.beta_upper
        )));
    }
    Ok(())
}

/// Train the scorer on featurized pairs. Fully deterministic given
/// (config, data): initialization and the per-epoch shuffle both derive
/// from config.seed. Aborts with step diagnostics if the loss leaves
/// the finite range.
pub fn train(examples: &[PairExample], config: &TrainConfig) -> Result<(ScorerParams, TrainHistory)> {
    validate_config(config)?;
    if examples.is_empty() {
        return Err(Error::Contract("training requires at least one pair".to_string()));
    }
    let input_dim = examples[0].chosen.values.len();
    for example in examples {
        if example.chosen.values.len() != input_dim || example.rejected.values.len() != input_dim {
            return Err(Error::Contract("examples disagree on feature dimension".to_string()));
        }
    }

    let mut pool: Vec<PairExample> = examples.to_vec();
    if !config.margin_enabled {
        for example in &mut pool {
            example.margin = 0.0;
        }
    }
    let loss_config = LossConfig {
        lambda: if config.reg_enabled { config.lambda } else { 0.0 },
        beta_upper: config.beta_upper,
        beta_lower: config.beta_lower,
    };
    let all_features: Vec<FeatureVector> = pool
        .iter()
        .flat_map(|e| [e.chosen.clone(), e.rejected.clone()])
        .collect();

    let mut params = init_params(config.seed, input_dim, config.hidden_dim);
    let mut optimizer = OptimizerState::new(config.optimizer, flatten_params(&params).len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle"));
    let mut history = TrainHistory::default();
    let mut step = 0usize;

    for _ in 0..config.epochs {
        pool.shuffle(&mut shuffle_rng);
        let mut start = 0;
        while start < pool.len() {
            let end = (start + config.batch_size).min(pool.len());
            let batch = &pool[start..end];
            start = end;
            step += 1;
            let (loss, grad) = combined_loss_and_grad(&params, batch, &loss_config)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    step,
                    pair_ids: batch.iter().map(|e| e.label.clone()).collect(),
                });
            }
            let mut theta = flatten_params(&params);
            optimizer.apply(&mut theta, &grad.flatten(), config.learning_rate);
            params = params_from_flat(&params, &theta);
            let (reward_mean, reward_std) = reward_stats(&params, &all_features)?;
            history.records.push(StepRecord {
                step,
                bt: loss.bt,
                reg: loss.reg,
                total: loss.total,
                reward_mean,
                reward_std,
            });
        }
    }
    Ok((params, history))
}
