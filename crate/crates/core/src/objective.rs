//! Training objectives and their exact analytic gradients.
//!
//! The ranking loss is Bradley–Terry with a rating-difference margin:
//! −log σ(r⁺ − r⁻ − m). A two-sided quadratic band penalty keeps raw
//! rewards inside [beta_lower, beta_upper]; the combined objective is
//! bt + lambda · reg, where reg averages over all 2N rewards in the
//! batch. An MSE regression objective and a central finite-difference
//! gradient checker round out the module.

use crate::error::{Error, Result};
use crate::scorer::{forward_parts, FeatureVector, ScorerParams};

/// log(1 + e^z) without overflow for large |z|.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Ranking loss −log σ(r_plus − r_minus − m); m must be ≥ 0.
pub fn bt_loss(r_plus: f64, r_minus: f64, m: f64) -> f64 {
    softplus(-(r_plus - r_minus - m))
}

/// Band penalty: max(r − beta_upper, 0)² + max(beta_lower − r, 0)².
pub fn reg_loss(r: f64, beta_upper: f64, beta_lower: f64) -> f64 {
    let over = (r - beta_upper).max(0.0);
    let under = (beta_lower - r).max(0.0);
    over * over + under * under
}

fn reg_grad(r: f64, beta_upper: f64, beta_lower: f64) -> f64 {
    2.0 * (r - beta_upper).max(0.0) - 2.0 * (beta_lower - r).max(0.0)
}

/// Scalarization weights for the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub beta_upper: f64,
    pub beta_lower: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 0.1,
            beta_upper: 3.0,
            beta_lower: -3.0,
        }
    }
}

/// Loss terms for one batch; total = bt + lambda · reg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub bt: f64,
    pub reg: f64,
    pub total: f64,
    pub lambda: f64,
    pub beta_upper: f64,
    pub beta_lower: f64,
}

/// ∂L/∂θ with the same shapes as `ScorerParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub out_bias: f64,
}

impl GradientSet {
    pub fn zeros(params: &ScorerParams) -> Self {
        GradientSet {
            hidden_weights: vec![0.0; params.hidden_dim * params.input_dim],
            hidden_bias: vec![0.0; params.hidden_dim],
            out_weights: vec![0.0; params.hidden_dim],
            out_bias: 0.0,
        }
    }

    /// Parameter order: hidden_weights row-major, hidden_bias,
    /// out_weights, out_bias. Must match `flatten_params`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = self.hidden_weights.clone();
        flat.extend_from_slice(&self.hidden_bias);
        flat.extend_from_slice(&self.out_weights);
        flat.push(self.out_bias);
        flat
    }
}

/// Flatten params in the same order as `GradientSet::flatten`.
pub fn flatten_params(params: &ScorerParams) -> Vec<f64> {
    let mut flat = params.hidden_weights.clone();
    flat.extend_from_slice(&params.hidden_bias);
    flat.extend_from_slice(&params.out_weights);
    flat.push(params.out_bias);
    flat
}

/// Rebuild params from a flat vector laid out as in `flatten_params`.
pub fn params_from_flat(template: &ScorerParams, flat: &[f64]) -> ScorerParams {
    let hw = template.hidden_dim * template.input_dim;
    let h = template.hidden_dim;
    assert_eq!(flat.len(), hw + 2 * h + 1, "flat parameter length mismatch");
    ScorerParams {
        input_dim: template.input_dim,
        hidden_dim: template.hidden_dim,
        hidden_weights: flat[..hw].to_vec(),
        hidden_bias: flat[hw..hw + h].to_vec(),
        out_weights: flat[hw + h..hw + 2 * h].to_vec(),
        out_bias: flat[hw + 2 * h],
    }
}

/// A featurized preference pair; `label` identifies it in diagnostics.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub chosen: FeatureVector,
    pub rejected: FeatureVector,
    pub margin: f64,
    pub label: String,
}

/// A featurized instance with a regression target.
#[derive(Debug, Clone)]
pub struct RatedExample {
    pub features: FeatureVector,
    pub target: f64,
}

fn check_feature_len(params: &ScorerParams, values: &[f64]) -> Result<()> {
    if values.len() != params.input_dim {
        return Err(Error::Contract(format!(
            "feature length {} does not match D={}",
            values.len(),
            params.input_dim
        )));
    }
    Ok(())
}

/// Add coeff · ∂r/∂θ for one forward pass to the running gradient.
fn accumulate(
    grad: &mut GradientSet,
    params: &ScorerParams,
    x: &[f64],
    activations: &[f64],
    coeff: f64,
) {
    let d = params.input_dim;
    grad.out_bias += coeff;
    for (i, &a) in activations.iter().enumerate() {
        grad.out_weights[i] += coeff * a;
        let back = coeff * params.out_weights[i] * (1.0 - a * a);
        grad.hidden_bias[i] += back;
        for (g, xj) in grad.hidden_weights[i * d..(i + 1) * d].iter_mut().zip(x) {
            *g += back * xj;
        }
    }
}

/// Mean ranking loss plus lambda times the mean band penalty over all
/// 2N rewards, with exact gradients through the scorer.
pub fn combined_loss_and_grad(
    params: &ScorerParams,
    batch: &[PairExample],
    config: &LossConfig,
) -> Result<(LossBreakdown, GradientSet)> {
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::Contract("loss requires a non-empty batch".to_string()));
    }
    let n = batch.len() as f64;
    let two_n = 2.0 * n;
    let mut grad = GradientSet::zeros(params);
    let mut bt_sum = 0.0;
    let mut reg_sum = 0.0;
    for pair in batch {
        check_feature_len(params, &pair.chosen.values)?;
        check_feature_len(params, &pair.rejected.values)?;
        let (r_plus, a_plus) = forward_parts(params, &pair.chosen.values);
        let (r_minus, a_minus) = forward_parts(params, &pair.rejected.values);
        let u = r_plus - r_minus - pair.margin;
        bt_sum += softplus(-u);
        reg_sum += reg_loss(r_plus, config.beta_upper, config.beta_lower)
            + reg_loss(r_minus, config.beta_upper, config.beta_lower);
        let bt_coeff = (sigmoid(u) - 1.0) / n;
        let reg_plus = config.lambda * reg_grad(r_plus, config.beta_upper, config.beta_lower) / two_n;
        let reg_minus =
            config.lambda * reg_grad(r_minus, config.beta_upper, config.beta_lower) / two_n;
        accumulate(&mut grad, params, &pair.chosen.values, &a_plus, bt_coeff + reg_plus);
        accumulate(&mut grad, params, &pair.rejected.values, &a_minus, -bt_coeff + reg_minus);
    }
    let bt = bt_sum / n;
    let reg = reg_sum / two_n;
    Ok((
        LossBreakdown {
            bt,
            reg,
            total: bt + config.lambda * reg,
            lambda: config.lambda,
            beta_upper: config.beta_upper,
            beta_lower: config.beta_lower,
        },
        grad,
    ))
}

/// Mean squared error against regression targets, with exact gradients.
pub fn mse_loss_and_grad(
    params: &ScorerParams,
    batch: &[RatedExample],
) -> Result<(f64, GradientSet)> {
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::Contract("loss requires a non-empty batch".to_string()));
    }
    let n = batch.len() as f64;
    let mut grad = GradientSet::zeros(params);
    let mut sum = 0.0;
    for item in batch {
        check_feature_len(params, &item.features.values)?;
        let (r, activations) = forward_parts(params, &item.features.values);
        let residual = r - item.target;
        sum += residual * residual;
        accumulate(
            &mut grad,
            params,
            &item.features.values,
            &activations,
            2.0 * residual / n,
        );
    }
    Ok((sum / n, grad))
}

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    /// Flat index (see `flatten_params`) of the worst parameter.
    pub worst_param: usize,
    pub passed: bool,
}

/// Compare an analytic gradient against central differences of an
/// arbitrary scalar loss. Relative error is |a−f| / max(1, |a|, |f|).
pub fn check_gradients<F>(
    params: &ScorerParams,
    loss_fn: F,
    analytic: &GradientSet,
    epsilon: f64,
    tolerance: f64,
) -> Result<FiniteDiffReport>
where
    F: Fn(&ScorerParams) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Contract(format!(
            "finite-difference epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let base = flatten_params(params);
    let grads = analytic.flatten();
    if grads.len() != base.len() {
        return Err(Error::Contract("gradient/parameter length mismatch".to_string()));
    }
    let mut max_rel_error = 0.0;
    let mut worst_param = 0;
    let mut flat = base.clone();
    for k in 0..base.len() {
        flat[k] = base[k] + epsilon;
        let up = loss_fn(&params_from_flat(params, &flat))?;
        flat[k] = base[k] - epsilon;
        let down = loss_fn(&params_from_flat(params, &flat))?;
        flat[k] = base[k];
        let fd = (up - down) / (2.0 * epsilon);
        let a = grads[k];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_param = k;
        }
    }
    Ok(FiniteDiffReport {
        max_rel_error,
        worst_param,
        passed: max_rel_error <= tolerance,
    })
}

/// Finite-difference check of `combined_loss_and_grad`.
pub fn finite_diff_check(
    params: &ScorerParams,
    batch: &[PairExample],
    config: &LossConfig,
    epsilon: f64,
    tolerance: f64,
) -> Result<FiniteDiffReport> {
    let (_, analytic) = combined_loss_and_grad(params, batch, config)?;
    check_gradients(
        params,
        |p| combined_loss_and_grad(p, batch, config).map(|(b, _)| b.total),
        &analytic,
        epsilon,
        tolerance,
    )
}

/// Finite-difference check of `mse_loss_and_grad`.
pub fn finite_diff_check_mse(
    params: &ScorerParams,
    batch: &[RatedExample],
    epsilon: f64,
    tolerance: f64,
) -> Result<FiniteDiffReport> {
    let (_, analytic) = mse_loss_and_grad(params, batch)?;
    check_gradients(
        params,
        |p| mse_loss_and_grad(p, batch).map(|(l, _)| l),
        &analytic,
        epsilon,
        tolerance,
    )
}
