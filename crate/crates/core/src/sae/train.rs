//! Loss, analytic gradients and the optimizer step.
//!
//! With inputs `x`, targets `y` (equal to `x` for a plain SAE) and batch
//! size `B`:
//!
//! ```text
//! recon = sum_p w_p * mean_b ||W_dec[:, :p] z_hat[:p] + b_dec - y||^2
//! aux   = mean_b ||W_dec z_aux - (y - x_hat)||^2
//! total = recon + aux_coeff * aux (+ l1_coeff * mean_b ||z_hat||_1 for ReLU)
//! ```
//!
//! The matryoshka variant averages over its prefixes with equal weights;
//! every other variant has the single prefix `m`. `z_aux` keeps the top
//! `aux_k` pre-activations among dead latents, and the residual target
//! `y - x_hat` is held constant when differentiating the auxiliary term.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{SaeConfig, SaeVariant};
use super::error::{Result, SaeError};
use super::model::SaeModel;
use super::sparsify::{sparsify, top_k_indices, Selection};
use crate::optim::{adam_update, Moments};

/// Loss components of one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub aux: f64,
    pub l1: f64,
    pub total: f64,
    /// Fraction of target variance left unexplained by the full reconstruction.
    pub fvu: f64,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub w_dec: Array2<f64>,
    pub b_dec: Array1<f64>,
}

/// Everything computed by one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Pass {
    pub loss: LossBreakdown,
    pub grads: Gradients,
    pub selection: Selection,
    /// Latents chosen by the auxiliary loss, per row.
    pub aux_active: Vec<Vec<usize>>,
    pub max_abs_latent: f64,
}

fn fvu(recon: &Array2<f64>, target: ArrayView2<f64>) -> f64 {
    let resid: f64 = (recon - &target).iter().map(|v| v * v).sum();
    let mean = target.mean_axis(Axis(0)).expect("nonempty batch");
    let var: f64 = (&target - &mean.insert_axis(Axis(0))).iter().map(|v| v * v).sum();
    if var > 0.0 {
        resid / var
    } else if resid == 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Fraction of variance in `y` left unexplained by the model's
/// reconstruction of `x` (rowwise sparsification).
pub fn reconstruction_fvu(model: &SaeModel, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(SaeError::EmptyBatch);
    }
    let codes = model.codes(x)?.codes;
    let recon = model.decode_batch(codes.view())?;
    Ok(fvu(&recon, y))
}

/// Forward and backward pass for a batch under the given dead-latent mask.
pub fn loss_and_grad(model: &SaeModel, x: ArrayView2<f64>, y: ArrayView2<f64>, dead: &[bool]) -> Result<Pass> {
    let cfg = &model.config;
    let b = x.nrows();
    if b == 0 {
        return Err(SaeError::EmptyBatch);
    }
    if y.nrows() != b {
        return Err(SaeError::Dimension {
            what: "target rows",
            expected: b,
            found: y.nrows(),
        });
    }
    if y.ncols() != model.output_dim() {
        return Err(SaeError::Dimension {
            what: "SAE target",
            expected: model.output_dim(),
            found: y.ncols(),
        });
    }
    let m = model.latent_dim();
    let bf = b as f64;

    model.check_input(x.ncols())?;
    let u = if cfg.uses_pre_bias() {
        &x - &model.b_dec.view().insert_axis(Axis(0))
    } else {
        x.to_owned()
    };
    let z = u.dot(&model.w_enc.t()) + &model.b_enc.view().insert_axis(Axis(0));
    let selection = sparsify(z.view(), cfg);
    let codes = &selection.codes;

    let mut g_wdec = Array2::<f64>::zeros(model.w_dec.raw_dim());
    let mut g_bdec = Array1::<f64>::zeros(model.output_dim());
    let mut g_codes = Array2::<f64>::zeros((b, m));

    // Nested reconstructions; the last prefix is the full model.
    let prefixes = cfg.prefixes();
    let weight = 1.0 / prefixes.len() as f64;
    let mut recon = 0.0;
    let mut full = Array2::<f64>::zeros((b, model.output_dim()));
    for &p in &prefixes {
        let dec_p = model.w_dec.slice(s![.., ..p]);
        let codes_p = codes.slice(s![.., ..p]);
        let x_hat = codes_p.dot(&dec_p.t()) + &model.b_dec.view().insert_axis(Axis(0));
        let r = &x_hat - &y;
        recon += weight * r.iter().map(|v| v * v).sum::<f64>() / bf;
        let g = r * (2.0 * weight / bf);
        {
            let mut gw = g_wdec.slice_mut(s![.., ..p]);
            gw += &g.t().dot(&codes_p);
        }
        g_bdec += &g.sum_axis(Axis(0));
        {
            let mut gc = g_codes.slice_mut(s![.., ..p]);
            gc += &g.dot(&dec_p);
        }
        if p == m {
            full = x_hat;
        }
    }

    // Only selected latents pass gradient back to the pre-activations.
    let mut g_z = Array2::<f64>::zeros((b, m));
    for (row, idx) in selection.active.iter().enumerate() {
        for &i in idx {
            g_z[[row, i]] = g_codes[[row, i]];
        }
    }

    let mut l1 = 0.0;
    if cfg.variant == SaeVariant::Relu && cfg.l1_coeff > 0.0 {
        l1 = cfg.l1_coeff * codes.iter().map(|v| v.abs()).sum::<f64>() / bf;
        for (row, idx) in selection.active.iter().enumerate() {
            for &i in idx {
                g_z[[row, i]] += cfg.l1_coeff * codes[[row, i]].signum() / bf;
            }
        }
    }

    // Dead latents try to explain what the live ones missed.
    let dead_idx: Vec<usize> = (0..m).filter(|&i| dead.get(i).copied().unwrap_or(false)).collect();
    let aux_k = cfg.effective_aux_k().min(dead_idx.len());
    let mut aux = 0.0;
    let mut aux_active = vec![Vec::new(); b];
    if aux_k > 0 {
        let residual = &y - &full;
        let mut aux_codes = Array2::<f64>::zeros((b, m));
        for row in 0..b {
            let zr = z.row(row).to_vec();
            let picked = top_k_indices(&zr, dead_idx.iter().copied(), aux_k);
            for &i in &picked {
                aux_codes[[row, i]] = zr[i];
            }
            aux_active[row] = picked;
        }
        let err = aux_codes.dot(&model.w_dec.t()) - &residual;
        aux = err.iter().map(|v| v * v).sum::<f64>() / bf;
        let g = err * (2.0 * cfg.aux_coeff / bf);
        g_wdec += &g.t().dot(&aux_codes);
        let g_aux_codes = g.dot(&model.w_dec);
        for (row, idx) in aux_active.iter().enumerate() {
            for &i in idx {
                g_z[[row, i]] += g_aux_codes[[row, i]];
            }
        }
    }

    let g_wenc = g_z.t().dot(&u);
    let g_benc = g_z.sum_axis(Axis(0));
    if cfg.uses_pre_bias() {
        let g_u = g_z.dot(&model.w_enc);
        g_bdec -= &g_u.sum_axis(Axis(0));
    }

    let max_abs_latent = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let total = recon + cfg.aux_coeff * aux + l1;
    Ok(Pass {
        loss: LossBreakdown {
            recon,
            aux,
            l1,
            total,
            fvu: fvu(&full, y),
        },
        grads: Gradients {
            w_enc: g_wenc,
            b_enc: g_benc,
            w_dec: g_wdec,
            b_dec: g_bdec,
        },
        selection,
        aux_active,
        max_abs_latent,
    })
}

/// Adam moments for every parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub w_enc: Moments,
    pub b_enc: Moments,
    pub w_dec: Moments,
    pub b_dec: Moments,
}

impl OptimizerState {
    pub fn for_model(model: &SaeModel) -> Self {
        Self {
            step: 0,
            w_enc: Moments::zeros(model.w_enc.len()),
            b_enc: Moments::zeros(model.b_enc.len()),
            w_dec: Moments::zeros(model.w_dec.len()),
            b_dec: Moments::zeros(model.b_dec.len()),
        }
    }
}

/// Statistics of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub recon_loss: f64,
    pub aux_loss: f64,
    pub total_loss: f64,
    pub fvu: f64,
    pub dead_latents: usize,
    /// Mean number of active latents per row.
    pub l0: f64,
}

/// Per-step history of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SaeTrainReport {
    pub steps: Vec<StepReport>,
}

impl SaeTrainReport {
    pub fn last(&self) -> Option<&StepReport> {
        self.steps.last()
    }

    /// Mean FVU over the last `n` steps.
    pub fn trailing_fvu(&self, n: usize) -> Option<f64> {
        let tail = &self.steps[self.steps.len().saturating_sub(n)..];
        (!tail.is_empty()).then(|| tail.iter().map(|s| s.fvu).sum::<f64>() / tail.len() as f64)
    }
}

fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are contiguous")
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("gradients are contiguous")
}

/// One optimizer update on `(x, y)`; pass `y = None` for plain reconstruction.
pub fn train_step(
    model: &mut SaeModel,
    state: &mut OptimizerState,
    x: ArrayView2<f64>,
    y: Option<ArrayView2<f64>>,
) -> Result<StepReport> {
    let y = y.unwrap_or(x);
    let dead = model.dead_mask();
    let pass = loss_and_grad(model, x, y, &dead)?;
    let step = state.step + 1;
    if !pass.loss.total.is_finite() {
        return Err(SaeError::NonFinite {
            step,
            recon: pass.loss.recon,
            aux: pass.loss.aux,
            max_abs_latent: pass.max_abs_latent,
            dead_latents: dead.iter().filter(|&&d| d).count(),
        });
    }

    let opt = model.config.optimizer;
    let Gradients {
        w_enc,
        b_enc,
        w_dec,
        b_dec,
    } = &pass.grads;
    adam_update(&opt, step, flat_mut(&mut model.w_enc), flat(w_enc), &mut state.w_enc);
    adam_update(&opt, step, flat_mut(&mut model.b_enc), flat(b_enc), &mut state.b_enc);
    adam_update(&opt, step, flat_mut(&mut model.w_dec), flat(w_dec), &mut state.w_dec);
    adam_update(&opt, step, flat_mut(&mut model.b_dec), flat(b_dec), &mut state.b_dec);
    model.normalize_decoder();
    state.step = step;

    let tokens = x.nrows() as u64;
    let mut fired = vec![false; model.latent_dim()];
    for idx in &pass.selection.active {
        for &i in idx {
            fired[i] = true;
        }
    }
    for (last, fired) in model.last_fired.iter_mut().zip(fired) {
        *last = if fired { 0 } else { last.saturating_add(tokens) };
    }

    Ok(StepReport {
        step,
        recon_loss: pass.loss.recon,
        aux_loss: pass.loss.aux,
        total_loss: pass.loss.total,
        fvu: pass.loss.fvu,
        dead_latents: model.dead_count(),
        l0: pass.selection.l0(),
    })
}

/// Model, optimizer state and accumulated report.
#[derive(Debug, Clone)]
pub struct SaeTrainer {
    pub model: SaeModel,
    pub state: OptimizerState,
    pub report: SaeTrainReport,
}

impl SaeTrainer {
    pub fn new(config: SaeConfig) -> Result<Self> {
        let model = SaeModel::init(config)?;
        Ok(Self::from_model(model))
    }

    pub fn from_model(model: SaeModel) -> Self {
        let state = OptimizerState::for_model(&model);
        Self {
            model,
            state,
            report: SaeTrainReport::default(),
        }
    }

    pub fn step(&mut self, x: ArrayView2<f64>, y: Option<ArrayView2<f64>>) -> Result<StepReport> {
        let r = train_step(&mut self.model, &mut self.state, x, y)?;
        self.report.steps.push(r);
        Ok(r)
    }
}
