use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::render_loss_grad;
use crate::error::{invalid, shape, Error, Result};
use crate::nn::AdamConfig;
use crate::rt::RTConfig;
use crate::scene::{AirProfile, CameraRig, ExtinctionField, ImageSet, MediumOptics};

/// Settings of the iterative reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsOptions {
    pub iterations: usize,
    /// Adam step size in km⁻¹.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Halve a rejected step up to this many times before stopping.
    pub max_backtracks: usize,
    /// Accept only steps that do not increase the loss.
    pub line_search: bool,
    /// Without line search: abort after this many consecutive increases.
    pub divergence_patience: usize,
    /// Stop once the relative loss drop over one step falls below this.
    pub rel_tol: f64,
}

impl Default for PhysicsOptions {
    fn default() -> Self {
        PhysicsOptions {
            iterations: 500,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_backtracks: 6,
            line_search: true,
            divergence_patience: 50,
            rel_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsResult {
    /// Lowest-loss field visited.
    pub field: ExtinctionField,
    /// Loss of the accepted iterate after each step, starting with the
    /// initial loss.
    pub losses: Vec<f64>,
}

/// Projected Adam descent on `Σ‖y − F(β)‖²` over the masked voxels, with
/// `β ≥ 0` enforced after every step and unmasked voxels held at zero.
#[allow(clippy::too_many_arguments)]
pub fn solve_physics(
    init: &ExtinctionField,
    target: &ImageSet,
    mask: &[bool],
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
    opts: &PhysicsOptions,
) -> Result<PhysicsResult> {
    if mask.len() != init.len() {
        return Err(shape("mask size differs from the grid"));
    }
    if !(opts.lr > 0.0) {
        return Err(invalid("learning rate must be positive"));
    }
    let mut beta: Vec<f64> = init
        .beta
        .iter()
        .zip(mask)
        .map(|(b, m)| if *m { *b } else { 0.0 })
        .collect();
    let field = |b: &[f64]| init.with_values(b.to_vec());
    let (mut loss, mut grad) = render_loss_grad(&field(&beta)?, optics, air, rig, cfg, target)?;
    let mut losses = alloc::vec![loss];
    let mut best = (loss, beta.clone());
    let adam = AdamConfig {
        lr: opts.lr,
        beta1: opts.beta1,
        beta2: opts.beta2,
        eps: opts.eps,
        weight_decay: 0.0,
    };
    // Adam is scale-free apart from eps; measure gradients relative to the
    // target energy so that eps stays negligible for dim scenes.
    let energy: f64 = target.data.iter().flatten().map(|y| y * y).sum();
    let gscale = if energy > 0.0 { 1.0 / energy } else { 1.0 };
    let n = beta.len();
    let mut m = alloc::vec![0.0; n];
    let mut v = alloc::vec![0.0; n];
    let mut rises = 0usize;
    let mut step = 0u64;
    for t in 1..=opts.iterations {
        step += 1;
        let g: Vec<f64> = grad.grad.iter().zip(mask).map(|(g, k)| if *k { g * gscale } else { 0.0 }).collect();
        let mut proposal = beta.clone();
        adam.update(step, &mut proposal, &mut m, &mut v, &g);
        let delta: Vec<f64> = proposal.iter().zip(&beta).map(|(p, b)| p - b).collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks.max(0) {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .zip(mask)
                .map(|((b, d), k)| if *k { (b + scale * d).max(0.0) } else { 0.0 })
                .collect();
            let (l, gr) = render_loss_grad(&field(&cand)?, optics, air, rig, cfg, target)?;
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss at step {t}")));
            }
            if !opts.line_search || l <= loss {
                accepted = Some((cand, l, gr));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, l, gr)) = accepted else {
            // Stale momentum can point uphill near a minimum: restart the
            // moments once, and stop if a fresh start cannot descend either.
            if step == 1 {
                break;
            }
            m.iter_mut().chain(v.iter_mut()).for_each(|x| *x = 0.0);
            step = 0;
            continue;
        };
        if l > loss {
            rises += 1;
            if rises >= opts.divergence_patience {
                return Err(Error::Diverged(format!(
                    "loss rose for {rises} consecutive steps: {:.6e} -> {:.6e} (best {:.6e})",
                    losses[losses.len() - rises],
                    l,
                    best.0
                )));
            }
        } else {
            rises = 0;
        }
        let drop = (loss - l) / loss.max(f64::MIN_POSITIVE);
        beta = cand;
        loss = l;
        grad = gr;
        losses.push(loss);
        if loss < best.0 {
            best = (loss, beta.clone());
        }
        if loss == 0.0 || (opts.rel_tol > 0.0 && drop >= 0.0 && drop < opts.rel_tol) {
            break;
        }
    }
    Ok(PhysicsResult {
        field: field(&best.1)?,
        losses,
    })
}
