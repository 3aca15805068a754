use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::probct::PosteriorSpec;
use crate::rt::{log_likelihood, render, RTConfig};
use crate::scene::{AirProfile, CameraRig, ExtinctionField, ImageSet, ImageUnits, MediumOptics, SensorSpec};

/// Hypotheses `0, Δβ/2, …, QΔβ` resolving half a posterior bin.
pub fn beta_grid(spec: &PosteriorSpec) -> Vec<f64> {
    (0..=2 * spec.q).map(|i| i as f64 * spec.dbeta / 2.0).collect()
}

/// Noiseless renders of one scene with a single voxel swept over a list of
/// extinction hypotheses, reusable for any number of observations.
#[derive(Debug, Clone)]
pub struct BayesOracle {
    pub betas: Vec<f64>,
    renders: Vec<ImageSet>,
}

impl BayesOracle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        base: &ExtinctionField,
        voxel: usize,
        rig: &CameraRig,
        optics: &MediumOptics,
        air: &AirProfile,
        cfg: &RTConfig,
        betas: Vec<f64>,
    ) -> Result<Self> {
        if voxel >= base.len() {
            return Err(invalid("variable voxel lies outside the grid"));
        }
        if betas.is_empty() || betas.windows(2).any(|w| !(w[1] > w[0])) || betas[0] < 0.0 {
            return Err(invalid("hypotheses must be non-negative and strictly increasing"));
        }
        let renders = betas
            .iter()
            .map(|&b| {
                let mut f = base.clone();
                f.beta[voxel] = b;
                render(&f, optics, air, rig, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BayesOracle { betas, renders })
    }

    /// Posterior density on `betas`, normalized by the trapezoid rule.
    /// Each hypothesis is exposed like a real capture: its brightest pixel
    /// maps to the sensor's peak electrons. `None` means no data.
    pub fn posterior(&self, prior: &dyn Fn(f64) -> f64, observed: Option<&ImageSet>, sensor: &SensorSpec) -> Result<Vec<f64>> {
        let mut logp: Vec<f64> = self.betas.iter().map(|&b| prior(b).ln()).collect();
        if let Some(obs) = observed {
            if obs.units != ImageUnits::Graylevel {
                return Err(invalid("observations must be graylevel images"));
            }
            for (lp, r) in logp.iter_mut().zip(&self.renders) {
                if *lp == f64::NEG_INFINITY {
                    continue;
                }
                let m = r.max();
                let k = if m > 0.0 { sensor.peak_electrons() / m } else { 0.0 };
                let mut e = r.clone();
                e.data.iter_mut().flatten().for_each(|v| *v *= k);
                *lp += log_likelihood(obs, &e, sensor)?;
            }
        }
        normalize_log_density(&self.betas, &logp)
    }
}

fn normalize_log_density(x: &[f64], logp: &[f64]) -> Result<Vec<f64>> {
    let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(invalid("posterior vanishes on every hypothesis"));
    }
    let mut p: Vec<f64> = logp.iter().map(|l| (l - m).exp()).collect();
    let z = trapezoid(x, &p);
    if !(z > 0.0) {
        // A single hypothesis carries all mass.
        return Err(invalid("posterior mass is zero under the trapezoid rule"));
    }
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Brute-force `P(β|y) ∝ P(y|β) P(β)` for one unknown voxel on the standard
/// hypothesis grid; one render per hypothesis.
#[allow(clippy::too_many_arguments)]
pub fn bayes_posterior(
    base: &ExtinctionField,
    voxel: usize,
    prior: &dyn Fn(f64) -> f64,
    observed: Option<(&ImageSet, &CameraRig)>,
    sensor: &SensorSpec,
    optics: &MediumOptics,
    air: &AirProfile,
    cfg: &RTConfig,
    spec: &PosteriorSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let betas = beta_grid(spec);
    match observed {
        None => {
            let lp: Vec<f64> = betas.iter().map(|&b| prior(b).ln()).collect();
            let p = normalize_log_density(&betas, &lp)?;
            Ok((betas, p))
        }
        Some((obs, rig)) => {
            let o = BayesOracle::new(base, voxel, rig, optics, air, cfg, betas)?;
            let p = o.posterior(prior, Some(obs), sensor)?;
            Ok((o.betas, p))
        }
    }
}

/// Bin probabilities `∫ p dβ` over `[qΔβ, (q+1)Δβ)` from a piecewise-linear
/// density on increasing nodes; segments are assigned by their midpoint.
pub fn density_to_bins(betas: &[f64], density: &[f64], spec: &PosteriorSpec) -> Vec<f64> {
    let mut out = vec![0.0; spec.q];
    for (x, y) in betas.windows(2).zip(density.windows(2)) {
        let mid = 0.5 * (x[0] + x[1]);
        out[spec.bin_of(mid)] += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
    }
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// `KL(p ‖ q) = Σ p ln(p/q)` in nats; infinite when `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}
