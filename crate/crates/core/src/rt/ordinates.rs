use alloc::vec;
use alloc::vec::Vec;

use crate::math::{gauss_legendre, Vec3, FOUR_PI, PI};
use crate::scene::henyey_greenstein;
#[allow(unused_imports)]
use crate::prelude::*;

/// Product quadrature on the unit sphere: Gauss–Legendre in μ = cosθ times
/// uniform azimuth. Direction `i = m * n_phi + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordinates {
    pub n_mu: usize,
    pub n_phi: usize,
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl Ordinates {
    pub fn new(n_mu: usize, n_phi: usize) -> Self {
        let (mu, wmu) = gauss_legendre(n_mu);
        let mut dirs = Vec::with_capacity(n_mu * n_phi);
        let mut weights = Vec::with_capacity(n_mu * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for m in 0..n_mu {
            let s = (1.0 - mu[m] * mu[m]).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                dirs.push(Vec3::new(s * phi.cos(), s * phi.sin(), mu[m]));
                weights.push(wmu[m] * dphi);
            }
        }
        Ordinates {
            n_mu,
            n_phi,
            dirs,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Row-stochastic scattering matrix `Q` with `S_i = Σ_j Q_ij I_j`.
    ///
    /// Starts from `w_j p(ω_i·ω_j) / 4π` and rescales it symmetrically so that
    /// rows sum to one and `Σ_i w_i Q_ij = w_j`: the discrete operator then
    /// conserves scattered energy exactly.
    pub fn phase_matrix(&self, g: f64) -> Vec<f64> {
        let n = self.len();
        let w = &self.weights;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] =
                    w[i] * w[j] * henyey_greenstein(g, self.dirs[i].dot(self.dirs[j])) / FOUR_PI;
            }
        }
        let mut d = vec![1.0; n];
        for _ in 0..10_000 {
            let mut worst = 0.0f64;
            let md: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| m[i * n + j] * d[j]).sum::<f64>())
                .collect();
            for i in 0..n {
                let r = d[i] * md[i] / w[i];
                worst = worst.max((r - 1.0).abs());
                d[i] = (d[i] * w[i] / md[i]).sqrt();
            }
            if worst < 1e-14 {
                break;
            }
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = d[i] * m[i * n + j] * d[j] / w[i];
            }
        }
        // Exact unit row sums.
        for i in 0..n {
            let s: f64 = q[i * n..(i + 1) * n].iter().sum();
            q[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= s);
        }
        q
    }

    /// Weights `q_j(ω)` for in-scattering from the ordinates into an arbitrary
    /// direction `ω`, normalized to sum to one.
    pub fn gather_weights(&self, g: f64, omega: Vec3) -> Vec<f64> {
        let mut q: Vec<f64> = self
            .dirs
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * henyey_greenstein(g, omega.dot(*d)))
            .collect();
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
        q
    }

    /// Per-ordinate phase values for scattering of a collimated beam
    /// travelling along `omega0`, normalized so that `Σ_i w_i p_i = 1`.
    pub fn beam_phase(&self, g: f64, omega0: Vec3) -> Vec<f64> {
        let p: Vec<f64> = self
            .dirs
            .iter()
            .map(|d| henyey_greenstein(g, omega0.dot(*d)))
            .collect();
        let s: f64 = p.iter().zip(&self.weights).map(|(p, w)| p * w).sum();
        p.iter().map(|v| v / s).collect()
    }
}
