use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{invalid, shape, Result};
#[allow(unused_imports)]
use crate::prelude::*;

/// Index of a block in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Which sub-network a block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Camera,
    Domain,
    Image,
    Decoder,
}

impl Group {
    pub fn is_encoder(self) -> bool {
        !matches!(self, Group::Decoder)
    }
}

/// Weight initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// He-normal with the given fan-in, times a gain.
    He { fan_in: usize, gain: f64 },
}

/// Named parameter matrix with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock<T> {
    pub name: String,
    pub group: Group,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

/// Adam hyperparameters; weight decay is decoupled (applied to the
/// parameters directly, scaled by the learning rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    /// Bias-corrected Adam update of one vector in place, `t` being the
    /// 1-based step count after this update.
    pub fn update<T: Real>(&self, t: u64, theta: &mut [T], m: &mut [T], v: &mut [T], grad: &[T]) {
        let b1t = 1.0 - self.beta1.powi(t as i32);
        let b2t = 1.0 - self.beta2.powi(t as i32);
        for i in 0..theta.len() {
            let g = grad[i].as_f64();
            let mi = self.beta1 * m[i].as_f64() + (1.0 - self.beta1) * g;
            let vi = self.beta2 * v[i].as_f64() + (1.0 - self.beta2) * g * g;
            m[i] = T::from_f64(mi);
            v[i] = T::from_f64(vi);
            let mut th = theta[i].as_f64();
            th -= self.lr * self.weight_decay * th;
            th -= self.lr * (mi / b1t) / ((vi / b2t).sqrt() + self.eps);
            theta[i] = T::from_f64(th);
        }
    }
}

/// Ordered collection of named parameter blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    blocks: Vec<ParamBlock<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { blocks: Vec::new() }
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        group: Group,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> ParamId {
        let n = rows * cols;
        let data = match init {
            Init::Zeros => vec![T::zero(); n],
            Init::He { fan_in, gain } => {
                let sd = gain * (2.0 / fan_in.max(1) as f64).sqrt();
                let d = Normal::new(0.0, sd).expect("finite std");
                (0..n).map(|_| T::from_f64(d.sample(rng))).collect()
            }
        };
        self.push_block(name, group, rows, cols, data)
    }

    pub fn push_block(&mut self, name: &str, group: Group, rows: usize, cols: usize, data: Vec<T>) -> ParamId {
        assert_eq!(data.len(), rows * cols, "parameter block size");
        let n = data.len();
        self.blocks.push(ParamBlock {
            name: String::from(name),
            group,
            rows,
            cols,
            data,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        });
        ParamId(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[ParamBlock<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock<T>] {
        &mut self.blocks
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock<T> {
        &self.blocks[id.0]
    }

    pub fn block_mut(&mut self, id: ParamId) -> &mut ParamBlock<T> {
        &mut self.blocks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    /// Same parameters and moments in another scalar type.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let c = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        ParamStore {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    group: b.group,
                    rows: b.rows,
                    cols: b.cols,
                    data: c(&b.data),
                    m: c(&b.m),
                    v: c(&b.v),
                    step: b.step,
                })
                .collect(),
        }
    }

    /// One Adam step on every block whose group passes `select`. `grads`
    /// holds one vector per block.
    pub fn adam_step(&mut self, grads: &[Vec<T>], cfg: &AdamConfig, select: impl Fn(Group) -> bool) -> Result<()> {
        if grads.len() != self.blocks.len() {
            return Err(shape(format!("{} gradients for {} blocks", grads.len(), self.blocks.len())));
        }
        for (b, g) in self.blocks.iter().zip(grads) {
            if g.len() != b.data.len() {
                return Err(shape(format!("gradient for '{}' has wrong length", b.name)));
            }
            if select(b.group) && g.iter().any(|x| !x.is_finite()) {
                return Err(crate::Error::NonFinite(format!("gradient of '{}'", b.name)));
            }
        }
        for (b, g) in self.blocks.iter_mut().zip(grads) {
            if !select(b.group) {
                continue;
            }
            b.step += 1;
            cfg.update(b.step, &mut b.data, &mut b.m, &mut b.v, g);
        }
        Ok(())
    }

    /// Clears the Adam moments and step count of every block whose group
    /// passes `select`.
    pub fn reset_moments(&mut self, select: impl Fn(Group) -> bool) {
        for b in self.blocks.iter_mut().filter(|b| select(b.group)) {
            b.m.iter_mut().for_each(|x| *x = T::zero());
            b.v.iter_mut().for_each(|x| *x = T::zero());
            b.step = 0;
        }
    }

    /// Copies the parameters (not moments) of every block of `group` from
    /// `other`, which must have the same layout.
    pub fn copy_group_from(&mut self, other: &ParamStore<T>, group: Group) -> Result<()> {
        if other.blocks.len() != self.blocks.len() {
            return Err(invalid("parameter stores differ in layout"));
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            if a.group == group {
                if a.data.len() != b.data.len() {
                    return Err(invalid(format!("block '{}' differs in size", a.name)));
                }
                a.data.clone_from(&b.data);
            }
        }
        Ok(())
    }

    /// Flat copy of all parameter values in block order.
    pub fn flat_values(&self) -> Vec<T> {
        self.blocks.iter().flat_map(|b| b.data.iter().copied()).collect()
    }

    /// Parameter values of one group in block order.
    pub fn group_values(&self, group: Group) -> Vec<T> {
        self.blocks
            .iter()
            .filter(|b| b.group == group)
            .flat_map(|b| b.data.iter().copied())
            .collect()
    }
}
