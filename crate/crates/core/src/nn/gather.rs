use alloc::vec::Vec;

use super::Real;

/// Sparse row-mixing operator. Output row `r` is the concatenation of
/// `blocks` segments, segment `b` being `Σ w · input[i]` over the entries of
/// `(r, b)`. Covers patch extraction, resampling, broadcasting and
/// zero padding (no entries).
#[derive(Debug, Clone, PartialEq)]
pub struct GatherPlan<T> {
    pub out_rows: usize,
    pub blocks: usize,
    pub in_rows: usize,
    offsets: Vec<u32>,
    index: Vec<u32>,
    weight: Vec<T>,
}

impl<T: Real> GatherPlan<T> {
    /// Starts an empty plan; fill it slot by slot in `(row, block)` order.
    pub fn builder(out_rows: usize, blocks: usize, in_rows: usize) -> GatherBuilder<T> {
        GatherBuilder {
            plan: GatherPlan {
                out_rows,
                blocks,
                in_rows,
                offsets: alloc::vec![0],
                index: Vec::new(),
                weight: Vec::new(),
            },
        }
    }

    /// Entries of slot `(row, block)`.
    pub fn slot(&self, r: usize, b: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let s = r * self.blocks + b;
        let (lo, hi) = (self.offsets[s] as usize, self.offsets[s + 1] as usize);
        self.index[lo..hi].iter().zip(&self.weight[lo..hi]).map(|(i, w)| (*i as usize, *w))
    }

    pub fn cast<U: Real>(&self) -> GatherPlan<U> {
        GatherPlan {
            out_rows: self.out_rows,
            blocks: self.blocks,
            in_rows: self.in_rows,
            offsets: self.offsets.clone(),
            index: self.index.clone(),
            weight: self.weight.iter().map(|w| U::from_f64(w.as_f64())).collect(),
        }
    }
}

pub struct GatherBuilder<T> {
    plan: GatherPlan<T>,
}

impl<T: Real> GatherBuilder<T> {
    pub fn push(&mut self, input_row: usize, w: T) {
        debug_assert!(input_row < self.plan.in_rows);
        self.plan.index.push(input_row as u32);
        self.plan.weight.push(w);
    }

    /// Closes the current slot.
    pub fn next_slot(&mut self) {
        self.plan.offsets.push(self.plan.index.len() as u32);
    }

    pub fn finish(self) -> GatherPlan<T> {
        assert_eq!(
            self.plan.offsets.len(),
            self.plan.out_rows * self.plan.blocks + 1,
            "gather plan slot count"
        );
        self.plan
    }
}
