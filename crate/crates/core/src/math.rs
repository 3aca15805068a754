//! Small geometric and numerical helpers shared across modules.

use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use crate::prelude::*;

pub const PI: f64 = core::f64::consts::PI;
pub const FOUR_PI: f64 = 4.0 * PI;

/// A 3-vector of `f64`; used for points [m] and directions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `(1 - exp(-s*len)) / s`: the integral of `exp(-s t)` over `[0, len]`.
/// Valid for any sign of `s`, exact limit `len` at `s = 0`.
#[inline]
pub fn attenuated_length(s: f64, len: f64) -> f64 {
    let x = s * len;
    if x.abs() < 1e-4 {
        len * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        -(-x).exp_m1() / s
    }
}

/// Derivative of [`attenuated_length`] with respect to `s`.
#[inline]
pub fn attenuated_length_ds(s: f64, len: f64) -> f64 {
    let x = s * len;
    if x.abs() < 1e-4 {
        len * len * (-0.5 + x / 3.0 - x * x / 8.0 + x * x * x / 30.0)
    } else {
        let e = (-x).exp();
        (len * e * s + (-x).exp_m1()) / (s * s)
    }
}

/// Row-major `c = a (m x k) * b (k x n) + beta * c` in f64.
pub fn dgemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths checked above; strides describe dense row-major storage.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n}");
            // exact for degree 2n-1
            let deg = 2 * n - 1;
            let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((integral - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn attenuated_length_matches_closed_form_and_derivative() {
        for &s in &[-0.3, -1e-6, 0.0, 1e-7, 1e-5, 0.02, 0.5, 3.0] {
            let len = 2.5;
            // Gauss-Legendre of exp(-s t) on [0, len]; no cancellation at small s.
            let (x, w) = gauss_legendre(16);
            let exact: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * 0.5 * len * (-s * 0.5 * len * (xi + 1.0)).exp())
                .sum();
            assert!((attenuated_length(s, len) - exact).abs() < 1e-12 * len.max(exact.abs()));
            let h = 1e-6;
            let fd = (attenuated_length(s + h, len) - attenuated_length(s - h, len)) / (2.0 * h);
            assert!((attenuated_length_ds(s, len) - fd).abs() < 1e-6, "s={s}");
        }
    }
}
