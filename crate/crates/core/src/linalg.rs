//! Small dense complex algebra for the 2×2 subspace blocks.
//!
//! Basis ordering inside a block is `(|g,n⟩, |e,n⟩)`: index 0 is the qubit
//! ground state, index 1 the excited state.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Two-component state `[c_g, c_e]`.
pub type Vec2 = [C64; 2];

pub type CMatrix = DMatrix<C64>;

/// Dense 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn zero() -> Self {
        Self([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self([[a, b], [c, d]])
    }

    /// Hermitian matrix from its real diagonal and upper off-diagonal entry.
    pub fn hermitian(gg: f64, ee: f64, ge: C64) -> Self {
        Self([[C64::new(gg, 0.0), ge], [ge.conj(), C64::new(ee, 0.0)]])
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[r][c]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Self([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    #[inline]
    pub fn apply(&self, v: &Vec2) -> Vec2 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Column `c` as a state vector.
    pub fn column(&self, c: usize) -> Vec2 {
        [self.0[0][c], self.0[1][c]]
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self - Mat2::identity()).max_abs()
    }

    pub(crate) fn write_packed(&self, out: &mut [f64]) {
        for (k, z) in self.0.iter().flatten().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
    }

    pub(crate) fn from_packed(y: &[f64]) -> Self {
        let c = |k: usize| C64::new(y[2 * k], y[2 * k + 1]);
        Self([[c(0), c(1)], [c(2), c(3)]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

pub fn inner(a: &Vec2, b: &Vec2) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn norm_sqr(a: &Vec2) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr()
}

/// Direct sum of 2×2 blocks into a `2N × 2N` matrix.
pub fn direct_sum(blocks: &[Mat2]) -> CMatrix {
    let dim = 2 * blocks.len();
    let mut out = CMatrix::zeros(dim, dim);
    for (n, b) in blocks.iter().enumerate() {
        for r in 0..2 {
            for c in 0..2 {
                out[(2 * n + r, 2 * n + c)] = b.get(r, c);
            }
        }
    }
    out
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// `‖A‖_max` for a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
