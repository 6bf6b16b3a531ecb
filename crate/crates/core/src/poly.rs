//! Truncated bivariate polynomials up to total degree 3.
//!
//! Coefficients are stored as plain monomial coefficients, so
//! `p(u, v) = c[0] + c[1] u + c[2] v + c[3] u^2 + c[4] uv + c[5] v^2
//!          + c[6] u^3 + c[7] u^2 v + c[8] u v^2 + c[9] v^3`.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEGREE: usize = 3;

/// Exponents (i, j) of u^i v^j for each coefficient slot.
pub const MONOMIALS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

const NONE: usize = usize::MAX;

/// Slot of u^i v^j, `NONE` above the degree.
const SLOTS: [[usize; 4]; 4] = [[0, 2, 5, 9], [1, 4, 8, NONE], [3, 7, NONE, NONE], [6, NONE, NONE, NONE]];

fn slot(i: usize, j: usize) -> Option<usize> {
    if i > DEGREE || j > DEGREE {
        return None;
    }
    let k = SLOTS[i][j];
    (k != NONE).then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Poly3(pub [f64; 10]);

impl Poly3 {
    pub fn zero() -> Self {
        Self([0.0; 10])
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.0[0] = c;
        p
    }

    pub fn linear(a: f64, b: f64) -> Self {
        let mut p = Self::zero();
        p.0[1] = a;
        p.0[2] = b;
        p
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        slot(i, j).map_or(0.0, |k| self.0[k])
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if let Some(k) = slot(i, j) {
            self.0[k] = value;
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        MONOMIALS
            .iter()
            .zip(self.0.iter())
            .map(|(&(i, j), c)| c * u.powi(i as i32) * v.powi(j as i32))
            .sum()
    }

    /// Keeps only the homogeneous part of the given degree.
    pub fn homogeneous(&self, degree: usize) -> Self {
        let mut out = Self::zero();
        for (k, &(i, j)) in MONOMIALS.iter().enumerate() {
            if i + j == degree {
                out.0[k] = self.0[k];
            }
        }
        out
    }

    /// Drops the constant and linear terms.
    pub fn nonlinear(&self) -> Self {
        let mut out = *self;
        out.0[0] = 0.0;
        out.0[1] = 0.0;
        out.0[2] = 0.0;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Substitutes `u = du(s, t)`, `v = dv(s, t)`. Both inner series must
    /// have no constant term for the truncation to be exact.
    pub fn compose(&self, du: &Poly3, dv: &Poly3) -> Poly3 {
        let mut upow = [Poly3::constant(1.0); DEGREE + 1];
        let mut vpow = [Poly3::constant(1.0); DEGREE + 1];
        for n in 1..=DEGREE {
            upow[n] = upow[n - 1] * *du;
            vpow[n] = vpow[n - 1] * *dv;
        }
        let mut out = Poly3::zero();
        for (k, &(i, j)) in MONOMIALS.iter().enumerate() {
            let c = self.0[k];
            if c != 0.0 {
                let term = upow[i] * vpow[j];
                for (o, t) in out.0.iter_mut().zip(term.0) {
                    *o += c * t;
                }
            }
        }
        out
    }
}

impl Add for Poly3 {
    type Output = Poly3;
    fn add(self, rhs: Poly3) -> Poly3 {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        out
    }
}

impl Sub for Poly3 {
    type Output = Poly3;
    fn sub(self, rhs: Poly3) -> Poly3 {
        self + (-rhs)
    }
}

impl Neg for Poly3 {
    type Output = Poly3;
    fn neg(self) -> Poly3 {
        self.scale(-1.0)
    }
}

impl Mul for Poly3 {
    type Output = Poly3;
    fn mul(self, rhs: Poly3) -> Poly3 {
        let mut out = Poly3::zero();
        for (ka, &(ia, ja)) in MONOMIALS.iter().enumerate() {
            let a = self.0[ka];
            if a == 0.0 {
                continue;
            }
            for (kb, &(ib, jb)) in MONOMIALS.iter().enumerate() {
                if ia + ib + ja + jb > DEGREE {
                    break;
                }
                out.0[SLOTS[ia + ib][ja + jb]] += a * rhs.0[kb];
            }
        }
        out
    }
}
