//! One-dimensional self-concordant barriers, evaluated from explicitly
//! tracked slacks so that iterates a few ulps from a bound keep full
//! relative accuracy.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::RowVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierKind {
    /// `−log(x − l)`.
    LogLower,
    /// `−log(u − x)`.
    LogUpper,
    /// `−log cos(a·x + b)` with `a = π/(u−l)`, `b = −(π/2)(u+l)/(u−l)`.
    Trigonometric { a: f64, b: f64 },
}

/// Per-row barriers chosen from the finiteness pattern of `(l, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierFamily {
    pub kinds: Vec<BarrierKind>,
    pub l: RowVector,
    pub u: RowVector,
}

/// Distances to the lower and upper bounds; `+∞` where a bound is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Slacks {
    pub lo: RowVector,
    pub hi: RowVector,
}

impl Slacks {
    pub fn of(bf: &BarrierFamily, x: &RowVector) -> Self {
        let lo = DVector::from_fn(x.len(), |i, _| if bf.l[i].is_finite() { x[i] - bf.l[i] } else { f64::INFINITY });
        let hi = DVector::from_fn(x.len(), |i, _| if bf.u[i].is_finite() { bf.u[i] - x[i] } else { f64::INFINITY });
        Self { lo, hi }
    }

    /// Moves both slacks along a step `dx` of the iterate.
    pub fn step(&self, dx: &RowVector) -> Self {
        Self { lo: &self.lo + dx, hi: &self.hi - dx }
    }

    pub fn min(&self) -> f64 {
        self.lo.iter().chain(self.hi.iter()).cloned().fold(f64::INFINITY, f64::min)
    }

    /// First row whose slack is not above `floor`.
    pub fn contact(&self, floor: f64) -> Option<usize> {
        (0..self.lo.len()).find(|&i| !(self.lo[i] > floor) || !(self.hi[i] > floor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl BarrierFamily {
    pub fn new(l: RowVector, u: RowVector) -> Result<Self> {
        if l.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: l.len(), got: u.len() });
        }
        let mut kinds = Vec::with_capacity(l.len());
        for i in 0..l.len() {
            let (lo, hi) = (l[i], u[i]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidLp(format!("bad bounds on row {i}")));
            }
            kinds.push(match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    if !(lo < hi) {
                        return Err(Error::InvalidLp(format!("empty box on row {i}")));
                    }
                    let a = PI / (hi - lo);
                    BarrierKind::Trigonometric { a, b: -FRAC_PI_2 * (hi + lo) / (hi - lo) }
                }
                (true, false) => BarrierKind::LogLower,
                (false, true) => BarrierKind::LogUpper,
                (false, false) => return Err(Error::InvalidLp(format!("row {i} has no finite bound"))),
            });
        }
        Ok(Self { kinds, l, u })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Self-concordance parameter of the sum; every row contributes 1.
    pub fn nu(&self) -> f64 {
        self.kinds.len() as f64
    }

    /// `φ`, `φ′` or `φ″` coordinate-wise. Fails with `BoundaryContact` when a
    /// slack is at most `contact`.
    pub fn eval(&self, s: &Slacks, order: Order, contact: f64) -> Result<RowVector> {
        if let Some(i) = s.contact(contact) {
            return Err(Error::BoundaryContact(i));
        }
        Ok(DVector::from_fn(self.len(), |i, _| match self.kinds[i] {
            BarrierKind::LogLower => {
                let d = s.lo[i];
                match order {
                    Order::Value => -d.ln(),
                    Order::First => -1.0 / d,
                    Order::Second => 1.0 / (d * d),
                }
            }
            BarrierKind::LogUpper => {
                let d = s.hi[i];
                match order {
                    Order::Value => -d.ln(),
                    Order::First => 1.0 / d,
                    Order::Second => 1.0 / (d * d),
                }
            }
            BarrierKind::Trigonometric { a, .. } => {
                // a·x + b = a·s_lo − π/2 = π/2 − a·s_hi; use the nearer bound.
                let (theta, sign) = if s.lo[i] <= s.hi[i] { (a * s.lo[i], -1.0) } else { (a * s.hi[i], 1.0) };
                let cos = theta.sin();
                match order {
                    Order::Value => -cos.ln(),
                    Order::First => sign * a * theta.cos() / cos,
                    Order::Second => a * a / (cos * cos),
                }
            }
        }))
    }
}

/// `φ`, `φ′` or `φ″` at `x` (order 0, 1 or 2), measuring slacks from `x`.
pub fn barrier_derivs(bf: &BarrierFamily, x: &RowVector, order: u8, contact: f64) -> Result<RowVector> {
    let order = match order {
        0 => Order::Value,
        1 => Order::First,
        2 => Order::Second,
        o => return Err(Error::DomainError(format!("barrier derivative of order {o}"))),
    };
    bf.eval(&Slacks::of(bf, x), order, contact)
}
