//! Distributed linear primitives over row- and column-indexed vectors.
//!
//! Results that cross the network are quantized to the [`PrecisionBudget`]
//! grid and every call appends exactly one ledger entry. Block variants
//! process `k` vectors at once and charge `k` times the single-vector cost in
//! that one entry.

mod dd;
mod laplacian;
mod matrix;
mod precision;
mod projection;

pub use laplacian::{laplacian_solve, laplacian_solve_block, solve_spd, NormalFactor};
pub use matrix::{numerical_rank, ConstraintMatrix};
pub use precision::PrecisionBudget;
pub use projection::{null_projection_block, weighted_projection, Projected};

use nalgebra::{DMatrix, DVector};

use crate::congest::Sim;
use crate::error::{Error, Result};

/// One scalar per LP row (edge-indexed for flow LPs).
pub type RowVector = DVector<f64>;
/// One scalar per LP column (node-indexed for flow LPs).
pub type ColVector = DVector<f64>;

fn charge_matvec(sim: &mut Sim, op: &'static str, k: usize) {
    let rounds = sim.matvec_rounds() * k as u64;
    let edges = sim.net.edge_count().max(1) as u64;
    let per = sim.net.chunks(u64::from(sim.budget.value_bits));
    sim.ledger.charge(
        op,
        rounds,
        2 * edges * per * k as u64,
        2 * edges * u64::from(sim.budget.value_bits) * k as u64,
    );
}

/// `Aᵀx`.
pub fn matvec_at(sim: &mut Sim, a: &ConstraintMatrix, x: &RowVector) -> Result<ColVector> {
    if x.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: x.len() });
    }
    let mut y = a.dense().tr_mul(x);
    sim.budget.quantize_in_place(y.iter_mut());
    charge_matvec(sim, "matvec_at", 1);
    Ok(y)
}

/// `A y`.
pub fn matvec_a(sim: &mut Sim, a: &ConstraintMatrix, y: &ColVector) -> Result<RowVector> {
    if y.len() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: y.len() });
    }
    let mut x = a.dense() * y;
    sim.budget.quantize_in_place(x.iter_mut());
    charge_matvec(sim, "matvec_a", 1);
    Ok(x)
}

/// `Aᵀ X` for an m × k block.
pub fn matvec_at_block(sim: &mut Sim, a: &ConstraintMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: x.nrows() });
    }
    let mut y = a.dense().tr_mul(x);
    sim.budget.quantize_in_place(y.iter_mut());
    charge_matvec(sim, "matvec_at", x.ncols());
    Ok(y)
}

/// `A Y` for an n × k block.
pub fn matvec_a_block(sim: &mut Sim, a: &ConstraintMatrix, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: y.nrows() });
    }
    let mut x = a.dense() * y;
    sim.budget.quantize_in_place(x.iter_mut());
    charge_matvec(sim, "matvec_a", y.ncols());
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagMode {
    /// `w ∘ x`
    Multiply,
    /// `x / w`
    Divide,
    /// `√x`
    Sqrt,
    /// `exp(x)`
    Exp,
    /// `log(x)`
    Log,
    /// `-x`
    Negate,
}

/// Coordinate-wise operation; local to the owning nodes, so no rounds are
/// charged. Unary modes ignore `w`.
pub fn diag_apply(budget: &PrecisionBudget, w: &RowVector, x: &RowVector, mode: DiagMode) -> Result<RowVector> {
    if matches!(mode, DiagMode::Multiply | DiagMode::Divide) && w.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: w.len() });
    }
    let mut out = x.clone();
    for (i, v) in out.iter_mut().enumerate() {
        *v = match mode {
            DiagMode::Multiply => w[i] * *v,
            DiagMode::Divide if w[i] == 0.0 => {
                return Err(Error::DomainError(format!("division by zero at row {i}")))
            }
            DiagMode::Divide => *v / w[i],
            DiagMode::Sqrt if *v < 0.0 => return Err(Error::DomainError(format!("sqrt of {v} at row {i}"))),
            DiagMode::Sqrt => v.sqrt(),
            DiagMode::Exp => v.exp(),
            DiagMode::Log if *v <= 0.0 => return Err(Error::DomainError(format!("log of {v} at row {i}"))),
            DiagMode::Log => v.ln(),
            DiagMode::Negate => -*v,
        };
    }
    budget.quantize_in_place(out.iter_mut());
    Ok(out)
}
