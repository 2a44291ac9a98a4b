//! Leverage scores `σ(M) = diag(M(MᵀM)⁻¹Mᵀ)` for `M = WA`, approximated
//! with a ±1/√k Johnson–Lindenstrauss sketch.

use nalgebra::{DMatrix, DVector};

use crate::congest::{coin_stream, Sim};
use crate::error::{Error, Result};
use crate::linalg::{null_projection_block, numerical_rank, ConstraintMatrix, RowVector};

/// `k × m` matrix with entries `±1/√k`; row `i` of the LP owns column `i`.
#[derive(Debug, Clone)]
pub struct SketchMatrix {
    pub k: usize,
    pub entries: DMatrix<f64>,
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    pub sigma: RowVector,
}

const MAX_SKETCH_ENTRIES: usize = 1 << 27;

/// `⌈c_jl · ln m / η²⌉`, at least 1.
pub fn jl_dimension(m: usize, eta: f64, c_jl: f64) -> usize {
    dimension_for_log(c_jl * (m as f64).ln(), eta)
}

fn dimension_for_log(scaled_log: f64, eta: f64) -> usize {
    // shave float noise so exact integers are not bumped up by one
    let k = (scaled_log / (eta * eta) * (1.0 - 1e-12)).ceil();
    if k.is_finite() && k >= 1.0 { k as usize } else { 1 }
}

/// Both holders of each row draw the row's `k` coins from shared randomness;
/// all rows flip in parallel, so one `⌈k/bandwidth⌉` charge covers them.
pub fn draw_sketch(sim: &mut Sim, m: usize, k: usize) -> SketchMatrix {
    let nonce = sim.ledger.next_nonce();
    let scale = 1.0 / (k as f64).sqrt();
    let mut entries = DMatrix::zeros(k, m);
    for i in 0..m {
        let coins = coin_stream(sim.net.streams(), "sketch", i as u64, nonce, k);
        for (j, c) in coins.into_iter().enumerate() {
            entries[(j, i)] = f64::from(c) * scale;
        }
    }
    let chunks = sim.net.chunks(k as u64);
    sim.ledger.charge("coins", chunks, chunks * m as u64, (k * m) as u64);
    SketchMatrix { k, entries, nonce }
}

/// Approximate `σ(diag(w)·A)` to multiplicative precision `eta` (never
/// tighter than the tuning's `jl_eta_floor`).
pub fn compute_leverage_scores(sim: &mut Sim, a: &ConstraintMatrix, w: &RowVector, eta: f64) -> Result<LeverageScores> {
    let m = a.nrows();
    if w.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: w.len() });
    }
    if let Some(i) = w.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveWeight(i));
    }
    let eta = eta.max(sim.tuning.jl_eta_floor);
    let k = jl_dimension(m, eta, sim.tuning.c_jl);
    if k.saturating_mul(m.max(a.ncols())) > MAX_SKETCH_ENTRIES {
        return Err(Error::Overflow(format!("sketch with {k} rows at precision {eta:e} exceeds the memory budget")));
    }
    let r = draw_sketch(sim, m, k);
    // columns p⁽ʲ⁾ = M (MᵀM)⁻¹ Mᵀ R⁽ʲ⁾ = R⁽ʲ⁾ − W⁻¹·Π(W R⁽ʲ⁾), with Π the
    // diag(w⁻²)-orthogonal projection onto ker Aᵀ
    let d = w.map(|v| 1.0 / (v * v));
    let g = DMatrix::from_fn(m, k, |i, j| r.entries[(j, i)] / w[i]);
    let null = null_projection_block(sim, a, &d, &g)?;
    let sigma = DVector::from_fn(m, |i, _| (0..k).map(|j| (r.entries[(j, i)] - null[(i, j)] / w[i]).powi(2)).sum());
    Ok(LeverageScores { sigma })
}

/// Dense oracle: squared row norms of the thin `Q` factor of `M`.
pub fn exact_leverage_scores(m: &DMatrix<f64>) -> Result<LeverageScores> {
    let (rows, cols) = m.shape();
    if rows < cols || numerical_rank(m) < cols {
        return Err(Error::SingularSystem { residual: f64::INFINITY });
    }
    // Column equilibration leaves the column space, hence σ, unchanged.
    let mut scaled = m.clone();
    for j in 0..cols {
        let n = scaled.column(j).norm();
        scaled.column_mut(j).unscale_mut(n);
    }
    let q = scaled.qr().q();
    Ok(LeverageScores { sigma: DVector::from_fn(rows, |i, _| q.row(i).norm_squared()) })
}
