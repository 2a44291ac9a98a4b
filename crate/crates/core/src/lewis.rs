//! Regularized ℓ_p Lewis weights: the median-clamped contraction
//! `ComputeApxWeights` and the `p`-homotopy `ComputeInitialWeights`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::congest::Sim;
use crate::error::{Error, Result};
use crate::leverage::{compute_leverage_scores, exact_leverage_scores};
use crate::linalg::{ConstraintMatrix, RowVector};
use crate::tuning::Tuning;

/// Constants of the regularized Lewis weight function for an `m × n` LP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightConstants {
    pub m: usize,
    pub n: usize,
    pub c1: f64,
    pub cs: f64,
    pub ck: f64,
    pub c_norm: f64,
    pub c0: f64,
    pub p: f64,
}

impl WeightConstants {
    pub fn new(m: usize, n: usize, tuning: &Tuning) -> Self {
        let ck = 2.0 * tuning.log(4.0 * m as f64);
        let cs = 4.0;
        Self {
            m,
            n,
            c1: (1.5 * n as f64).max(1.0),
            cs,
            ck,
            c_norm: 24.0 * cs.sqrt() * ck,
            c0: n as f64 / (2.0 * m as f64),
            p: 1.0 - 1.0 / tuning.log(4.0 * m as f64),
        }
    }
}

fn median3(lo: f64, mid: f64, hi: f64) -> f64 {
    mid.max(lo).min(hi)
}

/// Clamp radius `r = p²(4−p)/2²⁰`, never above one half.
pub fn clamp_radius(p: f64, tuning: &Tuning) -> f64 {
    (p * p * (4.0 - p) / tuning.k(1_048_576.0)).min(0.5)
}

/// Iteration count `⌈80(p/2 + 2/p)·log(pn/(32η))⌉`, at least 1.
pub fn apx_iterations(p: f64, n: usize, eta: f64, tuning: &Tuning) -> usize {
    let t = (tuning.k(80.0) * (p / 2.0 + 2.0 / p) * tuning.log(p * n as f64 / (32.0 * eta))).ceil();
    if t.is_finite() && t >= 1.0 { t as usize } else { 1 }
}

/// Approximate ℓ_p Lewis weights of `diag(w_diag)·A`, contracting from
/// `w0` and never leaving `[(1−r)w0, (1+r)w0]`.
pub fn compute_apx_weights(
    sim: &mut Sim,
    a: &ConstraintMatrix,
    w_diag: &RowVector,
    p: f64,
    w0: &RowVector,
    eta: f64,
) -> Result<RowVector> {
    let m = a.nrows();
    if w0.len() != m || w_diag.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: w0.len().min(w_diag.len()) });
    }
    if let Some(i) = w0.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveWeight(i));
    }
    let tuning = sim.tuning;
    let l = 4f64.max(8.0 / p);
    let r = clamp_radius(p, &tuning);
    let delta = (4.0 - p) * eta / 256.0;
    let iterations = apx_iterations(p, a.ncols(), eta, &tuning);
    let expo = 0.5 - 1.0 / p;
    let mut w = w0.clone();
    for _ in 0..iterations {
        let scale = DVector::from_fn(m, |i, _| w[i].powf(expo) * w_diag[i]);
        let sigma = compute_leverage_scores(sim, a, &scale, delta / 2.0)?.sigma;
        for i in 0..m {
            let step = w[i] - (w0[i] - w0[i] / w[i] * sigma[i]) / l;
            w[i] = median3((1.0 - r) * w0[i], step, (1.0 + r) * w0[i]);
            if !(w[i] > 0.0) {
                return Err(Error::NonPositiveWeight(i));
            }
        }
        sim.ledger.mark("apx_weights_iteration");
    }
    Ok(w)
}

/// Homotopy step in `p` for the current `p`.
pub fn homotopy_step(p: f64, m: usize, n: usize, tuning: &Tuning) -> f64 {
    let (m, n) = (m as f64, n as f64);
    2f64.min(p) / (n.sqrt() * tuning.log(m * std::f64::consts::E.powi(2) / n)) * clamp_radius(p, tuning)
}

/// Lewis weights of `diag(w_diag)·A` at `p_target`, reached from the ℓ₂
/// weights `12·c_k·1` by moving `p` down from 2.
pub fn compute_initial_weights(
    sim: &mut Sim,
    a: &ConstraintMatrix,
    w_diag: &RowVector,
    p_target: f64,
    eta: f64,
) -> Result<RowVector> {
    let (m, n) = (a.nrows(), a.ncols());
    let tuning = sim.tuning;
    let consts = WeightConstants::new(m, n, &tuning);
    let mut p = 2.0;
    let mut w = DVector::from_element(m, 12.0 * consts.ck);
    while p != p_target {
        let h = homotopy_step(p, m, n, &tuning);
        let p_new = median3(p - h, p_target, p + h);
        let warm = w.map(|v| v.powf(p_new / p));
        let precision = (p * p * (4.0 - p) / tuning.k(4_194_304.0)).min(1.0);
        w = compute_apx_weights(sim, a, w_diag, p_new, &warm, precision)?;
        p = p_new;
        sim.ledger.mark("homotopy_step");
    }
    compute_apx_weights(sim, a, w_diag, p_target, &w, eta)
}

/// `max_i |w_i − σ(W^{1/2−1/p} M)_i| / w_i` by a dense oracle.
pub fn lewis_residual(m: &DMatrix<f64>, p: f64, w: &RowVector) -> Result<f64> {
    if let Some(i) = w.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveWeight(i));
    }
    let expo = 0.5 - 1.0 / p;
    let mut scaled = m.clone();
    for i in 0..m.nrows() {
        scaled.row_mut(i).scale_mut(w[i].powf(expo));
    }
    let sigma = exact_leverage_scores(&scaled)?.sigma;
    Ok((0..w.len()).map(|i| (w[i] - sigma[i]).abs() / w[i]).fold(0.0, f64::max))
}

/// Dense fixed-point iteration `w ← σ(W^{1/2−1/p} M)` from all-ones; it
/// contracts for `p < 4`.
pub fn lewis_fixed_point(m: &DMatrix<f64>, p: f64, iterations: usize) -> Result<RowVector> {
    let expo = 0.5 - 1.0 / p;
    let mut w: RowVector = DVector::from_element(m.nrows(), 1.0);
    for _ in 0..iterations {
        let mut scaled = m.clone();
        for i in 0..m.nrows() {
            scaled.row_mut(i).scale_mut(w[i].powf(expo));
        }
        w = exact_leverage_scores(&scaled)?.sigma;
        if let Some(i) = w.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveWeight(i));
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::Network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sim(tuning: Tuning) -> Sim {
        Sim::new(Network::build(&[(0, 1), (1, 2)]).unwrap().with_seed(4)).with_tuning(tuning)
    }

    fn random(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constants() {
        let c = WeightConstants::new(10, 4, &Tuning::default());
        assert!((c.ck - 2.0 * 40f64.ln()).abs() < 1e-12);
        assert!((c.c_norm - 48.0 * c.ck).abs() < 1e-9);
        assert_eq!(c.c0, 0.2);
        assert_eq!(c.c1, 6.0);
        assert!((c.p - (1.0 - 1.0 / 40f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn iteration_count_formula() {
        // ⌈160·ln(62.5)⌉
        assert_eq!(apx_iterations(2.0, 100, 0.1, &Tuning::default()), 662);
        assert_eq!(apx_iterations(2.0, 1, 0.9, &Tuning::default()), 1);
    }

    #[test]
    fn l2_square_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ConstraintMatrix::from_dense(&random(&mut rng, 4, 4)).unwrap();
        let mut s = sim(Tuning { relax: 100.0, jl_eta_floor: 0.2, ..Tuning::default() });
        let ones = DVector::from_element(4, 1.0);
        let w = compute_apx_weights(&mut s, &a, &ones, 2.0, &ones, 0.5).unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn l2_column_fixed_point() {
        let a = ConstraintMatrix::from_dense(&DMatrix::from_element(2, 1, 1.0)).unwrap();
        let mut s = sim(Tuning { relax: 100.0, jl_eta_floor: 0.2, ..Tuning::default() });
        let half = DVector::from_element(2, 0.5);
        let w = compute_apx_weights(&mut s, &a, &DVector::from_element(2, 1.0), 2.0, &half, 0.5).unwrap();
        assert!(w.iter().all(|v| (v - 0.5).abs() < 0.01));
        let oracle = lewis_fixed_point(&DMatrix::from_element(2, 1, 1.0), 2.0, 5).unwrap();
        assert!(oracle.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn iterates_stay_in_clamp_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random(&mut rng, 10, 3);
        let a = ConstraintMatrix::from_dense(&d).unwrap();
        let tuning = Tuning { relax: 1e4, jl_eta_floor: 0.5, ..Tuning::default() };
        let mut s = sim(tuning);
        let w0 = DVector::from_fn(10, |_, _| rng.gen_range(0.1..2.0));
        let p = 1.3;
        let w = compute_apx_weights(&mut s, &a, &DVector::from_element(10, 1.0), p, &w0, 0.5).unwrap();
        let r = clamp_radius(p, &tuning);
        for i in 0..10 {
            assert!(w[i] >= (1.0 - r) * w0[i] - 1e-12 && w[i] <= (1.0 + r) * w0[i] + 1e-12);
        }
    }

    #[test]
    fn homotopy_zero_steps_at_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = ConstraintMatrix::from_dense(&random(&mut rng, 6, 2)).unwrap();
        let mut s = sim(Tuning { relax: 1e4, jl_eta_floor: 0.5, ..Tuning::default() });
        compute_initial_weights(&mut s, &a, &DVector::from_element(6, 1.0), 2.0, 0.5).unwrap();
        assert_eq!(s.ledger.count_under("", "homotopy_step"), 0);
    }

    #[test]
    fn homotopy_step_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = ConstraintMatrix::from_dense(&random(&mut rng, 8, 3)).unwrap();
        let tuning = Tuning { relax: 1e4, jl_eta_floor: 0.5, ..Tuning::default() };
        let mut s = sim(tuning);
        let h = homotopy_step(2.0, 8, 3, &tuning);
        let target = 2.0 - 2.5 * h;
        compute_initial_weights(&mut s, &a, &DVector::from_element(8, 1.0), target, 0.5).unwrap();
        // h shrinks slightly as p falls, so the count may exceed the first-step estimate only through rounding
        let steps = s.ledger.count_under("", "homotopy_step");
        assert_eq!(steps, ((2.0 - target) / h).ceil() as usize);
    }

    #[test]
    fn residual_oracle() {
        let ones = DVector::from_element(3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sq = random(&mut rng, 3, 3);
        assert!(lewis_residual(&sq, 2.0, &ones).unwrap() < 1e-12);
        let mut bumped = ones.clone();
        bumped[0] = 2.0;
        assert!(lewis_residual(&sq, 2.0, &bumped).unwrap() >= 0.25);
        let d = random(&mut rng, 10, 3);
        let w = lewis_fixed_point(&d, 1.5, 200).unwrap();
        assert!(lewis_residual(&d, 1.5, &w).unwrap() <= 1e-6);
    }

    #[test]
    fn initial_weights_small_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random(&mut rng, 12, 4);
        let a = ConstraintMatrix::from_dense(&d).unwrap();
        let tuning = Tuning { relax: 1e4, jl_eta_floor: 0.1, ..Tuning::default() };
        let mut s = sim(tuning);
        let p = WeightConstants::new(12, 4, &tuning).p;
        let w = compute_initial_weights(&mut s, &a, &DVector::from_element(12, 1.0), p, 0.05).unwrap();
        let res = lewis_residual(&d, p, &w).unwrap();
        assert!(res <= 0.05, "residual {res}");
    }
}
