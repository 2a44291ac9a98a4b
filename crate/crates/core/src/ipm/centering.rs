use nalgebra::DVector;

use super::{CenterState, IpmConstants, LpInstance, Order};
use crate::congest::{broadcast_aggregate, Monoid, Sim};
use crate::error::{Error, Result};
use crate::lewis::compute_apx_weights;
use crate::linalg::{weighted_projection, ConstraintMatrix, RowVector};
use crate::mixed_ball::{project_mixed_ball, MixedBallQuery};
use crate::tuning::{StepSign, WeightDirection};

/// `‖v‖∞ + C_norm·‖v‖_w`; two aggregations.
pub fn mixed_norm(sim: &mut Sim, v: &RowVector, w: &RowVector, c_norm: f64) -> Result<f64> {
    if let Some(i) = w.iter().position(|x| !(*x > 0.0)) {
        return Err(Error::NonPositiveWeight(i));
    }
    let bits = sim.budget.value_bits;
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let sq: Vec<f64> = v.iter().zip(w.iter()).map(|(x, wi)| wi * x * x).collect();
    let inf = broadcast_aggregate(sim, &abs, Monoid::Max, bits).max(0.0);
    let two = broadcast_aggregate(sim, &sq, Monoid::Sum, bits);
    Ok(inf + c_norm * two.sqrt())
}

/// `P_{x,w}·v = v − W⁻¹A_x(A_xᵀW⁻¹A_x)⁻¹A_xᵀv` with `A_x = Φ″(x)^{-1/2}A`,
/// given `hess = φ″(x)`. Charged as one Laplacian solve and two products.
pub fn apply_projection(sim: &mut Sim, a: &ConstraintMatrix, hess: &RowVector, w: &RowVector, v: &RowVector) -> Result<RowVector> {
    let m = a.nrows();
    if v.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: v.len() });
    }
    if hess.len() != m || w.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: hess.len().min(w.len()) });
    }
    let g = DVector::from_fn(m, |i, _| v[i] * w[i] * hess[i].sqrt());
    Ok(weighted_projection(sim, a, hess, w, 0.0, &DVector::zeros(m), &g)?.pv)
}

/// One step of weighted centering at path parameter `t`: a projected Newton
/// step in `x`, then a mixed-norm-bounded multiplicative move of `w` toward
/// the regularized Lewis weights at the new point. Returns the new state
/// and the centrality `δ` measured before the step.
pub fn centering_inexact(
    sim: &mut Sim,
    lp: &LpInstance,
    consts: &IpmConstants,
    state: &CenterState,
    t: f64,
    cost: &RowVector,
) -> Result<(CenterState, f64)> {
    let tuning = sim.tuning;
    let contact = sim.budget.epsilon_machine;
    let wc = &consts.weights;
    let w = &state.w;
    let grad = lp.barrier.eval(&state.slacks, Order::First, contact)?;
    let hess = lp.barrier.eval(&state.slacks, Order::Second, contact)?;
    let wg = w.component_mul(&grad);

    let newton = weighted_projection(sim, &lp.a, &hess, w, t, cost, &wg)?;
    let delta = mixed_norm(sim, &newton.pv, w, wc.c_norm)?;
    let dx = match tuning.step_sign {
        StepSign::Gradient => newton.dx,
        StepSign::Literal => weighted_projection(sim, &lp.a, &hess, w, t, cost, &-&wg)?.dx,
    };
    let slacks = state.slacks.step(&dx);
    if let Some(i) = slacks.contact(contact) {
        return Err(Error::BoundaryContact(i));
    }
    let x = &state.x + &dx;

    let hess_new = lp.barrier.eval(&slacks, Order::Second, contact)?;
    let row_scale = hess_new.map(|h| 1.0 / h.sqrt());
    let lewis = compute_apx_weights(sim, &lp.a, &row_scale, wc.p, &state.lewis, consts.r.exp_m1())?;
    let z = lewis.map(|v| (v + wc.c0).ln());
    let gain = consts.eta / (12.0 * consts.r);
    let dir = DVector::from_fn(w.len(), |i, _| {
        let r = gain * (z[i] - w[i].ln());
        match tuning.weight_direction {
            WeightDirection::ScaledResidual => r,
            WeightDirection::PotentialGradient => r.sinh(),
        }
    });
    let l = w.map(|wi| wc.c_norm * wi.sqrt());
    let y = project_mixed_ball(sim, &MixedBallQuery::new(dir.component_div(&l), l.clone())?)?;
    let factor = (1.0 - 6.0 / (7.0 * wc.ck)) * delta;
    let w_new = DVector::from_fn(w.len(), |i, _| w[i] * (factor * y[i] / l[i]).exp());
    if let Some(i) = w_new.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveWeight(i));
    }
    Ok((CenterState { x, slacks, w: w_new, lewis, t }, delta))
}
