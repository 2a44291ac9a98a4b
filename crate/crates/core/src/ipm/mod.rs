//! Weighted path following for `min cᵀx` subject to `Aᵀx = b`, `l ≤ x ≤ u`,
//! with regularized Lewis weights on the barrier terms.
//!
//! [`lp_solve`] computes initial weights, follows the path for the
//! auxiliary cost `d = −w·φ′(x₀)` from `t = 1` down to `t₁`, then follows the
//! path for `c` from `t₁` up to `t₂ = 2m/ε`.

mod barrier;
mod centering;
mod oracle;

pub use barrier::{barrier_derivs, BarrierFamily, BarrierKind, Order, Slacks};
pub use centering::{apply_projection, centering_inexact, mixed_norm};
pub use oracle::{newton_center, vertex_enumeration};

use nalgebra::DVector;
use serde::Serialize;

use crate::congest::Sim;
use crate::error::{Error, Result};
use crate::lewis::{compute_initial_weights, WeightConstants};
use crate::linalg::{ColVector, ConstraintMatrix, RowVector};
use crate::tuning::Tuning;

/// `min cᵀx` over `{x : Aᵀx = b, l ≤ x ≤ u}` with a strictly interior start.
#[derive(Debug, Clone)]
pub struct LpInstance {
    pub a: ConstraintMatrix,
    pub b: ColVector,
    pub c: RowVector,
    pub barrier: BarrierFamily,
    pub x0: RowVector,
    /// Slacks of `x0`, exact when the caller knows them exactly.
    pub s0: Slacks,
    /// `U ≥ max(‖1/(u−x₀)‖∞, ‖1/(x₀−l)‖∞, ‖u−l‖∞, ‖c‖∞)`.
    pub big_u: f64,
}

impl LpInstance {
    pub fn new(a: ConstraintMatrix, b: ColVector, c: RowVector, l: RowVector, u: RowVector, x0: RowVector) -> Result<Self> {
        let barrier = BarrierFamily::new(l, u)?;
        let s0 = Slacks::of(&barrier, &x0);
        Self::with_slacks(a, b, c, barrier, x0, s0)
    }

    /// Like [`LpInstance::new`] but with slacks supplied by the caller.
    pub fn with_slacks(a: ConstraintMatrix, b: ColVector, c: RowVector, barrier: BarrierFamily, x0: RowVector, s0: Slacks) -> Result<Self> {
        let m = a.nrows();
        for (what, len) in [("c", c.len()), ("bounds", barrier.len()), ("x0", x0.len()), ("slacks", s0.lo.len())] {
            if len != m {
                return Err(Error::InvalidLp(format!("{what} has length {len}, A has {m} rows")));
            }
        }
        if b.len() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.len() });
        }
        a.ensure_full_column_rank()?;
        if let Some(i) = s0.contact(0.0) {
            return Err(Error::InfeasibleStart(format!("row {i} is not strictly inside its bounds")));
        }
        let drift = equality_drift(&a, &b, &x0);
        if drift > 1e-9 {
            return Err(Error::InfeasibleStart(format!("relative equality residual {drift:.3e}")));
        }
        let width = (0..m).map(|i| barrier.u[i] - barrier.l[i]).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let inv = |s: &RowVector| s.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
        let big_u = inv(&s0.lo).max(inv(&s0.hi)).max(width).max(c.amax()).max(1.0);
        Ok(Self { a, b, c, barrier, x0, s0, big_u })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn objective(&self, x: &RowVector) -> f64 {
        self.c.dot(x)
    }
}

/// `‖Aᵀx − b‖` relative to `‖b‖`, or to `‖|A|ᵀ|x|‖` when `b = 0`.
pub fn equality_drift(a: &ConstraintMatrix, b: &ColVector, x: &RowVector) -> f64 {
    let dense = a.dense();
    let res = (dense.transpose() * x - b).norm();
    let scale = if b.norm() > 0.0 { b.norm() } else { (dense.abs().transpose() * x.abs()).norm() };
    if scale > 0.0 { res / scale } else { res }
}

/// An iterate of the weighted path: `x`, its slacks, the barrier weights `w`
/// and the Lewis weight estimate the next weight refresh starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterState {
    pub x: RowVector,
    pub slacks: Slacks,
    pub w: RowVector,
    pub lewis: RowVector,
    pub t: f64,
}

/// Scalars shared by every centering step of one LP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpmConstants {
    pub weights: WeightConstants,
    /// `R = 1/(768·c_k²·log(36·c₁·c_s·c_k·m))`.
    pub r: f64,
    /// Centering precision `η = 1/(2c_k)`.
    pub eta: f64,
    /// `α = R/(1600·√n·log² m)`, capped at the tuning's `alpha_max`.
    pub alpha: f64,
}

/// `log x`, never below one, so that relaxed constants cannot flip signs.
fn lg(tuning: &Tuning, x: f64) -> f64 {
    tuning.log(x).max(1.0)
}

impl IpmConstants {
    pub fn new(m: usize, n: usize, tuning: &Tuning) -> Self {
        let weights = WeightConstants::new(m, n, tuning);
        let ck = weights.ck;
        let r = 1.0
            / (tuning.k(768.0) * ck * ck * lg(tuning, tuning.k(36.0) * weights.c1 * weights.cs * ck * m as f64));
        let lm = lg(tuning, m as f64);
        let alpha = (r / (tuning.k(1600.0) * (n as f64).sqrt() * lm * lm)).min(tuning.alpha_max);
        Self { weights, r, eta: 1.0 / (2.0 * ck), alpha }
    }
}

/// Iterations of the path-following while loop: `⌈|ln(t_end/t_start)| / ln(1+α)⌉`.
pub fn while_iterations(t_start: f64, t_end: f64, alpha: f64) -> usize {
    let span = (t_end / t_start).ln().abs();
    if span == 0.0 { 0 } else { (span / (1.0 + alpha).ln()).ceil() as usize }
}

/// Iterations of the refinement loop: `⌈4·c_k·log(1/η)⌉`.
pub fn refine_iterations(ck: f64, eta: f64, tuning: &Tuning) -> usize {
    let v = (tuning.k(4.0) * ck * tuning.log(1.0 / eta)).ceil();
    if v.is_finite() && v > 0.0 { v as usize } else { 0 }
}

/// Diagnostics emitted after every centering step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    /// 1 or 2: which path-following call produced the step.
    pub phase: u8,
    pub t: f64,
    pub delta: f64,
    pub drift: f64,
    pub min_slack: f64,
}

/// Parameters of the two path-following calls, after relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub t1: f64,
    pub t2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub initial_precision: f64,
}

impl Schedule {
    pub fn new(lp: &LpInstance, epsilon: f64, tuning: &Tuning) -> Self {
        let m = lp.m() as f64;
        let lm = lg(tuning, m);
        let u2 = lp.big_u * lp.big_u;
        Self {
            t1: 1.0 / (tuning.k(134_217_728.0) * m.powf(1.5) * u2 * lm.powi(4)),
            t2: 2.0 * m / epsilon,
            eta1: 1.0 / (tuning.k(262_144.0) * lm.powi(3)),
            eta2: epsilon / (8.0 * u2),
            initial_precision: 1.0 / (tuning.k(65_536.0) * lm.powi(3)),
        }
    }
}

/// Follows the weighted central path for `cost` from `t_start` to `t_end`,
/// then re-centers at `t_end`. Each while-loop iteration leaves a
/// `path_step` marker.
#[allow(clippy::too_many_arguments)]
pub fn path_following(
    sim: &mut Sim,
    lp: &LpInstance,
    consts: &IpmConstants,
    mut state: CenterState,
    t_start: f64,
    t_end: f64,
    eta: f64,
    cost: &RowVector,
    observe: &mut dyn FnMut(&CenterState, f64),
) -> Result<CenterState> {
    if !(t_start > 0.0 && t_end > 0.0) {
        return Err(Error::DomainError(format!("path parameters {t_start}, {t_end}")));
    }
    let steps = while_iterations(t_start, t_end, consts.alpha);
    let log_step = (1.0 + consts.alpha).ln() * if t_end >= t_start { 1.0 } else { -1.0 };
    let mut t = t_start;
    for k in 1..=steps {
        sim.ledger.mark("path_step");
        let (next, delta) = centering_inexact(sim, lp, consts, &state, t, cost)?;
        state = next;
        observe(&state, delta);
        t = if k == steps { t_end } else { t_start * (log_step * k as f64).exp() };
    }
    for _ in 0..refine_iterations(consts.weights.ck, eta, &sim.tuning) {
        sim.ledger.mark("refine_step");
        let (next, delta) = centering_inexact(sim, lp, consts, &state, t_end, cost)?;
        state = next;
        observe(&state, delta);
    }
    state.t = t_end;
    Ok(state)
}

/// Returns an interior `x` with `cᵀx ≤ OPT + ε`.
pub fn lp_solve(sim: &mut Sim, lp: &LpInstance, epsilon: f64) -> Result<RowVector> {
    lp_solve_observed(sim, lp, epsilon, &mut |_| {})
}

/// [`lp_solve`], reporting every centering step to `observe`.
pub fn lp_solve_observed(
    sim: &mut Sim,
    lp: &LpInstance,
    epsilon: f64,
    observe: &mut dyn FnMut(&StepReport),
) -> Result<RowVector> {
    if !(epsilon > 0.0) {
        return Err(Error::DomainError(format!("epsilon {epsilon}")));
    }
    sim.ledger.enter("lp_solve");
    let out = solve_phases(sim, lp, epsilon, observe);
    sim.ledger.exit();
    out
}

fn solve_phases(sim: &mut Sim, lp: &LpInstance, epsilon: f64, observe: &mut dyn FnMut(&StepReport)) -> Result<RowVector> {
    let tuning = sim.tuning;
    let consts = IpmConstants::new(lp.m(), lp.n(), &tuning);
    let sched = Schedule::new(lp, epsilon, &tuning);
    let contact = sim.budget.epsilon_machine;

    sim.ledger.enter("initial_weights");
    let init = (|| {
        let hess = lp.barrier.eval(&lp.s0, Order::Second, contact)?;
        let scale = hess.map(|h| 1.0 / h.sqrt());
        compute_initial_weights(sim, &lp.a, &scale, consts.weights.p, sched.initial_precision.min(1.0))
    })();
    sim.ledger.exit();
    let lewis = init?;
    let w = lewis.add_scalar(consts.weights.c0);
    let d = -w.component_mul(&lp.barrier.eval(&lp.s0, Order::First, contact)?);
    let state = CenterState { x: lp.x0.clone(), slacks: lp.s0.clone(), w, lewis, t: 1.0 };

    sim.ledger.enter("path_following_1");
    let state = path_following(sim, lp, &consts, state, 1.0, sched.t1, sched.eta1, &d, &mut |s, delta| {
        observe(&step_report(lp, 1, s, delta))
    });
    sim.ledger.exit();
    sim.ledger.enter("path_following_2");
    let state = state.and_then(|s| {
        path_following(sim, lp, &consts, s, sched.t1, sched.t2, sched.eta2, &lp.c, &mut |s, delta| {
            observe(&step_report(lp, 2, s, delta))
        })
    });
    sim.ledger.exit();
    Ok(state?.x)
}

fn step_report(lp: &LpInstance, phase: u8, s: &CenterState, delta: f64) -> StepReport {
    StepReport { phase, t: s.t, delta, drift: equality_drift(&lp.a, &lp.b, &s.x), min_slack: s.slacks.min() }
}

/// Uniform weights `n/m` at `x0`, for callers that only need a valid state.
pub fn flat_state(lp: &LpInstance, t: f64) -> CenterState {
    let w = DVector::from_element(lp.m(), lp.n() as f64 / lp.m() as f64);
    CenterState { x: lp.x0.clone(), slacks: lp.s0.clone(), lewis: w.clone(), w, t }
}
