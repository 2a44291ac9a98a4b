use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{validate_flow, ExactFlow, FlowInstance};
use crate::congest::Sim;
use crate::error::{Error, Result};
use crate::ipm::{lp_solve, BarrierFamily, LpInstance, Slacks};
use crate::linalg::{ConstraintMatrix, PrecisionBudget, RowVector};

/// How to read the penalty constant `28160 |E|^8 2M^9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaReading {
    /// `28160 · |E|⁸ · 2 · M⁹`.
    #[default]
    StandaloneTwo,
    /// `28160 · |E|⁸ · (2M)⁹`.
    TwoM,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Fresh perturbations drawn after an infeasible rounding.
    pub retries: usize,
    pub lambda: LambdaReading,
    /// Largest objective coefficient, in bits, the f64 solver may be handed.
    pub max_bits: u64,
    /// Bits per transmitted scalar; `None` sizes the budget as
    /// `2·⌈log₂(mU/ε)⌉` for each LP.
    pub precision_bits: Option<u32>,
    /// Additive accuracy in the rescaled objective units; `None` uses
    /// `1/(320|E|⁴M⁵)`.
    pub epsilon: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { retries: 10, lambda: LambdaReading::StandaloneTwo, max_bits: 1000, precision_bits: None, epsilon: None }
    }
}

/// The perturbed flow LP over `(x ∈ R^|E|, y ∈ R^|V|, z ∈ R^|V|, F)`, with
/// constraint `Bx + y − z − F·e_t = 0` (the source row of `B` dropped).
///
/// The objective `q̃ᵀx + λ(1ᵀy + 1ᵀz) − 2|V|M̃F` is kept exactly in integers
/// after multiplying by `4|E|²M²`; the solver sees it divided by its largest
/// coefficient.
#[derive(Debug, Clone)]
pub struct FlowLp {
    pub lp: LpInstance,
    pub nodes: usize,
    pub arcs: usize,
    pub big_m: u64,
    /// `4|E|²M²`.
    pub scale: BigInt,
    /// `M̃ = 8|E|²M³`.
    pub m_tilde: BigInt,
    pub lambda: BigInt,
    /// Numerators `k_e` of the perturbation `r_e = k_e / (4|E|²M²)`.
    pub perturbation: Vec<u64>,
    /// Scaled integer objective.
    pub objective: Vec<BigInt>,
    /// Largest absolute objective coefficient.
    pub normalizer: BigInt,
    /// `1/(320|E|⁴M⁵)`.
    pub epsilon: f64,
    /// `epsilon` in the units of the normalized objective.
    pub epsilon_lp: f64,
}

impl FlowLp {
    pub fn x_range(&self) -> std::ops::Range<usize> {
        0..self.arcs
    }

    pub fn f_index(&self) -> usize {
        self.arcs + 2 * self.nodes
    }
}

fn big(v: u64) -> BigInt {
    BigInt::from(v)
}

/// Builds the LP with a perturbation drawn from `seed`.
pub fn build_flow_lp(inst: &FlowInstance, seed: u64, opts: &FlowOptions) -> Result<FlowLp> {
    inst.validate()?;
    let (nv, ne) = (inst.nodes, inst.arcs.len());
    let mm = inst.big_m();
    let (e, m, v) = (big(ne as u64), big(mm), big(nv as u64));
    let scale = big(4) * &e * &e * &m * &m;
    let m_tilde = big(8) * &e * &e * &m * &m * &m;
    let lambda = match opts.lambda {
        LambdaReading::StandaloneTwo => big(28160) * e.pow(8) * big(2) * m.pow(9),
        LambdaReading::TwoM => big(28160) * e.pow(8) * (big(2) * &m).pow(9),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = 2 * ne as u64 * mm;
    let perturbation: Vec<u64> = (0..ne).map(|_| rng.gen_range(1..=top)).collect();
    // Σ r_e ≤ |E|·2|E|M / (4|E|²M²) = 1/(2M)
    let total: u64 = perturbation.iter().sum();
    assert!(BigInt::from(2 * total) <= scale, "perturbation too large");

    let mut objective = Vec::with_capacity(ne + 2 * nv + 1);
    for (a, k) in inst.arcs.iter().zip(&perturbation) {
        objective.push(&scale * big(a.cost) + big(*k));
    }
    let penalty = &scale * &lambda;
    for _ in 0..2 * nv {
        objective.push(penalty.clone());
    }
    objective.push(-(big(2) * &v * &m_tilde * &scale));
    let normalizer = objective.iter().map(|c| c.abs()).max().unwrap_or_else(BigInt::one);
    if normalizer.bits() > opts.max_bits {
        return Err(Error::Overflow(format!("objective needs {} bits", normalizer.bits())));
    }
    let ratio = |c: &BigInt| BigRational::new(c.clone(), normalizer.clone()).to_f64().unwrap_or(f64::NAN);
    let c = DVector::from_iterator(objective.len(), objective.iter().map(ratio));

    let (a, barrier) = constraint_system(inst)?;
    let (x0, s0) = start_point(inst, &a)?;
    let rows = a.nrows();
    let lp = LpInstance::with_slacks(a, DVector::zeros(nv - 1), c, barrier, x0, s0)?;
    debug_assert_eq!(rows, ne + 2 * nv + 1);

    let epsilon = match opts.epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::DomainError(format!("epsilon {e}"))),
        None => 1.0 / (320.0 * (ne as f64).powi(4) * (mm as f64).powi(5)),
    };
    let epsilon_lp = epsilon / normalizer.to_f64().unwrap_or(f64::INFINITY);
    Ok(FlowLp {
        lp,
        nodes: nv,
        arcs: ne,
        big_m: mm,
        scale,
        m_tilde,
        lambda,
        perturbation,
        objective,
        normalizer,
        epsilon,
        epsilon_lp,
    })
}

fn constraint_system(inst: &FlowInstance) -> Result<(ConstraintMatrix, BarrierFamily)> {
    let (nv, ne) = (inst.nodes, inst.arcs.len());
    let col = |v: usize| if v == inst.source { None } else { Some(if v < inst.source { v } else { v - 1 }) };
    let col_nodes: Vec<usize> = (0..nv).filter(|&v| v != inst.source).collect();
    let mut rows = Vec::with_capacity(ne + 2 * nv + 1);
    let mut owners = Vec::with_capacity(rows.capacity());
    for a in &inst.arcs {
        let mut r = Vec::new();
        if let Some(j) = col(a.to) {
            r.push((j, 1.0));
        }
        if let Some(j) = col(a.from) {
            r.push((j, -1.0));
        }
        rows.push(r);
        owners.push(a.from);
    }
    for sign in [1.0, -1.0] {
        for v in 0..nv {
            rows.push(col(v).map(|j| vec![(j, sign)]).unwrap_or_default());
            owners.push(v);
        }
    }
    rows.push(vec![(col(inst.sink).expect("sink is not the source"), -1.0)]);
    owners.push(inst.sink);
    let a = ConstraintMatrix::new(nv - 1, rows, owners, col_nodes)?;

    let vm = (nv as u64 * inst.big_m()) as f64;
    let mut u: Vec<f64> = inst.arcs.iter().map(|a| a.cap as f64).collect();
    u.extend(std::iter::repeat(4.0 * vm).take(2 * nv));
    u.push(2.0 * vm);
    let barrier = BarrierFamily::new(DVector::zeros(u.len()), DVector::from_vec(u))?;
    Ok((a, barrier))
}

/// Exact start `F = |V|M`, `x = c/2`, `y = 2|V|M − (Bc/2)⁻ + F·e_t`,
/// `z = 2|V|M + (Bc/2)⁺`, with its slacks.
fn start_point(inst: &FlowInstance, a: &ConstraintMatrix) -> Result<(RowVector, Slacks)> {
    let (nv, ne) = (inst.nodes, inst.arcs.len());
    let half = |k: u64| BigRational::new(big(k), big(2));
    let vm = BigRational::from_integer(big(nv as u64 * inst.big_m()));
    let two = BigRational::from_integer(big(2));
    let f = vm.clone();
    let x: Vec<BigRational> = inst.arcs.iter().map(|a| half(a.cap)).collect();
    // (B c/2)_v: net inflow at v
    let mut bx = vec![BigRational::zero(); nv];
    for (arc, xe) in inst.arcs.iter().zip(&x) {
        bx[arc.to] += xe;
        bx[arc.from] -= xe;
    }
    let mut y = Vec::with_capacity(nv);
    let mut z = Vec::with_capacity(nv);
    for (v, b) in bx.iter().enumerate() {
        let b = if v == inst.source { BigRational::zero() } else { b.clone() };
        let neg = if b.is_negative() { b.clone() } else { BigRational::zero() };
        let pos = if b.is_positive() { b.clone() } else { BigRational::zero() };
        let at_t = if v == inst.sink { f.clone() } else { BigRational::zero() };
        y.push(&two * &vm - neg + at_t);
        z.push(&two * &vm + pos);
    }
    let mut point: Vec<BigRational> = x;
    point.extend(y);
    point.extend(z);
    point.push(f);

    // exact residual of Aᵀx
    let mut res = vec![BigRational::zero(); a.ncols()];
    for (i, xi) in point.iter().enumerate() {
        for &(j, v) in a.row(i) {
            res[j] += xi * BigRational::from_integer(big_int_of(v)?);
        }
    }
    if res.iter().any(|r| !r.is_zero()) {
        return Err(Error::InfeasibleStart("interior start violates Bx + y − z = F·e_t".into()));
    }

    let mut upper: Vec<BigRational> = inst.arcs.iter().map(|a| BigRational::from_integer(big(a.cap))).collect();
    upper.extend(std::iter::repeat(BigRational::from_integer(big(4)) * &vm).take(2 * nv));
    upper.push(&two * &vm);
    let margin = BigRational::new(big(1), big(2)).min(vm.clone());
    let to_f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    let mut lo = Vec::with_capacity(point.len());
    let mut hi = Vec::with_capacity(point.len());
    for (i, (p, u)) in point.iter().zip(&upper).enumerate() {
        let up = u - p;
        if *p < margin || up < margin {
            return Err(Error::InvalidInstance(format!(
                "start coordinate {i} is within 1/2 of a bound (too many parallel arcs?)"
            )));
        }
        lo.push(to_f(p));
        hi.push(to_f(&up));
    }
    debug_assert_eq!(point.len(), ne + 2 * nv + 1);
    Ok((
        DVector::from_iterator(point.len(), point.iter().map(to_f)),
        Slacks { lo: DVector::from_vec(lo), hi: DVector::from_vec(hi) },
    ))
}

fn big_int_of(v: f64) -> Result<BigInt> {
    if v.fract() != 0.0 {
        return Err(Error::DomainError(format!("non-integral incidence entry {v}")));
    }
    Ok(BigInt::from(v as i64))
}

/// The interior start of `flp`, as handed to the solver.
pub fn initial_interior_point(flp: &FlowLp) -> RowVector {
    flp.lp.x0.clone()
}

/// Scales the arc flows by `1 − ε` and rounds to the nearest integer (ties
/// to even).
pub fn round_to_exact(inst: &FlowInstance, flp: &FlowLp, x_apx: &RowVector, epsilon_used: f64) -> Result<ExactFlow> {
    if !(epsilon_used >= 0.0 && epsilon_used <= flp.epsilon) {
        return Err(Error::DomainError(format!("epsilon {epsilon_used} exceeds {}", flp.epsilon)));
    }
    if x_apx.len() != flp.lp.m() {
        return Err(Error::DimensionMismatch { expected: flp.lp.m(), got: x_apx.len() });
    }
    let flow: Vec<i64> = flp.x_range().map(|i| ((1.0 - epsilon_used) * x_apx[i]).round_ties_even() as i64).collect();
    let f = ExactFlow::from_arcs(inst, flow);
    validate_flow(inst, &f).map_err(|fault| Error::InfeasibleRounding(format!("{fault:?}")))?;
    Ok(f)
}

/// A solved instance and how many perturbations it took.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    pub flow: ExactFlow,
    pub attempts: usize,
    /// Accuracy of the successful attempt, in flow units.
    pub epsilon: f64,
    /// Bits per scalar of the successful attempt.
    pub precision_bits: u32,
}

fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    seed ^ (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Builds, solves and rounds, drawing a fresh perturbation after every
/// infeasible rounding, at most `opts.retries` times.
pub fn solve_min_cost_flow(sim: &mut Sim, inst: &FlowInstance, seed: u64, opts: &FlowOptions) -> Result<FlowSolution> {
    if sim.net.node_count() != inst.nodes {
        return Err(Error::DimensionMismatch { expected: inst.nodes, got: sim.net.node_count() });
    }
    let mut last = String::new();
    for attempt in 0..=opts.retries {
        let flp = build_flow_lp(inst, attempt_seed(seed, attempt), opts)?;
        sim.budget = match opts.precision_bits {
            Some(bits) => PrecisionBudget::with_bits(bits),
            None => PrecisionBudget::for_lp(flp.lp.m(), flp.lp.big_u, flp.epsilon_lp),
        };
        let x = lp_solve(sim, &flp.lp, flp.epsilon_lp)?;
        match round_to_exact(inst, &flp, &x, flp.epsilon) {
            Ok(flow) => {
                return Ok(FlowSolution {
                    flow,
                    attempts: attempt + 1,
                    epsilon: flp.epsilon,
                    precision_bits: sim.budget.value_bits,
                })
            }
            Err(Error::InfeasibleRounding(why)) if opts.retries > 0 => last = why,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted { attempts: opts.retries + 1, last })
}

/// True when `m` is symmetric and every diagonal entry dominates its row.
pub fn is_diagonally_dominant(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        (0..n).all(|j| m[(i, j)] == m[(j, i)]) && m[(i, i)] >= off * (1.0 - 1e-12)
    })
}
