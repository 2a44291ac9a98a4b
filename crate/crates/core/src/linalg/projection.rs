//! Weighted projection onto `{d : Aᵀd = 0}` in a basis picked by weight.
//!
//! The `n` rows with the largest `1/(w·φ″)` that are linearly independent
//! form a basis `B`; every other row `j` spans the circuit
//! `e_j − Σ_b γ_jb e_b` with `A_Bᵀγ_j = a_j`. In these coordinates the
//! reduced system is dominated by its diagonal however far the barrier
//! Hessians spread, and circuit sums of the objective are carried in
//! double-double so that `t·c` never cancels against the barrier gradient
//! in plain f64.

use nalgebra::{DMatrix, DVector};

use super::dd::Dd;
use super::laplacian::charge_laplacian;
use super::{charge_matvec, ConstraintMatrix, RowVector};
use crate::congest::Sim;
use crate::error::{Error, Result};

/// `P v` and the matching step `−P v / √φ″`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub pv: RowVector,
    pub dx: RowVector,
}

struct Circuits {
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    /// `n × k`; column `k` holds `γ` for `nonbasic[k]`.
    gamma: DMatrix<f64>,
}

impl Circuits {
    fn new(a: &DMatrix<f64>, d: &RowVector) -> Result<Self> {
        let (m, n) = a.shape();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
        let mut basic = Vec::with_capacity(n);
        let mut nonbasic = Vec::with_capacity(m.saturating_sub(n));
        let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(n);
        for &i in &order {
            if basic.len() == n {
                nonbasic.push(i);
                continue;
            }
            let row = a.row(i).transpose();
            let norm = row.norm();
            let mut r = row.clone();
            for _ in 0..2 {
                for q in &ortho {
                    let c = q.dot(&r);
                    r.axpy(-c, q, 1.0);
                }
            }
            let rn = r.norm();
            if norm > 0.0 && rn > 1e-9 * norm {
                ortho.push(r / rn);
                basic.push(i);
            } else {
                nonbasic.push(i);
            }
        }
        if basic.len() < n {
            return Err(Error::SingularSystem { residual: f64::INFINITY });
        }
        let ab_t = DMatrix::from_fn(n, n, |r, c| a[(basic[c], r)]);
        let an_t = DMatrix::from_fn(n, nonbasic.len(), |r, c| a[(nonbasic[c], r)]);
        let lu = ab_t.clone().lu();
        let mut gamma = lu.solve(&an_t).ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
        if let Some(fix) = lu.solve(&(&an_t - &ab_t * &gamma)) {
            gamma += fix;
        }
        Ok(Self { basic, nonbasic, gamma })
    }

    /// `Cᵀx` in double-double.
    fn reduce(&self, x: &RowVector) -> Vec<Dd> {
        self.nonbasic
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let mut s = Dd::from_f64(x[j]);
                for (b, &i) in self.basic.iter().enumerate() {
                    let g = self.gamma[(b, k)];
                    if g != 0.0 {
                        s = s - Dd::prod(g, x[i]);
                    }
                }
                s
            })
            .collect()
    }

    /// `CᵀX` in f64, column by column.
    fn reduce_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xb = x.select_rows(&self.basic);
        x.select_rows(&self.nonbasic) - self.gamma.tr_mul(&xb)
    }

    /// Solves the reduced system `Cᵀ diag(d) C θ = rhs` and returns `Cθ`;
    /// `exact` sums the basic rows in double-double.
    fn lift(&self, a_rows: usize, d: &RowVector, rhs: &DMatrix<f64>, exact: bool) -> Result<DMatrix<f64>> {
        let k = self.nonbasic.len();
        let mut out = DMatrix::zeros(a_rows, rhs.ncols());
        if k == 0 {
            return Ok(out);
        }
        let g = &self.gamma;
        let mut kmat = g.tr_mul(&DMatrix::from_fn(g.nrows(), k, |r, c| g[(r, c)] * d[self.basic[r]]));
        for (c, &j) in self.nonbasic.iter().enumerate() {
            kmat[(c, c)] += d[j];
        }
        let s = DVector::from_fn(k, |i, _| 1.0 / kmat[(i, i)].sqrt());
        let scaled = DMatrix::from_fn(k, k, |i, j| kmat[(i, j)] * s[i] * s[j]);
        let chol = scaled.cholesky().ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
        let inv = chol.inverse();
        let kinv = DMatrix::from_fn(k, k, |i, j| inv[(i, j)] * s[i] * s[j]);
        let solve = |b: &DMatrix<f64>| &kinv * b;
        let mut theta = solve(rhs);
        theta += solve(&(rhs - &kmat * &theta));
        if !exact {
            let basic = -(g * &theta);
            for (c, &j) in self.nonbasic.iter().enumerate() {
                out.row_mut(j).copy_from(&theta.row(c));
            }
            for (b, &i) in self.basic.iter().enumerate() {
                out.row_mut(i).copy_from(&basic.row(b));
            }
            return Ok(out);
        }
        for col in 0..rhs.ncols() {
            for (c, &j) in self.nonbasic.iter().enumerate() {
                out[(j, col)] = theta[(c, col)];
            }
            for (b, &i) in self.basic.iter().enumerate() {
                let mut acc = Dd::ZERO;
                for c in 0..k {
                    if g[(b, c)] != 0.0 {
                        acc = acc - Dd::prod(g[(b, c)], theta[(c, col)]);
                    }
                }
                out[(i, col)] = acc.to_f64();
            }
        }
        Ok(out)
    }
}

fn check(a: &ConstraintMatrix, d: &RowVector) -> Result<()> {
    if d.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: d.len() });
    }
    if let Some(i) = d.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::NonPositiveWeight(i));
    }
    Ok(())
}

/// `P_{x,w} v` for `v = (t·cost + extra)/(w√φ″)`, where
/// `P_{x,w} = I − W⁻¹A_x(A_xᵀW⁻¹A_x)⁻¹A_xᵀ` and `A_x = Φ″^{-1/2}A`.
/// Charged as `Aᵀ` product, one Laplacian solve and `A` product.
pub fn weighted_projection(
    sim: &mut Sim,
    a: &ConstraintMatrix,
    hess: &RowVector,
    w: &RowVector,
    t: f64,
    cost: &RowVector,
    extra: &RowVector,
) -> Result<Projected> {
    let m = a.nrows();
    for len in [hess.len(), w.len(), cost.len(), extra.len()] {
        if len != m {
            return Err(Error::DimensionMismatch { expected: m, got: len });
        }
    }
    check(a, w)?;
    if let Some(i) = hess.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::DomainError(format!("barrier curvature {} at row {i}", hess[i])));
    }
    charge_matvec(sim, "matvec_at", 1);
    charge_laplacian(sim, 1);
    charge_matvec(sim, "matvec_a", 1);

    let d = w.component_mul(hess);
    let circ = Circuits::new(a.dense(), &d)?;
    let tdd = Dd::from_f64(t);
    let rhs: Vec<f64> =
        circ.reduce(cost).into_iter().zip(circ.reduce(extra)).map(|(c, e)| (c * tdd + e).to_f64()).collect();
    let lifted = circ.lift(m, &d, &DMatrix::from_column_slice(rhs.len(), 1, &rhs), true)?;
    let root = hess.map(f64::sqrt);
    let mut pv = DVector::from_fn(m, |i, _| lifted[(i, 0)] * root[i]);
    sim.budget.quantize_in_place(pv.iter_mut());
    let dx = -pv.component_div(&root);
    Ok(Projected { pv, dx })
}

/// For each column `g` of `rhs`, the point of `{d : Aᵀd = 0}` closest to
/// `g/d` in the `diag(d)` norm. Charged as `k` Laplacian solves and `k`
/// products each way in one entry apiece.
pub fn null_projection_block(sim: &mut Sim, a: &ConstraintMatrix, d: &RowVector, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check(a, d)?;
    if rhs.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: rhs.nrows() });
    }
    let k = rhs.ncols();
    charge_matvec(sim, "matvec_at", k);
    charge_laplacian(sim, k);
    charge_matvec(sim, "matvec_a", k);
    let circ = Circuits::new(a.dense(), d)?;
    let reduced = circ.reduce_block(rhs);
    let mut out = circ.lift(a.nrows(), d, &reduced, false)?;
    sim.budget.quantize_in_place(out.iter_mut());
    Ok(out)
}
