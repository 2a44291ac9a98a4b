//! The Laplacian-solve oracle: a central dense solve charged as one
//! distributed `T_Laplacian` call.

use nalgebra::{DMatrix, DVector};

use super::dd::Dd;
use super::{ColVector, ConstraintMatrix, RowVector};
use crate::congest::Sim;
use crate::error::{Error, Result};

const REFINE_STEPS: usize = 6;

/// `rhs − Aᵀ diag(w) A z` with every product and sum carried in
/// double-double, so refinement is not limited by the f64 residual floor.
fn normal_residual(a: &DMatrix<f64>, w: &DVector<f64>, z: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(n, rhs.ncols());
    for c in 0..rhs.ncols() {
        let mut acc: Vec<Dd> = (0..n).map(|j| Dd::from_f64(rhs[(j, c)])).collect();
        for i in 0..m {
            let mut u = Dd::ZERO;
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    u = u + Dd::prod(a[(i, j)], z[(j, c)]);
                }
            }
            let v = u * Dd::from_f64(w[i]);
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    acc[j] = acc[j] - v * Dd::from_f64(a[(i, j)]);
                }
            }
        }
        for j in 0..n {
            out[(j, c)] = acc[j].to_f64();
        }
    }
    out
}

fn column_ratio(r: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    (0..rhs.ncols())
        .map(|c| {
            let b = rhs.column(c).norm();
            let e = r.column(c).norm();
            if b == 0.0 {
                if e == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                e / b
            }
        })
        .fold(0.0, f64::max)
}

/// A reusable factorization of `AᵀWA`: the Gram matrix is formed,
/// equilibrated and Cholesky-factored in double-double arithmetic, which
/// keeps near-singular central-path systems solvable.
pub struct NormalFactor {
    a: DMatrix<f64>,
    abs_a: DMatrix<f64>,
    w: DVector<f64>,
    scale: Vec<Dd>,
    chol: Option<Vec<Dd>>,
    fast: Option<(DVector<f64>, DMatrix<f64>)>,
    pinv: Option<DMatrix<f64>>,
}

impl NormalFactor {
    pub fn new(a: &DMatrix<f64>, w: &DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if w.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: w.len() });
        }
        let mut g = vec![Dd::ZERO; n * n];
        for i in 0..m {
            let nz: Vec<usize> = (0..n).filter(|&j| a[(i, j)] != 0.0).collect();
            for &j in &nz {
                let aw = Dd::prod(a[(i, j)], w[i]);
                for &k in &nz {
                    if k <= j {
                        g[j * n + k] = g[j * n + k] + aw * Dd::from_f64(a[(i, k)]);
                    }
                }
            }
        }
        let scale: Vec<Dd> = (0..n)
            .map(|j| {
                let d = g[j * n + j];
                if d.hi > 0.0 && d.is_finite() { Dd::from_f64(1.0) / d.sqrt() } else { Dd::from_f64(1.0) }
            })
            .collect();
        for j in 0..n {
            for k in 0..=j {
                g[j * n + k] = g[j * n + k] * scale[j] * scale[k];
            }
        }
        let chol = cholesky_dd(&mut g, n).then_some(g.clone());
        let pinv = if chol.is_none() {
            let dense = DMatrix::from_fn(n, n, |i, j| {
                let (r, c) = if j <= i { (i, j) } else { (j, i) };
                g[r * n + c].to_f64()
            });
            let svd = dense.svd(true, true);
            let cut = svd.singular_values.max() * 1e-13 * n as f64;
            Some(svd.pseudo_inverse(cut).unwrap_or_else(|_| DMatrix::zeros(n, n)))
        } else {
            None
        };
        let fast = chol.as_ref().map(|l| {
            let s64 = DVector::from_fn(n, |i, _| scale[i].to_f64());
            let l64 = DMatrix::from_fn(n, n, |i, j| if j <= i { l[i * n + j].to_f64() } else { 0.0 });
            (s64, l64)
        });
        Ok(Self { a: a.clone(), abs_a: a.abs(), w: w.clone(), scale, chol, fast, pinv })
    }

    /// Plain f64 solve, accepted only if the computed residual plus a
    /// rigorous bound on its own rounding error meets `tol`.
    fn solve_fast(&self, rhs: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
        let (s64, l64) = self.fast.as_ref()?;
        let (m, n) = self.a.shape();
        let mut x = DMatrix::from_fn(n, rhs.ncols(), |i, c| rhs[(i, c)] * s64[i]);
        if !l64.solve_lower_triangular_mut(&mut x) || !l64.tr_solve_lower_triangular_mut(&mut x) {
            return None;
        }
        for i in 0..n {
            x.row_mut(i).scale_mut(s64[i]);
        }
        let mut az = &self.a * &x;
        let mut abs_az = &self.abs_a * x.abs();
        for i in 0..m {
            az.row_mut(i).scale_mut(self.w[i]);
            abs_az.row_mut(i).scale_mut(self.w[i]);
        }
        let r = rhs - self.a.tr_mul(&az);
        let bound = self.abs_a.tr_mul(&abs_az) + rhs.abs();
        let gamma = 4.0 * (m + n + 4) as f64 * f64::EPSILON;
        for c in 0..rhs.ncols() {
            let b = rhs.column(c).norm();
            let est = r.column(c).norm() + gamma * bound.column(c).norm();
            if !(est <= tol * b) && !(b == 0.0 && est == 0.0) {
                return None;
            }
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.scale.len();
        let mut out = DMatrix::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            let mut x: Vec<Dd> = (0..n).map(|i| Dd::from_f64(b[(i, c)]) * self.scale[i]).collect();
            if let Some(l) = &self.chol {
                for i in 0..n {
                    let mut s = x[i];
                    for k in 0..i {
                        s = s - l[i * n + k] * x[k];
                    }
                    x[i] = s / l[i * n + i];
                }
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for k in i + 1..n {
                        s = s - l[k * n + i] * x[k];
                    }
                    x[i] = s / l[i * n + i];
                }
            } else if let Some(p) = &self.pinv {
                let xf = DVector::from_fn(n, |i, _| x[i].to_f64());
                let y = p * xf;
                x = y.iter().map(|v| Dd::from_f64(*v)).collect();
            }
            for i in 0..n {
                out[(i, c)] = (x[i] * self.scale[i]).to_f64();
            }
        }
        out
    }

    /// Solves `AᵀWA Z = RHS` to relative residual `tol` per column.
    pub fn solve(&self, rhs: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
        let n = self.scale.len();
        if rhs.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.nrows() });
        }
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(DMatrix::zeros(n, rhs.ncols()));
        }
        if let Some(z) = self.solve_fast(rhs, tol) {
            return Ok(z);
        }
        let mut z = self.apply(rhs);
        let mut r = normal_residual(&self.a, &self.w, &z, rhs);
        let mut ratio = column_ratio(&r, rhs);
        for _ in 0..REFINE_STEPS {
            if ratio <= tol * 1e-4 || !ratio.is_finite() {
                break;
            }
            let z2 = &z + self.apply(&r);
            let r2 = normal_residual(&self.a, &self.w, &z2, rhs);
            let ratio2 = column_ratio(&r2, rhs);
            if !(ratio2 < ratio) {
                break;
            }
            z = z2;
            r = r2;
            ratio = ratio2;
        }
        if !(ratio <= tol) || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { residual: ratio });
        }
        Ok(z)
    }
}

/// In-place lower Cholesky of a row-major lower triangle; false when a
/// pivot is not positive.
fn cholesky_dd(g: &mut [Dd], n: usize) -> bool {
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d = d - g[j * n + k] * g[j * n + k];
        }
        if !(d.hi > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        g[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s = s - g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = s / ljj;
        }
    }
    true
}

/// Solves `S Z = RHS` for a symmetric positive semidefinite `S` given
/// directly (no row factor available).
pub fn solve_spd(s: &DMatrix<f64>, rhs: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s.ncols() });
    }
    // S = LLᵀ (or its eigen square root) turns the system into a normal
    // system with unit weights, which the row-factor path handles.
    let eig = s.clone().symmetric_eigen();
    let root = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(j, i)] * eig.eigenvalues[i].max(0.0).sqrt());
    NormalFactor::new(&root, &DVector::from_element(n, 1.0))?.solve(rhs, tol)
}

fn prepare(sim: &Sim, a: &ConstraintMatrix, w: &RowVector, rows: usize) -> Result<(NormalFactor, f64)> {
    if w.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: w.len() });
    }
    if rows != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: rows });
    }
    if let Some(i) = w.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveWeight(i));
    }
    let m = a.nrows().max(2) as f64;
    Ok((NormalFactor::new(a.dense(), w)?, m.powf(-sim.costs.residual_exponent)))
}

pub(super) fn charge_laplacian(sim: &mut Sim, k: usize) {
    let rounds = sim.laplacian_rounds() * k as u64;
    // every edge direction is busy in every round of the solve
    let msgs = 2 * sim.net.edge_count().max(1) as u64 * rounds;
    sim.ledger.charge("laplacian", rounds, msgs, msgs * u64::from(sim.net.bandwidth_bits()));
}

/// Returns `z` with `‖AᵀWA z − rhs‖ ≤ m^(-c)·‖rhs‖` and charges one
/// `T_Laplacian`.
pub fn laplacian_solve(sim: &mut Sim, a: &ConstraintMatrix, w: &RowVector, rhs: &ColVector) -> Result<ColVector> {
    let (s, tol) = prepare(sim, a, w, rhs.len())?;
    charge_laplacian(sim, 1);
    let b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let z = s.solve(&b, tol)?;
    let mut z = DVector::from_column_slice(z.as_slice());
    sim.budget.quantize_in_place(z.iter_mut());
    Ok(z)
}

/// `k` right-hand sides against the same `AᵀWA`; one ledger entry charged
/// `k·T_Laplacian`.
pub fn laplacian_solve_block(
    sim: &mut Sim,
    a: &ConstraintMatrix,
    w: &RowVector,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (s, tol) = prepare(sim, a, w, rhs.nrows())?;
    charge_laplacian(sim, rhs.ncols());
    let mut z = s.solve(rhs, tol)?;
    sim.budget.quantize_in_place(z.iter_mut());
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::Network;
    use crate::linalg::PrecisionBudget;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sim() -> Sim {
        Sim::new(Network::build(&[(0, 1), (1, 2), (2, 3)]).unwrap())
    }

    #[test]
    fn one_by_one() {
        let mut s = sim();
        let a = ConstraintMatrix::from_rows(1, vec![vec![(0, 1.0)], vec![(0, -1.0)]]).unwrap();
        let z = laplacian_solve(&mut s, &a, &DVector::from_element(2, 1.0), &DVector::from_vec(vec![2.0])).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.ledger.total_rounds(), s.laplacian_rounds());
    }

    #[test]
    fn zero_rhs() {
        let mut s = sim();
        let a = ConstraintMatrix::from_dense(&DMatrix::identity(3, 2)).unwrap();
        let z = laplacian_solve(&mut s, &a, &DVector::from_element(3, 1.0), &DVector::zeros(2)).unwrap();
        assert_eq!(z, DVector::zeros(2));
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = sim().with_budget(PrecisionBudget::with_bits(200));
        for _ in 0..100 {
            let m = rng.gen_range(4..=20);
            let n = rng.gen_range(1..=m.min(8));
            let d = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-2.0..2.0));
            let a = ConstraintMatrix::from_dense(&d).unwrap();
            let w = DVector::from_fn(m, |_, _| (rng.gen_range(-6.0..6.0f64)).exp());
            let rhs = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let z = laplacian_solve(&mut s, &a, &w, &rhs).unwrap();
            // oracle: explicit normal-matrix product
            let g = d.transpose() * DMatrix::from_diagonal(&w) * &d;
            let res = (&g * &z - &rhs).norm();
            assert!(res <= (m as f64).powi(-3) * rhs.norm(), "residual {res}");
        }
    }

    #[test]
    fn singular_rhs_outside_range() {
        // Column 1 is never touched, so AᵀWA has a zero row.
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(solve_spd(&s, &rhs, 1e-6), Err(Error::SingularSystem { .. })));
        let ok = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let z = solve_spd(&s, &ok, 1e-6).unwrap();
        assert!((z[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DMatrix::from_fn(12, 4, |_, _| rng.gen_range(-1.0..1.0));
        let a = ConstraintMatrix::from_dense(&d).unwrap();
        let w = DVector::from_fn(12, |i, _| 10f64.powi(i as i32 * 3 - 16));
        let rhs = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let mut s = sim().with_budget(PrecisionBudget::with_bits(1000));
        let z = laplacian_solve(&mut s, &a, &w, &rhs).unwrap();
        let g = a.gram(&w);
        assert!((&g * &z - &rhs).norm() <= 12f64.powi(-3) * rhs.norm());
    }

    #[test]
    fn incidence_with_extreme_weight_spread() {
        // Path incidence plus identity rows, weights spanning 1e-70..1 as
        // near the end of a central path.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let mut rows = Vec::new();
        for j in 0..n {
            rows.push(vec![(j, 1.0)]);
            rows.push(vec![(j, -1.0)]);
            if j + 1 < n {
                rows.push(vec![(j, -1.0), (j + 1, 1.0)]);
            }
        }
        let a = ConstraintMatrix::from_rows(n, rows).unwrap();
        let mut s = sim().with_budget(PrecisionBudget::with_bits(1000));
        for _ in 0..50 {
            let w = DVector::from_fn(a.nrows(), |_, _| if rng.gen_bool(0.3) { 1e-70 } else { 10f64.powf(-rng.gen_range(0.0..24.0)) });
            let x = DVector::from_fn(a.nrows(), |_, _| rng.gen_range(-1.0..1.0));
            let rhs = a.dense().tr_mul(&w.map(f64::sqrt).component_mul(&x));
            let z = laplacian_solve(&mut s, &a, &w, &rhs).unwrap();
            let res = normal_residual(a.dense(), &w, &DMatrix::from_column_slice(n, 1, z.as_slice()), &DMatrix::from_column_slice(n, 1, rhs.as_slice()));
            assert!(res.norm() <= (a.nrows() as f64).powi(-3) * rhs.norm());
        }
    }

    #[test]
    fn block_charges_k_times() {
        let mut s = sim();
        let a = ConstraintMatrix::from_dense(&DMatrix::identity(3, 3)).unwrap();
        let rhs = DMatrix::from_element(3, 5, 1.0);
        let z = laplacian_solve_block(&mut s, &a, &DVector::from_element(3, 2.0), &rhs).unwrap();
        assert!((z[(2, 4)] - 0.5).abs() < 1e-12);
        assert_eq!(s.ledger.entries().len(), 1);
        assert_eq!(s.ledger.total_rounds(), 5 * s.laplacian_rounds());
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let mut s = sim();
        let a = ConstraintMatrix::from_dense(&DMatrix::identity(2, 2)).unwrap();
        let w = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(laplacian_solve(&mut s, &a, &w, &DVector::zeros(2)), Err(Error::NonPositiveWeight(1))));
    }
}
