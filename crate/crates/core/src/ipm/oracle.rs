//! Dense reference solvers used only to check the distributed ones.

use nalgebra::{DMatrix, DVector};

use super::{LpInstance, Order, Slacks};
use crate::linalg::{ColVector, RowVector};

/// Optimal value and vertex of a box-bounded LP by enumerating every basis.
/// `None` when no basis is feasible or some bound is infinite.
pub fn vertex_enumeration(
    a: &DMatrix<f64>,
    b: &ColVector,
    c: &RowVector,
    l: &RowVector,
    u: &RowVector,
) -> Option<(f64, RowVector)> {
    let (m, n) = a.shape();
    if l.iter().chain(u.iter()).any(|v| !v.is_finite()) || n > m {
        return None;
    }
    let tol = 1e-9 * (1.0 + u.amax().max(l.amax()));
    let mut best: Option<(f64, RowVector)> = None;
    let mut basis = Vec::with_capacity(n);
    let mut visit = |basis: &[usize]| {
        let nonbasic: Vec<usize> = (0..m).filter(|i| !basis.contains(i)).collect();
        let ab = DMatrix::from_fn(n, n, |r, k| a[(basis[k], r)]);
        let lu = ab.clone().lu();
        if ab.determinant().abs() < 1e-12 {
            return;
        }
        for mask in 0u32..(1 << nonbasic.len()) {
            let mut x = DVector::zeros(m);
            for (bit, &i) in nonbasic.iter().enumerate() {
                x[i] = if mask >> bit & 1 == 1 { u[i] } else { l[i] };
            }
            let rhs = b - a.transpose() * &x;
            let Some(xb) = lu.solve(&rhs) else { continue };
            for (k, &i) in basis.iter().enumerate() {
                x[i] = xb[k];
            }
            if (0..m).any(|i| x[i] < l[i] - tol || x[i] > u[i] + tol) {
                continue;
            }
            let val = c.dot(&x);
            if best.as_ref().map_or(true, |(v, _)| val < *v) {
                best = Some((val, x));
            }
        }
    };
    fn choose(start: usize, m: usize, n: usize, basis: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if basis.len() == n {
            f(basis);
            return;
        }
        for i in start..m {
            basis.push(i);
            choose(i + 1, m, n, basis, f);
            basis.pop();
        }
    }
    choose(0, m, n, &mut basis, &mut visit);
    best
}

/// Minimizer of `t·costᵀx + Σ wᵢφᵢ(xᵢ)` over `{Aᵀx = b}` by damped Newton from
/// `lp.x0`, returned with its slacks.
pub fn newton_center(lp: &LpInstance, w: &RowVector, t: f64, cost: &RowVector) -> (RowVector, Slacks) {
    let a = lp.a.dense();
    let mut x = lp.x0.clone();
    let mut s = lp.s0.clone();
    let f = |s: &Slacks, x: &RowVector| -> f64 {
        match lp.barrier.eval(s, Order::Value, 0.0) {
            Ok(phi) => t * cost.dot(x) + w.dot(&phi),
            Err(_) => f64::INFINITY,
        }
    };
    for _ in 0..500 {
        let g = cost * t + w.component_mul(&lp.barrier.eval(&s, Order::First, 0.0).expect("interior"));
        let h = w.component_mul(&lp.barrier.eval(&s, Order::Second, 0.0).expect("interior"));
        let hinv = h.map(|v| 1.0 / v);
        let ah = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * hinv[i]);
        let k = a.transpose() * &ah;
        let lambda = k.clone().lu().solve(&(ah.transpose() * &g)).expect("full rank");
        let dx = -(g - a * lambda).component_mul(&hinv);
        let decrement = dx.dot(&h.component_mul(&dx));
        if decrement < 1e-28 {
            break;
        }
        let f0 = f(&s, &x);
        let mut step = 1.0;
        loop {
            let trial = s.step(&(&dx * step));
            let xt = &x + &dx * step;
            if trial.contact(0.0).is_none() && f(&trial, &xt) <= f0 - 0.25 * step * decrement {
                x = xt;
                s = trial;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (x, s);
            }
        }
    }
    (x, s)
}
