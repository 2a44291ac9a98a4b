//! `argmax aᵀx` subject to `‖x‖₂ + ‖l⁻¹x‖∞ ≤ 1`.
//!
//! Writing `t = ‖l⁻¹x‖∞`, the optimum for fixed `t` caps the coordinates
//! with the largest `|a_i|/l_i` at `±t·l_i` and spends the remaining ℓ₂
//! budget on the rest in proportion to `a`. The value
//!
//! `g(t) = t·Σ_C |a_k|l_k + √(((1−t)² − t²·Σ_C l_k²)·(‖a‖² − Σ_C a_k²))`
//!
//! is concave in `t`, and the capped set `C` only shrinks as `t` grows, so a
//! binary search over the threshold ratio finds the maximizing prefix
//! without ever sorting.

use nalgebra::DVector;

use crate::congest::{broadcast_aggregate, Monoid, Sim};
use crate::error::{Error, Result};
use crate::linalg::RowVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedBallQuery {
    pub a: RowVector,
    pub l: RowVector,
}

impl MixedBallQuery {
    pub fn new(a: RowVector, l: RowVector) -> Result<Self> {
        if a.len() != l.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: l.len() });
        }
        if let Some(i) = l.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveWeight(i));
        }
        Ok(Self { a, l })
    }

    fn ratio(&self, i: usize) -> f64 {
        self.a[i].abs() / self.l[i]
    }
}

/// Sums over the capped prefix `{k : |a_k|/l_k ≥ θ}` and over the strict
/// prefix `{k : |a_k|/l_k > θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrefixSums {
    pub s_al: f64,
    pub s_a2: f64,
    pub s_l2: f64,
    pub s_al_strict: f64,
    pub s_a2_strict: f64,
    pub s_l2_strict: f64,
}

/// `‖x‖₂ + ‖l⁻¹x‖∞`.
pub fn mixed_ball_norm(x: &RowVector, l: &RowVector) -> f64 {
    x.norm() + x.iter().zip(l.iter()).map(|(v, w)| v.abs() / w).fold(0.0, f64::max)
}

fn aggregate_sums(sim: &mut Sim, q: &MixedBallQuery, keep: impl Fn(f64) -> bool, bits: u32) -> (f64, f64, f64) {
    let m = q.a.len();
    let pick = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..m).map(|i| if keep(q.ratio(i)) { f(i) } else { 0.0 }).collect() };
    let al = pick(&|i| q.a[i].abs() * q.l[i]);
    let a2 = pick(&|i| q.a[i] * q.a[i]);
    let l2 = pick(&|i| q.l[i] * q.l[i]);
    (
        broadcast_aggregate(sim, &al, Monoid::Sum, bits),
        broadcast_aggregate(sim, &a2, Monoid::Sum, bits),
        broadcast_aggregate(sim, &l2, Monoid::Sum, bits),
    )
}

/// Tree-aggregated prefix sums at `threshold`; six aggregations.
pub fn prefix_sums_at(sim: &mut Sim, q: &MixedBallQuery, threshold: f64) -> PrefixSums {
    let bits = sim.budget.value_bits;
    let (s_al, s_a2, s_l2) = aggregate_sums(sim, q, |r| r > 0.0 && r >= threshold, bits);
    let (s_al_strict, s_a2_strict, s_l2_strict) = aggregate_sums(sim, q, |r| r > 0.0 && r > threshold, bits);
    PrefixSums { s_al, s_a2, s_l2, s_al_strict, s_a2_strict, s_l2_strict }
}

/// `g_C(t)` for a capped set with sums `(s_al, s_l2)` and uncapped mass `b`.
fn g_value(s_al: f64, s_l2: f64, b: f64, t: f64) -> f64 {
    let q = (1.0 - t).powi(2) - t * t * s_l2;
    t * s_al + (q.max(0.0) * b.max(0.0)).sqrt()
}

fn g_slope(s_al: f64, s_l2: f64, b: f64, t: f64) -> f64 {
    if b <= 0.0 {
        return s_al;
    }
    let q = (1.0 - t).powi(2) - t * t * s_l2;
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    s_al - b * ((1.0 - t) + t * s_l2) / (q * b).sqrt()
}

/// Largest `t` with `(1−t)² ≥ t²·s_l2`.
fn t_domain_end(s_l2: f64) -> f64 {
    1.0 / (1.0 + s_l2.sqrt())
}

/// `t` at which the cap threshold `t/κ` equals `theta` for this prefix.
fn t_at_threshold(s_l2: f64, b: f64, theta: f64) -> f64 {
    if theta.is_infinite() {
        return if s_l2 > 0.0 { t_domain_end(s_l2) } else { 1.0 };
    }
    if theta <= 0.0 {
        return 0.0;
    }
    let denom = (b + theta * theta * s_l2).sqrt();
    if denom == 0.0 {
        return 1.0;
    }
    let s = theta / denom;
    s / (1.0 + s)
}

/// Maximum of `g_C` over `[t_lo, t_hi]`: closed-form stationary points of
/// the concave function, clamped to the interval.
pub fn eval_gi(sums: &PrefixSums, a_norm2: f64, t_interval: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = t_interval;
    if !(lo <= hi) {
        return Err(Error::EmptyInterval);
    }
    let c = sums.s_al;
    let s = sums.s_l2;
    let b = (a_norm2 - sums.s_a2).max(0.0);
    let mut cands = vec![lo, hi];
    if b > 0.0 {
        // Squared stationarity: a'K t² − 2K t + (K − B S) = 0.
        let ap = 1.0 - s;
        let k = c * c - b * ap;
        let qa = ap * k;
        let qb = -2.0 * k;
        let qc = k - b * s;
        if qa.abs() > 1e-300 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let r = -0.5 * (qb + qb.signum() * sq);
                if r != 0.0 {
                    cands.push(r / qa);
                    cands.push(qc / r);
                }
            }
        } else if qb != 0.0 {
            cands.push(-qc / qb);
        }
    }
    let best = cands
        .into_iter()
        .filter(|t| t.is_finite())
        .map(|t| t.clamp(lo, hi))
        .map(|t| (t, g_value(c, s, b, t)))
        .fold((lo, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(best)
}

/// Assembles `x` for capped set `{ratio ≥ threshold}` at parameter `t`.
fn assemble(q: &MixedBallQuery, ratios: &[f64], threshold: f64, t: f64, s_l2: f64, b: f64) -> RowVector {
    let kappa = if b > 0.0 { (((1.0 - t).powi(2) - t * t * s_l2).max(0.0) / b).sqrt() } else { 0.0 };
    DVector::from_fn(q.a.len(), |i, _| {
        let r = ratios[i];
        if r > 0.0 && r >= threshold {
            t * q.a[i].signum() * q.l[i]
        } else {
            kappa * q.a[i]
        }
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    threshold: f64,
    t: f64,
    g: f64,
    s_l2: f64,
    b: f64,
}

/// Distributed projection. Every probe of the threshold search is recorded
/// as a `mixed_ball_probe` marker; the search runs on ratios quantized to
/// the precision grid.
pub fn project_mixed_ball(sim: &mut Sim, q: &MixedBallQuery) -> Result<RowVector> {
    let m = q.a.len();
    let bits = sim.budget.value_bits;
    let budget = sim.budget;
    let ratios: Vec<f64> = (0..m).map(|i| if q.a[i] == 0.0 { 0.0 } else { budget.quantize(q.ratio(i)) }).collect();
    let positive: Vec<f64> = ratios.iter().map(|&r| if r > 0.0 { r } else { f64::NAN }).collect();
    let a2: Vec<f64> = q.a.iter().map(|v| v * v).collect();
    let a_norm2 = broadcast_aggregate(sim, &a2, Monoid::Sum, bits);
    if a_norm2 == 0.0 {
        return Ok(DVector::zeros(m));
    }
    let nan_to = |v: &[f64], fill: f64| -> Vec<f64> { v.iter().map(|x| if x.is_nan() { fill } else { *x }).collect() };
    let rmax = broadcast_aggregate(sim, &nan_to(&positive, f64::NEG_INFINITY), Monoid::Max, bits);
    let rmin = broadcast_aggregate(sim, &nan_to(&positive, f64::INFINITY), Monoid::Min, bits);

    let in_prefix = |r: f64, theta: f64| r > 0.0 && r >= theta;
    let sums_at = |sim: &mut Sim, theta: f64| {
        let mut s = (0.0, 0.0, 0.0);
        let pick = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..m).map(|i| if in_prefix(ratios[i], theta) { f(i) } else { 0.0 }).collect()
        };
        s.0 = broadcast_aggregate(sim, &pick(&|i| q.a[i].abs() * q.l[i]), Monoid::Sum, bits);
        s.1 = broadcast_aggregate(sim, &pick(&|i| q.a[i] * q.a[i]), Monoid::Sum, bits);
        s.2 = broadcast_aggregate(sim, &pick(&|i| q.l[i] * q.l[i]), Monoid::Sum, bits);
        s
    };
    let evaluate = |sim: &mut Sim, theta: f64| -> (Candidate, f64, f64) {
        let (s_al, s_a2, s_l2) = if theta.is_infinite() { (0.0, 0.0, 0.0) } else { sums_at(sim, theta) };
        let next: Vec<f64> = (0..m).map(|i| if ratios[i] > 0.0 && ratios[i] < theta { ratios[i] } else { 0.0 }).collect();
        let rho_next = if theta.is_infinite() { rmax } else { broadcast_aggregate(sim, &next, Monoid::Max, bits) };
        let b = (a_norm2 - s_a2).max(0.0);
        let t_lo = t_at_threshold(s_l2, b, rho_next);
        let t_hi = t_at_threshold(s_l2, b, theta);
        let sums = PrefixSums { s_al, s_a2, s_l2, ..PrefixSums::default() };
        let (t, g) = eval_gi(&sums, a_norm2, (t_lo, t_hi.max(t_lo))).unwrap_or((t_lo, f64::NEG_INFINITY));
        let cand = Candidate { threshold: theta, t, g, s_l2, b };
        (cand, g_slope(s_al, s_l2, b, t_lo), if t_hi < 1.0 { g_slope(s_al, s_l2, b, t_hi) } else { -1.0 })
    };

    // The empty prefix needs only ‖a‖² and the largest ratio, both known.
    let (mut best, _, _) = evaluate(sim, f64::INFINITY);
    let (mut lo, mut hi) = (rmin, rmax);
    let mut guard = 0;
    while lo <= hi && guard < 4096 {
        guard += 1;
        sim.ledger.mark("mixed_ball_probe");
        let probe = lo + (hi - lo) / 2.0;
        // closest appearing ratio: the largest one ≤ probe, else the smallest ≥ probe
        let below: Vec<f64> = ratios.iter().map(|&r| if r > 0.0 && r >= lo && r <= probe { r } else { f64::NEG_INFINITY }).collect();
        let mut theta = broadcast_aggregate(sim, &below, Monoid::Max, bits);
        if theta == f64::NEG_INFINITY {
            let above: Vec<f64> = ratios.iter().map(|&r| if r > 0.0 && r >= probe && r <= hi { r } else { f64::INFINITY }).collect();
            theta = broadcast_aggregate(sim, &above, Monoid::Min, bits);
            if theta == f64::INFINITY {
                break;
            }
        }
        let (cand, slope_lo, slope_hi) = evaluate(sim, theta);
        if cand.g > best.g {
            best = cand;
        }
        if slope_hi > 0.0 {
            // maximum lies at larger t: fewer capped coordinates
            lo = next_up(theta);
        } else if slope_lo < 0.0 {
            hi = next_down(theta);
        } else {
            break;
        }
    }
    let x = assemble(q, &ratios, best.threshold, best.t, best.s_l2, best.b);
    let norm = mixed_ball_norm(&x, &q.l);
    // one final broadcast of (threshold, t, κ)
    broadcast_aggregate(sim, &[best.t], Monoid::Max, bits);
    Ok(if norm > 1.0 { x / norm } else { x })
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    let bits = x.to_bits();
    if x == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

/// Probe budget for the threshold search: `⌈log₂((r_max − r_min)/ε + 2)⌉`.
pub fn probe_bound(q: &MixedBallQuery, eps: f64) -> usize {
    let rs: Vec<f64> = (0..q.a.len()).filter(|&i| q.a[i] != 0.0).map(|i| q.ratio(i)).collect();
    if rs.is_empty() {
        return 0;
    }
    let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
    ((hi - lo) / eps + 2.0).log2().ceil() as usize
}

/// Optimal value of the fixed-`t` subproblem by explicit sorting: the
/// reference the distributed search is checked against.
pub fn oracle_g(a: &RowVector, l: &RowVector, t: f64) -> (f64, RowVector) {
    let m = a.len();
    let mut order: Vec<usize> = (0..m).filter(|&i| a[i] != 0.0).collect();
    order.sort_by(|&i, &j| (a[j].abs() / l[j]).total_cmp(&(a[i].abs() / l[i])).then(i.cmp(&j)));
    let budget = (1.0 - t).max(0.0);
    let cap: RowVector = DVector::from_fn(m, |i, _| a[i].signum() * t * l[i]);
    if cap.iter().zip(a.iter()).map(|(c, ai)| if *ai != 0.0 { c * c } else { 0.0 }).sum::<f64>() <= budget * budget {
        let x = DVector::from_fn(m, |i, _| if a[i] != 0.0 { cap[i] } else { 0.0 });
        return (a.dot(&x), x);
    }
    // the first k sorted coordinates are capped
    for k in 0..=order.len() {
        let capped = &order[..k];
        let sl2: f64 = capped.iter().map(|&i| l[i] * l[i]).sum::<f64>() * t * t;
        let rest: f64 = order[k..].iter().map(|&i| a[i] * a[i]).sum();
        let left = budget * budget - sl2;
        if left < 0.0 || rest == 0.0 {
            continue;
        }
        let kappa = (left / rest).sqrt();
        let ok_in = capped.iter().all(|&i| kappa * a[i].abs() >= t * l[i] * (1.0 - 1e-12));
        let ok_out = order[k..].iter().all(|&i| kappa * a[i].abs() <= t * l[i] * (1.0 + 1e-12));
        if ok_in && ok_out {
            let mut x = DVector::zeros(m);
            for &i in capped {
                x[i] = cap[i];
            }
            for &i in &order[k..] {
                x[i] = kappa * a[i];
            }
            return (a.dot(&x), x);
        }
    }
    (0.0, DVector::zeros(m))
}

/// Brute-force projection for small `m`: a uniform `t`-grid followed by
/// golden-section refinement around the best grid point.
pub fn grid_oracle_project(a: &RowVector, l: &RowVector, resolution: f64) -> (RowVector, f64) {
    if a.iter().all(|v| *v == 0.0) {
        return (DVector::zeros(a.len()), 0.0);
    }
    let steps = (1.0 / resolution).ceil() as usize;
    let mut best_t = 0.0;
    let mut best = f64::NEG_INFINITY;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (g, _) = oracle_g(a, l, t);
        if g > best {
            best = g;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = ((best_t - resolution).max(0.0), (best_t + resolution).min(1.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let t1 = hi - phi * (hi - lo);
        let t2 = lo + phi * (hi - lo);
        if oracle_g(a, l, t1).0 < oracle_g(a, l, t2).0 {
            lo = t1;
        } else {
            hi = t2;
        }
    }
    let (g, x) = oracle_g(a, l, 0.5 * (lo + hi));
    if g >= best {
        (x, g)
    } else {
        (oracle_g(a, l, best_t).1, best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::Network;
    use crate::linalg::PrecisionBudget;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sim() -> Sim {
        Sim::new(Network::build(&[(0, 1), (1, 2), (2, 3)]).unwrap()).with_budget(PrecisionBudget::with_bits(48))
    }

    fn v(x: &[f64]) -> RowVector {
        DVector::from_column_slice(x)
    }

    fn q(a: &[f64], l: &[f64]) -> MixedBallQuery {
        MixedBallQuery::new(v(a), v(l)).unwrap()
    }

    #[test]
    fn scalar_case() {
        let mut s = sim();
        let x = project_mixed_ball(&mut s, &q(&[1.0], &[1.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9);
        let (xo, g) = grid_oracle_project(&v(&[1.0]), &v(&[1.0]), 1e-4);
        assert!((g - 0.5).abs() < 1e-9 && (xo[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn one_hot() {
        let mut s = sim();
        let x = project_mixed_ball(&mut s, &q(&[5.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9 && x[1] == 0.0);
        assert!((5.0 * x[0] - 2.5).abs() < 1e-8);
    }

    #[test]
    fn box_inactive() {
        let mut s = sim();
        let a = v(&[3.0, -4.0, 1.0]);
        let x = project_mixed_ball(&mut s, &MixedBallQuery::new(a.clone(), v(&[1e6; 3])).unwrap()).unwrap();
        assert!((a.dot(&x) - a.norm()).abs() < 1e-3);
    }

    #[test]
    fn zero_direction() {
        let mut s = sim();
        let x = project_mixed_ball(&mut s, &q(&[0.0, 0.0], &[1.0, 2.0])).unwrap();
        assert_eq!(x, DVector::zeros(2));
        assert_eq!(grid_oracle_project(&v(&[0.0]), &v(&[1.0]), 1e-3).1, 0.0);
    }

    #[test]
    fn symmetric_oracle() {
        let (x, _) = grid_oracle_project(&v(&[1.0, 1.0]), &v(&[1.0, 1.0]), 1e-4);
        assert!((x[0] - x[1]).abs() <= 1e-4);
    }

    #[test]
    fn prefix_sum_examples() {
        let mut s = sim();
        let qq = q(&[3.0, 1.0], &[1.0, 1.0]);
        let p = prefix_sums_at(&mut s, &qq, 2.0);
        assert_eq!((p.s_al, p.s_a2, p.s_l2), (3.0, 9.0, 1.0));
        let all = prefix_sums_at(&mut s, &qq, 0.0);
        assert_eq!((all.s_a2, all.s_l2), (10.0, 2.0));
        let none = prefix_sums_at(&mut s, &qq, 4.0);
        assert_eq!((none.s_al, none.s_a2, none.s_l2), (0.0, 0.0, 0.0));
        assert_eq!(s.ledger.count_under("", "aggregate"), 18);
    }

    #[test]
    fn eval_gi_special_prefixes() {
        // everything capped: linear in t, maximized at the right end
        let full = PrefixSums { s_al: 2.0, s_a2: 5.0, s_l2: 2.0, ..PrefixSums::default() };
        let (t, g) = eval_gi(&full, 5.0, (0.0, 0.3)).unwrap();
        assert!((t - 0.3).abs() < 1e-15 && (g - 0.6).abs() < 1e-12);
        // nothing capped: ‖a‖·(1 − t), maximized at t = 0
        let (t, g) = eval_gi(&PrefixSums::default(), 4.0, (0.0, 0.5)).unwrap();
        assert_eq!(t, 0.0);
        assert!((g - 2.0).abs() < 1e-12);
        assert!(matches!(eval_gi(&full, 5.0, (0.4, 0.3)), Err(Error::EmptyInterval)));
    }

    #[test]
    fn matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let m = rng.gen_range(1..=6);
            let a = DVector::from_fn(m, |_, _| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-3.0..3.0) });
            let l = DVector::from_fn(m, |_, _| rng.gen_range(0.05..3.0));
            let mut s = sim();
            let qq = MixedBallQuery::new(a.clone(), l.clone()).unwrap();
            let x = project_mixed_ball(&mut s, &qq).unwrap();
            let (_, g) = grid_oracle_project(&a, &l, 1e-3);
            assert!(mixed_ball_norm(&x, &l) <= 1.0 + 1e-9);
            assert!((a.dot(&x) - g).abs() <= 1e-4, "{} vs {g} a={a:?} l={l:?}", a.dot(&x));
            for i in 0..m {
                assert!(x[i] == 0.0 || x[i].signum() == a[i].signum());
            }
            assert!(s.ledger.count_under("", "mixed_ball_probe") <= probe_bound(&qq, s.budget.epsilon_machine));
        }
    }

    #[test]
    fn g_is_concave_and_threshold_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let m = rng.gen_range(1..=6);
            let a = DVector::from_fn(m, |_, _| rng.gen_range(-3.0..3.0));
            let l = DVector::from_fn(m, |_, _| rng.gen_range(0.05..3.0));
            let n = 200;
            let g: Vec<f64> = (0..=n).map(|k| oracle_g(&a, &l, k as f64 / n as f64).0).collect();
            for k in 1..n {
                assert!(g[k - 1] - 2.0 * g[k] + g[k + 1] <= 1e-8);
            }
            // capped count is non-increasing in t
            let capped = |t: f64| {
                let x = oracle_g(&a, &l, t).1;
                (0..m).filter(|&i| (x[i].abs() - t * l[i]).abs() <= 1e-12 && x[i] != 0.0).count()
            };
            let mut last = usize::MAX;
            for k in 1..n {
                let c = capped(k as f64 / n as f64);
                assert!(c <= last || c == 0);
                last = c;
            }
        }
    }
}
