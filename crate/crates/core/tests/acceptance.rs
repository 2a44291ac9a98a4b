//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use congest_mcf::congest::{CostModel, Network, Sim, TlapModel};
use congest_mcf::experiment::{run_batch, ExperimentConfig, GeneratorSpec, InstanceSource};
use congest_mcf::flow::{build_flow_lp, is_diagonally_dominant, FlowOptions};
use congest_mcf::experiment::generate_instance;
use congest_mcf::ipm::{
    lp_solve_observed, vertex_enumeration, while_iterations, IpmConstants, LpInstance, Schedule,
    StepReport,
};
use congest_mcf::leverage::{compute_leverage_scores, exact_leverage_scores};
use congest_mcf::lewis::{compute_initial_weights, lewis_residual, WeightConstants};
use congest_mcf::linalg::{ConstraintMatrix, PrecisionBudget};
use congest_mcf::mixed_ball::{grid_oracle_project, mixed_ball_norm, oracle_g, probe_bound, project_mixed_ball, MixedBallQuery};
use congest_mcf::tuning::Tuning;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Per-step invariants gathered from every suite that runs the solver.
#[derive(Default)]
struct Invariants {
    steps: usize,
    drift_violations: usize,
    interior_violations: usize,
    worst_drift: f64,
    concavity_samples: usize,
    concavity_violations: usize,
    gram_checks: usize,
    gram_violations: usize,
}

impl Invariants {
    fn observe(&mut self, r: &StepReport) {
        self.steps += 1;
        // drift is already relative to ‖b‖ (or to ‖|A|ᵀ|x|‖ when b = 0)
        if !(r.drift <= 1e-6) {
            self.drift_violations += 1;
        }
        self.worst_drift = self.worst_drift.max(r.drift);
        if !(r.min_slack > 0.0) {
            self.interior_violations += 1;
        }
    }
}

fn path_sim(nodes: usize, seed: u64, tuning: Tuning) -> Sim {
    let edges: Vec<(usize, usize)> = (0..nodes - 1).map(|i| (i, i + 1)).collect();
    Sim::new(Network::build(&edges).unwrap().with_seed(seed)).with_tuning(tuning)
}

fn exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let configs: Vec<ExperimentConfig> = (0..200u64)
        .map(|seed| {
            let nodes = rng.gen_range(2..=8);
            let pairs = nodes * (nodes - 1) / 2;
            let arcs = rng.gen_range(nodes - 1..=pairs.min(14));
            let spec = GeneratorSpec { nodes, arcs, max_cap: 4, max_cost: 4, seed: 1000 + seed };
            ExperimentConfig { seed, timing: false, ..ExperimentConfig::new(InstanceSource::Generated(spec)) }
        })
        .collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let reports = run_batch(&configs, threads);
    let terminated = reports.iter().filter(|r| r.error.is_none()).count();
    let matched = reports.iter().filter(|r| r.error.is_none() && r.matches).count();
    let retries: usize = reports.iter().map(|r| r.retries_used).sum();
    let elapsed = start.elapsed();
    let pass = matched == terminated && terminated * 100 >= 99 * reports.len() && elapsed <= Duration::from_secs(900);
    let failures: Vec<String> = reports
        .iter()
        .filter(|r| r.error.is_some() || !r.matches)
        .map(|r| format!("seed {}: {}", r.seed, r.error.as_ref().map_or("mismatch".to_string(), |e| e.kind.clone())))
        .collect();
    Outcome {
        name: "exact min-cost max-flow",
        pass,
        detail: format!(
            "{matched}/{terminated} terminated runs match the oracle, {terminated}/{} terminated, {retries} retries, {:.0}s{}",
            reports.len(),
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!(", failures: {}", failures.join("; ")) }
        ),
    }
}

fn random_box_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LpInstance {
    let d = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let l = DVector::from_fn(m, |_, _| rng.gen_range(-2.0..0.0));
    let u = DVector::from_fn(m, |i, _| l[i] + rng.gen_range(0.5..3.0));
    let x0 = DVector::from_fn(m, |i, _| l[i] + (u[i] - l[i]) * rng.gen_range(0.1..0.9));
    let c = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let b = d.transpose() * &x0;
    LpInstance::new(ConstraintMatrix::from_dense(&d).unwrap(), b, c, l, u, x0).unwrap()
}

fn lp_guarantee(inv: &mut Invariants) -> Outcome {
    let eps = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (runs, mut feasible, mut optimal) = (50, 0, 0);
    let mut notes = Vec::new();
    for k in 0..runs {
        let m = rng.gen_range(3..=10);
        let n = rng.gen_range(1..=4.min(m - 1));
        let lp = random_box_lp(&mut rng, m, n);
        let (opt, _) = vertex_enumeration(lp.a.dense(), &lp.b, &lp.c, &lp.barrier.l, &lp.barrier.u).unwrap();
        let mut sim = path_sim(4, k, Tuning::desk());
        match lp_solve_observed(&mut sim, &lp, eps, &mut |r| inv.observe(r)) {
            Ok(x) => {
                let in_box = (0..m).all(|i| lp.barrier.l[i] <= x[i] && x[i] <= lp.barrier.u[i]);
                let drift = (lp.a.dense().transpose() * &x - &lp.b).norm();
                if in_box && drift <= 1e-6 * lp.b.norm() {
                    feasible += 1;
                }
                if lp.objective(&x) <= opt + eps {
                    optimal += 1;
                } else {
                    notes.push(format!("run {k}: gap {:.2e}", lp.objective(&x) - opt));
                }
            }
            Err(e) => notes.push(format!("run {k}: {e}")),
        }
    }
    Outcome {
        name: "LP additive guarantee",
        pass: feasible == runs && optimal * 100 >= 95 * runs,
        detail: format!("{optimal}/{runs} within eps of the vertex optimum, {feasible}/{runs} feasible{}", join(&notes)),
    }
}

fn join(notes: &[String]) -> String {
    if notes.is_empty() { String::new() } else { format!(" ({})", notes.join("; ")) }
}

fn leverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (runs, mut good) = (100, 0);
    let mut worst: f64 = 0.0;
    for k in 0..runs {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(n..=20);
        let d = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let w = DVector::from_fn(m, |_, _| rng.gen_range(0.2..3.0));
        let a = ConstraintMatrix::from_dense(&d).unwrap();
        let mut sim = path_sim(8, 300 + k, Tuning::default());
        let approx = compute_leverage_scores(&mut sim, &a, &w, 0.1).unwrap().sigma;
        let wd = DMatrix::from_fn(m, n, |i, j| w[i] * d[(i, j)]);
        let exact = exact_leverage_scores(&wd).unwrap().sigma;
        let err = (0..m).map(|i| (approx[i] - exact[i]).abs() / exact[i]).fold(0.0, f64::max);
        worst = worst.max(err);
        if err <= 0.1 {
            good += 1;
        }
    }
    Outcome {
        name: "leverage scores",
        pass: good >= 95,
        detail: format!("{good}/{runs} runs within 1±0.1 on every coordinate, worst relative error {worst:.3}"),
    }
}

fn lewis() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let tuning = Tuning { relax: 1e4, jl_eta_floor: 0.1, ..Tuning::default() };
    let (runs, mut good) = (50, 0);
    let mut worst: f64 = 0.0;
    for k in 0..runs {
        let d = DMatrix::from_fn(20, 5, |_, _| rng.gen_range(-1.0..1.0));
        let a = ConstraintMatrix::from_dense(&d).unwrap();
        let p = WeightConstants::new(20, 5, &tuning).p;
        let mut sim = path_sim(5, 40 + k, tuning);
        let res = compute_initial_weights(&mut sim, &a, &DVector::from_element(20, 1.0), p, 0.05)
            .and_then(|w| lewis_residual(&d, p, &w))
            .unwrap_or(f64::INFINITY);
        worst = worst.max(res);
        if res <= 0.05 {
            good += 1;
        }
    }
    Outcome {
        name: "Lewis weights",
        pass: good * 100 >= 90 * runs,
        detail: format!("{good}/{runs} with residual <= 0.05, worst {worst:.4}"),
    }
}

fn mixed_ball() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (runs, mut objective, mut feasible, mut probes) = (200, 0, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..runs {
        let m = rng.gen_range(1..=6);
        let a = DVector::from_fn(m, |_, _| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-3.0..3.0) });
        let l = DVector::from_fn(m, |_, _| rng.gen_range(0.05..3.0));
        let mut sim = path_sim(4, 0, Tuning::default()).with_budget(PrecisionBudget::with_bits(48));
        let q = MixedBallQuery::new(a.clone(), l.clone()).unwrap();
        let x = project_mixed_ball(&mut sim, &q).unwrap();
        let (_, g) = grid_oracle_project(&a, &l, 1e-3);
        let gap = (a.dot(&x) - g).abs();
        worst = worst.max(gap);
        objective += usize::from(gap <= 1e-4);
        feasible += usize::from(mixed_ball_norm(&x, &l) <= 1.0 + 1e-9);
        probes += usize::from(sim.ledger.count_under("", "mixed_ball_probe") <= probe_bound(&q, sim.budget.epsilon_machine));
    }
    Outcome {
        name: "mixed-ball projection",
        pass: objective == runs && feasible == runs && probes == runs,
        detail: format!(
            "objective {objective}/{runs} (worst gap {worst:.1e}), feasible {feasible}/{runs}, probe bound {probes}/{runs}"
        ),
    }
}

/// Flow LPs observed step by step, their Gram matrices, and `g(t)` samples.
fn structural_suites(inv: &mut Invariants) {
    for seed in 0..8u64 {
        let nodes = 2 + (seed as usize % 5);
        let spec = GeneratorSpec { nodes, arcs: nodes - 1 + (seed as usize % 3).min((nodes - 1) * (nodes - 2) / 2), max_cap: 4, max_cost: 4, seed };
        let inst = generate_instance(&spec).unwrap();
        let flp = build_flow_lp(&inst, seed, &FlowOptions::default()).unwrap();
        let mut sim = Sim::new(inst.network().unwrap().with_seed(seed))
            .with_tuning(Tuning::desk())
            .with_budget(PrecisionBudget::for_lp(flp.lp.m(), flp.lp.big_u, flp.epsilon_lp));
        if lp_solve_observed(&mut sim, &flp.lp, flp.epsilon_lp, &mut |r| inv.observe(r)).is_err() {
            inv.interior_violations += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let w = DVector::from_fn(flp.lp.m(), |_, _| 10f64.powf(rng.gen_range(-6.0..6.0)));
            inv.gram_checks += 1;
            if !is_diagonally_dominant(&flp.lp.a.gram(&w)) {
                inv.gram_violations += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let m = rng.gen_range(1..=6);
        let a = DVector::from_fn(m, |_, _| rng.gen_range(-3.0..3.0));
        let l = DVector::from_fn(m, |_, _| rng.gen_range(0.05..3.0));
        let n = 200;
        let g: Vec<f64> = (0..=n).map(|k| oracle_g(&a, &l, k as f64 / n as f64).0).collect();
        for k in 1..n {
            inv.concavity_samples += 1;
            if g[k - 1] - 2.0 * g[k] + g[k + 1] > 1e-8 {
                inv.concavity_violations += 1;
            }
        }
    }
}

fn structural(inv: &Invariants) -> Outcome {
    let violations = inv.drift_violations + inv.interior_violations + inv.concavity_violations + inv.gram_violations;
    Outcome {
        name: "structural invariants",
        pass: violations == 0 && inv.steps > 0,
        detail: format!(
            "{} centering steps: {} drift and {} interiority violations (worst drift {:.1e}); {} concavity violations in {} samples; {} of {} Gram matrices not diagonally dominant",
            inv.steps,
            inv.drift_violations,
            inv.interior_violations,
            inv.worst_drift,
            inv.concavity_violations,
            inv.concavity_samples,
            inv.gram_violations,
            inv.gram_checks
        ),
    }
}

/// Edge flows `x_e ∈ [0, 2]` and node injections `y_v ∈ [−1, 1]` on a path,
/// with conservation at every node but the first.
fn path_lp(n: usize) -> LpInstance {
    let mut rows = Vec::new();
    let mut owners = Vec::new();
    for e in 0..n - 1 {
        let mut r = vec![(e, 1.0)];
        if e >= 1 {
            r.push((e - 1, -1.0));
        }
        rows.push(r);
        owners.push(e);
    }
    for v in 1..n {
        rows.push(vec![(v - 1, 1.0)]);
        owners.push(v);
    }
    let m = rows.len();
    let a = ConstraintMatrix::new(n - 1, rows, owners, (1..n).collect()).unwrap();
    let edge = |i: usize| i < n - 1;
    let l = DVector::from_fn(m, |i, _| if edge(i) { 0.0 } else { -1.0 });
    let u = DVector::from_fn(m, |i, _| if edge(i) { 2.0 } else { 1.0 });
    let x0 = DVector::from_fn(m, |i, _| if edge(i) { 1.0 } else { 0.0 });
    let c = DVector::from_fn(m, |i, _| if edge(i) { 0.1 } else if i % 2 == 0 { -1.0 } else { 0.5 });
    let b = a.dense().transpose() * &x0;
    LpInstance::new(a, b, c, l, u, x0).unwrap()
}

fn ledger_scaling(inv: &mut Invariants) -> Outcome {
    let eps = 1e-3;
    let mut rows = Vec::new();
    let mut closed_form = true;
    let mut notes = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let lp = path_lp(n);
        let costs = CostModel { tlap: TlapModel::SqrtNPlusD, ..CostModel::default() };
        let mut sim = path_sim(n, n as u64, Tuning::desk())
            .with_costs(costs)
            .with_budget(PrecisionBudget::for_lp(lp.m(), lp.big_u, eps));
        if let Err(e) = lp_solve_observed(&mut sim, &lp, eps, &mut |r| inv.observe(r)) {
            notes.push(format!("n={n}: {e}"));
            closed_form = false;
            continue;
        }
        let consts = IpmConstants::new(lp.m(), lp.n(), &sim.tuning);
        let sched = Schedule::new(&lp, eps, &sim.tuning);
        let expect = [while_iterations(1.0, sched.t1, consts.alpha), while_iterations(sched.t1, sched.t2, consts.alpha)];
        let got = [
            sim.ledger.count_under("lp_solve/path_following_1", "path_step"),
            sim.ledger.count_under("lp_solve/path_following_2", "path_step"),
        ];
        closed_form &= got == expect;
        let rounds = sim.ledger.totals_under("lp_solve").rounds;
        notes.push(format!("n={n}: {rounds} rounds, loops {got:?} vs {expect:?}"));
        rows.push((n, rounds));
    }
    let per_node: Vec<f64> = rows.iter().map(|&(n, r)| r as f64 / n as f64).collect();
    let superlinear = rows.len() == 4 && per_node.windows(2).all(|w| w[1] > w[0]);
    Outcome {
        name: "ledger scaling on path graphs",
        pass: superlinear && closed_form,
        detail: notes.join("; "),
    }
}

fn main() -> ExitCode {
    let mut inv = Invariants::default();
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        outcomes.push(o.pass);
    };
    run(exactness());
    run(lp_guarantee(&mut inv));
    run(leverage());
    run(lewis());
    run(mixed_ball());
    let scaling = ledger_scaling(&mut inv);
    structural_suites(&mut inv);
    run(structural(&inv));
    run(scaling);
    if outcomes.iter().all(|p| *p) { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
