//! Seeded end-to-end runs: instance loading or generation, the flow solver,
//! the oracle, and a JSON report per run.
//!
//! Reports serialize with a fixed key order (struct field order, ledger
//! phases sorted) so that two runs of one configuration with timing
//! disabled produce identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::congest::{CostModel, Sim, TlapModel, Totals};
use crate::error::{Error, Result};
use crate::flow::{oracle_min_cost_flow, parse_instance, solve_min_cost_flow, Arc, FlowInstance, FlowOptions};
use crate::tuning::{Tuning, DESK_RELAX};

/// Bumped whenever a report field is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

/// Parameters of [`generate_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub nodes: usize,
    pub arcs: usize,
    pub max_cap: u64,
    pub max_cost: u64,
    pub seed: u64,
}

/// A random connected instance with `s = 0` and `t = nodes − 1`.
///
/// A random tree with arcs pointing away from node 0 comes first, so every
/// node is reachable from the source; the remaining arcs join distinct
/// unused node pairs in a random direction.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<FlowInstance> {
    let bad = |msg: String| Err(Error::InvalidSpec(msg));
    let n = spec.nodes;
    if n < 2 {
        return bad(format!("{n} nodes, need at least 2"));
    }
    if spec.arcs < n - 1 {
        return bad(format!("{} arcs cannot connect {n} nodes", spec.arcs));
    }
    let pairs = n * (n - 1) / 2;
    if spec.arcs > pairs {
        return bad(format!("{} arcs exceed the {pairs} node pairs", spec.arcs));
    }
    for (name, v) in [("max_cap", spec.max_cap), ("max_cost", spec.max_cost)] {
        if !(1..=1 << 20).contains(&v) {
            return bad(format!("{name} = {v} outside 1..=2^20"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used = BTreeSet::new();
    let mut ends = Vec::with_capacity(spec.arcs);
    for v in 1..n {
        let p = rng.gen_range(0..v);
        used.insert((p, v));
        ends.push((p, v));
    }
    let mut free: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|p| !used.contains(p)).collect();
    while ends.len() < spec.arcs {
        let (u, v) = free.swap_remove(rng.gen_range(0..free.len()));
        ends.push(if rng.gen_bool(0.5) { (u, v) } else { (v, u) });
    }
    let arcs = ends
        .into_iter()
        .map(|(from, to)| Arc {
            from,
            to,
            cap: rng.gen_range(1..=spec.max_cap),
            cost: rng.gen_range(1..=spec.max_cost),
        })
        .collect();
    FlowInstance::new(n, arcs, 0, n - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InstanceSource {
    File { path: PathBuf },
    Generated(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Additive LP accuracy; `None` uses the exactness threshold.
    pub epsilon: Option<f64>,
    /// Bits per scalar; `None` sizes the budget per LP.
    pub precision_bits: Option<u32>,
    pub tlap_model: TlapModel,
    pub c_lap: f64,
    pub beta: f64,
    pub relax_constants: f64,
    pub retries: usize,
    pub source: InstanceSource,
    /// Record wall time; off makes reports reproducible byte for byte.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource) -> Self {
        Self {
            seed: 1,
            epsilon: None,
            precision_bits: None,
            tlap_model: TlapModel::SqrtNPlusD,
            c_lap: 1.0,
            beta: 1.0,
            relax_constants: DESK_RELAX,
            retries: 10,
            source,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(e) = self.epsilon {
            positive("epsilon", e)?;
        }
        if let Some(b) = self.precision_bits {
            positive("precision_bits", f64::from(b))?;
        }
        positive("c_lap", self.c_lap)?;
        positive("beta", self.beta)?;
        positive("relax_constants", self.relax_constants)
    }

    pub fn tuning(&self) -> Tuning {
        Tuning::desk().with_relax(self.relax_constants)
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            retries: self.retries,
            precision_bits: self.precision_bits,
            epsilon: self.epsilon,
            ..FlowOptions::default()
        }
    }

    /// Reads or generates the instance.
    pub fn load(&self) -> Result<FlowInstance> {
        match &self.source {
            InstanceSource::Generated(spec) => generate_instance(spec),
            InstanceSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
                parse_instance(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub nodes: usize,
    pub arcs: usize,
    pub source: usize,
    pub sink: usize,
    pub big_m: u64,
    pub diameter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub value: i64,
    pub cost: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        Self { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub instance: Option<InstanceSummary>,
    pub flow: Option<FlowSummary>,
    pub oracle: Option<FlowSummary>,
    /// True iff `flow` equals `oracle` in both value and cost.
    pub matches: bool,
    pub attempts: usize,
    pub retries_used: usize,
    pub epsilon: Option<f64>,
    pub precision_bits: Option<u32>,
    pub ledger: BTreeMap<String, Totals>,
    pub total_rounds: u64,
    pub wall_time_ms: Option<f64>,
    pub error: Option<ErrorReport>,
}

impl RunReport {
    fn empty(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            instance: None,
            flow: None,
            oracle: None,
            matches: false,
            attempts: 0,
            retries_used: 0,
            epsilon: None,
            precision_bits: None,
            ledger: BTreeMap::new(),
            total_rounds: 0,
            wall_time_ms: None,
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub instance: Option<InstanceSummary>,
    pub oracle: Option<FlowSummary>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<ErrorReport>,
}

impl OracleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn summarize(inst: &FlowInstance, diameter: usize) -> InstanceSummary {
    InstanceSummary {
        nodes: inst.nodes,
        arcs: inst.arcs.len(),
        source: inst.source,
        sink: inst.sink,
        big_m: inst.big_m(),
        diameter,
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the solver and the oracle on the configured instance. Failures are
/// recorded in the report's `error` field.
pub fn run_experiment(config: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::empty(config.seed);
    if let Err(e) = run_into(config, &mut report) {
        report.error = Some(ErrorReport::from(&e));
    }
    if config.timing {
        report.wall_time_ms = Some(elapsed_ms(start));
    }
    report
}

fn run_into(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    config.validate()?;
    let inst = config.load()?;
    let net = inst.network()?.with_seed(config.seed).with_beta(config.beta);
    report.instance = Some(summarize(&inst, net.diameter()));
    let oracle = oracle_min_cost_flow(&inst);
    report.oracle = Some(FlowSummary { value: oracle.value, cost: oracle.cost });

    let costs = CostModel { c_lap: config.c_lap, tlap: config.tlap_model, ..CostModel::default() };
    let mut sim = Sim::new(net).with_costs(costs).with_tuning(config.tuning());
    let outcome = solve_min_cost_flow(&mut sim, &inst, config.seed, &config.flow_options());
    report.ledger = sim.ledger.breakdown();
    report.total_rounds = sim.ledger.total_rounds();
    match outcome {
        Ok(sol) => {
            report.flow = Some(FlowSummary { value: sol.flow.value, cost: sol.flow.cost });
            report.matches = sol.flow.value == oracle.value && sol.flow.cost == oracle.cost;
            report.attempts = sol.attempts;
            report.retries_used = sol.attempts - 1;
            report.epsilon = Some(sol.epsilon);
            report.precision_bits = Some(sol.precision_bits);
            Ok(())
        }
        Err(e) => {
            report.attempts = match &e {
                Error::RetriesExhausted { attempts, .. } => *attempts,
                _ => 1,
            };
            report.retries_used = report.attempts.saturating_sub(1);
            report.precision_bits = Some(sim.budget.value_bits);
            Err(e)
        }
    }
}

/// Oracle answer only; no simulation.
pub fn run_oracle(config: &ExperimentConfig) -> OracleReport {
    let start = Instant::now();
    let mut report = OracleReport { schema_version: SCHEMA_VERSION, instance: None, oracle: None, wall_time_ms: None, error: None };
    let outcome = config.load().and_then(|inst| {
        let net = inst.network()?;
        report.instance = Some(summarize(&inst, net.diameter()));
        let f = oracle_min_cost_flow(&inst);
        report.oracle = Some(FlowSummary { value: f.value, cost: f.cost });
        Ok(())
    });
    if let Err(e) = outcome {
        report.error = Some(ErrorReport::from(&e));
    }
    if config.timing {
        report.wall_time_ms = Some(elapsed_ms(start));
    }
    report
}

/// Runs every configuration on up to `threads` worker threads; reports come
/// back in input order.
pub fn run_batch(configs: &[ExperimentConfig], threads: usize) -> Vec<RunReport> {
    let threads = threads.clamp(1, configs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<RunReport>>> = configs.iter().map(|_| Default::default()).collect();
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let r = run_experiment(cfg);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every slot filled")).collect()
}
