//! Exact minimum cost maximum `s`-`t` flow through the interior point
//! solver: a perturbed LP with penalized slack variables, solved to additive
//! accuracy `1/(320|E|⁴M⁵)`, then scaled and rounded.

mod format;
mod lp;
mod oracle;

pub use lp::{
    build_flow_lp, initial_interior_point, is_diagonally_dominant, round_to_exact, solve_min_cost_flow, FlowLp,
    FlowOptions, FlowSolution, LambdaReading,
};
pub use format::{parse_dimacs_min, parse_edge_list, parse_instance, write_dimacs_min, write_edge_list};
pub use oracle::{enumeration_min_cost_flow, oracle_min_cost_flow};

use serde::{Deserialize, Serialize};

use crate::congest::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cap: u64,
    pub cost: u64,
}

/// Directed graph with positive integer capacities and costs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowInstance {
    pub nodes: usize,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
}

impl FlowInstance {
    pub fn new(nodes: usize, arcs: Vec<Arc>, source: usize, sink: usize) -> Result<Self> {
        let inst = Self { nodes, arcs, source, sink };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.nodes < 2 {
            return bad(format!("{} nodes", self.nodes));
        }
        if self.source >= self.nodes || self.sink >= self.nodes {
            return bad("source or sink out of range".into());
        }
        if self.source == self.sink {
            return bad("source equals sink".into());
        }
        if self.arcs.is_empty() {
            return bad("no arcs".into());
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.from >= self.nodes || a.to >= self.nodes {
                return bad(format!("arc {i} leaves the node range"));
            }
            if a.from == a.to {
                return bad(format!("arc {i} is a self-loop"));
            }
            if a.cap == 0 || a.cost == 0 {
                return bad(format!("arc {i} needs positive capacity and cost"));
            }
            if a.cap > 1 << 20 || a.cost > 1 << 20 {
                return bad(format!("arc {i} exceeds 2^20"));
            }
        }
        Ok(())
    }

    /// Largest capacity or cost.
    pub fn big_m(&self) -> u64 {
        self.arcs.iter().map(|a| a.cap.max(a.cost)).max().unwrap_or(1)
    }

    /// The communication network: the underlying simple undirected graph.
    pub fn network(&self) -> Result<Network> {
        let mut edges: Vec<(usize, usize)> =
            self.arcs.iter().map(|a| (a.from.min(a.to), a.from.max(a.to))).collect();
        edges.sort_unstable();
        edges.dedup();
        Network::with_nodes(self.nodes, &edges)
    }
}

/// An integral flow with its value and cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactFlow {
    pub flow: Vec<i64>,
    pub value: i64,
    pub cost: i64,
}

impl ExactFlow {
    /// Value and cost recomputed from per-arc flows.
    pub fn from_arcs(inst: &FlowInstance, flow: Vec<i64>) -> Self {
        let value = net_out(inst, &flow, inst.source);
        let cost = inst.arcs.iter().zip(&flow).map(|(a, f)| *f * a.cost as i64).sum();
        Self { flow, value, cost }
    }
}

fn net_out(inst: &FlowInstance, flow: &[i64], v: usize) -> i64 {
    inst.arcs
        .iter()
        .zip(flow)
        .map(|(a, f)| if a.from == v { *f } else if a.to == v { -*f } else { 0 })
        .sum()
}

/// Why [`validate_flow`] rejected a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowFault {
    Length,
    Capacity { arc: usize },
    Conservation { node: usize },
    Value,
    Cost,
}

/// Checks lengths, `0 ≤ f ≤ c`, conservation away from `s` and `t`, and the
/// stored value and cost.
pub fn validate_flow(inst: &FlowInstance, f: &ExactFlow) -> std::result::Result<(), FlowFault> {
    if f.flow.len() != inst.arcs.len() {
        return Err(FlowFault::Length);
    }
    for (i, (a, x)) in inst.arcs.iter().zip(&f.flow).enumerate() {
        if *x < 0 || *x as u64 > a.cap {
            return Err(FlowFault::Capacity { arc: i });
        }
    }
    for v in 0..inst.nodes {
        if v != inst.source && v != inst.sink && net_out(inst, &f.flow, v) != 0 {
            return Err(FlowFault::Conservation { node: v });
        }
    }
    let again = ExactFlow::from_arcs(inst, f.flow.clone());
    if again.value != f.value {
        return Err(FlowFault::Value);
    }
    if again.cost != f.cost {
        return Err(FlowFault::Cost);
    }
    Ok(())
}
