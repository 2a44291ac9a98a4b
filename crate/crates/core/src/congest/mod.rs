//! Synchronous CONGEST simulation: topology, bandwidth, tree aggregation and
//! the round ledger every other module charges against.
//!
//! Rounds are charged analytically per primitive. Nothing here sends
//! individual messages; the charge formulas are the model.

mod ledger;
mod network;
mod rng;

pub use ledger::{Entry, RoundLedger, Totals};
pub use network::Network;
pub use rng::Streams;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::PrecisionBudget;
use crate::tuning::Tuning;

/// How a Laplacian solve is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TlapModel {
    /// `c_lap · (√n + D) · log₂(mU/ε)`, the general-graph bound.
    SqrtNPlusD,
    /// `c_lap · D · log₂(mU/ε)`, for graphs of small minor density.
    DOnly,
}

impl std::str::FromStr for TlapModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt-n-plus-D" | "sqrt-n-plus-d" => Ok(Self::SqrtNPlusD),
            "D-only" | "d-only" => Ok(Self::DOnly),
            other => Err(format!("unknown T_Laplacian model {other:?}")),
        }
    }
}

/// Constants of the analytic charge formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Rounds per transmitted scalar chunk in a matrix-vector product.
    pub c_mv: f64,
    pub c_lap: f64,
    pub tlap: TlapModel,
    /// Laplacian solves must reach relative residual `m^(-residual_exponent)`.
    pub residual_exponent: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c_mv: 1.0, c_lap: 1.0, tlap: TlapModel::SqrtNPlusD, residual_exponent: 3.0 }
    }
}

/// One simulated experiment: the network, its ledger and the numeric budget.
#[derive(Debug, Clone)]
pub struct Sim {
    pub net: Network,
    pub ledger: RoundLedger,
    pub costs: CostModel,
    pub budget: PrecisionBudget,
    pub tuning: Tuning,
}

impl Sim {
    pub fn new(net: Network) -> Self {
        Self {
            net,
            ledger: RoundLedger::new(),
            costs: CostModel::default(),
            budget: PrecisionBudget::default(),
            tuning: Tuning::default(),
        }
    }

    pub fn with_costs(mut self, costs: CostModel) -> Self {
        self.costs = costs;
        self
    }

    pub fn with_tuning(mut self, tuning: Tuning) -> Self {
        self.tuning = tuning;
        self
    }

    pub fn with_budget(mut self, budget: PrecisionBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Rounds charged for one Laplacian solve under the configured model.
    pub fn laplacian_rounds(&self) -> u64 {
        let n = self.net.node_count() as f64;
        let d = self.net.diameter() as f64;
        let bits = f64::from(self.budget.value_bits);
        let span = match self.costs.tlap {
            TlapModel::SqrtNPlusD => n.sqrt() + d,
            TlapModel::DOnly => d.max(1.0),
        };
        (self.costs.c_lap * span * bits).ceil() as u64
    }

    /// Rounds charged for one distributed matrix-vector product.
    pub fn matvec_rounds(&self) -> u64 {
        let chunks = self.net.chunks(u64::from(self.budget.value_bits));
        (self.costs.c_mv * chunks as f64).ceil() as u64
    }
}

/// Associative, commutative fold used by tree aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monoid {
    Sum,
    Min,
    Max,
}

impl Monoid {
    pub fn identity(self) -> f64 {
        match self {
            Monoid::Sum => 0.0,
            Monoid::Min => f64::INFINITY,
            Monoid::Max => f64::NEG_INFINITY,
        }
    }

    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Monoid::Sum => a + b,
            Monoid::Min => a.min(b),
            Monoid::Max => a.max(b),
        }
    }
}

/// Folds one contribution per holder up the leader's BFS tree and broadcasts
/// the result back down.
///
/// Charges `2 · D · ⌈value_bits / bandwidth⌉` rounds. Contributions are
/// indexed by whatever unit holds them (node, row); only the fold matters.
pub fn broadcast_aggregate(sim: &mut Sim, contributions: &[f64], op: Monoid, value_bits: u32) -> f64 {
    let value = contributions.iter().fold(op.identity(), |acc, &x| op.combine(acc, x));
    let chunks = sim.net.chunks(u64::from(value_bits));
    let d = sim.net.diameter() as u64;
    let tree_edges = sim.net.node_count().saturating_sub(1) as u64;
    sim.ledger.charge(
        "aggregate",
        2 * d * chunks,
        2 * tree_edges * chunks,
        2 * tree_edges * u64::from(value_bits),
    );
    value
}

/// `k` fair ±1 coins shared by both endpoints of `edge`.
///
/// The higher-id endpoint flips and sends them, which costs `⌈k / bandwidth⌉`
/// rounds. The result depends only on `(seed, edge, nonce)`.
pub fn flip_shared_coins(sim: &mut Sim, edge: usize, k: usize, nonce: u64) -> Vec<i8> {
    let coins = coin_stream(sim.net.streams(), "edge-coins", edge as u64, nonce, k);
    let chunks = sim.net.chunks(k as u64);
    sim.ledger.charge("coins", chunks, chunks, k as u64);
    coins
}

/// Uncharged coin generation used when a caller charges a parallel batch once.
pub(crate) fn coin_stream(streams: &Streams, tag: &str, key: u64, nonce: u64, k: usize) -> Vec<i8> {
    let mut rng = streams.stream(tag, key.wrapping_mul(0x9e37_79b9).wrapping_add(nonce << 32 | nonce >> 32));
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let word: u64 = rng.gen();
        for bit in 0..64.min(k - out.len()) {
            out.push(if word >> bit & 1 == 1 { 1 } else { -1 });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p4() -> Sim {
        Sim::new(Network::build(&[(0, 1), (1, 2), (2, 3)]).unwrap().with_seed(1))
    }

    #[test]
    fn aggregate_sum_on_path_charges_two_d_chunks() {
        let mut sim = p4();
        let bw = sim.net.bandwidth_bits() as u64;
        let got = broadcast_aggregate(&mut sim, &[1.0; 4], Monoid::Sum, 16);
        assert_eq!(got, 4.0);
        assert_eq!(sim.ledger.total_rounds(), 2 * 3 * 16u64.div_ceil(bw));
    }

    #[test]
    fn aggregate_min_and_identity() {
        let mut sim = Sim::new(Network::build(&[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert_eq!(broadcast_aggregate(&mut sim, &[5.0, 2.0, 9.0], Monoid::Min, 8), 2.0);
        assert_eq!(broadcast_aggregate(&mut sim, &[0.0; 3], Monoid::Sum, 8), 0.0);
        assert_eq!(broadcast_aggregate(&mut sim, &[], Monoid::Max, 8), f64::NEG_INFINITY);
    }

    #[test]
    fn coins_are_deterministic_and_charged() {
        let mut sim = p4();
        let a = flip_shared_coins(&mut sim, 0, 4, 0);
        let b = flip_shared_coins(&mut sim, 0, 4, 0);
        assert_eq!(a, b);
        assert_ne!(flip_shared_coins(&mut sim, 0, 64, 0), flip_shared_coins(&mut sim, 1, 64, 0));
        let mut wide = Sim::new(Network::build(&[(0, 1), (1, 2), (2, 3)]).unwrap().with_beta(8.0));
        assert_eq!(wide.net.bandwidth_bits(), 16);
        flip_shared_coins(&mut wide, 0, 64, 0);
        assert_eq!(wide.ledger.total_rounds(), 4);
    }

    #[test]
    fn coin_mean_is_near_zero() {
        let sim = p4();
        let coins = coin_stream(sim.net.streams(), "edge-coins", 0, 9, 10_000);
        let mean = coins.iter().map(|&c| f64::from(c)).sum::<f64>() / 1e4;
        assert!(mean.abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn tlap_models() {
        let mut sim = p4();
        sim.budget = PrecisionBudget::with_bits(10);
        assert_eq!(sim.laplacian_rounds(), ((2.0 + 3.0) * 10.0f64).ceil() as u64);
        sim.costs.tlap = TlapModel::DOnly;
        assert_eq!(sim.laplacian_rounds(), 30);
    }
}
