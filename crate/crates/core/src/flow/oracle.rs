use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{ExactFlow, FlowInstance};

/// Successive shortest paths with Johnson potentials. Costs are positive,
/// so zero potentials are feasible at the start.
pub fn oracle_min_cost_flow(inst: &FlowInstance) -> ExactFlow {
    let n = inst.nodes;
    // residual arc 2i is forward, 2i+1 backward
    let mut cap: Vec<i64> = Vec::with_capacity(2 * inst.arcs.len());
    let mut adj = vec![Vec::new(); n];
    for (i, a) in inst.arcs.iter().enumerate() {
        cap.push(a.cap as i64);
        cap.push(0);
        adj[a.from].push(2 * i);
        adj[a.to].push(2 * i + 1);
    }
    let ends = |r: usize| {
        let a = &inst.arcs[r / 2];
        if r % 2 == 0 { (a.from, a.to, a.cost as i64) } else { (a.to, a.from, -(a.cost as i64)) }
    };
    let mut pot = vec![0i64; n];
    loop {
        let mut dist = vec![i64::MAX; n];
        let mut via = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[inst.source] = 0;
        heap.push(Reverse((0i64, inst.source)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &r in &adj[v] {
                if cap[r] == 0 {
                    continue;
                }
                let (_, to, c) = ends(r);
                let nd = d + c + pot[v] - pot[to];
                if nd < dist[to] {
                    dist[to] = nd;
                    via[to] = r;
                    heap.push(Reverse((nd, to)));
                }
            }
        }
        if dist[inst.sink] == i64::MAX {
            break;
        }
        for v in 0..n {
            if dist[v] < i64::MAX {
                pot[v] += dist[v];
            }
        }
        let mut push = i64::MAX;
        let mut v = inst.sink;
        while v != inst.source {
            push = push.min(cap[via[v]]);
            v = ends(via[v]).0;
        }
        let mut v = inst.sink;
        while v != inst.source {
            cap[via[v]] -= push;
            cap[via[v] ^ 1] += push;
            v = ends(via[v]).0;
        }
    }
    let flow = (0..inst.arcs.len()).map(|i| cap[2 * i + 1]).collect();
    ExactFlow::from_arcs(inst, flow)
}

/// Exhaustive search over all integral flows; only for a handful of arcs.
pub fn enumeration_min_cost_flow(inst: &FlowInstance) -> ExactFlow {
    let k = inst.arcs.len();
    let mut f = vec![0i64; k];
    let mut best = ExactFlow::from_arcs(inst, f.clone());
    loop {
        let cand = ExactFlow::from_arcs(inst, f.clone());
        if super::validate_flow(inst, &cand).is_ok()
            && (cand.value > best.value || (cand.value == best.value && cand.cost < best.cost))
        {
            best = cand;
        }
        let mut i = 0;
        while i < k {
            if (f[i] as u64) < inst.arcs[i].cap {
                f[i] += 1;
                break;
            }
            f[i] = 0;
            i += 1;
        }
        if i == k {
            return best;
        }
    }
}
