use std::collections::BTreeMap;

use serde::Serialize;

/// One charge against the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    /// Index into [`RoundLedger::phase_names`].
    pub phase: usize,
    /// Primitive or marker that produced the charge.
    pub op: &'static str,
    pub rounds: u64,
    pub messages: u64,
    pub bits: u64,
}

/// `messages` counts bandwidth-sized transmissions over one edge direction;
/// `bits` counts the payload they carry, so `bits ≤ messages · bandwidth`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub rounds: u64,
    pub messages: u64,
    pub bits: u64,
}

impl Totals {
    fn add(&mut self, e: &Entry) {
        self.rounds += e.rounds;
        self.messages += e.messages;
        self.bits += e.bits;
    }
}

/// Append-only account of communication charged by the simulation.
///
/// Entries are grouped by a slash-separated phase path (`"lp_solve/phase_1"`).
/// Markers are zero-cost entries used to count loop iterations and probes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundLedger {
    phase_names: Vec<String>,
    stack: Vec<usize>,
    entries: Vec<Entry>,
    totals: Totals,
    nonce: u64,
}

const ROOT: &str = "root";

impl RoundLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn current_phase(&mut self) -> usize {
        match self.stack.last() {
            Some(&p) => p,
            None => self.intern(ROOT.to_string()),
        }
    }

    fn intern(&mut self, name: String) -> usize {
        match self.phase_names.iter().position(|p| *p == name) {
            Some(i) => i,
            None => {
                self.phase_names.push(name);
                self.phase_names.len() - 1
            }
        }
    }

    /// Opens a nested phase. Must be balanced by [`RoundLedger::exit`].
    pub fn enter(&mut self, label: &str) {
        assert!(!label.is_empty() && !label.contains('/'), "bad phase label {label:?}");
        let name = match self.stack.last() {
            Some(&p) => format!("{}/{}", self.phase_names[p], label),
            None => label.to_string(),
        };
        let id = self.intern(name);
        self.stack.push(id);
    }

    pub fn exit(&mut self) {
        self.stack.pop().expect("exit without matching enter");
    }

    /// Runs `f` inside the phase `label`, closing the phase on return.
    pub fn phase<T>(&mut self, label: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        self.enter(label);
        let out = f(self);
        self.exit();
        out
    }

    pub fn charge(&mut self, op: &'static str, rounds: u64, messages: u64, bits: u64) {
        assert!(!op.is_empty());
        let phase = self.current_phase();
        let e = Entry { phase, op, rounds, messages, bits };
        self.totals.add(&e);
        self.entries.push(e);
    }

    /// Zero-cost marker, e.g. one per loop iteration.
    pub fn mark(&mut self, op: &'static str) {
        self.charge(op, 0, 0, 0);
    }

    /// Fresh index for randomness drawn by this experiment.
    pub fn next_nonce(&mut self) -> u64 {
        self.nonce += 1;
        self.nonce
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn phase_names(&self) -> &[String] {
        &self.phase_names
    }

    pub fn phase_name(&self, e: &Entry) -> &str {
        &self.phase_names[e.phase]
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn total_rounds(&self) -> u64 {
        self.totals.rounds
    }

    /// Totals over the phase `prefix` and everything nested below it; the
    /// empty prefix selects every entry.
    pub fn totals_under(&self, prefix: &str) -> Totals {
        let mut t = Totals::default();
        for e in &self.entries {
            if in_phase(&self.phase_names[e.phase], prefix) {
                t.add(e);
            }
        }
        t
    }

    /// Number of entries with operation `op` under `prefix`.
    pub fn count_under(&self, prefix: &str, op: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.op == op && in_phase(&self.phase_names[e.phase], prefix))
            .count()
    }

    /// Totals per exact phase path, in lexicographic order.
    pub fn breakdown(&self) -> BTreeMap<String, Totals> {
        let mut map = BTreeMap::new();
        for e in &self.entries {
            map.entry(self.phase_names[e.phase].clone())
                .or_insert_with(Totals::default)
                .add(e);
        }
        map
    }
}

fn in_phase(name: &str, prefix: &str) -> bool {
    prefix.is_empty() || name == prefix || (name.starts_with(prefix) && name.as_bytes().get(prefix.len()) == Some(&b'/'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_phases_and_totals() {
        let mut l = RoundLedger::new();
        l.charge("a", 1, 2, 3);
        l.phase("lp", |l| {
            l.charge("b", 4, 0, 0);
            l.phase("inner", |l| l.charge("c", 5, 0, 0));
            l.mark("iter");
        });
        l.phase("lpx", |l| l.charge("d", 7, 0, 0));
        assert_eq!(l.total_rounds(), 17);
        assert_eq!(l.totals_under("lp").rounds, 9);
        assert_eq!(l.totals_under("lp/inner").rounds, 5);
        assert_eq!(l.count_under("lp", "iter"), 1);
        let b = l.breakdown();
        assert_eq!(b.keys().collect::<Vec<_>>(), ["lp", "lp/inner", "lpx", "root"]);
    }

    #[test]
    fn totals_never_decrease() {
        let mut l = RoundLedger::new();
        let mut prev = l.totals();
        for i in 0..20u64 {
            l.charge("x", i % 3, i, 2 * i);
            let now = l.totals();
            assert!(now.rounds >= prev.rounds && now.bits >= prev.bits);
            prev = now;
        }
    }
}
