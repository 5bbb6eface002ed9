//! Independent checks that a recycling plan is sound.
//!
//! Structural soundness is re-established by replaying the plan edge by edge
//! on a fresh graph with a reachability implementation deliberately different
//! from the engine's (an incrementally maintained transitive-closure bitset
//! instead of on-demand DFS); the two implementations are also asserted to
//! agree on every query. Functional soundness is established exhaustively for
//! classical reversible circuits by comparing the recycled schedule against a
//! straight simulation of the original gate list over every assignment of the
//! configurable inputs.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::causal::{CausalGraph, NodeId, NodeKind, WireLabel};
use crate::circuit::{Circuit, InitState, MeasureBasis, QubitId};
use crate::recycle::RecyclePlan;

/// Largest qubit count accepted by the exhaustive machinery.
pub const MAX_EXHAUSTIVE_VARS: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("gate '{0}' has unknown semantics")]
    UnknownGate(String),
    #[error("init state '{0}' is not classical")]
    NonClassicalInit(String),
    #[error("exhaustive check infeasible: {0} configurable inputs exceed {MAX_EXHAUSTIVE_VARS}")]
    TooManyInputs(usize),
    #[error("exhaustive check infeasible: {0} qubits exceed {MAX_EXHAUSTIVE_VARS}")]
    TooManyQubits(usize),
}

/// Apply one classical reversible gate to a bit word. Bit `i` of the word is
/// the state of the wire holding the gate's `i`-th semantic position, as
/// resolved by the caller through `bit_of`.
///
/// Supported names: `t<k>` and `cnot` (multi-controlled NOT: flip the single
/// target iff all controls are 1) and `f<k>` (multi-controlled swap of the
/// two targets).
fn apply_gate(
    name: &str,
    controls: &[usize],
    targets: &[usize],
    word: &mut u64,
) -> Result<(), VerifyError> {
    let all_controls_set = controls.iter().all(|&b| *word >> b & 1 == 1);
    if (name.starts_with('t') || name == "cnot") && targets.len() == 1 {
        if all_controls_set {
            *word ^= 1 << targets[0];
        }
        Ok(())
    } else if name.starts_with('f') && targets.len() == 2 {
        if all_controls_set {
            let a = *word >> targets[0] & 1;
            let b = *word >> targets[1] & 1;
            if a != b {
                *word ^= (1 << targets[0]) | (1 << targets[1]);
            }
        }
        Ok(())
    } else {
        Err(VerifyError::UnknownGate(name.to_string()))
    }
}

/// Run a classical reversible circuit on one input word (bit `i` = initial
/// state of qubit `i`) and return the output word.
pub fn simulate_reversible(circuit: &Circuit, input: u64) -> Result<u64, VerifyError> {
    if circuit.qubit_count() > 64 {
        return Err(VerifyError::TooManyQubits(circuit.qubit_count()));
    }
    let mut word = input;
    for gate in &circuit.gates {
        let controls: Vec<usize> = gate.controls.iter().map(|q| q.0).collect();
        let targets: Vec<usize> = gate.targets.iter().map(|q| q.0).collect();
        apply_gate(&gate.name, &controls, &targets, &mut word)?;
    }
    Ok(word)
}

/// Exhaustive input/output table of a small classical reversible circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    pub var_count: usize,
    /// `rows[input] = output`.
    pub rows: Vec<u64>,
}

impl TruthTable {
    pub fn from_circuit(circuit: &Circuit) -> Result<TruthTable, VerifyError> {
        let n = circuit.qubit_count();
        if n > MAX_EXHAUSTIVE_VARS {
            return Err(VerifyError::TooManyQubits(n));
        }
        let rows = (0..1u64 << n)
            .map(|w| simulate_reversible(circuit, w))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TruthTable { var_count: n, rows })
    }

    /// Reversible circuits implement bijections; anything else indicates a
    /// simulator defect.
    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.rows.len()];
        for &out in &self.rows {
            let Some(slot) = seen.get_mut(out as usize) else {
                return false;
            };
            if *slot {
                return false;
            }
            *slot = true;
        }
        true
    }
}

/// One failed soundness check.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Violation {
    pub check: String,
    pub detail: String,
}

/// Outcome of [`check_plan_sound`]: empty `violations` means the plan passed
/// every structural check.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SoundnessReport {
    pub violations: Vec<Violation>,
}

impl SoundnessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, check: &str, detail: String) {
        self.violations.push(Violation {
            check: check.to_string(),
            detail,
        });
    }

    /// The violation list as a JSON array.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.violations).expect("violations serialize")
    }
}

impl fmt::Display for SoundnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            writeln!(f, "plan sound: all checks passed")
        } else {
            writeln!(f, "plan UNSOUND: {} violation(s)", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  [{}] {}", v.check, v.detail)?;
            }
            Ok(())
        }
    }
}

/// Transitive-closure bitset over a DAG, updated incrementally as edges are
/// inserted. This is the replay oracle's reachability structure; it shares no
/// code with `CausalGraph::precedes`.
struct ClosureBitset {
    words: usize,
    reach: Vec<u64>,
}

impl ClosureBitset {
    fn new(g: &CausalGraph) -> Result<ClosureBitset, ()> {
        let n = g.node_count();
        let words = n.div_ceil(64);
        let mut closure = ClosureBitset {
            words,
            reach: vec![0; n * words],
        };
        // Seed in reverse topological order so each node's row can absorb
        // its successors' completed rows.
        let order = g.topo_order().map_err(|_| ())?;
        for &v in order.iter().rev() {
            for &s in g.successors(v) {
                closure.set(v.0, s.0);
                closure.union_row(v.0, s.0);
            }
        }
        Ok(closure)
    }

    fn set(&mut self, from: usize, to: usize) {
        self.reach[from * self.words + to / 64] |= 1 << (to % 64);
    }

    fn get(&self, from: usize, to: usize) -> bool {
        self.reach[from * self.words + to / 64] >> (to % 64) & 1 == 1
    }

    fn union_row(&mut self, into: usize, from: usize) {
        let (a, b) = (into * self.words, from * self.words);
        for w in 0..self.words {
            let bits = self.reach[b + w];
            self.reach[a + w] |= bits;
        }
    }

    /// Account for a new edge `from -> to`: every node reaching `from` (and
    /// `from` itself) now also reaches `to` and everything `to` reaches.
    fn add_edge(&mut self, from: usize, to: usize) {
        let rows = self.reach.len() / self.words;
        for x in 0..rows {
            if x == from || self.get(x, from) {
                self.set(x, to);
                self.union_row(x, to);
            }
        }
    }
}

/// Replay `plan` against a freshly rebuilt graph and report every structural
/// violation: cyclic result, a splice whose no-path precondition did not hold
/// at insertion time, per-wire lifetime chains that are not simple paths,
/// wire assignments inconsistent with relabeling, or I/O qubits that moved.
/// The replay's bitset reachability is compared against the DFS answer on
/// every query; a disagreement is itself a violation.
pub fn check_plan_sound(
    circuit: &Circuit,
    graph: &CausalGraph,
    plan: &RecyclePlan,
) -> SoundnessReport {
    let mut report = SoundnessReport::default();

    // (1) Final graph must be acyclic.
    if !graph.is_acyclic() {
        report.push("acyclic", "final graph contains a cycle".into());
    }

    // (2) Replay each splice on a fresh graph with independent reachability.
    let mut fresh = CausalGraph::build(circuit);
    let Ok(mut closure) = ClosureBitset::new(&fresh) else {
        report.push("replay", "rebuilt graph is cyclic before any splice".into());
        return report;
    };
    let mut spliced_outputs = BTreeSet::new();
    let mut spliced_inputs = BTreeSet::new();
    for &(o, a) in &plan.added_edges {
        let (Ok(out_node), Ok(in_node)) = (fresh.node(o), fresh.node(a)) else {
            report.push("replay", format!("splice ({o}, {a}) names unknown nodes"));
            continue;
        };
        if !out_node.is_ancilla_output() || !spliced_outputs.insert(o) {
            report.push(
                "replay",
                format!("{o} is not a fresh ancilla output at its splice"),
            );
        }
        if !in_node.is_ancilla_input() || !spliced_inputs.insert(a) {
            report.push(
                "replay",
                format!("{a} is not a fresh ancilla input at its splice"),
            );
        }
        let bitset_says = closure.get(a.0, o.0);
        let dfs_says = fresh.precedes(a, o).unwrap_or(true);
        if bitset_says != dfs_says {
            report.push(
                "reachability-agreement",
                format!("closure bitset and DFS disagree on {a} => {o}"),
            );
        }
        if bitset_says {
            report.push(
                "no-path",
                format!("splice ({o}, {a}) inserted while a path {a} => {o} existed"),
            );
        }
        fresh.add_edge(o, a);
        closure.add_edge(o.0, a.0);
    }

    // (3) Per-wire lifetime chains must be total orders under the splices.
    let succ_by_output: BTreeMap<NodeId, NodeId> = plan.added_edges.iter().copied().collect();
    let mut wire_members: BTreeMap<WireLabel, Vec<QubitId>> = BTreeMap::new();
    for (&q, &w) in &plan.wire_assignment {
        wire_members.entry(w).or_default().push(q);
    }
    for (&wire, members) in &wire_members {
        let members: BTreeSet<QubitId> = members.iter().copied().collect();
        // Heads: members whose input was never spliced into.
        let heads: Vec<QubitId> = members
            .iter()
            .copied()
            .filter(|&q| !spliced_inputs.contains(&graph.input_of(q)))
            .collect();
        if heads.len() != 1 {
            report.push(
                "wire-chain",
                format!("wire {wire} has {} chain heads, expected 1", heads.len()),
            );
            continue;
        }
        let mut visited = BTreeSet::new();
        let mut cur = heads[0];
        loop {
            if !visited.insert(cur) {
                report.push("wire-chain", format!("wire {wire} chain revisits {cur}"));
                break;
            }
            match succ_by_output.get(&graph.output_of(cur)) {
                Some(&next_input) => {
                    let Some(next) = qubit_of_input(graph, next_input) else {
                        report.push(
                            "wire-chain",
                            format!("splice target {next_input} is not an input node"),
                        );
                        break;
                    };
                    if !members.contains(&next) {
                        report.push(
                            "wire-chain",
                            format!("wire {wire} chain leaves its member set at {next}"),
                        );
                        break;
                    }
                    cur = next;
                }
                None => break,
            }
        }
        if visited.len() != members.len() {
            report.push(
                "wire-chain",
                format!(
                    "wire {wire} chain covers {} of {} qubits",
                    visited.len(),
                    members.len()
                ),
            );
        }
    }

    // (4) Wire assignment must match an independent relabeling replay and the
    // labels actually stored on the final graph.
    let mut labels: Vec<WireLabel> = (0..circuit.qubit_count()).map(WireLabel).collect();
    for &(o, a) in &plan.added_edges {
        let (Some(qo), Some(qa)) = (qubit_of_output(graph, o), qubit_of_input(graph, a)) else {
            continue; // already reported in the replay phase
        };
        // Relabel qa's whole downstream share-chain to qo's label. The step
        // bound keeps this terminating even on forged plans with loops.
        let target = labels[qo.0];
        let mut cur = Some(qa);
        let mut steps = 0;
        while let Some(q) = cur {
            labels[q.0] = target;
            steps += 1;
            if steps > circuit.qubit_count() {
                break;
            }
            cur = succ_by_output
                .get(&graph.output_of(q))
                .and_then(|&inp| qubit_of_input(graph, inp));
        }
    }
    for q in 0..circuit.qubit_count() {
        let qid = QubitId(q);
        let assigned = plan.wire_assignment.get(&qid).copied();
        if assigned != Some(labels[q]) {
            report.push(
                "relabeling",
                format!(
                    "qubit {qid}: assignment {:?} differs from replayed label {}",
                    assigned, labels[q]
                ),
            );
        }
        let input_wire = graph.node_unchecked(graph.input_of(qid)).sole_wire();
        let output_wire = graph.node_unchecked(graph.output_of(qid)).sole_wire();
        if assigned != Some(input_wire) || assigned != Some(output_wire) {
            report.push(
                "relabeling",
                format!("qubit {qid}: graph labels ({input_wire}, {output_wire}) differ from assignment"),
            );
        }
    }

    // (5) I/O qubits keep their wire and take part in no splice.
    for q in &circuit.qubits {
        if q.is_io() {
            if plan.wire_assignment.get(&q.id) != Some(&WireLabel(q.id.0)) {
                report.push("io-untouched", format!("I/O qubit {} moved wires", q.id));
            }
            let inp = graph.input_of(q.id);
            let out = graph.output_of(q.id);
            if plan
                .added_edges
                .iter()
                .any(|&(o, a)| o == out || a == inp)
            {
                report.push(
                    "io-untouched",
                    format!("I/O qubit {} appears in a splice", q.id),
                );
            }
        }
    }

    report
}

fn qubit_of_input(g: &CausalGraph, id: NodeId) -> Option<QubitId> {
    match g.node(id).ok()?.kind {
        NodeKind::Input { qubit, .. } => Some(qubit),
        _ => None,
    }
}

fn qubit_of_output(g: &CausalGraph, id: NodeId) -> Option<QubitId> {
    match g.node(id).ok()?.kind {
        NodeKind::Output { qubit, .. } => Some(qubit),
        _ => None,
    }
}

fn classical_init_bit(state: InitState) -> Result<Option<bool>, VerifyError> {
    match state {
        InitState::Zero => Ok(Some(false)),
        InitState::One => Ok(Some(true)),
        InitState::Configurable => Ok(None),
        other => Err(VerifyError::NonClassicalInit(other.token().to_string())),
    }
}

/// Exhaustively compare the recycled schedule against the original circuit.
///
/// For every assignment of the configurable inputs (fixed inits keep their
/// declared constants) the final graph's operations are executed in
/// deterministic topological order over one classical bit per wire — a
/// measurement frees its wire, the following initialization on the same wire
/// overwrites it — and each configurable output must equal the corresponding
/// bit of the straight simulation. Fixed-basis (garbage) outputs are
/// don't-cares and excluded from the comparison.
pub fn check_functional_equivalence(
    circuit: &Circuit,
    graph_after: &CausalGraph,
    plan: &RecyclePlan,
) -> Result<bool, VerifyError> {
    let n = circuit.qubit_count();
    if n > 64 {
        return Err(VerifyError::TooManyQubits(n));
    }
    let configurable: Vec<QubitId> = circuit
        .qubits
        .iter()
        .filter(|q| !q.input_ancilla())
        .map(|q| q.id)
        .collect();
    if configurable.len() > MAX_EXHAUSTIVE_VARS {
        return Err(VerifyError::TooManyInputs(configurable.len()));
    }
    // Reject non-classical preparations up front.
    let mut base_word = 0u64;
    for q in &circuit.qubits {
        if let Some(true) = classical_init_bit(q.init)? {
            base_word |= 1 << q.id.0;
        }
    }
    let order = graph_after
        .topo_order()
        .map_err(|_| VerifyError::UnknownGate("cyclic schedule".into()))?;

    let _ = plan; // the schedule below reads wire labels straight off the graph

    for assignment in 0..1u64 << configurable.len() {
        let mut word = base_word;
        for (bit, q) in configurable.iter().enumerate() {
            if assignment >> bit & 1 == 1 {
                word |= 1 << q.0;
            }
        }
        let expected = simulate_reversible(circuit, word)?;

        // Execute the recycled schedule over per-wire bits.
        let mut wire_state = vec![false; n];
        let mut measured = vec![None; n];
        for &id in &order {
            let node = graph_after.node_unchecked(id);
            match &node.kind {
                NodeKind::Input { qubit, state } => {
                    let wire = node.sole_wire().0;
                    wire_state[wire] = match classical_init_bit(*state)? {
                        Some(bit) => bit,
                        None => word >> qubit.0 & 1 == 1,
                    };
                }
                NodeKind::Gate {
                    name,
                    controls,
                    targets,
                    ..
                } => {
                    // Pack this gate's wire bits into a small word, apply the
                    // gate over positions, and write back.
                    let wires = &node.wires;
                    let mut packed = 0u64;
                    for (pos, w) in wires.iter().enumerate() {
                        if wire_state[w.0] {
                            packed |= 1 << pos;
                        }
                    }
                    let control_pos: Vec<usize> = (0..controls.len()).collect();
                    let target_pos: Vec<usize> =
                        (controls.len()..controls.len() + targets.len()).collect();
                    apply_gate(name, &control_pos, &target_pos, &mut packed)?;
                    for (pos, w) in wires.iter().enumerate() {
                        wire_state[w.0] = packed >> pos & 1 == 1;
                    }
                }
                NodeKind::Output { qubit, .. } => {
                    measured[qubit.0] = Some(wire_state[node.sole_wire().0]);
                }
            }
        }

        for q in &circuit.qubits {
            if !q.output_ancilla() {
                let got = measured[q.id.0].unwrap_or(false);
                let want = expected >> q.id.0 & 1 == 1;
                if got != want {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{GateOp, Qubit};
    use crate::recycle::{recycle, Heuristic};

    fn qubit(id: usize, init: InitState, measure: MeasureBasis) -> Qubit {
        Qubit {
            id: QubitId(id),
            label: format!("q{id}"),
            init,
            measure,
        }
    }

    fn gate(name: &str, controls: &[usize], targets: &[usize]) -> GateOp {
        GateOp {
            name: name.into(),
            controls: controls.iter().map(|&q| QubitId(q)).collect(),
            targets: targets.iter().map(|&q| QubitId(q)).collect(),
        }
    }

    fn three_wire_example() -> Circuit {
        Circuit {
            name: "share3".into(),
            qubits: vec![
                qubit(0, InitState::Zero, MeasureBasis::Z),
                qubit(1, InitState::Configurable, MeasureBasis::Configurable),
                qubit(2, InitState::Zero, MeasureBasis::Z),
            ],
            gates: vec![gate("cnot", &[0], &[1]), gate("cnot", &[1], &[2])],
        }
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let c = Circuit {
            name: "cnot".into(),
            qubits: vec![
                qubit(0, InitState::Configurable, MeasureBasis::Configurable),
                qubit(1, InitState::Configurable, MeasureBasis::Configurable),
            ],
            gates: vec![gate("cnot", &[0], &[1])],
        };
        assert_eq!(simulate_reversible(&c, 0b01).unwrap(), 0b11);
        assert_eq!(simulate_reversible(&c, 0b00).unwrap(), 0b00);
    }

    #[test]
    fn toffoli_needs_both_controls() {
        let c = Circuit {
            name: "t3".into(),
            qubits: (0..3)
                .map(|i| qubit(i, InitState::Configurable, MeasureBasis::Configurable))
                .collect(),
            gates: vec![gate("t3", &[0, 1], &[2])],
        };
        assert_eq!(simulate_reversible(&c, 0b011).unwrap(), 0b111);
        assert_eq!(simulate_reversible(&c, 0b001).unwrap(), 0b001);
    }

    #[test]
    fn not_gate_flips() {
        let c = Circuit {
            name: "t1".into(),
            qubits: vec![qubit(0, InitState::Configurable, MeasureBasis::Configurable)],
            gates: vec![gate("t1", &[], &[0])],
        };
        assert_eq!(simulate_reversible(&c, 0).unwrap(), 1);
    }

    #[test]
    fn fredkin_swaps_targets() {
        let c = Circuit {
            name: "f3".into(),
            qubits: (0..3)
                .map(|i| qubit(i, InitState::Configurable, MeasureBasis::Configurable))
                .collect(),
            gates: vec![gate("f3", &[0], &[1, 2])],
        };
        assert_eq!(simulate_reversible(&c, 0b011).unwrap(), 0b101);
        assert_eq!(simulate_reversible(&c, 0b010).unwrap(), 0b010);
    }

    #[test]
    fn unknown_gate_is_rejected() {
        let c = Circuit {
            name: "p".into(),
            qubits: (0..3)
                .map(|i| qubit(i, InitState::Configurable, MeasureBasis::Configurable))
                .collect(),
            gates: vec![gate("p3", &[0], &[1, 2])],
        };
        assert_eq!(
            simulate_reversible(&c, 0),
            Err(VerifyError::UnknownGate("p3".into()))
        );
    }

    #[test]
    fn truth_tables_are_bijective() {
        let c = three_wire_example();
        let table = TruthTable::from_circuit(&c).unwrap();
        assert_eq!(table.var_count, 3);
        assert!(table.is_bijective());
    }

    #[test]
    fn sound_plan_passes_all_checks() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let plan = recycle(&mut g, Heuristic::M1);
        let report = check_plan_sound(&c, &g, &plan);
        assert!(report.ok(), "{report}");
    }

    #[test]
    fn fabricated_cycle_is_caught() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let mut plan = recycle(&mut g, Heuristic::M1);
        // Forge a second, illegal splice: output2 -> input0 closes a cycle.
        let forged = (g.output_of(QubitId(2)), g.input_of(QubitId(0)));
        g.add_edge_for_replay(forged.0, forged.1);
        plan.added_edges.push(forged);
        plan.recycled_count += 1;
        let report = check_plan_sound(&c, &g, &plan);
        assert!(!report.ok());
        let checks: Vec<&str> = report.violations.iter().map(|v| v.check.as_str()).collect();
        assert!(checks.contains(&"acyclic"));
        assert!(checks.contains(&"no-path"));
    }

    #[test]
    fn identity_plan_is_trivially_equivalent() {
        let c = three_wire_example();
        let g = CausalGraph::build(&c);
        let plan = RecyclePlan {
            added_edges: vec![],
            wire_assignment: (0..3).map(|q| (QubitId(q), WireLabel(q))).collect(),
            recycled_count: 0,
        };
        assert_eq!(check_functional_equivalence(&c, &g, &plan), Ok(true));
    }

    #[test]
    fn recycled_three_wire_is_equivalent() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let plan = recycle(&mut g, Heuristic::M1);
        assert_eq!(plan.recycled_count, 1);
        assert_eq!(check_functional_equivalence(&c, &g, &plan), Ok(true));
    }

    #[test]
    fn equivalence_rejects_oversized_interface() {
        let c = Circuit {
            name: "wide".into(),
            qubits: (0..13)
                .map(|i| qubit(i, InitState::Configurable, MeasureBasis::Configurable))
                .collect(),
            gates: vec![],
        };
        let g = CausalGraph::build(&c);
        let plan = RecyclePlan {
            added_edges: vec![],
            wire_assignment: (0..13).map(|q| (QubitId(q), WireLabel(q))).collect(),
            recycled_count: 0,
        };
        assert_eq!(
            check_functional_equivalence(&c, &g, &plan),
            Err(VerifyError::TooManyInputs(13))
        );
    }
}
