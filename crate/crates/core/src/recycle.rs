//! Wire recycling engine.
//!
//! Recycling adds edges from ancilla output nodes to ancilla input nodes of
//! the causal graph: such an edge states that one qubit is measured before
//! another is initialized, so both can live on the same wire. An edge may be
//! added only when no directed path already runs from the input to the
//! output, which is exactly the condition for the graph to stay acyclic.
//!
//! The main routine processes ancilla inputs from a priority queue ordered by
//! how many ancilla outputs are *allowed* to precede each input; for the
//! popped input a candidate output is searched with one of two heuristics:
//!
//! * M1 assumes wires are ordered top-down by synthesis and picks the
//!   available output minimizing the signed wire-label difference.
//! * M2 makes no ordering assumption and searches the graph itself, allowing
//!   edges to be walked backwards, preferring candidates with the fewest
//!   backward traversals and then the shortest path.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::causal::{CausalGraph, GraphError, NodeId, WireLabel};
use crate::circuit::QubitId;

/// Candidate-search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    M1,
    M2,
}

impl Heuristic {
    pub fn label(self) -> &'static str {
        match self {
            Heuristic::M1 => "m1",
            Heuristic::M2 => "m2",
        }
    }
}

/// How M1 ranks the wire-label difference `o.wire - a.wire`.
///
/// `Signed` is the literal reading (most negative difference wins, i.e. the
/// topmost available wire); `Absolute` prefers the nearest wire in either
/// direction. Signed is the default; the variant is exposed to make the
/// difference measurable on real corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum M1Mode {
    #[default]
    Signed,
    Absolute,
}

impl M1Mode {
    pub fn label(self) -> &'static str {
        match self {
            M1Mode::Signed => "signed",
            M1Mode::Absolute => "absolute",
        }
    }
}

/// Result of a recycling run: the splices performed, the final qubit-to-wire
/// assignment, and the number of wires saved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecyclePlan {
    /// `(output node, input node)` pairs in the order they were added.
    pub added_edges: Vec<(NodeId, NodeId)>,
    /// Final wire label of every qubit.
    pub wire_assignment: BTreeMap<QubitId, WireLabel>,
    /// Number of wires saved; equals `added_edges.len()`.
    pub recycled_count: usize,
}

impl RecyclePlan {
    /// Number of distinct wires after recycling.
    pub fn final_wire_count(&self) -> usize {
        self.wire_assignment
            .values()
            .collect::<BTreeSet<_>>()
            .len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecycleError {
    #[error("node {0} is not an available ancilla output")]
    NotAvailableOutput(usize),
    #[error("node {0} is not an available ancilla input")]
    NotAvailableInput(usize),
    #[error("splice {output} -> {input} rejected: the input already precedes the output")]
    WouldCycle { output: usize, input: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Splice ancilla output `o` onto ancilla input `a`.
///
/// Preconditions: `o` is an ancilla output with no outgoing edge, `a` an
/// ancilla input with no incoming edge (neither took part in an earlier
/// splice), and no path runs from `a` to `o`. On success the edge `o -> a` is
/// inserted and the input's wire label is rewritten to the output's label on
/// `a` and everything reachable from it. On error the graph is unchanged.
pub fn apply_transformation(
    g: &mut CausalGraph,
    o: NodeId,
    a: NodeId,
) -> Result<(), RecycleError> {
    let out_node = g.node(o)?;
    if !out_node.is_ancilla_output() || !g.successors(o).is_empty() {
        return Err(RecycleError::NotAvailableOutput(o.0));
    }
    let in_node = g.node(a)?;
    if !in_node.is_ancilla_input() || !g.predecessors(a).is_empty() {
        return Err(RecycleError::NotAvailableInput(a.0));
    }
    if g.precedes(a, o)? {
        return Err(RecycleError::WouldCycle {
            output: o.0,
            input: a.0,
        });
    }
    let from = g.node_unchecked(a).sole_wire();
    let to = g.node_unchecked(o).sole_wire();
    g.add_edge(o, a);
    if from != to {
        g.relabel_from(a, from, to);
    }
    Ok(())
}

/// M1: among available outputs not yet forced after `a`, pick the one whose
/// current wire label minimizes the difference to `a`'s label (signed or
/// absolute per `mode`); ties break on the smaller output wire, then the
/// smaller node id.
pub fn find_candidate_m1(
    g: &CausalGraph,
    a: NodeId,
    pool: &BTreeSet<NodeId>,
    mode: M1Mode,
) -> Option<NodeId> {
    let reach = g.reach_set(a);
    let a_wire = g.node_unchecked(a).sole_wire().0 as i64;
    pool.iter()
        .filter(|o| !reach[o.0])
        .map(|&o| {
            let o_wire = g.node_unchecked(o).sole_wire().0 as i64;
            let diff = o_wire - a_wire;
            let key = match mode {
                M1Mode::Signed => diff,
                M1Mode::Absolute => diff.abs(),
            };
            (key, o_wire, o)
        })
        .min()
        .map(|(_, _, o)| o)
}

/// M2: best-first search from `a` over the graph, walking edges forward or
/// backward. Cost is `(backward steps, path length)` compared
/// lexicographically; an available output accepts when it was reached with at
/// least one backward step and no forward path runs from `a` to it. Ties
/// break on the smaller node id via the heap ordering.
pub fn find_candidate_m2(g: &CausalGraph, a: NodeId, pool: &BTreeSet<NodeId>) -> Option<NodeId> {
    let reach = g.reach_set(a);
    let mut best: Vec<Option<(usize, usize)>> = vec![None; g.node_count()];
    let mut heap: BinaryHeap<Reverse<(usize, usize, NodeId)>> = BinaryHeap::new();
    heap.push(Reverse((0, 0, a)));
    best[a.0] = Some((0, 0));
    while let Some(Reverse((nr, len, v))) = heap.pop() {
        if best[v.0] != Some((nr, len)) {
            continue; // stale entry
        }
        if nr != 0 && pool.contains(&v) && !reach[v.0] {
            return Some(v);
        }
        for &next in g.successors(v) {
            let cost = (nr, len + 1);
            if best[next.0].map_or(true, |b| cost < b) {
                best[next.0] = Some(cost);
                heap.push(Reverse((cost.0, cost.1, next)));
            }
        }
        for &next in g.predecessors(v) {
            let cost = (nr + 1, len + 1);
            if best[next.0].map_or(true, |b| cost < b) {
                best[next.0] = Some(cost);
                heap.push(Reverse((cost.0, cost.1, next)));
            }
        }
    }
    None
}

/// Run the full recycling routine on a freshly built graph, mutating it in
/// place and returning the plan.
///
/// Ancilla inputs are processed in order of priority `|OA| - n_a`, where
/// `n_a` counts the ancilla outputs reachable from input `a`: inputs used
/// latest have the most outputs allowed before them and go first. After every
/// successful splice the priorities are recomputed against the mutated graph
/// (a pop that finds no candidate leaves the graph unchanged, so nothing
/// needs recomputing). Each output and each input takes part in at most one
/// splice; an input popped without a candidate is dropped, not re-enqueued.
/// Ties in priority break on the smaller input node id.
pub fn recycle(g: &mut CausalGraph, heuristic: Heuristic) -> RecyclePlan {
    recycle_with_mode(g, heuristic, M1Mode::default())
}

/// [`recycle`] with an explicit M1 wire-difference mode.
pub fn recycle_with_mode(g: &mut CausalGraph, heuristic: Heuristic, mode: M1Mode) -> RecyclePlan {
    // Inputs/outputs that already took part in a splice (possible when the
    // caller reruns recycling on a mutated graph) are not available.
    let ia: Vec<NodeId> = g
        .ancilla_input_nodes()
        .into_iter()
        .filter(|&a| g.predecessors(a).is_empty())
        .collect();
    let oa: BTreeSet<NodeId> = g
        .ancilla_output_nodes()
        .into_iter()
        .filter(|&o| g.successors(o).is_empty())
        .collect();
    let oa_total = oa.len();

    let mut pool = oa.clone();
    let mut remaining: BTreeSet<NodeId> = ia.into_iter().collect();
    let mut priorities: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut stale = true;
    let mut added_edges = Vec::new();

    while !remaining.is_empty() {
        if stale {
            priorities = remaining
                .iter()
                .map(|&a| {
                    let n_a = g
                        .count_preceded_outputs(a, &oa)
                        .expect("ancilla input node");
                    (a, oa_total - n_a)
                })
                .collect();
            stale = false;
        }
        // Max priority wins; ties go to the smaller node id.
        let a = *priorities
            .iter()
            .max_by_key(|&(id, p)| (*p, Reverse(*id)))
            .expect("non-empty queue")
            .0;
        remaining.remove(&a);
        priorities.remove(&a);

        let found = match heuristic {
            Heuristic::M1 => find_candidate_m1(g, a, &pool, mode),
            Heuristic::M2 => find_candidate_m2(g, a, &pool),
        };
        if let Some(o) = found {
            apply_transformation(g, o, a).expect("candidate satisfies splice preconditions");
            pool.remove(&o);
            added_edges.push((o, a));
            stale = true;
        }
    }

    let wire_assignment: BTreeMap<QubitId, WireLabel> = (0..g.qubit_count())
        .map(|q| {
            let input = g.input_of(QubitId(q));
            (QubitId(q), g.node_unchecked(input).sole_wire())
        })
        .collect();
    let recycled_count = added_edges.len();
    RecyclePlan {
        added_edges,
        wire_assignment,
        recycled_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, GateOp, InitState, MeasureBasis, Qubit};
    use proptest::prelude::*;

    fn qubit(id: usize, init: InitState, measure: MeasureBasis) -> Qubit {
        Qubit {
            id: QubitId(id),
            label: format!("q{id}"),
            init,
            measure,
        }
    }

    fn cnot(c: usize, t: usize) -> GateOp {
        GateOp {
            name: "cnot".into(),
            controls: vec![QubitId(c)],
            targets: vec![QubitId(t)],
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
            gates: vec![cnot(0, 1), cnot(1, 2)],
        }
    }

    /// Six wires, four ancilla inputs (2..5), three ancilla outputs (0..2).
    /// Recycling merges them pairwise down to three wires.
    fn cascade_example() -> Circuit {
        Circuit {
            name: "cascade6".into(),
            qubits: vec![
                qubit(0, InitState::Configurable, MeasureBasis::Z),
                qubit(1, InitState::Configurable, MeasureBasis::Z),
                qubit(2, InitState::Zero, MeasureBasis::Z),
                qubit(3, InitState::Zero, MeasureBasis::Configurable),
                qubit(4, InitState::Zero, MeasureBasis::Configurable),
                qubit(5, InitState::Zero, MeasureBasis::Configurable),
            ],
            gates: vec![cnot(0, 2), cnot(1, 2), cnot(0, 3), cnot(3, 4), cnot(4, 5)],
        }
    }

    #[test]
    fn three_wire_recycles_one_wire_m1() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let plan = recycle(&mut g, Heuristic::M1);
        assert_eq!(plan.recycled_count, 1);
        assert_eq!(
            plan.added_edges,
            vec![(g.output_of(QubitId(0)), g.input_of(QubitId(2)))]
        );
        assert_eq!(plan.final_wire_count(), 2);
        assert_eq!(plan.wire_assignment[&QubitId(2)], WireLabel(0));
        assert!(g.is_acyclic());
    }

    #[test]
    fn three_wire_recycles_one_wire_m2() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let plan = recycle(&mut g, Heuristic::M2);
        assert_eq!(plan.recycled_count, 1);
        assert_eq!(
            plan.added_edges,
            vec![(g.output_of(QubitId(0)), g.input_of(QubitId(2)))]
        );
    }

    #[test]
    fn no_ancilla_inputs_means_empty_plan() {
        let c = Circuit {
            name: "io".into(),
            qubits: vec![
                qubit(0, InitState::Configurable, MeasureBasis::Z),
                qubit(1, InitState::Configurable, MeasureBasis::Z),
            ],
            gates: vec![cnot(0, 1)],
        };
        let mut g = CausalGraph::build(&c);
        let plan = recycle(&mut g, Heuristic::M1);
        assert_eq!(plan.recycled_count, 0);
        assert!(plan.added_edges.is_empty());
    }

    #[test]
    fn cascade_recycles_three_wires_both_heuristics() {
        for h in [Heuristic::M1, Heuristic::M2] {
            let c = cascade_example();
            let mut g = CausalGraph::build(&c);
            let plan = recycle(&mut g, h);
            assert_eq!(plan.recycled_count, 3, "{h:?}");
            let splices: BTreeSet<(NodeId, NodeId)> = plan.added_edges.iter().copied().collect();
            let expected: BTreeSet<(NodeId, NodeId)> = [
                (g.output_of(QubitId(1)), g.input_of(QubitId(5))),
                (g.output_of(QubitId(0)), g.input_of(QubitId(4))),
                (g.output_of(QubitId(2)), g.input_of(QubitId(3))),
            ]
            .into();
            assert_eq!(splices, expected, "{h:?}");
            assert_eq!(plan.final_wire_count(), 3, "{h:?}");
            assert!(g.is_acyclic(), "{h:?}");
        }
    }

    #[test]
    fn transformation_rejects_forward_path() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        // Input 0 precedes output 2; splicing output2 onto input0 must fail.
        let o = g.output_of(QubitId(2));
        let a = g.input_of(QubitId(0));
        let before: Vec<_> = g.edges().collect();
        assert_eq!(
            apply_transformation(&mut g, o, a),
            Err(RecycleError::WouldCycle {
                output: o.0,
                input: a.0
            })
        );
        assert_eq!(g.edges().collect::<Vec<_>>(), before);
    }

    #[test]
    fn transformation_rejects_non_ancilla_ends() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        // Qubit 1 is I/O on both ends.
        let err = apply_transformation(&mut g, g.output_of(QubitId(1)), g.input_of(QubitId(2)));
        assert!(matches!(err, Err(RecycleError::NotAvailableOutput(_))));
        let err = apply_transformation(&mut g, g.output_of(QubitId(0)), g.input_of(QubitId(1)));
        assert!(matches!(err, Err(RecycleError::NotAvailableInput(_))));
    }

    #[test]
    fn transformation_relabels_successor_chain() {
        let c = three_wire_example();
        let mut g = CausalGraph::build(&c);
        let o = g.output_of(QubitId(0));
        let a = g.input_of(QubitId(2));
        apply_transformation(&mut g, o, a).unwrap();
        // Qubit 2's whole chain (input, second cnot, output) moves to wire 0.
        assert_eq!(g.node(a).unwrap().wires, vec![WireLabel(0)]);
        assert_eq!(
            g.node(g.output_of(QubitId(2))).unwrap().wires,
            vec![WireLabel(0)]
        );
        // The second cnot touches qubits 1 and 2: wires now {1, 0}.
        let gate_node = g
            .nodes()
            .find(|n| matches!(n.kind, crate::causal::NodeKind::Gate { index: 1, .. }))
            .unwrap();
        assert_eq!(gate_node.wires, vec![WireLabel(1), WireLabel(0)]);
    }

    /// Stand-alone M1 ranking check: input on wire 3, candidates on wires 1
    /// and 4. The signed minimum is -2, so wire 1 wins; the absolute variant
    /// prefers wire 4 (distance 1).
    #[test]
    fn m1_signed_vs_absolute_ranking() {
        let c = Circuit {
            name: "rank".into(),
            qubits: vec![
                qubit(0, InitState::Configurable, MeasureBasis::Configurable),
                qubit(1, InitState::Configurable, MeasureBasis::Z),
                qubit(2, InitState::Configurable, MeasureBasis::Configurable),
                qubit(3, InitState::Zero, MeasureBasis::Configurable),
                qubit(4, InitState::Configurable, MeasureBasis::Z),
            ],
            gates: vec![],
        };
        let g = CausalGraph::build(&c);
        let a = g.input_of(QubitId(3));
        let pool: BTreeSet<NodeId> = [g.output_of(QubitId(1)), g.output_of(QubitId(4))].into();
        assert_eq!(
            find_candidate_m1(&g, a, &pool, M1Mode::Signed),
            Some(g.output_of(QubitId(1)))
        );
        assert_eq!(
            find_candidate_m1(&g, a, &pool, M1Mode::Absolute),
            Some(g.output_of(QubitId(4)))
        );
    }

    #[test]
    fn m1_empty_pool_returns_none() {
        let g = CausalGraph::build(&three_wire_example());
        let a = g.input_of(QubitId(2));
        assert_eq!(find_candidate_m1(&g, a, &BTreeSet::new(), M1Mode::Signed), None);
    }

    #[test]
    fn m1_three_wire_picks_reachable_free_output() {
        let g = CausalGraph::build(&three_wire_example());
        let a = g.input_of(QubitId(2));
        let pool: BTreeSet<NodeId> = [g.output_of(QubitId(0)), g.output_of(QubitId(2))].into();
        assert_eq!(
            find_candidate_m1(&g, a, &pool, M1Mode::Signed),
            Some(g.output_of(QubitId(0)))
        );
    }

    #[test]
    fn m2_three_wire_reaches_output_backwards() {
        let g = CausalGraph::build(&three_wire_example());
        let a = g.input_of(QubitId(2));
        let pool: BTreeSet<NodeId> = [g.output_of(QubitId(0)), g.output_of(QubitId(2))].into();
        // Path input2 -> cnot2 <- cnot1 -> output0: one backward step.
        assert_eq!(
            find_candidate_m2(&g, a, &pool),
            Some(g.output_of(QubitId(0)))
        );
    }

    #[test]
    fn m2_own_output_never_accepts() {
        // A lone ancilla: the only path to its output is forward, so nr = 0
        // and the reachability guard both reject it.
        let c = Circuit {
            name: "solo".into(),
            qubits: vec![qubit(0, InitState::Zero, MeasureBasis::Z)],
            gates: vec![],
        };
        let g = CausalGraph::build(&c);
        let pool: BTreeSet<NodeId> = [g.output_of(QubitId(0))].into();
        assert_eq!(find_candidate_m2(&g, g.input_of(QubitId(0)), &pool), None);
    }

    fn arbitrary_circuit() -> impl Strategy<Value = Circuit> {
        (2usize..9, 0usize..14).prop_flat_map(|(nq, ng)| {
            let qubits = proptest::collection::vec((any::<bool>(), any::<bool>()), nq..=nq);
            let gates = proptest::collection::vec((0usize..nq, 0usize..nq), ng..=ng);
            (qubits, gates).prop_map(move |(flags, pairs)| {
                let qubits = flags
                    .into_iter()
                    .enumerate()
                    .map(|(i, (fixed_in, fixed_out))| Qubit {
                        id: QubitId(i),
                        label: format!("q{i}"),
                        init: if fixed_in {
                            InitState::Zero
                        } else {
                            InitState::Configurable
                        },
                        measure: if fixed_out {
                            MeasureBasis::Z
                        } else {
                            MeasureBasis::Configurable
                        },
                    })
                    .collect();
                let gates = pairs
                    .into_iter()
                    .filter(|(c, t)| c != t)
                    .map(|(c, t)| cnot(c, t))
                    .collect();
                Circuit {
                    name: "prop".into(),
                    qubits,
                    gates,
                }
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// Every splice keeps the graph acyclic, the plan bookkeeping adds
        /// up, and I/O qubits keep their wires.
        #[test]
        fn recycle_invariants(c in arbitrary_circuit(), m2 in any::<bool>()) {
            let h = if m2 { Heuristic::M2 } else { Heuristic::M1 };
            let mut g = CausalGraph::build(&c);
            let (ia, oa) = c.classify_ancillae();
            let plan = recycle(&mut g, h);
            prop_assert!(g.is_acyclic());
            prop_assert_eq!(plan.recycled_count, plan.added_edges.len());
            prop_assert!(plan.recycled_count <= ia.len().min(oa.len()));
            prop_assert_eq!(plan.final_wire_count(), c.qubit_count() - plan.recycled_count);
            // No node appears twice among the splices.
            let outs: BTreeSet<_> = plan.added_edges.iter().map(|e| e.0).collect();
            let ins: BTreeSet<_> = plan.added_edges.iter().map(|e| e.1).collect();
            prop_assert_eq!(outs.len(), plan.added_edges.len());
            prop_assert_eq!(ins.len(), plan.added_edges.len());
            for q in &c.qubits {
                if q.is_io() {
                    prop_assert_eq!(plan.wire_assignment[&q.id], WireLabel(q.id.0));
                    prop_assert!(!outs.contains(&g.output_of(q.id)));
                    prop_assert!(!ins.contains(&g.input_of(q.id)));
                }
            }
        }

        /// Two runs on the same input give identical plans.
        #[test]
        fn recycle_is_deterministic(c in arbitrary_circuit(), m2 in any::<bool>()) {
            let h = if m2 { Heuristic::M2 } else { Heuristic::M1 };
            let mut g1 = CausalGraph::build(&c);
            let mut g2 = CausalGraph::build(&c);
            prop_assert_eq!(recycle(&mut g1, h), recycle(&mut g2, h));
        }

        /// M2 candidates always satisfy the no-forward-path rule.
        #[test]
        fn m2_respects_reachability(c in arbitrary_circuit()) {
            let g = CausalGraph::build(&c);
            let pool: BTreeSet<NodeId> = g.ancilla_output_nodes().into_iter().collect();
            for a in g.ancilla_input_nodes() {
                if let Some(o) = find_candidate_m2(&g, a, &pool) {
                    prop_assert!(!g.precedes(a, o).unwrap());
                }
            }
        }
    }
}
