//! Causal graph of a circuit.
//!
//! Every circuit operation — each qubit initialization, each gate, each
//! measurement — becomes one node; directed edges encode relative temporal
//! ordering. Each node carries the set of wire labels it operates on, which
//! start out equal to the qubit ids and get rewritten as wires are merged.
//!
//! Reachability is answered by on-demand depth-first search; no persistent
//! transitive closure is maintained across mutations.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::circuit::{Circuit, InitState, MeasureBasis, QubitId};

/// Dense index of a node within its graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Label of a circuit wire. Initially the qubit's top-down position in the
/// diagram (= its id); recycling rewrites labels so several qubits can share
/// one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireLabel(pub usize);

impl fmt::Display for WireLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// What a node abstracts. Gate nodes keep the IR's ordered operand lists so
/// that emission can preserve control/target roles; at graph level only the
/// operand set matters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Input {
        qubit: QubitId,
        state: InitState,
    },
    Gate {
        /// Index of the gate in the source circuit's time order.
        index: usize,
        name: String,
        controls: Vec<QubitId>,
        targets: Vec<QubitId>,
    },
    Output {
        qubit: QubitId,
        basis: MeasureBasis,
    },
}

/// One operation node: its kind plus the wire labels it touches. For gate
/// nodes `wires` is aligned with the control-then-target operand order; for
/// input/output nodes it holds the single wire of the qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub wires: Vec<WireLabel>,
}

impl CausalNode {
    pub fn is_input(&self) -> bool {
        matches!(self.kind, NodeKind::Input { .. })
    }

    pub fn is_output(&self) -> bool {
        matches!(self.kind, NodeKind::Output { .. })
    }

    /// Input node of an input ancilla (fixed initialization state).
    pub fn is_ancilla_input(&self) -> bool {
        matches!(self.kind, NodeKind::Input { state, .. } if state.is_fixed())
    }

    /// Output node of an output ancilla (fixed measurement basis).
    pub fn is_ancilla_output(&self) -> bool {
        matches!(self.kind, NodeKind::Output { basis, .. } if basis.is_fixed())
    }

    /// The single wire of an input or output node.
    pub fn sole_wire(&self) -> WireLabel {
        debug_assert_eq!(self.wires.len(), 1);
        self.wires[0]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node id {0} out of range")]
    InvalidNode(usize),
    #[error("node {0} is not an ancilla input node")]
    NotAncillaInput(usize),
    #[error("graph contains a cycle")]
    Cyclic,
}

/// Directed acyclic graph of circuit operations.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<CausalNode>,
    succs: Vec<Vec<NodeId>>,
    preds: Vec<Vec<NodeId>>,
    inputs_by_qubit: Vec<NodeId>,
    outputs_by_qubit: Vec<NodeId>,
}

impl CausalGraph {
    /// Build the graph of a valid circuit.
    ///
    /// Per qubit there is one input and one output node; per gate one node.
    /// Edges chain each qubit's operations in time: input, the gates touching
    /// the qubit in order, output. Parallel edges (two qubits shared by
    /// consecutive gates) are collapsed. Node ids are assigned inputs first
    /// (qubit order), then gates (time order), then outputs (qubit order).
    pub fn build(circuit: &Circuit) -> CausalGraph {
        let n = circuit.qubit_count();
        let g = circuit.gate_count();
        let mut nodes = Vec::with_capacity(2 * n + g);

        for q in &circuit.qubits {
            nodes.push(CausalNode {
                id: NodeId(nodes.len()),
                kind: NodeKind::Input {
                    qubit: q.id,
                    state: q.init,
                },
                wires: vec![WireLabel(q.id.0)],
            });
        }
        for (index, gate) in circuit.gates.iter().enumerate() {
            nodes.push(CausalNode {
                id: NodeId(nodes.len()),
                kind: NodeKind::Gate {
                    index,
                    name: gate.name.clone(),
                    controls: gate.controls.clone(),
                    targets: gate.targets.clone(),
                },
                wires: gate.operands().map(|q| WireLabel(q.0)).collect(),
            });
        }
        for q in &circuit.qubits {
            nodes.push(CausalNode {
                id: NodeId(nodes.len()),
                kind: NodeKind::Output {
                    qubit: q.id,
                    basis: q.measure,
                },
                wires: vec![WireLabel(q.id.0)],
            });
        }

        let inputs_by_qubit: Vec<NodeId> = (0..n).map(NodeId).collect();
        let outputs_by_qubit: Vec<NodeId> = (n + g..2 * n + g).map(NodeId).collect();

        let total = nodes.len();
        let mut graph = CausalGraph {
            nodes,
            succs: vec![Vec::new(); total],
            preds: vec![Vec::new(); total],
            inputs_by_qubit,
            outputs_by_qubit,
        };

        // Chain each qubit's operations; `last` is the most recent node on
        // the qubit's timeline.
        let mut last: Vec<NodeId> = graph.inputs_by_qubit.clone();
        for (index, gate) in circuit.gates.iter().enumerate() {
            let gate_node = NodeId(n + index);
            for q in gate.operands() {
                graph.add_edge_dedup(last[q.0], gate_node);
                last[q.0] = gate_node;
            }
        }
        for q in 0..n {
            graph.add_edge_dedup(last[q], graph.outputs_by_qubit[q]);
        }
        graph
    }

    fn add_edge_dedup(&mut self, from: NodeId, to: NodeId) {
        if !self.succs[from.0].contains(&to) {
            self.succs[from.0].push(to);
            self.preds[to.0].push(from);
        }
    }

    /// Insert a directed edge. Callers are responsible for keeping the graph
    /// acyclic; the recycling engine checks reachability first.
    pub(crate) fn add_edge(&mut self, from: NodeId, to: NodeId) {
        self.add_edge_dedup(from, to);
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CausalNode> {
        self.nodes.iter()
    }

    pub fn node(&self, id: NodeId) -> Result<&CausalNode, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::InvalidNode(id.0))
    }

    pub(crate) fn node_unchecked(&self, id: NodeId) -> &CausalNode {
        &self.nodes[id.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.succs
            .iter()
            .enumerate()
            .flat_map(|(from, tos)| tos.iter().map(move |&to| (NodeId(from), to)))
    }

    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        &self.succs[id.0]
    }

    pub fn predecessors(&self, id: NodeId) -> &[NodeId] {
        &self.preds[id.0]
    }

    pub fn input_of(&self, q: QubitId) -> NodeId {
        self.inputs_by_qubit[q.0]
    }

    pub fn output_of(&self, q: QubitId) -> NodeId {
        self.outputs_by_qubit[q.0]
    }

    pub fn qubit_count(&self) -> usize {
        self.inputs_by_qubit.len()
    }

    /// Node ids of all ancilla inputs, in qubit order.
    pub fn ancilla_input_nodes(&self) -> Vec<NodeId> {
        self.inputs_by_qubit
            .iter()
            .copied()
            .filter(|&id| self.nodes[id.0].is_ancilla_input())
            .collect()
    }

    /// Node ids of all ancilla outputs, in qubit order.
    pub fn ancilla_output_nodes(&self) -> Vec<NodeId> {
        self.outputs_by_qubit
            .iter()
            .copied()
            .filter(|&id| self.nodes[id.0].is_ancilla_output())
            .collect()
    }

    /// Depth-first reachability: every node with a directed path from `from`
    /// of length >= 1. The flag vector is indexed by node id.
    pub(crate) fn reach_set(&self, from: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = self.succs[from.0].clone();
        while let Some(v) = stack.pop() {
            if !seen[v.0] {
                seen[v.0] = true;
                stack.extend_from_slice(&self.succs[v.0]);
            }
        }
        // A DAG never reaches its own start; clear the flag in case callers
        // probe it on a (transiently) cyclic graph.
        seen[from.0] = false;
        seen
    }

    /// True iff a directed path u -> ... -> v exists. Irreflexive:
    /// `precedes(u, u)` is false.
    pub fn precedes(&self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        if u.0 >= self.nodes.len() {
            return Err(GraphError::InvalidNode(u.0));
        }
        if v.0 >= self.nodes.len() {
            return Err(GraphError::InvalidNode(v.0));
        }
        if u == v {
            return Ok(false);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = self.succs[u.0].clone();
        while let Some(w) = stack.pop() {
            if w == v {
                return Ok(true);
            }
            if !seen[w.0] {
                seen[w.0] = true;
                stack.extend_from_slice(&self.succs[w.0]);
            }
        }
        Ok(false)
    }

    /// Number of nodes of `oa` reachable from the ancilla input node `a`.
    pub fn count_preceded_outputs(
        &self,
        a: NodeId,
        oa: &BTreeSet<NodeId>,
    ) -> Result<usize, GraphError> {
        let node = self.node(a)?;
        if !node.is_ancilla_input() {
            return Err(GraphError::NotAncillaInput(a.0));
        }
        let seen = self.reach_set(a);
        Ok(oa.iter().filter(|o| seen[o.0]).count())
    }

    /// Kahn topological sort with ties broken by smallest node id, so the
    /// order is deterministic for a fixed graph.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let mut indegree: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<NodeId> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| NodeId(i))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for &succ in &self.succs[next.0] {
                indegree[succ.0] -= 1;
                if indegree[succ.0] == 0 {
                    ready.insert(succ);
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            Err(GraphError::Cyclic)
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_ok()
    }

    /// Rewrite wire label `from` to `to` on `start` and every node reachable
    /// from it. Used by the recycling transformation; other chains keep their
    /// labels.
    pub(crate) fn relabel_from(&mut self, start: NodeId, from: WireLabel, to: WireLabel) {
        let mut pending = vec![start];
        let mut seen = vec![false; self.nodes.len()];
        seen[start.0] = true;
        while let Some(v) = pending.pop() {
            for w in &mut self.nodes[v.0].wires {
                if *w == from {
                    *w = to;
                }
            }
            for &succ in &self.succs[v.0] {
                if !seen[succ.0] {
                    seen[succ.0] = true;
                    pending.push(succ);
                }
            }
        }
    }

    /// Render the graph in DOT format for manual inspection. Edges listed in
    /// `highlight` (recycling splices) are drawn dashed.
    pub fn to_dot(&self, highlight: &[(NodeId, NodeId)]) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "digraph causal {{");
        let _ = writeln!(out, "  rankdir=LR;");
        for node in &self.nodes {
            let wires = node
                .wires
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",");
            let (label, shape) = match &node.kind {
                NodeKind::Input { qubit, state } => {
                    (format!("init {qubit} [{wires}] {}", state.token()), "invhouse")
                }
                NodeKind::Gate { name, .. } => (format!("{name} [{wires}]"), "box"),
                NodeKind::Output { qubit, basis } => {
                    (format!("measure {qubit} [{wires}] {}", basis.token()), "house")
                }
            };
            let _ = writeln!(
                out,
                "  {} [label=\"{}\" shape={}];",
                node.id, label, shape
            );
        }
        for (from, to) in self.edges() {
            if highlight.contains(&(from, to)) {
                let _ = writeln!(out, "  {from} -> {to} [style=dashed color=red];");
            } else {
                let _ = writeln!(out, "  {from} -> {to};");
            }
        }
        out.push_str("}\n");
        out
    }
}
