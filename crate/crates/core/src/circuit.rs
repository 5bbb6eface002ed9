//! Circuit intermediate representation.
//!
//! A [`Circuit`] is a time-ordered gate list over a set of declared qubits.
//! Initialization and measurement are not stored as gate-list entries; they
//! are implied by per-qubit metadata ([`InitState`], [`MeasureBasis`]) and only
//! materialize as explicit nodes in the causal graph. This keeps the IR equal
//! to standard netlist formats while the graph carries the full operation set.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// State a qubit is prepared in at the start of its wire.
///
/// The fixed tags cover the preparations commonly used by fault-tolerant
/// circuits; `Configurable` marks an I/O input whose state is chosen by the
/// environment rather than the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitState {
    Zero,
    One,
    Plus,
    Y,
    A,
    Configurable,
}

impl InitState {
    /// True for every tag except `Configurable`.
    pub fn is_fixed(self) -> bool {
        !matches!(self, InitState::Configurable)
    }

    /// Token used by the ICM text format and the emitted schedule.
    pub fn token(self) -> &'static str {
        match self {
            InitState::Zero => "0",
            InitState::One => "1",
            InitState::Plus => "+",
            InitState::Y => "Y",
            InitState::A => "A",
            InitState::Configurable => "io",
        }
    }
}

/// Basis a qubit is measured in at the end of its wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureBasis {
    Z,
    X,
    Configurable,
}

impl MeasureBasis {
    pub fn is_fixed(self) -> bool {
        !matches!(self, MeasureBasis::Configurable)
    }

    /// Token used by the ICM text format and the emitted schedule.
    pub fn token(self) -> &'static str {
        match self {
            MeasureBasis::Z => "Z",
            MeasureBasis::X => "X",
            MeasureBasis::Configurable => "io",
        }
    }
}

/// Dense index of a qubit within its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId(pub usize);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// A declared qubit: identity plus initialization/measurement metadata.
///
/// Ancilla classification is derived, not stored: a qubit is an input ancilla
/// exactly when its initial state is fixed, and an output ancilla exactly when
/// its measurement basis is fixed. A qubit may be both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qubit {
    pub id: QubitId,
    pub label: String,
    pub init: InitState,
    pub measure: MeasureBasis,
}

impl Qubit {
    pub fn input_ancilla(&self) -> bool {
        self.init.is_fixed()
    }

    pub fn output_ancilla(&self) -> bool {
        self.measure.is_fixed()
    }

    /// Neither end fixed: the qubit is part of the circuit interface and its
    /// lifetime spans the whole time axis.
    pub fn is_io(&self) -> bool {
        !self.input_ancilla() && !self.output_ancilla()
    }
}

/// One gate application. `name` is uninterpreted text at IR level; only the
/// verifier assigns semantics to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateOp {
    pub name: String,
    pub controls: Vec<QubitId>,
    pub targets: Vec<QubitId>,
}

impl GateOp {
    /// Operands in control-then-target order.
    pub fn operands(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.controls.iter().chain(self.targets.iter()).copied()
    }

    pub fn arity(&self) -> usize {
        self.controls.len() + self.targets.len()
    }

    pub fn touches(&self, q: QubitId) -> bool {
        self.controls.contains(&q) || self.targets.contains(&q)
    }
}

/// A named circuit: declared qubits plus the time-ordered gate list
/// (index order is left-to-right circuit time).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub name: String,
    pub qubits: Vec<Qubit>,
    pub gates: Vec<GateOp>,
}

/// Span of gate indices during which a qubit is active. Both bounds are
/// absent exactly when no gate touches the qubit (the lifetime is entirely
/// passive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lifetime {
    pub qubit: QubitId,
    pub first_gate: Option<usize>,
    pub last_gate: Option<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("unknown qubit id {0}")]
    UnknownQubit(QubitId),
}

/// A single violation of the circuit invariants, as reported by
/// [`Circuit::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("qubit at position {position} has id {found}, expected contiguous id {position}")]
    NonContiguousId { position: usize, found: usize },
    #[error("gate {gate} ({name}) touches no qubits")]
    EmptyGate { gate: usize, name: String },
    #[error("gate {gate} ({name}): control equals target ({qubit})")]
    ControlTargetOverlap {
        gate: usize,
        name: String,
        qubit: QubitId,
    },
    #[error("gate {gate} ({name}): qubit {qubit} listed twice")]
    DuplicateOperand {
        gate: usize,
        name: String,
        qubit: QubitId,
    },
    #[error("gate {gate} ({name}) references undeclared qubit {qubit}")]
    UndeclaredQubit {
        gate: usize,
        name: String,
        qubit: QubitId,
    },
}

impl Circuit {
    pub fn qubit_count(&self) -> usize {
        self.qubits.len()
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Ids of input ancillae (fixed initialization) and output ancillae
    /// (fixed measurement). A qubit may appear in both sets; membership is a
    /// pure function of the init/measure tags and ignores the gate list.
    pub fn classify_ancillae(&self) -> (BTreeSet<QubitId>, BTreeSet<QubitId>) {
        let mut ia = BTreeSet::new();
        let mut oa = BTreeSet::new();
        for q in &self.qubits {
            if q.input_ancilla() {
                ia.insert(q.id);
            }
            if q.output_ancilla() {
                oa.insert(q.id);
            }
        }
        (ia, oa)
    }

    /// First and last gate index touching `q`, or an all-passive lifetime if
    /// no gate does.
    pub fn lifetime(&self, q: QubitId) -> Result<Lifetime, CircuitError> {
        if q.0 >= self.qubits.len() {
            return Err(CircuitError::UnknownQubit(q));
        }
        let mut first_gate = None;
        let mut last_gate = None;
        for (i, gate) in self.gates.iter().enumerate() {
            if gate.touches(q) {
                if first_gate.is_none() {
                    first_gate = Some(i);
                }
                last_gate = Some(i);
            }
        }
        Ok(Lifetime {
            qubit: q,
            first_gate,
            last_gate,
        })
    }

    /// Collect every invariant violation; `Ok(())` iff there are none.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        for (position, q) in self.qubits.iter().enumerate() {
            if q.id.0 != position {
                issues.push(ValidationIssue::NonContiguousId {
                    position,
                    found: q.id.0,
                });
            }
        }
        let n = self.qubits.len();
        for (gate, op) in self.gates.iter().enumerate() {
            if op.arity() == 0 {
                issues.push(ValidationIssue::EmptyGate {
                    gate,
                    name: op.name.clone(),
                });
            }
            for q in op.operands() {
                if q.0 >= n {
                    issues.push(ValidationIssue::UndeclaredQubit {
                        gate,
                        name: op.name.clone(),
                        qubit: q,
                    });
                }
            }
            for q in &op.controls {
                if op.targets.contains(q) {
                    issues.push(ValidationIssue::ControlTargetOverlap {
                        gate,
                        name: op.name.clone(),
                        qubit: *q,
                    });
                }
            }
            // Repeats inside one list; cross-list repeats were already
            // reported as control/target overlap.
            for list in [&op.controls, &op.targets] {
                let mut seen = BTreeSet::new();
                for &q in list {
                    if !seen.insert(q) {
                        issues.push(ValidationIssue::DuplicateOperand {
                            gate,
                            name: op.name.clone(),
                            qubit: q,
                        });
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}
