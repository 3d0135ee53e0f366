//! Turns a partitioned circuit into executable subcircuit pairs.
//!
//! [`plan_cuts`] locates every boundary crossing and attaches the matching
//! quasi-probability basis: crossing `cx`/`cz` gates get the six-term gate
//! basis, `cut_wire` markers get the eight-term wire basis. Any other
//! crossing gate kind is rejected; multi-controlled X gates must be
//! rewritten first (see [`crate::mcx`]).
//!
//! [`instantiate`] then realizes one term choice per cut as a pair of
//! fully local circuits. Gate cuts splice single-qubit operations in place
//! of the two-qubit gate (conjugating the target endpoint of a `cx` with H
//! so the gate basis applies unchanged). Wire cuts end the upstream segment
//! with the term's measurement and continue downstream on a fresh qubit
//! named `{original}#{segment}` prepared in the term's state. Signed
//! measurement outcomes are recorded as [`SignRule`]s so an estimator can
//! fold `(-1)^bit` factors into each sample.

use crate::ir::{
    validate_partition, Circuit, Gate, GateKind, IrError, QubitRef, Side,
};
use crate::qpd::{basis_for, gamma_per_cut, CutKind, LocalOp, LocalOpGate, QpdBasis};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CutError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("gate {index} ({kind}) crosses the partition and has no cut basis; decompose it first")]
    UncuttableCrossing { index: usize, kind: String },
    #[error("assignment has {got} entries for {expected} cuts")]
    BadAssignment { expected: usize, got: usize },
    #[error("cut {cut}: term index {index} out of range ({terms} terms)")]
    TermIndexOutOfRange { cut: usize, index: usize, terms: usize },
    #[error("plan does not match circuit at gate {index}: {detail}")]
    PlanMismatch { index: usize, detail: String },
    #[error("gate {index} crosses the partition but is not covered by the plan")]
    UncutCrossing { index: usize },
}

/// Where a cut applies in the gate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutLocation {
    /// A two-qubit `cx`/`cz` gate at this index.
    Gate { index: usize },
    /// A `cut_wire` marker at this index.
    Wire { marker_index: usize, qubit: QubitRef },
}

impl CutLocation {
    pub fn gate_index(&self) -> usize {
        match *self {
            CutLocation::Gate { index } => index,
            CutLocation::Wire { marker_index, .. } => marker_index,
        }
    }
}

/// One cut with its quasi-probability basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub location: CutLocation,
    pub basis: QpdBasis,
}

/// All cuts needed to make a circuit fully local, in gate order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutPlan {
    pub cuts: Vec<Cut>,
}

impl CutPlan {
    /// Product of per-cut 1-norms: the sampling-cost scale factor.
    pub fn gamma(&self) -> f64 {
        self.cuts.iter().map(|c| c.basis.gamma()).product()
    }

    /// Same product under the stated communication model. With classical
    /// communication the per-cut factors shrink (gate cuts 3 -> 2) without
    /// changing the term tables here, so this value is analytic only.
    pub fn gamma_assuming(&self, classical_comm: bool) -> f64 {
        self.cuts
            .iter()
            .map(|c| gamma_per_cut(c.basis.kind, classical_comm))
            .product()
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts.len()
    }
}

/// Builds the cut plan for every boundary crossing of the circuit.
pub fn plan_cuts(circuit: &Circuit) -> Result<CutPlan, CutError> {
    let report = validate_partition(circuit)?;
    let mut cuts = Vec::new();
    for &index in &report.crossing_gates {
        match circuit.gates[index].kind {
            GateKind::Cx | GateKind::Cz => cuts.push(Cut {
                location: CutLocation::Gate { index },
                basis: basis_for(CutKind::GateCx),
            }),
            ref kind => {
                return Err(CutError::UncuttableCrossing {
                    index,
                    kind: kind.name().to_string(),
                })
            }
        }
    }
    for w in &report.wire_crossings {
        cuts.push(Cut {
            location: CutLocation::Wire {
                marker_index: w.gate_index,
                qubit: w.qubit,
            },
            basis: basis_for(CutKind::Wire),
        });
    }
    cuts.sort_by_key(|c| c.location.gate_index());
    Ok(CutPlan { cuts })
}

/// One term index per cut, aligned with `CutPlan::cuts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermAssignment {
    pub indices: Vec<usize>,
}

/// Number of distinct term assignments (1 for a plan with no cuts).
pub fn num_assignments(plan: &CutPlan) -> u128 {
    plan.cuts
        .iter()
        .map(|c| c.basis.num_terms() as u128)
        .product()
}

/// Iterates every assignment in lexicographic order, last cut fastest.
pub fn all_assignments(plan: &CutPlan) -> AssignmentIter {
    AssignmentIter {
        sizes: plan.cuts.iter().map(|c| c.basis.num_terms()).collect(),
        next: Some(vec![0; plan.cuts.len()]),
    }
}

pub struct AssignmentIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for AssignmentIter {
    type Item = TermAssignment;

    fn next(&mut self) -> Option<TermAssignment> {
        let current = self.next.take()?;
        let mut following = current.clone();
        let mut pos = self.sizes.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            following[pos] += 1;
            if following[pos] < self.sizes[pos] {
                self.next = Some(following);
                break;
            }
            following[pos] = 0;
        }
        Some(TermAssignment { indices: current })
    }
}

/// A signed measurement outcome the estimator must fold into each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignRule {
    pub side: Side,
    pub classbit: usize,
}

/// Two local circuits realizing one term assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcircuitPair {
    pub circuit_a: Circuit,
    pub circuit_b: Circuit,
    /// Product of the chosen terms' coefficients.
    pub coefficient: f64,
    pub sign_rules: Vec<SignRule>,
    pub assignment: TermAssignment,
    final_locations: Vec<(Side, usize)>,
}

impl SubcircuitPair {
    pub fn circuit(&self, side: Side) -> &Circuit {
        match side {
            Side::A => &self.circuit_a,
            Side::B => &self.circuit_b,
        }
    }

    /// Side and qubit index holding the last segment of an original qubit.
    /// End-of-circuit observables on the original qubit translate here.
    pub fn final_location(&self, q: QubitRef) -> (Side, usize) {
        self.final_locations[q.0]
    }
}

struct SideBuilder {
    circuit: Circuit,
    next_classbit: usize,
}

/// Realizes one term assignment as a pair of local circuits.
pub fn instantiate(
    circuit: &Circuit,
    plan: &CutPlan,
    assignment: &TermAssignment,
) -> Result<SubcircuitPair, CutError> {
    circuit.validate()?;
    let partition = circuit
        .partition
        .as_ref()
        .ok_or(IrError::PartitionMissing)?;
    if assignment.indices.len() != plan.cuts.len() {
        return Err(CutError::BadAssignment {
            expected: plan.cuts.len(),
            got: assignment.indices.len(),
        });
    }
    for (cut_idx, (&term_idx, cut)) in
        assignment.indices.iter().zip(&plan.cuts).enumerate()
    {
        if term_idx >= cut.basis.num_terms() {
            return Err(CutError::TermIndexOutOfRange {
                cut: cut_idx,
                index: term_idx,
                terms: cut.basis.num_terms(),
            });
        }
    }
    let mut cut_at: HashMap<usize, usize> = HashMap::new();
    for (cut_idx, cut) in plan.cuts.iter().enumerate() {
        if cut_at.insert(cut.location.gate_index(), cut_idx).is_some() {
            return Err(CutError::PlanMismatch {
                index: cut.location.gate_index(),
                detail: "two cuts at one gate index".into(),
            });
        }
    }

    // Reserve classbit ranges so inserted measurements never collide with
    // the circuit's own. Auto-indexed measurements occupy 0..count on
    // whichever side they land, so walk the segment structure first.
    let mut side_walk: Vec<Side> = partition.clone();
    let mut plain_measures = [0usize; 2];
    let mut max_explicit = [0usize; 2];
    for gate in &circuit.gates {
        if gate.kind == GateKind::CutWire {
            let q = gate.qubits[0].0;
            side_walk[q] = side_walk[q].other();
        } else if gate.kind == GateKind::MeasureZ {
            let s = side_walk[gate.qubits[0].0] as usize;
            match gate.classbit {
                Some(cb) => max_explicit[s] = max_explicit[s].max(cb + 1),
                None => plain_measures[s] += 1,
            }
        }
    }

    let mut sides = [
        SideBuilder {
            circuit: Circuit::new(Vec::new()),
            next_classbit: plain_measures[0].max(max_explicit[0]),
        },
        SideBuilder {
            circuit: Circuit::new(Vec::new()),
            next_classbit: plain_measures[1].max(max_explicit[1]),
        },
    ];
    let mut current: Vec<(Side, usize)> = Vec::with_capacity(circuit.num_qubits());
    for (name, &side) in circuit.qubits.iter().zip(partition.iter()) {
        let idx = sides[side as usize].circuit.add_qubit(name.clone(), None);
        current.push((side, idx.0));
    }
    let mut segments = vec![0usize; circuit.num_qubits()];

    let mut coefficient = 1.0f64;
    let mut sign_rules = Vec::new();

    let emit_op = |sides: &mut [SideBuilder; 2],
                       sign_rules: &mut Vec<SignRule>,
                       op: &LocalOp,
                       location: (Side, usize),
                       wrap_h: bool| {
        let (side, idx) = location;
        let builder = &mut sides[side as usize];
        let q = QubitRef(idx);
        if wrap_h {
            builder.circuit.gates.push(Gate::h(q));
        }
        for log in &op.gates {
            let mut gate = log.to_gate(q);
            if let LocalOpGate::MeasureZ { sign } = log {
                let cb = builder.next_classbit;
                builder.next_classbit += 1;
                gate.classbit = Some(cb);
                if *sign {
                    sign_rules.push(SignRule { side, classbit: cb });
                }
            }
            builder.circuit.gates.push(gate);
        }
        if wrap_h {
            builder.circuit.gates.push(Gate::h(q));
        }
    };

    for (i, gate) in circuit.gates.iter().enumerate() {
        if let Some(&cut_idx) = cut_at.get(&i) {
            let cut = &plan.cuts[cut_idx];
            let term = &cut.basis.terms[assignment.indices[cut_idx]];
            coefficient *= term.coefficient;
            match cut.location {
                CutLocation::Gate { .. } => {
                    let wrap_target = match gate.kind {
                        GateKind::Cx => true,
                        GateKind::Cz => false,
                        ref kind => {
                            return Err(CutError::PlanMismatch {
                                index: i,
                                detail: format!(
                                    "gate cut planned on a {} gate",
                                    kind.name()
                                ),
                            })
                        }
                    };
                    let loc_a = current[gate.qubits[0].0];
                    let loc_b = current[gate.qubits[1].0];
                    if loc_a.0 == loc_b.0 {
                        return Err(CutError::PlanMismatch {
                            index: i,
                            detail: "planned gate cut is not a crossing".into(),
                        });
                    }
                    emit_op(&mut sides, &mut sign_rules, &term.op_a, loc_a, false);
                    emit_op(&mut sides, &mut sign_rules, &term.op_b, loc_b, wrap_target);
                }
                CutLocation::Wire { qubit, .. } => {
                    if gate.kind != GateKind::CutWire || gate.qubits[0] != qubit {
                        return Err(CutError::PlanMismatch {
                            index: i,
                            detail: "planned wire cut is not at a cut_wire marker".into(),
                        });
                    }
                    let q = qubit.0;
                    emit_op(&mut sides, &mut sign_rules, &term.op_a, current[q], false);
                    segments[q] += 1;
                    let new_side = current[q].0.other();
                    let name = format!("{}#{}", circuit.qubits[q], segments[q]);
                    let idx = sides[new_side as usize].circuit.add_qubit(name, None);
                    current[q] = (new_side, idx.0);
                    emit_op(&mut sides, &mut sign_rules, &term.op_b, current[q], false);
                }
            }
            continue;
        }
        if gate.kind == GateKind::CutWire {
            return Err(CutError::PlanMismatch {
                index: i,
                detail: "cut_wire marker not covered by the plan".into(),
            });
        }
        let side = current[gate.qubits[0].0].0;
        if gate.qubits.iter().any(|q| current[q.0].0 != side) {
            return Err(CutError::UncutCrossing { index: i });
        }
        let mut mapped = gate.clone();
        mapped.qubits = gate
            .qubits
            .iter()
            .map(|q| QubitRef(current[q.0].1))
            .collect();
        sides[side as usize].circuit.gates.push(mapped);
    }

    let [a, b] = sides;
    let pair = SubcircuitPair {
        circuit_a: a.circuit,
        circuit_b: b.circuit,
        coefficient,
        sign_rules,
        assignment: assignment.clone(),
        final_locations: current,
    };
    pair.circuit_a.validate()?;
    pair.circuit_b.validate()?;
    Ok(pair)
}
