//! Partition-aware rewriting of multi-controlled X gates.
//!
//! A multi-controlled X whose controls straddle the partition boundary is
//! not directly cuttable. Each [`Strategy`] rewrites such a gate into local
//! pieces joined by a small, fixed number of cuttable crossings. With the
//! controls-only side written A (m1 controls) and the target side B (m2
//! controls plus target t):
//!
//! * `Dec1`: one clean ancilla a on side A. `MCX(A->a)`, hand a's wire to
//!   side B, `MCX({a} u B -> t)`, hand it back, `MCX(A->a)`. No crossing
//!   gates, two wire crossings.
//! * `Dec2A`: clean ancillas a0 (side A) and a1 (side B). `MCX(A->a0)`,
//!   `CX(a0->a1)`, `MCX({a1} u B -> t)`, then uncompute both. Two crossing
//!   CX gates, no wire crossings.
//! * `Dec2Ad`: dirty ancillas a (side A) and b (side B), both left holding
//!   the AND of the A controls. `MCX(A->a)`, `CX(a->b)`, `MCX({b} u B -> t)`.
//!   One crossing CX.
//! * `Dec2AdCleanA`: `Dec2Ad` plus a trailing `MCX(A->a)`, so only b stays
//!   dirty. Still one crossing CX.
//! * `Baseline`: partition-oblivious expansion into a clean-ancilla Toffoli
//!   ladder with every Toffoli written in the standard 6-CX form; crossings
//!   are whatever the mechanical count finds.
//!
//! Dirty ancillas are never reused automatically; later cuts always
//! allocate fresh qubits.

use crate::ir::{
    validate_partition, Circuit, Gate, GateKind, IrError, QubitRef, Side,
};
use crate::sim::{run_exact_branches, SimError, StateVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("gate index {0} out of range")]
    GateIndexOutOfRange(usize),
    #[error("gate {index} ({kind}) is not a multi-controlled X with at least 2 controls")]
    NotAnMcx { index: usize, kind: String },
    #[error("partition required: circuit has no partition labels")]
    PartitionMissing,
    #[error("gate {0} is local to one side, no cut needed")]
    NoCutNeeded(usize),
    #[error("unsupported split: {0}")]
    UnsupportedSplit(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Rewriting strategy for one boundary-crossing multi-controlled X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Dec1,
    Dec2A,
    Dec2Ad,
    Dec2AdCleanA,
    Baseline,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Dec1,
        Strategy::Dec2A,
        Strategy::Dec2Ad,
        Strategy::Dec2AdCleanA,
        Strategy::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dec1 => "dec1",
            Strategy::Dec2A => "dec2a",
            Strategy::Dec2Ad => "dec2ad",
            Strategy::Dec2AdCleanA => "dec2ad_clean_a",
            Strategy::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Extra qubits the strategy introduces for one gate.
    pub fn extra_qubits(self, num_controls: usize) -> usize {
        match self {
            Strategy::Dec1 => 1,
            Strategy::Dec2A | Strategy::Dec2Ad | Strategy::Dec2AdCleanA => 2,
            Strategy::Baseline => num_controls.saturating_sub(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecomposeOptions {
    /// With `Dec2Ad` and no controls on the target side, drop the b ancilla
    /// and cut `CX(a->t)` directly.
    pub fuse_b: bool,
}

/// An ancilla introduced by a decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncillaRef {
    pub qubit: QubitRef,
    /// A dirty ancilla ends the decomposition holding a computed value
    /// instead of `|0>`.
    pub dirty: bool,
}

/// Outcome of rewriting one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub circuit: Circuit,
    pub ancillas: Vec<AncillaRef>,
    /// Boundary-crossing gates among the replacement sequence.
    pub crossing_gates: usize,
    /// Wire crossings among the replacement sequence.
    pub crossing_wires: usize,
}

struct Split {
    /// Controls on the side that does not hold the target.
    a_controls: Vec<QubitRef>,
    /// Controls that share a side with the target.
    b_controls: Vec<QubitRef>,
    /// All controls in original order, for partition-oblivious strategies.
    all_controls: Vec<QubitRef>,
    target: QubitRef,
    a_side: Side,
    t_side: Side,
}

/// Emits a multi-controlled X, normalized to `cx`/`ccx` for small arities.
fn mcx_gate(controls: &[QubitRef], target: QubitRef) -> Gate {
    let mut qubits: Vec<QubitRef> = controls.to_vec();
    qubits.push(target);
    let kind = match controls.len() {
        0 => GateKind::X,
        1 => GateKind::Cx,
        2 => GateKind::Ccx,
        m => GateKind::Mcx(m),
    };
    Gate::new(kind, qubits)
}

fn fresh_name(circuit: &Circuit, base: &str) -> String {
    if !circuit.qubits.iter().any(|n| n == base) {
        return base.to_string();
    }
    let mut k = 1;
    loop {
        let candidate = format!("{base}_{k}");
        if !circuit.qubits.iter().any(|n| n == &candidate) {
            return candidate;
        }
        k += 1;
    }
}

fn add_ancilla(circuit: &mut Circuit, base: &str, side: Side) -> QubitRef {
    let name = fresh_name(circuit, base);
    circuit.add_qubit(name, Some(side))
}

/// Standard 6-CX Toffoli. With the phase-convention `rz`, `rz(pi/4)` is an
/// exact T gate, so the expansion equals `ccx` with no phase defect.
fn toffoli_6cx(a: QubitRef, b: QubitRef, c: QubitRef) -> Vec<Gate> {
    use std::f64::consts::FRAC_PI_4;
    vec![
        Gate::h(c),
        Gate::cx(b, c),
        Gate::rz(c, -FRAC_PI_4),
        Gate::cx(a, c),
        Gate::rz(c, FRAC_PI_4),
        Gate::cx(b, c),
        Gate::rz(c, -FRAC_PI_4),
        Gate::cx(a, c),
        Gate::rz(b, FRAC_PI_4),
        Gate::rz(c, FRAC_PI_4),
        Gate::h(c),
        Gate::cx(a, b),
        Gate::rz(a, FRAC_PI_4),
        Gate::rz(b, -FRAC_PI_4),
        Gate::cx(a, b),
    ]
}

/// Builds the replacement gate sequence for one strategy, appending any
/// ancillas to `circuit`.
fn build_replacement(
    circuit: &mut Circuit,
    strategy: Strategy,
    opts: DecomposeOptions,
    split: &Split,
) -> (Vec<Gate>, Vec<AncillaRef>) {
    let a = &split.a_controls;
    let b = &split.b_controls;
    let t = split.target;
    match strategy {
        Strategy::Dec1 => {
            let anc = add_ancilla(circuit, "a", split.a_side);
            let mut middle = vec![anc];
            middle.extend_from_slice(b);
            let gates = vec![
                mcx_gate(a, anc),
                Gate::cut_wire(anc),
                mcx_gate(&middle, t),
                Gate::cut_wire(anc),
                mcx_gate(a, anc),
            ];
            (gates, vec![AncillaRef { qubit: anc, dirty: false }])
        }
        Strategy::Dec2A => {
            let a0 = add_ancilla(circuit, "a0", split.a_side);
            let a1 = add_ancilla(circuit, "a1", split.t_side);
            let mut middle = vec![a1];
            middle.extend_from_slice(b);
            let gates = vec![
                mcx_gate(a, a0),
                Gate::cx(a0, a1),
                mcx_gate(&middle, t),
                Gate::cx(a0, a1),
                mcx_gate(a, a0),
            ];
            (
                gates,
                vec![
                    AncillaRef { qubit: a0, dirty: false },
                    AncillaRef { qubit: a1, dirty: false },
                ],
            )
        }
        Strategy::Dec2Ad if opts.fuse_b && b.is_empty() => {
            let anc = add_ancilla(circuit, "a", split.a_side);
            let gates = vec![mcx_gate(a, anc), Gate::cx(anc, t)];
            (gates, vec![AncillaRef { qubit: anc, dirty: true }])
        }
        Strategy::Dec2Ad | Strategy::Dec2AdCleanA => {
            let anc_a = add_ancilla(circuit, "a", split.a_side);
            let anc_b = add_ancilla(circuit, "b", split.t_side);
            let mut middle = vec![anc_b];
            middle.extend_from_slice(b);
            let mut gates = vec![
                mcx_gate(a, anc_a),
                Gate::cx(anc_a, anc_b),
                mcx_gate(&middle, t),
            ];
            let a_dirty = if strategy == Strategy::Dec2AdCleanA {
                gates.push(mcx_gate(a, anc_a));
                false
            } else {
                true
            };
            (
                gates,
                vec![
                    AncillaRef { qubit: anc_a, dirty: a_dirty },
                    AncillaRef { qubit: anc_b, dirty: true },
                ],
            )
        }
        Strategy::Baseline => {
            let controls = &split.all_controls;
            let m = controls.len();
            match m {
                1 => (vec![Gate::cx(controls[0], t)], Vec::new()),
                2 => (toffoli_6cx(controls[0], controls[1], t), Vec::new()),
                _ => {
                    let ladder: Vec<QubitRef> = (0..m - 2)
                        .map(|k| add_ancilla(circuit, &format!("n{k}"), split.t_side))
                        .collect();
                    let mut toffolis = vec![(controls[0], controls[1], ladder[0])];
                    for i in 1..m - 2 {
                        toffolis.push((controls[i + 1], ladder[i - 1], ladder[i]));
                    }
                    let mut gates = Vec::new();
                    for &(x, y, z) in &toffolis {
                        gates.extend(toffoli_6cx(x, y, z));
                    }
                    gates.extend(toffoli_6cx(controls[m - 1], ladder[m - 3], t));
                    for &(x, y, z) in toffolis.iter().rev() {
                        gates.extend(toffoli_6cx(x, y, z));
                    }
                    let ancillas = ladder
                        .into_iter()
                        .map(|qubit| AncillaRef { qubit, dirty: false })
                        .collect();
                    (gates, ancillas)
                }
            }
        }
    }
}

fn split_gate(circuit: &Circuit, gate_index: usize) -> Result<Split, DecomposeError> {
    let partition = circuit
        .partition
        .as_ref()
        .ok_or(DecomposeError::PartitionMissing)?;
    let gate = circuit
        .gates
        .get(gate_index)
        .ok_or(DecomposeError::GateIndexOutOfRange(gate_index))?;
    match gate.kind {
        GateKind::Mcx(m) if m >= 2 => {}
        GateKind::Ccx => {}
        ref kind => {
            return Err(DecomposeError::NotAnMcx {
                index: gate_index,
                kind: kind.name().to_string(),
            })
        }
    }

    // Effective sides at the gate, honoring earlier cut_wire markers.
    let mut toggles = vec![false; circuit.num_qubits()];
    for g in &circuit.gates[..gate_index] {
        if g.kind == GateKind::CutWire {
            toggles[g.qubits[0].0] = !toggles[g.qubits[0].0];
        }
    }
    let side_of = |q: QubitRef| {
        if toggles[q.0] {
            partition[q.0].other()
        } else {
            partition[q.0]
        }
    };

    let target = gate.target();
    let t_side = side_of(target);
    let all_controls: Vec<QubitRef> = gate.controls().to_vec();
    let (b_controls, a_controls): (Vec<QubitRef>, Vec<QubitRef>) =
        all_controls.iter().partition(|&&q| side_of(q) == t_side);
    if a_controls.is_empty() {
        return Err(DecomposeError::NoCutNeeded(gate_index));
    }
    Ok(Split {
        a_controls,
        b_controls,
        all_controls,
        target,
        a_side: t_side.other(),
        t_side,
    })
}

/// Rewrites the multi-controlled X at `gate_index` with the given strategy.
///
/// Ancillas are appended after the existing qubits and labelled with the
/// side stated per strategy. The returned crossing counts cover the
/// replacement sequence and agree with [`validate_partition`] run on the
/// output circuit.
pub fn decompose_mcx(
    circuit: &Circuit,
    gate_index: usize,
    strategy: Strategy,
    opts: DecomposeOptions,
) -> Result<DecompositionResult, DecomposeError> {
    circuit.validate()?;
    let split = split_gate(circuit, gate_index)?;

    let mut out = circuit.clone();
    let (replacement, ancillas) = build_replacement(&mut out, strategy, opts, &split);
    let replacement_len = replacement.len();
    out.gates.splice(gate_index..gate_index + 1, replacement);
    out.validate()?;

    let report = validate_partition(&out)?;
    let range = gate_index..gate_index + replacement_len;
    let crossing_gates = report
        .crossing_gates
        .iter()
        .filter(|&&i| range.contains(&i))
        .count();
    let crossing_wires = report
        .wire_crossings
        .iter()
        .filter(|w| range.contains(&w.gate_index))
        .count();

    Ok(DecompositionResult {
        circuit: out,
        ancillas,
        crossing_gates,
        crossing_wires,
    })
}

/// Rewrites every boundary-crossing `ccx`/`mcx` gate with one strategy,
/// leaving crossing `cx`/`cz` gates and wire markers for the cut planner.
///
/// Each pass rewrites the first remaining crossing and rescans, since a
/// rewrite shifts later gate indices. Replacements never introduce new
/// crossing multi-controlled gates, so this terminates.
pub fn decompose_crossings(
    circuit: &Circuit,
    strategy: Strategy,
    opts: DecomposeOptions,
) -> Result<(Circuit, usize, Vec<AncillaRef>), DecomposeError> {
    let mut out = circuit.clone();
    let mut rewritten = 0;
    let mut ancillas = Vec::new();
    loop {
        let report = validate_partition(&out)?;
        let next = report.crossing_gates.iter().copied().find(|&i| {
            matches!(out.gates[i].kind, GateKind::Ccx | GateKind::Mcx(_))
        });
        match next {
            Some(index) => {
                let result = decompose_mcx(&out, index, strategy, opts)?;
                out = result.circuit;
                ancillas.extend(result.ancillas);
                rewritten += 1;
            }
            None => return Ok((out, rewritten, ancillas)),
        }
    }
}

/// CX count after expanding `ccx` to the 6-CX form and `mcx` through the
/// baseline ladder. `cx` and `cz` count as one.
pub fn expanded_cx_count(circuit: &Circuit) -> usize {
    circuit
        .gates
        .iter()
        .map(|g| match g.kind {
            GateKind::Cx | GateKind::Cz => 1,
            GateKind::Ccx => 6,
            GateKind::Mcx(1) => 1,
            GateKind::Mcx(2) => 6,
            GateKind::Mcx(m) => 6 * (2 * m - 3),
            _ => 0,
        })
        .sum()
}

/// Equivalence report for one strategy on one control split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    /// Largest amplitude difference against the expected state over all
    /// basis inputs.
    pub max_deviation: f64,
    /// Whether every ancilla ended in its documented final state.
    pub ancilla_states_ok: bool,
}

/// Simulates the strategy against a plain multi-controlled X on every basis
/// input of a fresh `m1 | m2 + target` circuit (ancillas starting `|0>`).
///
/// Clean strategies must reproduce the multi-controlled X exactly. The
/// dirty-ancilla strategies must match it on the original qubits with the
/// ancillas holding the AND of the A-side controls (already uncomputed to
/// `|0>` for a under `Dec2AdCleanA`).
pub fn verify_decomposition(
    m1: usize,
    m2: usize,
    strategy: Strategy,
) -> Result<VerificationReport, DecomposeError> {
    if m1 < 1 {
        return Err(DecomposeError::UnsupportedSplit(
            "need at least one control on the far side".into(),
        ));
    }
    let n_orig = m1 + m2 + 1;
    let mut base = Circuit::with_qubits(n_orig);
    let mut sides = vec![Side::A; m1];
    sides.extend(vec![Side::B; m2 + 1]);
    base.partition = Some(sides);

    let controls: Vec<usize> = (0..m1 + m2).collect();
    let target = n_orig - 1;
    base.gates = vec![Gate::mcx(&controls, target)];

    let split = Split {
        a_controls: (0..m1).map(QubitRef).collect(),
        b_controls: (m1..m1 + m2).map(QubitRef).collect(),
        all_controls: (0..m1 + m2).map(QubitRef).collect(),
        target: QubitRef(target),
        a_side: Side::A,
        t_side: Side::B,
    };

    let mut decomposed = base.clone();
    let (gates, ancillas) = build_replacement(&mut decomposed, strategy, DecomposeOptions::default(), &split);
    decomposed.gates = gates;
    let n_total = decomposed.num_qubits();

    // Reference circuit on the same enlarged register.
    let mut reference = decomposed.clone();
    reference.gates = base.gates.clone();

    let control_mask: u64 = (1u64 << (m1 + m2)) - 1;
    let a_mask: u64 = (1u64 << m1) - 1;

    let mut max_deviation = 0.0f64;
    let mut ancilla_states_ok = true;

    for input in 0u64..(1u64 << n_orig) {
        let got = run_exact_branches(&decomposed, input)?
            .remove(0)
            .state;

        let dirty_label = |a_bit: bool, b_bit: bool| -> u64 {
            let mut label = input;
            if input & control_mask == control_mask {
                label ^= 1 << target;
            }
            let mut anc_iter = ancillas.iter();
            if let Some(anc) = anc_iter.next() {
                if a_bit {
                    label |= 1 << anc.qubit.0;
                }
            }
            if let Some(anc) = anc_iter.next() {
                if b_bit {
                    label |= 1 << anc.qubit.0;
                }
            }
            label
        };

        let and_a = input & a_mask == a_mask;
        let expected: StateVector = match strategy {
            Strategy::Dec1 | Strategy::Dec2A | Strategy::Baseline => {
                run_exact_branches(&reference, input)?.remove(0).state
            }
            Strategy::Dec2Ad => StateVector::basis(n_total, dirty_label(and_a, and_a))?,
            Strategy::Dec2AdCleanA => StateVector::basis(n_total, dirty_label(false, and_a))?,
        };

        let mut expected_anc_bits = 0u64;
        for (k, anc) in ancillas.iter().enumerate() {
            let bit = match strategy {
                Strategy::Dec2Ad => and_a,
                Strategy::Dec2AdCleanA => k == 1 && and_a,
                _ => false,
            };
            if bit {
                expected_anc_bits |= 1 << anc.qubit.0;
            }
        }
        let anc_mask: u64 = ancillas.iter().map(|a| 1u64 << a.qubit.0).sum();
        let mut off_sector = 0.0f64;
        for (i, amp) in got.amps().iter().enumerate() {
            let dev = (amp - expected.amps()[i]).norm();
            if dev > max_deviation {
                max_deviation = dev;
            }
            if (i as u64) & anc_mask != expected_anc_bits {
                off_sector += amp.norm_sqr();
            }
        }
        if off_sector > 1e-20 {
            ancilla_states_ok = false;
        }
    }

    Ok(VerificationReport {
        max_deviation,
        ancilla_states_ok,
    })
}
