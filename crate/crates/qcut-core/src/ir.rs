//! Circuit intermediate representation and its JSON wire format.
//!
//! A [`Circuit`] is a flat gate list over named qubits with an optional
//! two-way partition labelling every qubit `A` or `B`. Documents are
//! versioned with a top-level `"format": "qcut-1"` tag; the tag is optional
//! on input and always written on output.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag written into every serialized circuit document.
pub const FORMAT_TAG: &str = "qcut-1";

#[derive(Debug, Error)]
pub enum IrError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("partition required: circuit has no partition labels")]
    PartitionMissing,
}

/// Error from parsing or checking a Pauli observable.
#[derive(Debug, Error)]
#[error("observable error: {0}")]
pub struct ObservableError(pub String);

/// Index of a qubit within a circuit's qubit list.
///
/// Qubit 0 is the least significant bit of computational-basis labels.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct QubitRef(pub usize);

impl QubitRef {
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for QubitRef {
    fn from(i: usize) -> Self {
        QubitRef(i)
    }
}

impl fmt::Display for QubitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Partition label of a qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
        }
    }

    pub fn from_label(s: &str) -> Option<Side> {
        match s {
            "A" => Some(Side::A),
            "B" => Some(Side::B),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Single-qubit states a `prep` gate can produce from `|0>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrepState {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl PrepState {
    pub fn label(self) -> &'static str {
        match self {
            PrepState::Zero => "zero",
            PrepState::One => "one",
            PrepState::Plus => "plus",
            PrepState::Minus => "minus",
            PrepState::PlusI => "plus_i",
            PrepState::MinusI => "minus_i",
        }
    }

    pub fn from_label(s: &str) -> Option<PrepState> {
        match s {
            "zero" => Some(PrepState::Zero),
            "one" => Some(PrepState::One),
            "plus" => Some(PrepState::Plus),
            "minus" => Some(PrepState::Minus),
            "plus_i" => Some(PrepState::PlusI),
            "minus_i" => Some(PrepState::MinusI),
            _ => None,
        }
    }
}

/// Gate vocabulary.
///
/// `Rz` uses the phase convention `diag(1, exp(i*angle))`, so `rz(pi/2)`
/// equals `s` exactly and `rz(pi/4)` is the usual T gate. `CutWire` is not a
/// physical gate: it marks the point where a qubit's wire is handed to the
/// other partition side (subsequent gates on that qubit execute there).
#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    X,
    H,
    S,
    Sdg,
    Rz(f64),
    Cx,
    Cz,
    Ccx,
    Mcx(usize),
    MeasureZ,
    Prep(PrepState),
    CutWire,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::X => "x",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::Rz(_) => "rz",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Ccx => "ccx",
            GateKind::Mcx(_) => "mcx",
            GateKind::MeasureZ => "measure_z",
            GateKind::Prep(_) => "prep",
            GateKind::CutWire => "cut_wire",
        }
    }

    /// Number of qubit operands the kind requires, if fixed.
    fn arity(&self) -> Option<usize> {
        match self {
            GateKind::X
            | GateKind::H
            | GateKind::S
            | GateKind::Sdg
            | GateKind::Rz(_)
            | GateKind::MeasureZ
            | GateKind::Prep(_)
            | GateKind::CutWire => Some(1),
            GateKind::Cx | GateKind::Cz => Some(2),
            GateKind::Ccx => Some(3),
            GateKind::Mcx(m) => Some(m + 1),
        }
    }
}

/// One gate application. Controls come first and the target is last.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<QubitRef>,
    /// Classical bit receiving a `measure_z` outcome.
    pub classbit: Option<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: Vec<QubitRef>) -> Gate {
        Gate {
            kind,
            qubits,
            classbit: None,
        }
    }

    pub fn x(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::X, vec![q.into()])
    }

    pub fn h(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::H, vec![q.into()])
    }

    pub fn s(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::S, vec![q.into()])
    }

    pub fn sdg(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::Sdg, vec![q.into()])
    }

    pub fn rz(q: impl Into<QubitRef>, angle: f64) -> Gate {
        Gate::new(GateKind::Rz(angle), vec![q.into()])
    }

    pub fn cx(c: impl Into<QubitRef>, t: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::Cx, vec![c.into(), t.into()])
    }

    pub fn cz(a: impl Into<QubitRef>, b: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::Cz, vec![a.into(), b.into()])
    }

    pub fn ccx(c0: impl Into<QubitRef>, c1: impl Into<QubitRef>, t: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::Ccx, vec![c0.into(), c1.into(), t.into()])
    }

    pub fn mcx(controls: &[usize], target: usize) -> Gate {
        let mut qubits: Vec<QubitRef> = controls.iter().map(|&c| QubitRef(c)).collect();
        qubits.push(QubitRef(target));
        Gate::new(GateKind::Mcx(controls.len()), qubits)
    }

    pub fn measure_z(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::MeasureZ, vec![q.into()])
    }

    pub fn measure_z_into(q: impl Into<QubitRef>, cbit: usize) -> Gate {
        Gate {
            classbit: Some(cbit),
            ..Gate::new(GateKind::MeasureZ, vec![q.into()])
        }
    }

    pub fn prep(q: impl Into<QubitRef>, state: PrepState) -> Gate {
        Gate::new(GateKind::Prep(state), vec![q.into()])
    }

    pub fn cut_wire(q: impl Into<QubitRef>) -> Gate {
        Gate::new(GateKind::CutWire, vec![q.into()])
    }

    /// Target qubit for controlled kinds (the last operand).
    pub fn target(&self) -> QubitRef {
        *self.qubits.last().expect("gate has at least one qubit")
    }

    /// Control qubits for controlled kinds (all but the last operand).
    pub fn controls(&self) -> &[QubitRef] {
        &self.qubits[..self.qubits.len() - 1]
    }
}

/// A flat gate list over named qubits, with an optional A/B partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub qubits: Vec<String>,
    pub gates: Vec<Gate>,
    /// Partition labels indexed by qubit; when present it covers every qubit.
    pub partition: Option<Vec<Side>>,
}

impl Circuit {
    pub fn new(qubits: Vec<String>) -> Circuit {
        Circuit {
            qubits,
            gates: Vec::new(),
            partition: None,
        }
    }

    /// Circuit with qubits named `q0..q{n-1}`.
    pub fn with_qubits(n: usize) -> Circuit {
        Circuit::new((0..n).map(|i| format!("q{i}")).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn side_of(&self, q: QubitRef) -> Option<Side> {
        self.partition.as_ref().map(|p| p[q.0])
    }

    /// Appends a fresh qubit and returns its index.
    pub fn add_qubit(&mut self, name: String, side: Option<Side>) -> QubitRef {
        self.qubits.push(name);
        if let Some(p) = self.partition.as_mut() {
            p.push(side.unwrap_or(Side::A));
        }
        QubitRef(self.qubits.len() - 1)
    }

    /// Structural checks: unique names, operand arity and ranges, payload
    /// consistency, full partition coverage.
    pub fn validate(&self) -> Result<(), IrError> {
        let n = self.qubits.len();
        let mut seen = HashSet::new();
        for name in &self.qubits {
            if name.is_empty() {
                return Err(IrError::Validation("empty qubit name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(IrError::Validation(format!("duplicate qubit name {name:?}")));
            }
        }
        if let Some(p) = &self.partition {
            if p.len() != n {
                return Err(IrError::Validation(format!(
                    "partition covers {} of {} qubits",
                    p.len(),
                    n
                )));
            }
        }
        for (i, gate) in self.gates.iter().enumerate() {
            if let Some(arity) = gate.kind.arity() {
                if gate.qubits.len() != arity {
                    return Err(IrError::Validation(format!(
                        "gate {i} ({}) expects {arity} qubits, got {}",
                        gate.kind.name(),
                        gate.qubits.len()
                    )));
                }
            }
            let mut used = HashSet::new();
            for q in &gate.qubits {
                if q.0 >= n {
                    return Err(IrError::Validation(format!(
                        "gate {i} ({}) references qubit {} of {n}",
                        gate.kind.name(),
                        q.0
                    )));
                }
                if !used.insert(q.0) {
                    return Err(IrError::Validation(format!(
                        "gate {i} ({}) repeats qubit {}",
                        gate.kind.name(),
                        q.0
    )));
                }
            }
            match gate.kind {
                GateKind::Rz(angle) if !angle.is_finite() => {
                    return Err(IrError::Validation(format!("gate {i} has non-finite angle")));
                }
                GateKind::Mcx(m) if m < 1 => {
                    return Err(IrError::Validation(format!("gate {i} (mcx) has no controls")));
                }
                _ => {}
            }
            if gate.classbit.is_some() && gate.kind != GateKind::MeasureZ {
                return Err(IrError::Validation(format!(
                    "gate {i} ({}) carries a classbit",
                    gate.kind.name()
                )));
            }
        }
        Ok(())
    }
}

// --- JSON wire format ---

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    qubits: Vec<String>,
    gates: Vec<GateDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<BTreeMap<String, String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    gate: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cbit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<String>,
}

/// Parses a `qcut-1` JSON document into a validated [`Circuit`].
pub fn parse_circuit(text: &str) -> Result<Circuit, IrError> {
    let doc: CircuitDoc =
        serde_json::from_str(text).map_err(|e| IrError::Schema(e.to_string()))?;
    if let Some(tag) = &doc.format {
        if tag != FORMAT_TAG {
            return Err(IrError::Schema(format!(
                "unsupported format {tag:?}, expected {FORMAT_TAG:?}"
            )));
        }
    }

    let mut gates = Vec::with_capacity(doc.gates.len());
    for (i, g) in doc.gates.iter().enumerate() {
        gates.push(gate_from_doc(g, i)?);
    }

    let partition = match &doc.partition {
        None => None,
        Some(map) => {
            let mut sides = Vec::with_capacity(doc.qubits.len());
            for name in &doc.qubits {
                let label = map.get(name).ok_or_else(|| {
                    IrError::Validation(format!("partition misses qubit {name:?}"))
                })?;
                let side = Side::from_label(label).ok_or_else(|| {
                    IrError::Validation(format!("partition label {label:?} is not A or B"))
                })?;
                sides.push(side);
            }
            for key in map.keys() {
                if !doc.qubits.iter().any(|n| n == key) {
                    return Err(IrError::Validation(format!(
                        "partition names unknown qubit {key:?}"
                    )));
                }
            }
            Some(sides)
        }
    };

    let circuit = Circuit {
        qubits: doc.qubits,
        gates,
        partition,
    };
    circuit.validate()?;
    Ok(circuit)
}

fn gate_from_doc(doc: &GateDoc, index: usize) -> Result<Gate, IrError> {
    let kind = match doc.gate.as_str() {
        "x" => GateKind::X,
        "h" => GateKind::H,
        "s" => GateKind::S,
        "sdg" => GateKind::Sdg,
        "rz" => {
            let angle = doc.angle.ok_or_else(|| {
                IrError::Validation(format!("gate {index} (rz) misses \"angle\""))
            })?;
            GateKind::Rz(angle)
        }
        "cx" => GateKind::Cx,
        "cz" => GateKind::Cz,
        "ccx" => GateKind::Ccx,
        "mcx" => {
            if doc.qubits.len() < 2 {
                return Err(IrError::Validation(format!(
                    "gate {index} (mcx) needs at least one control and a target"
                )));
            }
            GateKind::Mcx(doc.qubits.len() - 1)
        }
        "measure_z" => GateKind::MeasureZ,
        "prep" => {
            let label = doc.state.as_deref().ok_or_else(|| {
                IrError::Validation(format!("gate {index} (prep) misses \"state\""))
            })?;
            let state = PrepState::from_label(label).ok_or_else(|| {
                IrError::Validation(format!("gate {index} (prep) has unknown state {label:?}"))
            })?;
            GateKind::Prep(state)
        }
        "cut_wire" => GateKind::CutWire,
        other => return Err(IrError::Schema(format!("unknown gate kind {other:?}"))),
    };

    if doc.angle.is_some() && !matches!(kind, GateKind::Rz(_)) {
        return Err(IrError::Validation(format!(
            "gate {index} ({}) carries \"angle\"",
            doc.gate
        )));
    }
    if doc.state.is_some() && !matches!(kind, GateKind::Prep(_)) {
        return Err(IrError::Validation(format!(
            "gate {index} ({}) carries \"state\"",
            doc.gate
        )));
    }
    if doc.cbit.is_some() && kind != GateKind::MeasureZ {
        return Err(IrError::Validation(format!(
            "gate {index} ({}) carries \"cbit\"",
            doc.gate
        )));
    }

    Ok(Gate {
        kind,
        qubits: doc.qubits.iter().map(|&q| QubitRef(q)).collect(),
        classbit: doc.cbit,
    })
}

fn gate_to_doc(gate: &Gate) -> GateDoc {
    GateDoc {
        gate: gate.kind.name().to_string(),
        qubits: gate.qubits.iter().map(|q| q.0).collect(),
        angle: match gate.kind {
            GateKind::Rz(a) => Some(a),
            _ => None,
        },
        cbit: gate.classbit,
        state: match gate.kind {
            GateKind::Prep(s) => Some(s.label().to_string()),
            _ => None,
        },
    }
}

/// Serializes a circuit as a `qcut-1` JSON document.
pub fn serialize_circuit(circuit: &Circuit) -> String {
    let doc = CircuitDoc {
        format: Some(FORMAT_TAG.to_string()),
        qubits: circuit.qubits.clone(),
        gates: circuit.gates.iter().map(gate_to_doc).collect(),
        partition: circuit.partition.as_ref().map(|sides| {
            circuit
                .qubits
                .iter()
                .zip(sides)
                .map(|(name, side)| (name.clone(), side.label().to_string()))
                .collect()
        }),
    };
    serde_json::to_string_pretty(&doc).expect("circuit serialization cannot fail")
}

// --- Partition analysis ---

/// A `cut_wire` marker seen while walking the gate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireCrossing {
    /// Index of the marker in the gate list.
    pub gate_index: usize,
    pub qubit: QubitRef,
    pub from: Side,
    pub to: Side,
}

/// Boundary crossings of a partitioned circuit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingReport {
    /// Indices of gates whose operands sit on both sides.
    pub crossing_gates: Vec<usize>,
    /// Wire hand-over points, one per `cut_wire` marker.
    pub wire_crossings: Vec<WireCrossing>,
}

impl CrossingReport {
    pub fn is_fully_local(&self) -> bool {
        self.crossing_gates.is_empty() && self.wire_crossings.is_empty()
    }
}

/// Reports every partition-boundary crossing.
///
/// A qubit's effective side starts at its partition label and toggles at
/// each `cut_wire` marker on that qubit. A gate crosses when its operands'
/// effective sides differ at the moment it executes.
pub fn validate_partition(circuit: &Circuit) -> Result<CrossingReport, IrError> {
    circuit.validate()?;
    let partition = circuit.partition.as_ref().ok_or(IrError::PartitionMissing)?;

    let mut toggles = vec![false; circuit.num_qubits()];
    let side_at = |toggles: &[bool], q: QubitRef, partition: &[Side]| {
        if toggles[q.0] {
            partition[q.0].other()
        } else {
            partition[q.0]
        }
    };

    let mut report = CrossingReport::default();
    for (i, gate) in circuit.gates.iter().enumerate() {
        if gate.kind == GateKind::CutWire {
            let q = gate.qubits[0];
            let from = side_at(&toggles, q, partition);
            toggles[q.0] = !toggles[q.0];
            report.wire_crossings.push(WireCrossing {
                gate_index: i,
                qubit: q,
                from,
                to: from.other(),
            });
            continue;
        }
        let mut sides = gate
            .qubits
            .iter()
            .map(|&q| side_at(&toggles, q, partition));
        let first = sides.next().expect("gates have at least one qubit");
        if sides.any(|s| s != first) {
            report.crossing_gates.push(i);
        }
    }
    Ok(report)
}

// --- Pauli observables ---

/// Single-qubit Pauli operator (identity factors are normalized away).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, e.g. `Z0*X2`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PauliObservable {
    factors: BTreeMap<QubitRef, Pauli>,
}

impl PauliObservable {
    pub fn new() -> PauliObservable {
        PauliObservable::default()
    }

    pub fn with_factor(mut self, q: impl Into<QubitRef>, p: Pauli) -> PauliObservable {
        self.factors.insert(q.into(), p);
        self
    }

    pub fn factors(&self) -> impl Iterator<Item = (QubitRef, Pauli)> + '_ {
        self.factors.iter().map(|(&q, &p)| (q, p))
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn max_qubit(&self) -> Option<QubitRef> {
        self.factors.keys().next_back().copied()
    }

    /// Parses `"Z3"`, `"Z0*Z2"`, `"X0*Y2*Z5"`. `I<k>` factors are accepted
    /// and dropped. Each qubit may appear at most once.
    pub fn parse(text: &str) -> Result<PauliObservable, ObservableError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(ObservableError("empty observable".into()));
        }
        let mut obs = PauliObservable::new();
        let mut seen = HashSet::new();
        for part in trimmed.split('*') {
            let part = part.trim();
            let mut chars = part.chars();
            let letter = chars
                .next()
                .ok_or_else(|| ObservableError(format!("empty factor in {text:?}")))?;
            if matches!(letter, 'I' | 'i') && chars.as_str().is_empty() {
                continue;
            }
            let index: usize = chars.as_str().parse().map_err(|_| {
                ObservableError(format!("factor {part:?} has no qubit index"))
            })?;
            if !seen.insert(index) {
                return Err(ObservableError(format!("qubit {index} appears twice")));
            }
            let pauli = match letter {
                'I' | 'i' => continue,
                'X' | 'x' => Pauli::X,
                'Y' | 'y' => Pauli::Y,
                'Z' | 'z' => Pauli::Z,
                _ => {
                    return Err(ObservableError(format!(
                        "factor {part:?} is not one of I, X, Y, Z"
                    )))
                }
            };
            obs.factors.insert(QubitRef(index), pauli);
        }
        Ok(obs)
    }

    /// Checks that every factor references a qubit of `circuit`.
    pub fn check_against(&self, circuit: &Circuit) -> Result<(), ObservableError> {
        if let Some(q) = self.max_qubit() {
            if q.0 >= circuit.num_qubits() {
                return Err(ObservableError(format!(
                    "observable references qubit {} of {}",
                    q.0,
                    circuit.num_qubits()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for PauliObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        let mut first = true;
        for (q, p) in &self.factors {
            if !first {
                f.write_str("*")?;
            }
            write!(f, "{}{}", p.letter(), q)?;
            first = false;
        }
        Ok(())
    }
}
