//! Dense statevector execution of circuits.
//!
//! Qubit 0 is the least significant bit of basis labels. Two execution
//! modes exist: [`run_exact_branches`] enumerates every measurement outcome
//! as a weighted branch (zero-probability branches included with weight 0),
//! and [`run_shots`] samples outcomes. Shot sampling is deterministic in
//! `(circuit, initial, shots, seed)`: shot `k` uses a ChaCha8 counter rng
//! seeded with the master seed on stream `k`, so results do not depend on
//! scheduling.
//!
//! `cut_wire` markers are bookkeeping, not physics; execution skips them.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ir::{Circuit, Gate, GateKind, ObservableError, Pauli, PauliObservable, PrepState};

/// Default ceiling on simulated qubits; override with `QCUT_MAX_QUBITS`.
pub const DEFAULT_QUBIT_LIMIT: usize = 24;

/// Largest number of `measure_z` gates [`run_exact_branches`] will expand.
pub const MAX_EXACT_MEASURES: usize = 12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("size limit exceeded: {needed} qubits requested, limit {limit}")]
    SizeLimit { needed: usize, limit: usize },
    #[error("too many measurements for exact branching: {count}, limit {limit}")]
    TooManyBranches { count: usize, limit: usize },
    #[error("basis label {label} out of range for {qubits} qubits")]
    BadBasisLabel { label: u64, qubits: usize },
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

/// Current qubit ceiling, from `QCUT_MAX_QUBITS` when set and parseable.
pub fn qubit_limit() -> usize {
    std::env::var("QCUT_MAX_QUBITS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_QUBIT_LIMIT)
}

/// Dense amplitude vector over `2^n` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros state `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<StateVector, SimError> {
        StateVector::basis(num_qubits, 0)
    }

    /// Basis state `|label>` (qubit 0 is the least significant bit).
    pub fn basis(num_qubits: usize, label: u64) -> Result<StateVector, SimError> {
        let limit = qubit_limit();
        if num_qubits > limit {
            return Err(SimError::SizeLimit {
                needed: num_qubits,
                limit,
            });
        }
        if num_qubits < 64 && label >= (1u64 << num_qubits) {
            return Err(SimError::BadBasisLabel {
                label,
                qubits: num_qubits,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amps[label as usize] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply(&mut self, gate: &Gate) {
        match gate.kind {
            GateKind::X => self.kernel_x(gate.qubits[0].0),
            GateKind::H => self.kernel_h(gate.qubits[0].0),
            GateKind::S => self.kernel_phase(gate.qubits[0].0, Complex64::new(0.0, 1.0)),
            GateKind::Sdg => self.kernel_phase(gate.qubits[0].0, Complex64::new(0.0, -1.0)),
            GateKind::Rz(angle) => {
                self.kernel_phase(gate.qubits[0].0, Complex64::from_polar(1.0, angle))
            }
            GateKind::Cx => {
                let m = 1usize << gate.qubits[0].0;
                self.kernel_mcx(m, gate.qubits[1].0);
            }
            GateKind::Cz => self.kernel_cz(gate.qubits[0].0, gate.qubits[1].0),
            GateKind::Ccx | GateKind::Mcx(_) => {
                let mut mask = 0usize;
                for c in gate.controls() {
                    mask |= 1 << c.0;
                }
                self.kernel_mcx(mask, gate.target().0);
            }
            GateKind::Prep(state) => self.kernel_prep(gate.qubits[0].0, state),
            GateKind::MeasureZ => unreachable!("measurements are handled by the runner"),
            GateKind::CutWire => {}
        }
        #[cfg(debug_assertions)]
        debug_assert!((self.norm_sqr() - 1.0).abs() < 1e-9 || self.norm_sqr() < 1e-9);
    }

    fn kernel_x(&mut self, q: usize) {
        let m = 1usize << q;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                self.amps.swap(i, i | m);
            }
        }
    }

    fn kernel_h(&mut self, q: usize) {
        let m = 1usize << q;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let a = self.amps[i];
                let b = self.amps[i | m];
                self.amps[i] = (a + b) * inv_sqrt2;
                self.amps[i | m] = (a - b) * inv_sqrt2;
            }
        }
    }

    fn kernel_phase(&mut self, q: usize, factor: Complex64) {
        let m = 1usize << q;
        for i in 0..self.amps.len() {
            if i & m != 0 {
                self.amps[i] *= factor;
            }
        }
    }

    fn kernel_cz(&mut self, a: usize, b: usize) {
        let m = (1usize << a) | (1usize << b);
        for i in 0..self.amps.len() {
            if i & m == m {
                self.amps[i] = -self.amps[i];
            }
        }
    }

    /// X on `target` wherever every bit of `control_mask` is set.
    fn kernel_mcx(&mut self, control_mask: usize, target: usize) {
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & control_mask == control_mask && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    /// Basis-change unitary taking `|0>` to the requested state. On a qubit
    /// that is not `|0>` this is still that unitary, not a reset.
    fn kernel_prep(&mut self, q: usize, state: PrepState) {
        match state {
            PrepState::Zero => {}
            PrepState::One => self.kernel_x(q),
            PrepState::Plus => self.kernel_h(q),
            PrepState::Minus => {
                self.kernel_x(q);
                self.kernel_h(q);
            }
            PrepState::PlusI => {
                self.kernel_h(q);
                self.kernel_phase(q, Complex64::new(0.0, 1.0));
            }
            PrepState::MinusI => {
                self.kernel_h(q);
                self.kernel_phase(q, Complex64::new(0.0, -1.0));
            }
        }
    }

    fn prob_one(&self, q: usize) -> f64 {
        let m = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects onto the given outcome and renormalizes. A zero-probability
    /// projection leaves the zero vector.
    /// Collapses qubit `q` to `outcome`. `prob` is the caller's branch
    /// probability and only gates the zero-branch shortcut; the surviving
    /// amplitudes are rescaled by their own norm, which stays accurate
    /// even when `prob` came from a cancellation-prone `1 - p`.
    fn project(&mut self, q: usize, outcome: bool, prob: f64) {
        let m = 1usize << q;
        let mut kept = 0.0f64;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if ((i & m) != 0) != outcome {
                *amp = Complex64::new(0.0, 0.0);
            } else {
                kept += amp.norm_sqr();
            }
        }
        if prob <= 0.0 || kept <= f64::MIN_POSITIVE {
            for amp in &mut self.amps {
                *amp = Complex64::new(0.0, 0.0);
            }
            return;
        }
        let scale = 1.0 / kept.sqrt();
        for amp in &mut self.amps {
            *amp *= scale;
        }
    }

    fn apply_pauli(&mut self, q: usize, p: Pauli) {
        let m = 1usize << q;
        match p {
            Pauli::X => self.kernel_x(q),
            Pauli::Z => {
                for i in 0..self.amps.len() {
                    if i & m != 0 {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Pauli::Y => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let a = self.amps[i];
                        let b = self.amps[i | m];
                        self.amps[i] = -i_unit * b;
                        self.amps[i | m] = i_unit * a;
                    }
                }
            }
        }
    }
}

/// Starting point of an execution.
#[derive(Debug, Clone)]
pub enum InitialState {
    Basis(u64),
    Vector(StateVector),
}

impl From<u64> for InitialState {
    fn from(label: u64) -> Self {
        InitialState::Basis(label)
    }
}

impl From<StateVector> for InitialState {
    fn from(v: StateVector) -> Self {
        InitialState::Vector(v)
    }
}

impl InitialState {
    fn realize(&self, num_qubits: usize) -> Result<StateVector, SimError> {
        match self {
            InitialState::Basis(label) => StateVector::basis(num_qubits, *label),
            InitialState::Vector(v) => {
                if v.num_qubits() != num_qubits {
                    return Err(SimError::SizeLimit {
                        needed: num_qubits,
                        limit: v.num_qubits(),
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

/// One measurement-outcome branch of an exact execution.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Born probability of this branch.
    pub weight: f64,
    /// Classbit values written by `measure_z` gates.
    pub classbits: Vec<bool>,
    /// Renormalized post-measurement state (zero vector when weight is 0).
    pub state: StateVector,
}

/// One sampled execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOutcome {
    /// Classbit values written by `measure_z` gates.
    pub classbits: Vec<bool>,
    /// Full computational-basis sample of the final state.
    pub bitstring: u64,
}

fn write_classbit(classbits: &mut Vec<bool>, index: usize, value: bool) {
    if classbits.len() <= index {
        classbits.resize(index + 1, false);
    }
    classbits[index] = value;
}

/// Runs the circuit, forking at every `measure_z` gate.
///
/// Branches are ordered by outcome history, outcome 0 before outcome 1 at
/// each fork in execution order. A `measure_z` without an explicit `cbit`
/// writes to the next sequential auto index.
pub fn run_exact_branches(
    circuit: &Circuit,
    initial: impl Into<InitialState>,
) -> Result<Vec<Branch>, SimError> {
    let measures = circuit
        .gates
        .iter()
        .filter(|g| g.kind == GateKind::MeasureZ)
        .count();
    if measures > MAX_EXACT_MEASURES {
        return Err(SimError::TooManyBranches {
            count: measures,
            limit: MAX_EXACT_MEASURES,
        });
    }

    let initial = initial.into().realize(circuit.num_qubits())?;
    let mut branches = vec![Branch {
        weight: 1.0,
        classbits: Vec::new(),
        state: initial,
    }];
    let mut auto_cbit = 0usize;

    for gate in &circuit.gates {
        if gate.kind == GateKind::MeasureZ {
            let cbit = gate.classbit.unwrap_or_else(|| {
                let c = auto_cbit;
                auto_cbit += 1;
                c
            });
            let q = gate.qubits[0].0;
            let mut next = Vec::with_capacity(branches.len() * 2);
            for branch in branches {
                let p1 = branch.state.prob_one(q);
                for outcome in [false, true] {
                    let p = if outcome { p1 } else { (1.0 - p1).max(0.0) };
                    let mut state = branch.state.clone();
                    state.project(q, outcome, p);
                    let mut classbits = branch.classbits.clone();
                    write_classbit(&mut classbits, cbit, outcome);
                    next.push(Branch {
                        weight: branch.weight * p,
                        classbits,
                        state,
                    });
                }
            }
            branches = next;
        } else {
            for branch in &mut branches {
                branch.state.apply(gate);
            }
        }
    }
    Ok(branches)
}

/// Runs one shot, sampling measurement outcomes and a final basis label
/// from the supplied rng.
pub fn run_single_shot(
    circuit: &Circuit,
    initial: impl Into<InitialState>,
    rng: &mut impl Rng,
) -> Result<ExecutionOutcome, SimError> {
    let mut state = initial.into().realize(circuit.num_qubits())?;
    let mut classbits = Vec::new();
    let mut auto_cbit = 0usize;

    for gate in &circuit.gates {
        if gate.kind == GateKind::MeasureZ {
            let cbit = gate.classbit.unwrap_or_else(|| {
                let c = auto_cbit;
                auto_cbit += 1;
                c
            });
            let q = gate.qubits[0].0;
            let p1 = state.prob_one(q);
            let outcome = rng.gen::<f64>() < p1;
            state.project(q, outcome, if outcome { p1 } else { 1.0 - p1 });
            write_classbit(&mut classbits, cbit, outcome);
        } else {
            state.apply(gate);
        }
    }

    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut bitstring = state.amps.len() as u64 - 1;
    for (i, amp) in state.amps.iter().enumerate() {
        acc += amp.norm_sqr();
        if u < acc {
            bitstring = i as u64;
            break;
        }
    }
    Ok(ExecutionOutcome {
        classbits,
        bitstring,
    })
}

/// Runs `shots` independent samples. Shot `k` draws from a ChaCha8 rng
/// seeded with `seed` on stream `k`.
pub fn run_shots(
    circuit: &Circuit,
    initial: impl Into<InitialState>,
    shots: usize,
    seed: u64,
) -> Result<Vec<ExecutionOutcome>, SimError> {
    let initial = initial.into();
    let mut outcomes = Vec::with_capacity(shots);
    for k in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        outcomes.push(run_single_shot(circuit, initial.clone(), &mut rng)?);
    }
    Ok(outcomes)
}

/// Expectation value `<psi|O|psi>` of a Pauli string.
pub fn expectation(state: &StateVector, obs: &PauliObservable) -> Result<f64, SimError> {
    if let Some(q) = obs.max_qubit() {
        if q.0 >= state.num_qubits() {
            return Err(ObservableError(format!(
                "observable references qubit {} of {}",
                q.0,
                state.num_qubits()
            ))
            .into());
        }
    }
    let mut transformed = state.clone();
    for (q, p) in obs.factors() {
        transformed.apply_pauli(q.0, p);
    }
    let value: Complex64 = state
        .amps
        .iter()
        .zip(&transformed.amps)
        .map(|(a, b)| a.conj() * b)
        .sum();
    debug_assert!(value.im.abs() < 1e-12, "imaginary residue {}", value.im);
    Ok(value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Circuit, Gate, PauliObservable};

    fn obs(s: &str) -> PauliObservable {
        PauliObservable::parse(s).unwrap()
    }

    #[test]
    fn hadamard_measure_splits_evenly() {
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0), Gate::measure_z(0)];
        let branches = run_exact_branches(&c, 0).unwrap();
        assert_eq!(branches.len(), 2);
        assert!((branches[0].weight - 0.5).abs() < 1e-12);
        assert!((branches[1].weight - 0.5).abs() < 1e-12);
        assert_eq!(branches[0].classbits, vec![false]);
        assert_eq!(branches[1].classbits, vec![true]);
    }

    #[test]
    fn measuring_one_keeps_single_nonzero_branch() {
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::x(0), Gate::measure_z(0)];
        let branches = run_exact_branches(&c, 0).unwrap();
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].weight, 0.0);
        assert!((branches[1].weight - 1.0).abs() < 1e-12);
        assert_eq!(branches[1].classbits, vec![true]);
    }

    #[test]
    fn shots_on_deterministic_circuit_always_agree() {
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::x(0), Gate::measure_z(0)];
        for outcome in run_shots(&c, 0, 50, 7).unwrap() {
            assert_eq!(outcome.classbits, vec![true]);
            assert_eq!(outcome.bitstring, 1);
        }
    }

    #[test]
    fn same_seed_reproduces_samples() {
        let mut c = Circuit::with_qubits(2);
        c.gates = vec![Gate::h(0), Gate::cx(0, 1), Gate::measure_z(0)];
        let a = run_shots(&c, 0, 200, 42).unwrap();
        let b = run_shots(&c, 0, 200, 42).unwrap();
        assert_eq!(a, b);
        let c2 = run_shots(&c, 0, 200, 43).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn hadamard_shot_frequency_near_half() {
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0), Gate::measure_z(0)];
        let shots = 100_000;
        let ones = run_shots(&c, 0, shots, 11)
            .unwrap()
            .iter()
            .filter(|o| o.classbits[0])
            .count();
        let freq = ones as f64 / shots as f64;
        assert!((freq - 0.5).abs() <= 0.01, "freq {freq}");
    }

    #[test]
    fn expectation_reference_values() {
        let zero = StateVector::zero(1).unwrap();
        assert!((expectation(&zero, &obs("Z0")).unwrap() - 1.0).abs() < 1e-12);

        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0)];
        let plus = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&plus, &obs("X0")).unwrap() - 1.0).abs() < 1e-12);
        assert!(expectation(&plus, &obs("Z0")).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mcx_is_the_expected_permutation() {
        let mut c = Circuit::with_qubits(4);
        c.gates = vec![Gate::mcx(&[0, 1, 2], 3)];
        for label in 0u64..16 {
            let branches = run_exact_branches(&c, label).unwrap();
            let state = &branches[0].state;
            let expected = if label & 0b0111 == 0b0111 {
                label ^ 0b1000
            } else {
                label
            };
            assert!((state.amps()[expected as usize].re - 1.0).abs() < 1e-12, "label {label}");
        }
    }

    #[test]
    fn prep_states_have_expected_expectations() {
        let cases = [
            (PrepState::Zero, "Z0", 1.0),
            (PrepState::One, "Z0", -1.0),
            (PrepState::Plus, "X0", 1.0),
            (PrepState::Minus, "X0", -1.0),
            (PrepState::PlusI, "Y0", 1.0),
            (PrepState::MinusI, "Y0", -1.0),
        ];
        for (state, o, want) in cases {
            let mut c = Circuit::with_qubits(1);
            c.gates = vec![Gate::prep(0, state)];
            let out = run_exact_branches(&c, 0).unwrap().remove(0).state;
            let got = expectation(&out, &obs(o)).unwrap();
            assert!((got - want).abs() < 1e-12, "{state:?}: {got}");
        }
    }

    #[test]
    fn rz_uses_phase_convention() {
        // rz(pi) acts as Z: flips |+> to |->.
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0), Gate::rz(0, std::f64::consts::PI)];
        let state = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&state, &obs("X0")).unwrap() + 1.0).abs() < 1e-12);

        // rz(pi/2) acts as S: takes |+> to |+i>.
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0), Gate::rz(0, std::f64::consts::FRAC_PI_2)];
        let state = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&state, &obs("Y0")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_y_expectation_on_sdg_h_state() {
        // sdg . h |0> = |-i> up to phase, so <Y> = -1.
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::h(0), Gate::sdg(0)];
        let state = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&state, &obs("Y0")).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn qubit_limit_is_enforced_before_allocation() {
        let err = StateVector::zero(DEFAULT_QUBIT_LIMIT + 1).unwrap_err();
        assert!(matches!(err, SimError::SizeLimit { .. }));
    }

    #[test]
    fn too_many_measures_is_rejected() {
        let mut c = Circuit::with_qubits(1);
        c.gates = (0..MAX_EXACT_MEASURES + 1)
            .map(|_| Gate::measure_z(0))
            .collect();
        assert!(matches!(
            run_exact_branches(&c, 0),
            Err(SimError::TooManyBranches { .. })
        ));
    }

    #[test]
    fn cut_wire_is_skipped_by_execution() {
        let mut c = Circuit::with_qubits(1);
        c.gates = vec![Gate::x(0), Gate::cut_wire(0)];
        let state = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&state, &obs("Z0")).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_register_executes() {
        let c = Circuit::new(Vec::new());
        let branches = run_exact_branches(&c, 0).unwrap();
        assert_eq!(branches.len(), 1);
        let value = expectation(&branches[0].state, &PauliObservable::new()).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_classbits_take_precedence() {
        let mut c = Circuit::with_qubits(2);
        c.gates = vec![
            Gate::x(0),
            Gate::measure_z_into(0, 1),
            Gate::measure_z_into(1, 0),
        ];
        let branches = run_exact_branches(&c, 0).unwrap();
        let live: Vec<_> = branches.iter().filter(|b| b.weight > 0.0).collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].classbits, vec![false, true]);
    }

    #[test]
    fn ghz_pauli_expectations_match_theory() {
        let mut c = Circuit::with_qubits(3);
        c.gates = vec![Gate::h(0), Gate::cx(0, 1), Gate::cx(1, 2)];
        let state = run_exact_branches(&c, 0).unwrap().remove(0).state;
        assert!((expectation(&state, &obs("X0*X1*X2")).unwrap() - 1.0).abs() < 1e-12);
        assert!((expectation(&state, &obs("Z0*Z1")).unwrap() - 1.0).abs() < 1e-12);
        assert!(expectation(&state, &obs("Z0")).unwrap().abs() < 1e-12);
        assert!((expectation(&state, &obs("Y0*Y1*X2")).unwrap() + 1.0).abs() < 1e-12);
    }
}
