//! Dense-matrix channel oracle shared by the integration tests.
//!
//! Everything here is independent of the simulator: terms are expanded into
//! signed Kraus branches as dense 2x2 matrices, assembled with Kronecker
//! products, and the summed channel can be compared against the true gate
//! channel on arbitrary density matrices and observables.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

use qcut_core::ir::PrepState;
use qcut_core::qpd::{cx_cut_basis, wire_cut_basis, LocalOp, LocalOpGate, QpdTerm};

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(n: usize) -> Mat {
    vec![vec![c(0.0, 0.0); n]; n]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0, 0.0);
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn adjoint(a: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

pub fn add_scaled(acc: &mut Mat, m: &Mat, s: f64) {
    for (ar, mr) in acc.iter_mut().zip(m) {
        for (a, v) in ar.iter_mut().zip(mr) {
            *a += v * s;
        }
    }
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (na, nb) = (a.len(), b.len());
    let mut out = zeros(na * nb);
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn trace_product(a: &Mat, b: &Mat) -> Complex64 {
    let n = a.len();
    let mut t = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            t += a[i][k] * b[k][i];
        }
    }
    t
}

pub fn pauli(name: char) -> Mat {
    match name {
        'I' => identity(2),
        'X' => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        'Y' => vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]],
        'Z' => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
        _ => unreachable!(),
    }
}

pub fn hadamard() -> Mat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]]
}

pub fn s_gate() -> Mat {
    vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]]
}

pub fn sdg_gate() -> Mat {
    adjoint(&s_gate())
}

pub fn prep_unitary(state: PrepState) -> Mat {
    match state {
        PrepState::Zero => identity(2),
        PrepState::One => pauli('X'),
        PrepState::Plus => hadamard(),
        PrepState::Minus => mul(&hadamard(), &pauli('X')),
        PrepState::PlusI => mul(&s_gate(), &hadamard()),
        PrepState::MinusI => mul(&sdg_gate(), &hadamard()),
    }
}

pub fn projector(outcome: usize) -> Mat {
    let mut p = zeros(2);
    p[outcome][outcome] = c(1.0, 0.0);
    p
}

/// Expands a local op into signed Kraus branches.
pub fn op_branches(op: &LocalOp) -> Vec<(f64, Mat)> {
    let mut branches = vec![(1.0, identity(2))];
    for g in &op.gates {
        match g {
            LocalOpGate::MeasureZ { sign } => {
                let mut next = Vec::new();
                for (s, k) in &branches {
                    next.push((*s, mul(&projector(0), k)));
                    next.push((if *sign { -*s } else { *s }, mul(&projector(1), k)));
                }
                branches = next;
            }
            LocalOpGate::X => {
                for (_, k) in &mut branches {
                    *k = mul(&pauli('X'), k);
                }
            }
            LocalOpGate::H => {
                for (_, k) in &mut branches {
                    *k = mul(&hadamard(), k);
                }
            }
            LocalOpGate::S => {
                for (_, k) in &mut branches {
                    *k = mul(&s_gate(), k);
                }
            }
            LocalOpGate::Sdg => {
                for (_, k) in &mut branches {
                    *k = mul(&sdg_gate(), k);
                }
            }
            LocalOpGate::Rz(angle) => {
                let u = vec![
                    vec![c(1.0, 0.0), c(0.0, 0.0)],
                    vec![c(0.0, 0.0), Complex64::from_polar(1.0, *angle)],
                ];
                for (_, k) in &mut branches {
                    *k = mul(&u, k);
                }
            }
            LocalOpGate::Prep(state) => {
                let u = prep_unitary(*state);
                for (_, k) in &mut branches {
                    *k = mul(&u, k);
                }
            }
        }
    }
    branches
}

/// Applies one two-endpoint term to rho, optionally conjugating the second
/// endpoint by H (the CX form of the CZ table).
pub fn apply_gate_term(term: &QpdTerm, rho: &Mat, conjugate_b: bool) -> Mat {
    let mut out = zeros(4);
    let h = hadamard();
    for (sa, ka) in op_branches(&term.op_a) {
        for (sb, kb) in op_branches(&term.op_b) {
            let kb = if conjugate_b {
                mul(&h, &mul(&kb, &h))
            } else {
                kb.clone()
            };
            let k = kron(&ka, &kb);
            let res = mul(&k, &mul(rho, &adjoint(&k)));
            add_scaled(&mut out, &res, sa * sb);
        }
    }
    out
}

pub fn gate_channel_sum(rho: &Mat, conjugate_b: bool) -> Mat {
    let mut out = zeros(4);
    for term in &cx_cut_basis().terms {
        let res = apply_gate_term(term, rho, conjugate_b);
        add_scaled(&mut out, &res, term.coefficient);
    }
    out
}

/// The wire-cut channel sum: upstream branch weights times downstream
/// prepared states.
pub fn wire_channel_sum(rho: &Mat) -> Mat {
    let mut out = zeros(2);
    let zero_rho = {
        let mut m = zeros(2);
        m[0][0] = c(1.0, 0.0);
        m
    };
    for term in &wire_cut_basis().terms {
        let mut weight = c(0.0, 0.0);
        for (s, k) in op_branches(&term.op_a) {
            let res = mul(&k, &mul(rho, &adjoint(&k)));
            weight += (res[0][0] + res[1][1]) * s;
        }
        let mut prepared = zero_rho.clone();
        for (_, k) in op_branches(&term.op_b) {
            prepared = mul(&k, &mul(&zero_rho, &adjoint(&k)));
        }
        add_scaled(&mut out, &prepared, (weight * term.coefficient).re);
    }
    out
}

pub fn random_qubit_state(rng: &mut impl Rng) -> Mat {
    let theta: f64 = rng.gen::<f64>() * std::f64::consts::PI;
    let phi: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let a = c((theta / 2.0).cos(), 0.0);
    let b = Complex64::from_polar((theta / 2.0).sin(), phi);
    vec![
        vec![a * a.conj(), a * b.conj()],
        vec![b * a.conj(), b * b.conj()],
    ]
}

pub fn cz_matrix() -> Mat {
    let mut m = identity(4);
    m[3][3] = c(-1.0, 0.0);
    m
}

pub fn cx_matrix() -> Mat {
    let mut m = zeros(4);
    m[0][0] = c(1.0, 0.0);
    m[1][1] = c(1.0, 0.0);
    m[2][3] = c(1.0, 0.0);
    m[3][2] = c(1.0, 0.0);
    m
}

pub const PAULI_NAMES: [char; 4] = ['I', 'X', 'Y', 'Z'];
