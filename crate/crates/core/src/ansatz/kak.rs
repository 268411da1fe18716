//! Compilation of one- and two-qubit unitaries into `R_x/R_y/R_z` rotations
//! and the native `U_zz = exp(iπ/4 Z⊗Z)`.
//!
//! Two-qubit gates go through the magic-basis Cartan decomposition
//! `U ∝ (A₁⊗A₂) exp(i(a XX + b YY + c ZZ)) (B₁⊗B₂)`; the interaction part
//! needs 0, 1, 2 or 3 entanglers depending on how many of `(a, b, c)` vanish
//! modulo `π/2`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use super::gates::{self, Axis};
use super::{AnsatzError, Result, UnitaryGate};
use crate::linalg::{self, c, CMatrix, Pauli, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum NativeOp {
    Rotation { axis: Axis, angle: f64, wire: usize },
    Uzz { wires: [usize; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeCircuitFragment {
    pub n_qubits: usize,
    pub ops: Vec<NativeOp>,
}

impl NativeCircuitFragment {
    pub fn matrix(&self) -> CMatrix {
        let dim = 1 << self.n_qubits;
        self.ops.iter().fold(CMatrix::identity(dim, dim), |acc, op| {
            let (gate, wires): (CMatrix, Vec<usize>) = match *op {
                NativeOp::Rotation { axis, angle, wire } => (gates::rotation(axis, angle), vec![wire]),
                NativeOp::Uzz { wires } => (gates::uzz(), wires.to_vec()),
            };
            linalg::embed(&gate, &wires, self.n_qubits) * acc
        })
    }

    pub fn uzz_count(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, NativeOp::Uzz { .. })).count()
    }

    pub fn rotation_count(&self) -> usize {
        self.ops.len() - self.uzz_count()
    }
}

const ANGLE_TOL: f64 = 1e-12;
const COEFF_TOL: f64 = 1e-9;

pub fn decompose_to_native(u: &UnitaryGate) -> Result<NativeCircuitFragment> {
    match u.n_qubits() {
        1 => {
            let mut ops = Vec::new();
            push_euler(&mut ops, u.matrix(), 0);
            Ok(NativeCircuitFragment { n_qubits: 1, ops })
        }
        2 => Ok(NativeCircuitFragment { n_qubits: 2, ops: two_qubit(u.matrix()) }),
        n => Err(AnsatzError::TooManyQubits(n)),
    }
}

/// `(a, b, c)` with `U = e^{iφ} R_z(a) R_y(b) R_z(c)`.
pub(crate) fn zyz_angles(u: &CMatrix) -> (f64, f64, f64) {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let v = u / det.sqrt();
    let b = 2.0 * v[(1, 0)].norm().atan2(v[(0, 0)].norm());
    let sum = if v[(1, 1)].norm() > 1e-12 { 2.0 * v[(1, 1)].arg() } else { 0.0 };
    let diff = if v[(1, 0)].norm() > 1e-12 { 2.0 * v[(1, 0)].arg() } else { 0.0 };
    ((sum + diff) / 2.0, b, (sum - diff) / 2.0)
}

fn wrap(angle: f64) -> f64 {
    let t = angle.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn push_euler(ops: &mut Vec<NativeOp>, u: &CMatrix, wire: usize) {
    let (a, b, cc) = zyz_angles(u);
    for (axis, angle) in [(Axis::Z, cc), (Axis::Y, b), (Axis::Z, a)] {
        let angle = wrap(angle);
        if angle.abs() > ANGLE_TOL {
            ops.push(NativeOp::Rotation { axis, angle, wire });
        }
    }
}

/// Intermediate gate list with arbitrary single-qubit unitaries.
enum Step {
    Local(usize, CMatrix),
    Uzz,
}

fn emit(steps: Vec<Step>) -> Vec<NativeOp> {
    let mut ops = Vec::new();
    let mut pending = [CMatrix::identity(2, 2), CMatrix::identity(2, 2)];
    for step in steps {
        match step {
            Step::Local(w, m) => pending[w] = m * &pending[w],
            Step::Uzz => {
                for (w, m) in pending.iter_mut().enumerate() {
                    push_euler(&mut ops, m, w);
                    *m = CMatrix::identity(2, 2);
                }
                ops.push(NativeOp::Uzz { wires: [0, 1] });
            }
        }
    }
    for (w, m) in pending.iter().enumerate() {
        push_euler(&mut ops, m, w);
    }
    ops
}

fn push_product(steps: &mut Vec<Step>, m: &CMatrix) {
    let (a, b) = factor_product(m);
    steps.push(Step::Local(0, a));
    steps.push(Step::Local(1, b));
}

/// `CNOT` with control `ctrl` as `(H_t) · e^{iπ/4} U_zz (R_z(π/2)⊗R_z(π/2)) · (H_t)`.
fn push_cnot(steps: &mut Vec<Step>, ctrl: usize) {
    let t = 1 - ctrl;
    steps.push(Step::Local(t, gates::hadamard()));
    steps.push(Step::Local(0, gates::rz(FRAC_PI_2)));
    steps.push(Step::Local(1, gates::rz(FRAC_PI_2)));
    steps.push(Step::Uzz);
    steps.push(Step::Local(t, gates::hadamard()));
}

/// Split a `4×4` tensor product into its `2×2` factors (up to phase).
fn factor_product(m: &CMatrix) -> (CMatrix, CMatrix) {
    let block = |i: usize, j: usize| m.view((2 * i, 2 * j), (2, 2)).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                (bi, bj, best) = (i, j, n);
            }
        }
    }
    let pivot = block(bi, bj);
    let b = &pivot / c(pivot.norm() / 2f64.sqrt(), 0.0);
    let a = CMatrix::from_fn(2, 2, |i, j| (b.adjoint() * block(i, j)).trace() / c(2.0, 0.0));
    (a, b)
}

fn magic_basis() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = c(s, 0.0);
    let hi = c(0.0, s);
    CMatrix::from_row_slice(
        4,
        4,
        &[h, ZERO, ZERO, hi, ZERO, hi, h, ZERO, ZERO, hi, -h, ZERO, h, ZERO, ZERO, -hi],
    )
}

struct Cartan {
    left: CMatrix,
    right: CMatrix,
    /// Coefficients of `XX`, `YY`, `ZZ`, each reduced to `(−π/4, π/4]`.
    coeffs: [f64; 3],
}

const PAIRS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

fn pair(p: Pauli) -> CMatrix {
    linalg::kron(&p.matrix(), &p.matrix())
}

/// `U ∝ left · exp(i Σ coeff_P P⊗P) · right`, `left` and `right` local.
fn cartan(u: &CMatrix) -> Cartan {
    let det = u.determinant();
    let su = u / det.powf(0.25);
    let bm = magic_basis();
    let up = bm.adjoint() * &su * &bm;
    let m = up.transpose() * &up;
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);

    let mut p = DMatrix::<f64>::identity(4, 4);
    for r in [0.618_033_988_749_894_8, 1.324_717_957_244_746, 0.267_949_192_431_122_7, 2.414_213_562_373_095] {
        let eig = SymmetricEigen::new(&re + &im * r);
        let cand = eig.eigenvectors;
        let d = cand.transpose() * &re * &cand;
        let e = cand.transpose() * &im * &cand;
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| d[(i, j)].abs() + e[(i, j)].abs())
            .sum();
        p = cand;
        if off < 1e-10 {
            break;
        }
    }
    if p.determinant() < 0.0 {
        let col = -p.column(0);
        p.set_column(0, &col);
    }
    let pc = p.map(|x| c(x, 0.0));
    let d = pc.transpose() * &m * &pc;
    let mut theta: Vec<f64> = (0..4).map(|k| d[(k, k)].arg() / 2.0).collect();
    let phases = |theta: &[f64]| CMatrix::from_diagonal(&linalg::CVector::from_iterator(4, theta.iter().map(|&t| c(0.0, -t).exp())));
    let mut o1 = &up * &pc * phases(&theta);
    if o1.map(|z| z.re).determinant() < 0.0 {
        theta[0] += PI;
        o1 = &up * &pc * phases(&theta);
    }
    let o2 = pc.transpose();
    let left = &bm * o1 * bm.adjoint();
    let right = &bm * o2 * bm.adjoint();

    // θ_k = φ + Σ_P coeff_P · diag(B† PP B)_k
    let signs: Vec<Vec<f64>> = PAIRS
        .iter()
        .map(|&q| {
            let d = bm.adjoint() * pair(q) * &bm;
            (0..4).map(|k| d[(k, k)].re).collect()
        })
        .collect();
    let a = Matrix4::from_fn(|k, j| if j == 0 { 1.0 } else { signs[j - 1][k] });
    let sol = a.try_inverse().expect("magic-basis sign matrix is invertible") * Vector4::from_iterator(theta.iter().copied());

    let mut coeffs = [sol[1], sol[2], sol[3]];
    let mut left = left;
    for (k, &q) in PAIRS.iter().enumerate() {
        // exp(i(x + nπ/2) PP) = exp(ix PP) (i PP)^n
        let n = ((coeffs[k] + FRAC_PI_4 - 1e-12) / FRAC_PI_2).ceil() - 1.0;
        coeffs[k] -= n * FRAC_PI_2;
        let step = pair(q) * I;
        for _ in 0..(n.rem_euclid(4.0) as usize) {
            left = &left * &step;
        }
    }
    Cartan { left, right, coeffs }
}

/// Single-qubit Clifford `L` with `L Z L† = P`.
fn z_to(p: Pauli) -> CMatrix {
    match p {
        Pauli::X => gates::hadamard(),
        Pauli::Y => gates::rx(-FRAC_PI_2),
        _ => CMatrix::identity(2, 2),
    }
}

fn two_qubit(u: &CMatrix) -> Vec<NativeOp> {
    if gates::distance_up_to_phase(u, &gates::uzz()) < 1e-12 {
        return vec![NativeOp::Uzz { wires: [0, 1] }];
    }
    let k = cartan(u);
    let active: Vec<usize> = (0..3).filter(|&i| k.coeffs[i].abs() > COEFF_TOL).collect();
    let mut steps = Vec::new();
    push_product(&mut steps, &k.right);
    match active.len() {
        0 => {}
        1 if (k.coeffs[active[0]].abs() - FRAC_PI_4).abs() < COEFF_TOL => {
            let q = PAIRS[active[0]];
            let l = z_to(q);
            for w in 0..2 {
                steps.push(Step::Local(w, l.adjoint()));
            }
            if k.coeffs[active[0]] < 0.0 {
                // exp(−iπ/4 ZZ) = U_zz · (−i Z⊗Z)
                for w in 0..2 {
                    steps.push(Step::Local(w, Pauli::Z.matrix()));
                }
            }
            steps.push(Step::Uzz);
            for w in 0..2 {
                steps.push(Step::Local(w, l.clone()));
            }
        }
        1 | 2 => {
            // Relabel axes with the same Clifford on both qubits so that the
            // vanishing coefficient sits on YY, then use
            // exp(i(x XX + z ZZ)) = CNOT (e^{ixX} ⊗ e^{izZ}) CNOT.
            let (l, x, z) = two_term_frame(k.coeffs);
            for w in 0..2 {
                steps.push(Step::Local(w, l.adjoint()));
            }
            push_cnot(&mut steps, 0);
            steps.push(Step::Local(0, gates::rx(-2.0 * x)));
            steps.push(Step::Local(1, gates::rz(-2.0 * z)));
            push_cnot(&mut steps, 0);
            for w in 0..2 {
                steps.push(Step::Local(w, l.clone()));
            }
        }
        _ => push_three(&mut steps, k.coeffs),
    }
    push_product(&mut steps, &k.left);
    emit(steps)
}

/// Clifford `L` and coefficients with
/// `exp(i(a XX + b YY + c ZZ)) = (L⊗L) exp(i(x XX + z ZZ)) (L⊗L)†`,
/// valid when at least one coefficient vanishes.
fn two_term_frame(coeffs: [f64; 3]) -> (CMatrix, f64, f64) {
    let [a, b, cc] = coeffs;
    let smallest = (0..3).min_by(|&i, &j| coeffs[i].abs().total_cmp(&coeffs[j].abs())).unwrap_or(1);
    match smallest {
        // S X S† = Y, S Z S† = Z
        0 => (CMatrix::from_diagonal(&linalg::CVector::from_vec(vec![ONE, I])), b, cc),
        // R_x(π/2) Z R_x(π/2)† = −Y
        2 => (gates::rx(FRAC_PI_2), a, b),
        _ => (CMatrix::identity(2, 2), a, cc),
    }
}

/// Three-entangler circuit for `exp(i(a XX + b YY + c ZZ))`.
fn push_three(steps: &mut Vec<Step>, coeffs: [f64; 3]) {
    let [a, b, cc] = coeffs;
    steps.push(Step::Local(1, gates::rz(-FRAC_PI_2)));
    push_cnot(steps, 1);
    steps.push(Step::Local(0, gates::rz(FRAC_PI_2 - 2.0 * cc)));
    steps.push(Step::Local(1, gates::ry(2.0 * a - FRAC_PI_2)));
    push_cnot(steps, 0);
    steps.push(Step::Local(1, gates::ry(FRAC_PI_2 - 2.0 * b)));
    push_cnot(steps, 1);
    steps.push(Step::Local(0, gates::rz(FRAC_PI_2)));
}
