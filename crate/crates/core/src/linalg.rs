//! Small dense complex linear algebra shared by every module.
//!
//! Qubit ordering follows the usual big-endian convention: wire 0 is the most
//! significant bit of a basis index. In circuits wire 0 is the system qubit
//! and wires `1..=n_b` hold the bond register.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Single-qubit Pauli labels. `I` is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => CMatrix::identity(2, 2),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m.adjoint() * m - CMatrix::identity(m.nrows(), m.ncols())).norm() <= tol
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in descending
/// order. Column `k` of the returned matrix is the eigenvector of value `k`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Eigenvalues of a general square matrix, sorted by descending modulus.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let schur = Schur::new(m.clone());
    let (_, t) = schur.unpack();
    let mut values: Vec<C64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    values
}

/// Right eigenvector of `m` for an eigenvalue close to `mu`, by inverse
/// iteration. The shift is nudged off `mu` so the solve stays regular.
pub fn eigenvector_near(m: &CMatrix, mu: C64) -> CVector {
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let shift = mu + c(1e-11 * scale, 1e-11 * scale);
    let shifted = m - CMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = CVector::from_fn(n, |k, _| c(1.0 + 0.1 * k as f64, 0.05 * k as f64));
    v /= c(v.norm(), 0.0);
    for _ in 0..6 {
        match lu.solve(&v) {
            Some(w) if w.norm().is_finite() && w.norm() > 0.0 => {
                let nrm = w.norm();
                v = w / c(nrm, 0.0);
            }
            _ => break,
        }
    }
    v
}

/// Reshape a length-`d*d` vector (row-major) into a `d x d` matrix.
pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |r, col| v[r * d + col])
}

/// Row-major vectorisation, the inverse of [`unvec`].
pub fn vec_of(m: &CMatrix) -> CVector {
    let d = m.ncols();
    CVector::from_fn(m.nrows() * d, |k, _| m[(k / d, k % d)])
}

/// Embed a `2^k x 2^k` gate acting on `wires` (in the gate's own big-endian
/// order) into an `n_wires`-qubit operator.
pub fn embed(gate: &CMatrix, wires: &[usize], n_wires: usize) -> CMatrix {
    let k = wires.len();
    let dim = 1usize << n_wires;
    assert_eq!(gate.nrows(), 1 << k, "gate size does not match wire count");
    let mut out = CMatrix::zeros(dim, dim);
    let masks: Vec<usize> = wires.iter().map(|&w| 1usize << (n_wires - 1 - w)).collect();
    let all_mask: usize = masks.iter().sum();
    for col in 0..dim {
        let mut sub_in = 0usize;
        for m in &masks {
            sub_in = (sub_in << 1) | usize::from(col & m != 0);
        }
        let rest = col & !all_mask;
        for sub_out in 0..(1usize << k) {
            let amp = gate[(sub_out, sub_in)];
            if amp == ZERO {
                continue;
            }
            let mut row = rest;
            for (idx, m) in masks.iter().enumerate() {
                if (sub_out >> (k - 1 - idx)) & 1 == 1 {
                    row |= m;
                }
            }
            out[(row, col)] += amp;
        }
    }
    out
}

/// Partial trace keeping the listed wires (in increasing order).
pub fn partial_trace_keep(rho: &CMatrix, keep: &[usize], n_wires: usize) -> CMatrix {
    let kd = 1usize << keep.len();
    let dim = 1usize << n_wires;
    let keep_masks: Vec<usize> = keep.iter().map(|&w| 1usize << (n_wires - 1 - w)).collect();
    let keep_all: usize = keep_masks.iter().sum();
    let sub = |idx: usize| -> usize {
        keep_masks
            .iter()
            .fold(0usize, |acc, m| (acc << 1) | usize::from(idx & m != 0))
    };
    let mut out = CMatrix::zeros(kd, kd);
    for r in 0..dim {
        for col in 0..dim {
            if (r & !keep_all) != (col & !keep_all) {
                continue;
            }
            out[(sub(r), sub(col))] += rho[(r, col)];
        }
    }
    out
}

/// Trace distance `½‖a − b‖₁` between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the usual
/// phase fix on the diagonal of R.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c(normal(rng), normal(rng)) / c(2f64.sqrt(), 0.0)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| c(normal(rng), normal(rng)));
    let n = v.norm();
    v / c(n, 0.0)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}
