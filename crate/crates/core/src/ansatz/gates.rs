//! Fixed single- and two-qubit gates and the variable-angle entanglers.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CMatrix, Pauli, C64, I, ONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

/// `exp(−iθP/2)`
pub fn rotation(axis: Axis, theta: f64) -> CMatrix {
    let p = axis.pauli().matrix();
    CMatrix::identity(2, 2) * c((theta / 2.0).cos(), 0.0) - p * (I * (theta / 2.0).sin())
}

pub fn rx(theta: f64) -> CMatrix {
    rotation(Axis::X, theta)
}

pub fn ry(theta: f64) -> CMatrix {
    rotation(Axis::Y, theta)
}

pub fn rz(theta: f64) -> CMatrix {
    rotation(Axis::Z, theta)
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
}

/// Clifford cycling the Pauli axes `X → Z → Y → X` under conjugation.
pub fn axis_cycle() -> CMatrix {
    let sum = Pauli::X.matrix() + Pauli::Y.matrix() + Pauli::Z.matrix();
    (CMatrix::identity(2, 2) + sum * I).scale(0.5)
}

pub fn cz() -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ONE, ONE, -ONE]))
}

/// `CNOT` with the first qubit as control.
pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

/// Native entangler `exp(iπ/4 Z⊗Z)`.
pub fn uzz() -> CMatrix {
    let p = c(0.0, std::f64::consts::FRAC_PI_4).exp();
    let m = p.conj();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![p, m, m, p]))
}

/// `exp(−i(α X⊗Y − β Y⊗X)/2)`, built from the template
/// `(R_x(π/2) ⊗ C) · CZ · (R_x(α) ⊗ R_y(β)) · CZ · (R_x(π/2) ⊗ C)†`.
/// Identity at `α = β = 0`, real, and commuting with `Z⊗Z`.
pub fn gxy_gate(alpha: f64, beta: f64) -> CMatrix {
    let frame = linalg::kron(&rx(FRAC_PI_2), &axis_cycle());
    let core = cz() * linalg::kron(&rx(alpha), &ry(beta)) * cz();
    &frame * core * frame.adjoint()
}

/// `(R_y(π/2)† ⊗ 𝟙) · GXY(α, β) · (R_y(π/2) ⊗ 𝟙)`, i.e.
/// `exp(−i(α Z⊗Y − β Y⊗X)/2)`.
pub fn gzy_gate(alpha: f64, beta: f64) -> CMatrix {
    let r = linalg::kron(&ry(FRAC_PI_2), &CMatrix::identity(2, 2));
    r.adjoint() * gxy_gate(alpha, beta) * r
}

/// Remove the global phase so that the first sizeable entry is real
/// positive; used to compare unitaries up to phase.
pub fn phase_normalised(m: &CMatrix) -> CMatrix {
    let pivot = m.iter().copied().find(|z| z.norm() > 1e-6).unwrap_or(ONE);
    m * (pivot.conj() / c(pivot.norm(), 0.0))
}

/// Frobenius distance after optimally aligning the global phase.
pub fn distance_up_to_phase(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap / c(overlap.norm(), 0.0) } else { ONE };
    (a * phase - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;

    fn pauli_exp(pairs: &[(f64, Pauli, Pauli)]) -> CMatrix {
        // Commuting two-qubit Pauli terms: product of exp(−iθ/2 P⊗Q).
        pairs.iter().fold(CMatrix::identity(4, 4), |acc, &(theta, p, q)| {
            let pq = kron(&p.matrix(), &q.matrix());
            acc * (CMatrix::identity(4, 4) * c((theta / 2.0).cos(), 0.0) - pq * (I * (theta / 2.0).sin()))
        })
    }

    #[test]
    fn axis_cycle_maps_paulis() {
        let g = axis_cycle();
        let conj = |p: Pauli| &g * p.matrix() * g.adjoint();
        assert!(linalg::frobenius_distance(&conj(Pauli::X), &Pauli::Z.matrix()) < 1e-14);
        assert!(linalg::frobenius_distance(&conj(Pauli::Y), &Pauli::X.matrix()) < 1e-14);
        assert!(linalg::frobenius_distance(&conj(Pauli::Z), &Pauli::Y.matrix()) < 1e-14);
    }

    #[test]
    fn gxy_equals_pauli_exponential() {
        for &(a, b) in &[(0.3, -1.1), (2.0, 0.7), (-0.4, 0.0)] {
            let expect = pauli_exp(&[(a, Pauli::X, Pauli::Y), (-b, Pauli::Y, Pauli::X)]);
            assert!(linalg::frobenius_distance(&gxy_gate(a, b), &expect) < 1e-12);
            let expect = pauli_exp(&[(a, Pauli::Z, Pauli::Y), (-b, Pauli::Y, Pauli::X)]);
            assert!(linalg::frobenius_distance(&gzy_gate(a, b), &expect) < 1e-12);
        }
    }

    #[test]
    fn gxy_zero_point_and_symmetries() {
        assert!(distance_up_to_phase(&gxy_gate(0.0, 0.0), &CMatrix::identity(4, 4)) < 1e-12);
        let g = gxy_gate(0.8, -0.3);
        assert!(g.iter().all(|z| z.im.abs() < 1e-12));
        let zz = kron(&Pauli::Z.matrix(), &Pauli::Z.matrix());
        assert!(linalg::frobenius_distance(&(&g * &zz), &(&zz * &g)) < 1e-12);
    }

    #[test]
    fn uzz_and_cz_are_locally_equivalent() {
        // CZ = e^{iπ/4} Uzz (Rz(π/2) ⊗ Rz(π/2))
        let built = uzz() * kron(&rz(FRAC_PI_2), &rz(FRAC_PI_2)) * c(0.0, std::f64::consts::FRAC_PI_4).exp();
        assert!(linalg::frobenius_distance(&built, &cz()) < 1e-12);
    }
}
