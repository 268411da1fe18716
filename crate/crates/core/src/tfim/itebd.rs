//! Imaginary-time iTEBD for the transverse-field Ising chain on a two-site
//! unit cell. The Hamiltonian is real, so everything stays in `f64`.
//!
//! Tensors are kept in right-canonical (Hastings) form, which avoids dividing
//! by small Schmidt values.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

type Mat = DMatrix<f64>;

#[derive(Clone, Debug)]
pub(crate) struct Itebd {
    /// `b[site][s]` is a `χ_l × χ_r` matrix.
    b: [[Mat; 2]; 2],
    /// `lam[0]` sits left of site 0, `lam[1]` between site 0 and site 1.
    lam: [DVector<f64>; 2],
    chi_max: usize,
}

pub(crate) fn bond_gate(lambda: f64, dt: f64) -> Mat {
    let x = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let z = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let id = Mat::identity(2, 2);
    let h = -(z.kronecker(&z)) - (x.kronecker(&id) + id.kronecker(&x)) * (0.5 * lambda);
    let eig = SymmetricEigen::new(h);
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|e| (-dt * e).exp()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

impl Itebd {
    /// Product state with every site in `(cos θ, sin θ)`.
    pub(crate) fn product(theta: f64, chi_max: usize) -> Self {
        let up = Mat::from_element(1, 1, theta.cos());
        let down = Mat::from_element(1, 1, theta.sin());
        let site = [up, down];
        Self {
            b: [site.clone(), site],
            lam: [DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)],
            chi_max,
        }
    }

    pub(crate) fn set_chi_max(&mut self, chi_max: usize) {
        self.chi_max = chi_max;
    }

    pub(crate) fn schmidt_values(&self, bond: usize) -> &DVector<f64> {
        &self.lam[bond]
    }

    /// Apply the two-site gate on (site `a`, site `1 − a`); `a = 0` updates
    /// the bond inside the unit cell.
    pub(crate) fn update(&mut self, gate: &Mat, a: usize) {
        let bb = 1 - a;
        let left = &self.lam[a];
        let (chi_l, chi_r) = (self.b[a][0].nrows(), self.b[bb][0].ncols());
        // pair[s1][s2] = B_a[s1] B_b[s2]
        let pair: Vec<Vec<Mat>> = (0..2)
            .map(|s1| (0..2).map(|s2| &self.b[a][s1] * &self.b[bb][s2]).collect())
            .collect();
        // c[(α, s1), (s2, γ)]
        let mut c = Mat::zeros(2 * chi_l, 2 * chi_r);
        for s1 in 0..2 {
            for s2 in 0..2 {
                let row = 2 * s1 + s2;
                let mut block = Mat::zeros(chi_l, chi_r);
                for t1 in 0..2 {
                    for t2 in 0..2 {
                        let g = gate[(row, 2 * t1 + t2)];
                        if g != 0.0 {
                            block += &pair[t1][t2] * g;
                        }
                    }
                }
                for al in 0..chi_l {
                    for ga in 0..chi_r {
                        c[(2 * al + s1, s2 * chi_r + ga)] = block[(al, ga)];
                    }
                }
            }
        }
        let mut theta = c.clone();
        for al in 0..chi_l {
            for s1 in 0..2 {
                theta.row_mut(2 * al + s1).scale_mut(left[al]);
            }
        }
        let svd = theta.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let s0 = svd.singular_values[order[0]];
        let keep: Vec<usize> = order
            .into_iter()
            .take(self.chi_max)
            .filter(|&k| svd.singular_values[k] > 1e-14 * s0)
            .collect();
        let norm = keep.iter().map(|&k| svd.singular_values[k].powi(2)).sum::<f64>().sqrt();
        let chi_new = keep.len();
        self.lam[bb] = DVector::from_iterator(chi_new, keep.iter().map(|&k| svd.singular_values[k] / norm));
        for s2 in 0..2 {
            self.b[bb][s2] = Mat::from_fn(chi_new, chi_r, |k, ga| v_t[(keep[k], s2 * chi_r + ga)]);
        }
        // B_a = C · Y†, the Schmidt vectors carry the left weights.
        let y = Mat::from_fn(2 * chi_r, chi_new, |r, k| v_t[(keep[k], r)]);
        let cy = c * y / norm;
        for s1 in 0..2 {
            self.b[a][s1] = Mat::from_fn(chi_l, chi_new, |al, k| cy[(2 * al + s1, k)]);
        }
    }

    /// One second-order Trotter block of `n` steps:
    /// `A(dt/2) [B(dt) A(dt)]^{n−1} B(dt) A(dt/2)`.
    pub(crate) fn block(&mut self, half: &Mat, full: &Mat, n: usize) {
        self.update(half, 0);
        for k in 0..n {
            self.update(full, 1);
            self.update(if k + 1 == n { half } else { full }, 0);
        }
    }

    /// Exact Schmidt spectrum across the bond left of site `bond`, obtained
    /// from the fixed points of the unit-cell transfer matrix, so that small
    /// departures from canonical form do not leak into the result.
    pub(crate) fn canonical_spectrum(&self, bond: usize) -> Vec<f64> {
        let (first, second) = (&self.b[bond], &self.b[1 - bond]);
        let cell: Vec<Mat> = (0..4).map(|k| &first[k >> 1] * &second[k & 1]).collect();
        let chi = cell[0].nrows();
        let lam2 = Mat::from_diagonal(&self.lam[bond].map(|v| v * v));
        let right = fixed_point(Mat::identity(chi, chi), |x| {
            cell.iter().fold(Mat::zeros(chi, chi), |acc, u| acc + u * x * u.transpose())
        });
        let left = fixed_point(lam2, |x| {
            cell.iter().fold(Mat::zeros(chi, chi), |acc, u| acc + u.transpose() * x * u)
        });
        // Spectrum of L·R equals that of R^{1/2} L R^{1/2}.
        let r_half = psd_sqrt(&right);
        let m = &r_half * left * &r_half;
        let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = vals.iter().sum();
        vals.iter_mut().for_each(|v| *v /= total);
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }
}

fn psd_sqrt(m: &Mat) -> Mat {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Dominant fixed point of a positive map by power iteration, normalised to
/// unit trace.
fn fixed_point(start: Mat, apply: impl Fn(&Mat) -> Mat) -> Mat {
    let mut x = start;
    let tr = x.trace();
    x /= tr;
    for _ in 0..100_000 {
        let mut y = apply(&x);
        let tr = y.trace();
        y /= tr;
        let diff = (&y - &x).norm();
        x = y;
        if diff < 1e-14 {
            break;
        }
    }
    x
}

pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}
