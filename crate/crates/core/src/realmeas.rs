//! Plaquette readout built from four controlled-phase evolutions of partial angle `t`
//! between one ancilla and the four data qubits of a plaquette.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;

use crate::{Error, Result};

const DATA: usize = 4;
const DIM: usize = 1 << DATA;
const FULL: usize = 2 * DIM;

/// Weight classes of symmetric Z strings on the four data qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffClass {
    Identity,
    SingleZ,
    PairZ,
    TripleZ,
    /// The plaquette operator `Z⊗Z⊗Z⊗Z`.
    Plaquette,
}

impl CoeffClass {
    pub const ALL: [CoeffClass; 5] =
        [CoeffClass::Identity, CoeffClass::SingleZ, CoeffClass::PairZ, CoeffClass::TripleZ, CoeffClass::Plaquette];

    pub fn weight(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CoeffClass::Identity => "I",
            CoeffClass::SingleZ => "sum_Z",
            CoeffClass::PairZ => "sum_ZZ",
            CoeffClass::TripleZ => "sum_ZZZ",
            CoeffClass::Plaquette => "B",
        }
    }
}

/// Data-qubit operator for outcome `s`, diagonal in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RealisticMeasOp {
    pub t: f64,
    pub s: i8,
    /// 16×16 row-major.
    pub matrix: Vec<Complex64>,
    /// Coefficients in [`CoeffClass::ALL`] order.
    pub coeffs: [Complex64; 5],
}

impl RealisticMeasOp {
    pub fn coeff(&self, c: CoeffClass) -> Complex64 {
        self.coeffs[c.weight()]
    }

    pub fn diag(&self) -> Vec<Complex64> {
        (0..DIM).map(|i| self.matrix[i * DIM + i]).collect()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..DIM).all(|i| (0..DIM).all(|j| i == j || self.matrix[i * DIM + j].norm() <= tol))
    }

    /// Diagonal entries depend only on the number of flipped data qubits.
    pub fn is_permutation_symmetric(&self, tol: f64) -> bool {
        let d = self.diag();
        (0..DIM).all(|z| (d[z] - d[(1 << z.count_ones()) - 1]).norm() <= tol)
    }
}

fn z_eig(z: usize, i: usize) -> f64 {
    if z >> i & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let x = a[i * n + k];
            if x.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += x * b[k * n + j];
            }
        }
    }
    c
}

/// Projection of a diagonal operator onto the symmetric string classes: `Tr(Z_S M) / 16` for a
/// representative string of each weight.
pub fn class_coefficients(diag: &[Complex64]) -> [Complex64; 5] {
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (w, o) in out.iter_mut().enumerate() {
        let rep = (1usize << w) - 1;
        let s: Complex64 = (0..DIM)
            .map(|z| {
                let sign = if (z & rep).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                diag[z] * sign
            })
            .sum();
        *o = s / DIM as f64;
    }
    out
}

/// `⟨s| H exp(-i t/4 Σ_i (s^z σ^z_i - s^z - σ^z_i + 1)) H |0⟩` by explicit 32×32 products.
/// Ancilla is the high bit; `s = +1` is ancilla state `|0⟩`.
pub fn build_realistic_op(t: f64, s: i8) -> Result<RealisticMeasOp> {
    if !t.is_finite() || !(0.0..2.0 * std::f64::consts::PI).contains(&t) {
        return Err(Error::Param(format!("angle t must lie in [0, 2π), got {t}")));
    }
    if s != 1 && s != -1 {
        return Err(Error::Param(format!("outcome must be ±1, got {s}")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = vec![zero; FULL * FULL];
    let mut u = vec![zero; FULL * FULL];
    for a in 0..2 {
        let sa = if a == 0 { 1.0 } else { -1.0 };
        for z in 0..DIM {
            let row = a * DIM + z;
            for b in 0..2 {
                let sign = if a == 1 && b == 1 { -r } else { r };
                h[row * FULL + b * DIM + z] = Complex64::new(sign, 0.0);
            }
            let gen: f64 = (0..DATA).map(|i| sa * z_eig(z, i) - sa - z_eig(z, i) + 1.0).sum();
            u[row * FULL + row] = Complex64::new(0.0, -t / 4.0 * gen).exp();
        }
    }
    let huh = matmul(&matmul(&h, &u, FULL), &h, FULL);
    let a_out = if s == 1 { 0 } else { 1 };
    let mut m = vec![zero; DIM * DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            m[i * DIM + j] = huh[(a_out * DIM + i) * FULL + j];
        }
    }
    let diag: Vec<Complex64> = (0..DIM).map(|i| m[i * DIM + i]).collect();
    Ok(RealisticMeasOp { t, s, matrix: m, coeffs: class_coefficients(&diag) })
}

/// The printed factorised closed form: a plaquette factor times a coherent Z-string factor,
/// evaluated as diagonal operators and projected onto the string classes.
pub fn printed_closed_form(t: f64, s: i8) -> [Complex64; 5] {
    let i = Complex64::new(0.0, 1.0);
    let sf = s as f64;
    let (sn, c) = (t / 2.0).sin_cos();
    let e_m = (-2.0 * i * t).exp();
    let e_p = (2.0 * i * t).exp();
    let den = (sf * e_p + c.powi(4)).powi(2) - sn.powi(8);
    let x1 = (i * sf * e_p * sn * c.powi(3) + i * sn * c.powi(7) + i * sn.powi(7) * c) / den;
    let x2 = sn * sn * c * c / (sf * e_p + c.powi(4) + sn.powi(4));
    let x3 = (i * sf * e_p * sn.powi(3) * c + i * sn.powi(3) * c.powi(5) + i * sn.powi(5) * c.powi(3)) / den;
    let diag: Vec<Complex64> = (0..DIM)
        .map(|z| {
            let zs: Vec<f64> = (0..DATA).map(|k| z_eig(z, k)).collect();
            let b: f64 = zs.iter().product();
            let e1: f64 = zs.iter().sum();
            let mut e2 = 0.0;
            let mut e3 = 0.0;
            for a in 0..DATA {
                for bb in a + 1..DATA {
                    e2 += zs[a] * zs[bb];
                    for cc in bb + 1..DATA {
                        e3 += zs[a] * zs[bb] * zs[cc];
                    }
                }
            }
            let first = 1.0 + sf * e_m * c.powi(4) + sf * e_m * sn.powi(4) * b;
            let second = 1.0 - x1 * e1 - x2 * e2 + x3 * e3;
            0.5 * first * second
        })
        .collect();
    class_coefficients(&diag)
}

/// Largest coefficient gap between the explicit construction and the printed closed form.
pub fn closed_form_discrepancy(t: f64, s: i8) -> Result<f64> {
    let op = build_realistic_op(t, s)?;
    let printed = printed_closed_form(t, s);
    Ok(op.coeffs.iter().zip(printed.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// `Σ_s M_s† M_s`, returned as a 16×16 row-major matrix.
pub fn povm_sum(t: f64) -> Result<Vec<Complex64>> {
    let mut acc = vec![Complex64::new(0.0, 0.0); DIM * DIM];
    for s in [1, -1] {
        let m = build_realistic_op(t, s)?.matrix;
        let mut mh = vec![Complex64::new(0.0, 0.0); DIM * DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                mh[i * DIM + j] = m[j * DIM + i].conj();
            }
        }
        for (a, b) in acc.iter_mut().zip(matmul(&mh, &m, DIM)) {
            *a += b;
        }
    }
    Ok(acc)
}

/// Diagonal entries of `(1 + s B)/2`.
pub fn ideal_projector_diag(s: i8) -> Vec<Complex64> {
    (0..DIM)
        .map(|z| {
            let b = if z.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            Complex64::new(0.5 * (1.0 + s as f64 * b), 0.0)
        })
        .collect()
}

struct Fit {
    diag: Vec<Complex64>,
}

impl Fit {
    fn distance(&self, p: &[f64]) -> f64 {
        let a = Complex64::new(p[0], p[1]);
        self.diag
            .iter()
            .enumerate()
            .map(|(z, &m)| {
                let b = if z.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                (m - a * (1.0 + p[2] * b)).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl CostFunction for Fit {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.distance(p))
    }
}

/// Operator-norm distance from `M_s` to the nearest `a (1 + c B)` with complex `a`, real `c`.
/// Both operators are diagonal, so the norm is the largest entry gap.
pub fn coherent_error_distance(t: f64, s: i8) -> Result<f64> {
    let op = build_realistic_op(t, s)?;
    let fit = Fit { diag: op.diag() };
    let a0 = op.coeff(CoeffClass::Identity);
    let c0 = if a0.norm() > 1e-12 { (op.coeff(CoeffClass::Plaquette) / a0).re } else { 0.0 };
    let start = vec![a0.re, a0.im, c0];
    let mut best = fit.distance(&start);
    let mut centre = start;
    // Restarts from the incumbent shrink the simplex around a non-smooth minimum.
    for scale in [0.1, 0.01, 1e-3] {
        let mut simplex = vec![centre.clone()];
        for k in 0..3 {
            let mut v = centre.clone();
            v[k] += scale;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-14)
            .map_err(|e| Error::Param(format!("optimizer setup: {e}")))?;
        let res = Executor::new(Fit { diag: fit.diag.clone() }, solver)
            .configure(|st| st.max_iters(4000))
            .run()
            .map_err(|e| Error::Param(format!("optimizer: {e}")))?;
        if let Some(p) = res.state().best_param.clone() {
            let v = fit.distance(&p);
            if v < best {
                best = v;
                centre = p;
            }
        }
    }
    Ok(best)
}

/// Worse of the two outcomes' distances to the ideal weak-measurement form.
pub fn coherent_error_magnitude(t: f64) -> Result<f64> {
    Ok(coherent_error_distance(t, 1)?.max(coherent_error_distance(t, -1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn projector_at_full_angle() {
        for s in [1, -1] {
            let op = build_realistic_op(PI, s).unwrap();
            assert!(op.is_diagonal(1e-14));
            for (a, b) in op.diag().iter().zip(ideal_projector_diag(s)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_by_expansion() {
        // ½(1 + s e^{-2it} Π_i (cos(t/2) + i sin(t/2) Z_i)).
        for t in [0.3, 1.1, 2.9, 4.0] {
            for s in [1i8, -1] {
                let op = build_realistic_op(t, s).unwrap();
                let (sn, c) = (t / 2.0_f64).sin_cos();
                let i = Complex64::new(0.0, 1.0);
                let pre = 0.5 * s as f64 * (-2.0 * i * t).exp();
                let want = [
                    0.5 + pre * c.powi(4),
                    pre * i * c.powi(3) * sn,
                    -pre * c * c * sn * sn,
                    -pre * i * c * sn.powi(3),
                    pre * sn.powi(4),
                ];
                for (a, b) in op.coeffs.iter().zip(want) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn printed_form_differs_by_odd_string_sign() {
        for k in 1..=6 {
            let t = 0.5 * k as f64;
            for s in [1i8, -1] {
                let op = build_realistic_op(t, s).unwrap();
                let printed = printed_closed_form(t, s);
                for (w, (a, b)) in op.coeffs.iter().zip(printed).enumerate() {
                    let sign = if w % 2 == 1 { -1.0 } else { 1.0 };
                    assert!((a - sign * b).norm() < 1e-10, "t={t} s={s} w={w}");
                }
                if t < 3.0 {
                    assert!(closed_form_discrepancy(t, s).unwrap() > 1e-3);
                }
            }
        }
    }

    #[test]
    fn completeness_and_symmetry() {
        for t in [0.0, 0.4, 1.7, 3.0, 5.5] {
            let sum = povm_sum(t).unwrap();
            for i in 0..DIM {
                for j in 0..DIM {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((sum[i * DIM + j] - want).norm() < 1e-12);
                }
            }
            for s in [1, -1] {
                let op = build_realistic_op(t, s).unwrap();
                assert!(op.is_diagonal(1e-13) && op.is_permutation_symmetric(1e-13));
            }
        }
    }

    #[test]
    fn coherent_error_vanishes_only_at_projector() {
        assert!(coherent_error_magnitude(PI).unwrap() < 1e-9);
        let far = coherent_error_magnitude(PI - 0.2).unwrap();
        let near = coherent_error_magnitude(PI - 0.02).unwrap();
        assert!(far > 1e-4);
        assert!(near < far);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_realistic_op(7.0, 1).is_err());
        assert!(build_realistic_op(1.0, 0).is_err());
    }
}
