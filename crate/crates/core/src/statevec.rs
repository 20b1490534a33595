//! Dense statevector oracle for small tori (2N ≤ 24 qubits).
//!
//! Qubit `e` is edge `e`; computational basis bit 1 means σ^z = -1. Plaquette
//! stabilizers `B_p = Π σ^z` are diagonal, vertex stabilizers `A_v = Π σ^x`
//! flip bits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Spacetime3D, Torus2D};
use crate::noise::{weak_measurement_coefficients, Layers, NoiseParams, PauliHistory, SyndromeHistory};

pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub torus: Torus2D,
    pub amps: Vec<Complex64>,
}

fn edge_mask(edges: &[usize]) -> usize {
    edges.iter().fold(0usize, |m, &e| m ^ (1 << e))
}

impl DenseState {
    fn check(torus: &Torus2D) -> Result<()> {
        if torus.n_edges() > MAX_QUBITS {
            return Err(Error::Resource(format!(
                "{} qubits exceed the dense limit of {MAX_QUBITS}",
                torus.n_edges()
            )));
        }
        Ok(())
    }

    /// `|+…+⟩`, the +1 eigenstate of every vertex stabilizer and X logical.
    pub fn plus(torus: &Torus2D) -> Result<Self> {
        Self::check(torus)?;
        let dim = 1usize << torus.n_edges();
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(DenseState { torus: torus.clone(), amps: vec![a; dim] })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.amps.iter_mut().for_each(|a| *a *= s);
        }
        n
    }

    pub fn inner(&self, other: &DenseState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn plaquette_masks(&self) -> Vec<usize> {
        (0..self.torus.n()).map(|p| edge_mask(&self.torus.plaquette_edges(p))).collect()
    }

    /// Eigenvalue of `B_p` on basis state `z`.
    pub fn flux_of(&self, z: usize, p: usize) -> i8 {
        if (z & edge_mask(&self.torus.plaquette_edges(p))).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn apply_pauli_x(&self, edges: &[usize]) -> DenseState {
        let m = edge_mask(edges);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (z, a) in self.amps.iter().enumerate() {
            out[z ^ m] = *a;
        }
        DenseState { torus: self.torus.clone(), amps: out }
    }

    pub fn apply_pauli_z(&self, edges: &[usize]) -> DenseState {
        let m = edge_mask(edges);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(z, a)| if (z & m).count_ones() % 2 == 1 { -a } else { *a })
            .collect();
        DenseState { torus: self.torus.clone(), amps }
    }

    /// Unnormalised `M_s |ψ⟩` with `M_s = Π_p (α + γ_p B_p)`.
    pub fn apply_measurement_operator(&self, outcomes: &[i8], beta: f64) -> DenseState {
        let coef = weak_measurement_coefficients(beta, outcomes);
        let masks = self.plaquette_masks();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(z, a)| {
                let f: f64 = masks
                    .iter()
                    .zip(&coef)
                    .map(|(m, (al, ga))| if (z & m).count_ones() % 2 == 0 { al + ga } else { al - ga })
                    .product();
                a * f
            })
            .collect();
        DenseState { torus: self.torus.clone(), amps }
    }

    pub fn apply_weak_measurement(&self, outcomes: &[i8], beta: f64) -> Branch {
        let mut state = self.apply_measurement_operator(outcomes, beta);
        let probability = state.norm_sqr();
        let is_null = probability < 1e-300;
        if !is_null {
            state.normalize();
        }
        Branch { state, probability, is_null }
    }
}

/// Result of a measurement branch; `is_null` marks a probability-0 outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub state: DenseState,
    pub probability: f64,
    pub is_null: bool,
}

/// `|~++⟩, |~-+⟩, |~+-⟩, |~--⟩`, indexed `l1 + 2 l2` by the applied Z logicals.
pub fn build_imperfect_logicals(torus: &Torus2D, beta0: f64) -> Result<[DenseState; 4]> {
    let plus = DenseState::plus(torus)?;
    let ones = vec![1i8; torus.n()];
    let mut base = plus.apply_measurement_operator(&ones, beta0);
    base.normalize();
    let z1 = torus.reference_cycle(0);
    let z2 = torus.reference_cycle(1);
    let s1 = base.apply_pauli_z(&z1);
    let s2 = base.apply_pauli_z(&z2);
    let s3 = s1.apply_pauli_z(&z2);
    Ok([base, s1, s2, s3])
}

/// `(|~++⟩ + |~+-⟩ + |~-+⟩ + |~--⟩)/2`, the imperfect logical `00` state.
pub fn imperfect_logical_zero(torus: &Torus2D, beta0: f64) -> Result<DenseState> {
    let ls = build_imperfect_logicals(torus, beta0)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); ls[0].amps.len()];
    for l in &ls {
        for (a, b) in amps.iter_mut().zip(&l.amps) {
            *a += b * 0.5;
        }
    }
    Ok(DenseState { torus: torus.clone(), amps })
}

/// Unnormalised `Π_t M_{s(t)} X(t) |ψ⟩`.
pub fn evolve(
    initial: &DenseState,
    pauli: &PauliHistory,
    syndromes: &SyndromeHistory,
    params: &NoiseParams,
    st: &Spacetime3D,
) -> DenseState {
    let layers = Layers::from_noise(params, st);
    let n = st.n();
    let mut state = initial.clone();
    for t in 0..st.t_steps() {
        let flips: Vec<usize> = (0..pauli.n_edges).filter(|&e| pauli.get(e, t) < 0).collect();
        state = state.apply_pauli_x(&flips);
        state = state.apply_measurement_operator(&syndromes.s[t * n..(t + 1) * n], layers.beta[t]);
    }
    state
}

/// `‖Π_t M X |ψ⟩‖²`: probability of the syndrome history given the Pauli history.
pub fn trajectory_probability(
    initial: &DenseState,
    pauli: &PauliHistory,
    syndromes: &SyndromeHistory,
    params: &NoiseParams,
    st: &Spacetime3D,
) -> f64 {
    evolve(initial, pauli, syndromes, params, st).norm_sqr()
}

/// `|⟨ψ| C Π_t M X |ψ⟩|² / ‖Π_t M X |ψ⟩‖²`; `None` for a probability-0 trajectory.
pub fn protocol_fidelity(
    initial: &DenseState,
    pauli: &PauliHistory,
    syndromes: &SyndromeHistory,
    correction: &[usize],
    params: &NoiseParams,
    st: &Spacetime3D,
) -> Option<f64> {
    let fin = evolve(initial, pauli, syndromes, params, st).apply_pauli_x(correction);
    let norm = fin.norm_sqr();
    if norm < 1e-300 {
        return None;
    }
    Some(initial.inner(&fin).norm_sqr() / (norm * initial.norm_sqr()))
}
