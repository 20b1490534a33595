//! The physical error model: rates, samplers for Pauli and syndrome histories,
//! the exact history probability, and conversion to gauge-model disorder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Plaq3, Spacetime3D, TimeBoundary, Torus2D};
use crate::parity::{even_parity_logsum, flip_prob, ln_aligned_pair};

/// Physical rates. Strengths are dimensionless and may be `f64::INFINITY` (ideal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Preparation measurement strength.
    pub beta0: f64,
    /// Syndrome measurement strength.
    pub beta: f64,
    /// Pauli coupling, tied to `q` by `K = -ln(q/(1-q))/2`.
    pub k: f64,
    /// X error rate per qubit per step.
    pub q: f64,
    /// Evolution angle of the measurement gadget, if the strength was given that way.
    pub angle: Option<f64>,
}

impl NoiseParams {
    /// From strengths and the Pauli coupling.
    pub fn new(beta0: f64, beta: f64, k: f64) -> Result<Self> {
        let p = NoiseParams { beta0, beta, k, q: flip_prob(k), angle: None };
        p.validate()?;
        Ok(p)
    }

    /// From strengths and the Pauli rate.
    pub fn with_rate(beta0: f64, beta: f64, q: f64) -> Result<Self> {
        let k = k_from_q(q)?;
        let p = NoiseParams { beta0, beta, k, q, angle: None };
        p.validate()?;
        Ok(p)
    }

    /// Replace the syndrome strength by the one implied by the gadget angle.
    pub fn with_angle(mut self, t: f64) -> Result<Self> {
        self.beta = beta_from_angle(t)?;
        self.angle = Some(t);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta0", self.beta0), ("beta", self.beta), ("K", self.k)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Param(format!("{name}={v} must be >= 0")));
            }
        }
        if !(0.0..=0.5).contains(&self.q) {
            return Err(Error::Param(format!("q={} must lie in [0, 1/2]", self.q)));
        }
        let kq = k_from_q(self.q)?;
        let tol = 1e-9 * (1.0 + self.k.abs());
        if !(kq == self.k || (kq - self.k).abs() < tol) {
            return Err(Error::Param(format!("K={} inconsistent with q={}", self.k, self.q)));
        }
        if let Some(t) = self.angle {
            let b = beta_from_angle(t)?;
            if !(b == self.beta || (b - self.beta).abs() < 1e-9 * (1.0 + b)) {
                return Err(Error::Param(format!("beta={} inconsistent with angle {t}", self.beta)));
            }
        }
        Ok(())
    }
}

/// `β = 2 artanh(tan t)` for the gadget angle `t ∈ [0, π/4]`.
pub fn beta_from_angle(t: f64) -> Result<f64> {
    let quarter = std::f64::consts::FRAC_PI_4;
    if !(0.0..=quarter + 1e-15).contains(&t) {
        return Err(Error::Param(format!("angle t={t} outside [0, pi/4]")));
    }
    if (t - quarter).abs() < 1e-15 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * t.tan().atanh())
}

/// `K = -ln(q/(1-q))/2`; `q = 0` maps to `+∞`.
pub fn k_from_q(q: f64) -> Result<f64> {
    if q.is_nan() || !(0.0..=0.5).contains(&q) {
        return Err(Error::Param(format!("Pauli rate q={q} outside [0, 1/2]")));
    }
    if q == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * (q / (1.0 - q)).ln())
}

/// Per-layer couplings after applying the time boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    pub beta0: f64,
    /// Readout strength of round t.
    pub beta: Vec<f64>,
    /// Pauli coupling of step t.
    pub k: Vec<f64>,
}

impl Layers {
    pub fn new(beta0: f64, beta: f64, k: f64, st: &Spacetime3D) -> Self {
        let tt = st.t_steps();
        let mut bl = vec![beta; tt];
        let mut kl = vec![k; tt];
        match st.time_boundary() {
            TimeBoundary::Open => {}
            TimeBoundary::IdealFinalRound => bl[tt - 1] = f64::INFINITY,
            TimeBoundary::FreeStart => kl[0] = 0.0,
        }
        Layers { beta0, beta: bl, k: kl }
    }

    pub fn from_noise(p: &NoiseParams, st: &Spacetime3D) -> Self {
        Layers::new(p.beta0, p.beta, p.k, st)
    }

    pub fn t_steps(&self) -> usize {
        self.beta.len()
    }
}

/// `x_e(t) = -1` where an X error acts at step t. Indexed `t * 2N + e`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliHistory {
    pub n_edges: usize,
    pub t_steps: usize,
    pub x: Vec<i8>,
}

impl PauliHistory {
    pub fn identity(st: &Spacetime3D) -> Self {
        PauliHistory { n_edges: st.torus().n_edges(), t_steps: st.t_steps(), x: vec![1; st.n_space_edges()] }
    }

    pub fn get(&self, e: usize, t: usize) -> i8 {
        self.x[t * self.n_edges + e]
    }

    pub fn set(&mut self, e: usize, t: usize, v: i8) {
        self.x[t * self.n_edges + e] = v;
    }

    /// Edges hit an odd number of times over the whole history.
    pub fn total(&self) -> Vec<usize> {
        (0..self.n_edges)
            .filter(|&e| (0..self.t_steps).filter(|&t| self.get(e, t) < 0).count() % 2 == 1)
            .collect()
    }

    /// Decode from the low `2N·T` bits of `mask` (bit set = error).
    pub fn from_mask(st: &Spacetime3D, mask: u64) -> Self {
        let mut h = Self::identity(st);
        for (i, v) in h.x.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *v = -1;
            }
        }
        h
    }

    pub fn n_errors(&self) -> usize {
        self.x.iter().filter(|&&v| v < 0).count()
    }
}

/// `s_p(t) = ±1` readout of plaquette p in round t. Indexed `t * N + p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyndromeHistory {
    pub n: usize,
    pub t_steps: usize,
    pub s: Vec<i8>,
}

impl SyndromeHistory {
    pub fn trivial(st: &Spacetime3D) -> Self {
        SyndromeHistory { n: st.n(), t_steps: st.t_steps(), s: vec![1; st.n_space_plaquettes()] }
    }

    pub fn get(&self, p: usize, t: usize) -> i8 {
        self.s[t * self.n + p]
    }

    pub fn from_mask(st: &Spacetime3D, mask: u64) -> Self {
        let mut h = Self::trivial(st);
        for (i, v) in h.s.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *v = -1;
            }
        }
        h
    }
}

/// Eigenvalues `b_p` of the plaquette stabilizers; `Π_p b_p = +1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FluxConfig {
    pub b: Vec<i8>,
}

impl FluxConfig {
    pub fn trivial(n: usize) -> Self {
        FluxConfig { b: vec![1; n] }
    }

    pub fn is_even(&self) -> bool {
        self.b.iter().filter(|&&v| v < 0).count() % 2 == 0
    }
}

/// Interaction signs `η` on the 3D plaquettes, indexed like [`Spacetime3D::plaq_index`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DisorderConfig {
    pub eta: Vec<i8>,
}

impl DisorderConfig {
    pub fn clean(st: &Spacetime3D) -> Self {
        DisorderConfig { eta: vec![1; st.n_plaquettes()] }
    }

    pub fn space(&self, st: &Spacetime3D, p: usize, t: usize) -> i8 {
        self.eta[st.plaq_index(Plaq3::Space { p, t })]
    }

    pub fn time(&self, st: &Spacetime3D, e: usize, t: usize) -> i8 {
        self.eta[st.plaq_index(Plaq3::Time { e, t })]
    }
}

/// Cumulative flux flips `f_p(t) = Π_{k≤t} Π_{e∈∂p} x_e(k)`, indexed `t * N + p`.
pub fn flux_flips(pauli: &PauliHistory, st: &Spacetime3D) -> Vec<i8> {
    let n = st.n();
    let tor = st.torus();
    let mut f = vec![1i8; n * st.t_steps()];
    let mut cur = vec![1i8; n];
    for t in 0..st.t_steps() {
        for e in 0..tor.n_edges() {
            if pauli.get(e, t) < 0 {
                for p in tor.edge_plaquettes(e) {
                    cur[p] = -cur[p];
                }
            }
        }
        f[t * n..(t + 1) * n].copy_from_slice(&cur);
    }
    f
}

fn sign(flip: bool) -> i8 {
    if flip {
        -1
    } else {
        1
    }
}

/// Constrained flux prior `P(b) ∝ exp(β0 Σ b)`, `Π b = +1`, by rejection.
///
/// Returns the flux and the number of rejected odd-parity draws.
pub fn sample_initial_flux<R: Rng + ?Sized>(beta0: f64, torus: &Torus2D, rng: &mut R) -> (FluxConfig, usize) {
    let pf = flip_prob(beta0);
    let mut rejected = 0;
    loop {
        let b: Vec<i8> = (0..torus.n()).map(|_| sign(rng.random_bool(pf))).collect();
        let flux = FluxConfig { b };
        if flux.is_even() {
            return (flux, rejected);
        }
        rejected += 1;
    }
}

pub fn sample_pauli_history<R: Rng + ?Sized>(params: &NoiseParams, st: &Spacetime3D, rng: &mut R) -> PauliHistory {
    let layers = Layers::from_noise(params, st);
    let mut h = PauliHistory::identity(st);
    let ne = st.torus().n_edges();
    for t in 0..st.t_steps() {
        let q = flip_prob(layers.k[t]);
        for e in 0..ne {
            if rng.random_bool(q) {
                h.set(e, t, -1);
            }
        }
    }
    h
}

/// Noisy readouts of the evolving flux `b(t) = b(0) f(t)`.
pub fn sample_syndrome_history<R: Rng + ?Sized>(
    pauli: &PauliHistory,
    flux0: &FluxConfig,
    params: &NoiseParams,
    st: &Spacetime3D,
    rng: &mut R,
) -> SyndromeHistory {
    let layers = Layers::from_noise(params, st);
    let f = flux_flips(pauli, st);
    let n = st.n();
    let mut s = SyndromeHistory::trivial(st);
    for t in 0..st.t_steps() {
        let pm = flip_prob(layers.beta[t]);
        for p in 0..n {
            let b = flux0.b[p] * f[t * n + p];
            s.s[t * n + p] = if rng.random_bool(pm) { -b } else { b };
        }
    }
    s
}

/// One full physical trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub flux0: FluxConfig,
    pub pauli: PauliHistory,
    pub syndromes: SyndromeHistory,
    pub rejected: usize,
}

pub fn sample_trajectory<R: Rng + ?Sized>(params: &NoiseParams, st: &Spacetime3D, rng: &mut R) -> Trajectory {
    let (flux0, rejected) = sample_initial_flux(params.beta0, st.torus(), rng);
    let pauli = sample_pauli_history(params, st, rng);
    let syndromes = sample_syndrome_history(&pauli, &flux0, params, st, rng);
    Trajectory { flux0, pauli, syndromes, rejected }
}

/// `ln P(x)` of a Pauli history under i.i.d. X errors.
pub fn pauli_log_probability(pauli: &PauliHistory, params: &NoiseParams, st: &Spacetime3D) -> f64 {
    let layers = Layers::from_noise(params, st);
    let mut lp = 0.0;
    for t in 0..st.t_steps() {
        let (a, f) = ln_aligned_pair(layers.k[t]);
        for e in 0..pauli.n_edges {
            lp += if pauli.get(e, t) < 0 { f } else { a };
        }
    }
    lp
}

/// Exact `ln P(s | x)`, marginalised over the constrained initial flux.
pub fn history_probability(
    syndromes: &SyndromeHistory,
    pauli: &PauliHistory,
    params: &NoiseParams,
    st: &Spacetime3D,
) -> f64 {
    let layers = Layers::from_noise(params, st);
    let n = st.n();
    let f = flux_flips(pauli, st);
    let (prior_up, prior_down) = ln_aligned_pair(layers.beta0);
    let readout: Vec<(f64, f64)> = layers.beta.iter().map(|&b| ln_aligned_pair(b)).collect();
    let cols = (0..n).map(|p| {
        let (mut lp, mut lm) = (prior_up, prior_down);
        for t in 0..st.t_steps() {
            let sf = syndromes.s[t * n + p] * f[t * n + p];
            let (agree, disagree) = readout[t];
            if sf > 0 {
                lp += agree;
                lm += disagree;
            } else {
                lp += disagree;
                lm += agree;
            }
        }
        (lp, lm)
    });
    let tanh_n = if layers.beta0 == f64::INFINITY { 1.0 } else { layers.beta0.tanh().powi(n as i32) };
    even_parity_logsum(cols) - (tanh_n.ln_1p() - std::f64::consts::LN_2)
}

/// `η` for spacelike plaquette (p,t) is `s_p(t) f_p(t)`; for timelike (e,t) it is `x_e(t)`.
pub fn syndromes_to_disorder(syndromes: &SyndromeHistory, pauli: &PauliHistory, st: &Spacetime3D) -> DisorderConfig {
    let f = flux_flips(pauli, st);
    let ns = st.n_space_plaquettes();
    let mut eta = Vec::with_capacity(st.n_plaquettes());
    eta.extend((0..ns).map(|i| syndromes.s[i] * f[i]));
    eta.extend(pauli.x.iter().copied());
    DisorderConfig { eta }
}

/// Inverse of [`syndromes_to_disorder`] for the spacelike part.
pub fn disorder_to_syndromes(disorder: &DisorderConfig, pauli: &PauliHistory, st: &Spacetime3D) -> SyndromeHistory {
    let f = flux_flips(pauli, st);
    let ns = st.n_space_plaquettes();
    SyndromeHistory { n: st.n(), t_steps: st.t_steps(), s: (0..ns).map(|i| disorder.eta[i] * f[i]).collect() }
}

/// Disorder of the syndrome class with no Pauli errors: `η_ps = s`, `η_pt = +1`.
pub fn reference_disorder(syndromes: &SyndromeHistory, st: &Spacetime3D) -> DisorderConfig {
    syndromes_to_disorder(syndromes, &PauliHistory::identity(st), st)
}

/// Amplitude pair `(α, γ_p)` of `M = Π_p (α + γ_p B_p)`:
/// `α = cosh(β/2)/√(2cosh β)`, `γ_p = s_p sinh(β/2)/√(2cosh β)`.
pub fn weak_measurement_coefficients(beta: f64, outcomes: &[i8]) -> Vec<(f64, f64)> {
    let (a, g) = if beta == f64::INFINITY {
        (0.5, 0.5)
    } else {
        let x = (-beta).exp();
        let den = 2.0 * (1.0 + x * x).sqrt();
        ((1.0 + x) / den, (1.0 - x) / den)
    };
    outcomes.iter().map(|&s| (a, g * s as f64)).collect()
}

/// Marginal rate of spacelike disorder flips `P(η_ps = -1)` in round 0:
/// a readout disagreeing with the Pauli-only flux, from the prior flux or readout noise.
pub fn marginal_readout_flip_rate(params: &NoiseParams, torus: &Torus2D) -> f64 {
    let n = torus.n() as i32;
    let pm = flip_prob(params.beta);
    let pb = if params.beta0 == f64::INFINITY {
        0.0
    } else {
        // P(b_p = -1) under the parity constraint.
        let th = params.beta0.tanh();
        flip_prob(params.beta0) * (1.0 - th.powi(n - 1)) / (1.0 + th.powi(n))
    };
    pb * (1.0 - pm) + (1.0 - pb) * pm
}
