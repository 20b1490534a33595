//! The disordered Z2 gauge model: energy, local updates, gauge transforms,
//! logical defects, and the exact trace over the 2D spins.
//!
//! Weights are written as `exp(-E)` with
//! `E = -[β0 Σ_p b_p + Σ_{p,t} β_t b_p η_ps U_ps + Σ_{e,t} K_t η_pt U_pt]`,
//! `b_p = Π_{e∈∂p} σ_e`.

use rand::Rng;

use crate::lattice::{Edge3, HomologyClass, Plaq3, Spacetime3D};
use crate::noise::{DisorderConfig, Layers, NoiseParams};
use crate::parity::{even_parity_log, even_parity_logsum, ColumnWeight};

/// Couplings of the gauge model; equal to the noise rates on the Nishimori line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta0: f64,
    pub beta: f64,
    pub k: f64,
}

impl ModelParams {
    pub fn new(beta0: f64, beta: f64, k: f64) -> Self {
        ModelParams { beta0, beta, k }
    }

    pub fn from_noise(p: &NoiseParams) -> Self {
        ModelParams { beta0: p.beta0, beta: p.beta, k: p.k }
    }

    pub fn is_nishimori(&self, p: &NoiseParams) -> bool {
        *self == Self::from_noise(p)
    }

    pub fn layers(&self, st: &Spacetime3D) -> Layers {
        Layers::new(self.beta0, self.beta, self.k, st)
    }
}

/// σ on the 2D edges, τ on the 3D edges (indexed like [`Spacetime3D::edge_index`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    pub sigma: Vec<i8>,
    pub tau: Vec<i8>,
}

impl SpinConfig {
    pub fn all_up(st: &Spacetime3D) -> Self {
        SpinConfig { sigma: vec![1; st.torus().n_edges()], tau: vec![1; st.n_edges()] }
    }

    pub fn random<R: Rng + ?Sized>(st: &Spacetime3D, rng: &mut R) -> Self {
        let mut c = Self::all_up(st);
        c.sigma.iter_mut().chain(c.tau.iter_mut()).for_each(|v| {
            if rng.random_bool(0.5) {
                *v = -1
            }
        });
        c
    }

    pub fn flux(&self, st: &Spacetime3D) -> Vec<i8> {
        let tor = st.torus();
        (0..tor.n()).map(|p| tor.plaquette_edges(p).iter().map(|&e| self.sigma[e]).product()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinId {
    Sigma(usize),
    Tau(usize),
}

pub fn energy(spins: &SpinConfig, disorder: &DisorderConfig, params: &ModelParams, st: &Spacetime3D) -> f64 {
    let l = params.layers(st);
    let b = spins.flux(st);
    let mut e = -l.beta0 * b.iter().map(|&v| v as f64).sum::<f64>();
    for pl in 0..st.n_plaquettes() {
        let u = (disorder.eta[pl] * st.holonomy(&spins.tau, pl)) as f64;
        e -= match st.plaq(pl) {
            Plaq3::Space { p, t } => l.beta[t] * b[p] as f64 * u,
            Plaq3::Time { t, .. } => l.k[t] * u,
        };
    }
    e
}

fn plaquette_coupling(l: &Layers, st: &Spacetime3D, pl: usize, b: &[i8]) -> f64 {
    match st.plaq(pl) {
        Plaq3::Space { p, t } => l.beta[t] * b[p] as f64,
        Plaq3::Time { t, .. } => l.k[t],
    }
}

/// `E(after) - E(before)` for a single spin flip.
pub fn delta_energy(
    spins: &SpinConfig,
    disorder: &DisorderConfig,
    params: &ModelParams,
    st: &Spacetime3D,
    flip: SpinId,
) -> f64 {
    let l = params.layers(st);
    let b = spins.flux(st);
    match flip {
        SpinId::Sigma(e) => st
            .torus()
            .edge_plaquettes(e)
            .iter()
            .map(|&p| {
                let mut col = l.beta0;
                for t in 0..st.t_steps() {
                    let pl = st.plaq_index(Plaq3::Space { p, t });
                    col += l.beta[t] * (disorder.eta[pl] * st.holonomy(&spins.tau, pl)) as f64;
                }
                2.0 * b[p] as f64 * col
            })
            .sum(),
        SpinId::Tau(i) => st
            .edge_plaqs(i)
            .iter()
            .map(|&pl| {
                let u = (disorder.eta[pl] * st.holonomy(&spins.tau, pl)) as f64;
                2.0 * plaquette_coupling(&l, st, pl, &b) * u
            })
            .sum(),
    }
}

/// Sum of all couplings; the exact log-weight equals the shifted one plus this.
pub fn ground_offset(l: &Layers, st: &Spacetime3D) -> f64 {
    let n = st.n() as f64;
    let sb: f64 = l.beta.iter().sum();
    let sk: f64 = l.k.iter().sum();
    n * l.beta0 + n * sb + 2.0 * n * sk
}

/// `J (x - 1)` for `x = ±1`, avoiding `0 · ∞`.
#[inline]
pub fn shifted_term(j: f64, x: i8) -> f64 {
    if x > 0 {
        0.0
    } else {
        -2.0 * j
    }
}

/// Column weights `(ln w(b=+1), ln w(b=-1))` relative to full alignment, from the
/// signs `η_ps U_ps` of each round.
#[inline]
pub fn column_weight(l: &Layers, signs: impl Iterator<Item = i8>) -> ColumnWeight {
    let mut lp = 0.0;
    let mut lm = -2.0 * l.beta0;
    for (t, x) in signs.enumerate() {
        if x > 0 {
            lm -= 2.0 * l.beta[t];
        } else {
            lp -= 2.0 * l.beta[t];
        }
    }
    ColumnWeight::new(lp, lm)
}

/// `ln Σ_σ e^{-E}` minus [`ground_offset`]; finite for infinite couplings.
pub fn column_trace_shifted(tau: &[i8], disorder: &DisorderConfig, l: &Layers, st: &Spacetime3D) -> f64 {
    let n = st.n();
    let cols: Vec<ColumnWeight> = (0..n)
        .map(|p| {
            column_weight(
                l,
                (0..st.t_steps()).map(|t| {
                    let pl = st.plaq_index(Plaq3::Space { p, t });
                    disorder.eta[pl] * st.holonomy(tau, pl)
                }),
            )
        })
        .collect();
    let mut acc = (n as f64 + 1.0) * std::f64::consts::LN_2 + even_parity_log(&cols);
    for pl in st.n_space_plaquettes()..st.n_plaquettes() {
        if let Plaq3::Time { t, .. } = st.plaq(pl) {
            acc += shifted_term(l.k[t], disorder.eta[pl] * st.holonomy(tau, pl));
        }
    }
    acc
}

/// Exact `ln Σ_σ e^{-E(σ, τ)}` for finite couplings:
/// `ln[2^{N+1} (Π 2cosh λ_p + Π 2sinh λ_p)/2] + Σ K η U`,
/// `λ_p = β0 + Σ_t β_t η_ps U_ps`.
pub fn column_trace(tau: &[i8], disorder: &DisorderConfig, params: &ModelParams, st: &Spacetime3D) -> f64 {
    let l = params.layers(st);
    let n = st.n();
    let lam: Vec<f64> = (0..n)
        .map(|p| {
            let mut v = l.beta0;
            for t in 0..st.t_steps() {
                let pl = st.plaq_index(Plaq3::Space { p, t });
                v += l.beta[t] * (disorder.eta[pl] * st.holonomy(tau, pl)) as f64;
            }
            v
        })
        .collect();
    if lam.iter().any(|v| !v.is_finite()) || l.k.iter().any(|v| !v.is_finite()) {
        return column_trace_shifted(tau, disorder, &l, st) + ground_offset(&l, st);
    }
    let mut acc = (n as f64 + 1.0) * std::f64::consts::LN_2 + even_parity_logsum(lam.iter().map(|&v| (v, -v)));
    for pl in st.n_space_plaquettes()..st.n_plaquettes() {
        if let Plaq3::Time { t, .. } = st.plaq(pl) {
            acc += l.k[t] * (disorder.eta[pl] * st.holonomy(tau, pl)) as f64;
        }
    }
    acc
}

/// Sign flips on timelike plaquettes of one step along minimal dual winding cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogicalDefect {
    pub class: HomologyClass,
    pub step: usize,
}

impl LogicalDefect {
    pub fn plaquettes(&self, st: &Spacetime3D) -> Vec<usize> {
        let mut edges = Vec::new();
        if self.class.w1 {
            edges.extend(st.torus().dual_winding_cycle(0));
        }
        if self.class.w2 {
            edges.extend(st.torus().dual_winding_cycle(1));
        }
        edges.iter().map(|&e| st.plaq_index(Plaq3::Time { e, t: self.step })).collect()
    }
}

pub fn apply_defect(disorder: &DisorderConfig, defect: &LogicalDefect, st: &Spacetime3D) -> DisorderConfig {
    let mut out = disorder.clone();
    for pl in defect.plaquettes(st) {
        out.eta[pl] = -out.eta[pl];
    }
    out
}

/// `ν` on the 3D edges: `τ → τ ν`, `η_p → η_p Π_{e∈∂p} ν_e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeTransform {
    pub nu: Vec<i8>,
}

impl GaugeTransform {
    pub fn random<R: Rng + ?Sized>(st: &Spacetime3D, rng: &mut R) -> Self {
        GaugeTransform { nu: (0..st.n_edges()).map(|_| if rng.random_bool(0.5) { -1 } else { 1 }).collect() }
    }

    /// The pure-gauge flip generated at vertex `v` of layer `t`.
    pub fn at_vertex(st: &Spacetime3D, v: usize, t: usize) -> Self {
        let mut nu = vec![1; st.n_edges()];
        for e in st.vertex_edges(v, t) {
            nu[e] = -1;
        }
        GaugeTransform { nu }
    }

    pub fn apply_disorder(&self, disorder: &DisorderConfig, st: &Spacetime3D) -> DisorderConfig {
        DisorderConfig {
            eta: (0..st.n_plaquettes()).map(|pl| disorder.eta[pl] * st.holonomy(&self.nu, pl)).collect(),
        }
    }

    pub fn apply_spins(&self, spins: &SpinConfig) -> SpinConfig {
        SpinConfig {
            sigma: spins.sigma.clone(),
            tau: spins.tau.iter().zip(&self.nu).map(|(a, b)| a * b).collect(),
        }
    }
}

/// Index of the timelike edge `(v, t)`.
pub fn time_edge(st: &Spacetime3D, v: usize, t: usize) -> usize {
    st.edge_index(Edge3::Time { v, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{TimeBoundary, Torus2D};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(d: usize, t: usize) -> Spacetime3D {
        Spacetime3D::new(Torus2D::new(d).unwrap(), t, TimeBoundary::Open).unwrap()
    }

    fn random_disorder(st: &Spacetime3D, rng: &mut ChaCha8Rng) -> DisorderConfig {
        DisorderConfig { eta: (0..st.n_plaquettes()).map(|_| if rng.random_bool(0.3) { -1 } else { 1 }).collect() }
    }

    #[test]
    fn clean_ground_state_energy() {
        let s = st(3, 2);
        let p = ModelParams::new(0.7, 1.1, 1.3);
        let e = energy(&SpinConfig::all_up(&s), &DisorderConfig::clean(&s), &p, &s);
        let n = 9.0;
        assert!((e + (0.7 * n + 1.1 * n * 2.0 + 1.3 * 2.0 * n * 2.0)).abs() < 1e-12);
        let mut up = SpinConfig::all_up(&s);
        up.tau[time_edge(&s, 4, 1)] = -1;
        let e2 = energy(&up, &DisorderConfig::clean(&s), &p, &s);
        assert!((e2 - e - 2.0 * 1.3 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn delta_energy_matches_recompute() {
        let s = st(2, 2);
        let p = ModelParams::new(0.9, 1.2, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dis = random_disorder(&s, &mut rng);
        let mut spins = SpinConfig::random(&s, &mut rng);
        let n_sigma = s.torus().n_edges();
        for _ in 0..1000 {
            let k = rng.random_range(0..n_sigma + s.n_edges());
            let id = if k < n_sigma { SpinId::Sigma(k) } else { SpinId::Tau(k - n_sigma) };
            let before = energy(&spins, &dis, &p, &s);
            let de = delta_energy(&spins, &dis, &p, &s, id);
            match id {
                SpinId::Sigma(e) => spins.sigma[e] = -spins.sigma[e],
                SpinId::Tau(e) => spins.tau[e] = -spins.tau[e],
            }
            let after = energy(&spins, &dis, &p, &s);
            assert!((after - before - de).abs() < 1e-10);
            let back = delta_energy(&spins, &dis, &p, &s, id);
            assert!((back + de).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_flip_touches_two_columns() {
        let s = st(3, 2);
        let mut spins = SpinConfig::all_up(&s);
        let before = spins.flux(&s);
        spins.sigma[7] = -1;
        let after = spins.flux(&s);
        let changed: Vec<usize> = (0..9).filter(|&p| before[p] != after[p]).collect();
        let mut want = s.torus().edge_plaquettes(7).to_vec();
        want.sort();
        assert_eq!(changed, want);
    }

    #[test]
    fn column_trace_matches_sigma_sum() {
        let s = st(2, 2);
        let p = ModelParams::new(0.6, 0.9, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let dis = random_disorder(&s, &mut rng);
            let tau = SpinConfig::random(&s, &mut rng).tau;
            let mut terms = Vec::new();
            for m in 0..256u32 {
                let sigma: Vec<i8> = (0..8).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect();
                terms.push(-energy(&SpinConfig { sigma, tau: tau.clone() }, &dis, &p, &s));
            }
            let brute = crate::parity::log_sum(&terms);
            let got = column_trace(&tau, &dis, &p, &s);
            assert!((got - brute).abs() < 1e-9 * brute.abs().max(1.0));
            let shifted = column_trace_shifted(&tau, &dis, &p.layers(&s), &s) + ground_offset(&p.layers(&s), &s);
            assert!((shifted - got).abs() < 1e-9 * got.abs().max(1.0));
        }
    }

    #[test]
    fn column_trace_limits() {
        let s = st(2, 1);
        let zero = ModelParams::new(0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dis = random_disorder(&s, &mut rng);
        let tau = SpinConfig::random(&s, &mut rng).tau;
        assert!((column_trace(&tau, &dis, &zero, &s) - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn energy_is_gauge_invariant() {
        let s = st(2, 3);
        let p = ModelParams::new(0.6, 0.9, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let dis = random_disorder(&s, &mut rng);
            let spins = SpinConfig::random(&s, &mut rng);
            let g = GaugeTransform::random(&s, &mut rng);
            let e1 = energy(&spins, &dis, &p, &s);
            let e2 = energy(&g.apply_spins(&spins), &g.apply_disorder(&dis, &s), &p, &s);
            assert!((e1 - e2).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_is_translation_invariant() {
        let s = st(3, 2);
        let p = ModelParams::new(0.6, 0.9, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tor = s.torus().clone();
        let shift_edge = |e: usize| {
            let (x, y) = tor.coords(e / 2);
            2 * tor.site(x + 1, y + 2) + e % 2
        };
        for _ in 0..20 {
            let spins = SpinConfig::random(&s, &mut rng);
            let mut moved = spins.clone();
            for e in 0..tor.n_edges() {
                moved.sigma[shift_edge(e)] = spins.sigma[e];
            }
            for i in 0..s.n_edges() {
                let j = match s.edge(i) {
                    Edge3::Space { e, t } => s.edge_index(Edge3::Space { e: shift_edge(e), t }),
                    Edge3::Time { v, t } => {
                        let (x, y) = tor.coords(v);
                        s.edge_index(Edge3::Time { v: tor.site(x + 1, y + 2), t })
                    }
                };
                moved.tau[j] = spins.tau[i];
            }
            let dis = DisorderConfig::clean(&s);
            assert!((energy(&spins, &dis, &p, &s) - energy(&moved, &dis, &p, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn defects() {
        let s = st(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dis = random_disorder(&s, &mut rng);
        let def = LogicalDefect { class: HomologyClass::from_index(3), step: 1 };
        assert_eq!(apply_defect(&apply_defect(&dis, &def, &s), &def, &s), dis);
        // A winding defect frustrates d timelike plaquettes of the aligned configuration.
        let p = ModelParams::new(5.0, 5.0, 5.0);
        let one = LogicalDefect { class: HomologyClass::from_index(1), step: 1 };
        let with = apply_defect(&DisorderConfig::clean(&s), &one, &s);
        let e0 = energy(&SpinConfig::all_up(&s), &DisorderConfig::clean(&s), &p, &s);
        let e1 = energy(&SpinConfig::all_up(&s), &with, &p, &s);
        assert!((e1 - e0 - 2.0 * 5.0 * 3.0).abs() < 1e-12);
    }
}
