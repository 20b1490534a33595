//! Decoders and quantum-error-correction experiments.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use mwmatching::{Matching, SENTINEL};
use rayon::prelude::*;

use crate::exact::{class_log_probabilities, EnumBudget};
use crate::lattice::{HomologyClass, Spacetime3D, TimeBoundary, Torus2D};
use crate::mc::Estimate;
use crate::noise::{
    flux_flips, marginal_readout_flip_rate, sample_trajectory, Layers, NoiseParams, PauliHistory, SyndromeHistory,
};
use crate::parity::{even_parity_logsum, flip_prob};
use crate::smmodel::ModelParams;
use crate::{seeded_rng, Error, Result};

/// Relative tolerance under which two class probabilities count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Class attributed to the total Pauli history; equals the class of `correction`.
    pub class: HomologyClass,
    pub log_probs: Option<[f64; 4]>,
    /// Edges to flip at the end.
    pub correction: Vec<usize>,
    /// Hypothesised Pauli errors `(edge, step)`.
    pub space_chain: Vec<(usize, usize)>,
    /// Hypothesised readout errors `(plaquette, round)`.
    pub time_chain: Vec<(usize, usize)>,
}

impl DecodeResult {
    pub fn success(&self, pauli: &PauliHistory, torus: &Torus2D) -> bool {
        let mut odd = vec![false; torus.n_edges()];
        for e in pauli.total().into_iter().chain(self.correction.iter().copied()) {
            odd[e] ^= true;
        }
        let resid: Vec<usize> = (0..odd.len()).filter(|&e| odd[e]).collect();
        torus.crossing_class(&resid).is_trivial()
    }
}

/// Index of the largest entry; entries within [`TIE_TOLERANCE`] of it go to the lowest index,
/// so ties favour the trivial class.
pub fn argmax_class(log_probs: &[f64; 4]) -> HomologyClass {
    let best = log_probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let i = (0..4).find(|&c| log_probs[c] >= best - tol).unwrap_or(0);
    HomologyClass::from_index(i)
}

/// Detection events `s_p(t) s_p(t-1)`, with the preparation round read as all `+1`.
pub fn detection_events(syndromes: &SyndromeHistory, st: &Spacetime3D) -> Vec<(usize, usize)> {
    let n = st.n();
    let mut out = Vec::new();
    for t in 0..st.t_steps() {
        for p in 0..n {
            let prev = if t == 0 { 1 } else { syndromes.s[(t - 1) * n + p] };
            if syndromes.s[t * n + p] * prev < 0 {
                out.push((p, t));
            }
        }
    }
    out
}

/// Detection events explained by a hypothesised chain of Pauli and readout errors.
pub fn chain_events(space: &[(usize, usize)], time: &[(usize, usize)], st: &Spacetime3D) -> Vec<(usize, usize)> {
    let n = st.n();
    let tt = st.t_steps();
    let mut odd = vec![false; n * tt];
    for &(e, t) in space {
        for p in st.torus().edge_plaquettes(e) {
            odd[t * n + p] ^= true;
        }
    }
    for &(p, t) in time {
        odd[t * n + p] ^= true;
        if t + 1 < tt {
            odd[(t + 1) * n + p] ^= true;
        }
    }
    (0..n * tt).filter(|&i| odd[i]).map(|i| (i % n, i / n)).collect()
}

fn correction_of(space: &[(usize, usize)], torus: &Torus2D) -> Vec<usize> {
    let mut odd = vec![false; torus.n_edges()];
    for &(e, _) in space {
        odd[e] ^= true;
    }
    (0..odd.len()).filter(|&e| odd[e]).collect()
}

/// Maximum-likelihood class from the exact class partition functions.
pub fn ml_decode(
    syndromes: &SyndromeHistory,
    params: &ModelParams,
    st: &Spacetime3D,
    budget: EnumBudget,
) -> Result<DecodeResult> {
    let log_probs = class_log_probabilities(syndromes, params, st, budget).map_err(|e| match e {
        Error::Budget { log2_needed, log2_budget, .. } => Error::Budget {
            log2_needed,
            log2_budget,
            hint: "maximum-likelihood decoding is exact only for tiny lattices; use mwpm_decode".into(),
        },
        other => other,
    })?;
    let class = argmax_class(&log_probs);
    // Representative: the matching chain, shifted by a logical to the chosen class.
    let layers = Layers::new(params.beta0, params.beta, params.k, st);
    let mut base = match_chain(syndromes, &layers, st)?;
    let have = st.torus().crossing_class(&correction_of(&base.0, st.torus()));
    let fix = have ^ class;
    let last = st.t_steps() - 1;
    if fix.w1 {
        base.0.extend(st.torus().dual_winding_cycle(0).into_iter().map(|e| (e, last)));
    }
    if fix.w2 {
        base.0.extend(st.torus().dual_winding_cycle(1).into_iter().map(|e| (e, last)));
    }
    let correction = correction_of(&base.0, st.torus());
    Ok(DecodeResult { class, log_probs: Some(log_probs), correction, space_chain: base.0, time_chain: base.1 })
}

/// Minimum-weight matching of detection events on the spacetime graph. Pauli
/// edges of step t cost `2K_t`, readout errors of round t cost `2β_t`; events
/// may pair with the open final boundary. Preparation flux is not modelled.
pub fn mwpm_decode(syndromes: &SyndromeHistory, params: &NoiseParams, st: &Spacetime3D) -> Result<DecodeResult> {
    let layers = Layers::from_noise(params, st);
    let (space, time) = match_chain(syndromes, &layers, st)?;
    let correction = correction_of(&space, st.torus());
    Ok(DecodeResult {
        class: st.torus().crossing_class(&correction),
        log_probs: None,
        correction,
        space_chain: space,
        time_chain: time,
    })
}

/// Scale from real path weights to the matcher's even integers.
const WEIGHT_SCALE: f64 = 1e4;

type Chain3 = (Vec<(usize, usize)>, Vec<(usize, usize)>);

#[derive(Clone, Copy)]
enum Step {
    Space(usize),
    Time,
    Top,
}

struct Paths {
    dist: Vec<f64>,
    prev: Vec<(usize, Step)>,
}

/// Dijkstra from node `src` over nodes `t*N + p`, plus the top boundary node `N*T`.
fn shortest_paths(src: usize, layers: &Layers, st: &Spacetime3D) -> Paths {
    let n = st.n();
    let tt = st.t_steps();
    let top = n * tt;
    let tor = st.torus();
    let mut dist = vec![f64::INFINITY; top + 1];
    let mut prev = vec![(usize::MAX, Step::Time); top + 1];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((dk, u))) = heap.pop() {
        let du = f64::from_bits(dk);
        if du > dist[u] || u == top {
            continue;
        }
        let (p, t) = (u % n, u / n);
        let mut relax = |v: usize, w: f64, step: Step, heap: &mut BinaryHeap<Reverse<(u64, usize)>>| {
            if w.is_finite() && du + w < dist[v] {
                dist[v] = du + w;
                prev[v] = (u, step);
                heap.push(Reverse(((du + w).to_bits(), v)));
            }
        };
        let ws = 2.0 * layers.k[t];
        for e in tor.plaquette_edges(p) {
            let [a, b] = tor.edge_plaquettes(e);
            let q = if a == p { b } else { a };
            relax(t * n + q, ws, Step::Space(e), &mut heap);
        }
        relax(if t + 1 < tt { (t + 1) * n + p } else { top }, 2.0 * layers.beta[t], if t + 1 < tt { Step::Time } else { Step::Top }, &mut heap);
        if t > 0 {
            relax((t - 1) * n + p, 2.0 * layers.beta[t - 1], Step::Time, &mut heap);
        }
    }
    Paths { dist, prev }
}

fn trace_path(paths: &Paths, src: usize, dst: usize, n: usize, chain: &mut Chain3) {
    let mut v = dst;
    while v != src {
        let (u, step) = paths.prev[v];
        match step {
            Step::Space(e) => chain.0.push((e, u / n)),
            // A readout error at round r sits between rounds r and r+1 (or the top).
            Step::Time => chain.1.push((u % n, (u / n).min(v / n))),
            Step::Top => chain.1.push((u % n, u / n)),
        }
        v = u;
    }
}

fn match_chain(syndromes: &SyndromeHistory, layers: &Layers, st: &Spacetime3D) -> Result<Chain3> {
    let n = st.n();
    let top = n * st.t_steps();
    let events: Vec<usize> = detection_events(syndromes, st).into_iter().map(|(p, t)| t * n + p).collect();
    let k = events.len();
    let mut chain = (Vec::new(), Vec::new());
    if k == 0 {
        return Ok(chain);
    }
    let paths: Vec<Paths> = events.iter().map(|&s| shortest_paths(s, layers, st)).collect();
    let scaled = |w: f64| 2 * (w * WEIGHT_SCALE / 2.0).round() as i64;
    let mut edges = Vec::new();
    let mut max_w = 0i64;
    for i in 0..k {
        for j in i + 1..k {
            let w = paths[i].dist[events[j]];
            if w.is_finite() {
                let s = scaled(w);
                max_w = max_w.max(s);
                edges.push((i, j, s));
            }
        }
        let w = paths[i].dist[top];
        if w.is_finite() {
            let s = scaled(w);
            max_w = max_w.max(s);
            edges.push((i, k + i, s));
        }
    }
    let big = max_w + 2;
    if big > i32::MAX as i64 / 4 {
        return Err(Error::Param("matching weights overflow the integer matcher".into()));
    }
    let mut m_edges: Vec<(usize, usize, i32)> = edges.into_iter().map(|(a, b, w)| (a, b, (big - w) as i32)).collect();
    for i in 0..k {
        for j in i + 1..k {
            m_edges.push((k + i, k + j, big as i32));
        }
    }
    let mate = Matching::new(m_edges).max_cardinality().solve();
    for i in 0..k {
        let m = mate.get(i).copied().unwrap_or(SENTINEL);
        if m == SENTINEL {
            return Err(Error::Param("detection events admit no perfect matching".into()));
        }
        if m >= k {
            trace_path(&paths[i], events[i], top, n, &mut chain);
        } else if m > i {
            trace_path(&paths[i], events[i], events[m], n, &mut chain);
        }
    }
    Ok(chain)
}

/// Checks that a decoded chain reproduces the observed detection events exactly.
pub fn closure_holds(result: &DecodeResult, syndromes: &SyndromeHistory, st: &Spacetime3D) -> bool {
    let mut want = detection_events(syndromes, st);
    let mut got = chain_events(&result.space_chain, &result.time_chain, st);
    want.sort_unstable();
    got.sort_unstable();
    want == got
}

/// Closed-form fidelity `|⟨ψ|C Π M X|ψ⟩|² / ‖Π M X|ψ⟩‖²` for the imperfect logical `00` state.
/// With `R` the residual `X_total ⊕ C`, `c_b = Π e^{β0 (b-1)/2}`, `a_b = Π_t Π_p e^{β_t (s f b - 1)/2}`:
/// `F = [R crosses no Z logical] (Σ_b c_b c_{b∂R} a_b)² / (Σ_b c_b² a_b² · Σ_b c_b²)`,
/// every sum over even flux configurations. `None` for a probability-0 history.
pub fn fast_fidelity(
    pauli: &PauliHistory,
    syndromes: &SyndromeHistory,
    correction: &[usize],
    params: &NoiseParams,
    st: &Spacetime3D,
) -> Option<f64> {
    let tor = st.torus();
    let n = st.n();
    let layers = Layers::from_noise(params, st);
    let f = flux_flips(pauli, st);
    let mut odd = vec![false; tor.n_edges()];
    for e in pauli.total().into_iter().chain(correction.iter().copied()) {
        odd[e] ^= true;
    }
    let resid: Vec<usize> = (0..odd.len()).filter(|&e| odd[e]).collect();
    let mut fr = vec![1i8; n];
    for p in tor.syndrome(&resid) {
        fr[p] = -1;
    }
    let half = |j: f64, x: i8| if x > 0 { 0.0 } else { -j };
    // ln a_b per plaquette for b = ±1.
    let ln_a: Vec<(f64, f64)> = (0..n)
        .map(|p| {
            let (mut up, mut dn) = (0.0, 0.0);
            for t in 0..st.t_steps() {
                let sf = syndromes.s[t * n + p] * f[t * n + p];
                up += half(layers.beta[t], sf);
                dn += half(layers.beta[t], -sf);
            }
            (up, dn)
        })
        .collect();
    let c = |b: i8| half(layers.beta0, b);
    let norm_a = even_parity_logsum(ln_a.iter().map(|&(u, d)| (2.0 * c(1) + 2.0 * u, 2.0 * c(-1) + 2.0 * d)));
    if norm_a == f64::NEG_INFINITY {
        return None;
    }
    if !tor.crossing_class(&resid).is_trivial() {
        return Some(0.0);
    }
    let norm_c = even_parity_logsum((0..n).map(|_| (2.0 * c(1), 2.0 * c(-1))));
    let cross = even_parity_logsum(
        (0..n).map(|p| (c(1) + c(fr[p]) + ln_a[p].0, c(-1) + c(-fr[p]) + ln_a[p].1)),
    );
    Some((2.0 * cross - norm_a - norm_c).exp().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    MaxLikelihood,
    Matching,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::MaxLikelihood => "ml",
            Decoder::Matching => "mwpm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ml" => Some(Decoder::MaxLikelihood),
            "mwpm" => Some(Decoder::Matching),
            _ => None,
        }
    }
}

pub fn decode(
    decoder: Decoder,
    syndromes: &SyndromeHistory,
    params: &NoiseParams,
    st: &Spacetime3D,
) -> Result<DecodeResult> {
    match decoder {
        Decoder::MaxLikelihood => ml_decode(syndromes, &ModelParams::from_noise(params), st, EnumBudget::default()),
        Decoder::Matching => mwpm_decode(syndromes, params, st),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureStats {
    pub rate: Estimate,
    pub failures: usize,
    pub trials: usize,
    /// Trials whose decoded chain failed the closure check.
    pub open_chains: usize,
}

/// Samples trajectories, decodes each, and counts logical failures. Trial `i` uses stream `(seed, i, 0)`.
pub fn failure_rate_experiment(
    st: &Spacetime3D,
    params: &NoiseParams,
    decoder: Decoder,
    n_trials: usize,
    seed: u64,
) -> Result<FailureStats> {
    let outcomes: Vec<(bool, bool)> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i as u64, 0);
            let tr = sample_trajectory(params, st, &mut rng);
            let r = decode(decoder, &tr.syndromes, params, st)?;
            Ok((!r.success(&tr.pauli, st.torus()), closure_holds(&r, &tr.syndromes, st)))
        })
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|o| o.0).count();
    let open_chains = outcomes.iter().filter(|o| !o.1).count();
    Ok(FailureStats { rate: binomial(failures, n_trials), failures, trials: n_trials, open_chains })
}

pub fn binomial(k: usize, n: usize) -> Estimate {
    let p = k as f64 / n.max(1) as f64;
    Estimate { mean: p, stderr: (p * (1.0 - p) / n.max(1) as f64).sqrt(), n }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutModel {
    /// Weak measurements with imperfect preparation.
    Weak,
    /// Perfect preparation; each readout flipped with the weak model's marginal rate.
    Stochastic,
}

/// Perfect-preparation parameters whose readout flip rate equals the weak model's marginal one.
pub fn stochastic_comparison_params(params: &NoiseParams, torus: &Torus2D) -> Result<NoiseParams> {
    let pm = marginal_readout_flip_rate(params, torus);
    let beta = if pm <= 0.0 { f64::INFINITY } else { 0.5 * ((1.0 - pm) / pm).ln() };
    NoiseParams::new(f64::INFINITY, beta, params.k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityRow {
    pub d: usize,
    /// Overlap of the full final state with the initial one.
    pub fidelity: Estimate,
    /// Fidelity of the encoded qubits alone: 1 unless the residual crosses a Z logical.
    pub logical_fidelity: Estimate,
    pub readout_flip_rate: f64,
}

/// Mean fidelity after one round and matching-based correction, per distance.
pub fn fidelity_vs_distance(
    params: &NoiseParams,
    ds: &[usize],
    n_trials: usize,
    seed: u64,
    model: ReadoutModel,
) -> Result<Vec<FidelityRow>> {
    ds.iter()
        .map(|&d| {
            let st = Spacetime3D::new(Torus2D::new(d)?, 1, TimeBoundary::Open)?;
            let p = match model {
                ReadoutModel::Weak => *params,
                ReadoutModel::Stochastic => stochastic_comparison_params(params, st.torus())?,
            };
            let fs: Vec<(f64, f64)> = (0..n_trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seeded_rng(seed, i as u64, d as u64);
                    let tr = sample_trajectory(&p, &st, &mut rng);
                    let r = mwpm_decode(&tr.syndromes, &p, &st)?;
                    let f = fast_fidelity(&tr.pauli, &tr.syndromes, &r.correction, &p, &st).unwrap_or(0.0);
                    Ok((f, if r.success(&tr.pauli, st.torus()) { 1.0 } else { 0.0 }))
                })
                .collect::<Result<_>>()?;
            let (state, logical): (Vec<f64>, Vec<f64>) = fs.into_iter().unzip();
            Ok(FidelityRow {
                d,
                fidelity: Estimate::from_samples(&state),
                logical_fidelity: Estimate::from_samples(&logical),
                readout_flip_rate: marginal_readout_flip_rate(&p, st.torus()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityKind {
    State,
    Logical,
}

impl FidelityRow {
    pub fn get(&self, kind: FidelityKind) -> Estimate {
        match kind {
            FidelityKind::State => self.fidelity,
            FidelityKind::Logical => self.logical_fidelity,
        }
    }
}

/// Weighted least-squares slope of `ln(1 - F)` against `ln d`.
pub fn infidelity_growth_exponent(rows: &[FidelityRow], kind: FidelityKind) -> Result<Estimate> {
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let f = r.get(kind);
            (r.d as f64, 1.0 - f.mean, f.stderr)
        })
        .collect();
    if pts.len() < 2 || pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::Param("need at least two distances with nonzero infidelity".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, inf, err) in &pts {
        let x = d.ln();
        let y = inf.ln();
        let w = 1.0 / ((err / inf).max(1e-9)).powi(2);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    Ok(Estimate { mean: (sw * sxy - sx * sy) / det, stderr: (sw / det).sqrt(), n: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    BelowCrossover,
    AboveCrossover,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub d: usize,
    pub beta0: f64,
    pub beta: f64,
    pub k: f64,
    /// Distance scale set by preparation flux alone.
    pub bound1: f64,
    /// Distance scale set by preparation flux against readout and Pauli noise.
    pub bound2: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

pub const DEFAULT_MARGIN: f64 = 10.0;

/// `d ≪ bound` read as `margin · d < bound`.
pub fn regime_classify(d: usize, params: &NoiseParams, margin: f64) -> RegimeReport {
    let (b0, b, k) = (params.beta0, params.beta, params.k);
    let bound1 = b0.exp();
    let bound2 = if b0 == f64::INFINITY {
        f64::INFINITY
    } else {
        ((4.0 * b0).exp() * ((-4.0 * b).exp() + (-4.0 * k).exp() + 4.0 * (-2.0 * b - 2.0 * k).exp())).cbrt()
    };
    let x = margin * d as f64;
    let verdict = if x < bound1 || x < bound2 { Verdict::BelowCrossover } else { Verdict::AboveCrossover };
    RegimeReport { d, beta0: b0, beta: b, k, bound1, bound2, margin, verdict }
}

/// Readout flip probability of a round with strength `beta`.
pub fn readout_flip_probability(beta: f64) -> f64 {
    flip_prob(beta)
}
