//! Exact enumeration of the gauge model on tiny lattices.
//!
//! τ is gauge fixed to the temporal gauge (every timelike τ = +1), leaving the
//! `2NT` spacelike spins free; `Z_full = 2^{NT} Z_fixed`. Every configuration
//! carries a class label relative to the disorder, the crossing class of the
//! τ = -1 edges on the last layer: the winding of the correction that the
//! configuration adds to the disorder's own Pauli history. For the reference
//! disorder of a syndrome history (no Pauli errors) this is the absolute class
//! of the hypothesised history.

use rayon::prelude::*;

use crate::lattice::{HomologyClass, Spacetime3D, WilsonRegion};
use crate::noise::{
    history_probability, pauli_log_probability, reference_disorder, sample_trajectory, syndromes_to_disorder,
    DisorderConfig, Layers, NoiseParams, PauliHistory, SyndromeHistory,
};
use crate::parity::{even_parity_log, log_sum};
use crate::smmodel::{column_trace, column_weight, ground_offset, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumBudget {
    pub log2_max: f64,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget { log2_max: 26.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Every gauge-fixed τ configuration.
    BruteForce,
    /// Flux sectors times a layer-by-layer transfer over spacelike τ.
    TimeSlicing,
}

/// `log2` of the work of each route.
pub fn route_cost(st: &Spacetime3D, route: Route) -> f64 {
    let n = st.n() as f64;
    let t = st.t_steps() as f64;
    match route {
        Route::BruteForce => 2.0 * n * t,
        Route::TimeSlicing => (n - 1.0) + 2.0 * n + (t * 3.0 * n).log2(),
    }
}

pub fn plan(st: &Spacetime3D, budget: EnumBudget) -> Result<Route> {
    let bf = route_cost(st, Route::BruteForce);
    let ts = route_cost(st, Route::TimeSlicing);
    let (route, cost) = if bf <= ts { (Route::BruteForce, bf) } else { (Route::TimeSlicing, ts) };
    // Brute force indexes τ with a u64 mask.
    if cost > budget.log2_max || (route == Route::BruteForce && 2 * st.n() * st.t_steps() > 40) {
        return Err(Error::Budget {
            log2_needed: cost,
            log2_budget: budget.log2_max,
            hint: "use d=2 with small T, d=3 with T=1, or the Monte Carlo engine".into(),
        });
    }
    Ok(route)
}

/// Per-class sums sharing one log scale: `Z_c = e^{shift} z[c]`, `Z_{W,c} = e^{shift} zw[c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSums {
    pub shift: f64,
    pub z: [f64; 4],
    pub zw: [f64; 4],
}

impl ClassSums {
    pub fn log_z(&self) -> f64 {
        self.shift + self.z.iter().sum::<f64>().ln()
    }

    pub fn log_z_class(&self, c: HomologyClass) -> f64 {
        self.shift + self.z[c.index()].ln()
    }

    pub fn wilson(&self) -> f64 {
        let z: f64 = self.z.iter().sum();
        if z == 0.0 {
            return f64::NAN;
        }
        self.zw.iter().sum::<f64>() / z
    }

    pub fn wilson_class(&self, c: HomologyClass) -> f64 {
        self.zw[c.index()] / self.z[c.index()]
    }
}

/// Running log-sum-exp over class-resolved, possibly signed, weights.
#[derive(Debug, Clone, Copy)]
struct Acc {
    m: f64,
    z: [f64; 4],
    zw: [f64; 4],
}

impl Acc {
    fn new() -> Self {
        Acc { m: f64::NEG_INFINITY, z: [0.0; 4], zw: [0.0; 4] }
    }

    fn rescale(&mut self, m: f64) {
        if m > self.m {
            let f = if self.m == f64::NEG_INFINITY { 0.0 } else { (self.m - m).exp() };
            self.z.iter_mut().chain(self.zw.iter_mut()).for_each(|v| *v *= f);
            self.m = m;
        }
    }

    fn add(&mut self, ln_w: f64, class: usize, sign: f64) {
        if ln_w == f64::NEG_INFINITY {
            return;
        }
        self.rescale(ln_w);
        let w = (ln_w - self.m).exp();
        self.z[class] += w;
        self.zw[class] += sign * w;
    }

    fn add_block(&mut self, ln_scale: f64, z: &[f64; 4], zw: &[f64; 4]) {
        if ln_scale == f64::NEG_INFINITY {
            return;
        }
        self.rescale(ln_scale);
        let f = (ln_scale - self.m).exp();
        for c in 0..4 {
            self.z[c] += f * z[c];
            self.zw[c] += f * zw[c];
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.add_block(o.m, &o.z, &o.zw);
        self
    }
}

/// Bit masks of the gauge-fixed problem; bit `t*2N + e` is the spacelike τ(e, t).
struct Compiled {
    n: usize,
    tt: usize,
    /// Per spacelike plaquette `(p, t)` (index `t*N + p`): its four bits.
    space: Vec<u64>,
    /// Per timelike plaquette `(e, t)` (index `t*2N + e`): bits `(e, t-1)` and `(e, t)`.
    time: Vec<u64>,
    /// Crossing class contributed by each single edge.
    edge_class: Vec<usize>,
    wilson: u64,
}

impl Compiled {
    fn new(st: &Spacetime3D, region: Option<&WilsonRegion>) -> Self {
        let tor = st.torus();
        let n = st.n();
        let tt = st.t_steps();
        let n2 = 2 * n;
        let mut space = Vec::with_capacity(n * tt);
        for t in 0..tt {
            for p in 0..n {
                space.push(tor.plaquette_edges(p).iter().fold(0u64, |m, &e| m | bit(t * n2 + e)));
            }
        }
        let mut time = Vec::with_capacity(n2 * tt);
        for t in 0..tt {
            for e in 0..n2 {
                let mut m = bit(t * n2 + e);
                if t > 0 {
                    m |= bit((t - 1) * n2 + e);
                }
                time.push(m);
            }
        }
        let edge_class = (0..n2).map(|e| tor.crossing_class(&[e]).index()).collect();
        // Spacelike 3D edges share the gauge-fixed bit layout; timelike ones are +1.
        let wilson = region
            .map(|r| r.boundary.iter().filter(|&&e| e < st.n_space_edges()).fold(0u64, |m, &e| m | bit(e)))
            .unwrap_or(0);
        Compiled { n, tt, space, time, edge_class, wilson }
    }

    fn class_of_layer(&self, m: u64) -> usize {
        let mut c = 0;
        let mut m = m;
        while m != 0 {
            c ^= self.edge_class[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        c
    }
}

#[inline]
fn bit(i: usize) -> u64 {
    1u64 << i
}

#[inline]
fn odd(m: u64) -> bool {
    m.count_ones() & 1 == 1
}

/// Class of the disorder's own Pauli history: crossing of `{e : Π_t η_pt(e, t) = -1}`.
/// Adding it to a relative class label gives the absolute one.
pub fn disorder_class(disorder: &DisorderConfig, st: &Spacetime3D) -> HomologyClass {
    let tor = st.torus();
    let h: Vec<usize> = (0..tor.n_edges())
        .filter(|&e| (0..st.t_steps()).map(|t| disorder.time(st, e, t)).product::<i8>() < 0)
        .collect();
    tor.crossing_class(&h)
}

fn brute_force(disorder: &DisorderConfig, l: &Layers, cm: &Compiled) -> Acc {
    let n = cm.n;
    let tt = cm.tt;
    let n2 = 2 * n;
    let n_bits = n2 * tt;
    let eta_s: Vec<bool> = (0..n * tt).map(|i| disorder.eta[i] < 0).collect();
    let eta_t: Vec<bool> = (0..n2 * tt).map(|i| disorder.eta[n * tt + i] < 0).collect();
    let ln_base = (n as f64 + 1.0) * std::f64::consts::LN_2;
    let top_shift = (tt - 1) * n2;
    let total = 1u64 << n_bits;
    let chunk_bits = n_bits.min(12);
    let n_chunks = total >> chunk_bits;
    let partials: Vec<Acc> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = Acc::new();
            let mut cols = Vec::with_capacity(n);
            for mask in (ci << chunk_bits)..((ci + 1) << chunk_bits) {
                cols.clear();
                for p in 0..n {
                    cols.push(column_weight(
                        l,
                        (0..tt).map(|t| {
                            let i = t * n + p;
                            if odd(mask & cm.space[i]) ^ eta_s[i] {
                                -1
                            } else {
                                1
                            }
                        }),
                    ));
                }
                let mut lw = ln_base + even_parity_log(&cols);
                for (i, &m) in cm.time.iter().enumerate() {
                    if odd(mask & m) ^ eta_t[i] {
                        lw -= 2.0 * l.k[i / n2];
                    }
                }
                let class = cm.class_of_layer(mask >> top_shift);
                let sign = if odd(mask & cm.wilson) { -1.0 } else { 1.0 };
                acc.add(lw, class, sign);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(Acc::new(), Acc::merge)
}

fn time_slicing(disorder: &DisorderConfig, l: &Layers, cm: &Compiled) -> Acc {
    let n = cm.n;
    let tt = cm.tt;
    let n2 = 2 * n;
    let size = 1usize << n2;
    let layer_mask = (size - 1) as u64;
    let with_w = cm.wilson != 0;
    // Flux pattern (bit p set when U_ps = -1) of each layer configuration.
    let flux: Vec<u64> = (0..size as u64)
        .map(|m| (0..n).fold(0u64, |f, p| if odd(m & cm.space[p]) { f | bit(p) } else { f }))
        .collect();
    let eta_s: Vec<u64> =
        (0..tt).map(|t| (0..n).fold(0u64, |f, p| if disorder.eta[t * n + p] < 0 { f | bit(p) } else { f })).collect();
    let eta_t: Vec<u64> = (0..tt)
        .map(|t| (0..n2).fold(0u64, |f, e| if disorder.eta[n * tt + t * n2 + e] < 0 { f | bit(e) } else { f }))
        .collect();
    let wl: Vec<u64> = (0..tt).map(|t| (cm.wilson >> (t * n2)) & layer_mask).collect();
    let top_class: Vec<usize> = (0..size as u64).map(|m| cm.class_of_layer(m)).collect();
    let pow_k: Vec<f64> = l.k.iter().map(|&k| (-2.0 * k).exp()).collect();
    let pow_b: Vec<Vec<f64>> = l
        .beta
        .iter()
        .map(|&b| (0..=n).map(|c| if c == 0 { 1.0 } else { (-2.0 * b * c as f64).exp() }).collect())
        .collect();
    let sectors: Vec<u64> = (0..1u64 << n).filter(|b| !odd(*b)).collect();
    let ln_base = (n as f64 + 1.0) * std::f64::consts::LN_2;

    let partials: Vec<Acc> = sectors
        .par_iter()
        .map(|&bneg| {
            let prior = if bneg == 0 { 0.0 } else { -2.0 * l.beta0 * bneg.count_ones() as f64 };
            let mut acc = Acc::new();
            if prior == f64::NEG_INFINITY {
                return acc;
            }
            let mut v = vec![0.0f64; size];
            let mut vw = if with_w { vec![0.0f64; size] } else { Vec::new() };
            let mut ln_scale = ln_base + prior;
            for t in 0..tt {
                if t == 0 {
                    let r = pow_k[0];
                    for (m, x) in v.iter_mut().enumerate() {
                        let c = (m as u64 ^ eta_t[0]).count_ones() as i32;
                        *x = if c == 0 { 1.0 } else { r.powi(c) };
                    }
                    if with_w {
                        vw.copy_from_slice(&v);
                    }
                } else {
                    let r = pow_k[t];
                    for e in 0..n2 {
                        let flip = eta_t[t] >> e & 1 == 1;
                        transfer(&mut v, e, r, flip);
                        if with_w {
                            transfer(&mut vw, e, r, flip);
                        }
                    }
                }
                let tgt = bneg ^ eta_s[t];
                let pw = &pow_b[t];
                let mut top = 0.0f64;
                for m in 0..size {
                    let f = pw[(flux[m] ^ tgt).count_ones() as usize];
                    v[m] *= f;
                    top = top.max(v[m]);
                    if with_w {
                        let s = if odd(m as u64 & wl[t]) { -f } else { f };
                        vw[m] *= s;
                    }
                }
                if top == 0.0 {
                    return acc;
                }
                v.iter_mut().for_each(|x| *x /= top);
                vw.iter_mut().for_each(|x| *x /= top);
                ln_scale += top.ln();
            }
            let mut z = [0.0; 4];
            let mut zw = [0.0; 4];
            for m in 0..size {
                z[top_class[m]] += v[m];
                if with_w {
                    zw[top_class[m]] += vw[m];
                }
            }
            if !with_w {
                zw = z;
            }
            acc.add_block(ln_scale, &z, &zw);
            acc
        })
        .collect();
    partials.into_iter().fold(Acc::new(), Acc::merge)
}

/// One timelike factor `exp(K(η τ τ' - 1))` on bit `e`.
fn transfer(v: &mut [f64], e: usize, r: f64, flip: bool) {
    let b = 1usize << e;
    for m in 0..v.len() {
        if m & b == 0 {
            let (x, y) = (v[m], v[m | b]);
            if flip {
                v[m] = r * x + y;
                v[m | b] = x + r * y;
            } else {
                v[m] = x + r * y;
                v[m | b] = r * x + y;
            }
        }
    }
}

/// Class-resolved gauge-fixed sums, optionally with a Wilson loop inserted.
pub fn class_sums(
    disorder: &DisorderConfig,
    params: &ModelParams,
    st: &Spacetime3D,
    region: Option<&WilsonRegion>,
    budget: EnumBudget,
) -> Result<ClassSums> {
    if disorder.eta.len() != st.n_plaquettes() {
        return Err(Error::Dimension(format!("{} disorder signs for {} plaquettes", disorder.eta.len(), st.n_plaquettes())));
    }
    let route = plan(st, budget)?;
    class_sums_via(disorder, params, st, region, route)
}

pub fn class_sums_via(
    disorder: &DisorderConfig,
    params: &ModelParams,
    st: &Spacetime3D,
    region: Option<&WilsonRegion>,
    route: Route,
) -> Result<ClassSums> {
    let l = params.layers(st);
    let cm = Compiled::new(st, region);
    let acc = match route {
        Route::BruteForce => brute_force(disorder, &l, &cm),
        Route::TimeSlicing => time_slicing(disorder, &l, &cm),
    };
    let offset = ground_offset(&l, st);
    let shift = if offset.is_finite() { acc.m + offset } else { acc.m };
    Ok(ClassSums { shift, z: acc.z, zw: if region.is_some() { acc.zw } else { acc.z } })
}

/// `ln Σ_τ Σ_σ e^{-E}` over gauge-fixed τ. With an infinite coupling the
/// ground-state offset is dropped and the value is relative to perfect alignment.
pub fn log_partition(
    disorder: &DisorderConfig,
    params: &ModelParams,
    st: &Spacetime3D,
    budget: EnumBudget,
) -> Result<f64> {
    Ok(class_sums(disorder, params, st, None, budget)?.log_z())
}

/// Unrestricted sum over all τ, including the gauge directions. Finite couplings only.
pub fn log_partition_ungauged(disorder: &DisorderConfig, params: &ModelParams, st: &Spacetime3D) -> Result<f64> {
    let ne = st.n_edges();
    if ne > 24 {
        return Err(Error::Budget {
            log2_needed: ne as f64,
            log2_budget: 24.0,
            hint: "the ungauged oracle is for d=2, T=1 only".into(),
        });
    }
    let terms: Vec<f64> = (0..1u64 << ne)
        .map(|m| {
            let tau: Vec<i8> = (0..ne).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect();
            column_trace(&tau, disorder, params, st)
        })
        .collect();
    Ok(log_sum(&terms))
}

pub fn wilson_expectation(
    disorder: &DisorderConfig,
    params: &ModelParams,
    region: &WilsonRegion,
    st: &Spacetime3D,
    budget: EnumBudget,
) -> Result<f64> {
    if region.boundary.is_empty() {
        return Ok(1.0);
    }
    Ok(class_sums(disorder, params, st, Some(region), budget)?.wilson())
}

/// `ln Z_c` for the four classes, labelled relative to `disorder`.
/// Inserting a logical defect `l` relabels them: `Z_c(η η^l) = Z_{c⊕l}(η)`.
pub fn class_log_partitions(
    disorder: &DisorderConfig,
    params: &ModelParams,
    st: &Spacetime3D,
    budget: EnumBudget,
) -> Result<[f64; 4]> {
    let cs = class_sums(disorder, params, st, None, budget)?;
    Ok(HomologyClass::all().map(|c| cs.log_z_class(c)))
}

/// Normalised log-probabilities of the total Pauli class given a syndrome history.
pub fn class_log_probabilities(
    syndromes: &SyndromeHistory,
    params: &ModelParams,
    st: &Spacetime3D,
    budget: EnumBudget,
) -> Result<[f64; 4]> {
    let lz = class_log_partitions(&reference_disorder(syndromes, st), params, st, budget)?;
    let z = log_sum(&lz);
    Ok(lz.map(|v| v - z))
}

/// How the disorder average of the Wilson loop is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderEnumeration {
    /// Every Pauli and syndrome history, weighted by its probability; `⟨W⟩` in the physical gauge.
    Full,
    /// Every syndrome history; the Pauli history is summed analytically within each class.
    ByClass,
}

/// `([⟨W⟩], [⟨W⟩²])` with disorder drawn from `noise` and Gibbs weights from `model`.
pub fn nishimori_wilson(
    region: &WilsonRegion,
    noise: &NoiseParams,
    model: &ModelParams,
    st: &Spacetime3D,
    mode: DisorderEnumeration,
    budget: EnumBudget,
) -> Result<(f64, f64)> {
    let n_s = st.n() * st.t_steps();
    let n_x = 2 * st.n() * st.t_steps();
    if region.boundary.is_empty() {
        return Ok((1.0, 1.0));
    }
    match mode {
        DisorderEnumeration::Full => {
            let log2 = (n_s + n_x) as f64 + route_cost(st, plan(st, budget)?);
            if n_s + n_x > 30 || log2 > budget.log2_max + 12.0 {
                return Err(Error::Budget {
                    log2_needed: log2,
                    log2_budget: budget.log2_max,
                    hint: "full disorder enumeration is for d=2, T=1; use ByClass".into(),
                });
            }
            let mut lw = Vec::new();
            let mut w1 = Vec::new();
            let mut w2 = Vec::new();
            for xm in 0..1u64 << n_x {
                let pauli = PauliHistory::from_mask(st, xm);
                let lp = pauli_log_probability(&pauli, noise, st);
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                for sm in 0..1u64 << n_s {
                    let syn = SyndromeHistory::from_mask(st, sm);
                    let lh = lp + history_probability(&syn, &pauli, noise, st);
                    if lh == f64::NEG_INFINITY {
                        continue;
                    }
                    let w = class_sums(&syndromes_to_disorder(&syn, &pauli, st), model, st, Some(region), budget)?
                        .wilson();
                    lw.push(lh);
                    w1.push(w);
                    w2.push(w * w);
                }
            }
            Ok((weighted_mean(&lw, &w1), weighted_mean(&lw, &w2)))
        }
        DisorderEnumeration::ByClass => {
            if n_s > 24 {
                return Err(Error::Budget {
                    log2_needed: n_s as f64,
                    log2_budget: 24.0,
                    hint: "too many syndrome histories to enumerate; use Monte Carlo".into(),
                });
            }
            let noise_model = ModelParams::from_noise(noise);
            let same = *model == noise_model;
            let mut lw = Vec::new();
            let mut w1 = Vec::new();
            let mut w2 = Vec::new();
            for sm in 0..1u64 << n_s {
                let eta = reference_disorder(&SyndromeHistory::from_mask(st, sm), st);
                let cn = class_sums(&eta, &noise_model, st, Some(region), budget)?;
                let ln = cn.log_z();
                if ln == f64::NEG_INFINITY {
                    continue;
                }
                let wm = if same { cn.wilson() } else { class_sums(&eta, model, st, Some(region), budget)?.wilson() };
                lw.push(ln);
                w1.push(wm * cn.wilson());
                w2.push(wm * wm);
            }
            Ok((weighted_mean(&lw, &w1), weighted_mean(&lw, &w2)))
        }
    }
}

fn weighted_mean(ln_w: &[f64], x: &[f64]) -> f64 {
    let z = log_sum(ln_w);
    ln_w.iter().zip(x).map(|(l, v)| (l - z).exp() * v).sum()
}

/// Where the disorder for `Δ_l` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderSource {
    /// All syndrome histories and Pauli classes, weighted exactly.
    Enumerate,
    /// Trajectories from the physical sampler.
    Sampled { n_samples: usize, seed: u64 },
}

/// Disorder-averaged free-energy cost of a logical defect:
/// `-E[ln Z_0(η η^l) - ln Z_0(η)] = -E[ln Z_l(η) - ln Z_0(η)]` over physical disorder.
pub fn delta_l(
    defect: HomologyClass,
    noise: &NoiseParams,
    model: &ModelParams,
    st: &Spacetime3D,
    source: DisorderSource,
    budget: EnumBudget,
) -> Result<f64> {
    let cost = |lz: &[f64; 4], w: usize| {
        let a = lz[w ^ defect.index()];
        let b = lz[w];
        if a == b {
            0.0
        } else {
            b - a
        }
    };
    match source {
        DisorderSource::Enumerate => {
            let n_s = st.n() * st.t_steps();
            if n_s > 24 {
                return Err(Error::Budget {
                    log2_needed: n_s as f64,
                    log2_budget: 24.0,
                    hint: "too many syndrome histories; use DisorderSource::Sampled".into(),
                });
            }
            let noise_model = ModelParams::from_noise(noise);
            let same = *model == noise_model;
            let mut lw = Vec::new();
            let mut vals = Vec::new();
            // Physical disorder with Pauli class w is the reference disorder relabelled by w.
            for sm in 0..1u64 << n_s {
                let eta = reference_disorder(&SyndromeHistory::from_mask(st, sm), st);
                let ln = class_log_partitions(&eta, &noise_model, st, budget)?;
                let lm = if same { ln } else { class_log_partitions(&eta, model, st, budget)? };
                for w in 0..4 {
                    if ln[w] > f64::NEG_INFINITY {
                        lw.push(ln[w]);
                        vals.push(cost(&lm, w));
                    }
                }
            }
            Ok(weighted_mean(&lw, &vals))
        }
        DisorderSource::Sampled { n_samples, seed } => {
            let vals: Vec<f64> = (0..n_samples)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let mut rng = crate::seeded_rng(seed, i as u64, 0);
                    let tr = sample_trajectory(noise, st, &mut rng);
                    let eta = syndromes_to_disorder(&tr.syndromes, &tr.pauli, st);
                    Ok(cost(&class_log_partitions(&eta, model, st, budget)?, 0))
                })
                .collect::<Result<_>>()?;
            Ok(vals.iter().sum::<f64>() / n_samples.max(1) as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Rect, TimeBoundary, Torus2D};
    use crate::smmodel::{apply_defect, GaugeTransform, LogicalDefect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn st_b(d: usize, t: usize, b: TimeBoundary) -> Spacetime3D {
        Spacetime3D::new(Torus2D::new(d).unwrap(), t, b).unwrap()
    }

    fn st(d: usize, t: usize) -> Spacetime3D {
        st_b(d, t, TimeBoundary::Open)
    }

    fn random_disorder(st: &Spacetime3D, rng: &mut ChaCha8Rng, p: f64) -> DisorderConfig {
        DisorderConfig { eta: (0..st.n_plaquettes()).map(|_| if rng.random_bool(p) { -1 } else { 1 }).collect() }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (t, bd) in [(1, TimeBoundary::Open), (2, TimeBoundary::Open), (2, TimeBoundary::FreeStart), (2, TimeBoundary::IdealFinalRound)] {
            let s = st_b(2, t, bd);
            let region = WilsonRegion::rectangle(&s, Rect::TimeX { y: 0, x0: 0, wx: 1, t0: t - 1, h: 1 }).unwrap();
            for _ in 0..5 {
                let dis = random_disorder(&s, &mut rng, 0.25);
                let p = ModelParams::new(0.8, 1.1, 0.6);
                let a = class_sums_via(&dis, &p, &s, Some(&region), Route::BruteForce).unwrap();
                let b = class_sums_via(&dis, &p, &s, Some(&region), Route::TimeSlicing).unwrap();
                for c in HomologyClass::all() {
                    if a.log_z_class(c) == f64::NEG_INFINITY {
                        assert_eq!(b.log_z_class(c), f64::NEG_INFINITY);
                        continue;
                    }
                    assert!(close(a.log_z_class(c), b.log_z_class(c), 1e-12), "{t} {bd:?} {c} {a:?} {b:?}");
                    assert!(close(a.wilson_class(c), b.wilson_class(c), 1e-10));
                }
            }
        }
    }

    #[test]
    fn gauge_fixing_counts_fixed_spins() {
        let s = st(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let dis = random_disorder(&s, &mut rng, 0.3);
            let p = ModelParams::new(0.7, 0.9, 0.5);
            let fixed = log_partition(&dis, &p, &s, EnumBudget::default()).unwrap();
            let full = log_partition_ungauged(&dis, &p, &s).unwrap();
            assert!(close(fixed, full - (s.n() * s.t_steps()) as f64 * std::f64::consts::LN_2, 1e-12));
        }
    }

    #[test]
    fn zero_couplings_count_states() {
        let s = st(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dis = random_disorder(&s, &mut rng, 0.5);
        let lz = log_partition(&dis, &ModelParams::new(0.0, 0.0, 0.0), &s, EnumBudget::default()).unwrap();
        let free = (2 * s.n() * s.t_steps() + 2 * s.n()) as f64;
        assert!(close(lz, free * std::f64::consts::LN_2, 1e-12));
        let region = WilsonRegion::rectangle(&s, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap();
        let w = wilson_expectation(&dis, &ModelParams::new(0.0, 0.0, 0.0), &region, &s, EnumBudget::default()).unwrap();
        assert!(w.abs() < 1e-12);
        assert_eq!(wilson_expectation(&dis, &ModelParams::new(1.0, 1.0, 1.0), &WilsonRegion::empty(), &s, EnumBudget::default()).unwrap(), 1.0);
    }

    #[test]
    fn ground_state_dominance() {
        let s = st(2, 1);
        let p = ModelParams::new(6.0, 6.0, 6.0);
        let lz = log_partition(&DisorderConfig::clean(&s), &p, &s, EnumBudget::default()).unwrap();
        // Aligned ground states: 2^{N+1} σ per flux sector, one τ.
        let ground = ground_offset(&p.layers(&s), &s) + (s.n() as f64 + 1.0) * std::f64::consts::LN_2;
        assert!(lz > ground && lz - ground < 30.0 * (-12.0f64).exp());
    }

    #[test]
    fn gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for t in [1, 2] {
            let s = st(2, t);
            let p = ModelParams::new(0.9, 1.3, 0.7);
            let dis = random_disorder(&s, &mut rng, 0.3);
            let base = class_log_partitions(&dis, &p, &s, EnumBudget::default()).unwrap();
            for _ in 0..10 {
                // Arbitrary ν: total Z is invariant, labels shift by the last-layer winding of ν.
                let g = GaugeTransform::random(&s, &mut rng);
                let moved = class_log_partitions(&g.apply_disorder(&dis, &s), &p, &s, EnumBudget::default()).unwrap();
                let top: Vec<usize> =
                    (0..8).filter(|&e| g.nu[s.edge_index(crate::lattice::Edge3::Space { e, t: t - 1 })] < 0).collect();
                let shift = s.torus().crossing_class(&top).index();
                for c in 0..4 {
                    assert!(close(base[c], moved[c ^ shift], 1e-12));
                }
                assert!(close(log_sum(&base), log_sum(&moved), 1e-12));
                // Vertex gauge flips keep every label.
                let v = rng.random_range(0..s.n());
                let tv = rng.random_range(0..t);
                let g = GaugeTransform::at_vertex(&s, v, tv);
                let moved = class_log_partitions(&g.apply_disorder(&dis, &s), &p, &s, EnumBudget::default()).unwrap();
                for c in 0..4 {
                    assert!(close(base[c], moved[c], 1e-12));
                }
            }
        }
    }

    #[test]
    fn defects_relabel_classes() {
        let s = st(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = ModelParams::new(1.0, 1.2, 0.9);
        let dis = random_disorder(&s, &mut rng, 0.2);
        let base = class_log_partitions(&dis, &p, &s, EnumBudget::default()).unwrap();
        for l in 1..4 {
            for step in 0..2 {
                let def = LogicalDefect { class: HomologyClass::from_index(l), step };
                let moved = class_log_partitions(&apply_defect(&dis, &def, &s), &p, &s, EnumBudget::default()).unwrap();
                for c in 0..4 {
                    assert!(close(moved[c], base[c ^ l], 1e-12), "{l} {step} {c} {moved:?} {base:?}");
                }
            }
        }
    }

    fn brute_class_posterior(syn: &SyndromeHistory, noise: &NoiseParams, st: &Spacetime3D) -> [f64; 4] {
        let mut terms: [Vec<f64>; 4] = Default::default();
        for xm in 0..1u64 << (2 * st.n() * st.t_steps()) {
            let x = PauliHistory::from_mask(st, xm);
            let c = st.torus().crossing_class(&x.total()).index();
            terms[c].push(pauli_log_probability(&x, noise, st) + history_probability(syn, &x, noise, st));
        }
        let lz = terms.map(|v| log_sum(&v));
        let z = log_sum(&lz);
        lz.map(|v| v - z)
    }

    #[test]
    fn class_probabilities_match_posterior() {
        let s = st(2, 1);
        let noise = NoiseParams::new(1.1, 1.4, 0.8).unwrap();
        for sm in 0..16 {
            let syn = SyndromeHistory::from_mask(&s, sm);
            let got = class_log_probabilities(&syn, &ModelParams::from_noise(&noise), &s, EnumBudget::default()).unwrap();
            let want = brute_class_posterior(&syn, &noise, &s);
            for c in 0..4 {
                assert!(close(got[c], want[c], 1e-10), "{sm} {c} {got:?} {want:?}");
            }
        }
    }

    #[test]
    fn class_probabilities_match_posterior_two_steps() {
        let s = st(2, 2);
        let noise = NoiseParams::new(0.9, 1.2, 1.0).unwrap();
        for sm in [0u64, 5, 17, 200, 255] {
            let syn = SyndromeHistory::from_mask(&s, sm);
            let got = class_log_probabilities(&syn, &ModelParams::from_noise(&noise), &s, EnumBudget::default()).unwrap();
            let want = brute_class_posterior(&syn, &noise, &s);
            for c in 0..4 {
                assert!(close(got[c], want[c], 1e-10));
            }
        }
    }

    #[test]
    fn trivial_syndrome_is_confident() {
        let s = st(2, 1);
        let lp = class_log_probabilities(&SyndromeHistory::trivial(&s), &ModelParams::new(3.0, 3.0, 3.0), &s, EnumBudget::default())
            .unwrap();
        assert!(lp[0].exp() > 0.99);
        assert!((log_sum(&lp)).abs() < 1e-12);
    }

    #[test]
    fn nishimori_identity_full_enumeration() {
        let s = st(2, 1);
        let noise = NoiseParams::new(1.5, 1.5, 1.5).unwrap();
        let region = WilsonRegion::rectangle(&s, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap();
        let model = ModelParams::from_noise(&noise);
        let (a, b) = nishimori_wilson(&region, &noise, &model, &s, DisorderEnumeration::Full, EnumBudget::default()).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        let (c, d) = nishimori_wilson(&region, &noise, &model, &s, DisorderEnumeration::ByClass, EnumBudget::default()).unwrap();
        assert!((a - c).abs() < 1e-9 && (b - d).abs() < 1e-9);
        let off = ModelParams::new(3.0, 1.5, 1.5);
        let (e, f) = nishimori_wilson(&region, &noise, &off, &s, DisorderEnumeration::Full, EnumBudget::default()).unwrap();
        assert!((e - f).abs() > 1e-8, "{e} {f}");
    }

    #[test]
    fn frozen_limit() {
        let s = st(2, 1);
        let inf = f64::INFINITY;
        let noise = NoiseParams::new(inf, inf, inf).unwrap();
        let region = WilsonRegion::rectangle(&s, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap();
        let (a, b) = nishimori_wilson(&region, &noise, &ModelParams::from_noise(&noise), &s, DisorderEnumeration::ByClass, EnumBudget::default())
            .unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_l_properties() {
        let s = st(2, 1);
        let l = HomologyClass::from_index(1);
        let mut prev = f64::NEG_INFINITY;
        for k in [0.5, 1.0, 1.5, 2.0, 2.5] {
            let noise = NoiseParams::new(1.0, 1.0, k).unwrap();
            let d = delta_l(l, &noise, &ModelParams::from_noise(&noise), &s, DisorderSource::Enumerate, EnumBudget::default()).unwrap();
            assert!(d > prev, "{k} {d} {prev}");
            prev = d;
        }
        let noise = NoiseParams::new(1.0, 1.0, 1.0).unwrap();
        let zero = delta_l(HomologyClass::TRIVIAL, &noise, &ModelParams::from_noise(&noise), &s, DisorderSource::Enumerate, EnumBudget::default())
            .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn delta_l_zero_temperature() {
        let s = st(2, 2);
        let k = 8.0;
        let noise = NoiseParams::new(12.0, 12.0, k).unwrap();
        let d = delta_l(HomologyClass::from_index(2), &noise, &ModelParams::from_noise(&noise), &s, DisorderSource::Enumerate, EnumBudget::default())
            .unwrap();
        // Minimal winding strings: two positions times two starting steps.
        assert!(d <= 2.0 * k * 2.0 + 1e-9 && d >= 2.0 * k * 2.0 - 4f64.ln() - 1e-3, "{d}");
    }

    #[test]
    fn delta_l_sampled_close_to_enumerated() {
        let s = st(2, 1);
        let noise = NoiseParams::new(1.2, 1.2, 1.2).unwrap();
        let m = ModelParams::from_noise(&noise);
        let l = HomologyClass::from_index(3);
        let e = delta_l(l, &noise, &m, &s, DisorderSource::Enumerate, EnumBudget::default()).unwrap();
        let a = delta_l(l, &noise, &m, &s, DisorderSource::Sampled { n_samples: 4000, seed: 3 }, EnumBudget::default()).unwrap();
        assert!((a - e).abs() < 0.15 * e.abs().max(1.0), "{a} {e}");
    }

    #[test]
    fn budget_is_enforced() {
        let s = st(3, 2);
        let err = log_partition(&DisorderConfig::clean(&s), &ModelParams::new(1.0, 1.0, 1.0), &s, EnumBudget::default());
        assert!(matches!(err, Err(Error::Budget { .. })));
        let s = st(3, 1);
        assert_eq!(plan(&s, EnumBudget::default()).unwrap(), Route::BruteForce);
        assert_eq!(plan(&st(2, 3), EnumBudget::default()).unwrap(), Route::TimeSlicing);
    }
}
