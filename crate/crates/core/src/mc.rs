//! Markov-chain Monte Carlo over τ with the σ spins traced out exactly.

use rand::Rng;
use rayon::prelude::*;

use crate::lattice::{Edge3, Plaq3, Spacetime3D, WilsonRegion};
use crate::noise::{sample_trajectory, syndromes_to_disorder, DisorderConfig, Layers, NoiseParams};
use crate::parity::{even_parity_log, ColumnWeight};
use crate::smmodel::{column_weight, ModelParams};
use crate::{seeded_rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSchedule {
    pub burn_in: usize,
    pub sweeps: usize,
    pub bins: usize,
    pub replicas: usize,
    pub samples: usize,
}

impl Default for McSchedule {
    fn default() -> Self {
        McSchedule { burn_in: 200, sweeps: 2000, bins: 10, replicas: 2, samples: 64 }
    }
}

impl McSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 8 {
            return Err(Error::Param(format!("need at least 8 bins, got {}", self.bins)));
        }
        if self.sweeps < self.bins || self.replicas == 0 || self.samples == 0 {
            return Err(Error::Param(format!("degenerate schedule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        Estimate { mean: v, stderr: 0.0, n: 1 }
    }

    /// Mean and standard error of independent values.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Estimate { mean, stderr: (var / n as f64).sqrt(), n }
    }

    /// Splits a time series into `bins` consecutive blocks and treats the block means as independent.
    pub fn binned(series: &[f64], bins: usize) -> Self {
        let per = series.len() / bins;
        let means: Vec<f64> = (0..bins).map(|b| series[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64).collect();
        Estimate::from_samples(&means)
    }

    /// Standard error floored at `1/n`, the resolution of a mean of `n` samples. A run in
    /// which every sample agreed reports zero spread, which would otherwise get infinite weight.
    pub fn resolved_stderr(&self) -> f64 {
        self.stderr.max(1.0 / self.n.max(1) as f64)
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn sigmas_from(&self, v: f64) -> f64 {
        if self.stderr == 0.0 {
            return if self.mean == v { 0.0 } else { f64::INFINITY };
        }
        (self.mean - v).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    #[default]
    Metropolis,
    HeatBath,
}

/// Incidence tables shared by every chain on one spacetime.
#[derive(Debug, Clone)]
pub struct McGeometry {
    st: Spacetime3D,
    edge_plaqs: Vec<Vec<usize>>,
    /// Column of each spacelike plaquette; `usize::MAX` for timelike ones.
    column: Vec<usize>,
    /// Step of each timelike plaquette.
    step: Vec<usize>,
    column_plaqs: Vec<Vec<usize>>,
    plaq_edges: Vec<Vec<usize>>,
}

impl McGeometry {
    pub fn new(st: &Spacetime3D) -> Self {
        let np = st.n_plaquettes();
        let mut column = vec![usize::MAX; np];
        let mut step = vec![0; np];
        let mut column_plaqs = vec![Vec::new(); st.n()];
        for pl in 0..np {
            match st.plaq(pl) {
                Plaq3::Space { p, .. } => {
                    column[pl] = p;
                    column_plaqs[p].push(pl);
                }
                Plaq3::Time { t, .. } => step[pl] = t,
            }
        }
        McGeometry {
            st: st.clone(),
            edge_plaqs: (0..st.n_edges()).map(|i| st.edge_plaqs(i)).collect(),
            column,
            step,
            column_plaqs,
            plaq_edges: (0..np).map(|pl| st.plaq_edges(pl)).collect(),
        }
    }

    pub fn spacetime(&self) -> &Spacetime3D {
        &self.st
    }
}

/// One Markov chain on a fixed disorder.
#[derive(Debug, Clone)]
pub struct Chain<'g> {
    geo: &'g McGeometry,
    layers: Layers,
    eta: Vec<i8>,
    tau: Vec<i8>,
    /// `η_p U_p` per plaquette.
    x: Vec<i8>,
    cols: Vec<ColumnWeight>,
    /// Frustrated timelike plaquettes per step.
    frustrated: Vec<usize>,
    log_w: f64,
    rule: UpdateRule,
    dirty: Vec<bool>,
    touched: Vec<usize>,
    saved: Vec<ColumnWeight>,
    pub accepted: u64,
    pub proposed: u64,
}

impl<'g> Chain<'g> {
    pub fn new(geo: &'g McGeometry, disorder: &DisorderConfig, params: &ModelParams) -> Self {
        let st = &geo.st;
        let mut c = Chain {
            geo,
            layers: params.layers(st),
            eta: disorder.eta.clone(),
            tau: vec![1; st.n_edges()],
            x: vec![1; st.n_plaquettes()],
            cols: Vec::new(),
            frustrated: vec![0; st.t_steps()],
            log_w: 0.0,
            rule: UpdateRule::Metropolis,
            dirty: vec![false; st.n()],
            touched: Vec::new(),
            saved: Vec::new(),
            accepted: 0,
            proposed: 0,
        };
        c.refresh();
        c
    }

    pub fn with_rule(mut self, rule: UpdateRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn tau(&self) -> &[i8] {
        &self.tau
    }

    pub fn set_tau(&mut self, tau: &[i8]) {
        self.tau.copy_from_slice(tau);
        self.refresh();
    }

    /// `ln Σ_σ e^{-E}` up to the ground-state offset.
    pub fn log_weight(&self) -> f64 {
        self.log_w
    }

    /// Recomputes every cached quantity from τ.
    pub fn refresh(&mut self) {
        let st = &self.geo.st;
        for pl in 0..st.n_plaquettes() {
            self.x[pl] = self.geo.plaq_edges[pl].iter().fold(self.eta[pl], |a, &e| a * self.tau[e]);
        }
        self.frustrated.iter_mut().for_each(|f| *f = 0);
        for pl in st.n_space_plaquettes()..st.n_plaquettes() {
            if self.x[pl] < 0 {
                self.frustrated[self.geo.step[pl]] += 1;
            }
        }
        self.cols = (0..st.n()).map(|p| self.column(p)).collect();
        self.log_w = self.evaluate();
    }

    fn column(&self, p: usize) -> ColumnWeight {
        column_weight(&self.layers, self.geo.column_plaqs[p].iter().map(|&pl| self.x[pl]))
    }

    fn evaluate(&self) -> f64 {
        let n = self.geo.st.n();
        let mut v = (n as f64 + 1.0) * std::f64::consts::LN_2 + even_parity_log(&self.cols);
        for (t, &f) in self.frustrated.iter().enumerate() {
            if f > 0 {
                v -= 2.0 * self.layers.k[t] * f as f64;
            }
        }
        v
    }

    fn toggle(&mut self, edges: &[usize]) {
        for &e in edges {
            self.tau[e] = -self.tau[e];
            for &pl in &self.geo.edge_plaqs[e] {
                self.x[pl] = -self.x[pl];
                let col = self.geo.column[pl];
                if col == usize::MAX {
                    let t = self.geo.step[pl];
                    if self.x[pl] < 0 {
                        self.frustrated[t] += 1;
                    } else {
                        self.frustrated[t] -= 1;
                    }
                } else if !self.dirty[col] {
                    self.dirty[col] = true;
                    self.touched.push(col);
                }
            }
        }
    }

    /// Proposes flipping every edge in `edges` at once; returns whether it was accepted.
    pub fn propose<R: Rng + ?Sized>(&mut self, edges: &[usize], rng: &mut R) -> bool {
        self.proposed += 1;
        self.touched.clear();
        self.toggle(edges);
        self.saved.clear();
        for i in 0..self.touched.len() {
            let p = self.touched[i];
            self.saved.push(self.cols[p]);
            self.cols[p] = self.column(p);
        }
        let new = self.evaluate();
        let delta = new - self.log_w;
        let accept = if delta.is_nan() {
            true
        } else {
            match self.rule {
                UpdateRule::Metropolis => delta >= 0.0 || rng.random::<f64>() < delta.exp(),
                UpdateRule::HeatBath => rng.random::<f64>() < 1.0 / (1.0 + (-delta).exp()),
            }
        };
        for &p in &self.touched {
            self.dirty[p] = false;
        }
        if accept {
            self.log_w = new;
            self.accepted += 1;
        } else {
            self.touched.clear();
            self.toggle(edges);
            for &p in &self.touched {
                self.dirty[p] = false;
            }
            let touched = std::mem::take(&mut self.touched);
            for (i, &p) in touched.iter().enumerate() {
                self.cols[p] = self.saved[i];
            }
            self.touched = touched;
        }
        accept
    }

    /// One pass of single-spin updates over every τ, then one column move per
    /// spacelike edge: flip τ(e, t) for all `t ≥ t0`, `t0` uniform.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let st = &self.geo.st;
        let ne = st.n_edges();
        let n2 = st.torus().n_edges();
        let tt = st.t_steps();
        for e in 0..ne {
            self.propose(&[e], rng);
        }
        let mut col = Vec::with_capacity(tt);
        for e in 0..n2 {
            let t0 = rng.random_range(0..tt);
            col.clear();
            col.extend((t0..tt).map(|t| st.edge_index(Edge3::Space { e, t })));
            self.propose(&col, rng);
        }
        self.refresh();
    }

    /// Runs `burn_in` sweeps, then records each region's value after every measurement sweep.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        regions: &[WilsonRegion],
        burn_in: usize,
        sweeps: usize,
        rng: &mut R,
    ) -> Vec<Vec<f64>> {
        for _ in 0..burn_in {
            self.sweep(rng);
        }
        let mut series = vec![Vec::with_capacity(sweeps); regions.len()];
        for _ in 0..sweeps {
            self.sweep(rng);
            for (s, r) in series.iter_mut().zip(regions) {
                s.push(r.eval(&self.tau) as f64);
            }
        }
        series
    }
}

/// Thermal average of each region on one disorder, with binned errors.
pub fn estimate_wilson<R: Rng + ?Sized>(
    disorder: &DisorderConfig,
    params: &ModelParams,
    regions: &[WilsonRegion],
    geo: &McGeometry,
    schedule: &McSchedule,
    rng: &mut R,
) -> Result<Vec<Estimate>> {
    schedule.validate()?;
    if regions.iter().all(|r| r.boundary.is_empty()) {
        return Ok(regions.iter().map(|_| Estimate::exact(1.0)).collect());
    }
    let mut chain = Chain::new(geo, disorder, params);
    let series = chain.measure(regions, schedule.burn_in, schedule.sweeps, rng);
    Ok(regions
        .iter()
        .zip(series)
        .map(|(r, s)| if r.boundary.is_empty() { Estimate::exact(1.0) } else { Estimate::binned(&s, schedule.bins) })
        .collect())
}

/// Quenched averages of one region: `[⟨W⟩]`, `[⟨W⟩²]` from two replicas, and their paired difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderAverage {
    pub w: Estimate,
    pub w2: Estimate,
    pub diff: Estimate,
}

/// Fresh physical disorder per sample from `noise`, two independent replicas
/// under `model` each started from τ = +1. Streams are keyed by
/// `(master_seed, sample, k)`: `k = 0` draws the disorder, `k = r + 1` runs replica `r`.
pub fn disorder_average(
    regions: &[WilsonRegion],
    noise: &NoiseParams,
    model: &ModelParams,
    geo: &McGeometry,
    schedule: &McSchedule,
    master_seed: u64,
) -> Result<Vec<DisorderAverage>> {
    schedule.validate()?;
    let st = geo.spacetime();
    let per_sample: Vec<Vec<(f64, f64)>> = (0..schedule.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(master_seed, i as u64, 0);
            let tr = sample_trajectory(noise, st, &mut rng);
            let eta = syndromes_to_disorder(&tr.syndromes, &tr.pauli, st);
            let means: Vec<Vec<f64>> = (0..schedule.replicas.max(2))
                .map(|r| {
                    let mut rng = seeded_rng(master_seed, i as u64, r as u64 + 1);
                    let mut chain = Chain::new(geo, &eta, model);
                    chain
                        .measure(regions, schedule.burn_in, schedule.sweeps, &mut rng)
                        .iter()
                        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                        .collect()
                })
                .collect();
            (0..regions.len())
                .map(|k| {
                    let nr = means.len();
                    let a = means.iter().map(|m| m[k]).sum::<f64>() / nr as f64;
                    let mut b = 0.0;
                    let mut pairs = 0;
                    for r1 in 0..nr {
                        for r2 in r1 + 1..nr {
                            b += means[r1][k] * means[r2][k];
                            pairs += 1;
                        }
                    }
                    (a, b / pairs as f64)
                })
                .collect()
        })
        .collect();
    Ok((0..regions.len())
        .map(|k| {
            let a: Vec<f64> = per_sample.iter().map(|v| v[k].0).collect();
            let b: Vec<f64> = per_sample.iter().map(|v| v[k].1).collect();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            DisorderAverage { w: Estimate::from_samples(&a), w2: Estimate::from_samples(&b), diff: Estimate::from_samples(&d) }
        })
        .collect())
}

/// First non-vanishing low-temperature order of `ln[⟨W⟩]`.
pub fn low_t_prediction(params: &ModelParams, region: &WilsonRegion, n: usize) -> f64 {
    let pi = region.projection.len() as f64;
    let area = if params.beta0 == f64::INFINITY { 0.0 } else { 4.0 * (-4.0 * params.beta0).exp() * pi * (n as f64 - pi) };
    let (b, k) = (params.beta, params.k);
    let space = (-4.0 * b).exp() + (-4.0 * k).exp() + 4.0 * (-2.0 * b - 2.0 * k).exp();
    -area - space * region.n_space_boundary as f64 - 6.0 * (-4.0 * k).exp() * region.n_time_boundary as f64
}

/// Weighted least squares of `y = a·area + b·perimeter` through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaLawFit {
    pub area: Estimate,
    pub perimeter: Estimate,
    pub chi2: f64,
    pub dof: usize,
}

/// Fits `-ln W` of each point `(area, perimeter, W, stderr of W)`.
pub fn fit_area_perimeter(points: &[(f64, f64, f64, f64)]) -> Result<AreaLawFit> {
    if points.len() < 2 {
        return Err(Error::Param("need at least two loops to separate area from perimeter".into()));
    }
    let (mut saa, mut sap, mut spp, mut say, mut spy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut rows = Vec::new();
    for &(a, p, w, e) in points {
        if w <= 0.0 {
            return Err(Error::Param(format!("non-positive Wilson loop {w} cannot be fitted in log space")));
        }
        let y = -w.ln();
        let sy = (e / w).max(1e-12);
        let wt = 1.0 / (sy * sy);
        saa += wt * a * a;
        sap += wt * a * p;
        spp += wt * p * p;
        say += wt * a * y;
        spy += wt * p * y;
        rows.push((a, p, y, wt));
    }
    let det = saa * spp - sap * sap;
    if det.abs() <= 1e-12 * saa * spp {
        return Err(Error::Param("area and perimeter are collinear over the loops given".into()));
    }
    let ca = (spp * say - sap * spy) / det;
    let cp = (saa * spy - sap * say) / det;
    let chi2: f64 = rows.iter().map(|&(a, p, y, wt)| wt * (y - ca * a - cp * p).powi(2)).sum();
    let n = points.len();
    Ok(AreaLawFit {
        area: Estimate { mean: ca, stderr: (spp / det).sqrt(), n },
        perimeter: Estimate { mean: cp, stderr: (saa / det).sqrt(), n },
        chi2,
        dof: n - 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{wilson_expectation, EnumBudget};
    use crate::lattice::{Rect, TimeBoundary, Torus2D};
    use crate::smmodel::column_trace_shifted;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st_b(d: usize, t: usize, b: TimeBoundary) -> Spacetime3D {
        Spacetime3D::new(Torus2D::new(d).unwrap(), t, b).unwrap()
    }

    #[test]
    fn cached_weight_tracks_recomputation() {
        let s = st_b(3, 3, TimeBoundary::FreeStart);
        let geo = McGeometry::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dis = DisorderConfig { eta: (0..s.n_plaquettes()).map(|_| if rng.random_bool(0.2) { -1 } else { 1 }).collect() };
        let p = ModelParams::new(0.8, 1.1, 0.9);
        let mut chain = Chain::new(&geo, &dis, &p);
        for _ in 0..2000 {
            let e = rng.random_range(0..s.n_edges());
            let before = chain.log_weight();
            let acc = chain.propose(&[e], &mut rng);
            let want = column_trace_shifted(chain.tau(), &dis, &p.layers(&s), &s);
            assert!((chain.log_weight() - want).abs() < 1e-9);
            if !acc {
                assert_eq!(chain.log_weight(), before);
            }
        }
        chain.sweep(&mut rng);
        let want = column_trace_shifted(chain.tau(), &dis, &p.layers(&s), &s);
        assert!((chain.log_weight() - want).abs() < 1e-9);
    }

    #[test]
    fn free_spins_have_zero_magnetisation() {
        let s = st_b(2, 2, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut chain = Chain::new(&geo, &DisorderConfig::clean(&s), &ModelParams::new(0.0, 0.0, 0.0));
        let mut m = Vec::new();
        for _ in 0..4000 {
            chain.sweep(&mut rng);
            m.push(chain.tau()[5] as f64);
        }
        assert!(Estimate::binned(&m, 20).sigmas_from(0.0) < 3.0);
    }

    #[test]
    fn empty_region_is_exact() {
        let s = st_b(2, 2, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = estimate_wilson(
            &DisorderConfig::clean(&s),
            &ModelParams::new(1.0, 1.0, 1.0),
            &[WilsonRegion::empty()],
            &geo,
            &McSchedule::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(est[0], Estimate::exact(1.0));
    }

    #[test]
    fn agrees_with_exact_engine() {
        let s = st_b(2, 2, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let regions = [
            WilsonRegion::rectangle(&s, Rect::Space { t: 1, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap(),
            WilsonRegion::rectangle(&s, Rect::TimeX { y: 0, x0: 0, wx: 1, t0: 1, h: 1 }).unwrap(),
        ];
        let p = ModelParams::new(0.7, 0.9, 0.8);
        let sched = McSchedule { burn_in: 100, sweeps: 4000, bins: 16, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let dis = DisorderConfig { eta: (0..s.n_plaquettes()).map(|_| if rng.random_bool(0.2) { -1 } else { 1 }).collect() };
            let est = estimate_wilson(&dis, &p, &regions, &geo, &sched, &mut rng).unwrap();
            for (r, e) in regions.iter().zip(&est) {
                let want = wilson_expectation(&dis, &p, r, &s, EnumBudget::default()).unwrap();
                worst = worst.max(e.sigmas_from(want));
            }
        }
        // 40 comparisons: allow the largest deviation a little beyond 3σ.
        assert!(worst < 4.0, "{worst}");
    }

    #[test]
    fn heat_bath_agrees_with_exact() {
        let s = st_b(2, 1, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let r = WilsonRegion::rectangle(&s, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap();
        let p = ModelParams::new(0.6, 0.8, 0.7);
        let dis = DisorderConfig::clean(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut chain = Chain::new(&geo, &dis, &p).with_rule(UpdateRule::HeatBath);
        let series = chain.measure(std::slice::from_ref(&r), 100, 8000, &mut rng);
        let want = wilson_expectation(&dis, &p, &r, &s, EnumBudget::default()).unwrap();
        assert!(Estimate::binned(&series[0], 16).sigmas_from(want) < 3.5);
    }

    #[test]
    fn deep_low_temperature() {
        let s = st_b(3, 3, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let r = WilsonRegion::rectangle(&s, Rect::TimeX { y: 1, x0: 1, wx: 1, t0: 1, h: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let est = estimate_wilson(
            &DisorderConfig::clean(&s),
            &ModelParams::new(4.0, 4.0, 4.0),
            &[r],
            &geo,
            &McSchedule { burn_in: 50, sweeps: 500, bins: 10, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        assert!(est[0].mean >= 0.99);
    }

    #[test]
    fn low_t_prediction_values() {
        let s = st_b(2, 2, TimeBoundary::FreeStart);
        let r = WilsonRegion::rectangle(&s, Rect::Space { t: 1, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap();
        let v = low_t_prediction(&ModelParams::new(2.0, 2.0, 2.0), &r, 4);
        assert!((v + 36.0 * (-8.0f64).exp()).abs() < 1e-15);
        let v = low_t_prediction(&ModelParams::new(f64::INFINITY, 2.0, 2.0), &r, 4);
        assert!((v + 24.0 * (-8.0f64).exp()).abs() < 1e-15);
        let s = st_b(4, 4, TimeBoundary::FreeStart);
        let tl = WilsonRegion::rectangle(&s, Rect::TimeX { y: 0, x0: 0, wx: 2, t0: 1, h: 2 }).unwrap();
        let a = low_t_prediction(&ModelParams::new(1.0, 2.0, 2.0), &tl, 16);
        let b = low_t_prediction(&ModelParams::new(1.0, 2.0, 2.0), &tl, 100);
        assert_eq!(a, b);
    }

    #[test]
    fn disorder_average_is_deterministic() {
        let s = st_b(2, 2, TimeBoundary::Open);
        let geo = McGeometry::new(&s);
        let r = [WilsonRegion::rectangle(&s, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 }).unwrap()];
        let noise = NoiseParams::new(1.0, 1.0, 1.0).unwrap();
        let sched = McSchedule { burn_in: 10, sweeps: 80, bins: 8, replicas: 2, samples: 6 };
        let a = disorder_average(&r, &noise, &ModelParams::from_noise(&noise), &geo, &sched, 9).unwrap();
        let b = disorder_average(&r, &noise, &ModelParams::from_noise(&noise), &geo, &sched, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_recovers_coefficients() {
        let pts: Vec<(f64, f64, f64, f64)> =
            [(1.0, 4.0), (2.0, 6.0), (3.0, 8.0), (4.0, 8.0)].iter().map(|&(a, p): &(f64, f64)| (a, p, (-(0.1 * a + 0.02 * p)).exp(), 1e-3)).collect();
        let f = fit_area_perimeter(&pts).unwrap();
        assert!((f.area.mean - 0.1).abs() < 1e-9 && (f.perimeter.mean - 0.02).abs() < 1e-9);
        assert!(f.chi2 < 1e-12);
    }

    #[test]
    fn fit_survives_a_zero_variance_loop() {
        let e = |m: f64, se: f64| Estimate { mean: m, stderr: se, n: 300 };
        let ws = [e(1.0, 0.0), e(0.9967, 3.3e-3), e(0.9966, 3.3e-3), e(0.9967, 3.3e-3), e(0.9966, 3.3e-3), e(0.9965, 3.3e-3)];
        let shapes = [(1.0, 4.0), (2.0, 6.0), (4.0, 8.0), (3.0, 8.0), (6.0, 10.0), (9.0, 12.0)];
        let pts: Vec<_> = shapes.iter().zip(&ws).map(|(&(a, p), w)| (a, p, w.mean, w.resolved_stderr())).collect();
        let f = fit_area_perimeter(&pts).unwrap();
        assert!(f.area.stderr.is_finite() && f.area.mean.abs() < 3.0 * f.area.stderr);
    }
}
