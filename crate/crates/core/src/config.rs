//! Run configuration: `key = value` lines under `[section]` headers, `#` comments,
//! comma-separated lists for grid axes.
//!
//! ```text
//! kind = decode
//! [lattice]
//! d = 3, 5
//! t_steps = 1, 8
//! boundary = open
//! [noise]
//! beta0 = inf, 1.5
//! beta = 3        # or: angle = 0.6
//! q = 0.01        # or: k = 2.3
//! [run]
//! seed = 7
//! trials = 2000
//! ```

use std::fmt::Write as _;

use crate::decode::Decoder;
use crate::lattice::{Rect, Spacetime3D, TimeBoundary, Torus2D, WilsonRegion};
use crate::mc::McSchedule;
use crate::noise::{beta_from_angle, k_from_q, NoiseParams};
use crate::smmodel::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Validate,
    Sample,
    Wilson,
    Decode,
    PhaseScan,
    FidelityScan,
    Realmeas,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Validate,
        Experiment::Sample,
        Experiment::Wilson,
        Experiment::Decode,
        Experiment::PhaseScan,
        Experiment::FidelityScan,
        Experiment::Realmeas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Sample => "sample",
            Experiment::Wilson => "wilson",
            Experiment::Decode => "decode",
            Experiment::PhaseScan => "phase-scan",
            Experiment::FidelityScan => "fidelity-scan",
            Experiment::Realmeas => "realmeas",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Readout strength given directly or as the coupling angle `t` with `tanh(β/2) = tan t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    Beta(Vec<f64>),
    Angle(Vec<f64>),
}

/// Pauli channel given as a flip rate or as the coupling `K`.
#[derive(Debug, Clone, PartialEq)]
pub enum PauliRate {
    Q(Vec<f64>),
    K(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilsonMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilsonSpec {
    /// Rectangles `(width, height)`; height is in steps for timelike loops.
    pub shapes: Vec<(usize, usize)>,
    pub orientation: Orientation,
    pub method: WilsonMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: Option<Experiment>,
    pub d: Vec<usize>,
    pub t_steps: Vec<usize>,
    pub boundary: TimeBoundary,
    pub beta0: Vec<f64>,
    pub readout: Readout,
    pub pauli: PauliRate,
    /// Off-Nishimori overrides of the Gibbs couplings.
    pub model_beta0: Option<f64>,
    pub model_beta: Option<f64>,
    pub model_k: Option<f64>,
    pub mc: McSchedule,
    pub seed: u64,
    pub trials: usize,
    pub decoder: Decoder,
    pub wilson: WilsonSpec,
    /// Phase-scan axes: preparation temperature `1/β0` and bulk temperature `1/β = 1/K`.
    pub scan_t0: Vec<f64>,
    pub scan_t: Vec<f64>,
    /// Realistic-readout angles.
    pub angles: Vec<f64>,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: None,
            d: vec![3],
            t_steps: vec![1],
            boundary: TimeBoundary::Open,
            beta0: vec![1.5],
            readout: Readout::Beta(vec![3.0]),
            pauli: PauliRate::Q(vec![0.01]),
            model_beta0: None,
            model_beta: None,
            model_k: None,
            mc: McSchedule { burn_in: 50, sweeps: 200, bins: 10, replicas: 2, samples: 32 },
            seed: 1,
            trials: 1000,
            decoder: Decoder::Matching,
            wilson: WilsonSpec { shapes: vec![(1, 1), (1, 2), (2, 2)], orientation: Orientation::Space, method: WilsonMethod::MonteCarlo },
            scan_t0: vec![0.5, 1.0],
            scan_t: vec![0.3, 0.5],
            angles: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            out: None,
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPoint {
    pub d: usize,
    pub t_steps: usize,
    pub noise: NoiseParams,
    pub model: ModelParams,
}

impl RunPoint {
    pub fn spacetime(&self, boundary: TimeBoundary) -> Result<Spacetime3D> {
        Spacetime3D::new(Torus2D::new(self.d)?, self.t_steps, boundary)
    }
}

fn cfg_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let out: Vec<T> = v
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| cfg_err(key, format!("cannot parse '{s}'"))))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(cfg_err(key, "empty list"));
    }
    Ok(out)
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| cfg_err(key, format!("cannot parse '{}'", v.trim())))
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut section = String::new();
        let (mut beta, mut angle, mut q, mut k) = (None, None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(&format!("line {}", lineno + 1), "expected key = value"))?;
            let key = key.trim();
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            let f = full.as_str();
            match f {
                "kind" => c.kind = Some(Experiment::parse(value.trim()).ok_or_else(|| cfg_err(f, "unknown experiment"))?),
                "lattice.d" => c.d = list(f, value)?,
                "lattice.t_steps" => c.t_steps = list(f, value)?,
                "lattice.boundary" => {
                    c.boundary = TimeBoundary::parse(value.trim()).ok_or_else(|| cfg_err(f, "expected open, ideal-final-round or free-start"))?
                }
                "noise.beta0" => c.beta0 = list(f, value)?,
                "noise.beta" => beta = Some(list(f, value)?),
                "noise.angle" => angle = Some(list(f, value)?),
                "noise.q" => q = Some(list(f, value)?),
                "noise.k" => k = Some(list(f, value)?),
                "model.beta0" => c.model_beta0 = Some(one(f, value)?),
                "model.beta" => c.model_beta = Some(one(f, value)?),
                "model.k" => c.model_k = Some(one(f, value)?),
                "mc.burn_in" => c.mc.burn_in = one(f, value)?,
                "mc.sweeps" => c.mc.sweeps = one(f, value)?,
                "mc.bins" => c.mc.bins = one(f, value)?,
                "mc.replicas" => c.mc.replicas = one(f, value)?,
                "mc.samples" => c.mc.samples = one(f, value)?,
                "run.seed" => c.seed = one(f, value)?,
                "run.trials" => c.trials = one(f, value)?,
                "run.decoder" => c.decoder = Decoder::parse(value.trim()).ok_or_else(|| cfg_err(f, "expected ml or mwpm"))?,
                "run.out" => c.out = Some(value.trim().to_string()),
                "wilson.shapes" => {
                    c.wilson.shapes = value
                        .split(',')
                        .map(|s| {
                            let (a, b) = s.trim().split_once('x').ok_or_else(|| cfg_err(f, format!("expected WxH, got '{}'", s.trim())))?;
                            Ok((one(f, a)?, one(f, b)?))
                        })
                        .collect::<Result<_>>()?
                }
                "wilson.orientation" => {
                    c.wilson.orientation = match value.trim() {
                        "space" => Orientation::Space,
                        "time" => Orientation::Time,
                        _ => return Err(cfg_err(f, "expected space or time")),
                    }
                }
                "wilson.method" => {
                    c.wilson.method = match value.trim() {
                        "exact" => WilsonMethod::Exact,
                        "mc" => WilsonMethod::MonteCarlo,
                        _ => return Err(cfg_err(f, "expected exact or mc")),
                    }
                }
                "scan.t0" => c.scan_t0 = list(f, value)?,
                "scan.t" => c.scan_t = list(f, value)?,
                "realmeas.angles" => c.angles = list(f, value)?,
                _ => return Err(cfg_err(f, "unknown key")),
            }
        }
        c.readout = match (beta, angle) {
            (Some(_), Some(_)) => return Err(cfg_err("noise.beta", "give either beta or angle, not both")),
            (Some(b), None) => Readout::Beta(b),
            (None, Some(a)) => Readout::Angle(a),
            (None, None) => c.readout,
        };
        c.pauli = match (q, k) {
            (Some(_), Some(_)) => return Err(cfg_err("noise.q", "give either q or k, not both")),
            (Some(q), None) => PauliRate::Q(q),
            (None, Some(k)) => PauliRate::K(k),
            (None, None) => c.pauli,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.iter().any(|&d| d < 2) {
            return Err(cfg_err("lattice.d", "distance must be at least 2"));
        }
        if self.t_steps.contains(&0) {
            return Err(cfg_err("lattice.t_steps", "need at least one round"));
        }
        if self.trials == 0 {
            return Err(cfg_err("run.trials", "must be positive"));
        }
        self.mc.validate().map_err(|e| cfg_err("mc", e.to_string()))?;
        self.points().map(|_| ())
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(k) = self.kind {
            let _ = writeln!(s, "kind = {}", k.name());
        }
        let _ = writeln!(s, "[lattice]\nd = {}\nt_steps = {}\nboundary = {}", join(&self.d), join(&self.t_steps), self.boundary.name());
        let _ = writeln!(s, "[noise]\nbeta0 = {}", join(&self.beta0));
        match &self.readout {
            Readout::Beta(b) => writeln!(s, "beta = {}", join(b)),
            Readout::Angle(a) => writeln!(s, "angle = {}", join(a)),
        }
        .ok();
        match &self.pauli {
            PauliRate::Q(q) => writeln!(s, "q = {}", join(q)),
            PauliRate::K(k) => writeln!(s, "k = {}", join(k)),
        }
        .ok();
        if self.model_beta0.is_some() || self.model_beta.is_some() || self.model_k.is_some() {
            s.push_str("[model]\n");
            for (name, v) in [("beta0", self.model_beta0), ("beta", self.model_beta), ("k", self.model_k)] {
                if let Some(v) = v {
                    let _ = writeln!(s, "{name} = {v}");
                }
            }
        }
        let m = &self.mc;
        let _ = writeln!(
            s,
            "[mc]\nburn_in = {}\nsweeps = {}\nbins = {}\nreplicas = {}\nsamples = {}",
            m.burn_in, m.sweeps, m.bins, m.replicas, m.samples
        );
        let _ = writeln!(s, "[run]\nseed = {}\ntrials = {}\ndecoder = {}", self.seed, self.trials, self.decoder.name());
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {o}");
        }
        let shapes: Vec<String> = self.wilson.shapes.iter().map(|(a, b)| format!("{a}x{b}")).collect();
        let _ = writeln!(
            s,
            "[wilson]\nshapes = {}\norientation = {}\nmethod = {}",
            shapes.join(", "),
            match self.wilson.orientation {
                Orientation::Space => "space",
                Orientation::Time => "time",
            },
            match self.wilson.method {
                WilsonMethod::Exact => "exact",
                WilsonMethod::MonteCarlo => "mc",
            }
        );
        let _ = writeln!(s, "[scan]\nt0 = {}\nt = {}", join(&self.scan_t0), join(&self.scan_t));
        let _ = writeln!(s, "[realmeas]\nangles = {}", join(&self.angles));
        s
    }

    fn betas(&self) -> Result<Vec<f64>> {
        match &self.readout {
            Readout::Beta(b) => Ok(b.clone()),
            Readout::Angle(a) => a.iter().map(|&t| beta_from_angle(t).map_err(|e| cfg_err("noise.angle", e.to_string()))).collect(),
        }
    }

    fn ks(&self) -> Result<Vec<f64>> {
        match &self.pauli {
            PauliRate::K(k) => Ok(k.clone()),
            PauliRate::Q(q) => q.iter().map(|&q| k_from_q(q).map_err(|e| cfg_err("noise.q", e.to_string()))).collect(),
        }
    }

    pub fn model_for(&self, noise: &NoiseParams) -> ModelParams {
        ModelParams::new(
            self.model_beta0.unwrap_or(noise.beta0),
            self.model_beta.unwrap_or(noise.beta),
            self.model_k.unwrap_or(noise.k),
        )
    }

    /// Cross product of every grid axis, in the order d, T, β0, β, K.
    pub fn points(&self) -> Result<Vec<RunPoint>> {
        let (betas, ks) = (self.betas()?, self.ks()?);
        let mut out = Vec::new();
        for &d in &self.d {
            for &t in &self.t_steps {
                for &b0 in &self.beta0 {
                    for &b in &betas {
                        for &k in &ks {
                            let noise = NoiseParams::new(b0, b, k).map_err(|e| cfg_err("noise", e.to_string()))?;
                            out.push(RunPoint { d, t_steps: t, noise, model: self.model_for(&noise) });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn regions(&self, st: &Spacetime3D) -> Result<Vec<WilsonRegion>> {
        let d = st.torus().d();
        self.wilson
            .shapes
            .iter()
            .map(|&(w, h)| {
                let rect = match self.wilson.orientation {
                    Orientation::Space => Rect::Space { t: st.t_steps() / 2, x0: 0, y0: 0, wx: w, wy: h },
                    Orientation::Time => Rect::TimeX { y: d / 2, x0: 0, wx: w, t0: st.t_steps().saturating_sub(h) / 2, h },
                };
                WilsonRegion::rectangle(st, rect).map_err(|e| cfg_err("wilson.shapes", e.to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_example() {
        let c = RunConfig::parse(
            "kind = decode\n[lattice]\nd = 3, 5 # two sizes\nt_steps = 1,8\n[noise]\nbeta0 = inf, 1.5\nangle = 0.6\nq = 0.01\n[run]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.kind, Some(Experiment::Decode));
        assert_eq!(c.d, vec![3, 5]);
        assert_eq!(c.points().unwrap().len(), 8);
        assert!(c.points().unwrap()[0].noise.beta0.is_infinite());
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse("[noise]\nbeta = 1\nangle = 0.3\n").unwrap_err();
        assert!(e.to_string().contains("noise.beta"), "{e}");
        let e = RunConfig::parse("[lattice]\nsize = 3\n").unwrap_err();
        assert!(e.to_string().contains("lattice.size"), "{e}");
        let e = RunConfig::parse("[noise]\nq = 0.7\n").unwrap_err();
        assert!(e.to_string().contains("noise.q"), "{e}");
        let e = RunConfig::parse("[lattice]\nd = 1\n").unwrap_err();
        assert!(e.to_string().contains("lattice.d"), "{e}");
    }

    #[test]
    fn model_overrides() {
        let c = RunConfig::parse("[noise]\nbeta0 = 1\nbeta = 2\nk = 3\n[model]\nbeta = 0.5\n").unwrap();
        let p = &c.points().unwrap()[0];
        assert_eq!((p.model.beta0, p.model.beta, p.model.k), (1.0, 0.5, 3.0));
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            prop::collection::vec(2usize..9, 1..3),
            prop::collection::vec(1usize..5, 1..3),
            prop::collection::vec(prop_oneof![Just(f64::INFINITY), 0.1f64..5.0], 1..3),
            any::<bool>(),
            prop::collection::vec(0.01f64..0.49, 1..3),
            any::<u64>(),
            prop::option::of(0.1f64..4.0),
            0usize..3,
        )
            .prop_map(|(d, t, b0, angle, q, seed, mb, bd)| RunConfig {
                kind: Some(Experiment::Decode),
                d,
                t_steps: t,
                boundary: [TimeBoundary::Open, TimeBoundary::IdealFinalRound, TimeBoundary::FreeStart][bd],
                beta0: b0,
                readout: if angle { Readout::Angle(vec![0.3, 0.7]) } else { Readout::Beta(vec![1.25, f64::INFINITY]) },
                pauli: PauliRate::Q(q),
                model_beta: mb,
                seed,
                ..RunConfig::default()
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(c in arb_config()) {
            let again = RunConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(&again, &c);
            prop_assert_eq!(again.to_text(), c.to_text());
        }
    }
}
