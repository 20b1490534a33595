//! Experiment runner behind the command-line tool: each experiment turns a
//! [`RunConfig`] into CSV tables; [`write_run`] stores them with a JSON manifest.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig, RunPoint, WilsonMethod};
use crate::decode::{
    argmax_class, failure_rate_experiment, fast_fidelity, fidelity_vs_distance, infidelity_growth_exponent, ml_decode,
    regime_classify, FidelityKind, ReadoutModel, Verdict, DEFAULT_MARGIN,
};
use crate::exact::{class_sums_via, nishimori_wilson, wilson_expectation, DisorderEnumeration, EnumBudget, Route};
use crate::lattice::{Rect, Spacetime3D, TimeBoundary, Torus2D, WilsonRegion};
use crate::mc::{disorder_average, estimate_wilson, low_t_prediction, McGeometry, McSchedule};
use crate::noise::{
    history_probability, pauli_log_probability, sample_trajectory, syndromes_to_disorder, NoiseParams, PauliHistory,
    SyndromeHistory,
};
use crate::parity::{flip_prob, log_sum};
use crate::realmeas::{build_realistic_op, coherent_error_magnitude, povm_sum, printed_closed_form, CoeffClass};
use crate::smmodel::ModelParams;
use crate::statevec::{build_imperfect_logicals, imperfect_logical_zero, protocol_fidelity, trajectory_probability};
use crate::{seeded_rng, Error, Result};

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Table { name: name.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// False when a validation check failed.
    pub ok: bool,
}

fn cell<T: Display>(v: T) -> String {
    v.to_string()
}

const PARAM_COLUMNS: [&str; 7] = ["d", "t_steps", "boundary", "beta0", "beta", "k", "q"];

fn param_cells(d: usize, t: usize, boundary: TimeBoundary, p: &NoiseParams) -> Vec<String> {
    vec![cell(d), cell(t), cell(boundary.name()), cell(p.beta0), cell(p.beta), cell(p.k), cell(flip_prob(p.k))]
}

fn with_params(extra: &[&'static str]) -> Vec<&'static str> {
    PARAM_COLUMNS.iter().chain(extra).copied().collect()
}

fn point_seed(master: u64, i: usize) -> u64 {
    master.wrapping_add(i as u64)
}

pub fn run(kind: Experiment, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match kind {
        Experiment::Validate => validate(cfg.seed),
        Experiment::Sample => sample(cfg),
        Experiment::Wilson => wilson(cfg),
        Experiment::Decode => decode(cfg),
        Experiment::PhaseScan => phase_scan(cfg),
        Experiment::FidelityScan => fidelity_scan(cfg),
        Experiment::Realmeas => realmeas(cfg),
    }
}

fn sample(cfg: &RunConfig) -> Result<RunOutput> {
    let mut t = Table::new(
        "samples.csv",
        &with_params(&["trial", "rejected_flux_draws", "pauli_weight", "minus_readouts", "disorder_flips", "pauli_class"]),
    );
    for (i, pt) in cfg.points()?.iter().enumerate() {
        let st = pt.spacetime(cfg.boundary)?;
        for trial in 0..cfg.trials {
            let mut rng = seeded_rng(point_seed(cfg.seed, i), trial as u64, 0);
            let tr = sample_trajectory(&pt.noise, &st, &mut rng);
            let eta = syndromes_to_disorder(&tr.syndromes, &tr.pauli, &st);
            let mut row = param_cells(pt.d, pt.t_steps, cfg.boundary, &pt.noise);
            row.extend([
                cell(trial),
                cell(tr.rejected),
                cell(tr.pauli.n_errors()),
                cell(tr.syndromes.s.iter().filter(|&&s| s < 0).count()),
                cell(eta.eta.iter().filter(|&&e| e < 0).count()),
                cell(st.torus().crossing_class(&tr.pauli.total()).index()),
            ]);
            t.push(row);
        }
    }
    Ok(RunOutput { tables: vec![t], ok: true })
}

fn wilson(cfg: &RunConfig) -> Result<RunOutput> {
    let mut t = Table::new(
        "wilson.csv",
        &with_params(&[
            "model_beta0", "model_beta", "model_k", "orientation", "width", "height", "area", "perimeter", "method", "w",
            "w_stderr", "w2", "w2_stderr", "low_t_ln_w",
        ]),
    );
    for (i, pt) in cfg.points()?.iter().enumerate() {
        let st = pt.spacetime(cfg.boundary)?;
        let regions = cfg.regions(&st)?;
        let rows: Vec<(f64, f64, f64, f64)> = match cfg.wilson.method {
            WilsonMethod::Exact => regions
                .iter()
                .map(|r| {
                    let (w, w2) = nishimori_wilson(r, &pt.noise, &pt.model, &st, DisorderEnumeration::ByClass, EnumBudget::default())?;
                    Ok((w, 0.0, w2, 0.0))
                })
                .collect::<Result<_>>()?,
            WilsonMethod::MonteCarlo => {
                let geo = McGeometry::new(&st);
                disorder_average(&regions, &pt.noise, &pt.model, &geo, &cfg.mc, point_seed(cfg.seed, i))?
                    .iter()
                    .map(|a| (a.w.mean, a.w.stderr, a.w2.mean, a.w2.stderr))
                    .collect()
            }
        };
        for ((r, &(w, we, w2, w2e)), &(wx, h)) in regions.iter().zip(&rows).zip(&cfg.wilson.shapes) {
            let mut row = param_cells(pt.d, pt.t_steps, cfg.boundary, &pt.noise);
            row.extend([
                cell(pt.model.beta0),
                cell(pt.model.beta),
                cell(pt.model.k),
                cell(match cfg.wilson.orientation {
                    crate::config::Orientation::Space => "space",
                    crate::config::Orientation::Time => "time",
                }),
                cell(wx),
                cell(h),
                cell(r.area()),
                cell(r.perimeter()),
                cell(match cfg.wilson.method {
                    WilsonMethod::Exact => "exact",
                    WilsonMethod::MonteCarlo => "mc",
                }),
                cell(w),
                cell(we),
                cell(w2),
                cell(w2e),
                cell(low_t_prediction(&pt.model, r, st.n())),
            ]);
            t.push(row);
        }
    }
    Ok(RunOutput { tables: vec![t], ok: true })
}

fn failure_row(cfg: &RunConfig, pt: &RunPoint, seed: u64) -> Result<Vec<String>> {
    let st = pt.spacetime(cfg.boundary)?;
    let stats = failure_rate_experiment(&st, &pt.noise, cfg.decoder, cfg.trials, seed)?;
    let reg = regime_classify(pt.d, &pt.noise, DEFAULT_MARGIN);
    let mut row = param_cells(pt.d, pt.t_steps, cfg.boundary, &pt.noise);
    row.extend([
        cell(cfg.decoder.name()),
        cell(cfg.trials),
        cell(stats.rate.mean),
        cell(stats.rate.stderr),
        cell(stats.open_chains),
        cell(match reg.verdict {
            Verdict::BelowCrossover => "below",
            Verdict::AboveCrossover => "above",
        }),
    ]);
    Ok(row)
}

const FAILURE_COLUMNS: [&str; 6] = ["decoder", "n_trials", "failure_rate", "stderr", "open_chains", "crossover_regime"];

fn decode(cfg: &RunConfig) -> Result<RunOutput> {
    let mut t = Table::new("decode.csv", &with_params(&FAILURE_COLUMNS));
    for (i, pt) in cfg.points()?.iter().enumerate() {
        t.push(failure_row(cfg, pt, point_seed(cfg.seed, i))?);
    }
    Ok(RunOutput { tables: vec![t], ok: true })
}

/// Failure rate over preparation temperature `1/β0` and bulk temperature `1/β = 1/K`.
fn phase_scan(cfg: &RunConfig) -> Result<RunOutput> {
    let mut cols = vec!["temp0", "temp"];
    cols.extend(with_params(&FAILURE_COLUMNS));
    let mut t = Table::new("phase_scan.csv", &cols);
    let mut i = 0;
    for &d in &cfg.d {
        for &tt in &cfg.t_steps {
            for &t0 in &cfg.scan_t0 {
                for &tb in &cfg.scan_t {
                    let inv = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x };
                    let noise = NoiseParams::new(inv(t0), inv(tb), inv(tb))
                        .map_err(|e| Error::Config { key: "scan".into(), msg: e.to_string() })?;
                    let pt = RunPoint { d, t_steps: tt, noise, model: ModelParams::from_noise(&noise) };
                    let mut row = vec![cell(t0), cell(tb)];
                    row.extend(failure_row(cfg, &pt, point_seed(cfg.seed, i))?);
                    t.push(row);
                    i += 1;
                }
            }
        }
    }
    Ok(RunOutput { tables: vec![t], ok: true })
}

/// One round followed by matching; the lattice `d` list is the distance axis.
fn fidelity_scan(cfg: &RunConfig) -> Result<RunOutput> {
    let mut t = Table::new(
        "fidelity.csv",
        &[
            "readout_model", "d", "beta0", "beta", "k", "q", "n_trials", "readout_flip_rate", "state_fidelity", "state_stderr",
            "logical_fidelity", "logical_stderr",
        ],
    );
    let mut e = Table::new(
        "fidelity_exponents.csv",
        &["readout_model", "beta0", "beta", "k", "fidelity", "exponent", "stderr"],
    );
    let mut seen = Vec::new();
    for pt in cfg.points()? {
        if seen.contains(&pt.noise) {
            continue;
        }
        seen.push(pt.noise);
        let p = pt.noise;
        for (name, model) in [("weak", ReadoutModel::Weak), ("stochastic", ReadoutModel::Stochastic)] {
            let rows = fidelity_vs_distance(&p, &cfg.d, cfg.trials, point_seed(cfg.seed, seen.len() - 1), model)?;
            for r in &rows {
                t.push(vec![
                    cell(name),
                    cell(r.d),
                    cell(p.beta0),
                    cell(p.beta),
                    cell(p.k),
                    cell(flip_prob(p.k)),
                    cell(cfg.trials),
                    cell(r.readout_flip_rate),
                    cell(r.fidelity.mean),
                    cell(r.fidelity.stderr),
                    cell(r.logical_fidelity.mean),
                    cell(r.logical_fidelity.stderr),
                ]);
            }
            for (kname, kind) in [("state", FidelityKind::State), ("logical", FidelityKind::Logical)] {
                if let Ok(x) = infidelity_growth_exponent(&rows, kind) {
                    e.push(vec![cell(name), cell(p.beta0), cell(p.beta), cell(p.k), cell(kname), cell(x.mean), cell(x.stderr)]);
                }
            }
        }
    }
    Ok(RunOutput { tables: vec![t, e], ok: true })
}

fn realmeas(cfg: &RunConfig) -> Result<RunOutput> {
    let mut c = Table::new(
        "realmeas_coefficients.csv",
        &["t", "s", "coefficient_class", "value_re", "value_im", "printed_re", "printed_im"],
    );
    let mut m = Table::new("realmeas_magnitude.csv", &["t", "coherent_error_magnitude"]);
    for &t in &cfg.angles {
        for s in [1i8, -1] {
            let op = build_realistic_op(t, s)?;
            let printed = printed_closed_form(t, s);
            for cls in CoeffClass::ALL {
                let v = op.coeff(cls);
                let pv = printed[cls.weight()];
                c.push(vec![cell(t), cell(s), cell(cls.name()), cell(v.re), cell(v.im), cell(pv.re), cell(pv.im)]);
            }
        }
        m.push(vec![cell(t), cell(coherent_error_magnitude(t)?)]);
    }
    Ok(RunOutput { tables: vec![c, m], ok: true })
}

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

/// Fast cross-checks between the independent engines on small lattices.
fn validate(seed: u64) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let tor = Torus2D::new(2)?;
    let s1 = Spacetime3D::new(tor.clone(), 1, TimeBoundary::Open)?;
    let s2 = Spacetime3D::new(tor.clone(), 2, TimeBoundary::Open)?;
    let noise = NoiseParams::new(1.1, 0.9, 1.3)?;
    let model = ModelParams::from_noise(&noise);

    let mut gram: f64 = 0.0;
    let ls = build_imperfect_logicals(&tor, noise.beta0)?;
    for i in 0..4 {
        for j in 0..4 {
            gram = gram.max((ls[i].inner(&ls[j]).norm() - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(Check { name: "imperfect logical states orthonormal", value: gram, tol: 1e-10 });

    let mut povm: f64 = 0.0;
    for t in [0.7, 2.2] {
        let sum = povm_sum(t)?;
        for i in 0..16 {
            for j in 0..16 {
                povm = povm.max((sum[i * 16 + j].norm() - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    checks.push(Check { name: "realistic readout POVM completeness", value: povm, tol: 1e-12 });

    let psi = imperfect_logical_zero(&tor, noise.beta0)?;
    let mut hist: f64 = 0.0;
    let mut fid: f64 = 0.0;
    for _ in 0..50 {
        let pauli = PauliHistory::from_mask(&s2, rng.random::<u64>() & 0xffff);
        let syn = SyndromeHistory::from_mask(&s2, rng.random::<u64>() & 0xff);
        let a = trajectory_probability(&psi, &pauli, &syn, &noise, &s2);
        hist = hist.max((a - history_probability(&syn, &pauli, &noise, &s2).exp()).abs());
        let corr: Vec<usize> = (0..8).filter(|_| rng.random_bool(0.3)).collect();
        if let (Some(x), Some(y)) =
            (protocol_fidelity(&psi, &pauli, &syn, &corr, &noise, &s2), fast_fidelity(&pauli, &syn, &corr, &noise, &s2))
        {
            fid = fid.max((x - y).abs());
        }
    }
    checks.push(Check { name: "statevector vs closed-form history probability", value: hist, tol: 1e-10 });
    checks.push(Check { name: "statevector vs closed-form fidelity", value: fid, tol: 1e-9 });

    let mut routes: f64 = 0.0;
    for _ in 0..5 {
        let tr = sample_trajectory(&noise, &s1, &mut rng);
        let eta = syndromes_to_disorder(&tr.syndromes, &tr.pauli, &s1);
        let a = class_sums_via(&eta, &model, &s1, None, Route::BruteForce)?.log_z();
        let b = class_sums_via(&eta, &model, &s1, None, Route::TimeSlicing)?.log_z();
        routes = routes.max((a - b).abs());
    }
    checks.push(Check { name: "exact engine routes agree", value: routes, tol: 1e-10 });

    let region = WilsonRegion::rectangle(&s1, Rect::Space { t: 0, x0: 0, y0: 0, wx: 1, wy: 1 })?;
    let (w, w2) = nishimori_wilson(&region, &noise, &model, &s1, DisorderEnumeration::Full, EnumBudget::default())?;
    checks.push(Check { name: "Nishimori identity (exact)", value: (w - w2).abs(), tol: 1e-9 });

    let tr = sample_trajectory(&noise, &s1, &mut rng);
    let eta = syndromes_to_disorder(&tr.syndromes, &tr.pauli, &s1);
    let exact = wilson_expectation(&eta, &model, &region, &s1, EnumBudget::default())?;
    let geo = McGeometry::new(&s1);
    let sched = McSchedule { burn_in: 200, sweeps: 20_000, bins: 20, replicas: 1, samples: 1 };
    let est = estimate_wilson(&eta, &model, std::slice::from_ref(&region), &geo, &sched, &mut seeded_rng(seed, 0, 1))?[0];
    checks.push(Check { name: "Monte Carlo vs exact Wilson loop (sigmas)", value: est.sigmas_from(exact), tol: 4.0 });

    let mut ml: f64 = 0.0;
    for sm in 0..16 {
        let syn = SyndromeHistory::from_mask(&s1, sm);
        let r = ml_decode(&syn, &model, &s1, EnumBudget::default())?;
        let mut terms: [Vec<f64>; 4] = Default::default();
        for xm in 0..256 {
            let x = PauliHistory::from_mask(&s1, xm);
            terms[tor.crossing_class(&x.total()).index()]
                .push(pauli_log_probability(&x, &noise, &s1) + history_probability(&syn, &x, &noise, &s1));
        }
        let lz = terms.map(|v| log_sum(&v));
        if argmax_class(&lz) != r.class {
            ml += 1.0;
        }
    }
    checks.push(Check { name: "ML decoder vs brute-force posterior (mismatches)", value: ml, tol: 0.0 });

    let mut t = Table::new("validate.csv", &["check", "value", "tolerance", "pass"]);
    let mut ok = true;
    for c in &checks {
        let pass = c.value <= c.tol;
        ok &= pass;
        t.push(vec![c.name.to_string(), cell(c.value), cell(c.tol), cell(pass)]);
    }
    Ok(RunOutput { tables: vec![t], ok })
}

/// Git-style content hash: SHA-256 over `blob <len>\0<content>`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `kind`, writes its tables under `out`, and writes `manifest.json` beside them.
pub fn write_run(kind: Experiment, cfg: &RunConfig, out: &Path, threads: usize) -> Result<(RunOutput, PathBuf)> {
    let start = Instant::now();
    let result = run(kind, cfg)?;
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for t in &result.tables {
        let csv = t.to_csv();
        std::fs::write(out.join(&t.name), &csv)?;
        files.push(serde_json::json!({ "file": t.name, "rows": t.rows.len(), "sha256": content_hash(csv.as_bytes()) }));
    }
    let text = cfg.to_text();
    let manifest = serde_json::json!({
        "experiment": kind.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "threads": threads,
        "config": text,
        "input_hash": content_hash(text.as_bytes()),
        "outputs": files,
        "ok": result.ok,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let path = out.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&path, body)?;
    Ok((result, path))
}
