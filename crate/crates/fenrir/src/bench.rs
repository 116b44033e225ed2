//! Experiment driver: data generation, replicate batches, model selection,
//! and CSV emission.
//!
//! All randomness flows through one seedable, portable generator (ChaCha8).
//! Replicate r uses the stream seeded with `seed_base + r` and draws, in
//! this order: observation noise, then parameter initialisation (per
//! candidate, in candidate order). Given a config and seed base, batch
//! outputs are byte-identical across runs; rows are sorted before writing
//! and wall-clock readings never enter the CSVs.

use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    self, fit, fit_masked, init_params, FenrirObjective, FitOptions, FitResult, Method, Objective,
    RkObjective, Role, Schedule, PENALTY,
};
use crate::linearize::LinMode;
use crate::models::{self, BenchmarkProblem, LotkaVolterra};
use crate::regression::{fenrir_posterior, ObservationSet};
use crate::rk;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseLevel {
    Low,
    High,
}

impl std::fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseLevel::Low => write!(f, "low"),
            NoiseLevel::High => write!(f, "high"),
        }
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(NoiseLevel::Low),
            "high" => Ok(NoiseLevel::High),
            other => Err(Error::Config(format!("unknown noise level `{other}`"))),
        }
    }
}

/// One experiment batch: a model, a noise level, a method, replicates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: String,
    pub noise: NoiseLevel,
    pub replicates: usize,
    pub seed_base: u64,
    pub method: Method,
    pub mode: LinMode,
    pub nu: usize,
    pub dt: Option<f64>,
    pub out_dir: PathBuf,
    /// Use the printed predator-equation variant of the predator-prey model.
    pub lv_printed_form: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "lotka-volterra".into(),
            noise: NoiseLevel::Low,
            replicates: 20,
            seed_base: 1,
            method: Method::Fenrir,
            mode: LinMode::Ek1,
            nu: 5,
            dt: None,
            out_dir: PathBuf::from("out"),
            lv_printed_form: false,
        }
    }
}

impl ExperimentConfig {
    /// Stable FNV-1a hash of the canonical configuration string.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "model={};noise={};replicates={};seed={};method={};mode={};nu={};dt={};printed={}",
            self.model,
            self.noise,
            self.replicates,
            self.seed_base,
            self.method,
            self.mode,
            self.nu,
            self.dt.map(|v| fmt_f64(v)).unwrap_or_else(|| "default".into()),
            self.lv_printed_form,
        );
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canonical.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn problem(&self) -> Result<BenchmarkProblem> {
        let mut p = models::by_name(&self.model)
            .ok_or_else(|| Error::Config(format!("unknown model `{}`", self.model)))?;
        if self.lv_printed_form && self.model.starts_with("l") {
            if p.name == "lotka-volterra" {
                p.field = std::sync::Arc::new(LotkaVolterra { printed_form: true });
            }
        }
        Ok(p)
    }
}

/// One fitted replicate (for one candidate model).
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub replicate: usize,
    pub seed: u64,
    pub candidate: String,
    pub method: Method,
    pub status: String,
    pub nll: f64,
    pub trmse: f64,
    /// (name, estimate, absolute error against truth when known).
    pub params: Vec<(String, f64, Option<f64>)>,
}

/// Draw noisy observations from the tight-tolerance numerical truth.
pub fn generate_data(problem: &BenchmarkProblem, sigma2: f64, seed: u64) -> Result<ObservationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_data_with(problem, sigma2, &mut rng)
}

pub fn generate_data_with(
    problem: &BenchmarkProblem,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ObservationSet> {
    let t_end = problem
        .data_times
        .iter()
        .fold(problem.t0, |m, &t| m.max(t))
        .max(problem.t0 + problem.dt);
    let sol = rk::rk_solve(
        problem.field.as_ref(),
        &problem.ode_params_true,
        problem.true_y0().as_slice(),
        (problem.t0, t_end),
        rk::TRUTH_ABS_TOL,
        rk::TRUTH_REL_TOL,
    )?;
    let k = problem.obs_matrix.nrows();
    let sd = sigma2.sqrt();
    let values: Vec<DVector<f64>> = problem
        .data_times
        .iter()
        .map(|&t| {
            let mut u = &problem.obs_matrix * sol.eval(t);
            for i in 0..k {
                let z: f64 = StandardNormal.sample(rng);
                u[i] += sd * z;
            }
            u
        })
        .collect();
    ObservationSet::new(
        problem.data_times.clone(),
        values,
        problem.obs_matrix.clone(),
        DMatrix::identity(k, k) * sigma2,
    )
}

fn record_from_fit(
    problem: &BenchmarkProblem,
    space: &estimate::ParamSpace,
    sigma2: f64,
    replicate: usize,
    seed: u64,
    method: Method,
    out: &FitResult,
) -> RunRecord {
    let truth = problem.truth_for_errors(sigma2);
    let trmse = estimate::trmse(problem, space, &out.params);
    let params = space
        .defs
        .iter()
        .enumerate()
        .map(|(i, def)| {
            let est = out.params[i];
            let full_idx = problem.space.index_of(&def.name);
            let err = full_idx.and_then(|fi| truth[fi]).map(|t| (est - t).abs());
            (def.name.clone(), est, err)
        })
        .collect();
    RunRecord {
        replicate,
        seed,
        candidate: problem.name.clone(),
        method,
        status: out.status.to_string(),
        nll: out.nll,
        trmse,
        params,
    }
}

fn failed_record(
    problem: &BenchmarkProblem,
    replicate: usize,
    seed: u64,
    method: Method,
    why: &str,
) -> RunRecord {
    RunRecord {
        replicate,
        seed,
        candidate: problem.name.clone(),
        method,
        status: format!("failed:{why}"),
        nll: PENALTY,
        trmse: f64::INFINITY,
        params: Vec::new(),
    }
}

/// Fit one replicate of one problem with the configured method.
pub fn fit_replicate(
    problem: &BenchmarkProblem,
    obs: &ObservationSet,
    config: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
    replicate: usize,
    seed: u64,
) -> RunRecord {
    let sigma2 = problem.sigma2(config.noise == NoiseLevel::High);
    match config.method {
        Method::Fenrir => {
            let objective = match FenrirObjective::new(problem, obs, config.nu, config.mode, config.dt)
            {
                Ok(o) => o,
                Err(e) => return failed_record(problem, replicate, seed, config.method, &e.to_string()),
            };
            let init = init_params(&problem.space, Some(obs), rng);
            let out = fit(
                &objective,
                &problem.space,
                &init,
                problem.schedule,
                &FitOptions::default(),
                seed,
            );
            record_from_fit(problem, &problem.space, sigma2, replicate, seed, config.method, &out)
        }
        Method::Rk => {
            let objective = RkObjective::new(problem, obs);
            let space = objective.space().clone();
            let init = init_params(&space, Some(obs), rng);
            let out = fit(
                &objective,
                &space,
                &init,
                Schedule::JointOnly,
                &FitOptions::default(),
                seed,
            );
            record_from_fit(problem, &space, sigma2, replicate, seed, config.method, &out)
        }
    }
}

/// Run a replicate batch: fresh data and initialisation per replicate,
/// parallel over replicates, partial failures recorded per row.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let problem = config.problem()?;
    let sigma2 = problem.sigma2(config.noise == NoiseLevel::High);
    let mut records: Vec<RunRecord> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed_base + r as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match generate_data_with(&problem, sigma2, &mut rng) {
                Ok(obs) => fit_replicate(&problem, &obs, config, &mut rng, r, seed),
                Err(e) => failed_record(&problem, r, seed, config.method, &e.to_string()),
            }
        })
        .collect();
    records.sort_by_key(|r| r.replicate);

    std::fs::create_dir_all(&config.out_dir)?;
    write_fits_csv(&records, config, &config.out_dir.join("fits.csv"))?;
    write_summary_csv(&records, &config.out_dir.join("summary.csv"))?;
    Ok(records)
}

/// Model selection: per replicate, one data set from the true system,
/// all four candidates fitted jointly on it.
pub fn model_select(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let candidates = models::model_selection_candidates();
    let truth = config.problem().unwrap_or_else(|_| models::lotka_volterra());
    let truth = if truth.name == "lotka-volterra" {
        truth
    } else {
        models::lotka_volterra()
    };
    let sigma2 = truth.sigma2_low;
    let mut records: Vec<RunRecord> = (0..config.replicates)
        .into_par_iter()
        .flat_map(|r| {
            let seed = config.seed_base + r as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs = match generate_data_with(&truth, sigma2, &mut rng) {
                Ok(o) => o,
                Err(e) => {
                    return candidates
                        .iter()
                        .map(|c| failed_record(c, r, seed, config.method, &e.to_string()))
                        .collect::<Vec<_>>();
                }
            };
            candidates
                .iter()
                .map(|candidate| {
                    let objective =
                        match FenrirObjective::new(candidate, &obs, config.nu, config.mode, config.dt) {
                            Ok(o) => o,
                            Err(e) => {
                                return failed_record(candidate, r, seed, Method::Fenrir, &e.to_string())
                            }
                        };
                    let init = init_params(&candidate.space, Some(&obs), &mut rng);
                    let out = fit(
                        &objective,
                        &candidate.space,
                        &init,
                        Schedule::JointOnly,
                        &FitOptions::default(),
                        seed,
                    );
                    record_from_fit(candidate, &candidate.space, sigma2, r, seed, Method::Fenrir, &out)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let order = |name: &str| {
        candidates
            .iter()
            .position(|c| c.name == name)
            .unwrap_or(usize::MAX)
    };
    records.sort_by(|a, b| {
        (a.replicate, order(&a.candidate)).cmp(&(b.replicate, order(&b.candidate)))
    });

    std::fs::create_dir_all(&config.out_dir)?;
    write_fits_csv(&records, config, &config.out_dir.join("fits.csv"))?;
    write_selection_csv(&records, &candidates, &config.out_dir.join("selection.csv"))?;
    Ok(records)
}

/// Winner per replicate: lowest NLL, ties broken by candidate order.
pub fn selection_winners(records: &[RunRecord], candidates: &[BenchmarkProblem]) -> Vec<String> {
    let replicates = records.iter().map(|r| r.replicate).max().map_or(0, |m| m + 1);
    let mut winners = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut best: Option<(f64, &str)> = None;
        for c in candidates {
            if let Some(rec) = records
                .iter()
                .find(|x| x.replicate == r && x.candidate == c.name)
            {
                if best.map_or(true, |(nll, _)| rec.nll < nll) {
                    best = Some((rec.nll, &rec.candidate));
                }
            }
        }
        winners.push(best.map(|(_, n)| n.to_string()).unwrap_or_default());
    }
    winners
}

// ---------------------------------------------------------------------------
// Pendulum start sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub start: f64,
    pub method: Method,
    pub estimate: f64,
    pub nll: f64,
    pub status: String,
}

/// Staged pendulum fit from an explicit length start; initial values held at
/// their known truth when `fix_init` is set (the start-sweep protocol).
pub fn pendulum_fit_from(
    obs: &ObservationSet,
    l_start: f64,
    method: Method,
    fix_init: bool,
    nu: usize,
    mode: LinMode,
    seed: u64,
) -> Result<(FitResult, estimate::ParamSpace)> {
    let problem = models::pendulum();
    match method {
        Method::Fenrir => {
            let objective = FenrirObjective::new(&problem, obs, nu, mode, None)?;
            let space = problem.space.clone();
            let mut init = init_params(&space, Some(obs), &mut ChaCha8Rng::seed_from_u64(seed));
            init[space.index_of("L").unwrap()] = l_start;
            let mut active = vec![true; space.dim()];
            if fix_init {
                for i in space.indices(Role::InitValue) {
                    active[i] = false;
                }
                for (i, v) in problem.init_params_true.iter().enumerate() {
                    init[space.indices(Role::InitValue)[i]] = *v;
                }
            }
            let out = fit_masked(
                &objective,
                &space,
                &init,
                Schedule::NoiseDiffusionThenJoint,
                &active,
                &FitOptions::default(),
                seed,
            );
            Ok((out, space))
        }
        Method::Rk => {
            let objective = RkObjective::new(&problem, obs);
            let space = objective.space().clone();
            let mut init = init_params(&space, Some(obs), &mut ChaCha8Rng::seed_from_u64(seed));
            init[space.index_of("L").unwrap()] = l_start;
            let mut active = vec![true; space.dim()];
            if fix_init {
                for i in space.indices(Role::InitValue) {
                    active[i] = false;
                }
                for (i, v) in problem.init_params_true.iter().enumerate() {
                    init[space.indices(Role::InitValue)[i]] = *v;
                }
            }
            let out = fit_masked(
                &objective,
                &space,
                &init,
                Schedule::JointOnly,
                &active,
                &FitOptions::default(),
                seed,
            );
            Ok((out, space))
        }
    }
}

/// Start sweep over initial length guesses, both methods, shared data.
pub fn pendulum_sweep(
    starts: &[f64],
    seed: u64,
    nu: usize,
    mode: LinMode,
) -> Result<(Vec<SweepRow>, ObservationSet)> {
    let problem = models::pendulum();
    let obs = generate_data(&problem, problem.sigma2_low, seed)?;
    let rows: Vec<SweepRow> = starts
        .par_iter()
        .flat_map(|&start| {
            [Method::Fenrir, Method::Rk]
                .into_iter()
                .map(|method| {
                    match pendulum_fit_from(&obs, start, method, true, nu, mode, seed) {
                        Ok((out, space)) => SweepRow {
                            start,
                            method,
                            estimate: out.params[space.index_of("L").unwrap()],
                            nll: out.nll,
                            status: out.status.to_string(),
                        },
                        Err(e) => SweepRow {
                            start,
                            method,
                            estimate: f64::NAN,
                            nll: PENALTY,
                            status: format!("failed:{e}"),
                        },
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut rows = rows;
    rows.sort_by(|a, b| {
        a.start
            .partial_cmp(&b.start)
            .unwrap()
            .then_with(|| format!("{}", a.method).cmp(&format!("{}", b.method)))
    });
    Ok((rows, obs))
}

/// One-dimensional likelihood landscape: the objective as a function of a
/// single natural parameter, everything else held at `base`.
pub fn nll_sweep(
    objective: &FenrirObjective,
    space: &estimate::ParamSpace,
    base: &[f64],
    param: &str,
    values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let idx = space
        .index_of(param)
        .ok_or_else(|| Error::Config(format!("unknown parameter `{param}`")))?;
    Ok(values
        .par_iter()
        .map(|&v| {
            let mut natural = base.to_vec();
            natural[idx] = v;
            let w = space.to_unconstrained(&natural);
            (v, objective.eval(&w))
        })
        .collect())
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// 17 significant digits, locale-independent; round-trips through f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn param_columns(records: &[RunRecord]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        for (name, _, _) in &r.params {
            if !cols.iter().any(|c| c == name) {
                cols.push(name.clone());
            }
        }
    }
    cols
}

/// `fits.csv`: one row per (replicate, candidate, method); stable column
/// order, header carries tool version and config hash.
pub fn write_fits_csv(records: &[RunRecord], config: &ExperimentConfig, path: &Path) -> Result<()> {
    let cols = param_columns(records);
    let mut out = String::new();
    out.push_str(&format!(
        "# fenrir {} config_hash={} model={} noise={} method={} mode={} nu={} replicates={} seed_base={}\n",
        env!("CARGO_PKG_VERSION"),
        config.hash(),
        config.model,
        config.noise,
        config.method,
        config.mode,
        config.nu,
        config.replicates,
        config.seed_base,
    ));
    out.push_str("replicate,seed,candidate,method,status,nll,trmse");
    for c in &cols {
        out.push_str(&format!(",param_{c},err_{c}"));
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            r.replicate,
            r.seed,
            r.candidate,
            r.method,
            r.status,
            fmt_f64(r.nll),
            fmt_f64(r.trmse)
        ));
        for c in &cols {
            match r.params.iter().find(|(n, _, _)| n == c) {
                Some((_, est, err)) => {
                    out.push_str(&format!(
                        ",{},{}",
                        fmt_f64(*est),
                        err.map(fmt_f64).unwrap_or_default()
                    ));
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Deterministic linear-interpolation quantile of already finite values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarise(values: &mut Vec<f64>) -> (f64, f64, f64) {
    values.retain(|v| v.is_finite());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (
        quantile(values, 0.5),
        quantile(values, 0.1),
        quantile(values, 0.9),
    )
}

/// `summary.csv`: per (candidate, method, parameter) the median and decile
/// absolute errors; tRMSE and NLL rows use the raw values instead.
pub fn write_summary_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::from("candidate,method,param,median_abs_err,q10,q90\n");
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(c, m)| *c == r.candidate && *m == r.method) {
            keys.push((r.candidate.clone(), r.method));
        }
    }
    for (cand, method) in keys {
        let group: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.candidate == cand && r.method == method)
            .collect();
        let cols = {
            let mut cols: Vec<String> = Vec::new();
            for r in &group {
                for (name, _, _) in &r.params {
                    if !cols.iter().any(|c| c == name) {
                        cols.push(name.clone());
                    }
                }
            }
            cols
        };
        for c in &cols {
            let mut errs: Vec<f64> = group
                .iter()
                .filter_map(|r| {
                    r.params
                        .iter()
                        .find(|(n, _, _)| n == c)
                        .and_then(|(_, _, e)| *e)
                })
                .collect();
            if errs.is_empty() {
                continue;
            }
            let (med, q10, q90) = summarise(&mut errs);
            out.push_str(&format!(
                "{cand},{method},{c},{},{},{}\n",
                fmt_f64(med),
                fmt_f64(q10),
                fmt_f64(q90)
            ));
        }
        let mut trmse: Vec<f64> = group.iter().map(|r| r.trmse).collect();
        let (med, q10, q90) = summarise(&mut trmse);
        out.push_str(&format!(
            "{cand},{method},trmse,{},{},{}\n",
            fmt_f64(med),
            fmt_f64(q10),
            fmt_f64(q90)
        ));
        let mut nll: Vec<f64> = group.iter().map(|r| r.nll).collect();
        let (med, q10, q90) = summarise(&mut nll);
        out.push_str(&format!(
            "{cand},{method},nll,{},{},{}\n",
            fmt_f64(med),
            fmt_f64(q10),
            fmt_f64(q90)
        ));
    }
    write_atomic(path, &out)
}

fn write_selection_csv(
    records: &[RunRecord],
    candidates: &[BenchmarkProblem],
    path: &Path,
) -> Result<()> {
    let winners = selection_winners(records, candidates);
    let mut out = String::from("replicate,winner");
    for c in candidates {
        out.push_str(&format!(",nll_{}", c.name));
    }
    out.push('\n');
    for (r, winner) in winners.iter().enumerate() {
        out.push_str(&format!("{r},{winner}"));
        for c in candidates {
            let nll = records
                .iter()
                .find(|x| x.replicate == r && x.candidate == c.name)
                .map(|x| fmt_f64(x.nll))
                .unwrap_or_default();
            out.push_str(&format!(",{nll}"));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Posterior trajectory of a fitted replicate, for plotting: per data-grid
/// node the posterior mean and standard deviation of every observable state.
pub fn fitted_trajectory(
    problem: &BenchmarkProblem,
    obs: &ObservationSet,
    fitted: &[f64],
    nu: usize,
    mode: LinMode,
) -> Result<(Vec<f64>, Vec<Vec<(f64, f64)>>)> {
    let objective = FenrirObjective::new(problem, obs, nu, mode, None)?;
    let chain = objective.chain_for(fitted)?;
    let sigma2 = fitted[problem
        .space
        .index_of("sigma2")
        .ok_or_else(|| Error::Config("problem has no noise parameter".into()))?];
    let kappa = fitted[problem
        .space
        .index_of("kappa")
        .ok_or_else(|| Error::Config("problem has no diffusion parameter".into()))?];
    let k = obs.obs_dim();
    let r = DMatrix::identity(k, k) * sigma2;
    let post = fenrir_posterior(&chain, obs, kappa, &r)?;
    let d = problem.field.dim();
    let mut series = vec![Vec::with_capacity(chain.times.len()); d];
    for node in 0..chain.times.len() {
        for dim in 0..d {
            let mean = post.means[node][dim];
            let sd = post.cov_sqrts[node].row(dim).norm();
            series[dim].push((mean, sd));
        }
    }
    Ok((chain.times.clone(), series))
}
