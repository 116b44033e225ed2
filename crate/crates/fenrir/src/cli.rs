//! Command-line front end.
//!
//! Subcommands: `solve` (one probabilistic solve at fixed parameters),
//! `fit` (replicate estimation batches), `model-select` (candidate ranking
//! by marginal likelihood), and `bench` (the full experiment suites).
//!
//! Every flag can also be supplied through a TOML config file passed with
//! `--config`; explicit command-line flags take precedence over the file,
//! which takes precedence over built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{
    self, fmt_f64, generate_data, model_select, nll_sweep, pendulum_fit_from, pendulum_sweep,
    run_experiment, ExperimentConfig, NoiseLevel,
};
use crate::error::{Error, Result};
use crate::estimate::{union_grid, FenrirObjective, Method};
use crate::linearize::LinMode;
use crate::models;
use crate::plot::{Band, LinePlot, Scatter, Series};
use crate::prior::{taylor_init, IwpPrior};
use crate::solver::{smooth, solve_ivp};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "fenrir",
    version,
    about = "ODE parameter estimation with physics-enhanced Gauss-Markov regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonOpts {
    /// TOML config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prior order ν of the integrated Wiener process.
    #[arg(long)]
    pub nu: Option<usize>,
    /// Linearisation mode: ek0 | ek1.
    #[arg(long)]
    pub mode: Option<String>,
    /// Solver step Δ (defaults to the model's configured step).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed; replicate r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Use the printed variant of the predator equation.
    #[arg(long)]
    pub lv_printed_form: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the probabilistic solver once and write the trajectory.
    Solve {
        /// Model name from the registry.
        #[arg(long)]
        model: Option<String>,
        /// ODE parameters, comma separated (defaults to the true values).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        /// Initial state, comma separated (defaults to the true value).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Option<Vec<f64>>,
        /// Diffusion scale applied to the posterior bands.
        #[arg(long)]
        kappa: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Estimate parameters over a replicate batch and write fits.csv.
    Fit {
        #[arg(long)]
        model: Option<String>,
        /// Noise level: low | high.
        #[arg(long)]
        noise: Option<String>,
        /// Estimation method: fenrir | rk.
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit all four candidate models per replicate and rank them.
    ModelSelect {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run an experiment suite end to end.
    Bench {
        /// lv | fhn | seir | pendulum | all
        #[arg(long)]
        suite: Option<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// Subset of the configuration that may come from a TOML file.
#[derive(Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub noise: Option<String>,
    pub method: Option<String>,
    pub suite: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub nu: Option<usize>,
    pub mode: Option<String>,
    pub dt: Option<f64>,
    pub out: Option<String>,
    pub lv_printed_form: Option<bool>,
    pub params: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub kappa: Option<f64>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("invalid config: {e}")))
        }
    }
}

fn merge_experiment(
    model: Option<String>,
    noise: Option<String>,
    method: Option<String>,
    common: &CommonOpts,
    file: &FileConfig,
) -> Result<ExperimentConfig> {
    let defaults = ExperimentConfig::default();
    let mode = common
        .mode
        .clone()
        .or_else(|| file.mode.clone())
        .map(|s| s.parse::<LinMode>())
        .transpose()?
        .unwrap_or(defaults.mode);
    let noise = noise
        .or_else(|| file.noise.clone())
        .map(|s| s.parse::<NoiseLevel>())
        .transpose()?
        .unwrap_or(defaults.noise);
    let method = method
        .or_else(|| file.method.clone())
        .map(|s| s.parse::<Method>())
        .transpose()?
        .unwrap_or(defaults.method);
    Ok(ExperimentConfig {
        model: model.or_else(|| file.model.clone()).unwrap_or(defaults.model),
        noise,
        replicates: common
            .replicates
            .or(file.replicates)
            .unwrap_or(defaults.replicates),
        seed_base: common.seed.or(file.seed).unwrap_or(defaults.seed_base),
        method,
        mode,
        nu: common.nu.or(file.nu).unwrap_or(defaults.nu),
        dt: common.dt.or(file.dt),
        out_dir: common
            .out
            .clone()
            .or_else(|| file.out.clone().map(PathBuf::from))
            .unwrap_or(defaults.out_dir),
        lv_printed_form: common.lv_printed_form || file.lv_printed_form.unwrap_or(false),
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Solve {
            model,
            params,
            y0,
            kappa,
            common,
        } => run_solve(model, params, y0, kappa, &common),
        Command::Fit {
            model,
            noise,
            method,
            common,
        } => run_fit(model, noise, method, &common),
        Command::ModelSelect { common } => run_model_select(&common),
        Command::Bench { suite, common } => run_bench(suite, &common),
    };
    match outcome {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_))) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn run_solve(
    model: Option<String>,
    params: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    kappa: Option<f64>,
    common: &CommonOpts,
) -> Result<i32> {
    let file = load_file_config(common.config.as_deref())?;
    let config = merge_experiment(model, None, None, common, &file)?;
    let problem = config.problem()?;
    let theta = params.or_else(|| file.params.clone()).unwrap_or_else(|| {
        problem.ode_params_true.clone()
    });
    let y0 = y0
        .or_else(|| file.y0.clone())
        .unwrap_or_else(|| problem.true_y0().as_slice().to_vec());
    let kappa = kappa.or(file.kappa).unwrap_or(1.0);
    if theta.len() != problem.field.param_dim() {
        return Err(Error::Config(format!(
            "model `{}` takes {} parameters, got {}",
            problem.name,
            problem.field.param_dim(),
            theta.len()
        )));
    }
    if y0.len() != problem.field.dim() {
        return Err(Error::Config(format!(
            "model `{}` has state dimension {}, got y0 of length {}",
            problem.name,
            problem.field.dim(),
            y0.len()
        )));
    }

    let prior = IwpPrior::new(config.nu, problem.field.dim())?;
    let init = taylor_init(problem.field.as_ref(), &theta, &y0, config.nu)?;
    let grid = union_grid(problem.t0, config.dt.unwrap_or(problem.dt), &problem.data_times)?;
    let (chain, diagnostics) = solve_ivp(
        problem.field.as_ref(),
        &theta,
        &prior,
        &init,
        problem.t0,
        &grid,
        config.mode,
    )?;
    let marginals = smooth(&chain);

    std::fs::create_dir_all(&config.out_dir)?;
    let d = problem.field.dim();
    let mut csv = String::from("t");
    for i in 0..d {
        csv.push_str(&format!(",mean_y{},sd_y{}", i + 1, i + 1));
    }
    csv.push('\n');
    let sk = kappa.sqrt();
    for (node, belief) in marginals.iter().enumerate() {
        csv.push_str(&fmt_f64(chain.times[node]));
        for i in 0..d {
            csv.push_str(&format!(
                ",{},{}",
                fmt_f64(belief.mean[i]),
                fmt_f64(sk * belief.marginal_std(i))
            ));
        }
        csv.push('\n');
    }
    std::fs::write(config.out_dir.join("solution.csv"), csv)?;

    let mut plot = LinePlot::new(
        &format!("{} probabilistic solve", problem.name),
        "t",
        "state",
    );
    for i in 0..d {
        plot.series.push(Series {
            label: format!("y{}", i + 1),
            points: marginals
                .iter()
                .enumerate()
                .map(|(n, b)| (chain.times[n], b.mean[i]))
                .collect(),
        });
        plot.bands.push(Band {
            points: marginals
                .iter()
                .enumerate()
                .map(|(n, b)| {
                    let sd = sk * b.marginal_std(i);
                    (chain.times[n], b.mean[i] - 2.0 * sd, b.mean[i] + 2.0 * sd)
                })
                .collect(),
            color_index: i,
        });
    }
    plot.save(&config.out_dir.join("solution.svg"))?;
    println!(
        "solved {} over {} nodes (max residual {:.3e}); wrote {}",
        problem.name,
        chain.len(),
        diagnostics
            .residual_norms
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max),
        config.out_dir.join("solution.csv").display()
    );
    Ok(EXIT_OK)
}

fn run_fit(
    model: Option<String>,
    noise: Option<String>,
    method: Option<String>,
    common: &CommonOpts,
) -> Result<i32> {
    let file = load_file_config(common.config.as_deref())?;
    let config = merge_experiment(model, noise, method, common, &file)?;
    let records = run_experiment(&config)?;
    let ok = records.iter().filter(|r| !r.status.starts_with("failed")).count();
    println!(
        "{} replicates fitted ({} ok) for {} [{}], outputs in {}",
        records.len(),
        ok,
        config.model,
        config.method,
        config.out_dir.display()
    );
    emit_fit_trajectory_plot(&config, &records)?;
    Ok(EXIT_OK)
}

fn emit_fit_trajectory_plot(config: &ExperimentConfig, records: &[bench::RunRecord]) -> Result<()> {
    if config.method != Method::Fenrir {
        return Ok(());
    }
    let Some(best) = records
        .iter()
        .filter(|r| !r.status.starts_with("failed"))
        .min_by(|a, b| a.nll.partial_cmp(&b.nll).unwrap())
    else {
        return Ok(());
    };
    let problem = config.problem()?;
    let sigma2 = problem.sigma2(config.noise == NoiseLevel::High);
    let obs = generate_data(&problem, sigma2, best.seed)?;
    let fitted: Vec<f64> = problem
        .space
        .defs
        .iter()
        .map(|d| {
            best.params
                .iter()
                .find(|(n, _, _)| *n == d.name)
                .map(|(_, v, _)| *v)
                .unwrap_or(0.0)
        })
        .collect();
    let (times, series) = bench::fitted_trajectory(&problem, &obs, &fitted, config.nu, config.mode)?;
    let mut plot = LinePlot::new(
        &format!("{} posterior (replicate {})", problem.name, best.replicate),
        "t",
        "state",
    );
    for (dim, pts) in series.iter().enumerate() {
        plot.series.push(Series {
            label: format!("y{} mean", dim + 1),
            points: times.iter().zip(pts).map(|(&t, &(m, _))| (t, m)).collect(),
        });
        plot.bands.push(Band {
            points: times
                .iter()
                .zip(pts)
                .map(|(&t, &(m, s))| (t, m - 2.0 * s, m + 2.0 * s))
                .collect(),
            color_index: dim,
        });
    }
    let k = obs.obs_dim();
    for row in 0..k {
        plot.scatter.push(Scatter {
            label: format!("data {}", row + 1),
            points: obs
                .times
                .iter()
                .zip(obs.values.iter())
                .map(|(&t, u)| (t, u[row]))
                .collect(),
        });
    }
    plot.save(&config.out_dir.join("trajectory.svg"))
}

fn run_model_select(common: &CommonOpts) -> Result<i32> {
    let file = load_file_config(common.config.as_deref())?;
    let config = merge_experiment(None, None, None, common, &file)?;
    let records = model_select(&config)?;
    let candidates = models::model_selection_candidates();
    let winners = bench::selection_winners(&records, &candidates);
    let true_wins = winners.iter().filter(|w| *w == "lotka-volterra").count();
    println!(
        "true model selected in {}/{} replicates; outputs in {}",
        true_wins,
        winners.len(),
        config.out_dir.display()
    );
    Ok(EXIT_OK)
}

fn run_bench(suite: Option<String>, common: &CommonOpts) -> Result<i32> {
    let file = load_file_config(common.config.as_deref())?;
    let suite = suite.or_else(|| file.suite.clone()).unwrap_or_else(|| "all".into());
    let base = merge_experiment(None, None, None, common, &file)?;
    let out_root = base.out_dir.clone();
    match suite.as_str() {
        "lv" => bench_comparison("lotka-volterra", true, &base, &out_root.join("lv"))?,
        "fhn" => bench_comparison("fitzhugh-nagumo", true, &base, &out_root.join("fhn"))?,
        "seir" => bench_comparison("seir", false, &base, &out_root.join("seir"))?,
        "pendulum" => bench_pendulum(&base, &out_root.join("pendulum"))?,
        "all" => {
            bench_comparison("lotka-volterra", true, &base, &out_root.join("lv"))?;
            bench_comparison("fitzhugh-nagumo", true, &base, &out_root.join("fhn"))?;
            bench_comparison("seir", false, &base, &out_root.join("seir"))?;
            bench_pendulum(&base, &out_root.join("pendulum"))?;
            let mut cfg = base.clone();
            cfg.out_dir = out_root.join("model-select");
            let records = model_select(&cfg)?;
            let candidates = models::model_selection_candidates();
            let winners = bench::selection_winners(&records, &candidates);
            let wins = winners.iter().filter(|w| *w == "lotka-volterra").count();
            println!("model-select: true model wins {}/{}", wins, winners.len());
        }
        other => {
            return Err(Error::Config(format!(
                "unknown suite `{other}` (expected lv, fhn, seir, pendulum, all)"
            )))
        }
    }
    Ok(EXIT_OK)
}

fn bench_comparison(
    model: &str,
    both_noises: bool,
    base: &ExperimentConfig,
    out: &Path,
) -> Result<()> {
    let noises = if both_noises {
        vec![NoiseLevel::Low, NoiseLevel::High]
    } else {
        vec![NoiseLevel::Low]
    };
    for noise in noises {
        let mut medians = Vec::new();
        for method in [Method::Fenrir, Method::Rk] {
            let cfg = ExperimentConfig {
                model: model.into(),
                noise,
                method,
                out_dir: out.join(format!("{noise}-{method}")),
                ..base.clone()
            };
            let records = run_experiment(&cfg)?;
            let mut vals: Vec<f64> = records.iter().map(|r| r.trmse).collect();
            vals.retain(|v| v.is_finite());
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = bench::quantile(&vals, 0.5);
            medians.push((method, median));
            if method == Method::Fenrir {
                emit_fit_trajectory_plot(&cfg, &records)?;
            }
        }
        println!(
            "{model} [{noise}]: median tRMSE {} = {:.4}, {} = {:.4}",
            medians[0].0, medians[0].1, medians[1].0, medians[1].1
        );
    }
    Ok(())
}

fn bench_pendulum(base: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let problem = models::pendulum();
    let obs = generate_data(&problem, problem.sigma2_low, base.seed_base)?;

    // Main staged fit from L₀ = 5, both methods, initial values estimated.
    let mut main_csv = String::from("method,start,estimate,nll,status\n");
    for method in [Method::Fenrir, Method::Rk] {
        let (outcome, space) =
            pendulum_fit_from(&obs, 5.0, method, false, base.nu, base.mode, base.seed_base)?;
        let l_hat = outcome.params[space.index_of("L").unwrap()];
        println!("pendulum {method}: L from 5.0 -> {l_hat:.4} ({})", outcome.status);
        main_csv.push_str(&format!(
            "{method},5.0,{},{},{}\n",
            fmt_f64(l_hat),
            fmt_f64(outcome.nll),
            outcome.status
        ));
        if method == Method::Fenrir {
            // Likelihood landscape at the tuned scale parameters.
            let objective = FenrirObjective::new(&problem, &obs, base.nu, base.mode, None)?;
            let values: Vec<f64> = (1..=200).map(|i| 0.05 * i as f64).collect();
            let curve = nll_sweep(&objective, &problem.space, &outcome.params, "L", &values)?;
            let mut plot = LinePlot::new("negative log-likelihood vs L", "L", "NLL");
            plot.series.push(Series {
                label: "NLL at tuned noise/diffusion".into(),
                points: curve.clone(),
            });
            plot.save(&out.join("landscape.svg"))?;
            let mut csv = String::from("L,nll\n");
            for (l, v) in &curve {
                csv.push_str(&format!("{},{}\n", fmt_f64(*l), fmt_f64(*v)));
            }
            std::fs::write(out.join("landscape.csv"), csv)?;
        }
    }
    std::fs::write(out.join("fit_main.csv"), main_csv)?;

    // Start sweep with known initial values.
    let starts: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    let (rows, _) = pendulum_sweep(&starts, base.seed_base, base.nu, base.mode)?;
    let mut csv = String::from("start,method,estimate,nll,status\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(row.start),
            row.method,
            fmt_f64(row.estimate),
            fmt_f64(row.nll),
            row.status
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv)?;
    let mut plot = LinePlot::new("recovered length vs starting value", "L start", "L estimate");
    for method in [Method::Fenrir, Method::Rk] {
        plot.series.push(Series {
            label: method.to_string(),
            points: rows
                .iter()
                .filter(|r| r.method == method)
                .map(|r| (r.start, r.estimate))
                .collect(),
        });
    }
    plot.save(&out.join("sweep.svg"))?;
    let hits = |method: Method| {
        rows.iter()
            .filter(|r| r.method == method && (r.estimate - 1.0).abs() <= 1e-2)
            .count()
    };
    println!(
        "pendulum sweep: fenrir recovers {}/{} starts, rk {}/{}",
        hits(Method::Fenrir),
        starts.len(),
        hits(Method::Rk),
        starts.len()
    );
    Ok(())
}
