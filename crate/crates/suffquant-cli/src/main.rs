//! Command-line driver. Each subcommand loads its inputs, calls one
//! library operation, and emits a versioned JSON report with sorted keys:
//!
//! ```text
//! {"invocation": {...}, "results": {...}, "schema_version": "1", "timing_ms": N}
//! ```
//!
//! Exit codes: 0 when the operation ran and every contained check holds,
//! 1 when the operation ran but a check failed (the report is still
//! written), 2 on usage or input errors (nothing is written). Reports go
//! to stdout, or with `--out PATH` to a file via write-then-rename so a
//! failed run never leaves a partial file.
//!
//! The environment variable `SUFFQUANT_THREADS` caps worker parallelism
//! (0 or unset means one worker per core). The driver itself performs no
//! arithmetic; every number in a report comes from a library call.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use suffquant::model::io::{self, LoadedModel};
use suffquant::model::{Axis, CostMatrix, Side, Statistic};
use suffquant::quantizer::{
    exhaustive_search, pbpo_restarts, PbpoOpts, SearchDomain, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use suffquant::scenarios::{gaussian_report, sensing_report, GaussianParams, SensingParams};
use suffquant::sufficiency::{
    conditional_independence, factorization_check, is_global_sufficient, minimal_sufficient,
    mutual_information_gap, posterior_match, validate_hci,
};
use suffquant::verify::{theorem_suite, SuiteConfig, SuiteId};

/// Report format version; bumped only for breaking layout changes.
const SCHEMA_VERSION: &str = "1";

/// Default tolerance for exact posterior and independence checks.
const DEFAULT_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Lib(#[from] suffquant::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "suffquant",
    version,
    about = "Sufficiency checks, quantizer design, and scenario studies for two-sensor inference"
)]
struct Cli {
    /// Master seed for randomized subcommands; echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model file and run its consistency diagnostics.
    Validate {
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Check one named statistic, or a side-1 and side-2 pair, for
    /// posterior preservation.
    Suff {
        /// Statistic name from the model file; repeat the flag with a
        /// side-1 then a side-2 name for a joint check.
        #[arg(long = "stat", required = true)]
        stats: Vec<String>,
        /// Parameter axis the posterior is taken over.
        #[arg(long, value_enum, default_value_t = ParamArg::Theta)]
        param: ParamArg,
        /// Tolerance on posterior deviations.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Compute the coarsest sufficient statistic for one sensor.
    Minimal {
        /// Sensor side, 1 or 2.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        side: u8,
        /// Parameter axis the posterior is taken over.
        #[arg(long, value_enum, default_value_t = ParamArg::Theta)]
        param: ParamArg,
        /// Tolerance for grouping proportional likelihood profiles.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Check conditional independence between two axis sets.
    Ci {
        /// First axis set, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<AxisArg>,
        /// Second axis set, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<AxisArg>,
        /// Conditioning axes, comma separated; omit for marginal
        /// independence.
        #[arg(long, value_delimiter = ',')]
        given: Vec<AxisArg>,
        /// Tolerance on factorization deviations.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Check both hidden-variable chains of a model with a w axis.
    Hci {
        /// Tolerance on factorization deviations.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Check the one-sided split g(x1) f(t(x1), theta, x2) and recover
    /// its factors.
    Factorize {
        /// Side-1 statistic name from the model file.
        #[arg(long)]
        stat: String,
        /// Tolerance on conditional-slice deviations.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Exact minimum-risk quantizer design by exhaustive enumeration.
    Search {
        /// Level caps as L1,L2.
        #[arg(long, value_parser = parse_levels)]
        levels: (usize, usize),
        /// `raw`, or `stat:NAME1,NAME2` naming a side-1 and a side-2
        /// statistic from the model file.
        #[arg(long, default_value = "raw")]
        domain: String,
        /// Cap on enumerated quantizer pairs.
        #[arg(long)]
        budget: Option<u128>,
        /// Model file (JSON); its cost matrix when present, 0-1 cost
        /// otherwise.
        model: PathBuf,
    },
    /// Multi-start cyclic descent over the raw sensor alphabets.
    Pbpo {
        /// Level caps as L1,L2.
        #[arg(long, value_parser = parse_levels)]
        levels: (usize, usize),
        /// Descent restarts; the first starts from contiguous blocks,
        /// the rest from seeded random maps.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Stop once a sweep improves risk by less than this.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Hard cap on sweeps per restart.
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Model file (JSON); its cost matrix when present, 0-1 cost
        /// otherwise.
        model: PathBuf,
    },
    /// Run one randomized verification suite.
    Suite {
        /// Suite name, e.g. `ci-reduction`; see the library for the list.
        #[arg(long, value_parser = parse_suite)]
        id: SuiteId,
        /// Independent trials.
        #[arg(long, default_value_t = 120)]
        trials: usize,
    },
    /// Monte Carlo scenario studies with sampled observations.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Location estimation from two n-coordinate Gaussian sensors:
    /// quantizing coordinate sums versus first coordinates.
    Gaussian {
        /// Coordinates per sensor.
        #[arg(long)]
        n: usize,
        /// Correlation share of the common location, in [0, 1).
        #[arg(long)]
        rho: f64,
        /// Monte Carlo rows.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Quantile bins per sensor statistic.
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// Quantizer levels per sensor.
        #[arg(long, default_value_t = 2)]
        levels: usize,
        /// Descent restarts per branch.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Write per-row designs of both branches as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// QPSK detection across fading sensors: quantizing envelopes versus
    /// real parts.
    Sensing {
        /// Number of sensors.
        #[arg(long, default_value_t = 1)]
        sensors: usize,
        /// Prior probability of the active hypothesis.
        #[arg(long = "p-h1", default_value_t = 0.5)]
        p_h1: f64,
        /// Channel gain variance per sensor.
        #[arg(long = "sigma2-h", default_value_t = 1.0)]
        sigma2_h: f64,
        /// Noise variance per sensor.
        #[arg(long = "sigma2-n", default_value_t = 1.0)]
        sigma2_n: f64,
        /// Monte Carlo rows.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Quantile bins per sensor statistic.
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// Quantizer levels per sensor.
        #[arg(long, default_value_t = 2)]
        levels: usize,
        /// Descent restarts per branch.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Write per-row designs of both branches as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

/// Axis name as accepted on the command line.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Theta,
    W,
    X1,
    X2,
}

impl AxisArg {
    fn axis(self) -> Axis {
        match self {
            AxisArg::Theta => Axis::Theta,
            AxisArg::W => Axis::W,
            AxisArg::X1 => Axis::X1,
            AxisArg::X2 => Axis::X2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            AxisArg::Theta => "theta",
            AxisArg::W => "w",
            AxisArg::X1 => "x1",
            AxisArg::X2 => "x2",
        }
    }
}

/// Parameter axis a posterior check conditions on.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamArg {
    Theta,
    W,
}

impl ParamArg {
    fn axis(self) -> Axis {
        match self {
            ParamArg::Theta => Axis::Theta,
            ParamArg::W => Axis::W,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ParamArg::Theta => "theta",
            ParamArg::W => "w",
        }
    }
}

fn parse_levels(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected L1,L2, got {s:?}"))?;
    let l1 = a.trim().parse().map_err(|e| format!("side-1 levels: {e}"))?;
    let l2 = b.trim().parse().map_err(|e| format!("side-2 levels: {e}"))?;
    Ok((l1, l2))
}

fn parse_suite(s: &str) -> Result<SuiteId, suffquant::Error> {
    SuiteId::parse(s)
}

/// What one subcommand produced: its echoed arguments, its results
/// block, and whether every contained check held.
struct Outcome {
    invocation: Value,
    results: Value,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("suffquant: {e}");
        return ExitCode::from(2);
    }
    let start = Instant::now();
    match run_command(&cli) {
        Ok(outcome) => {
            let report = envelope(&cli, outcome.invocation, outcome.results, &start);
            if let Err(e) = emit(cli.out.as_deref(), &report) {
                eprintln!("suffquant: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(if outcome.ok { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("suffquant: {e}");
            ExitCode::from(2)
        }
    }
}

/// Applies `SUFFQUANT_THREADS` to the global worker pool; 0 or unset
/// leaves the pool at one worker per core.
fn configure_threads() -> CliResult<()> {
    let Some(raw) = std::env::var_os("SUFFQUANT_THREADS") else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let n: usize = text.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "SUFFQUANT_THREADS must be a nonnegative integer, got {text:?}"
        ))
    })?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn envelope(cli: &Cli, invocation: Value, results: Value, start: &Instant) -> Value {
    let mut inv = invocation;
    let fields = inv.as_object_mut().expect("invocation echoes are objects");
    fields.insert("seed".into(), json!(cli.seed));
    if let Some(out) = &cli.out {
        fields.insert("out".into(), json!(out.display().to_string()));
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "invocation": inv,
        "results": results,
        "timing_ms": start.elapsed().as_millis() as u64,
    })
}

fn emit(out: Option<&Path>, report: &Value) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(suffquant::Error::from)?;
    text.push('\n');
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            // Write-then-rename so a failed run never leaves a partial
            // report behind.
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, &text)?;
            fs::rename(&tmp, path)?;
            Ok(())
        }
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Looks up a named statistic from a loaded model file.
fn statistic<'m>(loaded: &'m LoadedModel, name: &str) -> CliResult<&'m Statistic> {
    loaded.statistics.get(name).ok_or_else(|| {
        let known: Vec<&str> = loaded.statistics.keys().map(String::as_str).collect();
        CliError::Usage(format!(
            "model file defines no statistic {name:?}; available: {known:?}"
        ))
    })
}

/// The file's cost matrix, or 0-1 cost over the parameter alphabet.
fn cost_of(loaded: &LoadedModel) -> CostMatrix {
    loaded
        .cost
        .clone()
        .unwrap_or_else(|| CostMatrix::zero_one(loaded.model.theta()))
}

fn run_command(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Validate { model } => {
            let loaded = io::load_lenient(model)?;
            let d = loaded.model.validate();
            let m = &loaded.model;
            let invocation = json!({
                "command": "validate",
                "model": path_str(model),
            });
            let axes = json!({
                "theta": m.theta().len(),
                "w": m.axis_alphabet(Axis::W).map(|a| a.len()),
                "x1": m.x1().len(),
                "x2": m.x2().len(),
            });
            let statistics: Vec<&String> = loaded.statistics.keys().collect();
            let ok = d.pass;
            Ok(Outcome {
                invocation,
                results: json!({
                    "diagnostics": d,
                    "axes": axes,
                    "has_cost": loaded.cost.is_some(),
                    "statistics": statistics,
                }),
                ok,
            })
        }
        Command::Suff {
            stats,
            param,
            eps,
            model,
        } => {
            let loaded = io::load(model)?;
            let invocation = json!({
                "command": "suff",
                "model": path_str(model),
                "stats": stats,
                "param": param.name(),
                "eps": eps,
            });
            match stats.as_slice() {
                [name] => {
                    let t = statistic(&loaded, name)?;
                    let check = posterior_match(&loaded.model, t, param.axis(), *eps)?;
                    let gap = mutual_information_gap(&loaded.model, t, param.axis())?;
                    let ok = check.holds;
                    Ok(Outcome {
                        invocation,
                        results: json!({ "check": check, "information_gap": gap }),
                        ok,
                    })
                }
                [first, second] => {
                    let t1 = statistic(&loaded, first)?;
                    let t2 = statistic(&loaded, second)?;
                    let check =
                        is_global_sufficient(&loaded.model, t1, t2, param.axis(), *eps)?;
                    let ok = check.holds;
                    Ok(Outcome {
                        invocation,
                        results: json!({ "check": check }),
                        ok,
                    })
                }
                more => Err(CliError::Usage(format!(
                    "pass --stat once for a one-sided check or twice for a joint check, got {}",
                    more.len()
                ))),
            }
        }
        Command::Minimal {
            side,
            param,
            eps,
            model,
        } => {
            let loaded = io::load(model)?;
            let side_enum = if *side == 1 { Side::One } else { Side::Two };
            let t = minimal_sufficient(&loaded.model, side_enum, param.axis(), *eps)?;
            Ok(Outcome {
                invocation: json!({
                    "command": "minimal",
                    "model": path_str(model),
                    "side": side,
                    "param": param.name(),
                    "eps": eps,
                }),
                results: json!({
                    "class_count": t.class_count(),
                    "statistic": t,
                }),
                ok: true,
            })
        }
        Command::Ci {
            a,
            b,
            given,
            eps,
            model,
        } => {
            let loaded = io::load(model)?;
            let ax: Vec<Axis> = a.iter().map(|v| v.axis()).collect();
            let bx: Vec<Axis> = b.iter().map(|v| v.axis()).collect();
            let gx: Vec<Axis> = given.iter().map(|v| v.axis()).collect();
            let check = conditional_independence(&loaded.model, &ax, &bx, &gx, *eps)?;
            let names = |args: &[AxisArg]| -> Vec<&str> { args.iter().map(|v| v.name()).collect() };
            let ok = check.holds;
            Ok(Outcome {
                invocation: json!({
                    "command": "ci",
                    "model": path_str(model),
                    "a": names(a),
                    "b": names(b),
                    "given": names(given),
                    "eps": eps,
                }),
                results: json!({ "check": check }),
                ok,
            })
        }
        Command::Hci { eps, model } => {
            let loaded = io::load(model)?;
            let outcome = validate_hci(&loaded.model, *eps)?;
            let ok = outcome.is_valid();
            Ok(Outcome {
                invocation: json!({
                    "command": "hci",
                    "model": path_str(model),
                    "eps": eps,
                }),
                results: serde_json::to_value(&outcome).map_err(suffquant::Error::from)?,
                ok,
            })
        }
        Command::Factorize { stat, eps, model } => {
            let loaded = io::load(model)?;
            let t = statistic(&loaded, stat)?;
            let (check, factors) = factorization_check(&loaded.model, t, *eps)?;
            let ok = check.holds;
            Ok(Outcome {
                invocation: json!({
                    "command": "factorize",
                    "model": path_str(model),
                    "stat": stat,
                    "eps": eps,
                }),
                results: json!({ "check": check, "factors": factors }),
                ok,
            })
        }
        Command::Search {
            levels,
            domain,
            budget,
            model,
        } => {
            let loaded = io::load(model)?;
            let cost = cost_of(&loaded);
            let report = match domain.as_str() {
                "raw" => exhaustive_search(
                    &loaded.model,
                    &cost,
                    levels.0,
                    levels.1,
                    SearchDomain::Raw,
                    *budget,
                )?,
                other => {
                    let names = other.strip_prefix("stat:").ok_or_else(|| {
                        CliError::Usage(format!(
                            "domain must be `raw` or `stat:NAME1,NAME2`, got {other:?}"
                        ))
                    })?;
                    let (n1, n2) = names.split_once(',').ok_or_else(|| {
                        CliError::Usage(format!(
                            "statistic domain needs two comma-separated names, got {names:?}"
                        ))
                    })?;
                    let t1 = statistic(&loaded, n1.trim())?;
                    let t2 = statistic(&loaded, n2.trim())?;
                    exhaustive_search(
                        &loaded.model,
                        &cost,
                        levels.0,
                        levels.1,
                        SearchDomain::Statistics(t1, t2),
                        *budget,
                    )?
                }
            };
            Ok(Outcome {
                invocation: json!({
                    "command": "search",
                    "model": path_str(model),
                    "levels": [levels.0, levels.1],
                    "domain": domain,
                    "budget": budget,
                }),
                results: serde_json::to_value(&report).map_err(suffquant::Error::from)?,
                ok: true,
            })
        }
        Command::Pbpo {
            levels,
            restarts,
            tol,
            max_iter,
            model,
        } => {
            let loaded = io::load(model)?;
            let cost = cost_of(&loaded);
            let opts = PbpoOpts {
                tol: *tol,
                max_iter: *max_iter,
            };
            let outcome = pbpo_restarts(
                &loaded.model,
                &cost,
                levels.0,
                levels.1,
                *restarts,
                cli.seed,
                opts,
            )?;
            Ok(Outcome {
                invocation: json!({
                    "command": "pbpo",
                    "model": path_str(model),
                    "levels": [levels.0, levels.1],
                    "restarts": restarts,
                    "tol": tol,
                    "max_iter": max_iter,
                }),
                results: serde_json::to_value(&outcome).map_err(suffquant::Error::from)?,
                ok: true,
            })
        }
        Command::Suite { id, trials } => {
            let cfg = SuiteConfig {
                trials: *trials,
                seed: cli.seed,
                ..SuiteConfig::default()
            };
            let report = theorem_suite(*id, &cfg)?;
            let ok = report.passed;
            Ok(Outcome {
                invocation: json!({
                    "command": "suite",
                    "id": id.name(),
                    "trials": trials,
                }),
                results: serde_json::to_value(&report).map_err(suffquant::Error::from)?,
                ok,
            })
        }
        Command::Scenario(scenario) => run_scenario(cli, scenario),
    }
}

fn run_scenario(cli: &Cli, scenario: &ScenarioCommand) -> CliResult<Outcome> {
    match scenario {
        ScenarioCommand::Gaussian {
            n,
            rho,
            samples,
            bins,
            levels,
            restarts,
            csv,
        } => {
            let params = GaussianParams::new(*n, *rho)?;
            let report = gaussian_report(
                &params,
                *samples,
                *bins,
                *levels,
                *restarts,
                cli.seed,
                &PbpoOpts::default(),
                csv.as_deref(),
            )?;
            let ok = report.sufficiency_check.holds && report.hidden_ci_check.holds;
            Ok(Outcome {
                invocation: json!({
                    "command": "scenario gaussian",
                    "n": n,
                    "rho": rho,
                    "samples": samples,
                    "bins": bins,
                    "levels": levels,
                    "restarts": restarts,
                    "csv": csv.as_ref().map(|p| path_str(p)),
                }),
                results: serde_json::to_value(&report).map_err(suffquant::Error::from)?,
                ok,
            })
        }
        ScenarioCommand::Sensing {
            sensors,
            p_h1,
            sigma2_h,
            sigma2_n,
            samples,
            bins,
            levels,
            restarts,
            csv,
        } => {
            let params = SensingParams {
                sensors: *sensors,
                p_h1: *p_h1,
                sigma2_h: *sigma2_h,
                sigma2_n: *sigma2_n,
                ..SensingParams::qpsk()
            };
            let report = sensing_report(
                &params,
                *samples,
                *bins,
                *levels,
                *restarts,
                cli.seed,
                &PbpoOpts::default(),
                csv.as_deref(),
            )?;
            let ok = report.sufficiency_check.holds
                && report.hidden_ci_check.as_ref().is_none_or(|c| c.holds);
            Ok(Outcome {
                invocation: json!({
                    "command": "scenario sensing",
                    "sensors": sensors,
                    "p_h1": p_h1,
                    "sigma2_h": sigma2_h,
                    "sigma2_n": sigma2_n,
                    "samples": samples,
                    "bins": bins,
                    "levels": levels,
                    "restarts": restarts,
                    "csv": csv.as_ref().map(|p| path_str(p)),
                }),
                results: serde_json::to_value(&report).map_err(suffquant::Error::from)?,
                ok,
            })
        }
    }
}
