use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use idde_core::cases::{self, RunSettings, REPRODUCIBLE};
use idde_core::criteria::{check_scenario, check_wazewska, CheckOptions, Lambda2Choice};
use idde_core::grid::GridSettings;
use idde_core::integrator::{integrate, StepControl};
use idde_core::model::{build_scenario_with, Rhs, Scenario};
use idde_core::output::{attractivity_csv, json_bytes, profile_csv, report_json, trajectory_csv, RunManifest};
use idde_core::wazewska::{find_periodic, verify_attractivity, FinderOptions, PeriodicSolution, WazewskaModel};

/// Simulation and stability checks for scalar impulsive delay equations.
///
/// Grid densities for validation, extrema and sup searches default to
/// 4096/4096/1024 points per period; set IDDE_SEED_GRID=N to use N/N/N÷4.
#[derive(Parser)]
#[command(name = "idde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory as `t,value,side` CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every applicable stability criterion and write a JSON report.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Periodic solution JSON from `find-periodic`; population models only.
        #[arg(long)]
        periodic_solution: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Use the exponential-majorant slope bound instead of the direct one.
        #[arg(long)]
        exponential_lambda: bool,
        /// Sup horizon for scenarios without a common period.
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
    },
    /// Locate the positive periodic solution of a population model by
    /// iterating the period map. Writes `<out>.csv` and `<out>.json`.
    FindPeriodic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_periods: usize,
        /// Step as a fraction of the period.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Constant starting level; defaults to the equilibrium of the mean coefficients.
        #[arg(long)]
        start_level: Option<f64>,
        /// Output path stem.
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure convergence to a periodic solution from scaled histories.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        nstar: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,2,10")]
        scales: Vec<f64>,
        /// Number of periods.
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a bundled case end to end; exits 1 when a target is missed.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(REPRODUCIBLE))]
        case: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Directory for the outputs; defaults to the manifest's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// List the bundled scenarios, or print one scenario's JSON.
    Cases {
        #[arg(long)]
        show: Option<String>,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Acceptance(String),
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Acceptance(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

fn config<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn numeric<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Numeric(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(numeric)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(numeric)
}

fn load_scenario(path: &Path, grid: &GridSettings) -> Result<(Scenario, Value), Failure> {
    let text = read(path)?;
    let scenario = build_scenario_with(&text, grid).map_err(config)?;
    let resolved = serde_json::to_value(scenario.to_config()).map_err(config)?;
    Ok((scenario, resolved))
}

fn load_model(path: &Path, grid: &GridSettings) -> Result<(WazewskaModel, Value), Failure> {
    let (scenario, resolved) = load_scenario(path, grid)?;
    let model = WazewskaModel::from_scenario(scenario, grid).map_err(config)?;
    Ok((model, resolved))
}

fn load_nstar(path: &Path) -> Result<PeriodicSolution, Failure> {
    let text = read(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing periodic solution {}", path.display()))
        .map_err(config)
}

/// `file.ext` -> `file.manifest.json`.
fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}

/// Writes each output and a manifest next to the first one.
fn emit(mut manifest: RunManifest, files: Vec<(PathBuf, Vec<u8>)>) -> Result<(), Failure> {
    for (path, bytes) in &files {
        write(path, bytes)?;
        manifest.outputs.push(path.display().to_string());
    }
    let target = manifest_path(&files[0].0);
    write(&target, &json_bytes(&manifest))
}

fn stem_with(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn run(command: Command, grid: GridSettings) -> Result<(), Failure> {
    match command {
        Command::Simulate { config: cfg, t_end, step, out } => {
            let (scenario, resolved) = load_scenario(&cfg, &grid)?;
            let traj = integrate(&scenario, StepControl::new(step), t_end).map_err(numeric)?;
            let settings = json!({"t_end": t_end, "step": step, "out": out});
            emit(
                RunManifest::new("simulate", resolved, settings, grid),
                vec![(out, trajectory_csv(&traj))],
            )
        }
        Command::Check {
            config: cfg,
            periodic_solution,
            report,
            exponential_lambda,
            horizon,
        } => {
            let opts = CheckOptions {
                grid,
                horizon,
                lambda2: if exponential_lambda {
                    Lambda2Choice::Exponential
                } else {
                    Lambda2Choice::Direct
                },
                ..CheckOptions::default()
            };
            let (scenario, resolved) = load_scenario(&cfg, &grid)?;
            let results = if matches!(scenario.rhs, Rhs::Wazewska { .. }) {
                let model = WazewskaModel::from_scenario(scenario, &grid).map_err(config)?;
                let n_star = periodic_solution.as_deref().map(load_nstar).transpose()?;
                if let Some(n) = &n_star {
                    n.check_against(&model).map_err(config)?;
                }
                check_wazewska(&model, n_star.as_ref(), &opts)
            } else {
                if periodic_solution.is_some() {
                    return Err(config(anyhow!(
                        "--periodic-solution applies only to population models"
                    )));
                }
                check_scenario(&scenario, &opts)
            };
            for r in &results {
                eprintln!("{:<10} {:?}", serde_json::to_value(r.id).unwrap_or_default().as_str().unwrap_or(""), r.verdict);
            }
            let settings = json!({
                "periodic_solution": periodic_solution,
                "report": report,
                "options": opts,
            });
            emit(
                RunManifest::new("check", resolved, settings, grid),
                vec![(report, report_json(&results))],
            )
        }
        Command::FindPeriodic {
            config: cfg,
            tol,
            max_periods,
            step,
            start_level,
            out,
        } => {
            let (model, resolved) = load_model(&cfg, &grid)?;
            let opts = FinderOptions {
                step: step * model.omega(),
                start_level,
            };
            let n_star = find_periodic(&model, tol, max_periods, opts).map_err(numeric)?;
            eprintln!(
                "converged after {} periods, residual {:e}",
                n_star.iterations, n_star.residual
            );
            let settings = json!({
                "tol": tol,
                "max_periods": max_periods,
                "step": step,
                "start_level": start_level,
                "out": out,
            });
            emit(
                RunManifest::new("find-periodic", resolved, settings, grid),
                vec![
                    (stem_with(&out, ".json"), json_bytes(&n_star)),
                    (stem_with(&out, ".csv"), profile_csv(&n_star.profile)),
                ],
            )
        }
        Command::Verify {
            config: cfg,
            nstar,
            scales,
            horizon,
            tol,
            report,
        } => {
            let (model, resolved) = load_model(&cfg, &grid)?;
            let n_star = load_nstar(&nstar)?;
            n_star.check_against(&model).map_err(config)?;
            let rep = verify_attractivity(&model, &n_star, &scales, horizon, tol).map_err(numeric)?;
            eprintln!("attracting: {}", rep.attracting);
            let settings = json!({
                "nstar": nstar,
                "scales": scales,
                "horizon": horizon,
                "tol": tol,
                "report": report,
            });
            emit(
                RunManifest::new("verify", resolved, settings, grid),
                vec![
                    (report.clone(), json_bytes(&rep)),
                    (report.with_extension("csv"), attractivity_csv(&rep)),
                ],
            )
        }
        Command::Reproduce { case, out_dir } => {
            let settings = RunSettings {
                check: CheckOptions {
                    grid,
                    ..CheckOptions::default()
                },
                ..RunSettings::default()
            };
            let rep = cases::reproduce(&case, &settings).map_err(|e| {
                if e.is_config() {
                    config(e)
                } else {
                    numeric(e)
                }
            })?;
            let files: Vec<_> = rep
                .files
                .iter()
                .map(|(name, bytes)| (out_dir.join(name), bytes.clone()))
                .collect();
            let mut manifest = RunManifest::new(
                "reproduce",
                json!({"case": case}),
                serde_json::to_value(&settings).map_err(numeric)?,
                grid,
            );
            manifest.outputs = Vec::new();
            for (path, bytes) in &files {
                write(path, bytes)?;
                manifest.outputs.push(path.display().to_string());
            }
            write(&out_dir.join("manifest.json"), &json_bytes(&manifest))?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if rep.passed() {
                Ok(())
            } else {
                Err(Failure::Acceptance(format!("{case}: acceptance targets missed")))
            }
        }
        Command::Replay { manifest, out_dir } => replay(&manifest, out_dir),
        Command::Cases { show: Some(id) } => {
            let case = cases::find_case(&id).ok_or_else(|| config(anyhow!("unknown case `{id}`")))?;
            println!("{}", case.config);
            Ok(())
        }
        Command::Cases { show: None } => {
            for c in cases::bundled() {
                println!("{:<24} {:?}  {}", c.id, c.kind, c.summary);
            }
            Ok(())
        }
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, Failure> {
    v.get(key).ok_or_else(|| config(anyhow!("manifest lacks `{key}`")))
}

fn num(v: &Value, key: &str) -> Result<f64, Failure> {
    field(v, key)?
        .as_f64()
        .ok_or_else(|| config(anyhow!("manifest field `{key}` is not a number")))
}

/// Rebuilds the original command from a manifest, with outputs redirected
/// into `out_dir` under their original file names.
fn replay(path: &Path, out_dir: Option<PathBuf>) -> Result<(), Failure> {
    let m: RunManifest = serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing manifest {}", path.display()))
        .map_err(config)?;
    let dir = out_dir.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&dir).map_err(numeric)?;
    let scratch = dir.join(".replay-config.json");
    let s = &m.settings;
    let rename = |key: &str| -> Result<PathBuf, Failure> {
        let p = field(s, key)?
            .as_str()
            .ok_or_else(|| config(anyhow!("manifest field `{key}` is not a path")))?;
        let name = Path::new(p).file_name().ok_or_else(|| config(anyhow!("bad path {p}")))?;
        Ok(dir.join(name))
    };
    let command = match m.subcommand.as_str() {
        "reproduce" => Command::Reproduce {
            case: field(&m.config, "case")?
                .as_str()
                .ok_or_else(|| config(anyhow!("manifest case is not a string")))?
                .to_string(),
            out_dir: dir.clone(),
        },
        other => {
            write(&scratch, &json_bytes(&m.config))?;
            match other {
                "simulate" => Command::Simulate {
                    config: scratch.clone(),
                    t_end: num(s, "t_end")?,
                    step: num(s, "step")?,
                    out: rename("out")?,
                },
                "check" => {
                    let opts: CheckOptions = serde_json::from_value(field(s, "options")?.clone()).map_err(config)?;
                    Command::Check {
                        config: scratch.clone(),
                        periodic_solution: s["periodic_solution"].as_str().map(PathBuf::from),
                        report: rename("report")?,
                        exponential_lambda: opts.lambda2 == Lambda2Choice::Exponential,
                        horizon: opts.horizon,
                    }
                }
                "find-periodic" => Command::FindPeriodic {
                    config: scratch.clone(),
                    tol: num(s, "tol")?,
                    max_periods: num(s, "max_periods")? as usize,
                    step: num(s, "step")?,
                    start_level: s["start_level"].as_f64(),
                    out: rename("out")?,
                },
                "verify" => Command::Verify {
                    config: scratch.clone(),
                    nstar: PathBuf::from(
                        field(s, "nstar")?
                            .as_str()
                            .ok_or_else(|| config(anyhow!("manifest nstar is not a path")))?,
                    ),
                    scales: serde_json::from_value(field(s, "scales")?.clone()).map_err(config)?,
                    horizon: num(s, "horizon")? as usize,
                    tol: num(s, "tol")?,
                    report: rename("report")?,
                },
                _ => return Err(config(anyhow!("unknown subcommand `{other}` in manifest"))),
            }
        }
    };
    // The grid recorded in the manifest wins over the environment.
    let result = run(command, m.grid);
    let _ = fs::remove_file(&scratch);
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, GridSettings::from_env()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Acceptance(msg) => eprintln!("error: {msg}"),
                Failure::Config(e) => eprintln!("configuration error: {e:#}"),
                Failure::Numeric(e) => eprintln!("numerical error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
