use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opstep_core::harness::{
    circuit_verify, generate_dataset, generate_samples, lipschitz_probe, rate_study, read_dataset, rollout_study,
    to_test_pairs, train_for_task, with_thread_pool, write_dataset, DataRole, ExperimentConfig, RateSummary,
    SurrogateKind, Task, VerifyConfig,
};
use opstep_core::learner::{estimate_generalization_error, read_model, write_model, ModelMeta, Surrogate};
use opstep_core::{Error, Result};

#[derive(Parser)]
#[command(name = "opstep", version, about = "Implicit PDE steppers, exact circuits and learned one-step operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment or verification config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurrogateArg {
    Network,
    Circuit,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset and write x.f64, y.f64 and manifest.json.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, value_enum, default_value = "train")]
        role: Role,
    },
    /// Train a network on a dataset directory (or on freshly drawn samples).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Samples to draw when no --data directory is given.
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Estimate the generalization error of a model file or the exact circuit.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "circuit")]
        model: Option<PathBuf>,
        #[arg(long)]
        circuit: bool,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Probe the stepper's Lipschitz constant against its theoretical bound.
    Lipschitz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_pairs: Option<usize>,
    },
    /// Compare every circuit construction with its solver.
    CircuitVerify {
        #[command(flatten)]
        common: Common,
    },
    /// Train over the n grid and fit the error slope.
    RateStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Roll a surrogate forward and compare with the global error bound.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        surrogate: Option<SurrogateArg>,
    },
    /// Print the tables of a finished rate study.
    Report {
        #[command(flatten)]
        common: Common,
        /// Results directory; defaults to the config's experiment.out_dir.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_thread_pool(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) if e.is_precondition() => {
            eprintln!("error: {e}");
            eprintln!("usage: opstep <COMMAND> --config <FILE> [--seed <N>] [--out <PATH>]");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn out_dir(common: &Common, fallback: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::GenData { common, n, role } => {
            let cfg = load(&common.config)?;
            let task = Task::new(cfg.task)?;
            let role = match role {
                Role::Train => DataRole::Train,
                Role::Test => DataRole::Test,
            };
            let ds = generate_dataset(&task, n, common.seed.unwrap_or(0), role)?;
            let dir = out_dir(&common, "data");
            write_dataset(&ds, &dir)?;
            let m = ds.manifest.as_ref().expect("generated datasets carry a manifest");
            println!("wrote {n} samples to {}", dir.display());
            println!("x.f64 sha256 {}", m.x.sha256);
            println!("y.f64 sha256 {}", m.y.sha256);
        }
        Command::Train { common, data, n } => {
            let cfg = load(&common.config)?;
            let task = Task::new(cfg.task.clone())?;
            let seed = common.seed.unwrap_or(0);
            let ds = match data {
                Some(dir) => read_dataset(&dir)?,
                None => generate_dataset(&task, n, seed, DataRole::Train)?,
            };
            if ds.in_dim() != task.input_dim() || ds.out_dim() != task.output_dim() {
                return Err(Error::DimensionMismatch { expected: task.input_dim(), got: ds.in_dim() }.into());
            }
            let (model, final_loss) = train_for_task(&task, &ds, &cfg.train, seed)?;
            let path = common.out.unwrap_or_else(|| PathBuf::from("model.bin"));
            let meta = ModelMeta { seed: Some(seed), task: Some(task.id().to_string()) };
            write_model(&model, &meta, BufWriter::new(fs::File::create(&path)?))?;
            println!(
                "trained depth {} width {} on {} samples, final loss {final_loss:.4e}; wrote {}",
                model.depth(),
                model.width(),
                ds.len(),
                path.display()
            );
        }
        Command::Eval { common, model, circuit, n_test } => {
            let cfg = load(&common.config)?;
            let task = Task::new(cfg.task.clone())?;
            let surrogate: Box<dyn Surrogate> = if circuit {
                Box::new(task.exact_circuit()?)
            } else {
                let path = model.expect("clap requires --model without --circuit");
                Box::new(read_model(BufReader::new(fs::File::open(path)?))?.0)
            };
            let n = n_test.unwrap_or(cfg.experiment.n_test);
            let test = to_test_pairs(&generate_samples(&task, n, common.seed.unwrap_or(0), DataRole::Test)?);
            let decoder = opstep_core::harness::output_decoder(&task)?;
            let e = estimate_generalization_error(surrogate.as_ref(), &decoder, task.grid(), &test, task.norm())?;
            println!("task {} norm {:?} n_test {n} generalization error {e:.6e}", task.id(), task.norm());
            if let Some(out) = common.out {
                write_json(&out, &serde_json::json!({ "task": task.id(), "n_test": n, "error": e }))?;
            }
        }
        Command::Lipschitz { common, n_pairs } => {
            let cfg = load(&common.config)?;
            let task = Task::new(cfg.task.clone())?;
            let n = n_pairs.unwrap_or(cfg.lipschitz.n_pairs);
            let r = lipschitz_probe(&task, n, common.seed.unwrap_or(cfg.lipschitz.seed))?;
            println!(
                "task {} norm {:?} pairs {} max ratio {:.6} bound {:.6} rejected {}{} -> {}",
                r.task,
                r.norm,
                r.n_pairs,
                r.max_ratio,
                r.bound,
                r.rejected,
                r.fitted_c.map(|c| format!(" fitted c {c:.4e}")).unwrap_or_default(),
                if r.pass { "pass" } else { "FAIL" }
            );
            if let Some(out) = &common.out {
                write_json(out, &r)?;
            }
            if !r.pass {
                return Err(Failure::Check("probe exceeded the theoretical bound".into()));
            }
        }
        Command::CircuitVerify { common } => {
            let text = fs::read_to_string(&common.config)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", common.config.display())))?;
            let mut cfg: VerifyConfig = toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let records = circuit_verify(&cfg)?;
            println!("{:<14} {:>4} {:>2} {:>7} {:>7} {:>8} {:>10} {:>11}  result", "circuit", "d", "m", "k", "k_exp", "l_max", "l_max_exp", "deviation");
            for r in &records {
                println!(
                    "{:<14} {:>4} {:>2} {:>7} {:>7} {:>8} {:>10} {:>11.3e}  {}",
                    format!("{:?}", r.kind),
                    r.d,
                    r.m,
                    r.stats.depth_k,
                    r.expected_depth,
                    r.stats.l_max,
                    r.expected_l_max.map_or("-".into(), |l| l.to_string()),
                    r.max_deviation,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            if let Some(out) = &common.out {
                write_json(out, &records)?;
            }
            if records.iter().any(|r| !r.pass) {
                return Err(Failure::Check("some circuits disagree with their solvers".into()));
            }
        }
        Command::RateStudy { common } => {
            let mut cfg = load(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.experiment.seeds = vec![seed];
            }
            if let Some(out) = common.out {
                cfg.experiment.out_dir = Some(out);
            }
            let (records, summary) = rate_study(&cfg)?;
            println!("{:>6} {:>6} {:>12} {:>8} {:>6}", "n", "seed", "error", "seconds", "width");
            for r in &records {
                println!("{:>6} {:>6} {:>12.4e} {:>8.2} {:>6}", r.n, r.seed, r.error, r.seconds, r.width);
            }
            print_summary(&summary);
            if let Some(dir) = &cfg.experiment.out_dir {
                println!("wrote {}", dir.display());
            }
        }
        Command::Rollout { common, surrogate } => {
            let mut cfg = load(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.rollout.seed = seed;
            }
            if let Some(s) = surrogate {
                cfg.rollout.surrogate = match s {
                    SurrogateArg::Network => SurrogateKind::Network,
                    SurrogateArg::Circuit => SurrogateKind::Circuit,
                };
            }
            let r = rollout_study(&cfg)?;
            let p = &r.params;
            println!(
                "L_0 {:.4} M_0 {:.4e} L_phi {:.6} sqrt(E_gen) {:.4e} dt {}",
                p.l0, p.m0, p.l_phi, p.e_gen, p.dt
            );
            println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "N", "measured", "stepper", "vs_stepper", "bound");
            for row in &r.rows {
                println!(
                    "{:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                    row.n, row.measured, row.exact_stepper, row.vs_stepper, row.bound
                );
            }
            println!("bound holds for all N: {}", r.pass);
            if let Some(out) = &common.out {
                write_json(out, &r)?;
            }
            if !r.pass {
                return Err(Failure::Check("measured rollout error exceeded the bound".into()));
            }
        }
        Command::Report { common, dir } => {
            let cfg = load(&common.config)?;
            let dir = dir
                .or(cfg.experiment.out_dir)
                .ok_or_else(|| Error::InvalidConfig("no results directory: pass --dir or set experiment.out_dir".into()))?;
            let text = fs::read_to_string(dir.join("summary.json"))?;
            let summary: RateSummary = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            let csv = fs::read_to_string(dir.join("results.csv"))?;
            println!("{} result rows in {}", csv.lines().count().saturating_sub(1), dir.display());
            println!("{:>6} {:>12}", "n", "mean error");
            for (n, e) in summary.n_grid.iter().zip(&summary.mean_errors) {
                println!("{n:>6} {e:>12.4e}");
            }
            print_summary(&summary);
            if let Some(out) = &common.out {
                write_json(out, &summary)?;
            }
        }
    }
    Ok(())
}

fn print_summary(s: &RateSummary) {
    println!(
        "slope {:.4} (95% CI [{:.4}, {:.4}]), per seed {:?}, theory {:.4}",
        s.slope, s.slope_ci.0, s.slope_ci.1, s.per_seed_slopes, s.theory_slope
    );
    println!(
        "strictly decreasing {}, all seeds negative {}, gate {} -> {}",
        s.strictly_decreasing,
        s.all_seeds_negative,
        s.slope_gate,
        if s.pass { "pass" } else { "FAIL" }
    );
}
