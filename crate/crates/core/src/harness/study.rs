use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SurrogateKind, TrainSettings};
use super::dataset::{generate_samples, DataRole};
use super::probe::lipschitz_probe;
use super::sampler::{sample_seed, SampleRole};
use super::task::{Sample, Task, TaskId};
use crate::encoding::EncoderSpec;
use crate::error::{Error, Result};
use crate::learner::{
    architecture_from_theorem, estimate_generalization_error, train_erm, Dataset, FnnModel, Surrogate, TestPair,
};
use crate::pde::{Field, Matrix};
use crate::schemes::{reference_solution, ReferenceConfig, ReferenceProblem};

/// One trained model evaluated on fresh test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task: TaskId,
    pub n: usize,
    pub seed: u64,
    /// Mean squared native-norm error on the test set.
    pub error: f64,
    pub seconds: f64,
    pub depth: usize,
    pub width: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub task: TaskId,
    pub n_grid: Vec<usize>,
    pub mean_errors: Vec<f64>,
    /// Least-squares slope of log mean error against log n.
    pub slope: f64,
    pub per_seed_slopes: Vec<f64>,
    /// 95% Student-t interval of the per-seed slopes.
    pub slope_ci: (f64, f64),
    /// `-2 / (2 + d_max)`, printed for comparison only.
    pub theory_slope: f64,
    pub strictly_decreasing: bool,
    pub all_seeds_negative: bool,
    pub slope_gate: f64,
    pub pass: bool,
}

pub fn to_test_pairs(samples: &[Sample]) -> Vec<TestPair> {
    samples
        .iter()
        .map(|s| TestPair {
            input: s.input.clone(),
            target: s.target.clone(),
        })
        .collect()
}

fn dataset_from(samples: &[Sample]) -> Result<Dataset> {
    let n = samples.len();
    let dx = samples.first().map_or(0, |s| s.input.len());
    let dy = samples.first().map_or(0, |s| s.target.len());
    let mut x = Vec::with_capacity(n * dx);
    let mut y = Vec::with_capacity(n * dy);
    for s in samples {
        x.extend_from_slice(&s.input);
        y.extend_from_slice(s.target.values());
    }
    Dataset::new(Matrix::from_row_major(n, dx, x)?, Matrix::from_row_major(n, dy, y)?)
}

/// Output decoder of every task: grid values.
pub fn output_decoder(task: &Task) -> Result<EncoderSpec> {
    EncoderSpec::point_sampling(task.grid(), task.grid().d(), task.output_bound())
}

/// Trains the theorem-sized network for `n` samples.
pub fn train_for_task(task: &Task, data: &Dataset, settings: &TrainSettings, seed: u64) -> Result<(FnnModel, f64)> {
    let arch = architecture_from_theorem(
        task.id(),
        data.len().max(1),
        task.dims(),
        &settings.arch_options(task.params().m, task.output_bound()),
    )?;
    let cfg = settings.to_train_config(arch.depth, arch.width, arch.clip, seed, data.len());
    let (model, hist) = train_erm(data, &cfg)?;
    Ok((model, hist.last().unwrap_or(f64::NAN)))
}

/// Trains on nested prefixes of one training stream per seed and evaluates on a
/// fresh test stream; runs execute in parallel and are reported in `(n, seed)` order.
pub fn rate_study(cfg: &ExperimentConfig) -> Result<(Vec<ResultRecord>, RateSummary)> {
    cfg.validate()?;
    let task = Task::new(cfg.task.clone())?;
    let ex = &cfg.experiment;
    if ex.n_grid.len() < 2 {
        return Err(Error::InvalidConfig("rate study needs at least two sample sizes".into()));
    }
    let n_max = *ex.n_grid.last().expect("nonempty grid");
    let decoder = output_decoder(&task)?;
    let norm = task.norm();

    let streams: Vec<(Vec<Sample>, Vec<TestPair>)> = ex
        .seeds
        .iter()
        .map(|&seed| {
            let train = generate_samples(&task, n_max, seed, DataRole::Train)?;
            let test = to_test_pairs(&generate_samples(&task, ex.n_test, seed, DataRole::Test)?);
            Ok((train, test))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = ex
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(ni, _)| (0..ex.seeds.len()).map(move |si| (ni, si)))
        .collect();
    let records: Vec<ResultRecord> = jobs
        .par_iter()
        .map(|&(ni, si)| {
            let n = ex.n_grid[ni];
            let seed = ex.seeds[si];
            let (train, test) = &streams[si];
            let start = Instant::now();
            let data = dataset_from(&train[..n])?;
            let (model, final_loss) = train_for_task(&task, &data, &cfg.train, seed)?;
            let error = estimate_generalization_error(&model, &decoder, task.grid(), test, norm)?;
            Ok(ResultRecord {
                task: task.id(),
                n,
                seed,
                error,
                seconds: start.elapsed().as_secs_f64(),
                depth: model.depth(),
                width: model.width(),
                final_loss,
            })
        })
        .collect::<Result<_>>()?;

    let summary = summarize(&task, ex.n_grid.clone(), &ex.seeds, &records, ex.slope_gate);
    if let Some(dir) = &ex.out_dir {
        write_rate_outputs(dir, &records, &summary)?;
    }
    Ok((records, summary))
}

fn summarize(task: &Task, n_grid: Vec<usize>, seeds: &[u64], records: &[ResultRecord], gate: f64) -> RateSummary {
    let logn: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let mean_errors: Vec<f64> = n_grid
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.error).collect();
            errs.iter().sum::<f64>() / errs.len() as f64
        })
        .collect();
    let slope = ls_slope(&logn, &mean_errors.iter().map(|e| e.ln()).collect::<Vec<_>>());
    let per_seed_slopes: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let ys: Vec<f64> = n_grid
                .iter()
                .map(|&n| {
                    records
                        .iter()
                        .find(|r| r.n == n && r.seed == s)
                        .map_or(f64::NAN, |r| r.error.ln())
                })
                .collect();
            ls_slope(&logn, &ys)
        })
        .collect();
    let k = per_seed_slopes.len() as f64;
    let mean = per_seed_slopes.iter().sum::<f64>() / k;
    let half = if per_seed_slopes.len() > 1 {
        let var = per_seed_slopes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0);
        student_t95(per_seed_slopes.len() - 1) * (var / k).sqrt()
    } else {
        f64::INFINITY
    };
    let strictly_decreasing = mean_errors.windows(2).all(|w| w[1] < w[0]);
    RateSummary {
        task: task.id(),
        n_grid,
        slope,
        per_seed_slopes: per_seed_slopes.clone(),
        slope_ci: (mean - half, mean + half),
        theory_slope: -2.0 / (2.0 + task.id().d_max() as f64),
        strictly_decreasing,
        all_seeds_negative: per_seed_slopes.iter().all(|s| *s < 0.0),
        slope_gate: gate,
        pass: strictly_decreasing && slope <= gate,
        mean_errors,
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn student_t95(df: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    T.get(df.saturating_sub(1)).copied().unwrap_or(1.96)
}

pub fn write_rate_outputs(dir: &Path, records: &[ResultRecord], summary: &RateSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = fs::File::create(dir.join("results.csv"))?;
    writeln!(csv, "task,n,seed,error,seconds")?;
    for r in records {
        writeln!(csv, "{},{},{},{:e},{:.3}", r.task, r.n, r.seed, r.error, r.seconds)?;
    }
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}

/// Inputs of the global error bound `M_0Δt(e^{TL_0} - 1)/(2L_0) + Σ_{i≤N} L_Φ^{i-1} E_gen`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutBoundParams {
    pub l0: f64,
    pub m0: f64,
    pub dt: f64,
    pub l_phi: f64,
    /// Root-mean-square one-step error.
    pub e_gen: f64,
}

impl RolloutBoundParams {
    /// Time-discretisation part at `T = N Δt`.
    pub fn time_term(&self, n: usize) -> f64 {
        let t = n as f64 * self.dt;
        if self.l0 == 0.0 {
            return 0.5 * self.m0 * self.dt * t;
        }
        self.m0 * self.dt * (t * self.l0).exp_m1() / (2.0 * self.l0)
    }

    pub fn learning_term(&self, n: usize) -> f64 {
        let mut s = 0.0;
        let mut w = 1.0;
        for _ in 0..n {
            s += w * self.e_gen;
            w *= self.l_phi;
        }
        s
    }

    pub fn bound(&self, n: usize) -> f64 {
        self.time_term(n) + self.learning_term(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub n: usize,
    /// RMS over initial conditions of `‖Γ^N(u0) - u(NΔt)‖`.
    pub measured: f64,
    /// Same quantity for the exact stepper.
    pub exact_stepper: f64,
    /// RMS of `‖Γ^N(u0) - Φ^N(u0)‖`; at `N = 1` this estimates `√E_gen`.
    pub vs_stepper: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub task: TaskId,
    pub surrogate: SurrogateKind,
    pub params: RolloutBoundParams,
    pub rows: Vec<RolloutRow>,
    pub pass: bool,
}

/// Recursive application of a learned stepper compared with the reference solution.
pub fn rollout_study(cfg: &ExperimentConfig) -> Result<RolloutResult> {
    cfg.validate()?;
    let task = Task::new(cfg.task.clone())?;
    let problem = match task.id() {
        TaskId::Heat => ReferenceProblem::Heat,
        TaskId::BeParabolic => ReferenceProblem::Forced(task.forcing().expect("forced task").clone()),
        other => {
            return Err(Error::InvalidArgument(format!(
                "no reference solution is available for task {other}"
            )))
        }
    };
    let rc = &cfg.rollout;
    if rc.steps == 0 || rc.n_mc == 0 || rc.n_test == 0 {
        return Err(Error::InvalidConfig("rollout steps, n_mc and n_test must be positive".into()));
    }
    let seed = rc.seed;
    let decoder = output_decoder(&task)?;
    let norm = task.norm();
    let surrogate: Box<dyn Surrogate> = match rc.surrogate {
        SurrogateKind::Circuit => Box::new(task.exact_circuit()?),
        SurrogateKind::Network => {
            let train = generate_samples(&task, rc.n_train, seed, DataRole::Train)?;
            Box::new(train_for_task(&task, &dataset_from(&train)?, &cfg.train, seed)?.0)
        }
    };
    let test = to_test_pairs(&generate_samples(&task, rc.n_test, seed, DataRole::Test)?);
    let e_gen = estimate_generalization_error(surrogate.as_ref(), &decoder, task.grid(), &test, norm)?.sqrt();
    let l_phi = lipschitz_probe(&task, cfg.lipschitz.n_pairs, cfg.lipschitz.seed)?.max_ratio;
    let (l0, m0) = derivative_bounds(&task, &problem, rc.steps, rc.fd_samples, seed)?;
    let params = RolloutBoundParams {
        l0,
        m0,
        dt: task.dt(),
        l_phi,
        e_gen,
    };

    let reference = ReferenceConfig::for_step(task.dt());
    let per_sample: Vec<Vec<(f64, f64, f64)>> = (0..rc.n_mc as u64)
        .into_par_iter()
        .map(|i| {
            let (u0, _) = task.draw(sample_seed(seed, SampleRole::Rollout, i));
            let mut learned = u0.clone();
            let mut exact = u0.clone();
            let mut errs = Vec::with_capacity(rc.steps);
            for k in 1..=rc.steps {
                let out = surrogate.predict(&task.encode(&learned, None))?;
                learned = crate::encoding::decode_field(&out, &decoder, task.grid())?;
                exact = task.apply(&exact, None)?;
                let truth = reference_solution(&problem, &u0, k as f64 * task.dt(), &reference)?;
                errs.push((
                    norm.eval(&learned.sub(&truth)),
                    norm.eval(&exact.sub(&truth)),
                    norm.eval(&learned.sub(&exact)),
                ));
            }
            Ok(errs)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<RolloutRow> = (0..rc.steps)
        .map(|k| {
            let rms = |sel: fn(&(f64, f64, f64)) -> f64| {
                (per_sample.iter().map(|e| sel(&e[k]).powi(2)).sum::<f64>() / per_sample.len() as f64).sqrt()
            };
            RolloutRow {
                n: k + 1,
                measured: rms(|e| e.0),
                exact_stepper: rms(|e| e.1),
                vs_stepper: rms(|e| e.2),
                bound: params.bound(k + 1),
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.measured <= r.bound);
    Ok(RolloutResult {
        task: task.id(),
        surrogate: rc.surrogate,
        params,
        rows,
        pass,
    })
}

/// `L_0 = max ‖u'(t)‖` and `M_0 = max ‖u''(t)‖` over `t ∈ (0, NΔt]` by central
/// differences of reference trajectories with spacing `Δt / 8`.
pub fn derivative_bounds(
    task: &Task,
    problem: &ReferenceProblem,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let dt = task.dt();
    let delta = dt / 8.0;
    let t_final = steps as f64 * dt;
    let points = (t_final / delta).round() as usize;
    let norm = task.norm();
    let reference = ReferenceConfig {
        dt: delta,
        tolerance: 1e-10,
        max_halvings: 24,
    };
    let found: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (u0, _) = task.draw(sample_seed(seed, SampleRole::Rollout, (1 << 40) | i));
            let traj: Vec<Field> = (0..=points + 1)
                .map(|k| {
                    if k == 0 {
                        Ok(u0.clone())
                    } else {
                        reference_solution(problem, &u0, k as f64 * delta, &reference)
                    }
                })
                .collect::<Result<_>>()?;
            let mut l0 = 0.0f64;
            let mut m0 = 0.0f64;
            for k in 1..=points {
                let d1 = traj[k + 1].sub(&traj[k - 1]).scale(0.5 / delta);
                let d2 = traj[k + 1].axpy(-2.0, &traj[k]).add(&traj[k - 1]).scale(1.0 / (delta * delta));
                l0 = l0.max(norm.eval(&d1));
                m0 = m0.max(norm.eval(&d2));
            }
            Ok((l0, m0))
        })
        .collect::<Result<_>>()?;
    Ok(found
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), (l, m)| (a.max(*l), b.max(*m))))
}
