//! One pass/fail line per acceptance criterion.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers as arguments
//! (`cargo test --test acceptance -- 4 8`) to run a subset.

use std::time::Instant;

use opstep_core::circuits::CircuitStats;
use opstep_core::harness::*;
use opstep_core::learner::{fnn_gradient, init_fnn};
use opstep_core::pde::*;
use opstep_core::schemes::*;
use opstep_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

const RATE_CONFIG: &str = r#"
[task]
task = "be-parabolic"
grid = { a = 0.0, b = 1.0, d = 16 }
scheme = { dt = 0.01 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }
forcing = { sampler = { modes = 4, amplitude = 1.0, decay = 2.0 }, seed = 7 }

[experiment]
seeds = [0, 1, 2]
n_grid = [128, 256, 512, 1024, 2048]
n_test = 2048

[train]
learning_rate = 3e-3
epochs = 100
min_updates = 40000
batch_size = 64
lr_floor = 0.01
"#;

const ROLLOUT_CONFIG: &str = r#"
[task]
task = "heat"
grid = { a = 0.0, b = 1.0, d = 16 }
scheme = { dt = 0.01 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }

[train]
learning_rate = 3e-3
epochs = 100
min_updates = 40000
batch_size = 64
lr_floor = 0.01

[lipschitz]
n_pairs = 10000

[rollout]
steps = 50
n_mc = 256
n_train = 2048
n_test = 2048
"#;

const PROBE_TASKS: [&str; 4] = [
    r#"task = "rd-picard-mi"
grid = { a = 0.0, b = 1.0, d = 32 }
scheme = { dt = 0.01, m = 3 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }
reaction = { kind = "polynomial", range = 2.0, box = { lower = [-1.0, -1.0, -1.0], upper = [1.0, 1.0, 1.0] } }"#,
    r#"task = "rd-newton"
grid = { a = 0.0, b = 1.0, d = 32 }
scheme = { dt = 0.01, m = 2 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }
reaction = { kind = "allen-cahn", range = 2.0 }"#,
    r#"task = "be-parabolic"
grid = { a = 0.0, b = 1.0, d = 32 }
scheme = { dt = 0.01 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }
forcing = { sampler = { modes = 4, amplitude = 1.0, decay = 2.0 }, seed = 3 }"#,
    r#"task = "claw-picard"
grid = { a = 0.0, b = 1.0, d = 32 }
scheme = { dt = 0.01, m = 2, kappa = 1.5 }
sampler = { modes = 8, amplitude = 1.0, decay = 2.0 }
flux = { kind = "burgers", range = 2.0 }"#,
];

fn random_field(g: Grid1D, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    Field::new(g, (0..g.d()).map(|_| rng.random_range(-amp..=amp)).collect()).expect("finite values")
}

fn resolvent_nonexpansive() -> Result<Outcome> {
    let g = make_grid(0.0, 1.0, 64)?;
    let sampler = SamplerSpec::new(16, 1.0, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for tau in [0.001, 0.01, 0.1] {
        let r = resolvent(&g, tau);
        for i in 0..1000u64 {
            // Half the pairs are rough uniform fields, half are smooth sampler draws.
            let (u, v) = if i % 2 == 0 {
                (random_field(g, 1.0, &mut rng), random_field(g, 1.0, &mut rng))
            } else {
                (
                    sample_initial(&sampler, &g, sample_seed(1, SampleRole::Probe, 2 * i))?,
                    sample_initial(&sampler, &g, sample_seed(1, SampleRole::Probe, 2 * i + 1))?,
                )
            };
            let ratio = sup_norm(&r.apply(&u).sub(&r.apply(&v))) / sup_norm(&u.sub(&v));
            worst = worst.max(ratio);
        }
    }
    outcome(worst <= 1.0 + 1e-12, format!("max ratio {worst:.15} <= 1 + 1e-12 over 3000 pairs"))
}

fn circuit_equivalence(records: &[VerifyRecord]) -> Result<Outcome> {
    let worst = records.iter().fold(0.0f64, |m, r| m.max(r.max_deviation));
    let mut per_kind = String::new();
    for kind in CircuitKind::ALL {
        let w = records
            .iter()
            .filter(|r| r.kind == kind)
            .fold(0.0f64, |m, r| m.max(r.max_deviation));
        per_kind.push_str(&format!(" {kind:?}={w:.1e}"));
    }
    let ok = worst <= 1e-9 && records.iter().all(|r| r.max_deviation <= 1e-9);
    outcome(ok, format!("{} configs x 100 inputs, max deviation {worst:.2e} <= 1e-9;{per_kind}", records.len()))
}

fn circuit_formulas(records: &[VerifyRecord], p: usize) -> Result<Outcome> {
    let mut bad = Vec::new();
    let check = |ok: bool, r: &VerifyRecord, what: &str, s: &CircuitStats, bad: &mut Vec<String>| {
        if !ok {
            bad.push(format!("{:?} d={} m={} {what}: k={} l_max={}", r.kind, r.d, r.m, s.depth_k, s.l_max));
        }
    };
    for r in records {
        let (d, m, s) = (r.d, r.m, &r.stats);
        match r.kind {
            CircuitKind::PicardRd => {
                check(s.depth_k == 2 * m && s.l_max == (p + 1) * d + p, r, "k = 2m, l_max = (p+1)d + p", s, &mut bad)
            }
            CircuitKind::Lu => check(s.depth_k == 6 * d, r, "k = 6d", s, &mut bad),
            CircuitKind::NewtonRd => check(s.depth_k == m * (6 * d + 3), r, "k = m(6d+3)", s, &mut bad),
            CircuitKind::ClawPicard => check(s.l_max == 3 * d, r, "l_max = 3d", s, &mut bad),
            CircuitKind::BeParabolic => check(s.depth_k == 1 && s.l_max == d, r, "k = 1, l_max = d", s, &mut bad),
        }
    }
    let detail = if bad.is_empty() {
        format!("{} circuits match the stated depth and width formulas exactly", records.len())
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

fn lipschitz_probes() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for text in PROBE_TASKS {
        let task = Task::new(toml::from_str(text).map_err(|e| opstep_core::Error::InvalidConfig(e.to_string()))?)?;
        let r = lipschitz_probe(&task, 10_000, 0)?;
        pass &= r.pass && r.max_ratio <= r.bound * (1.0 + 1e-9);
        let fitted = r.fitted_c.map(|c| format!(", fitted c {c:.3e}")).unwrap_or_default();
        parts.push(format!("{} {:?} {:.4} <= {:.4}{fitted}", r.task, r.norm, r.max_ratio, r.bound));
    }
    outcome(pass, format!("10^4 pairs each: {}", parts.join("; ")))
}

fn convergence_orders() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Newton on Allen-Cahn with a large step so several iterations stay above the floor.
    let f = ReactionSpec::allen_cahn(2.0)?;
    let mut q_worst = 0.0f64;
    let mut q_count = 0;
    for d in [16, 32] {
        let g = make_grid(0.0, 1.0, d)?;
        for _ in 0..50 {
            let u0 = random_field(g, 1.0, &mut rng);
            let (_, rep) = rd_newton_step(&u0, &f, &SchemeParams::new(0.2, 8, SchemeId::RdNewton)?)?;
            for w in rep.residual_history.windows(2) {
                if w[1] > 1e-13 {
                    q_worst = q_worst.max(w[1] / (w[0] * w[0]));
                    q_count += 1;
                }
            }
        }
    }
    const NEWTON_CONSTANT: f64 = 10.0;
    let fk = ReactionSpec::fisher_kpp(2.0)?;
    let mut slack = f64::NEG_INFINITY;
    for d in [16, 32] {
        let g = make_grid(0.0, 1.0, d)?;
        for dt in [0.01, 0.05, 0.15] {
            for _ in 0..30 {
                let u0 = random_field(g, 1.0, &mut rng);
                let (_, rep) = rd_picard_step(&u0, &fk, &SchemeParams::new(dt, 15, SchemeId::RdPicard)?)?;
                for w in rep.residual_history.windows(2) {
                    if w[0] > 1e-14 {
                        slack = slack.max(w[1] / w[0] - dt * fk.lip_f());
                    }
                }
            }
        }
    }
    outcome(
        q_worst <= NEWTON_CONSTANT && q_count > 0 && slack <= 1e-10,
        format!(
            "Newton max r_(i+1)/r_i^2 = {q_worst:.3} <= {NEWTON_CONSTANT} over {q_count} ratios; \
             Picard max(contraction - dt L_f) = {slack:.2e} <= 1e-10"
        ),
    )
}

fn crank_nicolson() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut gap = 0.0f64;
    let mut amp = 0.0f64;
    for d in [8, 16, 32, 64] {
        let g = make_grid(0.0, 1.0, d)?;
        let es = eigensystem(&g);
        for dt in [1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            amp = amp.max(cn_amplification_factors(&es, dt).iter().fold(0.0f64, |m, r| m.max(r.abs())));
            for _ in 0..10 {
                let u0 = random_field(g, 1.0, &mut rng);
                let f = ForcingSpec::new(random_field(g, 1.0, &mut rng));
                let a = parabolic_cn_step(&u0, &f, dt)?;
                let b = parabolic_cn_step_spectral(&u0, &f, dt, &es)?;
                gap = gap.max(a.max_abs_diff(&b));
            }
        }
    }
    outcome(gap <= 1e-10 && amp <= 1.0, format!("matrix vs spectral {gap:.2e} <= 1e-10; max |rho| {amp:.12} <= 1"))
}

fn gradient_check() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let (d_in, d_out) = (rng.random_range(1..6), rng.random_range(1..4));
        let (depth, width) = (rng.random_range(2..5), rng.random_range(2..9));
        let base = init_fnn(d_in, d_out, depth, width, 1e6, trial)?;
        // Nonzero biases keep pre-activations off the ReLU kink.
        let theta: Vec<f64> = base.flatten().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let model = base.with_parameters(&theta)?;
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..d_in).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<Vec<f64>> = (0..5).map(|_| (0..d_out).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let y: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
        let analytic = fnn_gradient(&model, &x, &y)?.flatten();
        let h = 1e-6;
        let mut num2 = 0.0;
        let mut den2 = 0.0;
        for (k, g) in analytic.iter().enumerate() {
            let mut p = theta.clone();
            p[k] += h;
            let up = model.with_parameters(&p)?.loss(&x, &y)?;
            p[k] -= 2.0 * h;
            let down = model.with_parameters(&p)?.loss(&x, &y)?;
            let fd = (up - down) / (2.0 * h);
            num2 += (g - fd).powi(2);
            den2 += fd * fd;
        }
        worst = worst.max((num2 / den2.max(1e-300)).sqrt());
    }
    outcome(worst <= 1e-5, format!("20 models, max relative error {worst:.2e} <= 1e-5"))
}

fn rate_trend() -> Result<Outcome> {
    let cfg = ExperimentConfig::from_toml(RATE_CONFIG)?;
    let (_, s) = rate_study(&cfg)?;
    let errs: Vec<String> = s.mean_errors.iter().map(|e| format!("{e:.3e}")).collect();
    outcome(
        s.strictly_decreasing && s.slope <= -0.2,
        format!(
            "mean errors [{}], strictly decreasing {}, slope {:.3} <= -0.2 (95% CI [{:.3}, {:.3}], theory {:.3})",
            errs.join(", "),
            s.strictly_decreasing,
            s.slope,
            s.slope_ci.0,
            s.slope_ci.1,
            s.theory_slope
        ),
    )
}

fn rollout_bound() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::from_toml(ROLLOUT_CONFIG)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [SurrogateKind::Network, SurrogateKind::Circuit] {
        cfg.rollout.surrogate = kind;
        let r = rollout_study(&cfg)?;
        let worst = r.rows.iter().map(|row| row.measured / row.bound).fold(0.0f64, f64::max);
        let last = r.rows.last().expect("steps >= 1");
        pass &= r.rows.iter().all(|row| row.measured <= row.bound);
        parts.push(format!(
            "{kind:?}: E_gen^(1/2) {:.2e}, L_phi {:.4}, L_0 {:.3}, M_0 {:.3e}, N=50 measured {:.3e} vs bound {:.3e}, max measured/bound {:.2e}",
            r.params.e_gen, r.params.l_phi, r.params.l0, r.params.m0, last.measured, last.bound, worst
        ));
    }
    outcome(pass, format!("all N <= 50, 256 initial conditions; {}", parts.join("; ")))
}

fn reproducibility() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, text) in PROBE_TASKS.iter().enumerate() {
        let task = Task::new(toml::from_str(text).map_err(|e| opstep_core::Error::InvalidConfig(e.to_string()))?)?;
        let path = dir.path().join(format!("ds{i}"));
        write_dataset(&generate_dataset(&task, 256, 11, DataRole::Train)?, &path)?;
        let manifest = read_manifest(&path)?;
        let again = regenerate(&manifest)?;
        let same = std::fs::read(path.join(X_BLOB))? == blob_bytes(again.inputs.as_slice())
            && std::fs::read(path.join(Y_BLOB))? == blob_bytes(again.outputs.as_slice());
        pass &= same;
    }
    notes.push(format!("{} datasets regenerated from manifests byte-identical: {pass}", PROBE_TASKS.len()));

    let rerun = |out: &std::path::Path| -> Result<Vec<String>> {
        let mut cfg = ExperimentConfig::from_toml(RATE_CONFIG)?;
        cfg.experiment.n_grid = vec![64, 128];
        cfg.experiment.n_test = 256;
        cfg.train.min_updates = 500;
        cfg.experiment.out_dir = Some(out.to_path_buf());
        let (records, summary) = rate_study(&cfg)?;
        write_rate_outputs(out, &records, &summary)?;
        let csv = std::fs::read_to_string(out.join("results.csv"))?;
        // Everything but the trailing wall-clock column.
        Ok(csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a).to_string()).collect())
    };
    let a = rerun(&dir.path().join("run_a"))?;
    let b = rerun(&dir.path().join("run_b"))?;
    let csv_same = a == b;
    notes.push(format!("rate-study CSV numerics identical across reruns ({} rows): {csv_same}", a.len() - 1));
    outcome(pass && csv_same, notes.join("; "))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut failures = 0;
    let mut report = |k: usize, name: &str, limit_s: Option<f64>, f: &mut dyn FnMut() -> Result<Outcome>| {
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = limit_s.is_none_or(|l| secs < l);
        let budget = limit_s.map(|l| format!(" (limit {l:.0} s)")).unwrap_or_default();
        let ok = pass && in_time;
        if !ok {
            failures += 1;
        }
        println!("[{}] {k:>2} {name}: {detail} [{secs:.1} s{budget}]", if ok { "PASS" } else { "FAIL" });
    };

    let verify_cfg = VerifyConfig::default();
    let mut records: Option<Vec<VerifyRecord>> = None;
    if run(1) {
        report(1, "resolvent non-expansive", Some(5.0), &mut resolvent_nonexpansive);
    }
    if run(2) || run(3) {
        let t = Instant::now();
        let r = circuit_verify(&verify_cfg);
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(r) => records = Some(r),
            Err(e) => println!("circuit verification failed to run: {e}"),
        }
        if run(2) {
            report(2, "circuit-solver equivalence", None, &mut || match &records {
                Some(r) => {
                    let mut o = circuit_equivalence(r)?;
                    o.pass &= secs < 60.0;
                    o.detail.push_str(&format!("; verification {secs:.1} s (limit 60 s)"));
                    Ok(o)
                }
                None => outcome(false, "no records".into()),
            });
        }
    }
    if run(3) {
        report(3, "circuit statistics formulas", None, &mut || match &records {
            Some(r) => circuit_formulas(r, verify_cfg.p),
            None => outcome(false, "no records".into()),
        });
    }
    if run(4) {
        report(4, "Lipschitz probes under theory", Some(120.0), &mut lipschitz_probes);
    }
    if run(5) {
        report(5, "Newton quadratic / Picard linear", Some(10.0), &mut convergence_orders);
    }
    if run(6) {
        report(6, "Crank-Nicolson spectral identity", Some(5.0), &mut crank_nicolson);
    }
    if run(7) {
        report(7, "gradient correctness", Some(10.0), &mut gradient_check);
    }
    if run(8) {
        report(8, "rate-study trend", Some(1200.0), &mut rate_trend);
    }
    if run(9) {
        report(9, "rollout bound", Some(600.0), &mut rollout_bound);
    }
    if run(10) {
        report(10, "reproducibility", None, &mut reproducibility);
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
