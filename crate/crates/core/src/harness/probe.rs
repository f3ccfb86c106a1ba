use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample_seed, SampleRole};
use super::task::{Task, TaskId};
use crate::error::{Error, Result};
use crate::pde::{Field, NormKind};
use crate::schemes::{c1_distance, claw_lipschitz_base, ScalarFn};

/// Relative slack allowed on top of the theoretical constant.
pub const PROBE_SLACK: f64 = 1e-9;
/// Pairs closer than this in the input norm are redrawn.
pub const MIN_PAIR_DISTANCE: f64 = 1e-12;
const MAX_REDRAWS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task: TaskId,
    pub norm: NormKind,
    pub n_pairs: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
    pub rejected: usize,
    /// Newton only: smallest `c >= 0` with `max_ratio <= L_N(3 + 2ΔtL_f + cΔt²)`.
    pub fitted_c: Option<f64>,
}

/// `K^m + 2 (K^m - 1) / (K - 1)`.
pub fn newton_lipschitz(k: f64, m: usize) -> f64 {
    let km = k.powi(m as i32);
    km + 2.0 * (km - 1.0) / (k - 1.0)
}

/// The constant the probe compares against, after checking the task's hypotheses.
pub fn theoretical_bound(task: &Task) -> Result<f64> {
    let dt = task.dt();
    let m = task.params().m;
    match task.id() {
        TaskId::RdPicard | TaskId::RdPicardMi => {
            let lp = task.lip_p();
            let range = task.spec().reaction.as_ref().map(|r| r.range).unwrap_or(f64::INFINITY);
            if task.output_bound() > range {
                return Err(Error::HypothesisViolation(format!(
                    "iterates may leave the operating range [-{range}, {range}]"
                )));
            }
            if dt * lp >= 1.0 {
                return Err(Error::HypothesisViolation(format!("dt L_p = {} >= 1", dt * lp)));
            }
            Ok(dt.max(1.0) / (1.0 - lp * dt))
        }
        TaskId::RdNewton => {
            let lf = task.reaction().map(|r| r.lip_f()).unwrap_or(0.0);
            Ok(newton_lipschitz(3.0 + 2.0 * dt * lf, m))
        }
        TaskId::BeParabolic | TaskId::Heat => Ok(1.0),
        TaskId::BeParabolicMi => Ok(dt.max(1.0)),
        TaskId::ClawPicard => {
            let flux = task.flux().expect("claw tasks carry a flux");
            Ok(claw_lipschitz_base(flux, dt)?.powf(m as f64 / 2.0))
        }
        TaskId::CnParabolic | TaskId::ClawPicardMi => Err(Error::InvalidArgument(format!(
            "no Lipschitz bound is available for task {}",
            task.id()
        ))),
    }
}

/// Largest observed `‖S(a) - S(b)‖ / ‖a - b‖` over `n_pairs` input pairs.
///
/// Even-indexed pairs are independent draws; odd-indexed pairs interpolate a
/// small way from one draw towards another, probing the local constant.
pub fn lipschitz_probe(task: &Task, n_pairs: usize, seed: u64) -> Result<ProbeResult> {
    let bound = theoretical_bound(task)?;
    let norm = task.norm();
    let outcomes: Vec<(f64, usize)> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| probe_pair(task, seed, i, norm).map_err(|e| Error::at_sample(i as usize, e)))
        .collect::<Result<_>>()?;
    let max_ratio = outcomes.iter().fold(0.0f64, |m, o| m.max(o.0));
    let rejected = outcomes.iter().map(|o| o.1).sum();
    let fitted_c = (task.id() == TaskId::RdNewton).then(|| fit_newton_c(task, max_ratio));
    Ok(ProbeResult {
        task: task.id(),
        norm,
        n_pairs,
        max_ratio,
        bound,
        pass: max_ratio <= bound * (1.0 + PROBE_SLACK),
        rejected,
        fitted_c,
    })
}

fn probe_pair(task: &Task, seed: u64, i: u64, norm: NormKind) -> Result<(f64, usize)> {
    let mut rejected = 0;
    for attempt in 0..MAX_REDRAWS {
        let key = (i << 8) | attempt;
        let (u, p) = task.draw(sample_seed(seed, SampleRole::Probe, 2 * key));
        let (w, q) = task.draw(sample_seed(seed, SampleRole::Probe, 2 * key + 1));
        let (v, q) = if i % 2 == 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, SampleRole::Probe, key ^ (1 << 47)));
            let t = 10f64.powf(-rng.random_range(0.0..6.0));
            let v = u.axpy(t, &w.sub(&u));
            let q = match (&p, q) {
                (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect()),
                (_, q) => q,
            };
            (v, q)
        } else {
            (w, q)
        };
        let din = input_distance(task, &u, p.as_deref(), &v, q.as_deref(), norm);
        if !(din >= MIN_PAIR_DISTANCE) {
            rejected += 1;
            continue;
        }
        task.check_hypotheses(&u)?;
        task.check_hypotheses(&v)?;
        let a = task.apply(&u, p.as_deref())?;
        let b = task.apply(&v, q.as_deref())?;
        return Ok((norm.eval(&a.sub(&b)) / din, rejected));
    }
    Err(Error::NoConvergence(format!("no admissible probe pair after {MAX_REDRAWS} draws")))
}

fn input_distance(task: &Task, u: &Field, p: Option<&[f64]>, v: &Field, q: Option<&[f64]>, norm: NormKind) -> f64 {
    let base = norm.eval(&u.sub(v));
    let extra = match (task.id(), p, q) {
        (TaskId::RdPicardMi, Some(a), Some(b)) => {
            let range = task.spec().reaction.as_ref().map(|r| r.range).unwrap_or(1.0);
            c1_distance(&ScalarFn::polynomial(a.to_vec()), &ScalarFn::polynomial(b.to_vec()), range)
        }
        (TaskId::BeParabolicMi, Some(a), Some(b)) => a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
        _ => 0.0,
    };
    base + extra
}

fn fit_newton_c(task: &Task, ratio: f64) -> f64 {
    let dt = task.dt();
    let m = task.params().m;
    let lf = task.reaction().map(|r| r.lip_f()).unwrap_or(0.0);
    let k0 = 3.0 + 2.0 * dt * lf;
    let at = |c: f64| newton_lipschitz(k0 + c * dt * dt, m);
    if ratio <= at(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while at(hi) < ratio {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_constant_at_one_iteration() {
        assert_eq!(newton_lipschitz(3.0, 1), 5.0);
        assert_eq!(newton_lipschitz(3.0, 2), 9.0 + 8.0);
    }
}
