use super::problem::ForcingSpec;
use crate::error::{Error, Result};
use crate::pde::{eigensystem, sup_norm, Field};

/// A one-step map `u^n -> u^{n+1}`.
pub trait Stepper {
    fn step(&self, u: &Field) -> Result<Field>;
}

impl<F> Stepper for F
where
    F: Fn(&Field) -> Result<Field>,
{
    fn step(&self, u: &Field) -> Result<Field> {
        self(u)
    }
}

/// The `n` states following `u0` under repeated application of `stepper`.
pub fn rollout<S: Stepper + ?Sized>(stepper: &S, u0: &Field, n: usize) -> Result<Vec<Field>> {
    if n == 0 {
        return Err(Error::InvalidArgument("rollout length must be >= 1".into()));
    }
    let mut out: Vec<Field> = Vec::with_capacity(n);
    for i in 0..n {
        let prev = out.last().unwrap_or(u0);
        let next = stepper.step(prev).map_err(|e| Error::at_sample(i, e))?;
        out.push(next);
    }
    Ok(out)
}

/// Problems with a reference-accurate solver: linear heat equation with optional forcing.
#[derive(Debug, Clone)]
pub enum ReferenceProblem {
    Heat,
    Forced(ForcingSpec),
}

/// Settings for [`reference_solution`].
#[derive(Debug, Clone, Copy)]
pub struct ReferenceConfig {
    /// The coarse time step being compared against; the reference starts at `dt / 64`.
    pub dt: f64,
    /// Sup-norm change under halving that counts as converged.
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl ReferenceConfig {
    pub fn for_step(dt: f64) -> Self {
        ReferenceConfig {
            dt,
            tolerance: 1e-8,
            max_halvings: 24,
        }
    }
}

/// High-accuracy `u(T)` for the semi-discrete linear problem.
///
/// Crank-Nicolson is applied mode by mode in closed form,
/// `U^N = U* + ρ^N (U^0 - U*)` with `U* = f_j / λ_j`, and the step is halved
/// until two successive results agree to the configured tolerance.
pub fn reference_solution(
    problem: &ReferenceProblem,
    u0: &Field,
    t_final: f64,
    config: &ReferenceConfig,
) -> Result<Field> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    if !(config.dt > 0.0) {
        return Err(Error::InvalidArgument("reference dt must be positive".into()));
    }
    let grid = *u0.grid();
    let d = grid.d();
    let es = eigensystem(&grid);
    let cu = es.coefficients(u0.values(), d);
    let cf = match problem {
        ReferenceProblem::Heat => vec![0.0; d],
        ReferenceProblem::Forced(f) => {
            if f.values().grid() != &grid {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: f.values().len(),
                });
            }
            es.coefficients(f.values().values(), d)
        }
    };
    let solve = |steps: u64| -> Vec<f64> {
        let dt = t_final / steps as f64;
        let coeffs: Vec<f64> = es
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(j, lam)| {
                let x = 0.5 * dt * lam;
                let steady = cf[j] / lam;
                steady + cn_power(x, steps) * (cu[j] - steady)
            })
            .collect();
        es.synthesize(&coeffs)
    };
    let mut steps = (t_final / (config.dt / 64.0)).ceil().max(1.0) as u64;
    let mut current = solve(steps);
    for _ in 0..config.max_halvings {
        steps *= 2;
        let finer = solve(steps);
        let change = current
            .iter()
            .zip(&finer)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        current = finer;
        if change < config.tolerance {
            return Field::new(grid, current);
        }
    }
    Err(Error::NoConvergence(format!(
        "reference solution not converged after {} halvings (|u0| = {:.3e})",
        config.max_halvings,
        sup_norm(u0)
    )))
}

/// `((1 - x) / (1 + x))^n`, through logarithms while the base is positive so
/// that rounding in the base is not amplified by large `n`.
fn cn_power(x: f64, n: u64) -> f64 {
    if x < 1.0 {
        (n as f64 * ((-x).ln_1p() - x.ln_1p())).exp()
    } else {
        ((1.0 - x) / (1.0 + x)).powf(n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::make_grid;
    use crate::schemes::parabolic_be_step;

    #[test]
    fn rollout_rejects_zero_length() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        let id = |u: &Field| Ok(u.clone());
        assert!(rollout(&id, &Field::zeros(g), 0).is_err());
    }

    #[test]
    fn heat_rollout_matches_spectral_power() {
        let g = make_grid(0.0, 1.0, 16).unwrap();
        let es = eigensystem(&g);
        let phi = es.mode(1);
        let f = ForcingSpec::zero(g);
        let dt = 0.01;
        let step = |u: &Field| parabolic_be_step(u, &f, dt);
        let traj = rollout(&step, &phi, 10).unwrap();
        let lam = es.eigenvalues()[0];
        for (n, u) in traj.iter().enumerate() {
            let expect = phi.scale((1.0 + dt * lam).powi(-(n as i32 + 1)));
            assert!(u.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn reference_heat_mode_decays_exponentially() {
        let g = make_grid(0.0, 1.0, 16).unwrap();
        let es = eigensystem(&g);
        let phi = es.mode(2);
        let t = 0.1;
        let u = reference_solution(&ReferenceProblem::Heat, &phi, t, &ReferenceConfig::for_step(0.01))
            .unwrap();
        let expect = phi.scale((-es.eigenvalues()[1] * t).exp());
        assert!(u.max_abs_diff(&expect) < 1e-7);
    }
}
