use super::problem::{FluxSpec, ForcingSpec, ReactionSpec, SchemeParams, StepReport};
use crate::error::{Error, Result};
use crate::pde::{
    derivative_op, lu_factor, neg_laplacian, resolvent, solve_shifted, sup_norm,
    sup_norm_slice, EigenSystem, Field, Matrix,
};

/// Consecutive residual increases tolerated before a fixed-point iteration is declared divergent.
const DIVERGENCE_STREAK: usize = 3;

fn residual_floor(u0: &Field) -> f64 {
    1e-12 * (1.0 + sup_norm(u0))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")))
    }
}

fn check_grid(u: &Field, other: &Field) -> Result<()> {
    if u.grid() != other.grid() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: other.len(),
        });
    }
    Ok(())
}

/// Tracks residual growth across fixed-point iterations.
struct DivergenceGuard {
    floor: f64,
    streak: usize,
    last: Option<f64>,
}

impl DivergenceGuard {
    fn new(floor: f64) -> Self {
        DivergenceGuard {
            floor,
            streak: 0,
            last: None,
        }
    }

    fn observe(&mut self, iteration: usize, residual: f64, limit: usize) -> Result<()> {
        if !residual.is_finite() {
            return Err(Error::Divergence {
                iteration,
                residual,
            });
        }
        if let Some(prev) = self.last {
            if residual > prev && residual > self.floor {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.last = Some(residual);
        if self.streak >= limit {
            return Err(Error::Divergence {
                iteration,
                residual,
            });
        }
        Ok(())
    }
}

/// One backward-Euler step of `u_t = Δu + f(u)` solved by `m` Picard iterations.
///
/// `u^(i) = R(Δt) (u0 + Δt f(u^(i-1)))` with `u^(0) = u0`.
pub fn rd_picard_step(
    u0: &Field,
    f: &ReactionSpec,
    params: &SchemeParams,
) -> Result<(Field, StepReport)> {
    let dt = params.dt;
    check_dt(dt)?;
    let product = dt * f.lip_f();
    if product >= 1.0 {
        return Err(Error::StabilityViolation { product });
    }
    let grid = *u0.grid();
    let mut guard = DivergenceGuard::new(residual_floor(u0));
    let mut report = StepReport::default();
    let mut w = u0.values().to_vec();
    for i in 1..=params.m {
        let rhs: Vec<f64> = u0
            .values()
            .iter()
            .zip(&w)
            .map(|(a, x)| a + dt * f.eval(*x))
            .collect();
        let next = solve_shifted(&grid, dt, &rhs);
        let r = max_diff(&next, &w);
        w = next;
        report.residual_history.push(r);
        report.iterations_run = i;
        guard.observe(i, r, DIVERGENCE_STREAK)?;
    }
    Ok((Field::new(grid, w)?, report))
}

/// Multi-input entry point; identical computation to [`rd_picard_step`].
pub fn rd_picard_step_mi(
    u0: &Field,
    f: &ReactionSpec,
    params: &SchemeParams,
) -> Result<(Field, StepReport)> {
    rd_picard_step(u0, f, params)
}

/// `‖u - R(Δt)(u0 + Δt f(u))‖∞`, the defect of `u` in the implicit Euler equation.
pub fn be_residual(u: &Field, u0: &Field, f: &ReactionSpec, dt: f64) -> Result<f64> {
    check_grid(u, u0)?;
    let rhs: Vec<f64> = u0
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, x)| a + dt * f.eval(*x))
        .collect();
    let image = solve_shifted(u.grid(), dt, &rhs);
    Ok(max_diff(&image, u.values()))
}

/// One backward-Euler step of `u_t = Δu + f(u)` solved by `m` Newton iterations on
/// `Φ(u) = u - R u0 - R Δt f(u)`.
///
/// Each iteration factors `I - R diag(Δt f'(u))` with unpivoted Doolittle LU.
/// The residual recorded per iteration is the Newton update size `‖δ‖∞`.
pub fn rd_newton_step(
    u0: &Field,
    f: &ReactionSpec,
    params: &SchemeParams,
) -> Result<(Field, StepReport)> {
    let dt = params.dt;
    check_dt(dt)?;
    let grid = *u0.grid();
    let d = grid.d();
    let r = resolvent(&grid, dt);
    let rmat = r.entries();
    let ru0 = rmat.matvec(u0.values());
    let mut guard = DivergenceGuard::new(residual_floor(u0));
    let mut report = StepReport::default();
    let mut w = u0.values().to_vec();
    for i in 1..=params.m {
        let fw: Vec<f64> = w.iter().map(|x| dt * f.eval(*x)).collect();
        let rfw = rmat.matvec(&fw);
        let phi: Vec<f64> = (0..d).map(|k| w[k] - ru0[k] - rfw[k]).collect();
        let jac = newton_jacobian(rmat, &w, f, dt);
        let delta = lu_factor(&jac)?.solve(&phi)?;
        for (x, dx) in w.iter_mut().zip(&delta) {
            *x -= dx;
        }
        let res = sup_norm_slice(&delta);
        report.residual_history.push(res);
        report.iterations_run = i;
        // Newton increments must not grow at all outside the rounding floor.
        guard.observe(i, res, 1)?;
    }
    Ok((Field::new(grid, w)?, report))
}

/// `I - R diag(Δt f'(w))`
fn newton_jacobian(rmat: &Matrix, w: &[f64], f: &ReactionSpec, dt: f64) -> Matrix {
    let d = w.len();
    let scale: Vec<f64> = w.iter().map(|x| dt * f.deriv(*x)).collect();
    Matrix::from_fn(d, d, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta - rmat[(r, c)] * scale[c]
    })
}

/// A posteriori Kantorovich-type margin `L_{f'} Δt ‖Φ_BE(u0) - u0‖∞`.
///
/// Newton convergence from `u0` is guaranteed when the margin is at most `√2 - 1`.
pub fn kantorovich_margin(u0: &Field, f: &ReactionSpec, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    let rhs: Vec<f64> = u0.values().iter().map(|x| x + dt * f.eval(*x)).collect();
    let image = solve_shifted(u0.grid(), dt, &rhs);
    Ok(f.lip_fprime() * dt * max_diff(&image, u0.values()))
}

pub const KANTOROVICH_LIMIT: f64 = std::f64::consts::SQRT_2 - 1.0;

/// Backward Euler for `u_t = Δu + f(x)`: `u1 = R(dt)(u0 + dt f)`.
pub fn parabolic_be_step(u0: &Field, f: &ForcingSpec, dt: f64) -> Result<Field> {
    check_dt(dt)?;
    check_grid(u0, f.values())?;
    let rhs = u0.axpy(dt, f.values());
    Field::new(*u0.grid(), solve_shifted(u0.grid(), dt, rhs.values()))
}

/// Multi-input entry point; identical computation to [`parabolic_be_step`].
pub fn parabolic_be_step_mi(u0: &Field, f: &ForcingSpec, dt: f64) -> Result<Field> {
    parabolic_be_step(u0, f, dt)
}

/// Crank-Nicolson for `u_t = Δu + f(x)` via a tridiagonal solve.
pub fn parabolic_cn_step(u0: &Field, f: &ForcingSpec, dt: f64) -> Result<Field> {
    check_dt(dt)?;
    check_grid(u0, f.values())?;
    let a = neg_laplacian(u0.grid());
    let au = a.apply(u0);
    let rhs: Vec<f64> = (0..u0.len())
        .map(|i| u0.values()[i] - 0.5 * dt * au.values()[i] + dt * f.values().values()[i])
        .collect();
    Field::new(*u0.grid(), solve_shifted(u0.grid(), 0.5 * dt, &rhs))
}

/// Crank-Nicolson evaluated mode by mode in the discrete eigenbasis.
pub fn parabolic_cn_step_spectral(
    u0: &Field,
    f: &ForcingSpec,
    dt: f64,
    es: &EigenSystem,
) -> Result<Field> {
    check_dt(dt)?;
    check_grid(u0, f.values())?;
    let d = u0.len();
    let cu = es.coefficients(u0.values(), d);
    let cf = es.coefficients(f.values().values(), d);
    let coeffs: Vec<f64> = es
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, lam)| {
            let x = 0.5 * dt * lam;
            (1.0 - x) / (1.0 + x) * cu[j] + dt / (1.0 + x) * cf[j]
        })
        .collect();
    Field::new(*u0.grid(), es.synthesize(&coeffs))
}

/// Per-mode Crank-Nicolson amplification factors `(1 - dtλ/2) / (1 + dtλ/2)`.
pub fn cn_amplification_factors(es: &EigenSystem, dt: f64) -> Vec<f64> {
    es.eigenvalues()
        .iter()
        .map(|lam| {
            let x = 0.5 * dt * lam;
            (1.0 - x) / (1.0 + x)
        })
        .collect()
}

/// One backward-Euler step of `u_t + f(u)_x = κ u_xx` solved by `m` Picard iterations.
///
/// `u^(i) = R(κΔt)(u0 - Δt f'(u^(i-1)) ⊙ T u^(i-1))`, the flux derivative written
/// through the chain rule so that each iterate is a product of two local quantities.
pub fn claw_picard_step(
    u0: &Field,
    flux: &FluxSpec,
    params: &SchemeParams,
) -> Result<(Field, StepReport)> {
    let dt = params.dt;
    check_dt(dt)?;
    let grid = *u0.grid();
    let tau = flux.kappa() * dt;
    let t = derivative_op(&grid);
    let mut guard = DivergenceGuard::new(residual_floor(u0));
    let mut report = StepReport::default();
    let mut w = u0.values().to_vec();
    for i in 1..=params.m {
        let tw = t.apply_slice(&w);
        let rhs: Vec<f64> = (0..grid.d())
            .map(|k| u0.values()[k] - dt * flux.deriv(w[k]) * tw[k])
            .collect();
        let next = solve_shifted(&grid, tau, &rhs);
        let r = max_diff(&next, &w);
        w = next;
        report.residual_history.push(r);
        report.iterations_run = i;
        guard.observe(i, r, DIVERGENCE_STREAK)?;
    }
    Ok((Field::new(grid, w)?, report))
}

/// Multi-input entry point; identical computation to [`claw_picard_step`].
pub fn claw_picard_step_mi(
    u0: &Field,
    flux: &FluxSpec,
    params: &SchemeParams,
) -> Result<(Field, StepReport)> {
    claw_picard_step(u0, flux, params)
}

/// `L_P = (1 + Δt L_f) / min{1, Δt (2κ - L_f)}`; requires `κ ≥ L_f / 2`.
pub fn claw_lipschitz_base(flux: &FluxSpec, dt: f64) -> Result<f64> {
    let gap = 2.0 * flux.kappa() - flux.lip_f();
    if gap <= 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "viscosity {} below half the flux Lipschitz constant {}",
            flux.kappa(),
            flux.lip_f()
        )));
    }
    Ok((1.0 + dt * flux.lip_f()) / (1.0f64).min(dt * gap))
}

pub(crate) fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{eigensystem, make_grid};
    use crate::schemes::SchemeId;

    fn bump(d: usize) -> Field {
        let g = make_grid(0.0, 1.0, d).unwrap();
        Field::from_fn(g, |x| (std::f64::consts::PI * x).sin() * 0.8)
    }

    #[test]
    fn picard_zero_reaction_is_resolvent() {
        let u0 = bump(16);
        let f = ReactionSpec::zero(2.0).unwrap();
        let p = SchemeParams::new(0.05, 1, SchemeId::RdPicard).unwrap();
        let (u1, rep) = rd_picard_step(&u0, &f, &p).unwrap();
        let expect = resolvent(u0.grid(), 0.05).apply(&u0);
        assert!(u1.max_abs_diff(&expect) < 1e-14);
        assert_eq!(rep.iterations_run, 1);
    }

    #[test]
    fn picard_rejects_large_step() {
        let u0 = bump(8);
        let f = ReactionSpec::fisher_kpp(2.0).unwrap();
        let p = SchemeParams::new(0.5, 3, SchemeId::RdPicard).unwrap();
        assert!(matches!(
            rd_picard_step(&u0, &f, &p),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn newton_linear_reaction_one_iteration() {
        let u0 = bump(16);
        let c = -3.0;
        let f = ReactionSpec::polynomial(vec![0.0, c], 2.0).unwrap();
        let p = SchemeParams::new(0.1, 2, SchemeId::RdNewton).unwrap();
        let (u1, rep) = rd_newton_step(&u0, &f, &p).unwrap();
        // [I + dt(-Δh) - dt c] u1 = u0
        let a = neg_laplacian(u0.grid());
        let m = Matrix::from_fn(16, 16, |i, j| {
            let id = if i == j { 1.0 - 0.1 * c } else { 0.0 };
            id + 0.1 * a.entries()[(i, j)]
        });
        let lhs = m.matvec(u1.values());
        assert!(max_diff(&lhs, u0.values()) < 1e-12);
        assert!(rep.residual_history[1] < 1e-12);
    }

    #[test]
    fn cn_mode_amplification() {
        let g = make_grid(0.0, 1.0, 12).unwrap();
        let es = eigensystem(&g);
        let f = ForcingSpec::zero(g);
        for k in [1, 5, 12] {
            let phi = es.mode(k);
            let u1 = parabolic_cn_step(&phi, &f, 0.01).unwrap();
            let x = 0.005 * es.eigenvalues()[k - 1];
            let expect = phi.scale((1.0 - x) / (1.0 + x));
            assert!(u1.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn claw_zero_flux_is_viscous() {
        let u0 = bump(16);
        let flux = FluxSpec::new(crate::schemes::ScalarFn::zero(), 0.7, 2.0).unwrap();
        let p = SchemeParams::new(0.01, 1, SchemeId::ClawPicard).unwrap();
        let (u1, _) = claw_picard_step(&u0, &flux, &p).unwrap();
        let expect = resolvent(u0.grid(), 0.007).apply(&u0);
        assert!(u1.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn claw_base_requires_viscosity() {
        let flux = FluxSpec::burgers(0.1, 1.0).unwrap();
        assert!(claw_lipschitz_base(&flux, 0.01).is_err());
    }
}
