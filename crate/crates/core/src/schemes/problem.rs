use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::Field;

/// Number of equispaced points used to scan scalar functions over their operating range.
pub const SCAN_POINTS: usize = 1001;

/// Closed-form scalar nonlinearities with known derivatives and Taylor expansions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ClosedForm {
    /// `amplitude * sin(frequency * x)`
    Sine { amplitude: f64, frequency: f64 },
    /// `-scale * tanh(x)`; decreasing everywhere.
    NegTanh { scale: f64 },
}

/// A scalar function of the state: reaction term or flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarFn {
    /// `Σ a_k x^k`, lowest degree first.
    Polynomial { coeffs: Vec<f64> },
    /// `a_0/2 + Σ_p a_{2p-1} sin(pπx) + a_{2p} cos(pπx)`
    Trigonometric { coeffs: Vec<f64> },
    Closed(ClosedForm),
}

impl ScalarFn {
    pub fn polynomial(coeffs: impl Into<Vec<f64>>) -> Self {
        ScalarFn::Polynomial {
            coeffs: coeffs.into(),
        }
    }

    pub fn zero() -> Self {
        ScalarFn::polynomial(Vec::new())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Polynomial { coeffs } => horner(coeffs, x),
            ScalarFn::Trigonometric { coeffs } => trig_series(coeffs, 0, x),
            ScalarFn::Closed(ClosedForm::Sine {
                amplitude,
                frequency,
            }) => amplitude * (frequency * x).sin(),
            ScalarFn::Closed(ClosedForm::NegTanh { scale }) => -scale * x.tanh(),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.nth_deriv(1, x)
    }

    pub fn nth_deriv(&self, n: usize, x: f64) -> f64 {
        match self {
            ScalarFn::Polynomial { coeffs } => horner(&poly_derivative(coeffs, n), x),
            ScalarFn::Trigonometric { coeffs } => trig_series(coeffs, n, x),
            ScalarFn::Closed(ClosedForm::Sine {
                amplitude,
                frequency,
            }) => {
                let s = amplitude * frequency.powi(n as i32);
                let phase = frequency * x;
                match n % 4 {
                    0 => s * phase.sin(),
                    1 => s * phase.cos(),
                    2 => -s * phase.sin(),
                    _ => -s * phase.cos(),
                }
            }
            ScalarFn::Closed(ClosedForm::NegTanh { scale }) => {
                let t = x.tanh();
                // Derivatives of tanh as polynomials in t: P_{n+1}(t) = (1 - t²) P_n'(t).
                let mut p = vec![0.0, 1.0];
                for _ in 0..n {
                    let dp = poly_derivative(&p, 1);
                    p = poly_mul(&[1.0, 0.0, -1.0], &dp);
                }
                -scale * horner(&p, t)
            }
        }
    }

    /// Taylor coefficients about zero, truncated to `p` terms.
    pub fn taylor(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        match self {
            ScalarFn::Polynomial { coeffs } => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = *c;
                }
            }
            ScalarFn::Trigonometric { .. } | ScalarFn::Closed(_) => {
                let mut fact = 1.0;
                for (k, o) in out.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *o = self.nth_deriv(k, 0.0) / fact;
                }
            }
        }
        out
    }

    /// Polynomial degree, `None` for closed forms.
    pub fn degree(&self) -> Option<usize> {
        match self {
            ScalarFn::Polynomial { coeffs } => {
                Some(coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0))
            }
            ScalarFn::Trigonometric { .. } | ScalarFn::Closed(_) => None,
        }
    }

    /// Upper bound on `sup |f^(n)|` over `[-range, range]`.
    ///
    /// The scan maximum is padded by half a scan spacing times a rigorous bound on
    /// the next derivative, so the result dominates the true supremum.
    pub fn deriv_bound(&self, n: usize, range: f64) -> f64 {
        match self {
            ScalarFn::Closed(ClosedForm::Sine {
                amplitude,
                frequency,
            }) => amplitude.abs() * frequency.abs().powi(n as i32),
            ScalarFn::Closed(ClosedForm::NegTanh { .. })
            | ScalarFn::Polynomial { .. }
            | ScalarFn::Trigonometric { .. } => {
                let step = 2.0 * range / (SCAN_POINTS - 1) as f64;
                let scan = scan_grid(range)
                    .map(|x| self.nth_deriv(n, x).abs())
                    .fold(0.0, f64::max);
                let next = self.rigorous_bound(n + 1, range);
                scan + 0.5 * step * next
            }
        }
    }

    /// Coarse but rigorous bound on `sup |f^(n)|` over `[-range, range]`.
    fn rigorous_bound(&self, n: usize, range: f64) -> f64 {
        match self {
            ScalarFn::Polynomial { coeffs } => poly_derivative(coeffs, n)
                .iter()
                .enumerate()
                .map(|(k, c)| c.abs() * range.powi(k as i32))
                .sum(),
            ScalarFn::Trigonometric { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let freq = std::f64::consts::PI * k.div_ceil(2) as f64;
                    let base = if k == 0 { 0.5 } else { 1.0 };
                    base * c.abs() * freq.powi(n as i32)
                })
                .sum(),
            ScalarFn::Closed(ClosedForm::Sine {
                amplitude,
                frequency,
            }) => amplitude.abs() * frequency.abs().powi(n as i32),
            ScalarFn::Closed(ClosedForm::NegTanh { scale }) => {
                // |t| <= 1, so the coefficient l1 norm of the t-polynomial is a bound.
                let mut p = vec![0.0, 1.0];
                for _ in 0..n {
                    let dp = poly_derivative(&p, 1);
                    p = poly_mul(&[1.0, 0.0, -1.0], &dp);
                }
                scale.abs() * p.iter().map(|c| c.abs()).sum::<f64>()
            }
        }
    }
}

fn scan_grid(range: f64) -> impl Iterator<Item = f64> {
    let step = 2.0 * range / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS).map(move |i| -range + i as f64 * step)
}

/// `n`-th derivative of the trigonometric series with the basis ordering of [`ScalarFn::Trigonometric`].
fn trig_series(coeffs: &[f64], n: usize, x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == 0 {
                return if n == 0 { 0.5 * c } else { 0.0 };
            }
            let freq = pi * k.div_ceil(2) as f64;
            // sin and cos differentiate by a quarter-period phase shift.
            let shift = n as f64 * 0.5 * pi;
            let phase = freq * x + shift;
            let scale = freq.powi(n as i32);
            if k % 2 == 1 {
                c * scale * phase.sin()
            } else {
                c * scale * phase.cos()
            }
        })
        .sum()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..n {
        if c.len() <= 1 {
            return Vec::new();
        }
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| k as f64 * a)
            .collect();
    }
    c
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Reaction term `f(u)` with Lipschitz metadata over the operating range `[-range, range]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    form: ScalarFn,
    range: f64,
    lip_f: f64,
    lip_fprime: f64,
    decreasing: bool,
}

impl ReactionSpec {
    pub fn new(form: ScalarFn, range: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "operating range must be positive, got {range}"
            )));
        }
        let lip_f = form.deriv_bound(1, range);
        let lip_fprime = form.deriv_bound(2, range);
        let decreasing = scan_grid(range).all(|x| form.deriv(x) <= 0.0);
        Ok(ReactionSpec {
            form,
            range,
            lip_f,
            lip_fprime,
            decreasing,
        })
    }

    pub fn polynomial(coeffs: impl Into<Vec<f64>>, range: f64) -> Result<Self> {
        Self::new(ScalarFn::polynomial(coeffs), range)
    }

    /// `u (1 - u)`
    pub fn fisher_kpp(range: f64) -> Result<Self> {
        Self::polynomial(vec![0.0, 1.0, -1.0], range)
    }

    /// `u - u³`
    pub fn allen_cahn(range: f64) -> Result<Self> {
        Self::polynomial(vec![0.0, 1.0, 0.0, -1.0], range)
    }

    pub fn zero(range: f64) -> Result<Self> {
        Self::new(ScalarFn::zero(), range)
    }

    pub fn form(&self) -> &ScalarFn {
        &self.form
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn lip_f(&self) -> f64 {
        self.lip_f
    }

    pub fn lip_fprime(&self) -> f64 {
        self.lip_fprime
    }

    pub fn is_decreasing(&self) -> bool {
        self.decreasing
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.form.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.form.deriv(x)
    }
}

/// Discrete `‖f - g‖_{C¹}` over the shared operating range.
pub fn c1_distance(f: &ScalarFn, g: &ScalarFn, range: f64) -> f64 {
    scan_grid(range)
        .map(|x| (f.eval(x) - g.eval(x)).abs() + (f.deriv(x) - g.deriv(x)).abs())
        .fold(0.0, f64::max)
}

/// Flux `f(u)` and viscosity `kappa` of a viscous conservation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSpec {
    form: ScalarFn,
    range: f64,
    lip_f: f64,
    kappa: f64,
}

impl FluxSpec {
    pub fn new(form: ScalarFn, kappa: f64, range: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "viscosity must be positive, got {kappa}"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "operating range must be positive, got {range}"
            )));
        }
        let lip_f = form.deriv_bound(1, range);
        Ok(FluxSpec {
            form,
            range,
            lip_f,
            kappa,
        })
    }

    /// `u² / 2`
    pub fn burgers(kappa: f64, range: f64) -> Result<Self> {
        Self::new(ScalarFn::polynomial(vec![0.0, 0.0, 0.5]), kappa, range)
    }

    pub fn form(&self) -> &ScalarFn {
        &self.form
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn lip_f(&self) -> f64 {
        self.lip_f
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.form.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.form.deriv(x)
    }
}

/// Grid samples of a state-independent forcing `f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    values: Field,
}

impl ForcingSpec {
    pub fn new(values: Field) -> Self {
        ForcingSpec { values }
    }

    pub fn zero(grid: crate::pde::Grid1D) -> Self {
        ForcingSpec {
            values: Field::zeros(grid),
        }
    }

    pub fn values(&self) -> &Field {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    RdPicard,
    RdNewton,
    BeParabolic,
    CnParabolic,
    ClawPicard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub dt: f64,
    pub m: usize,
    pub scheme: SchemeId,
}

impl SchemeParams {
    pub fn new(dt: f64, m: usize, scheme: SchemeId) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("iteration count must be >= 1".into()));
        }
        Ok(SchemeParams { dt, m, scheme })
    }
}

/// Per-iteration residuals of an iterative step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub residual_history: Vec<f64>,
    pub iterations_run: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_kpp_metadata() {
        let f = ReactionSpec::fisher_kpp(2.0).unwrap();
        // f' = 1 - 2u, max |f'| on [-2, 2] is 5.
        assert!(f.lip_f() >= 5.0 && f.lip_f() < 5.0 + 1e-2);
        assert!((f.lip_fprime() - 2.0).abs() < 1e-12);
        assert!(!f.is_decreasing());
    }

    #[test]
    fn lip_dominates_dense_scan() {
        let f = ReactionSpec::polynomial(vec![0.3, -1.2, 0.4, 0.7], 1.7).unwrap();
        let fine = (0..100_001)
            .map(|i| -1.7 + 3.4 * i as f64 / 100_000.0)
            .map(|x| f.deriv(x).abs())
            .fold(0.0, f64::max);
        assert!(f.lip_f() >= fine);
    }

    #[test]
    fn neg_tanh_is_decreasing_with_taylor() {
        let f = ReactionSpec::new(ScalarFn::Closed(ClosedForm::NegTanh { scale: 2.0 }), 3.0)
            .unwrap();
        assert!(f.is_decreasing());
        let t = f.form().taylor(6);
        let expect = [0.0, -2.0, 0.0, 2.0 / 3.0, 0.0, -4.0 / 15.0];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{t:?}");
        }
        assert!(f.lip_f() >= 2.0 && f.lip_f() < 2.05);
    }

    #[test]
    fn sine_derivatives() {
        let s = ScalarFn::Closed(ClosedForm::Sine {
            amplitude: 2.0,
            frequency: 3.0,
        });
        let x = 0.4;
        assert!((s.deriv(x) - 6.0 * (1.2_f64).cos()).abs() < 1e-14);
        assert!((s.nth_deriv(2, x) + 18.0 * (1.2_f64).sin()).abs() < 1e-13);
    }

    #[test]
    fn trig_series_derivative_matches_difference() {
        let f = ScalarFn::Trigonometric {
            coeffs: vec![0.4, 0.3, -0.2, 0.1, 0.05],
        };
        let x = 0.37;
        let e = 1e-5;
        let fd = (f.eval(x + e) - f.eval(x - e)) / (2.0 * e);
        assert!((fd - f.deriv(x)).abs() < 1e-8);
        assert!((f.eval(0.0) - (0.2 - 0.2 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn c1_distance_of_identical_is_zero() {
        let f = ScalarFn::polynomial(vec![1.0, 2.0]);
        assert_eq!(c1_distance(&f, &f, 1.0), 0.0);
        let g = ScalarFn::polynomial(vec![1.0, 2.5]);
        // |0.5 x| + 0.5 peaks at x = ±1.
        assert!((c1_distance(&f, &g, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(SchemeParams::new(0.0, 1, SchemeId::RdPicard).is_err());
        assert!(SchemeParams::new(0.1, 0, SchemeId::RdPicard).is_err());
        assert!(FluxSpec::burgers(0.0, 1.0).is_err());
    }
}
