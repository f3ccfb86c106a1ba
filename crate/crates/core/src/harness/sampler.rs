use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{BasisCoeffs, BasisKind};
use crate::error::{Error, Result};
use crate::pde::{Field, Grid1D};

/// Random sine series `u = Σ_{j≤J} c_j sin(jπ(x-a)/ℓ)` with `c_j ~ U[-A j^{-q}, A j^{-q}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub modes: usize,
    pub amplitude: f64,
    pub decay: f64,
}

impl SamplerSpec {
    pub fn new(modes: usize, amplitude: f64, decay: f64) -> Result<Self> {
        let s = SamplerSpec {
            modes,
            amplitude,
            decay,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidConfig("sampler needs at least one mode".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!("sampler amplitude {} invalid", self.amplitude)));
        }
        if !(self.decay >= 2.0 && self.decay.is_finite()) {
            return Err(Error::InvalidConfig(format!("sampler decay {} must be >= 2", self.decay)));
        }
        Ok(())
    }

    pub fn coefficient_bound(&self, j: usize) -> f64 {
        self.amplitude * (j as f64).powf(-self.decay)
    }

    /// `R_X = A Σ_{j≤J} j^{-q}`, a sup-norm bound on every draw.
    pub fn sup_bound(&self) -> f64 {
        (1..=self.modes).map(|j| self.coefficient_bound(j)).sum()
    }

    /// Sup-norm bound on the x-derivative of every draw over a domain of length `len`.
    pub fn slope_bound(&self, len: f64) -> f64 {
        (1..=self.modes)
            .map(|j| self.coefficient_bound(j) * j as f64 * std::f64::consts::PI / len)
            .sum()
    }
}

/// Seed of sample `index` in stream `role` of an experiment.
///
/// Each `(seed, role, index)` selects its own ChaCha8 stream, so draws are
/// independent of evaluation order and thread count.
pub fn sample_seed(seed: u64, role: SampleRole, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 48) | index);
    rng.next_u64()
}

/// Disjoint seed families for training data, test data and probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SampleRole {
    Train = 1,
    Test = 2,
    Probe = 3,
    Rollout = 4,
}

pub fn sample_initial(spec: &SamplerSpec, grid: &Grid1D, seed: u64) -> Result<Field> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_series(spec, grid, &mut rng))
}

pub(crate) fn draw_series(spec: &SamplerSpec, grid: &Grid1D, rng: &mut ChaCha8Rng) -> Field {
    let coeffs: Vec<f64> = (1..=spec.modes)
        .map(|j| {
            let r = spec.coefficient_bound(j);
            if r > 0.0 {
                rng.random_range(-r..=r)
            } else {
                0.0
            }
        })
        .collect();
    let len = grid.length();
    let a = grid.a();
    Field::from_fn(*grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * (x - a) / len).sin())
            .sum()
    })
}

/// Axis-aligned box of basis coefficients for random reaction or flux functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "monomial")]
    pub basis: BasisKind,
}

fn monomial() -> BasisKind {
    BasisKind::Monomial
}

impl CoefficientBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, basis: BasisKind) -> Result<Self> {
        let b = CoefficientBox { lower, upper, basis };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidConfig("coefficient box bounds must be nonempty and equal length".into()));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!("bad coefficient interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Uniform Lipschitz constant over `[-range, range]` of every function in the box.
    pub fn lipschitz_bound(&self, range: f64) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .enumerate()
            .map(|(k, (lo, hi))| lo.abs().max(hi.abs()) * term_slope_bound(self.basis, k, range))
            .sum()
    }

    /// Uniform sup bound over `[-range, range]` of every function in the box.
    pub fn sup_bound(&self, range: f64) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .enumerate()
            .map(|(k, (lo, hi))| {
                let t = match self.basis {
                    BasisKind::Monomial => range.powi(k as i32),
                    BasisKind::Trigonometric if k == 0 => 0.5,
                    BasisKind::Trigonometric => 1.0,
                };
                lo.abs().max(hi.abs()) * t
            })
            .sum()
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> BasisCoeffs {
        let coeffs = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
            .collect();
        BasisCoeffs {
            coeffs,
            basis: self.basis,
        }
    }
}

fn term_slope_bound(basis: BasisKind, k: usize, range: f64) -> f64 {
    match basis {
        BasisKind::Monomial if k == 0 => 0.0,
        BasisKind::Monomial => k as f64 * range.powi(k as i32 - 1),
        BasisKind::Trigonometric => std::f64::consts::PI * k.div_ceil(2) as f64,
    }
}

/// A random reaction with the uniform Lipschitz constant of its box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledReaction {
    pub coeffs: BasisCoeffs,
    pub lip_p: f64,
}

/// Draws a reaction from `bx`, rejecting boxes whose uniform constant violates `Δt L_p < 1`.
pub fn sample_reaction(bx: &CoefficientBox, range: f64, dt: f64, seed: u64) -> Result<SampledReaction> {
    bx.validate()?;
    let lip_p = bx.lipschitz_bound(range);
    check_box(lip_p, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SampledReaction {
        coeffs: bx.draw(&mut rng),
        lip_p,
    })
}

pub(crate) fn check_box(lip_p: f64, dt: f64) -> Result<()> {
    let product = dt * lip_p;
    if product >= 1.0 {
        return Err(Error::BoxTooLarge { product });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{make_grid, sup_norm};

    #[test]
    fn zero_amplitude_is_zero() {
        let g = make_grid(0.0, 1.0, 16).unwrap();
        let s = SamplerSpec::new(4, 0.0, 2.0).unwrap();
        assert!(sample_initial(&s, &g, 3).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn draws_respect_bound() {
        let g = make_grid(0.0, 2.0, 33).unwrap();
        let s = SamplerSpec::new(6, 1.5, 2.0).unwrap();
        let r = s.sup_bound();
        for i in 0..2000 {
            let u = sample_initial(&s, &g, sample_seed(5, SampleRole::Train, i)).unwrap();
            assert!(sup_norm(&u) <= r);
        }
    }

    #[test]
    fn seeds_differ_by_role() {
        assert_ne!(sample_seed(1, SampleRole::Train, 0), sample_seed(1, SampleRole::Test, 0));
        assert_eq!(sample_seed(1, SampleRole::Train, 7), sample_seed(1, SampleRole::Train, 7));
    }

    #[test]
    fn box_bound_covers_draws() {
        let bx = CoefficientBox::new(vec![-1.0, 0.5, -2.0], vec![1.0, 2.0, 1.0], BasisKind::Monomial).unwrap();
        let s = sample_reaction(&bx, 1.5, 0.01, 9).unwrap();
        let f = s.coeffs.to_scalar_fn();
        let scan = (0..=3000).map(|i| -1.5 + 3.0 * i as f64 / 3000.0);
        let max = scan.fold(0.0f64, |m, x| m.max(f.deriv(x).abs()));
        assert!(s.lip_p >= max);
        assert!(matches!(
            sample_reaction(&bx, 1.5, 0.2, 9),
            Err(Error::BoxTooLarge { .. })
        ));
    }
}
