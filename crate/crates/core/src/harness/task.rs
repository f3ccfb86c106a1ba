use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{check_box, draw_series, sample_initial, CoefficientBox, SamplerSpec};
use crate::circuits::{
    build_claw_picard_circuit, build_newton_rd_circuit, build_parabolic_be_circuit, build_picard_rd_circuit, Circuit,
};
use crate::encoding::{BasisCoeffs, BasisKind};
use crate::error::{Error, Result};
use crate::learner::TaskDims;
use crate::pde::{Field, Grid1D, NormKind};
use crate::schemes::{
    claw_lipschitz_base, claw_picard_step, kantorovich_margin, parabolic_be_step, parabolic_cn_step,
    rd_newton_step, rd_picard_step, FluxSpec, ForcingSpec, ReactionSpec, ScalarFn, SchemeId, SchemeParams,
    KANTOROVICH_LIMIT,
};

/// The learnable stepping operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskId {
    /// Backward Euler plus Picard for a fixed reaction.
    RdPicard,
    /// As `RdPicard` with the reaction's monomial coefficients as a second input.
    RdPicardMi,
    RdNewton,
    BeParabolic,
    /// Backward Euler with the forcing field as a second input.
    BeParabolicMi,
    CnParabolic,
    ClawPicard,
    /// Conservation law with the flux's coefficients as a second input.
    ClawPicardMi,
    /// Unforced backward Euler.
    Heat,
}

impl TaskId {
    pub const ALL: [TaskId; 9] = [
        TaskId::RdPicard,
        TaskId::RdPicardMi,
        TaskId::RdNewton,
        TaskId::BeParabolic,
        TaskId::BeParabolicMi,
        TaskId::CnParabolic,
        TaskId::ClawPicard,
        TaskId::ClawPicardMi,
        TaskId::Heat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::RdPicard => "rd-picard",
            TaskId::RdPicardMi => "rd-picard-mi",
            TaskId::RdNewton => "rd-newton",
            TaskId::BeParabolic => "be-parabolic",
            TaskId::BeParabolicMi => "be-parabolic-mi",
            TaskId::CnParabolic => "cn-parabolic",
            TaskId::ClawPicard => "claw-picard",
            TaskId::ClawPicardMi => "claw-picard-mi",
            TaskId::Heat => "heat",
        }
    }

    pub fn scheme(self) -> SchemeId {
        match self {
            TaskId::RdPicard | TaskId::RdPicardMi => SchemeId::RdPicard,
            TaskId::RdNewton => SchemeId::RdNewton,
            TaskId::BeParabolic | TaskId::BeParabolicMi | TaskId::Heat => SchemeId::BeParabolic,
            TaskId::CnParabolic => SchemeId::CnParabolic,
            TaskId::ClawPicard | TaskId::ClawPicardMi => SchemeId::ClawPicard,
        }
    }

    /// Output norm the operator is analysed in.
    pub fn native_norm(self) -> NormKind {
        match self {
            TaskId::ClawPicard | TaskId::ClawPicardMi => NormKind::H1,
            _ => NormKind::Sup,
        }
    }

    /// Largest layer input dimension of the task's circuit.
    pub fn d_max(self) -> usize {
        match self {
            TaskId::BeParabolic | TaskId::BeParabolicMi | TaskId::CnParabolic | TaskId::Heat => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub d: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.a, self.b, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub dt: f64,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    FisherKpp,
    AllenCahn,
    Burgers,
    Polynomial,
}

/// Reaction or flux function: fixed form for single-input tasks, a coefficient box for multi-input ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionConfig {
    pub kind: FunctionKind,
    /// Operating range `[-range, range]`.
    pub range: f64,
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, rename = "box")]
    pub coeff_box: Option<CoefficientBox>,
}

/// Forcing field: a fixed draw (single-input) or a per-sample draw (multi-input).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Everything needed to reproduce a task's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskId,
    pub grid: GridSpec,
    pub scheme: SchemeSpec,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub reaction: Option<FunctionConfig>,
    #[serde(default)]
    pub flux: Option<FunctionConfig>,
    #[serde(default)]
    pub forcing: Option<ForcingConfig>,
}

#[derive(Debug, Clone)]
enum Physics {
    Reaction(ReactionSpec),
    ReactionBox { bx: CoefficientBox, range: f64 },
    Forcing(ForcingSpec),
    ForcingDraw(SamplerSpec),
    Flux(FluxSpec),
    FluxBox { bx: CoefficientBox, range: f64, kappa: f64 },
    Unforced,
}

/// One encoded training or test pair along with the raw inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub u0: Field,
    /// Second input of multi-input tasks: basis coefficients or forcing values.
    pub param: Option<Vec<f64>>,
    pub input: Vec<f64>,
    pub target: Field,
}

/// A validated task ready to sample and step.
#[derive(Debug, Clone)]
pub struct Task {
    spec: TaskSpec,
    grid: Grid1D,
    params: SchemeParams,
    physics: Physics,
}

impl Task {
    pub fn new(spec: TaskSpec) -> Result<Self> {
        let grid = spec.grid.build()?;
        spec.sampler.validate()?;
        let params = SchemeParams::new(spec.scheme.dt, spec.scheme.m, spec.task.scheme())?;
        let dt = params.dt;
        let physics = match spec.task {
            TaskId::RdPicard | TaskId::RdNewton => {
                let cfg = need(&spec.reaction, "reaction")?;
                let f = fixed_function(cfg)?;
                let r = ReactionSpec::new(f, cfg.range)?;
                if spec.task == TaskId::RdPicard {
                    check_box(r.lip_f(), dt)?;
                }
                Physics::Reaction(r)
            }
            TaskId::RdPicardMi => {
                let cfg = need(&spec.reaction, "reaction")?;
                let bx = need(&cfg.coeff_box, "reaction.box")?.clone();
                bx.validate()?;
                if bx.basis != BasisKind::Monomial {
                    return Err(Error::InvalidConfig("multi-input reactions use the monomial basis".into()));
                }
                check_box(bx.lipschitz_bound(cfg.range), dt)?;
                Physics::ReactionBox { bx, range: cfg.range }
            }
            TaskId::BeParabolic | TaskId::CnParabolic => {
                let cfg = need(&spec.forcing, "forcing")?;
                Physics::Forcing(ForcingSpec::new(sample_initial(&cfg.sampler, &grid, cfg.seed)?))
            }
            TaskId::BeParabolicMi => {
                let cfg = need(&spec.forcing, "forcing")?;
                cfg.sampler.validate()?;
                Physics::ForcingDraw(cfg.sampler)
            }
            TaskId::Heat => Physics::Unforced,
            TaskId::ClawPicard => {
                let cfg = need(&spec.flux, "flux")?;
                let kappa = need(&spec.scheme.kappa, "scheme.kappa")?;
                let flux = FluxSpec::new(fixed_function(cfg)?, *kappa, cfg.range)?;
                claw_lipschitz_base(&flux, dt)?;
                Physics::Flux(flux)
            }
            TaskId::ClawPicardMi => {
                let cfg = need(&spec.flux, "flux")?;
                let kappa = *need(&spec.scheme.kappa, "scheme.kappa")?;
                let bx = need(&cfg.coeff_box, "flux.box")?.clone();
                bx.validate()?;
                if bx.basis != BasisKind::Monomial {
                    return Err(Error::InvalidConfig("multi-input fluxes use the monomial basis".into()));
                }
                let lip = bx.lipschitz_bound(cfg.range);
                if 2.0 * kappa <= lip {
                    return Err(Error::HypothesisViolation(format!(
                        "viscosity {kappa} below half the uniform flux Lipschitz constant {lip}"
                    )));
                }
                Physics::FluxBox {
                    bx,
                    range: cfg.range,
                    kappa,
                }
            }
        };
        Ok(Task {
            spec,
            grid,
            params,
            physics,
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn id(&self) -> TaskId {
        self.spec.task
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn norm(&self) -> NormKind {
        self.id().native_norm()
    }

    pub fn dims(&self) -> TaskDims {
        let d = self.grid.d();
        match &self.physics {
            Physics::ReactionBox { bx, .. } | Physics::FluxBox { bx, .. } => TaskDims::multi(d, bx.len()),
            Physics::ForcingDraw(_) => TaskDims::multi(d, d),
            _ => TaskDims::single(d),
        }
    }

    pub fn input_dim(&self) -> usize {
        let dims = self.dims();
        dims.d_x + dims.d_p
    }

    pub fn output_dim(&self) -> usize {
        self.grid.d()
    }

    /// The fixed reaction of single-input reaction-diffusion tasks.
    pub fn reaction(&self) -> Option<&ReactionSpec> {
        match &self.physics {
            Physics::Reaction(r) => Some(r),
            _ => None,
        }
    }

    pub fn flux(&self) -> Option<&FluxSpec> {
        match &self.physics {
            Physics::Flux(f) => Some(f),
            _ => None,
        }
    }

    pub fn forcing(&self) -> Option<&ForcingSpec> {
        match &self.physics {
            Physics::Forcing(f) => Some(f),
            _ => None,
        }
    }

    /// Coefficient box of multi-input reaction or flux tasks.
    pub fn coefficient_box(&self) -> Option<&CoefficientBox> {
        match &self.physics {
            Physics::ReactionBox { bx, .. } | Physics::FluxBox { bx, .. } => Some(bx),
            _ => None,
        }
    }

    /// Uniform Lipschitz constant of the nonlinearity over its operating range.
    pub fn lip_p(&self) -> f64 {
        match &self.physics {
            Physics::Reaction(r) => r.lip_f(),
            Physics::ReactionBox { bx, range } | Physics::FluxBox { bx, range, .. } => bx.lipschitz_bound(*range),
            Physics::Flux(f) => f.lip_f(),
            _ => 0.0,
        }
    }

    /// Bound on the output sup norm used to size the clamp.
    pub fn output_bound(&self) -> f64 {
        let rx = self.spec.sampler.sup_bound();
        let dt = self.dt();
        let reach = match &self.physics {
            Physics::Reaction(r) => scan_sup(r.form(), r.range()),
            Physics::ReactionBox { bx, range } => bx.sup_bound(*range),
            Physics::Forcing(f) => crate::pde::sup_norm(f.values()),
            Physics::ForcingDraw(s) => s.sup_bound(),
            // Convective term of the first iterate.
            Physics::Flux(f) => f.lip_f() * self.spec.sampler.slope_bound(self.grid.length()),
            Physics::FluxBox { bx, range, .. } => {
                bx.lipschitz_bound(*range) * self.spec.sampler.slope_bound(self.grid.length())
            }
            Physics::Unforced => 0.0,
        };
        (rx + dt * reach).max(f64::MIN_POSITIVE)
    }

    /// Exact stepper applied to `u0` with the optional second input.
    pub fn apply(&self, u0: &Field, param: Option<&[f64]>) -> Result<Field> {
        let dt = self.dt();
        match (&self.physics, param) {
            (Physics::Reaction(r), _) => match self.id() {
                TaskId::RdNewton => Ok(rd_newton_step(u0, r, &self.params)?.0),
                _ => Ok(rd_picard_step(u0, r, &self.params)?.0),
            },
            (Physics::ReactionBox { range, .. }, Some(c)) => {
                let r = BasisCoeffs::monomial(c.to_vec()).to_reaction(*range)?;
                Ok(rd_picard_step(u0, &r, &self.params)?.0)
            }
            (Physics::Forcing(f), _) => match self.id() {
                TaskId::CnParabolic => parabolic_cn_step(u0, f, dt),
                _ => parabolic_be_step(u0, f, dt),
            },
            (Physics::ForcingDraw(_), Some(v)) => {
                let f = ForcingSpec::new(Field::new(self.grid, v.to_vec())?);
                parabolic_be_step(u0, &f, dt)
            }
            (Physics::Unforced, _) => parabolic_be_step(u0, &ForcingSpec::zero(self.grid), dt),
            (Physics::Flux(f), _) => Ok(claw_picard_step(u0, f, &self.params)?.0),
            (Physics::FluxBox { range, kappa, .. }, Some(c)) => {
                let flux = FluxSpec::new(ScalarFn::polynomial(c.to_vec()), *kappa, *range)?;
                Ok(claw_picard_step(u0, &flux, &self.params)?.0)
            }
            _ => Err(Error::InvalidArgument(format!(
                "task {} needs its second input",
                self.id()
            ))),
        }
    }

    /// Draws `(u0, param)` from the data measure.
    pub fn draw(&self, seed: u64) -> (Field, Option<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = draw_series(&self.spec.sampler, &self.grid, &mut rng);
        let param = match &self.physics {
            Physics::ReactionBox { bx, .. } | Physics::FluxBox { bx, .. } => Some(bx.draw(&mut rng).coeffs),
            Physics::ForcingDraw(s) => Some(draw_series(s, &self.grid, &mut rng).into_values()),
            _ => None,
        };
        (u0, param)
    }

    pub fn encode(&self, u0: &Field, param: Option<&[f64]>) -> Vec<f64> {
        let mut x = u0.values().to_vec();
        if let Some(p) = param {
            x.extend_from_slice(p);
        }
        x
    }

    /// Checks the operator's hypotheses at one input.
    pub fn check_hypotheses(&self, u0: &Field) -> Result<()> {
        if let Physics::Reaction(r) = &self.physics {
            if self.id() == TaskId::RdNewton {
                let margin = kantorovich_margin(u0, r, self.dt())?;
                if margin > KANTOROVICH_LIMIT {
                    return Err(Error::HypothesisViolation(format!(
                        "Kantorovich quantity {margin:.3e} exceeds {KANTOROVICH_LIMIT:.4}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, seed: u64) -> Result<Sample> {
        let (u0, param) = self.draw(seed);
        let target = self.apply(&u0, param.as_deref())?;
        let input = self.encode(&u0, param.as_deref());
        Ok(Sample {
            u0,
            param,
            input,
            target,
        })
    }

    /// The explicit circuit realising the stepper, when one is constructed.
    pub fn exact_circuit(&self) -> Result<Circuit> {
        let dt = self.dt();
        let m = self.params.m;
        match &self.physics {
            Physics::ReactionBox { bx, .. } => {
                build_picard_rd_circuit(&self.grid, &BasisCoeffs::monomial(vec![0.0; bx.len()]), dt, m)
            }
            Physics::Reaction(r) if self.id() == TaskId::RdNewton => build_newton_rd_circuit(&self.grid, r, dt, m),
            Physics::Forcing(f) if self.id() == TaskId::BeParabolic => build_parabolic_be_circuit(&self.grid, f, dt),
            Physics::Unforced => build_parabolic_be_circuit(&self.grid, &ForcingSpec::zero(self.grid), dt),
            Physics::Flux(f) => build_claw_picard_circuit(&self.grid, f, dt, m),
            _ => Err(Error::InvalidArgument(format!(
                "no explicit circuit is constructed for task {}",
                self.id()
            ))),
        }
    }
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("task needs `{what}`")))
}

fn fixed_function(cfg: &FunctionConfig) -> Result<ScalarFn> {
    Ok(match cfg.kind {
        FunctionKind::FisherKpp => ScalarFn::polynomial(vec![0.0, 1.0, -1.0]),
        FunctionKind::AllenCahn => ScalarFn::polynomial(vec![0.0, 1.0, 0.0, -1.0]),
        FunctionKind::Burgers => ScalarFn::polynomial(vec![0.0, 0.0, 0.5]),
        FunctionKind::Polynomial => ScalarFn::polynomial(need(&cfg.coeffs, "coeffs")?.clone()),
    })
}

fn scan_sup(f: &ScalarFn, range: f64) -> f64 {
    let n = 2000;
    let step = range / n as f64;
    let scan = (0..=2 * n).map(|i| f.eval(-range + i as f64 * step).abs());
    scan.fold(0.0, f64::max) + step * f.deriv_bound(1, range)
}
