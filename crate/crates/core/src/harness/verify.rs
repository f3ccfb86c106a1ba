use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{
    build_claw_picard_circuit, build_lu_solver_circuit, build_newton_rd_circuit, build_parabolic_be_circuit,
    build_picard_rd_circuit, Circuit, CircuitStats,
};
use crate::encoding::BasisCoeffs;
use crate::error::{Error, Result};
use crate::pde::{lu_factor, Field, Grid1D, Matrix};
use crate::schemes::{
    claw_picard_step, parabolic_be_step, rd_newton_step, rd_picard_step, FluxSpec, ForcingSpec, ReactionSpec,
    SchemeId, SchemeParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    PicardRd,
    Lu,
    NewtonRd,
    ClawPicard,
    BeParabolic,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 5] = [
        CircuitKind::PicardRd,
        CircuitKind::Lu,
        CircuitKind::NewtonRd,
        CircuitKind::ClawPicard,
        CircuitKind::BeParabolic,
    ];

    /// Whether the construction depends on the iteration count.
    pub fn uses_m(self) -> bool {
        !matches!(self, CircuitKind::Lu | CircuitKind::BeParabolic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    #[serde(default = "default_kinds")]
    pub constructors: Vec<CircuitKind>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_ms")]
    pub ms: Vec<usize>,
    #[serde(default = "default_inputs")]
    pub n_inputs: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Number of monomial reaction coefficients for the Picard construction.
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_kinds() -> Vec<CircuitKind> {
    CircuitKind::ALL.to_vec()
}

fn default_dims() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_ms() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_inputs() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-9
}

fn default_dt() -> f64 {
    0.01
}

fn default_p() -> usize {
    3
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            constructors: default_kinds(),
            dims: default_dims(),
            ms: default_ms(),
            n_inputs: default_inputs(),
            tolerance: default_tol(),
            dt: default_dt(),
            p: default_p(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub kind: CircuitKind,
    pub d: usize,
    pub m: usize,
    pub stats: CircuitStats,
    /// Depth prescribed for the construction.
    pub expected_depth: usize,
    /// Widest layer prescribed for the construction, where one is stated.
    pub expected_l_max: Option<usize>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Depth and maximal width each construction should exhibit.
pub fn expected_stats(kind: CircuitKind, d: usize, m: usize, p: usize) -> (usize, Option<usize>) {
    match kind {
        CircuitKind::PicardRd => (2 * m, Some((p + 1) * d + p)),
        CircuitKind::Lu => (6 * d, None),
        CircuitKind::NewtonRd => (m * (6 * d + 3), None),
        CircuitKind::ClawPicard => (2 * m, Some(3 * d)),
        CircuitKind::BeParabolic => (1, Some(d)),
    }
}

/// Builds every configured circuit and compares it with its solver on random inputs.
pub fn circuit_verify(cfg: &VerifyConfig) -> Result<Vec<VerifyRecord>> {
    if cfg.n_inputs == 0 || cfg.dims.is_empty() {
        return Err(Error::InvalidConfig("circuit-verify needs dims and n_inputs >= 1".into()));
    }
    let mut jobs = Vec::new();
    for &kind in &cfg.constructors {
        for &d in &cfg.dims {
            if kind.uses_m() {
                for &m in &cfg.ms {
                    jobs.push((kind, d, m));
                }
            } else {
                jobs.push((kind, d, 1));
            }
        }
    }
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|&(kind, d, m)| verify_one(cfg, kind, d, m))
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amp..=amp)).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn verify_one(cfg: &VerifyConfig, kind: CircuitKind, d: usize, m: usize) -> Result<VerifyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((kind as u64) << 32) ^ ((d as u64) << 8) ^ m as u64);
    let grid = Grid1D::new(0.0, 1.0, d)?;
    let dt = cfg.dt;
    let mut worst = 0.0f64;
    let circuit: Circuit = match kind {
        CircuitKind::PicardRd => {
            let c = build_picard_rd_circuit(&grid, &BasisCoeffs::monomial(vec![0.0; cfg.p]), dt, m)?;
            let params = SchemeParams::new(dt, m, SchemeId::RdPicard)?;
            for _ in 0..cfg.n_inputs {
                let u0 = random_vec(&mut rng, d, 1.0);
                let coeffs = random_vec(&mut rng, cfg.p, 1.0);
                let f = BasisCoeffs::monomial(coeffs.clone()).to_reaction(2.0)?;
                let mut x = u0.clone();
                x.extend(&coeffs);
                let (u1, _) = rd_picard_step(&Field::new(grid, u0)?, &f, &params)?;
                worst = worst.max(sup_diff(&c.eval(&x)?, u1.values()));
            }
            c
        }
        CircuitKind::Lu => {
            let c = build_lu_solver_circuit(d)?;
            for _ in 0..cfg.n_inputs {
                let noise = random_vec(&mut rng, d * d, 1.0);
                let a = Matrix::from_fn(d, d, |i, j| {
                    let e = noise[i * d + j];
                    if i == j {
                        d as f64 + 1.0 + 0.5 * e
                    } else {
                        e
                    }
                });
                let b = random_vec(&mut rng, d, 1.0);
                let mut x = a.as_slice().to_vec();
                x.extend(&b);
                let oracle = lu_factor(&a)?.solve(&b)?;
                worst = worst.max(sup_diff(&c.eval(&x)?, &oracle));
            }
            c
        }
        CircuitKind::NewtonRd => {
            let f = ReactionSpec::allen_cahn(2.0)?;
            let c = build_newton_rd_circuit(&grid, &f, dt, m)?;
            let params = SchemeParams::new(dt, m, SchemeId::RdNewton)?;
            for _ in 0..cfg.n_inputs {
                let u0 = Field::new(grid, random_vec(&mut rng, d, 0.5))?;
                let (u1, _) = rd_newton_step(&u0, &f, &params)?;
                worst = worst.max(sup_diff(&c.eval(u0.values())?, u1.values()));
            }
            c
        }
        CircuitKind::ClawPicard => {
            let flux = FluxSpec::burgers(1.0, 2.0)?;
            let c = build_claw_picard_circuit(&grid, &flux, dt, m)?;
            let params = SchemeParams::new(dt, m, SchemeId::ClawPicard)?;
            for _ in 0..cfg.n_inputs {
                let u0 = Field::new(grid, random_vec(&mut rng, d, 1.0))?;
                let (u1, _) = claw_picard_step(&u0, &flux, &params)?;
                worst = worst.max(sup_diff(&c.eval(u0.values())?, u1.values()));
            }
            c
        }
        CircuitKind::BeParabolic => {
            let forcing = ForcingSpec::new(Field::new(grid, random_vec(&mut rng, d, 1.0))?);
            let c = build_parabolic_be_circuit(&grid, &forcing, dt)?;
            for _ in 0..cfg.n_inputs {
                let u0 = Field::new(grid, random_vec(&mut rng, d, 1.0))?;
                let u1 = parabolic_be_step(&u0, &forcing, dt)?;
                worst = worst.max(sup_diff(&c.eval(u0.values())?, u1.values()));
            }
            c
        }
    };
    let stats = circuit.stats();
    let (expected_depth, expected_l_max) = expected_stats(kind, d, m, cfg.p);
    let stats_ok = stats.depth_k == expected_depth && expected_l_max.is_none_or(|l| l == stats.l_max);
    Ok(VerifyRecord {
        kind,
        d,
        m,
        stats,
        expected_depth,
        expected_l_max,
        max_deviation: worst,
        pass: stats_ok && worst <= cfg.tolerance,
    })
}
