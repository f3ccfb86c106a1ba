//! Constructions of the implicit steppers as layered circuits.
//!
//! Layers are assembled symbolically: each output of a layer carries a [`Key`]
//! naming the quantity it holds, and projections refer to keys of the previous
//! layer. Quantities still needed later are carried forward by identity units.

use std::collections::HashMap;
use std::sync::Arc;

use super::types::{Circuit, CircuitLayer, LayerBuilder, Nonlinearity};
use crate::encoding::BasisCoeffs;
use crate::error::{Error, Result};
use crate::pde::{derivative_op, resolvent, Grid1D};
use crate::schemes::{FluxSpec, ForcingSpec, ReactionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    U0(usize),
    W(usize),
    Coef(usize),
    A(usize, usize),
    B(usize),
    L(usize, usize),
    U(usize, usize),
    Y(usize),
    X(usize),
    /// Transient product or intermediate, namespaced by a small tag.
    P(u8, usize, usize),
}

struct Pending {
    key: Key,
    nonlinearity: Nonlinearity,
    rows: Vec<Vec<(Key, f64)>>,
}

fn carried(key: Key) -> Pending {
    Pending {
        key,
        nonlinearity: Nonlinearity::Identity,
        rows: vec![vec![(key, 1.0)]],
    }
}

fn linear(key: Key, terms: Vec<(Key, f64)>) -> Pending {
    Pending {
        key,
        nonlinearity: Nonlinearity::Identity,
        rows: vec![terms],
    }
}

fn unary(key: Key, nonlinearity: Nonlinearity, terms: Vec<(Key, f64)>) -> Pending {
    Pending {
        key,
        nonlinearity,
        rows: vec![terms],
    }
}

fn binary(key: Key, nonlinearity: Nonlinearity, x: Vec<(Key, f64)>, y: Vec<(Key, f64)>) -> Pending {
    Pending {
        key,
        nonlinearity,
        rows: vec![x, y],
    }
}

struct Assembler {
    input_dim: usize,
    frame: HashMap<Key, usize>,
    width: usize,
    layers: Vec<CircuitLayer>,
}

impl Assembler {
    fn new(inputs: &[Key]) -> Self {
        Assembler {
            input_dim: inputs.len(),
            frame: inputs.iter().enumerate().map(|(i, k)| (*k, i)).collect(),
            width: inputs.len(),
            layers: Vec::new(),
        }
    }

    fn has(&self, key: Key) -> bool {
        self.frame.contains_key(&key)
    }

    fn push(&mut self, units: Vec<Pending>) -> Result<()> {
        let mut builder = LayerBuilder::new(self.width);
        let mut next = HashMap::with_capacity(units.len());
        for (j, p) in units.into_iter().enumerate() {
            let mut rows = Vec::with_capacity(p.rows.len());
            for row in p.rows {
                let mut resolved = Vec::with_capacity(row.len());
                for (k, w) in row {
                    let c = *self.frame.get(&k).ok_or_else(|| {
                        Error::InvalidCircuit(format!("layer {} reads missing {k:?}", self.layers.len()))
                    })?;
                    resolved.push((c, w));
                }
                rows.push(resolved);
            }
            builder.unit(p.nonlinearity, rows)?;
            if next.insert(p.key, j).is_some() {
                return Err(Error::InvalidCircuit(format!("duplicate output {:?}", p.key)));
            }
        }
        self.width = next.len();
        self.frame = next;
        self.layers.push(builder.finish()?);
        Ok(())
    }

    fn finish(self) -> Result<Circuit> {
        Circuit::new(self.input_dim, self.layers)
    }
}

fn field_keys(d: usize, key: fn(usize) -> Key) -> Vec<Key> {
    (0..d).map(key).collect()
}

/// Picard iterations for `u_t = Δu + Σ a_k T_k(u)` on input `[u0; a]`.
///
/// Each iteration is a pair of layers: basis terms `a_k T_k(w_j)` with `u0` and
/// `a` carried alongside, then the linear update `w <- R(u0 + Δt Σ_k a_k T_k(w))`.
/// The output is `u^(m)`.
pub fn build_picard_rd_circuit(grid: &Grid1D, coeffs: &BasisCoeffs, dt: f64, m: usize) -> Result<Circuit> {
    check_step(dt, m)?;
    let d = grid.d();
    let p = coeffs.len();
    if p == 0 {
        return Err(Error::InvalidArgument("at least one basis coefficient is required".into()));
    }
    let r = resolvent(grid, dt);
    let rm = r.entries();
    let mut inputs = field_keys(d, Key::U0);
    inputs.extend((0..p).map(Key::Coef));
    let mut asm = Assembler::new(&inputs);
    for it in 1..=m {
        let w = |j: usize| if it == 1 { Key::U0(j) } else { Key::W(j) };
        let mut units = Vec::with_capacity(d * p + d + p);
        for j in 0..d {
            for k in 0..p {
                units.push(binary(
                    Key::P(0, j, k),
                    Nonlinearity::BasisTerm {
                        basis: coeffs.basis,
                        k,
                    },
                    vec![(w(j), 1.0)],
                    vec![(Key::Coef(k), 1.0)],
                ));
            }
        }
        units.extend((0..d).map(|j| carried(Key::U0(j))));
        units.extend((0..p).map(|k| carried(Key::Coef(k))));
        asm.push(units)?;

        let mut units = Vec::with_capacity(2 * d + p);
        for j in 0..d {
            let mut terms: Vec<(Key, f64)> = (0..d).map(|c| (Key::U0(c), rm[(j, c)])).collect();
            for c in 0..d {
                for k in 0..p {
                    terms.push((Key::P(0, c, k), dt * rm[(j, c)]));
                }
            }
            units.push(linear(Key::W(j), terms));
        }
        if it < m {
            units.extend((0..d).map(|j| carried(Key::U0(j))));
            units.extend((0..p).map(|k| carried(Key::Coef(k))));
        }
        asm.push(units)?;
    }
    asm.finish()
}

/// Unpivoted Doolittle LU followed by forward and backward substitution, `6d` layers.
///
/// Expects the current frame to hold `A(r, c)` and `B(i)`; leaves `X(i)` plus `extra`.
fn lu_stages(asm: &mut Assembler, d: usize, extra: &[Key]) -> Result<()> {
    let keep = |units: &mut Vec<Pending>, keys: &[Key]| units.extend(keys.iter().map(|k| carried(*k)));
    for j in 0..d {
        // Products l_ji u_ik feeding row j of U, and l_ki u_ij feeding column j of L.
        let mut units = Vec::new();
        for k in j..d {
            for i in 0..j {
                units.push(binary(
                    Key::P(1, i, k),
                    Nonlinearity::Product,
                    vec![(Key::L(j, i), 1.0)],
                    vec![(Key::U(i, k), 1.0)],
                ));
            }
        }
        for k in j + 1..d {
            for i in 0..j {
                units.push(binary(
                    Key::P(2, k, i),
                    Nonlinearity::Product,
                    vec![(Key::L(k, i), 1.0)],
                    vec![(Key::U(i, j), 1.0)],
                ));
            }
        }
        for r in j..d {
            for c in j..d {
                units.push(carried(Key::A(r, c)));
            }
        }
        carry_factors(&mut units, asm, d);
        keep(&mut units, &field_keys(d, Key::B));
        keep(&mut units, extra);
        asm.push(units)?;

        let mut units = Vec::new();
        let pivot: Vec<(Key, f64)> = std::iter::once((Key::A(j, j), 1.0))
            .chain((0..j).map(|i| (Key::P(1, i, j), -1.0)))
            .collect();
        for k in j..d {
            let row = std::iter::once((Key::A(j, k), 1.0))
                .chain((0..j).map(|i| (Key::P(1, i, k), -1.0)))
                .collect();
            units.push(linear(Key::U(j, k), row));
        }
        for k in j + 1..d {
            let num = std::iter::once((Key::A(k, j), 1.0))
                .chain((0..j).map(|i| (Key::P(2, k, i), -1.0)))
                .collect();
            units.push(binary(Key::L(k, j), Nonlinearity::Ratio, num, pivot.clone()));
        }
        for r in j + 1..d {
            for c in j + 1..d {
                units.push(carried(Key::A(r, c)));
            }
        }
        carry_factors(&mut units, asm, d);
        keep(&mut units, &field_keys(d, Key::B));
        keep(&mut units, extra);
        asm.push(units)?;
    }

    // Forward substitution with the unit-diagonal L: y_i = b_i - Σ_{j<i} l_ij y_j.
    for i in 0..d {
        let mut units: Vec<Pending> = (0..i)
            .map(|j| {
                binary(
                    Key::P(3, i, j),
                    Nonlinearity::Product,
                    vec![(Key::L(i, j), 1.0)],
                    vec![(Key::Y(j), 1.0)],
                )
            })
            .collect();
        keep(&mut units, &(i..d).map(Key::B).collect::<Vec<_>>());
        keep(&mut units, &(0..i).map(Key::Y).collect::<Vec<_>>());
        keep_lower_below(&mut units, i + 1, d);
        keep_upper(&mut units, d, d);
        keep(&mut units, extra);
        asm.push(units)?;

        let row = std::iter::once((Key::B(i), 1.0))
            .chain((0..i).map(|j| (Key::P(3, i, j), -1.0)))
            .collect();
        let mut units = vec![linear(Key::Y(i), row)];
        keep(&mut units, &(i + 1..d).map(Key::B).collect::<Vec<_>>());
        keep(&mut units, &(0..i).map(Key::Y).collect::<Vec<_>>());
        keep_lower_below(&mut units, i + 1, d);
        keep_upper(&mut units, d, d);
        keep(&mut units, extra);
        asm.push(units)?;
    }

    // Backward substitution: x_i = (y_i - Σ_{j>i} u_ij x_j) / u_ii.
    for i in (0..d).rev() {
        let mut units: Vec<Pending> = (i + 1..d)
            .map(|j| {
                binary(
                    Key::P(4, i, j),
                    Nonlinearity::Product,
                    vec![(Key::U(i, j), 1.0)],
                    vec![(Key::X(j), 1.0)],
                )
            })
            .collect();
        keep(&mut units, &(0..=i).map(Key::Y).collect::<Vec<_>>());
        keep(&mut units, &(i + 1..d).map(Key::X).collect::<Vec<_>>());
        keep_upper(&mut units, i + 1, d);
        keep(&mut units, extra);
        asm.push(units)?;

        let num = std::iter::once((Key::Y(i), 1.0))
            .chain((i + 1..d).map(|j| (Key::P(4, i, j), -1.0)))
            .collect();
        let mut units = vec![binary(
            Key::X(i),
            Nonlinearity::Ratio,
            num,
            vec![(Key::U(i, i), 1.0)],
        )];
        keep(&mut units, &(0..i).map(Key::Y).collect::<Vec<_>>());
        keep(&mut units, &(i + 1..d).map(Key::X).collect::<Vec<_>>());
        keep_upper(&mut units, i, d);
        keep(&mut units, extra);
        asm.push(units)?;
    }
    Ok(())
}

/// Carries every factor entry already present in the frame.
fn carry_factors(units: &mut Vec<Pending>, asm: &Assembler, d: usize) {
    for r in 0..d {
        for c in 0..d {
            if r > c && asm.has(Key::L(r, c)) {
                units.push(carried(Key::L(r, c)));
            }
            if r <= c && asm.has(Key::U(r, c)) {
                units.push(carried(Key::U(r, c)));
            }
        }
    }
}

/// Strictly lower entries of `L` in rows `from..d`.
fn keep_lower_below(units: &mut Vec<Pending>, from: usize, d: usize) {
    for r in from..d {
        for c in 0..r {
            units.push(carried(Key::L(r, c)));
        }
    }
}

/// Upper entries of `U` in rows `0..rows`.
fn keep_upper(units: &mut Vec<Pending>, rows: usize, d: usize) {
    for r in 0..rows {
        for c in r..d {
            units.push(carried(Key::U(r, c)));
        }
    }
}

/// Solver for `A x = b` on input `[vec(A) row-major; b]`, with `6d` layers.
pub fn build_lu_solver_circuit(d: usize) -> Result<Circuit> {
    if d == 0 {
        return Err(Error::InvalidArgument("system size must be >= 1".into()));
    }
    let mut inputs: Vec<Key> = (0..d * d).map(|i| Key::A(i / d, i % d)).collect();
    inputs.extend((0..d).map(Key::B));
    let mut asm = Assembler::new(&inputs);
    lu_stages(&mut asm, d, &[])?;
    asm.finish()
}

/// `m` Newton iterations for `u_t = Δu + f(u)` on input `u0`, `6d + 3` layers each.
///
/// Per iteration: `f(w)` and `Δt f'(w)`; the residual `w - R u0 - R Δt f(w)` and the
/// Jacobian `δ_rc - R_rc Δt f'(w_c)`; the LU solve; and the update `w - x`.
pub fn build_newton_rd_circuit(grid: &Grid1D, f: &ReactionSpec, dt: f64, m: usize) -> Result<Circuit> {
    check_step(dt, m)?;
    let d = grid.d();
    let r = resolvent(grid, dt);
    let rm = r.entries();
    let spec = Arc::new(f.clone());
    let u0_keys = field_keys(d, Key::U0);
    let mut asm = Assembler::new(&u0_keys);
    for it in 1..=m {
        let w = |j: usize| if it == 1 { Key::U0(j) } else { Key::W(j) };
        let state: Vec<Key> = if it == 1 {
            u0_keys.clone()
        } else {
            u0_keys.iter().copied().chain(field_keys(d, Key::W)).collect()
        };

        let mut units: Vec<Pending> = state.iter().map(|k| carried(*k)).collect();
        for j in 0..d {
            units.push(unary(
                Key::P(5, 0, j),
                Nonlinearity::Reaction {
                    spec: spec.clone(),
                    scale: dt,
                },
                vec![(w(j), 1.0)],
            ));
            units.push(unary(
                Key::P(5, 1, j),
                Nonlinearity::ReactionDeriv {
                    spec: spec.clone(),
                    scale: dt,
                },
                vec![(w(j), 1.0)],
            ));
        }
        asm.push(units)?;

        let mut units: Vec<Pending> = state.iter().map(|k| carried(*k)).collect();
        for i in 0..d {
            let mut terms = vec![(w(i), 1.0)];
            terms.extend((0..d).map(|c| (Key::U0(c), -rm[(i, c)])));
            terms.extend((0..d).map(|c| (Key::P(5, 0, c), -rm[(i, c)])));
            units.push(linear(Key::B(i), terms));
        }
        for row in 0..d {
            for c in 0..d {
                let delta = if row == c { 1.0 } else { 0.0 };
                units.push(unary(
                    Key::A(row, c),
                    Nonlinearity::AffineFlip { delta },
                    vec![(Key::P(5, 1, c), rm[(row, c)])],
                ));
            }
        }
        asm.push(units)?;

        lu_stages(&mut asm, d, &state)?;

        let mut units: Vec<Pending> = (0..d)
            .map(|j| linear(Key::W(j), vec![(w(j), 1.0), (Key::X(j), -1.0)]))
            .collect();
        if it < m {
            units.extend(u0_keys.iter().map(|k| carried(*k)));
        }
        asm.push(units)?;
    }
    asm.finish()
}

/// `m` Picard iterations for `u_t + f(u)_x = κ u_xx` on input `u0`.
///
/// The first layer of each iteration emits `[u0; f'(w) ⊙ T w; R u0]` with
/// `R = (I + κΔt(-Δh))⁻¹`, the second `[u0; R u0 - Δt R (f'(w) ⊙ T w)]`.
pub fn build_claw_picard_circuit(grid: &Grid1D, flux: &FluxSpec, dt: f64, m: usize) -> Result<Circuit> {
    check_step(dt, m)?;
    let d = grid.d();
    let r = resolvent(grid, flux.kappa() * dt);
    let rm = r.entries();
    let t = derivative_op(grid);
    let tm = t.entries();
    let flux = Arc::new(flux.clone());
    let mut asm = Assembler::new(&field_keys(d, Key::U0));
    for it in 1..=m {
        let w = |j: usize| if it == 1 { Key::U0(j) } else { Key::W(j) };
        let mut units: Vec<Pending> = (0..d).map(|j| carried(Key::U0(j))).collect();
        for j in 0..d {
            let tw = (0..d).map(|c| (w(c), tm[(j, c)])).collect();
            units.push(binary(
                Key::P(6, 0, j),
                Nonlinearity::FluxDerivProduct { flux: flux.clone() },
                vec![(w(j), 1.0)],
                tw,
            ));
        }
        for j in 0..d {
            units.push(linear(
                Key::P(6, 1, j),
                (0..d).map(|c| (Key::U0(c), rm[(j, c)])).collect(),
            ));
        }
        asm.push(units)?;

        let mut units = Vec::with_capacity(2 * d);
        if it < m {
            units.extend((0..d).map(|j| carried(Key::U0(j))));
        }
        for j in 0..d {
            let mut terms = vec![(Key::P(6, 1, j), 1.0)];
            terms.extend((0..d).map(|c| (Key::P(6, 0, c), -dt * rm[(j, c)])));
            units.push(linear(Key::W(j), terms));
        }
        asm.push(units)?;
    }
    asm.finish()
}

/// Single layer `u1_k = (R u0)_k + (Δt R f)_k` for the forced heat equation.
pub fn build_parabolic_be_circuit(grid: &Grid1D, forcing: &ForcingSpec, dt: f64) -> Result<Circuit> {
    check_step(dt, 1)?;
    if forcing.values().grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.d(),
            got: forcing.values().len(),
        });
    }
    let d = grid.d();
    let r = resolvent(grid, dt);
    let rf = r.apply(&forcing.values().scale(dt));
    let mut layer = LayerBuilder::new(d);
    for k in 0..d {
        layer.unit(
            Nonlinearity::Shift {
                offset: rf.values()[k],
            },
            [r.entries().row(k).iter().copied().enumerate()],
        )?;
    }
    Circuit::new(d, vec![layer.finish()?])
}

fn check_step(dt: f64, m: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("iteration count must be >= 1".into()));
    }
    Ok(())
}
