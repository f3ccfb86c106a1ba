use serde::{Deserialize, Serialize};

use super::grid::Field;
use super::linop::derivative_op;

pub fn sup_norm(u: &Field) -> f64 {
    sup_norm_slice(u.values())
}

pub(crate) fn sup_norm_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `sqrt(h Σ v_i²)`
pub fn l2_norm(u: &Field) -> f64 {
    (u.grid().h() * u.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `sqrt(|v|²_l2 + |T v|²_l2)` with `T` the centered derivative.
pub fn h1_norm(u: &Field) -> f64 {
    let dv = derivative_op(u.grid()).apply(u);
    let l2 = l2_norm(u);
    let dl2 = l2_norm(&dv);
    (l2 * l2 + dl2 * dl2).sqrt()
}

/// Norm selector used by tasks, probes and error estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    L2,
    H1,
}

impl NormKind {
    pub fn eval(self, u: &Field) -> f64 {
        match self {
            NormKind::Sup => sup_norm(u),
            NormKind::L2 => l2_norm(u),
            NormKind::H1 => h1_norm(u),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::make_grid;

    #[test]
    fn zero_field_norms() {
        let g = make_grid(0.0, 1.0, 5).unwrap();
        let z = Field::zeros(g);
        assert_eq!(sup_norm(&z), 0.0);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(h1_norm(&z), 0.0);
    }

    #[test]
    fn sup_norm_definition() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let u = Field::new(g, vec![1.0, -3.0, 2.0]).unwrap();
        assert_eq!(sup_norm(&u), 3.0);
        assert!(h1_norm(&u) >= l2_norm(&u));
        assert!((l2_norm(&u) - (0.25_f64 * 14.0).sqrt()).abs() < 1e-15);
    }
}
