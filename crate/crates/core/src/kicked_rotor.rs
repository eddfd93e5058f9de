//! Floquet operators of two kicked rotors on the torus and their coupling.
//!
//! The coupled propagator is `U = (U_K1 (x) U_K2) U_b`: the diagonal
//! interaction acts first, then the local kicked-rotor maps.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, C64};
use crate::operators::{check_alpha, check_dimension, DenseBudget, OperatorMatrix, Role, SystemParams};

/// Kick phases `exp[-i (N K / 2 pi) cos(2 pi (n + alpha) / N)]`.
pub fn kick_diagonal(n: usize, k: f64, alpha: f64) -> Array1<C64> {
    let strength = n as f64 * k / (2.0 * PI);
    Array1::from_shape_fn(n, |m| {
        C64::from_polar(1.0, -strength * (2.0 * PI * (m as f64 + alpha) / n as f64).cos())
    })
}

/// Free propagator `<n'|G|n> = exp[i pi (n - n')^2 / N] / sqrt(N)`.
pub fn free_propagator(n: usize) -> Array2<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(row, col)| {
        let d = row as i64 - col as i64;
        // reduce d^2 mod 2N before scaling to keep the phase argument small
        let q = (d * d).rem_euclid(2 * n as i64) as f64;
        C64::from_polar(scale, PI * q / n as f64)
    })
}

/// Single-rotor Floquet operator `U_K = G D_K` (kick first, then free motion).
pub fn floquet_single(n: usize, k: f64, alpha: f64) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    check_alpha(alpha)?;
    if !k.is_finite() {
        return Err(invalid("K", format!("must be finite, got {k}")));
    }
    let kick = kick_diagonal(n, k, alpha);
    let mut g = free_propagator(n);
    for mut row in g.rows_mut() {
        Zip::from(&mut row).and(&kick).for_each(|x, d| *x *= d);
    }
    OperatorMatrix::from_parts(g, Role::Unitary)
}

/// Diagonal of `U_b` in row-major `(n1, n2)` order.
pub fn interaction_diag(n: usize, b: f64, alpha: f64) -> Result<Array1<C64>> {
    check_dimension(n)?;
    check_alpha(alpha)?;
    if !b.is_finite() {
        return Err(invalid("b", format!("must be finite, got {b}")));
    }
    let strength = n as f64 * b / (2.0 * PI);
    Ok(Array1::from_shape_fn(n * n, |k| {
        let (n1, n2) = (k / n, k % n);
        let arg = 2.0 * PI * ((n1 + n2) as f64 + 2.0 * alpha) / n as f64;
        C64::from_polar(1.0, -strength * arg.cos())
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// One period of the coupled rotors, kept in factored form.
#[derive(Debug, Clone)]
pub struct CoupledFloquet {
    pub params: SystemParams,
    pub u1: OperatorMatrix,
    pub u2: OperatorMatrix,
    pub ub_diag: Array1<C64>,
    pub dense: Option<OperatorMatrix>,
    u1_dagger: Array2<C64>,
    u2_dagger: Array2<C64>,
}

pub fn coupled_floquet(params: &SystemParams) -> Result<CoupledFloquet> {
    params.validate()?;
    let n = params.n;
    let u1 = floquet_single(n, params.k1, params.alpha)?;
    let u2 = floquet_single(n, params.k2, params.alpha)?;
    let ub_diag = interaction_diag(n, params.b, params.alpha)?;
    Ok(CoupledFloquet::from_factors(*params, u1, u2, ub_diag))
}

impl CoupledFloquet {
    pub(crate) fn from_factors(
        params: SystemParams,
        u1: OperatorMatrix,
        u2: OperatorMatrix,
        ub_diag: Array1<C64>,
    ) -> Self {
        let u1_dagger = linalg::dagger(&u1.view());
        let u2_dagger = linalg::dagger(&u2.view());
        Self {
            params,
            u1,
            u2,
            ub_diag,
            dense: None,
            u1_dagger,
            u2_dagger,
        }
    }

    pub fn n(&self) -> usize {
        self.u1.dim()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.n()
    }

    /// Materializes `(U1 (x) U2) diag(U_b)`; rejected beyond the budget.
    pub fn with_dense(mut self, budget: &DenseBudget) -> Result<Self> {
        budget.check("coupled Floquet operator", self.dim())?;
        let mut dense = linalg::kron(&self.u1.view(), &self.u2.view());
        for mut row in dense.rows_mut() {
            Zip::from(&mut row).and(&self.ub_diag).for_each(|x, d| *x *= d);
        }
        self.dense = Some(OperatorMatrix::from_parts(dense, Role::Unitary)?);
        Ok(self)
    }

    /// `U psi` or `U^dagger psi` in O(N^3) using the factored form.
    pub fn apply(&self, psi: &ArrayView1<C64>, direction: Direction) -> Result<Array1<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: psi.len(),
            });
        }
        let n = self.n();
        Ok(match direction {
            Direction::Forward => {
                let kicked = &self.ub_diag * psi;
                linalg::apply_kron_to_vector(Some(&self.u1.view()), Some(&self.u2.view()), &kicked.view(), n)
            }
            Direction::Adjoint => {
                let mut out = linalg::apply_kron_to_vector(
                    Some(&self.u1_dagger.view()),
                    Some(&self.u2_dagger.view()),
                    psi,
                    n,
                );
                Zip::from(&mut out).and(&self.ub_diag).for_each(|x, d| *x *= d.conj());
                out
            }
        })
    }

    /// Heisenberg conjugation `U^dagger A U` of a dense `N^2 x N^2` operator.
    pub fn conjugate(&self, a: Array2<C64>) -> Array2<C64> {
        heisenberg_conjugate(&self.u1_dagger, &self.u2_dagger, &self.ub_diag.view(), a)
    }
}

/// `D^dagger W^dagger A W D` with `W = w1 (x) w2` and `D` diagonal, given the
/// daggered local factors. Uses `W^dagger A W = (W^dagger (W^dagger A)^dagger)^dagger`
/// so only left multiplications by the Kronecker factor are needed.
pub(crate) fn heisenberg_conjugate(
    w1_dagger: &Array2<C64>,
    w2_dagger: &Array2<C64>,
    diag: &ArrayView1<C64>,
    a: Array2<C64>,
) -> Array2<C64> {
    let (v1, v2) = (w1_dagger.view(), w2_dagger.view());
    let left = linalg::left_apply_kron(Some(&v1), Some(&v2), a);
    let left = linalg::dagger(&left.view());
    let both = linalg::left_apply_kron(Some(&v1), Some(&v2), left);
    let mut out = linalg::dagger(&both.view());
    linalg::conjugate_by_diagonal(&mut out, diag);
    out
}

/// Convenience wrapper mirroring the free-function form of [`CoupledFloquet::apply`].
pub fn apply_floquet(f: &CoupledFloquet, psi: &ArrayView1<C64>, direction: Direction) -> Result<Array1<C64>> {
    f.apply(psi, direction)
}
