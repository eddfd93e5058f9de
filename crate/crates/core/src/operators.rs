//! Hilbert-space building blocks on the discrete torus: translations, the
//! cosine observable, GUE observables and subsystem embeddings.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};

pub const UNITARY_TOLERANCE: f64 = 1e-10;
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_ALPHA: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Unitary,
    Hermitian,
    General,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Unitary => "unitary",
            Role::Hermitian => "hermitian",
            Role::General => "general",
        }
    }
}

/// Dense complex square matrix tagged with the structural role it must satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
    role: Role,
}

impl OperatorMatrix {
    /// Validates the role before accepting the matrix.
    pub fn new(entries: Array2<C64>, role: Role) -> Result<Self> {
        let op = Self::from_parts(entries, role)?;
        op.check_role()?;
        Ok(op)
    }

    /// Accepts a square matrix without the (possibly O(dim^3)) role check.
    pub(crate) fn from_parts(entries: Array2<C64>, role: Role) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::DimensionMismatch {
                expected: r,
                actual: c,
            });
        }
        Ok(Self { entries, role })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: linalg::identity(dim),
            role: Role::Unitary,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: Array2::zeros((dim, dim)),
            role: Role::Hermitian,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn role_deviation(&self) -> f64 {
        match self.role {
            Role::Unitary => linalg::unitarity_deviation(&self.view()),
            Role::Hermitian => linalg::hermiticity_deviation(&self.view()),
            Role::General => 0.0,
        }
    }

    pub fn check_role(&self) -> Result<()> {
        let tolerance = match self.role {
            Role::Unitary => UNITARY_TOLERANCE,
            Role::Hermitian => HERMITIAN_TOLERANCE,
            Role::General => return Ok(()),
        };
        let deviation = self.role_deviation();
        if deviation < tolerance {
            Ok(())
        } else {
            Err(Error::RoleCheck {
                role: self.role.name(),
                deviation,
                tolerance,
            })
        }
    }

    pub fn dagger(&self) -> Self {
        Self {
            entries: linalg::dagger(&self.view()),
            role: self.role,
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let role = match (self.role, other.role) {
            (Role::Unitary, Role::Unitary) => Role::Unitary,
            _ => Role::General,
        };
        Self {
            entries: self.entries.dot(&other.entries),
            role,
        }
    }

    pub fn trace_of_square(&self) -> f64 {
        linalg::trace_of_square(&self.view()).re
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries
            .indexed_iter()
            .all(|((i, j), x)| i == j || *x == ZERO)
    }
}

/// Upper bound on the dimension of any dense matrix the engine materializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseBudget {
    pub max_dim: usize,
}

impl Default for DenseBudget {
    fn default() -> Self {
        Self { max_dim: 1 << 13 }
    }
}

impl DenseBudget {
    pub fn check(&self, what: &'static str, dim: usize) -> Result<()> {
        if dim > self.max_dim {
            Err(Error::BudgetExceeded {
                what,
                dim,
                limit: self.max_dim,
            })
        } else {
            Ok(())
        }
    }
}

/// Parameters of one coupled-rotor system and its random-matrix counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    pub b: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl SystemParams {
    pub fn new(n: usize, k1: f64, k2: f64, b: f64) -> Self {
        Self {
            n,
            k1,
            k2,
            b,
            alpha: DEFAULT_ALPHA,
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension(self.n)?;
        check_alpha(self.alpha)?;
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("b", self.b)] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", format!("must lie in [0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

pub(crate) fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        Err(invalid("N", format!("need N >= 2, got {n}")))
    } else {
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")))
    }
}

/// Phases `exp(2 pi i (n + alpha) / N)` on the diagonal of `T_p`.
pub(crate) fn momentum_phases(n: usize, alpha: f64) -> Array1<C64> {
    Array1::from_shape_fn(n, |k| C64::from_polar(1.0, 2.0 * PI * (k as f64 + alpha) / n as f64))
}

/// Momentum translation, diagonal in the position basis.
pub fn translation_p(n: usize, alpha: f64) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    check_alpha(alpha)?;
    Ok(OperatorMatrix {
        entries: Array2::from_diag(&momentum_phases(n, alpha)),
        role: Role::Unitary,
    })
}

/// Cyclic position shift `|n> -> |n+1 mod N>`.
pub fn translation_q(n: usize) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    let mut entries = Array2::zeros((n, n));
    for k in 0..n {
        entries[[(k + 1) % n, k]] = ONE;
    }
    Ok(OperatorMatrix {
        entries,
        role: Role::Unitary,
    })
}

/// `max |T_p T_q - e^{2 pi i/N} T_q T_p|`.
pub fn weyl_defect(n: usize, alpha: f64) -> Result<f64> {
    let tq = translation_q(n)?;
    let tp = translation_p(n, alpha)?;
    let lhs = tp.matmul(&tq);
    let rhs = tq.matmul(&tp).into_entries() * C64::from_polar(1.0, 2.0 * PI / n as f64);
    Ok(linalg::max_abs_diff(&lhs.view(), &rhs.view()))
}

/// `(T_p + T_p^dagger) / 2`, whose classical symbol is `cos(2 pi q)`.
pub fn cosine_observable(n: usize, alpha: f64) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    check_alpha(alpha)?;
    let diag = Array1::from_shape_fn(n, |k| {
        C64::new((2.0 * PI * (k as f64 + alpha) / n as f64).cos(), 0.0)
    });
    Ok(OperatorMatrix {
        entries: Array2::from_diag(&diag),
        role: Role::Hermitian,
    })
}

/// `(M + M^dagger) / 2` with i.i.d. standard normal real and imaginary parts in `M`.
pub fn gue_observable(n: usize, rng_seed: u64) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut m = Array2::<C64>::zeros((n, n));
    for x in m.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *x = C64::new(re, im);
    }
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
        }
    }
    Ok(OperatorMatrix {
        entries: h,
        role: Role::Hermitian,
    })
}

/// Which tensor factor a local operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// `op (x) I` (left) or `I (x) op` (right) as a dense matrix.
pub fn embed(op: &OperatorMatrix, side: Side, n_other: usize, budget: &DenseBudget) -> Result<OperatorMatrix> {
    if op.dim() < 2 {
        return Err(invalid("op", "dimension must be at least 2"));
    }
    let dim = op
        .dim()
        .checked_mul(n_other)
        .ok_or(Error::BudgetExceeded {
            what: "embedded operator",
            dim: usize::MAX,
            limit: budget.max_dim,
        })?;
    budget.check("embedded operator", dim)?;
    let id = linalg::identity(n_other);
    let entries = match side {
        Side::Left => linalg::kron(&op.view(), &id.view()),
        Side::Right => linalg::kron(&id.view(), &op.view()),
    };
    Ok(OperatorMatrix {
        entries,
        role: op.role,
    })
}

/// A subsystem operator together with the factor it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    pub op: OperatorMatrix,
    pub side: Side,
}

impl LocalOperator {
    pub fn new(op: OperatorMatrix, side: Side) -> Self {
        Self { op, side }
    }

    pub fn left(op: OperatorMatrix) -> Self {
        Self::new(op, Side::Left)
    }

    pub fn right(op: OperatorMatrix) -> Self {
        Self::new(op, Side::Right)
    }

    pub fn n(&self) -> usize {
        self.op.dim()
    }

    pub fn embed(&self, budget: &DenseBudget) -> Result<OperatorMatrix> {
        embed(&self.op, self.side, self.n(), budget)
    }

    /// `Tr(embedded^2) = N Tr(op^2)`.
    pub fn full_trace_of_square(&self) -> f64 {
        self.n() as f64 * self.op.trace_of_square()
    }

    /// Left-multiplies an `N^2 x c` matrix by the embedded operator.
    pub(crate) fn left_apply(&self, mut m: Array2<C64>) -> Array2<C64> {
        let n = self.n();
        if self.op.is_diagonal() {
            let d = self.op.entries().diag().to_owned();
            for (r, mut row) in m.rows_mut().into_iter().enumerate() {
                let k = match self.side {
                    Side::Left => r / n,
                    Side::Right => r % n,
                };
                row.mapv_inplace(|x| x * d[k]);
            }
            return m;
        }
        let v = self.op.view();
        match self.side {
            Side::Left => linalg::left_apply_kron(Some(&v), None, m),
            Side::Right => linalg::left_apply_kron(None, Some(&v), m),
        }
    }

    pub(crate) fn apply_to_vector(&self, psi: &ndarray::ArrayView1<C64>) -> Array1<C64> {
        let v = self.op.view();
        match self.side {
            Side::Left => linalg::apply_kron_to_vector(Some(&v), None, psi, self.n()),
            Side::Right => linalg::apply_kron_to_vector(None, Some(&v), psi, self.n()),
        }
    }

    pub fn commutes_with(&self, other: &LocalOperator) -> bool {
        self.side != other.side
    }
}
