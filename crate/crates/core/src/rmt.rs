//! Random-matrix model of two strongly chaotic, weakly coupled subsystems:
//! fresh CUE local factors and a random diagonal interaction at every kick.

use ndarray::{Array1, Array2};
use ndarray_linalg::QRSquare;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kicked_rotor::heisenberg_conjugate;
use crate::linalg::{self, C64};
use crate::operators::{check_dimension, DenseBudget, LocalOperator, OperatorMatrix, Role, Side, SystemParams};
use crate::otoc::{dense_traces, saturation_value, OtocSeries, Scenario, SeriesErrors};
use crate::seeding::{substream, Purpose};
use crate::special::sinc_pi;
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmtEnsembleSpec {
    pub n: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub samples: usize,
    pub rng_seed: u64,
}

impl RmtEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        check_dimension(self.n)?;
        if self.samples < 1 {
            return Err(invalid("samples", "need at least one realization"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon", format!("must be finite and >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` folded back into `Q`.
pub fn sample_cue(n: usize, rng: &mut impl Rng) -> Result<OperatorMatrix> {
    check_dimension(n)?;
    let ginibre = Array2::from_shape_fn((n, n), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let (mut q, r) = ginibre.qr_square()?;
    for (mut col, rjj) in q.columns_mut().into_iter().zip(r.diag().iter()) {
        let norm = rjj.norm();
        if norm == 0.0 {
            return Err(Error::Numerical("singular Ginibre draw".into()));
        }
        let phase = rjj / norm;
        col.mapv_inplace(|x| x * phase);
    }
    OperatorMatrix::from_parts(q, Role::Unitary)
}

/// Diagonal `exp(2 pi i eps xi_k)` with fresh `xi_k ~ U[-1/2, 1/2]`.
pub fn sample_interaction(n: usize, epsilon: f64, rng: &mut impl Rng) -> Array1<C64> {
    Array1::from_shape_fn(n * n, |_| {
        let xi: f64 = rng.random::<f64>() - 0.5;
        C64::from_polar(1.0, std::f64::consts::TAU * epsilon * xi)
    })
}

/// Ensemble OTOC of the random-matrix model with exact traces per realization.
///
/// `O1` sits on subsystem 1 (`A`), `O2` on subsystem 2 (`B`). Realization `s`
/// draws from seed stream `s`, so the result is independent of thread count.
pub fn rmt_otoc_mc(
    spec: &RmtEnsembleSpec,
    o1: &OperatorMatrix,
    o2: &OperatorMatrix,
    budget: &DenseBudget,
) -> Result<OtocSeries> {
    spec.validate()?;
    let n = spec.n;
    budget.check("RMT Heisenberg operator", n * n)?;
    for o in [o1, o2] {
        if o.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: o.dim() });
        }
    }
    let a0 = LocalOperator::new(o1.clone(), Side::Left);
    let b0 = LocalOperator::new(o2.clone(), Side::Right);
    let a_dense = a0.embed(budget)?.into_entries();

    let realizations: Vec<Vec<(f64, f64)>> = (0..spec.samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<(f64, f64)>> {
            let mut rng = substream(spec.rng_seed, Purpose::RmtRealization, s as u64);
            let mut a = a_dense.clone();
            let mut out = Vec::with_capacity(spec.steps + 1);
            out.push(dense_traces(&a, &b0)?);
            for _ in 0..spec.steps {
                let f1 = sample_cue(n, &mut rng)?;
                let f2 = sample_cue(n, &mut rng)?;
                let d = sample_interaction(n, spec.epsilon, &mut rng);
                a = heisenberg_conjugate(
                    &linalg::dagger(&f1.view()),
                    &linalg::dagger(&f2.view()),
                    &d.view(),
                    a,
                );
                out.push(dense_traces(&a, &b0)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut c2 = Vec::with_capacity(spec.steps + 1);
    let mut c4 = Vec::with_capacity(spec.steps + 1);
    let mut errors = SeriesErrors { c2: Vec::new(), c4: Vec::new(), c: Vec::new() };
    for t in 0..=spec.steps {
        let m2: Moments = realizations.iter().map(|r| r[t].0).collect();
        let m4: Moments = realizations.iter().map(|r| r[t].1).collect();
        let mc: Moments = realizations.iter().map(|r| r[t].0 - r[t].1).collect();
        c2.push(m2.mean());
        c4.push(m4.mean());
        errors.c2.push(m2.estimate().stderr);
        errors.c4.push(m4.estimate().stderr);
        errors.c.push(mc.estimate().stderr);
    }
    let params = SystemParams {
        n,
        k1: 0.0,
        k2: 0.0,
        b: 0.0,
        alpha: 0.0,
        epsilon: spec.epsilon,
    };
    Ok(OtocSeries::from_parts(
        c2,
        c4,
        saturation_value(o1, o2),
        Some(errors),
        params,
        Scenario::Rmt,
    ))
}

/// Closed-form ensemble OTOC `Tr(O1^2) Tr(O2^2) [1 - sinc^{4m}(pi eps)]`,
/// with `m = t - 1` when both observables are diagonal in the interaction
/// basis and `m = t` otherwise.
pub fn analytic_otoc(epsilon: f64, t: usize, tr_o1_sq: f64, tr_o2_sq: f64, diagonal_observables: bool) -> Result<f64> {
    let power = if diagonal_observables {
        if t < 1 {
            return Err(invalid("t", "the diagonal-observable form holds for t >= 1"));
        }
        4 * (t - 1)
    } else {
        4 * t
    };
    Ok(tr_o1_sq * tr_o2_sq * (1.0 - sinc_pi(epsilon).powi(power as i32)))
}

/// `-4 ln|sinc(pi eps)|`.
pub fn mu_rmt(epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid("epsilon", format!("sinc(pi eps) must not vanish; need 0 <= eps < 1, got {epsilon}")));
    }
    Ok(-4.0 * sinc_pi(epsilon).abs().ln())
}

/// `sqrt(3/8) N b / pi^2`, matching the small-coupling rates of the two models.
pub fn epsilon_from_b(n: usize, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(invalid("b", format!("must be nonnegative, got {b}")));
    }
    Ok((3.0f64 / 8.0).sqrt() * n as f64 * b / std::f64::consts::PI.powi(2))
}
