//! Classical coupled standard maps on the unit 4-torus, their tangent maps,
//! and the Poisson-bracket analogue of the OTOC.
//!
//! One period applies the kick and then the drift:
//! `p_j' = p_j + (K_j / 2 pi) sin(2 pi q_j) + (b / 2 pi) sin(2 pi (q1 + q2))`,
//! `q_j' = q_j + p_j'`, everything mod 1. Coordinates are ordered
//! `(p1, q1, p2, q2)`.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::otoc::FitResult;
use crate::seeding::{substream, Purpose};
use crate::stats::{fit_line, Moments};

pub const P1: usize = 0;
pub const Q1: usize = 1;
pub const P2: usize = 2;
pub const Q2: usize = 3;

/// Trajectories per RNG stream in ensemble runs.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
}

impl PhasePoint {
    pub fn new(p1: f64, q1: f64, p2: f64, q2: f64) -> Result<Self> {
        let x = Self { p1, q1, p2, q2 };
        x.check()?;
        Ok(Self {
            p1: wrap(p1),
            q1: wrap(q1),
            p2: wrap(p2),
            q2: wrap(q2),
        })
    }

    pub fn uniform(rng: &mut impl Rng) -> Self {
        Self {
            p1: rng.random(),
            q1: rng.random(),
            p2: rng.random(),
            q2: rng.random(),
        }
    }

    fn check(&self) -> Result<()> {
        if [self.p1, self.q1, self.p2, self.q2].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("phase point", format!("{self:?} has nonfinite coordinates")))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.q1, self.p2, self.q2]
    }
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub k1: f64,
    pub k2: f64,
    pub b: f64,
}

impl MapParams {
    pub fn new(k1: f64, k2: f64, b: f64) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2), ("b", b)] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        Ok(Self { k1, k2, b })
    }
}

/// 4x4 Jacobian in `(p1, q1, p2, q2)` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentMatrix(pub [[f64; 4]; 4]);

impl TangentMatrix {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self(m)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &TangentMatrix) -> TangentMatrix {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        TangentMatrix(out)
    }

    pub fn transpose(&self) -> TangentMatrix {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[j][i];
            }
        }
        TangentMatrix(out)
    }

    pub fn scale(&self, s: f64) -> TangentMatrix {
        TangentMatrix(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        let minor = |skip: usize| -> f64 {
            let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
            let a = |r: usize, c: usize| m[r][cols[c]];
            a(1, 0) * (a(2, 1) * a(3, 2) - a(2, 2) * a(3, 1)) - a(1, 1) * (a(2, 0) * a(3, 2) - a(2, 2) * a(3, 0))
                + a(1, 2) * (a(2, 0) * a(3, 1) - a(2, 1) * a(3, 0))
        };
        (0..4)
            .map(|c| if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * minor(c))
            .sum()
    }

    /// Standard symplectic form for `(p1, q1, p2, q2)`.
    pub fn symplectic_form() -> TangentMatrix {
        let mut m = [[0.0; 4]; 4];
        m[P1][Q1] = 1.0;
        m[Q1][P1] = -1.0;
        m[P2][Q2] = 1.0;
        m[Q2][P2] = -1.0;
        TangentMatrix(m)
    }

    /// `max |J^T Omega J - Omega|`.
    pub fn symplectic_defect(&self) -> f64 {
        let omega = Self::symplectic_form();
        let lhs = self.transpose().mul(&omega).mul(self);
        lhs.0
            .iter()
            .flatten()
            .zip(omega.0.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn momentum_kicks(x: &PhasePoint, p: &MapParams) -> (f64, f64) {
    let coupling = p.b / TAU * (TAU * (x.q1 + x.q2)).sin();
    (
        p.k1 / TAU * (TAU * x.q1).sin() + coupling,
        p.k2 / TAU * (TAU * x.q2).sin() + coupling,
    )
}

pub fn map_step(x: &PhasePoint, p: &MapParams) -> Result<PhasePoint> {
    x.check()?;
    let (f1, f2) = momentum_kicks(x, p);
    let p1 = wrap(x.p1 + f1);
    let p2 = wrap(x.p2 + f2);
    Ok(PhasePoint {
        p1,
        q1: wrap(x.q1 + p1),
        p2,
        q2: wrap(x.q2 + p2),
    })
}

/// Exact Jacobian of [`map_step`] at `x`.
pub fn jacobian_step(x: &PhasePoint, p: &MapParams) -> TangentMatrix {
    let c = p.b * (TAU * (x.q1 + x.q2)).cos();
    let a1 = p.k1 * (TAU * x.q1).cos() + c;
    let a2 = p.k2 * (TAU * x.q2).cos() + c;
    let mut m = [[0.0; 4]; 4];
    m[P1] = [1.0, a1, 0.0, c];
    m[P2] = [0.0, c, 1.0, a2];
    m[Q1] = m[P1];
    m[Q1][Q1] += 1.0;
    m[Q2] = m[P2];
    m[Q2][Q2] += 1.0;
    TangentMatrix(m)
}

/// Tangent propagation along one trajectory with log-rescaling, so entries
/// never overflow however long the run.
#[derive(Debug, Clone)]
pub struct TangentTrajectory {
    pub point: PhasePoint,
    scaled: TangentMatrix,
    log_scale: f64,
}

impl TangentTrajectory {
    const RESCALE_ABOVE: f64 = 1e150;

    pub fn new(point: PhasePoint) -> Self {
        Self {
            point,
            scaled: TangentMatrix::identity(),
            log_scale: 0.0,
        }
    }

    pub fn step(&mut self, p: &MapParams) -> Result<()> {
        let m = jacobian_step(&self.point, p);
        self.scaled = m.mul(&self.scaled);
        self.point = map_step(&self.point, p)?;
        let peak = self.scaled.max_abs();
        if peak > Self::RESCALE_ABOVE {
            self.scaled = self.scaled.scale(1.0 / peak);
            self.log_scale += peak.ln();
        }
        Ok(())
    }

    /// `ln |J_{row,col}|`; `-inf` when the element vanishes.
    pub fn log_abs_element(&self, row: usize, col: usize) -> f64 {
        self.scaled.get(row, col).abs().ln() + self.log_scale
    }

    /// The accumulated Jacobian, only meaningful while it is unscaled.
    pub fn jacobian(&self) -> Option<TangentMatrix> {
        (self.log_scale == 0.0).then_some(self.scaled)
    }
}

/// `ln C_cl(t)` for `t = 1..=steps`, with
/// `C_cl(t) = sin^2(2 pi q1(t)) sin^2(2 pi q2(0)) (dq1(t)/dp2(0))^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSeries {
    pub log_c: Vec<f64>,
}

impl PoissonSeries {
    /// `C_cl(t)`, which saturates to `inf` only beyond `f64::MAX`.
    pub fn value(&self, t: usize) -> f64 {
        self.log_c[t - 1].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_c.iter().map(|l| l.exp()).collect()
    }
}

pub fn poisson_otoc(x0: &PhasePoint, p: &MapParams, steps: usize) -> Result<PoissonSeries> {
    if steps < 1 {
        return Err(invalid("T", "need at least one kick"));
    }
    let log_sin_q2 = 2.0 * (TAU * x0.q2).sin().abs().ln();
    let mut traj = TangentTrajectory::new(*x0);
    let mut log_c = Vec::with_capacity(steps);
    for _ in 0..steps {
        traj.step(p)?;
        let log_sin_q1 = 2.0 * (TAU * traj.point.q1).sin().abs().ln();
        log_c.push(log_sin_q1 + log_sin_q2 + 2.0 * traj.log_abs_element(Q1, P2));
    }
    Ok(PoissonSeries { log_c })
}

/// Ensemble mean of `ln C_cl(t)` with the count of excluded realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEnsemble {
    pub times: Vec<usize>,
    pub mean_log_c: Vec<f64>,
    pub stderr_log_c: Vec<f64>,
    pub excluded: usize,
    pub total: usize,
}

/// Uniform initial conditions on the 4-torus; stream `i` seeds trajectories
/// `i * 1024 ..`, and chunk moments are merged in index order.
pub fn poisson_ensemble(
    p: &MapParams,
    ensemble: usize,
    steps: usize,
    window: (usize, usize),
    seed: u64,
) -> Result<LogEnsemble> {
    if window.1 > steps || window.0 < 1 {
        return Err(invalid("fit window", format!("{window:?} must lie inside 1..={steps}")));
    }
    let chunks = ensemble.div_ceil(CHUNK);
    let partial: Vec<(Vec<Moments>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<(Vec<Moments>, usize)> {
            let mut rng = substream(seed, Purpose::ClassicalChunk, chunk as u64);
            let count = CHUNK.min(ensemble - chunk * CHUNK);
            let mut moments = vec![Moments::default(); steps];
            let mut excluded = 0;
            for _ in 0..count {
                let x0 = PhasePoint::uniform(&mut rng);
                let series = poisson_otoc(&x0, p, steps)?;
                let in_window = &series.log_c[window.0 - 1..window.1];
                if in_window.iter().any(|l| !l.is_finite()) {
                    excluded += 1;
                    continue;
                }
                for (m, l) in moments.iter_mut().zip(&series.log_c) {
                    if l.is_finite() {
                        m.push(*l);
                    }
                }
            }
            Ok((moments, excluded))
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Moments::default(); steps];
    let mut excluded = 0;
    for (moments, ex) in &partial {
        excluded += ex;
        for (acc, m) in total.iter_mut().zip(moments) {
            acc.merge(m);
        }
    }
    Ok(LogEnsemble {
        times: (1..=steps).collect(),
        mean_log_c: total.iter().map(|m| m.mean()).collect(),
        stderr_log_c: total.iter().map(|m| m.estimate().stderr).collect(),
        excluded,
        total: ensemble,
    })
}

/// Slope of an ensemble-mean log curve over an inclusive window of kicks.
pub fn log_slope(times: &[usize], mean_log: &[f64], window: (usize, usize)) -> Result<FitResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(mean_log)
        .filter(|(t, _)| (window.0..=window.1).contains(*t))
        .map(|(t, y)| (*t as f64, *y))
        .unzip();
    let line = fit_line(&xs, &ys).ok_or_else(|| Error::FitWindow {
        t_min: window.0,
        t_max: window.1,
        reason: "needs at least three points".into(),
    })?;
    Ok(FitResult {
        slope: line.slope,
        intercept: line.intercept,
        slope_stderr: line.slope_stderr,
        r_squared: line.r_squared,
        window: [window.0, window.1],
    })
}

pub const DEFAULT_LYAPUNOV_WINDOW: (usize, usize) = (2, 5);
pub const DEFAULT_ENSEMBLE: usize = 100_000;

/// Slope of the ensemble mean of `ln C_cl(t)`, an estimate of `2 lambda_cl`.
pub fn classical_lyapunov(
    p: &MapParams,
    ensemble: usize,
    window: (usize, usize),
    seed: u64,
) -> Result<(FitResult, LogEnsemble)> {
    if ensemble < 1000 {
        return Err(invalid("ensemble", format!("need at least 1000 trajectories, got {ensemble}")));
    }
    let ens = poisson_ensemble(p, ensemble, window.1, window, seed)?;
    if ens.excluded * 100 > ens.total {
        return Err(Error::TooManyExcluded {
            excluded: ens.excluded,
            total: ens.total,
        });
    }
    let fit = log_slope(&ens.times, &ens.mean_log_c, window)?;
    Ok((fit, ens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(k1: f64, k2: f64, b: f64) -> MapParams {
        MapParams::new(k1, k2, b).unwrap()
    }

    #[test]
    fn origin_is_fixed() {
        let x = PhasePoint::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(map_step(&x, &params(9.0, 10.0, 0.3)).unwrap(), x);
    }

    #[test]
    fn free_rotation() {
        let x = PhasePoint::new(0.25, 0.1, 0.25, 0.1).unwrap();
        let y = map_step(&x, &params(0.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(y.q1, 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(y.p1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(y.q2, 0.35, epsilon = 1e-15);
    }

    #[test]
    fn decoupled_subsystems() {
        let x = PhasePoint::new(0.3, 0.6, 0.7, 0.2).unwrap();
        let a = map_step(&x, &params(1.0, 4.0, 0.0)).unwrap();
        let b = map_step(&x, &params(7.0, 4.0, 0.0)).unwrap();
        assert_eq!((a.p2, a.q2), (b.p2, b.q2));
        let j = jacobian_step(&x, &params(7.0, 4.0, 0.0));
        assert_eq!(j.get(Q1, P2), 0.0);
    }

    #[test]
    fn rejects_nonfinite() {
        assert!(PhasePoint::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(MapParams::new(f64::INFINITY, 1.0, 0.0).is_err());
    }

    #[test]
    fn free_jacobian_is_shear() {
        let x = PhasePoint::new(0.3, 0.6, 0.7, 0.2).unwrap();
        let j = jacobian_step(&x, &params(0.0, 0.0, 0.0));
        let expect = [
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
        ];
        assert_eq!(j.0, expect);
    }

    /// Central differences on the unwrapped map, so the mod-1 cut never
    /// falls inside the stencil.
    fn unwrapped_step(x: [f64; 4], p: &MapParams) -> [f64; 4] {
        let pt = PhasePoint { p1: x[0], q1: x[1], p2: x[2], q2: x[3] };
        let (f1, f2) = momentum_kicks(&pt, p);
        let p1 = x[0] + f1;
        let p2 = x[2] + f2;
        [p1, x[1] + p1, p2, x[3] + p2]
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..20 {
            let x = PhasePoint::uniform(&mut rng);
            let p = params(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(-1.0..1.0));
            let j = jacobian_step(&x, &p);
            for col in 0..4 {
                let mut plus = x.as_array();
                let mut minus = x.as_array();
                plus[col] += h;
                minus[col] -= h;
                let (fp, fm) = (unwrapped_step(plus, &p), unwrapped_step(minus, &p));
                for row in 0..4 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((fd - j.get(row, col)).abs() < 1e-5, "({row},{col}): {fd} vs {}", j.get(row, col));
                }
            }
            assert_abs_diff_eq!(j.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn accumulated_jacobian_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let mut traj = TangentTrajectory::new(PhasePoint::uniform(&mut rng));
            for _ in 0..10 {
                traj.step(&params(9.0, 10.0, 0.05)).unwrap();
            }
            let j = traj.jacobian().unwrap();
            let scale = j.max_abs().powi(2);
            assert!(j.symplectic_defect() / scale < 1e-6);
        }
    }

    #[test]
    fn poisson_otoc_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x0 = PhasePoint::uniform(&mut rng);
        let zero = poisson_otoc(&x0, &params(9.0, 10.0, 0.0), 8).unwrap();
        assert!(zero.values().iter().all(|&c| c == 0.0));
        let s = poisson_otoc(&x0, &params(9.0, 10.0, 0.05), 8).unwrap();
        assert!(s.values().iter().all(|&c| c >= 0.0));
        // dq1(1)/dp2(0) vanishes: p2 has not yet reached q1 after one kick
        assert_eq!(s.value(1), 0.0);
        assert!(s.value(5) > 0.0);
        assert!(poisson_otoc(&x0, &params(9.0, 10.0, 0.05), 0).is_err());
    }

    #[test]
    fn long_runs_do_not_overflow() {
        let x0 = PhasePoint::new(0.123, 0.456, 0.789, 0.321).unwrap();
        let s = poisson_otoc(&x0, &params(20.0, 21.0, 0.1), 400).unwrap();
        let last = *s.log_c.last().unwrap();
        assert!(last.is_finite() && last > 700.0);
    }

    #[test]
    fn synthetic_expansion_slope() {
        // log C = 2 lambda t + const exactly
        let lambda = 1.7;
        let times: Vec<usize> = (1..=8).collect();
        let logs: Vec<f64> = times.iter().map(|&t| 2.0 * lambda * t as f64 - 3.0).collect();
        let fit = log_slope(&times, &logs, (2, 5)).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0 * lambda, epsilon = 1e-6);
    }

    #[test]
    fn ensemble_reproducible_and_validated() {
        let p = params(9.0, 10.0, 0.05);
        let (a, ea) = classical_lyapunov(&p, 2000, (2, 5), 4).unwrap();
        let (b, _) = classical_lyapunov(&p, 2000, (2, 5), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(ea.total, 2000);
        assert!(classical_lyapunov(&p, 10, (2, 5), 4).is_err());
        let decoupled = classical_lyapunov(&params(9.0, 10.0, 0.0), 2000, (2, 5), 4);
        assert!(matches!(decoupled, Err(Error::TooManyExcluded { .. })));
    }
}
