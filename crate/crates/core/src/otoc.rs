//! Infinite-temperature OTOC `C(t) = C2(t) - C4(t)` with
//! `C2 = Tr[A(t)^2 B^2]` and `C4 = Tr[A(t) B A(t) B]`, plus the two-phase fits.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kicked_rotor::{CoupledFloquet, Direction};
use crate::linalg::{self, C64};
use crate::operators::{DenseBudget, LocalOperator, OperatorMatrix, Role, SystemParams};
use crate::seeding::{substream, Purpose};
use crate::special::{bessel_j0, J0_FIRST_ZERO};
use crate::stats::{fit_line, Moments};

/// Relative size of an imaginary part tolerated in a trace that must be real.
const REALNESS_TOLERANCE: f64 = 1e-10;

/// Noise floor of `c_norm` for exact (dense) traces.
pub const DENSE_NOISE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Cross,
    SameSubspace,
    Gue,
    WeakChaos,
    Rmt,
}

/// Standard errors attached to a Monte Carlo series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesErrors {
    pub c2: Vec<f64>,
    pub c4: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub times: Vec<usize>,
    pub c2: Vec<f64>,
    pub c4: Vec<f64>,
    pub c: Vec<f64>,
    pub c_norm: Vec<f64>,
    pub c_infinity: f64,
    pub errors: Option<SeriesErrors>,
    pub params: SystemParams,
    pub scenario: Scenario,
}

impl OtocSeries {
    pub(crate) fn from_parts(
        c2: Vec<f64>,
        c4: Vec<f64>,
        c_infinity: f64,
        errors: Option<SeriesErrors>,
        params: SystemParams,
        scenario: Scenario,
    ) -> Self {
        let c: Vec<f64> = c2.iter().zip(&c4).map(|(a, b)| a - b).collect();
        let c_norm = c.iter().map(|x| x / c_infinity).collect();
        Self {
            times: (0..c2.len()).collect(),
            c2,
            c4,
            c,
            c_norm,
            c_infinity,
            errors,
            params,
            scenario,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    /// Standard error of `c_norm[t]`; zero for exact series.
    pub fn c_norm_stderr(&self, t: usize) -> f64 {
        self.errors
            .as_ref()
            .map_or(0.0, |e| e.c[t] / self.c_infinity.abs())
    }

    /// Mean of `c_norm` over `t_min..=t_max`.
    pub fn mean_c_norm(&self, t_min: usize, t_max: usize) -> f64 {
        let slice = &self.c_norm[t_min..=t_max.min(self.len() - 1)];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

/// Least-squares result over an inclusive window of kicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub window: [usize; 2],
}

/// `Tr(O1^2) Tr(O2^2)`.
pub fn saturation_value(o1: &OperatorMatrix, o2: &OperatorMatrix) -> f64 {
    o1.trace_of_square() * o2.trace_of_square()
}

/// `-4 ln|J0(N b / 2 pi)|`, the interaction-limited relaxation rate of the coupled rotors.
pub fn mu_standard_map(n: usize, b: f64) -> Result<f64> {
    let x = n as f64 * b.abs() / (2.0 * std::f64::consts::PI);
    if !x.is_finite() || x >= J0_FIRST_ZERO {
        return Err(invalid(
            "b",
            format!("N b / 2 pi = {x} must stay below the first zero of J0 ({J0_FIRST_ZERO})"),
        ));
    }
    Ok(-4.0 * bessel_j0(x).abs().ln())
}

/// `ln N / ln(K / 2)`.
pub fn ehrenfest_time(n: usize, k: f64) -> Result<f64> {
    if !(k > 2.0) {
        return Err(invalid("K", format!("Ehrenfest estimate needs K > 2, got {k}")));
    }
    Ok((n as f64).ln() / (k / 2.0).ln())
}

/// One Heisenberg step `A -> U^dagger A U`.
pub fn heisenberg_step(a: &OperatorMatrix, f: &CoupledFloquet, budget: &DenseBudget) -> Result<OperatorMatrix> {
    budget.check("Heisenberg operator", a.dim())?;
    if a.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: a.dim(),
        });
    }
    let role = if a.role() == Role::Hermitian { Role::Hermitian } else { Role::General };
    OperatorMatrix::from_parts(f.conjugate(a.entries().clone()), role)
}

/// `(C2, C4)` for a dense Hermitian `A` and a local Hermitian `B`.
///
/// With `P = A B` one has `C2 = ||P||_F^2` and `C4 = Tr(P P)`.
pub(crate) fn dense_traces(a: &Array2<C64>, b: &LocalOperator) -> Result<(f64, f64)> {
    let ba = b.left_apply(a.clone());
    let p = linalg::dagger(&ba.view());
    let p_dagger = ba;
    let c2: f64 = p.iter().map(|x| x.norm_sqr()).sum();
    let c4: C64 = p.iter().zip(p_dagger.iter()).map(|(x, y)| x * y.conj()).sum();
    if c4.im.abs() > REALNESS_TOLERANCE * c2.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "four-point trace has imaginary part {:e} against C2 = {c2:e}",
            c4.im
        )));
    }
    Ok((c2, c4.re))
}

fn check_pair(f: &CoupledFloquet, a0: &LocalOperator, b0: &LocalOperator) -> Result<()> {
    for op in [a0, b0] {
        if op.n() != f.n() {
            return Err(Error::DimensionMismatch {
                expected: f.n(),
                actual: op.n(),
            });
        }
        if op.op.role() != Role::Hermitian {
            return Err(invalid("observable", "OTOC observables must be Hermitian"));
        }
    }
    Ok(())
}

fn scenario_for(a0: &LocalOperator, b0: &LocalOperator) -> Scenario {
    if a0.side == b0.side {
        Scenario::SameSubspace
    } else {
        Scenario::Cross
    }
}

/// Exact OTOC series for `t = 0..=steps` by dense Heisenberg evolution of `A`.
pub fn otoc_series_dense(
    f: &CoupledFloquet,
    a0: &LocalOperator,
    b0: &LocalOperator,
    steps: usize,
    budget: &DenseBudget,
) -> Result<OtocSeries> {
    check_pair(f, a0, b0)?;
    let mut a = a0.embed(budget)?.into_entries();
    let mut c2 = Vec::with_capacity(steps + 1);
    let mut c4 = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            a = f.conjugate(a);
        }
        let (x2, x4) = dense_traces(&a, b0)?;
        c2.push(x2);
        c4.push(x4);
    }
    Ok(OtocSeries::from_parts(
        c2,
        c4,
        saturation_value(&a0.op, &b0.op),
        None,
        f.params,
        scenario_for(a0, b0),
    ))
}

/// Both observables on subsystem 1: `A = O1a (x) I`, `B = O1b (x) I`.
pub fn same_subspace_series(
    f: &CoupledFloquet,
    o1a: &OperatorMatrix,
    o1b: &OperatorMatrix,
    steps: usize,
    budget: &DenseBudget,
) -> Result<OtocSeries> {
    otoc_series_dense(
        f,
        &LocalOperator::left(o1a.clone()),
        &LocalOperator::left(o1b.clone()),
        steps,
        budget,
    )
}

fn random_phase_vector(len: usize, rng: &mut impl Rng) -> Array1<C64> {
    Array1::from_shape_fn(len, |_| {
        C64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>())
    })
}

fn evolve_back(f: &CoupledFloquet, mut v: Array1<C64>, steps: usize) -> Result<Array1<C64>> {
    for _ in 0..steps {
        v = f.apply(&v.view(), Direction::Adjoint)?;
    }
    Ok(v)
}

/// Hutchinson-style estimate of the same traces with unit-modulus random probes.
///
/// Per probe `z`: `C2 ~ ||A(t) B z||^2` and `C4 ~ <A(t) z, B A(t) B z>`.
/// Probe `r` uses seed stream `r`, so results do not depend on scheduling.
pub fn otoc_series_stochastic(
    f: &CoupledFloquet,
    a0: &LocalOperator,
    b0: &LocalOperator,
    steps: usize,
    probes: usize,
    seed: u64,
) -> Result<OtocSeries> {
    check_pair(f, a0, b0)?;
    if probes < 16 {
        return Err(invalid("probes", format!("need at least 16 probes, got {probes}")));
    }
    use rayon::prelude::*;
    let per_probe: Vec<Vec<(f64, f64)>> = (0..probes)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let mut rng = substream(seed, Purpose::TraceProbes, r as u64);
            let z = random_phase_vector(f.dim(), &mut rng);
            let mut fwd_bz = b0.apply_to_vector(&z.view());
            let mut fwd_z = z;
            let mut out = Vec::with_capacity(steps + 1);
            for t in 0..=steps {
                if t > 0 {
                    fwd_bz = f.apply(&fwd_bz.view(), Direction::Forward)?;
                    fwd_z = f.apply(&fwd_z.view(), Direction::Forward)?;
                }
                let w = evolve_back(f, a0.apply_to_vector(&fwd_bz.view()), t)?;
                let az = evolve_back(f, a0.apply_to_vector(&fwd_z.view()), t)?;
                let c2 = linalg::vector_norm(&w.view()).powi(2);
                let bw = b0.apply_to_vector(&w.view());
                let c4 = linalg::inner(&az.view(), &bw.view()).re;
                out.push((c2, c4));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut c2 = Vec::with_capacity(steps + 1);
    let mut c4 = Vec::with_capacity(steps + 1);
    let mut errors = SeriesErrors {
        c2: Vec::with_capacity(steps + 1),
        c4: Vec::with_capacity(steps + 1),
        c: Vec::with_capacity(steps + 1),
    };
    for t in 0..=steps {
        let m2: Moments = per_probe.iter().map(|p| p[t].0).collect();
        let m4: Moments = per_probe.iter().map(|p| p[t].1).collect();
        let mc: Moments = per_probe.iter().map(|p| p[t].0 - p[t].1).collect();
        c2.push(m2.mean());
        c4.push(m4.mean());
        errors.c2.push(m2.estimate().stderr);
        errors.c4.push(m4.estimate().stderr);
        errors.c.push(mc.estimate().stderr);
    }
    Ok(OtocSeries::from_parts(
        c2,
        c4,
        saturation_value(&a0.op, &b0.op),
        Some(errors),
        f.params,
        scenario_for(a0, b0),
    ))
}

fn window_bounds(series: &OtocSeries, window: (usize, usize)) -> Result<(usize, usize)> {
    let (t_min, t_max) = window;
    let fail = |reason: &str| Error::FitWindow {
        t_min,
        t_max,
        reason: reason.to_string(),
    };
    if t_max >= series.len() {
        return Err(fail("extends past the end of the series"));
    }
    if t_max < t_min + 2 {
        return Err(fail("needs at least three points"));
    }
    Ok((t_min, t_max))
}

fn fit_window(xs: &[f64], ys: &[f64], window: (usize, usize)) -> Result<FitResult> {
    let line = fit_line(xs, ys).ok_or_else(|| Error::FitWindow {
        t_min: window.0,
        t_max: window.1,
        reason: "degenerate regression".into(),
    })?;
    Ok(FitResult {
        slope: line.slope,
        intercept: line.intercept,
        slope_stderr: line.slope_stderr,
        r_squared: line.r_squared,
        window: [window.0, window.1],
    })
}

/// First kick at which `C(t)` rises measurably above zero.
pub fn first_growth_time(series: &OtocSeries) -> Option<usize> {
    series
        .c_norm
        .iter()
        .position(|&x| x > 1e3 * DENSE_NOISE_FLOOR)
}

/// Default Lyapunov window: from the first kick with `C > 0` through `ceil(t_EF)`,
/// widened to three points when the Ehrenfest time is short.
pub fn default_lyapunov_window(series: &OtocSeries) -> Result<(usize, usize)> {
    let t_ef = ehrenfest_time(series.params.n, series.params.k2)?;
    let start = first_growth_time(series).unwrap_or(1).max(1);
    let end = (t_ef.ceil() as usize).max(start + 2);
    Ok((start, end))
}

/// Slope of `ln C(t)`; estimates `2 lambda_L`.
pub fn fit_lyapunov_phase(series: &OtocSeries, window: Option<(usize, usize)>) -> Result<FitResult> {
    let window = match window {
        Some(w) => w,
        None => default_lyapunov_window(series)?,
    };
    let (t_min, t_max) = window_bounds(series, window)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in t_min..=t_max {
        let c = series.c[t];
        if !(c > 0.0) {
            return Err(Error::FitWindow {
                t_min,
                t_max,
                reason: format!("C({t}) = {c:e} is not positive"),
            });
        }
        xs.push(t as f64);
        ys.push(c.ln());
    }
    fit_window(&xs, &ys, window)
}

/// Noise floor of `1 - c_norm`: the saturation-level standard error, or the
/// dense round-off floor for exact series.
pub fn relaxation_noise_floor(series: &OtocSeries) -> f64 {
    match &series.errors {
        Some(_) => {
            let last = series.len() - 1;
            series.c_norm_stderr(last).max(DENSE_NOISE_FLOOR)
        }
        None => DENSE_NOISE_FLOOR,
    }
}

/// Default relaxation window: `ceil(t_EF) + 1` through the last kick whose
/// `1 - c_norm` clears ten times the noise floor.
pub fn default_relaxation_window(series: &OtocSeries) -> Result<(usize, usize)> {
    let start = match ehrenfest_time(series.params.n, series.params.k2) {
        Ok(t_ef) => t_ef.ceil() as usize + 1,
        Err(_) => 1,
    };
    let floor = 10.0 * relaxation_noise_floor(series);
    let end = (start..series.len())
        .take_while(|&t| 1.0 - series.c_norm[t] > floor)
        .last()
        .unwrap_or(start);
    Ok((start, end))
}

/// Slope of `ln(1 - C/C_inf)`; `-slope` estimates the relaxation rate.
pub fn fit_relaxation_phase(series: &OtocSeries, window: Option<(usize, usize)>) -> Result<FitResult> {
    let window = match window {
        Some(w) => w,
        None => default_relaxation_window(series)?,
    };
    let (t_min, t_max) = window_bounds(series, window)?;
    let floor = relaxation_noise_floor(series);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in t_min..=t_max {
        let gap = 1.0 - series.c_norm[t];
        if !(gap > floor) {
            return Err(Error::FitWindow {
                t_min,
                t_max,
                reason: format!("1 - C/C_inf = {gap:e} at t = {t} is at the noise floor"),
            });
        }
        xs.push(t as f64);
        ys.push(gap.ln());
    }
    fit_window(&xs, &ys, window)
}

/// Slope of `ln(1 - C/C_inf)` against `ln t`; `-1` signals a `1/t` approach.
pub fn fit_power_law_approach(series: &OtocSeries, window: (usize, usize)) -> Result<FitResult> {
    let (t_min, t_max) = window_bounds(series, window)?;
    if t_min == 0 {
        return Err(Error::FitWindow {
            t_min,
            t_max,
            reason: "log-log fit needs t >= 1".into(),
        });
    }
    let floor = relaxation_noise_floor(series);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in t_min..=t_max {
        let gap = 1.0 - series.c_norm[t];
        if !(gap > floor) {
            return Err(Error::FitWindow {
                t_min,
                t_max,
                reason: format!("1 - C/C_inf = {gap:e} at t = {t} is at the noise floor"),
            });
        }
        xs.push((t as f64).ln());
        ys.push(gap.ln());
    }
    fit_window(&xs, &ys, window)
}
