//! Torus coherent states built from the Harper ground state, reduced Husimi
//! functions and the phase-space participation ratio.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kicked_rotor::{CoupledFloquet, Direction};
use crate::linalg::{self, C64, ZERO};
use crate::otoc::FitResult;
use crate::stats::fit_line;
use crate::operators::{check_alpha, check_dimension, translation_p, translation_q};

/// Smallest accepted gap above the Harper ground energy.
const MIN_GAP: f64 = 1e-9;

/// Ground state of `H = 2 - (T_q + T_q^dagger + T_p + T_p^dagger) / 2`, with
/// the global phase fixed so the largest component is real and positive.
pub fn harper_ground_state(n: usize, alpha: f64) -> Result<(Array1<C64>, f64)> {
    let h = harper_hamiltonian(n, alpha)?;
    let (energies, vectors) = h.eigh(UPLO::Lower)?;
    let gap = energies[1] - energies[0];
    if gap < MIN_GAP {
        return Err(Error::DegenerateGroundState { gap });
    }
    let mut ground = vectors.column(0).to_owned();
    let peak = ground
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(ZERO);
    let phase = peak.conj() / peak.norm();
    ground.mapv_inplace(|x| x * phase);
    Ok((ground, energies[0]))
}

pub fn harper_hamiltonian(n: usize, alpha: f64) -> Result<Array2<C64>> {
    check_dimension(n)?;
    check_alpha(alpha)?;
    let tq = translation_q(n)?;
    let tp = translation_p(n, alpha)?;
    let hop = tq.entries() + &linalg::dagger(&tq.view()) + tp.entries() + &linalg::dagger(&tp.view());
    Ok(linalg::identity(n) * C64::new(2.0, 0.0) - hop * C64::new(0.5, 0.0))
}

/// `T_p^m T_q^n |ground>`.
pub fn translate(ground: &ArrayView1<C64>, n: usize, m: usize, alpha: f64) -> Array1<C64> {
    let dim = ground.len();
    Array1::from_shape_fn(dim, |k| {
        let src = (k + dim - n % dim) % dim;
        let phase = TAU * (m as f64) * (k as f64 + alpha) / dim as f64;
        ground[src] * C64::from_polar(1.0, phase)
    })
}

/// The `N x N` lattice of translated Harper states, row `n * N + m` holding
/// the state centred at position index `n` and momentum index `m`.
#[derive(Debug, Clone)]
pub struct CoherentFrame {
    n: usize,
    alpha: f64,
    ground_energy: f64,
    states: Array2<C64>,
}

impl CoherentFrame {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let (ground, ground_energy) = harper_ground_state(n, alpha)?;
        let mut states = Array2::zeros((n * n, n));
        for q in 0..n {
            for p in 0..n {
                states
                    .row_mut(q * n + p)
                    .assign(&translate(&ground.view(), q, p, alpha));
            }
        }
        Ok(Self {
            n,
            alpha,
            ground_energy,
            states,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn states(&self) -> &Array2<C64> {
        &self.states
    }

    /// `|n, m>` for position index `n` and momentum index `m`.
    pub fn coherent_state(&self, n: usize, m: usize) -> Result<Array1<C64>> {
        if n >= self.n || m >= self.n {
            return Err(invalid("grid index", format!("({n}, {m}) outside 0..{}", self.n)));
        }
        Ok(self.states.row(n * self.n + m).to_owned())
    }

    /// `max |(1/N) sum |n,m><n,m| - I|`.
    pub fn resolution_defect(&self) -> f64 {
        let gram = self.states.t().dot(&self.states.mapv(|x| x.conj()));
        let scaled = gram.mapv(|x| x / self.n as f64);
        linalg::max_abs_diff(&scaled.view(), &linalg::identity(self.n).view())
    }
}

/// Nearest lattice indices to the point `(q0, p0)` of the unit torus.
pub fn grid_indices(n: usize, q0: f64, p0: f64) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&q0) || !(0.0..=1.0).contains(&p0) {
        return Err(invalid("(q0, p0)", format!("({q0}, {p0}) must lie in the unit square")));
    }
    let idx = |x: f64| ((x * n as f64).round() as usize) % n;
    Ok((idx(q0), idx(p0)))
}

/// `|psi(t)> = U^t (|q0,p0> (x) |q0,p0>)` for `t = 0..=steps`.
pub fn evolve_product_state(
    f: &CoupledFloquet,
    frame: &CoherentFrame,
    q0: f64,
    p0: f64,
    steps: usize,
) -> Result<Vec<Array1<C64>>> {
    let n = f.n();
    if frame.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: frame.n(),
        });
    }
    let (qi, pi) = grid_indices(n, q0, p0)?;
    let local = frame.coherent_state(qi, pi)?;
    let mut psi = Array1::from_shape_fn(n * n, |k| local[k / n] * local[k % n]);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(psi.clone());
    for _ in 0..steps {
        psi = f.apply(&psi.view(), Direction::Forward)?;
        out.push(psi.clone());
    }
    Ok(out)
}

pub enum BipartiteState<'a> {
    Pure(ArrayView1<'a, C64>),
    Density(ArrayView2<'a, C64>),
}

/// `rho_B = Tr_1 rho` on subsystem 2.
pub fn partial_trace_over_first(state: BipartiteState<'_>, n: usize) -> Result<Array2<C64>> {
    match state {
        BipartiteState::Pure(psi) => {
            if psi.len() != n * n {
                return Err(Error::DimensionMismatch {
                    expected: n * n,
                    actual: psi.len(),
                });
            }
            let m = psi.to_owned().into_shape_with_order((n, n)).expect("contiguous");
            Ok(m.t().dot(&m.mapv(|x| x.conj())))
        }
        BipartiteState::Density(rho) => {
            if rho.dim() != (n * n, n * n) {
                return Err(Error::DimensionMismatch {
                    expected: n * n,
                    actual: rho.nrows(),
                });
            }
            let mut out = Array2::zeros((n, n));
            for n1 in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        out[[a, b]] += rho[[n1 * n + a, n1 * n + b]];
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn purity(rho: &ArrayView2<C64>) -> f64 {
    linalg::trace_of_square(rho).re
}

/// Husimi values on the lattice, indexed `[p, q]` and normalized to sum `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub n: usize,
    pub values: Array2<f64>,
    /// Sum of the raw coherent-state expectations before renormalization.
    pub raw_sum: f64,
}

impl HusimiGrid {
    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    pub fn l1_distance(&self, other: &HusimiGrid) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Grid argmax as `(q index, p index)`.
    pub fn peak(&self) -> (usize, usize) {
        let ((p, q), _) = self
            .values
            .indexed_iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty grid");
        (q, p)
    }
}

/// `Q_{q,p} = <q,p| rho_B |q,p>`.
pub fn reduced_husimi(rho_b: &ArrayView2<C64>, frame: &CoherentFrame) -> Result<HusimiGrid> {
    let n = frame.n();
    if rho_b.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rho_b.nrows(),
        });
    }
    let states = frame.states();
    let projected = states.mapv(|x| x.conj()).dot(rho_b);
    let mut values = Array2::zeros((n, n));
    let mut raw_sum = 0.0;
    for q in 0..n {
        for p in 0..n {
            let k = q * n + p;
            let v: C64 = projected
                .row(k)
                .iter()
                .zip(states.row(k).iter())
                .map(|(a, b)| a * b)
                .sum();
            raw_sum += v.re;
            values[[p, q]] = if v.re < 0.0 { 0.0 } else { v.re };
        }
    }
    let total: f64 = values.sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("Husimi function vanishes everywhere".into()));
    }
    values.mapv_inplace(|v| v * n as f64 / total);
    Ok(HusimiGrid { n, values, raw_sum })
}

/// `1 / sum Q^2`; equals 1 for a flat grid under the sum-`N` normalization.
pub fn participation_ratio(grid: &HusimiGrid) -> f64 {
    1.0 / grid.values.iter().map(|v| v * v).sum::<f64>()
}

/// One point of a participation-ratio run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub t: usize,
    pub pr: f64,
    pub purity: f64,
}

pub fn pr_series(
    f: &CoupledFloquet,
    frame: &CoherentFrame,
    q0: f64,
    p0: f64,
    steps: usize,
) -> Result<Vec<PrPoint>> {
    let n = f.n();
    evolve_product_state(f, frame, q0, p0, steps)?
        .iter()
        .enumerate()
        .map(|(t, psi)| {
            let rho = partial_trace_over_first(BipartiteState::Pure(psi.view()), n)?;
            let grid = reduced_husimi(&rho.view(), frame)?;
            Ok(PrPoint {
                t,
                pr: participation_ratio(&grid),
                purity: purity(&rho.view()),
            })
        })
        .collect()
}

/// Default window for the `ln(1 - PR)` fit: from `start` up to the last kick
/// before `1 - PR` first drops below twice its late-time plateau, estimated
/// as the median over the final quarter of the run.
pub fn pr_relaxation_window(points: &[PrPoint], start: usize) -> (usize, usize) {
    let last = points.len().saturating_sub(1);
    let mut tail: Vec<f64> = points[points.len() - points.len().div_ceil(4)..]
        .iter()
        .map(|p| 1.0 - p.pr)
        .collect();
    tail.sort_by(f64::total_cmp);
    let plateau = tail[tail.len() / 2].max(0.0);
    let end = points
        .iter()
        .skip(start)
        .position(|p| 1.0 - p.pr < 2.0 * plateau)
        .map_or(last, |i| (start + i).saturating_sub(1));
    (start, end.max(start))
}

/// Least-squares line through `ln(1 - PR(t))` over an inclusive window.
pub fn fit_pr_relaxation(points: &[PrPoint], window: (usize, usize)) -> Result<FitResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| (window.0..=window.1).contains(&p.t))
        .map(|p| (p.t as f64, (1.0 - p.pr).ln()))
        .unzip();
    let fit_err = |reason: String| Error::FitWindow {
        t_min: window.0,
        t_max: window.1,
        reason,
    };
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(fit_err(format!("ln(1 - PR) = {y} in window")));
    }
    let line = fit_line(&xs, &ys).ok_or_else(|| fit_err("needs at least three points".into()))?;
    Ok(FitResult {
        slope: line.slope,
        intercept: line.intercept,
        slope_stderr: line.slope_stderr,
        r_squared: line.r_squared,
        window: [window.0, window.1],
    })
}

/// Haar-random pure state of dimension `n`.
pub fn random_pure_state(n: usize, rng: &mut impl Rng) -> Array1<C64> {
    let v = Array1::from_shape_fn(n, |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let norm = linalg::vector_norm(&v.view());
    v / C64::new(norm, 0.0)
}

pub fn projector(psi: &ArrayView1<C64>) -> Array2<C64> {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(a, b)| psi[a] * psi[b].conj())
}
