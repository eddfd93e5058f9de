//! Scenario dispatch.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ObservableKind, ScenarioKind};
use super::record::{CheckOutcome, GridRecord, Provenance, ResultRecord, CODE_VERSION, RNG_SCHEME};
use crate::classical::{classical_lyapunov, MapParams};
use crate::error::{Error, Result};
use crate::kicked_rotor::coupled_floquet;
use crate::operators::{cosine_observable, gue_observable, DenseBudget, LocalOperator, OperatorMatrix};
use crate::otoc::{
    ehrenfest_time, fit_lyapunov_phase, fit_power_law_approach, fit_relaxation_phase, mu_standard_map,
    otoc_series_dense, otoc_series_stochastic, same_subspace_series, FitResult, OtocSeries, Scenario,
};
use crate::phasespace::{
    evolve_product_state, fit_pr_relaxation, partial_trace_over_first, participation_ratio, pr_relaxation_window,
    purity, reduced_husimi, BipartiteState, CoherentFrame, PrPoint,
};
use crate::rmt::{epsilon_from_b, mu_rmt, rmt_otoc_mc, RmtEnsembleSpec};
use crate::seeding::{derived_seed, Purpose};

/// Runs one experiment inside a pool of `config.threads` workers.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let clock = Instant::now();
    let mut rec = pool.install(|| dispatch(config))?;
    rec.config = config.to_pairs().into_iter().collect();
    rec.provenance = Provenance {
        code_version: CODE_VERSION.into(),
        seed: config.seed,
        rng: RNG_SCHEME.into(),
        threads: pool.current_num_threads(),
        started_unix_ms: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    Ok(rec)
}

fn dispatch(c: &ExperimentConfig) -> Result<ResultRecord> {
    let mut rec = empty_record(c);
    add_references(c, &mut rec);
    match c.scenario {
        ScenarioKind::RotorOtoc | ScenarioKind::GueOtoc | ScenarioKind::WeakChaos => rotor(c, &mut rec)?,
        ScenarioKind::SameSubspace => same_subspace(c, &mut rec)?,
        ScenarioKind::RmtOtoc => rmt(c, &mut rec)?,
        ScenarioKind::RateScan => rate_scan(c, &mut rec)?,
        ScenarioKind::ClassicalLyapunov => classical(c, &mut rec)?,
        ScenarioKind::Husimi | ScenarioKind::PrSeries => phase_space(c, &mut rec)?,
    }
    Ok(rec)
}

fn empty_record(c: &ExperimentConfig) -> ResultRecord {
    ResultRecord {
        scenario: c.scenario.to_string(),
        config: BTreeMap::new(),
        columns: Vec::new(),
        rows: Vec::new(),
        fits: BTreeMap::new(),
        references: BTreeMap::new(),
        checks: Vec::new(),
        notes: Vec::new(),
        grids: Vec::new(),
        provenance: Provenance {
            code_version: CODE_VERSION.into(),
            seed: c.seed,
            rng: RNG_SCHEME.into(),
            threads: 0,
            started_unix_ms: 0,
            wall_clock_seconds: 0.0,
        },
    }
}

fn add_references(c: &ExperimentConfig, rec: &mut ResultRecord) {
    let refs = &mut rec.references;
    if c.scenario == ScenarioKind::RmtOtoc {
        if let Ok(mu) = mu_rmt(c.epsilon) {
            refs.insert("mu_rmt".into(), mu);
        }
        return;
    }
    if let Ok(mu) = mu_standard_map(c.n, c.b) {
        refs.insert("mu_standard_map".into(), mu);
    }
    if let Ok(eps) = epsilon_from_b(c.n, c.b) {
        refs.insert("epsilon_from_b".into(), eps);
        if let Ok(mu) = mu_rmt(eps) {
            refs.insert("mu_rmt".into(), mu);
        }
    }
    if let Ok(t) = ehrenfest_time(c.n, c.k2) {
        refs.insert("ehrenfest_time".into(), t);
    }
}

fn observable_pair(c: &ExperimentConfig) -> Result<(OperatorMatrix, OperatorMatrix)> {
    Ok(match c.observables {
        ObservableKind::Cosine => (cosine_observable(c.n, c.alpha)?, cosine_observable(c.n, c.alpha)?),
        ObservableKind::Gue => (
            gue_observable(c.n, derived_seed(c.seed, Purpose::GueObservable, 0))?,
            gue_observable(c.n, derived_seed(c.seed, Purpose::GueObservable, 1))?,
        ),
    })
}

fn series_table(s: &OtocSeries, rec: &mut ResultRecord) {
    rec.columns = ["t", "c2", "c4", "c", "c_norm"].map(String::from).to_vec();
    if s.errors.is_some() {
        rec.columns
            .extend(["c2_err", "c4_err", "c_err", "c_norm_err"].map(String::from));
    }
    rec.rows = (0..s.len())
        .map(|t| {
            let mut row = vec![t as f64, s.c2[t], s.c4[t], s.c[t], s.c_norm[t]];
            if let Some(e) = &s.errors {
                row.extend([e.c2[t], e.c4[t], e.c[t], s.c_norm_stderr(t)]);
            }
            row
        })
        .collect();
    rec.references.insert("c_infinity".into(), s.c_infinity);
}

fn record_fit(rec: &mut ResultRecord, name: &str, fit: Result<FitResult>) -> Option<FitResult> {
    match fit {
        Ok(f) => {
            rec.fits.insert(name.into(), f);
            Some(f)
        }
        Err(e) => {
            rec.notes.push(format!("{name} fit skipped: {e}"));
            None
        }
    }
}

fn rotor(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let f = coupled_floquet(&c.system_params())?;
    let (o1, o2) = observable_pair(c)?;
    let a0 = LocalOperator::left(o1);
    let b0 = LocalOperator::right(o2);
    let series = if c.probes == 0 {
        otoc_series_dense(&f, &a0, &b0, c.steps, &DenseBudget::default())?
    } else {
        otoc_series_stochastic(&f, &a0, &b0, c.steps, c.probes, c.seed)?
    };
    let series = series.with_scenario(match c.scenario {
        ScenarioKind::GueOtoc => Scenario::Gue,
        ScenarioKind::WeakChaos => Scenario::WeakChaos,
        _ => Scenario::Cross,
    });
    series_table(&series, rec);

    if c.scenario == ScenarioKind::WeakChaos {
        let window = c.power_window.unwrap_or((5, c.steps));
        if let Some(fit) = record_fit(rec, "power_law", fit_power_law_approach(&series, window)) {
            if let Some(tol) = c.check_tolerance {
                rec.checks.push(CheckOutcome::absolute("power_law_slope", fit.slope, -1.0, tol));
            }
        }
        return Ok(());
    }
    record_fit(rec, "lyapunov", fit_lyapunov_phase(&series, c.lyapunov_window));
    let relax = record_fit(rec, "relaxation", fit_relaxation_phase(&series, c.relaxation_window));
    if let (Some(fit), Some(tol), Some(&mu)) = (relax, c.check_tolerance, rec.references.get("mu_standard_map")) {
        rec.checks.push(CheckOutcome::relative("relaxation_rate", -fit.slope, mu, tol));
    }
    Ok(())
}

fn same_subspace(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let f = coupled_floquet(&c.system_params())?;
    let o = cosine_observable(c.n, c.alpha)?;
    let series = same_subspace_series(&f, &o, &o, c.steps, &DenseBudget::default())?;
    series_table(&series, rec);
    record_fit(rec, "lyapunov", fit_lyapunov_phase(&series, c.lyapunov_window));
    if let Ok(t_ef) = ehrenfest_time(c.n, c.k2) {
        let start = t_ef.ceil() as usize + 1;
        if start <= c.steps {
            rec.references
                .insert("post_ehrenfest_mean_c_norm".into(), series.mean_c_norm(start, c.steps));
        }
    }
    Ok(())
}

fn rmt(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let spec = RmtEnsembleSpec {
        n: c.n,
        epsilon: c.epsilon,
        steps: c.steps,
        samples: c.samples,
        rng_seed: c.seed,
    };
    let (o1, o2) = observable_pair(c)?;
    let diagonal = o1.is_diagonal() && o2.is_diagonal();
    let (tr1, tr2) = (o1.trace_of_square(), o2.trace_of_square());
    let series = rmt_otoc_mc(&spec, &o1, &o2, &DenseBudget::default())?;
    series_table(&series, rec);
    rec.columns.push("c_norm_analytic".into());
    for (t, row) in rec.rows.iter_mut().enumerate() {
        let analytic = if diagonal && t == 0 {
            0.0
        } else {
            crate::rmt::analytic_otoc(c.epsilon, t, tr1, tr2, diagonal)? / series.c_infinity
        };
        row.push(analytic);
    }
    let relax = record_fit(rec, "relaxation", fit_relaxation_phase(&series, c.relaxation_window));
    if let (Some(fit), Some(tol), Ok(mu)) = (relax, c.check_tolerance, mu_rmt(c.epsilon)) {
        rec.checks.push(CheckOutcome::relative("relaxation_rate", -fit.slope, mu, tol));
    }
    Ok(())
}

/// One point of a rate scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub nb: f64,
    pub b: f64,
    pub epsilon: f64,
    pub mu_fit: f64,
    pub mu_fit_err: f64,
    pub mu_analytic: f64,
    pub mu_rmt: f64,
}

fn rate_scan(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let (o1, o2) = observable_pair(c)?;
    let points: Vec<RatePoint> = c
        .nb_values
        .par_iter()
        .map(|&nb| -> Result<RatePoint> {
            let mut cfg = c.clone();
            cfg.b = nb / c.n as f64;
            let f = coupled_floquet(&cfg.system_params())?;
            let a0 = LocalOperator::left(o1.clone());
            let b0 = LocalOperator::right(o2.clone());
            let series = if c.probes == 0 {
                otoc_series_dense(&f, &a0, &b0, c.steps, &DenseBudget::default())?
            } else {
                otoc_series_stochastic(&f, &a0, &b0, c.steps, c.probes, c.seed)?
            };
            let fit = fit_relaxation_phase(&series, c.relaxation_window)?;
            let epsilon = epsilon_from_b(c.n, cfg.b)?;
            Ok(RatePoint {
                nb,
                b: cfg.b,
                epsilon,
                mu_fit: -fit.slope,
                mu_fit_err: fit.slope_stderr,
                mu_analytic: mu_standard_map(c.n, cfg.b).unwrap_or(f64::NAN),
                mu_rmt: mu_rmt(epsilon).unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<_>>()?;
    rec.columns = ["b", "nb", "epsilon", "mu_fit", "mu_fit_err", "mu_analytic", "mu_rmt"]
        .map(String::from)
        .to_vec();
    rec.rows = points
        .iter()
        .map(|p| vec![p.b, p.nb, p.epsilon, p.mu_fit, p.mu_fit_err, p.mu_analytic, p.mu_rmt])
        .collect();
    if let Some(tol) = c.check_tolerance {
        // the Bessel rate is only expected to hold below Nb = pi
        for p in points.iter().filter(|p| p.nb <= std::f64::consts::PI) {
            rec.checks
                .push(CheckOutcome::relative(format!("mu_fit[nb={}]", p.nb), p.mu_fit, p.mu_analytic, tol));
        }
    }
    Ok(())
}

fn classical(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let p = MapParams::new(c.k1, c.k2, c.b)?;
    let window = c.lyapunov_window.unwrap_or(crate::classical::DEFAULT_LYAPUNOV_WINDOW);
    if window.1 > c.steps {
        return Err(crate::error::invalid("lyapunov_window", format!("{window:?} exceeds steps = {}", c.steps)));
    }
    let (fit, ens) = classical_lyapunov(&p, c.ensemble, window, c.seed)?;
    rec.columns = ["t", "mean_log_c", "mean_log_c_err"].map(String::from).to_vec();
    rec.rows = ens
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| vec![t as f64, ens.mean_log_c[i], ens.stderr_log_c[i]])
        .collect();
    rec.fits.insert("lyapunov".into(), fit);
    rec.references.insert("excluded".into(), ens.excluded as f64);
    Ok(())
}

fn phase_space(c: &ExperimentConfig, rec: &mut ResultRecord) -> Result<()> {
    let f = coupled_floquet(&c.system_params())?;
    let frame = CoherentFrame::new(c.n, c.alpha)?;
    let states = evolve_product_state(&f, &frame, c.q0, c.p0, c.steps)?;
    rec.columns = ["t", "pr", "purity", "one_minus_pr"].map(String::from).to_vec();
    let mut points = Vec::with_capacity(states.len());
    for (t, psi) in states.iter().enumerate() {
        let rho = partial_trace_over_first(BipartiteState::Pure(psi.view()), c.n)?;
        let grid = reduced_husimi(&rho.view(), &frame)?;
        let point = PrPoint {
            t,
            pr: participation_ratio(&grid),
            purity: purity(&rho.view()),
        };
        rec.rows.push(vec![t as f64, point.pr, point.purity, 1.0 - point.pr]);
        points.push(point);
        if c.scenario == ScenarioKind::Husimi && c.husimi_times.contains(&t) {
            rec.grids.push(GridRecord {
                t,
                raw_sum: grid.raw_sum,
                values: grid.values.outer_iter().map(|r| r.to_vec()).collect(),
            });
        }
    }
    let start = ehrenfest_time(c.n, c.k2).map_or(1, |t| t.ceil() as usize + 1);
    let window = c
        .relaxation_window
        .unwrap_or_else(|| pr_relaxation_window(&points, start.min(c.steps)));
    record_fit(rec, "pr_relaxation", fit_pr_relaxation(&points, window));
    Ok(())
}
