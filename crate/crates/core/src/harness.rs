//! Experiment driver: single quenches, `Δ_F` sweeps with peak detection,
//! convergence checks, backend cross-checks and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::correlations::BondCorrelators;
use crate::error::{Error, Result};
use crate::exact::{self, DensityMatrix, SpectralPropagator, StateVector, TwoSiteReduce, EXACT_LIMIT, THERMAL_LIMIT};
use crate::linalg::TruncationPolicy;
use crate::model::{trotter_gates, whole_steps, ChainParams, GateKind, QuenchSpec};
use crate::mps::{ground_state_mps, MpsState};
use crate::record::{RecordLabel, Snapshot, TimeSeriesRecord};
use crate::scalar::Real;
use crate::thermal::{self, AncillaEvolution, PurifiedState, ThermalQuench};

/// Default tolerance on the ground-state energy rate used by the MPS backend.
/// The energy error left behind is about `N tol / (2 gap)`, so the state
/// itself is only accurate to its square root; 1e-12 keeps observables within
/// a few 1e-6 of the exact ground state.
pub const DEFAULT_GROUND_STATE_TOL: f64 = 1e-12;

/// Default tolerance for flagging non-convergence between the two largest
/// bond dimensions.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact,
    Mps,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "mps" => Ok(Backend::Mps),
            other => Err(Error::param(format!("unknown backend '{other}' (expected exact or mps)"))),
        }
    }
}

/// Everything needed to reproduce one quench.
#[derive(Clone, Debug)]
pub struct RunConfig<R: Real> {
    /// Chain length and coupling; the anisotropy is taken from `quench`.
    pub chain: ChainParams<R>,
    pub quench: QuenchSpec<R>,
    pub truncation: TruncationPolicy<R>,
    pub backend: Backend,
    pub report_interval: R,
    pub output_path: Option<PathBuf>,
    /// Reserved; every algorithm here is deterministic.
    pub seed: u64,
    /// Abort when the accumulated discarded weight exceeds this.
    pub weight_cap: Option<R>,
    pub ground_state_tol: R,
    pub ancilla: AncillaEvolution,
}

impl<R: Real> RunConfig<R> {
    /// Configuration with the reporting interval equal to `dt`, no weight cap
    /// at zero temperature and a cap of `1e-6` otherwise.
    pub fn new(chain: ChainParams<R>, quench: QuenchSpec<R>, truncation: TruncationPolicy<R>, backend: Backend) -> Self {
        Self {
            chain,
            report_interval: quench.dt,
            weight_cap: quench.is_thermal().then(|| R::lit(thermal::DEFAULT_WEIGHT_CAP)),
            quench,
            truncation,
            backend,
            output_path: None,
            seed: 0,
            ground_state_tol: R::lit(DEFAULT_GROUND_STATE_TOL).max(R::eps() * R::lit(1e3)),
            ancilla: AncillaEvolution::BackEvolve,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.quench.validate()?;
        let n = self.chain.n_sites;
        if self.backend == Backend::Exact {
            let limit = if self.quench.is_thermal() { THERMAL_LIMIT } else { EXACT_LIMIT };
            if n > limit {
                return Err(Error::Size { n_sites: n, limit });
            }
        }
        if !(self.report_interval > R::zero()) {
            return Err(Error::param("report interval must be positive"));
        }
        if whole_steps(self.report_interval, self.quench.dt).is_none() {
            return Err(Error::param(format!(
                "report interval {} is not an integer multiple of dt = {}",
                self.report_interval, self.quench.dt
            )));
        }
        if let Some(beta) = self.quench.beta() {
            if self.backend == Backend::Mps && whole_steps(beta, self.quench.d_beta).is_none() {
                return Err(Error::param(format!(
                    "beta = {beta} is not an integer multiple of d_beta = {}",
                    self.quench.d_beta
                )));
            }
        }
        if !(self.ground_state_tol > R::zero()) {
            return Err(Error::param("ground-state tolerance must be positive"));
        }
        Ok(())
    }

    fn label(&self) -> RecordLabel<R> {
        RecordLabel {
            delta_i: self.quench.delta_initial,
            delta_f: self.quench.delta_final,
            temperature: self.quench.temperature,
        }
    }

    fn params_initial(&self) -> ChainParams<R> {
        self.chain.with_anisotropy(self.quench.delta_initial)
    }

    fn params_final(&self) -> ChainParams<R> {
        self.chain.with_anisotropy(self.quench.delta_final)
    }

    fn report_steps(&self) -> usize {
        whole_steps(self.report_interval, self.quench.dt).unwrap_or(1).max(1)
    }
}

/// A failed run together with the records produced before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{source} (after {} records)", partial.len())]
pub struct RunError<R: Real> {
    pub source: Error,
    pub partial: Vec<TimeSeriesRecord<R>>,
}

impl<R: Real> From<Error> for RunError<R> {
    fn from(source: Error) -> Self {
        Self {
            source,
            partial: Vec::new(),
        }
    }
}

/// Pre-quench state, reusable across runs that share `Δ_I` and temperature.
#[derive(Clone, Debug)]
pub enum InitialState<R: Real> {
    Pure(StateVector<R>),
    Mixed(DensityMatrix<R>),
    Mps(MpsState<R>),
    Purified(PurifiedState<R>),
}

/// Ground state of `Δ_I` at zero temperature, the Gibbs state otherwise.
pub fn prepare_initial<R: Real>(config: &RunConfig<R>) -> Result<InitialState<R>> {
    config.validate()?;
    let params = config.params_initial();
    Ok(match (config.backend, config.quench.beta()) {
        (Backend::Exact, None) => InitialState::Pure(exact::ground_state(&params)?.state),
        (Backend::Exact, Some(beta)) => InitialState::Mixed(exact::thermal_density(&params, beta)?),
        (Backend::Mps, None) => {
            InitialState::Mps(ground_state_mps(&params, &config.truncation, config.ground_state_tol)?)
        }
        (Backend::Mps, Some(beta)) => {
            let start = thermal::init_infinite_temperature(params.n_sites)?;
            InitialState::Purified(thermal::cool(&start, &params, beta, config.quench.d_beta, &config.truncation)?)
        }
    })
}

/// Prepares the initial state and evolves it, recording center-bond
/// observables at `t = 0` and every report interval.
pub fn run_quench<R: Real>(config: &RunConfig<R>) -> std::result::Result<Vec<TimeSeriesRecord<R>>, RunError<R>> {
    let initial = prepare_initial(config)?;
    run_from(config, &initial)
}

/// Evolves a prepared initial state under `config`.
pub fn run_from<R: Real>(
    config: &RunConfig<R>,
    initial: &InitialState<R>,
) -> std::result::Result<Vec<TimeSeriesRecord<R>>, RunError<R>> {
    config.validate()?;
    let mut records = Vec::new();
    let outcome = match initial {
        InitialState::Pure(psi) => evolve_exact(config, ExactState::Pure(psi), &mut records),
        InitialState::Mixed(rho) => evolve_exact(config, ExactState::Mixed(rho), &mut records),
        InitialState::Mps(mps) => evolve_mps(config, mps, &mut records),
        InitialState::Purified(state) => {
            let schedule = ThermalQuench {
                t_max: config.quench.t_max,
                dt: config.quench.dt,
                report_every: config.report_steps(),
                weight_cap: config.weight_cap.unwrap_or_else(|| R::max_value().unwrap()),
                ancilla: config.ancilla,
            };
            thermal::quench_evolve_thermal(
                state,
                &config.params_final(),
                &schedule,
                &config.label(),
                &config.truncation,
                &mut |r| records.push(r),
            )
            .map(|_| ())
        }
    };
    match outcome {
        Ok(()) => Ok(records),
        Err(source) => Err(RunError {
            source,
            partial: records,
        }),
    }
}

/// Report steps `0, k, 2k, …` plus the final step.
fn report_schedule(n_steps: usize, every: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..=n_steps).step_by(every).collect();
    if *steps.last().unwrap() != n_steps {
        steps.push(n_steps);
    }
    steps
}

enum ExactState<'a, R: Real> {
    Pure(&'a StateVector<R>),
    Mixed(&'a DensityMatrix<R>),
}

fn evolve_exact<R: Real>(config: &RunConfig<R>, initial: ExactState<'_, R>, out: &mut Vec<TimeSeriesRecord<R>>) -> Result<()> {
    let params = config.params_final();
    let label = config.label();
    let b = params.center_bond();
    let mut prop = SpectralPropagator::new(&params)?;
    for step in report_schedule(config.quench.n_steps(), config.report_steps()) {
        let t = config.quench.dt * R::lit(step as f64);
        let snap = match initial {
            ExactState::Pure(psi) => {
                let s = prop.evolve_state(psi, t)?;
                let rho = s.reduce_two_site(b, b + 1)?;
                Snapshot {
                    t,
                    correlators: BondCorrelators::from_density(&rho)?,
                    rho,
                    energy: s.energy(&params),
                    entropy_center: s.half_chain_entropy(),
                    discarded_weight_total: R::zero(),
                }
            }
            ExactState::Mixed(rho0) => {
                let s = prop.evolve_density(rho0, t)?;
                let rho = s.reduce_two_site(b, b + 1)?;
                Snapshot {
                    t,
                    correlators: BondCorrelators::from_density(&rho)?,
                    rho,
                    energy: s.energy(&params),
                    entropy_center: s.half_chain_entropy(),
                    discarded_weight_total: R::zero(),
                }
            }
        };
        out.push(TimeSeriesRecord::measure(&label, snap)?);
    }
    Ok(())
}

fn mps_record<R: Real>(mps: &MpsState<R>, params: &ChainParams<R>, label: &RecordLabel<R>, t: R) -> Result<TimeSeriesRecord<R>> {
    let b = params.center_bond();
    let rho = mps.two_site_rdm(b)?;
    let rho = crate::correlations::TwoQubitDensity(rho.fixed_view::<4, 4>(0, 0).into_owned());
    TimeSeriesRecord::measure(
        label,
        Snapshot {
            t,
            correlators: BondCorrelators::from_density_tol(&rho, R::lit(1e-9))?,
            rho,
            energy: mps.energy(params)?,
            entropy_center: mps.entanglement_entropy(b)?,
            discarded_weight_total: mps.discarded_weight_total(),
        },
    )
}

fn evolve_mps<R: Real>(config: &RunConfig<R>, initial: &MpsState<R>, out: &mut Vec<TimeSeriesRecord<R>>) -> Result<()> {
    let params = config.params_final();
    let label = config.label();
    let gates = trotter_gates(&params, config.quench.dt, GateKind::RealTime)?;
    let mut mps = initial.clone();
    let mut done = 0;
    for step in report_schedule(config.quench.n_steps(), config.report_steps()) {
        mps.tebd_steps(&gates, step - done, &config.truncation)?;
        done = step;
        let t = config.quench.dt * R::lit(step as f64);
        if let Some(cap) = config.weight_cap.filter(|_| step > 0) {
            let total = mps.discarded_weight_total();
            if total > cap {
                return Err(Error::TruncationBudget {
                    total: total.as_f64(),
                    cap: cap.as_f64(),
                    t: t.as_f64(),
                });
            }
        }
        out.push(mps_record(&mps, &params, &label, t)?);
    }
    Ok(())
}

/// Location and height of a maximum over the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak<R> {
    /// Vertex of the parabola through the grid maximum and its neighbors,
    /// or the grid point itself at the edge of the grid.
    pub delta_f: R,
    pub value: R,
    pub grid_delta_f: R,
    pub grid_value: R,
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint<R> {
    pub delta_final: R,
    pub record: Option<TimeSeriesRecord<R>>,
    pub error: Option<String>,
}

/// Grid point where the discrete second difference of the discord exceeds
/// three times the median over the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeChange<R> {
    pub delta_final: R,
    pub second_difference: R,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<R> {
    /// Sorted ascending in `delta_final`.
    pub points: Vec<SweepPoint<R>>,
    pub t_star: R,
    pub peak_entanglement: Option<Peak<R>>,
    pub peak_discord: Option<Peak<R>>,
    pub slope_changes: Vec<SlopeChange<R>>,
}

/// Runs one quench per `Δ_F` in `delta_grid` and samples every run at exactly
/// `t_star`. Failed points are recorded and skipped by the peak search.
pub fn run_sweep<R: Real>(base: &RunConfig<R>, delta_grid: &[R], t_star: R) -> Result<SweepResult<R>> {
    base.validate()?;
    if delta_grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    if let Some(x) = delta_grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::param(format!("grid value {x} is not finite")));
    }
    if !(t_star > R::zero()) || t_star > base.quench.t_max * (R::one() + R::lit(1e-12)) {
        return Err(Error::param(format!(
            "t_star = {t_star} must lie in (0, t_max = {}]",
            base.quench.t_max
        )));
    }
    if whole_steps(t_star, base.quench.dt).is_none() {
        return Err(Error::param(format!(
            "t_star = {t_star} is not an integer multiple of dt = {}",
            base.quench.dt
        )));
    }
    let mut grid = delta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut point_config = base.clone();
    point_config.quench.t_max = t_star;
    point_config.report_interval = t_star;
    let initial = prepare_initial(&point_config)?;

    let points: Vec<SweepPoint<R>> = grid
        .par_iter()
        .map(|&delta_final| {
            let mut config = point_config.clone();
            config.quench.delta_final = delta_final;
            match run_from(&config, &initial) {
                Ok(records) => SweepPoint {
                    delta_final,
                    record: records.last().copied(),
                    error: None,
                },
                Err(e) => SweepPoint {
                    delta_final,
                    record: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let peak_entanglement = find_peak(&points, |r| r.concurrence);
    let peak_discord = find_peak(&points, |r| r.discord);
    let slope_changes = slope_changes(&points);
    Ok(SweepResult {
        points,
        t_star,
        peak_entanglement,
        peak_discord,
        slope_changes,
    })
}

fn find_peak<R: Real>(points: &[SweepPoint<R>], f: impl Fn(&TimeSeriesRecord<R>) -> R) -> Option<Peak<R>> {
    let values: Vec<Option<R>> = points.iter().map(|p| p.record.as_ref().map(&f)).collect();
    let (i, y1) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best: Option<(usize, R)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })?;
    let x1 = points[i].delta_final;
    let grid_only = Peak {
        delta_f: x1,
        value: y1,
        grid_delta_f: x1,
        grid_value: y1,
    };
    if i == 0 || i + 1 == points.len() {
        return Some(grid_only);
    }
    let (Some(y0), Some(y2)) = (values[i - 1], values[i + 1]) else {
        return Some(grid_only);
    };
    let (x0, x2) = (points[i - 1].delta_final, points[i + 1].delta_final);
    Some(match parabola_vertex([x0, x1, x2], [y0, y1, y2]) {
        Some((x, y)) => Peak {
            delta_f: x,
            value: y,
            grid_delta_f: x1,
            grid_value: y1,
        },
        None => grid_only,
    })
}

/// Vertex of the parabola through three points when it opens downward.
pub fn parabola_vertex<R: Real>(x: [R; 3], y: [R; 3]) -> Option<(R, R)> {
    let (d0, d2) = (x[1] - x[0], x[1] - x[2]);
    let num = d0 * d0 * (y[1] - y[2]) - d2 * d2 * (y[1] - y[0]);
    let den = d0 * (y[1] - y[2]) - d2 * (y[1] - y[0]);
    // Leading coefficient of the interpolating quadratic.
    let a = ((y[2] - y[1]) / (x[2] - x[1]) - (y[1] - y[0]) / (x[1] - x[0])) / (x[2] - x[0]);
    if !(a < R::zero()) || den == R::zero() {
        return None;
    }
    let xv = x[1] - R::lit(0.5) * num / den;
    // Lagrange form evaluated at the vertex.
    let l = |j: usize| {
        let mut v = y[j];
        for k in 0..3 {
            if k != j {
                v *= (xv - x[k]) / (x[j] - x[k]);
            }
        }
        v
    };
    Some((xv, l(0) + l(1) + l(2)))
}

fn slope_changes<R: Real>(points: &[SweepPoint<R>]) -> Vec<SlopeChange<R>> {
    let mut d2 = Vec::new();
    for w in points.windows(3) {
        if let (Some(a), Some(b), Some(c)) = (&w[0].record, &w[1].record, &w[2].record) {
            d2.push((w[1].delta_final, a.discord - R::lit(2.0) * b.discord + c.discord));
        }
    }
    if d2.is_empty() {
        return Vec::new();
    }
    let mut mags: Vec<R> = d2.iter().map(|(_, v)| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = mags.len() / 2;
    let median = if mags.len() % 2 == 1 {
        mags[mid]
    } else {
        (mags[mid - 1] + mags[mid]) * R::lit(0.5)
    };
    d2.into_iter()
        .filter(|(_, v)| v.abs() > R::lit(3.0) * median)
        .map(|(delta_final, second_difference)| SlopeChange {
            delta_final,
            second_difference,
        })
        .collect()
}

/// Largest absolute difference per observable between two series, matched
/// on report times.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesDeviation<R> {
    pub per_observable: Vec<(&'static str, R)>,
    pub max: R,
    pub compared_times: usize,
}

/// Compares the observables of `a` and `b` at common times. `entropy` selects
/// whether `entropy_center` takes part (it has different meanings for the
/// exact and purified backends at finite temperature).
pub fn compare_series<R: Real>(a: &[TimeSeriesRecord<R>], b: &[TimeSeriesRecord<R>], entropy: bool) -> SeriesDeviation<R> {
    let mut per: Vec<(&'static str, R)> = a
        .first()
        .map(|r| r.observables().iter().map(|(n, _)| (*n, R::zero())).collect())
        .unwrap_or_default();
    if !entropy {
        per.retain(|(n, _)| *n != "entropy_center");
    }
    let mut compared = 0;
    for ra in a {
        let Some(rb) = b.iter().find(|rb| (rb.t - ra.t).abs() <= R::lit(1e-9) * (R::one() + ra.t.abs())) else {
            continue;
        };
        compared += 1;
        for ((name, x), (_, y)) in ra.observables().iter().zip(rb.observables().iter()) {
            if let Some(slot) = per.iter_mut().find(|(n, _)| n == name) {
                slot.1 = slot.1.max((*x - *y).abs());
            }
        }
    }
    let max = per.iter().fold(R::zero(), |m, (_, v)| m.max(*v));
    SeriesDeviation {
        per_observable: per,
        max,
        compared_times: compared,
    }
}

/// One bond-dimension run of a convergence check.
#[derive(Clone, Debug, PartialEq)]
pub struct BondRun<R> {
    pub max_bond: usize,
    pub final_discarded_weight: R,
    /// Against the next smaller bond dimension.
    pub deviation_from_previous: Option<R>,
    pub error: Option<String>,
}

/// One time-step run of a convergence check.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRun<R> {
    pub dt: R,
    /// Against the next larger `dt`.
    pub deviation_from_previous: Option<R>,
    /// Against the exact backend when the chain is small enough.
    pub deviation_from_exact: Option<R>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<R> {
    pub bond_runs: Vec<BondRun<R>>,
    pub step_runs: Vec<StepRun<R>>,
    pub tolerance: R,
    /// `false` when the two largest bond dimensions differ by more than
    /// `tolerance` (or either failed).
    pub converged: bool,
}

/// Repeats `config` with the MPS backend over `m_list` (at the configured dt)
/// and over `dt_list` (at the largest `m`), comparing observables at the
/// configured report times.
pub fn convergence_check<R: Real>(config: &RunConfig<R>, m_list: &[usize], dt_list: &[R], tolerance: R) -> Result<ConvergenceReport<R>> {
    if m_list.is_empty() || dt_list.is_empty() {
        return Err(Error::param("bond-dimension and time-step lists must be nonempty"));
    }
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let mut dts = dt_list.to_vec();
    dts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    dts.dedup();

    let mut base = config.clone();
    base.backend = Backend::Mps;
    base.validate()?;
    let with_m = |m: usize| RunConfig {
        truncation: TruncationPolicy {
            max_bond: m,
            ..base.truncation
        },
        ..base.clone()
    };
    for &m in &ms {
        with_m(m).validate()?;
    }
    let m_top = *ms.last().unwrap();
    let with_dt = |dt: R| {
        let mut c = with_m(m_top);
        c.quench.dt = dt;
        c
    };
    for &dt in &dts {
        with_dt(dt).validate()?;
    }

    let m_series: Vec<_> = ms.par_iter().map(|&m| run_quench(&with_m(m))).collect();
    let mut bond_runs = Vec::new();
    for (i, (m, series)) in ms.iter().zip(&m_series).enumerate() {
        let prev = if i > 0 { m_series[i - 1].as_ref().ok() } else { None };
        bond_runs.push(BondRun {
            max_bond: *m,
            final_discarded_weight: series
                .as_ref()
                .ok()
                .and_then(|s| s.last())
                .map_or(R::zero(), |r| r.discarded_weight_total),
            deviation_from_previous: match (prev, series) {
                (Some(p), Ok(s)) => Some(compare_series(p, s, true).max),
                _ => None,
            },
            error: series.as_ref().err().map(|e| e.to_string()),
        });
    }
    let converged = match bond_runs.as_slice() {
        [.., last] if ms.len() >= 2 => last.error.is_none() && last.deviation_from_previous.is_some_and(|d| d <= tolerance),
        [only] => only.error.is_none(),
        _ => false,
    };

    let thermal = config.quench.is_thermal();
    let limit = if thermal { THERMAL_LIMIT } else { EXACT_LIMIT };
    let exact_series = (config.chain.n_sites <= limit).then(|| {
        let mut c = with_m(m_top);
        c.backend = Backend::Exact;
        run_quench(&c)
    });
    let dt_series: Vec<_> = dts.par_iter().map(|&dt| run_quench(&with_dt(dt))).collect();
    let mut step_runs = Vec::new();
    for (i, (dt, series)) in dts.iter().zip(&dt_series).enumerate() {
        let prev = if i > 0 { dt_series[i - 1].as_ref().ok() } else { None };
        step_runs.push(StepRun {
            dt: *dt,
            deviation_from_previous: match (prev, series) {
                (Some(p), Ok(s)) => Some(compare_series(p, s, true).max),
                _ => None,
            },
            deviation_from_exact: match (&exact_series, series) {
                (Some(Ok(e)), Ok(s)) => Some(compare_series(e, s, !thermal).max),
                _ => None,
            },
            error: series.as_ref().err().map(|e| e.to_string()),
        });
    }
    Ok(ConvergenceReport {
        bond_runs,
        step_runs,
        tolerance,
        converged,
    })
}

/// Exact and MPS series of the same configuration side by side.
#[derive(Clone, Debug)]
pub struct OracleReport<R: Real> {
    pub exact: Vec<TimeSeriesRecord<R>>,
    pub mps: Vec<TimeSeriesRecord<R>>,
    pub deviation: SeriesDeviation<R>,
}

pub fn oracle_report<R: Real>(config: &RunConfig<R>) -> std::result::Result<OracleReport<R>, RunError<R>> {
    let mut ex = config.clone();
    ex.backend = Backend::Exact;
    let mut mp = config.clone();
    mp.backend = Backend::Mps;
    let exact = run_quench(&ex)?;
    let mps = run_quench(&mp)?;
    let deviation = compare_series(&exact, &mps, !config.quench.is_thermal());
    Ok(OracleReport { exact, mps, deviation })
}

/// Column names of the record CSV, in order.
pub const CSV_COLUMNS: [&str; 14] = [
    "t",
    "delta_i",
    "delta_f",
    "temperature",
    "concurrence",
    "discord",
    "dx",
    "dy",
    "dz",
    "mz_center",
    "energy",
    "entropy_center",
    "discarded_weight",
    "validity_flag",
];

fn fmt_float<R: Real>(x: R) -> String {
    format!("{:.11e}", x.as_f64())
}

fn csv_row<R: Real>(r: &TimeSeriesRecord<R>) -> String {
    let mut row: Vec<String> = [
        r.t,
        r.delta_i,
        r.delta_f,
        r.temperature,
        r.concurrence,
        r.discord,
        r.dx,
        r.dy,
        r.dz,
        r.mz_center,
        r.energy,
        r.entropy_center,
        r.discarded_weight_total,
    ]
    .iter()
    .map(|x| fmt_float(*x))
    .collect();
    row.push(if r.validity_flag { "1" } else { "0" }.to_string());
    row.join(",")
}

/// Header plus one row per record.
pub fn records_to_csv<R: Real>(records: &[TimeSeriesRecord<R>]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        s.push_str(&csv_row(r));
        s.push('\n');
    }
    s
}

/// One row per successful grid point, then `#`-prefixed summary lines for
/// the peaks, slope changes and failed points.
pub fn sweep_to_csv<R: Real>(sweep: &SweepResult<R>) -> String {
    let rows: Vec<TimeSeriesRecord<R>> = sweep.points.iter().filter_map(|p| p.record).collect();
    let mut s = records_to_csv(&rows);
    let mut peak = |name: &str, p: &Option<Peak<R>>| {
        if let Some(p) = p {
            let _ = writeln!(
                s,
                "# {name},delta_f={},value={},grid_delta_f={},grid_value={}",
                fmt_float(p.delta_f),
                fmt_float(p.value),
                fmt_float(p.grid_delta_f),
                fmt_float(p.grid_value)
            );
        }
    };
    peak("peak_entanglement", &sweep.peak_entanglement);
    peak("peak_discord", &sweep.peak_discord);
    for c in &sweep.slope_changes {
        let _ = writeln!(
            s,
            "# slope_change,delta_f={},second_difference={}",
            fmt_float(c.delta_final),
            fmt_float(c.second_difference)
        );
    }
    for p in sweep.points.iter().filter(|p| p.record.is_none()) {
        let _ = writeln!(
            s,
            "# failed,delta_f={},error={}",
            fmt_float(p.delta_final),
            p.error.as_deref().unwrap_or("unknown").replace(['\n', ','], " ")
        );
    }
    s
}

pub fn write_csv<R: Real>(records: &[TimeSeriesRecord<R>], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &records_to_csv(records))
}

pub fn write_sweep_csv<R: Real>(sweep: &SweepResult<R>, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &sweep_to_csv(sweep))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses the output of [`records_to_csv`]; `#` lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<TimeSeriesRecord<f64>>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::Config(format!("unexpected CSV header '{header}'")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != CSV_COLUMNS.len() {
                return Err(Error::Config(format!(
                    "row {}: expected {} fields, found {}",
                    i + 1,
                    CSV_COLUMNS.len(),
                    fields.len()
                )));
            }
            let mut v = [0.0f64; 13];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::Config(format!("row {}: bad number '{f}'", i + 1)))?;
            }
            let validity_flag = match fields[13] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Config(format!("row {}: bad flag '{other}'", i + 1))),
            };
            Ok(TimeSeriesRecord {
                t: v[0],
                delta_i: v[1],
                delta_f: v[2],
                temperature: v[3],
                concurrence: v[4],
                discord: v[5],
                dx: v[6],
                dy: v[7],
                dz: v[8],
                mz_center: v[9],
                energy: v[10],
                entropy_center: v[11],
                discarded_weight_total: v[12],
                validity_flag,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, delta_i: f64, delta_f: f64, t_max: f64, backend: Backend) -> RunConfig<f64> {
        let quench = QuenchSpec {
            delta_initial: delta_i,
            delta_final: delta_f,
            temperature: 0.0,
            t_max,
            dt: 0.05,
            d_beta: 0.05,
        };
        RunConfig::new(
            ChainParams::xxz(n, 0.0).unwrap(),
            quench,
            TruncationPolicy::with_max_bond(64),
            backend,
        )
    }

    #[test]
    fn parabola_vertex_recovers_known_maximum() {
        let f = |x: f64| 2.0 - 3.0 * (x - 1.7).powi(2);
        let (x, y) = parabola_vertex([1.6, 1.8, 2.0], [f(1.6), f(1.8), f(2.0)]).unwrap();
        assert!((x - 1.7).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
        // opening upward or flat: no vertex
        assert!(parabola_vertex([0.0, 1.0, 2.0], [1.0, 0.0, 1.0]).is_none());
        assert!(parabola_vertex([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]).is_none());
    }

    fn point(delta_final: f64, discord: f64) -> SweepPoint<f64> {
        let mut r = TimeSeriesRecord::<f64>::default();
        r.delta_f = delta_final;
        r.discord = discord;
        r.concurrence = discord / 2.0;
        SweepPoint {
            delta_final,
            record: Some(r),
            error: None,
        }
    }

    #[test]
    fn peaks_at_grid_edges_and_failed_neighbors() {
        let pts = vec![point(0.0, 3.0), point(1.0, 2.0), point(2.0, 1.0)];
        let p = find_peak(&pts, |r| r.discord).unwrap();
        assert_eq!((p.delta_f, p.value), (0.0, 3.0));

        let mut pts = vec![point(0.0, 1.0), point(1.0, 2.0), point(2.0, 1.5)];
        let p = find_peak(&pts, |r| r.discord).unwrap();
        assert!(p.delta_f > 1.0 && p.delta_f < 1.5 && p.value > 2.0);
        pts[2].record = None;
        let p = find_peak(&pts, |r| r.discord).unwrap();
        assert_eq!(p.delta_f, 1.0);
        assert!(find_peak(&[SweepPoint::<f64> { delta_final: 0.0, record: None, error: None }], |r| r.discord).is_none());
    }

    #[test]
    fn slope_change_flags_kinks() {
        // linear pieces with a kink at 1.0
        let pts: Vec<_> = (0..11)
            .map(|i| {
                let x = 0.2 * i as f64;
                point(x, if x <= 1.0 + 1e-9 { 0.1 + 0.05 * x + 1e-4 * (i % 2) as f64 } else { 0.15 - 0.08 * (x - 1.0) })
            })
            .collect();
        let flags = slope_changes(&pts);
        assert_eq!(flags.len(), 1, "{flags:?}");
        assert!((flags[0].delta_final - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut c = config(8, 0.0, 1.0, 1.0, Backend::Mps);
        assert!(c.validate().is_ok());
        c.report_interval = 0.07;
        assert!(c.validate().is_err());
        let c = config(16, 0.0, 1.0, 1.0, Backend::Exact);
        assert!(matches!(c.validate(), Err(Error::Size { .. })));
        let mut c = config(12, 0.0, 1.0, 1.0, Backend::Exact);
        c.quench.temperature = 0.5;
        assert!(c.validate().is_ok());
        c.quench.d_beta = 0.3;
        c.backend = Backend::Mps;
        assert!(c.validate().is_err(), "beta = 2 is not a multiple of 0.3");
        assert!("tebd".parse::<Backend>().is_err());
    }

    fn max_drift(records: &[TimeSeriesRecord<f64>]) -> f64 {
        let first = records[0];
        records
            .iter()
            .flat_map(|r| {
                r.observables()
                    .iter()
                    .zip(first.observables().iter())
                    .map(|((_, a), (_, b))| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn stationary_when_nothing_is_quenched() {
        let mut c = config(8, 1.0, 1.0, 2.0, Backend::Exact);
        c.report_interval = 0.5;
        let records = run_quench(&c).unwrap();
        assert_eq!(records.len(), 5);
        assert!(max_drift(&records) < 1e-6);

        // The Trotterized propagator does not share the eigenstates of H, so
        // the MPS series only stays put to O(dt^2).
        c.backend = Backend::Mps;
        let coarse = max_drift(&run_quench(&c).unwrap());
        c.quench.dt = 0.025;
        let fine = max_drift(&run_quench(&c).unwrap());
        assert!(coarse < 1e-3, "{coarse:e}");
        assert!(fine < coarse / 3.0, "{fine:e} vs {coarse:e}");
    }

    #[test]
    fn times_and_weights_are_monotone() {
        let mut c = config(10, 0.0, 2.0, 2.0, Backend::Mps);
        c.truncation = TruncationPolicy::with_max_bond(8);
        c.report_interval = 0.25;
        let records = run_quench(&c).unwrap();
        for w in records.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].discarded_weight_total >= w[0].discarded_weight_total);
        }
        assert!(records.last().unwrap().discarded_weight_total > 0.0);
    }

    #[test]
    fn failures_carry_partial_series() {
        let mut c = config(10, 0.0, 2.0, 2.0, Backend::Mps);
        c.truncation = TruncationPolicy::with_max_bond(4);
        c.report_interval = 0.1;
        c.weight_cap = Some(1e-9);
        let err = run_quench(&c).unwrap_err();
        assert!(matches!(err.source, Error::TruncationBudget { .. }));
        assert!(!err.partial.is_empty());
        assert_eq!(err.partial[0].t, 0.0);
    }

    #[test]
    fn single_point_sweep() {
        let c = config(6, 0.0, 0.0, 1.0, Backend::Exact);
        let s = run_sweep(&c, &[1.0], 1.0).unwrap();
        let p = s.peak_discord.unwrap();
        assert_eq!((p.delta_f, p.grid_delta_f), (1.0, 1.0));
        assert_eq!(s.points[0].record.unwrap().t, 1.0);
        assert!(run_sweep(&c, &[], 1.0).is_err());
        assert!(run_sweep(&c, &[1.0], 2.0).is_err());
        assert!(run_sweep(&c, &[1.0], 0.33).is_err());
    }

    #[test]
    fn sweep_ignores_grid_order() {
        let c = config(6, 0.0, 0.0, 1.0, Backend::Exact);
        let a = run_sweep(&c, &[0.5, 1.0, 1.5, 2.0], 1.0).unwrap();
        let b = run_sweep(&c, &[2.0, 1.0, 0.5, 1.5, 1.0], 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(sweep_to_csv(&a), sweep_to_csv(&b));
    }

    #[test]
    fn csv_shape_and_round_trip() {
        assert_eq!(records_to_csv::<f64>(&[]), format!("{}\n", CSV_COLUMNS.join(",")));
        let c = config(6, 0.0, 2.0, 0.5, Backend::Exact);
        let records = run_quench(&c).unwrap();
        let text = records_to_csv(&records[..1]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 14);

        let text = records_to_csv(&records);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), records.len());
        for (a, b) in parsed.iter().zip(&records) {
            for ((_, x), (_, y)) in a.observables().iter().zip(b.observables().iter()) {
                assert!((x - y).abs() <= 1e-11 * y.abs().max(1e-300));
            }
            assert_eq!(a.validity_flag, b.validity_flag);
        }
        assert!(parse_csv("t,x\n").is_err());
    }

    #[test]
    fn identical_configs_give_identical_csv() {
        let c = config(8, 0.5, 1.5, 1.0, Backend::Mps);
        let a = records_to_csv(&run_quench(&c).unwrap());
        let b = records_to_csv(&run_quench(&c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn csv_is_written_with_path_context() {
        let err = write_csv::<f64>(&[], "/nonexistent-dir/out.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }

    #[test]
    fn inactive_truncation_gives_identical_bond_runs() {
        let mut c = config(8, 0.0, 2.0, 1.0, Backend::Mps);
        c.report_interval = 0.25;
        let report = convergence_check(&c, &[16, 32], &[0.05], 1e-3).unwrap();
        assert!(report.converged);
        assert!(report.bond_runs[1].deviation_from_previous.unwrap() < 1e-10);
        assert!(report.step_runs[0].deviation_from_exact.unwrap() < 1e-3);
        assert!(convergence_check(&c, &[], &[0.05], 1e-3).is_err());
    }
}
