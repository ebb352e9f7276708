//! Strong-error and ergodic-limit experiments.
//!
//! Strong errors compare coarse runs against a reference run driven by the
//! same Brownian path. For every trajectory the fine increments of all
//! reference modes are drawn once per reference step and each coarse level
//! sums them over its own step (exact, see [`crate::noise`]). A coarser grid
//! sees that noise in one of two ways ([`Coupling`]): the reference modes
//! truncated to its own modes, or the reference nodal noise averaged over each
//! coarse cell. The error is
//!
//! ```text
//! E(tau, N) = max_i ( (1/L) sum_k max_x |u^{tau,N}(t_i, x) - u^{ref}(t_i, x)|^2 )^{1/2}
//! ```
//!
//! with `x` ranging over the coarse midpoints plus both boundary points and the
//! reference evaluated through its piecewise-linear interpolant.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralBasis};
use crate::integrator::{time_to_steps, DriftSpec, InitialProfile, Observer, SchemeParams, SchemeState, Trajectory};
use crate::noise::{refinement_ratio, NoiseSource};
use crate::observables::{ensemble_average, RunningAverage, TestFunctionSpec, TimeAverage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Tau,
    Space,
}

impl ParamKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamKind::Tau => "tau",
            ParamKind::Space => "space",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub n_modes: usize,
    pub error: f64,
    pub rate: Option<f64>,
}

impl ConvergenceRow {
    /// The discretization parameter the row varies: `tau` or `h = pi / N`.
    pub fn parameter(&self, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Tau => self.tau,
            ParamKind::Space => std::f64::consts::PI / self.n_modes as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub t_final: f64,
    pub trajectories: u64,
    pub tau_ref: f64,
    pub n_ref: usize,
    pub seed: u64,
    pub check_every: u64,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub kind: ParamKind,
    pub rows: Vec<ConvergenceRow>,
    pub meta: TableMeta,
}

impl ConvergenceTable {
    /// Builds the table and fills the pairwise rates
    /// `log(e_{k-1}/e_k) / log(p_{k-1}/p_k)`, which is `log2(e_{k-1}/e_k)`
    /// for successive halvings.
    pub fn new(kind: ParamKind, mut rows: Vec<ConvergenceRow>, meta: TableMeta) -> Self {
        for k in 0..rows.len() {
            rows[k].rate = if k == 0 {
                None
            } else {
                pair_rate(
                    rows[k - 1].error,
                    rows[k].error,
                    rows[k - 1].parameter(kind),
                    rows[k].parameter(kind),
                )
            };
        }
        ConvergenceTable { kind, rows, meta }
    }
}

fn pair_rate(e_prev: f64, e: f64, p_prev: f64, p: f64) -> Option<f64> {
    (e_prev > 0.0 && e > 0.0 && p_prev != p).then(|| (e_prev / e).ln() / (p_prev / p).ln())
}

/// Least-squares slope of `log2(error)` against `log2(parameter)` over rows
/// with a positive error.
pub fn rate_regression(table: &ConvergenceTable) -> Result<f64> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.parameter(table.kind).log2(), r.error.log2()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            found: pts.len(),
        });
    }
    Ok(least_squares_slope(&pts))
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Precomputed evaluation of a reference interpolant at a coarse level's
/// evaluation points.
struct Probe {
    /// `(reference index, weight)`: value = `v[i] + w (v[i+1] - v[i])`.
    reference: Vec<(usize, f64)>,
    /// Coarse nodal index at each evaluation point.
    coarse: Vec<usize>,
}

impl Probe {
    fn new(coarse: &SpectralBasis, reference: &SpectralBasis) -> Self {
        let n = coarse.n_modes();
        let mut xs = Vec::with_capacity(n + 2);
        let mut idx = Vec::with_capacity(n + 2);
        xs.push(0.0);
        idx.push(0);
        for (i, &x) in coarse.grid().iter().enumerate() {
            xs.push(x);
            idx.push(i);
        }
        xs.push(std::f64::consts::PI);
        idx.push(n - 1);

        let rg = reference.grid();
        let nr = reference.n_modes();
        let h = reference.h();
        let reference = xs
            .iter()
            .map(|&x| {
                if x <= rg[0] {
                    (0, 0.0)
                } else if x >= rg[nr - 1] {
                    (nr - 1, 0.0)
                } else {
                    let i = ((x / h - 0.5).floor() as usize).min(nr - 2);
                    if x == rg[i] {
                        (i, 0.0)
                    } else if x == rg[i + 1] {
                        (i + 1, 0.0)
                    } else {
                        (i, (x - rg[i]) / h)
                    }
                }
            })
            .collect();
        Probe {
            reference,
            coarse: idx,
        }
    }

    fn sup_sq(&self, coarse: &[f64], reference: &[f64]) -> f64 {
        self.reference
            .iter()
            .zip(&self.coarse)
            .map(|(&(i, w), &c)| {
                let r = if w == 0.0 {
                    reference[i]
                } else {
                    reference[i] + w * (reference[i + 1] - reference[i])
                };
                let d = coarse[c] - r;
                d * d
            })
            .fold(0.0, f64::max)
    }
}

/// How a coarser grid receives the reference noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Coarse mode `j` is driven by reference mode `j`; modes `>= N` are dropped.
    Truncation,
    /// Coarse nodal noise is the mean of the reference nodal noise over each
    /// coarse cell. Requires `N` to divide `N_ref`.
    CellAverage,
}

impl Coupling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Coupling::Truncation => "truncation",
            Coupling::CellAverage => "cell-average",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "truncation" => Some(Coupling::Truncation),
            "cell-average" => Some(Coupling::CellAverage),
            _ => None,
        }
    }
}

/// Reference and coarse discretizations driven by shared noise.
#[derive(Debug, Clone)]
pub struct CoupledStudy {
    pub reference: SchemeParams,
    pub levels: Vec<SchemeParams>,
    pub t_final: f64,
    pub trajectories: u64,
    pub seed: u64,
    /// Errors are checked at every `check_every`-th coarse step.
    pub check_every: u64,
    pub coupling: Coupling,
}

struct LevelPlan {
    ratio: u64,
    probe: Probe,
    checks: usize,
    /// Reference cells per coarse cell when the level is cell-averaged.
    cells: Option<usize>,
}

impl CoupledStudy {
    fn plan(&self) -> Result<(u64, Vec<LevelPlan>)> {
        if self.trajectories == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let check_every = self.check_every.max(1);
        let tau_ref = self.reference.tau();
        let fine_steps = time_to_steps(self.t_final, tau_ref)?;
        let n_ref = self.reference.n_modes();
        let mut plans = Vec::with_capacity(self.levels.len());
        for lvl in &self.levels {
            if lvl.n_modes() > n_ref {
                return Err(Error::Incompatible(format!(
                    "coarse N = {} exceeds reference N = {n_ref}",
                    lvl.n_modes()
                )));
            }
            let ratio = refinement_ratio(lvl.tau(), tau_ref)?;
            if fine_steps % ratio != 0 {
                return Err(Error::Incompatible(format!(
                    "T = {} is not a multiple of tau = {}",
                    self.t_final,
                    lvl.tau()
                )));
            }
            let coarse_steps = fine_steps / ratio;
            let n = lvl.n_modes();
            let cells = match self.coupling {
                Coupling::CellAverage if n < n_ref => {
                    if n_ref % n != 0 {
                        return Err(Error::Incompatible(format!(
                            "cell-average coupling needs N = {n} to divide N_ref = {n_ref}"
                        )));
                    }
                    Some(n_ref / n)
                }
                _ => None,
            };
            plans.push(LevelPlan {
                ratio,
                probe: Probe::new(lvl.basis(), self.reference.basis()),
                checks: (coarse_steps / check_every) as usize + 1,
                cells,
            });
        }
        Ok((fine_steps, plans))
    }

    /// Per-level squared sup-discrepancies at each checked time for one
    /// trajectory.
    fn run_one(&self, id: u64, fine_steps: u64, plans: &[LevelPlan]) -> Result<Vec<Vec<f64>>> {
        let check_every = self.check_every.max(1);
        let n_ref = self.reference.n_modes();
        let src = NoiseSource::new(self.seed, id, self.reference.tau(), n_ref - 1)?;
        let mut reference = Trajectory::new(&self.reference, self.reference.initial_state(), id)?;
        let mut coarse: Vec<Trajectory<'_>> = self
            .levels
            .iter()
            .map(|p| Trajectory::new(p, p.initial_state(), id))
            .collect::<Result<_>>()?;
        let mut acc: Vec<Vec<f64>> = self.levels.iter().map(|p| vec![0.0; p.n_modes()]).collect();
        let mut out: Vec<Vec<f64>> = plans.iter().map(|p| Vec::with_capacity(p.checks)).collect();
        for (l, plan) in plans.iter().enumerate() {
            out[l].push(plan.probe.sup_sq(&coarse[l].nodal().0, &reference.nodal().0));
        }

        let any_cells = plans.iter().any(|p| p.cells.is_some());
        let mut noise = vec![0.0; n_ref];
        let mut nodal_noise = vec![0.0; n_ref];
        let mut coarse_noise: Vec<f64> = Vec::new();
        for k in 0..fine_steps {
            src.fine_increments_into(k, &mut noise[1..]);
            reference.advance_with(&noise)?;
            if any_cells {
                self.reference.basis().from_spectral_into(&noise, &mut nodal_noise);
            }
            for (l, plan) in plans.iter().enumerate() {
                // `acc` holds spectral sums for truncated levels and nodal
                // sums for cell-averaged ones.
                let a = &mut acc[l];
                let n = a.len();
                match plan.cells {
                    None => {
                        for (x, y) in a[1..].iter_mut().zip(&noise[1..n]) {
                            *x += y;
                        }
                    }
                    Some(r) => {
                        let w = 1.0 / r as f64;
                        for (x, cell) in a.iter_mut().zip(nodal_noise.chunks_exact(r)) {
                            *x += w * cell.iter().sum::<f64>();
                        }
                    }
                }
                if (k + 1) % plan.ratio == 0 {
                    if plan.cells.is_some() {
                        coarse_noise.resize(n, 0.0);
                        self.levels[l].basis().to_spectral_into(a, &mut coarse_noise);
                        // The mean mode carries no noise; drop its roundoff.
                        coarse_noise[0] = 0.0;
                        coarse[l].advance_with(&coarse_noise)?;
                    } else {
                        coarse[l].advance_with(a)?;
                    }
                    a.fill(0.0);
                    if ((k + 1) / plan.ratio) % check_every == 0 {
                        out[l].push(plan.probe.sup_sq(&coarse[l].nodal().0, &reference.nodal().0));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `E(tau, N)` for every level, in level order.
    pub fn errors(&self) -> Result<Vec<f64>> {
        let (fine_steps, plans) = self.plan()?;
        let per_traj: Vec<Vec<Vec<f64>>> = (0..self.trajectories)
            .into_par_iter()
            .map(|id| self.run_one(id, fine_steps, &plans))
            .collect::<Result<_>>()?;
        // Fixed reduction order: trajectories in id order.
        let l = self.trajectories as f64;
        Ok(plans
            .iter()
            .enumerate()
            .map(|(lvl, plan)| {
                let mut sums = vec![0.0; plan.checks];
                for traj in &per_traj {
                    for (s, v) in sums.iter_mut().zip(&traj[lvl]) {
                        *s += v;
                    }
                }
                sums.iter().map(|s| (s / l).sqrt()).fold(0.0, f64::max)
            })
            .collect())
    }
}

/// `E(tau, N)` of one coarse discretization against a reference.
pub fn mean_square_error(
    coarse: &SchemeParams,
    reference: &SchemeParams,
    seed: u64,
    t_final: f64,
    trajectories: u64,
    check_every: u64,
) -> Result<f64> {
    let study = CoupledStudy {
        reference: reference.clone(),
        levels: vec![coarse.clone()],
        t_final,
        trajectories,
        seed,
        check_every,
        coupling: Coupling::Truncation,
    };
    Ok(study.errors()?[0])
}

/// Shared model parameters of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub sigma: f64,
    pub drift: DriftSpec,
    pub initial: InitialProfile,
    pub validation: bool,
}

impl ModelSpec {
    pub fn params(&self, tau: f64, basis: Arc<SpectralBasis>) -> Result<SchemeParams> {
        let u0 = self.initial.sample(&basis);
        SchemeParams::new(tau, basis, self.sigma, self.drift, u0, self.validation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConfig {
    pub model: ModelSpec,
    pub t_final: f64,
    pub n_modes: usize,
    pub n_ref: usize,
    pub tau_ref: f64,
    pub taus: Vec<f64>,
    pub trajectories: u64,
    pub seed: u64,
    pub check_every: u64,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialConfig {
    pub model: ModelSpec,
    pub t_final: f64,
    pub tau: f64,
    pub n_ref: usize,
    pub n_modes: Vec<usize>,
    pub trajectories: u64,
    pub seed: u64,
    pub check_every: u64,
    pub coupling: Coupling,
}

/// Fixes `N`, varies `tau` against a reference at `tau_ref` (and `n_ref`).
pub fn run_temporal_study(cfg: &TemporalConfig) -> Result<ConvergenceTable> {
    let ref_basis = Arc::new(SpectralBasis::new(cfg.n_ref)?);
    let basis = if cfg.n_modes == cfg.n_ref {
        ref_basis.clone()
    } else {
        Arc::new(SpectralBasis::new(cfg.n_modes)?)
    };
    let reference = cfg.model.params(cfg.tau_ref, ref_basis)?;
    let levels = cfg
        .taus
        .iter()
        .map(|&tau| cfg.model.params(tau, basis.clone()))
        .collect::<Result<Vec<_>>>()?;
    for p in &levels {
        p.warn_on_rate_constraint();
    }
    let study = CoupledStudy {
        reference,
        levels,
        t_final: cfg.t_final,
        trajectories: cfg.trajectories,
        seed: cfg.seed,
        check_every: cfg.check_every,
        coupling: cfg.coupling,
    };
    let errors = study.errors()?;
    let rows = cfg
        .taus
        .iter()
        .zip(errors)
        .map(|(&tau, error)| ConvergenceRow {
            tau,
            n_modes: cfg.n_modes,
            error,
            rate: None,
        })
        .collect();
    Ok(ConvergenceTable::new(
        ParamKind::Tau,
        rows,
        TableMeta {
            t_final: cfg.t_final,
            trajectories: cfg.trajectories,
            tau_ref: cfg.tau_ref,
            n_ref: cfg.n_ref,
            seed: cfg.seed,
            check_every: cfg.check_every,
            coupling: cfg.coupling,
        },
    ))
}

/// Fixes `tau`, varies `N` against a reference with `n_ref` modes.
pub fn run_spatial_study(cfg: &SpatialConfig) -> Result<ConvergenceTable> {
    let ref_basis = Arc::new(SpectralBasis::new(cfg.n_ref)?);
    let reference = cfg.model.params(cfg.tau, ref_basis.clone())?;
    let levels = cfg
        .n_modes
        .iter()
        .map(|&n| {
            let basis = if n == cfg.n_ref {
                ref_basis.clone()
            } else {
                Arc::new(SpectralBasis::new(n)?)
            };
            cfg.model.params(cfg.tau, basis)
        })
        .collect::<Result<Vec<_>>>()?;
    let study = CoupledStudy {
        reference,
        levels,
        t_final: cfg.t_final,
        trajectories: cfg.trajectories,
        seed: cfg.seed,
        check_every: cfg.check_every,
        coupling: cfg.coupling,
    };
    let errors = study.errors()?;
    let rows = cfg
        .n_modes
        .iter()
        .zip(errors)
        .map(|(&n, error)| ConvergenceRow {
            tau: cfg.tau,
            n_modes: n,
            error,
            rate: None,
        })
        .collect();
    Ok(ConvergenceTable::new(
        ParamKind::Space,
        rows,
        TableMeta {
            t_final: cfg.t_final,
            trajectories: cfg.trajectories,
            tau_ref: cfg.tau,
            n_ref: cfg.n_ref,
            seed: cfg.seed,
            check_every: cfg.check_every,
            coupling: cfg.coupling,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Ensemble of `L` trajectories, each time-averaged.
    Ensemble,
    /// One long trajectory.
    Single,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Ensemble => "I",
            Estimator::Single => "II",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicConfig {
    pub tau: f64,
    pub n_modes: usize,
    pub sigma: f64,
    pub drift: DriftSpec,
    pub validation: bool,
    pub initials: Vec<InitialProfile>,
    pub tests: Vec<TestFunctionSpec>,
    /// Horizon of the single-trajectory estimator; `None` skips it.
    pub t_single: Option<f64>,
    /// `(L, T)` of the ensemble estimator; `None` skips it.
    pub ensemble: Option<(u64, f64)>,
    pub seed: u64,
    pub burn_in: u64,
    /// History stride in steps; 0 picks about 500 points per run.
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicEntry {
    pub initial: usize,
    pub test: usize,
    pub estimator: Estimator,
    pub average: RunningAverage,
    pub estimate: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicReport {
    pub entries: Vec<ErgodicEntry>,
}

impl ErgodicReport {
    pub fn find(&self, initial: usize, test: usize, estimator: Estimator) -> Option<&ErgodicEntry> {
        self.entries
            .iter()
            .find(|e| e.initial == initial && e.test == test && e.estimator == estimator)
    }
}

/// Time averages of every test function along one trajectory.
pub fn time_averages(
    params: &SchemeParams,
    src: &NoiseSource,
    tests: &[TestFunctionSpec],
    n_steps: u64,
    burn_in: u64,
    record_every: u64,
) -> Result<Vec<RunningAverage>> {
    let mut observers: Vec<TimeAverage> = tests
        .iter()
        .map(|t| Ok(TimeAverage::new(t.bind(params.basis())?, params.tau(), burn_in, record_every)))
        .collect::<Result<_>>()?;
    {
        let mut refs: Vec<&mut dyn Observer> = observers.iter_mut().map(|o| o as &mut dyn Observer).collect();
        crate::integrator::run_trajectory(params, src, n_steps, &mut refs)?;
    }
    let t_end = n_steps as f64 * params.tau();
    Ok(observers
        .into_iter()
        .map(|o| {
            let mut acc = o.into_average();
            if acc.history.last().map(|h| h.0) != Some(t_end) {
                acc.record(t_end);
            }
            acc
        })
        .collect())
}

fn auto_stride(record_every: u64, n_steps: u64) -> u64 {
    if record_every > 0 {
        record_every
    } else {
        (n_steps / 500).max(1)
    }
}

pub fn run_ergodic_study(cfg: &ErgodicConfig) -> Result<ErgodicReport> {
    let basis = Arc::new(SpectralBasis::new(cfg.n_modes)?);
    let mut entries = Vec::new();
    for (i, u0) in cfg.initials.iter().enumerate() {
        let params = SchemeParams::new(
            cfg.tau,
            basis.clone(),
            cfg.sigma,
            cfg.drift,
            u0.sample(&basis),
            cfg.validation,
        )?;
        if let Some(t) = cfg.t_single {
            let n_steps = time_to_steps(t, cfg.tau)?;
            let src = NoiseSource::new(cfg.seed, 0, cfg.tau, cfg.n_modes - 1)?;
            let start = Instant::now();
            let avgs = time_averages(
                &params,
                &src,
                &cfg.tests,
                n_steps,
                cfg.burn_in,
                auto_stride(cfg.record_every, n_steps),
            )?;
            let wall = start.elapsed().as_secs_f64();
            for (k, average) in avgs.into_iter().enumerate() {
                entries.push(ErgodicEntry {
                    initial: i,
                    test: k,
                    estimator: Estimator::Single,
                    estimate: average.average()?,
                    average,
                    wallclock_s: wall,
                });
            }
        }
        if let Some((l, t)) = cfg.ensemble {
            if l == 0 {
                return Err(Error::EmptyEnsemble);
            }
            let n_steps = time_to_steps(t, cfg.tau)?;
            let stride = auto_stride(cfg.record_every, n_steps);
            let start = Instant::now();
            let per_traj: Vec<Vec<RunningAverage>> = (1..=l)
                .into_par_iter()
                .map(|id| {
                    let src = NoiseSource::new(cfg.seed, id, cfg.tau, cfg.n_modes - 1)?;
                    time_averages(&params, &src, &cfg.tests, n_steps, cfg.burn_in, stride)
                })
                .collect::<Result<_>>()?;
            let wall = start.elapsed().as_secs_f64();
            for k in 0..cfg.tests.len() {
                let runs: Vec<RunningAverage> = per_traj.iter().map(|r| r[k].clone()).collect();
                let average = ensemble_average(&runs)?;
                entries.push(ErgodicEntry {
                    initial: i,
                    test: k,
                    estimator: Estimator::Ensemble,
                    estimate: average.average()?,
                    average,
                    wallclock_s: wall,
                });
            }
        }
    }
    Ok(ErgodicReport { entries })
}

/// Snapshot observer recording nodal values every `every` steps.
pub struct Snapshots {
    pub every: u64,
    pub tau: f64,
    pub frames: Vec<(f64, Field)>,
}

impl Observer for Snapshots {
    fn observe(&mut self, step: u64, _state: &SchemeState, nodal: &Field) {
        if step % self.every.max(1) == 0 {
            self.frames.push((step as f64 * self.tau, nodal.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralField;
    use crate::integrator::run_trajectory;

    fn meta() -> TableMeta {
        TableMeta {
            t_final: 1.0,
            trajectories: 1,
            tau_ref: 1.0,
            n_ref: 1,
            seed: 0,
            check_every: 1,
            coupling: Coupling::Truncation,
        }
    }

    fn rows(errors: &[f64]) -> Vec<ConvergenceRow> {
        errors
            .iter()
            .enumerate()
            .map(|(k, &e)| ConvergenceRow {
                tau: 0.5f64.powi(k as i32 + 2),
                n_modes: 8,
                error: e,
                rate: None,
            })
            .collect()
    }

    #[test]
    fn regression_examples() {
        let t = ConvergenceTable::new(ParamKind::Tau, rows(&[4.0, 2.0, 1.0]), meta());
        assert!((rate_regression(&t).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(t.rows[0].rate, None);
        assert!((t.rows[2].rate.unwrap() - 1.0).abs() < 1e-14);

        let t = ConvergenceTable::new(ParamKind::Tau, rows(&[1.0, 2f64.powf(-0.375), 2f64.powf(-0.75)]), meta());
        assert!((rate_regression(&t).unwrap() - 0.375).abs() < 1e-12);

        let t = ConvergenceTable::new(ParamKind::Tau, rows(&[1.0, 0.5]), meta());
        assert!(matches!(rate_regression(&t), Err(Error::TooFewRows { .. })));
        let t = ConvergenceTable::new(ParamKind::Tau, rows(&[0.3]), meta());
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].rate, None);
    }

    #[test]
    fn pair_rates_of_reference_errors() {
        // Reference strong errors (three significant digits) and the pairwise
        // rates they imply.
        let temporal = [5.19e-1, 4.32e-1, 3.61e-1, 2.61e-1, 2.07e-1];
        let expected = [0.264, 0.262, 0.468, 0.338];
        let t = ConvergenceTable::new(ParamKind::Tau, rows(&temporal), meta());
        for (r, p) in t.rows[1..].iter().zip(expected) {
            assert!((r.rate.unwrap() - p).abs() < 0.01, "{:?} vs {p}", r.rate);
        }
        let spatial = [1.04e-1, 5.05e-2, 2.21e-2, 1.01e-2, 5.18e-3];
        let expected = [1.041, 1.189, 1.134, 0.962];
        let srows: Vec<ConvergenceRow> = spatial
            .iter()
            .enumerate()
            .map(|(k, &e)| ConvergenceRow {
                tau: 1.0,
                n_modes: 8 << k,
                error: e,
                rate: None,
            })
            .collect();
        let t = ConvergenceTable::new(ParamKind::Space, srows, meta());
        for (r, p) in t.rows[1..].iter().zip(expected) {
            assert!((r.rate.unwrap() - p).abs() < 0.01);
        }
    }

    fn model(sigma: f64, drift: DriftSpec, validation: bool) -> ModelSpec {
        ModelSpec {
            sigma,
            drift,
            initial: InitialProfile {
                terms: vec![(1.0 / 3.0, 0), (1.0 / 3.0, 1)],
            },
            validation,
        }
    }

    #[test]
    fn identical_discretizations_have_zero_error() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let b = Arc::new(SpectralBasis::new(16).unwrap());
        let p = m.params(1.0 / 64.0, b).unwrap();
        let e = mean_square_error(&p, &p, 3, 0.25, 4, 1).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn coupled_levels_match_standalone_runs() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let rb = Arc::new(SpectralBasis::new(16).unwrap());
        let cb = Arc::new(SpectralBasis::new(8).unwrap());
        let reference = m.params(1.0 / 64.0, rb).unwrap();
        let coarse = m.params(1.0 / 16.0, cb).unwrap();
        let study = CoupledStudy {
            reference: reference.clone(),
            levels: vec![coarse.clone()],
            t_final: 0.5,
            trajectories: 1,
            seed: 11,
            check_every: 1,
            coupling: Coupling::Truncation,
        };
        let (fine, plans) = study.plan().unwrap();
        let sq = study.run_one(0, fine, &plans).unwrap();

        let src = NoiseSource::new(11, 0, 1.0 / 64.0, 15).unwrap();
        let mut brute = Vec::new();
        for i in 0..=8u64 {
            let rs = run_trajectory(&reference, &src, 4 * i, &mut []).unwrap();
            let cs = run_trajectory(&coarse, &src, i, &mut []).unwrap();
            let ru = rs.nodal(reference.basis()).unwrap();
            let cu = cs.nodal(coarse.basis()).unwrap();
            let mut pts = vec![0.0];
            pts.extend_from_slice(coarse.basis().grid());
            pts.push(std::f64::consts::PI);
            let m = pts
                .iter()
                .map(|&x| {
                    let d = coarse.basis().interpolate(&cu, x).unwrap() - reference.basis().interpolate(&ru, x).unwrap();
                    d * d
                })
                .fold(0.0, f64::max);
            brute.push(m);
        }
        assert_eq!(sq[0].len(), brute.len());
        for (a, b) in sq[0].iter().zip(&brute) {
            assert!((a - b).abs() <= 1e-13 * (1.0 + b), "{a} vs {b}");
        }
    }

    #[test]
    fn cell_average_level_matches_explicit_averaging() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let rb = Arc::new(SpectralBasis::new(16).unwrap());
        let cb = Arc::new(SpectralBasis::new(4).unwrap());
        let tau = 1.0 / 32.0;
        let reference = m.params(tau, rb.clone()).unwrap();
        let coarse = m.params(2.0 * tau, cb.clone()).unwrap();
        let study = CoupledStudy {
            reference: reference.clone(),
            levels: vec![coarse.clone()],
            t_final: 0.5,
            trajectories: 1,
            seed: 4,
            check_every: 1,
            coupling: Coupling::CellAverage,
        };
        let (fine, plans) = study.plan().unwrap();
        let sq = study.run_one(0, fine, &plans).unwrap();

        let src = NoiseSource::new(4, 0, tau, 15).unwrap();
        let mut state = coarse.initial_state();
        for m in 0..8u64 {
            let mut cells = [0.0; 4];
            for k in 0..2 {
                let dw = src.increment_field(&rb, 2 * m + k, 1).unwrap();
                let nodal = rb.from_spectral(&dw).unwrap();
                for (i, c) in cells.iter_mut().enumerate() {
                    *c += nodal.0[4 * i..4 * i + 4].iter().sum::<f64>() / 4.0;
                }
            }
            let mut dw = cb.to_spectral(&Field(cells.to_vec())).unwrap();
            assert!(dw.0[0].abs() < 1e-15);
            dw.0[0] = 0.0;
            state = coarse.step(&state, &dw).unwrap();
        }
        let rs = run_trajectory(&reference, &src, 16, &mut []).unwrap();
        let ru = rs.nodal(&rb).unwrap();
        let cu = state.nodal(&cb).unwrap();
        let mut pts = vec![0.0];
        pts.extend_from_slice(cb.grid());
        pts.push(std::f64::consts::PI);
        let want = pts
            .iter()
            .map(|&x| (cb.interpolate(&cu, x).unwrap() - rb.interpolate(&ru, x).unwrap()).powi(2))
            .fold(0.0, f64::max);
        let got = *sq[0].last().unwrap();
        assert!((got - want).abs() <= 1e-12 * (1.0 + want), "{got} vs {want}");
        assert!(got > 0.0);
    }

    #[test]
    fn cell_average_needs_divisible_grids() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let r = m.params(0.1, Arc::new(SpectralBasis::new(12).unwrap())).unwrap();
        let c = m.params(0.1, Arc::new(SpectralBasis::new(8).unwrap())).unwrap();
        let mut study = CoupledStudy {
            reference: r,
            levels: vec![c],
            t_final: 0.2,
            trajectories: 1,
            seed: 0,
            check_every: 1,
            coupling: Coupling::CellAverage,
        };
        assert!(matches!(study.errors(), Err(Error::Incompatible(_))));
        study.coupling = Coupling::Truncation;
        assert!(study.errors().is_ok());
    }

    #[test]
    fn one_step_linear_error_matches_hand_computation() {
        // sigma = 0, f(x) = a2 x: one coarse step of 2 tau_ref against two
        // reference steps, same N.
        let m = ModelSpec {
            sigma: 0.0,
            drift: DriftSpec::linear(0.8),
            initial: InitialProfile {
                terms: vec![(0.5, 1), (0.25, 2)],
            },
            validation: true,
        };
        let b = Arc::new(SpectralBasis::new(8).unwrap());
        let tau = 0.1;
        let coarse = m.params(2.0 * tau, b.clone()).unwrap();
        let reference = m.params(tau, b.clone()).unwrap();
        let e = mean_square_error(&coarse, &reference, 0, 2.0 * tau, 1, 1).unwrap();

        let lam = b.eigenvalues();
        let step = |c: &[f64], dt: f64| -> Vec<f64> {
            let w: f64 = (0..8).map(|j| (1.0 + lam[j]) * c[j] * c[j]).sum();
            let d = 1.0 + dt * w.powi(6);
            (0..8)
                .map(|j| (-lam[j] * lam[j] * dt).exp() * (1.0 - dt * lam[j] * 0.8 / d) * c[j])
                .collect()
        };
        let c0 = coarse.initial_state().coeffs.0;
        let cc = step(&c0, 2.0 * tau);
        let cr = step(&step(&c0, tau), tau);
        let diff: Vec<f64> = cc.iter().zip(&cr).map(|(a, b)| a - b).collect();
        let du = b.from_spectral(&SpectralField(diff)).unwrap();
        let want = du.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((e - want).abs() <= 1e-12, "{e} vs {want}");
    }

    #[test]
    fn deterministic_error_independent_of_trajectory_count() {
        let m = model(0.0, DriftSpec::benchmark(), false);
        let b = Arc::new(SpectralBasis::new(8).unwrap());
        let c = m.params(0.25, b.clone()).unwrap();
        let r = m.params(1.0 / 32.0, b).unwrap();
        let e1 = mean_square_error(&c, &r, 0, 1.0, 1, 1).unwrap();
        let e2 = mean_square_error(&c, &r, 0, 1.0, 2, 1).unwrap();
        assert!(e1 > 0.0);
        assert_eq!(e1, e2);
    }

    #[test]
    fn incompatible_studies_rejected() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let small = Arc::new(SpectralBasis::new(8).unwrap());
        let big = Arc::new(SpectralBasis::new(16).unwrap());
        let r = m.params(0.01, small.clone()).unwrap();
        let c = m.params(0.015, small).unwrap();
        assert!(mean_square_error(&c, &r, 0, 0.03, 1, 1).is_err());
        let c = m.params(0.02, big).unwrap();
        assert!(mean_square_error(&c, &r, 0, 0.04, 1, 1).is_err());
    }

    #[test]
    fn swapping_equal_parameters_is_symmetric() {
        let m = model(1.0, DriftSpec::benchmark(), false);
        let b = Arc::new(SpectralBasis::new(8).unwrap());
        let p = m.params(0.05, b.clone()).unwrap();
        let q = m.params(0.05, b).unwrap();
        assert_eq!(
            mean_square_error(&p, &q, 1, 0.5, 3, 1).unwrap(),
            mean_square_error(&q, &p, 1, 0.5, 3, 1).unwrap()
        );
    }

    #[test]
    fn fixed_point_time_average_is_exact() {
        let spec = TestFunctionSpec::new(crate::observables::Profile::Exp, 0.0, 3.0).unwrap();
        let cfg = ErgodicConfig {
            tau: 0.01,
            n_modes: 16,
            sigma: 0.0,
            drift: DriftSpec::benchmark(),
            validation: false,
            initials: vec![InitialProfile::constant(1.0 / 3.0)],
            tests: vec![spec.clone()],
            t_single: Some(1.0),
            ensemble: Some((2, 0.5)),
            seed: 0,
            burn_in: 0,
            record_every: 0,
        };
        let report = run_ergodic_study(&cfg).unwrap();
        let b = SpectralBasis::new(16).unwrap();
        let want = spec.bind(&b).unwrap().phi(&Field(vec![1.0 / 3.0; 16]));
        for e in &report.entries {
            assert!((e.estimate - want).abs() <= 1e-12, "{:?}", e.estimator);
        }
        assert_eq!(report.entries.len(), 2);
    }
}
