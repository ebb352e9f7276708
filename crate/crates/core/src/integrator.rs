//! Strongly tamed exponential Euler scheme in spectral form.
//!
//! One step maps the spectral coordinates `c_j` of `U_m` to
//!
//! ```text
//! c_j <- exp(-lambda_j^2 tau) * (c_j - tau * lambda_j * f_j / D + sigma * dbeta_j),   j >= 1
//! c_0 <- c_0
//! ```
//!
//! where `f_j` are the coordinates of the nodal drift `f(U_m)` and
//! `D = 1 + tau * |U_m|_{w^{1,2}}^12` is the taming denominator. Mode 0 has
//! eigenvalue zero and carries no noise, so it is copied unchanged and the
//! spatial mean is conserved bit-for-bit.

use std::sync::Arc;

use log::warn;

use crate::error::{check_len, Error, Result};
use crate::grid::{Field, Norm, SpectralBasis, SpectralField};
use crate::noise::{refinement_ratio, NoiseSource};

/// Cubic drift `f(x) = a0 x^3 + a1 x^2 + a2 x + a3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DriftSpec {
    pub const fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        DriftSpec { a0, a1, a2, a3 }
    }

    /// `f(x) = (x^3 - x^2 + 2x - 2) / 2`, the benchmark drift used by the
    /// experiments.
    pub const fn benchmark() -> Self {
        DriftSpec::new(0.5, -0.5, 1.0, -1.0)
    }

    pub const fn zero() -> Self {
        DriftSpec::new(0.0, 0.0, 0.0, 0.0)
    }

    pub const fn linear(a2: f64) -> Self {
        DriftSpec::new(0.0, 0.0, a2, 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        ((self.a0 * x + self.a1) * x + self.a2) * x + self.a3
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (3.0 * self.a0 * x + 2.0 * self.a1) * x + self.a2
    }

    pub fn eval_field(&self, u: &Field) -> Field {
        Field(u.0.iter().map(|&x| self.eval(x)).collect())
    }

    /// The mass `-a1 / (3 a0)` at which the drift has no even part.
    pub fn symmetric_mass(&self) -> Option<f64> {
        (self.a0 != 0.0).then(|| -self.a1 / (3.0 * self.a0))
    }

    pub fn validate(&self, validation_mode: bool) -> Result<()> {
        let c = [self.a0, self.a1, self.a2, self.a3];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("drift coefficients must be finite".into()));
        }
        if self.a0 < 0.0 {
            return Err(Error::InvalidParameter(format!("a0 must be >= 0, got {}", self.a0)));
        }
        if self.a0 == 0.0 && !validation_mode {
            return Err(Error::InvalidParameter(
                "a0 = 0 is only allowed in validation mode (a0 > 0 required)".into(),
            ));
        }
        Ok(())
    }

    /// Numerical check of `L_f < lambda_1` with `L_f = -sup f'`, the sup taken
    /// over `points` equispaced values in `[-radius, radius]`.
    pub fn dissipativity(&self, radius: f64, lambda1: f64, points: usize) -> Dissipativity {
        let points = points.max(2);
        let sup = (0..points)
            .map(|k| -radius + 2.0 * radius * k as f64 / (points - 1) as f64)
            .map(|x| self.derivative(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let l_f = -sup;
        Dissipativity {
            l_f,
            lambda1,
            holds: l_f < lambda1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub l_f: f64,
    pub lambda1: f64,
    pub holds: bool,
}

/// Initial datum as a finite cosine series `u0(x) = sum_k a_k cos(k x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    pub terms: Vec<(f64, u32)>,
}

impl InitialProfile {
    pub fn constant(c: f64) -> Self {
        InitialProfile { terms: vec![(c, 0)] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, k)| a * (k as f64 * x).cos()).sum()
    }

    /// Exact spatial mean `(1/pi) int u0`.
    pub fn mass(&self) -> f64 {
        self.terms.iter().filter(|t| t.1 == 0).map(|t| t.0).sum()
    }

    pub fn sample(&self, basis: &SpectralBasis) -> Field {
        basis.sample(|x| self.eval(x))
    }
}

#[derive(Debug, Clone)]
pub struct SchemeParams {
    tau: f64,
    basis: Arc<SpectralBasis>,
    sigma: f64,
    drift: DriftSpec,
    initial: Field,
    validation: bool,
    decay: Vec<f64>,
}

impl SchemeParams {
    pub fn new(
        tau: f64,
        basis: Arc<SpectralBasis>,
        sigma: f64,
        drift: DriftSpec,
        initial: Field,
        validation: bool,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0,1), got {tau}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        drift.validate(validation)?;
        check_len(basis.n_modes(), initial.len())?;
        if !initial.is_finite() {
            return Err(Error::InvalidParameter("initial field has non-finite entries".into()));
        }
        let decay = basis.semigroup_factor(tau)?;
        Ok(SchemeParams {
            tau,
            basis,
            sigma,
            drift,
            initial,
            validation,
            decay,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> DriftSpec {
        self.drift
    }

    pub fn initial(&self) -> &Field {
        &self.initial
    }

    pub fn validation_mode(&self) -> bool {
        self.validation
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    /// Step-size restriction `h^-1 tau^9 <= 1` of the strong-rate estimate.
    pub fn rate_constraint_holds(&self) -> bool {
        self.tau.powi(9) / self.basis.h() <= 1.0
    }

    pub fn warn_on_rate_constraint(&self) {
        if !self.rate_constraint_holds() {
            warn!(
                "h^-1 tau^9 = {:.3e} > 1 (tau = {}, N = {}); strong-rate estimate does not apply",
                self.tau.powi(9) / self.basis.h(),
                self.tau,
                self.n_modes()
            );
        }
    }

    pub fn initial_state(&self) -> SchemeState {
        let coeffs = self.basis.to_spectral(&self.initial).expect("length checked in new");
        SchemeState::new(0, coeffs)
    }

    /// `1 + tau * |u|_{w12}^12`.
    pub fn taming_denominator(&self, u: &Field) -> Result<f64> {
        let w = self.basis.norm(u, Norm::W12)?;
        Ok(1.0 + self.tau * w.powi(12))
    }

    fn taming_from_coeffs(&self, coeffs: &[f64]) -> f64 {
        1.0 + self.tau * self.basis.w12_sq_spectral(coeffs).powi(6)
    }

    /// One step from `state` with spectral noise `dbeta_m` (entry 0 must be 0).
    pub fn step(&self, state: &SchemeState, noise: &SpectralField) -> Result<SchemeState> {
        let n = self.n_modes();
        check_len(n, state.coeffs.len())?;
        check_len(n, noise.len())?;
        if noise.0[0] != 0.0 {
            return Err(Error::InvalidParameter("noise has a nonzero mean mode".into()));
        }
        let mut ws = Workspace::new(n);
        let mut next = state.clone();
        let nodal = self.basis.from_spectral(&state.coeffs)?;
        self.advance(&mut next.coeffs.0, &nodal.0, &noise.0, &mut ws);
        next.step_index += 1;
        if !next.coeffs.is_finite() {
            return Err(Error::NonFinite {
                trajectory: 0,
                step: state.step_index,
            });
        }
        Ok(next)
    }

    /// In-place update of `coeffs` given the nodal values of the same state.
    pub(crate) fn advance(&self, coeffs: &mut [f64], nodal: &[f64], noise: &[f64], ws: &mut Workspace) {
        let denom = self.taming_from_coeffs(coeffs);
        for (d, &u) in ws.drift.iter_mut().zip(nodal) {
            *d = self.drift.eval(u);
        }
        self.basis.to_spectral_into(&ws.drift, &mut ws.drift_hat);
        let lam = self.basis.eigenvalues();
        let scale = self.tau / denom;
        for j in 1..coeffs.len() {
            coeffs[j] = self.decay[j] * (coeffs[j] - scale * lam[j] * ws.drift_hat[j] + self.sigma * noise[j]);
        }
    }
}

pub(crate) struct Workspace {
    pub drift: Vec<f64>,
    pub drift_hat: Vec<f64>,
    pub noise: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            drift: vec![0.0; n],
            drift_hat: vec![0.0; n],
            noise: vec![0.0; n],
        }
    }
}

/// Spectral coordinates of `U_m` together with the step index.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step_index: u64,
    pub coeffs: SpectralField,
    pub mass0: f64,
}

impl SchemeState {
    pub fn new(step_index: u64, coeffs: SpectralField) -> Self {
        let mass0 = coeffs.0[0] / std::f64::consts::PI.sqrt();
        SchemeState {
            step_index,
            coeffs,
            mass0,
        }
    }

    pub fn nodal(&self, basis: &SpectralBasis) -> Result<Field> {
        basis.from_spectral(&self.coeffs)
    }
}

/// Per-step callback. Receives the step index, the state and its nodal values.
pub trait Observer {
    fn observe(&mut self, step: u64, state: &SchemeState, nodal: &Field);
}

impl<F: FnMut(u64, &SchemeState, &Field)> Observer for F {
    fn observe(&mut self, step: u64, state: &SchemeState, nodal: &Field) {
        self(step, state, nodal)
    }
}

/// A running trajectory: state, its nodal values and scratch buffers.
pub struct Trajectory<'a> {
    params: &'a SchemeParams,
    state: SchemeState,
    nodal: Field,
    ws: Workspace,
    trajectory_id: u64,
}

impl<'a> Trajectory<'a> {
    pub fn new(params: &'a SchemeParams, state: SchemeState, trajectory_id: u64) -> Result<Self> {
        check_len(params.n_modes(), state.coeffs.len())?;
        let nodal = state.nodal(params.basis())?;
        Ok(Trajectory {
            params,
            state,
            nodal,
            ws: Workspace::new(params.n_modes()),
            trajectory_id,
        })
    }

    pub fn state(&self) -> &SchemeState {
        &self.state
    }

    pub fn nodal(&self) -> &Field {
        &self.nodal
    }

    pub fn into_state(self) -> SchemeState {
        self.state
    }

    /// Advances one step with spectral noise `noise` (length `N`, entry 0 ignored).
    pub fn advance_with(&mut self, noise: &[f64]) -> Result<()> {
        let Trajectory {
            params,
            state,
            nodal,
            ws,
            trajectory_id,
        } = self;
        params.advance(&mut state.coeffs.0, &nodal.0, noise, ws);
        let failed_at = state.step_index;
        state.step_index += 1;
        params.basis().from_spectral_into(&state.coeffs.0, &mut nodal.0);
        if !nodal.is_finite() || !state.coeffs.is_finite() {
            return Err(Error::NonFinite {
                trajectory: *trajectory_id,
                step: failed_at,
            });
        }
        Ok(())
    }

    /// Advances one step using the increments of `src` at the current step.
    pub fn advance(&mut self, src: &NoiseSource, ratio: u64) -> Result<()> {
        let mut noise = std::mem::take(&mut self.ws.noise);
        let res = src
            .fill_increments(self.state.step_index, ratio, &mut noise)
            .and_then(|_| self.advance_with(&noise));
        self.ws.noise = noise;
        res
    }
}

/// Runs `n_steps` from the initial datum. Observers see steps `0..=n_steps`.
pub fn run_trajectory(
    params: &SchemeParams,
    src: &NoiseSource,
    n_steps: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<SchemeState> {
    run_from(params, src, params.initial_state(), n_steps, observers)
}

/// Continues a trajectory from `state` for `n_steps` more steps.
pub fn run_from(
    params: &SchemeParams,
    src: &NoiseSource,
    state: SchemeState,
    n_steps: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<SchemeState> {
    let ratio = refinement_ratio(params.tau(), src.tau_fine())?;
    if params.n_modes() - 1 > src.n_modes_max() {
        return Err(Error::Incompatible(format!(
            "N = {} exceeds the noise source's {} modes",
            params.n_modes(),
            src.n_modes_max()
        )));
    }
    let end = state.step_index.checked_add(n_steps).ok_or(Error::StepOverflow {
        step: state.step_index,
        ratio: n_steps,
    })?;
    let mut traj = Trajectory::new(params, state, src.trajectory_id())?;
    notify(observers, &traj);
    while traj.state.step_index < end {
        traj.advance(src, ratio)?;
        notify(observers, &traj);
    }
    Ok(traj.into_state())
}

fn notify(observers: &mut [&mut dyn Observer], traj: &Trajectory<'_>) {
    for o in observers.iter_mut() {
        o.observe(traj.state.step_index, &traj.state, &traj.nodal);
    }
}

/// Numerical solution at time `t = m tau`, nodal or interpolated at `points`.
pub fn solution_at(params: &SchemeParams, src: &NoiseSource, t: f64, points: Option<&[f64]>) -> Result<Vec<f64>> {
    let steps = time_to_steps(t, params.tau())?;
    let state = run_trajectory(params, src, steps, &mut [])?;
    let nodal = state.nodal(params.basis())?;
    match points {
        None => Ok(nodal.0),
        Some(xs) => xs.iter().map(|&x| params.basis().interpolate(&nodal, x)).collect(),
    }
}

pub fn time_to_steps(t: f64, tau: f64) -> Result<u64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let m = (t / tau).round();
    if (m * tau - t).abs() <= 1e-9 * tau.max(t) {
        Ok(m as u64)
    } else {
        Err(Error::OffGrid { t, tau })
    }
}
