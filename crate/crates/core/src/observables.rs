//! Functionals of the numerical solution: mass, the bounded test functions
//! `phi_{v,a1,a2}`, the Lyapunov function, and time-average estimators of
//! ergodic limits.
//!
//! All integrals are midpoint sums with weight `pi / N`, the same quadrature
//! that makes the discrete eigenbasis orthonormal.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::grid::{Field, SpectralBasis};
use crate::integrator::{Observer, SchemeState};

/// Spatial mean `(1/pi) int u`.
pub fn mass(u: &Field) -> f64 {
    u.0.iter().sum::<f64>() / u.len() as f64
}

/// Closed-form weight profiles `v` for the test functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Exp,
    ExpNeg,
    Const(f64),
    Cos(u32),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Exp => x.exp(),
            Profile::ExpNeg => (-x).exp(),
            Profile::Const(c) => c,
            Profile::Cos(k) => (k as f64 * x).cos(),
        }
    }
}

/// Descriptor `(v, alpha1, alpha2)` of a test function, independent of `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSpec {
    pub v: Profile,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl TestFunctionSpec {
    pub fn new(v: Profile, alpha1: f64, alpha2: f64) -> Result<Self> {
        if alpha2 == 0.0 || !alpha2.is_finite() || !alpha1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "test function needs finite alpha1 and nonzero alpha2, got ({alpha1}, {alpha2})"
            )));
        }
        Ok(TestFunctionSpec { v, alpha1, alpha2 })
    }

    pub fn bind(&self, basis: &SpectralBasis) -> Result<TestFunction> {
        TestFunction::new(basis, basis.sample(|x| self.v.eval(x)), self.alpha1, self.alpha2)
    }
}

/// `phi(u) = a2 g / (1 + (g / a2)^2)` with
/// `g(v, u, a1) = int v u - a1 (int v) (1/pi int u)`.
///
/// The second term pairs `int v` with the mean of `u`, so for `a1 = 1` the
/// functional only sees the fluctuation `u - mass(u)`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    v: Field,
    alpha1: f64,
    alpha2: f64,
    v_integral: f64,
    weight: f64,
}

impl TestFunction {
    pub fn new(basis: &SpectralBasis, v: Field, alpha1: f64, alpha2: f64) -> Result<Self> {
        check_len(basis.n_modes(), v.len())?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter("test-function weight v is not finite".into()));
        }
        TestFunctionSpec::new(Profile::Const(0.0), alpha1, alpha2)?;
        let weight = basis.h();
        let v_integral = weight * v.0.iter().sum::<f64>();
        Ok(TestFunction {
            v,
            alpha1,
            alpha2,
            v_integral,
            weight,
        })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn g(&self, u: &Field) -> f64 {
        let vu: f64 = self.v.0.iter().zip(&u.0).map(|(a, b)| a * b).sum();
        self.weight * vu - self.alpha1 * self.v_integral * mass(u)
    }

    pub fn phi(&self, u: &Field) -> f64 {
        phi_of_g(self.g(u), self.alpha2)
    }

    /// Sharp bound `a2^2 / 2` on `|phi|`.
    pub fn bound(&self) -> f64 {
        0.5 * self.alpha2 * self.alpha2
    }
}

pub fn phi_of_g(g: f64, alpha2: f64) -> f64 {
    let r = g / alpha2;
    alpha2 * g / (1.0 + r * r)
}

/// `V(u) = sum_{j>=1} c_j^2 / lambda_j + c_0^2 + 1`.
pub fn lyapunov_v(basis: &SpectralBasis, u: &Field) -> Result<f64> {
    let c = basis.to_spectral(u)?;
    Ok(lyapunov_v_spectral(basis, &c.0))
}

pub fn lyapunov_v_spectral(basis: &SpectralBasis, coeffs: &[f64]) -> f64 {
    let lam = basis.eigenvalues();
    let tail: f64 = (1..coeffs.len()).map(|j| coeffs[j] * coeffs[j] / lam[j]).sum();
    tail + coeffs[0] * coeffs[0] + 1.0
}

/// Equal-weight running mean with an optional `(t, average)` history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningAverage {
    pub count: u64,
    pub sum: f64,
    pub history: Vec<(f64, f64)>,
}

impl RunningAverage {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
    }

    pub fn average(&self) -> Result<f64> {
        if self.count == 0 {
            Err(Error::NoSamples)
        } else {
            Ok(self.sum / self.count as f64)
        }
    }

    pub fn record(&mut self, t: f64) {
        if let Ok(a) = self.average() {
            self.history.push((t, a));
        }
    }

    /// Largest `|average(t) - final|` over the second half of the history.
    pub fn half_window_fluctuation(&self) -> Result<f64> {
        let last = self.history.last().ok_or(Error::NoSamples)?;
        let t_half = 0.5 * last.0;
        Ok(self
            .history
            .iter()
            .filter(|(t, _)| *t >= t_half)
            .map(|(_, a)| (a - last.1).abs())
            .fold(0.0, f64::max))
    }
}

/// Single-trajectory time average of a test function, sampled at every step.
#[derive(Debug, Clone)]
pub struct TimeAverage {
    test: TestFunction,
    tau: f64,
    burn_in: u64,
    record_every: u64,
    pub acc: RunningAverage,
}

impl TimeAverage {
    pub fn new(test: TestFunction, tau: f64, burn_in: u64, record_every: u64) -> Self {
        TimeAverage {
            test,
            tau,
            burn_in,
            record_every: record_every.max(1),
            acc: RunningAverage::default(),
        }
    }

    pub fn into_average(self) -> RunningAverage {
        self.acc
    }
}

impl Observer for TimeAverage {
    fn observe(&mut self, step: u64, _state: &SchemeState, nodal: &Field) {
        if step < self.burn_in {
            return;
        }
        self.acc.push(self.test.phi(nodal));
        if (step - self.burn_in) % self.record_every == 0 {
            self.acc.record(step as f64 * self.tau);
        }
    }
}

/// Grand mean of per-trajectory time averages; histories are averaged
/// point-wise and must share their record times.
pub fn ensemble_average(runs: &[RunningAverage]) -> Result<RunningAverage> {
    let first = runs.first().ok_or(Error::EmptyEnsemble)?;
    let mut out = RunningAverage::default();
    for r in runs {
        out.push(r.average()?);
    }
    let len = first.history.len();
    if runs.iter().all(|r| r.history.len() == len) {
        out.history = (0..len)
            .map(|k| {
                let t = first.history[k].0;
                let mean = runs.iter().map(|r| r.history[k].1).sum::<f64>() / runs.len() as f64;
                (t, mean)
            })
            .collect();
    } else {
        return Err(Error::Incompatible("ensemble members have different record times".into()));
    }
    Ok(out)
}

/// `(1/pi) int u` computed from the mean-mode coefficient.
pub fn mass_from_coeff0(c0: f64) -> f64 {
    c0 / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn mass_examples() {
        let b = SpectralBasis::new(40).unwrap();
        assert_abs_diff_eq!(mass(&Field(vec![1.0 / 3.0; 40])), 1.0 / 3.0, epsilon = 1e-15);
        assert!(mass(&b.sample(f64::cos)).abs() <= 1e-12);
        let u0 = b.sample(|x| x.cos() / 3.0 + 1.0 / 3.0);
        assert_abs_diff_eq!(mass(&u0), 1.0 / 3.0, epsilon = 1e-12);
        let c = b.to_spectral(&u0).unwrap();
        assert_abs_diff_eq!(mass_from_coeff0(c.0[0]), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn g_examples() {
        let b = SpectralBasis::new(16).unwrap();
        let ones = Field(vec![1.0; 16]);
        let t1 = TestFunction::new(&b, ones.clone(), 1.0, 2.0).unwrap();
        // int 1 - (int 1)(mean 1) = pi - pi
        assert_abs_diff_eq!(t1.g(&ones), 0.0, epsilon = 1e-13);
        let t0 = TestFunction::new(&b, ones.clone(), 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(t0.g(&ones), PI, epsilon = 1e-13);
        assert_eq!(t1.g(&Field::zeros(16)), 0.0);
    }

    #[test]
    fn g_ignores_mass_when_alpha1_is_one() {
        let b = SpectralBasis::new(32).unwrap();
        let t = TestFunctionSpec::new(Profile::Exp, 1.0, 2.0).unwrap().bind(&b).unwrap();
        let u = b.sample(|x| (2.0 * x).cos() - 0.4 * x.cos());
        let shifted = Field(u.0.iter().map(|x| x + 5.0).collect());
        assert_abs_diff_eq!(t.g(&u), t.g(&shifted), epsilon = 1e-11);
    }

    #[test]
    fn phi_examples() {
        let b = SpectralBasis::new(16).unwrap();
        let t = TestFunctionSpec::new(Profile::Exp, 1.0, 2.0).unwrap().bind(&b).unwrap();
        assert_eq!(t.phi(&Field::zeros(16)), 0.0);
        // Choose u = s * phi_1 so that g = alpha2.
        let phi1 = b.mode(1);
        let g1 = t.g(&phi1);
        let u = Field(phi1.0.iter().map(|x| x * 2.0 / g1).collect());
        assert_abs_diff_eq!(t.g(&u), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.phi(&u), 2.0, epsilon = 1e-12);
        assert_eq!(t.bound(), 2.0);
        assert!(TestFunctionSpec::new(Profile::Exp, 1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let b = SpectralBasis::new(20).unwrap();
        assert_eq!(lyapunov_v(&b, &Field::zeros(20)).unwrap(), 1.0);
        let v1 = lyapunov_v(&b, &b.mode(1)).unwrap();
        assert_abs_diff_eq!(v1, 1.0 + 1.0 / b.eigenvalues()[1], epsilon = 1e-12);
        let c = -0.7;
        assert_abs_diff_eq!(lyapunov_v(&b, &Field(vec![c; 20])).unwrap(), 1.0 + PI * c * c, epsilon = 1e-12);
    }

    #[test]
    fn running_average_examples() {
        let mut r = RunningAverage::default();
        assert_eq!(r.average(), Err(Error::NoSamples));
        r.push(0.0);
        r.push(2.0);
        assert_eq!(r.average().unwrap(), 1.0);
        let mut c = RunningAverage::default();
        for k in 0..10 {
            c.push(0.25);
            c.record(k as f64);
            assert_eq!(c.average().unwrap(), 0.25);
        }
        assert_eq!(c.half_window_fluctuation().unwrap(), 0.0);
    }

    #[test]
    fn ensemble_examples() {
        assert_eq!(ensemble_average(&[]), Err(Error::EmptyEnsemble));
        let mut a = RunningAverage::default();
        a.push(1.0);
        a.push(3.0);
        a.record(1.0);
        let single = ensemble_average(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.average().unwrap(), a.average().unwrap());
        assert_eq!(single.history, a.history);
        let mut b = RunningAverage::default();
        b.push(5.0);
        b.record(1.0);
        let e = ensemble_average(&[a, b]).unwrap();
        assert_eq!(e.average().unwrap(), 3.5);
        assert_eq!(e.history, vec![(1.0, 3.5)]);
    }

    proptest! {
        #[test]
        fn phi_bounded(vals in prop::collection::vec(-50.0f64..50.0, 12), a1 in -2.0f64..2.0, a2 in 0.1f64..5.0) {
            let b = SpectralBasis::new(12).unwrap();
            let t = TestFunctionSpec::new(Profile::ExpNeg, a1, a2).unwrap().bind(&b).unwrap();
            prop_assert!(t.phi(&Field(vals)).abs() <= t.bound() * (1.0 + 1e-12));
        }

        #[test]
        fn phi_lipschitz(
            u in prop::collection::vec(-3.0f64..3.0, 10),
            d in prop::collection::vec(-0.5f64..0.5, 10),
            a1 in -2.0f64..2.0,
            a2 in 0.2f64..4.0,
        ) {
            let b = SpectralBasis::new(10).unwrap();
            let t = TestFunctionSpec::new(Profile::Exp, a1, a2).unwrap().bind(&b).unwrap();
            let u2 = Field(u.iter().zip(&d).map(|(x, y)| x + y).collect());
            let u = Field(u);
            let diff = Field(d);
            let vnorm = b.norm(t.v(), crate::grid::Norm::L2).unwrap();
            // |dphi/dg| <= |a2| and |dg| <= (|v| + |a1| pi |v|) |du|
            let k = a2 * (vnorm + a1.abs() * PI * vnorm);
            let lhs = (t.phi(&u) - t.phi(&u2)).abs();
            prop_assert!(lhs <= k * b.norm(&diff, crate::grid::Norm::L2).unwrap() + 1e-12);
        }
    }
}
