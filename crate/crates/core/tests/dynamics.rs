//! Statistical checks on the long-run behaviour of the scheme.

use std::sync::Arc;

use rayon::prelude::*;

use sche::integrator::run_trajectory;
use sche::observables::lyapunov_v_spectral;
use sche::{DriftSpec, Field, InitialProfile, NoiseSource, SchemeParams, SchemeState, SpectralBasis};

fn params(n: usize, tau: f64, initial: &InitialProfile) -> SchemeParams {
    let b = Arc::new(SpectralBasis::new(n).unwrap());
    let u0 = initial.sample(&b);
    SchemeParams::new(tau, b, 1.0, DriftSpec::benchmark(), u0, false).unwrap()
}

/// Coefficients of modes `1..=3` at every `every`-th step, per trajectory.
fn ensemble_coeffs(p: &SchemeParams, seed: u64, runs: u64, steps: u64, every: u64) -> Vec<Vec<[f64; 3]>> {
    let n = p.n_modes();
    (0..runs)
        .into_par_iter()
        .map(|id| {
            let src = NoiseSource::new(seed, id, p.tau(), n - 1).unwrap();
            let mut out = Vec::new();
            let mut obs = |step: u64, s: &SchemeState, _: &Field| {
                if step > 0 && step % every == 0 {
                    out.push([s.coeffs.0[1], s.coeffs.0[2], s.coeffs.0[3]]);
                }
            };
            run_trajectory(p, &src, steps, &mut [&mut obs]).unwrap();
            out
        })
        .collect()
}

#[test]
fn constant_symmetric_mass_keeps_low_modes_centred() {
    let p = params(16, 0.01, &InitialProfile::constant(1.0 / 3.0));
    let runs = 1000;
    let paths = ensemble_coeffs(&p, 21, runs, 200, 20);
    let checks = paths[0].len();
    for k in 0..checks {
        for j in 0..3 {
            let xs: Vec<f64> = paths.iter().map(|p| p[k][j]).collect();
            let mean = xs.iter().sum::<f64>() / runs as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
            let se = (var / runs as f64).sqrt();
            assert!(mean.abs() <= 4.0 * se, "check {k}, mode {}: mean {mean:e}, se {se:e}", j + 1);
        }
    }
}

#[test]
fn lyapunov_drift_contracts() {
    let n = 16;
    let tau = 0.01;
    let initial = InitialProfile {
        terms: vec![(1.0 / 3.0, 0), (2.0, 1), (1.0, 2)],
    };
    let p = params(n, tau, &initial);
    let steps = 300u64;
    let runs = 200u64;
    let sums: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|id| {
            let src = NoiseSource::new(22, id, tau, n - 1).unwrap();
            let mut v = Vec::with_capacity(steps as usize + 1);
            let mut obs = |_: u64, s: &SchemeState, _: &Field| v.push(lyapunov_v_spectral(p.basis(), &s.coeffs.0));
            run_trajectory(&p, &src, steps, &mut [&mut obs]).unwrap();
            v
        })
        .collect();
    let means: Vec<f64> = (0..=steps as usize)
        .map(|m| sums.iter().map(|v| v[m]).sum::<f64>() / runs as f64)
        .collect();
    let pts: Vec<(f64, f64)> = means.windows(2).map(|w| (w[0], w[1])).collect();
    let slope = sche::experiments::least_squares_slope(&pts);
    let bound = (-2.0 * p.basis().eigenvalues()[1] * tau).exp() + 0.05;
    assert!(slope <= bound, "slope {slope} exceeds {bound}");
    assert!(means[steps as usize] < means[0]);
}
