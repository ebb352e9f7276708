//! Quick invariant suite behind the `verify` command.

use std::sync::Arc;

use crate::checkpoint::{decode, encode, RunIdentity};
use crate::config::{parse_config, RunConfig};
use crate::error::Result;
use crate::grid::{Field, SpectralBasis, SpectralField};
use crate::integrator::{run_trajectory, DriftSpec, InitialProfile, SchemeParams};
use crate::noise::NoiseSource;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn benchmark_params(n: usize, tau: f64, sigma: f64) -> Result<SchemeParams> {
    let b = Arc::new(SpectralBasis::new(n)?);
    let init = InitialProfile {
        terms: vec![(1.0 / 3.0, 0), (1.0 / 3.0, 1)],
    }
    .sample(&b);
    SchemeParams::new(tau, b, sigma, DriftSpec::benchmark(), init, false)
}

/// Runs every check with noise drawn from `seed`; `cfg` supplies the drift
/// for the dissipativity check.
pub fn run_suite(cfg: &RunConfig) -> Vec<CheckResult> {
    let seed = cfg.seed;
    vec![
        check("eigen-structure", || {
            let mut worst_res = 0.0f64;
            let mut worst_gram = 0.0f64;
            for n in [8, 64] {
                let b = SpectralBasis::new(n)?;
                for j in 0..n {
                    let phi = b.mode(j);
                    let lap = b.apply_laplacian(&phi)?;
                    let lam = b.eigenvalues()[j];
                    let r: f64 = lap.0.iter().zip(&phi.0).map(|(a, p)| (a + lam * p).powi(2)).sum();
                    worst_res = worst_res.max((b.h() * r).sqrt());
                    for k in 0..n {
                        let ip: f64 = b.h() * phi.0.iter().zip(&b.mode(k).0).map(|(a, c)| a * c).sum::<f64>();
                        worst_gram = worst_gram.max((ip - if j == k { 1.0 } else { 0.0 }).abs());
                    }
                }
            }
            Ok((
                worst_res <= 1e-10 && worst_gram <= 1e-12,
                format!("max residual {worst_res:.2e}, max Gram deviation {worst_gram:.2e}"),
            ))
        }),
        check("spectral-stencil-equivalence", || {
            let b = SpectralBasis::new(32)?;
            let src = NoiseSource::new(seed, 0, 1.0, 31)?;
            let u = Field((0..32).map(|i| src.fine_increment(1 + i % 31, i as u64)).collect::<Result<_>>()?);
            let via_stencil = b.apply_laplacian(&u)?;
            let mut c = b.to_spectral(&u)?;
            for (cj, lam) in c.0.iter_mut().zip(b.eigenvalues()) {
                *cj *= -lam;
            }
            let via_spectral = b.from_spectral(&c)?;
            let scale = via_stencil.0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let d = via_stencil
                .0
                .iter()
                .zip(&via_spectral.0)
                .fold(0.0f64, |m, (a, s)| m.max((a - s).abs()));
            Ok((d <= 1e-11 * scale, format!("max relative difference {:.2e}", d / scale)))
        }),
        check("mass-conservation", || {
            let p = benchmark_params(64, 1e-2, 1.0)?;
            let src = NoiseSource::new(seed, 0, 1e-2, 63)?;
            let m0 = p.initial_state().mass0;
            let mut worst = 0.0f64;
            let mut prev = m0;
            let mut obs = |_: u64, s: &crate::integrator::SchemeState, u: &Field| {
                let m = crate::observables::mass(u);
                worst = worst.max(((m - prev) / m0).abs());
                prev = m;
                let _ = s;
            };
            run_trajectory(&p, &src, 1000, &mut [&mut obs])?;
            Ok((worst <= 1e-12, format!("max per-step relative drift {worst:.2e} over 1000 steps")))
        }),
        check("linear-oracle", || {
            let n = 16;
            let tau = 1e-2;
            let a2 = 0.5;
            let b = Arc::new(SpectralBasis::new(n)?);
            let init = InitialProfile {
                terms: vec![(0.2, 0), (0.5, 1), (-0.3, 3)],
            }
            .sample(&b);
            let p = SchemeParams::new(tau, b.clone(), 1.0, DriftSpec::linear(a2), init, true)?;
            let src = NoiseSource::new(seed, 0, tau, n - 1)?;
            let lam = b.eigenvalues().to_vec();
            let mut c = p.initial_state().coeffs.0;
            let mut dw = vec![0.0; n];
            for m in 0..200 {
                src.fill_increments(m, 1, &mut dw)?;
                let w: f64 = c.iter().zip(&lam).map(|(x, l)| (1.0 + l) * x * x).sum();
                let d = 1.0 + tau * w.powi(6);
                for j in 1..n {
                    c[j] = (-lam[j] * lam[j] * tau).exp() * (c[j] - tau * lam[j] * a2 * c[j] / d + dw[j]);
                }
            }
            let s = run_trajectory(&p, &src, 200, &mut [])?;
            let diff = s.coeffs.0.iter().zip(&c).fold(0.0f64, |m, (a, o)| m.max((a - o).abs()));
            Ok((diff <= 1e-12, format!("max coefficient difference {diff:.2e} after 200 steps")))
        }),
        check("noise-refinement", || {
            let src = NoiseSource::new(seed, 3, 1.0 / 64.0, 8)?;
            let mut ok = true;
            for r in [2u64, 4, 8] {
                for m in 0..8 {
                    for j in 1..=8 {
                        let sum = (0..r).map(|k| src.fine_increment(j, m * r + k)).sum::<Result<f64>>()?;
                        ok &= sum.to_bits() == src.coarse_increment(j, m, r)?.to_bits();
                        let mid = (0..r / 2).map(|k| src.coarse_increment(j, m * r / 2 + k, 2)).sum::<Result<f64>>()?;
                        ok &= r == 2 || mid.to_bits() == sum.to_bits();
                    }
                }
            }
            Ok((ok, "fine, intermediate and coarse sums agree bit for bit".into()))
        }),
        check("mode-sharing", || {
            let coarse = NoiseSource::new(seed, 0, 0.01, 7)?;
            let fine = NoiseSource::new(seed, 0, 0.01, 63)?;
            let b8 = SpectralBasis::new(8)?;
            let b64 = SpectralBasis::new(64)?;
            let mut ok = true;
            for m in 0..16 {
                let a: SpectralField = coarse.increment_field(&b8, m, 1)?;
                let z: SpectralField = fine.increment_field(&b64, m, 1)?;
                ok &= a.0[1..8].iter().zip(&z.0[1..8]).all(|(x, y)| x.to_bits() == y.to_bits());
            }
            Ok((ok, "modes 1..7 identical for N=8 and N=64".into()))
        }),
        check("taming-denominator", || {
            let p = benchmark_params(16, 0.1, 1.0)?;
            let u = Field(vec![2.0; 16]);
            let d = p.taming_denominator(&u)?;
            let zero = p.taming_denominator(&Field(vec![0.0; 16]))?;
            Ok((d >= 1.0 && zero == 1.0, format!("D(2) = {d:.4e}, D(0) = {zero}")))
        }),
        check("checkpoint-round-trip", || {
            let p = benchmark_params(16, 0.01, 1.0)?;
            let src = NoiseSource::new(seed, 0, 0.01, 15)?;
            let s = run_trajectory(&p, &src, 50, &mut [])?;
            let id = RunIdentity::of(&p, seed, 0);
            let (id2, s2) = decode(&encode(&id, &s))?;
            Ok((id == id2 && s == s2, "state restored exactly".into()))
        }),
        check("config-round-trip", || {
            let again = parse_config(&cfg.to_text())?;
            Ok((&again == cfg, format!("hash {}", &cfg.content_hash()[..12])))
        }),
        check("drift-dissipativity", || {
            let lambda1 = 1.0;
            let d = cfg.drift.dissipativity(cfg.lf_radius, lambda1, 10_000);
            if !d.holds {
                log::warn!("drift fails L_f < lambda_1 on [-{r}, {r}]", r = cfg.lf_radius);
            }
            // Advisory only.
            Ok((
                true,
                format!(
                    "L_f = {:.4} vs lambda_1 = {lambda1} on [-{}, {}]: {}",
                    d.l_f,
                    cfg.lf_radius,
                    cfg.lf_radius,
                    if d.holds { "holds" } else { "violated (warning)" }
                ),
            ))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn suite_passes_for_defaults() {
        let cfg = RunConfig::defaults(Command::Verify);
        for r in run_suite(&cfg) {
            assert!(r.passed, "{}", r.line());
        }
    }
}
