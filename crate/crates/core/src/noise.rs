//! Addressable Brownian increments for the spectral noise modes.
//!
//! Every fine increment `dbeta_{j,k}` (mode `j >= 1`, fine step `k`) is a pure
//! function of `(seed, trajectory_id, j, k)`. The generator is ChaCha12 used as
//! a counter-mode function: the key holds the seed and trajectory id, the
//! 64-bit stream number is the fine step, and mode `j` owns words
//! `4(j-1)..4j` of that stream. The two 64-bit words are turned into a
//! standard normal by the cosine branch of Box-Muller, scaled by
//! `sqrt(tau_fine)` and rounded to the dyadic grid `2^-40`.
//!
//! The rounding makes every increment an integer multiple of `2^-40`, so sums
//! of increments are exact in `f64` while their magnitude stays below `2^13`.
//! Coarse increments are therefore independent of summation order, which is
//! what lets a run at step `r * tau_fine` and a run at `tau_fine` see exactly
//! the same Brownian path.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::{SpectralBasis, SpectralField};

const QUANTUM_EXP: i32 = 40;
const KEY_TAG: u64 = 0x5343_4845_6e6f_6973; // "SCHEnois"

#[derive(Debug, Clone)]
pub struct NoiseSource {
    seed: u64,
    trajectory_id: u64,
    tau_fine: f64,
    n_modes_max: usize,
    sqrt_tau: f64,
    base: ChaCha12Rng,
}

impl NoiseSource {
    /// `n_modes_max` is the largest mode index the source will emit, so it can
    /// drive any basis with `n_modes <= n_modes_max + 1`.
    pub fn new(seed: u64, trajectory_id: u64, tau_fine: f64, n_modes_max: usize) -> Result<Self> {
        if !(tau_fine > 0.0 && tau_fine.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_fine must be positive, got {tau_fine}")));
        }
        if n_modes_max == 0 {
            return Err(Error::InvalidParameter("noise source needs at least one mode".into()));
        }
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&trajectory_id.to_le_bytes());
        key[16..24].copy_from_slice(&KEY_TAG.to_le_bytes());
        Ok(NoiseSource {
            seed,
            trajectory_id,
            tau_fine,
            n_modes_max,
            sqrt_tau: tau_fine.sqrt(),
            base: ChaCha12Rng::from_seed(key),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory_id(&self) -> u64 {
        self.trajectory_id
    }

    pub fn tau_fine(&self) -> f64 {
        self.tau_fine
    }

    pub fn n_modes_max(&self) -> usize {
        self.n_modes_max
    }

    /// Same seed and fine resolution, different trajectory.
    pub fn with_trajectory(&self, trajectory_id: u64) -> Self {
        NoiseSource::new(self.seed, trajectory_id, self.tau_fine, self.n_modes_max)
            .expect("parameters already validated")
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode > self.n_modes_max {
            Err(Error::NoiseMode {
                mode,
                max: self.n_modes_max,
            })
        } else {
            Ok(())
        }
    }

    pub fn fine_increment(&self, mode: usize, step: u64) -> Result<f64> {
        self.check_mode(mode)?;
        let mut rng = self.base.clone();
        rng.set_stream(step);
        rng.set_word_pos(4 * (mode as u128 - 1));
        Ok(self.draw(&mut rng))
    }

    /// Writes the fine increments of modes `1..=out.len()` at `step`.
    pub(crate) fn fine_increments_into(&self, step: u64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.n_modes_max);
        let mut rng = self.base.clone();
        rng.set_stream(step);
        rng.set_word_pos(0);
        for o in out.iter_mut() {
            *o = self.draw(&mut rng);
        }
    }

    pub fn coarse_increment(&self, mode: usize, coarse_step: u64, ratio: u64) -> Result<f64> {
        self.check_mode(mode)?;
        let first = first_fine_step(coarse_step, ratio)?;
        let mut acc = 0.0;
        for k in first..first + ratio {
            acc += self.fine_increment(mode, k)?;
        }
        Ok(acc)
    }

    /// Spectral coefficients of `dbeta_m` for `basis`: entry 0 is zero, entry
    /// `j` is the coarse increment of mode `j`. A smaller basis sees a
    /// truncation of the same modes.
    pub fn increment_field(&self, basis: &SpectralBasis, coarse_step: u64, ratio: u64) -> Result<SpectralField> {
        let mut out = vec![0.0; basis.n_modes()];
        self.fill_increments(coarse_step, ratio, &mut out)?;
        Ok(SpectralField(out))
    }

    /// Like [`increment_field`](Self::increment_field) into a caller buffer
    /// whose length is the mode count `N`.
    pub fn fill_increments(&self, coarse_step: u64, ratio: u64, out: &mut [f64]) -> Result<()> {
        let n = out.len();
        if n == 0 || n - 1 > self.n_modes_max {
            return Err(Error::Incompatible(format!(
                "basis with {n} modes needs noise modes 1..{}, source provides 1..={}",
                n.saturating_sub(1),
                self.n_modes_max
            )));
        }
        let first = first_fine_step(coarse_step, ratio)?;
        out.fill(0.0);
        let mut buf = vec![0.0; n - 1];
        for k in first..first + ratio {
            self.fine_increments_into(k, &mut buf);
            for (o, b) in out[1..].iter_mut().zip(&buf) {
                *o += b;
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        let a = rng.next_u64();
        let b = rng.next_u64();
        quantize(standard_normal(a, b) * self.sqrt_tau)
    }
}

fn first_fine_step(coarse_step: u64, ratio: u64) -> Result<u64> {
    if ratio == 0 {
        return Err(Error::InvalidParameter("refinement ratio must be >= 1".into()));
    }
    coarse_step
        .checked_mul(ratio)
        .and_then(|f| f.checked_add(ratio).map(|_| f))
        .ok_or(Error::StepOverflow {
            step: coarse_step,
            ratio,
        })
}

/// Box-Muller, cosine branch. `u1` in `(0, 1]`, `u2` in `[0, 1)`.
fn standard_normal(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn quantize(x: f64) -> f64 {
    let s = (2.0f64).powi(QUANTUM_EXP);
    (x * s).round() / s
}

/// Integer ratio `coarse / fine`, if the coarse step is a whole multiple.
pub fn refinement_ratio(coarse: f64, fine: f64) -> Result<u64> {
    let r = coarse / fine;
    let k = r.round();
    if k >= 1.0 && (r - k).abs() <= 1e-9 * k {
        Ok(k as u64)
    } else {
        Err(Error::Incompatible(format!(
            "step {coarse} is not an integer multiple of the fine step {fine}"
        )))
    }
}
