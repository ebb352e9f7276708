//! Spatial discretization on the midpoint grid of `[0, pi]`.
//!
//! The discrete Neumann Laplacian `A_N` is the tridiagonal matrix
//!
//! ```text
//! A_N = (N^2 / pi^2) * tridiag(1, -2, 1)   with end rows (-1, 1) and (1, -1)
//! ```
//!
//! Its eigenvectors are the cosine modes sampled at the midpoints
//! `x_i = (i - 1/2) h`, `h = pi / N`, with eigenvalues
//! `-lambda_{N,j} = -4 N^2 pi^-2 sin^2(j pi / 2N)`. They are orthonormal under
//! the quadrature inner product `<u, v> = (pi / N) sum_i u_i v_i`, which is the
//! weight used for every discrete norm in this crate.
//!
//! Transforms are dense `N x N` products. For the resolutions used here
//! (N <= 1024) that is cheaper to reason about than a fast cosine transform and
//! keeps the eigen-basis explicit.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

/// Nodal values at the `N` grid midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

/// Coordinates in the discrete eigenbasis `{phi_{N,j}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField(vec![0.0; n])
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut c = vec![0.0; n];
        c[k] = 1.0;
        SpectralField(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Discrete norms on `l^2_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L2,
    LInf,
    Lp(f64),
    /// Discrete `W^{1,2}`: `sqrt(|u|_{l2}^2 + |(-A_N)^{1/2} u|_{l2}^2)`.
    W12,
}

/// Grid, eigenvalues and transform matrices for one resolution `N`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    n: usize,
    h: f64,
    grid: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Row-major `C[i][j] = phi_j(x_i)`.
    synthesis: Vec<f64>,
    /// Row-major `(pi / N) C[i][j]` stored at `[j][i]`.
    analysis: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::TooFewModes(n_modes));
        }
        let n = n_modes;
        let nf = n as f64;
        let h = PI / nf;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let eigenvalues: Vec<f64> = (0..n)
            .map(|j| {
                let s = (j as f64 * PI / (2.0 * nf)).sin();
                4.0 * nf * nf / (PI * PI) * s * s
            })
            .collect();

        let c0 = (1.0 / PI).sqrt();
        let cj = (2.0 / PI).sqrt();
        let mut synthesis = vec![0.0; n * n];
        let mut analysis = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let phi = if j == 0 { c0 } else { cj * cos_quarter_turns(j * (2 * i + 1), n) };
                synthesis[i * n + j] = phi;
                analysis[j * n + i] = h * phi;
            }
        }
        Ok(SpectralBasis {
            n,
            h,
            grid,
            eigenvalues,
            synthesis,
            analysis,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `phi_{N,j}(x_i)`.
    pub fn basis_entry(&self, i: usize, j: usize) -> f64 {
        self.synthesis[i * self.n + j]
    }

    /// Column `j` of the basis matrix, i.e. the nodal samples of `phi_{N,j}`.
    pub fn mode(&self, j: usize) -> Field {
        Field((0..self.n).map(|i| self.basis_entry(i, j)).collect())
    }

    /// Samples a function at the grid midpoints.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.grid.iter().map(|&x| f(x)).collect())
    }

    /// `A_N u` by the three-point stencil with Neumann end rows.
    ///
    /// Deliberately independent of the eigen-decomposition; tests compare the
    /// two routes.
    pub fn apply_laplacian(&self, u: &Field) -> Result<Field> {
        check_len(self.n, u.len())?;
        let n = self.n;
        let scale = (n * n) as f64 / (PI * PI);
        let v = &u.0;
        let mut out = vec![0.0; n];
        out[0] = scale * (v[1] - v[0]);
        for i in 1..n - 1 {
            out[i] = scale * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
        }
        out[n - 1] = scale * (v[n - 2] - v[n - 1]);
        Ok(Field(out))
    }

    pub fn to_spectral(&self, u: &Field) -> Result<SpectralField> {
        check_len(self.n, u.len())?;
        let mut out = vec![0.0; self.n];
        self.to_spectral_into(&u.0, &mut out);
        Ok(SpectralField(out))
    }

    pub fn from_spectral(&self, c: &SpectralField) -> Result<Field> {
        check_len(self.n, c.len())?;
        let mut out = vec![0.0; self.n];
        self.from_spectral_into(&c.0, &mut out);
        Ok(Field(out))
    }

    /// Unchecked transform into a caller-owned buffer (hot loop of the stepper).
    pub(crate) fn to_spectral_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.analysis[j * n..(j + 1) * n];
            *o = dot(row, u);
        }
    }

    pub(crate) fn from_spectral_into(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.synthesis[i * n..(i + 1) * n];
            *o = dot(row, c);
        }
    }

    /// Entry `j` is `exp(-lambda_j^2 t)`; entry 0 is exactly 1.
    pub fn semigroup_factor(&self, t: f64) -> Result<Vec<f64>> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, &l)| if j == 0 { 1.0 } else { (-l * l * t).exp() })
            .collect())
    }

    pub fn norm(&self, u: &Field, kind: Norm) -> Result<f64> {
        check_len(self.n, u.len())?;
        let w = self.h;
        Ok(match kind {
            Norm::L2 => (w * u.0.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            Norm::LInf => u.0.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Norm::Lp(p) => {
                if !(p >= 1.0) {
                    return Err(Error::InvalidParameter(format!("l_p norm needs p >= 1, got {p}")));
                }
                (w * u.0.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
            }
            Norm::W12 => {
                let l2sq = w * u.0.iter().map(|v| v * v).sum::<f64>();
                let c = self.to_spectral(u)?;
                (l2sq + self.gradient_energy(&c.0)).sqrt()
            }
        })
    }

    /// `sum_j lambda_j c_j^2`, the squared `l2` norm of `(-A_N)^{1/2} u`.
    pub(crate) fn gradient_energy(&self, coeffs: &[f64]) -> f64 {
        self.eigenvalues
            .iter()
            .zip(coeffs)
            .map(|(l, c)| l * c * c)
            .sum()
    }

    /// Squared `w^{1,2}_N` norm from spectral coordinates, using Parseval for
    /// the `l2` part.
    pub(crate) fn w12_sq_spectral(&self, coeffs: &[f64]) -> f64 {
        self.eigenvalues
            .iter()
            .zip(coeffs)
            .map(|(l, c)| (1.0 + l) * c * c)
            .sum()
    }

    /// Piecewise-linear interpolant `P_N u` evaluated at `x`: constant on
    /// `[0, x_1]` and `[x_N, pi]`, linear between midpoints.
    pub fn interpolate(&self, u: &Field, x: f64) -> Result<f64> {
        check_len(self.n, u.len())?;
        if !(0.0..=PI).contains(&x) {
            return Err(Error::OutsideDomain(x));
        }
        Ok(self.interpolate_unchecked(&u.0, x))
    }

    pub(crate) fn interpolate_unchecked(&self, v: &[f64], x: f64) -> f64 {
        let n = self.n;
        if x <= self.grid[0] {
            return v[0];
        }
        if x >= self.grid[n - 1] {
            return v[n - 1];
        }
        let s = x / self.h - 0.5;
        let i = (s.floor() as usize).min(n - 2);
        let xi = self.grid[i];
        if x == xi {
            return v[i];
        }
        if x == self.grid[i + 1] {
            return v[i + 1];
        }
        v[i] + (x - xi) / self.h * (v[i + 1] - v[i])
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating
    // across the whole row.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `cos(k pi / (2 n))` with the argument reduced exactly in integers, so the
/// high modes carry no error from evaluating `cos` at large arguments.
fn cos_quarter_turns(k: usize, n: usize) -> f64 {
    let k = k % (4 * n);
    let (r, neg) = match k / n {
        0 => (k, false),
        1 => (2 * n - k, true),
        2 => (k - 2 * n, true),
        _ => (4 * n - k, false),
    };
    // r in [0, n]: use the sine of the complement near pi/2.
    let v = if 2 * r <= n {
        (r as f64 * PI / (2.0 * n as f64)).cos()
    } else {
        ((n - r) as f64 * PI / (2.0 * n as f64)).sin()
    };
    if neg {
        -v
    } else {
        v
    }
}
