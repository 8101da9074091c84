//! Periodic grid, discrete Fourier transforms, the exact linear propagator
//! and spectral differentiation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::hankel::ScatteringField;

/// Sampling of the periodic domain `[-L/2, L/2)` and of the quadrature
/// interval `[-L/2, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Domain length `L`.
    pub length: f64,
    /// Number of spatial samples, a power of two.
    pub n_x: usize,
    /// Number of quadrature nodes on `[-L/2, 0]`.
    pub n_quad: usize,
    pub block_rows: usize,
    pub block_cols: usize,
}

impl GridConfig {
    pub fn new(length: f64, n_x: usize, n_quad: usize, block_rows: usize, block_cols: usize) -> Result<Self> {
        let grid = Self {
            length,
            n_x,
            n_quad,
            block_rows,
            block_cols,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Scalar grid with the aligned quadrature `n_quad = n_x / 2`.
    pub fn scalar(length: f64, n_x: usize) -> Result<Self> {
        Self::new(length, n_x, n_x / 2, 1, 1)
    }

    /// `L = 40`, `2^8` modes, `2^7` quadrature nodes, scalar blocks.
    pub fn reference() -> Self {
        Self {
            length: 40.0,
            n_x: 256,
            n_quad: 128,
            block_rows: 1,
            block_cols: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {}", self.length)));
        }
        if self.n_x < 4 || !self.n_x.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_x must be a power of two >= 4, got {}",
                self.n_x
            )));
        }
        if self.n_quad < 2 {
            return Err(Error::InvalidGrid(format!("n_quad must be >= 2, got {}", self.n_quad)));
        }
        if self.block_rows == 0 || self.block_cols == 0 {
            return Err(Error::InvalidGrid("block dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn with_block_shape(mut self, rows: usize, cols: usize) -> Self {
        self.block_rows = rows;
        self.block_cols = cols;
        self
    }

    pub fn with_n_quad(mut self, n_quad: usize) -> Self {
        self.n_quad = n_quad;
        self
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn x_points(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    /// Quadrature step `(L/2) / n_quad`.
    #[inline]
    pub fn quad_step(&self) -> f64 {
        0.5 * self.length / self.n_quad as f64
    }

    /// When the quadrature step is an integer multiple `r` of `dx`, every
    /// Hankel argument lands on the x-grid and `Some(r)` is returned.
    pub fn aligned_ratio(&self) -> Option<usize> {
        if self.n_x % (2 * self.n_quad) == 0 {
            Some(self.n_x / (2 * self.n_quad))
        } else {
            None
        }
    }
}

/// Coefficients of `d(∂) = μ₂∂² + μ₃∂³ + μ₄∂⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionCoefficients {
    pub mu2: Complex64,
    pub mu3: Complex64,
    pub mu4: Complex64,
}

impl DispersionCoefficients {
    pub fn new(mu2: Complex64, mu3: Complex64, mu4: Complex64) -> Self {
        Self { mu2, mu3, mu4 }
    }

    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new(z, z, z)
    }

    /// `μ₂ = -i`, `μ₃ = 1`, `μ₄ = i`.
    pub fn reference() -> Self {
        Self::new(Complex64::new(0.0, -1.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0))
    }

    /// Coefficients of the companion equation, `(-μ₂, μ₃, -μ₄)`.
    pub fn tilde(&self) -> Self {
        Self::new(-self.mu2, self.mu3, -self.mu4)
    }

    /// Symbol `d(iK)` for a real wavenumber `K`.
    #[inline]
    pub fn symbol(&self, k: f64) -> Complex64 {
        let k2 = k * k;
        // (iK)^2 = -K^2, (iK)^3 = -iK^3, (iK)^4 = K^4
        -self.mu2 * k2 + self.mu3 * Complex64::new(0.0, -k2 * k) + self.mu4 * (k2 * k2)
    }

    pub fn has_dispersion_property(&self) -> bool {
        check_dispersion_property(self)
    }
}

/// Exact test on the coefficients: `μ₂`, `μ₄` imaginary and `μ₃` real.
pub fn check_dispersion_property(c: &DispersionCoefficients) -> bool {
    c.mu2.re == 0.0 && c.mu3.im == 0.0 && c.mu4.re == 0.0
}

/// Fourier multipliers `2πik/L` in FFT order, stored by their real part
/// `K_k = 2πk/L`. The Nyquist mode carries `k = -n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveNumbers {
    real: Vec<f64>,
}

impl WaveNumbers {
    pub fn new(n: usize, length: f64) -> Self {
        let scale = 2.0 * PI / length;
        let real = (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k as isize } else { k as isize - n as isize };
                scale * signed as f64
            })
            .collect();
        Self { real }
    }

    pub fn for_grid(grid: &GridConfig) -> Self {
        Self::new(grid.n_x, grid.length)
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    /// `K_k`, the imaginary part of the multiplier.
    #[inline]
    pub fn real(&self, k: usize) -> f64 {
        self.real[k]
    }

    /// The multiplier `κ_k = i K_k`.
    #[inline]
    pub fn kappa(&self, k: usize) -> Complex64 {
        Complex64::new(0.0, self.real[k])
    }

    /// `κ_k^order`.
    pub fn kappa_pow(&self, k: usize, order: u32) -> Complex64 {
        let kk = self.real[k];
        match order % 4 {
            0 => Complex64::new(kk.powi(order as i32), 0.0),
            1 => Complex64::new(0.0, kk.powi(order as i32)),
            2 => Complex64::new(-kk.powi(order as i32), 0.0),
            _ => Complex64::new(0.0, -kk.powi(order as i32)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.real.iter().map(|&k| Complex64::new(0.0, k))
    }
}

/// `exp(t (μ₂κ² + μ₃κ³ + μ₄κ⁴))` per mode.
pub fn propagator_multipliers(c: &DispersionCoefficients, t: f64, kappa: &WaveNumbers) -> Vec<Complex64> {
    kappa.real.iter().map(|&k| (c.symbol(k) * t).exp()).collect()
}

/// Forward and inverse FFT plans for one transform length. The inverse is
/// normalised by `1/n`.
#[derive(Clone)]
pub struct Transform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Entrywise forward transform of a block field.
    pub fn forward_field(&self, field: &[Block]) -> Vec<Block> {
        self.map_entries(field, |data| self.forward(data))
    }

    pub fn inverse_field(&self, field: &[Block]) -> Vec<Block> {
        self.map_entries(field, |data| self.inverse(data))
    }

    /// Applies `op` to the series of each block entry in turn.
    fn map_entries(&self, field: &[Block], op: impl Fn(&mut [Complex64])) -> Vec<Block> {
        assert_eq!(field.len(), self.n, "field length does not match the transform");
        let (rows, cols) = field[0].shape();
        let mut out: Vec<Block> = vec![Block::zeros(rows, cols); self.n];
        let mut series = vec![Complex64::new(0.0, 0.0); self.n];
        for e in 0..rows * cols {
            for (s, b) in series.iter_mut().zip(field) {
                *s = b.entries()[e];
            }
            op(&mut series);
            for (s, b) in series.iter().zip(out.iter_mut()) {
                b.entries_mut()[e] = *s;
            }
        }
        out
    }
}

/// Multiplies each mode of a spectrum by a scalar.
pub(crate) fn apply_multipliers(spectrum: &mut [Block], multipliers: &[Complex64]) {
    for (b, &m) in spectrum.iter_mut().zip(multipliers) {
        for z in b.entries_mut() {
            *z *= m;
        }
    }
}

/// Propagates block samples by `exp(t d(∂))` in one step.
pub fn evolve_samples(
    samples: &[Block],
    grid: &GridConfig,
    t: f64,
    c: &DispersionCoefficients,
) -> Vec<Block> {
    let transform = Transform::new(grid.n_x);
    let multipliers = propagator_multipliers(c, t, &WaveNumbers::for_grid(grid));
    let mut spectrum = transform.forward_field(samples);
    apply_multipliers(&mut spectrum, &multipliers);
    transform.inverse_field(&spectrum)
}

/// `p(·, p0.time + t)` from `p0` by the closed-form propagator.
pub fn evolve_scattering(p0: &ScatteringField, t: f64, c: &DispersionCoefficients) -> ScatteringField {
    ScatteringField {
        grid: p0.grid,
        time: p0.time + t,
        samples: evolve_samples(&p0.samples, &p0.grid, t, c),
    }
}

/// Entrywise `κ^order` multiplication in Fourier space.
pub fn spectral_derivative(f: &[Block], order: u32, grid: &GridConfig) -> Result<Vec<Block>> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidDerivativeOrder(order));
    }
    if f.len() != grid.n_x {
        return Err(Error::InvalidGrid(format!(
            "field has {} samples, grid has {}",
            f.len(),
            grid.n_x
        )));
    }
    let transform = Transform::new(grid.n_x);
    let kappa = WaveNumbers::for_grid(grid);
    Ok(derivative_with(&transform, &kappa, f, order))
}

pub(crate) fn derivative_with(transform: &Transform, kappa: &WaveNumbers, f: &[Block], order: u32) -> Vec<Block> {
    let multipliers: Vec<Complex64> = (0..kappa.len()).map(|k| kappa.kappa_pow(k, order)).collect();
    let mut spectrum = transform.forward_field(f);
    apply_multipliers(&mut spectrum, &multipliers);
    transform.inverse_field(&spectrum)
}

/// Discrete L² norm `sqrt(dx Σ |f_j|²)` of a block field (Frobenius in the
/// block entries).
pub fn l2_norm(f: &[Block], grid: &GridConfig) -> f64 {
    (grid.dx() * f.iter().map(Block::norm_sqr).sum::<f64>()).sqrt()
}
