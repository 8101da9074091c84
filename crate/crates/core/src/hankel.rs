//! Scattering data on the periodic grid, its companion field and Hankel
//! kernel evaluation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::spectral::{evolve_samples, l2_norm, DispersionCoefficients, GridConfig};

/// Matrix-valued `p(x, t)` sampled at the `n_x` grid points at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringField {
    pub grid: GridConfig,
    pub time: f64,
    pub samples: Vec<Block>,
}

impl ScatteringField {
    pub fn new(grid: GridConfig, time: f64, samples: Vec<Block>) -> Result<Self> {
        if samples.len() != grid.n_x {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n_x,
                samples.len()
            )));
        }
        if let Some(first) = samples.first() {
            let shape = first.shape();
            if samples.iter().any(|b| b.shape() != shape) {
                return Err(Error::ShapeMismatch("samples do not share one block shape".into()));
            }
        }
        Ok(Self { grid, time, samples })
    }

    /// Samples `f(x)` at the grid points, at time zero.
    pub fn from_fn(grid: GridConfig, f: impl Fn(f64) -> Block) -> Result<Self> {
        Self::new(grid, 0.0, grid.x_points().into_iter().map(f).collect())
    }

    /// Scalar field `f(x)`; the grid is forced to 1x1 blocks.
    pub fn scalar(grid: GridConfig, f: impl Fn(f64) -> Complex64) -> Self {
        let grid = grid.with_block_shape(1, 1);
        let samples = grid.x_points().into_iter().map(|x| Block::scalar(f(x))).collect();
        Self {
            grid,
            time: 0.0,
            samples,
        }
    }

    pub fn zeros(grid: GridConfig) -> Self {
        Self {
            grid,
            time: 0.0,
            samples: vec![Block::zeros(grid.block_rows, grid.block_cols); grid.n_x],
        }
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.samples[0].shape()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|b| b.scale_real(factor))
    }

    pub fn map(&self, f: impl Fn(&Block) -> Block) -> Self {
        let samples: Vec<Block> = self.samples.iter().map(f).collect();
        let (rows, cols) = samples[0].shape();
        Self {
            grid: self.grid.with_block_shape(rows, cols),
            time: self.time,
            samples,
        }
    }

    /// `x -> -x` on the grid. Index `j` maps to `(n - j) mod n`; the sample at
    /// `-L/2` is its own mirror image by periodicity.
    pub fn reflected(&self) -> Self {
        let n = self.samples.len();
        Self {
            grid: self.grid,
            time: self.time,
            samples: (0..n).map(|j| self.samples[(n - j) % n].clone()).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.samples, &self.grid)
    }

    /// Discrete L² norm of each block entry separately, row-major.
    pub fn entry_norms(&self) -> Vec<f64> {
        let (rows, cols) = self.block_shape();
        (0..rows * cols)
            .map(|e| {
                let s: f64 = self.samples.iter().map(|b| b.entries()[e].norm_sqr()).sum();
                (s * self.grid.dx()).sqrt()
            })
            .collect()
    }
}

/// Rule producing `P̃` from `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompanionVariant {
    /// `p̃ = p†`: the local equation.
    Adjoint,
    /// `p̃ = -p†`: flips the sign of the cubic terms.
    NegatedAdjoint,
    /// `p̃(x, t) = pᵀ(-x, -t)`.
    ReverseSpaceTimeTranspose,
    /// `p̃(x, t) = pᵀ(x, -t)`.
    ReverseTimeTranspose,
}

impl CompanionVariant {
    pub const ALL: [CompanionVariant; 4] = [
        CompanionVariant::Adjoint,
        CompanionVariant::NegatedAdjoint,
        CompanionVariant::ReverseSpaceTimeTranspose,
        CompanionVariant::ReverseTimeTranspose,
    ];

    pub fn is_transpose(self) -> bool {
        matches!(
            self,
            CompanionVariant::ReverseSpaceTimeTranspose | CompanionVariant::ReverseTimeTranspose
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            CompanionVariant::Adjoint => "adjoint",
            CompanionVariant::NegatedAdjoint => "negated-adjoint",
            CompanionVariant::ReverseSpaceTimeTranspose => "reverse-space-time-transpose",
            CompanionVariant::ReverseTimeTranspose => "reverse-time-transpose",
        }
    }

    /// Rejects transpose variants unless `μ₃ = 0`.
    pub fn check_coefficients(self, c: &DispersionCoefficients) -> Result<()> {
        if self.is_transpose() && c.mu3 != Complex64::new(0.0, 0.0) {
            return Err(Error::TransposeVariantRequiresZeroMu3 { mu3: c.mu3 });
        }
        Ok(())
    }
}

impl fmt::Display for CompanionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompanionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CompanionVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "variant",
                    format!(
                        "unknown variant `{s}`, expected one of adjoint, negated-adjoint, \
                         reverse-space-time-transpose, reverse-time-transpose"
                    ),
                )
            })
    }
}

/// `p̃(·, t)` for the given variant, from `p0` at time zero.
pub fn companion_field(
    p0: &ScatteringField,
    t: f64,
    v: CompanionVariant,
    c: &DispersionCoefficients,
) -> Result<ScatteringField> {
    v.check_coefficients(c)?;
    let field = match v {
        CompanionVariant::Adjoint => evolved(p0, t, c).map(Block::adjoint),
        CompanionVariant::NegatedAdjoint => evolved(p0, t, c).map(|b| -&b.adjoint()),
        CompanionVariant::ReverseSpaceTimeTranspose => evolved(p0, -t, c).reflected().map(Block::transpose),
        CompanionVariant::ReverseTimeTranspose => evolved(p0, -t, c).map(Block::transpose),
    };
    Ok(ScatteringField { time: t, ..field })
}

fn evolved(p0: &ScatteringField, t: f64, c: &DispersionCoefficients) -> ScatteringField {
    ScatteringField {
        grid: p0.grid,
        time: t,
        samples: evolve_samples(&p0.samples, &p0.grid, t, c),
    }
}

/// Grid arguments closer than this (in units of `dx`) to a node are read
/// from the node directly.
const NODE_SNAP: f64 = 1e-9;

/// `p(arg)` with periodic wrapping into `[-L/2, L/2)` and linear
/// interpolation between neighbouring nodes.
pub fn hankel_sample(p: &ScatteringField, arg: f64) -> Block {
    let n = p.samples.len();
    let u = (arg + 0.5 * p.grid.length) / p.grid.dx();
    let nearest = u.round();
    if (u - nearest).abs() < NODE_SNAP {
        let j = (nearest as i64).rem_euclid(n as i64) as usize;
        return p.samples[j].clone();
    }
    let lower = u.floor();
    let frac = u - lower;
    let j0 = (lower as i64).rem_euclid(n as i64) as usize;
    let j1 = (j0 + 1) % n;
    let mut out = p.samples[j0].scale_real(1.0 - frac);
    out.axpy(Complex64::new(frac, 0.0), &p.samples[j1]);
    out
}
