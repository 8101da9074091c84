//! The non-commutative quintic nonlinearity and the residual of the full
//! fourth-order equation.

use num_complex::Complex64;
use serde::Serialize;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::spectral::{derivative_with, DispersionCoefficients, GridConfig, Transform, WaveNumbers};

/// `g(0, 0; x, t)` and its companion over the x-grid with spectral
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: GridConfig,
    pub time: f64,
    pub g: Vec<Block>,
    pub g_tilde: Vec<Block>,
    pub dg: Vec<Block>,
    pub d2g: Vec<Block>,
    pub d3g: Vec<Block>,
    pub d4g: Vec<Block>,
    pub dg_tilde: Vec<Block>,
    pub d2g_tilde: Vec<Block>,
}

impl SolutionField {
    pub fn from_profiles(grid: GridConfig, time: f64, g: Vec<Block>, g_tilde: Vec<Block>) -> Result<Self> {
        if g.len() != grid.n_x || g_tilde.len() != grid.n_x {
            return Err(Error::InvalidGrid(format!(
                "profiles have {} and {} samples, grid has {}",
                g.len(),
                g_tilde.len(),
                grid.n_x
            )));
        }
        let (d1, d2) = g[0].shape();
        if g_tilde[0].shape() != (d2, d1) {
            return Err(Error::ShapeMismatch(format!(
                "companion blocks are {:?}, expected {:?}",
                g_tilde[0].shape(),
                (d2, d1)
            )));
        }
        let transform = Transform::new(grid.n_x);
        let kappa = WaveNumbers::for_grid(&grid);
        let d = |f: &[Block], order| derivative_with(&transform, &kappa, f, order);
        Ok(Self {
            dg: d(&g, 1),
            d2g: d(&g, 2),
            d3g: d(&g, 3),
            d4g: d(&g, 4),
            dg_tilde: d(&g_tilde, 1),
            d2g_tilde: d(&g_tilde, 2),
            grid,
            time,
            g,
            g_tilde,
        })
    }

    /// `d(∂) g` with the given coefficients.
    pub fn linear_part(&self, c: &DispersionCoefficients) -> Vec<Block> {
        (0..self.g.len())
            .map(|j| {
                let mut out = self.d2g[j].scale(c.mu2);
                out.axpy(c.mu3, &self.d3g[j]);
                out.axpy(c.mu4, &self.d4g[j]);
                out
            })
            .collect()
    }
}

/// Pointwise quintic nonlinearity. Products are taken in the written order.
///
/// `2μ₂ g g̃ g + 3μ₃((∂g) g̃ g + g g̃ (∂g)) + 2μ₄(2(∂²g) g̃ g + g (∂²g̃) g
/// + 2 g g̃ (∂²g) + (∂g)(∂g̃) g + 3(∂g) g̃ (∂g) + g (∂g̃)(∂g) + 3 g g̃ g g̃ g)`
#[allow(clippy::too_many_arguments)]
pub fn quintic_rhs_point(
    g: &Block,
    gt: &Block,
    dg: &Block,
    dgt: &Block,
    d2g: &Block,
    d2gt: &Block,
    c: &DispersionCoefficients,
) -> Block {
    let g_gt = g * gt;
    let dg_gt = dg * gt;
    let g_gt_g = &g_gt * g;

    let cubic2 = &g_gt_g;
    let cubic3 = &(&dg_gt * g) + &(&g_gt * dg);

    let mut fourth = (&(d2g * gt) * g).scale_real(2.0);
    fourth += &(&(g * d2gt) * g);
    fourth.axpy(Complex64::new(2.0, 0.0), &(&g_gt * d2g));
    fourth += &(&(dg * dgt) * g);
    fourth.axpy(Complex64::new(3.0, 0.0), &(&dg_gt * dg));
    fourth += &(&(g * dgt) * dg);
    fourth.axpy(Complex64::new(3.0, 0.0), &(&(&g_gt_g * gt) * g));

    let mut out = cubic2.scale(c.mu2 * 2.0);
    out.axpy(c.mu3 * 3.0, &cubic3);
    out.axpy(c.mu4 * 2.0, &fourth);
    out
}

fn check_shapes(s: &SolutionField) -> Result<()> {
    let (d1, d2) = s.g[0].shape();
    if s.g_tilde[0].shape() != (d2, d1) {
        return Err(Error::ShapeMismatch(format!(
            "g is {d1}x{d2} but the companion is {:?}",
            s.g_tilde[0].shape()
        )));
    }
    Ok(())
}

pub fn quintic_rhs(s: &SolutionField, c: &DispersionCoefficients) -> Result<Vec<Block>> {
    check_shapes(s)?;
    Ok((0..s.g.len())
        .map(|j| quintic_rhs_point(&s.g[j], &s.g_tilde[j], &s.dg[j], &s.dg_tilde[j], &s.d2g[j], &s.d2g_tilde[j], c))
        .collect())
}

/// Residual of `∂ₜg = d(∂)g + Ψ` with the time derivative by central
/// difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max: f64,
    /// `sqrt(dx Σ |r_j|²)`
    pub l2: f64,
    /// Frobenius norm of the residual at each grid point.
    pub profile: Vec<f64>,
}

impl ResidualReport {
    fn from_profile(profile: Vec<f64>, dx: f64) -> Self {
        Self {
            max: profile.iter().copied().fold(0.0, f64::max),
            l2: (dx * profile.iter().map(|r| r * r).sum::<f64>()).sqrt(),
            profile,
        }
    }
}

/// `(g₊ - g₋)/(2δ)` pointwise.
pub fn time_difference(s_minus: &SolutionField, s_plus: &SolutionField, delta: f64) -> Vec<Block> {
    s_plus
        .g
        .iter()
        .zip(&s_minus.g)
        .map(|(a, b)| (a - b).scale_real(0.5 / delta))
        .collect()
}

pub fn pde_residual(
    s_minus: &SolutionField,
    s: &SolutionField,
    s_plus: &SolutionField,
    delta: f64,
    c: &DispersionCoefficients,
) -> Result<ResidualReport> {
    pde_residual_with(s_minus, s, s_plus, delta, c, true)
}

/// As [`pde_residual`]; with `nonlinear = false` the quintic terms are left
/// out, which is the right check for purely linear evolution.
pub fn pde_residual_with(
    s_minus: &SolutionField,
    s: &SolutionField,
    s_plus: &SolutionField,
    delta: f64,
    c: &DispersionCoefficients,
    nonlinear: bool,
) -> Result<ResidualReport> {
    let dt = time_difference(s_minus, s_plus, delta);
    let linear = s.linear_part(c);
    let rhs = if nonlinear { Some(quintic_rhs(s, c)?) } else { None };
    let profile = (0..s.g.len())
        .map(|j| {
            let mut r = &dt[j] - &linear[j];
            if let Some(rhs) = &rhs {
                r = &r - &rhs[j];
            }
            r.norm()
        })
        .collect();
    Ok(ResidualReport::from_profile(profile, s.grid.dx()))
}
