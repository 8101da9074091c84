//! Discrete checks of the operator identities behind the method, and the
//! comparison between the linearisation solver and direct time stepping.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::block::{max_distance, max_norm, Block};
use crate::error::Result;
use crate::fredholm::{assemble_data_kernel, GpSolution, GpSolver};
use crate::hankel::{CompanionVariant, ScatteringField};
use crate::spectral::{evolve_samples, spectral_derivative, DispersionCoefficients, GridConfig, Transform};
use crate::splitstep::SplitStepSolver;

/// Errors at a sequence of refinement levels and the fitted order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: String,
    /// What `levels` measures, e.g. `"quadrature step"`.
    pub parameter: String,
    pub levels: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log level`.
    pub order: Option<f64>,
    pub expected_order: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Allowed deviation of a measured order from the expected one.
pub const ORDER_TOLERANCE: f64 = 0.3;

impl IdentityReport {
    pub fn new(
        name: impl Into<String>,
        parameter: impl Into<String>,
        levels: Vec<f64>,
        errors: Vec<f64>,
        expected_order: f64,
    ) -> Self {
        let order = estimate_order(&levels, &errors);
        let passed = order.is_some_and(|p| (p - expected_order).abs() <= ORDER_TOLERANCE);
        Self {
            name: name.into(),
            parameter: parameter.into(),
            levels,
            errors,
            order,
            expected_order,
            tolerance: ORDER_TOLERANCE,
            passed,
        }
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Slope of the least-squares line through `(log level, log error)`.
/// `None` with fewer than two levels or any non-positive error.
pub fn estimate_order(levels: &[f64], errors: &[f64]) -> Option<f64> {
    if levels.len() < 2 || levels.len() != errors.len() {
        return None;
    }
    if errors.iter().chain(levels).any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let xs: Vec<f64> = levels.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Discretisation of the product rule check on `[-length, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRuleSetup {
    pub length: f64,
    /// Node counts, coarse to fine.
    pub levels: Vec<usize>,
    /// Central difference step in `x`.
    pub delta: f64,
    /// `y` and `z` values at which both sides are compared.
    pub samples: Vec<f64>,
}

impl Default for ProductRuleSetup {
    fn default() -> Self {
        Self {
            length: 12.0,
            levels: vec![60, 120, 240],
            delta: 1e-4,
            samples: vec![0.0, -0.5, -1.0],
        }
    }
}

/// Smooth Gaussian-modulated trigonometric kernels used by default.
pub struct ProductRuleKernels {
    pub h: Box<dyn Fn(f64) -> Complex64 + Sync>,
    pub h_prime: Box<dyn Fn(f64) -> Complex64 + Sync>,
    pub f: Box<dyn Fn(f64, f64) -> Complex64 + Sync>,
    pub f_prime: Box<dyn Fn(f64, f64) -> Complex64 + Sync>,
}

impl Default for ProductRuleKernels {
    fn default() -> Self {
        Self {
            h: Box::new(|s| Complex64::new((1.3 * s).cos(), 0.4 * s.sin()) * (-(s + 2.0).powi(2) / 2.0).exp()),
            h_prime: Box::new(|s| Complex64::new(0.7, (0.9 * s).cos()) * (-(s + 1.5).powi(2) / 3.0).exp()),
            f: Box::new(|y, a| Complex64::new((y - a).cos(), 0.2) * (-(a + 1.0).powi(2) / 4.0).exp()),
            f_prime: Box::new(|b, z| Complex64::new(0.5, (b * z).sin()) * (-(b + 2.0).powi(2) / 5.0).exp()),
        }
    }
}

/// Compares `[F ∂ₓ(H H') F'](y, z; x)` with `[F H](y, 0; x) [H' F'](0, z; x)`
/// for scalar kernels, all integrals by left Riemann sums on `[-length, 0]`.
pub fn check_kernel_product_rule(kernels: &ProductRuleKernels, x: f64, setup: &ProductRuleSetup) -> IdentityReport {
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &n in &setup.levels {
        let h = setup.length / n as f64;
        let nodes: Vec<f64> = (0..n).map(|k| -setup.length + k as f64 * h).collect();
        // triple composition at parameter x, contracted against f(y, ·) and f'(·, z)
        let triple = |x: f64, y: f64, z: f64| -> Complex64 {
            let u: Vec<Complex64> = nodes.iter().map(|&a| (kernels.f)(y, a) * h).collect();
            let w: Vec<Complex64> = nodes
                .iter()
                .map(|&c| nodes.iter().zip(&u).map(|(&a, &ua)| ua * (kernels.h)(a + c + x)).sum::<Complex64>() * h)
                .collect();
            nodes
                .iter()
                .map(|&b| {
                    let wb: Complex64 = nodes.iter().zip(&w).map(|(&c, &wc)| wc * (kernels.h_prime)(c + b + x)).sum();
                    wb * h * (kernels.f_prime)(b, z)
                })
                .sum()
        };
        let mut err: f64 = 0.0;
        for &y in &setup.samples {
            for &z in &setup.samples {
                let lhs = (triple(x + setup.delta, y, z) - triple(x - setup.delta, y, z)) / (2.0 * setup.delta);
                let fh: Complex64 = nodes.iter().map(|&a| (kernels.f)(y, a) * (kernels.h)(a + x) * h).sum();
                let hf: Complex64 = nodes.iter().map(|&b| (kernels.h_prime)(b + x) * (kernels.f_prime)(b, z) * h).sum();
                err = err.max((lhs - fh * hf).norm());
            }
        }
        levels.push(h);
        errors.push(err);
    }
    IdentityReport::new("kernel product rule", "quadrature step", levels, errors, 1.0)
}

/// Options shared by the refinement studies over `n_quad`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOptions {
    /// Quadrature node counts, coarse to fine.
    pub n_quad_levels: Vec<usize>,
    /// Restrict the error to `lo < x < hi` when set.
    pub window: Option<(f64, f64)>,
}

impl RefinementOptions {
    /// `n_x/8, n_x/4, n_x/2`: all aligned with the x-grid.
    pub fn for_grid(grid: &GridConfig) -> Self {
        Self {
            n_quad_levels: vec![grid.n_x / 8, grid.n_x / 4, grid.n_x / 2],
            window: None,
        }
    }

    fn mask(&self, grid: &GridConfig) -> Vec<bool> {
        grid.x_points()
            .into_iter()
            .map(|x| self.window.is_none_or(|(lo, hi)| lo < x && x < hi))
            .collect()
    }
}

fn masked_max(values: impl Iterator<Item = f64>, mask: &[bool]) -> f64 {
    values.zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).fold(0.0, f64::max)
}

fn solve_with_n_quad(
    p0: &ScatteringField,
    n_quad: usize,
    t: f64,
    v: CompanionVariant,
    c: &DispersionCoefficients,
) -> Result<GpSolution> {
    let p = ScatteringField {
        grid: p0.grid.with_n_quad(n_quad),
        ..p0.clone()
    };
    GpSolver::default().solve_at_time(&p, t, v, c)
}

/// `∂ₓ [P U P̃](0, 0; x)` against `g(0, 0; x) g̃(0, 0; x)`, relative to the
/// largest `|g g̃|`, under refinement of the quadrature.
pub fn check_key_identity_i(
    p0: &ScatteringField,
    t: f64,
    v: CompanionVariant,
    c: &DispersionCoefficients,
    options: &RefinementOptions,
) -> Result<IdentityReport> {
    let mask = options.mask(&p0.grid);
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &n_quad in &options.n_quad_levels {
        let sol = solve_with_n_quad(p0, n_quad, t, v, c)?;
        let d_pairing = spectral_derivative(&sol.pairing, 1, &p0.grid)?;
        let product: Vec<Block> = sol.field.g.iter().zip(&sol.field.g_tilde).map(|(g, gt)| g * gt).collect();
        let scale = masked_max(product.iter().map(Block::norm), &mask);
        let err = masked_max(d_pairing.iter().zip(&product).map(|(a, b)| (a - b).norm()), &mask);
        levels.push(0.5 * p0.grid.length / n_quad as f64);
        errors.push(if scale > 0.0 { err / scale } else { err });
    }
    Ok(IdentityReport::new("key identity (i)", "quadrature step", levels, errors, 1.0))
}

/// Largest `|g̃ - g†|` from the two independent solves of the adjoint
/// variant, under refinement of the quadrature.
pub fn check_adjoint_pair(
    p0: &ScatteringField,
    t: f64,
    c: &DispersionCoefficients,
    options: &RefinementOptions,
) -> Result<IdentityReport> {
    let mask = options.mask(&p0.grid);
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &n_quad in &options.n_quad_levels {
        let sol = solve_with_n_quad(p0, n_quad, t, CompanionVariant::Adjoint, c)?;
        let err = masked_max(
            sol.field
                .g
                .iter()
                .zip(&sol.field.g_tilde)
                .map(|(g, gt)| (&g.adjoint() - gt).max_abs()),
            &mask,
        );
        levels.push(0.5 * p0.grid.length / n_quad as f64);
        errors.push(err);
    }
    Ok(IdentityReport::new("adjoint pair", "quadrature step", levels, errors, 1.0))
}

/// `U(x + Δx) - U(x)` against `-U(x) W (Q(x + Δx) - Q(x)) U(x)` with
/// `U = (id + W Q)⁻¹`, for `Δx` equal to each entry of `steps` times `dx`.
pub fn check_inverse_identity(
    p: &ScatteringField,
    p_tilde: &ScatteringField,
    x_index: usize,
    steps: &[usize],
) -> Result<IdentityReport> {
    let grid = p.grid;
    let x0 = grid.x(x_index);
    let q0 = assemble_data_kernel(p, p_tilde, x0)?;
    let u0 = inverse(&q0.system_matrix());
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &s in steps {
        let dx = s as f64 * grid.dx();
        let q1 = assemble_data_kernel(p, p_tilde, x0 + dx)?;
        let u1 = inverse(&q1.system_matrix());
        let d_system = q1.system_matrix() - q0.system_matrix();
        let predicted = -(&u0 * &d_system * &u0);
        let actual = &u1 - &u0;
        let scale = actual.norm_l2();
        let err = (&actual - &predicted).norm_l2();
        levels.push(dx);
        errors.push(if scale > 0.0 { err / scale } else { err });
    }
    Ok(IdentityReport::new("inverse operator identity", "x increment", levels, errors, 1.0))
}

fn inverse(a: &Mat<Complex64>) -> Mat<Complex64> {
    a.partial_piv_lu().inverse()
}

/// Settings for [`compare_solvers`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub dt: f64,
    /// Times at which both solvers are read, ascending within `[0, T]`.
    pub checkpoints: Vec<f64>,
    /// Drop the nonlinearity from the stepper and compare against linear
    /// propagation of `ĝ₀`.
    pub linear_only: bool,
    pub dealias: bool,
    pub solver: GpSolver,
}

impl CompareOptions {
    pub fn new(dt: f64, checkpoints: Vec<f64>) -> Self {
        Self {
            dt,
            checkpoints,
            linear_only: false,
            dealias: false,
            solver: GpSolver::default(),
        }
    }
}

/// Both solutions at one checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointComparison {
    pub t: f64,
    pub gp: Vec<Block>,
    pub direct: Vec<Block>,
    pub det1: Vec<Complex64>,
    pub max_difference: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub checkpoints: Vec<CheckpointComparison>,
}

impl ComparisonReport {
    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.t).collect()
    }

    pub fn max_differences(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.max_difference).collect()
    }
}

/// `max_x |g_GP - g_SS|` at each checkpoint. The stepper starts from the
/// Fredholm solution at time zero; checkpoints are rounded to whole steps.
pub fn compare_solvers(
    p0: &ScatteringField,
    t_final: f64,
    c: &DispersionCoefficients,
    v: CompanionVariant,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    let grid = p0.grid;
    let initial = options.solver.solve_at_time(p0, 0.0, v, c)?;
    let transform = Transform::new(grid.n_x);
    let stepper = SplitStepSolver::new(grid, *c, v, options.dt)?
        .with_nonlinear(!options.linear_only)
        .with_dealias(options.dealias);
    let mut state = stepper.initial_state(transform.forward_field(&initial.field.g))?;

    let mut out = Vec::new();
    for &t in options.checkpoints.iter().filter(|&&t| t <= t_final) {
        stepper.advance_to(&mut state, t);
        let direct = transform.inverse_field(&state.u_hat);
        let (gp, det1) = if options.linear_only {
            (evolve_samples(&initial.field.g, &grid, state.t, c), initial.det1.clone())
        } else if state.step_count == 0 {
            (initial.field.g.clone(), initial.det1.clone())
        } else {
            let sol = options.solver.solve_at_time(p0, state.t, v, c)?;
            (sol.field.g, sol.det1)
        };
        out.push(CheckpointComparison {
            t: state.t,
            max_difference: max_distance(&gp, &direct),
            gp,
            direct,
            det1,
        });
    }
    Ok(ComparisonReport { checkpoints: out })
}

/// Extremes of `det(id + W Q)` over `x` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminantSample {
    pub t: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    pub min_re: f64,
    pub max_abs_im: f64,
}

impl DeterminantSample {
    pub fn from_values(t: f64, det1: &[Complex64]) -> Self {
        Self {
            t,
            min_abs: det1.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min),
            max_abs: det1.iter().map(|d| d.norm()).fold(0.0, f64::max),
            min_re: det1.iter().map(|d| d.re).fold(f64::INFINITY, f64::min),
            max_abs_im: det1.iter().map(|d| d.im.abs()).fold(0.0, f64::max),
        }
    }
}

pub fn determinant_monitor(
    p0: &ScatteringField,
    checkpoints: &[f64],
    c: &DispersionCoefficients,
    v: CompanionVariant,
) -> Result<Vec<DeterminantSample>> {
    checkpoints
        .iter()
        .map(|&t| {
            let sol = GpSolver::default().solve_at_time(p0, t, v, c)?;
            Ok(DeterminantSample::from_values(t, &sol.det1))
        })
        .collect()
}

/// Largest `|g|` over the grid, used to express errors relative to the
/// solution size.
pub fn solution_scale(g: &[Block]) -> f64 {
    max_norm(g)
}
