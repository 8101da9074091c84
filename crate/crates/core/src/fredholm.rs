//! Quadrature assembly of the data kernel `q`, Fredholm determinants and
//! the dense solve of `P = G(id + Q)` for each `x` on the grid.
//!
//! Block matrices over quadrature nodes are stored as flat `faer` matrices:
//! node `k` owns rows `k*d .. (k+1)*d` for the relevant block size `d`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::hankel::{companion_field, hankel_sample, CompanionVariant, ScatteringField};
use crate::quintic::SolutionField;
use crate::spectral::{check_dispersion_property, evolve_scattering, DispersionCoefficients, GridConfig};

/// `|det₁|` below this is reported as [`Error::NearSingularOperator`].
pub const SINGULARITY_THRESHOLD: f64 = 1e-8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Left endpoints `-L/2 + k h`, `k < n_quad`, all weights `h`.
    #[default]
    LeftRiemann,
    /// Endpoints included, half weights at both ends.
    Trapezoid,
}

/// Nodes and weights of a rule on `[-L/2, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
}

impl QuadratureRule {
    pub fn build(self, grid: &GridConfig) -> Quadrature {
        let h = grid.quad_step();
        let start = -0.5 * grid.length;
        let n = grid.n_quad;
        match self {
            QuadratureRule::LeftRiemann => Quadrature {
                nodes: (0..n).map(|k| start + k as f64 * h).collect(),
                weights: vec![h; n],
                step: h,
            },
            QuadratureRule::Trapezoid => {
                let mut weights = vec![h; n + 1];
                weights[0] = 0.5 * h;
                weights[n] = 0.5 * h;
                Quadrature {
                    // last node is exactly zero
                    nodes: (0..=n).map(|k| start + k as f64 * h).collect(),
                    weights,
                    step: h,
                }
            }
        }
    }
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `q(y_i, z_j; x, t)` over node pairs as a `(n d₂) x (n d₂)` matrix, plus
/// the column `q(ζ_k, 0; x, t)` needed to extend the solution to `y = z = 0`.
#[derive(Debug, Clone)]
pub struct DataKernel {
    pub x: f64,
    pub t: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
    /// Block size `d₂`.
    pub block_dim: usize,
    pub matrix: Mat<Complex64>,
    pub zero_column: Mat<Complex64>,
}

impl DataKernel {
    pub fn entry(&self, i: usize, j: usize) -> Block {
        read_block(&self.matrix, i, j, self.block_dim, self.block_dim)
    }

    /// `id + W Q` where `W` carries the quadrature weights of the summed
    /// variable.
    pub fn system_matrix(&self) -> Mat<Complex64> {
        system_matrix(&self.matrix, &self.weights, self.block_dim)
    }

    /// Discrete `tr(W Q)`.
    pub fn weighted_trace(&self) -> Complex64 {
        let d = self.block_dim;
        (0..self.matrix.nrows())
            .map(|r| self.matrix[(r, r)] * self.weights[r / d])
            .sum()
    }
}

fn system_matrix(q: &Mat<Complex64>, weights: &[f64], d: usize) -> Mat<Complex64> {
    let n = q.nrows();
    Mat::from_fn(n, n, |r, s| {
        let v = q[(r, s)] * weights[r / d];
        if r == s {
            v + ONE
        } else {
            v
        }
    })
}

fn read_block(m: &Mat<Complex64>, bi: usize, bj: usize, rows: usize, cols: usize) -> Block {
    Block::from_fn(rows, cols, |a, b| m[(bi * rows + a, bj * cols + b)])
}

fn write_block(m: &mut Mat<Complex64>, bi: usize, bj: usize, block: &Block) {
    let (rows, cols) = block.shape();
    for a in 0..rows {
        for b in 0..cols {
            m[(bi * rows + a, bj * cols + b)] = block.get(a, b);
        }
    }
}

fn check_commensurate(p: &ScatteringField, p_tilde: &ScatteringField) -> Result<(usize, usize)> {
    let (d1, d2) = p.block_shape();
    if p_tilde.block_shape() != (d2, d1) {
        return Err(Error::ShapeMismatch(format!(
            "companion blocks are {:?}, expected {:?}",
            p_tilde.block_shape(),
            (d2, d1)
        )));
    }
    Ok((d1, d2))
}

/// Left-Riemann data kernel at parameter `x`.
pub fn assemble_data_kernel(p: &ScatteringField, p_tilde: &ScatteringField, x: f64) -> Result<DataKernel> {
    assemble_data_kernel_with(p, p_tilde, x, QuadratureRule::LeftRiemann)
}

/// `q(y_i, z_j) = Σ_m w_m p̃(y_i + ζ_m + x) p(ζ_m + z_j + x)`.
pub fn assemble_data_kernel_with(
    p: &ScatteringField,
    p_tilde: &ScatteringField,
    x: f64,
    rule: QuadratureRule,
) -> Result<DataKernel> {
    let (d1, d2) = check_commensurate(p, p_tilde)?;
    let quad = rule.build(&p.grid);
    let n = quad.len();
    let mut ht = Mat::<Complex64>::zeros(n * d2, n * d1);
    let mut wh = Mat::<Complex64>::zeros(n * d1, n * d2);
    let mut wa = Mat::<Complex64>::zeros(n * d1, d2);
    for i in 0..n {
        for m in 0..n {
            let arg = quad.nodes[i] + quad.nodes[m] + x;
            write_block(&mut ht, i, m, &hankel_sample(p_tilde, arg));
            write_block(&mut wh, m, i, &hankel_sample(p, arg).scale_real(quad.weights[m]));
        }
        write_block(&mut wa, i, 0, &hankel_sample(p, quad.nodes[i] + x).scale_real(quad.weights[i]));
    }
    Ok(DataKernel {
        x,
        t: p.time,
        nodes: quad.nodes,
        weights: quad.weights,
        step: quad.step,
        block_dim: d2,
        matrix: &ht * &wh,
        zero_column: &ht * &wa,
    })
}

/// Plain Fredholm determinant or its regularised version.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminantOrder {
    /// `det(id + W Q)`
    First,
    /// `det(id + W Q) exp(-tr(W Q))`
    Second,
}

pub fn fredholm_determinant(q: &DataKernel, order: DeterminantOrder) -> Complex64 {
    let det1 = lu_determinant(&q.system_matrix().partial_piv_lu());
    match order {
        DeterminantOrder::First => det1,
        DeterminantOrder::Second => det1 * (-q.weighted_trace()).exp(),
    }
}

/// `det(A)` from the factors `P A = L U` with unit-diagonal `L`.
pub(crate) fn lu_determinant(lu: &PartialPivLu<Complex64>) -> Complex64 {
    let u = lu.U();
    let mut det = ONE;
    for i in 0..u.nrows() {
        det *= u[(i, i)];
    }
    let (fwd, _) = lu.P().arrays();
    if permutation_is_odd(fwd) {
        -det
    } else {
        det
    }
}

fn permutation_is_odd(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut transpositions = 0usize;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

/// Solution of the discrete Marchenko equation at one `x`.
#[derive(Debug, Clone)]
pub struct KernelSolution {
    pub x: f64,
    pub t: f64,
    /// `g(y_i, z_j)` as an `(n d₁) x (n d₂)` matrix.
    pub g: Mat<Complex64>,
    /// `g(0, z_j)`, the `y = 0` row, `d₁ x (n d₂)`.
    pub zero_row: Mat<Complex64>,
    /// `g(0, 0; x, t)`.
    pub trace: Block,
    pub det1: Complex64,
    /// Relative Frobenius residual of `G (id + W Q) = H` over both the node
    /// rows and the `y = 0` row.
    pub residual: f64,
}

impl KernelSolution {
    pub fn entry(&self, i: usize, j: usize) -> Block {
        let (d1, d2) = self.trace.shape();
        read_block(&self.g, i, j, d1, d2)
    }
}

/// Solves `g(y, z) + Σ_k w_k g(y, ζ_k) q(ζ_k, z) = p(y + z + x)` for `y` at
/// the nodes and at zero, then extends to `z = 0` by the same equation.
pub fn solve_marchenko(p: &ScatteringField, q: &DataKernel, x: f64) -> Result<KernelSolution> {
    let (d1, d2) = p.block_shape();
    if q.block_dim != d2 {
        return Err(Error::ShapeMismatch(format!(
            "kernel blocks are {0}x{0}, field blocks are {d1}x{d2}",
            q.block_dim
        )));
    }
    let n = q.nodes.len();
    // rhs rows: node rows first, then the y = 0 row
    let mut rhs = Mat::<Complex64>::zeros(n * d1 + d1, n * d2);
    for j in 0..n {
        for i in 0..n {
            write_block(&mut rhs, i, j, &hankel_sample(p, q.nodes[i] + q.nodes[j] + x));
        }
        write_block(&mut rhs, n, j, &hankel_sample(p, q.nodes[j] + x));
    }
    let system = q.system_matrix();
    let lu = system.partial_piv_lu();
    let det1 = lu_determinant(&lu);
    if !(det1.norm() >= SINGULARITY_THRESHOLD) {
        return Err(Error::NearSingularOperator {
            x,
            t: q.t,
            det_abs: det1.norm(),
        });
    }
    let solution = lu.solve_transpose(rhs.transpose()).transpose().to_owned();
    let residual = relative_residual(&solution, &system, &rhs);

    let g = solution.subrows(0, n * d1).to_owned();
    let zero_row = solution.subrows(n * d1, d1).to_owned();
    let weighted_zero_column = weight_rows(&q.zero_column, &q.weights, d2);
    let correction = &zero_row * &weighted_zero_column;
    let px = hankel_sample(p, x);
    let trace = Block::from_fn(d1, d2, |a, b| px.get(a, b) - correction[(a, b)]);
    Ok(KernelSolution {
        x,
        t: q.t,
        g,
        zero_row,
        trace,
        det1,
        residual,
    })
}

fn weight_rows(m: &Mat<Complex64>, weights: &[f64], d: usize) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, s| m[(r, s)] * weights[r / d])
}

fn relative_residual(solution: &Mat<Complex64>, system: &Mat<Complex64>, rhs: &Mat<Complex64>) -> f64 {
    let r = solution * system - rhs;
    let scale = rhs.norm_l2();
    if scale > 0.0 {
        r.norm_l2() / scale
    } else {
        r.norm_l2()
    }
}

/// Per-`x` output of a whole-profile solve.
#[derive(Debug, Clone)]
pub struct TraceSolve {
    /// `g(0, 0; x, t)`.
    pub trace: Block,
    pub det1: Complex64,
    pub residual: f64,
    /// `[P U P̃](0, 0; x, t)`, the operator whose x-derivative is `g g̃`.
    pub pairing: Block,
}

/// Solves the Marchenko equation at every grid point for fixed `p`, `p̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpSolver {
    pub rule: QuadratureRule,
    /// Also solve for `g` at every node pair so the residual covers the full
    /// discrete system, not just the `y = 0` row.
    pub full_residual: bool,
}

impl Default for GpSolver {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::LeftRiemann,
            full_residual: false,
        }
    }
}

impl GpSolver {
    pub fn new(rule: QuadratureRule) -> Self {
        Self {
            rule,
            ..Self::default()
        }
    }

    pub fn with_full_residual(mut self, on: bool) -> Self {
        self.full_residual = on;
        self
    }

    /// Results in grid order. Uses table lookups when the quadrature step is
    /// a multiple of `dx`, and interpolated Hankel samples otherwise.
    pub fn solve_profile(&self, p: &ScatteringField, p_tilde: &ScatteringField) -> Result<Vec<TraceSolve>> {
        check_commensurate(p, p_tilde)?;
        match p.grid.aligned_ratio() {
            Some(r) => self.solve_aligned(p, p_tilde, r),
            None => (0..p.grid.n_x)
                .into_par_iter()
                .map(|j| self.solve_generic(p, p_tilde, j))
                .collect(),
        }
    }

    fn solve_generic(&self, p: &ScatteringField, p_tilde: &ScatteringField, j: usize) -> Result<TraceSolve> {
        let x = p.grid.x(j);
        let q = assemble_data_kernel_with(p, p_tilde, x, self.rule)?;
        let sol = solve_marchenko(p, &q, x)?;
        let (d1, d2) = p.block_shape();
        let mut wb = Mat::<Complex64>::zeros(q.nodes.len() * d2, d1);
        for (k, (&node, &w)) in q.nodes.iter().zip(&q.weights).enumerate() {
            write_block(&mut wb, k, 0, &hankel_sample(p_tilde, node + x).scale_real(w));
        }
        let pairing = &sol.zero_row * &wb;
        Ok(TraceSolve {
            trace: sol.trace,
            det1: sol.det1,
            residual: sol.residual,
            pairing: read_block(&pairing, 0, 0, d1, d1),
        })
    }

    fn solve_aligned(&self, p: &ScatteringField, p_tilde: &ScatteringField, r: usize) -> Result<Vec<TraceSolve>> {
        let (d1, d2) = p.block_shape();
        let grid = p.grid;
        let big_n = grid.n_x;
        let half = big_n / 2;
        let quad = self.rule.build(&grid);
        let n = quad.len();
        let offsets: Vec<usize> = (0..n).map(|k| r * k).collect();

        // table(a, b) = Σ_m w_m p̃[a + o_m] p[o_m + b], indices mod N; every
        // q(ζ_k, z; x_j) is an entry of it.
        let mut lhs = Mat::<Complex64>::zeros(big_n * d2, n * d1);
        let mut rhs = Mat::<Complex64>::zeros(n * d1, big_n * d2);
        for m in 0..n {
            for a in 0..big_n {
                let idx = (a + offsets[m]) % big_n;
                write_block(&mut lhs, a, m, &p_tilde.samples[idx]);
                write_block(&mut rhs, m, a, &p.samples[idx].scale_real(quad.weights[m]));
            }
        }
        let table = &lhs * &rhs;
        let table_block = |a: usize, b: usize| read_block(&table, a % big_n, b % big_n, d2, d2);

        (0..big_n)
            .into_par_iter()
            .map(|j| {
                let x = grid.x(j);
                let mut q = Mat::<Complex64>::zeros(n * d2, n * d2);
                let mut zero_column = Mat::<Complex64>::zeros(n * d2, d2);
                for k in 0..n {
                    for l in 0..n {
                        write_block(&mut q, k, l, &table_block(offsets[k] + j, offsets[l] + j));
                    }
                    write_block(&mut zero_column, k, 0, &table_block(offsets[k] + j, j + half));
                }
                let rows = if self.full_residual { n * d1 + d1 } else { d1 };
                let mut rhs = Mat::<Complex64>::zeros(rows, n * d2);
                for l in 0..n {
                    write_block(&mut rhs, rows / d1 - 1, l, &p.samples[(offsets[l] + j + half) % big_n]);
                    if self.full_residual {
                        for i in 0..n {
                            write_block(&mut rhs, i, l, &p.samples[(offsets[i] + offsets[l] + j) % big_n]);
                        }
                    }
                }
                let system = system_matrix(&q, &quad.weights, d2);
                let lu = system.partial_piv_lu();
                let det1 = lu_determinant(&lu);
                if !(det1.norm() >= SINGULARITY_THRESHOLD) {
                    return Err(Error::NearSingularOperator {
                        x,
                        t: p.time,
                        det_abs: det1.norm(),
                    });
                }
                let solution = lu.solve_transpose(rhs.transpose()).transpose().to_owned();
                let residual = relative_residual(&solution, &system, &rhs);
                let zero_row = solution.subrows(rows - d1, d1).to_owned();

                let correction = &zero_row * &weight_rows(&zero_column, &quad.weights, d2);
                let px = &p.samples[j];
                let trace = Block::from_fn(d1, d2, |a, b| px.get(a, b) - correction[(a, b)]);

                let mut wb = Mat::<Complex64>::zeros(n * d2, d1);
                for k in 0..n {
                    let s = &p_tilde.samples[(offsets[k] + j + half) % big_n];
                    write_block(&mut wb, k, 0, &s.scale_real(quad.weights[k]));
                }
                let pairing = &zero_row * &wb;
                Ok(TraceSolve {
                    trace,
                    det1,
                    residual,
                    pairing: read_block(&pairing, 0, 0, d1, d1),
                })
            })
            .collect()
    }

    /// `g(0, 0; x, t)` and `g̃(0, 0; x, t)` from two independent solves, with
    /// spectral x-derivatives.
    pub fn solve_at_time(
        &self,
        p0: &ScatteringField,
        t: f64,
        v: CompanionVariant,
        c: &DispersionCoefficients,
    ) -> Result<GpSolution> {
        if !check_dispersion_property(c) {
            return Err(Error::DispersionPropertyViolated);
        }
        v.check_coefficients(c)?;
        let p = evolve_scattering(&ScatteringField { time: 0.0, ..p0.clone() }, t, c);
        let p_tilde = companion_field(p0, t, v, c)?;
        let forward = self.solve_profile(&p, &p_tilde)?;
        let backward = self.solve_profile(&p_tilde, &p)?;
        let g = forward.iter().map(|s| s.trace.clone()).collect();
        let g_tilde = backward.iter().map(|s| s.trace.clone()).collect();
        let field = SolutionField::from_profiles(p0.grid, t, g, g_tilde)?;
        let residual = forward
            .iter()
            .chain(&backward)
            .map(|s| s.residual)
            .fold(0.0, f64::max);
        Ok(GpSolution {
            field,
            det1: forward.iter().map(|s| s.det1).collect(),
            det1_tilde: backward.iter().map(|s| s.det1).collect(),
            pairing: forward.into_iter().map(|s| s.pairing).collect(),
            residual,
        })
    }
}

/// Output of the linearisation method at one time.
#[derive(Debug, Clone)]
pub struct GpSolution {
    pub field: SolutionField,
    /// `det(id + W Q)` per grid point.
    pub det1: Vec<Complex64>,
    /// Same for the companion system `id + W Q̃`.
    pub det1_tilde: Vec<Complex64>,
    /// `[P U P̃](0, 0; x, t)` per grid point.
    pub pairing: Vec<Block>,
    /// Largest relative residual over all per-x solves.
    pub residual: f64,
}

impl GpSolution {
    pub fn min_det_abs(&self) -> f64 {
        self.det1.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Solves at time `t` with the left-Riemann rule on the grid of `p0`.
pub fn gp_solution_at_time(
    p0: &ScatteringField,
    t: f64,
    v: CompanionVariant,
    c: &DispersionCoefficients,
) -> Result<GpSolution> {
    GpSolver::default().solve_at_time(p0, t, v, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::max_distance;
    use crate::spectral::GridConfig;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sech(grid: GridConfig, amp: f64) -> ScatteringField {
        ScatteringField::scalar(grid, |x| c(amp / (x / 40.0).cosh(), 0.0))
    }

    /// Dense LU-free oracle: cofactor expansion is too slow, so use Gaussian
    /// elimination written out by hand with partial pivoting.
    fn oracle_det(mut a: Vec<Vec<Complex64>>) -> Complex64 {
        let n = a.len();
        let mut det = c(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
                .unwrap();
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            let d = a[col][col];
            det *= d;
            for row in col + 1..n {
                let f = a[row][col] / d;
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
            }
        }
        det
    }

    fn manual_kernel(grid: GridConfig, a: impl Fn(f64) -> Complex64, b: impl Fn(f64) -> Complex64) -> DataKernel {
        let quad = QuadratureRule::LeftRiemann.build(&grid);
        let n = quad.len();
        let matrix = Mat::from_fn(n, n, |i, j| a(quad.nodes[i]) * b(quad.nodes[j]));
        let zero_column = Mat::from_fn(n, 1, |i, _| a(quad.nodes[i]) * b(0.0));
        DataKernel {
            x: 0.0,
            t: 0.0,
            nodes: quad.nodes,
            weights: quad.weights,
            step: quad.step,
            block_dim: 1,
            matrix,
            zero_column,
        }
    }

    #[test]
    fn zero_data_gives_zero_kernel_and_unit_determinants() {
        let grid = GridConfig::scalar(40.0, 16).unwrap();
        let p = ScatteringField::zeros(grid);
        let q = assemble_data_kernel(&p, &p, 0.3).unwrap();
        assert!(q.matrix.norm_l2() == 0.0);
        assert_eq!(fredholm_determinant(&q, DeterminantOrder::First), c(1.0, 0.0));
        assert_eq!(fredholm_determinant(&q, DeterminantOrder::Second), c(1.0, 0.0));
    }

    #[test]
    fn constant_data_gives_constant_kernel() {
        let grid = GridConfig::scalar(40.0, 16).unwrap();
        let value = c(0.3, -0.4);
        let p = ScatteringField::scalar(grid, |_| value);
        let pt = p.map(Block::adjoint);
        let q = assemble_data_kernel(&p, &pt, 1.25).unwrap();
        for i in 0..q.nodes.len() {
            for j in 0..q.nodes.len() {
                assert!((q.entry(i, j).as_scalar() - c(0.25 * 20.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_determinant_matches_formula_and_dense_oracle() {
        let grid = GridConfig::new(40.0, 64, 24, 1, 1).unwrap();
        let a = |y: f64| c((y / 5.0).cos() * 0.2, 0.05 * y.sin());
        let b = |z: f64| c(0.1 * (-(z + 3.0).powi(2) / 8.0).exp(), -0.03);
        let q = manual_kernel(grid, a, b);
        let h = q.step;
        let formula = c(1.0, 0.0) + q.nodes.iter().map(|&s| b(s) * a(s)).sum::<Complex64>() * h;
        let det = fredholm_determinant(&q, DeterminantOrder::First);
        assert!((det - formula).norm() < 1e-10, "{det} vs {formula}");

        let n = q.nodes.len();
        let dense: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| q.matrix[(i, j)] * h + if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
                    .collect()
            })
            .collect();
        assert!((det - oracle_det(dense)).norm() < 1e-10);
        let det2 = fredholm_determinant(&q, DeterminantOrder::Second);
        assert!((det2 - formula * (-(formula - c(1.0, 0.0))).exp()).norm() < 1e-10);
    }

    #[test]
    fn permutation_parity() {
        assert!(!permutation_is_odd(&[0, 1, 2]));
        assert!(permutation_is_odd(&[1, 0, 2]));
        assert!(!permutation_is_odd(&[1, 2, 0]));
        assert!(permutation_is_odd(&[3, 2, 1, 0, 5, 4]));
    }

    #[test]
    fn identity_operator_returns_hankel_samples() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p = sech(grid, 0.15);
        let q = manual_kernel(grid, |_| c(0.0, 0.0), |_| c(0.0, 0.0));
        let sol = solve_marchenko(&p, &q, grid.x(7)).unwrap();
        for i in 0..q.nodes.len() {
            for j in 0..q.nodes.len() {
                let expected = hankel_sample(&p, q.nodes[i] + q.nodes[j] + grid.x(7));
                assert_eq!(sol.entry(i, j), expected);
            }
        }
        assert_eq!(sol.trace, p.samples[7]);
    }

    #[test]
    fn rank_one_kernel_matches_closed_form() {
        // g(y, z) = p(y+z+x) - c(y) b(z) / (1 + h Σ b a) with c(y) = h Σ_k p(y+ζ_k+x) a(ζ_k)
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p = sech(grid, 0.15);
        let a = |y: f64| c(0.2 * (y / 4.0).cos(), 0.1);
        let b = |z: f64| c(0.3, -0.2 * (z / 3.0).sin());
        let q = manual_kernel(grid, a, b);
        let x = grid.x(11);
        let sol = solve_marchenko(&p, &q, x).unwrap();
        let h = q.step;
        let denom = c(1.0, 0.0) + q.nodes.iter().map(|&s| b(s) * a(s)).sum::<Complex64>() * h;
        let cy = |y: f64| {
            q.nodes
                .iter()
                .map(|&s| hankel_sample(&p, y + s + x).as_scalar() * a(s))
                .sum::<Complex64>()
                * h
        };
        for (i, &y) in q.nodes.iter().enumerate() {
            for (j, &z) in q.nodes.iter().enumerate() {
                let expected = hankel_sample(&p, y + z + x).as_scalar() - cy(y) * b(z) / denom;
                assert!((sol.entry(i, j).as_scalar() - expected).norm() < 1e-9);
            }
        }
        let expected_trace = p.samples[11].as_scalar() - cy(0.0) * b(0.0) / denom;
        assert!((sol.trace.as_scalar() - expected_trace).norm() < 1e-9);
    }

    #[test]
    fn aligned_fast_path_matches_generic_assembly() {
        let grid = GridConfig::new(40.0, 32, 8, 1, 1).unwrap();
        let p = ScatteringField::scalar(grid, |x| c(0.3 * (-(x / 6.0).powi(2)).exp(), 0.1 * (x / 7.0).sin()));
        let pt = p.map(Block::adjoint);
        let solver = GpSolver::default().with_full_residual(true);
        let fast = solver.solve_aligned(&p, &pt, 2).unwrap();
        for j in 0..grid.n_x {
            let slow = solver.solve_generic(&p, &pt, j).unwrap();
            assert!((&fast[j].trace - &slow.trace).norm() < 1e-13);
            assert!((&fast[j].pairing - &slow.pairing).norm() < 1e-13);
            assert!((fast[j].det1 - slow.det1).norm() < 1e-12);
            assert!(fast[j].residual < 1e-13);
        }
    }

    #[test]
    fn aligned_fast_path_matches_generic_for_rectangular_blocks() {
        let grid = GridConfig::new(20.0, 16, 4, 2, 1).unwrap();
        let p = ScatteringField::from_fn(grid, |x| {
            let e = (-(x / 3.0).powi(2)).exp();
            Block::from_row_major(2, 1, &[c(0.4 * e, 0.1 * e), c(0.0, 0.2 * e * x.cos())])
        })
        .unwrap();
        let pt = p.map(Block::adjoint);
        for rule in [QuadratureRule::LeftRiemann, QuadratureRule::Trapezoid] {
            let solver = GpSolver::new(rule).with_full_residual(true);
            let fast = solver.solve_aligned(&p, &pt, 2).unwrap();
            let back = solver.solve_aligned(&pt, &p, 2).unwrap();
            for j in 0..grid.n_x {
                let slow = solver.solve_generic(&p, &pt, j).unwrap();
                assert_eq!(fast[j].trace.shape(), (2, 1));
                assert_eq!(back[j].trace.shape(), (1, 2));
                assert!((&fast[j].trace - &slow.trace).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn near_singular_operator_is_reported_with_location() {
        // rank-one kernel with h Σ b a = -1 makes id + W Q exactly singular
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p = sech(grid, 0.15);
        let q = manual_kernel(grid, |_| c(1.0, 0.0), |_| c(-1.0 / 20.0, 0.0));
        let err = solve_marchenko(&p, &q, 0.0).unwrap_err();
        assert!(matches!(err, Error::NearSingularOperator { x, .. } if x == 0.0));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p = ScatteringField::zeros(grid);
        let sol =
            gp_solution_at_time(&p, 2.0, CompanionVariant::Adjoint, &DispersionCoefficients::reference()).unwrap();
        assert!(sol.field.g.iter().all(|b| b.norm() == 0.0));
        assert!(sol.det1.iter().all(|&d| d == c(1.0, 0.0)));
    }

    #[test]
    fn rejects_coefficients_without_dispersion_property() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p = sech(grid, 0.15);
        let bad = DispersionCoefficients::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(
            gp_solution_at_time(&p, 0.0, CompanionVariant::Adjoint, &bad).unwrap_err(),
            Error::DispersionPropertyViolated
        );
    }

    #[test]
    fn refined_quadrature_oracle_for_kernel_at_origin() {
        // q(y, y; -y) = q(0, 0; 0) = ∫_{-L/2}^0 p(ζ)² dζ for real symmetric p.
        // Read it at the node y = -L/4 and compare with a 10x finer midpoint
        // sum of the closed-form profile.
        let p0 = |x: f64| 0.15 / (x / 40.0).cosh();
        let m = 10 * 256;
        let hf = 20.0 / m as f64;
        let fine: f64 = (0..m).map(|k| p0(-20.0 + (k as f64 + 0.5) * hf).powi(2) * hf).sum();
        let mut errors = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = GridConfig::scalar(40.0, n).unwrap();
            let p = sech(grid, 0.15);
            let q = assemble_data_kernel(&p, &p, 10.0).unwrap();
            let k = q.nodes.len() / 2;
            assert_eq!(q.nodes[k], -10.0);
            let value = q.entry(k, k).as_scalar();
            assert!(value.im.abs() < 1e-15);
            errors.push((value.re - fine).abs());
        }
        assert!(errors[0] > 1.8 * errors[1] && errors[1] > 1.8 * errors[2], "{errors:?}");
    }

    #[test]
    fn self_consistency_residual_at_time_zero() {
        let grid = GridConfig::scalar(40.0, 64).unwrap();
        let p = sech(grid, 0.15);
        let sol = GpSolver::default()
            .with_full_residual(true)
            .solve_at_time(&p, 0.0, CompanionVariant::Adjoint, &DispersionCoefficients::reference())
            .unwrap();
        assert!(sol.residual < 1e-12, "{}", sol.residual);
        let adjoint: Vec<Block> = sol.field.g.iter().map(Block::adjoint).collect();
        assert!(max_distance(&adjoint, &sol.field.g_tilde) < 1e-12);
    }
}
