//! Direct time stepping: exact linear phase in Fourier space followed by an
//! explicit Euler step on the transformed nonlinearity.

use num_complex::Complex64;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::fredholm::gp_solution_at_time;
use crate::hankel::{CompanionVariant, ScatteringField};
use crate::quintic::quintic_rhs_point;
use crate::spectral::{
    apply_multipliers, derivative_with, propagator_multipliers, DispersionCoefficients, GridConfig, Transform,
    WaveNumbers,
};

/// Fourier coefficients of the solution after `step_count` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub grid: GridConfig,
    pub u_hat: Vec<Block>,
    /// Always `step_count * dt`.
    pub t: f64,
    pub dt: f64,
    pub step_count: u64,
}

impl StepperState {
    pub fn new(grid: GridConfig, u_hat: Vec<Block>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", format!("time step must be positive, got {dt}")));
        }
        if u_hat.len() != grid.n_x {
            return Err(Error::InvalidGrid(format!(
                "expected {} modes, got {}",
                grid.n_x,
                u_hat.len()
            )));
        }
        Ok(Self {
            grid,
            u_hat,
            t: 0.0,
            dt,
            step_count: 0,
        })
    }

    /// Solution samples on the x-grid.
    pub fn physical(&self) -> Vec<Block> {
        Transform::new(self.grid.n_x).inverse_field(&self.u_hat)
    }
}

/// Reusable stepper holding transform plans and phase factors.
pub struct SplitStepSolver {
    grid: GridConfig,
    c: DispersionCoefficients,
    variant: CompanionVariant,
    dt: f64,
    nonlinear: bool,
    dealias: bool,
    transform: Transform,
    kappa: WaveNumbers,
    phase: Vec<Complex64>,
}

impl SplitStepSolver {
    pub fn new(grid: GridConfig, c: DispersionCoefficients, variant: CompanionVariant, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", format!("time step must be positive, got {dt}")));
        }
        variant.check_coefficients(&c)?;
        let kappa = WaveNumbers::for_grid(&grid);
        Ok(Self {
            grid,
            c,
            variant,
            dt,
            nonlinear: true,
            dealias: false,
            transform: Transform::new(grid.n_x),
            phase: propagator_multipliers(&c, dt, &kappa),
            kappa,
        })
    }

    /// Switches the quintic nonlinearity on or off.
    pub fn with_nonlinear(mut self, on: bool) -> Self {
        self.nonlinear = on;
        self
    }

    /// Zeroes modes with `|k| > n/3` of the transformed nonlinearity.
    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial_state(&self, u_hat: Vec<Block>) -> Result<StepperState> {
        StepperState::new(self.grid, u_hat, self.dt)
    }

    pub fn step(&self, state: &mut StepperState) {
        debug_assert_eq!(state.dt, self.dt);
        apply_multipliers(&mut state.u_hat, &self.phase);
        if self.nonlinear {
            let psi = self.nonlinearity(&state.u_hat);
            for (u, p) in state.u_hat.iter_mut().zip(&psi) {
                u.axpy(Complex64::new(self.dt, 0.0), p);
            }
        }
        state.step_count += 1;
        state.t = state.step_count as f64 * self.dt;
    }

    pub fn advance(&self, state: &mut StepperState, steps: u64) {
        for _ in 0..steps {
            self.step(state);
        }
    }

    /// Steps until `state.t` is the multiple of `dt` nearest to `t`.
    pub fn advance_to(&self, state: &mut StepperState, t: f64) {
        let target = (t / self.dt).round().max(0.0) as u64;
        if target > state.step_count {
            self.advance(state, target - state.step_count);
        }
    }

    /// `F(Ψ(g, g̃, ∂g, ∂g̃, ∂²g, ∂²g̃))` for the spectrum `v`.
    fn nonlinearity(&self, v: &[Block]) -> Vec<Block> {
        let t = &self.transform;
        let g = t.inverse_field(v);
        let dg = derivative_spectrum(t, &self.kappa, v, 1);
        let d2g = derivative_spectrum(t, &self.kappa, v, 2);
        let gt = companion_profile(&g, self.variant);
        let dgt = derivative_with(t, &self.kappa, &gt, 1);
        let d2gt = derivative_with(t, &self.kappa, &gt, 2);
        let psi: Vec<Block> = (0..g.len())
            .map(|j| quintic_rhs_point(&g[j], &gt[j], &dg[j], &dgt[j], &d2g[j], &d2gt[j], &self.c))
            .collect();
        let mut psi_hat = t.forward_field(&psi);
        if self.dealias {
            let n = psi_hat.len();
            for (k, b) in psi_hat.iter_mut().enumerate() {
                let signed = if k < n / 2 { k } else { n - k };
                if 3 * signed > n {
                    *b = Block::zeros(b.rows(), b.cols());
                }
            }
        }
        psi_hat
    }
}

fn derivative_spectrum(t: &Transform, kappa: &WaveNumbers, v: &[Block], order: u32) -> Vec<Block> {
    let mut spec = v.to_vec();
    let m: Vec<Complex64> = (0..kappa.len()).map(|k| kappa.kappa_pow(k, order)).collect();
    apply_multipliers(&mut spec, &m);
    t.inverse_field(&spec)
}

/// Companion built from the current-step field. For the reverse-time
/// variants the `-t` data is not available to a forward stepper, so the
/// current step stands in for it.
pub fn companion_profile(g: &[Block], v: CompanionVariant) -> Vec<Block> {
    let n = g.len();
    match v {
        CompanionVariant::Adjoint => g.iter().map(Block::adjoint).collect(),
        CompanionVariant::NegatedAdjoint => g.iter().map(|b| -&b.adjoint()).collect(),
        CompanionVariant::ReverseSpaceTimeTranspose => (0..n).map(|j| g[(n - j) % n].transpose()).collect(),
        CompanionVariant::ReverseTimeTranspose => g.iter().map(Block::transpose).collect(),
    }
}

/// One step with a freshly built solver.
pub fn splitstep_advance(state: &StepperState, c: &DispersionCoefficients, v: CompanionVariant) -> Result<StepperState> {
    let solver = SplitStepSolver::new(state.grid, *c, v, state.dt)?;
    let mut next = state.clone();
    solver.step(&mut next);
    Ok(next)
}

/// `u₀ = F(g₀)` with `g₀ = g(0, 0; x, 0)` from the Fredholm solve. At time
/// zero the propagator is the identity, so the coefficients do not enter.
pub fn splitstep_initial_data(p0: &ScatteringField, v: CompanionVariant, dt: f64) -> Result<StepperState> {
    let solution = gp_solution_at_time(p0, 0.0, v, &DispersionCoefficients::zero())?;
    let u_hat = Transform::new(p0.grid.n_x).forward_field(&solution.field.g);
    StepperState::new(p0.grid, u_hat, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::max_distance;
    use crate::spectral::evolve_samples;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_steps_compose_to_single_propagation() {
        let grid = GridConfig::scalar(40.0, 64).unwrap();
        let cc = DispersionCoefficients::reference();
        let u0: Vec<Block> = grid
            .x_points()
            .iter()
            .map(|&x| Block::scalar(c(0.15 / (x / 40.0).cosh(), 0.0)))
            .collect();
        let solver = SplitStepSolver::new(grid, cc, CompanionVariant::Adjoint, 1e-3)
            .unwrap()
            .with_nonlinear(false);
        let mut state = solver.initial_state(Transform::new(64).forward_field(&u0)).unwrap();
        solver.advance(&mut state, 500);
        assert_eq!(state.step_count, 500);
        assert_eq!(state.t, 0.5);
        let direct = evolve_samples(&u0, &grid, 0.5, &cc);
        assert!(max_distance(&state.physical(), &direct) < 1e-9);
    }

    #[test]
    fn single_mode_step_matches_hand_computation() {
        // g = A e^{iKx}: every term of Ψ is a multiple of g, so one step stays
        // in mode k with u⁺ = v + Δt·n·(2μ₂|A|² + 6iμ₃K|A|² + 2μ₄(3|A|⁴ - 6K²|A|²)) A'
        let n = 32;
        let grid = GridConfig::scalar(40.0, n).unwrap();
        let cc = DispersionCoefficients::reference();
        let dt = 1e-3;
        let mode = 3;
        let kk = 2.0 * std::f64::consts::PI * mode as f64 / 40.0;
        let amp = c(1e-3, 2e-4);
        let mut u_hat = vec![Block::scalar(c(0.0, 0.0)); n];
        // forward transform is unnormalised: A e^{iKx_j} has coefficient n A e^{-iK L/2}
        let shift = c(0.0, -kk * 20.0).exp();
        u_hat[mode] = Block::scalar(amp * shift * n as f64);
        let solver = SplitStepSolver::new(grid, cc, CompanionVariant::Adjoint, dt).unwrap();
        let mut state = solver.initial_state(u_hat.clone()).unwrap();
        solver.step(&mut state);

        let rate = -cc.mu2 * kk * kk + cc.mu3 * c(0.0, -kk.powi(3)) + cc.mu4 * kk.powi(4);
        let a1 = amp * (rate * dt).exp();
        let m2 = a1.norm_sqr();
        let factor = cc.mu2 * 2.0 * m2 + cc.mu3 * c(0.0, 6.0 * kk * m2) + cc.mu4 * 2.0 * (3.0 * m2 * m2 - 6.0 * kk * kk * m2);
        let expected = (a1 + factor * a1 * dt) * shift * n as f64;
        for (k, b) in state.u_hat.iter().enumerate() {
            let want = if k == mode { expected } else { c(0.0, 0.0) };
            assert!((b.as_scalar() - want).norm() < 1e-12, "mode {k}");
        }
    }

    #[test]
    fn zero_profile_gives_zero_initial_data() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let state = splitstep_initial_data(&ScatteringField::zeros(grid), CompanionVariant::Adjoint, 1e-3).unwrap();
        assert!(state.u_hat.iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn small_amplitude_initial_data_is_nearly_the_profile() {
        let grid = GridConfig::scalar(40.0, 64).unwrap();
        let mut errs = Vec::new();
        for eps in [1e-2, 5e-3] {
            let p0 = ScatteringField::scalar(grid, |x| c(eps / (x / 40.0).cosh(), 0.0));
            let state = splitstep_initial_data(&p0, CompanionVariant::Adjoint, 1e-3).unwrap();
            let reference = Transform::new(64).forward_field(&p0.samples);
            let rel = max_distance(&state.u_hat, &reference) / crate::block::max_norm(&reference);
            errs.push(rel);
        }
        // relative error is O(ε²)
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.5, "{errs:?}");
    }

    #[test]
    fn initial_data_is_the_fredholm_output() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        let p0 = ScatteringField::scalar(grid, |x| c(0.15 / (x / 40.0).cosh(), 0.0));
        let state = splitstep_initial_data(&p0, CompanionVariant::Adjoint, 1e-3).unwrap();
        let g0 = gp_solution_at_time(&p0, 0.0, CompanionVariant::Adjoint, &DispersionCoefficients::reference())
            .unwrap()
            .field
            .g;
        assert_eq!(state.u_hat, Transform::new(32).forward_field(&g0));
    }

    #[test]
    fn rejects_nonpositive_step() {
        let grid = GridConfig::scalar(40.0, 32).unwrap();
        assert!(SplitStepSolver::new(grid, DispersionCoefficients::zero(), CompanionVariant::Adjoint, 0.0).is_err());
    }

    #[test]
    fn companion_profiles() {
        let g: Vec<Block> = (0..4)
            .map(|j| Block::from_row_major(1, 2, &[c(j as f64, 1.0), c(0.0, j as f64)]))
            .collect();
        let rst = companion_profile(&g, CompanionVariant::ReverseSpaceTimeTranspose);
        assert_eq!(rst[1], g[3].transpose());
        assert_eq!(rst[0], g[0].transpose());
        let neg = companion_profile(&g, CompanionVariant::NegatedAdjoint);
        assert_eq!(neg[2], -&g[2].adjoint());
    }
}
