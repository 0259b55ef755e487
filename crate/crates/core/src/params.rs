//! Model weights, dual step sizes and iteration budgets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::{div, div_tensor, grad, jacobian};
use crate::error::{Error, Result};
use crate::field::{norm_l2, Field, TensorField, VecField};
use crate::projector::{project, PoissonPlan};

pub const DEFAULT_TAU_P: f64 = 1.0 / 64.0;
pub const DEFAULT_TAU_Q: f64 = 1.0 / 4.0;
pub const DEFAULT_TAU_S: f64 = 1.0 / 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Weight of `|grad n|`.
    pub alpha: f64,
    /// Weight of the coupling term `|grad u - n|`.
    pub beta: f64,
    /// Fidelity weight of `n` to `grad f`; also the Lipschitz constant of the n-block.
    pub eta1: f64,
    /// Fidelity weight of `u` to `f`; also the Lipschitz constant of the u-block.
    pub eta2: f64,
    pub tau_p: f64,
    pub tau_q: f64,
    pub tau_s: f64,
    /// Maximum dual sweeps per subproblem solve.
    pub inner_iters: usize,
    /// Stop a subproblem once the largest per-cell dual change is at most this.
    pub inner_tol: f64,
    pub outer_iters: usize,
    /// Stop once `||u_k - u_{k-1}|| / ||u_k||` is at most this. Zero runs the full budget.
    pub outer_tol: f64,
    /// Dual sweeps used to approximate each prox when recording gradient
    /// mappings in the trace; zero skips the diagnostic.
    pub probe_iters: usize,
    /// Reuse the previous outer iteration's duals as the starting point.
    pub warm_start: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.05,
            eta1: 1.0,
            eta2: 1.0,
            tau_p: DEFAULT_TAU_P,
            tau_q: DEFAULT_TAU_Q,
            tau_s: DEFAULT_TAU_S,
            inner_iters: 300,
            inner_tol: 1e-6,
            outer_iters: 100,
            outer_tol: 1e-5,
            probe_iters: 300,
            warm_start: true,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.eta1.is_finite() && self.eta1 > 0.0) {
            return bad(format!(
                "eta1 must be > 0 (the n-update divides by eta1), got {}",
                self.eta1
            ));
        }
        if !(self.eta2.is_finite() && self.eta2 > 0.0) {
            return bad(format!(
                "eta2 must be > 0 (the u-update divides by eta2), got {}",
                self.eta2
            ));
        }
        for (name, v) in [
            ("tau_p", self.tau_p),
            ("tau_q", self.tau_q),
            ("tau_s", self.tau_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be >= 1".into());
        }
        if self.outer_iters == 0 {
            return bad("outer_iters must be >= 1".into());
        }
        for (name, v) in [("inner_tol", self.inner_tol), ("outer_tol", self.outer_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Copy of `self` with step sizes fitted to the operator norms of this grid.
    ///
    /// The joint (p, q) update is stable when
    /// `tau_p * alpha * ||P div_tensor||^2 / eta1 + tau_q * beta / eta1 <= 1`;
    /// each block gets half of that budget. The s update uses
    /// `tau_s * beta * ||div||^2 / eta2 <= 1`. Norms come from a seeded power
    /// iteration with a 2% safety margin. Blocks with a zero weight keep their
    /// current step.
    pub fn with_estimated_steps(&self, plan: &PoissonPlan) -> Result<Self> {
        self.validate()?;
        let norm_p = projected_tensor_div_norm_sq(plan)? * 1.02;
        let norm_s = div_norm_sq(plan) * 1.02;
        let mut out = self.clone();
        if self.alpha > 0.0 && norm_p > 0.0 {
            out.tau_p = 0.5 * self.eta1 / (self.alpha * norm_p);
        }
        if self.beta > 0.0 {
            out.tau_q = 0.5 * self.eta1 / self.beta;
            if norm_s > 0.0 {
                out.tau_s = self.eta2 / (self.beta * norm_s);
            }
        }
        Ok(out)
    }
}

const POWER_ITERS: usize = 200;

/// Largest eigenvalue of `-jacobian . P . div_tensor`, i.e. `||P div_tensor||^2`.
pub fn projected_tensor_div_norm_sq(plan: &PoissonPlan) -> Result<f64> {
    let mut x: TensorField = seeded(plan, 0x5eed_0001);
    power_iterate(&mut x, |p| {
        Ok(jacobian(&project(plan, &div_tensor(p))?).neg())
    })
}

/// Largest eigenvalue of `-grad . div`, i.e. `||div||^2` (at most 8).
pub fn div_norm_sq(plan: &PoissonPlan) -> f64 {
    let mut x: VecField = seeded(plan, 0x5eed_0002);
    power_iterate(&mut x, |s| Ok(grad(&div(s)).neg())).expect("infallible operator")
}

fn seeded<const C: usize>(plan: &PoissonPlan, seed: u64) -> Field<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(plan.shape(), |_, _| {
        std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
    })
}

fn power_iterate<const C: usize>(
    x: &mut Field<C>,
    op: impl Fn(&Field<C>) -> Result<Field<C>>,
) -> Result<f64> {
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let nx = norm_l2(x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        let y = op(x)?;
        let ny = norm_l2(&y);
        estimate = ny / nx;
        if ny == 0.0 {
            return Ok(0.0);
        }
        *x = y.scale(1.0 / ny);
    }
    Ok(estimate)
}
