//! Semi-implicit dual iterations for the two subproblems.
//!
//! Subproblem 1 (the gradient field `n`, `u` frozen):
//!
//! ```text
//! min_n  alpha |grad P n| + eta1/2 ||n - grad f||^2 + beta |P n - grad u|
//! ```
//!
//! dualised with `p` (tensor, against `grad P n`) and `q` (vector, against
//! `P n - grad u`). The primal is recovered from the duals in closed form,
//! `n = grad f - (alpha/eta1) P div_tensor p - (beta/eta1) P q`, and the ascent
//! directions are `r_p = jacobian(-n)` and `r_q = n - grad u`.
//!
//! Subproblem 2 (the image `u`, `n` frozen):
//!
//! ```text
//! min_u  beta |grad u - n| + eta2/2 ||u - f||^2
//! ```
//!
//! with dual `s`, primal `u = f - (beta/eta2) div s` and direction
//! `r_s = n - grad u`.
//!
//! Every dual is advanced with `x' = (x + tau r) / (1 + tau |r|)`, which keeps
//! it in the pointwise unit ball. A solve returns the sweep with the lowest
//! primal objective seen, so its result never scores worse than the warm start.

use crate::diff::{div, div_tensor, grad, jacobian};
use crate::error::{Error, Result};
use crate::field::{norm_l2, sum_pointwise_euclid, Field, ScalarField, TensorField, VecField};
use crate::params::Params;
use crate::projector::{project, PoissonPlan};

/// Slack allowed on the pointwise unit-ball constraint of a dual.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Sub1State {
    pub p: TensorField,
    pub q: VecField,
    pub n: VecField,
}

impl Sub1State {
    /// Zero duals; the matching primal is `grad f` itself.
    pub fn cold(grad_f: &VecField) -> Self {
        let shape = grad_f.shape();
        Self {
            p: TensorField::zeros(shape),
            q: VecField::zeros(shape),
            n: grad_f.clone(),
        }
    }

    fn check_feasible(&self) -> Result<()> {
        let m = self.p.max_magnitude().max(self.q.max_magnitude());
        if m > 1.0 + FEASIBILITY_TOL {
            return Err(Error::InfeasibleDual(m));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sub2State {
    pub s: VecField,
    pub u: ScalarField,
}

impl Sub2State {
    pub fn cold(f: &ScalarField) -> Self {
        Self {
            s: VecField::zeros(f.shape()),
            u: f.clone(),
        }
    }

    fn check_feasible(&self) -> Result<()> {
        let m = self.s.max_magnitude();
        if m > 1.0 + FEASIBILITY_TOL {
            return Err(Error::InfeasibleDual(m));
        }
        Ok(())
    }
}

/// What one subproblem solve did.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerReport {
    pub sweeps: usize,
    /// The dual change fell below `inner_tol` before the sweep budget ran out.
    pub converged: bool,
    /// Largest per-cell dual change in the final sweep.
    pub last_dual_change: f64,
    /// L2 norm of the primal change in the final sweep.
    pub last_primal_change: f64,
    /// Objective at the warm start, then after every sweep.
    pub objective: Vec<f64>,
    /// Objective of the returned state.
    pub best_objective: f64,
}

#[derive(Clone, Debug)]
pub struct Sub1Solve {
    pub state: Sub1State,
    pub report: InnerReport,
}

#[derive(Clone, Debug)]
pub struct Sub2Solve {
    pub state: Sub2State,
    pub report: InnerReport,
}

/// Closed-form primal of subproblem 1 given its duals.
pub fn sub1_primal_from_duals(
    params: &Params,
    plan: &PoissonPlan,
    grad_f: &VecField,
    st: &Sub1State,
) -> Result<VecField> {
    grad_f.ensure_same_shape(&st.p)?;
    grad_f.ensure_same_shape(&st.q)?;
    let a = params.alpha / params.eta1;
    let b = params.beta / params.eta1;
    let correction = div_tensor(&st.p).scale(a).add_scaled(b, &st.q);
    Ok(grad_f.sub(&project(plan, &correction)?))
}

/// Ascent directions `(r_p, r_q) = (jacobian(-n), n - grad u)` with `n` from the duals.
pub fn sub1_directions(
    params: &Params,
    plan: &PoissonPlan,
    grad_f: &VecField,
    grad_u: &VecField,
    st: &Sub1State,
) -> Result<(TensorField, VecField)> {
    grad_f.ensure_same_shape(grad_u)?;
    let n = sub1_primal_from_duals(params, plan, grad_f, st)?;
    Ok(sub1_directions_at(&n, grad_u))
}

fn sub1_directions_at(n: &VecField, grad_u: &VecField) -> (TensorField, VecField) {
    (jacobian(&n.neg()), n.sub(grad_u))
}

/// Semi-implicit dual update `(x + tau r) / (1 + tau |r|)`, per cell.
pub fn dual_step<const C: usize>(x: &Field<C>, r: &Field<C>, tau: f64) -> Field<C> {
    assert_eq!(x.shape(), r.shape(), "shape mismatch in dual_step");
    let mut out = x.clone();
    for (o, rc) in out.cells_mut().zip(r.cells()) {
        let mag = rc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let denom = 1.0 + tau * mag;
        for (ov, rv) in o.iter_mut().zip(rc) {
            *ov = (*ov + tau * rv) / denom;
        }
    }
    out
}

/// Objective of subproblem 1 at `n`, with the projection applied explicitly.
pub fn sub1_objective(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
    u: &ScalarField,
    n: &VecField,
) -> Result<f64> {
    f.ensure_same_shape(u)?;
    f.ensure_same_shape(n)?;
    let pn = project(plan, n)?;
    Ok(params.alpha * sum_pointwise_euclid(&jacobian(&pn))
        + 0.5 * params.eta1 * norm_l2(&n.sub(&grad(f))).powi(2)
        + params.beta * sum_pointwise_euclid(&pn.sub(&grad(u))))
}

/// Objective of subproblem 2 at `u`, using `n` as given.
pub fn sub2_objective(
    params: &Params,
    f: &ScalarField,
    n: &VecField,
    u: &ScalarField,
) -> Result<f64> {
    f.ensure_same_shape(u)?;
    f.ensure_same_shape(n)?;
    Ok(params.beta * sum_pointwise_euclid(&grad(u).sub(n))
        + 0.5 * params.eta2 * norm_l2(&u.sub(f)).powi(2))
}

/// Dual iterations for the n-block with `u_prev` frozen.
pub fn solve_sub1(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
    u_prev: &ScalarField,
    warm: Option<&Sub1State>,
) -> Result<Sub1Solve> {
    params.validate()?;
    f.ensure_same_shape(u_prev)?;
    if plan.shape() != f.shape() {
        return Err(Error::ShapeMismatch {
            expected: plan.shape(),
            found: f.shape(),
        });
    }
    let grad_f = grad(f);
    let grad_u = grad(u_prev);
    let mut st = match warm {
        Some(w) => {
            grad_f.ensure_same_shape(&w.p)?;
            grad_f.ensure_same_shape(&w.q)?;
            w.check_feasible()?;
            Sub1State {
                p: w.p.clone(),
                q: w.q.clone(),
                n: VecField::zeros(f.shape()),
            }
        }
        None => Sub1State::cold(&grad_f),
    };
    st.n = sub1_primal_from_duals(params, plan, &grad_f, &st)?;

    // Inside the loop n is already a fixed point of P (grad f is a gradient and
    // the correction is a P-image), so |r_p| and |r_q| are the two TV terms.
    let objective_at = |n: &VecField, rp: &TensorField, rq: &VecField| {
        params.alpha * sum_pointwise_euclid(rp)
            + 0.5 * params.eta1 * norm_l2(&n.sub(&grad_f)).powi(2)
            + params.beta * sum_pointwise_euclid(rq)
    };

    let (mut rp, mut rq) = sub1_directions_at(&st.n, &grad_u);
    let mut e = objective_at(&st.n, &rp, &rq);
    let mut best = (e, st.clone());
    let mut report = InnerReport {
        sweeps: 0,
        converged: false,
        last_dual_change: 0.0,
        last_primal_change: 0.0,
        objective: vec![e],
        best_objective: e,
    };
    for _ in 0..params.inner_iters {
        let p = dual_step(&st.p, &rp, params.tau_p);
        let q = dual_step(&st.q, &rq, params.tau_q);
        let change = p.max_cell_distance(&st.p).max(q.max_cell_distance(&st.q));
        let next = Sub1State {
            p,
            q,
            n: VecField::zeros(f.shape()),
        };
        let n = sub1_primal_from_duals(params, plan, &grad_f, &next)?;
        report.last_primal_change = norm_l2(&n.sub(&st.n));
        st = Sub1State { n, ..next };
        (rp, rq) = sub1_directions_at(&st.n, &grad_u);
        e = objective_at(&st.n, &rp, &rq);
        report.objective.push(e);
        report.sweeps += 1;
        report.last_dual_change = change;
        if e < best.0 {
            best = (e, st.clone());
        }
        if change <= params.inner_tol {
            report.converged = true;
            break;
        }
    }
    report.best_objective = best.0;
    Ok(Sub1Solve {
        state: best.1,
        report,
    })
}

/// Closed-form primal `u = f - (beta/eta2) div s`.
pub fn sub2_primal_from_dual(
    params: &Params,
    f: &ScalarField,
    st: &Sub2State,
) -> Result<ScalarField> {
    f.ensure_same_shape(&st.s)?;
    Ok(f.add_scaled(-params.beta / params.eta2, &div(&st.s)))
}

/// Ascent direction `r_s = n - grad u` with `u` from the dual.
pub fn sub2_direction(
    params: &Params,
    f: &ScalarField,
    n: &VecField,
    st: &Sub2State,
) -> Result<VecField> {
    f.ensure_same_shape(n)?;
    let u = sub2_primal_from_dual(params, f, st)?;
    Ok(n.sub(&grad(&u)))
}

/// Dual iterations for the u-block with `n` frozen.
pub fn solve_sub2(
    params: &Params,
    f: &ScalarField,
    n: &VecField,
    warm: Option<&Sub2State>,
) -> Result<Sub2Solve> {
    params.validate()?;
    f.ensure_same_shape(n)?;
    let mut st = match warm {
        Some(w) => {
            f.ensure_same_shape(&w.s)?;
            w.check_feasible()?;
            Sub2State {
                s: w.s.clone(),
                u: f.clone(),
            }
        }
        None => Sub2State::cold(f),
    };
    st.u = sub2_primal_from_dual(params, f, &st)?;

    let objective_at = |u: &ScalarField, rs: &VecField| {
        params.beta * sum_pointwise_euclid(rs) + 0.5 * params.eta2 * norm_l2(&u.sub(f)).powi(2)
    };
    let mut rs = n.sub(&grad(&st.u));
    let mut e = objective_at(&st.u, &rs);
    let mut best = (e, st.clone());
    let mut report = InnerReport {
        sweeps: 0,
        converged: false,
        last_dual_change: 0.0,
        last_primal_change: 0.0,
        objective: vec![e],
        best_objective: e,
    };
    for _ in 0..params.inner_iters {
        let s = dual_step(&st.s, &rs, params.tau_s);
        let change = s.max_cell_distance(&st.s);
        let next = Sub2State { s, u: f.clone() };
        let u = sub2_primal_from_dual(params, f, &next)?;
        report.last_primal_change = norm_l2(&u.sub(&st.u));
        st = Sub2State { u, ..next };
        rs = n.sub(&grad(&st.u));
        e = objective_at(&st.u, &rs);
        report.objective.push(e);
        report.sweeps += 1;
        report.last_dual_change = change;
        if e < best.0 {
            best = (e, st.clone());
        }
        if change <= params.inner_tol {
            report.converged = true;
            break;
        }
    }
    report.best_objective = best.0;
    Ok(Sub2Solve {
        state: best.1,
        report,
    })
}
