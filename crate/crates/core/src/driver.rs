//! Outer alternating minimisation, energy bookkeeping and convergence diagnostics.
//!
//! The energy of an iterate `x = (n, u)` splits as `H = g + l` with
//!
//! ```text
//! g1(n) = alpha |grad P n| + beta |P n - grad u|     l1(n) = eta1/2 ||n - grad f||^2
//! g2(u) = beta |grad u - P n|                        l2(u) = eta2/2 ||u - f||^2
//! H     = alpha |grad P n| + beta |grad u - P n| + l1 + l2  =  g1 + l1 + l2
//! ```
//!
//! The loop produces `x_0, x_{1/2}, x_1, x_{3/2}, ...` where the half iterate
//! `x_{k+1/2} = (n_{k+1}, u_k)` follows the n-block solve. Exact block
//! minimisation makes `H` non-increasing along that sequence, which the
//! diagnostics here check together with the block sufficient-decrease
//! inequalities and the `O(1/k)` rate bound.

use crate::diff::{grad, jacobian};
use crate::error::{Error, Result};
use crate::field::{norm_l2, sum_pointwise_euclid, ScalarField, VecField};
use crate::io::psnr;
use crate::params::Params;
use crate::projector::{project, PoissonPlan};
use crate::solvers::{solve_sub1, solve_sub2, Sub1State, Sub2State};

/// Guard for relative-change denominators.
pub const REL_EPS: f64 = 1e-12;

/// Energy of one iterate and its block decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub g1: f64,
    pub g2: f64,
    pub l1: f64,
    pub l2: f64,
}

pub fn energy_total(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
    n: &VecField,
    u: &ScalarField,
) -> Result<Energy> {
    f.ensure_same_shape(n)?;
    f.ensure_same_shape(u)?;
    let pn = project(plan, n)?;
    let tv = params.alpha * sum_pointwise_euclid(&jacobian(&pn));
    let coupling = params.beta * sum_pointwise_euclid(&grad(u).sub(&pn));
    let l1 = 0.5 * params.eta1 * norm_l2(&n.sub(&grad(f))).powi(2);
    let l2 = 0.5 * params.eta2 * norm_l2(&u.sub(f)).powi(2);
    Ok(Energy {
        total: tv + coupling + l1 + l2,
        g1: tv + coupling,
        g2: coupling,
        l1,
        l2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Half,
    Full,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Half => "half",
            Stage::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Iteration index; half iterates sit at `k + 0.5`.
    pub k: f64,
    pub stage: Stage,
    pub energy: Energy,
    /// `||G^1||` at this iterate, when probed.
    pub gradmap1: Option<f64>,
    /// `||G^2||` at this iterate, when probed.
    pub gradmap2: Option<f64>,
    /// Primal change over the last probe sweep of each block.
    pub probe_residual1: Option<f64>,
    pub probe_residual2: Option<f64>,
    /// Relative change of the block updated to reach this record.
    pub primal_change: f64,
    pub psnr: Option<f64>,
    /// `||x - x_final||` over both blocks, filled in once the run ends.
    pub dist_to_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub eta1: f64,
    pub eta2: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn from_records(eta1: f64, eta2: f64, records: Vec<TraceRecord>) -> Self {
        Self {
            eta1,
            eta2,
            records,
        }
    }

    pub fn full(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.stage == Stage::Full)
    }

    pub fn last_full(&self) -> Option<&TraceRecord> {
        self.full().last()
    }

    /// First consecutive pair where the energy rises by more than `slack`.
    pub fn energy_increase(&self, slack: f64) -> Option<(usize, f64)> {
        self.records.windows(2).enumerate().find_map(|(i, w)| {
            let rise = w[1].energy.total - w[0].energy.total;
            (rise > slack).then_some((i + 1, rise))
        })
    }
}

#[derive(Clone, Debug)]
pub struct Denoised {
    pub u: ScalarField,
    pub n: VecField,
    pub trace: Trace,
    /// Full outer iterations performed.
    pub iterations: usize,
}

/// Runs the alternating minimisation from `u_0 = f`, `n_0 = grad f`.
pub fn denoise(params: &Params, f: &ScalarField) -> Result<Denoised> {
    denoise_with_reference(params, f, None)
}

/// As [`denoise`], recording PSNR against `clean` in the trace.
pub fn denoise_with_reference(
    params: &Params,
    f: &ScalarField,
    clean: Option<&ScalarField>,
) -> Result<Denoised> {
    params.validate()?;
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    if let Some(c) = clean {
        f.ensure_same_shape(c)?;
    }
    let plan = PoissonPlan::new(f.shape());
    let mut run = Run {
        params,
        plan: &plan,
        f,
        clean,
        records: Vec::new(),
        iterates: Vec::new(),
    };

    let mut n = grad(f);
    let mut u = f.clone();
    let mut warm1: Option<Sub1State> = None;
    let mut warm2: Option<Sub2State> = None;
    run.record(0.0, Stage::Full, &n, &u, 0.0, None, None)?;

    let mut iterations = 0;
    for k in 1..=params.outer_iters {
        let w1 = warm1.as_ref().filter(|_| params.warm_start);
        let s1 = solve_sub1(params, &plan, f, &u, w1)?;
        let n_next = s1.state.n.clone();
        let change = relative_change(&n_next, &n);
        warm1 = Some(s1.state);
        n = n_next;
        run.record(
            k as f64 - 0.5,
            Stage::Half,
            &n,
            &u,
            change,
            warm1.as_ref(),
            warm2.as_ref(),
        )?;

        let w2 = warm2.as_ref().filter(|_| params.warm_start);
        let s2 = solve_sub2(params, f, &n, w2)?;
        let u_next = s2.state.u.clone();
        let change = relative_change(&u_next, &u);
        warm2 = Some(s2.state);
        u = u_next;
        run.record(
            k as f64,
            Stage::Full,
            &n,
            &u,
            change,
            warm1.as_ref(),
            warm2.as_ref(),
        )?;

        iterations = k;
        if params.outer_tol > 0.0 && change <= params.outer_tol {
            break;
        }
    }

    let records = run.finish(&n, &u);
    Ok(Denoised {
        u,
        n,
        trace: Trace::from_records(params.eta1, params.eta2, records),
        iterations,
    })
}

struct Run<'a> {
    params: &'a Params,
    plan: &'a PoissonPlan,
    f: &'a ScalarField,
    clean: Option<&'a ScalarField>,
    records: Vec<TraceRecord>,
    iterates: Vec<(VecField, ScalarField)>,
}

impl Run<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        k: f64,
        stage: Stage,
        n: &VecField,
        u: &ScalarField,
        primal_change: f64,
        warm1: Option<&Sub1State>,
        warm2: Option<&Sub2State>,
    ) -> Result<()> {
        let energy = energy_total(self.params, self.plan, self.f, n, u)?;
        let gm = if self.params.probe_iters > 0 {
            Some(gradient_mapping_warm(
                self.params,
                self.plan,
                self.f,
                n,
                u,
                self.params.probe_iters,
                warm1,
                warm2,
            )?)
        } else {
            None
        };
        self.records.push(TraceRecord {
            k,
            stage,
            energy,
            gradmap1: gm.map(|g| g.gm1),
            gradmap2: gm.map(|g| g.gm2),
            probe_residual1: gm.map(|g| g.residual1),
            probe_residual2: gm.map(|g| g.residual2),
            primal_change,
            psnr: self.clean.map(|c| psnr(u, c)),
            dist_to_final: 0.0,
        });
        self.iterates.push((n.clone(), u.clone()));
        Ok(())
    }

    fn finish(mut self, n: &VecField, u: &ScalarField) -> Vec<TraceRecord> {
        for (rec, (ni, ui)) in self.records.iter_mut().zip(&self.iterates) {
            rec.dist_to_final = (norm_l2(&ni.sub(n)).powi(2) + norm_l2(&ui.sub(u)).powi(2)).sqrt();
        }
        self.records
    }
}

fn relative_change<const C: usize>(
    new: &crate::field::Field<C>,
    old: &crate::field::Field<C>,
) -> f64 {
    norm_l2(&new.sub(old)) / norm_l2(new).max(REL_EPS)
}

/// The two-step scheme: smooth the gradient field against `u = f`, then fit
/// the image to it. Both steps start from zero duals.
pub fn lrt_reference(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
) -> Result<(ScalarField, VecField)> {
    params.validate()?;
    let step1 = solve_sub1(params, plan, f, f, None)?;
    let step2 = solve_sub2(params, f, &step1.state.n, None)?;
    Ok((step2.state.u, step1.state.n))
}

/// Block gradient-mapping norms with the probe budget that produced them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientMapping {
    /// `eta1 ||n - prox_{g1/eta1}(n - grad l1(n) / eta1)||`
    pub gm1: f64,
    /// `eta2 ||u - prox_{g2/eta2}(u - grad l2(u) / eta2)||`
    pub gm2: f64,
    /// Primal change in the last sweep of each probe, a proxy for the prox error.
    pub residual1: f64,
    pub residual2: f64,
    pub probe_iters: usize,
}

/// Gradient mappings at `(n, u)` with probes started from zero duals.
pub fn gradient_mapping(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
    n: &VecField,
    u: &ScalarField,
    probe_iters: usize,
) -> Result<GradientMapping> {
    gradient_mapping_warm(params, plan, f, n, u, probe_iters, None, None)
}

/// Gradient mappings at `(n, u)`, starting each probe from the given duals.
///
/// For the n-block the prox-gradient point is `n - (n - grad f) = grad f`, so
/// the prox is exactly the n-subproblem with `u` frozen; likewise the u-block
/// prox is the u-subproblem with `P n` frozen. Each is approximated by
/// `probe_iters` dual sweeps.
#[allow(clippy::too_many_arguments)]
pub fn gradient_mapping_warm(
    params: &Params,
    plan: &PoissonPlan,
    f: &ScalarField,
    n: &VecField,
    u: &ScalarField,
    probe_iters: usize,
    warm1: Option<&Sub1State>,
    warm2: Option<&Sub2State>,
) -> Result<GradientMapping> {
    if probe_iters == 0 {
        return Err(Error::InvalidParams("probe_iters must be >= 1".into()));
    }
    let probe = Params {
        inner_iters: probe_iters,
        ..params.clone()
    };
    let t1 = solve_sub1(&probe, plan, f, u, warm1)?;
    let pn = project(plan, n)?;
    let t2 = solve_sub2(&probe, f, &pn, warm2)?;
    Ok(GradientMapping {
        gm1: params.eta1 * norm_l2(&n.sub(&t1.state.n)),
        gm2: params.eta2 * norm_l2(&u.sub(&t2.state.u)),
        residual1: t1.report.last_primal_change,
        residual2: t2.report.last_primal_change,
        probe_iters,
    })
}

/// Outcome of the block sufficient-decrease check for one half step.
#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseRow {
    /// Index of the record the step starts from.
    pub k: f64,
    pub stage: Stage,
    pub drop: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseReport {
    pub rows: Vec<DecreaseRow>,
}

impl DecreaseReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.pass).count() as f64 / self.rows.len() as f64
    }
}

/// Checks `H(x) - H(x') + slack >= ||G||^2 / (2 eta)` for every step of the
/// trace, where `G` is the mapping of the block being updated, measured at
/// the starting record, and `slack = 10 eta r^2` with `r` the probe residual.
pub fn sufficient_decrease(trace: &Trace) -> DecreaseReport {
    let mut rows = Vec::new();
    for w in trace.records.windows(2) {
        let (from, to) = (&w[0], &w[1]);
        let (eta, gm, res) = match to.stage {
            Stage::Half => (trace.eta1, from.gradmap1, from.probe_residual1),
            Stage::Full => (trace.eta2, from.gradmap2, from.probe_residual2),
        };
        let (Some(gm), Some(res)) = (gm, res) else {
            continue;
        };
        let drop = from.energy.total - to.energy.total;
        let bound = gm * gm / (2.0 * eta);
        let slack = 10.0 * eta * res * res;
        rows.push(DecreaseRow {
            k: from.k,
            stage: to.stage,
            drop,
            bound,
            slack,
            pass: drop + slack >= bound,
        });
    }
    DecreaseReport { rows }
}

pub const MIN_RATE_RECORDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub k: usize,
    /// `H(x_k) - H*`
    pub gap: f64,
    pub monotone: bool,
    /// `A_{k-1} - A_k >= gamma A_k^2`
    pub recursion: bool,
    /// `A_k <= C / k`
    pub bound: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub h_star: f64,
    /// Largest distance of a traced full iterate from the final one.
    pub m_hat: f64,
    pub gamma_hat: f64,
    pub c: f64,
    pub slack: f64,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn monotone(&self) -> bool {
        self.rows.iter().all(|r| r.monotone)
    }

    pub fn recursion(&self) -> bool {
        self.rows.iter().all(|r| r.recursion)
    }

    pub fn bound(&self) -> bool {
        self.rows.iter().all(|r| r.bound)
    }
}

/// Checks the sublinear-rate inequalities on the full iterates of `trace`.
///
/// With `A_k = H(x_k) - h_star`, `M = max_k ||x_k - x_final||`,
/// `gamma = 1 / (2 min(eta1, eta2) M^2)` and
/// `C = max(2 A_0, 3 min(eta1, eta2) M^2)`, each `k >= 1` is checked for
/// monotonicity, the recursion `A_{k-1} - A_k >= gamma A_k^2` and the bound
/// `A_k <= C / k`, all with slack `1e-9 max(|H(x_0)|, 1e-300)`.
pub fn rate_check(trace: &Trace, h_star: f64) -> Result<RateReport> {
    let full: Vec<&TraceRecord> = trace.full().collect();
    if full.len() < MIN_RATE_RECORDS {
        return Err(Error::InsufficientTrace {
            found: full.len(),
            required: MIN_RATE_RECORDS,
        });
    }
    let h0 = full[0].energy.total;
    let slack = 1e-9 * h0.abs().max(1e-300);
    let min_energy = full
        .iter()
        .map(|r| r.energy.total)
        .fold(f64::INFINITY, f64::min);
    if h_star > min_energy + slack {
        return Err(Error::ProxyAboveTrace {
            proxy: h_star,
            min_energy,
        });
    }
    let eta_min = trace.eta1.min(trace.eta2);
    let m_hat = full.iter().map(|r| r.dist_to_final).fold(0.0, f64::max);
    let gamma_hat = 1.0 / (2.0 * eta_min * m_hat * m_hat);
    let gaps: Vec<f64> = full.iter().map(|r| r.energy.total - h_star).collect();
    let c = (2.0 * gaps[0]).max(3.0 * eta_min * m_hat * m_hat);

    let mut rows = Vec::with_capacity(gaps.len());
    rows.push(RateRow {
        k: 0,
        gap: gaps[0],
        monotone: true,
        recursion: true,
        bound: true,
    });
    for k in 1..gaps.len() {
        let (prev, a) = (gaps[k - 1], gaps[k]);
        let recursion_rhs = if a <= slack { 0.0 } else { gamma_hat * a * a };
        rows.push(RateRow {
            k,
            gap: a,
            monotone: a <= prev + slack,
            recursion: prev - a + slack >= recursion_rhs,
            bound: a <= c / k as f64 + slack,
        });
    }
    Ok(RateReport {
        h_star,
        m_hat,
        gamma_hat,
        c,
        slack,
        rows,
    })
}
