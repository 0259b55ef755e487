//! Brute-force reference minimisers and operator identity checks for tiny grids.
//!
//! Everything here is built from dense matrices assembled by index arithmetic,
//! independently of the stencils in [`crate::diff`], so agreement between the
//! two is evidence rather than tautology.
//!
//! The minimiser replaces every `|v|` by `sqrt(|v|^2 + eps^2)` and runs damped
//! Newton with Armijo backtracking, shrinking `eps` geometrically from `1e-1`
//! down to the requested value. The n-block is parameterised by a potential
//! `phi` with `n = grad phi`, so the curl-free constraint holds exactly; a
//! penalty on `sum(phi)` removes the constant null direction without changing
//! `n`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::{div, div_tensor, grad, jacobian};
use crate::error::{Error, Result};
use crate::field::{inner, norm_l2, Field, ScalarField, Shape, TensorField, VecField};
use crate::params::Params;
use crate::projector::{project, PoissonPlan};

pub const MAX_ORACLE_SIDE: usize = 8;
pub const DEFAULT_EPSILON: f64 = 1e-6;
const EPS_START: f64 = 1e-1;
const ARMIJO: f64 = 1e-4;
const ROUNDOFF: f64 = 1e-14;

#[derive(Clone, Debug)]
pub enum Objective {
    /// Minimise over `n = grad phi` with `u` fixed.
    Sub1 { f: ScalarField, u: ScalarField },
    /// Minimise over `u` with `n` fixed.
    Sub2 { f: ScalarField, n: VecField },
    /// Minimise over `(n = grad phi, u)` jointly.
    Joint { f: ScalarField },
}

#[derive(Clone, Debug)]
pub struct SmoothedProblem {
    pub epsilon: f64,
    pub objective: Objective,
    pub params: Params,
}

impl SmoothedProblem {
    pub fn sub1(params: &Params, f: &ScalarField, u: &ScalarField) -> Self {
        Self::with(
            params,
            Objective::Sub1 {
                f: f.clone(),
                u: u.clone(),
            },
        )
    }

    pub fn sub2(params: &Params, f: &ScalarField, n: &VecField) -> Self {
        Self::with(
            params,
            Objective::Sub2 {
                f: f.clone(),
                n: n.clone(),
            },
        )
    }

    pub fn joint(params: &Params, f: &ScalarField) -> Self {
        Self::with(params, Objective::Joint { f: f.clone() })
    }

    fn with(params: &Params, objective: Objective) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            objective,
            params: params.clone(),
        }
    }

    fn data(&self) -> &ScalarField {
        match &self.objective {
            Objective::Sub1 { f, .. } | Objective::Sub2 { f, .. } | Objective::Joint { f } => f,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub n: VecField,
    pub u: ScalarField,
    /// Unsmoothed objective at the returned point.
    pub objective: f64,
    /// Smoothed objective at the returned point, at the final epsilon.
    pub smoothed_objective: f64,
    pub grad_norm: f64,
    /// Norm of the last Newton step `H^-1 g`.
    pub step_norm: f64,
    pub steps: usize,
    /// False when the step budget ran out, or the line search stalled,
    /// before the Newton step norm reached `step_tol`.
    pub converged: bool,
}

/// `sum_g w ||M_g x - b_g||` over groups of `dim` consecutive rows.
struct NormTerm {
    weight: f64,
    dim: usize,
    m: DMatrix<f64>,
    b: DVector<f64>,
}

/// `w/2 ||R x - t||^2`
struct QuadTerm {
    weight: f64,
    r: DMatrix<f64>,
    t: DVector<f64>,
}

struct Assembled {
    norms: Vec<NormTerm>,
    quads: Vec<QuadTerm>,
    /// Indices of the potential, pinned by `(sum phi)^2 / (2 N)`.
    gauge: Option<std::ops::Range<usize>>,
    vars: usize,
}

/// Forward differences along x (columns) and y (rows), zero on the last column / row.
fn difference_matrices(shape: Shape) -> (DMatrix<f64>, DMatrix<f64>) {
    let (h, w) = (shape.height, shape.width);
    let cells = h * w;
    let mut dx = DMatrix::zeros(cells, cells);
    let mut dy = DMatrix::zeros(cells, cells);
    for i in 0..h {
        for j in 0..w {
            let c = i * w + j;
            if j + 1 < w {
                dx[(c, c)] = -1.0;
                dx[(c, c + 1)] = 1.0;
            }
            if i + 1 < h {
                dy[(c, c)] = -1.0;
                dy[(c, c + w)] = 1.0;
            }
        }
    }
    (dx, dy)
}

/// Stacks row blocks cell by cell: row `c * k + b` is row `c` of `blocks[b]`.
fn interleave(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let k = blocks.len();
    let (rows, cols) = blocks[0].shape();
    let mut out = DMatrix::zeros(rows * k, cols);
    for c in 0..rows {
        for (b, m) in blocks.iter().enumerate() {
            out.row_mut(c * k + b).copy_from(&m.row(c));
        }
    }
    out
}

fn to_vector<const C: usize>(f: &Field<C>) -> DVector<f64> {
    DVector::from_column_slice(f.as_slice())
}

fn assemble(prob: &SmoothedProblem) -> Assembled {
    let f = prob.data();
    let shape = f.shape();
    let cells = shape.cells();
    let prm = &prob.params;
    let (dx, dy) = difference_matrices(shape);
    // per cell: (dx phi, dy phi)
    let g = interleave(&[&dx, &dy]);
    // per cell: (dx dx phi, dy dx phi, dx dy phi, dy dy phi)
    let jg = interleave(&[&(&dx * &dx), &(&dy * &dx), &(&dx * &dy), &(&dy * &dy)]);
    let grad_f = &g * to_vector(f);
    let f_vec = to_vector(f);
    let id = DMatrix::<f64>::identity(cells, cells);

    match &prob.objective {
        Objective::Sub1 { u, .. } => Assembled {
            norms: vec![
                NormTerm {
                    weight: prm.alpha,
                    dim: 4,
                    m: jg,
                    b: DVector::zeros(4 * cells),
                },
                NormTerm {
                    weight: prm.beta,
                    dim: 2,
                    m: g.clone(),
                    b: &g * to_vector(u),
                },
            ],
            quads: vec![QuadTerm {
                weight: prm.eta1,
                r: g,
                t: grad_f,
            }],
            gauge: Some(0..cells),
            vars: cells,
        },
        Objective::Sub2 { n, .. } => Assembled {
            norms: vec![NormTerm {
                weight: prm.beta,
                dim: 2,
                m: g,
                b: to_vector(n),
            }],
            quads: vec![QuadTerm {
                weight: prm.eta2,
                r: id,
                t: f_vec,
            }],
            gauge: None,
            vars: cells,
        },
        Objective::Joint { .. } => {
            let zero_c = DMatrix::<f64>::zeros(cells, cells);
            let zero_2 = DMatrix::<f64>::zeros(2 * cells, cells);
            let zero_4 = DMatrix::<f64>::zeros(4 * cells, cells);
            let hcat = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
                let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                m.columns_mut(0, a.ncols()).copy_from(a);
                m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
                m
            };
            Assembled {
                norms: vec![
                    NormTerm {
                        weight: prm.alpha,
                        dim: 4,
                        m: hcat(&jg, &zero_4),
                        b: DVector::zeros(4 * cells),
                    },
                    NormTerm {
                        weight: prm.beta,
                        dim: 2,
                        m: hcat(&(-&g), &g),
                        b: DVector::zeros(2 * cells),
                    },
                ],
                quads: vec![
                    QuadTerm {
                        weight: prm.eta1,
                        r: hcat(&g, &zero_2),
                        t: grad_f,
                    },
                    QuadTerm {
                        weight: prm.eta2,
                        r: hcat(&zero_c, &id),
                        t: f_vec,
                    },
                ],
                gauge: Some(0..cells),
                vars: 2 * cells,
            }
        }
    }
}

impl Assembled {
    /// Objective without the gauge penalty; `eps = 0` gives the exact value.
    fn value(&self, x: &DVector<f64>, eps: f64) -> f64 {
        let mut total = 0.0;
        for t in &self.norms {
            if t.weight == 0.0 {
                continue;
            }
            let r = &t.m * x - &t.b;
            for grp in r.as_slice().chunks(t.dim) {
                let sq: f64 = grp.iter().map(|v| v * v).sum();
                total += t.weight * (sq + eps * eps).sqrt();
            }
        }
        for q in &self.quads {
            total += 0.5 * q.weight * (&q.r * x - &q.t).norm_squared();
        }
        total
    }

    fn gauge_value(&self, x: &DVector<f64>) -> f64 {
        self.gauge.as_ref().map_or(0.0, |r| {
            let s: f64 = x.as_slice()[r.clone()].iter().sum();
            0.5 * s * s / r.len() as f64
        })
    }

    fn merit(&self, x: &DVector<f64>, eps: f64) -> f64 {
        self.value(x, eps) + self.gauge_value(x)
    }

    /// Gradient and Hessian of the smoothed objective plus gauge.
    fn derivatives(&self, x: &DVector<f64>, eps: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.vars;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for t in &self.norms {
            if t.weight == 0.0 {
                continue;
            }
            let r = &t.m * x - &t.b;
            // d psi / d r and the block-diagonal d^2 psi / d r^2, scaled by weight
            let mut dr = DVector::zeros(r.len());
            let mut d2 = DMatrix::zeros(r.len(), r.len());
            for (gi, grp) in r.as_slice().chunks(t.dim).enumerate() {
                let s = (grp.iter().map(|v| v * v).sum::<f64>() + eps * eps).sqrt();
                let base = gi * t.dim;
                for a in 0..t.dim {
                    dr[base + a] = t.weight * grp[a] / s;
                    for b in 0..t.dim {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        d2[(base + a, base + b)] =
                            t.weight * (delta / s - grp[a] * grp[b] / (s * s * s));
                    }
                }
            }
            g += t.m.transpose() * dr;
            h += t.m.transpose() * d2 * &t.m;
        }
        for q in &self.quads {
            let rt = q.r.transpose();
            g += (&rt * (&q.r * x - &q.t)) * q.weight;
            h += (&rt * &q.r) * q.weight;
        }
        if let Some(r) = &self.gauge {
            let n = r.len() as f64;
            let s: f64 = x.as_slice()[r.clone()].iter().sum();
            for i in r.clone() {
                g[i] += s / n;
                for j in r.clone() {
                    h[(i, j)] += 1.0 / n;
                }
            }
        }
        (g, h)
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    loop {
        let mut shifted = h.clone();
        for i in 0..h.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(ch) = shifted.cholesky() {
            return -ch.solve(g);
        }
        shift = if shift == 0.0 {
            1e-12 * scale
        } else {
            shift * 10.0
        };
    }
}

/// Minimises the smoothed objective until the Newton step norm is at most `step_tol`.
///
/// The step rather than the gradient is tested because near kinks the
/// gradient of the smoothed objective carries rounding noise of order
/// `1e-16 / eps`, far above useful step tolerances.
///
/// Spends at most `max_steps` Newton steps over the whole continuation.
/// Instances larger than 8x8 are rejected.
pub fn oracle_minimize(
    prob: &SmoothedProblem,
    max_steps: usize,
    step_tol: f64,
) -> Result<OracleSolution> {
    let f = prob.data();
    let shape = f.shape();
    if shape.height > MAX_ORACLE_SIDE || shape.width > MAX_ORACLE_SIDE {
        return Err(Error::OracleTooLarge(shape));
    }
    if !(prob.epsilon.is_finite() && prob.epsilon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon must be > 0, got {}",
            prob.epsilon
        )));
    }
    prob.params.validate()?;
    if let Objective::Sub1 { u, .. } = &prob.objective {
        f.ensure_same_shape(u)?;
    }
    if let Objective::Sub2 { n, .. } = &prob.objective {
        f.ensure_same_shape(n)?;
    }

    let sys = assemble(prob);
    let cells = shape.cells();
    // start from the data: phi = f - mean(f), u = f
    let centred: Vec<f64> = f.as_slice().iter().map(|v| v - f.mean()).collect();
    let mut x = match prob.objective {
        Objective::Sub1 { .. } => DVector::from_vec(centred),
        Objective::Sub2 { .. } => to_vector(f),
        Objective::Joint { .. } => {
            let mut v = centred;
            v.extend_from_slice(f.as_slice());
            DVector::from_vec(v)
        }
    };

    let mut schedule = Vec::new();
    let mut eps = EPS_START.max(prob.epsilon);
    while eps > prob.epsilon {
        schedule.push(eps);
        eps *= 0.1;
    }
    schedule.push(prob.epsilon);

    let mut steps = 0;
    let mut stalled = false;
    let mut grad_norm = f64::INFINITY;
    let mut step_norm = f64::INFINITY;
    for (stage, &eps) in schedule.iter().enumerate() {
        let last = stage + 1 == schedule.len();
        let tol = if last { step_tol } else { step_tol.max(1e-8) };
        stalled = false;
        loop {
            let (g, h) = sys.derivatives(&x, eps);
            grad_norm = g.norm();
            let d = newton_direction(&h, &g);
            step_norm = d.norm();
            if step_norm <= tol || steps >= max_steps {
                break;
            }
            let slope = g.dot(&d);
            let f0 = sys.merit(&x, eps);
            steps += 1;
            // Once the predicted decrease is below the resolution of the
            // objective, backtracking only sees rounding noise; inside that
            // region the full Newton step is the right one.
            if -slope <= ROUNDOFF * f0.abs().max(1.0) {
                x += d;
                continue;
            }
            let mut t = 1.0;
            let accepted = loop {
                let trial = &x + &d * t;
                if sys.merit(&trial, eps) <= f0 + ARMIJO * t * slope {
                    break Some(trial);
                }
                t *= 0.5;
                if t < 1e-20 {
                    break None;
                }
            };
            match accepted {
                Some(next) => x = next,
                None => {
                    stalled = true;
                    break;
                }
            }
        }
        if steps >= max_steps {
            break;
        }
    }

    let (n, u) = match &prob.objective {
        Objective::Sub1 { u, .. } => (phi_to_n(&x, shape), u.clone()),
        Objective::Sub2 { n, .. } => (n.clone(), vector_to_scalar(x.as_slice(), shape)),
        Objective::Joint { .. } => (
            phi_to_n(&x.rows(0, cells).into_owned(), shape),
            vector_to_scalar(&x.as_slice()[cells..], shape),
        ),
    };
    Ok(OracleSolution {
        n,
        u,
        objective: sys.value(&x, 0.0),
        smoothed_objective: sys.value(&x, prob.epsilon),
        grad_norm,
        step_norm,
        steps,
        converged: step_norm <= step_tol && !stalled,
    })
}

fn vector_to_scalar(v: &[f64], shape: Shape) -> ScalarField {
    ScalarField::from_vec(shape, v.to_vec()).expect("oracle iterate is finite")
}

fn phi_to_n(phi: &DVector<f64>, shape: Shape) -> VecField {
    let (dx, dy) = difference_matrices(shape);
    let g = interleave(&[&dx, &dy]) * phi;
    VecField::from_vec(shape, g.as_slice().to_vec()).expect("oracle iterate is finite")
}

/// Maximum scaled violation of each operator identity over a batch of trials.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointnessReport {
    pub shape: Shape,
    pub trials: usize,
    pub seed: u64,
    /// `|<grad u, p> + <u, div p>| / (||u|| ||p||)`
    pub grad_div: f64,
    /// `|<jacobian n, P> + <n, div_tensor P>| / (||n|| ||P||)`
    pub jacobian_div_tensor: f64,
    /// `||P(P a) - P a|| / ||a||`
    pub idempotency: f64,
    /// `|<P a, b> - <a, P b>| / (||a|| ||b||)`
    pub self_adjointness: f64,
    /// `||P grad u - grad u|| / ||grad u||`
    pub fixed_point: f64,
}

impl AdjointnessReport {
    fn checks(&self) -> [(&'static str, f64); 5] {
        [
            ("grad_div", self.grad_div),
            ("jacobian_div_tensor", self.jacobian_div_tensor),
            ("idempotency", self.idempotency),
            ("self_adjointness", self.self_adjointness),
            ("fixed_point", self.fixed_point),
        ]
    }

    pub fn max_violation(&self) -> f64 {
        self.checks().iter().map(|c| c.1).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "shape {} trials {} seed {}\n",
            self.shape, self.trials, self.seed
        );
        for (name, v) in self.checks() {
            let _ = writeln!(s, "{name:<20} {v:.3e}");
        }
        let _ = writeln!(s, "{:<20} {:.3e}", "max", self.max_violation());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,max_violation\n");
        for (name, v) in self.checks() {
            let _ = writeln!(s, "{name},{v:.16e}");
        }
        s
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Operator identity violations for one set of fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityViolations {
    pub grad_div: f64,
    pub jacobian_div_tensor: f64,
    pub idempotency: f64,
    pub self_adjointness: f64,
    pub fixed_point: f64,
}

pub fn identity_violations(
    plan: &PoissonPlan,
    u: &ScalarField,
    p: &VecField,
    n: &VecField,
    t: &TensorField,
    a: &VecField,
    b: &VecField,
) -> Result<IdentityViolations> {
    let gd = (inner(&grad(u), p)? + inner(u, &div(p))?).abs();
    let jd = (inner(&jacobian(n), t)? + inner(n, &div_tensor(t))?).abs();
    let pa = project(plan, a)?;
    let ppa = project(plan, &pa)?;
    let pb = project(plan, b)?;
    let sa = (inner(&pa, b)? - inner(a, &pb)?).abs();
    let gu = grad(u);
    let pgu = project(plan, &gu)?;
    Ok(IdentityViolations {
        grad_div: ratio(gd, norm_l2(u) * norm_l2(p)),
        jacobian_div_tensor: ratio(jd, norm_l2(n) * norm_l2(t)),
        idempotency: ratio(norm_l2(&ppa.sub(&pa)), norm_l2(a)),
        self_adjointness: ratio(sa, norm_l2(a) * norm_l2(b)),
        fixed_point: ratio(norm_l2(&pgu.sub(&gu)), norm_l2(&gu)),
    })
}

/// Runs the identity checks on `trials` seeded random field sets.
///
/// Trial `i` draws uniform `[-1, 1)` fields from ChaCha8 seeded with
/// `seed + i`, so any trial can be replayed alone.
pub fn adjointness_suite(shape: Shape, trials: usize, seed: u64) -> Result<AdjointnessReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be >= 1".into()));
    }
    let plan = PoissonPlan::new(shape);
    let mut report = AdjointnessReport {
        shape,
        trials,
        seed,
        grad_div: 0.0,
        jacobian_div_tensor: 0.0,
        idempotency: 0.0,
        self_adjointness: 0.0,
        fixed_point: 0.0,
    };
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut draw = || rng.gen_range(-1.0..1.0);
        let u = Field::from_fn(shape, |_, _| [draw()]);
        let p = Field::from_fn(shape, |_, _| [draw(), draw()]);
        let n = Field::from_fn(shape, |_, _| [draw(), draw()]);
        let t = Field::from_fn(shape, |_, _| [draw(), draw(), draw(), draw()]);
        let a = Field::from_fn(shape, |_, _| [draw(), draw()]);
        let b = Field::from_fn(shape, |_, _| [draw(), draw()]);
        let v = identity_violations(&plan, &u, &p, &n, &t, &a, &b)?;
        report.grad_div = report.grad_div.max(v.grad_div);
        report.jacobian_div_tensor = report.jacobian_div_tensor.max(v.jacobian_div_tensor);
        report.idempotency = report.idempotency.max(v.idempotency);
        report.self_adjointness = report.self_adjointness.max(v.self_adjointness);
        report.fixed_point = report.fixed_point.max(v.fixed_point);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random<const C: usize>(shape: Shape, seed: u64) -> Field<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(shape, |_, _| {
            std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn dense_operators_agree_with_stencils() {
        let shape = Shape::new(3, 5);
        let u: ScalarField = random(shape, 1);
        let (dx, dy) = difference_matrices(shape);
        let g = interleave(&[&dx, &dy]) * to_vector(&u);
        assert!(g
            .iter()
            .zip(grad(&u).as_slice())
            .all(|(a, b)| (a - b).abs() < 1e-14));
        let jg =
            interleave(&[&(&dx * &dx), &(&dy * &dx), &(&dx * &dy), &(&dy * &dy)]) * to_vector(&u);
        let reference = jacobian(&grad(&u));
        assert!(jg
            .iter()
            .zip(reference.as_slice())
            .all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn sub2_at_matching_gradient_returns_data() {
        let shape = Shape::new(4, 4);
        let f: ScalarField = random(shape, 2);
        let prm = Params {
            beta: 0.1,
            ..Params::default()
        };
        let sol = oracle_minimize(&SmoothedProblem::sub2(&prm, &f, &grad(&f)), 200, 1e-10).unwrap();
        assert!(sol.converged);
        assert!(sol.u.sub(&f).max_abs() <= 1e-8);
        assert!(sol.objective <= DEFAULT_EPSILON * 16.0);
    }

    #[test]
    fn sub1_without_regularisation_returns_data_gradient() {
        let shape = Shape::new(4, 4);
        let f: ScalarField = random(shape, 3);
        let u: ScalarField = random(shape, 4);
        let prm = Params {
            alpha: 0.0,
            beta: 0.0,
            ..Params::default()
        };
        let sol = oracle_minimize(&SmoothedProblem::sub1(&prm, &f, &u), 200, 1e-10).unwrap();
        assert!(sol.converged);
        assert!(sol.n.sub(&grad(&f)).max_abs() <= 1e-10);
        assert!(sol.objective <= DEFAULT_EPSILON * 16.0);
    }

    #[test]
    fn joint_solution_is_curl_free_and_below_data_energy() {
        let shape = Shape::new(4, 4);
        let f: ScalarField = random(shape, 5);
        let prm = Params {
            alpha: 0.1,
            beta: 0.1,
            ..Params::default()
        };
        let sol = oracle_minimize(&SmoothedProblem::joint(&prm, &f), 500, 1e-10).unwrap();
        assert!(
            sol.converged,
            "step norm {} after {} steps",
            sol.step_norm, sol.steps
        );
        let plan = PoissonPlan::new(shape);
        assert!(project(&plan, &sol.n).unwrap().sub(&sol.n).max_abs() <= 1e-10);
        let at_data = crate::driver::energy_total(&prm, &plan, &f, &grad(&f), &f)
            .unwrap()
            .total;
        let at_sol = crate::driver::energy_total(&prm, &plan, &f, &sol.n, &sol.u)
            .unwrap()
            .total;
        assert!((at_sol - sol.objective).abs() <= 1e-9 * at_sol.max(1.0));
        assert!(at_sol < at_data);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let f: ScalarField = random(Shape::new(4, 4), 6);
        let prm = Params {
            alpha: 0.1,
            beta: 0.1,
            ..Params::default()
        };
        let sol = oracle_minimize(&SmoothedProblem::joint(&prm, &f), 1, 1e-12).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.steps, 1);
    }

    #[test]
    fn rejects_large_instances() {
        let f = ScalarField::zeros(Shape::new(9, 4));
        let err = oracle_minimize(&SmoothedProblem::joint(&Params::default(), &f), 10, 1e-10);
        assert!(matches!(err, Err(Error::OracleTooLarge(_))));
    }

    #[test]
    fn suite_on_zero_fields_and_degenerate_grid() {
        let shape = Shape::new(5, 3);
        let plan = PoissonPlan::new(shape);
        let (z1, z2, z4) = (
            ScalarField::zeros(shape),
            VecField::zeros(shape),
            TensorField::zeros(shape),
        );
        let v = identity_violations(&plan, &z1, &z2, &z2, &z4, &z2, &z2).unwrap();
        assert_eq!(
            [
                v.grad_div,
                v.jacobian_div_tensor,
                v.idempotency,
                v.self_adjointness,
                v.fixed_point
            ],
            [0.0; 5]
        );
        let one = adjointness_suite(Shape::new(1, 1), 3, 9).unwrap();
        assert_eq!(one.max_violation(), 0.0);
    }

    #[test]
    fn suite_report_formats() {
        let r = adjointness_suite(Shape::new(6, 4), 5, 11).unwrap();
        assert!(r.max_violation() <= 1e-10, "{}", r.to_text());
        assert!(r.to_text().contains("idempotency"));
        assert_eq!(r.to_csv().lines().count(), 6);
        assert!(adjointness_suite(Shape::new(4, 4), 0, 1).is_err());
    }
}
