use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvstokes_core::oracle::{oracle_minimize, SmoothedProblem};
use tvstokes_core::solvers::{sub1_objective, sub2_objective};
use tvstokes_core::{
    denoise, energy_total, solve_sub1, solve_sub2, Params, PoissonPlan, ScalarField, Shape,
    VecField,
};

fn uniform<const C: usize>(shape: Shape, rng: &mut ChaCha8Rng) -> tvstokes_core::Field<C> {
    tvstokes_core::Field::from_fn(shape, |_, _| {
        std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
    })
}

fn tight(plan: &PoissonPlan, alpha: f64, beta: f64) -> Params {
    Params {
        alpha,
        beta,
        inner_iters: 20_000,
        inner_tol: 1e-12,
        ..Params::default()
    }
    .with_estimated_steps(plan)
    .unwrap()
}

#[test]
fn subproblem_solvers_reach_the_oracle_minimum() {
    for (h, w) in [(4, 4), (5, 3), (3, 6)] {
        let shape = Shape::new(h, w);
        let plan = PoissonPlan::new(shape);
        let prm = tight(&plan, 0.1, 0.1);
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: ScalarField = uniform(shape, &mut rng);
            let u: ScalarField = uniform(shape, &mut rng);
            let n: VecField = uniform(shape, &mut rng);

            let o1 = oracle_minimize(&SmoothedProblem::sub1(&prm, &f, &u), 500, 1e-10).unwrap();
            assert!(o1.converged);
            let s1 = solve_sub1(&prm, &plan, &f, &u, None).unwrap();
            let v1 = sub1_objective(&prm, &plan, &f, &u, &s1.state.n).unwrap();
            assert!(
                (v1 - o1.objective).abs() <= 1e-4 * o1.objective,
                "{shape} seed {seed}: {v1} vs {}",
                o1.objective
            );

            let o2 = oracle_minimize(&SmoothedProblem::sub2(&prm, &f, &n), 500, 1e-10).unwrap();
            assert!(o2.converged);
            let s2 = solve_sub2(&prm, &f, &n, None).unwrap();
            let v2 = sub2_objective(&prm, &f, &n, &s2.state.u).unwrap();
            assert!(
                (v2 - o2.objective).abs() <= 1e-4 * o2.objective,
                "{shape} seed {seed}: {v2} vs {}",
                o2.objective
            );
        }
    }
}

#[test]
fn oracle_sits_within_smoothing_error_of_the_solver_primal() {
    // smoothing moves the minimum by at most eps per norm group
    let shape = Shape::new(4, 4);
    let plan = PoissonPlan::new(shape);
    let prm = tight(&plan, 0.2, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let f: ScalarField = uniform(shape, &mut rng);
    let u: ScalarField = uniform(shape, &mut rng);
    let o = oracle_minimize(&SmoothedProblem::sub1(&prm, &f, &u), 500, 1e-10).unwrap();
    let s = solve_sub1(&prm, &plan, &f, &u, None).unwrap();
    let v = sub1_objective(&prm, &plan, &f, &u, &s.state.n).unwrap();
    let groups = 2.0 * shape.cells() as f64;
    assert!(o.objective <= v + 1e-6 * groups + 1e-12);
    assert!(v <= o.objective + 1e-9);
}

#[test]
fn alternating_run_never_beats_the_joint_minimum() {
    let shape = Shape::new(4, 4);
    let plan = PoissonPlan::new(shape);
    let prm = Params {
        outer_iters: 30,
        outer_tol: 0.0,
        probe_iters: 0,
        ..tight(&plan, 0.1, 0.1)
    };
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let f: ScalarField = uniform(shape, &mut rng);
        let joint = oracle_minimize(&SmoothedProblem::joint(&prm, &f), 500, 1e-10).unwrap();
        assert!(joint.converged);
        let out = denoise(&prm, &f).unwrap();
        let h = energy_total(&prm, &plan, &f, &out.n, &out.u).unwrap().total;
        let h0 = out.trace.records[0].energy.total;
        let slack = 1e-6 * 3.0 * shape.cells() as f64;
        assert!(
            joint.objective <= h + slack,
            "joint {} alternating {h}",
            joint.objective
        );
        assert!(h < h0);
    }
}
