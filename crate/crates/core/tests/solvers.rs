mod common;

use lsrecovery::solvers::{convex_relax_observed, naht_observed, niht_observed, StepTrace};
use lsrecovery::{
    convex_relax, generate_problem, make_fjlt, make_gaussian, naht, niht, params_from_ratios,
    Budgets, ConvexConfig, ConvexTermination, DenseMatrix, ModelParams, SolverConfig, Termination,
};

fn model(m: usize, n: usize, r: usize, s: usize) -> ModelParams {
    ModelParams {
        m,
        n,
        p: m * n,
        r,
        s,
        mu: f64::INFINITY,
    }
}

fn rel(x: &DenseMatrix, x0: &DenseMatrix) -> f64 {
    common::rel_err(x.as_slice(), x0.as_slice())
}

#[test]
fn zero_measurements_return_zero_immediately() {
    let op = make_gaussian(10, 10, 40, 1).unwrap();
    let b = op.apply(&DenseMatrix::zeros(10, 10)).unwrap();
    let cfg = SolverConfig::default();
    for report in [
        niht(&b, &op, Budgets::new(2, 5, f64::INFINITY), &cfg).unwrap(),
        naht(&b, &op, Budgets::new(2, 5, f64::INFINITY), &cfg).unwrap(),
    ] {
        assert_eq!(report.iterations, 0);
        assert_eq!(report.residual_trace.len(), 1);
        assert_eq!(report.termination, Termination::ResidualTol);
        assert_eq!(report.estimate.max_abs(), 0.0);
    }
    let convex = convex_relax(&b, &op, 2, 5, 0.0, &ConvexConfig::default()).unwrap();
    assert_eq!(convex.termination, ConvexTermination::ResidualTol);
    assert_eq!(convex.iterations, 0);
    assert_eq!(convex.estimate.max_abs(), 0.0);
}

#[test]
fn full_fjlt_recovers_quickly() {
    let params = model(16, 16, 1, 5);
    for seed in 0..3u64 {
        let problem = generate_problem(&params, seed).unwrap();
        let op = make_fjlt(16, 16, 256, seed + 50).unwrap();
        let b = op.apply(&problem.sum).unwrap();
        let budgets = Budgets::new(1, 5, f64::INFINITY);
        for report in [
            niht(&b, &op, budgets, &SolverConfig::default()).unwrap(),
            naht(&b, &op, budgets, &SolverConfig::default()).unwrap(),
        ] {
            assert!(rel(&report.estimate, &problem.sum) <= 1e-6, "seed {seed}");
            assert!(
                report.iterations <= 40,
                "seed {seed}: {} iterations",
                report.iterations
            );
        }
    }
}

#[test]
fn naht_without_rank_budget_is_sparse_iht() {
    let params = model(16, 16, 0, 4);
    let mut successes = 0;
    for seed in 0..10u64 {
        let problem = generate_problem(&params, seed).unwrap();
        // p = 8s; at p = 4s (ρ = 0.25, δ = 1/16) sparse IHT sits past its phase transition
        let op = make_gaussian(16, 16, 32, seed + 300).unwrap();
        let b = op.apply(&problem.sum).unwrap();
        let report = naht(
            &b,
            &op,
            Budgets::new(0, 4, f64::INFINITY),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(report.low_rank.max_abs(), 0.0);
        match &report.step_sizes {
            StepTrace::Alternating { low_rank, .. } => assert!(low_rank.iter().all(|&a| a == 0.0)),
            other => panic!("unexpected trace {other:?}"),
        }
        successes += usize::from(rel(&report.estimate, &problem.sum) <= 1e-2);
    }
    assert!(successes >= 9, "{successes}/10");
}

#[test]
fn niht_without_sparsity_budget_recovers_low_rank() {
    let params = model(20, 20, 2, 0);
    for seed in 0..5u64 {
        let problem = generate_problem(&params, seed).unwrap();
        let op = make_gaussian(20, 20, 200, seed + 400).unwrap();
        let b = op.apply(&problem.sum).unwrap();
        let report = niht(
            &b,
            &op,
            Budgets::new(2, 0, f64::INFINITY),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(report.sparse.nnz(), 0);
        assert!(rel(&report.estimate, &problem.sum) <= 1e-2, "seed {seed}");
    }
}

#[test]
fn iterates_respect_budgets_and_converge_geometrically() {
    let params = params_from_ratios(32, 32, 0.5, 0.15, 0.05).unwrap();
    let problem = generate_problem(&params, 11).unwrap();
    let op = make_gaussian(32, 32, params.p, 12).unwrap();
    let b = op.apply(&problem.sum).unwrap();
    assert_eq!((params.r, params.s), (1, 25));
    let budgets = Budgets::new(params.r, params.s, f64::INFINITY);
    let cfg = SolverConfig::default();

    type Runner = fn(
        &[f64],
        &lsrecovery::MeasurementOp,
        Budgets,
        &SolverConfig,
        &mut dyn FnMut(&lsrecovery::solvers::IterateView<'_>),
    ) -> lsrecovery::Result<lsrecovery::SolverReport>;
    let runners: [(&str, Runner); 2] = [("niht", niht_observed), ("naht", naht_observed)];
    for (name, run) in runners {
        let mut errors = Vec::new();
        let mut observed = 0;
        let report = run(&b, &op, budgets, &cfg, &mut |view| {
            observed += 1;
            let rank = common::jacobi_singular_values(32, 32, view.low_rank.as_slice())
                .iter()
                .filter(|&&s| s > 1e-9)
                .count();
            assert!(rank <= params.r, "{name}: rank {rank}");
            assert!(view.sparse.count_nonzero() <= params.s, "{name}");
            errors.push(rel(&view.low_rank.add(view.sparse), &problem.sum));
        })
        .unwrap();
        assert_eq!(observed, report.iterations + 1);
        assert_eq!(report.residual_trace.len(), report.iterations + 1);
        assert!(rel(&report.estimate, &problem.sum) <= 1e-2, "{name}");
        match &report.step_sizes {
            StepTrace::Joint(a) => assert!(a.iter().all(|&x| x > 0.0)),
            StepTrace::Alternating { low_rank, sparse } => {
                assert!(low_rank.iter().chain(sparse).all(|&x| x > 0.0))
            }
        }
        assert!(errors.len() >= 11, "{name}: {} iterates", errors.len());
        let tail = &errors[errors.len() - 11..];
        let rate = (tail[10] / tail[0]).powf(0.1);
        assert!(rate < 1.0, "{name}: tail rate {rate}");
    }
}

#[test]
fn solvers_are_deterministic() {
    let params = model(12, 12, 1, 6);
    let problem = generate_problem(&params, 5).unwrap();
    let op = make_gaussian(12, 12, 90, 6).unwrap();
    let b = op.apply(&problem.sum).unwrap();
    let budgets = Budgets::new(1, 6, f64::INFINITY);
    let cfg = SolverConfig::default();
    let a = niht(&b, &op, budgets, &cfg).unwrap();
    let c = niht(&b, &op, budgets, &cfg).unwrap();
    assert_eq!(a.estimate, c.estimate);
    assert_eq!(a.residual_trace, c.residual_trace);
    let a = naht(&b, &op, budgets, &cfg).unwrap();
    let c = naht(&b, &op, budgets, &cfg).unwrap();
    assert_eq!(a.estimate, c.estimate);
    assert_eq!(a.step_sizes, c.step_sizes);
    let a = convex_relax(&b, &op, 1, 6, 0.0, &ConvexConfig::default()).unwrap();
    let c = convex_relax(&b, &op, 1, 6, 0.0, &ConvexConfig::default()).unwrap();
    assert_eq!(a.estimate, c.estimate);
}

#[test]
fn convex_objective_and_residual_descend() {
    let params = params_from_ratios(20, 20, 0.8, 0.1, 0.05).unwrap();
    for seed in 0..3u64 {
        let problem = generate_problem(&params, seed).unwrap();
        let op = make_gaussian(20, 20, params.p, seed + 70).unwrap();
        let b = op.apply(&problem.sum).unwrap();
        let mut seen = 0;
        let report = convex_relax_observed(
            &b,
            &op,
            params.r,
            params.s,
            0.0,
            &ConvexConfig::default(),
            &mut |_| seen += 1,
        )
        .unwrap();
        assert_eq!(seen, report.iterations);
        for round in &report.objective_trace {
            for pair in round.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "seed {seed}: {pair:?}");
            }
        }
        for pair in report.residual_trace.windows(2) {
            assert!(
                pair[1] < pair[0],
                "seed {seed}: {:?}",
                report.residual_trace
            );
        }
        assert!(report.lambda > 0.0 && report.beta > 0.0 && report.step > 0.0);
    }
}

#[test]
fn convex_without_sparsity_hint_keeps_sparse_part_zero() {
    let params = model(12, 12, 1, 0);
    let problem = generate_problem(&params, 2).unwrap();
    let op = make_gaussian(12, 12, 100, 3).unwrap();
    let b = op.apply(&problem.sum).unwrap();
    let report = convex_relax(&b, &op, 1, 0, 0.0, &ConvexConfig::default()).unwrap();
    assert_eq!(report.sparse.nnz(), 0);
    assert_eq!(report.lambda, 0.0);
    assert!(rel(&report.estimate, &problem.sum) <= 1e-2);
}

#[test]
fn solver_input_errors() {
    let op = make_gaussian(4, 4, 8, 0).unwrap();
    let cfg = SolverConfig::default();
    assert!(niht(&[0.0; 7], &op, Budgets::new(1, 1, 1.0), &cfg).is_err());
    assert!(naht(&[0.0; 8], &op, Budgets::new(5, 1, 1.0), &cfg).is_err());
    assert!(niht(&[f64::NAN; 8], &op, Budgets::new(1, 1, 1.0), &cfg).is_err());
    assert!(convex_relax(&[0.0; 8], &op, 1, 1, -1.0, &ConvexConfig::default()).is_err());
}
