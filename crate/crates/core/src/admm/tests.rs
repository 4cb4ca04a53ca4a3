use super::*;
use crate::problem::{decompose, decompose_dense, SdpProblem, Sense, TripletConstraint};

/// Max-cut relaxation of a cycle: `min -¼⟨L, X⟩, diag(X) = 1`.
fn cycle_maxcut(n: usize) -> SdpProblem {
    let mut cost = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        cost.push((i, i, -0.5));
        cost.push((i.min(j), i.max(j), 0.25));
    }
    let cons: Vec<_> = (0..n)
        .map(|i| TripletConstraint {
            a: vec![(i, i, 1.0)],
            b: 1.0,
            sense: Sense::Eq,
        })
        .collect();
    SdpProblem::from_triplets(n, None, &cost, &cons, 1, None).unwrap()
}

#[test]
fn two_by_two_reaches_known_optimum() {
    let cons: Vec<_> = (0..2)
        .map(|i| TripletConstraint {
            a: vec![(i, i, 1.0)],
            b: 1.0,
            sense: Sense::Eq,
        })
        .collect();
    let p = SdpProblem::from_triplets(2, None, &[(0, 1, -0.5)], &cons, 1, None).unwrap();
    let d = decompose(&p).unwrap();
    let sol = solve(&d, None, &AdmmOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Converged);
    assert!((sol.objective + 1.0).abs() < 1e-4, "{}", sol.objective);
    assert_eq!(sol.max_clique_rank(), 1);
}

#[test]
fn affine_step_matches_dense_kkt_solve() {
    let cons = vec![
        TripletConstraint { a: vec![(0, 0, 1.0), (0, 1, 0.5)], b: 1.0, sense: Sense::Eq },
        TripletConstraint { a: vec![(1, 1, 1.0), (2, 3, -1.0)], b: 2.0, sense: Sense::Le },
        TripletConstraint { a: vec![(3, 3, 1.0)], b: 0.5, sense: Sense::Eq },
    ];
    let cost = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
    let p = SdpProblem::from_triplets(4, None, &cost, &cons, 1, None).unwrap();
    let d = decompose(&p).unwrap();
    let kkt = KktFactor::new(&d);
    let n_x = d.pattern.len();
    let ns = d.num_slacks();
    let m = d.rows.len();
    let r_x: Vec<f64> = (0..n_x).map(|k| (k as f64 * 0.37).sin()).collect();
    let r_s = vec![0.3; ns];
    let mut x = vec![0.0; n_x];
    let mut s = vec![0.0; ns];
    kkt.solve(&r_x, &r_s, &mut x, &mut s);

    // Dense oracle: [[D, Aᵀ], [A, 0]] over (x, s, ω).
    let nv = n_x + ns;
    let dim = nv + m;
    let mut k = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for i in 0..n_x {
        k[(i, i)] = d.coverage[i];
        rhs[i] = r_x[i];
    }
    for i in 0..ns {
        k[(n_x + i, n_x + i)] = 1.0;
        rhs[n_x + i] = r_s[i];
    }
    let mut slack = 0;
    for (i, row) in d.rows.iter().enumerate() {
        for &(c, v) in &row.coeffs {
            k[(nv + i, c)] = v;
            k[(c, nv + i)] = v;
        }
        if row.sense == Sense::Le {
            k[(nv + i, n_x + slack)] = 1.0;
            k[(n_x + slack, nv + i)] = 1.0;
            slack += 1;
        }
        rhs[nv + i] = row.b;
    }
    let sol = k.lu().solve(&rhs).unwrap();
    for i in 0..n_x {
        assert!((sol[i] - x[i]).abs() < 1e-10);
    }
    for i in 0..ns {
        assert!((sol[n_x + i] - s[i]).abs() < 1e-10);
    }
    assert!(kkt.residual_inf(&x, &s) < 1e-12);
}

#[test]
fn decomposed_matches_dense_and_keeps_constraints() {
    let p = cycle_maxcut(7);
    let opts = AdmmOptions {
        eps_abs: 1e-8,
        eps_rel: 1e-7,
        consensus_tol: 1e-7,
        ..AdmmOptions::default()
    };
    let d = decompose(&p).unwrap();
    let mut solver = AdmmSolver::new(&d, opts.clone());
    let cost = d.cost.clone();
    let sol = solver.solve(&cost, &mut |_| {}).unwrap();
    assert_eq!(sol.status, Status::Converged);
    let dense = solve(&decompose_dense(&p).unwrap(), None, &opts).unwrap();
    assert_eq!(dense.status, Status::Converged);
    let rel = (sol.objective - dense.objective).abs() / dense.objective.abs().max(1.0);
    assert!(rel < 1e-5, "{} vs {}", sol.objective, dense.objective);
    assert!(sol.constraint_residual < 1e-9);
    for b in &sol.blocks {
        assert!(crate::linalg::sym_eigen(b).min_value() > -1e-10);
    }
}

#[test]
fn constraint_residual_holds_every_iteration() {
    let d = decompose(&cycle_maxcut(6)).unwrap();
    let kkt = KktFactor::new(&d);
    let mut st = AdmmState::new(&d, 10.0);
    let b_norm = (6.0f64).sqrt();
    for _ in 0..60 {
        step1_affine(&d, &kkt, &mut st, d.cost.values());
        assert!(kkt.residual_inf(&st.x, &st.slacks) <= 1e-9 * (1.0 + b_norm));
        step2_project(&d, &mut st, 1e-6).unwrap();
        step3_dual(&d, &mut st);
    }
}

#[test]
fn inequality_constraints_use_slacks() {
    // min -X_01 s.t. X_00 <= 1, X_11 <= 4  ->  optimum -2.
    let cons = vec![
        TripletConstraint { a: vec![(0, 0, 1.0)], b: 1.0, sense: Sense::Le },
        TripletConstraint { a: vec![(1, 1, 1.0)], b: 4.0, sense: Sense::Le },
    ];
    let p = SdpProblem::from_triplets(2, None, &[(0, 1, -0.5)], &cons, 1, None).unwrap();
    let d = decompose(&p).unwrap();
    assert_eq!(d.num_slacks(), 2);
    let sol = solve(&d, None, &AdmmOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Converged);
    assert!((sol.objective + 2.0).abs() < 1e-3, "{}", sol.objective);
    assert!(sol.slacks.iter().all(|&s| s >= 0.0));
}

#[test]
fn warm_start_reuses_factorization() {
    let d = decompose(&cycle_maxcut(5)).unwrap();
    let mut solver = AdmmSolver::new(&d, AdmmOptions::default());
    let cost = d.cost.clone();
    let first = solver.solve(&cost, &mut |_| {}).unwrap();
    let second = solver.solve(&cost, &mut |_| {}).unwrap();
    assert_eq!(solver.factorizations(), 1);
    assert!(second.iterations <= first.iterations);
    assert!(second.iterations < 20);
}
