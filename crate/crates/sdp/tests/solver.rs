use approx::assert_relative_eq;
use lmi_sdp::{
    max_psd_step, solve, LinearBlock, LmiProblem, Psd2Batch, PsdBlock, Settings, Status, Term,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn small_linear_program() {
    // max y0 + y1  s.t. y0 ≤ 1, y1 ≤ 2, y0 + y1 ≤ 2.5
    let mut p = LmiProblem::new(DVector::from_vec(vec![1.0, 1.0]));
    let mut l = LinearBlock::new(2);
    l.push_le(&[1.0, 0.0], 1.0)
        .push_le(&[0.0, 1.0], 2.0)
        .push_le(&[1.0, 1.0], 2.5);
    p.linear_blocks.push(l);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_relative_eq!(sol.dual_objective, 2.5, epsilon = 1e-7);
}

#[test]
fn largest_eigenvalue() {
    // max −t  s.t.  t I − A ⪰ 0
    let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    let mut p = LmiProblem::new(DVector::from_element(1, -1.0));
    let mut blk = PsdBlock::new(-a.clone());
    blk.push(0, Term::Diagonal(DVector::from_element(3, -1.0)));
    p.psd_blocks.push(blk);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    let lmax = a.symmetric_eigenvalues().max();
    assert_relative_eq!(sol.y[0], lmax, epsilon = 1e-7);
}

/// Minimum of `uᵀ diag(a) u + bᵀu` over `‖u‖ ≤ r`, via the S-procedure LMI
/// `[[λI + diag(a), b/2], [bᵀ/2, −t − λr²]] ⪰ 0`, maximizing `t`.
fn ball_minimum_lmi(a: &[f64], b: &[f64], r: f64, lowrank: bool) -> f64 {
    ball_minimum_lmi_with(a, b, r, lowrank, false)
}

fn ball_minimum_lmi_with(a: &[f64], b: &[f64], r: f64, lowrank: bool, dense_lambda: bool) -> f64 {
    let n = a.len();
    let mut constant = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        constant[(i, i)] = a[i];
        constant[(i, n)] = 0.5 * b[i];
        constant[(n, i)] = 0.5 * b[i];
    }
    // variables: 0 = t, 1 = λ
    let mut p = LmiProblem::new(DVector::from_vec(vec![1.0, 0.0]));
    let mut blk = PsdBlock::new(constant);
    let mut e = DVector::zeros(n + 1);
    e[n] = 1.0;
    if lowrank {
        blk.push(0, Term::rank_one(e));
    } else {
        blk.push(0, Term::Dense(&e * e.transpose()));
    }
    let mut lam = DVector::from_element(n + 1, -1.0);
    lam[n] = r * r;
    if dense_lambda {
        blk.push(1, Term::Dense(DMatrix::from_diagonal(&lam)));
    } else {
        blk.push(1, Term::Diagonal(lam));
    }
    p.psd_blocks.push(blk);
    let mut l = LinearBlock::new(2);
    l.push_le(&[0.0, -1.0], 0.0);
    p.linear_blocks.push(l);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol.y[0]
}

/// The same problem with the arrow LMI split into 2×2 cones
/// `[[λ + a_k, b_k/2], [b_k/2, τ_k]] ⪰ 0` and `t + λr² + Σ τ_k ≤ 0`.
fn ball_minimum_batch(a: &[f64], b: &[f64], r: f64) -> f64 {
    let n = a.len();
    let m = 2 + n;
    let mut objective = DVector::zeros(m);
    objective[0] = 1.0;
    let mut p = LmiProblem::new(objective);
    let mut batch = Psd2Batch::new();
    for k in 0..n {
        batch.push_block(
            [a[k], 0.5 * b[k], 0.0],
            vec![(1, [-1.0, 0.0, 0.0]), (2 + k, [0.0, 0.0, -1.0])],
        );
    }
    p.psd2_batches.push(batch);
    let mut l = LinearBlock::new(m);
    let mut row = vec![1.0; m];
    row[1] = r * r;
    l.push_le(&row, 0.0);
    let mut nonneg = vec![0.0; m];
    nonneg[1] = -1.0;
    l.push_le(&nonneg, 0.0);
    p.linear_blocks.push(l);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol.y[0]
}

fn ball_minimum_brute(a: &[f64], b: &[f64], r: f64) -> f64 {
    // Secular equation by bisection (diagonal case, no hard case in these inputs).
    let q = |mu: f64| -> f64 {
        a.iter()
            .zip(b)
            .map(|(ai, bi)| (bi / (2.0 * (ai + mu))).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut mu = 0.0;
    if !(amin > 0.0 && q(0.0) <= r) {
        let mut lo = (-amin).max(0.0);
        let mut hi = lo + 1.0;
        while q(hi) > r {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q(mid) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mu = hi;
    }
    a.iter()
        .zip(b)
        .map(|(ai, bi)| {
            let u = -bi / (2.0 * (ai + mu));
            ai * u * u + bi * u
        })
        .sum()
}

#[test]
fn s_procedure_ball_minimum() {
    let a = [1.0, -0.5, 2.0, 0.1];
    let b = [0.3, 1.0, -2.0, 0.7];
    let r = 1.3;
    let expected = ball_minimum_brute(&a, &b, r);
    let got = ball_minimum_lmi(&a, &b, r, true);
    assert_relative_eq!(got, expected, epsilon = 1e-6);
}

#[test]
fn dense_and_lowrank_terms_share_a_block() {
    let a = [0.4, 1.5, -0.3];
    let b = [1.0, 0.2, -0.6];
    let expected = ball_minimum_brute(&a, &b, 0.9);
    assert_relative_eq!(
        ball_minimum_lmi_with(&a, &b, 0.9, true, true),
        expected,
        epsilon = 1e-6
    );
}

#[test]
fn two_by_two_batch_matches_secular_solution() {
    let a = [1.0, -0.5, 2.0, 0.1];
    let b = [0.3, 1.0, -2.0, 0.7];
    let expected = ball_minimum_brute(&a, &b, 1.3);
    assert_relative_eq!(ball_minimum_batch(&a, &b, 1.3), expected, epsilon = 1e-6);
}

/// `min ‖Ax − b‖²` as `max −Σ τ_k` with `[[1, (Ax − b)_k], [(Ax − b)_k, τ_k]] ⪰ 0`.
/// Every block shares the `x` variables, so the dense Schur path is taken.
fn least_squares_batch(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let (rows, cols) = a.shape();
    let mut objective = DVector::zeros(cols + rows);
    objective.rows_mut(cols, rows).fill(-1.0);
    let mut p = LmiProblem::new(objective);
    let mut batch = Psd2Batch::new();
    for k in 0..rows {
        let mut terms: Vec<(usize, [f64; 3])> =
            (0..cols).map(|i| (i, [0.0, -a[(k, i)], 0.0])).collect();
        terms.push((cols + k, [0.0, 0.0, -1.0]));
        batch.push_block([1.0, -b[k], 0.0], terms);
    }
    p.psd2_batches.push(batch);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    -sol.dual_objective
}

fn least_squares_exact(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let x = (a.transpose() * a)
        .cholesky()
        .unwrap()
        .solve(&(a.transpose() * b));
    (a * x - b).norm_squared()
}

#[test]
fn batch_least_squares() {
    let a = DMatrix::from_fn(8, 3, |i, j| {
        ((i * 3 + j) as f64 * 0.7).sin() + if i == j { 1.0 } else { 0.0 }
    });
    let b = DVector::from_fn(8, |i, _| (i as f64 * 1.3).cos());
    let exact = least_squares_exact(&a, &b);
    assert_relative_eq!(least_squares_batch(&a, &b), exact, epsilon = 1e-7);
}

#[test]
fn infeasible_problem_is_reported() {
    // y ≤ −1 and −y ≤ −1 has no solution.
    let mut p = LmiProblem::new(DVector::from_element(1, 1.0));
    let mut l = LinearBlock::new(1);
    l.push_le(&[1.0], -1.0).push_le(&[-1.0], -1.0);
    p.linear_blocks.push(l);
    let sol = solve(&p, &Settings::default()).unwrap();
    assert!(!sol.status.is_usable(), "status {:?}", sol.status);
}

#[test]
fn step_to_boundary() {
    let s = DMatrix::<f64>::identity(3, 3);
    let ds = DMatrix::<f64>::identity(3, 3) * -2.0;
    assert_relative_eq!(max_psd_step(&s, &ds), 0.5, epsilon = 1e-12);
    assert!(max_psd_step(&s, &s).is_infinite());
}

#[test]
fn complementary_solution_is_primal_feasible() {
    let a = [0.5, 2.0, 1.0];
    let b = [1.0, -1.0, 0.5];
    let n = a.len();
    let mut constant = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        constant[(i, i)] = a[i];
        constant[(i, n)] = 0.5 * b[i];
        constant[(n, i)] = 0.5 * b[i];
    }
    let mut p = LmiProblem::new(DVector::from_vec(vec![1.0, 0.0]));
    let mut blk = PsdBlock::new(constant);
    let mut e = DVector::zeros(n + 1);
    e[n] = 1.0;
    blk.push(0, Term::rank_one(e));
    let mut lam = DVector::from_element(n + 1, -1.0);
    lam[n] = 0.25;
    blk.push(1, Term::Diagonal(lam));
    p.psd_blocks.push(blk);
    let mut l = LinearBlock::new(2);
    l.push_le(&[0.0, -1.0], 0.0);
    p.linear_blocks.push(l);
    let sol = solve(&p, &Settings::default()).unwrap();
    // X ⪰ 0 with tr(A_t X) = 1 on the t-variable.
    let x = &sol.x_psd[0];
    assert!(x.symmetric_eigenvalues().min() > -1e-9);
    assert_relative_eq!(x[(n, n)], 1.0, epsilon = 1e-6);
    let z = p.psd_blocks[0].slack(&sol.y);
    assert!(z.symmetric_eigenvalues().min() > -1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lowrank_and_dense_terms_agree(
        a in proptest::collection::vec(-1.0f64..3.0, 4),
        b in proptest::collection::vec(-2.0f64..2.0, 4),
        r in 0.2f64..2.0,
    ) {
        let lr = ball_minimum_lmi(&a, &b, r, true);
        let dn = ball_minimum_lmi(&a, &b, r, false);
        let exact = ball_minimum_brute(&a, &b, r);
        prop_assert!((lr - dn).abs() <= 1e-6 * (1.0 + exact.abs()));
        prop_assert!((lr - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "lmi {lr} exact {exact}");
        let bt = ball_minimum_batch(&a, &b, r);
        prop_assert!((bt - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "batch {bt} exact {exact}");
    }

    #[test]
    fn batch_least_squares_random(
        entries in proptest::collection::vec(-1.0f64..1.0, 24),
        rhs in proptest::collection::vec(-3.0f64..3.0, 8),
    ) {
        let mut a = DMatrix::from_row_slice(8, 3, &entries);
        for i in 0..3 {
            a[(i, i)] += 2.0;
        }
        let b = DVector::from_vec(rhs);
        let exact = least_squares_exact(&a, &b);
        let got = least_squares_batch(&a, &b);
        prop_assert!((got - exact).abs() <= 1e-6 * (1.0 + exact), "batch {got} exact {exact}");
    }
}
