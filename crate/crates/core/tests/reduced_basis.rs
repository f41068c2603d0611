mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use uwdae::bench::{make_stokes_like, StokesLikeParams};
use uwdae::linalg::to_sparse;
use uwdae::rbm::{
    estimator_online, greedy_with, lift, lift_solution, reduced_solve, GreedyResult, ReducedModel,
    TrainingSet,
};
use uwdae::solver::{l2_distance, l2_norm, Discretization};
use uwdae::system::{DaeSystem, ScalarProfile, Theta, TimeFunction};
use uwdae::temporal::TimeGrid;

fn small_stokes(k: usize, train_size: usize, n_max: usize) -> GreedyResult {
    let s = make_stokes_like(&StokesLikeParams {
        cells: 4,
        control_intervals: k,
        ..Default::default()
    })
    .unwrap();
    let sys = s.homogeneous().unwrap();
    let p = sys.param_dim;
    let train = TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], train_size, 3).unwrap();
    let disc = Discretization::new(
        Arc::new(sys),
        &train.params[0],
        TimeGrid::new(1.0, k).unwrap(),
    )
    .unwrap();
    greedy_with(&disc, &train, 0.0, n_max).unwrap()
}

#[test]
fn error_identity_on_validation_parameters() {
    let res = small_stokes(12, 60, 14);
    let disc = res.offline.disc.clone();
    let p = disc.system.param_dim;
    let val = TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], 30, 99).unwrap();
    for n in [1, 4, 8, res.offline.basis_size()] {
        let model = res.offline.build_model(n).unwrap();
        for mu in &val.params {
            let x = reduced_solve(&model, mu).unwrap();
            let est = estimator_online(&model, mu, &x).unwrap();
            let truth = disc.solve(mu).unwrap();
            let err = l2_distance(&truth, &lift_solution(&model, &disc, mu, &x).unwrap()).unwrap();
            assert!(
                (err - est).abs() <= 1e-6 * l2_norm(&truth),
                "N={n}: {err} vs {est}"
            );
        }
    }
}

#[test]
fn reduced_system_residual_and_lift() {
    let res = small_stokes(6, 20, 5);
    let model = &res.model;
    let p = model.dims.param_dim;
    let val = TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], 5, 4).unwrap();
    for mu in &val.params {
        let x = reduced_solve(model, mu).unwrap();
        let f = model.rhs(mu).unwrap();
        assert!((&model.b_n * &x - &f).norm() <= 1e-12 * f.norm());
    }
    let n = model.basis_size();
    assert_eq!(lift(model, &DVector::zeros(n)).amax(), 0.0);
    let mut e2 = DVector::zeros(n);
    e2[1] = 1.0;
    assert_eq!(lift(model, &e2), model.eta.column(1).into_owned());
    let x = DVector::from_fn(n, |i, _| 0.3 * i as f64 - 0.5);
    let disc = &res.offline.disc;
    let lifted = lift_solution(model, disc, &vec![0.0; p], &x).unwrap();
    assert!((l2_norm(&lifted) - x.norm()).abs() <= 1e-10 * x.norm());
}

#[test]
fn greedy_is_deterministic() {
    let a = small_stokes(5, 25, 4);
    let b = small_stokes(5, 25, 4);
    assert_eq!(a.model.snapshots, b.model.snapshots);
    assert_eq!(a.history, b.history);
}

#[test]
fn saved_model_reproduces_online_outputs() {
    let res = small_stokes(8, 30, 10);
    let dir = std::env::temp_dir().join(format!("uwdae-it-model-{}", std::process::id()));
    res.model.save(&dir).unwrap();
    let back = ReducedModel::load(&dir).unwrap();
    let p = back.dims.param_dim;
    let val = TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], 20, 8).unwrap();
    for mu in &val.params {
        let (x1, x2) = (
            reduced_solve(&res.model, mu).unwrap(),
            reduced_solve(&back, mu).unwrap(),
        );
        assert!((&x1 - &x2).amax() <= 1e-12 * x1.amax().max(1.0));
        let d1 = estimator_online(&res.model, mu, &x1).unwrap();
        let d2 = estimator_online(&back, mu, &x2).unwrap();
        assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn corrupt_model_directory_is_reported() {
    let res = small_stokes(4, 10, 2);
    let dir = std::env::temp_dir().join(format!("uwdae-it-corrupt-{}", std::process::id()));
    res.model.save(&dir).unwrap();
    std::fs::remove_file(dir.join("b_n.mtx")).unwrap();
    let err = ReducedModel::load(&dir).unwrap_err().to_string();
    assert!(err.contains("b_n.mtx"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

/// Random stable ODE or index-1 DAE with a two-input control and one
/// parameter-scaled constant forcing.
fn random_system(seed: u64, n: usize, ku: usize) -> DaeSystem {
    let mut rng = common::rng(seed);
    let e = if seed.is_multiple_of(2) {
        DMatrix::identity(n, n)
    } else {
        DMatrix::from_diagonal(&DVector::from_fn(
            n,
            |i, _| if i + 1 < n { 1.0 } else { 0.0 },
        ))
    };
    let a = common::random_sparse(&mut rng, n, 0.5) - DMatrix::identity(n, n) * (n as f64 + 2.0);
    let b = DMatrix::from_fn(n, 2, |_, _| {
        if rand::Rng::random_bool(&mut rng, 0.7) {
            1.0
        } else {
            0.0
        }
    });
    let dir = DVector::from_fn(n, |i, _| 1.0 + i as f64);
    let q = 2 * (ku + 1);
    DaeSystem::new(to_sparse(&e), to_sparse(&a), 1.0)
        .with_control(b, ku)
        .with_param_dim(q + 1)
        .with_rhs(
            Theta::component(q),
            TimeFunction::Profile {
                direction: dir,
                profile: ScalarProfile::Sine {
                    amplitude: 1.0,
                    omega: 3.0,
                },
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn history_is_monotone_and_ends_exact(seed in any::<u64>(), n in 2usize..5, ku in 1usize..4) {
        let sys = random_system(seed, n, ku);
        let p = sys.param_dim;
        let q_f = sys.rhs_terms().len();
        let train = TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], 3 * q_f, seed).unwrap();
        let disc = Discretization::new(Arc::new(sys), &train.params[0], TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let res = greedy_with(&disc, &train, 0.0, q_f).unwrap();
        let h = &res.history;
        for w in h.windows(2) {
            prop_assert!(w[1].max_error <= w[0].max_error * (1.0 + 1e-10));
        }
        prop_assert!(h.last().unwrap().max_error <= 1e-8 * h[0].max_error);
        let b = &res.model.b_n;
        prop_assert!((b - DMatrix::identity(b.nrows(), b.ncols())).amax() <= 1e-10);
    }
}
