use approx::assert_abs_diff_eq;
use shapprune::estimator::estimate;
use shapprune::game::{make_perturbed_uniform, make_un_security_council, FnGame};
use shapprune::{shapley_exact_permutations, shapley_exact_subsets, CoalitionalGame, PayoffTable, SamplingPlan};

#[test]
fn security_council_closed_form() {
    // Each permanent member gets 421/2145, each elected member 4/2145.
    let sv = shapley_exact_subsets(&make_un_security_council()).unwrap();
    for (i, v) in sv.iter().enumerate() {
        let expected = if i < 5 { 421.0 / 2145.0 } else { 4.0 / 2145.0 };
        assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(sv.total(), 1.0, epsilon = 1e-12);
}

#[test]
fn perturbed_uniform_golden() {
    let game = make_perturbed_uniform(8, 0.01, 7).unwrap();
    let golden = [
        0.1252262557418608,
        0.12445098294703323,
        0.12535131540742217,
        0.12536256151842334,
        0.12349406582031898,
        0.12526304743926364,
        0.12572417936540534,
        0.12512759176027255,
    ];
    let sv = shapley_exact_subsets(&game).unwrap();
    for (a, b) in sv.iter().zip(golden) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
    let perm = shapley_exact_permutations(&game).unwrap();
    for (a, b) in perm.iter().zip(golden) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
}

#[test]
fn table_file_round_trip() {
    let game = make_perturbed_uniform(5, 0.05, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, game.to_json_string().unwrap()).unwrap();
    assert_eq!(PayoffTable::load(&path).unwrap(), game);
}

/// n = 6 game with unequal, interacting players.
fn lopsided() -> impl CoalitionalGame {
    FnGame::new(6, |s| {
        let weights = [0.5, 0.3, 0.1, 0.05, 0.03, 0.02];
        let w: f64 = s.members().map(|i| weights[i]).sum();
        let bonus = if s.contains(0) && s.contains(3) { 0.2 } else { 0.0 };
        w * w + bonus
    })
    .unwrap()
}

fn check_unbiased(plan: impl Fn(u64) -> SamplingPlan) {
    let game = lopsided();
    let exact = shapley_exact_subsets(&game).unwrap();
    let runs: Vec<Vec<f64>> = (0..200)
        .map(|s| estimate(&game, &plan(s)).unwrap().estimates.into_inner())
        .collect();
    for i in 0..6 {
        let xs: Vec<f64> = runs.iter().map(|r| r[i]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        assert!(
            (mean - exact[i]).abs() <= 3.0 * se + 1e-12,
            "player {i}: mean {mean} exact {} se {se}",
            exact[i]
        );
    }
}

#[test]
fn permutation_estimator_is_unbiased() {
    check_unbiased(|s| SamplingPlan::permutations(20, s));
}

#[test]
fn subset_estimator_is_unbiased() {
    check_unbiased(|s| SamplingPlan::subsets(40, s));
}

#[test]
fn exhaustive_plans_reproduce_exact_values() {
    let game = lopsided();
    let exact = shapley_exact_subsets(&game).unwrap();
    for method in [shapprune::SamplingMethod::Permutation, shapprune::SamplingMethod::Subset] {
        let est = estimate(&game, &SamplingPlan::exhaustive(method)).unwrap();
        for (a, b) in est.estimates.iter().zip(exact.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}
