mod common;

use conceptgen::genmodel::{
    enumerate_policies, expected_model, joint_probability, update_dirichlet, DirichletCounts, LearningStep,
};
use conceptgen::probmath::{sample_categorical, Categorical, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn total(c: &DirichletCounts) -> f64 {
    c.a().data().iter().chain(c.b().iter().flat_map(|b| b.data())).chain(c.d()).sum()
}

#[test]
fn policies_are_lexicographic_and_complete() {
    let p = enumerate_policies(3, 2, 100).unwrap();
    assert_eq!(p.len(), 9);
    assert_eq!(p[0].actions, vec![0, 0]);
    assert_eq!(p[5].actions, vec![1, 2]);
    assert_eq!(p[8].actions, vec![2, 2]);
    assert_eq!(enumerate_policies(4, 0, 1).unwrap().len(), 1);
    assert!(enumerate_policies(2, 13, 4096).is_err());
    assert!(enumerate_policies(0, 1, 10).is_err());
}

proptest! {
    #[test]
    fn joint_sums_to_one(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, t in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gm = common::random_model(&mut rng, n, m, t);
        let prior = common::random_categorical(&mut rng, gm.policies().len());
        let mut sum = 0.0;
        for k in 0..gm.policies().len() {
            for s in 0..n.pow(t as u32) {
                for o in 0..m.pow(t as u32) {
                    let states = conceptgen::inference::trajectory(s, n, t);
                    let obs = conceptgen::inference::trajectory(o, m, t);
                    sum += joint_probability(&gm, &states, &obs, k, &prior).unwrap();
                }
            }
        }
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_updates_are_additive_and_conserve_mass(
        seed in any::<u64>(),
        lr in 0.0f64..3.0,
        len in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = DirichletCounts::uniform(3, 2, 2, 0.5);
        let episode: Vec<LearningStep> = (0..len)
            .map(|tau| LearningStep {
                observation: tau % 3,
                posterior: common::random_categorical(&mut rng, 2).into_vec(),
                action: (tau + 1 < len).then_some(tau % 2),
            })
            .collect();
        let once = update_dirichlet(&counts, std::slice::from_ref(&episode), lr).unwrap();
        let twice = update_dirichlet(&once, std::slice::from_ref(&episode), lr).unwrap();
        let batched = update_dirichlet(&counts, &[episode.clone(), episode.clone()], lr).unwrap();
        for (x, y) in twice.a().data().iter().zip(batched.a().data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        // a gains lr per step, d gains lr, b gains lr per transition
        let expected = total(&counts) + lr * (len as f64 + 1.0 + (len - 1) as f64);
        prop_assert!((total(&once) - expected).abs() < 1e-9);
        prop_assert!(once.a().data().iter().zip(counts.a().data()).all(|(a, b)| a >= b));
        let gm = expected_model(&once, 1.0, 2, vec![Categorical::uniform(3)], enumerate_policies(2, 1, 10).unwrap())
            .unwrap();
        prop_assert!(gm.a().check_column_stochastic("A").is_ok());
        prop_assert!(gm.b().iter().all(|b| b.check_column_stochastic("B").is_ok()));
    }
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let counts = DirichletCounts::uniform(2, 2, 1, 1.0);
    let step = LearningStep { observation: 1, posterior: vec![0.3, 0.7], action: None };
    assert_eq!(update_dirichlet(&counts, &[vec![step]], 0.0).unwrap(), counts);
}

/// Counts fed with known states and sampled stimuli approach the emission
/// matrix at the sampling rate.
fn static_state_error(seed: u64, episodes: usize) -> f64 {
    let a_star = Matrix::from_rows(&[vec![0.7, 0.2], vec![0.2, 0.1], vec![0.1, 0.7]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = DirichletCounts::uniform(3, 2, 1, 1.0);
    for e in 0..episodes {
        let state = e % 2;
        let column = Categorical::new(a_star.column(state)).unwrap();
        let obs = sample_categorical(&column, &mut rng);
        let mut posterior = vec![0.0; 2];
        posterior[state] = 1.0;
        let step = LearningStep { observation: obs, posterior, action: None };
        counts = update_dirichlet(&counts, &[vec![step]], 1.0).unwrap();
    }
    let gm = expected_model(&counts, 1.0, 1, vec![Categorical::uniform(3)], enumerate_policies(1, 0, 1).unwrap())
        .unwrap();
    gm.a().data().iter().zip(a_star.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn dirichlet_means_converge_to_the_emissions() {
    let errors: Vec<f64> = (1..=3).map(|s| static_state_error(s, 500)).collect();
    let violations = errors.iter().filter(|&&e| e >= 0.05).count();
    assert!(violations <= 1, "errors {errors:?}");
}
