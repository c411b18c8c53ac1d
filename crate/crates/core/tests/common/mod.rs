//! Test oracles written from the definitions, independent of the library's
//! own arithmetic, plus random model generators.
#![allow(dead_code)]

use conceptgen::genmodel::{enumerate_policies, GenerativeModel, Policy};
use conceptgen::probmath::{Categorical, Matrix};
use rand::Rng;

/// Column-stochastic matrix with entries bounded away from zero.
pub fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let w: Vec<f64> = (0..rows).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for (r, x) in w.iter().enumerate() {
            m.set(r, c, x / s);
        }
    }
    m
}

pub fn random_categorical<R: Rng>(rng: &mut R, n: usize) -> Categorical {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    Categorical::from_weights(&w).unwrap()
}

/// Random model with two actions and every policy of the horizon.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, m: usize, horizon: usize) -> GenerativeModel {
    let b = vec![random_stochastic(rng, n, n), random_stochastic(rng, n, n)];
    GenerativeModel::new(
        random_stochastic(rng, m, n),
        b,
        vec![random_categorical(rng, m)],
        random_categorical(rng, n),
        1.0,
        horizon,
        enumerate_policies(2, horizon - 1, 4096).unwrap(),
    )
    .unwrap()
}

/// `p(φ̃ | π)` and the exact state marginals, by nested enumeration.
pub fn oracle_posterior(gm: &GenerativeModel, policy: &Policy, obs: &[usize]) -> (f64, Vec<Vec<f64>>) {
    let (n, t) = (gm.n_concepts(), gm.horizon());
    let mut states = vec![0usize; t];
    let mut evidence = 0.0;
    let mut marg = vec![vec![0.0; n]; t];
    loop {
        let mut w = gm.d().probs()[states[0]];
        for tau in 0..t {
            if tau < obs.len() {
                w *= gm.a().get(obs[tau], states[tau]);
            }
            if tau > 0 {
                w *= gm.b()[policy.actions[tau - 1]].get(states[tau], states[tau - 1]);
            }
        }
        evidence += w;
        for tau in 0..t {
            marg[tau][states[tau]] += w;
        }
        // odometer increment
        let mut k = t;
        loop {
            if k == 0 {
                for row in &mut marg {
                    for x in row.iter_mut() {
                        *x /= evidence;
                    }
                }
                return (evidence, marg);
            }
            k -= 1;
            states[k] += 1;
            if states[k] < n {
                break;
            }
            states[k] = 0;
        }
    }
}

pub fn oracle_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

pub fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// `Σ p(i,j) ln p(i,j) / (p(i) p(j))` over the cells of a joint table.
pub fn oracle_mi(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..joint[0].len()).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, r) in joint.iter().enumerate() {
        for (j, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

/// Transfer energy straight from stimulus-by-concept entries.
pub fn oracle_omega(entries: &[Vec<f64>], lambda: f64) -> f64 {
    let total: f64 = entries.iter().flatten().sum();
    let n_concepts = entries[0].len();
    // concepts on rows
    let joint: Vec<Vec<f64>> = (0..n_concepts)
        .map(|c| entries.iter().map(|row| row[c] / total).collect())
        .collect();
    let concept_marginal: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    -lambda * oracle_mi(&joint) + (1.0 - lambda) * oracle_entropy(&concept_marginal)
}

/// Binomial upper tail `P(X ≥ k)` for `X ~ Bin(n, p)`.
pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    let ln_choose = |n: u64, r: u64| -> f64 {
        (1..=r).map(|i| ((n - r + i) as f64).ln() - (i as f64).ln()).sum()
    };
    (k..=n)
        .map(|i| (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp())
        .sum()
}
