use serde::Serialize;

use super::perception::check_observations;
use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, Policy};
use crate::probmath::{kl_of, xlnx, xlny, Categorical};

/// Largest number of state trajectories [`exact_posterior`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Exact Bayesian posterior over state trajectories under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub marginals: Vec<Vec<f64>>,
    /// `−ln p(φ̃ | π)`.
    pub surprisal: f64,
    /// Posterior over all `n^T` trajectories, first step most significant.
    pub joint: Vec<f64>,
}

/// Decodes trajectory index `k` into states, first step most significant.
pub fn trajectory(k: usize, n: usize, horizon: usize) -> Vec<usize> {
    let mut states = vec![0; horizon];
    let mut rest = k;
    for slot in states.iter_mut().rev() {
        *slot = rest % n;
        rest /= n;
    }
    states
}

fn trajectory_count(gm: &GenerativeModel) -> Result<usize> {
    u32::try_from(gm.horizon())
        .ok()
        .and_then(|t| gm.n_concepts().checked_pow(t))
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            Error::Enumeration(format!(
                "{}^{} trajectories exceed the limit of {ENUMERATION_LIMIT}",
                gm.n_concepts(),
                gm.horizon()
            ))
        })
}

fn trajectory_weight(gm: &GenerativeModel, policy: &Policy, obs: &[usize], states: &[usize]) -> f64 {
    let mut w = gm.d().probs()[states[0]];
    for (tau, &s) in states.iter().enumerate() {
        if let Some(&o) = obs.get(tau) {
            w *= gm.a().get(o, s);
        }
        if tau > 0 {
            w *= gm.b()[policy.action_at(tau - 1)].get(s, states[tau - 1]);
        }
    }
    w
}

/// Brute-force posterior by enumerating every state trajectory.
pub fn exact_posterior(gm: &GenerativeModel, policy: &Policy, obs: &[usize]) -> Result<ExactPosterior> {
    check_observations(gm, obs)?;
    if policy.actions.len() + 1 != gm.horizon() {
        return Err(Error::dim("policy length does not match the horizon"));
    }
    let (n, t) = (gm.n_concepts(), gm.horizon());
    let count = trajectory_count(gm)?;
    let mut joint: Vec<f64> = (0..count)
        .map(|k| trajectory_weight(gm, policy, obs, &trajectory(k, n, t)))
        .collect();
    let evidence: f64 = joint.iter().sum();
    if evidence <= 0.0 {
        return Err(Error::domain("observation sequence has zero probability under the model"));
    }
    joint.iter_mut().for_each(|p| *p /= evidence);
    let mut marginals = vec![vec![0.0; n]; t];
    for (k, p) in joint.iter().enumerate() {
        for (tau, s) in trajectory(k, n, t).into_iter().enumerate() {
            marginals[tau][s] += p;
        }
    }
    Ok(ExactPosterior {
        marginals,
        surprisal: -evidence.ln(),
        joint,
    })
}

/// `E_q[ln q(θ̃) − ln p(φ̃, θ̃ | π)]` for an arbitrary distribution over
/// trajectories, indexed as in [`ExactPosterior::joint`].
pub fn free_energy_of_joint(
    gm: &GenerativeModel,
    policy: &Policy,
    obs: &[usize],
    q_joint: &[f64],
) -> Result<f64> {
    check_observations(gm, obs)?;
    let (n, t) = (gm.n_concepts(), gm.horizon());
    if q_joint.len() != trajectory_count(gm)? {
        return Err(Error::dim("joint beliefs must cover every trajectory"));
    }
    let mut f = 0.0;
    for (k, &q) in q_joint.iter().enumerate() {
        if q > 0.0 {
            f += xlnx(q) - xlny(q, trajectory_weight(gm, policy, obs, &trajectory(k, n, t)));
        }
    }
    Ok(f)
}

/// The two readings of single-step free energy and their parts (nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyReport {
    /// `E_q[ln q(θ) − ln p(θ, φ)]`.
    pub direct: f64,
    pub divergence_plus_surprise: f64,
    pub complexity_minus_accuracy: f64,
    /// `KL[q ‖ p(θ | φ)]`.
    pub divergence: f64,
    /// `−ln p(φ)`.
    pub surprise: f64,
    /// `KL[q ‖ D]`.
    pub complexity: f64,
    /// `E_q[ln p(φ | θ)]`.
    pub accuracy: f64,
}

/// Evaluates free energy of beliefs `q` about a single step with prior `D`
/// and likelihood `A`, directly and through both decompositions.
pub fn free_energy_decompositions(gm: &GenerativeModel, q: &Categorical, obs: usize) -> Result<FreeEnergyReport> {
    let n = gm.n_concepts();
    if q.len() != n {
        return Err(Error::dim(format!("beliefs have {} entries, expected {n}", q.len())));
    }
    if obs >= gm.n_stimuli() {
        return Err(Error::domain(format!("observation {obs} outside the stimulus alphabet")));
    }
    let prior = gm.d().probs();
    let likelihood = gm.a().row(obs);
    let joint: Vec<f64> = prior.iter().zip(likelihood).map(|(d, a)| d * a).collect();
    let evidence: f64 = joint.iter().sum();
    if evidence <= 0.0 {
        return Err(Error::domain(format!("p(φ = {obs}) is zero")));
    }
    let posterior: Vec<f64> = joint.iter().map(|p| p / evidence).collect();
    let qp = q.probs();

    let direct = qp.iter().zip(&joint).map(|(&qi, &pj)| xlnx(qi) - xlny(qi, pj)).sum();
    let divergence = kl_of(qp, &posterior)?;
    let surprise = -evidence.ln();
    let complexity = kl_of(qp, prior)?;
    let accuracy = qp.iter().zip(likelihood).map(|(&qi, &a)| xlny(qi, a)).sum::<f64>();
    Ok(FreeEnergyReport {
        direct,
        divergence_plus_surprise: divergence + surprise,
        complexity_minus_accuracy: complexity - accuracy,
        divergence,
        surprise,
        complexity,
        accuracy,
    })
}
