use serde::Serialize;

use super::perception::perceive;
use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, Policy};
use crate::probmath::{entropy_of, kl_of, softmax, Categorical};

/// Expected free energy of one policy at one future step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfeTerm {
    pub tau: usize,
    /// `KL[q(φ_τ | π) ‖ C_τ]`.
    pub risk: f64,
    /// `Σ_j q(θ_τ = j | π) H(A[:, j])`.
    pub ambiguity: f64,
}

impl EfeTerm {
    pub fn total(&self) -> f64 {
        self.risk + self.ambiguity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEfe {
    pub total: f64,
    pub terms: Vec<EfeTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfeReport {
    pub per_policy: Vec<PolicyEfe>,
}

impl EfeReport {
    pub fn totals(&self) -> Vec<f64> {
        self.per_policy.iter().map(|p| p.total).collect()
    }
}

/// `G(π) = Σ_{τ ≥ from_tau} KL[A q(θ_τ|π) ‖ C_τ] + E_q[H(A)]`.
///
/// `beliefs[π][τ]` are the per-policy marginals, e.g. from
/// [`perceive`](super::perceive). Steps before `from_tau` are left out, which
/// lets a planner score only the future of an episode.
pub fn expected_free_energy(gm: &GenerativeModel, beliefs: &[Vec<Vec<f64>>], from_tau: usize) -> Result<EfeReport> {
    let (n, t) = (gm.n_concepts(), gm.horizon());
    let column_entropy: Vec<f64> = (0..n).map(|j| entropy_of(&gm.a().column(j))).collect();
    let mut per_policy = Vec::with_capacity(beliefs.len());
    for (k, marginals) in beliefs.iter().enumerate() {
        if marginals.len() != t || marginals.iter().any(|q| q.len() != n) {
            return Err(Error::dim(format!("beliefs for policy {k} must be {t} × {n}")));
        }
        let mut terms = Vec::new();
        for (tau, q) in marginals.iter().enumerate().skip(from_tau) {
            let predicted = gm.a().mul_vec(q);
            let risk = kl_of(&predicted, gm.c()[tau].probs()).map_err(|_| {
                Error::domain(format!(
                    "policy {k}, step {tau}: preferences give zero mass to a predicted stimulus"
                ))
            })?;
            let ambiguity = q.iter().zip(&column_entropy).map(|(qj, h)| qj * h).sum();
            terms.push(EfeTerm { tau, risk, ambiguity });
        }
        // an empty float sum is −0.0
        let total = terms.iter().map(EfeTerm::total).sum::<f64>() + 0.0;
        per_policy.push(PolicyEfe { total, terms });
    }
    Ok(EfeReport { per_policy })
}

/// Policy posterior `q(π) = σ(−F(π) − γ G(π))`.
pub fn plan(free_energy: &[f64], efe: &[f64], gamma: f64) -> Categorical {
    assert_eq!(free_energy.len(), efe.len(), "one F and one G per policy");
    let values: Vec<f64> = free_energy.iter().zip(efe).map(|(f, g)| -(f + gamma * g)).collect();
    softmax(&values, 1.0)
}

/// Action with the most policy mass at step `tau`; lowest index on ties.
///
/// `weights` may be any non-negative multiple of a policy posterior.
pub fn select_action(weights: &[f64], policies: &[Policy], tau: usize) -> Result<usize> {
    if weights.len() != policies.len() {
        return Err(Error::dim("one weight per policy is required"));
    }
    let n_actions = policies
        .iter()
        .filter_map(|p| p.actions.get(tau))
        .max()
        .map(|&a| a + 1)
        .ok_or_else(|| Error::domain(format!("no policy has an action at step {tau}")))?;
    let mut mass = vec![0.0; n_actions];
    for (w, p) in weights.iter().zip(policies) {
        if let Some(&a) = p.actions.get(tau) {
            mass[a] += w;
        }
    }
    let mut best = 0;
    for (a, &m) in mass.iter().enumerate() {
        if m > mass[best] {
            best = a;
        }
    }
    Ok(best)
}

/// Policy-averaged predictive distribution of the stimulus at step `tau`.
pub fn predictive(gm: &GenerativeModel, beliefs: &[Vec<Vec<f64>>], q_pi: &[f64], tau: usize) -> Vec<f64> {
    let mut out = vec![0.0; gm.n_stimuli()];
    for (w, marginals) in q_pi.iter().zip(beliefs) {
        for (o, p) in out.iter_mut().zip(gm.a().mul_vec(&marginals[tau])) {
            *o += w * p;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurprisalTrace {
    /// `−ln p(φ_τ)` before each stimulus is seen; `+∞` for impossible stimuli.
    pub per_step: Vec<f64>,
    /// Running time average, the empirical entropy estimate of the input.
    pub running_mean: Vec<f64>,
    /// Set when any step had zero predictive probability.
    pub saw_impossible: bool,
}

impl SurprisalTrace {
    pub fn mean(&self) -> f64 {
        self.running_mean.last().copied().unwrap_or(0.0)
    }
}

/// Surprisal of each stimulus under the policy-mixed predictive built from
/// the stimuli before it. Streams longer than the horizon are read as
/// consecutive trials of `horizon` steps, each starting from `D`.
pub fn surprisal_trace(gm: &GenerativeModel, q_pi: &Categorical, obs: &[usize]) -> Result<SurprisalTrace> {
    if q_pi.len() != gm.policies().len() {
        return Err(Error::dim("policy posterior does not match the policy set"));
    }
    if let Some(&o) = obs.iter().find(|&&o| o >= gm.n_stimuli()) {
        return Err(Error::domain(format!("observation {o} outside the stimulus alphabet")));
    }
    let mut per_step = Vec::with_capacity(obs.len());
    for trial in obs.chunks(gm.horizon()) {
        for tau in 0..trial.len() {
            let beliefs = gm
                .policies()
                .iter()
                .map(|p| perceive(gm, p, &trial[..tau]).map(|r| r.marginals))
                .collect::<Result<Vec<_>>>()?;
            let p = predictive(gm, &beliefs, q_pi.probs(), tau)[trial[tau]];
            per_step.push(if p > 0.0 { -p.ln() } else { f64::INFINITY });
        }
    }
    let mut running_mean = Vec::with_capacity(per_step.len());
    let mut acc = 0.0;
    for (k, s) in per_step.iter().enumerate() {
        acc += s;
        running_mean.push(acc / (k + 1) as f64);
    }
    Ok(SurprisalTrace {
        saw_impossible: per_step.iter().any(|s| s.is_infinite()),
        per_step,
        running_mean,
    })
}
