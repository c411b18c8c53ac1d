use serde::Serialize;

use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, Policy};
use crate::probmath::{xlnx, Matrix};

/// Probabilities below this are treated as this value inside logarithms.
pub const LOG_FLOOR: f64 = 1e-300;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 64;

#[inline]
pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Posterior beliefs under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perception {
    /// `marginals[τ][j] = q(θ_τ = j | π)` for every step of the horizon.
    pub marginals: Vec<Vec<f64>>,
    /// Mean-field free energy `F(π)` at the returned beliefs.
    pub free_energy: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// `F(π)` at the initial beliefs and after every sweep.
    pub history: Vec<f64>,
}

struct LogTables {
    a: Matrix,
    b: Vec<Matrix>,
    d: Vec<f64>,
}

impl LogTables {
    fn new(gm: &GenerativeModel) -> Self {
        let ln = |m: &Matrix| {
            let mut out = m.clone();
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    out.set(r, c, floored_ln(m.get(r, c)));
                }
            }
            out
        };
        Self {
            a: ln(gm.a()),
            b: gm.b().iter().map(ln).collect(),
            d: gm.d().probs().iter().map(|&p| floored_ln(p)).collect(),
        }
    }
}

pub(crate) fn check_observations(gm: &GenerativeModel, obs: &[usize]) -> Result<()> {
    if obs.len() > gm.horizon() {
        return Err(Error::dim(format!(
            "{} observations exceed the horizon {}",
            obs.len(),
            gm.horizon()
        )));
    }
    for (tau, &o) in obs.iter().enumerate() {
        if o >= gm.n_stimuli() {
            return Err(Error::domain(format!("observation {o} at step {tau} outside the stimulus alphabet")));
        }
        if gm.a().row(o).iter().all(|&p| p == 0.0) {
            return Err(Error::domain(format!(
                "stimulus {o} has zero likelihood under every concept"
            )));
        }
    }
    Ok(())
}

fn check_policy(gm: &GenerativeModel, policy: &Policy) -> Result<()> {
    if policy.actions.len() + 1 != gm.horizon() {
        return Err(Error::dim(format!(
            "policy has {} actions for horizon {}",
            policy.actions.len(),
            gm.horizon()
        )));
    }
    if policy.actions.iter().any(|&a| a >= gm.n_actions()) {
        return Err(Error::domain("policy action outside the transition list"));
    }
    Ok(())
}

/// Log-potential of step `tau` given its neighbours' current beliefs.
fn log_potential(
    logs: &LogTables,
    policy: &Policy,
    obs: &[usize],
    q: &[Vec<f64>],
    tau: usize,
) -> Vec<f64> {
    let n = logs.d.len();
    let t = q.len();
    let mut v = vec![0.0; n];
    if let Some(&o) = obs.get(tau) {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += logs.a.get(o, i);
        }
    }
    if tau == 0 {
        for (vi, ld) in v.iter_mut().zip(&logs.d) {
            *vi += ld;
        }
    } else {
        let lb = &logs.b[policy.action_at(tau - 1)];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += q[tau - 1].iter().enumerate().map(|(j, qj)| qj * lb.get(i, j)).sum::<f64>();
        }
    }
    if tau + 1 < t {
        let lb = &logs.b[policy.action_at(tau)];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += q[tau + 1].iter().enumerate().map(|(k, qk)| qk * lb.get(k, i)).sum::<f64>();
        }
    }
    v
}

fn normalize_exp(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Free energy of the observed steps; `q` may be longer than `obs`.
fn mean_field_energy(logs: &LogTables, policy: &Policy, obs: &[usize], q: &[Vec<f64>]) -> f64 {
    let mut f = 0.0;
    for (tau, qt) in q.iter().enumerate().take(obs.len()) {
        f += qt.iter().map(|&p| xlnx(p)).sum::<f64>();
        f -= qt.iter().enumerate().map(|(i, p)| p * logs.a.get(obs[tau], i)).sum::<f64>();
        if tau == 0 {
            f -= qt.iter().zip(&logs.d).map(|(p, l)| p * l).sum::<f64>();
        } else {
            let lb = &logs.b[policy.action_at(tau - 1)];
            for (i, qi) in qt.iter().enumerate() {
                for (j, qj) in q[tau - 1].iter().enumerate() {
                    f -= qi * qj * lb.get(i, j);
                }
            }
        }
    }
    f
}

/// Mean-field free energy `E_q[ln q(θ̃) − ln p(φ̃, θ̃ | π)]` of factorized
/// beliefs `q[τ]` over the observed steps. Steps after the last observation
/// integrate out of the joint and do not contribute.
pub fn mean_field_free_energy(
    gm: &GenerativeModel,
    policy: &Policy,
    obs: &[usize],
    q: &[Vec<f64>],
) -> Result<f64> {
    check_policy(gm, policy)?;
    check_observations(gm, obs)?;
    if q.len() != gm.horizon() || q.iter().any(|qt| qt.len() != gm.n_concepts()) {
        return Err(Error::dim("beliefs must be horizon × concepts"));
    }
    Ok(mean_field_energy(&LogTables::new(gm), policy, obs, q))
}

/// Exact posterior marginals of the observed steps by forward-backward;
/// `None` when the observations are impossible under the model.
fn smoothed_marginals(gm: &GenerativeModel, policy: &Policy, obs: &[usize]) -> Option<Vec<Vec<f64>>> {
    let seen = obs.len();
    if seen == 0 {
        return Some(Vec::new());
    }
    let weigh = |v: &mut Vec<f64>, o: usize| {
        for (j, x) in v.iter_mut().enumerate() {
            *x *= gm.a().get(o, j);
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
        s > 0.0
    };
    let mut forward = Vec::with_capacity(seen);
    let mut alpha = gm.d().probs().to_vec();
    for (tau, &o) in obs.iter().enumerate() {
        if tau > 0 {
            alpha = gm.b()[policy.action_at(tau - 1)].mul_vec(&alpha);
        }
        if !weigh(&mut alpha, o) {
            return None;
        }
        forward.push(alpha.clone());
    }
    let n = gm.n_concepts();
    let mut beta = vec![1.0; n];
    let mut out = forward;
    for tau in (0..seen).rev() {
        if tau + 1 < seen {
            let mut msg = beta.clone();
            for (j, x) in msg.iter_mut().enumerate() {
                *x *= gm.a().get(obs[tau + 1], j);
            }
            let b = &gm.b()[policy.action_at(tau)];
            beta = (0..n).map(|j| (0..n).map(|i| b.get(i, j) * msg[i]).sum()).collect();
            let s: f64 = beta.iter().sum();
            if s <= 0.0 {
                return None;
            }
            beta.iter_mut().for_each(|x| *x /= s);
        }
        let mut m: Vec<f64> = out[tau].iter().zip(&beta).map(|(a, b)| a * b).collect();
        let s: f64 = m.iter().sum();
        if s <= 0.0 {
            return None;
        }
        m.iter_mut().for_each(|x| *x /= s);
        out[tau] = m;
    }
    Some(out)
}

/// Variational perception under one policy.
///
/// Beliefs about the observed steps start from the exact smoothed marginals
/// (forward-backward) and are refined by sequential coordinate updates
/// `q(θ_τ) ∝ exp(ln A[φ_τ,:] + E_{q(θ_{τ−1})}[ln B] + E_{q(θ_{τ+1})}[ln B])`
/// (`ln D` in place of the backward term at the first step). Each update
/// minimizes `F(π)` in its own factor, so `F(π)` never increases between
/// sweeps. Stops when no marginal moves more than [`CONVERGENCE_TOLERANCE`]
/// or after [`MAX_SWEEPS`]. Beliefs about later steps are predictions: the
/// last observed marginal pushed through `B`.
pub fn perceive(gm: &GenerativeModel, policy: &Policy, obs: &[usize]) -> Result<Perception> {
    check_policy(gm, policy)?;
    check_observations(gm, obs)?;
    let logs = LogTables::new(gm);
    let (t, seen) = (gm.horizon(), obs.len());

    let mut q = Vec::with_capacity(t);
    q.push(gm.d().probs().to_vec());
    for tau in 1..t {
        let next = gm.b()[policy.action_at(tau - 1)].mul_vec(&q[tau - 1]);
        q.push(next);
    }
    if let Some(smoothed) = smoothed_marginals(gm, policy, obs) {
        q[..seen].clone_from_slice(&smoothed);
    }

    let mut history = vec![mean_field_energy(&logs, policy, obs, &q)];
    let mut converged = seen == 0;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for tau in 0..seen {
            let target = normalize_exp(&log_potential(&logs, policy, obs, &q[..seen], tau));
            for (old, new) in q[tau].iter().zip(&target) {
                max_change = max_change.max((old - new).abs());
            }
            q[tau] = target;
        }
        history.push(mean_field_energy(&logs, policy, obs, &q));
        converged = max_change < CONVERGENCE_TOLERANCE;
    }
    for tau in seen.max(1)..t {
        q[tau] = gm.b()[policy.action_at(tau - 1)].mul_vec(&q[tau - 1]);
    }
    Ok(Perception {
        free_energy: *history.last().expect("history starts non-empty"),
        marginals: q,
        sweeps,
        converged,
        history,
    })
}

/// Runs [`perceive`] under every policy of the model.
pub fn perceive_all(gm: &GenerativeModel, obs: &[usize]) -> Result<Vec<Perception>> {
    gm.policies().iter().map(|p| perceive(gm, p, obs)).collect()
}
