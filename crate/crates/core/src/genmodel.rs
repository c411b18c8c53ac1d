//! Discrete generative model over hidden concepts and observed stimuli.
//!
//! Orientation: columns index hidden concepts. Column `j` of `A` is the
//! stimulus distribution emitted by concept `j`; column `j` of a transition
//! matrix `B[a]` is the distribution of the next concept after leaving `j`
//! under action `a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probmath::{normalize_columns, Categorical, Matrix};

/// Largest policy set [`enumerate_policies`] builds unless told otherwise.
pub const DEFAULT_POLICY_CAP: usize = 4096;

/// One action per transition of an episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    /// Transition matrix index used to move from step `tau` to `tau + 1`.
    pub fn action_at(&self, tau: usize) -> usize {
        self.actions[tau]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    a: Matrix,
    b: Vec<Matrix>,
    c: Vec<Categorical>,
    d: Categorical,
    gamma: f64,
    horizon: usize,
    policies: Vec<Policy>,
}

impl GenerativeModel {
    /// Validates and assembles a model. `c` holds one preference distribution
    /// per time step, or a single one shared by all steps.
    pub fn new(
        a: Matrix,
        b: Vec<Matrix>,
        c: Vec<Categorical>,
        d: Categorical,
        gamma: f64,
        horizon: usize,
        policies: Vec<Policy>,
    ) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        a.check_column_stochastic("A")?;
        if horizon == 0 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::domain(format!("gamma {gamma} must be finite and non-negative")));
        }
        for (k, bk) in b.iter().enumerate() {
            if bk.rows() != n || bk.cols() != n {
                return Err(Error::dim(format!(
                    "B[{k}] is {}x{}, expected {n}x{n}",
                    bk.rows(),
                    bk.cols()
                )));
            }
            bk.check_column_stochastic(&format!("B[{k}]"))?;
        }
        if horizon > 1 && b.is_empty() {
            return Err(Error::domain("a horizon above 1 needs at least one transition matrix"));
        }
        if d.len() != n {
            return Err(Error::dim(format!("D has {} entries, expected {n}", d.len())));
        }
        let c = match c.len() {
            1 => vec![c[0].clone(); horizon],
            len if len == horizon => c,
            len => {
                return Err(Error::dim(format!(
                    "C has {len} distributions, expected 1 or {horizon}"
                )))
            }
        };
        if let Some(k) = c.iter().position(|ck| ck.len() != m) {
            return Err(Error::dim(format!("C[{k}] has {} entries, expected {m}", c[k].len())));
        }
        if policies.is_empty() {
            return Err(Error::domain("at least one policy is required"));
        }
        for (k, p) in policies.iter().enumerate() {
            if p.actions.len() != horizon - 1 {
                return Err(Error::dim(format!(
                    "policy {k} has {} actions, expected {}",
                    p.actions.len(),
                    horizon - 1
                )));
            }
            if let Some(&a) = p.actions.iter().find(|&&a| a >= b.len()) {
                return Err(Error::domain(format!("policy {k} uses action {a} but only {} exist", b.len())));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            gamma,
            horizon,
            policies,
        })
    }

    /// Likelihood `p(stimulus | concept)`, stimuli × concepts.
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[Matrix] {
        &self.b
    }

    pub fn c(&self) -> &[Categorical] {
        &self.c
    }

    pub fn d(&self) -> &Categorical {
        &self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn n_concepts(&self) -> usize {
        self.a.cols()
    }

    pub fn n_stimuli(&self) -> usize {
        self.a.rows()
    }

    pub fn n_actions(&self) -> usize {
        self.b.len()
    }

    /// Same model with a different horizon and policy set.
    pub fn with_policies(&self, horizon: usize, policies: Vec<Policy>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            vec![self.c[0].clone()],
            self.d.clone(),
            self.gamma,
            horizon,
            policies,
        )
    }
}

/// Dirichlet concentration parameters behind `A`, `B` and `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCounts", into = "RawCounts")]
pub struct DirichletCounts {
    a: Matrix,
    b: Vec<Matrix>,
    d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCounts {
    a: Matrix,
    b: Vec<Matrix>,
    d: Vec<f64>,
}

impl TryFrom<RawCounts> for DirichletCounts {
    type Error = Error;

    fn try_from(r: RawCounts) -> Result<Self> {
        DirichletCounts::new(r.a, r.b, r.d)
    }
}

impl From<DirichletCounts> for RawCounts {
    fn from(c: DirichletCounts) -> Self {
        RawCounts { a: c.a, b: c.b, d: c.d }
    }
}

/// Floor added to counts built from a probability matrix, keeping them positive.
pub const MIN_COUNT: f64 = 1e-3;

impl DirichletCounts {
    pub fn new(a: Matrix, b: Vec<Matrix>, d: Vec<f64>) -> Result<Self> {
        let n = a.cols();
        let positive = |v: &[f64]| v.iter().all(|&x| x.is_finite() && x > 0.0);
        if !positive(a.data()) {
            return Err(Error::schema("dirichlet.a", "counts must be strictly positive"));
        }
        for (k, bk) in b.iter().enumerate() {
            if bk.rows() != n || bk.cols() != n {
                return Err(Error::schema(format!("dirichlet.b[{k}]"), format!("expected {n}x{n}")));
            }
            if !positive(bk.data()) {
                return Err(Error::schema(format!("dirichlet.b[{k}]"), "counts must be strictly positive"));
            }
        }
        if d.len() != n {
            return Err(Error::schema("dirichlet.d", format!("expected {n} entries")));
        }
        if !positive(&d) {
            return Err(Error::schema("dirichlet.d", "counts must be strictly positive"));
        }
        Ok(Self { a, b, d })
    }

    /// Counts whose means reproduce the model's `A`, `B`, `D`:
    /// `concentration · p + MIN_COUNT`.
    pub fn from_model(gm: &GenerativeModel, concentration: f64) -> Self {
        let scale = |m: &Matrix| {
            let mut out = m.clone();
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    out.set(r, c, concentration * m.get(r, c) + MIN_COUNT);
                }
            }
            out
        };
        Self {
            a: scale(&gm.a),
            b: gm.b.iter().map(scale).collect(),
            d: gm.d.probs().iter().map(|p| concentration * p + MIN_COUNT).collect(),
        }
    }

    /// All-`value` counts.
    pub fn uniform(n_stimuli: usize, n_concepts: usize, n_actions: usize, value: f64) -> Self {
        Self {
            a: Matrix::filled(n_stimuli, n_concepts, value),
            b: (0..n_actions).map(|_| Matrix::filled(n_concepts, n_concepts, value)).collect(),
            d: vec![value; n_concepts],
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[Matrix] {
        &self.b
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn n_concepts(&self) -> usize {
        self.a.cols()
    }

    pub fn n_stimuli(&self) -> usize {
        self.a.rows()
    }

    /// Appends one concept: its `a` column is `a_column`, and the new `b`
    /// rows/columns and `d` entry are all `prior`.
    pub(crate) fn push_concept(&mut self, a_column: &[f64], prior: f64) {
        let (m, n) = (self.a.rows(), self.a.cols());
        let mut a = Matrix::zeros(m, n + 1);
        for (r, &extra) in a_column.iter().enumerate().take(m) {
            for c in 0..n {
                a.set(r, c, self.a.get(r, c));
            }
            a.set(r, n, extra);
        }
        self.a = a;
        for bk in &mut self.b {
            let mut grown = Matrix::filled(n + 1, n + 1, prior);
            for r in 0..n {
                for c in 0..n {
                    grown.set(r, c, bk.get(r, c));
                }
            }
            *bk = grown;
        }
        self.d.push(prior);
    }
}

/// Model whose `A`, `B`, `D` are the Dirichlet means of `counts`.
pub fn expected_model(
    counts: &DirichletCounts,
    gamma: f64,
    horizon: usize,
    c: Vec<Categorical>,
    policies: Vec<Policy>,
) -> Result<GenerativeModel> {
    let a = normalize_columns(&counts.a)?;
    let b = counts.b.iter().map(normalize_columns).collect::<Result<Vec<_>>>()?;
    let d = Categorical::from_weights(&counts.d)?;
    GenerativeModel::new(a, b, c, d, gamma, horizon, policies)
}

/// Every action sequence of length `depth` in lexicographic order.
pub fn enumerate_policies(n_actions: usize, depth: usize, cap: usize) -> Result<Vec<Policy>> {
    if n_actions == 0 {
        return Err(Error::domain("at least one action is required"));
    }
    let count = u32::try_from(depth)
        .ok()
        .and_then(|d| n_actions.checked_pow(d))
        .filter(|&c| c <= cap);
    let Some(count) = count else {
        return Err(Error::Enumeration(format!(
            "{n_actions}^{depth} policies exceed the cap of {cap}; list the policies in the scenario's \"policies\" field instead"
        )));
    };
    Ok((0..count)
        .map(|mut k| {
            let mut actions = vec![0; depth];
            for slot in actions.iter_mut().rev() {
                *slot = k % n_actions;
                k /= n_actions;
            }
            Policy::new(actions)
        })
        .collect())
}

/// `p(φ̃, θ̃, π) = p(θ_1) p(π) Π p(θ_{τ+1} | θ_τ, π) Π p(φ_τ | θ_τ)`.
pub fn joint_probability(
    gm: &GenerativeModel,
    states: &[usize],
    obs: &[usize],
    policy_index: usize,
    policy_prior: &Categorical,
) -> Result<f64> {
    let t = gm.horizon;
    if states.len() != t || obs.len() != t {
        return Err(Error::dim(format!(
            "expected {t} states and observations, got {} and {}",
            states.len(),
            obs.len()
        )));
    }
    if policy_prior.len() != gm.policies.len() || policy_index >= gm.policies.len() {
        return Err(Error::dim("policy index or prior does not match the policy set"));
    }
    if states.iter().any(|&s| s >= gm.n_concepts()) || obs.iter().any(|&o| o >= gm.n_stimuli()) {
        return Err(Error::domain("state or observation index out of range"));
    }
    let policy = &gm.policies[policy_index];
    let mut p = gm.d.probs()[states[0]] * policy_prior.probs()[policy_index];
    for tau in 0..t {
        p *= gm.a.get(obs[tau], states[tau]);
        if tau + 1 < t {
            p *= gm.b[policy.action_at(tau)].get(states[tau + 1], states[tau]);
        }
    }
    Ok(p)
}

/// One step of an episode as seen by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningStep {
    pub observation: usize,
    /// Marginal posterior over concepts at this step.
    pub posterior: Vec<f64>,
    /// Transition used to leave this step; `None` for the last step or when
    /// the agent did not act.
    pub action: Option<usize>,
}

/// Adds posterior-weighted experience to the counts, one episode at a time:
/// `a[φ_τ, :] += η q(θ_τ)`, `b[action] += η q(θ_{τ+1}) ⊗ q(θ_τ)`, `d += η q(θ_1)`.
///
/// A step without an action updates `b[0]` when the model has a single
/// (autonomous) transition matrix and leaves `b` alone otherwise.
pub fn update_dirichlet(
    counts: &DirichletCounts,
    episodes: &[Vec<LearningStep>],
    learning_rate: f64,
) -> Result<DirichletCounts> {
    if !learning_rate.is_finite() || learning_rate < 0.0 {
        return Err(Error::domain("learning rate must be finite and non-negative"));
    }
    let (m, n) = (counts.n_stimuli(), counts.n_concepts());
    let mut out = counts.clone();
    for episode in episodes {
        for (tau, step) in episode.iter().enumerate() {
            if step.posterior.len() != n {
                return Err(Error::dim(format!(
                    "posterior at step {tau} has {} entries, expected {n}",
                    step.posterior.len()
                )));
            }
            if step.observation >= m {
                return Err(Error::dim(format!("observation {} out of range {m}", step.observation)));
            }
        }
        for (tau, step) in episode.iter().enumerate() {
            for (j, q) in step.posterior.iter().enumerate() {
                out.a.add_to(step.observation, j, learning_rate * q);
            }
            if tau == 0 {
                for (dj, q) in out.d.iter_mut().zip(&step.posterior) {
                    *dj += learning_rate * q;
                }
            }
            let Some(next) = episode.get(tau + 1) else { continue };
            let action = match step.action {
                Some(a) if a < out.b.len() => a,
                Some(a) => return Err(Error::dim(format!("action {a} has no transition counts"))),
                None if out.b.len() == 1 => 0,
                None => continue,
            };
            for (i, qn) in next.posterior.iter().enumerate() {
                for (j, qc) in step.posterior.iter().enumerate() {
                    out.b[action].add_to(i, j, learning_rate * qn * qc);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> GenerativeModel {
        GenerativeModel::new(
            Matrix::from_rows(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap(),
            vec![Matrix::identity(2)],
            vec![Categorical::uniform(2)],
            Categorical::uniform(2),
            1.0,
            2,
            vec![Policy::new(vec![0])],
        )
        .unwrap()
    }

    #[test]
    fn expected_model_means() {
        let counts = DirichletCounts::uniform(3, 2, 2, 1.0);
        let gm = expected_model(&counts, 1.0, 2, vec![Categorical::uniform(3)], enumerate_policies(2, 1, 16).unwrap()).unwrap();
        assert!(gm.a().data().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(gm.b().iter().all(|b| b.data().iter().all(|&p| p == 0.5)));
        assert_eq!(gm.d().probs(), &[0.5, 0.5]);

        let counts = DirichletCounts::new(
            Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap(),
            vec![Matrix::filled(1, 1, 1.0)],
            vec![1.0],
        )
        .unwrap();
        let gm = expected_model(&counts, 1.0, 1, vec![Categorical::uniform(2)], vec![Policy::new(vec![])]).unwrap();
        assert_eq!(gm.a().column(0), vec![0.25, 0.75]);
        let again = expected_model(&counts, 1.0, 1, vec![Categorical::uniform(2)], vec![Policy::new(vec![])]).unwrap();
        assert_eq!(gm, again);
    }

    #[test]
    fn model_validation() {
        let bad_a = GenerativeModel::new(
            Matrix::from_rows(&[vec![0.5], vec![0.4]]).unwrap(),
            vec![],
            vec![Categorical::uniform(2)],
            Categorical::uniform(1),
            1.0,
            1,
            vec![Policy::new(vec![])],
        );
        assert!(bad_a.is_err());
        let wrong_policy = GenerativeModel::new(
            Matrix::identity(2),
            vec![Matrix::identity(2)],
            vec![Categorical::uniform(2)],
            Categorical::uniform(2),
            1.0,
            3,
            vec![Policy::new(vec![0, 1])],
        );
        assert!(wrong_policy.is_err());
    }

    #[test]
    fn counts_must_be_positive() {
        let r = DirichletCounts::new(Matrix::zeros(1, 1), vec![], vec![1.0]);
        assert!(matches!(r, Err(Error::Schema { .. })));
    }

    #[test]
    fn policy_enumeration() {
        let p = enumerate_policies(2, 1, 16).unwrap();
        assert_eq!(p, vec![Policy::new(vec![0]), Policy::new(vec![1])]);
        assert_eq!(enumerate_policies(1, 3, 16).unwrap(), vec![Policy::new(vec![0, 0, 0])]);
        let p = enumerate_policies(2, 2, 16).unwrap();
        let actions: Vec<_> = p.iter().map(|p| p.actions.clone()).collect();
        assert_eq!(actions, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(enumerate_policies(3, 0, 16).unwrap(), vec![Policy::new(vec![])]);
        assert!(matches!(enumerate_policies(4, 10, 4096), Err(Error::Enumeration(_))));
        assert!(matches!(enumerate_policies(2, 200, 4096), Err(Error::Enumeration(_))));
    }

    #[test]
    fn joint_probability_examples() {
        let gm = toy_model();
        let prior = Categorical::uniform(1);
        let p = joint_probability(&gm, &[1, 1], &[1, 1], 0, &prior).unwrap();
        assert!((p - 0.32).abs() < 1e-12);
        assert_eq!(joint_probability(&gm, &[0, 1], &[1, 1], 0, &prior).unwrap(), 0.0);
    }

    #[test]
    fn joint_probability_of_deterministic_model() {
        let gm = GenerativeModel::new(
            Matrix::identity(2),
            vec![Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()],
            vec![Categorical::uniform(2)],
            Categorical::delta(2, 0),
            1.0,
            3,
            vec![Policy::new(vec![0, 0])],
        )
        .unwrap();
        let prior = Categorical::uniform(1);
        assert_eq!(joint_probability(&gm, &[0, 1, 0], &[0, 1, 0], 0, &prior).unwrap(), 1.0);
        assert_eq!(joint_probability(&gm, &[0, 1, 0], &[0, 1, 1], 0, &prior).unwrap(), 0.0);
        assert_eq!(joint_probability(&gm, &[1, 0, 1], &[1, 0, 1], 0, &prior).unwrap(), 0.0);
    }

    #[test]
    fn dirichlet_update_examples() {
        let counts = DirichletCounts::uniform(2, 3, 1, 1.0);
        assert_eq!(update_dirichlet(&counts, &[], 1.0).unwrap(), counts);
        assert_eq!(update_dirichlet(&counts, &[vec![]], 1.0).unwrap(), counts);

        let step = LearningStep {
            observation: 0,
            posterior: vec![0.0, 0.0, 1.0],
            action: None,
        };
        let out = update_dirichlet(&counts, &[vec![step]], 1.0).unwrap();
        assert_eq!(out.a().get(0, 2), 2.0);
        let changed = (0..2)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|&(r, c)| out.a().get(r, c) != counts.a().get(r, c))
            .count();
        assert_eq!(changed, 1);
        assert_eq!(out.d(), &[1.0, 1.0, 2.0]);
        assert_eq!(out.b(), counts.b());
    }

    #[test]
    fn dirichlet_update_transitions() {
        let counts = DirichletCounts::uniform(2, 2, 2, 1.0);
        let episode = vec![
            LearningStep { observation: 0, posterior: vec![1.0, 0.0], action: Some(1) },
            LearningStep { observation: 1, posterior: vec![0.25, 0.75], action: None },
        ];
        let out = update_dirichlet(&counts, &[episode], 2.0).unwrap();
        assert_eq!(out.b()[0], counts.b()[0]);
        assert_eq!(out.b()[1].column(0), vec![1.5, 2.5]);
        assert_eq!(out.b()[1].column(1), vec![1.0, 1.0]);
    }

    #[test]
    fn dirichlet_update_rejects_mismatch() {
        let counts = DirichletCounts::uniform(2, 2, 1, 1.0);
        let bad = vec![LearningStep { observation: 0, posterior: vec![1.0], action: None }];
        assert!(matches!(update_dirichlet(&counts, &[bad], 1.0), Err(Error::Dimension(_))));
        let bad = vec![LearningStep { observation: 5, posterior: vec![1.0, 0.0], action: None }];
        assert!(update_dirichlet(&counts, &[bad], 1.0).is_err());
    }

    #[test]
    fn push_concept_grows_every_array() {
        let mut counts = DirichletCounts::uniform(3, 2, 2, 2.0);
        counts.push_concept(&[1.0, 1.0, 9.0], 0.5);
        assert_eq!(counts.n_concepts(), 3);
        assert_eq!(counts.a().column(2), vec![1.0, 1.0, 9.0]);
        assert_eq!(counts.a().column(0), vec![2.0, 2.0, 2.0]);
        for b in counts.b() {
            assert_eq!(b.rows(), 3);
            assert_eq!(b.get(2, 0), 0.5);
            assert_eq!(b.get(0, 0), 2.0);
        }
        assert_eq!(counts.d(), &[2.0, 2.0, 0.5]);
    }
}
