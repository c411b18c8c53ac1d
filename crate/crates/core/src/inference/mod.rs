//! Active inference over a [`GenerativeModel`]: perception, free-energy
//! bookkeeping, expected free energy, planning, action selection,
//! surprisal accounting and concept expansion.

mod exact;
mod expansion;
mod perception;
mod planning;

pub use exact::{
    exact_posterior, free_energy_decompositions, free_energy_of_joint, trajectory, ExactPosterior,
    FreeEnergyReport, ENUMERATION_LIMIT,
};
pub use expansion::{expand_concepts, window_surprisal, ExpansionConfig, ExpansionReport, DEFAULT_WINDOW};
pub use perception::{
    mean_field_free_energy, perceive, perceive_all, Perception, CONVERGENCE_TOLERANCE, LOG_FLOOR,
    MAX_SWEEPS,
};
pub use planning::{
    expected_free_energy, plan, predictive, select_action, surprisal_trace, EfeReport, EfeTerm, PolicyEfe,
    SurprisalTrace,
};

use crate::error::Result;
use crate::genmodel::{GenerativeModel, Policy};
use crate::probmath::{softmax, Categorical};

/// Beliefs about concepts under every policy, and about the policies.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub per_policy: Vec<Perception>,
    pub policy_posterior: Categorical,
    /// Expected free energy of the steps after the last observation, when planned.
    pub efe: Option<EfeReport>,
}

impl BeliefState {
    pub fn marginals(&self) -> Vec<Vec<Vec<f64>>> {
        self.per_policy.iter().map(|p| p.marginals.clone()).collect()
    }

    pub fn free_energies(&self) -> Vec<f64> {
        self.per_policy.iter().map(|p| p.free_energy).collect()
    }

    /// `Σ_π q(π) q(θ_τ | π)`.
    pub fn averaged_marginal(&self, tau: usize) -> Vec<f64> {
        let n = self.per_policy[0].marginals[tau].len();
        let mut out = vec![0.0; n];
        for (w, p) in self.policy_posterior.probs().iter().zip(&self.per_policy) {
            for (o, q) in out.iter_mut().zip(&p.marginals[tau]) {
                *o += w * q;
            }
        }
        out
    }

    /// Restricts the policy posterior to policies that begin with `taken`.
    /// Left unchanged if no such policy carries mass.
    pub fn condition_on_actions(&mut self, policies: &[Policy], taken: &[usize]) {
        let w: Vec<f64> = self
            .policy_posterior
            .probs()
            .iter()
            .zip(policies)
            .map(|(&p, pol)| if pol.actions.starts_with(taken) { p } else { 0.0 })
            .collect();
        if let Ok(c) = Categorical::from_weights(&w) {
            self.policy_posterior = c;
        }
    }

    /// `E_q(π)[F(π)]`.
    pub fn expected_free_energy_of_perception(&self) -> f64 {
        weighted(self.policy_posterior.probs(), &self.free_energies())
    }

    /// `E_q(π)[G(π)]`, or 0 when no planning happened.
    pub fn expected_efe(&self) -> f64 {
        self.efe
            .as_ref()
            .map_or(0.0, |e| weighted(self.policy_posterior.probs(), &e.totals()))
    }
}

fn weighted(w: &[f64], v: &[f64]) -> f64 {
    w.iter()
        .zip(v)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + 0.0
}

/// Perceives under every policy given `obs`, then forms the policy posterior.
/// With `planning` the posterior is `σ(−F − γG)` over the steps after the
/// observations; without it, `σ(−F)`.
pub fn infer(gm: &GenerativeModel, obs: &[usize], planning: bool) -> Result<BeliefState> {
    let per_policy = perceive_all(gm, obs)?;
    let f: Vec<f64> = per_policy.iter().map(|p| p.free_energy).collect();
    let (policy_posterior, efe) = if planning {
        let marginals: Vec<_> = per_policy.iter().map(|p| p.marginals.clone()).collect();
        let report = expected_free_energy(gm, &marginals, obs.len())?;
        (plan(&f, &report.totals(), gm.gamma()), Some(report))
    } else {
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        (softmax(&neg, 1.0), None)
    };
    Ok(BeliefState {
        per_policy,
        policy_posterior,
        efe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::DirichletCounts;
    use crate::probmath::{kl_of, Matrix};

    fn toy() -> GenerativeModel {
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

    fn single_step(a: Matrix, d: Categorical) -> GenerativeModel {
        let m = a.rows();
        GenerativeModel::new(a, vec![], vec![Categorical::uniform(m)], d, 1.0, 1, vec![Policy::new(vec![])]).unwrap()
    }

    #[test]
    fn exact_posterior_examples() {
        let gm = toy();
        let ex = exact_posterior(&gm, &gm.policies()[0], &[1, 1]).unwrap();
        // columns of A are p(φ | θ): 0.5·0.8·0.8 + 0.5·0.1·0.1
        assert!((ex.surprisal - (-(0.325f64).ln())).abs() < 1e-12);

        let id = GenerativeModel::new(
            Matrix::identity(3),
            vec![Matrix::identity(3)],
            vec![Categorical::uniform(3)],
            Categorical::uniform(3),
            1.0,
            3,
            vec![Policy::new(vec![0, 0])],
        )
        .unwrap();
        let ex = exact_posterior(&id, &id.policies()[0], &[2, 2, 2]).unwrap();
        for m in &ex.marginals {
            assert_eq!(m, &vec![0.0, 0.0, 1.0]);
        }
        assert!((ex.surprisal - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_posterior_guard() {
        let gm = GenerativeModel::new(
            Matrix::filled(2, 40, 0.5),
            vec![Matrix::filled(40, 40, 1.0 / 40.0)],
            vec![Categorical::uniform(2)],
            Categorical::uniform(40),
            1.0,
            4,
            vec![Policy::new(vec![0, 0, 0])],
        )
        .unwrap();
        assert!(matches!(
            exact_posterior(&gm, &gm.policies()[0], &[0]),
            Err(crate::Error::Enumeration(_))
        ));
    }

    #[test]
    fn decomposition_at_exact_posterior() {
        let gm = single_step(
            Matrix::from_rows(&[vec![0.7, 0.1, 0.3], vec![0.3, 0.9, 0.7]]).unwrap(),
            Categorical::new(vec![0.5, 0.3, 0.2]).unwrap(),
        );
        let post = exact_posterior(&gm, &gm.policies()[0], &[0]).unwrap();
        let q = Categorical::new(post.marginals[0].clone()).unwrap();
        let r = free_energy_decompositions(&gm, &q, 0).unwrap();
        assert!(r.divergence.abs() < 1e-12);
        assert!((r.direct - r.surprise).abs() < 1e-12);
        assert!((r.surprise - post.surprisal).abs() < 1e-12);
    }

    #[test]
    fn decomposition_uninformative() {
        let gm = single_step(Matrix::filled(4, 2, 0.25), Categorical::new(vec![0.3, 0.7]).unwrap());
        let r = free_energy_decompositions(&gm, gm.d(), 3).unwrap();
        assert_eq!(r.complexity, 0.0);
        assert!((r.surprise - 4f64.ln()).abs() < 1e-12);
        assert!((r.direct - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn decomposition_rejects_impossible_stimulus() {
        let gm = single_step(Matrix::identity(2), Categorical::delta(2, 0));
        assert!(free_energy_decompositions(&gm, gm.d(), 1).is_err());
    }

    #[test]
    fn efe_examples() {
        // identity likelihood, beliefs that predict the preferences exactly
        let c = Categorical::new(vec![0.2, 0.8]).unwrap();
        let gm = GenerativeModel::new(
            Matrix::identity(2),
            vec![],
            vec![c.clone()],
            Categorical::uniform(2),
            1.0,
            1,
            vec![Policy::new(vec![])],
        )
        .unwrap();
        let r = expected_free_energy(&gm, &[vec![c.probs().to_vec()]], 0).unwrap();
        assert!(r.per_policy[0].total.abs() < 1e-15);

        let flat = GenerativeModel::new(
            Matrix::filled(3, 2, 1.0 / 3.0),
            vec![],
            vec![Categorical::uniform(3)],
            Categorical::uniform(2),
            1.0,
            1,
            vec![Policy::new(vec![])],
        )
        .unwrap();
        for q in [vec![1.0, 0.0], vec![0.3, 0.7]] {
            let r = expected_free_energy(&flat, &[vec![q]], 0).unwrap();
            assert!((r.per_policy[0].terms[0].ambiguity - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn efe_rejects_zero_preference() {
        let gm = GenerativeModel::new(
            Matrix::identity(2),
            vec![],
            vec![Categorical::delta(2, 0)],
            Categorical::uniform(2),
            1.0,
            1,
            vec![Policy::new(vec![])],
        )
        .unwrap();
        assert!(expected_free_energy(&gm, &[vec![vec![0.5, 0.5]]], 0).is_err());
    }

    #[test]
    fn plan_examples() {
        let u = plan(&[1.0, 1.0], &[2.0, 2.0], 3.0);
        assert_eq!(u.probs(), &[0.5, 0.5]);
        let u = plan(&[0.0, 0.0], &[0.0, 9.0], 0.0);
        assert_eq!(u.probs(), &[0.5, 0.5]);
        let q = plan(&[0.0, 0.0], &[0.0, 2f64.ln()], 1.0);
        assert!((q.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn select_action_examples() {
        let policies = vec![Policy::new(vec![1]), Policy::new(vec![0]), Policy::new(vec![0])];
        assert_eq!(select_action(&[1.0, 0.0, 0.0], &policies, 0).unwrap(), 1);
        assert_eq!(select_action(&[0.4, 0.35, 0.25], &policies, 0).unwrap(), 0);
        let tie = vec![Policy::new(vec![2]), Policy::new(vec![0]), Policy::new(vec![1])];
        assert_eq!(select_action(&[0.4, 0.4, 0.2], &tie, 0).unwrap(), 0);
        assert!(select_action(&[1.0], &[Policy::new(vec![])], 0).is_err());
    }

    #[test]
    fn surprisal_examples() {
        // deterministic and correct
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
        let tr = surprisal_trace(&gm, &Categorical::uniform(1), &[0, 1, 0, 0, 1]).unwrap();
        assert!(tr.per_step.iter().all(|s| s.abs() < 1e-9), "{:?}", tr.per_step);

        let flat = single_step(Matrix::filled(5, 2, 0.2), Categorical::uniform(2));
        let tr = surprisal_trace(&flat, &Categorical::uniform(1), &[0, 4, 2]).unwrap();
        assert!(tr.per_step.iter().all(|s| (s - 5f64.ln()).abs() < 1e-12));
        assert!(!tr.saw_impossible);

        let wrong = single_step(Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(), Categorical::uniform(1));
        let tr = surprisal_trace(&wrong, &Categorical::uniform(1), &[0]).unwrap();
        assert_eq!(tr.mean(), 0.0);
    }

    #[test]
    fn expansion_noop_when_explained() {
        let mut a = Matrix::filled(2, 2, 0.01);
        a.set(0, 0, 100.0);
        a.set(1, 1, 100.0);
        let counts = DirichletCounts::new(a, vec![Matrix::filled(2, 2, 1.0)], vec![1.0, 1.0]).unwrap();
        let cfg = ExpansionConfig::for_stimuli(2);
        let (out, r) = expand_concepts(&counts, &[0, 1, 0, 0, 1], &cfg).unwrap();
        assert!(!r.expanded);
        assert!(r.window_surprisal < 1e-3);
        assert_eq!(out, counts);
        assert!(expand_concepts(&counts, &[0], &ExpansionConfig { threshold: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn expansion_adds_valid_concept() {
        let mut a = Matrix::filled(3, 2, 0.1);
        a.set(0, 0, 20.0);
        a.set(1, 1, 20.0);
        let counts = DirichletCounts::new(a, vec![Matrix::filled(2, 2, 3.0)], vec![5.0, 5.0]).unwrap();
        let cfg = ExpansionConfig::for_stimuli(3);
        let window = [2, 2, 2, 0, 2, 2, 2, 2, 2, 2];
        let (out, r) = expand_concepts(&counts, &window, &cfg).unwrap();
        assert!(r.expanded && r.window_surprisal > cfg.threshold);
        assert_eq!((r.concepts_before, r.concepts_after), (2, 3));
        assert_eq!(out.a().column(2), vec![2.0, 1.0, 10.0]);
        assert_eq!(out.a().column(0), counts.a().column(0));
        let gm = crate::genmodel::expected_model(
            &out,
            1.0,
            2,
            vec![Categorical::uniform(3)],
            vec![Policy::new(vec![0])],
        )
        .unwrap();
        gm.a().check_column_stochastic("A").unwrap();
        gm.b()[0].check_column_stochastic("B").unwrap();

        let after = window_surprisal(gm.a(), &window).unwrap();
        assert!(after < cfg.threshold);
        let single = gm.with_policies(1, vec![Policy::new(vec![])]).unwrap();
        let q = perceive(&single, &single.policies()[0], &[2]).unwrap();
        assert!(q.marginals[0][2] > 0.5, "{:?}", q.marginals[0]);
        let _ = kl_of(&q.marginals[0], &q.marginals[0]).unwrap();
    }
}
