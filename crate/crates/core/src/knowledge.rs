//! The two loops of knowledge generation and the regimes they produce.
//!
//! Loop I is perception plus Dirichlet learning, loop II is planning plus
//! action. Which loops run while learning and while using knowledge decides
//! the regime: declarative, procedural or conditional.

use std::collections::VecDeque;
use std::fmt;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::genmodel::{expected_model, update_dirichlet, DirichletCounts, GenerativeModel, LearningStep, Policy};
use crate::inference::{
    expand_concepts, infer, perceive, predictive, select_action, window_surprisal, ExpansionConfig, ExpansionReport,
};
use crate::probmath::{normalize_columns, Categorical};
use crate::scenario::Scenario;

/// Concentration used to turn a fixed model into starting counts.
pub const DEFAULT_CONCENTRATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    #[serde(rename = "loop_I_learning")]
    pub loop_i_learning: bool,
    #[serde(rename = "loop_II")]
    pub loop_ii: bool,
    #[serde(rename = "loop_I_frozen_in_use", default)]
    pub loop_i_frozen_in_use: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Learning,
    Use,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Declarative,
    Procedural,
    Conditional,
    Unclassified,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Declarative => "declarative",
            Regime::Procedural => "procedural",
            Regime::Conditional => "conditional",
            Regime::Unclassified => "unclassified",
        })
    }
}

/// Which loops run during a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoopSet {
    pub loop_i: bool,
    pub loop_ii: bool,
}

impl RegimeConfig {
    pub fn new(loop_i_learning: bool, loop_ii: bool, loop_i_frozen_in_use: bool) -> Result<Self> {
        let cfg = Self {
            loop_i_learning,
            loop_ii,
            loop_i_frozen_in_use,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn declarative() -> Self {
        Self::new(true, false, false).expect("valid")
    }

    pub fn procedural() -> Self {
        Self::new(true, true, true).expect("valid")
    }

    pub fn conditional() -> Self {
        Self::new(true, true, false).expect("valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.loop_i_learning || self.loop_ii {
            Ok(())
        } else {
            Err(Error::domain("at least one loop must be active"))
        }
    }

    /// Loop I counts as active in use only while learning is not frozen.
    pub fn active_loops(&self, phase: Phase) -> LoopSet {
        LoopSet {
            loop_i: self.loop_i_learning && !(phase == Phase::Use && self.loop_i_frozen_in_use),
            loop_ii: self.loop_ii,
        }
    }

    /// Whether Dirichlet counts change during `phase`.
    pub fn learns_in(&self, phase: Phase) -> bool {
        self.active_loops(phase).loop_i
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self.active_loops(Phase::Learning), self.active_loops(Phase::Use))
    }
}

/// Declarative: loop II never runs. Procedural: both loops while learning,
/// only loop II in use. Conditional: both loops in both phases.
pub fn classify_regime(learning: LoopSet, in_use: LoopSet) -> Regime {
    let both = LoopSet {
        loop_i: true,
        loop_ii: true,
    };
    let only_ii = LoopSet {
        loop_i: false,
        loop_ii: true,
    };
    if !learning.loop_ii && !in_use.loop_ii && (learning.loop_i || in_use.loop_i) {
        Regime::Declarative
    } else if learning == both && in_use == only_ii {
        Regime::Procedural
    } else if learning == both && in_use == both {
        Regime::Conditional
    } else {
        Regime::Unclassified
    }
}

/// An agent's generative model together with the counts it is learnt from.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    model: GenerativeModel,
    counts: DirichletCounts,
    learning_rate: f64,
}

impl Agent {
    /// Agent whose model is the Dirichlet mean of `counts`.
    pub fn learning(
        counts: DirichletCounts,
        c: Vec<Categorical>,
        gamma: f64,
        horizon: usize,
        policies: Vec<Policy>,
        learning_rate: f64,
    ) -> Result<Self> {
        let model = expected_model(&counts, gamma, horizon, c, policies)?;
        Self::with_counts(model, counts, learning_rate)
    }

    /// Agent starting from a fixed model; counts are `DEFAULT_CONCENTRATION`
    /// times its probabilities.
    pub fn from_model(model: GenerativeModel, learning_rate: f64) -> Result<Self> {
        let counts = DirichletCounts::from_model(&model, DEFAULT_CONCENTRATION);
        Self::with_counts(model, counts, learning_rate)
    }

    fn with_counts(model: GenerativeModel, counts: DirichletCounts, learning_rate: f64) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::domain("learning rate must be finite and non-negative"));
        }
        if counts.n_concepts() != model.n_concepts()
            || counts.n_stimuli() != model.n_stimuli()
            || counts.b().len() != model.b().len()
        {
            return Err(Error::dim("Dirichlet counts do not match the model"));
        }
        Ok(Self {
            model,
            counts,
            learning_rate,
        })
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }

    pub fn counts(&self) -> &DirichletCounts {
        &self.counts
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn preferences(&self) -> &[Categorical] {
        self.model.c()
    }

    /// Replaces the counts and rebuilds the model from their means.
    pub fn set_counts(&mut self, counts: DirichletCounts) -> Result<()> {
        let gm = &self.model;
        self.model = expected_model(&counts, gm.gamma(), gm.horizon(), gm.c().to_vec(), gm.policies().to_vec())?;
        self.counts = counts;
        Ok(())
    }

    /// One Dirichlet update that treats each stimulus of `window` as a
    /// single-step episode starting from `D`.
    pub fn learn_window(&mut self, window: &[usize]) -> Result<()> {
        let single = self.model.with_policies(1, vec![Policy::new(vec![])])?;
        let policy = &single.policies()[0];
        let episodes = window
            .iter()
            .map(|&o| {
                perceive(&single, policy, &[o]).map(|p| {
                    vec![LearningStep {
                        observation: o,
                        posterior: p.marginals[0].clone(),
                        action: None,
                    }]
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let counts = update_dirichlet(&self.counts, &episodes, self.learning_rate)?;
        self.set_counts(counts)
    }
}

/// One step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub episode: usize,
    /// Zero-based step within the episode.
    pub tau: usize,
    pub observation: usize,
    /// Action taken after this observation; `None` on the last step or
    /// without loop II.
    pub action: Option<usize>,
    /// `E_q(π)[F(π)]` after perceiving this observation.
    pub free_energy: f64,
    /// `E_q(π)[G(π)]` over the remaining steps; 0 without planning.
    pub expected_free_energy: f64,
    /// `−ln p(φ_τ)` under the prediction made before seeing it.
    pub surprisal: f64,
    pub n_concepts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub records: Vec<StepRecord>,
    pub phase: Phase,
    pub regime: Regime,
    pub seed: u64,
}

impl EpisodeTrace {
    pub fn mean_surprisal(&self) -> f64 {
        mean(self.records.iter().map(|r| r.surprisal))
    }

    pub fn mean_free_energy(&self) -> f64 {
        mean(self.records.iter().map(|r| r.free_energy))
    }

    pub fn mean_efe(&self) -> f64 {
        mean(self.records.iter().map(|r| r.expected_free_energy))
    }

    pub fn actions(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.action).collect()
    }

    pub fn last_observation(&self) -> Option<usize> {
        self.records.last().map(|r| r.observation)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn check_alphabets(agent: &Agent, env: &dyn Environment, planning: bool) -> Result<()> {
    let gm = agent.model();
    if gm.n_stimuli() != env.n_stimuli() {
        return Err(Error::domain(format!(
            "agent expects {} stimuli but the environment emits {}",
            gm.n_stimuli(),
            env.n_stimuli()
        )));
    }
    if planning {
        if let Some(a) = gm.policies().iter().flat_map(|p| p.actions.iter()).find(|&&a| a >= env.n_actions()) {
            return Err(Error::domain(format!(
                "policy action {a} is not available in the environment ({} actions)",
                env.n_actions()
            )));
        }
    }
    Ok(())
}

/// Runs one trial of `horizon` steps.
///
/// Every step the agent predicts the next stimulus, observes it and
/// perceives under every policy. With loop II it also plans and acts, and
/// only policies that agree with the actions already taken keep mass; without
/// it the environment follows its autonomous dynamics. When learning is active
/// in `phase`, the counts absorb the episode's final policy-averaged
/// posteriors once the trial ends.
pub fn run_episode(
    agent: &mut Agent,
    env: &mut dyn Environment,
    cfg: &RegimeConfig,
    phase: Phase,
    episode: usize,
    seed: u64,
    rng: &mut dyn RngCore,
) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let planning = cfg.loop_ii;
    check_alphabets(agent, env, planning)?;
    let gm = agent.model().clone();
    let horizon = gm.horizon();
    let n = gm.n_concepts();

    let mut observations = Vec::with_capacity(horizon);
    let mut actions: Vec<Option<usize>> = Vec::with_capacity(horizon);
    let mut records = Vec::with_capacity(horizon);
    let mut beliefs = infer(&gm, &[], planning)?;
    let mut phi = env.reset(rng);
    for tau in 0..horizon {
        let p = predictive(&gm, &beliefs.marginals(), beliefs.policy_posterior.probs(), tau)[phi];
        let surprisal = if p > 0.0 { -p.ln() } else { f64::INFINITY };
        observations.push(phi);
        beliefs = infer(&gm, &observations, planning)?;
        let taken: Vec<usize> = actions.iter().flatten().copied().collect();
        if !taken.is_empty() {
            beliefs.condition_on_actions(gm.policies(), &taken);
        }
        let last = tau + 1 == horizon;
        let action = if planning && !last {
            Some(select_action(beliefs.policy_posterior.probs(), gm.policies(), tau)?)
        } else {
            None
        };
        records.push(StepRecord {
            episode,
            tau,
            observation: phi,
            action,
            free_energy: beliefs.expected_free_energy_of_perception(),
            expected_free_energy: beliefs.expected_efe(),
            surprisal,
            n_concepts: n,
        });
        if !last {
            actions.push(action);
            phi = env.step(action, rng)?;
        }
    }

    if cfg.learns_in(phase) {
        let steps: Vec<LearningStep> = observations
            .iter()
            .enumerate()
            .map(|(tau, &o)| LearningStep {
                observation: o,
                posterior: beliefs.averaged_marginal(tau),
                action: actions.get(tau).copied().flatten(),
            })
            .collect();
        let counts = update_dirichlet(agent.counts(), &[steps], agent.learning_rate())?;
        agent.set_counts(counts)?;
    }

    Ok(EpisodeTrace {
        records,
        phase,
        regime: cfg.regime(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub phase: Phase,
    pub mean_surprisal: f64,
    pub mean_free_energy: f64,
    pub mean_expected_free_energy: f64,
    /// Whether the last stimulus was the most preferred one at that step.
    pub preferred_outcome: bool,
    pub n_concepts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionEvent {
    /// Episode after which the concept was added.
    pub episode: usize,
    pub report: ExpansionReport,
    /// Window surprisal after one Dirichlet update on the same window.
    pub window_surprisal_after_update: f64,
}

/// Dirichlet means of the final counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalModel {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub n_concepts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurriculumSummary {
    pub regime: Regime,
    pub seed: u64,
    pub learning_episodes: usize,
    pub use_episodes: usize,
    pub surprisal_curve: Vec<f64>,
    pub free_energy_curve: Vec<f64>,
    /// Fraction of learning-phase episodes ending on the preferred stimulus.
    pub preferred_frequency_learning: Option<f64>,
    /// Same for the use phase.
    pub preferred_frequency_use: Option<f64>,
    pub episodes: Vec<EpisodeMetrics>,
    pub expansions: Vec<ExpansionEvent>,
    pub final_model: FinalModel,
}

#[derive(Debug, Clone)]
pub struct Curriculum {
    pub summary: CurriculumSummary,
    pub traces: Vec<EpisodeTrace>,
    pub agent: Agent,
    /// Counts at the start of the use phase.
    pub counts_entering_use: DirichletCounts,
}

fn final_model(counts: &DirichletCounts) -> Result<FinalModel> {
    Ok(FinalModel {
        a: normalize_columns(counts.a())?.to_rows(),
        b: counts
            .b()
            .iter()
            .map(|b| normalize_columns(b).map(|m| m.to_rows()))
            .collect::<Result<_>>()?,
        d: Categorical::from_weights(counts.d())?.into_vec(),
        n_concepts: counts.n_concepts(),
    })
}

/// Runs `learning_episodes` then `use_episodes` trials with persistent
/// counts, all driven by one RNG seeded with `seed`.
///
/// With an expansion config, the last `window` stimuli are checked after
/// every learning episode; a new concept is followed by one Dirichlet update
/// on that window, and the window restarts.
pub fn run_curriculum(scenario: &Scenario, learning_episodes: usize, use_episodes: usize, seed: u64) -> Result<Curriculum> {
    if learning_episodes + use_episodes == 0 {
        return Err(Error::domain("a curriculum needs at least one episode"));
    }
    let cfg = scenario.regime;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = scenario.environment.clone();
    let mut agent = scenario.agent.clone();
    let mut traces = Vec::with_capacity(learning_episodes + use_episodes);
    let mut metrics = Vec::with_capacity(learning_episodes + use_episodes);
    let mut expansions = Vec::new();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut counts_entering_use = agent.counts().clone();

    let phases = std::iter::repeat_n(Phase::Learning, learning_episodes).chain(std::iter::repeat_n(Phase::Use, use_episodes));
    for (episode, phase) in phases.enumerate() {
        if episode == learning_episodes {
            counts_entering_use = agent.counts().clone();
        }
        let trace = run_episode(&mut agent, &mut env, &cfg, phase, episode, seed, &mut rng)?;
        let preferred = match (trace.records.last(), agent.preferences().last()) {
            (Some(r), Some(c)) => agent.preferences().get(r.tau).unwrap_or(c).argmax() == r.observation,
            _ => false,
        };
        metrics.push(EpisodeMetrics {
            episode,
            phase,
            mean_surprisal: trace.mean_surprisal(),
            mean_free_energy: trace.mean_free_energy(),
            mean_expected_free_energy: trace.mean_efe(),
            preferred_outcome: preferred,
            n_concepts: trace.records.last().map_or(0, |r| r.n_concepts),
        });

        if let Some(exp) = scenario.expansion.as_ref().filter(|_| cfg.learns_in(phase)) {
            for r in &trace.records {
                window.push_back(r.observation);
                if window.len() > exp.window {
                    window.pop_front();
                }
            }
            if window.len() == exp.window {
                if let Some(event) = try_expand(&mut agent, window.make_contiguous(), exp, episode)? {
                    expansions.push(event);
                    window.clear();
                }
            }
        }
        traces.push(trace);
    }
    if use_episodes == 0 {
        counts_entering_use = agent.counts().clone();
    }

    let frequency = |phase: Phase| {
        let outcomes: Vec<bool> = metrics.iter().filter(|m| m.phase == phase).map(|m| m.preferred_outcome).collect();
        (!outcomes.is_empty()).then(|| outcomes.iter().filter(|&&b| b).count() as f64 / outcomes.len() as f64)
    };
    let summary = CurriculumSummary {
        regime: cfg.regime(),
        seed,
        learning_episodes,
        use_episodes,
        surprisal_curve: metrics.iter().map(|m| m.mean_surprisal).collect(),
        free_energy_curve: metrics.iter().map(|m| m.mean_free_energy).collect(),
        preferred_frequency_learning: frequency(Phase::Learning),
        preferred_frequency_use: frequency(Phase::Use),
        episodes: metrics,
        expansions,
        final_model: final_model(agent.counts())?,
    };
    Ok(Curriculum {
        summary,
        traces,
        agent,
        counts_entering_use,
    })
}

/// Expands the agent when `window` is poorly explained; on expansion, learns
/// the window once and reports the resulting window surprisal.
pub fn try_expand(
    agent: &mut Agent,
    window: &[usize],
    cfg: &ExpansionConfig,
    episode: usize,
) -> Result<Option<ExpansionEvent>> {
    let (counts, report) = expand_concepts(agent.counts(), window, cfg)?;
    if !report.expanded {
        return Ok(None);
    }
    agent.set_counts(counts)?;
    agent.learn_window(window)?;
    let after = window_surprisal(agent.model().a(), window)?;
    Ok(Some(ExpansionEvent {
        episode,
        report,
        window_surprisal_after_update: after,
    }))
}
