//! Simulated generative processes: the world the agent acts on, holding the
//! true hidden state and emitting stimuli.
//!
//! The hidden state never leaves a [`GenerativeProcess`]; an agent only sees
//! what [`Environment::reset`] and [`Environment::step`] return.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{enumerate_policies, DirichletCounts, DEFAULT_POLICY_CAP};
use crate::inference::ExpansionConfig;
use crate::knowledge::RegimeConfig;
use crate::probmath::{sample_categorical, Categorical, Matrix};
use crate::knowledge::Agent;
use crate::scenario::Scenario;

/// Where an episode starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Fixed(usize),
    Distribution(Categorical),
}

/// The agent-facing side of a world: stimuli in, actions out.
pub trait Environment {
    fn n_stimuli(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns its first stimulus.
    fn reset(&mut self, rng: &mut dyn RngCore) -> usize;
    /// Applies `action` (or the autonomous dynamics for `None`) and returns
    /// the next stimulus.
    fn step(&mut self, action: Option<usize>, rng: &mut dyn RngCore) -> Result<usize>;
}

/// Environment with hidden states, emissions `A*` and transitions `B*`.
///
/// The current state is private:
///
/// ```compile_fail
/// use conceptgen::environment::fixture;
/// let scenario = fixture("tmaze").unwrap();
/// let peek = scenario.environment.state;
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeProcess {
    a_star: Matrix,
    b_star: Vec<Matrix>,
    /// Dynamics when no action is taken; `None` keeps the state.
    autonomous: Option<Matrix>,
    initial: InitialState,
    state: usize,
}

impl GenerativeProcess {
    pub fn new(
        a_star: Matrix,
        b_star: Vec<Matrix>,
        autonomous: Option<Matrix>,
        initial: InitialState,
    ) -> Result<Self> {
        let n = a_star.cols();
        a_star.check_column_stochastic("A_star")?;
        for (k, b) in b_star.iter().chain(autonomous.iter()).enumerate() {
            if b.rows() != n || b.cols() != n {
                return Err(Error::dim(format!("transition {k} must be {n}x{n}")));
            }
            b.check_column_stochastic("B_star")?;
        }
        let state = match &initial {
            InitialState::Fixed(s) if *s < n => *s,
            InitialState::Fixed(s) => return Err(Error::domain(format!("initial state {s} out of range {n}"))),
            InitialState::Distribution(d) if d.len() == n => d.argmax(),
            InitialState::Distribution(d) => {
                return Err(Error::dim(format!("initial distribution has {} entries, expected {n}", d.len())))
            }
        };
        Ok(Self {
            a_star,
            b_star,
            autonomous,
            initial,
            state,
        })
    }

    pub fn a_star(&self) -> &Matrix {
        &self.a_star
    }

    pub fn b_star(&self) -> &[Matrix] {
        &self.b_star
    }

    pub fn autonomous(&self) -> Option<&Matrix> {
        self.autonomous.as_ref()
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn n_states(&self) -> usize {
        self.a_star.cols()
    }

    fn emit(&self, rng: &mut dyn RngCore) -> usize {
        let column = Categorical::new(self.a_star.column(self.state)).expect("validated emission column");
        sample_categorical(&column, rng)
    }

    fn transition(&mut self, m: &Matrix, rng: &mut dyn RngCore) {
        let column = Categorical::new(m.column(self.state)).expect("validated transition column");
        self.state = sample_categorical(&column, rng);
    }

    #[cfg(test)]
    pub(crate) fn hidden_state(&self) -> usize {
        self.state
    }
}

impl Environment for GenerativeProcess {
    fn n_stimuli(&self) -> usize {
        self.a_star.rows()
    }

    fn n_actions(&self) -> usize {
        self.b_star.len()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> usize {
        self.state = match &self.initial {
            InitialState::Fixed(s) => *s,
            InitialState::Distribution(d) => sample_categorical(d, rng),
        };
        self.emit(rng)
    }

    fn step(&mut self, action: Option<usize>, rng: &mut dyn RngCore) -> Result<usize> {
        match action {
            Some(a) if a < self.b_star.len() => {
                let m = self.b_star[a].clone();
                self.transition(&m, rng);
            }
            Some(a) => {
                return Err(Error::domain(format!(
                    "action {a} is not available ({} actions)",
                    self.b_star.len()
                )))
            }
            None => {
                if let Some(m) = self.autonomous.clone() {
                    self.transition(&m, rng);
                }
            }
        }
        Ok(self.emit(rng))
    }
}

pub const FIXTURE_NAMES: [&str; 4] = ["discrimination-2x2", "tmaze", "cue-conditional", "withheld-state"];

/// Built-in scenarios.
///
/// * `discrimination-2x2`: two concepts and two noisy stimuli, no actions.
/// * `tmaze`: start, junction and two arms; only the right arm usually
///   yields the preferred stimulus.
/// * `cue-conditional`: an initial cue decides which action is rewarded.
/// * `withheld-state`: the world sits in a third state the agent has no
///   concept for.
pub fn fixture(name: &str) -> Result<Scenario> {
    match name {
        "discrimination-2x2" => discrimination(),
        "tmaze" => tmaze(),
        "cue-conditional" => cue_conditional(),
        "withheld-state" => withheld_state(),
        other => Err(Error::domain(format!(
            "unknown fixture {other:?}; available: {}",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}

fn rows(r: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).expect("fixture matrix")
}

/// Deterministic transition matrix from `next[j]` = successor of state `j`.
fn successor_matrix(next: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(next.len(), next.len());
    for (j, &i) in next.iter().enumerate() {
        m.set(i, j, 1.0);
    }
    m
}

/// `scale · p + floor`, elementwise.
fn counts_like(p: &Matrix, scale: f64, floor: f64) -> Matrix {
    let mut out = p.clone();
    for r in 0..p.rows() {
        for c in 0..p.cols() {
            out.set(r, c, scale * p.get(r, c) + floor);
        }
    }
    out
}

fn preferences(log_weights: &[f64]) -> Categorical {
    crate::probmath::softmax(log_weights, 1.0)
}

fn discrimination() -> Result<Scenario> {
    let environment = GenerativeProcess::new(
        rows(&[&[0.9, 0.1], &[0.1, 0.9]]),
        vec![],
        None,
        InitialState::Distribution(Categorical::uniform(2)),
    )?;
    let counts = DirichletCounts::new(
        // weak preference for the right labelling, persistent states
        rows(&[&[26.0, 20.0], &[20.0, 26.0]]),
        vec![rows(&[&[100.0, 1.0], &[1.0, 100.0]])],
        vec![1.0, 1.0],
    )?;
    let horizon = 6;
    let agent = Agent::learning(counts, vec![Categorical::uniform(2)], 1.0, horizon, enumerate_policies(1, horizon - 1, DEFAULT_POLICY_CAP)?, 1.0)?;
    Ok(Scenario {
        name: Some("discrimination-2x2".into()),
        environment,
        agent,
        regime: RegimeConfig::declarative(),
        episodes: 200,
        use_episodes: 0,
        seed: 7,
        expansion: None,
    })
}

fn tmaze() -> Result<Scenario> {
    // states: 0 start, 1 junction, 2 left arm, 3 right arm
    // stimuli: 0 corridor, 1 reward, 2 no reward
    let a_star = rows(&[
        &[1.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.1, 0.9],
        &[0.0, 0.0, 0.9, 0.1],
    ]);
    let left = successor_matrix(&[1, 2, 2, 3]);
    let right = successor_matrix(&[1, 3, 2, 3]);
    let environment = GenerativeProcess::new(a_star, vec![left.clone(), right.clone()], None, InitialState::Fixed(0))?;

    // corridor states known, arm outcomes unknown
    let a = rows(&[
        &[10.0, 10.0, 0.1, 0.1],
        &[0.1, 0.1, 1.0, 1.0],
        &[0.1, 0.1, 1.0, 1.0],
    ]);
    let counts = DirichletCounts::new(
        a,
        vec![counts_like(&left, 10.0, 0.1), counts_like(&right, 10.0, 0.1)],
        vec![10.0, 0.1, 0.1, 0.1],
    )?;
    let horizon = 3;
    let agent = Agent::learning(
        counts,
        vec![preferences(&[0.0, 3.0, -3.0])],
        4.0,
        horizon,
        enumerate_policies(2, horizon - 1, DEFAULT_POLICY_CAP)?,
        1.0,
    )?;
    Ok(Scenario {
        name: Some("tmaze".into()),
        environment,
        agent,
        regime: RegimeConfig::procedural(),
        episodes: 100,
        use_episodes: 50,
        seed: 11,
        expansion: None,
    })
}

fn cue_conditional() -> Result<Scenario> {
    // states: 0 cue A, 1 cue B, 2 rewarded, 3 unrewarded; stimuli mirror states
    let act0 = successor_matrix(&[2, 3, 2, 3]);
    let act1 = successor_matrix(&[3, 2, 2, 3]);
    let environment = GenerativeProcess::new(
        Matrix::identity(4),
        vec![act0.clone(), act1.clone()],
        None,
        InitialState::Distribution(Categorical::new(vec![0.5, 0.5, 0.0, 0.0])?),
    )?;
    let a = counts_like(&Matrix::identity(4), 10.0, 0.1);
    // outcome states are known to be absorbing; where a cue leads is not
    let unknown = |m: &Matrix| {
        let mut b = counts_like(m, 10.0, 0.1);
        for cue in 0..2 {
            for next in 0..4 {
                b.set(next, cue, 1.0);
            }
        }
        b
    };
    let counts = DirichletCounts::new(a, vec![unknown(&act0), unknown(&act1)], vec![1.0, 1.0, 0.1, 0.1])?;
    let horizon = 3;
    let agent = Agent::learning(
        counts,
        vec![preferences(&[0.0, 0.0, 3.0, -3.0])],
        4.0,
        horizon,
        enumerate_policies(2, horizon - 1, DEFAULT_POLICY_CAP)?,
        1.0,
    )?;
    Ok(Scenario {
        name: Some("cue-conditional".into()),
        environment,
        agent,
        regime: RegimeConfig::conditional(),
        episodes: 60,
        use_episodes: 40,
        seed: 13,
        expansion: None,
    })
}

fn withheld_state() -> Result<Scenario> {
    let environment = GenerativeProcess::new(
        rows(&[
            &[0.9, 0.05, 0.05],
            &[0.05, 0.9, 0.05],
            &[0.05, 0.05, 0.9],
        ]),
        vec![],
        None,
        InitialState::Fixed(2),
    )?;
    let counts = DirichletCounts::new(
        rows(&[&[20.0, 0.1], &[0.1, 20.0], &[0.1, 0.1]]),
        vec![rows(&[&[5.0, 1.0], &[1.0, 5.0]])],
        vec![5.0, 5.0],
    )?;
    let horizon = 2;
    let agent = Agent::learning(counts, vec![Categorical::uniform(3)], 1.0, horizon, enumerate_policies(1, horizon - 1, DEFAULT_POLICY_CAP)?, 1.0)?;
    Ok(Scenario {
        name: Some("withheld-state".into()),
        environment,
        agent,
        regime: RegimeConfig::declarative(),
        episodes: 10,
        use_episodes: 0,
        seed: 5,
        expansion: Some(ExpansionConfig::for_stimuli(3)),
    })
}
