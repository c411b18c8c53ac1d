//! Scenario files: an environment, an agent, a regime and a run length.
//!
//! Parsing goes through plain file structs first so that every validation
//! failure can name the field it came from.

use serde::{Deserialize, Serialize};

use crate::environment::{GenerativeProcess, InitialState};
use crate::error::{Error, Result};
use crate::genmodel::{enumerate_policies, DirichletCounts, GenerativeModel, Policy, DEFAULT_POLICY_CAP};
use crate::inference::ExpansionConfig;
use crate::knowledge::{Agent, RegimeConfig};
use crate::probmath::{Categorical, Matrix};

type Rows = Vec<Vec<f64>>;

/// A ready-to-run scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub environment: GenerativeProcess,
    pub agent: Agent,
    pub regime: RegimeConfig,
    /// Learning-phase episodes.
    pub episodes: usize,
    /// Use-phase episodes that follow learning.
    pub use_episodes: usize,
    pub seed: u64,
    pub expansion: Option<ExpansionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub environment: EnvironmentFile,
    pub agent: AgentFile,
    pub regime: RegimeConfig,
    #[serde(default = "one")]
    pub episodes: usize,
    #[serde(default)]
    pub use_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    #[serde(rename = "A_star")]
    pub a_star: Rows,
    #[serde(rename = "B_star", default)]
    pub b_star: Vec<Rows>,
    /// Dynamics when no action is taken; identity when absent.
    #[serde(rename = "B_autonomous", default, skip_serializing_if = "Option::is_none")]
    pub b_autonomous: Option<Rows>,
    pub initial_state: InitialStateFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialStateFile {
    Index(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PreferencesFile {
    Shared(Vec<f64>),
    PerStep(Rows),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Rows>>,
    #[serde(rename = "C")]
    pub c: PreferencesFile,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default = "one_f64")]
    pub gamma: f64,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Vec<usize>>>,
    /// Starting counts; `A`, `B` and `D` are then their means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletCounts>,
    #[serde(default = "one_f64")]
    pub learning_rate: f64,
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// Re-labels any error as a schema error on `field`.
fn at(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Schema { field: inner, message } => Error::schema(format!("{field}.{inner}"), message),
        Error::Domain(m) | Error::Dimension(m) | Error::Enumeration(m) => Error::schema(field, m),
    }
}

fn matrix(field: &str, rows: &Rows) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(at(field))
}

fn stochastic(field: &str, rows: &Rows) -> Result<Matrix> {
    let m = matrix(field, rows)?;
    m.check_column_stochastic(field).map_err(at(field))?;
    Ok(m)
}

fn categorical(field: &str, p: &[f64]) -> Result<Categorical> {
    Categorical::new(p.to_vec()).map_err(at(field))
}

impl EnvironmentFile {
    fn build(&self) -> Result<GenerativeProcess> {
        let a_star = stochastic("environment.A_star", &self.a_star)?;
        let b_star = self
            .b_star
            .iter()
            .enumerate()
            .map(|(k, b)| stochastic(&format!("environment.B_star[{k}]"), b))
            .collect::<Result<Vec<_>>>()?;
        let autonomous = self
            .b_autonomous
            .as_ref()
            .map(|b| stochastic("environment.B_autonomous", b))
            .transpose()?;
        let initial = match &self.initial_state {
            InitialStateFile::Index(s) => InitialState::Fixed(*s),
            InitialStateFile::Distribution(p) => InitialState::Distribution(categorical("environment.initial_state", p)?),
        };
        let n = a_star.cols();
        let in_range = match &initial {
            InitialState::Fixed(s) => *s < n,
            InitialState::Distribution(d) => d.len() == n,
        };
        if !in_range {
            return Err(Error::schema("environment.initial_state", format!("must index or cover the {n} states")));
        }
        GenerativeProcess::new(a_star, b_star, autonomous, initial).map_err(at("environment.B_star"))
    }

    fn from_process(gp: &GenerativeProcess) -> Self {
        Self {
            a_star: gp.a_star().to_rows(),
            b_star: gp.b_star().iter().map(Matrix::to_rows).collect(),
            b_autonomous: gp.autonomous().map(Matrix::to_rows),
            initial_state: match gp.initial() {
                InitialState::Fixed(s) => InitialStateFile::Index(*s),
                InitialState::Distribution(d) => InitialStateFile::Distribution(d.probs().to_vec()),
            },
        }
    }
}

impl AgentFile {
    fn build(&self) -> Result<Agent> {
        let c = match &self.c {
            PreferencesFile::Shared(p) => vec![categorical("agent.C", p)?],
            PreferencesFile::PerStep(rows) => rows
                .iter()
                .enumerate()
                .map(|(k, p)| categorical(&format!("agent.C[{k}]"), p))
                .collect::<Result<_>>()?,
        };
        if let Some(counts) = &self.dirichlet {
            for (field, present) in [("agent.A", self.a.is_some()), ("agent.B", self.b.is_some()), ("agent.D", self.d.is_some())] {
                if present {
                    return Err(Error::schema(field, "must be omitted when dirichlet counts are given"));
                }
            }
            let policies = self.policies(counts.b().len())?;
            return Agent::learning(counts.clone(), c, self.gamma, self.horizon, policies, self.learning_rate)
                .map_err(at("agent"));
        }
        let missing = |f: &str| Error::schema(f, "required unless dirichlet counts are given");
        let a = stochastic("agent.A", self.a.as_ref().ok_or_else(|| missing("agent.A"))?)?;
        let b = self
            .b
            .as_ref()
            .ok_or_else(|| missing("agent.B"))?
            .iter()
            .enumerate()
            .map(|(k, b)| stochastic(&format!("agent.B[{k}]"), b))
            .collect::<Result<Vec<_>>>()?;
        let d = categorical("agent.D", self.d.as_ref().ok_or_else(|| missing("agent.D"))?)?;
        let policies = self.policies(b.len())?;
        let model = GenerativeModel::new(a, b, c, d, self.gamma, self.horizon, policies).map_err(at("agent"))?;
        Agent::from_model(model, self.learning_rate).map_err(at("agent.learning_rate"))
    }

    fn policies(&self, n_actions: usize) -> Result<Vec<Policy>> {
        if self.horizon == 0 {
            return Err(Error::schema("agent.horizon", "must be at least 1"));
        }
        match &self.policies {
            Some(list) => Ok(list.iter().cloned().map(Policy::new).collect()),
            None => enumerate_policies(n_actions, self.horizon - 1, DEFAULT_POLICY_CAP).map_err(at("agent.policies")),
        }
    }

    fn from_agent(agent: &Agent) -> Self {
        let gm = agent.model();
        let c = if gm.c().len() == 1 {
            PreferencesFile::Shared(gm.c()[0].probs().to_vec())
        } else {
            PreferencesFile::PerStep(gm.c().iter().map(|c| c.probs().to_vec()).collect())
        };
        Self {
            a: None,
            b: None,
            c,
            d: None,
            gamma: gm.gamma(),
            horizon: gm.horizon(),
            policies: Some(gm.policies().iter().map(|p| p.actions.clone()).collect()),
            dirichlet: Some(agent.counts().clone()),
            learning_rate: agent.learning_rate(),
        }
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario> {
        self.regime.validate().map_err(at("regime"))?;
        let expansion = self.expansion;
        if let Some(e) = &expansion {
            if e.threshold.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::schema("expansion.threshold", "must be positive"));
            }
            if e.window == 0 {
                return Err(Error::schema("expansion.window", "must be at least 1"));
            }
            if e.prior_concentration.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::schema("expansion.prior_concentration", "must be positive"));
            }
        }
        Ok(Scenario {
            name: self.name.clone(),
            environment: self.environment.build()?,
            agent: self.agent.build()?,
            regime: self.regime,
            episodes: self.episodes,
            use_episodes: self.use_episodes,
            seed: self.seed,
            expansion,
        })
    }
}

impl Scenario {
    /// Parses and validates scenario JSON. Errors name the offending field and,
    /// for malformed JSON, the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let field = if path == "." { "scenario".to_string() } else { path };
            Error::schema(field, format!("{inner}"))
        })?;
        file.build()
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            environment: EnvironmentFile::from_process(&self.environment),
            agent: AgentFile::from_agent(&self.agent),
            regime: self.regime,
            episodes: self.episodes,
            use_episodes: self.use_episodes,
            seed: self.seed,
            expansion: self.expansion,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{fixture, FIXTURE_NAMES};

    #[test]
    fn fixtures_round_trip() {
        for name in FIXTURE_NAMES {
            let s = fixture(name).unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s, "{name}");
        }
    }

    fn field_of(text: &str) -> String {
        match Scenario::from_json(text) {
            Err(Error::Schema { field, .. }) => field,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(&fixture("tmaze").unwrap().to_json()).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&edit(|v| v["agent"]["horizon"] = "three".into())), "agent.horizon");
        assert_eq!(field_of(&edit(|v| v["environment"]["A_star"][0][0] = 5.0.into())), "environment.A_star");
        assert_eq!(field_of(&edit(|v| v["environment"]["B_star"][1][0][0] = 0.5.into())), "environment.B_star[1]");
        assert_eq!(field_of(&edit(|v| v["agent"]["A"] = serde_json::json!([[1.0]]))), "agent.A");
        assert_eq!(field_of(&edit(|v| v["bogus"] = 1.into())), "bogus");
        assert_eq!(field_of(&edit(|v| v["agent"]["C"] = serde_json::json!([0.5, 0.6, 0.1]))), "agent.C");
    }

    #[test]
    fn regime_error_when_both_loops_off() {
        let text = edit(|v| {
            v["regime"]["loop_I_learning"] = false.into();
            v["regime"]["loop_II"] = false.into();
        });
        assert_eq!(field_of(&text), "regime");
    }

    #[test]
    fn explicit_model_agent() {
        let text = r#"{
            "environment": {"A_star": [[1, 0], [0, 1]], "initial_state": [0.5, 0.5]},
            "agent": {"A": [[0.9, 0.1], [0.1, 0.9]], "B": [[[1, 0], [0, 1]]], "C": [0.5, 0.5],
                      "D": [0.5, 0.5], "horizon": 2},
            "regime": {"loop_I_learning": true, "loop_II": false},
            "episodes": 3, "seed": 2
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.agent.model().policies().len(), 1);
        assert_eq!(s.episodes, 3);
        assert_eq!(s.agent.model().a().get(0, 0), 0.9);
    }
}
