//! Command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable input or unwritable output, 2 invalid
//! input (bad JSON, schema violations, bad flags), 3 runtime domain errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::environment::{fixture, FIXTURE_NAMES};
use crate::error::Error;
use crate::knowledge::{run_curriculum, CurriculumSummary, EpisodeTrace};
use crate::scenario::{Scenario, ScenarioFile};
use crate::semnet::{
    lambda_profile, machine_transfer_energy, optimize_matrix, similarity_matrix, synsets, transfer_energy,
    ConceptStimulusMatrix, MatrixFile, MatrixMode, TransferEnergyReport, DEFAULT_LAMBDA,
};

#[derive(Debug, Parser)]
#[command(name = "conceptgen", version, about = "Semantic-network analysis and active-inference scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write a per-step trace plus a JSON summary.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of learning episodes.
        #[arg(long)]
        episodes: Option<usize>,
        /// Overrides the number of use-phase episodes.
        #[arg(long)]
        use_episodes: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Trace format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Transfer energy, similarity and synsets of a concept-stimulus matrix.
    Analyze {
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA, value_parser = parse_lambda)]
        lambda: f64,
    },
    /// Transfer energy over an evenly spaced λ grid.
    Sweep {
        matrix: PathBuf,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search binary concept-stimulus matrices for minimal transfer energy.
    Optimize {
        #[arg(long)]
        concepts: usize,
        #[arg(long)]
        stimuli: usize,
        #[arg(long, default_value_t = DEFAULT_LAMBDA, value_parser = parse_lambda)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Also write the bare matrix file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in scenario as JSON.
    Fixture {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(FIXTURE_NAMES))]
        name: String,
    },
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("lambda must lie in [0, 1], got {v}"))
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: io::Error },
    Invalid(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Invalid(msg) => f.write_str(msg),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Schema { .. } => CliError::Invalid(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_matrix(path: &Path) -> Result<ConceptStimulusMatrix, CliError> {
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = match e.path().to_string() {
            root if root == "." => "matrix".to_string(),
            f => f,
        };
        CliError::Invalid(format!("{}: invalid {field}: {}", path.display(), e.into_inner()))
    })
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = read(path)?;
    Scenario::from_json(&text).map_err(|e| match e {
        Error::Schema { .. } => CliError::Invalid(format!("{}: {e}", path.display())),
        other => CliError::Runtime(other),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// One row of the per-step trace.
#[derive(Debug, Serialize)]
struct TraceRow {
    episode: usize,
    /// One-based step.
    tau: usize,
    observation: usize,
    action: Option<usize>,
    #[serde(rename = "F")]
    free_energy: f64,
    #[serde(rename = "G")]
    expected_free_energy: f64,
    surprisal: f64,
    n_concepts: usize,
}

fn trace_rows(traces: &[EpisodeTrace]) -> Vec<TraceRow> {
    traces
        .iter()
        .flat_map(|t| t.records.iter())
        .map(|r| TraceRow {
            episode: r.episode,
            tau: r.tau + 1,
            observation: r.observation,
            action: r.action,
            free_energy: r.free_energy,
            expected_free_energy: r.expected_free_energy,
            surprisal: r.surprisal,
            n_concepts: r.n_concepts,
        })
        .collect()
}

/// Summary file: the curriculum summary plus the scenario that produced it.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    name: Option<&'a str>,
    #[serde(flatten)]
    summary: &'a CurriculumSummary,
    scenario: ScenarioFile,
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    episodes: Option<usize>,
    use_episodes: Option<usize>,
    out: &Path,
    format: Format,
) -> Result<(), CliError> {
    let mut scenario = load_scenario(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(e) = episodes {
        scenario.episodes = e;
    }
    if let Some(e) = use_episodes {
        scenario.use_episodes = e;
    }
    if scenario.episodes + scenario.use_episodes == 0 {
        return Err(CliError::Invalid("at least one episode is required".into()));
    }
    let run = run_curriculum(&scenario, scenario.episodes, scenario.use_episodes, scenario.seed)?;
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let rows = trace_rows(&run.traces);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row).map_err(|e| CliError::Runtime(Error::Domain(e.to_string())))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Runtime(Error::Domain(e.to_string())))?;
            write(&out.join("trace.csv"), &bytes)?;
        }
        Format::Json => write(&out.join("trace.json"), to_json(&rows).as_bytes())?,
    }
    let summary = RunSummary {
        name: scenario.name.as_deref(),
        summary: &run.summary,
        scenario: scenario.to_file(),
    };
    write(&out.join("summary.json"), to_json(&summary).as_bytes())
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    mode: MatrixMode,
    transfer_energy: TransferEnergyReport,
    machine_transfer_energy: f64,
    similarity: Vec<Vec<f64>>,
    /// Groups of concepts with identical stimulus sets; binary matrices only.
    synsets: Option<Vec<Vec<usize>>>,
}

fn analyze(csm: &ConceptStimulusMatrix, lambda: f64) -> Result<AnalyzeReport, CliError> {
    Ok(AnalyzeReport {
        mode: csm.mode(),
        transfer_energy: transfer_energy(csm, lambda)?,
        machine_transfer_energy: machine_transfer_energy(csm)?,
        similarity: similarity_matrix(csm).to_rows(),
        synsets: match csm.mode() {
            MatrixMode::Binary => Some(synsets(csm)?),
            MatrixMode::Weighted => None,
        },
    })
}

fn sweep_output(csm: &ConceptStimulusMatrix, grid: usize, format: Format) -> Result<Vec<u8>, CliError> {
    let profile = lambda_profile(csm, grid)?;
    match format {
        Format::Json => Ok(to_json(&profile).into_bytes()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &profile {
                w.serialize(row).map_err(|e| CliError::Runtime(Error::Domain(e.to_string())))?;
            }
            w.into_inner().map_err(|e| CliError::Runtime(Error::Domain(e.to_string())))
        }
    }
}

#[derive(Debug, Serialize)]
struct OptimizeReport {
    concepts: usize,
    stimuli: usize,
    lambda: f64,
    seed: u64,
    restarts: usize,
    matrix: MatrixFile,
    transfer_energy: TransferEnergyReport,
}

fn stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            episodes,
            use_episodes,
            out,
            format,
        } => cmd_run(&scenario, seed, episodes, use_episodes, &out, format),
        Command::Analyze { matrix, lambda } => {
            let csm = load_matrix(&matrix)?;
            stdout(to_json(&analyze(&csm, lambda)?).as_bytes())
        }
        Command::Sweep {
            matrix,
            grid,
            format,
            out,
        } => {
            let csm = load_matrix(&matrix)?;
            let bytes = sweep_output(&csm, grid, format)?;
            match out {
                Some(path) => write(&path, &bytes),
                None => stdout(&bytes),
            }
        }
        Command::Optimize {
            concepts,
            stimuli,
            lambda,
            seed,
            restarts,
            out,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (csm, report) = optimize_matrix(concepts, stimuli, lambda, &mut rng, restarts)?;
            let matrix = MatrixFile::from(csm);
            if let Some(path) = out {
                write(&path, to_json(&matrix).as_bytes())?;
            }
            stdout(
                to_json(&OptimizeReport {
                    concepts,
                    stimuli,
                    lambda,
                    seed,
                    restarts,
                    matrix,
                    transfer_energy: report,
                })
                .as_bytes(),
            )
        }
        Command::Fixture { name } => stdout(fixture(&name)?.to_json().as_bytes()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
