//! Run configuration: command-line flags or a flat TOML document, both
//! funneled through the same validation.
//!
//! A config file holds one key per parameter plus `command` and `seed`:
//!
//! ```toml
//! command = "frontier"
//! seed = 1
//! dk = [64, 128, 256]
//! epsilon = 0.05
//! delta = 0.5
//! trials = 2000
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(LabError::usage(format!("unknown format `{s}` (csv|json)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Equivalence,
    Snr,
    Failure,
    Frontier,
    Errors,
    Rules,
    Chain,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Self::Equivalence,
        Self::Snr,
        Self::Failure,
        Self::Frontier,
        Self::Errors,
        Self::Rules,
        Self::Chain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Equivalence => "equivalence",
            Self::Snr => "snr",
            Self::Failure => "failure",
            Self::Frontier => "frontier",
            Self::Errors => "errors",
            Self::Rules => "rules",
            Self::Chain => "chain",
        }
    }

    /// Parameter keys accepted besides `command`, `seed`, `output`, `format`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Equivalence => &["instances", "n", "model_dim", "head_dim"],
            Self::Snr => &["dk", "dv", "n", "trials"],
            Self::Failure => &["dk", "dv", "n", "delta", "trials"],
            Self::Frontier => &["dk", "dv", "epsilon", "delta", "gamma_snr", "trials"],
            Self::Errors => &["layers", "heads", "n", "dk", "delta", "trials"],
            Self::Rules => &["dk", "dv", "trials", "instances", "steps", "alpha", "tau"],
            Self::Chain => &[],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| LabError::usage(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceParams {
    pub instances: u64,
    /// Sequence length of each random instance.
    pub n: usize,
    pub model_dim: usize,
    pub head_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrParams {
    pub d_k: Vec<usize>,
    /// Defaults to `d_k` per grid point.
    pub d_v: Option<usize>,
    pub n: Vec<usize>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureParams {
    pub d_k: Vec<usize>,
    pub d_v: Option<usize>,
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierParams {
    pub d_k: Vec<usize>,
    pub d_v: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma_snr: Option<f64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorParams {
    pub layers: Vec<usize>,
    pub heads: Vec<usize>,
    pub n: Vec<usize>,
    pub d_k: Vec<usize>,
    pub delta: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleParams {
    pub d_k: usize,
    pub d_v: usize,
    /// Random triples for the delta-rule overwrite check.
    pub trials: u64,
    /// Random sequences for the decay closed-form check.
    pub instances: u64,
    /// Steps of the Oja/Hebbian growth comparison.
    pub steps: u64,
    /// Learning rate of the growth comparison.
    pub alpha: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Equivalence(EquivalenceParams),
    Snr(SnrParams),
    Failure(FailureParams),
    Frontier(FrontierParams),
    Errors(ErrorParams),
    Rules(RuleParams),
    Chain,
}

impl Experiment {
    pub fn command(&self) -> Command {
        match self {
            Self::Equivalence(_) => Command::Equivalence,
            Self::Snr(_) => Command::Snr,
            Self::Failure(_) => Command::Failure,
            Self::Frontier(_) => Command::Frontier,
            Self::Errors(_) => Command::Errors,
            Self::Rules(_) => Command::Rules,
            Self::Chain => Command::Chain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Flat TOML document that parses back to `self`.
    pub fn emit(&self) -> String {
        toml::to_string(&FlatConfig::from_config(self)).expect("flat config always serializes")
    }

    /// The experiment-defining part of the config: `output` is left out so
    /// that the same run written to different paths is byte-identical.
    pub fn echo(&self) -> FlatConfig {
        let mut flat = FlatConfig::from_config(self);
        flat.output = None;
        flat
    }
}

/// Parse a flat TOML config document.
pub fn parse_config(text: &str) -> LabResult<RunConfig> {
    let flat: FlatConfig = toml::from_str(text)
        .map_err(|e| LabError::usage(format!("config file: {}", e.message())))?;
    flat.into_config()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

/// Seeds above `i64::MAX` do not fit a TOML integer and travel as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedRepr {
    Int(u64),
    Text(String),
}

impl SeedRepr {
    fn from_seed(seed: u64) -> Self {
        if seed <= i64::MAX as u64 {
            Self::Int(seed)
        } else {
            Self::Text(seed.to_string())
        }
    }

    fn value(&self) -> LabResult<u64> {
        match self {
            Self::Int(s) => Ok(*s),
            Self::Text(s) => s.parse().map_err(|_| {
                LabError::usage(format!("seed `{s}` is not a 64-bit unsigned integer"))
            }),
        }
    }
}

/// Key/value form shared by config files, the command line and the JSON echo.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedRepr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dk: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dv: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<OneOrMany<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_snr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heads: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

fn many<T>(v: &[T]) -> Option<OneOrMany<T>>
where
    T: Clone,
{
    Some(OneOrMany::Many(v.to_vec()))
}

impl FlatConfig {
    fn from_config(cfg: &RunConfig) -> Self {
        let mut f = FlatConfig {
            command: Some(cfg.experiment.command().name().into()),
            seed: Some(SeedRepr::from_seed(cfg.seed)),
            output: cfg.output.clone(),
            format: Some(cfg.format.name().into()),
            ..Default::default()
        };
        match &cfg.experiment {
            Experiment::Equivalence(p) => {
                f.instances = Some(p.instances);
                f.n = Some(OneOrMany::One(p.n));
                f.model_dim = Some(p.model_dim);
                f.head_dim = Some(p.head_dim);
            }
            Experiment::Snr(p) => {
                f.dk = many(&p.d_k);
                f.dv = p.d_v;
                f.n = many(&p.n);
                f.trials = Some(p.trials);
            }
            Experiment::Failure(p) => {
                f.dk = many(&p.d_k);
                f.dv = p.d_v;
                f.n = many(&p.n);
                f.delta = many(&p.delta);
                f.trials = Some(p.trials);
            }
            Experiment::Frontier(p) => {
                f.dk = many(&p.d_k);
                f.dv = p.d_v;
                f.epsilon = Some(p.epsilon);
                f.delta = Some(OneOrMany::One(p.delta));
                f.gamma_snr = p.gamma_snr;
                f.trials = Some(p.trials);
            }
            Experiment::Errors(p) => {
                f.layers = many(&p.layers);
                f.heads = many(&p.heads);
                f.n = many(&p.n);
                f.dk = many(&p.d_k);
                f.delta = Some(OneOrMany::One(p.delta));
                f.trials = Some(p.trials);
            }
            Experiment::Rules(p) => {
                f.dk = Some(OneOrMany::One(p.d_k));
                f.dv = Some(p.d_v);
                f.trials = Some(p.trials);
                f.instances = Some(p.instances);
                f.steps = Some(p.steps);
                f.alpha = Some(p.alpha);
                f.tau = Some(p.tau);
            }
            Experiment::Chain => {}
        }
        f
    }

    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut mark = |present: bool, name: &'static str| {
            if present {
                keys.push(name);
            }
        };
        mark(self.dk.is_some(), "dk");
        mark(self.dv.is_some(), "dv");
        mark(self.n.is_some(), "n");
        mark(self.delta.is_some(), "delta");
        mark(self.epsilon.is_some(), "epsilon");
        mark(self.gamma_snr.is_some(), "gamma_snr");
        mark(self.trials.is_some(), "trials");
        mark(self.instances.is_some(), "instances");
        mark(self.model_dim.is_some(), "model_dim");
        mark(self.head_dim.is_some(), "head_dim");
        mark(self.layers.is_some(), "layers");
        mark(self.heads.is_some(), "heads");
        mark(self.steps.is_some(), "steps");
        mark(self.alpha.is_some(), "alpha");
        mark(self.tau.is_some(), "tau");
        keys
    }

    /// Validate and apply per-command defaults.
    pub fn into_config(self) -> LabResult<RunConfig> {
        let command: Command = self
            .command
            .as_deref()
            .ok_or_else(|| LabError::usage("missing `command`"))?
            .parse()?;
        let seed = self
            .seed
            .as_ref()
            .ok_or_else(|| LabError::usage("missing seed (it is mandatory; pass --seed)"))?
            .value()?;
        for key in self.present_keys() {
            if !command.keys().contains(&key) {
                return Err(LabError::usage(format!(
                    "`{key}` does not apply to command `{command}`"
                )));
            }
        }
        let format = match &self.format {
            Some(s) => s.parse()?,
            None => Format::Csv,
        };
        let experiment = match command {
            Command::Equivalence => Experiment::Equivalence(EquivalenceParams {
                instances: positive_u64("instances", self.instances.unwrap_or(100))?,
                n: single("n", &self.n, 32)?,
                model_dim: positive("model_dim", self.model_dim.unwrap_or(16))?,
                head_dim: positive("head_dim", self.head_dim.unwrap_or(16))?,
            }),
            Command::Snr => {
                let n = positive_list("n", &self.n, &[17])?;
                if n.iter().any(|&x| x < 2) {
                    return Err(LabError::usage("n must be >= 2 (noise needs two pairs)"));
                }
                Experiment::Snr(SnrParams {
                    d_k: positive_list("dk", &self.dk, &[256])?,
                    d_v: self.dv.map(|v| positive("dv", v)).transpose()?,
                    n,
                    trials: positive_u64("trials", self.trials.unwrap_or(10_000))?,
                })
            }
            Command::Failure => Experiment::Failure(FailureParams {
                d_k: positive_list("dk", &self.dk, &[1000])?,
                d_v: self.dv.map(|v| positive("dv", v)).transpose()?,
                n: positive_list("n", &self.n, &[11])?,
                delta: self
                    .delta
                    .as_ref()
                    .map_or(vec![0.5], OneOrMany::to_vec)
                    .into_iter()
                    .map(|d| positive_real("delta", d))
                    .collect::<LabResult<_>>()?,
                trials: positive_u64("trials", self.trials.unwrap_or(10_000))?,
            }),
            Command::Frontier => {
                let d_k = positive_list("dk", &self.dk, &[64, 128, 256, 512, 1024])?;
                if d_k.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(LabError::usage(
                        "dk must be strictly ascending for the frontier",
                    ));
                }
                let epsilon = self.epsilon.unwrap_or(0.05);
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(LabError::usage("epsilon must lie in (0, 1)"));
                }
                Experiment::Frontier(FrontierParams {
                    d_k,
                    d_v: self.dv.map(|v| positive("dv", v)).transpose()?,
                    epsilon,
                    delta: positive_real("delta", single_real("delta", &self.delta, 0.5)?)?,
                    gamma_snr: self
                        .gamma_snr
                        .map(|g| positive_real("gamma_snr", g))
                        .transpose()?,
                    trials: positive_u64("trials", self.trials.unwrap_or(1000))?,
                })
            }
            Command::Errors => Experiment::Errors(ErrorParams {
                layers: positive_list("layers", &self.layers, &[1, 2, 4, 8])?,
                heads: positive_list("heads", &self.heads, &[1])?,
                n: positive_list("n", &self.n, &[16])?,
                d_k: positive_list("dk", &self.dk, &[512])?,
                delta: positive_real("delta", single_real("delta", &self.delta, 0.5)?)?,
                trials: positive_u64("trials", self.trials.unwrap_or(20_000))?,
            }),
            Command::Rules => {
                let alpha = self.alpha.unwrap_or(0.1);
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(LabError::usage("alpha must lie in (0, 1]"));
                }
                let steps = self.steps.unwrap_or(10_000);
                if steps < 100 {
                    return Err(LabError::usage("steps must be >= 100"));
                }
                Experiment::Rules(RuleParams {
                    d_k: single("dk", &self.dk, 16)?,
                    d_v: positive("dv", self.dv.unwrap_or(16))?,
                    trials: positive_u64("trials", self.trials.unwrap_or(1000))?,
                    instances: positive_u64("instances", self.instances.unwrap_or(100))?,
                    steps,
                    alpha,
                    tau: positive_real(
                        "tau",
                        self.tau.unwrap_or(pavlov_core::rules::DEFAULT_BCM_TAU),
                    )?,
                })
            }
            Command::Chain => Experiment::Chain,
        };
        Ok(RunConfig {
            experiment,
            seed,
            output: self.output,
            format,
        })
    }
}

fn positive(name: &str, v: usize) -> LabResult<usize> {
    if v == 0 {
        return Err(LabError::usage(format!("{name} must be >= 1")));
    }
    Ok(v)
}

fn positive_u64(name: &str, v: u64) -> LabResult<u64> {
    if v == 0 {
        return Err(LabError::usage(format!("{name} must be >= 1")));
    }
    Ok(v)
}

fn positive_real(name: &str, v: f64) -> LabResult<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(LabError::usage(format!(
            "{name} must be a positive finite number"
        )));
    }
    Ok(v)
}

fn positive_list(
    name: &str,
    v: &Option<OneOrMany<usize>>,
    default: &[usize],
) -> LabResult<Vec<usize>> {
    let list = v
        .as_ref()
        .map_or_else(|| default.to_vec(), OneOrMany::to_vec);
    if list.is_empty() {
        return Err(LabError::usage(format!("{name} needs at least one value")));
    }
    list.into_iter().map(|x| positive(name, x)).collect()
}

fn single(name: &str, v: &Option<OneOrMany<usize>>, default: usize) -> LabResult<usize> {
    match positive_list(name, v, &[default])?.as_slice() {
        [x] => Ok(*x),
        _ => Err(LabError::usage(format!("{name} takes a single value here"))),
    }
}

fn single_real(name: &str, v: &Option<OneOrMany<f64>>, default: f64) -> LabResult<f64> {
    match v
        .as_ref()
        .map_or_else(|| vec![default], OneOrMany::to_vec)
        .as_slice()
    {
        [x] => Ok(*x),
        _ => Err(LabError::usage(format!("{name} takes a single value here"))),
    }
}

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(
    name = "pavlov",
    version,
    about = "Associative-memory experiments on linear attention"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Sub>,
    /// Read the run configuration from a flat TOML file instead of flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: one per core). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Conditioning pipeline vs linear attention, batch vs recurrent kernels.
    Equivalence(Params),
    /// Signal and noise power of random associative memories.
    Snr(Params),
    /// Single and any-retrieval failure rates against their bounds.
    Failure(Params),
    /// Largest storable n per key dimension.
    Frontier(Params),
    /// Error propagation through stacked heads and layers.
    Errors(Params),
    /// Behavior checks of the plasticity rules.
    Rules(Params),
    /// Two-layer transitive chain demo.
    Chain(Params),
}

/// Experiment parameters. Each command accepts only its own subset.
#[derive(Debug, Default, Args)]
pub struct Params {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub dk: Option<Vec<usize>>,
    #[arg(long)]
    pub dv: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gamma_snr: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub instances: Option<u64>,
    #[arg(long)]
    pub model_dim: Option<usize>,
    #[arg(long)]
    pub head_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub heads: Option<Vec<usize>>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

impl Params {
    fn into_flat(self, command: Command) -> FlatConfig {
        FlatConfig {
            command: Some(command.name().into()),
            seed: self.seed.map(SeedRepr::Int),
            output: None,
            format: None,
            dk: self.dk.map(OneOrMany::Many),
            dv: self.dv,
            n: self.n.map(OneOrMany::Many),
            delta: self.delta.map(OneOrMany::Many),
            epsilon: self.epsilon,
            gamma_snr: self.gamma_snr,
            trials: self.trials,
            instances: self.instances,
            model_dim: self.model_dim,
            head_dim: self.head_dim,
            layers: self.layers.map(OneOrMany::Many),
            heads: self.heads.map(OneOrMany::Many),
            steps: self.steps,
            alpha: self.alpha,
            tau: self.tau,
        }
    }
}

/// A validated invocation: what to run and on how many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: RunConfig,
    pub threads: Option<usize>,
}

impl Cli {
    pub fn into_invocation(self) -> LabResult<Invocation> {
        if self.threads == Some(0) {
            return Err(LabError::usage("threads must be >= 1"));
        }
        let mut config = match (self.command, &self.config) {
            (Some(_), Some(_)) => {
                return Err(LabError::usage(
                    "give either a command or --config, not both",
                ))
            }
            (None, None) => return Err(LabError::usage("missing command (or --config FILE)")),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| LabError::io(format!("reading {}", path.display()), e))?;
                parse_config(&text)?
            }
            (Some(sub), None) => {
                let (command, params) = match sub {
                    Sub::Equivalence(p) => (Command::Equivalence, p),
                    Sub::Snr(p) => (Command::Snr, p),
                    Sub::Failure(p) => (Command::Failure, p),
                    Sub::Frontier(p) => (Command::Frontier, p),
                    Sub::Errors(p) => (Command::Errors, p),
                    Sub::Rules(p) => (Command::Rules, p),
                    Sub::Chain(p) => (Command::Chain, p),
                };
                params.into_flat(command).into_config()?
            }
        };
        if self.output.is_some() {
            config.output = self.output;
        }
        if let Some(f) = self.format {
            config.format = f;
        }
        Ok(Invocation {
            config,
            threads: self.threads,
        })
    }
}
