//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use dzip::InnovationModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Fit,
    Forecast,
    Backtest,
    Simulate,
    Report,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CommandKind::Fit => "fit",
            CommandKind::Forecast => "forecast",
            CommandKind::Backtest => "backtest",
            CommandKind::Simulate => "simulate",
            CommandKind::Report => "report",
        };
        f.write_str(name)
    }
}

/// Fully resolved settings of one run. Stored in the run metadata so that
/// the run can be repeated from that file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub models: Vec<InnovationModel>,
    pub burn: usize,
    pub draws: usize,
    pub windows: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub conditional: bool,
    pub svg: bool,
    pub length: usize,
    pub pi: f64,
    pub z0: f64,
    pub threads: Option<usize>,
}

/// Settings that may come from a config file or the command line. `None`
/// leaves the lower-priority source in effect.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub models: Option<Vec<InnovationModel>>,
    pub burn: Option<usize>,
    pub draws: Option<usize>,
    pub windows: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub conditional: Option<bool>,
    pub svg: Option<bool>,
    pub length: Option<usize>,
    pub pi: Option<f64>,
    pub z0: Option<f64>,
    pub threads: Option<usize>,
}

impl Overrides {
    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: Overrides) -> Overrides {
        Overrides {
            input: other.input.or(self.input),
            models: other.models.or(self.models),
            burn: other.burn.or(self.burn),
            draws: other.draws.or(self.draws),
            windows: other.windows.or(self.windows),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            conditional: other.conditional.or(self.conditional),
            svg: other.svg.or(self.svg),
            length: other.length.or(self.length),
            pi: other.pi.or(self.pi),
            z0: other.z0.or(self.z0),
            threads: other.threads.or(self.threads),
        }
    }
}

pub fn parse_models(value: &str) -> Result<Vec<InnovationModel>, CliError> {
    if value.trim() == "all" {
        return Ok(InnovationModel::ALL.to_vec());
    }
    value
        .split(',')
        .map(|m| InnovationModel::from_str(m).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{value}`")))
}

/// Parse a flat config file: one `key = value` per line, `#` comments.
/// Keys are the long flag names, with `-` or `_`.
pub fn parse_config_text(text: &str) -> Result<Overrides, CliError> {
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if seen.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }

    let mut o = Overrides::default();
    for (key, value) in &seen {
        let v = value.as_str();
        match key.as_str() {
            "input" => o.input = Some(PathBuf::from(v)),
            "model" | "models" => o.models = Some(parse_models(v)?),
            "burn" => o.burn = Some(parse_value(key, v)?),
            "draws" => o.draws = Some(parse_value(key, v)?),
            "windows" => o.windows = Some(parse_value(key, v)?),
            "seed" => o.seed = Some(parse_value(key, v)?),
            "out" => o.out = Some(PathBuf::from(v)),
            "conditional" => o.conditional = Some(parse_value(key, v)?),
            "unconditional" => o.conditional = Some(!parse_value::<bool>(key, v)?),
            "svg" => o.svg = Some(parse_value(key, v)?),
            "length" => o.length = Some(parse_value(key, v)?),
            "pi" => o.pi = Some(parse_value(key, v)?),
            "z0" => o.z0 = Some(parse_value(key, v)?),
            "threads" => o.threads = Some(parse_value(key, v)?),
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
    }
    Ok(o)
}

pub fn read_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text)
}

impl RunConfig {
    pub fn resolve(command: CommandKind, o: Overrides) -> Result<RunConfig, CliError> {
        let default_models = match command {
            CommandKind::Backtest => InnovationModel::ALL.to_vec(),
            _ => vec![InnovationModel::StochVol],
        };
        let mcmc = dzip::McmcConfig::default();
        let config = RunConfig {
            command,
            input: o.input,
            models: o.models.unwrap_or(default_models),
            burn: o.burn.unwrap_or(mcmc.n_burn),
            draws: o.draws.unwrap_or(mcmc.n_draws),
            windows: o.windows.unwrap_or(dzip::backtest::DEFAULT_WINDOWS),
            seed: o.seed.unwrap_or(0),
            out: o.out.unwrap_or_else(|| PathBuf::from("dzip-out")),
            conditional: o.conditional.unwrap_or(command != CommandKind::Forecast),
            svg: o.svg.unwrap_or(false),
            length: o.length.unwrap_or(400),
            pi: o.pi.unwrap_or(0.95),
            z0: o.z0.unwrap_or(50f64.ln()),
            threads: o.threads,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let needs_input = self.command != CommandKind::Simulate;
        if needs_input && self.input.is_none() {
            return usage(format!("`{}` needs --input", self.command));
        }
        if let Some(input) = &self.input {
            if needs_input && !input.is_file() {
                return usage(format!("input file {} does not exist", input.display()));
            }
        }
        if self.models.is_empty() {
            return usage("no model selected".into());
        }
        let single = matches!(
            self.command,
            CommandKind::Fit | CommandKind::Forecast | CommandKind::Simulate
        );
        if single && self.models.len() != 1 {
            return usage(format!("`{}` takes exactly one --model", self.command));
        }
        if self.draws == 0 {
            return usage("--draws must be positive".into());
        }
        if self.windows == 0 {
            return usage("--windows must be positive".into());
        }
        if self.threads == Some(0) {
            return usage("threads must be positive".into());
        }
        Ok(())
    }

    /// The single model of `fit`, `forecast` and `simulate`.
    pub fn model(&self) -> InnovationModel {
        self.models[0]
    }

    pub fn mcmc(&self, model: InnovationModel) -> dzip::McmcConfig {
        dzip::McmcConfig {
            n_burn: self.burn,
            n_draws: self.draws,
            seed: self.seed,
            model,
            ..dzip::McmcConfig::default()
        }
    }
}
