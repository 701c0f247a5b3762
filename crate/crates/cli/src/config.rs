//! Experiment configuration: JSON file, then `KLMDP_*` environment
//! overrides, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{read, CliError, Result};

/// Prefix of the environment variables that override config fields.
pub const ENV_PREFIX: &str = "KLMDP_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Grid { rows: usize, cols: usize },
    /// Edge-list file; relative paths resolve against the working directory.
    EdgeListPath(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub horizon: usize,
    pub epsilon: f64,
    pub stay_prob: f64,
    pub delta: f64,
    pub home: usize,
    pub start: usize,
    pub runs: usize,
    pub pool_size: usize,
    pub base_seed: u64,
    pub dirichlet_alpha: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSource::Grid { rows: 10, cols: 10 },
            horizon: 1000,
            epsilon: klmdp::online::DEFAULT_EPSILON,
            stay_prob: klmdp::world::DEFAULT_STAY_PROB,
            delta: klmdp::world::DEFAULT_DELTA,
            home: 0,
            start: 0,
            runs: 100,
            pool_size: 1000,
            base_seed: 0,
            dirichlet_alpha: 1.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

const FIELDS: &[&str] = &[
    "graph",
    "horizon",
    "epsilon",
    "stay_prob",
    "delta",
    "home",
    "start",
    "runs",
    "pool_size",
    "base_seed",
    "dirichlet_alpha",
    "output_dir",
];

impl ExperimentConfig {
    /// Parses a JSON document, applying overrides from `vars` (name, value)
    /// pairs whose names start with [`ENV_PREFIX`]. Override values are read
    /// as JSON when they parse, otherwise as plain strings.
    pub fn from_json<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
        apply_overrides(obj, vars)?;
        serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    /// Reads `path` (or starts from `{}`) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => read(p)?,
            None => "{}".to_string(),
        };
        Self::from_json(&text, std::env::vars())
    }

    pub fn graph(&self) -> Result<klmdp::Graph> {
        match &self.graph {
            GraphSource::Grid { rows, cols } => Ok(klmdp::world::grid_graph(*rows, *cols)?),
            GraphSource::EdgeListPath(path) => {
                klmdp::world::load_graph(&read(path)?).map_err(|e| CliError::from_core(Some(path), e))
            }
        }
    }

    pub fn settings(&self) -> Result<klmdp::ExperimentSettings> {
        let mut s = klmdp::ExperimentSettings::new(self.graph()?);
        s.horizon = self.horizon;
        s.epsilon = self.epsilon;
        s.stay_prob = self.stay_prob;
        s.delta = self.delta;
        s.home = self.home;
        s.start = self.start;
        s.pool_size = self.pool_size;
        s.dirichlet_alpha = self.dirichlet_alpha;
        Ok(s)
    }
}

fn apply_overrides<I>(obj: &mut Map<String, Value>, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let field = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        if !FIELDS.contains(&field.as_str()) {
            return Err(CliError::Config(format!("{name}: no config field `{field}`")));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        obj.insert(field, value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}", no_env()).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn fields_and_graph_sources_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"horizon": 10, "graph": {"edge_list_path": "g.txt"}, "runs": 1}"#,
            no_env(),
        )
        .unwrap();
        assert_eq!(c.horizon, 10);
        assert_eq!(c.graph, GraphSource::EdgeListPath("g.txt".into()));
        let c = ExperimentConfig::from_json(r#"{"graph": {"grid": {"rows": 3, "cols": 4}}}"#, no_env()).unwrap();
        assert_eq!(c.graph().unwrap().n(), 12);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"horizon": "long"}"#, no_env()).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"graph": {"grid": {"rows": 3}}}"#, no_env()).unwrap_err();
        assert!(err.to_string().contains("graph"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"horizn": 5}"#, no_env()).unwrap_err();
        assert!(err.to_string().contains("horizn"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn environment_overrides_file() {
        let vars = vec![
            ("KLMDP_HORIZON".to_string(), "20".to_string()),
            ("KLMDP_OUTPUT_DIR".to_string(), "elsewhere".to_string()),
            ("KLMDP_GRAPH".to_string(), r#"{"grid":{"rows":2,"cols":2}}"#.to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        let c = ExperimentConfig::from_json(r#"{"horizon": 10}"#, vars).unwrap();
        assert_eq!(c.horizon, 20);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.graph, GraphSource::Grid { rows: 2, cols: 2 });

        let bad = vec![("KLMDP_HORIZON".to_string(), "-3".to_string())];
        let err = ExperimentConfig::from_json("{}", bad).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
        let unknown = vec![("KLMDP_NOPE".to_string(), "1".to_string())];
        assert!(ExperimentConfig::from_json("{}", unknown).is_err());
    }
}
