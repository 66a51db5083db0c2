//! JSON run configurations.
//!
//! ```json
//! { "command": "measure",
//!   "operator": { "gallery": "jacobi", "params": { "a": 0.7, "b": 0.3 } },
//!   "vector": "e1",
//!   "args": { "set": "(-0.5,0.5)", "n": 20 },
//!   "output": "out.csv", "seed": 0, "threads": 2 }
//! ```
//!
//! The configuration is turned into an argument list and parsed by the same
//! command-line grammar, so every option means the same thing in both places.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Parser;
use serde::Deserialize;

use crate::commands::{execute, Cli};
use crate::output::io_err;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum OperatorConfig {
    Gallery {
        gallery: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Matrix {
        matrix: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub operator: Option<OperatorConfig>,
    pub vector: Option<String>,
    #[serde(default)]
    pub args: BTreeMap<String, serde_json::Value>,
    pub output: Option<String>,
    /// Accepted for reproducibility records; no command draws random numbers.
    #[allow(dead_code)]
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn argv(&self) -> Result<Vec<String>, CliError> {
        if self.command == "run" {
            return Err(CliError::Config("a configuration cannot itself run a configuration".into()));
        }
        let mut v = vec!["specmeas".to_string()];
        if let Some(t) = self.threads {
            v.extend(["--threads".into(), t.to_string()]);
        }
        v.extend(self.command.split_whitespace().map(String::from));
        match &self.operator {
            Some(OperatorConfig::Gallery { gallery, params }) => {
                v.extend(["--op".into(), gallery.clone()]);
                if !params.is_empty() {
                    let p: Vec<String> = params.iter().map(|(k, x)| format!("{k}={x}")).collect();
                    v.extend(["--params".into(), p.join(",")]);
                }
            }
            Some(OperatorConfig::Matrix { matrix }) => v.extend(["--matrix".into(), matrix.clone()]),
            None => {}
        }
        if let Some(x) = &self.vector {
            v.extend(["--x".into(), x.clone()]);
        }
        for (k, val) in &self.args {
            let text = match val {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(true) => {
                    v.push(format!("--{k}"));
                    continue;
                }
                other => return Err(CliError::Config(format!("argument `{k}` has unsupported value {other}"))),
            };
            v.push(format!("--{k}"));
            v.push(text);
        }
        if let Some(o) = &self.output {
            v.extend(["--out".into(), o.clone()]);
        }
        Ok(v)
    }
}

pub fn run_config(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let cli = Cli::try_parse_from(cfg.argv()?).map_err(|e| CliError::Config(e.to_string().trim().to_string()))?;
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    execute(cli.command)
}
