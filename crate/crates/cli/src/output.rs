use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Infeasible(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Infeasible(m) => f.write_str(m),
        }
    }
}

impl From<qbc_core::Error> for CliError {
    fn from(e: qbc_core::Error) -> Self {
        if e.is_infeasible() {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read `{}`: {e}", path.display())))
}

/// What identifies a run: command, its arguments, the contents of every
/// input file, the seed and the tool version.
pub struct Manifest {
    command: &'static str,
    config: Value,
    inputs: Vec<(String, String)>,
    pub seed: u64,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &'static str, args: &T, seed: u64) -> Self {
        Manifest {
            command,
            config: serde_json::to_value(args).unwrap_or(Value::Null),
            inputs: Vec::new(),
            seed,
        }
    }

    /// Records an input file by content digest.
    pub fn input(&mut self, path: &Path, contents: &str) {
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(contents.as_bytes()))));
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn identity(&self) -> Value {
        let inputs: Vec<Value> = self.inputs.iter().map(|(_, d)| Value::String(d.clone())).collect();
        json!({
            "command": self.command,
            "config": self.config,
            "inputs": inputs,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.identity().to_string().as_bytes()))
    }

    pub fn command(&self) -> &'static str {
        self.command
    }
}

pub enum Produced {
    Json(Value),
    /// Header row and records, already formatted.
    Csv(Vec<String>, Vec<Vec<String>>),
}

fn render(produced: Produced, manifest: &Manifest) -> Result<String, CliError> {
    match produced {
        Produced::Json(result) => {
            let doc = json!({
                "command": manifest.command(),
                "manifest_hash": manifest.hash(),
                "seed": manifest.seed,
                "version": env!("CARGO_PKG_VERSION"),
                "result": result,
            });
            Ok(qbc_core::io::to_json_string(&doc)?)
        }
        Produced::Csv(header, rows) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
            w.write_record(&header).map_err(err)?;
            for r in rows {
                w.write_record(&r).map_err(err)?;
            }
            let body = w.into_inner().map_err(|e| CliError::Validation(format!("csv: {e}")))?;
            Ok(format!("# manifest_hash={}\n{}", manifest.hash(), String::from_utf8_lossy(&body)))
        }
    }
}

pub fn emit(out: Option<&Path>, produced: Produced, manifest: &Manifest, wall: Duration) -> Result<(), CliError> {
    let body = render(produced, manifest)?;
    match out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => {
            let write = |p: &Path, s: &str| {
                fs::write(p, s).map_err(|e| CliError::Validation(format!("cannot write `{}`: {e}", p.display())))
            };
            write(path, &body)?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".manifest.json");
            let sidecar = std::path::PathBuf::from(sidecar);
            let mut doc = manifest.identity();
            doc["manifest_hash"] = Value::String(manifest.hash());
            doc["wall_time_s"] = json!(wall.as_secs_f64());
            doc["outputs"] = json!([path.display().to_string()]);
            doc["input_files"] = json!(manifest.inputs.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>());
            write(&sidecar, &qbc_core::io::to_json_string(&doc)?)
        }
    }
}
