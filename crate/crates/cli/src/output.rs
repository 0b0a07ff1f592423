use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Formats `x` with 9 significant digits, trailing zeros removed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn round9(x: f64) -> f64 {
    sig9(x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to 9 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::json!(round9(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

/// Collects what a run read and wrote; `finish` writes the manifest.
pub struct Run {
    command: &'static str,
    started: Instant,
    inputs: Vec<InputFile>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Run { command, started: Instant::now(), inputs: Vec::new(), outputs: Vec::new(), seed: None }
    }

    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| crate::Invalid(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputFile { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Creates `path` for writing and records it as an output.
    pub fn create(&mut self, path: &Path) -> Result<fs::File> {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(file)
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        write_json(path, value)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes the manifest next to `primary`. The digest covers the
    /// command, its settings and the input hashes, but no file names.
    pub fn finish(self, primary: &Path, settings: &impl Serialize) -> Result<PathBuf> {
        let mut settings = serde_json::to_value(settings)?;
        strip_paths(&mut settings);
        let digest_src = serde_json::json!({
            "command": self.command,
            "settings": settings,
            "inputs": self.inputs.iter().map(|i| &i.sha256).collect::<Vec<_>>(),
        });
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: self.command.to_string(),
            inputs: self.inputs,
            config_digest: sha256_hex(serde_json::to_string(&digest_src)?.as_bytes()),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let path = manifest_path(primary);
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

const PATH_FIELDS: [&str; 5] = ["input", "config", "out", "svg", "trace"];

fn strip_paths(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !PATH_FIELDS.contains(&k.as_str()));
            map.values_mut().for_each(strip_paths);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_paths),
        _ => {}
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}
