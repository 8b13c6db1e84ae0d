//! Output files with a metadata header, written all-or-nothing.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::spec::{Kind, Tolerances};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Free-form settings that shape the numbers (search budget, defaults).
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(kind: Kind, seed: Option<u64>, config_text: &str, tol: Tolerances) -> Self {
        Metadata {
            tool: "reigate",
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.name(),
            seed,
            config_sha256: hex(&Sha256::digest(config_text.as_bytes())),
            rel_tol: tol.rel_tol,
            abs_tol: tol.abs_tol,
            notes: Vec::new(),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// One finished output file.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// JSON document {"metadata": ..., "result": ...}; `created_unix` is the
/// only field that differs between identical runs.
pub fn json_artifact(name: &str, meta: &Metadata, result: &impl Serialize) -> Result<Artifact, CliError> {
    let mut m = serde_json::to_value(meta).map_err(|e| CliError::Output(e.to_string()))?;
    m["created_unix"] = json!(timestamp());
    let doc = json!({ "metadata": m, "result": result });
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.into(), bytes })
}

/// CSV body preceded by `# key: value` metadata lines.
pub fn csv_artifact(name: &str, meta: &Metadata, body: Vec<u8>) -> Result<Artifact, CliError> {
    let v = serde_json::to_value(meta).map_err(|e| CliError::Output(e.to_string()))?;
    let mut out = String::new();
    if let Value::Object(map) = v {
        for (k, v) in map {
            let s = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("# {k}: {s}\n"));
        }
    }
    out.push_str(&format!("# created_unix: {}\n", timestamp()));
    let mut bytes = out.into_bytes();
    bytes.extend(body);
    Ok(Artifact { name: name.into(), bytes })
}

/// Rows to CSV bytes.
pub fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Writes every artifact into a staging directory next to `out`, then moves
/// them in place. Nothing is left behind on failure.
pub fn commit(out: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    let staging = out.join(format!(".reigate-staging-{}", std::process::id()));
    let result = (|| {
        std::fs::create_dir_all(&staging)?;
        for a in artifacts {
            std::fs::write(staging.join(&a.name), &a.bytes)?;
        }
        let mut paths = Vec::new();
        for a in artifacts {
            let dst = out.join(&a.name);
            std::fs::rename(staging.join(&a.name), &dst)?;
            paths.push(dst);
        }
        Ok::<_, std::io::Error>(paths)
    })();
    let _ = std::fs::remove_dir_all(&staging);
    result.map_err(|e| CliError::Output(e.to_string()))
}
