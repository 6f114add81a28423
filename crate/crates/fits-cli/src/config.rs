//! Strict config-document handling and artifact plumbing shared by every
//! subcommand.
//!
//! Configs are single JSON objects checked against an explicit key
//! schema before anything is computed: every missing required key and
//! every unknown key is collected and reported in one error. Artifacts
//! are written through [`OutDir`] so all output lands under `--out`, and
//! [`write_summary`] confines the run timestamp to `meta.generated_unix`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fits_core::{Error, Result};
use serde_json::{Map, Value};

/// Everything a subcommand needs: the parsed config document, the
/// output directory, and the optional seed override from `--seed`.
pub struct Ctx {
    pub config: Value,
    pub out: OutDir,
    pub seed: Option<u64>,
}

impl Ctx {
    pub fn prepare(
        config: Option<PathBuf>,
        out: Option<PathBuf>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let config_path =
            config.ok_or_else(|| Error::Config("--config <PATH> is required".to_string()))?;
        let out_path = out.ok_or_else(|| Error::Config("--out <DIR> is required".to_string()))?;
        let text = fs::read_to_string(&config_path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", config_path.display()))
        })?;
        let config: Value = serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!("config {} is not valid JSON: {e}", config_path.display()))
        })?;
        if !config.is_object() {
            return Err(Error::Config("config document must be a JSON object".to_string()));
        }
        Ok(Self { config, out: OutDir::create(&out_path)?, seed })
    }
}

/// Key schema of one JSON object.
pub struct Keys {
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
}

/// Records, under `path`, every missing required key and every unknown
/// key of `v`. Returns the object's map so callers can descend into
/// nested objects with their own schemas.
pub fn check_keys<'v>(
    v: &'v Value,
    path: &str,
    keys: &Keys,
    problems: &mut Vec<String>,
) -> Option<&'v Map<String, Value>> {
    let Some(obj) = v.as_object() else {
        problems.push(format!("{path} must be a JSON object"));
        return None;
    };
    for &k in keys.required {
        if !obj.contains_key(k) {
            problems.push(format!("missing required key {path}.{k}"));
        }
    }
    for k in obj.keys() {
        if !keys.required.contains(&k.as_str()) && !keys.optional.contains(&k.as_str()) {
            problems.push(format!("unknown key {path}.{k}"));
        }
    }
    Some(obj)
}

/// Finishes a strict check: empty means the schema held, otherwise all
/// collected violations become one configuration error.
pub fn finish(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

/// Deserializes a (sub)document after its key schema has been checked.
pub fn parse<T: serde::de::DeserializeOwned>(v: &Value, what: &str) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::Config(format!("config: {what}: {e}")))
}

/// The `--out` directory; all artifacts are written through it.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| {
            Error::Config(format!("cannot create output directory {}: {e}", path.display()))
        })?;
        Ok(Self { root: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, body: &str) -> Result<()> {
        let p = self.join(name);
        fs::write(&p, body)?;
        log::info!("wrote {}", p.display());
        Ok(())
    }
}

/// Writes `summary.json`: the caller's fields plus a `meta` object with
/// the command name, package version, the effective seed when the
/// command uses one, and `generated_unix` — the only timestamp in any
/// artifact.
pub fn write_summary(
    out: &OutDir,
    command: &str,
    seed: Option<u64>,
    mut body: Map<String, Value>,
) -> Result<()> {
    let mut meta = Map::new();
    meta.insert("command".to_string(), Value::from(command));
    meta.insert("generated_unix".to_string(), Value::from(unix_now()));
    meta.insert("version".to_string(), Value::from(env!("CARGO_PKG_VERSION")));
    if let Some(s) = seed {
        meta.insert("seed".to_string(), Value::from(s));
    }
    body.insert("meta".to_string(), Value::Object(meta));
    let text = serde_json::to_string_pretty(&Value::Object(body))? + "\n";
    out.write("summary.json", &text)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Empty cell for an absent value; floats print in the shortest
/// round-trip form either way.
pub fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
