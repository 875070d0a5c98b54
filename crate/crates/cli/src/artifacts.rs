//! Output files. Every CSV starts with `# config_hash=<hex>`; every JSON
//! document carries a top-level `config_hash`.

use std::path::{Path, PathBuf};

use crate::config::CampaignConfig;
use crate::error::CliError;

pub const HASH_PREFIX: &str = "# config_hash=";

#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    hash: String,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(config: &CampaignConfig) -> Result<Self, CliError> {
        let dir = config.output_path();
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir, stem: config.stem(), hash: config.hash(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn file_name(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.stem)
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(self.file_name(suffix))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, suffix: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `<stem>_<suffix>` as the hash line followed by `body`.
    pub fn csv(&mut self, suffix: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("{HASH_PREFIX}{}\n{body}", self.hash);
        self.write(suffix, &text)
    }

    /// Writes `<stem>_<suffix>` as pretty JSON with `config_hash` added.
    pub fn json(&mut self, suffix: &str, mut value: serde_json::Value) -> Result<PathBuf, CliError> {
        match value.as_object_mut() {
            Some(map) => {
                map.insert("config_hash".into(), self.hash.clone().into());
            }
            None => value = serde_json::json!({ "config_hash": self.hash, "data": value }),
        }
        let mut text = serde_json::to_string_pretty(&value).expect("json serializes");
        text.push('\n');
        self.write(suffix, &text)
    }
}

/// Config hash embedded in an artifact, if any.
pub fn embedded_hash(path: &Path) -> Result<Option<String>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
        return Ok(v.get("config_hash").and_then(|h| h.as_str()).map(String::from));
    }
    Ok(text.lines().next().and_then(|l| l.strip_prefix(HASH_PREFIX)).map(String::from))
}

/// Reads a CSV artifact, skipping `#` lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}
