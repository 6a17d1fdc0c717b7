use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Written next to every result file as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub reps: Option<u64>,
    pub version: &'static str,
    pub scenarios: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, out: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.map(Path::to_path_buf),
            out: out.to_path_buf(),
            seed: None,
            workers: None,
            reps: None,
            version: env!("CARGO_PKG_VERSION"),
            scenarios: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in &self.scenarios {
            if !seen.insert(id) {
                bail!("scenario {id:?} appears twice in the run");
            }
        }
        Ok(())
    }
}

/// Where a command's primary output goes: a file under `--out`, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    /// Write `bytes` to `name` under the output directory, or to stdout.
    pub fn emit(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    /// Record the manifest; only meaningful with an output directory.
    pub fn manifest(&self, m: &RunManifest) -> Result<()> {
        m.validate()?;
        if let Some(d) = &self.dir {
            let path = d.join("manifest.json");
            let mut text = serde_json::to_string_pretty(m)?;
            text.push('\n');
            fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

/// Plain CSV writer over rows of already formatted cells.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
