use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{input, Outcome};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to rerun a command: the argument vector, the resolved
/// configuration, and digests of what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub cwd: PathBuf,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputFile>,
    /// Lockstep runs reproduce their outputs byte for byte.
    pub deterministic: bool,
    pub timings_s: BTreeMap<String, f64>,
    pub exit_code: u8,
}

/// Output directory plus the manifest being assembled for it.
pub struct Run {
    dir: PathBuf,
    started: Instant,
    pub manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, args: Vec<String>, dir: &Path) -> Outcome<Self> {
        std::fs::create_dir_all(dir).map_err(input(format!("creating {}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                args,
                cwd: std::env::current_dir().unwrap_or_default(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::Value::Null,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                deterministic: true,
                timings_s: BTreeMap::new(),
                exit_code: 0,
            },
        })
    }

    pub fn config<T: Serialize>(&mut self, value: &T) {
        self.manifest.config = serde_json::to_value(value).expect("config serialises");
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    pub fn input(&mut self, what: impl Into<String>) {
        self.manifest.inputs.push(what.into());
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest
            .timings_s
            .insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Outcome {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(input(format!("writing {}", path.display())))?;
        self.manifest.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: digest(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn finish(mut self, exit_code: u8) -> Outcome<RunManifest> {
        self.manifest.exit_code = exit_code;
        self.manifest
            .timings_s
            .insert("total".into(), self.started.elapsed().as_secs_f64());
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text + "\n").map_err(input(format!("writing {}", path.display())))?;
        Ok(self.manifest)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read(path: &Path) -> Outcome<RunManifest> {
    let text =
        std::fs::read_to_string(path).map_err(input(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(input(format!("parsing {}", path.display())))
}
