use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

pub const RUN_CONFIG: &str = "run_config.json";

/// Invalid flag combinations or refused overwrites; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Creates `dir` and refuses to replace any of `files` unless `force`.
pub fn prepare_out(dir: &Path, files: &[&str], force: bool) -> anyhow::Result<()> {
    if !force {
        if let Some(f) = files.iter().find(|f| dir.join(f).exists()) {
            return Err(usage(format!(
                "{} already exists; pass --force to overwrite",
                dir.join(f).display()
            )));
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct RunConfig<'a, A: Serialize, R: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    args: &'a A,
    resolved: &'a R,
}

/// Records the fully resolved invocation next to its outputs.
pub fn write_run_config<A: Serialize, R: Serialize>(
    dir: &Path,
    subcommand: &str,
    args: &A,
    resolved: &R,
) -> anyhow::Result<PathBuf> {
    let path = dir.join(RUN_CONFIG);
    let cfg = RunConfig {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        args,
        resolved,
    };
    let text = serde_json::to_string_pretty(&cfg)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
