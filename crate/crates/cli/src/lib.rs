//! `qsrt` command line: gap scans, chain runs, bound evaluation and the
//! reference-value report, each writing CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod format;
pub mod reproduce;

use std::path::{Path, PathBuf};

pub use commands::{run, Cli, Command};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Core(#[from] qsrt_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            _ => 3,
        }
    }

    /// Error name printed on standard error.
    pub fn name(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::Core(e) => e.name(),
            CliError::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Treats a library error raised while building inputs as bad configuration.
pub(crate) fn invalid(e: qsrt_core::Error) -> CliError {
    CliError::ConfigInvalid(format!("{}: {e}", e.name()))
}

/// Caps the rayon pool from `QSRT_SIM_THREADS`.
pub fn configure_threads(value: Option<&str>) -> CliResult<()> {
    let Some(raw) = value else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::ConfigInvalid(format!("QSRT_SIM_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))
}

/// Output files `{dir}/{command}-{tag}.{ext}`.
#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, tag: &str) -> CliResult<Self> {
        if tag.is_empty() || tag.contains(['/', '\\']) || tag.starts_with('.') {
            return Err(CliError::ConfigInvalid(format!("tag {tag:?} is not a plain file-name fragment")));
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: format!("{command}-{tag}"),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    /// Writes `contents` to the artifact with this suffix (e.g. `.csv`).
    pub fn write(&self, suffix: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(suffix);
        std::fs::write(&path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }

    pub fn write_json(&self, value: &serde_json::Value) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write(".json", &text)
    }
}
