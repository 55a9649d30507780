//! Experiment configuration file. Every section is optional; command-line
//! flags override whatever the file sets.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qsrt_core::engine::SweepOrder;
use qsrt_core::models::ProblemInstance;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    GapScan,
    QsrtRun,
    SearchDemo,
    MinfindDemo,
    FactorDemo,
    ErrorBound,
    ScalingFit,
    ReproducePaper,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::GapScan => "gap-scan",
            CommandName::QsrtRun => "qsrt-run",
            CommandName::SearchDemo => "search-demo",
            CommandName::MinfindDemo => "minfind-demo",
            CommandName::FactorDemo => "factor-demo",
            CommandName::ErrorBound => "error-bound",
            CommandName::ScalingFit => "scaling-fit",
            CommandName::ReproducePaper => "reproduce-paper",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            CommandName::QsrtRun | CommandName::SearchDemo | CommandName::MinfindDemo | CommandName::FactorDemo
        )
    }
}

/// Which gap problem `gap-scan` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScanCase {
    /// Single marked item.
    A,
    /// Minimum-finding table.
    B,
    /// Unique zero on a plateau at `n − 1`.
    C,
    /// Large-N step-pair matrix, swept over `f`.
    Stepwise,
    /// The problem instance from `--instance` or the config file.
    Instance,
}

impl ScanCase {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanCase::A => "a",
            ScanCase::B => "b",
            ScanCase::C => "c",
            ScanCase::Stepwise => "stepwise",
            ScanCase::Instance => "instance",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct EngineSettings {
    pub coupling: Option<f64>,
    pub overlap_estimate: Option<f64>,
    pub window_points: Option<usize>,
    pub max_iters_per_frequency: Option<usize>,
    pub max_step_iters: Option<u64>,
    pub target_accuracy: Option<f64>,
    pub sweep: Option<SweepOrder>,
    pub dense_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ScanSettings {
    pub case: Option<ScanCase>,
    pub n: Option<u32>,
    pub f: Option<Vec<f64>>,
    pub ratio: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct BoundSettings {
    pub gap_prev: Option<f64>,
    pub gap_curr: Option<f64>,
    pub overlap: Option<f64>,
    pub alpha: Option<f64>,
    pub coupling: Option<f64>,
    pub a_max: Option<f64>,
    pub steps: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSettings {
    #[serde(rename = "Z")]
    pub modulus: Option<u64>,
    #[serde(rename = "a")]
    pub base: Option<u64>,
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSettings {
    pub n: Option<u32>,
    pub marked: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub command: Option<CommandName>,
    pub problem: Option<ProblemInstance>,
    #[serde(default)]
    pub engine: EngineSettings,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tag: Option<String>,
    #[serde(default)]
    pub scan: ScanSettings,
    #[serde(default)]
    pub bound: BoundSettings,
    #[serde(default)]
    pub factor: FactorSettings,
    #[serde(default)]
    pub demo: DemoSettings,
    #[serde(default)]
    pub fit: FitSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigInvalid(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Reads a problem instance document and checks it.
pub fn load_instance(path: &Path) -> CliResult<ProblemInstance> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigInvalid(format!("reading {}: {e}", path.display())))?;
    let inst: ProblemInstance =
        serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("instance: {e}")))?;
    inst.validate().map_err(crate::invalid)?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"seed": 1, "sead": 2}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::from_json(r#"{"engine": {"coupling": 0.1, "copling": 2}}"#).unwrap_err();
        assert!(err.to_string().contains("copling"));
    }

    #[test]
    fn full_document_parses() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "qsrt-run",
                "seed": 7,
                "problem": {"kind": "search", "n": 3, "N": 8,
                            "levels": [{"value": 0, "degeneracy": 1}, {"value": 1, "degeneracy": 7}],
                            "params": {"marked": 1}},
                "engine": {"coupling": 0.01, "sweep": "center-out", "denseCap": 64},
                "scan": {"case": "stepwise", "f": [0.01, 0.001]},
                "factor": {"Z": 15, "a": 2}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(CommandName::QsrtRun));
        assert_eq!(cfg.engine.sweep, Some(SweepOrder::CenterOut));
        assert_eq!(cfg.scan.case, Some(ScanCase::Stepwise));
        assert_eq!(cfg.factor.modulus, Some(15));
        assert_eq!(cfg.problem.unwrap().size, 8);
    }
}
