//! Stored Pareto fronts used to seed adaption runs.
//!
//! The on-disk form is pretty-printed JSON terminated by a newline. Field
//! order is fixed by the struct definitions, and floats are written in their
//! shortest round-tripping form, so write -> read -> write is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nsga2::AlgoConfig;
use crate::oxley::PROCESS_BOUNDS;
use crate::task::ObjectiveVector;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmTag {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "varying-goals")]
    VaryingGoals,
    #[serde(rename = "varying-goals+active-inactive")]
    VaryingGoalsActiveInactive,
}

impl AlgorithmTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmTag::Baseline => "baseline",
            AlgorithmTag::VaryingGoals => "varying-goals",
            AlgorithmTag::VaryingGoalsActiveInactive => "varying-goals+active-inactive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenotypeKind {
    Plain,
    ActiveInactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genotype: Vec<f64>,
    /// `[cutting_speed, cutting_angle, cutting_depth]`.
    pub phenotype: Vec<f64>,
    /// Raw objectives on the task that was current at capture.
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub format_version: u32,
    /// One material, or the ordered goal list of a varying-goals run.
    pub tasks: Vec<String>,
    pub algorithm: AlgorithmTag,
    pub genotype_kind: GenotypeKind,
    /// Slots per gene; 1 for the plain genotype.
    pub gene_length: usize,
    pub config: AlgoConfig,
    pub seed: u64,
    pub individuals: Vec<ArchiveEntry>,
    pub best_hypervolume: f64,
    /// Generation at which the front was captured (0 = initial population).
    pub generation: u64,
    /// Evaluations consumed when the front was captured.
    pub evaluations: u64,
}

impl ParetoArchive {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize archive: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::schema(origin, e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::schema(
                    origin,
                    format!("format_version {v} is not supported (expected {FORMAT_VERSION})"),
                ))
            }
            None => return Err(Error::schema(origin, "missing format_version")),
        }
        let archive: ParetoArchive =
            serde_json::from_value(value).map_err(|e| Error::schema(origin, e.to_string()))?;
        archive.check().map_err(|m| Error::schema(origin, m))?;
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn phenotypes(&self) -> Vec<Vec<f64>> {
        self.individuals.iter().map(|e| e.phenotype.clone()).collect()
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.individuals.is_empty() {
            return Err("archive holds no individuals".into());
        }
        if self.gene_length == 0 {
            return Err("gene_length must be at least 1".into());
        }
        for (i, e) in self.individuals.iter().enumerate() {
            if e.phenotype.len() != PROCESS_BOUNDS.len() {
                return Err(format!("individual {i}: phenotype length {}", e.phenotype.len()));
            }
            if !e.phenotype.iter().zip(PROCESS_BOUNDS).all(|(x, b)| b.contains(*x)) {
                return Err(format!("individual {i}: phenotype outside the parameter box"));
            }
        }
        Ok(())
    }
}
