use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{RunSummary, SUMMARY_FILE};
use crate::error::{Error, Result};
use crate::prob::ExtReal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Summary files found, relative to the scanned directory.
    pub sources: Vec<String>,
    pub runs: Vec<RunSummary>,
    pub checks: usize,
    pub applicable: usize,
    pub passed: usize,
    pub min_margin: Option<ExtReal>,
    pub all_passed: bool,
}

/// Collects `summary.json` from `dir` and its immediate subdirectories.
pub fn aggregate(dir: &Path) -> Result<AggregateReport> {
    let mut candidates = vec![dir.join(SUMMARY_FILE)];
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subdirs: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    candidates.extend(subdirs.into_iter().map(|d| d.join(SUMMARY_FILE)));

    let mut sources = Vec::new();
    let mut runs = Vec::new();
    for path in candidates.into_iter().filter(|p| p.is_file()) {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        runs.push(serde_json::from_str::<RunSummary>(&text)?);
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        sources.push(rel.to_string_lossy().into_owned());
    }
    if runs.is_empty() {
        return Err(Error::ConfigError(format!("no {SUMMARY_FILE} under {}", dir.display())));
    }
    let min_margin = runs
        .iter()
        .filter_map(|r| r.min_margin)
        .fold(None, |acc: Option<ExtReal>, m| match acc {
            Some(a) if a <= m => Some(a),
            _ => Some(m),
        });
    Ok(AggregateReport {
        sources,
        checks: runs.iter().map(|r| r.checks).sum(),
        applicable: runs.iter().map(|r| r.applicable).sum(),
        passed: runs.iter().map(|r| r.passed).sum(),
        all_passed: runs.iter().all(RunSummary::all_passed),
        min_margin,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig, Family};

    #[test]
    fn aggregates_nested_runs() {
        let dir = tempfile::tempdir().unwrap();
        for (name, family) in [("p", Family::Protocols), ("l", Family::Lemmas)] {
            let mut c = ExperimentConfig::new(family, 1, 3);
            c.out_dir = Some(dir.path().join(name));
            run_experiment(&c).unwrap();
        }
        let r = aggregate(dir.path()).unwrap();
        assert_eq!(r.sources, vec!["l/summary.json", "p/summary.json"]);
        assert!(r.all_passed && r.passed == r.applicable);
        assert!(aggregate(&dir.path().join("l").join("nothing")).is_err());
    }
}
