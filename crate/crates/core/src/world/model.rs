use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::Pmf;

/// Outcome, policy and environment spaces. `environments[e][π]` is the
/// outcome distribution of policy `π` in environment `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct FiniteModel {
    n_outcomes: usize,
    n_policies: usize,
    environments: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct RawModel {
    n_outcomes: usize,
    n_policies: usize,
    environments: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<RawModel> for FiniteModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        FiniteModel::new(raw.n_outcomes, raw.n_policies, raw.environments)
    }
}

impl FiniteModel {
    pub fn new(n_outcomes: usize, n_policies: usize, environments: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if n_outcomes == 0 || n_policies == 0 || environments.is_empty() {
            return Err(Error::DimensionMismatch(
                "outcome, policy and environment counts must be positive".into(),
            ));
        }
        for (e, env) in environments.iter().enumerate() {
            if env.len() != n_policies {
                return Err(Error::DimensionMismatch(format!(
                    "environment {e} has {} rows, expected {n_policies}",
                    env.len()
                )));
            }
            for (p, row) in env.iter().enumerate() {
                if row.len() != n_outcomes {
                    return Err(Error::DimensionMismatch(format!(
                        "environment {e} policy {p} has {} entries, expected {n_outcomes}",
                        row.len()
                    )));
                }
                Pmf::new(row.clone())?;
            }
        }
        Ok(FiniteModel {
            n_outcomes,
            n_policies,
            environments,
        })
    }

    /// A single deterministic environment where policy `i` yields outcome `i`.
    pub fn identity(n: usize) -> Result<Self> {
        let env = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        FiniteModel::new(n, n, vec![env])
    }

    /// Deterministic environments given as `targets[e][π]` = outcome index.
    pub fn deterministic(n_outcomes: usize, targets: &[Vec<usize>]) -> Result<Self> {
        let n_policies = targets.first().map_or(0, Vec::len);
        let environments = targets
            .iter()
            .map(|env| {
                env.iter()
                    .map(|&o| {
                        let mut row = vec![0.0; n_outcomes];
                        if o < n_outcomes {
                            row[o] = 1.0;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        FiniteModel::new(n_outcomes, n_policies, environments)
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn n_envs(&self) -> usize {
        self.environments.len()
    }

    pub fn env(&self, e: usize) -> &[Vec<f64>] {
        &self.environments[e]
    }

    pub fn environments(&self) -> &[Vec<Vec<f64>>] {
        &self.environments
    }

    /// Sorted, deduplicated row set of environment `e` (its attainable set).
    pub fn row_set(&self, e: usize) -> Vec<Vec<u64>> {
        let mut rows: Vec<Vec<u64>> = self.environments[e]
            .iter()
            .map(|r| r.iter().map(|p| p.to_bits()).collect())
            .collect();
        rows.sort();
        rows.dedup();
        rows
    }
}

/// Assignment of outcomes to cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct OutcomePartition {
    cell_of: Vec<usize>,
    n_cells: usize,
}

#[derive(Deserialize)]
struct RawPartition {
    cell_of: Vec<usize>,
    n_cells: usize,
}

impl TryFrom<RawPartition> for OutcomePartition {
    type Error = Error;
    fn try_from(raw: RawPartition) -> Result<Self> {
        OutcomePartition::new(raw.cell_of, raw.n_cells)
    }
}

impl OutcomePartition {
    pub fn new(cell_of: Vec<usize>, n_cells: usize) -> Result<Self> {
        if cell_of.is_empty() || n_cells == 0 {
            return Err(Error::PartitionMismatch("empty partition".into()));
        }
        let mut seen = vec![false; n_cells];
        for (o, &c) in cell_of.iter().enumerate() {
            if c >= n_cells {
                return Err(Error::PartitionMismatch(format!(
                    "outcome {o} mapped to cell {c} of {n_cells}"
                )));
            }
            seen[c] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::PartitionMismatch(format!("cell {c} is empty")));
        }
        Ok(OutcomePartition { cell_of, n_cells })
    }

    /// Every outcome in its own cell.
    pub fn trivial(n: usize) -> Result<Self> {
        OutcomePartition::new((0..n).collect(), n)
    }

    pub fn single_cell(n: usize) -> Result<Self> {
        OutcomePartition::new(vec![0; n], 1)
    }

    /// Contiguous runs of nearly equal size.
    pub fn contiguous(n: usize, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || n_cells > n {
            return Err(Error::PartitionMismatch(format!("{n_cells} cells over {n} outcomes")));
        }
        OutcomePartition::new((0..n).map(|o| o * n_cells / n).collect(), n_cells)
    }

    pub fn cell_of(&self, o: usize) -> usize {
        self.cell_of[o]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_outcomes(&self) -> usize {
        self.cell_of.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.n_cells == self.cell_of.len()
    }

    pub fn members(&self, cell: usize) -> Vec<usize> {
        (0..self.cell_of.len()).filter(|&o| self.cell_of[o] == cell).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_validation() {
        assert!(FiniteModel::identity(3).is_ok());
        assert!(matches!(
            FiniteModel::new(2, 1, vec![vec![vec![0.5, 0.6]]]),
            Err(Error::InvalidPmf(_))
        ));
        assert!(matches!(
            FiniteModel::new(2, 2, vec![vec![vec![0.5, 0.5]]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(OutcomePartition::new(vec![0, 0, 2], 3).is_err());
        assert!(OutcomePartition::new(vec![0, 3], 2).is_err());
        let p = OutcomePartition::contiguous(4, 2).unwrap();
        assert_eq!(p.cells(), &[0, 0, 1, 1]);
        assert!(OutcomePartition::trivial(3).unwrap().is_trivial());
    }

    #[test]
    fn model_json_round_trip_validates() {
        let m = FiniteModel::identity(2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: FiniteModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"n_outcomes":2,"n_policies":1,"environments":[[[0.5,0.6]]]}"#;
        assert!(serde_json::from_str::<FiniteModel>(bad).is_err());
    }
}
