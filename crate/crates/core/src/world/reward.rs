use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default grid denominator: rewards live on multiples of 0.001.
pub const DEFAULT_DENOM: i64 = 1000;

/// Distance (in grid units) within which a float is snapped onto the grid.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Converts a real value to grid units, if it lies on the grid.
pub fn to_units(value: f64, denom: i64) -> Option<i64> {
    let scaled = value * denom as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() <= SNAP_TOLERANCE * denom as f64 && rounded.abs() < 1e15 {
        Some(rounded as i64)
    } else {
        None
    }
}

/// A true reward function stored exactly as integer multiples of `1/denom`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct RewardTable {
    units: Vec<i64>,
    denom: i64,
}

#[derive(Deserialize)]
struct RawTable {
    units: Vec<i64>,
    denom: i64,
}

impl TryFrom<RawTable> for RewardTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        RewardTable::from_units(raw.units, raw.denom)
    }
}

impl RewardTable {
    pub fn from_units(units: Vec<i64>, denom: i64) -> Result<Self> {
        if denom <= 0 {
            return Err(Error::DomainError(format!("grid denominator {denom} must be positive")));
        }
        if units.is_empty() {
            return Err(Error::DomainError("reward table over zero outcomes".into()));
        }
        if let Some(u) = units.iter().find(|u| u.abs() > denom) {
            return Err(Error::DomainError(format!(
                "reward {} outside [-1, 1]",
                *u as f64 / denom as f64
            )));
        }
        Ok(RewardTable { units, denom })
    }

    pub fn from_values(values: &[f64], denom: i64) -> Result<Self> {
        let units = values
            .iter()
            .map(|&v| {
                to_units(v, denom).ok_or_else(|| Error::GridOverflow(format!("{v} is not a multiple of 1/{denom}")))
            })
            .collect::<Result<Vec<_>>>()?;
        RewardTable::from_units(units, denom)
    }

    pub fn constant(n: usize, units: i64, denom: i64) -> Result<Self> {
        RewardTable::from_units(vec![units; n], denom)
    }

    pub fn units(&self) -> &[i64] {
        &self.units
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn value(&self, o: usize) -> f64 {
        self.units[o] as f64 / self.denom as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|o| self.value(o)).collect()
    }

    /// The table `max(r, 0)`.
    pub fn positive_part(&self) -> RewardTable {
        RewardTable {
            units: self.units.iter().map(|&u| u.max(0)).collect(),
            denom: self.denom,
        }
    }

    pub fn negated(&self) -> RewardTable {
        RewardTable {
            units: self.units.iter().map(|&u| -u).collect(),
            denom: self.denom,
        }
    }

    /// `Σ_o row(o)·r(o)`.
    pub fn dot(&self, row: &[f64]) -> f64 {
        dot(row, &self.values())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A proxy codeword. Proxies are unconstrained reals: they are stored on the
/// grid when possible and otherwise at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodeword")]
pub struct Codeword {
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    units: Option<Vec<i64>>,
}

#[derive(Deserialize)]
struct RawCodeword {
    values: Vec<f64>,
    #[serde(default)]
    units: Option<Vec<i64>>,
}

impl TryFrom<RawCodeword> for Codeword {
    type Error = Error;
    fn try_from(raw: RawCodeword) -> Result<Self> {
        if let Some(u) = &raw.units {
            if u.len() != raw.values.len() {
                return Err(Error::DimensionMismatch("codeword units and values differ".into()));
            }
        }
        Ok(Codeword {
            values: raw.values,
            units: raw.units,
        })
    }
}

impl Codeword {
    pub fn on_grid(units: Vec<i64>, denom: i64) -> Self {
        let values = units.iter().map(|&u| u as f64 / denom as f64).collect();
        Codeword {
            values,
            units: Some(units),
        }
    }

    /// Snaps to the grid when every coordinate is within tolerance of it.
    pub fn from_values(values: Vec<f64>, denom: i64) -> Self {
        match values.iter().map(|&v| to_units(v, denom)).collect::<Option<Vec<_>>>() {
            Some(units) => Codeword::on_grid(units, denom),
            None => Codeword { values, units: None },
        }
    }

    pub fn from_table(table: &RewardTable) -> Self {
        Codeword::on_grid(table.units().to_vec(), table.denom())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn units(&self) -> Option<&[i64]> {
        self.units.as_deref()
    }

    pub fn is_on_grid(&self) -> bool {
        self.units.is_some()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exact identity key used for deduplication.
    pub(crate) fn key(&self) -> CodewordKey {
        match &self.units {
            Some(u) => CodewordKey::Grid(u.clone()),
            None => CodewordKey::Bits(self.values.iter().map(|v| v.to_bits()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum CodewordKey {
    Grid(Vec<i64>),
    Bits(Vec<u64>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_validate_range_and_grid() {
        assert!(RewardTable::from_values(&[1.0, -1.0, 0.25], 1000).is_ok());
        assert!(matches!(
            RewardTable::from_values(&[1.5], 1000),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(
            RewardTable::from_values(&[0.0001], 1000),
            Err(Error::GridOverflow(_))
        ));
        let t = RewardTable::from_values(&[0.1, 0.2], 1000).unwrap();
        assert_eq!(t.units(), &[100, 200]);
    }

    #[test]
    fn codewords_snap_when_close() {
        let c = Codeword::from_values(vec![0.5 + 1e-13, -0.25], 1000);
        assert_eq!(c.units(), Some(&[500, -250][..]));
        let off = Codeword::from_values(vec![1.0 / 3.0], 1000);
        assert!(!off.is_on_grid());
        assert_eq!(off.values(), &[1.0 / 3.0]);
    }
}
