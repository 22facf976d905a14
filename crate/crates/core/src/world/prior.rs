use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{FiniteModel, OutcomePartition};
use super::reward::{to_units, RewardTable, DEFAULT_DENOM};
use crate::error::{Error, Result};
use crate::prob::{Pmf, PMF_TOLERANCE};

/// Default cap on the number of enumerated atoms.
pub const DEFAULT_CAP: usize = 100_000;

/// Grid and size limits shared by every enumerating constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub denom: i64,
    pub cap: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            denom: DEFAULT_DENOM,
            cap: DEFAULT_CAP,
        }
    }
}

/// How an ensemble was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleStructure {
    /// Outcome values iid with law `marginal` over `grid` (in grid units).
    Iid {
        grid: Vec<i64>,
        marginal: Pmf,
    },
    /// Constant within cells, cell values iid.
    CellwiseIid {
        partition: OutcomePartition,
        grid: Vec<i64>,
        marginal: Pmf,
    },
    Explicit,
}

impl EnsembleStructure {
    /// Value grid (units) and its law, for the iid families.
    pub fn marginal(&self) -> Option<(&[i64], &Pmf)> {
        match self {
            EnsembleStructure::Iid { grid, marginal } | EnsembleStructure::CellwiseIid { grid, marginal, .. } => {
                Some((grid, marginal))
            }
            EnsembleStructure::Explicit => None,
        }
    }
}

/// A finite law over reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct RewardEnsemble {
    tables: Vec<RewardTable>,
    probs: Vec<f64>,
    structure: EnsembleStructure,
}

fn grid_units(grid: &[f64], marginal: &Pmf, denom: i64) -> Result<Vec<(i64, f64)>> {
    if grid.len() != marginal.len() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} values, marginal has {}",
            grid.len(),
            marginal.len()
        )));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (&g, &p) in grid.iter().zip(marginal.probs()) {
        if !(-1.0..=1.0).contains(&g) {
            return Err(Error::DomainError(format!("grid value {g} outside [-1, 1]")));
        }
        let u = to_units(g, denom).ok_or_else(|| Error::GridOverflow(format!("{g} is not a multiple of 1/{denom}")))?;
        if out.iter().any(|&(v, _)| v == u) {
            return Err(Error::DomainError(format!("grid value {g} repeated")));
        }
        out.push((u, p));
    }
    Ok(out)
}

/// All `|values|^slots` assignments, first slot most significant, dropping
/// zero-probability ones.
fn enumerate_product(values: &[(i64, f64)], slots: usize, cap: usize) -> Result<Vec<(Vec<i64>, f64)>> {
    let live: Vec<(i64, f64)> = values.iter().copied().filter(|v| v.1 > 0.0).collect();
    let size = (live.len() as u128).checked_pow(slots as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::EnsembleTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut digits = vec![0usize; slots];
    loop {
        let assignment: Vec<i64> = digits.iter().map(|&d| live[d].0).collect();
        let p: f64 = digits.iter().map(|&d| live[d].1).product();
        out.push((assignment, p));
        // odometer increment, last slot fastest
        let mut i = slots;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < live.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Product ensemble with iid outcome values.
pub fn build_iid_reward_ensemble(
    n_outcomes: usize,
    value_grid: &[f64],
    marginal: &Pmf,
    opts: &EnsembleOptions,
) -> Result<RewardEnsemble> {
    if n_outcomes == 0 {
        return Err(Error::DimensionMismatch("zero outcomes".into()));
    }
    let values = grid_units(value_grid, marginal, opts.denom)?;
    let tables = enumerate_product(&values, n_outcomes, opts.cap)?
        .into_iter()
        .map(|(u, p)| Ok((RewardTable::from_units(u, opts.denom)?, p)))
        .collect::<Result<Vec<_>>>()?;
    let (tables, probs) = tables.into_iter().unzip();
    Ok(RewardEnsemble {
        tables,
        probs,
        structure: EnsembleStructure::Iid {
            grid: values.iter().map(|v| v.0).collect(),
            marginal: marginal.clone(),
        },
    })
}

/// Ensemble constant within cells with iid cell values. A trivial partition
/// yields exactly the iid ensemble.
pub fn build_cellwise_iid_ensemble(
    partition: &OutcomePartition,
    value_grid: &[f64],
    marginal: &Pmf,
    opts: &EnsembleOptions,
) -> Result<RewardEnsemble> {
    if partition.is_trivial() {
        return build_iid_reward_ensemble(partition.n_outcomes(), value_grid, marginal, opts);
    }
    let values = grid_units(value_grid, marginal, opts.denom)?;
    let mut tables = Vec::new();
    let mut probs = Vec::new();
    for (cells, p) in enumerate_product(&values, partition.n_cells(), opts.cap)? {
        let units = partition.cells().iter().map(|&c| cells[c]).collect();
        tables.push(RewardTable::from_units(units, opts.denom)?);
        probs.push(p);
    }
    Ok(RewardEnsemble {
        tables,
        probs,
        structure: EnsembleStructure::CellwiseIid {
            partition: partition.clone(),
            grid: values.iter().map(|v| v.0).collect(),
            marginal: marginal.clone(),
        },
    })
}

impl RewardEnsemble {
    /// An arbitrary law over distinct tables.
    pub fn explicit(tables: Vec<RewardTable>, probs: Vec<f64>) -> Result<Self> {
        if tables.len() != probs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tables but {} probabilities",
                tables.len(),
                probs.len()
            )));
        }
        Pmf::new(probs.clone())?;
        let n = tables[0].len();
        let denom = tables[0].denom();
        let mut seen = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            if t.len() != n || t.denom() != denom {
                return Err(Error::DimensionMismatch(format!(
                    "table {i} has a different shape or grid"
                )));
            }
            if let Some(j) = seen.insert(t.units().to_vec(), i) {
                return Err(Error::DomainError(format!("tables {j} and {i} are equal")));
            }
        }
        Ok(RewardEnsemble {
            tables,
            probs,
            structure: EnsembleStructure::Explicit,
        })
    }

    pub fn tables(&self) -> &[RewardTable] {
        &self.tables
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn structure(&self) -> &EnsembleStructure {
        &self.structure
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn n_outcomes(&self) -> usize {
        self.tables[0].len()
    }

    pub fn denom(&self) -> i64 {
        self.tables[0].denom()
    }
}

#[derive(Deserialize)]
struct RawEnsemble {
    tables: Vec<RewardTable>,
    probs: Vec<f64>,
    structure: EnsembleStructure,
}

impl TryFrom<RawEnsemble> for RewardEnsemble {
    type Error = Error;

    /// Structured ensembles are rebuilt from their generating law and must
    /// match the stored tables.
    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let explicit = RewardEnsemble::explicit(raw.tables, raw.probs)?;
        let opts = EnsembleOptions {
            denom: explicit.denom(),
            cap: usize::MAX,
        };
        let to_values = |grid: &[i64]| grid.iter().map(|&u| u as f64 / opts.denom as f64).collect::<Vec<_>>();
        let rebuilt = match &raw.structure {
            EnsembleStructure::Explicit => return Ok(explicit),
            EnsembleStructure::Iid { grid, marginal } => {
                build_iid_reward_ensemble(explicit.n_outcomes(), &to_values(grid), marginal, &opts)?
            }
            EnsembleStructure::CellwiseIid {
                partition,
                grid,
                marginal,
            } => build_cellwise_iid_ensemble(partition, &to_values(grid), marginal, &opts)?,
        };
        let same = rebuilt.tables == explicit.tables
            && rebuilt
                .probs
                .iter()
                .zip(&explicit.probs)
                .all(|(a, b)| (a - b).abs() <= PMF_TOLERANCE);
        if !same {
            return Err(Error::DomainError(
                "stored tables do not match their generating law".into(),
            ));
        }
        Ok(rebuilt)
    }
}

/// How reward tables and environments are coupled.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Product law with the given environment marginal.
    Independent(Pmf),
    /// Arbitrary joint given as `(reward index, environment index, prob)`.
    Explicit(Vec<(usize, usize, f64)>),
}

/// One support point of the joint law of `(r*, ρ*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub reward: usize,
    pub env: usize,
}

/// Joint law over (reward table, environment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct WorldPrior {
    model: FiniteModel,
    ensemble: RewardEnsemble,
    atoms: Vec<Atom>,
    atom_probs: Pmf,
    iid_rewards: bool,
    #[serde(skip)]
    reward_marginal: Vec<f64>,
    #[serde(skip)]
    env_marginal: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPrior {
    model: FiniteModel,
    ensemble: RewardEnsemble,
    atoms: Vec<Atom>,
    atom_probs: Vec<f64>,
}

impl TryFrom<RawPrior> for WorldPrior {
    type Error = Error;
    fn try_from(raw: RawPrior) -> Result<Self> {
        WorldPrior::from_parts(raw.model, raw.ensemble, raw.atoms, raw.atom_probs)
    }
}

pub fn compose_prior(model: FiniteModel, ensemble: RewardEnsemble, coupling: Coupling) -> Result<WorldPrior> {
    if ensemble.n_outcomes() != model.n_outcomes() {
        return Err(Error::DimensionMismatch(format!(
            "tables cover {} outcomes, model has {}",
            ensemble.n_outcomes(),
            model.n_outcomes()
        )));
    }
    let entries: Vec<(usize, usize, f64)> = match coupling {
        Coupling::Independent(env) => {
            if env.len() != model.n_envs() {
                return Err(Error::DimensionMismatch(format!(
                    "environment marginal has {} entries, model has {} environments",
                    env.len(),
                    model.n_envs()
                )));
            }
            ensemble
                .probs()
                .iter()
                .enumerate()
                .flat_map(|(r, &pr)| env.probs().iter().enumerate().map(move |(e, &pe)| (r, e, pr * pe)))
                .collect()
        }
        Coupling::Explicit(entries) => entries,
    };
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    let mut sorted = entries;
    for &(r, e, p) in &sorted {
        if r >= ensemble.len() || e >= model.n_envs() {
            return Err(Error::DimensionMismatch(format!("atom ({r}, {e}) out of range")));
        }
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidPmf(format!("atom ({r}, {e}) has probability {p}")));
        }
    }
    sorted.sort_by_key(|e| (e.0, e.1));
    for (r, e, p) in sorted {
        match merged.last_mut() {
            Some(last) if last.0 == r && last.1 == e => last.2 += p,
            _ => merged.push((r, e, p)),
        }
    }
    let total: f64 = merged.iter().map(|a| a.2).sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidPmf(format!("atoms sum to {total}")));
    }
    merged.retain(|a| a.2 > 0.0);
    let atoms = merged.iter().map(|&(reward, env, _)| Atom { reward, env }).collect();
    let atom_probs = Pmf::new(merged.iter().map(|a| a.2).collect())?;
    WorldPrior::assemble(model, ensemble, atoms, atom_probs)
}

impl WorldPrior {
    fn assemble(model: FiniteModel, ensemble: RewardEnsemble, atoms: Vec<Atom>, atom_probs: Pmf) -> Result<Self> {
        let mut reward_marginal = vec![0.0; ensemble.len()];
        let mut env_marginal = vec![0.0; model.n_envs()];
        for (a, &p) in atoms.iter().zip(atom_probs.probs()) {
            reward_marginal[a.reward] += p;
            env_marginal[a.env] += p;
        }
        // the iid flag survives only if the coupling kept the ensemble's law
        let consistent = reward_marginal
            .iter()
            .zip(ensemble.probs())
            .all(|(a, b)| (a - b).abs() <= PMF_TOLERANCE);
        let iid_rewards = consistent && matches!(ensemble.structure(), EnsembleStructure::Iid { .. });
        Ok(WorldPrior {
            model,
            ensemble,
            atoms,
            atom_probs,
            iid_rewards,
            reward_marginal,
            env_marginal,
        })
    }

    /// Rebuilds a prior from serialized parts, revalidating everything.
    pub fn from_parts(
        model: FiniteModel,
        ensemble: RewardEnsemble,
        atoms: Vec<Atom>,
        atom_probs: Vec<f64>,
    ) -> Result<Self> {
        if atoms.len() != atom_probs.len() {
            return Err(Error::DimensionMismatch(
                "atoms and probabilities differ in length".into(),
            ));
        }
        let entries = atoms
            .iter()
            .zip(atom_probs)
            .map(|(a, p)| (a.reward, a.env, p))
            .collect();
        compose_prior(model, ensemble, Coupling::Explicit(entries))
    }

    pub fn model(&self) -> &FiniteModel {
        &self.model
    }

    pub fn ensemble(&self) -> &RewardEnsemble {
        &self.ensemble
    }

    pub fn tables(&self) -> &[RewardTable] {
        self.ensemble.tables()
    }

    pub fn table(&self, r: usize) -> &RewardTable {
        &self.ensemble.tables()[r]
    }

    pub fn n_rewards(&self) -> usize {
        self.ensemble.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.model.n_outcomes()
    }

    pub fn denom(&self) -> i64 {
        self.ensemble.denom()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_probs(&self) -> &[f64] {
        self.atom_probs.probs()
    }

    /// `(atom, probability)` pairs.
    pub fn weighted_atoms(&self) -> impl Iterator<Item = (Atom, f64)> + '_ {
        self.atoms.iter().copied().zip(self.atom_probs.probs().iter().copied())
    }

    /// Whether the reward ensemble came from the iid constructor and the
    /// coupling preserved its law.
    pub fn iid_rewards(&self) -> bool {
        self.iid_rewards
    }

    /// The cell structure when the rewards are cellwise iid (a trivial
    /// partition when they are plainly iid).
    pub fn cellwise_partition(&self) -> Option<OutcomePartition> {
        let consistent = self
            .reward_marginal
            .iter()
            .zip(self.ensemble.probs())
            .all(|(a, b)| (a - b).abs() <= PMF_TOLERANCE);
        if !consistent {
            return None;
        }
        match self.ensemble.structure() {
            EnsembleStructure::Iid { .. } => OutcomePartition::trivial(self.n_outcomes()).ok(),
            EnsembleStructure::CellwiseIid { partition, .. } => Some(partition.clone()),
            EnsembleStructure::Explicit => None,
        }
    }

    pub fn reward_marginal(&self) -> &[f64] {
        &self.reward_marginal
    }

    pub fn env_marginal(&self) -> &[f64] {
        &self.env_marginal
    }
}

/// Tests `r* ⊥ L_{ρ*}`: environments are grouped by their attainable row set
/// and the joint over (reward, group) must factorize.
pub fn check_reward_env_independence(prior: &WorldPrior) -> bool {
    let model = prior.model();
    let mut groups: HashMap<Vec<Vec<u64>>, usize> = HashMap::new();
    let group_of: Vec<usize> = (0..model.n_envs())
        .map(|e| {
            let next = groups.len();
            *groups.entry(model.row_set(e)).or_insert(next)
        })
        .collect();
    let n_groups = groups.len();
    let mut joint = vec![vec![0.0; n_groups]; prior.n_rewards()];
    let mut pg = vec![0.0; n_groups];
    for (a, p) in prior.weighted_atoms() {
        joint[a.reward][group_of[a.env]] += p;
        pg[group_of[a.env]] += p;
    }
    let pr = prior.reward_marginal();
    joint
        .iter()
        .enumerate()
        .all(|(r, row)| row.iter().zip(&pg).all(|(j, g)| (j - pr[r] * g).abs() <= PMF_TOLERANCE))
}
