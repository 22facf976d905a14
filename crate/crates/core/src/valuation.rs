//! Scalar values of a world: executed, contemporary, primordial and
//! adversarial values, and attainability.

use serde::{Deserialize, Serialize};

use crate::agent::{catalog_distributions, policy_values, select_by_scores, DistributionCatalog};
use crate::error::{Error, Result};
use crate::world::prior::DEFAULT_CAP;
use crate::world::reward::dot;
use crate::world::{OutcomePartition, ProxyChannel, WorldPrior};

/// Precomputed selection data for one prior.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    prior: &'a WorldPrior,
    catalog: DistributionCatalog,
    row_ids: Vec<Vec<usize>>,
    /// `atom_values[a][π] = ⟨ρ_e(·|π), r_i⟩` for atom `a = (i, e)`.
    atom_values: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(prior: &'a WorldPrior) -> Self {
        let model = prior.model();
        let catalog = catalog_distributions(model);
        let row_ids = (0..model.n_envs())
            .map(|e| catalog.row_indices(model.env(e)).expect("catalog covers the model"))
            .collect();
        let atom_values = prior
            .atoms()
            .iter()
            .map(|a| {
                let r = prior.table(a.reward).values();
                model.env(a.env).iter().map(|row| dot(row, &r)).collect()
            })
            .collect();
        Evaluator {
            prior,
            catalog,
            row_ids,
            atom_values,
        }
    }

    pub fn prior(&self) -> &WorldPrior {
        self.prior
    }

    pub fn catalog(&self) -> &DistributionCatalog {
        &self.catalog
    }

    /// True value of every policy at every atom.
    pub fn atom_values(&self) -> &[Vec<f64>] {
        &self.atom_values
    }

    /// Policy chosen in environment `e` by an agent maximizing `reward`.
    pub fn select(&self, e: usize, reward: &[f64]) -> usize {
        let env = self.prior.model().env(e);
        select_by_scores(env.iter().map(|row| dot(row, reward)), &self.row_ids[e])
    }

    /// `selections[e][c]`: policy executed in environment `e` under codeword `c`.
    pub fn selections(&self, channel: &ProxyChannel) -> Result<Vec<Vec<usize>>> {
        channel.check_against(self.prior)?;
        Ok((0..self.prior.model().n_envs())
            .map(|e| channel.codebook().iter().map(|c| self.select(e, c.values())).collect())
            .collect())
    }

    pub fn executed_value(&self, channel: &ProxyChannel) -> Result<f64> {
        let sel = self.selections(channel)?;
        let mut total = 0.0;
        for (k, (a, p)) in self.prior.weighted_atoms().enumerate() {
            for &(c, q) in channel.row(a.reward) {
                total += p * q * self.atom_values[k][sel[a.env][c]];
            }
        }
        Ok(total)
    }

    pub fn adversarial_value(&self) -> f64 {
        self.prior
            .weighted_atoms()
            .enumerate()
            .map(|(k, (a, p))| {
                let neg = self.prior.table(a.reward).negated().values();
                p * self.atom_values[k][self.select(a.env, &neg)]
            })
            .sum()
    }
}

/// `V̂`: expected true value of the policy chosen by optimizing the proxy.
pub fn executed_value(prior: &WorldPrior, channel: &ProxyChannel) -> Result<f64> {
    Evaluator::new(prior).executed_value(channel)
}

/// `V₀`: best prior-expected value of a fixed policy.
pub fn contemporary_value(prior: &WorldPrior) -> f64 {
    policy_values(prior).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Expected value when optimizing `−r*`.
pub fn adversarial_value(prior: &WorldPrior) -> f64 {
    Evaluator::new(prior).adversarial_value()
}

/// How the primordial quantities were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimordialMode {
    /// Moments of the iid marginal; exact.
    ExactIid,
    /// Best of all candidate tables over `grid`; a lower bound on `V̄`.
    GridSearch { grid: Vec<f64>, cap: usize },
}

impl PrimordialMode {
    pub fn default_grid_search() -> Self {
        PrimordialMode::GridSearch {
            grid: vec![-1.0, 0.0, 1.0],
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    ExactIid,
    GridSearch,
}

/// `V̄`, `σ̄²`, `V̄₊` and the uninformed reward achieving them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primordial {
    pub value: f64,
    pub variance: f64,
    pub positive_value: f64,
    pub best_reward: Vec<f64>,
    pub mode: SearchMode,
}

impl Primordial {
    pub fn sigma(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    /// `V̄ + σ̄/2`.
    pub fn threshold(&self) -> f64 {
        self.value + self.sigma() / 2.0
    }
}

pub fn primordial_quantities(prior: &WorldPrior, mode: &PrimordialMode) -> Result<Primordial> {
    match mode {
        PrimordialMode::ExactIid => exact_iid(prior),
        PrimordialMode::GridSearch { grid, cap } => grid_search(prior, grid, *cap),
    }
}

fn exact_iid(prior: &WorldPrior) -> Result<Primordial> {
    if prior.cellwise_partition().is_none() {
        return Err(Error::ModeUnsupported(
            "exact primordial values need an iid or cellwise-iid reward law".into(),
        ));
    }
    let (grid, law) = prior
        .ensemble()
        .structure()
        .marginal()
        .expect("structured ensemble has a marginal");
    let denom = prior.denom() as f64;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut positive = 0.0;
    for (&u, &p) in grid.iter().zip(law.probs()) {
        let v = u as f64 / denom;
        mean += p * v;
        second += p * v * v;
        positive += p * v.max(0.0);
    }
    Ok(Primordial {
        value: mean,
        variance: (second - mean * mean).max(0.0),
        positive_value: positive,
        best_reward: vec![0.0; prior.n_outcomes()],
        mode: SearchMode::ExactIid,
    })
}

fn grid_search(prior: &WorldPrior, grid: &[f64], cap: usize) -> Result<Primordial> {
    let n = prior.n_outcomes();
    let size = (grid.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 || grid.is_empty() {
        return Err(Error::EnsembleTooLarge { size, cap });
    }
    let eval = Evaluator::new(prior);
    let n_envs = prior.model().n_envs();
    // per-environment moments of r*(o), weighted by atom mass
    let mut first = vec![vec![0.0; n]; n_envs];
    let mut second = vec![vec![0.0; n]; n_envs];
    let mut positive = vec![vec![0.0; n]; n_envs];
    for (a, p) in prior.weighted_atoms() {
        let t = prior.table(a.reward);
        for o in 0..n {
            let v = t.value(o);
            first[a.env][o] += p * v;
            second[a.env][o] += p * v * v;
            positive[a.env][o] += p * v.max(0.0);
        }
    }
    let live: Vec<usize> = (0..n_envs).filter(|&e| prior.env_marginal()[e] > 0.0).collect();
    let mut best: Option<Primordial> = None;
    let mut digits = vec![0usize; n];
    loop {
        let cand: Vec<f64> = digits.iter().map(|&d| grid[d]).collect();
        let (mut m1, mut m2, mut mp) = (0.0, 0.0, 0.0);
        for &e in &live {
            let row = &prior.model().env(e)[eval.select(e, &cand)];
            m1 += dot(row, &first[e]);
            m2 += dot(row, &second[e]);
            mp += dot(row, &positive[e]);
        }
        if best.as_ref().is_none_or(|b| m1 > b.value) {
            best = Some(Primordial {
                value: m1,
                variance: (m2 - m1 * m1).max(0.0),
                positive_value: mp,
                best_reward: cand,
                mode: SearchMode::GridSearch,
            });
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best.expect("nonempty grid"));
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < grid.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// The baseline values of a world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub contemporary_value: f64,
    pub primordial_value: f64,
    pub primordial_variance: f64,
    pub primordial_positive_value: f64,
    pub adversarial_value: f64,
    pub best_uninformed_reward: Vec<f64>,
    pub search_mode: SearchMode,
}

pub fn baseline_report(prior: &WorldPrior, mode: &PrimordialMode) -> Result<BaselineReport> {
    let p = primordial_quantities(prior, mode)?;
    Ok(BaselineReport {
        contemporary_value: contemporary_value(prior),
        primordial_value: p.value,
        primordial_variance: p.variance,
        primordial_positive_value: p.positive_value,
        adversarial_value: adversarial_value(prior),
        best_uninformed_reward: p.best_reward,
        search_mode: p.mode,
    })
}

/// Expected attainability of outcomes and, optionally, of partition cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttainabilityProfile {
    pub per_outcome: Vec<f64>,
    pub per_cell: Option<Vec<f64>>,
    pub sup_outcome: f64,
    pub sup_cell: Option<f64>,
}

/// Largest entry, clipped to 1 against summation drift.
fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max).min(1.0)
}

pub fn attainability_profile(prior: &WorldPrior, partition: Option<&OutcomePartition>) -> Result<AttainabilityProfile> {
    let model = prior.model();
    let n = model.n_outcomes();
    if let Some(p) = partition {
        if p.n_outcomes() != n {
            return Err(Error::PartitionMismatch(format!(
                "partition covers {} outcomes, model has {n}",
                p.n_outcomes()
            )));
        }
    }
    let mut per_outcome = vec![0.0; n];
    let mut per_cell = partition.map(|p| vec![0.0; p.n_cells()]);
    for (e, &pe) in prior.env_marginal().iter().enumerate() {
        if pe == 0.0 {
            continue;
        }
        let env = model.env(e);
        for (o, slot) in per_outcome.iter_mut().enumerate() {
            *slot += pe * env.iter().map(|row| row[o]).fold(0.0, f64::max);
        }
        if let (Some(p), Some(cells)) = (partition, per_cell.as_mut()) {
            for (c, slot) in cells.iter_mut().enumerate() {
                let members = p.members(c);
                let best = env
                    .iter()
                    .map(|row| members.iter().map(|&o| row[o]).sum::<f64>())
                    .fold(0.0, f64::max);
                *slot += pe * best;
            }
        }
    }
    for x in per_outcome.iter_mut().chain(per_cell.iter_mut().flatten()) {
        *x = x.min(1.0);
    }
    let sup_outcome = sup(&per_outcome);
    let sup_cell = per_cell.as_deref().map(sup);
    Ok(AttainabilityProfile {
        per_outcome,
        per_cell,
        sup_outcome,
        sup_cell,
    })
}

/// Prior mean of the constant-in-`π` true reward table, `Σ P(r) r`.
pub fn prior_mean_table(prior: &WorldPrior) -> Vec<f64> {
    let mut mean = vec![0.0; prior.n_outcomes()];
    for (t, &p) in prior.tables().iter().zip(prior.reward_marginal()) {
        for (m, v) in mean.iter_mut().zip(t.values()) {
            *m += p * v;
        }
    }
    mean
}
