//! Policy selection with consequentialist tie-breaking, the KL-regularized
//! policy and the coherent projection of a proxy channel.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::prob::{conditional_mean, Pmf};
use crate::world::channel::channel_from_codewords;
use crate::world::reward::dot;
use crate::world::{joint_reward_proxy, Codeword, FiniteModel, ProxyChannel, WorldPrior};

/// Distribution over policy indices.
pub type PolicyDistribution = Pmf;

/// Scores are compared after rounding to this resolution.
pub const SCORE_RESOLUTION: f64 = 1e-12;

/// Relative tolerance for membership in the optimal uninformed set.
pub const OPTIMAL_SET_TOLERANCE: f64 = 1e-9;

fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|p| p.to_bits()).collect()
}

/// Every distinct outcome distribution, in first-occurrence order under an
/// (environment, policy) scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCatalog {
    entries: Vec<Vec<f64>>,
    origin: Vec<(usize, usize)>,
    index: HashMap<Vec<u64>, usize>,
}

impl DistributionCatalog {
    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// `(environment, policy)` that first produced each entry.
    pub fn origin(&self) -> &[(usize, usize)] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, row: &[f64]) -> Option<usize> {
        self.index.get(&row_key(row)).copied()
    }

    /// Catalog index of every row of `env`.
    pub fn row_indices(&self, env: &[Vec<f64>]) -> Result<Vec<usize>> {
        env.iter()
            .enumerate()
            .map(|(policy, row)| self.lookup(row).ok_or(Error::RowNotInCatalog { policy }))
            .collect()
    }
}

pub fn catalog_distributions(model: &FiniteModel) -> DistributionCatalog {
    let mut catalog = DistributionCatalog {
        entries: Vec::new(),
        origin: Vec::new(),
        index: HashMap::new(),
    };
    for (e, env) in model.environments().iter().enumerate() {
        for (p, row) in env.iter().enumerate() {
            let key = row_key(row);
            if !catalog.index.contains_key(&key) {
                catalog.index.insert(key, catalog.entries.len());
                catalog.entries.push(row.clone());
                catalog.origin.push((e, p));
            }
        }
    }
    catalog
}

fn score_key(score: f64) -> f64 {
    (score / SCORE_RESOLUTION).round()
}

/// Argmax of `scores` with ties broken by smallest catalog index of the row,
/// then smallest policy index.
pub(crate) fn select_by_scores(scores: impl Iterator<Item = f64>, row_ids: &[usize]) -> usize {
    let mut best: Option<(f64, usize, usize)> = None;
    for (p, s) in scores.enumerate() {
        let k = score_key(s);
        let better = match best {
            None => true,
            Some((bk, brow, bp)) => k > bk || (k == bk && (row_ids[p], p) < (brow, bp)),
        };
        if better {
            best = Some((k, row_ids[p], p));
        }
    }
    best.map(|b| b.2).expect("at least one policy")
}

/// The policy a fully capable agent executes in `env` when optimizing `reward`.
pub fn select_policy(env: &[Vec<f64>], reward: &[f64], catalog: &DistributionCatalog) -> Result<usize> {
    let rows = catalog.row_indices(env)?;
    Ok(select_by_scores(env.iter().map(|row| dot(row, reward)), &rows))
}

/// Exponential tilt `base(π)·exp(λ f(π)) / Z`, computed with a max shift.
/// Negative `λ` is accepted here for finite differences.
pub(crate) fn tilt(f_hat: &[f64], base: &[f64], lambda: f64) -> Vec<f64> {
    let shift = f_hat
        .iter()
        .zip(base)
        .filter(|(_, &b)| b > 0.0)
        .map(|(&f, _)| lambda * f)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = f_hat
        .iter()
        .zip(base)
        .map(|(&f, &b)| if b > 0.0 { b * (lambda * f - shift).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for x in &mut out {
        *x /= z;
    }
    out
}

/// `argmax_P λ·P·f̂ − d_KL(P ‖ base)`.
pub fn regularized_policy(f_hat: &[f64], base: &PolicyDistribution, lambda: f64) -> Result<PolicyDistribution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::DomainError(format!(
            "pressure {lambda} must be a nonnegative real"
        )));
    }
    if f_hat.len() != base.len() {
        return Err(Error::SupportMismatch {
            left: f_hat.len(),
            right: base.len(),
        });
    }
    Pmf::new(tilt(f_hat, base.probs(), lambda))
}

/// Prior-expected value of each fixed policy.
pub fn policy_values(prior: &WorldPrior) -> Vec<f64> {
    let model = prior.model();
    let mut values = vec![0.0; model.n_policies()];
    for (a, p) in prior.weighted_atoms() {
        let r = prior.table(a.reward).values();
        for (v, row) in values.iter_mut().zip(model.env(a.env)) {
            *v += p * dot(row, &r);
        }
    }
    values
}

/// Policies whose prior-expected value is maximal, and the uniform law on them.
pub fn optimal_uninformed_set(prior: &WorldPrior) -> (Vec<usize>, PolicyDistribution) {
    let values = policy_values(prior);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let set: Vec<usize> = (0..values.len())
        .filter(|&p| values[p] >= max - OPTIMAL_SET_TOLERANCE * max.abs().max(1.0))
        .collect();
    let mut probs = vec![0.0; values.len()];
    for &p in &set {
        probs[p] = 1.0 / set.len() as f64;
    }
    (set, Pmf::new(probs).expect("uniform over a nonempty set"))
}

/// `E[r* | r̂ = c]` for every codeword, one vector per codeword.
fn posterior_means(prior: &WorldPrior, channel: &ProxyChannel) -> Result<Vec<Vec<f64>>> {
    let joint = joint_reward_proxy(prior, channel)?;
    let columns = (0..prior.n_outcomes())
        .map(|o| {
            let values: Vec<f64> = prior.tables().iter().map(|t| t.value(o)).collect();
            conditional_mean(&joint, &values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..channel.n_codewords())
        .map(|c| columns.iter().map(|col| col[c]).collect())
        .collect())
}

/// Replaces every codeword by `E[r* | r̂]`.
pub fn coherent_projection(prior: &WorldPrior, channel: &ProxyChannel) -> Result<ProxyChannel> {
    let means = posterior_means(prior, channel)?;
    let codewords: Vec<Codeword> = means
        .into_iter()
        .map(|m| Codeword::from_values(m, channel.denom()))
        .collect();
    let rows = channel
        .rows()
        .iter()
        .map(|row| row.iter().map(|&(c, q)| (codewords[c].clone(), q)).collect())
        .collect();
    Ok(channel_from_codewords(channel.denom(), rows, None))
}

/// `max_{c,o} |E[r*(o) | r̂ = c] − c(o)|`.
pub fn coherence_residual(prior: &WorldPrior, channel: &ProxyChannel) -> Result<f64> {
    let means = posterior_means(prior, channel)?;
    Ok(means
        .iter()
        .zip(channel.codebook())
        .flat_map(|(m, c)| m.iter().zip(c.values()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max))
}
