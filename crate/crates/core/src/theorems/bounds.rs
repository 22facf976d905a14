use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{kl_bernoulli, mutual_information, ExtReal};
use crate::valuation::{attainability_profile, contemporary_value, primordial_quantities, Evaluator, PrimordialMode};
use crate::world::{
    check_reward_env_independence, instance_digest, joint_reward_proxy, OutcomePartition, ProxyChannel, WorldPrior,
};

/// Slack allowed when comparing the two sides of an inequality.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

/// `(1 / sup p_att) · d_KL(Bern(V†) ‖ Bern(V̄ + σ̄/2))` in bits.
pub fn thm1_rhs(v_dagger: f64, v_bar: f64, sigma_bar: f64, p_att_sup: f64) -> Result<ExtReal> {
    if !(sigma_bar >= 0.0) {
        return Err(Error::DomainError(format!("σ̄ = {sigma_bar} must be nonnegative")));
    }
    if !(p_att_sup > 0.0 && p_att_sup <= 1.0) {
        return Err(Error::DomainError(format!(
            "sup attainability {p_att_sup} outside (0, 1]"
        )));
    }
    let threshold = v_bar + sigma_bar / 2.0;
    Ok(kl_bernoulli(v_dagger, threshold)?.scale(1.0 / p_att_sup))
}

/// A named hypothesis and whether it held on the instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precondition {
    pub name: String,
    pub holds: bool,
}

/// Instance parameters recorded next to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub digest: String,
    pub v_dagger: f64,
    pub v_hat: f64,
    pub v0: f64,
    pub v_bar: Option<f64>,
    pub sigma_bar: Option<f64>,
    pub p_att_sup: f64,
    pub mutual_information: f64,
    /// `V₀ ≤ V̄ + σ̄/2`, so the threshold interval collapses to a point.
    pub threshold_interval_degenerate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub preconditions: Vec<Precondition>,
    pub lhs: ExtReal,
    pub rhs: Option<ExtReal>,
    pub margin: Option<ExtReal>,
    /// All preconditions hold, so the inequality is actually tested.
    pub applicable: bool,
    pub pass: bool,
    pub context: ReportContext,
}

impl VerificationReport {
    /// Bit `i` set iff precondition `i` holds.
    pub fn precondition_mask(&self) -> u32 {
        self.preconditions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.holds)
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    /// Everything except the theorem label and the names of the hypotheses.
    pub fn same_verdict(&self, other: &VerificationReport) -> bool {
        let holds = |r: &VerificationReport| r.preconditions.iter().map(|p| p.holds).collect::<Vec<_>>();
        holds(self) == holds(other)
            && self.lhs == other.lhs
            && self.rhs == other.rhs
            && self.margin == other.margin
            && self.applicable == other.applicable
            && self.pass == other.pass
            && self.context == other.context
    }
}

fn precondition(name: &str, holds: bool) -> Precondition {
    Precondition {
        name: name.to_string(),
        holds,
    }
}

/// Shared engine for both bounds; `partition` switches to cell attainability.
fn verify_bound(
    theorem: &str,
    prior: &WorldPrior,
    channel: &ProxyChannel,
    v_dagger: f64,
    partition: Option<&OutcomePartition>,
) -> Result<VerificationReport> {
    let joint = joint_reward_proxy(prior, channel)?;
    let mi = mutual_information(&joint);
    let v_hat = Evaluator::new(prior).executed_value(channel)?;
    let v0 = contemporary_value(prior);
    let profile = attainability_profile(prior, partition)?;
    let p_att_sup = match partition {
        Some(_) => profile.sup_cell.expect("partition given"),
        None => profile.sup_outcome,
    };
    let primordial = primordial_quantities(prior, &PrimordialMode::ExactIid).ok();
    let v_bar = primordial.as_ref().map(|p| p.value);
    let sigma_bar = primordial.as_ref().map(|p| p.sigma());
    let threshold = primordial.as_ref().map(|p| p.threshold());

    let structure_ok = match partition {
        None => prior.iid_rewards(),
        Some(part) => prior.cellwise_partition().as_ref() == Some(part),
    };
    let in_unit = |x: f64| (0.0..=1.0).contains(&x);
    let preconditions = vec![
        precondition(
            if partition.is_some() {
                "cellwise_iid_rewards"
            } else {
                "iid_rewards"
            },
            structure_ok,
        ),
        precondition("reward_env_independent", check_reward_env_independence(prior)),
        precondition("v_bar_nonnegative", v_bar.is_some_and(|v| v >= 0.0)),
        precondition("bernoulli_domain", in_unit(v_dagger) && threshold.is_some_and(in_unit)),
        precondition("v_dagger_above_threshold", threshold.is_some_and(|t| v_dagger >= t)),
        precondition("executed_reaches_v_dagger", v_hat >= v_dagger),
    ];
    let applicable = preconditions.iter().all(|p| p.holds);

    let rhs = match (v_bar, sigma_bar) {
        (Some(vb), Some(sb)) => thm1_rhs(v_dagger, vb, sb, p_att_sup).ok(),
        _ => None,
    };
    let lhs = ExtReal::Finite(mi);
    let margin = rhs.and_then(|r| lhs.margin(r));
    let pass = !applicable || rhs.is_some_and(|r| lhs.ge_within(r, MARGIN_TOLERANCE));
    Ok(VerificationReport {
        theorem: theorem.to_string(),
        preconditions,
        lhs,
        rhs,
        margin,
        applicable,
        pass,
        context: ReportContext {
            digest: instance_digest(prior),
            v_dagger,
            v_hat,
            v0,
            v_bar,
            sigma_bar,
            p_att_sup,
            mutual_information: mi,
            threshold_interval_degenerate: threshold.map(|t| v0 <= t),
        },
    })
}

/// Checks `I(r*; r̂) ≥ thm1_rhs` with outcome attainability. Failed
/// hypotheses yield a vacuous pass with `applicable = false`.
pub fn verify_thm1(prior: &WorldPrior, channel: &ProxyChannel, v_dagger: f64) -> Result<VerificationReport> {
    verify_bound("thm1", prior, channel, v_dagger, None)
}

/// Cell-attainability version for rewards constant on cells.
pub fn verify_thm2(
    prior: &WorldPrior,
    partition: &OutcomePartition,
    channel: &ProxyChannel,
    v_dagger: f64,
) -> Result<VerificationReport> {
    if partition.n_outcomes() != prior.n_outcomes() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} outcomes, prior has {}",
            partition.n_outcomes(),
            prior.n_outcomes()
        )));
    }
    for (i, t) in prior.tables().iter().enumerate() {
        for o in 0..prior.n_outcomes() {
            let first = partition.members(partition.cell_of(o))[0];
            if t.units()[o] != t.units()[first] {
                return Err(Error::PartitionMismatch(format!(
                    "table {i} varies within the cell of outcome {o}"
                )));
            }
        }
    }
    verify_bound("thm2", prior, channel, v_dagger, Some(partition))
}
