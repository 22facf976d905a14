use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{kl_bernoulli, mutual_information, ExtReal, JointPmf};

/// Largest outcome count the demo enumerates.
pub const MAX_SAFE_SET_OUTCOMES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeSetDemo {
    pub n_outcomes: usize,
    pub safe_prob: f64,
    pub v_dagger: f64,
    pub epsilon: f64,
    /// `I(S; O*)` from the joint law.
    pub mutual_information: f64,
    /// `E[d_KL(law of O* given S ‖ law of O*)]`.
    pub expected_kl: f64,
    /// `E[log₂(|𝒪| / |S|)]`.
    pub expected_log_ratio: f64,
    /// `d_KL(Bern(V†) ‖ Bern(ε))`.
    pub kl_factor: ExtReal,
    /// `V† · log₂(1/ε)`.
    pub approximation: f64,
    pub gap: Option<f64>,
    /// Probability that no outcome is safe, removed by conditioning.
    pub empty_mass: f64,
}

/// Safe set `S` with iid membership, conditioned nonempty, and `O*`
/// uniform on `S`. `epsilon` defaults to the typical safe fraction
/// `2^{E[log₂(|S|/n)]}`.
pub fn safe_set_information_demo(
    n_outcomes: usize,
    safe_prob: f64,
    v_dagger: f64,
    epsilon: Option<f64>,
) -> Result<SafeSetDemo> {
    if n_outcomes == 0 || n_outcomes > MAX_SAFE_SET_OUTCOMES {
        return Err(Error::DomainError(format!(
            "outcome count {n_outcomes} outside 1..={MAX_SAFE_SET_OUTCOMES}"
        )));
    }
    if !(safe_prob > 0.0 && safe_prob <= 1.0) {
        return Err(Error::DomainError(format!(
            "safe probability {safe_prob} outside (0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&v_dagger) {
        return Err(Error::DomainError(format!("V† = {v_dagger} outside [0, 1]")));
    }
    let n = n_outcomes;
    let empty_mass = (1.0 - safe_prob).powi(n as i32);
    let norm = 1.0 - empty_mass;
    let mut entries = Vec::new();
    let mut expected_log_ratio = 0.0;
    for mask in 1usize..(1 << n) {
        let size = mask.count_ones() as usize;
        let p = safe_prob.powi(size as i32) * (1.0 - safe_prob).powi((n - size) as i32) / norm;
        if p == 0.0 {
            continue;
        }
        expected_log_ratio += p * (n as f64 / size as f64).log2();
        for o in (0..n).filter(|o| mask >> o & 1 == 1) {
            entries.push((mask, o, p / size as f64));
        }
    }
    let joint = JointPmf::from_entries(1 << n, n, entries)?;
    let mutual_information = mutual_information(&joint);

    // the O* marginal, and the divergence of each conditional from it
    let marginal = joint.y_marginal();
    let mut expected_kl = 0.0;
    let masses = joint.x_marginal();
    for &(mask, o, p) in joint.entries() {
        let cond = p / masses[mask];
        expected_kl += p * (cond / marginal[o]).log2();
    }

    let epsilon = epsilon.unwrap_or_else(|| (-expected_log_ratio).exp2());
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::DomainError(format!("ε = {epsilon} outside (0, 1]")));
    }
    let kl_factor = kl_bernoulli(v_dagger, epsilon)?;
    let approximation = v_dagger * (1.0 / epsilon).log2();
    Ok(SafeSetDemo {
        n_outcomes,
        safe_prob,
        v_dagger,
        epsilon,
        mutual_information,
        expected_kl,
        expected_log_ratio,
        kl_factor,
        approximation,
        gap: kl_factor.finite().map(|k| k - approximation),
        empty_mass,
    })
}
