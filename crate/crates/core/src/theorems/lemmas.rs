use serde::{Deserialize, Serialize};

use crate::agent::coherence_residual;
use crate::error::{Error, Result};
use crate::prob::{entropy, kl_divergence, mutual_information, ExtReal, JointPmf, Pmf, PMF_TOLERANCE};
use crate::valuation::{attainability_profile, Evaluator};
use crate::world::{check_reward_env_independence, ProxyChannel, WorldPrior};

use super::bounds::MARGIN_TOLERANCE;

/// Both sides of an inequality `lhs ≤ rhs` (or an identity) and the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideBySide {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `⌊1/q⌋`, robust to `1/q` landing a hair below an integer.
pub(crate) fn frontload_horizon(q: f64) -> usize {
    (1.0 / q * (1.0 + 1e-12)).floor() as usize
}

/// `Σ w_t a_t ≤ q Σ_{t≤T} a_t + (1 − qT) a_{T+1}` with `T = ⌊1/q⌋`, for a
/// probability sequence `w` capped by `q` and nonincreasing `a`.
pub fn check_frontloading(weights: &[f64], a: &[f64], q: f64) -> Result<SideBySide> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::DomainError(format!("cap {q} outside (0, 1]")));
    }
    if weights.len() != a.len() {
        return Err(Error::SupportMismatch {
            left: weights.len(),
            right: a.len(),
        });
    }
    Pmf::new(weights.to_vec())?;
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, &w)| w > q + 1e-12) {
        return Err(Error::CapViolated { index, weight, cap: q });
    }
    if let Some(index) = (1..a.len()).find(|&t| a[t] > a[t - 1]) {
        return Err(Error::NotMonotone { index });
    }
    let lhs: f64 = weights.iter().zip(a).map(|(w, x)| w * x).sum();
    // Σw = 1 with w ≤ q forces len ≥ T, so only a_{T+1} can be missing, and
    // then its coefficient 1 − qT is zero up to rounding
    let t = frontload_horizon(q).min(a.len());
    let mut rhs = q * a[..t].iter().sum::<f64>();
    if t < a.len() {
        rhs += (1.0 - q * t as f64) * a[t];
    }
    Ok(SideBySide {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-12,
    })
}

/// A joint pmf over tuples, stored row-major (last coordinate fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuplePmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl TuplePmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.is_empty() || size != probs.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} do not match {} probabilities",
                probs.len()
            )));
        }
        Pmf::new(probs.clone())?;
        Ok(TuplePmf { dims, probs })
    }

    /// Product of independent marginals.
    pub fn product(marginals: &[Pmf]) -> Result<Self> {
        let mut probs = vec![1.0];
        for m in marginals {
            probs = probs
                .iter()
                .flat_map(|p| m.probs().iter().map(move |q| p * q))
                .collect();
        }
        TuplePmf::new(marginals.iter().map(Pmf::len).collect(), probs)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Law of the first `t` coordinates, row-major.
    fn prefix_marginal(&self, t: usize) -> Vec<f64> {
        let block: usize = self.dims[t..].iter().product();
        self.probs.chunks(block).map(|c| c.iter().sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDecomposition {
    pub direct: ExtReal,
    pub decomposed: ExtReal,
    pub pass: bool,
}

/// `d_KL(X ‖ Y) = Σ_t [d_KL(X_t ‖ Y_t) + I(X_t; X_{1:t−1})]` for `Y` with
/// independent components.
pub fn check_kl_decomposition(x: &TuplePmf, y_marginals: &[Pmf]) -> Result<KlDecomposition> {
    if x.dims().len() != y_marginals.len() {
        return Err(Error::SupportMismatch {
            left: x.dims().len(),
            right: y_marginals.len(),
        });
    }
    for (&d, y) in x.dims().iter().zip(y_marginals) {
        if d != y.len() {
            return Err(Error::SupportMismatch {
                left: d,
                right: y.len(),
            });
        }
    }
    let y = TuplePmf::product(y_marginals)?;
    let direct = kl_divergence(&Pmf::new(x.probs().to_vec())?, &Pmf::new(y.probs().to_vec())?)?;

    let mut total = ExtReal::Finite(0.0);
    for (t, y_t) in y_marginals.iter().enumerate() {
        let prefix = x.prefix_marginal(t + 1);
        let d = x.dims()[t];
        let table: Vec<Vec<f64>> = prefix.chunks(d).map(<[f64]>::to_vec).collect();
        let joint = JointPmf::from_table(table)?;
        let x_t = Pmf::new(joint.y_marginal())?;
        let term = kl_divergence(&x_t, y_t)?;
        total = match (total, term) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b + mutual_information(&joint)),
            _ => ExtReal::PosInf,
        };
    }
    let pass = match (direct, total) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= MARGIN_TOLERANCE,
        (a, b) => a == b,
    };
    Ok(KlDecomposition {
        direct,
        decomposed: total,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivePartCheck {
    pub expected_positive: f64,
    /// `(μ + √(μ² + σ²)) / 2`.
    pub sqrt_bound: f64,
    /// `μ + σ/2`, only meaningful when `μ ≥ 0`.
    pub sigma_bound: Option<f64>,
    pub pass: bool,
}

/// Bounds on `E[X₊]` for a finitely supported `X`.
pub fn check_positive_part_bounds(values: &[f64], law: &Pmf) -> Result<PositivePartCheck> {
    if values.len() != law.len() {
        return Err(Error::SupportMismatch {
            left: values.len(),
            right: law.len(),
        });
    }
    let mu = law.mean(values);
    let var = law
        .probs()
        .iter()
        .zip(values)
        .map(|(p, v)| p * (v - mu) * (v - mu))
        .sum::<f64>()
        .max(0.0);
    let sigma = var.sqrt();
    let expected_positive: f64 = law.probs().iter().zip(values).map(|(p, v)| p * v.max(0.0)).sum();
    let sqrt_bound = (mu + (mu * mu + var).sqrt()) / 2.0;
    let sigma_bound = (mu >= 0.0).then_some(mu + sigma / 2.0);
    let tol = 1e-12;
    let pass = expected_positive <= sqrt_bound + tol && sigma_bound.is_none_or(|b| expected_positive <= b + tol);
    Ok(PositivePartCheck {
        expected_positive,
        sqrt_bound,
        sigma_bound,
        pass,
    })
}

/// Outcomes sorted by `r̂` descending, ties by smallest index.
fn reward_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// `V̂ ≤ E[Σ_{t≤T} p̄ r*(o_{r̂,t}) + (1 − p̄T) r*(o_{r̂,T+1})]` for coherent
/// proxies, where `p̄ = sup_o p_att(o)` and `T = ⌊1/p̄⌋`.
pub fn check_dominating_performance(prior: &WorldPrior, channel: &ProxyChannel) -> Result<SideBySide> {
    let residual = coherence_residual(prior, channel)?;
    if residual > 1e-9 {
        return Err(Error::NotCoherent { residual });
    }
    if !prior.iid_rewards() {
        return Err(Error::PreconditionFailed("rewards are not iid".into()));
    }
    if !check_reward_env_independence(prior) {
        return Err(Error::PreconditionFailed("rewards depend on the attainable set".into()));
    }
    let v_hat = Evaluator::new(prior).executed_value(channel)?;
    let p_bar = attainability_profile(prior, None)?.sup_outcome;
    let t = frontload_horizon(p_bar).min(prior.n_outcomes());
    let orders: Vec<Vec<usize>> = channel.codebook().iter().map(|c| reward_order(c.values())).collect();
    let mut bound = 0.0;
    for (i, (table, &pr)) in prior.tables().iter().zip(prior.reward_marginal()).enumerate() {
        for &(c, q) in channel.row(i) {
            let order = &orders[c];
            let mut inner = p_bar * order[..t].iter().map(|&o| table.value(o)).sum::<f64>();
            if t < order.len() {
                inner += (1.0 - p_bar * t as f64) * table.value(order[t]);
            }
            bound += pr * q * inner;
        }
    }
    Ok(SideBySide {
        lhs: v_hat,
        rhs: bound,
        pass: v_hat <= bound + MARGIN_TOLERANCE,
    })
}

/// Entropy of the reward marginal, `H(r*)`.
pub fn reward_entropy(prior: &WorldPrior) -> f64 {
    let probs = prior.reward_marginal().to_vec();
    let total: f64 = probs.iter().sum();
    debug_assert!((total - 1.0).abs() <= PMF_TOLERANCE);
    entropy(&Pmf::new(probs).expect("reward marginal is a pmf"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{
        build_iid_reward_ensemble, compose_prior, identity_channel, make_quantizer_channel, Coupling, EnsembleOptions,
        FiniteModel,
    };
    use proptest::prelude::*;

    #[test]
    fn frontloading_examples() {
        let r = check_frontloading(&[1.0, 0.0], &[1.0, 0.5], 1.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.pass), (1.0, 1.0, true));
        let r = check_frontloading(&[0.5, 0.5, 0.0], &[1.0, 1.0, 1.0], 0.5).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15 && (r.rhs - 1.0).abs() < 1e-15 && r.pass);
        assert!(matches!(
            check_frontloading(&[0.8, 0.2], &[1.0, 0.5], 0.5),
            Err(Error::CapViolated { index: 0, .. })
        ));
        assert!(matches!(
            check_frontloading(&[0.5, 0.5], &[0.5, 1.0], 0.5),
            Err(Error::NotMonotone { index: 1 })
        ));
        assert!(matches!(
            check_frontloading(&[1.0], &[1.0], 0.0),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn frontloading_supremum_is_approached() {
        use rand::{Rng, SeedableRng};
        let a = [1.0, 0.8, 0.5, 0.3, 0.1];
        let q = 0.3;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut best = f64::MIN;
        let mut rhs = 0.0;
        for _ in 0..100_000 {
            // capped weights by water-filling random proportions
            let raw: Vec<f64> = (0..a.len()).map(|_| rng.random::<f64>().powi(4)).collect();
            let mut w = vec![0.0; a.len()];
            let mut left: f64 = 1.0;
            let mut order: Vec<usize> = (0..a.len()).collect();
            order.sort_by(|&x, &y| raw[y].total_cmp(&raw[x]));
            for &i in &order {
                let take = left.min(q);
                w[i] = take;
                left -= take;
            }
            let r = check_frontloading(&w, &a, q).unwrap();
            assert!(r.pass);
            best = best.max(r.lhs);
            rhs = r.rhs;
        }
        assert!(rhs - best < 1e-12);
    }

    #[test]
    fn kl_decomposition_examples() {
        let y = vec![Pmf::new(vec![0.3, 0.7]).unwrap(), Pmf::uniform(3).unwrap()];
        let x = TuplePmf::product(&y).unwrap();
        let r = check_kl_decomposition(&x, &y).unwrap();
        assert!(r.pass && r.direct.finite().unwrap().abs() < 1e-12);

        let y1 = vec![Pmf::uniform(2).unwrap()];
        let x1 = TuplePmf::new(vec![2], vec![0.9, 0.1]).unwrap();
        let r = check_kl_decomposition(&x1, &y1).unwrap();
        let plain = kl_divergence(&Pmf::new(vec![0.9, 0.1]).unwrap(), &y1[0]).unwrap();
        assert_eq!(r.direct, plain);
        assert!(r.pass);

        let x2 = TuplePmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let r = check_kl_decomposition(&x2, &[Pmf::uniform(2).unwrap(), Pmf::uniform(2).unwrap()]).unwrap();
        // marginals are uniform, so all divergence is the dependence term
        assert!((r.direct.finite().unwrap() - 0.278_071_905_112_637_65).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn positive_part_examples() {
        let r = check_positive_part_bounds(&[0.0], &Pmf::uniform(1).unwrap()).unwrap();
        assert_eq!(
            (r.expected_positive, r.sqrt_bound, r.sigma_bound),
            (0.0, 0.0, Some(0.0))
        );
        let r = check_positive_part_bounds(&[-1.0, 1.0], &Pmf::uniform(2).unwrap()).unwrap();
        assert_eq!(
            (r.expected_positive, r.sqrt_bound, r.sigma_bound),
            (0.5, 0.5, Some(0.5))
        );
        assert!(r.pass);
        let r = check_positive_part_bounds(&[1.0], &Pmf::uniform(1).unwrap()).unwrap();
        assert_eq!((r.expected_positive, r.sigma_bound), (1.0, Some(1.0)));
    }

    fn iid_identity(n: usize) -> WorldPrior {
        let ens =
            build_iid_reward_ensemble(n, &[0.0, 1.0], &Pmf::uniform(2).unwrap(), &EnsembleOptions::default()).unwrap();
        compose_prior(
            FiniteModel::identity(n).unwrap(),
            ens,
            Coupling::Independent(Pmf::uniform(1).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn dominating_performance_examples() {
        let p = iid_identity(2);
        let r = check_dominating_performance(&p, &identity_channel(&p)).unwrap();
        assert!((r.lhs - 0.75).abs() < 1e-12 && (r.rhs - 0.75).abs() < 1e-12 && r.pass);

        let r = check_dominating_performance(&p, &make_quantizer_channel(&p, 0)).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-12 && r.rhs >= r.lhs);

        let one = iid_identity(1);
        let r = check_dominating_performance(&one, &identity_channel(&one)).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-12 && (r.rhs - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kl_decomposition_holds(
            dims in prop::collection::vec(2usize..4, 1..=3),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let size: usize = dims.iter().product();
            let x = TuplePmf::new(dims.clone(), Pmf::from_weights((0..size).map(|_| rng.random::<f64>()).collect()).unwrap().probs().to_vec()).unwrap();
            let y: Vec<Pmf> = dims.iter().map(|&d| Pmf::from_weights((0..d).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap()).collect();
            prop_assert!(check_kl_decomposition(&x, &y).unwrap().pass);
        }

        #[test]
        fn positive_part_bounds_hold(values in prop::collection::vec(-1.0f64..1.0, 1..6), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let law = Pmf::from_weights((0..values.len()).map(|_| rng.random::<f64>() + 1e-3).collect()).unwrap();
            prop_assert!(check_positive_part_bounds(&values, &law).unwrap().pass);
        }
    }
}
