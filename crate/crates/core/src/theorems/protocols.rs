use std::collections::HashMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy, mutual_information, Pmf};
use crate::world::{joint_reward_proxy, make_quantizer_channel, WorldPrior};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedLengthCheck {
    pub k_bits: u32,
    pub information: f64,
    pub pass: bool,
}

/// A `k`-bit message can carry at most `k` bits about `r*`.
pub fn check_fixed_length_protocol(prior: &WorldPrior, k_bits: u32) -> Result<FixedLengthCheck> {
    let channel = make_quantizer_channel(prior, k_bits);
    let information = mutual_information(&joint_reward_proxy(prior, &channel)?);
    Ok(FixedLengthCheck {
        k_bits,
        information,
        pass: k_bits as f64 >= information - 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableLengthCheck {
    pub expected_length: f64,
    pub information: f64,
    /// `I − log₂(I + 1) − log₂ e`.
    pub bound: f64,
    pub pass: bool,
}

/// `E|M| ≥ I − log₂(I + 1) − log₂ e` for an injective encoding of the reward
/// table, decoded exactly so that `I = H(r*)`.
pub fn check_variable_length_protocol(prior: &WorldPrior, encoder: &[String]) -> Result<VariableLengthCheck> {
    if encoder.len() != prior.n_rewards() {
        return Err(Error::SupportMismatch {
            left: encoder.len(),
            right: prior.n_rewards(),
        });
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, word) in encoder.iter().enumerate() {
        if let Some(bad) = word.chars().find(|c| *c != '0' && *c != '1') {
            return Err(Error::DomainError(format!("codeword {i} contains {bad:?}")));
        }
        if prior.reward_marginal()[i] > 0.0 {
            if let Some(&first) = seen.get(word.as_str()) {
                return Err(Error::NotInjective { first, second: i });
            }
            seen.insert(word, i);
        }
    }
    let marginal = Pmf::new(prior.reward_marginal().to_vec())?;
    let information = entropy(&marginal);
    let expected_length: f64 = encoder
        .iter()
        .zip(marginal.probs())
        .map(|(w, p)| p * w.len() as f64)
        .sum();
    let bound = information - (information + 1.0).log2() - E.log2();
    Ok(VariableLengthCheck {
        expected_length,
        information,
        bound,
        pass: expected_length >= bound - 1e-9,
    })
}

/// Binary expansion of the index, `⌈log₂ n⌉` bits each.
pub fn fixed_length_code(n: usize) -> Vec<String> {
    let width = if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    };
    (0..n)
        .map(|i| {
            if width == 0 {
                String::new()
            } else {
                format!("{i:0width$b}")
            }
        })
        .collect()
}

/// The shortest injective code: the likeliest symbol gets the empty word,
/// then `0`, `1`, `00`, `01`, and so on.
pub fn one_to_one_code(probs: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut code = vec![String::new(); probs.len()];
    for (rank, &i) in order.iter().enumerate() {
        // rank r ↦ binary of r + 1 without its leading one
        let bits = format!("{:b}", rank + 1);
        code[i] = bits[1..].to_string();
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{compose_prior, Coupling, FiniteModel, RewardEnsemble, RewardTable};

    fn uniform_prior(n_tables: usize) -> WorldPrior {
        let tables = (0..n_tables)
            .map(|i| RewardTable::from_units(vec![i as i64, 0], 1000).unwrap())
            .collect();
        let ens = RewardEnsemble::explicit(tables, vec![1.0 / n_tables as f64; n_tables]).unwrap();
        compose_prior(
            FiniteModel::identity(2).unwrap(),
            ens,
            Coupling::Independent(Pmf::uniform(1).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn codes() {
        assert_eq!(fixed_length_code(1), vec![""]);
        assert_eq!(fixed_length_code(3), vec!["00", "01", "10"]);
        assert_eq!(one_to_one_code(&[0.1, 0.5, 0.2, 0.2]), vec!["00", "", "0", "1"]);
    }

    #[test]
    fn fixed_length_examples() {
        let p = uniform_prior(8);
        let r = check_fixed_length_protocol(&p, 0).unwrap();
        assert!(r.information.abs() < 1e-12 && r.pass);
        let r = check_fixed_length_protocol(&p, 3).unwrap();
        assert!((r.information - 3.0).abs() < 1e-12 && r.pass);
        let r = check_fixed_length_protocol(&p, 5).unwrap();
        assert!((r.information - 3.0).abs() < 1e-12 && r.pass);
    }

    #[test]
    fn variable_length_uniform_256() {
        let p = uniform_prior(256);
        let r = check_variable_length_protocol(&p, &fixed_length_code(256)).unwrap();
        assert_eq!(r.expected_length, 8.0);
        assert!((r.bound - 3.387_379_957_668_724).abs() < 1e-12);
        assert!(r.pass);
        let short = check_variable_length_protocol(&p, &one_to_one_code(p.reward_marginal())).unwrap();
        assert!(short.pass && short.expected_length < 8.0);
    }

    #[test]
    fn variable_length_rejects_collisions() {
        let p = uniform_prior(2);
        let code = vec!["1".to_string(), "1".to_string()];
        assert!(matches!(
            check_variable_length_protocol(&p, &code),
            Err(Error::NotInjective { first: 0, second: 1 })
        ));
        let r = check_variable_length_protocol(&p, &["".into(), "0".into()]).unwrap();
        assert!(r.bound < 0.0 && r.pass);
    }
}
