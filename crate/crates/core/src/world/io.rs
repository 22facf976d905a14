use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::channel::ProxyChannel;
use super::model::OutcomePartition;
use super::prior::WorldPrior;
use crate::error::{Error, Result};

pub const WORLD_SCHEMA: &str = "ghl-world/1";

/// On-disk bundle of a prior with an optional channel and partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDocument {
    pub schema: String,
    pub prior: WorldPrior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ProxyChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<OutcomePartition>,
}

impl WorldDocument {
    pub fn new(prior: WorldPrior) -> Self {
        WorldDocument {
            schema: WORLD_SCHEMA.to_string(),
            prior,
            channel: None,
            partition: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WorldDocument = serde_json::from_str(text)?;
        if doc.schema != WORLD_SCHEMA {
            return Err(Error::ConfigError(format!(
                "unsupported world schema {:?}, expected {WORLD_SCHEMA:?}",
                doc.schema
            )));
        }
        if let Some(ch) = &doc.channel {
            ch.check_against(&doc.prior)?;
        }
        if let Some(p) = &doc.partition {
            if p.n_outcomes() != doc.prior.n_outcomes() {
                return Err(Error::PartitionMismatch(
                    "partition size differs from outcome count".into(),
                ));
            }
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WorldDocument::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Hex SHA-256 of the prior's canonical JSON.
pub fn instance_digest(prior: &WorldPrior) -> String {
    let json = serde_json::to_vec(prior).expect("priors always serialize");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Pmf;
    use crate::world::{
        build_iid_reward_ensemble, compose_prior, make_quantizer_channel, Coupling, EnsembleOptions, FiniteModel,
    };

    #[test]
    fn round_trip_preserves_everything() {
        let ens = build_iid_reward_ensemble(
            3,
            &[-1.0, 0.0, 1.0],
            &Pmf::new(vec![0.2, 0.3, 0.5]).unwrap(),
            &EnsembleOptions::default(),
        )
        .unwrap();
        let prior = compose_prior(
            FiniteModel::identity(3).unwrap(),
            ens,
            Coupling::Independent(Pmf::uniform(1).unwrap()),
        )
        .unwrap();
        let mut doc = WorldDocument::new(prior.clone());
        doc.channel = Some(make_quantizer_channel(&prior, 2));
        doc.partition = Some(OutcomePartition::trivial(3).unwrap());
        let text = doc.to_json().unwrap();
        let back = WorldDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert!(back.prior.iid_rewards());
    }

    #[test]
    fn rejects_wrong_schema_and_tampering() {
        let ens =
            build_iid_reward_ensemble(1, &[0.0, 1.0], &Pmf::uniform(2).unwrap(), &EnsembleOptions::default()).unwrap();
        let prior = compose_prior(
            FiniteModel::identity(1).unwrap(),
            ens,
            Coupling::Independent(Pmf::uniform(1).unwrap()),
        )
        .unwrap();
        let text = WorldDocument::new(prior).to_json().unwrap();
        let wrong = text.replace(WORLD_SCHEMA, "ghl-world/0");
        assert!(matches!(WorldDocument::from_json(&wrong), Err(Error::ConfigError(_))));
        let tampered = text.replacen("1000", "900", 1);
        assert!(WorldDocument::from_json(&tampered).is_err());
    }
}
