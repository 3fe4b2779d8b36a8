use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::messaging::ForwardingMode;
use crate::routing::{RoutingParams, SimilarityMode};
use crate::social_graph::{NodeId, SocialGraph};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalStrategy {
    Random,
    HighDegree,
}

impl RemovalStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalStrategy::Random => "random",
            RemovalStrategy::HighDegree => "high_degree",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Removal {
    pub strategy: RemovalStrategy,
    /// Share of all nodes that stop participating.
    pub fraction: f64,
    pub at_day: u32,
}

fn schema_one() -> u32 {
    CONFIG_SCHEMA
}

/// One simulation run. The JSON form uses the same field names; every field
/// except `seed` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(default = "schema_one")]
    pub schema: u32,
    pub months: u32,
    pub days_per_month: u32,
    pub pairs: Vec<(NodeId, NodeId)>,
    pub messages_per_pair_per_month: u32,
    pub capacity: usize,
    pub ttl_days: u32,
    pub seed: u64,
    pub crypto_enabled: bool,
    /// Group size used when `crypto_enabled` is set.
    pub crypto_bits: u32,
    pub removal: Option<Removal>,
    pub uploads_window: usize,
    pub estimate_window: usize,
    pub similarity: SimilarityMode,
    pub forwarding: ForwardingMode,
    /// Day of the month on which pair messages are created.
    pub message_day: u32,
    /// Draw each message's creation day uniformly within its month instead.
    pub message_day_jitter: bool,
    /// Keep per-copy hop traces (needed for path analysis).
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let r = RoutingParams::default();
        Self {
            schema: CONFIG_SCHEMA,
            months: 64,
            days_per_month: 30,
            pairs: Vec::new(),
            messages_per_pair_per_month: 1,
            capacity: r.capacity,
            ttl_days: r.ttl_days,
            seed: 0,
            crypto_enabled: false,
            crypto_bits: 256,
            removal: None,
            uploads_window: r.uploads_window,
            estimate_window: r.estimate_window,
            similarity: r.similarity,
            forwarding: r.forwarding,
            message_day: 0,
            message_day_jitter: false,
            trace: true,
        }
    }
}

fn field(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl SimConfig {
    pub fn total_days(&self) -> u32 {
        self.months * self.days_per_month
    }

    pub fn routing_params(&self) -> RoutingParams {
        RoutingParams {
            uploads_window: self.uploads_window,
            ttl_days: self.ttl_days,
            capacity: self.capacity,
            estimate_window: self.estimate_window,
            similarity: self.similarity,
            forwarding: self.forwarding,
        }
    }

    /// Checks the fields that do not depend on the network.
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(field("schema", format!("unsupported schema {}, expected {CONFIG_SCHEMA}", self.schema)));
        }
        for (name, v) in [
            ("months", self.months as usize),
            ("days_per_month", self.days_per_month as usize),
            ("capacity", self.capacity),
            ("ttl_days", self.ttl_days as usize),
            ("uploads_window", self.uploads_window),
            ("estimate_window", self.estimate_window),
        ] {
            if v == 0 {
                return Err(field(name, "must be positive"));
            }
        }
        if self.message_day >= self.days_per_month {
            return Err(field("message_day", "must fall inside the month"));
        }
        if let Some(r) = &self.removal {
            if !(0.0..1.0).contains(&r.fraction) {
                return Err(field("removal.fraction", "must lie in [0, 1)"));
            }
        }
        if self.crypto_enabled && ![256, 1024].contains(&self.crypto_bits) {
            return Err(field("crypto_bits", "simulated messages need a 256- or 1024-bit group"));
        }
        for (i, (s, r)) in self.pairs.iter().enumerate() {
            if s == r {
                return Err(field(&format!("pairs[{i}]"), "sender and receiver must differ"));
            }
        }
        Ok(())
    }

    /// Full validation against the network the run will use.
    pub fn validate_for(&self, graph: &SocialGraph) -> Result<()> {
        self.validate()?;
        for (i, (s, r)) in self.pairs.iter().enumerate() {
            for n in [s, r] {
                if !graph.contains(*n) {
                    return Err(field(&format!("pairs[{i}]"), format!("node {n} is not in the network")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults_and_roundtrip() {
        let c: SimConfig = serde_json::from_str(r#"{"seed": 4, "pairs": [[1, 2]]}"#).unwrap();
        assert_eq!(c.months, 64);
        assert_eq!(c.pairs, vec![(NodeId(1), NodeId(2))]);
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(serde_json::from_str::<SimConfig>(r#"{"seed": 1, "mnths": 3}"#).is_err());
        let c = SimConfig {
            pairs: vec![(NodeId(3), NodeId(3))],
            ..SimConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { path, .. }) if path == "pairs[0]"));
        let c = SimConfig {
            removal: Some(Removal {
                strategy: RemovalStrategy::Random,
                fraction: 1.0,
                at_day: 3,
            }),
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
