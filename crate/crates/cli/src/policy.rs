use fairsched::exact::{self, Rational};
use fairsched::schedulers::{OrderMode, PolicyConfig, PolicyKind, SimError};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Serializable policy choice; rationals are kept as written (`"1/2"`, `"0.5"`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<String>,
    #[serde(default)]
    pub order: OrderMode,
    #[serde(default)]
    pub allow_surprises: bool,
}

fn rational(flag: &str, s: &str) -> CliResult<Rational> {
    exact::parse_rational(s).map_err(|_| CliError::Usage(format!("{flag}: {s:?} is not a rational number")))
}

impl PolicySpec {
    pub fn to_config(&self) -> CliResult<PolicyConfig> {
        let cfg = PolicyConfig {
            kind: self.policy,
            epsilon: self.epsilon.as_deref().map(|e| rational("--epsilon", e)).transpose()?,
            speed: self.speed.as_deref().map(|s| rational("--speed", s)).transpose()?,
            order_mode: self.order,
            allow_surprises: self.allow_surprises,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &PolicyConfig) -> Self {
        Self {
            policy: cfg.kind,
            epsilon: cfg.epsilon.as_ref().map(exact::format_rational),
            speed: cfg.speed.as_ref().map(exact::format_rational),
            order: cfg.order_mode,
            allow_surprises: cfg.allow_surprises,
        }
    }
}

/// Maps engine refusals to exit codes.
pub fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::SurprisesNotAllowed => CliError::Incompatible(e.to_string()),
        SimError::Config(_) | SimError::InvalidInstance(_) => CliError::Usage(e.to_string()),
        other => CliError::Other(other.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairsched::exact::rat;

    #[test]
    fn specs_round_trip_through_configs() {
        let cfg = PolicyConfig::laps(rat(1, 3), OrderMode::DynamicCompletion).with_speed(rat(3, 2));
        let spec = PolicySpec::from_config(&cfg);
        assert_eq!(spec.epsilon.as_deref(), Some("1/3"));
        assert_eq!(spec.to_config().unwrap(), cfg);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<PolicySpec>(&json).unwrap(), spec);
    }

    #[test]
    fn decimal_epsilon_is_exact() {
        let spec = PolicySpec {
            policy: PolicyKind::Ft,
            epsilon: Some("0.25".into()),
            speed: None,
            order: OrderMode::default(),
            allow_surprises: false,
        };
        assert_eq!(spec.to_config().unwrap().epsilon, Some(rat(1, 4)));
        let bad = PolicySpec { epsilon: Some("x".into()), ..spec };
        assert!(matches!(bad.to_config(), Err(CliError::Usage(_))));
    }
}
