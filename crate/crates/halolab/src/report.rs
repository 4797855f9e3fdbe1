//! Experiment configuration and run reports. A config fully determines a
//! run; a report echoes its config so any verdict can be replayed. JSON is
//! the source of truth; CSV projections are derived. Timing data is kept
//! out of the deterministic payload so identical configs produce byte-
//! identical reports.

use crate::Caps;
use serde::{Deserialize, Serialize};

/// A fully deterministic experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Experiment name (a CLI subcommand).
    pub experiment: String,
    /// Backend spec, when the experiment needs one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Base group name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    /// Free-form experiment parameters.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    /// Seed for any randomised trials.
    #[serde(default)]
    pub seed: u64,
    /// Resource caps for the run.
    #[serde(default)]
    pub caps: Caps,
}

/// One named verdict inside a report. `claim` is a stable slug naming the
/// property checked, so downstream tooling can track verdicts across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub claim: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

/// The outcome of a run: config echo plus per-check verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub verdicts: Vec<VerdictEntry>,
    pub ok: bool,
    /// Wall-clock timings per verdict, only when requested: keeping them
    /// out of the default payload makes reports byte-identical across runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<u128>>,
}

impl RunReport {
    pub fn new(config: ExperimentConfig) -> RunReport {
        RunReport { config, verdicts: Vec::new(), ok: true, timings_ms: None }
    }

    pub fn push(&mut self, claim: &str, pass: bool, details: serde_json::Value) {
        self.ok &= pass;
        self.verdicts.push(VerdictEntry { claim: claim.into(), pass, details });
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// CSV projection: one line per verdict.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("claim,pass\n");
        for v in &self.verdicts {
            out.push_str(&format!("{},{}\n", v.claim, v.pass));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_are_deterministic() {
        let config = ExperimentConfig {
            experiment: "demo".into(),
            backend: Some("lighter:2".into()),
            base: Some("Z".into()),
            params: serde_json::json!({"n": 3}),
            seed: 7,
            caps: Caps::default(),
        };
        let mut a = RunReport::new(config.clone());
        a.push("demo-claim", true, serde_json::json!({"value": 1}));
        let mut b = RunReport::new(config);
        b.push("demo-claim", true, serde_json::json!({"value": 1}));
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert!(a.to_csv().contains("demo-claim,true"));
    }
}
