//! Versioned JSON spec files: a named scenario or an inline gain network,
//! plus the command parameters. Unknown fields are rejected so a typo
//! cannot silently change a run.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sgk_core::certify::{SampleSpace, Strategy};
use sgk_core::gaingraph::GainNetwork;
use sgk_core::scenarios::Scenario;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: u32,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub network: Option<GainNetwork>,
    #[serde(default)]
    pub params: Params,
}

/// Command parameters with their defaults; every field can be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Domain cap for below-identity and scaling checks.
    pub s_max: f64,
    /// Grid resolution for the same checks.
    pub grid: usize,
    /// Relative strictness margin for below-identity verdicts.
    pub tol: f64,
    pub seed: u64,
    /// Sample count for falsification runs.
    pub samples: usize,
    pub strategy: Strategy,
    /// Horizon cap for the decomposition search.
    pub m_cap: usize,
    /// Scaling inflation; omitted means automatic back-off.
    pub epsilon: Option<f64>,
    /// Which certificate check `certify` runs: `sandwich`, `max`, or
    /// `dissipative`.
    pub form: String,
    /// Simulation length for `simulate`.
    pub horizon: usize,
    pub initial_state: Option<Vec<f64>>,
    /// Constant input applied during `simulate` (zero input if omitted).
    pub constant_input: Option<Vec<f64>>,
    /// Multiplies the certificate rate before checking; values above one
    /// weaken it, values below one deliberately break it.
    pub alpha_scale: f64,
    pub state_box: Option<Vec<(f64, f64)>>,
    pub input_box: Option<Vec<(f64, f64)>>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            s_max: 10.0,
            grid: 512,
            tol: 1e-9,
            seed: 42,
            samples: 10_000,
            strategy: Strategy::Mixed,
            m_cap: 64,
            epsilon: None,
            form: "max".into(),
            horizon: 1000,
            initial_state: None,
            constant_input: None,
            alpha_scale: 1.0,
            state_box: None,
            input_box: None,
        }
    }
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read spec file {}", path.display()))?;
        let spec: SpecFile = serde_json::from_str(&text)
            .with_context(|| format!("schema error in {}", path.display()))?;
        if spec.version != 1 {
            bail!("unsupported spec version {} (expected 1)", spec.version);
        }
        if spec.scenario.is_some() && spec.network.is_some() {
            bail!("spec must name a scenario or define a network, not both");
        }
        Ok(spec)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let name = self
            .scenario
            .as_deref()
            .context("this command needs a \"scenario\" entry in the spec")?;
        sgk_core::scenarios::by_name(name).with_context(|| {
            format!(
                "unknown scenario {name:?} (available: {:?})",
                sgk_core::scenarios::SCENARIO_NAMES
            )
        })
    }

    /// The scenario sample space with the spec parameter overrides applied.
    pub fn sample_space(&self, base: &SampleSpace) -> SampleSpace {
        let p = &self.params;
        SampleSpace::new(
            p.state_box
                .clone()
                .unwrap_or_else(|| base.state_box.clone()),
            p.input_box
                .clone()
                .unwrap_or_else(|| base.input_box.clone()),
            p.samples,
            p.seed,
            p.strategy,
        )
    }

    /// The effective configuration, embedded in every report so a run can
    /// be reproduced from its output alone.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::json!({
            "version": self.version,
            "scenario": self.scenario,
            "network": self.network,
            "params": self.params,
        })
    }
}
