use super::config::Scenario;
use super::ScenarioError;

/// A scenario shipped with the crate.
#[derive(Debug, Clone, Copy)]
pub struct BundledScenario {
    pub name: &'static str,
    pub source: &'static str,
}

impl BundledScenario {
    pub fn load(&self) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml_str(self.source)
    }

    pub fn description(&self) -> String {
        self.load()
            .map(|s| s.description.lines().next().unwrap_or_default().to_string())
            .unwrap_or_default()
    }
}

const BUNDLED: &[BundledScenario] = &[
    BundledScenario {
        name: "ou_1d",
        source: include_str!("../../scenarios/ou_1d.toml"),
    },
    BundledScenario {
        name: "theorem_form_lambda4",
        source: include_str!("../../scenarios/theorem_form_lambda4.toml"),
    },
    BundledScenario {
        name: "cubic_drift",
        source: include_str!("../../scenarios/cubic_drift.toml"),
    },
    BundledScenario {
        name: "cubic_density",
        source: include_str!("../../scenarios/cubic_density.toml"),
    },
    BundledScenario {
        name: "sign_drift_regularized",
        source: include_str!("../../scenarios/sign_drift_regularized.toml"),
    },
    BundledScenario {
        name: "rotational_ou_2d",
        source: include_str!("../../scenarios/rotational_ou_2d.toml"),
    },
    BundledScenario {
        name: "scheduled_ou",
        source: include_str!("../../scenarios/scheduled_ou.toml"),
    },
    BundledScenario {
        name: "wave_ou_1d",
        source: include_str!("../../scenarios/wave_ou_1d.toml"),
    },
];

pub fn bundled_scenarios() -> &'static [BundledScenario] {
    BUNDLED
}

pub fn bundled_scenario(name: &str) -> Option<&'static BundledScenario> {
    BUNDLED.iter().find(|b| b.name == name)
}
