//! Named desk-scale scenarios: a baseline plus the void, multi-target,
//! extended-target, obstacle and sharer case studies.

use super::config::{Mode, ScenarioConfig, TargetSpec};
use crate::error::{Error, Result};

pub const SCENARIO_NAMES: [&str; 6] = [
    "baseline",
    "void",
    "two-targets",
    "extended-targets",
    "obstacle",
    "sharers",
];

pub fn library_scenario(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        mode: Mode::Real,
        targets: vec![TargetSpec::point(17.0, 10.0)],
        ..ScenarioConfig::default()
    };
    let cfg = match name {
        "baseline" => base,
        "void" => ScenarioConfig {
            voids: vec![[7.0, 6.0, 12.0, 14.0]],
            ..base
        },
        "two-targets" => ScenarioConfig {
            targets: vec![TargetSpec::point(3.0, 3.0), TargetSpec::point(17.0, 17.0)],
            ..base
        },
        "extended-targets" => ScenarioConfig {
            targets: vec![
                TargetSpec::rect(1.0, 1.0, 4.0, 3.0),
                TargetSpec::rect(16.0, 16.0, 19.0, 19.0),
            ],
            ..base
        },
        "obstacle" => ScenarioConfig {
            obstacles: vec![[12.0, 5.0, 13.0, 15.0]],
            ..base
        },
        "sharers" => ScenarioConfig {
            targets: vec![TargetSpec::point(10.0, 10.0)],
            sharer_fraction: 0.3,
            ..base
        },
        _ => {
            return Err(Error::config(
                "scenario",
                format!(
                    "unknown scenario `{name}`; known: {}",
                    SCENARIO_NAMES.join(", ")
                ),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
