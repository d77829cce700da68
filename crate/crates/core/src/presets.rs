//! Scenario files shipped with the simulator.

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig4",
        summary: "7 beams, random scheduling, three precoders, users per frame 1-6",
        text: include_str!("../presets/fig4.cfg"),
    },
    Preset {
        name: "fig5",
        summary: "7 beams, four schedulers with MMSE and block-SVD, perfect CSIT",
        text: include_str!("../presets/fig5.cfg"),
    },
    Preset {
        name: "fig7",
        summary: "7 beams, geographic clustering, perfect vs reported CSIT",
        text: include_str!("../presets/fig7.cfg"),
    },
    Preset {
        name: "multigw",
        summary: "19 beams, one vs three gateways vs four-color reuse",
        text: include_str!("../presets/multigw.cfg"),
    },
];

/// Look up a preset by name, with or without the `.cfg` suffix.
pub fn find(name: &str) -> Option<&'static Preset> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Result<ScenarioConfig> {
    let p = find(name).ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
    ScenarioConfig::parse(p.text, None)
}
