//! Scenario presets shipped with the crate.

use super::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 7] = [
    "fig3",
    "fig5",
    "fig6",
    "residual-stats",
    "fig7",
    "fig9",
    "fig10",
];

pub fn preset_json(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig3" => include_str!("../../../../presets/fig3.json"),
        "fig5" => include_str!("../../../../presets/fig5.json"),
        "fig6" => include_str!("../../../../presets/fig6.json"),
        "residual-stats" => include_str!("../../../../presets/residual-stats.json"),
        "fig7" => include_str!("../../../../presets/fig7.json"),
        "fig9" => include_str!("../../../../presets/fig9.json"),
        "fig10" => include_str!("../../../../presets/fig10.json"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = preset_json(name).ok_or_else(|| {
        Error::config(
            "preset",
            format!(
                "unknown preset `{name}` (known: {})",
                PRESET_NAMES.join(", ")
            ),
        )
    })?;
    ScenarioConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name, name);
            cfg.resolve().unwrap();
        }
        assert!(preset("fig4").is_err());
    }
}
