//! Experiment configs shipped with the binary.

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

impl Preset {
    /// First comment line of the config.
    pub fn description(&self) -> &'static str {
        self.text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .map_or("", str::trim)
    }
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "aronsson-refinement", text: include_str!("../presets/aronsson-refinement.conf") },
    Preset { name: "deadcore-decay", text: include_str!("../presets/deadcore-decay.conf") },
    Preset { name: "obstacle-growth", text: include_str!("../presets/obstacle-growth.conf") },
    Preset { name: "twophase-reflection", text: include_str!("../presets/twophase-reflection.conf") },
    Preset { name: "nondegeneracy", text: include_str!("../presets/nondegeneracy.conf") },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_preset_parses_under_its_own_name() {
        for p in PRESETS {
            let cfg = parse_config(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(cfg.name, p.name);
            assert!(!p.description().is_empty());
            assert!(!cfg.analysis.checks.is_empty());
        }
        assert!(preset("nope").is_none());
    }
}
