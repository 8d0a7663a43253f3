//! Named configurations reproducing the published experiments.

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "example1-fig1",
        description: "Fourier problem, Q from 51 modes, fine spaces of 101, 401 and 1601 modes",
        toml: include_str!("../../presets/example1-fig1.toml"),
    },
    Preset {
        name: "example1-rates",
        description: "Fourier sweep (2k+1, 4k+1), k = 50..500",
        toml: include_str!("../../presets/example1-rates.toml"),
    },
    Preset {
        name: "example1-rates-20",
        description: "Fourier sweep (2k+1, 20k+1), k = 4..40",
        toml: include_str!("../../presets/example1-rates-20.toml"),
    },
    Preset {
        name: "example2-fig4",
        description: "block FEM, inverse mode, h = 1/49 to 1/576, window [1/4, 9/10]",
        toml: include_str!("../../presets/example2-fig4.toml"),
    },
    Preset {
        name: "example2-fig5",
        description: "block FEM, inverse mode, h = 1/49 to 1/576, window [1/20, 1/5]",
        toml: include_str!("../../presets/example2-fig5.toml"),
    },
    Preset {
        name: "example2-table1",
        description: "block FEM sweep (h, h/2), h = 1/9..1/159, approximation of 1/λ₁⁺",
        toml: include_str!("../../presets/example2-table1.toml"),
    },
    Preset {
        name: "example2-h4",
        description: "block FEM sweep (h, h/4), h = 1/9..1/79",
        toml: include_str!("../../presets/example2-h4.toml"),
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}` (see `preset list`)")))
}

pub fn config(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(find(name)?.toml)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let cfg = config(p.name).unwrap();
            assert_eq!(cfg.output.dir.to_str(), Some(p.name));
        }
    }
}
