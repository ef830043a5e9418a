//! Scenario files shipped with the library.

use super::Scenario;
use crate::error::{Error, Result};

pub struct Preset {
    pub name: &'static str,
    pub source: &'static str,
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            source: include_str!(concat!("../../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("baseline-los"),
    preset!("invasion-sweep"),
    preset!("distance-sweep"),
    preset!("horizontal-placement"),
    preset!("vertical-height"),
    preset!("translation-sweep"),
    preset!("rotation-sweep"),
];

impl Preset {
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_toml_str(self.source).map_err(|e| e.in_scenario(self.name))
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Result<Scenario> {
    find(name)
        .ok_or_else(|| Error::Config(format!("no preset named `{name}`")))?
        .scenario()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_is_named_after_its_file() {
        for p in PRESETS {
            let s = p.scenario().unwrap();
            assert_eq!(s.name, p.name);
            assert!(!s.description.is_empty());
        }
    }

    #[test]
    fn sweeps_are_sorted() {
        for p in PRESETS {
            if let Some(sweep) = p.scenario().unwrap().sweep {
                assert!(sweep.values.windows(2).all(|w| w[0] < w[1]), "{}", p.name);
            }
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(load("nope").is_err());
        assert!(find("baseline-los").is_some());
    }
}
