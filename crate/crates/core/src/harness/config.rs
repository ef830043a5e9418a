//! Scenario files.
//!
//! A scenario is a flat TOML document of dotted keys, e.g.
//!
//! ```toml
//! name = "example"
//! layout.free_space.mode = "nlos"
//! layout.free_space.geometry.z = 2.0
//! power.p_in = 200.0
//! sweep.parameter = "layout.free_space.geometry.z"
//! sweep.values = [1.0, 2.0, 4.0]
//! ```
//!
//! Keys are merged over the built-in defaults, so a file only lists what it
//! changes. Lengths are in meters, powers in watts and angles in radians,
//! except `gain.saturation_intensity` (W/cm²) and `gain.cross_section_area` (cm²).

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::cavity::{
    CavityLayout, FreeSpaceSpec, LinkMode, Obstruction, ReceiverSpec, SolverSettings,
    TransmitterSpec,
};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::geometry::{derive_geometry_with, ris_phase_from_geometry, PathLengthForm, RisSpec};
use crate::power::{GainMediumSpec, PowerInputs, ReceiverElectronics};
use crate::propagation::{ApertureSpec, InvasionSide};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Axial transmitter-receiver distance.
    pub z: f64,
    /// Axial position of the RIS as a fraction of `z`.
    pub z_ti_ratio: f64,
    /// Height of the RIS above the axis.
    pub d_iz: f64,
    pub path_length: PathLengthForm,
}

/// Half-plane intrusion into a stop placed in the line-of-sight channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionConfig {
    pub enabled: bool,
    /// Intrusion depth measured from the stop rim.
    pub depth: f64,
    pub side: InvasionSide,
    pub radius: f64,
    /// Axial position as a fraction of `z`.
    pub position_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisPhase {
    /// Steer with the phase implied by the channel geometry.
    Geometry,
    /// Use `ris.theta` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSpaceConfig {
    pub mode: LinkMode,
    pub geometry: GeometryConfig,
    pub ris: RisSpec,
    pub ris_phase: RisPhase,
    pub obstruction: ObstructionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub grid: GridSpec,
    pub wavelength: f64,
    pub transmitter: TransmitterSpec,
    pub free_space: FreeSpaceConfig,
    pub receiver: ReceiverSpec,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            grid: GridSpec::default(),
            wavelength: 1.064e-6,
            transmitter: TransmitterSpec::default(),
            free_space: FreeSpaceConfig {
                mode: LinkMode::Los,
                geometry: GeometryConfig {
                    z: 1.0,
                    z_ti_ratio: 0.5,
                    d_iz: 0.5,
                    path_length: PathLengthForm::Euclidean,
                },
                ris: RisSpec::default(),
                ris_phase: RisPhase::Geometry,
                obstruction: ObstructionConfig {
                    enabled: false,
                    depth: 0.0,
                    side: InvasionSide::PositiveX,
                    radius: 2.5e-3,
                    position_ratio: 0.5,
                },
            },
            receiver: ReceiverSpec::default(),
        }
    }
}

impl LayoutConfig {
    pub fn build(&self) -> Result<CavityLayout> {
        let fs = &self.free_space;
        let g = &fs.geometry;
        let geometry = derive_geometry_with(g.z, g.z * g.z_ti_ratio, g.d_iz, g.path_length)?;
        let mut ris = fs.ris;
        if fs.ris_phase == RisPhase::Geometry {
            ris.theta = ris_phase_from_geometry(&geometry, self.wavelength, ris.side_length);
        }
        let obstruction = fs.obstruction.enabled.then(|| Obstruction {
            aperture: ApertureSpec::stop(fs.obstruction.radius)
                .with_obstruction(fs.obstruction.depth, fs.obstruction.side),
            position: Some(fs.obstruction.position_ratio * g.z),
        });
        let layout = CavityLayout {
            grid: self.grid,
            wavelength: self.wavelength,
            transmitter: self.transmitter.clone(),
            free_space: FreeSpaceSpec {
                mode: fs.mode,
                geometry,
                ris,
                obstruction,
            },
            receiver: self.receiver.clone(),
        };
        layout.validate()?;
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path of a numeric scenario key.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub layout: LayoutConfig,
    pub power: PowerInputs,
    pub gain: GainMediumSpec,
    pub electronics: ReceiverElectronics,
    pub solver: SolverSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            description: String::new(),
            layout: LayoutConfig::default(),
            power: PowerInputs::default(),
            gain: GainMediumSpec::default(),
            electronics: ReceiverElectronics::default(),
            solver: SolverSettings::default(),
            sweep: None,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let over: Table = toml::from_str(text).map_err(config_err)?;
        let mut table = Scenario::default().to_table()?;
        merge(&mut table, over);
        let scenario = Scenario::from_table(table)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    pub fn to_table(&self) -> Result<Table> {
        Table::try_from(self).map_err(config_err)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    fn from_table(table: Table) -> Result<Scenario> {
        table.try_into().map_err(config_err)
    }

    /// Copy of the scenario with one numeric key replaced.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut table = self.to_table()?;
        set_scalar(&mut table, path, value)?;
        let mut scenario = Scenario::from_table(table)?;
        scenario.sweep = None;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.build()?;
        self.power.validate()?;
        self.gain.validate()?;
        self.electronics.validate()?;
        self.solver.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values is empty".into()));
            }
            if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
            let mut table = self.to_table()?;
            set_scalar(&mut table, &sweep.parameter, sweep.values[0])?;
        }
        Ok(())
    }
}

fn set_scalar(table: &mut Table, path: &str, value: f64) -> Result<()> {
    let mut keys = path.split('.').peekable();
    let mut current = table;
    while let Some(key) = keys.next() {
        let slot = current
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("unknown scenario key `{path}`")))?;
        if keys.peek().is_none() {
            *slot = match slot {
                Value::Float(_) => Value::Float(value),
                Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => {
                    Value::Integer(value as i64)
                }
                Value::Integer(_) => {
                    return Err(Error::Config(format!(
                        "`{path}` takes integers, got {value}"
                    )))
                }
                _ => return Err(Error::Config(format!("`{path}` is not a numeric key"))),
            };
            return Ok(());
        }
        current = match slot {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("unknown scenario key `{path}`"))),
        };
    }
    Err(Error::Config("empty sweep parameter".into()))
}
