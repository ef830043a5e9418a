//! Wave-optics simulation of a resonant-beam link for simultaneous wireless
//! information and power transfer, with an optional reconfigurable
//! intelligent surface (RIS) folding the beam around a blocked line of sight.
//!
//! Fields live on square [`FieldGrid`]s and are carried between planes by
//! band-limited angular-spectrum propagation. [`fox_li_solve`] iterates the
//! cavity round trip to its self-reproducing mode, and [`power_budget`]
//! turns the resulting efficiencies into output, charging and
//! communication figures. [`harness`] wraps all of it in scenario files and
//! parameter sweeps.

pub mod cavity;
pub mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod motion;
pub mod power;
pub mod propagation;
pub mod validation;

pub use cavity::{
    fox_li_solve, round_trip, CavityLayout, CavityOperator, LinkMode, Obstruction, ReceiverSpec,
    SolverSettings, SteadyState, TransmitterSpec,
};
pub use error::{Error, Result};
pub use field::{FieldGrid, GridSpec};
pub use geometry::{derive_geometry, ChannelGeometry, RisSpec};
pub use harness::{run_scenario, run_sweep, Format, ResultRow, Scenario};
pub use motion::{Pose, RotationMatrix};
pub use power::{power_budget, GainMediumSpec, PowerBudget, ReceiverElectronics};
pub use propagation::{angular_spectrum_propagate, ApertureSpec, InvasionSide, Propagator};
