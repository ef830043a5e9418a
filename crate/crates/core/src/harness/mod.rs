//! Scenario runs, parameter sweeps and result files.

mod config;
pub mod presets;
mod report;

pub use config::{
    FreeSpaceConfig, GeometryConfig, LayoutConfig, ObstructionConfig, RisPhase, Scenario, SweepSpec,
};
pub use report::{emit_results, read_results, write_results, Format, ResultRow, COLUMNS};

use rayon::prelude::*;
use serde::Serialize;

use crate::cavity::{fox_li_solve, SteadyState};
use crate::error::{Error, Result};
use crate::power::{beam_spot_area, power_budget, LinkEfficiencies, PowerBudget};

/// Cavity mode and power chain of one scenario.
#[derive(Debug, Clone)]
pub struct Solution {
    pub steady: SteadyState,
    pub budget: PowerBudget,
    /// D4σ diameter of the mode at the gain plane, meters.
    pub beam_diameter: f64,
}

/// Solves the cavity and evaluates the power chain. Errors carry no scenario context.
pub fn solve_scenario(scenario: &Scenario) -> Result<Solution> {
    let layout = scenario.layout.build()?;
    let s = &scenario.solver;
    let steady = fox_li_solve(&layout, s.seed, s.tolerance, s.max_iterations)?;
    let beam_diameter = steady.mode_at_gain.beam_diameter()?;
    let a_b = beam_spot_area(&steady.mode_at_gain)?;
    let budget = power_budget(
        &scenario.gain,
        &scenario.electronics,
        &scenario.power,
        &LinkEfficiencies::from(&steady),
        a_b,
    )?;
    Ok(Solution {
        steady,
        budget,
        beam_diameter,
    })
}

fn row_for(scenario: &Scenario, parameter: &str, value: Option<f64>) -> Result<ResultRow> {
    let mut row = ResultRow::empty(parameter, value);
    match solve_scenario(scenario) {
        Ok(sol) => {
            row.fill(&sol);
            Ok(row)
        }
        Err(Error::ModeCollapse { iterations }) => {
            row.collapse(iterations);
            Ok(row)
        }
        Err(e) => Err(e),
    }
}

/// Runs the base point of a scenario, ignoring any sweep.
///
/// A fully blocked cavity is not an error: the row reports zero output and
/// status `mode_collapse`.
pub fn run_scenario(scenario: &Scenario) -> Result<ResultRow> {
    row_for(scenario, "", None).map_err(|e| e.in_scenario(&scenario.name))
}

/// Runs every sweep point in parallel; rows come back in sweep order.
pub fn run_sweep(scenario: &Scenario) -> Result<Vec<ResultRow>> {
    run_sweep_with(scenario, true)
}

pub fn run_sweep_with(scenario: &Scenario, parallel: bool) -> Result<Vec<ResultRow>> {
    let sweep = scenario.sweep.as_ref().ok_or_else(|| {
        Error::Config(format!("scenario `{}` has no sweep", scenario.name))
            .in_scenario(&scenario.name)
    })?;
    scenario
        .validate()
        .map_err(|e| e.in_scenario(&scenario.name))?;
    let point = |&value: &f64| -> ResultRow {
        let result = scenario
            .with_value(&sweep.parameter, value)
            .and_then(|s| row_for(&s, &sweep.parameter, Some(value)));
        match result {
            Ok(row) => row,
            Err(e) => {
                log::warn!("{} = {value}: {e}", sweep.parameter);
                ResultRow::failed(&sweep.parameter, value, &e)
            }
        }
    };
    Ok(if parallel {
        sweep.values.par_iter().map(point).collect()
    } else {
        sweep.values.iter().map(point).collect()
    })
}

/// Machine-readable summary printed by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub scenario: String,
    pub row: ResultRow,
    pub budget: Option<PowerBudget>,
    pub eta_receiver: Option<f64>,
    pub eta_transmitter: Option<f64>,
    pub eigenvalue_magnitude: Option<f64>,
    /// η values are pure diffraction and aperture efficiencies; the gain-medium
    /// transit efficiency enters only the power formulas.
    pub eta_includes_gain_transit: bool,
    pub capacity_log: crate::power::LogBase,
}

pub fn solve_report(scenario: &Scenario) -> Result<SolveReport> {
    let context = |e: Error| e.in_scenario(&scenario.name);
    let (row, sol) = match solve_scenario(scenario) {
        Ok(sol) => {
            let mut row = ResultRow::empty("", None);
            row.fill(&sol);
            (row, Some(sol))
        }
        Err(Error::ModeCollapse { iterations }) => {
            let mut row = ResultRow::empty("", None);
            row.collapse(iterations);
            (row, None)
        }
        Err(e) => return Err(context(e)),
    };
    Ok(SolveReport {
        scenario: scenario.name.clone(),
        row: row.rounded(),
        budget: sol.as_ref().map(|s| s.budget),
        eta_receiver: sol.as_ref().map(|s| s.steady.eta_receiver),
        eta_transmitter: sol.as_ref().map(|s| s.steady.eta_transmitter),
        eigenvalue_magnitude: sol.as_ref().map(|s| s.steady.eigenvalue_magnitude),
        eta_includes_gain_transit: false,
        capacity_log: scenario.electronics.capacity_log,
    })
}
