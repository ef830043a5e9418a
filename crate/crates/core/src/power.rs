//! Analytic power and communication chain.
//!
//! Intensities and areas follow laser-bench units: W/cm² and cm².

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::cavity::SteadyState;
use crate::error::{Error, Result};
use crate::field::FieldGrid;

/// Gain medium parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainMediumSpec {
    /// Saturation intensity, W/cm².
    pub saturation_intensity: f64,
    pub excitation_efficiency: f64,
    /// Single-pass transit efficiency of the medium.
    pub transit_efficiency: f64,
    /// Cross-section area, cm².
    pub cross_section_area: f64,
}

impl Default for GainMediumSpec {
    fn default() -> Self {
        GainMediumSpec {
            saturation_intensity: 1260.0,
            excitation_efficiency: 0.72,
            transit_efficiency: 0.99,
            cross_section_area: PI * 0.25 * 0.25,
        }
    }
}

impl GainMediumSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("saturation_intensity", self.saturation_intensity),
            ("excitation_efficiency", self.excitation_efficiency),
            ("transit_efficiency", self.transit_efficiency),
            ("cross_section_area", self.cross_section_area),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("excitation_efficiency", self.excitation_efficiency),
            ("transit_efficiency", self.transit_efficiency),
        ] {
            if v > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must not exceed 1, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Small-signal gain g0·l for a given pump power in watts.
    pub fn small_signal_gain(&self, p_in: f64) -> f64 {
        self.excitation_efficiency * p_in / (self.cross_section_area * self.saturation_intensity)
    }
}

/// Photovoltaic single-diode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvSpec {
    /// Load resistance, ohms.
    pub load_resistance: f64,
    pub series_resistance: f64,
    pub shunt_resistance: f64,
    /// Conversion responsivity, A/W.
    pub responsivity: f64,
    /// Reverse saturation current, A.
    pub dark_current: f64,
    pub diode_quality: f64,
    pub cells: u32,
}

impl Default for PvSpec {
    fn default() -> Self {
        PvSpec {
            load_resistance: 100.0,
            series_resistance: 0.93,
            shunt_resistance: 52.6e3,
            responsivity: 0.0161,
            dark_current: 9.89e-9,
            diode_quality: 1.105,
            cells: 40,
        }
    }
}

/// Avalanche photodiode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApdSpec {
    /// A/W.
    pub responsivity: f64,
    /// Background current, A.
    pub background_current: f64,
    /// Noise bandwidth, Hz.
    pub noise_bandwidth: f64,
    /// Load resistance, ohms.
    pub load_resistance: f64,
}

impl Default for ApdSpec {
    fn default() -> Self {
        ApdSpec {
            responsivity: 0.6,
            background_current: 5100e-6,
            noise_bandwidth: 811.7e6,
            load_resistance: 10e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Electron charge, C.
    pub electron_charge: f64,
    /// Boltzmann constant, J/K.
    pub boltzmann: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            electron_charge: 1.602176634e-19,
            boltzmann: 1.38e-23,
            temperature: 300.0,
        }
    }
}

/// Logarithm used for the spectral efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Binary,
}

impl LogBase {
    fn ln_1p(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln_1p(),
            LogBase::Binary => x.ln_1p() / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverElectronics {
    pub pv: PvSpec,
    pub apd: ApdSpec,
    pub physical: PhysicalConstants,
    pub capacity_log: LogBase,
}

impl ReceiverElectronics {
    pub fn validate(&self) -> Result<()> {
        let pv = &self.pv;
        let apd = &self.apd;
        let ph = &self.physical;
        let positive = [
            ("pv.load_resistance", pv.load_resistance),
            ("pv.series_resistance", pv.series_resistance),
            ("pv.shunt_resistance", pv.shunt_resistance),
            ("pv.responsivity", pv.responsivity),
            ("pv.dark_current", pv.dark_current),
            ("pv.diode_quality", pv.diode_quality),
            ("apd.responsivity", apd.responsivity),
            ("apd.noise_bandwidth", apd.noise_bandwidth),
            ("apd.load_resistance", apd.load_resistance),
            ("physical.electron_charge", ph.electron_charge),
            ("physical.boltzmann", ph.boltzmann),
            ("physical.temperature", ph.temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if pv.cells < 1 {
            return Err(Error::InvalidParameter(
                "pv.cells must be at least 1".into(),
            ));
        }
        if !(apd.background_current.is_finite() && apd.background_current >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "apd.background_current must be non-negative, got {}",
                apd.background_current
            )));
        }
        Ok(())
    }

    /// Diode thermal voltage scaled by cell count and quality factor.
    fn diode_voltage(&self) -> f64 {
        let ph = &self.physical;
        self.pv.cells as f64 * self.pv.diode_quality * ph.boltzmann * ph.temperature
            / ph.electron_charge
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1], got {v}"
        )))
    }
}

/// Round-trip loss |ln(√(R_in·R_out·η_t)·η_g)|.
fn round_trip_loss(gain: &GainMediumSpec, r_in: f64, r_out: f64, eta_t: f64) -> Result<f64> {
    check_fraction("R_in", r_in)?;
    check_fraction("R_out", r_out)?;
    if !(0.0..=1.0).contains(&eta_t) {
        return Err(Error::InvalidParameter(format!(
            "eta_t must lie in (0, 1], got {eta_t}"
        )));
    }
    gain.validate()?;
    let loss = ((r_in * r_out * eta_t).sqrt() * gain.transit_efficiency)
        .ln()
        .abs();
    if !loss.is_finite() {
        return Err(Error::DivergentThreshold { eta_t });
    }
    Ok(loss)
}

/// Pump power at which round-trip gain equals round-trip loss, in watts.
pub fn threshold_power(gain: &GainMediumSpec, r_in: f64, r_out: f64, eta_t: f64) -> Result<f64> {
    let loss = round_trip_loss(gain, r_in, r_out, eta_t)?;
    let p = gain.cross_section_area * gain.saturation_intensity / gain.excitation_efficiency * loss;
    if !p.is_finite() {
        return Err(Error::DivergentThreshold { eta_t });
    }
    Ok(p)
}

/// Average intracavity intensity for a single pass, W/cm².
pub fn steady_intensity(
    gain: &GainMediumSpec,
    p_in: f64,
    r_in: f64,
    r_out: f64,
    eta_t: f64,
) -> Result<f64> {
    let loss = round_trip_loss(gain, r_in, r_out, eta_t)?;
    let p_th = threshold_power(gain, r_in, r_out, eta_t)?;
    if !(p_in.is_finite() && p_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "P_in must be non-negative, got {p_in}"
        )));
    }
    // A few ulps of slack so that P_in = P_th lands on zero.
    if p_in < p_th * (1.0 - 1e-12) {
        return Err(Error::BelowThreshold { p_in, p_th });
    }
    if loss == 0.0 {
        return Err(Error::DivergentThreshold { eta_t });
    }
    let g0l = gain.small_signal_gain(p_in);
    Ok((gain.saturation_intensity / 2.0 * (g0l / loss - 1.0)).max(0.0))
}

/// The efficiencies an output-power evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEfficiencies {
    pub eta_tr: f64,
    pub eta_rt: f64,
    pub eta_lg: f64,
    pub eta_o: f64,
}

impl From<&SteadyState> for LinkEfficiencies {
    fn from(s: &SteadyState) -> Self {
        LinkEfficiencies {
            eta_tr: s.eta_tr,
            eta_rt: s.eta_rt,
            eta_lg: s.eta_lg,
            eta_o: s.eta_o,
        }
    }
}

/// Closed form used for the output power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputPowerModel {
    /// Per-segment grouping of the efficiency factors.
    #[default]
    Printed,
    /// Two-mirror resonator with one lumped single-pass transmission V, V² = η_o·η_g².
    LumpedLoss,
}

/// Output optical power in watts, clamped at zero below threshold.
pub fn output_power(
    gain: &GainMediumSpec,
    eff: &LinkEfficiencies,
    a_b: f64,
    p_in: f64,
    r_out: f64,
    model: OutputPowerModel,
) -> Result<f64> {
    gain.validate()?;
    check_fraction("R_out", r_out)?;
    if !(a_b.is_finite() && a_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beam area must be positive, got {a_b}"
        )));
    }
    if !(p_in.is_finite() && p_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "P_in must be non-negative, got {p_in}"
        )));
    }
    let eta_g = gain.transit_efficiency;
    let LinkEfficiencies {
        eta_tr,
        eta_rt,
        eta_lg,
        eta_o,
    } = *eff;
    if eta_o <= 0.0 || eta_tr <= 0.0 || eta_lg <= 0.0 {
        return Ok(0.0);
    }
    let g0l = gain.small_signal_gain(p_in);
    let log_term = (r_out * eta_g * eta_g * eta_o).sqrt().ln().abs();
    let gain_term = g0l - log_term;
    if gain_term <= 0.0 {
        log::debug!("output power clamped: g0l {g0l:.4} below loss {log_term:.4}");
        return Ok(0.0);
    }
    let (numer, denom) = match model {
        OutputPowerModel::Printed => (
            (1.0 - r_out) * eta_tr,
            1.0 - r_out * eta_tr * eta_rt
                + (r_out * eta_o).sqrt() * (1.0 / (eta_lg * eta_tr * eta_g) - eta_g),
        ),
        OutputPowerModel::LumpedLoss => {
            let v = eta_o.sqrt() * eta_g;
            (
                (1.0 - r_out) * v,
                1.0 - r_out * v * v + r_out.sqrt() * (1.0 / v - v),
            )
        }
    };
    let p = a_b * gain.saturation_intensity * numer / denom * gain_term;
    if !(p.is_finite() && p > 0.0) {
        log::debug!("output power clamped: raw value {p}");
        return Ok(0.0);
    }
    Ok(p)
}

/// Splits the output beam into charging and communication streams.
///
/// `P_com` is taken as the remainder so that the two always sum back to `P_out`.
pub fn split_power(p_out: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma.is_finite() && (0.0..=1.0).contains(&gamma)) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if !(p_out.is_finite() && p_out >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "P_out must be non-negative, got {p_out}"
        )));
    }
    // Quantize P_ch to the spacing of floats just below P_out; the remainder is then exact.
    let step = p_out - p_out.next_down();
    let p_ch = if p_out > 0.0 {
        ((gamma * p_out / step).round() * step).min(p_out)
    } else {
        0.0
    };
    Ok((p_ch, p_out - p_ch))
}

/// Photovoltaic operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvOutput {
    pub current: f64,
    pub power: f64,
}

/// Residual of the single-diode equation; its root is the PV current.
pub fn pv_residual(i: f64, p_ch: f64, electronics: &ReceiverElectronics) -> f64 {
    let pv = &electronics.pv;
    let vd = i * (pv.load_resistance + pv.series_resistance);
    pv.responsivity * p_ch
        - pv.dark_current * (vd / electronics.diode_voltage()).exp_m1()
        - vd / pv.shunt_resistance
        - i
}

pub const PV_TOLERANCE: f64 = 1e-10;
const PV_MAX_ITERATIONS: usize = 400;

/// Solves the PV circuit for the load current (Illinois false position on a sign-changing bracket).
pub fn pv_output(p_ch: f64, electronics: &ReceiverElectronics) -> Result<PvOutput> {
    if !(p_ch.is_finite() && p_ch >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "P_ch must be non-negative, got {p_ch}"
        )));
    }
    electronics.validate()?;
    let f = |i: f64| pv_residual(i, p_ch, electronics);
    let bound = electronics.pv.responsivity * p_ch;
    let (mut lo, mut hi) = (-bound, bound);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    let mut best = (0.0, f(0.0));
    if best.1.abs() < PV_TOLERANCE {
        return Ok(finish(0.0, electronics));
    }
    // Which end was kept last time; used to halve its weight.
    let mut side = 0i8;
    let mut width_before = 2.0 * (hi - lo);
    for _ in 0..PV_MAX_ITERATIONS {
        // Fall back to bisection whenever false position stalls on a steep exponential.
        let stalled = hi - lo > 0.5 * width_before;
        width_before = hi - lo;
        let secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        let i = if !stalled && secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            mid
        };
        let r = f(i);
        if r.abs() < best.1.abs() {
            best = (i, r);
        }
        if r.abs() < PV_TOLERANCE {
            return Ok(finish(i, electronics));
        }
        if r > 0.0 {
            lo = i;
            f_lo = r;
            if side == 1 && f_hi.is_finite() {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = i;
            f_hi = r;
            if side == -1 && f_lo.is_finite() {
                f_lo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: PV_MAX_ITERATIONS,
        residual: best.1.abs(),
    })
}

fn finish(i: f64, electronics: &ReceiverElectronics) -> PvOutput {
    PvOutput {
        current: i,
        power: i * i * electronics.pv.load_resistance,
    }
}

/// APD signal current, noise and link capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApdOutput {
    pub current: f64,
    /// Total noise variance, A².
    pub noise_variance: f64,
    pub snr: f64,
    pub capacity: f64,
}

impl ApdOutput {
    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }
}

pub fn apd_link(p_com: f64, electronics: &ReceiverElectronics) -> Result<ApdOutput> {
    if !(p_com.is_finite() && p_com >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "P_com must be non-negative, got {p_com}"
        )));
    }
    electronics.validate()?;
    let apd = &electronics.apd;
    let ph = &electronics.physical;
    let current = apd.responsivity * p_com;
    let shot = 2.0 * ph.electron_charge * (current + apd.background_current) * apd.noise_bandwidth;
    let thermal = 4.0 * ph.boltzmann * ph.temperature * apd.noise_bandwidth / apd.load_resistance;
    let noise_variance = shot + thermal;
    let snr = current * current / (2.0 * E * PI * noise_variance);
    Ok(ApdOutput {
        current,
        noise_variance,
        snr,
        capacity: 0.5 * electronics.capacity_log.ln_1p(snr),
    })
}

/// Beam spot area π(D4σ/2)² of a mode, cm².
pub fn beam_spot_area(mode: &FieldGrid) -> Result<f64> {
    let d = mode.beam_diameter()?;
    Ok(PI * (d / 2.0).powi(2) * 1e4)
}

/// Inputs of the power chain that are not properties of the cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerInputs {
    /// Pump power, W.
    pub p_in: f64,
    /// Fraction of the output routed to charging.
    pub gamma: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub model: OutputPowerModel,
}

impl Default for PowerInputs {
    fn default() -> Self {
        PowerInputs {
            p_in: 200.0,
            gamma: 0.3,
            r_in: 1.0,
            r_out: 0.95,
            model: OutputPowerModel::Printed,
        }
    }
}

impl PowerInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_in.is_finite() && self.p_in >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p_in must be non-negative, got {}",
                self.p_in
            )));
        }
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        check_fraction("r_in", self.r_in)?;
        check_fraction("r_out", self.r_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p_in: f64,
    pub p_th: f64,
    pub p_out: f64,
    pub gamma: f64,
    pub p_ch: f64,
    pub p_com: f64,
    pub i_pv: f64,
    pub p_e: f64,
    pub i_data: f64,
    pub snr: f64,
    pub capacity: f64,
    /// Beam spot area on the gain medium, cm².
    pub a_b: f64,
}

impl PowerBudget {
    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    /// Output power over absorbed pump power.
    pub fn energy_efficiency(&self, gain: &GainMediumSpec) -> f64 {
        self.p_out / (self.p_in * gain.excitation_efficiency)
    }
}

/// Runs the full chain for one cavity solution.
///
/// The threshold uses η_o as the round-trip efficiency, so with `R_in = 1` the
/// zero crossing of the output power coincides with `P_in = P_th`.
pub fn power_budget(
    gain: &GainMediumSpec,
    electronics: &ReceiverElectronics,
    inputs: &PowerInputs,
    eff: &LinkEfficiencies,
    a_b: f64,
) -> Result<PowerBudget> {
    inputs.validate()?;
    let p_th = if eff.eta_o > 0.0 {
        match threshold_power(gain, inputs.r_in, inputs.r_out, eff.eta_o) {
            Ok(p) => p,
            Err(Error::DivergentThreshold { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        }
    } else {
        f64::INFINITY
    };
    let p_out = if inputs.p_in <= p_th {
        0.0
    } else {
        output_power(gain, eff, a_b, inputs.p_in, inputs.r_out, inputs.model)?
    };
    let (p_ch, p_com) = split_power(p_out, inputs.gamma)?;
    let pv = pv_output(p_ch, electronics)?;
    let apd = apd_link(p_com, electronics)?;
    Ok(PowerBudget {
        p_in: inputs.p_in,
        p_th,
        p_out,
        gamma: inputs.gamma,
        p_ch,
        p_com,
        i_pv: pv.current,
        p_e: pv.power,
        i_data: apd.current,
        snr: apd.snr,
        capacity: apd.capacity,
        a_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn table() -> (GainMediumSpec, ReceiverElectronics) {
        (GainMediumSpec::default(), ReceiverElectronics::default())
    }

    fn bisect(p_ch: f64, el: &ReceiverElectronics) -> f64 {
        let bound = el.pv.responsivity * p_ch;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pv_residual(mid, p_ch, el) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn threshold_matches_direct_evaluation() {
        let (g, _) = table();
        let p = threshold_power(&g, 1.0, 0.95, 1.0).unwrap();
        let a_g = PI * 0.0625;
        let expected = a_g * 1260.0 / 0.72 * (0.95f64.sqrt() * 0.99).ln().abs();
        assert_relative_eq!(p, expected, max_relative = 1e-14);
        assert!((p - 12.3).abs() < 0.05, "{p}");
    }

    #[test]
    fn lossless_cavity_has_no_threshold() {
        let g = GainMediumSpec {
            transit_efficiency: 1.0,
            ..Default::default()
        };
        assert_eq!(threshold_power(&g, 1.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn threshold_diverges_at_zero_efficiency() {
        let (g, _) = table();
        assert!(matches!(
            threshold_power(&g, 1.0, 0.95, 0.0),
            Err(Error::DivergentThreshold { .. })
        ));
        assert!(matches!(
            threshold_power(&g, 1.0, 1.2, 0.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn intensity_at_and_above_threshold() {
        let (g, _) = table();
        let p_th = threshold_power(&g, 1.0, 0.95, 0.8).unwrap();
        assert!(steady_intensity(&g, p_th, 1.0, 0.95, 0.8).unwrap().abs() < 1e-9);
        let i2 = steady_intensity(&g, 2.0 * p_th, 1.0, 0.95, 0.8).unwrap();
        assert_relative_eq!(i2, 630.0, max_relative = 1e-12);
        let i3 = steady_intensity(&g, 3.0 * p_th, 1.0, 0.95, 0.8).unwrap();
        assert_relative_eq!(i3 - i2, i2, max_relative = 1e-12);
        assert!(matches!(
            steady_intensity(&g, 0.5 * p_th, 1.0, 0.95, 0.8),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn split_edges() {
        assert_eq!(split_power(22.15, 0.0).unwrap(), (0.0, 22.15));
        assert_eq!(split_power(22.15, 1.0).unwrap(), (22.15, 0.0));
        let (ch, com) = split_power(22.15, 0.3).unwrap();
        assert_relative_eq!(ch, 6.645, max_relative = 1e-12);
        assert_relative_eq!(com, 15.505, max_relative = 1e-12);
        assert!(split_power(1.0, 1.5).is_err());
    }

    #[test]
    fn pv_dark_condition() {
        let (_, el) = table();
        let out = pv_output(0.0, &el).unwrap();
        assert!(out.current.abs() < 1e-6);
        assert!(out.power < 1e-9);
    }

    #[test]
    fn pv_matches_bisection() {
        let (_, el) = table();
        let out = pv_output(6.645, &el).unwrap();
        assert!((out.current - bisect(6.645, &el)).abs() < 1e-9);
        assert!(pv_residual(out.current, 6.645, &el).abs() < PV_TOLERANCE);
        assert!((out.current - 0.1066).abs() < 1e-3, "{}", out.current);
    }

    #[test]
    fn pv_survives_overflowing_exponent() {
        let (_, el) = table();
        let out = pv_output(1e5, &el).unwrap();
        assert!((out.current - bisect(1e5, &el)).abs() < 1e-9);
    }

    #[test]
    fn apd_dark_link() {
        let (_, el) = table();
        let out = apd_link(0.0, &el).unwrap();
        assert_eq!((out.current, out.snr, out.capacity), (0.0, 0.0, 0.0));
    }

    #[test]
    fn apd_chain_at_reported_output() {
        let (_, el) = table();
        let (_, p_com) = split_power(22.15, 0.3).unwrap();
        let out = apd_link(p_com, &el).unwrap();
        assert!(
            out.capacity > 10.7 && out.capacity < 10.95,
            "{}",
            out.capacity
        );
        let binary = ReceiverElectronics {
            capacity_log: LogBase::Binary,
            ..el
        };
        let b = apd_link(p_com, &binary).unwrap();
        assert_relative_eq!(
            b.capacity,
            out.capacity / std::f64::consts::LN_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn apd_snr_from_noise_terms() {
        let (_, el) = table();
        let p_com = 10.0;
        let i = 0.6 * p_com;
        let n2 =
            2.0 * 1.602176634e-19 * (i + 5.1e-3) * 811.7e6 + 4.0 * 1.38e-23 * 300.0 * 811.7e6 / 1e4;
        let out = apd_link(p_com, &el).unwrap();
        assert_relative_eq!(out.noise_variance, n2, max_relative = 1e-12);
        assert_relative_eq!(out.snr, i * i / (2.0 * E * PI * n2), max_relative = 1e-12);
    }

    fn disc(n: usize, extent: f64, r: f64) -> FieldGrid {
        FieldGrid::from_fn(n, extent / n as f64, 1.064e-6, |x, y| {
            if x * x + y * y <= r * r {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn disc_spot_area_from_second_moment() {
        // D4σ of a uniform disc is 2r, so the area equals the disc area.
        let r = 2.5e-3;
        let a = beam_spot_area(&disc(512, 20e-3, r)).unwrap();
        assert_relative_eq!(a, PI * (r * 100.0).powi(2), max_relative = 5e-3);
    }

    #[test]
    fn spot_area_scale_invariant_and_monotone() {
        let d = disc(256, 20e-3, 2.5e-3);
        let a = beam_spot_area(&d).unwrap();
        assert_relative_eq!(
            beam_spot_area(&d.scaled(Complex64::new(0.0, 3.0))).unwrap(),
            a,
            max_relative = 1e-12
        );
        assert!(beam_spot_area(&disc(256, 20e-3, 1.5e-3)).unwrap() < a);
        let empty = FieldGrid::zeros(64, 1e-4, 1.064e-6).unwrap();
        assert!(matches!(beam_spot_area(&empty), Err(Error::ZeroEnergy)));
    }

    fn eff(eta_o: f64) -> LinkEfficiencies {
        // Split evenly so that the segments multiply back to eta_o with no extra loss.
        let s = eta_o.sqrt();
        LinkEfficiencies {
            eta_tr: s,
            eta_rt: s,
            eta_lg: 1.0,
            eta_o,
        }
    }

    #[test]
    fn output_power_clamps_below_threshold() {
        let (g, _) = table();
        let p = output_power(&g, &eff(0.2), 0.1, 200.0, 0.95, OutputPowerModel::Printed).unwrap();
        assert_eq!(p, 0.0);
        let p = output_power(&g, &eff(0.95), 0.1, 200.0, 0.95, OutputPowerModel::Printed).unwrap();
        assert!(p > 0.0);
    }

    #[test]
    fn models_coincide_when_segments_match_lumped_loss() {
        let (g, _) = table();
        let eta_o: f64 = 0.9;
        let v = eta_o.sqrt() * g.transit_efficiency;
        let e = LinkEfficiencies {
            eta_tr: v,
            eta_rt: v,
            eta_lg: eta_o.sqrt() / g.transit_efficiency,
            eta_o,
        };
        let a = output_power(&g, &e, 0.1, 200.0, 0.95, OutputPowerModel::Printed).unwrap();
        let b = output_power(&g, &e, 0.1, 200.0, 0.95, OutputPowerModel::LumpedLoss).unwrap();
        assert!(a > 0.0);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn budget_zero_at_or_below_threshold() {
        let (g, el) = table();
        let inputs = PowerInputs {
            p_in: 10.0,
            ..Default::default()
        };
        let b = power_budget(&g, &el, &inputs, &eff(0.9), 0.1).unwrap();
        assert!(b.p_in <= b.p_th);
        assert_eq!(
            (b.p_out, b.p_ch, b.p_com, b.p_e, b.snr),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        let b = power_budget(&g, &el, &PowerInputs::default(), &eff(0.0), 0.1).unwrap();
        assert_eq!(b.p_out, 0.0);
        assert!(b.p_th.is_infinite());
    }

    #[test]
    fn budget_chain_is_consistent() {
        let (g, el) = table();
        let b = power_budget(&g, &el, &PowerInputs::default(), &eff(0.9), 0.1).unwrap();
        assert!(b.p_out > 0.0);
        assert_eq!(b.p_ch + b.p_com, b.p_out);
        assert!(b.energy_efficiency(&g) <= 1.0);
        assert_relative_eq!(b.p_e, b.i_pv * b.i_pv * 100.0, max_relative = 1e-12);
    }

    #[test]
    fn config_defaults_round_trip() {
        let el = ReceiverElectronics::default();
        let s = serde_json::to_string(&el).unwrap();
        let back: ReceiverElectronics = serde_json::from_str(&s).unwrap();
        assert_eq!(el, back);
        let bad = ReceiverElectronics {
            pv: PvSpec {
                cells: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn split_sums_exactly(p in 0.0f64..1e4, gamma in 0.0f64..=1.0) {
            let (ch, com) = split_power(p, gamma).unwrap();
            prop_assert_eq!(ch + com, p);
            prop_assert!(ch >= 0.0 && com >= 0.0);
        }

        #[test]
        fn threshold_decreasing_in_each_factor(
            r_in in 0.3f64..0.99, r_out in 0.3f64..0.99, eta_t in 0.05f64..0.99,
            eta_g in 0.3f64..0.99, bump in 1.001f64..1.01,
        ) {
            let g = GainMediumSpec { transit_efficiency: eta_g, ..Default::default() };
            let base = threshold_power(&g, r_in, r_out, eta_t).unwrap();
            prop_assert!(threshold_power(&g, r_in * bump, r_out, eta_t).unwrap() < base);
            prop_assert!(threshold_power(&g, r_in, r_out * bump, eta_t).unwrap() < base);
            prop_assert!(threshold_power(&g, r_in, r_out, eta_t * bump).unwrap() < base);
            let g2 = GainMediumSpec { transit_efficiency: eta_g * bump, ..g };
            prop_assert!(threshold_power(&g2, r_in, r_out, eta_t).unwrap() < base);
        }

        #[test]
        fn snr_and_capacity_increase_with_power(p in 1e-3f64..100.0, bump in 1.001f64..2.0) {
            let el = ReceiverElectronics::default();
            let a = apd_link(p, &el).unwrap();
            let b = apd_link(p * bump, &el).unwrap();
            prop_assert!(b.snr > a.snr);
            prop_assert!(b.capacity > a.capacity);
        }

        #[test]
        fn pv_residual_changes_sign_and_is_decreasing(p_ch in 1e-3f64..200.0, t in 0.0f64..1.0) {
            let el = ReceiverElectronics::default();
            let bound = el.pv.responsivity * p_ch;
            prop_assert!(pv_residual(-bound, p_ch, &el) > 0.0);
            prop_assert!(pv_residual(bound, p_ch, &el) < 0.0);
            let i = -bound + 2.0 * bound * t;
            prop_assert!(pv_residual(i + 1e-6 * bound, p_ch, &el) < pv_residual(i, p_ch, &el));
            let out = pv_output(p_ch, &el).unwrap();
            prop_assert!((out.current - bisect(p_ch, &el)).abs() < 1e-9);
        }

        #[test]
        fn gamma_tradeoff(p_out in 0.1f64..100.0, g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
            let el = ReceiverElectronics::default();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let run = |gamma: f64| {
                let (ch, com) = split_power(p_out, gamma).unwrap();
                (pv_output(ch, &el).unwrap().power, apd_link(com, &el).unwrap().capacity)
            };
            let (pe_lo, c_lo) = run(lo);
            let (pe_hi, c_hi) = run(hi);
            prop_assert!(pe_hi >= pe_lo);
            prop_assert!(c_hi <= c_lo);
        }

        #[test]
        fn energy_efficiency_ceiling(eta_o in 0.01f64..1.0, a_b in 0.01f64..0.19, p_in in 0.0f64..400.0) {
            let (g, el) = table();
            let inputs = PowerInputs { p_in, ..Default::default() };
            let b = power_budget(&g, &el, &inputs, &eff(eta_o), a_b).unwrap();
            prop_assert!(b.p_out >= 0.0);
            if p_in > 0.0 {
                prop_assert!(b.energy_efficiency(&g) <= 1.0);
            }
        }
    }
}
