//! NLOS channel geometry and the RIS panel transform.

use std::f64::consts::{PI, TAU};

use ndarray::Zip;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;

/// How slant path lengths are computed from axial distance and RIS height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLengthForm {
    /// `√(z² + d²)`.
    #[default]
    Euclidean,
    /// `z / sin(arctan(d / z))`, kept for comparison runs.
    PrintedSine,
}

/// Transmitter, RIS and receiver placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    z: f64,
    z_ti: f64,
    z_ir: f64,
    d_iz: f64,
    l_ti: f64,
    l_ir: f64,
}

impl ChannelGeometry {
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn z_ti(&self) -> f64 {
        self.z_ti
    }

    pub fn z_ir(&self) -> f64 {
        self.z_ir
    }

    pub fn d_iz(&self) -> f64 {
        self.d_iz
    }

    /// Transmitter to RIS path length.
    pub fn l_ti(&self) -> f64 {
        self.l_ti
    }

    /// RIS to receiver path length.
    pub fn l_ir(&self) -> f64 {
        self.l_ir
    }

    /// Angle of arrival `arctan(z_ti / d_iz)`.
    pub fn theta_a(&self) -> Result<f64> {
        self.angle(self.z_ti)
    }

    /// Angle of departure `arctan(z_ir / d_iz)`.
    pub fn theta_d(&self) -> Result<f64> {
        self.angle(self.z_ir)
    }

    fn angle(&self, axial: f64) -> Result<f64> {
        if self.d_iz == 0.0 {
            return Err(Error::DegenerateGeometry);
        }
        Ok((axial / self.d_iz).atan())
    }
}

/// Builds the channel geometry with Euclidean path lengths.
pub fn derive_geometry(z: f64, z_ti: f64, d_iz: f64) -> Result<ChannelGeometry> {
    derive_geometry_with(z, z_ti, d_iz, PathLengthForm::Euclidean)
}

pub fn derive_geometry_with(
    z: f64,
    z_ti: f64,
    d_iz: f64,
    form: PathLengthForm,
) -> Result<ChannelGeometry> {
    if !(z.is_finite() && z_ti.is_finite() && d_iz.is_finite()) {
        return Err(Error::InvalidGeometry("non-finite distance".into()));
    }
    if !(0.0 < z_ti && z_ti < z) {
        return Err(Error::InvalidGeometry(format!(
            "need 0 < z_ti < z, got z_ti = {z_ti}, z = {z}"
        )));
    }
    if d_iz < 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "RIS height must be >= 0, got {d_iz}"
        )));
    }
    let z_ir = z - z_ti;
    let slant = |axial: f64| match form {
        PathLengthForm::Euclidean => Ok(axial.hypot(d_iz)),
        PathLengthForm::PrintedSine if d_iz == 0.0 => Err(Error::DegenerateGeometry),
        PathLengthForm::PrintedSine => Ok(axial / (d_iz / axial).atan().sin()),
    };
    Ok(ChannelGeometry {
        z,
        z_ti,
        z_ir,
        d_iz,
        l_ti: slant(z_ti)?,
        l_ir: slant(z_ir)?,
    })
}

/// Anomalous-reflection phase that steers a ray arriving at `theta_a` out
/// at `theta_d`: the generalized-Snell gradient `k(sin θ_d − sin θ_a)`
/// accumulated across half the panel, wrapped to `[0, 2π)`.
///
/// Zero for specular geometry and for an on-axis RIS.
pub fn ris_phase_from_geometry(
    geometry: &ChannelGeometry,
    wavelength: f64,
    side_length: f64,
) -> f64 {
    let (Ok(a), Ok(d)) = (geometry.theta_a(), geometry.theta_d()) else {
        return 0.0;
    };
    let k = 2.0 * PI / wavelength;
    wrap_phase(k * 0.5 * side_length * (d.sin() - a.sin()))
}

/// Wraps `phase` into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Uniform reflecting panel `β·exp(jθ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RisSpec {
    pub beta: f64,
    pub theta: f64,
    /// Square panel side in meters.
    pub side_length: f64,
}

impl Default for RisSpec {
    fn default() -> Self {
        RisSpec {
            beta: 1.0,
            theta: 0.0,
            side_length: 5e-3,
        }
    }
}

impl RisSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidElement(format!(
                "RIS beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if !(0.0..TAU).contains(&self.theta) {
            return Err(Error::InvalidElement(format!(
                "RIS theta must lie in [0, 2π), got {}",
                self.theta
            )));
        }
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(Error::InvalidElement(format!(
                "RIS side length must be positive, got {}",
                self.side_length
            )));
        }
        Ok(())
    }

    /// Panel transmittance on the grid of `field`.
    pub fn transmittance(&self, field: &FieldGrid) -> Result<ndarray::Array2<Complex64>> {
        self.validate()?;
        let samples = self.side_length / field.pitch_x().max(field.pitch_y());
        if samples < 4.0 {
            return Err(Error::PanelUnresolved {
                side: self.side_length,
                samples,
            });
        }
        let h = 0.5 * self.side_length;
        let c = Complex64::from_polar(self.beta, self.theta);
        let n = field.n();
        Ok(ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
            if field.x(j).abs() <= h && field.y(i).abs() <= h {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }
}

/// Reflects `field` off the RIS panel.
pub fn apply_ris(field: &FieldGrid, ris: &RisSpec) -> Result<FieldGrid> {
    let t = ris.transmittance(field)?;
    let mut out = field.samples().clone();
    Zip::from(&mut out).and(&t).for_each(|u, &t| *u *= t);
    Ok(field.with_samples(out))
}
