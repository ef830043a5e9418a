//! Free-space propagation between parallel planes and thin optical elements.
//!
//! The production engine is the band-limited angular spectrum method. A direct
//! Rayleigh–Sommerfeld sum is kept alongside it as a slow reference.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::FieldGrid;

/// Largest grid accepted by [`rayleigh_sommerfeld_oracle`].
pub const ORACLE_MAX_N: usize = 64;

/// Side from which an obstruction invades the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvasionSide {
    /// Blocks `x > r − d_ex`.
    #[default]
    PositiveX,
    NegativeX,
    PositiveY,
    NegativeY,
}

impl InvasionSide {
    /// Coordinate measured toward the invading object.
    #[inline]
    fn toward(self, x: f64, y: f64) -> f64 {
        match self {
            InvasionSide::PositiveX => x,
            InvasionSide::NegativeX => -x,
            InvasionSide::PositiveY => y,
            InvasionSide::NegativeY => -y,
        }
    }
}

/// Circular stop with optional thin-lens phase and half-plane obstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureSpec {
    pub radius: f64,
    /// `None` is an infinite focal length (plane mirror or bare stop).
    #[serde(default)]
    pub focal_length: Option<f64>,
    #[serde(default)]
    pub obstruction_depth: f64,
    #[serde(default)]
    pub obstruction_side: InvasionSide,
}

impl ApertureSpec {
    pub fn stop(radius: f64) -> Self {
        ApertureSpec {
            radius,
            focal_length: None,
            obstruction_depth: 0.0,
            obstruction_side: InvasionSide::default(),
        }
    }

    pub fn lens(radius: f64, focal_length: f64) -> Self {
        ApertureSpec {
            focal_length: Some(focal_length),
            ..ApertureSpec::stop(radius)
        }
    }

    pub fn with_obstruction(mut self, depth: f64, side: InvasionSide) -> Self {
        self.obstruction_depth = depth;
        self.obstruction_side = side;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidElement(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if let Some(f) = self.focal_length {
            if !f.is_finite() || f == 0.0 {
                return Err(Error::InvalidElement(format!(
                    "focal length must be finite and nonzero, got {f}"
                )));
            }
        }
        let d = self.obstruction_depth;
        if !(d.is_finite() && (0.0..=2.0 * self.radius * (1.0 + 1e-12)).contains(&d)) {
            return Err(Error::InvalidElement(format!(
                "obstruction depth must lie in [0, 2r] = [0, {:e}], got {d}",
                2.0 * self.radius
            )));
        }
        Ok(())
    }

    /// True when the obstruction leaves no open area.
    pub fn fully_blocked(&self) -> bool {
        self.obstruction_depth >= 2.0 * self.radius
    }

    /// Complex transmittance sampled on the grid of `field`.
    pub fn transmittance(&self, field: &FieldGrid) -> Result<Array2<Complex64>> {
        self.validate()?;
        let pitch = field.pitch_x().max(field.pitch_y());
        let samples = 2.0 * self.radius / pitch;
        if samples < 4.0 {
            return Err(Error::ApertureUnresolved {
                radius: self.radius,
                samples,
            });
        }
        let n = field.n();
        if self.fully_blocked() {
            return Ok(Array2::zeros((n, n)));
        }
        let r2 = self.radius * self.radius;
        let keep = self.radius - self.obstruction_depth;
        let obstructed = self.obstruction_depth > 0.0;
        let curvature = self
            .focal_length
            .map(|f| -PI / (field.wavelength() * f))
            .unwrap_or(0.0);
        Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            let (x, y) = (field.x(j), field.y(i));
            let rho2 = x * x + y * y;
            let open = rho2 <= r2 && !(obstructed && self.obstruction_side.toward(x, y) > keep);
            if !open {
                Complex64::new(0.0, 0.0)
            } else if curvature == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, curvature * rho2)
            }
        }))
    }
}

/// Multiplies `field` by the transmittance of `element`.
pub fn apply_element(field: &FieldGrid, element: &ApertureSpec) -> Result<FieldGrid> {
    let t = element.transmittance(field)?;
    Ok(multiply(field, &t))
}

pub(crate) fn multiply(field: &FieldGrid, t: &Array2<Complex64>) -> FieldGrid {
    let mut out = field.samples().clone();
    Zip::from(&mut out).and(t).for_each(|u, &t| *u *= t);
    field.with_samples(out)
}

/// Angular-spectrum transfer function for one distance on one grid,
/// cached so repeated propagation costs two FFTs and a multiply.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    pitch_x: f64,
    pitch_y: f64,
    wavelength: f64,
    distance: f64,
    transfer: Array2<Complex64>,
}

impl Propagator {
    /// Band-limited transfer function: frequencies whose transfer phase
    /// would alias on the grid are removed.
    pub fn new(n: usize, pitch_x: f64, pitch_y: f64, wavelength: f64, distance: f64) -> Self {
        Self::build(n, pitch_x, pitch_y, wavelength, distance, true)
    }

    /// Transfer function without the band limit. Only evanescent
    /// frequencies are removed.
    pub fn unlimited(n: usize, pitch_x: f64, pitch_y: f64, wavelength: f64, distance: f64) -> Self {
        Self::build(n, pitch_x, pitch_y, wavelength, distance, false)
    }

    pub fn for_field(field: &FieldGrid, distance: f64) -> Self {
        Self::new(
            field.n(),
            field.pitch_x(),
            field.pitch_y(),
            field.wavelength(),
            distance,
        )
    }

    fn build(
        n: usize,
        pitch_x: f64,
        pitch_y: f64,
        wavelength: f64,
        distance: f64,
        band_limit: bool,
    ) -> Self {
        let k = 2.0 * PI / wavelength;
        let limit = |extent: f64| {
            if band_limit {
                // frequency step of a grid padded to twice the extent
                let du = 1.0 / (2.0 * extent);
                1.0 / (wavelength * ((2.0 * du * distance).powi(2) + 1.0).sqrt())
            } else {
                f64::INFINITY
            }
        };
        let (lim_x, lim_y) = (limit(n as f64 * pitch_x), limit(n as f64 * pitch_y));
        let transfer = Array2::from_shape_fn((n, n), |(i, j)| {
            if distance == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            let fx = fft::frequency(j, n, pitch_x);
            let fy = fft::frequency(i, n, pitch_y);
            let arg = 1.0 - (wavelength * fx).powi(2) - (wavelength * fy).powi(2);
            if arg < 0.0 || fx.abs() > lim_x || fy.abs() > lim_y {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, k * distance * arg.sqrt())
            }
        });
        Propagator {
            n,
            pitch_x,
            pitch_y,
            wavelength,
            distance,
            transfer,
        }
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn transfer(&self) -> &Array2<Complex64> {
        &self.transfer
    }

    pub fn matches(&self, field: &FieldGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        field.n() == self.n
            && close(field.pitch_x(), self.pitch_x)
            && close(field.pitch_y(), self.pitch_y)
            && close(field.wavelength(), self.wavelength)
    }

    pub fn apply(&self, field: &FieldGrid) -> Result<FieldGrid> {
        if !self.matches(field) {
            return Err(Error::GridMismatch(format!(
                "propagator built for n = {}, pitch = ({:e}, {:e}), wavelength = {:e}",
                self.n, self.pitch_x, self.pitch_y, self.wavelength
            )));
        }
        if self.distance == 0.0 {
            return Ok(field.clone());
        }
        let mut s = fft::spectrum(field.samples());
        Zip::from(&mut s)
            .and(&self.transfer)
            .for_each(|s, &h| *s *= h);
        Ok(field.with_samples(fft::from_spectrum(&s)))
    }
}

/// Propagates `field` by `distance` meters (negative propagates backward).
pub fn angular_spectrum_propagate(field: &FieldGrid, distance: f64) -> FieldGrid {
    Propagator::for_field(field, distance)
        .apply(field)
        .expect("propagator built for this grid")
}

/// Direct first Rayleigh–Sommerfeld sum over all source samples.
///
/// Cost is `O(n⁴)`, so grids are capped at [`ORACLE_MAX_N`].
pub fn rayleigh_sommerfeld_oracle(field: &FieldGrid, distance: f64) -> Result<FieldGrid> {
    let n = field.n();
    if n > ORACLE_MAX_N {
        return Err(Error::GridTooLarge {
            n,
            max: ORACLE_MAX_N,
        });
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "oracle distance must be positive, got {distance}"
        )));
    }
    let k = field.wavenumber();
    let z2 = distance * distance;
    let prefactor = Complex64::new(0.0, -distance / field.wavelength()) * field.sample_area();
    let src = field.samples();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = field.y(i);
            (0..n)
                .map(|j| {
                    let x = field.x(j);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ((si, sj), u) in src.indexed_iter() {
                        let r2 = (x - field.x(sj)).powi(2) + (y - field.y(si)).powi(2) + z2;
                        acc += u * Complex64::from_polar(1.0 / r2, k * r2.sqrt());
                    }
                    acc * prefactor
                })
                .collect()
        })
        .collect();
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    let out = Array2::from_shape_vec((n, n), flat).expect("n x n samples");
    Ok(field.with_samples(out))
}
