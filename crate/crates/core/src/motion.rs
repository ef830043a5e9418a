//! Receiver translation and rotation.
//!
//! Translation uses the Fourier shift theorem. Rotation resamples the angular
//! spectrum onto a tilted plane: each target frequency `(f̂x, f̂y, ŵ)` is mapped
//! back to the source frame through `M⁻¹`, the source spectrum is interpolated
//! there, and the result is weighted by the Jacobian of the mapping.
//!
//! A tilt of more than a fraction of a degree pushes the beam's carrier
//! frequency `sin ξ / λ` far outside the grid band, so the carrier of the
//! beam axis is removed in the target frame. Rotated fields are envelopes
//! relative to the rotated beam axis.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::FieldGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Order in which the elementary rotations are applied; no axis repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct RotationOrder(Vec<Axis>);

impl RotationOrder {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::PoseOutOfRange(format!(
                    "rotation order repeats axis {a:?}"
                )));
            }
        }
        Ok(RotationOrder(axes))
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0
    }

    pub fn contains(&self, axis: Axis) -> bool {
        self.0.contains(&axis)
    }
}

impl Default for RotationOrder {
    fn default() -> Self {
        RotationOrder(vec![Axis::X, Axis::Y, Axis::Z])
    }
}

impl TryFrom<Vec<Axis>> for RotationOrder {
    type Error = Error;

    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        RotationOrder::new(axes)
    }
}

impl From<RotationOrder> for Vec<Axis> {
    fn from(order: RotationOrder) -> Self {
        order.0
    }
}

/// Receiver displacement: lateral shift in meters, rotations in radians.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pose {
    pub dx: f64,
    pub dy: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub xi_z: f64,
    pub rotation_order: RotationOrder,
}

impl Pose {
    pub fn translation(dx: f64, dy: f64) -> Self {
        Pose {
            dx,
            dy,
            ..Pose::default()
        }
    }

    pub fn rotation(xi_x: f64, xi_y: f64, xi_z: f64) -> Self {
        Pose {
            xi_x,
            xi_y,
            xi_z,
            ..Pose::default()
        }
    }

    pub fn is_translated(&self) -> bool {
        self.dx != 0.0 || self.dy != 0.0
    }

    pub fn is_rotated(&self) -> bool {
        self.xi_x != 0.0 || self.xi_y != 0.0 || self.xi_z != 0.0
    }

    pub fn angle(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.xi_x,
            Axis::Y => self.xi_y,
            Axis::Z => self.xi_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.dx, self.dy, self.xi_x, self.xi_y, self.xi_z] {
            if !v.is_finite() {
                return Err(Error::PoseOutOfRange(format!("non-finite pose value {v}")));
            }
        }
        for (name, v) in [("xi_x", self.xi_x), ("xi_y", self.xi_y)] {
            if v.abs() >= FRAC_PI_2 {
                return Err(Error::PoseOutOfRange(format!(
                    "|{name}| must be below π/2, got {v}"
                )));
            }
        }
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            if self.angle(axis) != 0.0 && !self.rotation_order.contains(axis) {
                return Err(Error::PoseOutOfRange(format!(
                    "nonzero rotation about {axis:?} missing from rotation order"
                )));
            }
        }
        Ok(())
    }
}

/// Real 3×3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Elementary rotation about `axis`.
    pub fn about(axis: Axis, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(match axis {
            Axis::X => [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]],
            Axis::Y => [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]],
            Axis::Z => [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]],
        })
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    /// Inverse, equal to the transpose.
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn mul(&self, other: &RotationMatrix) -> Self {
        let (a, b) = (&self.0, &other.0);
        RotationMatrix(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())
        }))
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|k| self.0[i][k] * v[k]).sum())
    }

    /// Entries `a₁ … a₉` of the inverse, row by row.
    pub fn inverse_coefficients(&self) -> [f64; 9] {
        let t = self.transpose().0;
        std::array::from_fn(|i| t[i / 3][i % 3])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of `|M·Mᵀ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.mul(&self.transpose()).0;
        let mut err: f64 = 0.0;
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - target).abs());
            }
        }
        err
    }
}

/// Product of the elementary rotations of `pose`, the first axis in the
/// order acting first.
pub fn rotation_matrix(pose: &Pose) -> RotationMatrix {
    pose.rotation_order
        .axes()
        .iter()
        .fold(RotationMatrix::IDENTITY, |m, &axis| {
            RotationMatrix::about(axis, pose.angle(axis)).mul(&m)
        })
}

/// Samples the field in a frame shifted by `(dx, dy)`: `U'(x, y) = U(x + dx, y + dy)`.
pub fn translate_field(field: &FieldGrid, dx: f64, dy: f64) -> Result<FieldGrid> {
    let limit = 0.25 * field.extent_x().min(field.extent_y());
    if !(dx.abs() <= limit && dy.abs() <= limit) {
        return Err(Error::ShiftOutOfBand { dx, dy, limit });
    }
    if dx == 0.0 && dy == 0.0 {
        return Ok(field.clone());
    }
    let n = field.n();
    let tau = std::f64::consts::TAU;
    let mut s = fft::spectrum(field.samples());
    for ((i, j), v) in s.indexed_iter_mut() {
        let fx = fft::frequency(j, n, field.pitch_x());
        let fy = fft::frequency(i, n, field.pitch_y());
        *v *= Complex64::from_polar(1.0, tau * (fx * dx + fy * dy));
    }
    Ok(field.with_samples(fft::from_spectrum(&s)))
}

/// Spectrum resampling kernel used by the rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Keys cubic convolution, `a = −0.5`.
    Bicubic,
}

/// Field on the receiver plane tilted by `pose`.
pub fn rotate_field(field: &FieldGrid, pose: &Pose) -> Result<FieldGrid> {
    rotate_field_with(field, pose, Interpolation::Bilinear)
}

pub fn rotate_field_with(
    field: &FieldGrid,
    pose: &Pose,
    interpolation: Interpolation,
) -> Result<FieldGrid> {
    pose.validate()?;
    if !pose.is_rotated() {
        return Ok(field.clone());
    }
    let m = rotation_matrix(pose);
    Ok(tilt(field, &m, [0.0, 0.0, 1.0], interpolation))
}

/// Carries a field on the tilted receiver plane back to the reference
/// plane, i.e. the rotation by the opposite angles.
pub fn rotate_field_back(field: &FieldGrid, pose: &Pose) -> Result<FieldGrid> {
    rotate_field_back_with(field, pose, Interpolation::Bilinear)
}

pub fn rotate_field_back_with(
    field: &FieldGrid,
    pose: &Pose,
    interpolation: Interpolation,
) -> Result<FieldGrid> {
    pose.validate()?;
    if !pose.is_rotated() {
        return Ok(field.clone());
    }
    let m = rotation_matrix(pose);
    let axis = m.apply([0.0, 0.0, 1.0]);
    Ok(tilt(field, &m.transpose(), axis, interpolation))
}

/// Resamples the spectrum of `field` onto the plane rotated by `m`.
///
/// `beam` is the beam axis in the source frame. Its transverse carrier is
/// assumed already removed from `field`, and the carrier of `m·beam` is
/// removed from the result.
pub fn tilt(
    field: &FieldGrid,
    m: &RotationMatrix,
    beam: [f64; 3],
    interpolation: Interpolation,
) -> FieldGrid {
    let n = field.n();
    let lambda = field.wavelength();
    let inv_l2 = 1.0 / (lambda * lambda);
    let w_floor = 1e-12 / lambda;
    let [a1, a2, a3, a4, a5, a6, a7, a8, a9] = m.inverse_coefficients();
    let target_beam = m.apply(beam);
    let (cx_t, cy_t) = (target_beam[0] / lambda, target_beam[1] / lambda);
    let (cx_s, cy_s) = (beam[0] / lambda, beam[1] / lambda);
    let (wx, wy) = (field.extent_x(), field.extent_y());
    let half = (n / 2) as f64;

    let source = fft::spectrum(field.samples());
    let mut out = Array2::<Complex64>::zeros((n, n));
    Zip::indexed(&mut out).for_each(|(i, j), o| {
        let fhx = fft::frequency(j, n, field.pitch_x()) + cx_t;
        let fhy = fft::frequency(i, n, field.pitch_y()) + cy_t;
        let w2 = inv_l2 - fhx * fhx - fhy * fhy;
        if w2 <= 0.0 {
            return;
        }
        let wh = w2.sqrt().max(w_floor);
        let fx = a1 * fhx + a2 * fhy + a3 * wh;
        let fy = a4 * fhx + a5 * fhy + a6 * wh;
        let fz = a7 * fhx + a8 * fhy + a9 * wh;
        if fz <= 0.0 {
            return;
        }
        let u = (fx - cx_s) * wx + half;
        let v = (fy - cy_s) * wy + half;
        let Some(g) = (match interpolation {
            Interpolation::Bilinear => bilinear(&source, u, v),
            Interpolation::Bicubic => bicubic(&source, u, v),
        }) else {
            return;
        };
        let jac =
            (a2 * a6 - a3 * a5) * fhx / wh + (a3 * a4 - a1 * a6) * fhy / wh + (a1 * a5 - a2 * a4);
        *o = g * jac.abs();
    });
    field.with_samples(fft::from_spectrum(&out))
}

/// `u` is the fractional column, `v` the fractional row.
fn bilinear(s: &Array2<Complex64>, u: f64, v: f64) -> Option<Complex64> {
    let n = s.nrows() as f64;
    if !(u >= 0.0 && v >= 0.0 && u <= n - 1.0 && v <= n - 1.0) {
        return None;
    }
    let (j0, i0) = (u.floor() as usize, v.floor() as usize);
    let (j1, i1) = ((j0 + 1).min(s.ncols() - 1), (i0 + 1).min(s.nrows() - 1));
    let (tu, tv) = (u - j0 as f64, v - i0 as f64);
    Some(
        s[[i0, j0]] * ((1.0 - tu) * (1.0 - tv))
            + s[[i0, j1]] * (tu * (1.0 - tv))
            + s[[i1, j0]] * ((1.0 - tu) * tv)
            + s[[i1, j1]] * (tu * tv),
    )
}

fn keys(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t.powi(3) - (A + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        A * t.powi(3) - 5.0 * A * t.powi(2) + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

fn bicubic(s: &Array2<Complex64>, u: f64, v: f64) -> Option<Complex64> {
    let n = s.nrows() as f64;
    if !(u >= 0.0 && v >= 0.0 && u <= n - 1.0 && v <= n - 1.0) {
        return None;
    }
    let (j0, i0) = (u.floor() as isize, v.floor() as isize);
    let last = s.nrows() as isize - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for di in -1..=2 {
        let wi = keys(v - (i0 + di) as f64);
        // samples past the edge are treated as zero
        let i = i0 + di;
        if !(0..=last).contains(&i) {
            continue;
        }
        for dj in -1..=2 {
            let j = j0 + dj;
            if !(0..=last).contains(&j) {
                continue;
            }
            acc += s[[i as usize, j as usize]] * (wi * keys(u - j as f64));
        }
    }
    Some(acc)
}
