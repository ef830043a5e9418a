//! Sampled scalar fields and the grid they live on.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling of the transverse plane shared by every field in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Samples per side.
    pub n: usize,
    /// Physical side length in meters.
    pub physical_extent: f64,
    /// Zero-padding ratio around the largest aperture diameter.
    pub guard_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::for_aperture(256, 2.5e-3, 2.0)
    }
}

impl GridSpec {
    /// Grid whose side is `2·guard_factor` times the aperture diameter.
    pub fn for_aperture(n: usize, largest_radius: f64, guard_factor: f64) -> Self {
        GridSpec {
            n,
            physical_extent: 2.0 * guard_factor * 2.0 * largest_radius,
            guard_factor,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.physical_extent / self.n as f64
    }

    pub fn validate(&self, largest_radius: f64) -> Result<()> {
        check_n(self.n)?;
        if !(self.physical_extent.is_finite() && self.physical_extent > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "physical extent must be positive, got {}",
                self.physical_extent
            )));
        }
        if !(self.guard_factor.is_finite() && self.guard_factor >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "guard factor must be >= 1, got {}",
                self.guard_factor
            )));
        }
        let needed = self.guard_factor * 2.0 * largest_radius;
        if self.physical_extent < needed * (1.0 - 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "extent {:e} m is smaller than guard_factor x aperture diameter = {:e} m",
                self.physical_extent, needed
            )));
        }
        Ok(())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "grid size must be a power of two >= 8, got {n}"
        )));
    }
    Ok(())
}

/// Complex scalar field sampled on an `n x n` grid.
///
/// Row index runs along `y`, column index along `x`; the optical axis
/// passes through sample `(n/2, n/2)`.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    samples: Array2<Complex64>,
    pitch_x: f64,
    pitch_y: f64,
    wavelength: f64,
    label: String,
}

impl FieldGrid {
    pub fn new(
        samples: Array2<Complex64>,
        pitch_x: f64,
        pitch_y: f64,
        wavelength: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let (rows, cols) = samples.dim();
        if rows != cols {
            return Err(Error::InvalidGrid(format!(
                "grid must be square, got {rows}x{cols}"
            )));
        }
        check_n(rows)?;
        for (name, v) in [
            ("pitch_x", pitch_x),
            ("pitch_y", pitch_y),
            ("wavelength", wavelength),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(((row, col), _)) = samples
            .indexed_iter()
            .find(|(_, v)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFiniteSample { row, col });
        }
        Ok(FieldGrid {
            samples: samples.as_standard_layout().into_owned(),
            pitch_x,
            pitch_y,
            wavelength,
            label: label.into(),
        })
    }

    pub fn zeros(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        FieldGrid::new(Array2::zeros((n, n)), pitch, pitch, wavelength, "")
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(
        n: usize,
        pitch: f64,
        wavelength: f64,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let h = (n / 2) as f64;
        let samples = Array2::from_shape_fn((n, n), |(i, j)| {
            f((j as f64 - h) * pitch, (i as f64 - h) * pitch)
        });
        FieldGrid::new(samples, pitch, pitch, wavelength, "")
    }

    pub fn on_grid(
        grid: &GridSpec,
        wavelength: f64,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        FieldGrid::from_fn(grid.n, grid.pitch(), wavelength, f)
    }

    /// Replaces the samples, keeping geometry and label. Samples are trusted
    /// to be finite; every internal operation maps finite input to finite output.
    pub(crate) fn with_samples(&self, samples: Array2<Complex64>) -> FieldGrid {
        debug_assert_eq!(samples.dim(), self.samples.dim());
        debug_assert!(samples.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        FieldGrid {
            samples: samples.as_standard_layout().into_owned(),
            pitch_x: self.pitch_x,
            pitch_y: self.pitch_y,
            wavelength: self.wavelength,
            label: self.label.clone(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn pitch_x(&self) -> f64 {
        self.pitch_x
    }

    pub fn pitch_y(&self) -> f64 {
        self.pitch_y
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self) -> &Array2<Complex64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<Complex64> {
        self.samples
    }

    pub fn extent_x(&self) -> f64 {
        self.pitch_x * self.n() as f64
    }

    pub fn extent_y(&self) -> f64 {
        self.pitch_y * self.n() as f64
    }

    /// `x` coordinate of column `j`.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - (self.n() / 2) as f64) * self.pitch_x
    }

    /// `y` coordinate of row `i`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        (i as f64 - (self.n() / 2) as f64) * self.pitch_y
    }

    pub fn sample_area(&self) -> f64 {
        self.pitch_x * self.pitch_y
    }

    /// True when both fields share size, pitch and wavelength.
    pub fn same_grid(&self, other: &FieldGrid) -> bool {
        self.n() == other.n()
            && rel_eq(self.pitch_x, other.pitch_x)
            && rel_eq(self.pitch_y, other.pitch_y)
            && rel_eq(self.wavelength, other.wavelength)
    }

    pub fn scaled(&self, c: Complex64) -> FieldGrid {
        self.with_samples(self.samples.mapv(|v| v * c))
    }

    /// `Σ|U|²·dx·dy`.
    pub fn total_energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.sample_area()
    }

    /// Copy scaled to unit total energy. Zero fields are returned unchanged.
    pub fn normalized(&self) -> FieldGrid {
        let e = self.total_energy();
        if e > 0.0 {
            self.scaled(Complex64::new(1.0 / e.sqrt(), 0.0))
        } else {
            self.clone()
        }
    }

    /// Intensity-weighted centroid `(x̄, ȳ)`.
    pub fn centroid(&self) -> Result<(f64, f64)> {
        let m = self.moments()?;
        Ok((m.mean_x, m.mean_y))
    }

    /// D4σ diameter: mean of `4σ_x` and `4σ_y` of the intensity distribution.
    pub fn beam_diameter(&self) -> Result<f64> {
        let m = self.moments()?;
        Ok(2.0 * (m.var_x.sqrt() + m.var_y.sqrt()))
    }

    fn moments(&self) -> Result<Moments> {
        let mut w = 0.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for ((i, j), v) in self.samples.indexed_iter() {
            let p = v.norm_sqr();
            w += p;
            sx += p * self.x(j);
            sy += p * self.y(i);
        }
        if !(w > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let (mean_x, mean_y) = (sx / w, sy / w);
        let (mut vx, mut vy) = (0.0, 0.0);
        for ((i, j), v) in self.samples.indexed_iter() {
            let p = v.norm_sqr();
            vx += p * (self.x(j) - mean_x).powi(2);
            vy += p * (self.y(i) - mean_y).powi(2);
        }
        Ok(Moments {
            mean_x,
            mean_y,
            var_x: vx / w,
            var_y: vy / w,
        })
    }
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `Σ|U|²·dx·dy` of `field`.
pub fn total_energy(field: &FieldGrid) -> f64 {
    field.total_energy()
}

/// D4σ beam diameter of `field` in meters.
pub fn beam_diameter(field: &FieldGrid) -> Result<f64> {
    field.beam_diameter()
}

/// Relative RMS difference `‖a − b‖ / ‖b‖` over the samples.
pub fn relative_rms(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDA: f64 = 1.064e-6;

    fn disc(n: usize, pitch: f64, r: f64) -> FieldGrid {
        FieldGrid::from_fn(n, pitch, LAMBDA, |x, y| {
            if x * x + y * y <= r * r {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        let a = Array2::<Complex64>::zeros((12, 12));
        assert!(matches!(
            FieldGrid::new(a, 1e-5, 1e-5, LAMBDA, ""),
            Err(Error::InvalidGrid(_))
        ));
        let a = Array2::<Complex64>::zeros((8, 16));
        assert!(FieldGrid::new(a, 1e-5, 1e-5, LAMBDA, "").is_err());
        let a = Array2::<Complex64>::zeros((8, 8));
        assert!(FieldGrid::new(a.clone(), 0.0, 1e-5, LAMBDA, "").is_err());
        assert!(FieldGrid::new(a.clone(), 1e-5, 1e-5, f64::NAN, "").is_err());
        let mut b = a;
        b[[3, 4]] = Complex64::new(f64::INFINITY, 0.0);
        assert!(matches!(
            FieldGrid::new(b, 1e-5, 1e-5, LAMBDA, ""),
            Err(Error::NonFiniteSample { row: 3, col: 4 })
        ));
    }

    #[test]
    fn grid_spec_guard_band() {
        let g = GridSpec::default();
        assert_eq!(g.n, 256);
        assert!((g.physical_extent - 20e-3).abs() < 1e-15);
        g.validate(2.5e-3).unwrap();
        assert!(g.validate(6e-3).is_err());
        let bad = GridSpec { n: 100, ..g };
        assert!(bad.validate(2.5e-3).is_err());
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let f = FieldGrid::zeros(16, 1e-4, LAMBDA).unwrap();
        assert_eq!(f.total_energy(), 0.0);
        assert!(matches!(f.beam_diameter(), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn energy_is_quadratic() {
        let f = disc(64, 1e-4, 1e-3);
        let e = f.total_energy();
        let g = f.scaled(Complex64::new(2.0, 0.0));
        assert!((g.total_energy() - 4.0 * e).abs() < 1e-12 * e);
    }

    #[test]
    fn disc_energy_converges_to_area() {
        let r = 2.5e-3;
        let exact = std::f64::consts::PI * r * r;
        let coarse = disc(64, 20e-3 / 64.0, r).total_energy();
        let fine = disc(256, 20e-3 / 256.0, r).total_energy();
        assert!((fine - exact).abs() / exact < 0.01, "fine = {fine:e}");
        assert!((fine - exact).abs() <= (coarse - exact).abs());
    }

    #[test]
    fn gaussian_d4sigma_is_twice_the_waist() {
        let w = 1.5e-3;
        let f = FieldGrid::from_fn(256, 20e-3 / 256.0, LAMBDA, |x, y| {
            Complex64::new((-(x * x + y * y) / (w * w)).exp(), 0.0)
        })
        .unwrap();
        let d = f.beam_diameter().unwrap();
        assert!((d - 2.0 * w).abs() / (2.0 * w) < 0.01, "d = {d:e}");
    }

    #[test]
    fn single_sample_shrinks_with_pitch() {
        for pitch in [1e-4, 1e-6] {
            let mut f = FieldGrid::zeros(16, pitch, LAMBDA).unwrap().into_samples();
            f[[8, 8]] = Complex64::new(1.0, 0.0);
            let g = FieldGrid::new(f, pitch, pitch, LAMBDA, "").unwrap();
            assert!(g.beam_diameter().unwrap() < 1e-12);
        }
        // off-centre sample: still a point
        let mut f = FieldGrid::zeros(16, 1e-4, LAMBDA).unwrap().into_samples();
        f[[3, 11]] = Complex64::new(0.5, 0.5);
        let g = FieldGrid::new(f, 1e-4, 1e-4, LAMBDA, "").unwrap();
        assert!(g.beam_diameter().unwrap() < 1e-12);
        let (cx, cy) = g.centroid().unwrap();
        assert!((cx - 3e-4).abs() < 1e-15 && (cy + 5e-4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn energy_invariant_under_unit_phase(phase in 0.0..std::f64::consts::TAU) {
            let f = disc(32, 1e-4, 1e-3);
            let g = f.scaled(Complex64::from_polar(1.0, phase));
            let (a, b) = (f.total_energy(), g.total_energy());
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn diameter_invariant_under_scaling(mag in 1e-3..1e3f64, phase in 0.0..std::f64::consts::TAU) {
            let w = 0.8e-3;
            let f = FieldGrid::from_fn(32, 1e-4, LAMBDA, |x, y| {
                Complex64::new((-(x * x + 2.0 * y * y) / (w * w)).exp(), x / w)
            }).unwrap();
            let g = f.scaled(Complex64::from_polar(mag, phase));
            let (a, b) = (f.beam_diameter().unwrap(), g.beam_diameter().unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
    }
}
