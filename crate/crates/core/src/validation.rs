//! Self-checks against independent oracles, run by `rbswipt validate`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::field::{relative_rms, FieldGrid};
use crate::motion::{rotate_field, rotate_field_back, rotation_matrix, translate_field, Pose};
use crate::power::{
    apd_link, pv_output, pv_residual, split_power, threshold_power, GainMediumSpec,
    ReceiverElectronics,
};
use crate::propagation::{angular_spectrum_propagate, rayleigh_sommerfeld_oracle};

const LAMBDA: f64 = 1.064e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Measured error or figure of merit.
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Check {
        Check {
            name,
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn holds(name: &'static str, ok: bool) -> Check {
        Check {
            name,
            value: if ok { 0.0 } else { 1.0 },
            limit: 0.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn gaussian(n: usize, extent: f64, w: f64) -> FieldGrid {
    FieldGrid::from_fn(n, extent / n as f64, LAMBDA, |x, y| {
        Complex64::new((-(x * x + y * y) / (w * w)).exp(), 0.0)
    })
    .expect("valid grid")
}

fn random_field(n: usize, pitch: f64, seed: u64) -> FieldGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Array2::from_shape_fn((n, n), |_| {
        Complex64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        )
    });
    FieldGrid::new(s, pitch, pitch, LAMBDA, "").expect("valid grid")
}

pub fn rs_oracle_error() -> f64 {
    let (n, z) = (32, 0.5);
    let pitch = (LAMBDA * z / n as f64).sqrt();
    let f = random_field(n, pitch, 11);
    let a = angular_spectrum_propagate(&f, z);
    let b = rayleigh_sommerfeld_oracle(&f, z).expect("small grid");
    relative_rms(a.samples(), b.samples())
}

pub fn gaussian_law_error() -> f64 {
    let (w0, z) = (1e-3, 1.0);
    let g = angular_spectrum_propagate(&gaussian(256, 20e-3, w0), z);
    let zr = PI * w0 * w0 / LAMBDA;
    let expected = w0 * (1.0 + (z / zr).powi(2)).sqrt();
    let w = g.beam_diameter().expect("nonzero field") / 2.0;
    (w - expected).abs() / expected
}

pub fn energy_conservation_error() -> f64 {
    let f = gaussian(256, 20e-3, 1e-3);
    let g = angular_spectrum_propagate(&f, 2.0);
    (g.total_energy() / f.total_energy() - 1.0).abs()
}

pub fn back_propagation_error() -> f64 {
    let f = gaussian(256, 20e-3, 1e-3);
    let g = angular_spectrum_propagate(&angular_spectrum_propagate(&f, 1.5), -1.5);
    relative_rms(g.samples(), f.samples())
}

pub fn shift_theorem_error() -> f64 {
    let f = gaussian(128, 10e-3, 8e-4);
    let k = 5;
    let g =
        translate_field(&f, k as f64 * f.pitch_x(), -(k as f64) * f.pitch_y()).expect("in band");
    let n = f.n();
    // U'(x, y) = U(x + dx, y + dy): output column j reads input column j + k.
    let expected =
        Array2::from_shape_fn((n, n), |(i, j)| f.samples()[[(i + n - k) % n, (j + k) % n]]);
    relative_rms(g.samples(), &expected)
}

pub fn rotation_round_trip_error(degrees: f64) -> f64 {
    let f = gaussian(256, 20e-3, 1.5e-3);
    let pose = Pose::rotation(0.0, degrees.to_radians(), 0.0);
    let g = rotate_field(&f, &pose).and_then(|g| rotate_field_back(&g, &pose));
    relative_rms(g.expect("valid pose").samples(), f.samples())
}

pub fn rotation_orthogonality_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..64)
        .map(|_| {
            let a: [f64; 3] = std::array::from_fn(|_| {
                let u: f64 = StandardNormal.sample(&mut rng);
                u.clamp(-1.5, 1.5)
            });
            rotation_matrix(&Pose::rotation(a[0], a[1], a[2])).orthogonality_error()
        })
        .fold(0.0, f64::max)
}

/// Largest gap between the PV solver and plain bisection over a range of charging powers.
pub fn pv_oracle_error() -> f64 {
    let el = ReceiverElectronics::default();
    [0.01, 0.5, 2.0, 6.645, 20.0, 60.0]
        .iter()
        .map(|&p| {
            let bound = el.pv.responsivity * p;
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if pv_residual(mid, p, &el) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let i = pv_output(p, &el).map(|o| o.current).unwrap_or(f64::NAN);
            let gap = (i - 0.5 * (lo + hi)).abs();
            if gap.is_nan() {
                f64::INFINITY
            } else {
                gap
            }
        })
        .fold(0.0, f64::max)
}

pub fn split_is_exact() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..10_000).all(|_| {
        let u: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        let p = (u * 40.0).abs();
        let gamma = (v.abs() / 3.0).min(1.0);
        split_power(p, gamma).is_ok_and(|(ch, com)| ch + com == p && ch >= 0.0 && com >= 0.0)
    })
}

pub fn threshold_is_monotone() -> bool {
    let g = GainMediumSpec::default();
    let grid = [0.2, 0.4, 0.6, 0.8, 0.95, 1.0];
    let p = |r_in: f64, r_out: f64, eta: f64, eta_g: f64| {
        let g = GainMediumSpec {
            transit_efficiency: eta_g,
            ..g
        };
        threshold_power(&g, r_in, r_out, eta).unwrap_or(f64::NAN)
    };
    grid.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        p(a, 0.9, 0.9, 0.9) > p(b, 0.9, 0.9, 0.9)
            && p(0.9, a, 0.9, 0.9) > p(0.9, b, 0.9, 0.9)
            && p(0.9, 0.9, a, 0.9) > p(0.9, 0.9, b, 0.9)
            && p(0.9, 0.9, 0.9, a) > p(0.9, 0.9, 0.9, b)
    })
}

pub fn capacity_is_monotone() -> bool {
    let el = ReceiverElectronics::default();
    let links: Vec<_> = (1..=60)
        .map(|k| apd_link(1e-3 * 1.25f64.powi(k), &el).expect("valid power"))
        .collect();
    links
        .windows(2)
        .all(|w| w[1].snr > w[0].snr && w[1].capacity > w[0].capacity)
}

/// Runs every check.
pub fn run() -> ValidationReport {
    let checks = vec![
        Check::at_most("rayleigh_sommerfeld_oracle_rms", rs_oracle_error(), 1e-3),
        Check::at_most("gaussian_beam_width_law", gaussian_law_error(), 5e-3),
        Check::at_most("angular_spectrum_energy", energy_conservation_error(), 1e-6),
        Check::at_most(
            "propagate_back_propagate_rms",
            back_propagation_error(),
            1e-8,
        ),
        Check::at_most("shift_theorem_rms", shift_theorem_error(), 1e-9),
        Check::at_most(
            "rotation_round_trip_rms",
            rotation_round_trip_error(20.0),
            0.02,
        ),
        Check::at_most(
            "rotation_matrix_orthogonality",
            rotation_orthogonality_error(),
            1e-14,
        ),
        Check::at_most("pv_bisection_oracle_amps", pv_oracle_error(), 1e-9),
        Check::holds("power_split_exact", split_is_exact()),
        Check::holds("threshold_monotone", threshold_is_monotone()),
        Check::holds("capacity_monotone_in_snr", capacity_is_monotone()),
    ];
    ValidationReport { checks }
}
