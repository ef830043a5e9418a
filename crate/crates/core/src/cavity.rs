//! Round-trip operator of the spatially separated resonator and its
//! Fox–Li steady state.
//!
//! The reference plane is the gain medium. One round trip runs
//!
//! ```text
//! gain → free space → [translate → rotate → cat's eye → rotate back → translate back]
//!      → free space → gain → lens → cat's eye → lens → gain
//! ```
//!
//! In NLOS mode the free-space leg is unfolded onto one axis as
//! `L_ti → RIS → L_ir`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{FieldGrid, GridSpec};
use crate::geometry::{ChannelGeometry, RisSpec};
use crate::motion::{self, Pose};
use crate::propagation::{multiply, ApertureSpec, Propagator};

/// Input cat's-eye retroreflector and gain medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterSpec {
    pub mirror: ApertureSpec,
    pub lens: ApertureSpec,
    pub gain: ApertureSpec,
    pub lens_to_mirror: f64,
    pub lens_to_gain: f64,
}

impl Default for TransmitterSpec {
    fn default() -> Self {
        TransmitterSpec {
            mirror: ApertureSpec::stop(2.5e-3),
            lens: ApertureSpec::lens(2.5e-3, 0.05),
            gain: ApertureSpec::stop(2.5e-3),
            lens_to_mirror: 0.05,
            lens_to_gain: 0.05,
        }
    }
}

/// Output cat's-eye retroreflector and its pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub lens: ApertureSpec,
    pub mirror: ApertureSpec,
    pub lens_to_mirror: f64,
    pub pose: Pose,
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        ReceiverSpec {
            lens: ApertureSpec::lens(2.5e-3, 0.05),
            mirror: ApertureSpec::stop(2.5e-3),
            lens_to_mirror: 0.05,
            pose: Pose::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    #[default]
    Los,
    Nlos,
}

/// Foreign object in the line-of-sight channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstruction {
    pub aperture: ApertureSpec,
    /// Distance from the transmitter; `None` places it midway.
    pub position: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceSpec {
    pub mode: LinkMode,
    pub geometry: ChannelGeometry,
    pub ris: RisSpec,
    pub obstruction: Option<Obstruction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityLayout {
    pub grid: GridSpec,
    pub wavelength: f64,
    pub transmitter: TransmitterSpec,
    pub free_space: FreeSpaceSpec,
    pub receiver: ReceiverSpec,
}

impl CavityLayout {
    /// Line-of-sight layout with default optics.
    pub fn los(geometry: ChannelGeometry) -> Self {
        CavityLayout {
            grid: GridSpec::default(),
            wavelength: 1.064e-6,
            transmitter: TransmitterSpec::default(),
            free_space: FreeSpaceSpec {
                mode: LinkMode::Los,
                geometry,
                ris: RisSpec::default(),
                obstruction: None,
            },
            receiver: ReceiverSpec::default(),
        }
    }

    /// RIS-assisted layout with default optics.
    pub fn nlos(geometry: ChannelGeometry) -> Self {
        let mut layout = CavityLayout::los(geometry);
        layout.free_space.mode = LinkMode::Nlos;
        layout
    }

    fn largest_radius(&self) -> f64 {
        let t = &self.transmitter;
        let r = &self.receiver;
        [t.mirror, t.lens, t.gain, r.lens]
            .iter()
            .map(|a| a.radius)
            .chain(self.free_space.obstruction.map(|o| o.aperture.radius))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate(self.largest_radius())?;
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidLayout(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        let t = &self.transmitter;
        let r = &self.receiver;
        for a in [t.mirror, t.lens, t.gain, r.lens, r.mirror] {
            a.validate()?;
        }
        for (name, d) in [
            ("transmitter lens_to_mirror", t.lens_to_mirror),
            ("transmitter lens_to_gain", t.lens_to_gain),
            ("receiver lens_to_mirror", r.lens_to_mirror),
        ] {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidLayout(format!(
                    "{name} must be positive, got {d}"
                )));
            }
        }
        for lens in [t.lens, r.lens] {
            match lens.focal_length {
                Some(f) if f > 0.0 => {}
                _ => {
                    return Err(Error::InvalidLayout(
                        "cat's-eye lens needs a positive focal length".into(),
                    ))
                }
            }
        }
        r.pose.validate()?;
        let fs = &self.free_space;
        fs.ris.validate()?;
        if let Some(obs) = fs.obstruction {
            if fs.mode == LinkMode::Nlos {
                return Err(Error::InvalidLayout(
                    "obstructions are only modelled on the line-of-sight channel".into(),
                ));
            }
            obs.aperture.validate()?;
            let z = fs.geometry.z();
            let p = obs.position.unwrap_or(0.5 * z);
            if !(p > 0.0 && p < z) {
                return Err(Error::InvalidLayout(format!(
                    "obstruction position must lie inside (0, {z}), got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Lens, focal-plane mirror and lens again.
///
/// The lens-to-focus hop is evaluated as a Fraunhofer transform: the
/// centred spectrum of the field leaving the lens stop is the focal-plane
/// field at `u = λf·ν`. Sampling the lens phase directly would alias on
/// any grid coarse enough to hold the free-space beam.
#[derive(Debug, Clone)]
pub struct CatsEye {
    stop: Array2<Complex64>,
    /// Focal-plane chirp and mirror, used when the mirror sits at the focus.
    focal: Array2<Complex64>,
    defocus: Option<Defocus>,
}

#[derive(Debug, Clone)]
struct Defocus {
    grid: FieldGrid,
    chirp: Array2<Complex64>,
    mirror: Array2<Complex64>,
    hop: Propagator,
}

impl CatsEye {
    pub fn new(
        template: &FieldGrid,
        lens: &ApertureSpec,
        mirror: &ApertureSpec,
        lens_to_mirror: f64,
    ) -> Result<Self> {
        let f = lens.focal_length.filter(|f| *f > 0.0).ok_or_else(|| {
            Error::InvalidLayout("cat's-eye lens needs a positive focal length".into())
        })?;
        let stop = ApertureSpec {
            focal_length: None,
            ..*lens
        }
        .transmittance(template)?;

        let n = template.n();
        let lambda = template.wavelength();
        let du_x = lambda * f / template.extent_x();
        let du_y = lambda * f / template.extent_y();
        let focal_grid = FieldGrid::new(Array2::zeros((n, n)), du_x, du_y, lambda, "focal plane")?;
        let mirror_t = mirror.transmittance(&focal_grid)?;
        let chirp = Array2::from_shape_fn((n, n), |(i, j)| {
            let (u, v) = (focal_grid.x(j), focal_grid.y(i));
            Complex64::from_polar(1.0, std::f64::consts::PI * (u * u + v * v) / (lambda * f))
        });

        let delta = lens_to_mirror - f;
        let (focal, defocus) = if delta.abs() <= 1e-12 * f {
            (&chirp * &chirp * &mirror_t, None)
        } else {
            let hop = Propagator::for_field(&focal_grid, delta);
            (
                Array2::zeros((0, 0)),
                Some(Defocus {
                    grid: focal_grid,
                    chirp,
                    mirror: mirror_t,
                    hop,
                }),
            )
        };
        Ok(CatsEye {
            stop,
            focal,
            defocus,
        })
    }

    /// Energy after the entrance stop, and the field leaving the exit stop.
    pub fn apply(&self, field: &FieldGrid) -> Result<(f64, FieldGrid)> {
        let entered = multiply(field, &self.stop);
        let e_in = entered.total_energy();
        let mut s = fft::spectrum(entered.samples());
        match &self.defocus {
            None => s *= &self.focal,
            Some(d) => {
                s *= &d.chirp;
                let at_focus = d.grid.with_samples(s);
                let mut g = d.hop.apply(&at_focus)?.into_samples();
                g *= &d.mirror;
                let back = d.hop.apply(&d.grid.with_samples(g))?;
                s = back.into_samples();
                s *= &d.chirp;
            }
        }
        // a second forward transform images the field inverted
        fft::fft2_centered(&mut s, fft::Direction::Forward);
        let out = field.with_samples(s);
        Ok((e_in, multiply(&out, &self.stop)))
    }
}

/// Energies at the reference planes of one traced round trip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundTripEnergies {
    pub start: f64,
    /// After the forward free-space leg, reference frame.
    pub at_receiver: f64,
    /// After translation and rotation into the receiver frame.
    pub in_receiver_frame: f64,
    /// After the receiver lens stop.
    pub receiver_entered: f64,
    /// Leaving the receiver cat's eye.
    pub receiver_exit: f64,
    /// Back in the reference frame.
    pub receiver_returned: f64,
    /// After the backward free-space leg and the gain stop.
    pub back_at_gain: f64,
    /// Leaving the transmitter cat's eye.
    pub transmitter_exit: f64,
    /// After the final gain stop.
    pub end: f64,
}

impl RoundTripEnergies {
    fn ratio(a: f64, b: f64) -> f64 {
        if b > 0.0 {
            a / b
        } else {
            0.0
        }
    }

    /// Forward free-space efficiency including the receiver aperture.
    pub fn eta_tr(&self) -> f64 {
        Self::ratio(self.at_receiver, self.start)
            * Self::ratio(self.receiver_entered, self.in_receiver_frame)
    }

    /// Receiver cat's-eye internal efficiency.
    pub fn eta_receiver(&self) -> f64 {
        Self::ratio(self.receiver_exit, self.receiver_entered)
    }

    /// Energy change from the frame transforms in and out of the receiver.
    pub fn eta_pose(&self) -> f64 {
        Self::ratio(self.in_receiver_frame, self.at_receiver)
            * Self::ratio(self.receiver_returned, self.receiver_exit)
    }

    /// Backward free-space efficiency including the gain aperture.
    pub fn eta_rt(&self) -> f64 {
        Self::ratio(self.back_at_gain, self.receiver_returned)
    }

    /// Transmitter cat's-eye internal efficiency.
    pub fn eta_transmitter(&self) -> f64 {
        Self::ratio(self.transmitter_exit, self.back_at_gain)
    }

    /// Input reflector to gain medium efficiency.
    pub fn eta_lg(&self) -> f64 {
        Self::ratio(self.end, self.transmitter_exit)
    }

    /// Round-trip efficiency, the product of all segment factors.
    pub fn eta_o(&self) -> f64 {
        Self::ratio(self.end, self.start)
    }
}

/// One traced round trip.
#[derive(Debug, Clone)]
pub struct Trace {
    pub output: FieldGrid,
    /// Field on the receiver lens, in the receiver frame.
    pub at_receiver: FieldGrid,
    pub energies: RoundTripEnergies,
}

enum Leg {
    Propagate(Propagator),
    Mask(Array2<Complex64>),
}

/// Round-trip operator with every transfer function and mask precomputed.
pub struct CavityOperator {
    template: FieldGrid,
    gain: Array2<Complex64>,
    forward: Vec<Leg>,
    backward: Vec<Leg>,
    pose: Pose,
    receiver: CatsEye,
    to_lens: Propagator,
    transmitter: CatsEye,
}

impl CavityOperator {
    pub fn new(layout: &CavityLayout) -> Result<Self> {
        layout.validate()?;
        let g = &layout.grid;
        let template = FieldGrid::zeros(g.n, g.pitch(), layout.wavelength)?;
        let prop = |d: f64| Propagator::for_field(&template, d);
        let fs = &layout.free_space;
        let (forward, backward) = match fs.mode {
            LinkMode::Los => {
                let z = fs.geometry.z();
                match fs.obstruction {
                    None => (vec![Leg::Propagate(prop(z))], vec![Leg::Propagate(prop(z))]),
                    Some(obs) => {
                        let p = obs.position.unwrap_or(0.5 * z);
                        let mask = obs.aperture.transmittance(&template)?;
                        (
                            vec![
                                Leg::Propagate(prop(p)),
                                Leg::Mask(mask.clone()),
                                Leg::Propagate(prop(z - p)),
                            ],
                            vec![
                                Leg::Propagate(prop(z - p)),
                                Leg::Mask(mask),
                                Leg::Propagate(prop(p)),
                            ],
                        )
                    }
                }
            }
            LinkMode::Nlos => {
                let (l_ti, l_ir) = (fs.geometry.l_ti(), fs.geometry.l_ir());
                let ris = fs.ris.transmittance(&template)?;
                (
                    vec![
                        Leg::Propagate(prop(l_ti)),
                        Leg::Mask(ris.clone()),
                        Leg::Propagate(prop(l_ir)),
                    ],
                    vec![
                        Leg::Propagate(prop(l_ir)),
                        Leg::Mask(ris),
                        Leg::Propagate(prop(l_ti)),
                    ],
                )
            }
        };
        let t = &layout.transmitter;
        let r = &layout.receiver;
        Ok(CavityOperator {
            gain: t.gain.transmittance(&template)?,
            forward,
            backward,
            pose: r.pose.clone(),
            receiver: CatsEye::new(&template, &r.lens, &r.mirror, r.lens_to_mirror)?,
            to_lens: prop(t.lens_to_gain),
            transmitter: CatsEye::new(&template, &t.lens, &t.mirror, t.lens_to_mirror)?,
            template,
        })
    }

    pub fn template(&self) -> &FieldGrid {
        &self.template
    }

    /// Multiplies by the gain-medium aperture.
    pub fn gain_stop(&self, field: &FieldGrid) -> FieldGrid {
        multiply(field, &self.gain)
    }

    fn run(legs: &[Leg], field: FieldGrid) -> Result<FieldGrid> {
        legs.iter().try_fold(field, |u, leg| match leg {
            Leg::Propagate(p) => p.apply(&u),
            Leg::Mask(m) => Ok(multiply(&u, m)),
        })
    }

    pub fn trace(&self, field: &FieldGrid) -> Result<Trace> {
        if !field.same_grid(&self.template) {
            return Err(Error::GridMismatch(
                "field does not match the layout grid".into(),
            ));
        }
        let mut e = RoundTripEnergies {
            start: field.total_energy(),
            ..Default::default()
        };
        let u = Self::run(&self.forward, field.clone())?;
        e.at_receiver = u.total_energy();

        let pose = &self.pose;
        let u = motion::translate_field(&u, pose.dx, pose.dy)?;
        let u = motion::rotate_field(&u, pose)?;
        e.in_receiver_frame = u.total_energy();
        let at_receiver = u.clone();
        let (entered, u) = self.receiver.apply(&u)?;
        e.receiver_entered = entered;
        e.receiver_exit = u.total_energy();
        let u = motion::rotate_field_back(&u, pose)?;
        let u = motion::translate_field(&u, -pose.dx, -pose.dy)?;
        e.receiver_returned = u.total_energy();

        let u = self.gain_stop(&Self::run(&self.backward, u)?);
        e.back_at_gain = u.total_energy();
        let u = self.to_lens.apply(&u)?;
        let (_, u) = self.transmitter.apply(&u)?;
        e.transmitter_exit = u.total_energy();
        let u = self.gain_stop(&self.to_lens.apply(&u)?);
        e.end = u.total_energy();
        Ok(Trace {
            output: u,
            at_receiver,
            energies: e,
        })
    }
}

/// Field at the gain plane after one full round trip.
pub fn round_trip(field: &FieldGrid, layout: &CavityLayout) -> Result<FieldGrid> {
    Ok(CavityOperator::new(layout)?.trace(field)?.output)
}

/// Converged (or best-effort) cavity mode and its efficiencies.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Unit-energy mode at the gain plane.
    pub mode_at_gain: FieldGrid,
    /// Mode on the receiver lens, receiver frame.
    pub mode_at_receiver: FieldGrid,
    pub eta_tr: f64,
    pub eta_rt: f64,
    pub eta_lg: f64,
    pub eta_o: f64,
    pub eta_receiver: f64,
    pub eta_transmitter: f64,
    pub eta_pose: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last normalized field change.
    pub residual: f64,
    pub eigenvalue_magnitude: f64,
}

/// Fox–Li iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            seed: 1,
            tolerance: 1e-4,
            max_iterations: 500,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 1e-10 && self.tolerance < 1e-2) {
            return Err(Error::InvalidSolver(format!(
                "tolerance must lie in (1e-10, 1e-2), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 50 {
            return Err(Error::InvalidSolver(format!(
                "max_iterations must be at least 50, got {}",
                self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Complex Gaussian noise restricted to the gain aperture.
pub fn seed_field(op: &CavityOperator, seed: u64) -> FieldGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.template().n();
    let noise = Array2::from_shape_fn((n, n), |_| {
        Complex64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        )
    });
    op.gain_stop(&op.template().with_samples(noise))
}

/// Distance between two unit-energy fields after removing their relative
/// global phase.
pub fn field_change(a: &FieldGrid, b: &FieldGrid) -> f64 {
    let inner: Complex64 = a
        .samples()
        .iter()
        .zip(b.samples().iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    let phase = if inner.norm() > 0.0 {
        Complex64::from_polar(1.0, -inner.arg())
    } else {
        Complex64::new(1.0, 0.0)
    };
    let d: f64 = a
        .samples()
        .iter()
        .zip(b.samples().iter())
        .map(|(x, y)| (y * phase - x).norm_sqr())
        .sum();
    (d * a.sample_area()).sqrt()
}

/// Power iteration of the round-trip operator from a seeded random field.
///
/// Each iterate is renormalized to unit energy. The solve stops once the
/// phase-aligned change between successive iterates drops below
/// `tolerance`; reaching `max_iterations` first returns the last iterate
/// with `converged = false`.
pub fn fox_li_solve(
    layout: &CavityLayout,
    seed: u64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SteadyState> {
    let settings = SolverSettings {
        seed,
        tolerance,
        max_iterations,
    };
    settings.validate()?;
    let op = CavityOperator::new(layout)?;
    solve_with(&op, &seed_field(&op, seed), &settings)
}

/// Power iteration from an explicit starting field.
pub fn solve_with(
    op: &CavityOperator,
    start: &FieldGrid,
    settings: &SolverSettings,
) -> Result<SteadyState> {
    settings.validate()?;
    let mut u = start.normalized();
    if u.total_energy() == 0.0 {
        return Err(Error::ModeCollapse { iterations: 0 });
    }
    let mut it = 0;
    loop {
        it += 1;
        let trace = op.trace(&u)?;
        let gain = trace.energies.eta_o();
        if !(gain.is_finite() && gain > 1e-250) {
            return Err(Error::ModeCollapse { iterations: it });
        }
        let next = trace.output.normalized();
        let residual = field_change(&u, &next);
        let done = residual < settings.tolerance;
        if done || it >= settings.max_iterations {
            let converged = done && it < settings.max_iterations;
            if !converged {
                log::warn!(
                    "Fox-Li iteration stopped after {it} round trips, residual {residual:.3e}"
                );
            }
            let e = &trace.energies;
            return Ok(SteadyState {
                mode_at_gain: u,
                mode_at_receiver: trace.at_receiver,
                eta_tr: e.eta_tr(),
                eta_rt: e.eta_rt(),
                eta_lg: e.eta_lg(),
                eta_o: e.eta_o(),
                eta_receiver: e.eta_receiver(),
                eta_transmitter: e.eta_transmitter(),
                eta_pose: e.eta_pose(),
                iterations: it,
                converged,
                residual,
                eigenvalue_magnitude: gain.sqrt(),
            });
        }
        u = next;
    }
}

/// Energy ratio `after / before`, clamped to `[0, 1]`.
pub fn transfer_efficiency(after: &FieldGrid, before: &FieldGrid) -> Result<f64> {
    let b = before.total_energy();
    if b == 0.0 {
        return Err(Error::ZeroReference);
    }
    let eta = after.total_energy() / b;
    if eta > 1.0 {
        log::debug!("transfer efficiency {eta} clamped to 1");
    }
    Ok(eta.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::derive_geometry;
    use crate::propagation::InvasionSide;

    fn coarse(mut layout: CavityLayout) -> CavityLayout {
        layout.grid = GridSpec::for_aperture(128, 2.5e-3, 2.0);
        layout
    }

    fn los(z: f64) -> CavityLayout {
        coarse(CavityLayout::los(derive_geometry(z, 0.5 * z, 0.0).unwrap()))
    }

    #[test]
    fn lossless_layout_is_identity() {
        // Each cat's eye acts as inversion plus propagation by −2f, so with
        // 2·z + 2·lens_to_gain = 4f the round trip images the gain plane onto itself.
        let f = 0.05;
        let big = 40e-3;
        let mut layout = los(f);
        layout.grid = GridSpec {
            n: 128,
            physical_extent: 2.0 * big,
            guard_factor: 1.0,
        };
        for a in [
            &mut layout.transmitter.mirror,
            &mut layout.transmitter.gain,
            &mut layout.receiver.mirror,
        ] {
            *a = ApertureSpec::stop(big);
        }
        layout.transmitter.lens = ApertureSpec::lens(big, f);
        layout.receiver.lens = ApertureSpec::lens(big, f);
        let op = CavityOperator::new(&layout).unwrap();
        let w = 4e-3;
        let u = FieldGrid::from_fn(128, layout.grid.pitch(), layout.wavelength, |x, y| {
            Complex64::new(1.0, 0.2 * y / w) * (-(x * x + y * y) / (w * w)).exp()
        })
        .unwrap();
        let v = op.trace(&u).unwrap().output;
        // equal up to a constant phase
        let d = field_change(&u.normalized(), &v.normalized());
        assert!(d < 1e-9, "{d} {}", v.total_energy() / u.total_energy());
        assert!((v.total_energy() / u.total_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cats_eye_inverts_at_focus() {
        let layout = los(1.0);
        let op = CavityOperator::new(&layout).unwrap();
        let w = 0.6e-3;
        let off = 0.8e-3;
        let t = op.template();
        let u = FieldGrid::from_fn(t.n(), t.pitch_x(), t.wavelength(), |x, y| {
            Complex64::new((-((x - off).powi(2) + y * y) / (w * w)).exp(), 0.0)
        })
        .unwrap();
        let (_, v) = op.receiver.apply(&u).unwrap();
        let (cx, cy) = v.centroid().unwrap();
        assert!((cx + off).abs() < 0.05 * off, "centroid {cx:e}");
        assert!(cy.abs() < 1e-6);
    }

    #[test]
    fn defocused_mirror_matches_focus_in_the_limit() {
        let layout = los(1.0);
        let t = FieldGrid::zeros(128, layout.grid.pitch(), layout.wavelength).unwrap();
        let lens = ApertureSpec::lens(2.5e-3, 0.05);
        let mirror = ApertureSpec::stop(2.5e-3);
        let at = CatsEye::new(&t, &lens, &mirror, 0.05).unwrap();
        let near = CatsEye::new(&t, &lens, &mirror, 0.05 + 1e-11).unwrap();
        let u = FieldGrid::from_fn(128, t.pitch_x(), t.wavelength(), |x, y| {
            Complex64::new(1.0, x / 1e-3) * (-(x * x + y * y) / 2e-6).exp()
        })
        .unwrap();
        let (_, a) = at.apply(&u).unwrap();
        let (_, b) = near.apply(&u).unwrap();
        // the extra path adds a constant phase
        let e = field_change(&a.normalized(), &b.normalized());
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn full_obstruction_gives_zero_field() {
        let mut layout = los(1.0);
        layout.free_space.obstruction = Some(Obstruction {
            aperture: ApertureSpec::stop(2.5e-3).with_obstruction(5e-3, InvasionSide::PositiveX),
            position: None,
        });
        let op = CavityOperator::new(&layout).unwrap();
        let u = seed_field(&op, 3);
        let v = round_trip(&u, &layout).unwrap();
        assert_eq!(v.total_energy(), 0.0);
        assert!(matches!(
            fox_li_solve(&layout, 3, 1e-4, 50),
            Err(Error::ModeCollapse { iterations: 1 })
        ));
    }

    #[test]
    fn layout_validation() {
        let mut layout = los(1.0);
        layout.free_space.mode = LinkMode::Nlos;
        layout.free_space.geometry = derive_geometry(2.0, 1.0, 0.5).unwrap();
        layout.free_space.obstruction = Some(Obstruction {
            aperture: ApertureSpec::stop(2.5e-3),
            position: None,
        });
        assert!(matches!(layout.validate(), Err(Error::InvalidLayout(_))));

        let mut layout = los(1.0);
        layout.receiver.lens_to_mirror = 0.0;
        assert!(layout.validate().is_err());

        let mut layout = los(1.0);
        layout.transmitter.lens = ApertureSpec::stop(2.5e-3);
        assert!(layout.validate().is_err());

        let mut layout = los(1.0);
        layout.free_space.obstruction = Some(Obstruction {
            aperture: ApertureSpec::stop(2.5e-3),
            position: Some(1.5),
        });
        assert!(layout.validate().is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let op = CavityOperator::new(&los(1.0)).unwrap();
        let f = FieldGrid::zeros(64, 1e-4, 1.064e-6).unwrap();
        assert!(matches!(op.trace(&f), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn solver_settings_are_checked() {
        let layout = los(1.0);
        assert!(fox_li_solve(&layout, 1, 0.1, 100).is_err());
        assert!(fox_li_solve(&layout, 1, 1e-4, 10).is_err());
    }

    #[test]
    fn baseline_steady_state_is_consistent() {
        let layout = los(1.0);
        let s = fox_li_solve(&layout, 7, 1e-4, 500).unwrap();
        assert!(s.converged, "residual {}", s.residual);
        assert!(s.iterations < 500);
        assert!(s.eta_o > 0.9 && s.eta_o <= 1.0, "eta_o {}", s.eta_o);
        assert!((s.eigenvalue_magnitude.powi(2) - s.eta_o).abs() < 1e-3);
        let product =
            s.eta_tr * s.eta_receiver * s.eta_pose * s.eta_rt * s.eta_transmitter * s.eta_lg;
        assert!((product - s.eta_o).abs() < 1e-12);
        for eta in [s.eta_tr, s.eta_rt, s.eta_lg] {
            assert!(eta > 0.0 && eta <= 1.0);
        }

        // one more round trip barely moves the mode
        let op = CavityOperator::new(&layout).unwrap();
        let next = op.trace(&s.mode_at_gain).unwrap().output.normalized();
        assert!(field_change(&s.mode_at_gain, &next) < 10.0 * 1e-4);
    }

    #[test]
    fn global_phase_of_seed_is_irrelevant() {
        let layout = los(2.0);
        let op = CavityOperator::new(&layout).unwrap();
        let seed = seed_field(&op, 5);
        let settings = SolverSettings::default();
        let a = solve_with(&op, &seed, &settings).unwrap();
        let b = solve_with(
            &op,
            &seed.scaled(Complex64::from_polar(1.0, 1.1)),
            &settings,
        )
        .unwrap();
        assert!((a.eta_o - b.eta_o).abs() < 1e-12);
        for (x, y) in a
            .mode_at_gain
            .samples()
            .iter()
            .zip(b.mode_at_gain.samples())
        {
            assert!((x.norm() - y.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn ris_phase_does_not_change_efficiency() {
        let g = derive_geometry(2.0, 1.0, 0.5).unwrap();
        let mut layout = coarse(CavityLayout::nlos(g));
        let a = fox_li_solve(&layout, 2, 1e-4, 500).unwrap();
        layout.free_space.ris.theta = std::f64::consts::PI / 3.0;
        let b = fox_li_solve(&layout, 2, 1e-4, 500).unwrap();
        assert!((a.eta_o - b.eta_o).abs() < 1e-9);
    }

    #[test]
    fn transfer_efficiency_basics() {
        let u = FieldGrid::from_fn(16, 1e-4, 1e-6, |x, _| Complex64::new(1.0 + x, 0.0)).unwrap();
        assert_eq!(transfer_efficiency(&u, &u).unwrap(), 1.0);
        let z = FieldGrid::zeros(16, 1e-4, 1e-6).unwrap();
        assert_eq!(transfer_efficiency(&z, &u).unwrap(), 0.0);
        assert!(matches!(
            transfer_efficiency(&u, &z),
            Err(Error::ZeroReference)
        ));
        let half = u.scaled(Complex64::new(0.5, 0.0));
        assert!((transfer_efficiency(&half, &u).unwrap() - 0.25).abs() < 1e-15);
        let double = u.scaled(Complex64::new(2.0, 0.0));
        assert_eq!(transfer_efficiency(&double, &u).unwrap(), 1.0);
    }
}
