//! Centered, unitary 2-D FFT on square grids.
//!
//! Sample `(i, j)` sits at `((j - n/2)·dx, (i - n/2)·dy)` and spectrum bin
//! `(i, j)` at `((j - n/2)/(n·dx), (i - n/2)/(n·dy))`, so both domains have
//! the origin at index `n/2`. The `1/n` scaling on both directions makes the
//! pair exactly inverse and preserves the discrete sum of `|U|²`.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match direction {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// In-place centered transform of a square array in standard layout.
pub fn fft2_centered(data: &mut Array2<Complex64>, direction: Direction) {
    let (rows, cols) = data.dim();
    assert_eq!(rows, cols, "fft2_centered expects a square grid");
    assert!(rows % 2 == 0, "fft2_centered expects an even grid size");
    let n = rows;
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().into_owned();
    }
    let fft = plan(n, direction);
    let buf = data.as_slice_mut().expect("standard layout");

    // (-1)^(i+j) before and after the plain DFT is the even-n equivalent
    // of ifftshift / fftshift around the transform.
    checkerboard(buf, n, 1.0);

    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    let mut transposed = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(buf, &mut transposed, n);
    fft.process_with_scratch(&mut transposed, &mut scratch);
    transpose(&transposed, buf, n);

    checkerboard(buf, n, 1.0 / n as f64);
}

/// Returns the centered spectrum of `field` without modifying it.
pub fn spectrum(field: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = field.as_standard_layout().into_owned();
    fft2_centered(&mut out, Direction::Forward);
    out
}

/// Inverse of [`spectrum`].
pub fn from_spectrum(spec: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = spec.as_standard_layout().into_owned();
    fft2_centered(&mut out, Direction::Inverse);
    out
}

/// Centered frequency of bin `index` on an `n`-point axis with sample pitch `pitch`.
#[inline]
pub fn frequency(index: usize, n: usize, pitch: f64) -> f64 {
    (index as f64 - (n / 2) as f64) / (n as f64 * pitch)
}

fn checkerboard(buf: &mut [Complex64], n: usize, scale: f64) {
    for (i, row) in buf.chunks_exact_mut(n).enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let s = if (i + j) % 2 == 0 { scale } else { -scale };
            *v *= s;
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
