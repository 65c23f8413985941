//! Multi-axis FFTs over flat row-major buffers.
//!
//! Normalization table (per axis, N points, step `dx`, dual step
//! `dw = 2π/(N·dx)`):
//!
//! | operation                    | discrete form                          |
//! |------------------------------|----------------------------------------|
//! | `∫ e^{-iωx} f(x) dx`         | `dx · FFT_forward(f)`                  |
//! | `(2π)^{-1} ∫ e^{iωx} g dω`   | `(2π)^{-1} dw · FFT_inverse(g)`        |
//! | unitary `(2π)^{-1/2}∫…`      | `(2π)^{-1/2} dx · FFT(...)`            |
//!
//! `FFT_forward`/`FFT_inverse` are the unnormalized rustfft transforms with
//! kernels `e^{∓2πi jm/N}`; the product of the two table prefactors is
//! `dx·dw/(2π) = 1/N`, which is the usual round-trip constant.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `e^{-2πi jm/N}`.
    Forward,
    /// Kernel `e^{+2πi jm/N}`, unnormalized.
    Inverse,
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    planner.plan_fft(
        n,
        match dir {
            Direction::Forward => FftDirection::Forward,
            Direction::Inverse => FftDirection::Inverse,
        },
    )
}

/// In-place transform of `data` (row-major, `shape`) along each axis listed
/// in `axes`.
pub fn transform_axes(data: &mut [Complex64], shape: &[usize], axes: &[usize], dir: Direction) {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len(), "buffer does not match shape");
    for &axis in axes {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let fft = plan(n, dir);
        if stride == 1 {
            // contiguous lanes
            let scratch_len = fft.get_inplace_scratch_len();
            exec::for_each_chunk(data, n * 64, |_, chunk| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                for lane in chunk.chunks_mut(n) {
                    fft.process_with_scratch(lane, &mut scratch);
                }
            });
        } else {
            // lanes strided by `stride` inside blocks of n*stride
            let block = n * stride;
            exec::for_each_chunk(data, block, |_, blk| {
                let mut lane = vec![Complex64::new(0.0, 0.0); n];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for offset in 0..stride {
                    for (i, v) in lane.iter_mut().enumerate() {
                        *v = blk[offset + i * stride];
                    }
                    fft.process_with_scratch(&mut lane, &mut scratch);
                    for (i, v) in lane.iter().enumerate() {
                        blk[offset + i * stride] = *v;
                    }
                }
            });
        }
    }
}

/// Transform along every axis.
pub fn transform_all(data: &mut [Complex64], shape: &[usize], dir: Direction) {
    let axes: Vec<usize> = (0..shape.len()).collect();
    transform_axes(data, shape, &axes, dir);
}

/// Signed frequency index for FFT bin `m` of an `n`-point transform.
#[inline]
pub fn signed_bin(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Cyclic shift of every axis by `shift[axis]` positions:
/// `out[i] = data[(i + shift) mod n]`.
pub fn roll(data: &[Complex64], shape: &[usize], shift: &[usize]) -> Vec<Complex64> {
    let total = data.len();
    let rank = shape.len();
    exec::map_range(total, |flat| {
        let mut rem = flat;
        let mut src = 0usize;
        let mut mult = 1usize;
        for ax in (0..rank).rev() {
            let i = (rem % shape[ax] + shift[ax]) % shape[ax];
            rem /= shape[ax];
            src += i * mult;
            mult *= shape[ax];
        }
        data[src]
    })
}
