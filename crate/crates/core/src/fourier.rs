//! Centered, orthonormal DFTs.
//!
//! `fft*c` computes `fftshift(DFT(ifftshift(x))) / sqrt(N)` along every axis,
//! so the transform is unitary and the DC coefficient sits at index `N / 2`
//! (integer division). Any length is supported; rustfft picks mixed-radix or
//! Bluestein plans as needed.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};

use crate::array::{ComplexImage, SignalLine1D, C64};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Shift-transform-shift of one contiguous line. `buf` and `scratch` are
/// caller-provided work space.
fn centered_line(line: &mut [C64], fft: &dyn Fft<f64>, buf: &mut [C64], scratch: &mut [C64]) {
    let n = line.len();
    let c = n / 2;
    // ifftshift: buf[m] = line[(m + c) mod n]
    buf[..n - c].copy_from_slice(&line[c..]);
    buf[n - c..].copy_from_slice(&line[..c]);
    fft.process_with_scratch(buf, scratch);
    // fftshift: line[k] = buf[(k - c) mod n]
    line[c..].copy_from_slice(&buf[..n - c]);
    line[..c].copy_from_slice(&buf[n - c..]);
}

/// In-place centered 2D transform of a row-major `height × width` buffer,
/// unscaled.
fn centered_2d_unscaled(data: &mut [C64], height: usize, width: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), height * width);

    let row_fft = plan(width, direction);
    let mut buf = vec![C64::new(0.0, 0.0); width.max(height)];
    let mut scratch =
        vec![C64::new(0.0, 0.0); row_fft.get_inplace_scratch_len().max(plan(height, direction).get_inplace_scratch_len())];
    for row in data.chunks_exact_mut(width) {
        let s = row_fft.get_inplace_scratch_len();
        centered_line(row, row_fft.as_ref(), &mut buf[..width], &mut scratch[..s]);
    }

    let col_fft = plan(height, direction);
    let s = col_fft.get_inplace_scratch_len();
    let mut column = vec![C64::new(0.0, 0.0); height];
    for c in 0..width {
        for (r, v) in column.iter_mut().enumerate() {
            *v = data[r * width + c];
        }
        centered_line(&mut column, col_fft.as_ref(), &mut buf[..height], &mut scratch[..s]);
        for (r, v) in column.iter().enumerate() {
            data[r * width + c] = *v;
        }
    }
}

pub(crate) fn fft2c_inplace(data: &mut [C64], height: usize, width: usize) {
    centered_2d_unscaled(data, height, width, FftDirection::Forward);
    let s = 1.0 / ((height * width) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
}

pub(crate) fn ifft2c_inplace(data: &mut [C64], height: usize, width: usize) {
    centered_2d_unscaled(data, height, width, FftDirection::Inverse);
    let s = 1.0 / ((height * width) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
}

pub fn fft2c(img: &ComplexImage) -> ComplexImage {
    let mut data = img.data().to_vec();
    fft2c_inplace(&mut data, img.height(), img.width());
    ComplexImage::from_raw(img.height(), img.width(), data)
}

pub fn ifft2c(ks: &ComplexImage) -> ComplexImage {
    let mut data = ks.data().to_vec();
    ifft2c_inplace(&mut data, ks.height(), ks.width());
    ComplexImage::from_raw(ks.height(), ks.width(), data)
}

fn centered_1d(line: &SignalLine1D, direction: FftDirection) -> SignalLine1D {
    let n = line.len();
    let fft = plan(n, direction);
    let mut data = line.data().to_vec();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    centered_line(&mut data, fft.as_ref(), &mut buf, &mut scratch);
    let s = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
    SignalLine1D::from_raw(data)
}

pub fn fft1c(line: &SignalLine1D) -> SignalLine1D {
    centered_1d(line, FftDirection::Forward)
}

pub fn ifft1c(line: &SignalLine1D) -> SignalLine1D {
    centered_1d(line, FftDirection::Inverse)
}
