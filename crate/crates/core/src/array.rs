//! Complex-valued carriers for images, k-space and 1D lines, plus the small
//! set of reductions (inner product, norm, relative change) used throughout.
//!
//! All data is stored row-major as `Complex64` (interleaved re/im `f64`).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Anything that exposes a flat complex buffer with a shape.
pub trait ComplexField {
    fn shape(&self) -> Vec<usize>;
    fn values(&self) -> &[C64];
}

fn check_finite(data: &[C64], what: &str) -> Result<()> {
    if data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_same_shape<A: ComplexField + ?Sized, B: ComplexField + ?Sized>(a: &A, b: &B) -> Result<()> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(Error::ShapeMismatch { left: sa, right: sb });
    }
    Ok(())
}

/// `Σ conj(a_i) · b_i`.
pub fn inner_product<A, B>(a: &A, b: &B) -> Result<C64>
where
    A: ComplexField + ?Sized,
    B: ComplexField + ?Sized,
{
    check_same_shape(a, b)?;
    Ok(a
        .values()
        .iter()
        .zip(b.values())
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y))
}

pub fn l2_norm<A: ComplexField + ?Sized>(a: &A) -> f64 {
    a.values().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Guard against division by zero in [`relative_change`].
pub const RELATIVE_CHANGE_EPS: f64 = 1e-30;

/// `‖x_new − x_old‖₂ / max(‖x_old‖₂, 1e-30)`.
pub fn relative_change<A: ComplexField + ?Sized>(x_new: &A, x_old: &A) -> Result<f64> {
    check_same_shape(x_new, x_old)?;
    let diff = x_new
        .values()
        .iter()
        .zip(x_old.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(diff / l2_norm(x_old).max(RELATIVE_CHANGE_EPS))
}

/// A 2D complex image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    height: usize,
    width: usize,
    data: Vec<C64>,
}

impl ComplexImage {
    pub fn new(height: usize, width: usize, data: Vec<C64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch { left: vec![height, width], right: vec![data.len()] });
        }
        check_finite(&data, "complex image")?;
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self { height, width, data: vec![C64::new(0.0, 0.0); height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut img = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                img.data[r * width + c] = f(r, c);
            }
        }
        img
    }

    /// Internal constructor for buffers produced by our own arithmetic.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[C64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn is_finite(&self) -> bool {
        check_finite(&self.data, "").is_ok()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.width {
            for r in 0..self.height {
                out.push(self.data[r * self.width + c]);
            }
        }
        Self::from_raw(self.width, self.height, out)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_raw(self.height, self.width, self.data.iter().map(|z| z * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `self + alpha · other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b * alpha).collect(),
        ))
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage::from_raw(self.height, self.width, self.data.iter().map(|z| z.norm()).collect())
    }
}

impl ComplexField for ComplexImage {
    fn shape(&self) -> Vec<usize> {
        vec![self.height, self.width]
    }
    fn values(&self) -> &[C64] {
        &self.data
    }
}

/// Per-coil k-space planes (dense, unsampled entries held as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceStack {
    coils: usize,
    height: usize,
    width: usize,
    data: Vec<C64>,
}

impl KSpaceStack {
    pub fn new(coils: usize, height: usize, width: usize, data: Vec<C64>) -> Result<Self> {
        if coils == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "k-space dimensions must be positive, got {coils}x{height}x{width}"
            )));
        }
        if data.len() != coils * height * width {
            return Err(Error::ShapeMismatch { left: vec![coils, height, width], right: vec![data.len()] });
        }
        check_finite(&data, "k-space stack")?;
        Ok(Self { coils, height, width, data })
    }

    pub fn zeros(coils: usize, height: usize, width: usize) -> Self {
        assert!(coils > 0 && height > 0 && width > 0, "k-space dimensions must be positive");
        Self { coils, height, width, data: vec![C64::new(0.0, 0.0); coils * height * width] }
    }

    pub(crate) fn from_raw(coils: usize, height: usize, width: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), coils * height * width);
        Self { coils, height, width, data }
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn coil(&self, c: usize) -> &[C64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn coil_mut(&mut self, c: usize) -> &mut [C64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_raw(self.coils, self.height, self.width, self.data.iter().map(|z| z * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self::from_raw(
            self.coils,
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self::from_raw(
            self.coils,
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl ComplexField for KSpaceStack {
    fn shape(&self) -> Vec<usize> {
        vec![self.coils, self.height, self.width]
    }
    fn values(&self) -> &[C64] {
        &self.data
    }
}

/// A 1D complex signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLine1D {
    data: Vec<C64>,
}

impl SignalLine1D {
    pub fn new(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("line length must be positive"));
        }
        check_finite(&data, "signal line")?;
        Ok(Self { data })
    }

    pub(crate) fn from_raw(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// Mean power `‖x‖² / n`.
    pub fn power(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

impl ComplexField for SignalLine1D {
    fn shape(&self) -> Vec<usize> {
        vec![self.data.len()]
    }
    fn values(&self) -> &[C64] {
        &self.data
    }
}

impl ComplexField for [C64] {
    fn shape(&self) -> Vec<usize> {
        vec![self.len()]
    }
    fn values(&self) -> &[C64] {
        self
    }
}

/// A 2D real-valued image (magnitudes, error maps, grayscale sources).
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch { left: vec![height, width], right: vec![data.len()] });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("real image".into()));
        }
        Ok(Self { height, width, data })
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn ones(h: usize, w: usize) -> ComplexImage {
        ComplexImage::from_fn(h, w, |_, _| C64::new(1.0, 0.0))
    }

    fn random_image(h: usize, w: usize, rng: &mut Rng) -> ComplexImage {
        ComplexImage::from_fn(h, w, |_, _| rng.complex_normal(1.0))
    }

    #[test]
    fn inner_product_examples() {
        assert_eq!(inner_product(&ones(2, 2), &ones(2, 2)).unwrap(), C64::new(4.0, 0.0));
        let mut rng = Rng::new(3);
        let a = random_image(3, 5, &mut rng);
        assert_eq!(inner_product(&a, &ComplexImage::zeros(3, 5)).unwrap(), C64::new(0.0, 0.0));
        let a = ComplexImage::new(1, 1, vec![C64::new(1.0, 1.0)]).unwrap();
        let b = ComplexImage::new(1, 1, vec![C64::new(2.0, 0.0)]).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), C64::new(2.0, -2.0));
    }

    #[test]
    fn inner_product_shape_mismatch_names_both_shapes() {
        let err = inner_product(&ones(2, 3), &ones(3, 2)).unwrap_err();
        match err {
            Error::ShapeMismatch { left, right } => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![3, 2]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(l2_norm(&ComplexImage::zeros(4, 4)), 0.0);
        let z = ComplexImage::new(1, 1, vec![C64::new(3.0, 4.0)]).unwrap();
        assert_eq!(l2_norm(&z), 5.0);
        assert_eq!(l2_norm(&ones(4, 4)), 4.0);
    }

    #[test]
    fn relative_change_examples() {
        let a = ones(2, 2);
        assert_eq!(relative_change(&a, &a).unwrap(), 0.0);
        let z = ComplexImage::zeros(2, 2);
        assert_eq!(relative_change(&z, &z).unwrap(), 0.0);
        let old = ones(1, 4);
        let new = ComplexImage::from_fn(1, 4, |_, _| C64::new(1.01, 0.0));
        assert!((relative_change(&new, &old).unwrap() - 0.01).abs() < 1e-12);
        assert!(relative_change(&ones(1, 4), &ones(4, 1)).is_err());
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(ComplexImage::new(2, 2, vec![C64::new(0.0, 0.0); 3]).is_err());
        assert!(ComplexImage::new(1, 1, vec![C64::new(f64::NAN, 0.0)]).is_err());
        assert!(ComplexImage::new(0, 1, vec![]).is_err());
        assert!(KSpaceStack::new(2, 2, 2, vec![C64::new(0.0, 0.0); 7]).is_err());
    }

    #[test]
    fn transpose_roundtrip() {
        let mut rng = Rng::new(9);
        let a = random_image(3, 7, &mut rng);
        let t = a.transpose();
        assert_eq!((t.height(), t.width()), (7, 3));
        assert_eq!(t.get(4, 1), a.get(1, 4));
        assert_eq!(t.transpose(), a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use crate::rng::Rng;

        proptest! {
            #[test]
            fn conjugate_symmetry(seed in any::<u64>(), h in 1usize..9, w in 1usize..9) {
                let mut rng = Rng::new(seed);
                let a = random_image(h, w, &mut rng);
                let b = random_image(h, w, &mut rng);
                let ab = inner_product(&a, &b).unwrap();
                let ba = inner_product(&b, &a).unwrap();
                let scale = l2_norm(&a) * l2_norm(&b);
                prop_assert!((ab - ba.conj()).norm() <= 1e-12 * scale);
            }

            #[test]
            fn norm_matches_self_inner_product(seed in any::<u64>(), h in 1usize..9, w in 1usize..9) {
                let mut rng = Rng::new(seed);
                let a = random_image(h, w, &mut rng);
                let n2 = l2_norm(&a).powi(2);
                let ip = inner_product(&a, &a).unwrap().re;
                prop_assert!((n2 - ip).abs() <= 1e-12 * n2);
            }
        }
    }
}
