//! Multi-coil encoding operator `A = U F S` and its adjoint.
//!
//! k-space is kept dense with zeros at unsampled locations, so `U` is a
//! self-adjoint projection and every plane has the image shape.

use rayon::prelude::*;

use crate::array::{ComplexImage, KSpaceStack, C64};
use crate::error::{Error, Result};
use crate::fourier::{fft2c_inplace, ifft2c_inplace};
use crate::rng::Rng;
use crate::sampling::SamplingMask;

/// Tolerance on `Σ_c |S_c|² = 1`.
pub const COIL_NORMALIZATION_TOL: f64 = 1e-10;

/// Lobe width as a fraction of `min(h, w)`.
pub const COIL_LOBE_SIGMA: f64 = 0.5;
/// Radius of the circle carrying the lobe centres, as a fraction of `min(h, w)`.
pub const COIL_LOBE_RADIUS: f64 = 0.45;

/// Per-coil sensitivity maps, normalised so `Σ_c |S_c(p)|² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    coils: usize,
    height: usize,
    width: usize,
    maps: Vec<C64>,
}

impl CoilMaps {
    /// Wraps explicit maps after checking the normalisation invariant.
    pub fn new(coils: usize, height: usize, width: usize, maps: Vec<C64>) -> Result<Self> {
        if coils == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("coil map dimensions must be positive"));
        }
        if maps.len() != coils * height * width {
            return Err(Error::ShapeMismatch { left: vec![coils, height, width], right: vec![maps.len()] });
        }
        let n = height * width;
        for p in 0..n {
            let s: f64 = (0..coils).map(|c| maps[c * n + p].norm_sqr()).sum();
            if (s - 1.0).abs() > COIL_NORMALIZATION_TOL {
                return Err(Error::invalid(format!("coil maps not normalised at pixel {p}: sum |S|^2 = {s}")));
            }
        }
        Ok(Self { coils, height, width, maps })
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn uniform(height: usize, width: usize) -> Self {
        Self { coils: 1, height, width, maps: vec![C64::new(1.0, 0.0); height * width] }
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

    pub fn map(&self, c: usize) -> &[C64] {
        let n = self.height * self.width;
        &self.maps[c * n..(c + 1) * n]
    }

    /// Pixel coordinates `(row, col)` of coil `c`'s lobe centre.
    pub fn lobe_center(height: usize, width: usize, coils: usize, c: usize) -> (f64, f64) {
        let m = height.min(width) as f64;
        let theta = std::f64::consts::TAU * c as f64 / coils as f64;
        let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
        (cy + COIL_LOBE_RADIUS * m * theta.sin(), cx + COIL_LOBE_RADIUS * m * theta.cos())
    }

    fn check_image(&self, height: usize, width: usize) -> Result<()> {
        if (height, width) != (self.height, self.width) {
            return Err(Error::ShapeMismatch { left: vec![height, width], right: vec![self.height, self.width] });
        }
        Ok(())
    }
}

/// Gaussian-lobe coil profiles on a circle around the field of view, each
/// with a planar phase ramp perpendicular to its lobe direction, normalised
/// pointwise.
///
/// `|S̃_c(p)| = exp(−‖p − μ_c‖² / 2σ²)`, `σ = 0.5·min(h,w)`, `μ_c` at angle
/// `2πc/C` on a circle of radius `0.45·min(h,w)` about `(h/2, w/2)`; phase
/// `π·(−sin θ_c·(x − cx)/w + cos θ_c·(y − cy)/h)`.
pub fn simulate_coil_maps(height: usize, width: usize, coils: usize) -> Result<CoilMaps> {
    if coils == 0 || height == 0 || width == 0 {
        return Err(Error::invalid("coil count and dimensions must be positive"));
    }
    let m = height.min(width) as f64;
    let sigma2 = (COIL_LOBE_SIGMA * m).powi(2);
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let n = height * width;
    let mut maps = vec![C64::new(0.0, 0.0); coils * n];
    for c in 0..coils {
        let theta = std::f64::consts::TAU * c as f64 / coils as f64;
        let (my, mx) = CoilMaps::lobe_center(height, width, coils, c);
        for r in 0..height {
            for col in 0..width {
                let (y, x) = (r as f64, col as f64);
                let d2 = (y - my).powi(2) + (x - mx).powi(2);
                let mag = (-d2 / (2.0 * sigma2)).exp();
                let phase = std::f64::consts::PI
                    * (-theta.sin() * (x - cx) / width as f64 + theta.cos() * (y - cy) / height as f64);
                maps[c * n + r * width + col] = C64::from_polar(mag, phase);
            }
        }
    }
    for p in 0..n {
        let s = (0..coils).map(|c| maps[c * n + p].norm_sqr()).sum::<f64>().sqrt();
        for c in 0..coils {
            maps[c * n + p] /= s;
        }
    }
    Ok(CoilMaps { coils, height, width, maps })
}

/// `U · F · (S_c ⊙ x)` for every coil.
pub fn forward(x: &ComplexImage, maps: &CoilMaps, mask: &SamplingMask) -> Result<KSpaceStack> {
    maps.check_image(x.height(), x.width())?;
    mask.check_plane(x.height(), x.width())?;
    let (h, w) = (x.height(), x.width());
    let planes: Vec<Vec<C64>> = (0..maps.coils())
        .into_par_iter()
        .map(|c| {
            let mut plane: Vec<C64> = maps.map(c).iter().zip(x.data()).map(|(s, v)| s * v).collect();
            fft2c_inplace(&mut plane, h, w);
            mask.apply_plane(&mut plane);
            plane
        })
        .collect();
    Ok(KSpaceStack::from_raw(maps.coils(), h, w, planes.concat()))
}

/// `Σ_c conj(S_c) ⊙ F^H (U · y_c)`, summed in coil order.
pub fn adjoint(y: &KSpaceStack, maps: &CoilMaps, mask: &SamplingMask) -> Result<ComplexImage> {
    if y.coils() != maps.coils() {
        return Err(Error::ShapeMismatch {
            left: vec![y.coils(), y.height(), y.width()],
            right: vec![maps.coils(), maps.height(), maps.width()],
        });
    }
    maps.check_image(y.height(), y.width())?;
    mask.check_plane(y.height(), y.width())?;
    let (h, w) = (y.height(), y.width());
    let planes: Vec<Vec<C64>> = (0..maps.coils())
        .into_par_iter()
        .map(|c| {
            let mut plane = y.coil(c).to_vec();
            mask.apply_plane(&mut plane);
            ifft2c_inplace(&mut plane, h, w);
            plane.iter_mut().zip(maps.map(c)).for_each(|(v, s)| *v *= s.conj());
            plane
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); h * w];
    for plane in &planes {
        out.iter_mut().zip(plane).for_each(|(o, v)| *o += v);
    }
    Ok(ComplexImage::from_raw(h, w, out))
}

/// Measurement noise level; `snr_db = +∞` disables noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { snr_db: f64::INFINITY, rng_seed: 0 }
    }
}

/// Adds circular complex white Gaussian noise to the sampled entries of `y`
/// at the requested SNR relative to the mean sampled power.
pub fn add_measurement_noise(y: &KSpaceStack, mask: &SamplingMask, spec: &NoiseSpec) -> Result<KSpaceStack> {
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("snr_db must be finite or +inf, got {}", spec.snr_db)));
    }
    mask.check_plane(y.height(), y.width())?;
    if spec.snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let mut sampled = 0usize;
    let mut power = 0.0;
    for c in 0..y.coils() {
        for (v, &k) in y.coil(c).iter().zip(mask.keep()) {
            if k == 1 {
                sampled += 1;
                power += v.norm_sqr();
            }
        }
    }
    if sampled == 0 || power == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let variance = power / sampled as f64 / 10f64.powf(spec.snr_db / 10.0);
    let mut rng = Rng::new(spec.rng_seed);
    let mut out = y.clone();
    for c in 0..out.coils() {
        for (v, &k) in out.coil_mut(c).iter_mut().zip(mask.keep()) {
            if k == 1 {
                *v += rng.complex_normal(variance);
            }
        }
    }
    Ok(out)
}

/// Rayleigh-quotient power iteration on `A^H A` from a seeded random start.
pub fn normal_operator_norm(maps: &CoilMaps, mask: &SamplingMask, iters: usize, seed: u64) -> Result<f64> {
    let (h, w) = (maps.height(), maps.width());
    let mut rng = Rng::new(seed);
    let mut v = ComplexImage::from_fn(h, w, |_, _| rng.complex_normal(1.0));
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = crate::array::l2_norm(&v);
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = v.scale(C64::new(1.0 / norm, 0.0));
        let av = adjoint(&forward(&v, maps, mask)?, maps, mask)?;
        estimate = crate::array::inner_product(&v, &av)?.re;
        v = av;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{inner_product, l2_norm};
    use crate::fourier::fft2c;
    use crate::sampling::{make_cartesian1d_mask, make_random2d_mask};

    fn random_image(h: usize, w: usize, rng: &mut Rng) -> ComplexImage {
        ComplexImage::from_fn(h, w, |_, _| rng.complex_normal(1.0))
    }

    fn random_stack(coils: usize, h: usize, w: usize, rng: &mut Rng) -> KSpaceStack {
        let data = (0..coils * h * w).map(|_| rng.complex_normal(1.0)).collect();
        KSpaceStack::new(coils, h, w, data).unwrap()
    }

    fn max_normalization_error(maps: &CoilMaps) -> f64 {
        let n = maps.height() * maps.width();
        (0..n)
            .map(|p| ((0..maps.coils()).map(|c| maps.map(c)[p].norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_coil_has_unit_magnitude() {
        let maps = simulate_coil_maps(20, 30, 1).unwrap();
        assert!(maps.map(0).iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn maps_are_normalised() {
        for &(h, w, c) in &[(64, 64, 8), (33, 47, 3), (16, 16, 12)] {
            let maps = simulate_coil_maps(h, w, c).unwrap();
            assert!(max_normalization_error(&maps) <= 1e-10);
        }
    }

    #[test]
    fn lobe_peaks_sit_near_their_centres() {
        // Normalisation pushes each peak outward to the field-of-view border.
        // Scanned on 64x64 with 8 coils: axis-aligned coils peak at the edge
        // pixel facing their lobe (2.2-3.2 px from the centre), diagonal
        // coils at the facing corner (15.0-16.5 px).
        let (h, w, coils) = (64, 64, 8);
        let maps = simulate_coil_maps(h, w, coils).unwrap();
        let corners = [(63, 63), (63, 0), (0, 0), (0, 63)];
        for c in 0..coils {
            let (idx, _) = maps
                .map(c)
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |best, (i, s)| if s.norm() > best.1 { (i, s.norm()) } else { best });
            let (pr, pc) = (idx / w, idx % w);
            let (my, mx) = CoilMaps::lobe_center(h, w, coils, c);
            let dist = ((pr as f64 - my).powi(2) + (pc as f64 - mx).powi(2)).sqrt();
            if c % 2 == 0 {
                assert!(dist <= 10.0, "coil {c}: peak ({pr},{pc}) is {dist:.2} px from its lobe centre");
            } else {
                assert_eq!((pr, pc), corners[c / 2], "coil {c}");
                assert!(dist < 16.5);
            }
        }
    }

    #[test]
    fn forward_reduces_to_fft_for_trivial_setup() {
        let mut rng = Rng::new(1);
        let x = random_image(12, 10, &mut rng);
        let y = forward(&x, &CoilMaps::uniform(12, 10), &SamplingMask::full(12, 10)).unwrap();
        assert_eq!(y.coil(0), fft2c(&x).data());
        let zero = forward(&ComplexImage::zeros(12, 10), &simulate_coil_maps(12, 10, 3).unwrap(), &SamplingMask::full(12, 10))
            .unwrap();
        assert!(zero.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn forward_is_homogeneous() {
        let mut rng = Rng::new(2);
        let x = random_image(16, 16, &mut rng);
        let maps = simulate_coil_maps(16, 16, 4).unwrap();
        let mask = make_cartesian1d_mask(16, 16, 0.5, 0.08, 3).unwrap();
        let alpha = C64::new(-0.7, 1.9);
        let lhs = forward(&x.scale(alpha), &maps, &mask).unwrap();
        let rhs = forward(&x, &maps, &mask).unwrap().scale(alpha);
        let err = lhs.sub(&rhs).unwrap();
        assert!(l2_norm(&err) <= 1e-12 * l2_norm(&rhs));
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = Rng::new(3);
        let x = random_image(32, 32, &mut rng);
        let y = random_stack(4, 32, 32, &mut rng);
        let maps = simulate_coil_maps(32, 32, 4).unwrap();
        let mask = make_cartesian1d_mask(32, 32, 0.35, 0.08, 4).unwrap();
        let ax = forward(&x, &maps, &mask).unwrap();
        let lhs = inner_product(&ax, &y).unwrap();
        let rhs = inner_product(&x, &adjoint(&y, &maps, &mask).unwrap()).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(l2_norm(&ax) * l2_norm(&y) * 1e-6));
    }

    #[test]
    fn unitary_case_and_zero_input() {
        let mut rng = Rng::new(5);
        let x = random_image(10, 14, &mut rng);
        let (maps, mask) = (CoilMaps::uniform(10, 14), SamplingMask::full(10, 14));
        let back = adjoint(&forward(&x, &maps, &mask).unwrap(), &maps, &mask).unwrap();
        assert!(x.data().iter().zip(back.data()).all(|(a, b)| (a - b).norm() < 1e-12));
        let zero = adjoint(&KSpaceStack::zeros(1, 10, 14), &maps, &mask).unwrap();
        assert!(zero.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn full_mask_normal_operator_is_identity() {
        let mut rng = Rng::new(6);
        let x = random_image(24, 20, &mut rng);
        let maps = simulate_coil_maps(24, 20, 6).unwrap();
        let mask = SamplingMask::full(24, 20);
        let back = adjoint(&forward(&x, &maps, &mask).unwrap(), &maps, &mask).unwrap();
        let err = back.sub(&x).unwrap();
        assert!(l2_norm(&err) <= 1e-10 * l2_norm(&x));
    }

    #[test]
    fn spectral_bound() {
        let maps = simulate_coil_maps(32, 32, 8).unwrap();
        for seed in 0..3 {
            let mask = make_random2d_mask(32, 32, 0.3, 0.08, seed).unwrap();
            let lambda = normal_operator_norm(&maps, &mask, 20, seed).unwrap();
            assert!(lambda <= 1.0 + 1e-8 && lambda > 0.5, "{lambda}");
        }
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let maps = simulate_coil_maps(8, 8, 2).unwrap();
        let mask = SamplingMask::full(8, 8);
        assert!(forward(&ComplexImage::zeros(8, 9), &maps, &mask).is_err());
        assert!(adjoint(&KSpaceStack::zeros(3, 8, 8), &maps, &mask).is_err());
        assert!(forward(&ComplexImage::zeros(8, 8), &maps, &SamplingMask::full(9, 8)).is_err());
    }

    #[test]
    fn noise_power_and_sentinel() {
        let mask = make_random2d_mask(100, 100, 0.5, 0.08, 1).unwrap();
        let mut y = KSpaceStack::from_raw(1, 100, 100, vec![C64::new(1.0, 0.0); 10_000]);
        mask.apply_plane(y.coil_mut(0));
        let noisy = add_measurement_noise(&y, &mask, &NoiseSpec { snr_db: 20.0, rng_seed: 3 }).unwrap();
        let diff = noisy.sub(&y).unwrap();
        let m = mask.sampled_count() as f64;
        let noise_power = l2_norm(&diff).powi(2) / m;
        assert!((noise_power - 0.01).abs() < 0.001, "{noise_power}");
        for (d, &k) in diff.data().iter().zip(mask.keep()) {
            if k == 0 {
                assert_eq!(*d, C64::new(0.0, 0.0));
            }
        }
        let same = add_measurement_noise(&noisy, &mask, &NoiseSpec::noiseless()).unwrap();
        assert_eq!(same, noisy);
    }

    #[test]
    fn zero_signal_power_is_rejected() {
        let mask = SamplingMask::full(4, 4);
        let err = add_measurement_noise(&KSpaceStack::zeros(2, 4, 4), &mask, &NoiseSpec { snr_db: 10.0, rng_seed: 0 });
        assert!(matches!(err, Err(Error::ZeroSignalPower)));
    }
}
