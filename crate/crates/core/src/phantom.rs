//! Test objects with known ground truth.

use std::path::Path;

use crate::array::{ComplexImage, RealImage, C64};
use crate::error::{Error, Result};
use crate::formats::{decode_image, read_pgm, IMAGE_MAGIC};
use crate::rng::Rng;
use crate::synthdata::random_phase_map;

/// Truncation block used for phantom phase.
pub const PHANTOM_PHASE_TRUNCATION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    SyntheticBrainlike,
    File,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::SyntheticBrainlike => "synthetic_brainlike",
            PhantomKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: ComplexImage,
    pub kind: PhantomKind,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl Phantom {
    /// Drops the synthetic phase, keeping magnitude only.
    pub fn with_zero_phase(mut self) -> Self {
        for z in self.image.data_mut() {
            *z = C64::new(z.norm(), 0.0);
        }
        self
    }

    pub fn descriptor(&self) -> String {
        format!("{}:{}x{}:seed{}", self.kind.name(), self.height, self.width, self.seed)
    }
}

fn with_phase(magnitude: &RealImage, seed: u64) -> Result<ComplexImage> {
    let (h, w) = (magnitude.height(), magnitude.width());
    let phase = random_phase_map(h, w, PHANTOM_PHASE_TRUNCATION, &mut Rng::new(seed))?;
    ComplexImage::new(h, w, phase.data().iter().zip(magnitude.data()).map(|(p, m)| p * *m).collect())
}

/// `(intensity, semi-axis x, semi-axis y, centre x, centre y, rotation °)` in
/// the unit square with y pointing up.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

fn rasterize_ellipses(h: usize, w: usize, ellipses: &[[f64; 6]]) -> RealImage {
    let mut data = vec![0.0; h * w];
    for r in 0..h {
        // Pixel centres, symmetric about the origin.
        let y = (h as f64 - 2.0 * r as f64 - 1.0) / h as f64;
        for c in 0..w {
            let x = (2.0 * c as f64 + 1.0 - w as f64) / w as f64;
            let mut v = 0.0;
            for &[a, ax, ay, x0, y0, phi] in ellipses {
                let (s, co) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let (u, t) = (dx * co + dy * s, -dx * s + dy * co);
                if (u / ax).powi(2) + (t / ay).powi(2) <= 1.0 {
                    v += a;
                }
            }
            data[r * w + c] = v;
        }
    }
    // Overlap sums can land a rounding error outside [0, 1].
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    RealImage::from_raw(h, w, data)
}

/// Modified Shepp-Logan head with the seed-0 smooth phase.
pub fn shepp_logan(h: usize, w: usize) -> Result<Phantom> {
    if h < 32 || w < 32 {
        return Err(Error::invalid(format!("phantoms need at least 32x32 pixels, got {h}x{w}")));
    }
    let magnitude = rasterize_ellipses(h, w, &SHEPP_LOGAN);
    Ok(Phantom { image: with_phase(&magnitude, 0)?, kind: PhantomKind::SheppLogan, height: h, width: w, seed: 0 })
}

/// Shepp-Logan magnitude alone.
pub fn shepp_logan_magnitude(h: usize, w: usize) -> RealImage {
    rasterize_ellipses(h, w, &SHEPP_LOGAN)
}

/// A randomised head-like object: skull ring, brain tissue with smooth
/// intensity variation, ventricles and several lesion-like ellipses.
pub fn synthetic_brainlike(h: usize, w: usize, seed: u64) -> Result<Phantom> {
    if h < 32 || w < 32 {
        return Err(Error::invalid(format!("phantoms need at least 32x32 pixels, got {h}x{w}")));
    }
    let mut rng = Rng::stream(seed, 0xB7A1);
    let sx = rng.uniform_in(0.62, 0.75);
    let sy = rng.uniform_in(0.80, 0.92);
    let tilt = rng.uniform_in(-10.0, 10.0);
    let skull = rng.uniform_in(0.045, 0.07);
    let tissue = rng.uniform_in(0.35, 0.5);

    let mut shapes = vec![
        [1.0, sx, sy, 0.0, 0.0, tilt],
        [tissue - 1.0, sx - skull, sy - skull, 0.0, 0.0, tilt],
    ];
    // Ventricles, mirrored about the midline with small jitter.
    let (vx, vy) = (rng.uniform_in(0.08, 0.14), rng.uniform_in(0.18, 0.3));
    let off = rng.uniform_in(0.1, 0.18);
    let dark = -rng.uniform_in(0.25, tissue - 0.05);
    shapes.push([dark, vx, vy, off, rng.uniform_in(-0.05, 0.1), -15.0 + tilt]);
    shapes.push([dark, vx * rng.uniform_in(0.85, 1.15), vy, -off, rng.uniform_in(-0.05, 0.1), 15.0 + tilt]);
    for _ in 0..4 + rng.below(5) {
        let r = rng.uniform_in(0.0, 0.5);
        let t = rng.uniform_in(0.0, std::f64::consts::TAU);
        shapes.push([
            rng.uniform_in(-0.2, 0.35),
            rng.uniform_in(0.03, 0.15),
            rng.uniform_in(0.03, 0.15),
            r * sx * t.cos(),
            r * sy * t.sin(),
            rng.uniform_in(0.0, 180.0),
        ]);
    }
    let base = rasterize_ellipses(h, w, &shapes);

    // Slow in-brain intensity drift.
    let (fx, fy, ph) = (rng.uniform_in(0.5, 2.0), rng.uniform_in(0.5, 2.0), rng.uniform_in(0.0, std::f64::consts::TAU));
    let amp = rng.uniform_in(0.03, 0.08);
    let mut data = base.data().to_vec();
    for r in 0..h {
        for c in 0..w {
            let v = &mut data[r * w + c];
            if *v > 0.0 && *v < 0.99 {
                let (x, y) = (c as f64 / w as f64, r as f64 / h as f64);
                *v = (*v + amp * (std::f64::consts::TAU * (fx * x + fy * y) + ph).cos()).clamp(0.0, 1.0);
            }
        }
    }
    let magnitude = RealImage::from_raw(h, w, data);
    Ok(Phantom {
        image: with_phase(&magnitude, seed)?,
        kind: PhantomKind::SyntheticBrainlike,
        height: h,
        width: w,
        seed,
    })
}

/// Loads a complex image file as is (rescaled to unit peak only when its
/// magnitude exceeds 1), or a grayscale PGM scaled to `[0, 1]` and given a
/// smooth phase drawn from `seed`.
pub fn load_phantom(path: impl AsRef<Path>, seed: u64) -> Result<Phantom> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let image = if bytes.starts_with(&IMAGE_MAGIC[..4]) {
        let img = decode_image(&bytes)?;
        let peak = img.magnitude().max();
        if peak > 1.0 {
            img.scale(C64::new(1.0 / peak, 0.0))
        } else {
            img
        }
    } else {
        with_phase(&read_pgm(path)?, seed)?
    };
    if image.data().iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroSignalPower);
    }
    let (height, width) = (image.height(), image.width());
    Ok(Phantom { image, kind: PhantomKind::File, height, width, seed })
}
