//! Paired clean/noisy complex 1D training lines.
//!
//! Each source image contributes a grayscale magnitude and an independent
//! smooth random phase (white Gaussian k-space truncated to a small central
//! block, then normalised to unit modulus). Rows of the resulting complex
//! image become clean lines; noisy lines add complex white Gaussian noise at
//! an SNR drawn uniformly per line.

use rayon::prelude::*;

use crate::array::{ComplexImage, RealImage, SignalLine1D, C64};
use crate::error::{Error, Result};
use crate::fourier::ifft2c_inplace;
use crate::rng::Rng;

pub const DEFAULT_LINE_LENGTH: usize = 320;
pub const DEFAULT_SNR_MIN_DB: f64 = 5.0;
pub const DEFAULT_SNR_MAX_DB: f64 = 40.0;
pub const DEFAULT_SPLIT: f64 = 0.9;
pub const DEFAULT_TOTAL: usize = 640_000;
pub const DEFAULT_LINES_PER_IMAGE: usize = 32;
/// Allowed phase truncation block sizes.
pub const TRUNCATION_SIZES: std::ops::RangeInclusive<usize> = 2..=5;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub clean: SignalLine1D,
    pub noisy: SignalLine1D,
    pub snr_db: f64,
}

/// Where line magnitudes come from.
#[derive(Debug, Clone)]
pub enum MagnitudeSource {
    /// Random piecewise-smooth images of the given size.
    Procedural { height: usize, width: usize },
    /// User-supplied grayscale images with values in `[0, 1]`, cycled in order.
    Files { images: Vec<RealImage>, descriptor: String },
}

impl MagnitudeSource {
    pub fn files(images: Vec<RealImage>, descriptor: impl Into<String>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("file magnitude source needs at least one image"));
        }
        if images.iter().any(|im| im.data().iter().any(|v| !(0.0..=1.0).contains(v))) {
            return Err(Error::invalid("source magnitudes must lie in [0, 1]"));
        }
        Ok(MagnitudeSource::Files { images, descriptor: descriptor.into() })
    }

    pub fn descriptor(&self) -> String {
        match self {
            MagnitudeSource::Procedural { height, width } => format!("procedural:{height}x{width}"),
            MagnitudeSource::Files { descriptor, images } => format!("files:{descriptor}:{}", images.len()),
        }
    }
}

fn rotated(dx: f64, dy: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (dx * c + dy * s, -dx * s + dy * c)
}

/// Random piecewise-smooth image in `[0, 1]`: a smooth low-frequency
/// background plus 3–12 ellipses or rectangles that either overwrite or add
/// to what lies beneath.
pub fn procedural_magnitude(height: usize, width: usize, rng: &mut Rng) -> Result<RealImage> {
    if height < 8 || width < 8 {
        return Err(Error::invalid(format!("procedural images need at least 8x8 pixels, got {height}x{width}")));
    }
    let (hf, wf) = (height as f64, width as f64);

    let base = rng.uniform_in(0.05, 0.3);
    let waves: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.uniform_in(0.0, 0.08),
                rng.uniform_in(0.0, 2.0),
                rng.uniform_in(0.0, 2.0),
                rng.uniform_in(0.0, std::f64::consts::TAU),
            )
        })
        .collect();
    let mut data: Vec<f64> = (0..height * width)
        .map(|i| {
            let (y, x) = ((i / width) as f64 / hf, (i % width) as f64 / wf);
            base + waves
                .iter()
                .map(|&(a, fx, fy, ph)| a * (std::f64::consts::TAU * (fx * x + fy * y) + ph).cos())
                .sum::<f64>()
        })
        .collect();

    let m = hf.min(wf);
    let n_shapes = 3 + rng.below(10);
    for _ in 0..n_shapes {
        let ellipse = rng.uniform() < 0.5;
        let (cy, cx) = (rng.uniform_in(0.1, 0.9) * hf, rng.uniform_in(0.1, 0.9) * wf);
        let (ay, ax) = (rng.uniform_in(0.05, 0.35) * m, rng.uniform_in(0.05, 0.35) * m);
        let angle = rng.uniform_in(0.0, std::f64::consts::PI);
        let overwrite = rng.uniform() < 0.5;
        let value = if overwrite { rng.uniform() } else { rng.uniform_in(-0.4, 0.4) };
        for r in 0..height {
            for c in 0..width {
                let (u, v) = rotated(c as f64 + 0.5 - cx, r as f64 + 0.5 - cy, angle);
                let inside = if ellipse {
                    (u / ax).powi(2) + (v / ay).powi(2) <= 1.0
                } else {
                    u.abs() <= ax && v.abs() <= ay
                };
                if inside {
                    let p = &mut data[r * width + c];
                    *p = if overwrite { value } else { *p + value };
                }
            }
        }
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    RealImage::new(height, width, data)
}

/// Unit-modulus smooth phase: complex white Gaussian coefficients kept only
/// in the central `truncation × truncation` block of centred k-space, inverse
/// transformed and normalised pixelwise. Exact zeros get phase 0.
pub fn random_phase_map(height: usize, width: usize, truncation: usize, rng: &mut Rng) -> Result<ComplexImage> {
    if !TRUNCATION_SIZES.contains(&truncation) {
        return Err(Error::invalid(format!("truncation size must be in 2..=5, got {truncation}")));
    }
    if truncation > height || truncation > width {
        return Err(Error::invalid("truncation block larger than the image"));
    }
    let mut k = vec![C64::new(0.0, 0.0); height * width];
    // Draw the full white field so the block content depends only on the seed
    // and image size, not on the truncation size's position in the stream.
    let white: Vec<C64> = (0..height * width).map(|_| rng.complex_normal(1.0)).collect();
    let (r0, c0) = (height / 2 - truncation / 2, width / 2 - truncation / 2);
    for r in r0..r0 + truncation {
        for c in c0..c0 + truncation {
            k[r * width + c] = white[r * width + c];
        }
    }
    ifft2c_inplace(&mut k, height, width);
    for z in k.iter_mut() {
        let n = z.norm();
        *z = if n > 0.0 { *z / n } else { C64::new(1.0, 0.0) };
    }
    Ok(ComplexImage::from_raw(height, width, k))
}

/// Forms `magnitude ⊙ phase` and extracts `count` rows, centre-cropped to
/// `line_length`. Rows are distinct when `count ≤ height`. Returns the row
/// index alongside each line.
pub fn extract_lines(
    magnitude: &RealImage,
    phase: &ComplexImage,
    line_length: usize,
    rng: &mut Rng,
    count: usize,
) -> Result<Vec<(usize, SignalLine1D)>> {
    let (h, w) = (magnitude.height(), magnitude.width());
    if (phase.height(), phase.width()) != (h, w) {
        return Err(Error::ShapeMismatch { left: vec![h, w], right: vec![phase.height(), phase.width()] });
    }
    if line_length == 0 || line_length > w {
        return Err(Error::invalid(format!("line length {line_length} does not fit image width {w}")));
    }
    let rows: Vec<usize> = if count <= h {
        let mut all: Vec<usize> = (0..h).collect();
        rng.choose_subset(&mut all, count).to_vec()
    } else {
        (0..count).map(|_| rng.below(h)).collect()
    };
    let start = (w - line_length) / 2;
    Ok(rows
        .into_iter()
        .map(|r| {
            let line = (start..start + line_length)
                .map(|c| phase.get(r, c) * magnitude.get(r, c))
                .collect();
            (r, SignalLine1D::from_raw(line))
        })
        .collect())
}

/// Adds complex white Gaussian noise at `snr_db` relative to the line's own
/// mean power.
pub fn make_pair(clean: &SignalLine1D, snr_db: f64, rng: &mut Rng) -> Result<DatasetRecord> {
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("snr_db must be finite, got {snr_db}")));
    }
    let power = clean.power();
    if power == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let noisy = clean.data().iter().map(|z| z + rng.complex_normal(variance)).collect();
    Ok(DatasetRecord { clean: clean.clone(), noisy: SignalLine1D::from_raw(noisy), snr_db })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub total: usize,
    pub line_length: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub split: f64,
    pub seed: u64,
    pub lines_per_image: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            total: DEFAULT_TOTAL,
            line_length: DEFAULT_LINE_LENGTH,
            snr_min_db: DEFAULT_SNR_MIN_DB,
            snr_max_db: DEFAULT_SNR_MAX_DB,
            split: DEFAULT_SPLIT,
            seed: 0,
            lines_per_image: DEFAULT_LINES_PER_IMAGE,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::invalid("dataset total must be positive"));
        }
        if self.line_length == 0 {
            return Err(Error::invalid("line length must be positive"));
        }
        if self.lines_per_image == 0 {
            return Err(Error::invalid("lines per image must be positive"));
        }
        if !(self.snr_min_db.is_finite() && self.snr_max_db.is_finite() && self.snr_min_db <= self.snr_max_db) {
            return Err(Error::invalid(format!(
                "invalid SNR range [{}, {}]",
                self.snr_min_db, self.snr_max_db
            )));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {}", self.split)));
        }
        Ok(())
    }

    /// `(train, validation)` record counts.
    pub fn split_counts(&self) -> (usize, usize) {
        let train = (self.split * self.total as f64).round() as usize;
        (train, self.total - train)
    }
}

/// Which source image, row and phase truncation produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub image: usize,
    pub row: usize,
    pub truncation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub line_length: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub seed: u64,
    pub source: String,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

struct ImageLines {
    records: Vec<(DatasetRecord, Provenance)>,
}

fn lines_from_image(source: &MagnitudeSource, config: &DatasetConfig, image: usize) -> Result<ImageLines> {
    let mut rng = Rng::stream(config.seed, image as u64);
    let magnitude = match source {
        MagnitudeSource::Procedural { height, width } => procedural_magnitude(*height, *width, &mut rng)?,
        MagnitudeSource::Files { images, .. } => images[image % images.len()].clone(),
    };
    let truncation = 2 + rng.below(4);
    let phase = random_phase_map(magnitude.height(), magnitude.width(), truncation, &mut rng)?;
    let lines = extract_lines(&magnitude, &phase, config.line_length, &mut rng, config.lines_per_image)?;
    let mut records = Vec::with_capacity(lines.len());
    for (row, clean) in lines {
        if clean.power() == 0.0 {
            continue;
        }
        let snr = rng.uniform_in(config.snr_min_db, config.snr_max_db);
        records.push((make_pair(&clean, snr, &mut rng)?, Provenance { image, row, truncation }));
    }
    Ok(ImageLines { records })
}

/// Regenerates the source magnitude behind `image` of a dataset built with
/// `config` from `source`.
pub fn source_magnitude(source: &MagnitudeSource, config: &DatasetConfig, image: usize) -> Result<RealImage> {
    let mut rng = Rng::stream(config.seed, image as u64);
    match source {
        MagnitudeSource::Procedural { height, width } => procedural_magnitude(*height, *width, &mut rng),
        MagnitudeSource::Files { images, .. } => Ok(images[image % images.len()].clone()),
    }
}

/// Generates `config.total` records and a seed-determined train/validation
/// split. Images are processed in parallel; record order is fixed by image
/// index.
pub fn build_dataset(source: &MagnitudeSource, config: &DatasetConfig) -> Result<(Dataset, SplitManifest)> {
    config.validate()?;
    if let MagnitudeSource::Files { images, .. } = source {
        if images.iter().any(|im| im.width() < config.line_length) {
            return Err(Error::invalid(format!(
                "every source image must be at least {} pixels wide",
                config.line_length
            )));
        }
    }

    const BATCH: usize = 64;
    let mut records = Vec::with_capacity(config.total);
    let mut provenance = Vec::with_capacity(config.total);
    let mut next_image = 0usize;
    let mut empty_batches = 0;
    while records.len() < config.total {
        let batch: Vec<ImageLines> = (next_image..next_image + BATCH)
            .into_par_iter()
            .map(|i| lines_from_image(source, config, i))
            .collect::<Result<_>>()?;
        next_image += BATCH;
        let before = records.len();
        for item in batch {
            for (rec, prov) in item.records {
                if records.len() < config.total {
                    records.push(rec);
                    provenance.push(prov);
                }
            }
        }
        if records.len() == before {
            empty_batches += 1;
            if empty_batches > 4 {
                return Err(Error::ZeroSignalPower);
            }
        }
    }

    let (n_train, _) = config.split_counts();
    let mut order: Vec<usize> = (0..config.total).collect();
    Rng::stream(config.seed, u64::MAX).shuffle(&mut order);
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();

    let dataset = Dataset {
        line_length: config.line_length,
        snr_min_db: config.snr_min_db,
        snr_max_db: config.snr_max_db,
        seed: config.seed,
        source: source.descriptor(),
        records,
    };
    Ok((dataset, SplitManifest { seed: config.seed, train, validation, provenance }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_snr_db(rec: &DatasetRecord) -> f64 {
        let noise: f64 =
            rec.noisy.data().iter().zip(rec.clean.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
                / rec.clean.len() as f64;
        10.0 * (rec.clean.power() / noise).log10()
    }

    #[test]
    fn procedural_images_are_bounded_and_deterministic() {
        let a = procedural_magnitude(40, 48, &mut Rng::new(1)).unwrap();
        let b = procedural_magnitude(40, 48, &mut Rng::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(procedural_magnitude(7, 40, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn procedural_mean_intensity() {
        let mut rng = Rng::new(2);
        let mean = (0..100).map(|_| procedural_magnitude(32, 32, &mut rng).unwrap().mean()).sum::<f64>() / 100.0;
        assert!(mean > 0.05 && mean < 0.95, "{mean}");
    }

    #[test]
    fn phase_maps_have_unit_modulus() {
        for k in TRUNCATION_SIZES {
            let p = random_phase_map(32, 40, k, &mut Rng::new(k as u64)).unwrap();
            assert!(p.data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
        assert!(random_phase_map(32, 32, 1, &mut Rng::new(0)).is_err());
        assert!(random_phase_map(32, 32, 6, &mut Rng::new(0)).is_err());
        let a = random_phase_map(16, 16, 3, &mut Rng::new(5)).unwrap();
        let b = random_phase_map(16, 16, 3, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn smaller_truncation_gives_smoother_phase() {
        fn roughness(p: &ComplexImage) -> f64 {
            let mut total = 0.0;
            for r in 0..p.height() {
                for c in 1..p.width() {
                    total += (p.get(r, c) * p.get(r, c - 1).conj()).arg().abs();
                }
            }
            total / (p.height() * (p.width() - 1)) as f64
        }
        let (mut two, mut five) = (0.0, 0.0);
        for seed in 0..100 {
            two += roughness(&random_phase_map(64, 64, 2, &mut Rng::new(seed)).unwrap());
            five += roughness(&random_phase_map(64, 64, 5, &mut Rng::new(seed)).unwrap());
        }
        assert!(two < five, "{two} vs {five}");
    }

    #[test]
    fn extracted_lines_carry_source_magnitude() {
        let mut rng = Rng::new(3);
        let mag = procedural_magnitude(320, 320, &mut rng).unwrap();
        let phase = random_phase_map(320, 320, 4, &mut rng).unwrap();
        let lines = extract_lines(&mag, &phase, 320, &mut rng, 10).unwrap();
        assert_eq!(lines.len(), 10);
        for (row, line) in &lines {
            assert_eq!(line.len(), 320);
            for (c, z) in line.data().iter().enumerate() {
                assert!((z.norm() - mag.get(*row, c)).abs() < 1e-12);
            }
        }
        let again = extract_lines(&mag, &phase, 320, &mut Rng::new(9), 10).unwrap();
        let again2 = extract_lines(&mag, &phase, 320, &mut Rng::new(9), 10).unwrap();
        assert_eq!(again, again2);
        assert!(extract_lines(&mag, &phase, 321, &mut rng, 1).is_err());
    }

    #[test]
    fn cropping_is_centred() {
        let mut rng = Rng::new(4);
        let mag = procedural_magnitude(16, 20, &mut rng).unwrap();
        let phase = random_phase_map(16, 20, 2, &mut rng).unwrap();
        let lines = extract_lines(&mag, &phase, 10, &mut rng, 3).unwrap();
        for (row, line) in lines {
            assert!((line.data()[0].norm() - mag.get(row, 5)).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_noise_level() {
        let clean = SignalLine1D::new(vec![C64::new(1.0, 0.0); 100_000]).unwrap();
        let rec = make_pair(&clean, 40.0, &mut Rng::new(6)).unwrap();
        let noise_power = 10f64.powf(-line_snr_db(&rec) / 10.0);
        assert!((noise_power - 1e-4).abs() < 2e-6, "{noise_power}");
        assert!((line_snr_db(&rec) - 40.0).abs() < 0.1);
        let zero = SignalLine1D::new(vec![C64::new(0.0, 0.0); 8]).unwrap();
        assert!(matches!(make_pair(&zero, 10.0, &mut Rng::new(0)), Err(Error::ZeroSignalPower)));
    }

    #[test]
    fn noise_is_independent_of_content() {
        let mut rng = Rng::new(7);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let line: Vec<C64> = (0..320).map(|_| C64::new(rng.uniform(), 0.0)).collect();
            let clean = SignalLine1D::new(line).unwrap();
            let rec = make_pair(&clean, 15.0, &mut rng).unwrap();
            xs.extend(clean.data().iter().map(|z| z.norm()));
            ys.extend(rec.noisy.data().iter().zip(clean.data()).map(|(a, b)| (a - b).norm()));
        }
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let sx = (xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n).sqrt();
        assert!((cov / (sx * sy)).abs() < 0.05, "{}", cov / (sx * sy));
    }

    #[test]
    fn split_arithmetic() {
        let cfg = DatasetConfig::default();
        assert_eq!(cfg.split_counts(), (576_000, 64_000));
        let cfg = DatasetConfig { total: 20_000, ..DatasetConfig::default() };
        assert_eq!(cfg.split_counts(), (18_000, 2_000));
    }

    #[test]
    fn build_small_dataset() {
        let cfg = DatasetConfig { total: 300, line_length: 64, seed: 11, lines_per_image: 16, ..Default::default() };
        let source = MagnitudeSource::Procedural { height: 64, width: 64 };
        let (ds, split) = build_dataset(&source, &cfg).unwrap();
        assert_eq!(ds.len(), 300);
        assert_eq!(split.train.len(), 270);
        assert_eq!(split.validation.len(), 30);
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        for rec in &ds.records {
            assert!((5.0..=40.0).contains(&rec.snr_db));
            assert_eq!(rec.clean.len(), 64);
        }
        let (ds2, split2) = build_dataset(&source, &cfg).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(split, split2);

        // Spot-check provenance against regenerated source magnitudes.
        for idx in [0usize, 17, 150, 299] {
            let prov = split.provenance[idx];
            let mag = source_magnitude(&source, &cfg, prov.image).unwrap();
            for (c, z) in ds.records[idx].clean.data().iter().enumerate() {
                assert!((z.norm() - mag.get(prov.row, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn snr_distribution() {
        let cfg = DatasetConfig { total: 100_000, line_length: 16, seed: 3, lines_per_image: 16, ..Default::default() };
        let (ds, _) = build_dataset(&MagnitudeSource::Procedural { height: 16, width: 16 }, &cfg).unwrap();
        let snrs: Vec<f64> = ds.records.iter().map(|r| r.snr_db).collect();
        let min = snrs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
        assert!(min >= 5.0 && max <= 40.0);
        assert!((21.0..=24.0).contains(&mean), "{mean}");
    }

    #[test]
    fn invalid_configs() {
        let source = MagnitudeSource::Procedural { height: 32, width: 32 };
        let bad = DatasetConfig { total: 0, ..Default::default() };
        assert!(build_dataset(&source, &bad).is_err());
        let bad = DatasetConfig { split: 1.0, line_length: 32, total: 10, ..Default::default() };
        assert!(build_dataset(&source, &bad).is_err());
        let bad = DatasetConfig { snr_min_db: 30.0, snr_max_db: 10.0, line_length: 32, total: 10, ..Default::default() };
        assert!(build_dataset(&source, &bad).is_err());
        let bad = DatasetConfig { line_length: 64, total: 10, ..Default::default() };
        assert!(build_dataset(&source, &bad).is_err());
    }
}
