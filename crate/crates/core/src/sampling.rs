//! Undersampling masks over k-space.
//!
//! Both generators keep a fully sampled low-frequency centre, then fill the
//! remaining budget uniformly at random without replacement. Budgets use
//! `f64::round` (half away from zero).


use crate::array::{KSpaceStack, C64};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_CENTER_FRACTION: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingPattern {
    Cartesian1d,
    Random2d,
    Full,
}

impl SamplingPattern {
    pub fn name(self) -> &'static str {
        match self {
            SamplingPattern::Cartesian1d => "cartesian1d",
            SamplingPattern::Random2d => "random2d",
            SamplingPattern::Full => "full",
        }
    }
}

impl std::fmt::Display for SamplingPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SamplingPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian1d" => Ok(SamplingPattern::Cartesian1d),
            "random2d" => Ok(SamplingPattern::Random2d),
            "full" => Ok(SamplingPattern::Full),
            other => Err(Error::invalid(format!("unknown sampling pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    keep: Vec<u8>,
    pattern: SamplingPattern,
    target_rate: f64,
    achieved_rate: f64,
    center_fraction: f64,
    seed: u64,
}

/// Start index and length of a band of `len` entries centred on `n / 2`.
fn center_band(n: usize, len: usize) -> std::ops::Range<usize> {
    let start = (n / 2).saturating_sub(len / 2).min(n - len);
    start..start + len
}

fn validate_rate(rate: f64, center_fraction: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::invalid(format!("sampling rate must lie in (0, 1], got {rate}")));
    }
    if !(0.0..1.0).contains(&center_fraction) {
        return Err(Error::invalid(format!("center fraction must lie in [0, 1), got {center_fraction}")));
    }
    Ok(())
}

impl SamplingMask {
    /// Builds a mask from raw 0/1 entries.
    pub fn from_parts(
        height: usize,
        width: usize,
        keep: Vec<u8>,
        pattern: SamplingPattern,
        target_rate: f64,
        center_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if keep.len() != height * width {
            return Err(Error::ShapeMismatch { left: vec![height, width], right: vec![keep.len()] });
        }
        if keep.iter().any(|&k| k > 1) {
            return Err(Error::invalid("mask entries must be 0 or 1"));
        }
        let ones = keep.iter().filter(|&&k| k == 1).count();
        Ok(Self {
            height,
            width,
            keep,
            pattern,
            target_rate,
            achieved_rate: ones as f64 / (height * width) as f64,
            center_fraction,
            seed,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::from_parts(height, width, vec![1; height * width], SamplingPattern::Full, 1.0, 0.0, 0)
            .expect("valid full mask")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn keep(&self) -> &[u8] {
        &self.keep
    }

    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.width + col] == 1
    }

    pub fn pattern(&self) -> SamplingPattern {
        self.pattern
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn achieved_rate(&self) -> f64 {
        self.achieved_rate
    }

    pub fn center_fraction(&self) -> f64 {
        self.center_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampled_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k == 1).count()
    }

    /// Number of fully sampled centre columns (cartesian1d) or the side
    /// lengths of the centre block (random2d).
    pub fn center_extent(&self) -> (usize, usize) {
        let ch = (self.center_fraction * self.height as f64).ceil() as usize;
        let cw = (self.center_fraction * self.width as f64).ceil() as usize;
        match self.pattern {
            SamplingPattern::Cartesian1d => (self.height, cw),
            SamplingPattern::Random2d => (ch, cw),
            SamplingPattern::Full => (self.height, self.width),
        }
    }

    pub(crate) fn check_plane(&self, height: usize, width: usize) -> Result<()> {
        if (height, width) != (self.height, self.width) {
            return Err(Error::ShapeMismatch { left: vec![height, width], right: vec![self.height, self.width] });
        }
        Ok(())
    }

    /// Zeroes unsampled entries of one plane in place.
    pub(crate) fn apply_plane(&self, plane: &mut [C64]) {
        for (z, &k) in plane.iter_mut().zip(&self.keep) {
            if k == 0 {
                *z = C64::new(0.0, 0.0);
            }
        }
    }
}

/// Keeps `round(rate · w)` full columns: the centre band first, then
/// uniformly drawn columns.
pub fn make_cartesian1d_mask(
    height: usize,
    width: usize,
    rate: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    validate_rate(rate, center_fraction)?;
    if center_fraction >= rate {
        return Err(Error::invalid(format!(
            "center fraction {center_fraction} must be below the sampling rate {rate}"
        )));
    }
    let budget = (rate * width as f64).round() as usize;
    let n_center = (center_fraction * width as f64).ceil() as usize;
    if budget == 0 || n_center > budget {
        return Err(Error::invalid(format!(
            "cannot fit {n_center} centre columns in a budget of {budget} columns"
        )));
    }

    let band = center_band(width, n_center);
    let mut pool: Vec<usize> = (0..width).filter(|c| !band.contains(c)).collect();
    let mut rng = Rng::new(seed);
    let extra = budget - n_center;
    let chosen = rng.choose_subset(&mut pool, extra);

    let mut column_kept = vec![false; width];
    band.for_each(|c| column_kept[c] = true);
    chosen.iter().for_each(|&c| column_kept[c] = true);

    let keep = (0..height * width).map(|i| column_kept[i % width] as u8).collect();
    SamplingMask::from_parts(height, width, keep, SamplingPattern::Cartesian1d, rate, center_fraction, seed)
}

/// Keeps `round(rate · h · w)` points: the centre block first, then
/// uniformly drawn points.
pub fn make_random2d_mask(
    height: usize,
    width: usize,
    rate: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    validate_rate(rate, center_fraction)?;
    let total = height * width;
    let budget = (rate * total as f64).round() as usize;
    let ch = (center_fraction * height as f64).ceil() as usize;
    let cw = (center_fraction * width as f64).ceil() as usize;
    if budget == 0 || ch * cw > budget {
        return Err(Error::invalid(format!(
            "cannot fit a {ch}x{cw} centre block in a budget of {budget} points"
        )));
    }

    let mut keep = vec![0u8; total];
    for r in center_band(height, ch) {
        for c in center_band(width, cw) {
            keep[r * width + c] = 1;
        }
    }
    let mut pool: Vec<usize> = (0..total).filter(|&i| keep[i] == 0).collect();
    let extra = budget - ch * cw;
    let mut rng = Rng::new(seed);
    rng.choose_subset(&mut pool, extra).iter().for_each(|&i| keep[i] = 1);

    SamplingMask::from_parts(height, width, keep, SamplingPattern::Random2d, rate, center_fraction, seed)
}

/// Dispatches on `pattern`; `Full` ignores rate and seed.
pub fn make_mask(
    pattern: SamplingPattern,
    height: usize,
    width: usize,
    rate: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    match pattern {
        SamplingPattern::Cartesian1d => make_cartesian1d_mask(height, width, rate, center_fraction, seed),
        SamplingPattern::Random2d => make_random2d_mask(height, width, rate, center_fraction, seed),
        SamplingPattern::Full => Ok(SamplingMask::full(height, width)),
    }
}

/// Multiplies every coil plane by the mask.
pub fn apply_mask(ks: &KSpaceStack, mask: &SamplingMask) -> Result<KSpaceStack> {
    mask.check_plane(ks.height(), ks.width())?;
    let mut out = ks.clone();
    for c in 0..out.coils() {
        mask.apply_plane(out.coil_mut(c));
    }
    Ok(out)
}
