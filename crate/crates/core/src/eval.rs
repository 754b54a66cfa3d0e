//! PSNR, error maps and sweep reports.

use rayon::prelude::*;

use crate::array::{ComplexImage, RealImage};
use crate::denoiser::{IdentityDenoiser, LineDenoiser};
use crate::error::{Error, Result};
use crate::forward::{add_measurement_noise, forward, simulate_coil_maps, NoiseSpec};
use crate::reconstruct::{pnp_reconstruct, zero_filled, ReconConfig, ReconResult};
use crate::rng::Rng;
use crate::sampling::{make_mask, SamplingMask, SamplingPattern, DEFAULT_CENTER_FRACTION};

/// Magnitude errors at or below this fraction of the reference peak cannot be
/// told apart from floating-point round-off in the transforms, and are scored
/// as an exact match.
pub const EXACT_MATCH_RELATIVE_RMSE: f64 = 1e-12;

fn check_shapes(a: &ComplexImage, b: &ComplexImage) -> Result<()> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::ShapeMismatch { left: vec![a.height(), a.width()], right: vec![b.height(), b.width()] });
    }
    Ok(())
}

/// `10 log₁₀(peak² / MSE)` on magnitudes, `peak = max |ref|`. Exact matches
/// (see [`EXACT_MATCH_RELATIVE_RMSE`]) return `+∞`.
pub fn psnr(reference: &ComplexImage, test: &ComplexImage) -> Result<f64> {
    check_shapes(reference, test)?;
    let peak = reference.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::invalid("PSNR reference is identically zero"));
    }
    let n = reference.data().len() as f64;
    let mse = reference.data().iter().zip(test.data()).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum::<f64>() / n;
    if mse.sqrt() <= EXACT_MATCH_RELATIVE_RMSE * peak {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// `| |ref| − |test| |` pixelwise.
pub fn error_map(reference: &ComplexImage, test: &ComplexImage) -> Result<RealImage> {
    check_shapes(reference, test)?;
    let data = reference.data().iter().zip(test.data()).map(|(a, b)| (a.norm() - b.norm()).abs()).collect();
    RealImage::new(reference.height(), reference.width(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ZeroFilled,
    PnpIdentity,
    PnpCnn1d,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ZeroFilled => "zero_filled",
            Method::PnpIdentity => "pnp-identity",
            Method::PnpCnn1d => "pnp-cnn1d",
        }
    }

    pub const ALL: [Method; 3] = [Method::ZeroFilled, Method::PnpIdentity, Method::PnpCnn1d];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_filled" => Ok(Method::ZeroFilled),
            "pnp-identity" => Ok(Method::PnpIdentity),
            "pnp-cnn1d" => Ok(Method::PnpCnn1d),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub pattern: SamplingPattern,
    pub rate: f64,
}

/// The two-pattern, four-rate grid.
pub fn default_grid() -> Vec<SweepCell> {
    let cart = [0.35, 0.40, 0.45, 0.50].map(|rate| SweepCell { pattern: SamplingPattern::Cartesian1d, rate });
    let rand = [0.25, 0.30, 0.35, 0.40].map(|rate| SweepCell { pattern: SamplingPattern::Random2d, rate });
    cart.into_iter().chain(rand).collect()
}

#[derive(Debug, Clone)]
pub struct SweepCase {
    pub id: String,
    pub image: ComplexImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub coils: usize,
    pub center_fraction: f64,
    pub snr_db: f64,
    pub recon: ReconConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { coils: 8, center_fraction: DEFAULT_CENTER_FRACTION, snr_db: f64::INFINITY, recon: ReconConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub case_id: String,
    pub seed: u64,
    pub pattern: SamplingPattern,
    pub rate: f64,
    pub method: Method,
    pub psnr_db: Option<f64>,
    pub iters: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub pattern: SamplingPattern,
    pub rate: f64,
    pub method: Method,
    pub count: usize,
    pub mean_psnr: f64,
    pub std_psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<CaseRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Mean and population standard deviation. A set containing `+∞` has mean
/// `+∞` and standard deviation 0 when every value is `+∞`, NaN otherwise.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().any(|v| v.is_infinite()) {
        let all = values.iter().all(|&v| v == f64::INFINITY);
        return (f64::INFINITY, if all { 0.0 } else { f64::NAN });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    /// Recomputes aggregates from `rows`, in first-seen order of
    /// `(pattern, rate, method)`. Rows with errors are excluded.
    pub fn aggregate(rows: Vec<CaseRow>) -> Self {
        let mut keys: Vec<(SamplingPattern, f64, Method)> = Vec::new();
        for r in &rows {
            let key = (r.pattern, r.rate, r.method);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(pattern, rate, method)| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.pattern == pattern && r.rate == rate && r.method == method)
                    .filter_map(|r| r.psnr_db)
                    .collect();
                let (mean_psnr, std_psnr) = mean_std(&vals);
                AggregateRow { pattern, rate, method, count: vals.len(), mean_psnr, std_psnr }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn aggregate_for(&self, pattern: SamplingPattern, rate: f64, method: Method) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.pattern == pattern && a.rate == rate && a.method == method)
    }

    pub fn psnr_of(&self, case_id: &str, seed: u64, cell: SweepCell, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.case_id == case_id && r.seed == seed && r.pattern == cell.pattern && r.rate == cell.rate && r.method == method)
            .and_then(|r| r.psnr_db)
    }

    /// Fixed column order, four decimals, `inf` for exact matches.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record([
            "aggregate", "case_id", "seed", "pattern", "rate", "method", "psnr_db", "mean_psnr_db", "std_psnr_db", "count",
            "iters", "error",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                "false".to_string(),
                r.case_id.clone(),
                r.seed.to_string(),
                r.pattern.name().to_string(),
                fmt4(r.rate),
                r.method.name().to_string(),
                r.psnr_db.map(fmt4).unwrap_or_default(),
                String::new(),
                String::new(),
                String::new(),
                r.iters.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        for a in &self.aggregates {
            w.write_record([
                "true".to_string(),
                String::new(),
                String::new(),
                a.pattern.name().to_string(),
                fmt4(a.rate),
                a.method.name().to_string(),
                String::new(),
                fmt4(a.mean_psnr),
                fmt4(a.std_psnr),
                a.count.to_string(),
                String::new(),
                String::new(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn fmt4(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.4}")
    }
}

/// Everything produced for one `(case, cell, seed)`.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub case_id: String,
    pub seed: u64,
    pub cell: SweepCell,
    pub reference: ComplexImage,
    pub mask: SamplingMask,
    /// Per method, in the requested order.
    pub results: Vec<(Method, Result<MethodOutput, String>)>,
}

#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub image: ComplexImage,
    pub recon: Option<ReconResult>,
    pub psnr_db: f64,
}

fn cell_seed(seed: u64, cell_index: usize) -> u64 {
    Rng::stream(seed, cell_index as u64).next_u64()
}

fn run_cell(
    case: &SweepCase,
    case_index: usize,
    cell: SweepCell,
    cell_index: usize,
    seed: u64,
    methods: &[Method],
    config: &SweepConfig,
    model: Option<&dyn LineDenoiser>,
) -> Result<CellOutput> {
    let (h, w) = (case.image.height(), case.image.width());
    let maps = simulate_coil_maps(h, w, config.coils)?;
    let mask = make_mask(cell.pattern, h, w, cell.rate, config.center_fraction, cell_seed(seed, cell_index))?;
    let clean = forward(&case.image, &maps, &mask)?;
    let noise = NoiseSpec { snr_db: config.snr_db, rng_seed: Rng::stream(cell_seed(seed, cell_index), case_index as u64).next_u64() };
    let y = add_measurement_noise(&clean, &mask, &noise)?;
    let results = methods
        .iter()
        .map(|&method| {
            let out = (|| -> Result<MethodOutput> {
                let (image, recon) = match method {
                    Method::ZeroFilled => (zero_filled(&y, &maps, &mask)?, None),
                    Method::PnpIdentity => {
                        let r = pnp_reconstruct(&y, &maps, &mask, &config.recon, &IdentityDenoiser)?;
                        (r.image.clone(), Some(r))
                    }
                    Method::PnpCnn1d => {
                        let m = model.ok_or_else(|| Error::invalid("pnp-cnn1d needs a trained model"))?;
                        let r = pnp_reconstruct(&y, &maps, &mask, &config.recon, m)?;
                        (r.image.clone(), Some(r))
                    }
                };
                let psnr_db = psnr(&case.image, &image)?;
                Ok(MethodOutput { image, recon, psnr_db })
            })();
            (method, out.map_err(|e| e.to_string()))
        })
        .collect();
    Ok(CellOutput { case_id: case.id.clone(), seed, cell, reference: case.image.clone(), mask, results })
}

/// Reconstructs and scores every `(case, cell, seed, method)`. Cells run in
/// parallel; `on_cell` sees outputs in deterministic case → cell → seed order.
/// A failed method is recorded in its row and does not stop the sweep.
pub fn run_sweep(
    cases: &[SweepCase],
    cells: &[SweepCell],
    methods: &[Method],
    seeds: &[u64],
    config: &SweepConfig,
    model: Option<&dyn LineDenoiser>,
    mut on_cell: impl FnMut(&CellOutput) -> Result<()>,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::invalid("method list is empty"));
    }
    if cases.is_empty() || cells.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one case, cell and seed"));
    }
    if methods.contains(&Method::PnpCnn1d) && model.is_none() {
        return Err(Error::invalid("pnp-cnn1d requested without a model"));
    }
    let jobs: Vec<(usize, usize, u64)> = (0..cases.len())
        .flat_map(|c| (0..cells.len()).flat_map(move |k| seeds.iter().map(move |&s| (c, k, s))))
        .collect();
    let outputs: Vec<std::result::Result<CellOutput, (usize, usize, u64, String)>> = jobs
        .par_iter()
        .map(|&(c, k, s)| run_cell(&cases[c], c, cells[k], k, s, methods, config, model).map_err(|e| (c, k, s, e.to_string())))
        .collect();

    let mut rows = Vec::new();
    for out in outputs {
        match out {
            Ok(cell) => {
                on_cell(&cell)?;
                for (method, res) in &cell.results {
                    let (psnr_db, iters, error) = match res {
                        Ok(m) => (Some(m.psnr_db), m.recon.as_ref().map_or(0, |r| r.iters_run), None),
                        Err(e) => (None, 0, Some(e.clone())),
                    };
                    rows.push(CaseRow {
                        case_id: cell.case_id.clone(),
                        seed: cell.seed,
                        pattern: cell.cell.pattern,
                        rate: cell.cell.rate,
                        method: *method,
                        psnr_db,
                        iters,
                        error,
                    });
                }
            }
            Err((c, k, s, e)) => {
                for &method in methods {
                    rows.push(CaseRow {
                        case_id: cases[c].id.clone(),
                        seed: s,
                        pattern: cells[k].pattern,
                        rate: cells[k].rate,
                        method,
                        psnr_db: None,
                        iters: 0,
                        error: Some(e.clone()),
                    });
                }
            }
        }
    }
    Ok(EvalReport::aggregate(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::C64;

    fn filled(h: usize, w: usize, v: f64) -> ComplexImage {
        ComplexImage::from_fn(h, w, |_, _| C64::new(v, 0.0))
    }

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        let mut rng = Rng::new(seed);
        ComplexImage::from_fn(h, w, |_, _| rng.complex_normal(1.0))
    }

    #[test]
    fn psnr_examples() {
        let ones = filled(4, 4, 1.0);
        assert_eq!(psnr(&ones, &ones).unwrap(), f64::INFINITY);
        let p = psnr(&ones, &filled(4, 4, 0.9)).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
        let x = random_image(8, 8, 1);
        let y = random_image(8, 8, 2);
        let rotated = y.scale(C64::from_polar(1.0, 0.7));
        assert!((psnr(&x, &y).unwrap() - psnr(&x, &rotated).unwrap()).abs() < 1e-10);
        assert!(psnr(&ComplexImage::zeros(4, 4), &ones).is_err());
        assert!(psnr(&ones, &filled(3, 4, 1.0)).is_err());
    }

    #[test]
    fn psnr_scale_invariance_and_monotonicity() {
        let x = random_image(10, 10, 3);
        let y = random_image(10, 10, 4);
        for alpha in [0.01, 0.5, 3.0, 1e4] {
            let s = C64::new(alpha, 0.0);
            assert!((psnr(&x, &y).unwrap() - psnr(&x.scale(s), &y.scale(s)).unwrap()).abs() < 1e-10);
        }
        let noise = random_image(10, 10, 5);
        let mut prev = f64::INFINITY;
        for step in 1..20 {
            let t = x.axpy(0.05 * step as f64, &noise).unwrap();
            let p = psnr(&x, &t).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn error_map_examples() {
        let x = random_image(5, 6, 6);
        assert!(error_map(&x, &x).unwrap().data().iter().all(|&v| v == 0.0));
        let a = filled(3, 3, 1.0);
        let mut b = a.clone();
        b.set(1, 2, C64::new(0.5, 0.0));
        let m = error_map(&a, &b).unwrap();
        for (i, &v) in m.data().iter().enumerate() {
            assert_eq!(v, if i == 5 { 0.5 } else { 0.0 });
        }
        let y = random_image(5, 6, 7);
        assert_eq!(error_map(&x, &y).unwrap(), error_map(&y, &x).unwrap());
    }

    #[test]
    fn aggregates_match_rows() {
        let mut rows = Vec::new();
        let mut rng = Rng::new(8);
        for case in 0..4 {
            for cell in default_grid() {
                for method in Method::ALL {
                    rows.push(CaseRow {
                        case_id: format!("c{case}"),
                        seed: 0,
                        pattern: cell.pattern,
                        rate: cell.rate,
                        method,
                        psnr_db: Some(rng.uniform_in(20.0, 40.0)),
                        iters: 1,
                        error: None,
                    });
                }
            }
        }
        let report = EvalReport::aggregate(rows.clone());
        assert_eq!(report.aggregates.len(), 24);
        for a in &report.aggregates {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.pattern == a.pattern && r.rate == a.rate && r.method == a.method)
                .map(|r| r.psnr_db.unwrap())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!((a.mean_psnr - mean).abs() < 1e-12 && (a.std_psnr - std).abs() < 1e-12);
        }
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("aggregate,case_id,seed,pattern,rate,method,psnr_db"));
        assert_eq!(csv.lines().count(), 1 + rows.len() + 24);
    }

    #[test]
    fn mean_std_edge_cases() {
        assert_eq!(mean_std(&[f64::INFINITY, f64::INFINITY]), (f64::INFINITY, 0.0));
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 1.0));
        assert_eq!(fmt4(f64::INFINITY), "inf");
        assert_eq!(fmt4(1.23456), "1.2346");
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let img = crate::phantom::shepp_logan(32, 32).unwrap().image;
        let cases = vec![SweepCase { id: "shepp".into(), image: img }];
        let cells = vec![
            SweepCell { pattern: SamplingPattern::Cartesian1d, rate: 0.5 },
            SweepCell { pattern: SamplingPattern::Full, rate: 1.0 },
        ];
        let config = SweepConfig { coils: 2, recon: ReconConfig { max_iters: 10, ..Default::default() }, ..Default::default() };
        let methods = [Method::ZeroFilled, Method::PnpIdentity];
        let mut seen = 0;
        let a = run_sweep(&cases, &cells, &methods, &[0, 1], &config, None, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 4);
        assert_eq!(a.rows.len(), 8);
        assert_eq!(a.aggregates.len(), 4);
        let b = run_sweep(&cases, &cells, &methods, &[0, 1], &config, None, |_| Ok(())).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let full = a.aggregate_for(SamplingPattern::Full, 1.0, Method::PnpIdentity).unwrap();
        assert_eq!(full.mean_psnr, f64::INFINITY);

        assert!(run_sweep(&cases, &cells, &[], &[0], &config, None, |_| Ok(())).is_err());
        assert!(run_sweep(&cases, &cells, &[Method::PnpCnn1d], &[0], &config, None, |_| Ok(())).is_err());
    }

    #[test]
    fn failed_rows_do_not_abort() {
        let cases = vec![SweepCase { id: "tiny".into(), image: random_image(16, 16, 9) }];
        // A centre band larger than the budget makes mask generation fail.
        let cells = vec![
            SweepCell { pattern: SamplingPattern::Cartesian1d, rate: 0.05 },
            SweepCell { pattern: SamplingPattern::Cartesian1d, rate: 0.5 },
        ];
        let config = SweepConfig { coils: 1, center_fraction: 0.1, ..Default::default() };
        let r = run_sweep(&cases, &cells, &[Method::ZeroFilled], &[0], &config, None, |_| Ok(())).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].error.is_some() && r.rows[0].psnr_db.is_none());
        assert!(r.rows[1].error.is_none());
    }
}
