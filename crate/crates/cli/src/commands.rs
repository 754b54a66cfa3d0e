use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pnpmri::denoiser::{load_model, save_model, train_denoiser, DenoiserKind, DenoiserModel, IdentityDenoiser, LineDenoiser, TrainConfig};
use pnpmri::eval::{error_map, fmt4, psnr, run_sweep, Method, SweepCase, SweepCell, SweepConfig};
use pnpmri::formats::{export_pgm, read_dataset, read_pgm, sha256_hex, write_dataset, write_image, write_kspace, write_mask, PgmScale};
use pnpmri::forward::{add_measurement_noise, forward, simulate_coil_maps, NoiseSpec};
use pnpmri::phantom::{load_phantom, shepp_logan, synthetic_brainlike, Phantom};
use pnpmri::reconstruct::{pnp_reconstruct, zero_filled, ReconConfig};
use pnpmri::sampling::{make_mask, SamplingPattern, DEFAULT_CENTER_FRACTION};
use pnpmri::synthdata::{build_dataset, DatasetConfig, MagnitudeSource, SplitManifest};
use pnpmri::{Rng, RNG_ALGORITHM};

use crate::config::{Layers, Resolved};
use crate::{CliError, GenDataArgs, ReconstructArgs, SweepArgs, TrainArgs};

const DEFAULT_PHANTOM_SIZE: usize = 256;
const DEFAULT_COILS: usize = 8;
const DEFAULT_CASES: &str = "shepp,brainlike:1,brainlike:2";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Library argument errors stem from option values; everything else is a
/// runtime failure.
fn lib(e: pnpmri::Error) -> CliError {
    match e {
        pnpmri::Error::InvalidArgument(m) => CliError::Usage(m),
        other => CliError::Runtime(other.to_string()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng: &'static str,
    config: &'a BTreeMap<String, Resolved>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

fn write_manifest(
    path: &Path,
    command: &'static str,
    layers: &Layers,
    inputs: BTreeMap<String, String>,
    outputs: &[PathBuf],
) -> Result<(), CliError> {
    let mut hashed = BTreeMap::new();
    for p in outputs {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        hashed.insert(name, sha256_hex(&fs::read(p)?));
    }
    let manifest = Manifest {
        tool: "pnpmri",
        version: env!("CARGO_PKG_VERSION"),
        command,
        rng: RNG_ALGORITHM,
        config: layers.resolved(),
        inputs,
        outputs: hashed,
    };
    fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn file_hash(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?))
}

fn parse_source(spec: &str, line_length: usize) -> Result<MagnitudeSource, CliError> {
    if spec == "procedural" {
        return Ok(MagnitudeSource::Procedural { height: line_length, width: line_length });
    }
    let Some(dir) = spec.strip_prefix("dir:") else {
        return Err(usage(format!("--source must be procedural or dir:PATH, got {spec:?}")));
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read source directory {dir}: {e}")))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no .pgm files in {dir}")));
    }
    let images = files.iter().map(read_pgm).collect::<Result<Vec<_>, _>>().map_err(lib)?;
    MagnitudeSource::files(images, dir).map_err(lib)
}

#[derive(Serialize)]
struct SplitFile<'a> {
    seed: u64,
    split: f64,
    train: &'a [usize],
    validation: &'a [usize],
    /// `[image, row, truncation]` per record.
    provenance: Vec<[usize; 3]>,
}

pub fn gen_data(a: GenDataArgs, layers: &mut Layers) -> Result<(), CliError> {
    let d = DatasetConfig::default();
    let config = DatasetConfig {
        total: layers.get("total", a.total, d.total)?,
        line_length: layers.get("line-length", a.line_length, d.line_length)?,
        snr_min_db: layers.get("snr-min", a.snr_min, d.snr_min_db)?,
        snr_max_db: layers.get("snr-max", a.snr_max, d.snr_max_db)?,
        split: layers.get("split", a.split, d.split)?,
        seed: layers.get("seed", a.seed, d.seed)?,
        lines_per_image: layers.get("lines-per-image", a.lines_per_image, d.lines_per_image)?,
    };
    let source_spec: String = layers.get("source", a.source, "procedural".to_string())?;
    let out: PathBuf = layers.require("out", a.out.map(|p| p.display().to_string()))?.into();
    layers.finish()?;
    config.validate().map_err(lib)?;
    let source = parse_source(&source_spec, config.line_length)?;

    let (dataset, split) = build_dataset(&source, &config).map_err(lib)?;
    write_dataset(&out, &dataset)?;
    let split_path = with_suffix(&out, ".split.json");
    write_split(&split_path, &split, config.split)?;
    write_manifest(&with_suffix(&out, ".manifest.json"), "gen-data", layers, BTreeMap::new(), &[out.clone(), split_path])?;
    println!("wrote {} records ({} train / {} validation) to {}", dataset.len(), split.train.len(), split.validation.len(), out.display());
    Ok(())
}

fn write_split(path: &Path, split: &SplitManifest, fraction: f64) -> Result<(), CliError> {
    let file = SplitFile {
        seed: split.seed,
        split: fraction,
        train: &split.train,
        validation: &split.validation,
        provenance: split.provenance.iter().map(|p| [p.image, p.row, p.truncation]).collect(),
    };
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct SplitIndices {
    train: Vec<usize>,
    validation: Vec<usize>,
}

pub fn train(a: TrainArgs, layers: &mut Layers) -> Result<(), CliError> {
    let d = TrainConfig::default();
    let desk = layers.switch("desk-scale", a.desk_scale)?;
    let data: PathBuf = layers.require("data", a.data.map(|p| p.display().to_string()))?.into();
    let split_default = with_suffix(&data, ".split.json").display().to_string();
    let split_path: PathBuf = layers.get("split-manifest", a.split_manifest.map(|p| p.display().to_string()), split_default)?.into();
    let epochs_cli = a.epochs.or(if desk { Some(pnpmri::denoiser::DESK_SCALE_EPOCHS) } else { None });
    let config = TrainConfig {
        epochs: layers.get("epochs", epochs_cli, d.epochs)?,
        batch_size: layers.get("batch", a.batch, d.batch_size)?,
        learning_rate: layers.get("lr", a.lr, d.learning_rate)?,
        lr_decay: layers.get("lr-decay", a.lr_decay, d.lr_decay)?,
        seed: layers.get("seed", a.seed, d.seed)?,
        arch: d.arch,
    };
    let out: PathBuf = layers.require("out", a.out.map(|p| p.display().to_string()))?.into();
    layers.finish()?;
    config.validate().map_err(lib)?;

    let dataset = read_dataset(&data)?;
    let split: SplitIndices = serde_json::from_slice(
        &fs::read(&split_path).map_err(|e| CliError::Runtime(format!("{}: {e}", split_path.display())))?,
    )?;
    let pick = |idx: &[usize]| -> Result<Vec<_>, CliError> {
        idx.iter()
            .map(|&i| dataset.records.get(i).ok_or_else(|| CliError::Runtime(format!("split index {i} out of range"))))
            .collect()
    };
    let (train_set, val_set) = (pick(&split.train)?, pick(&split.validation)?);
    let hash = file_hash(&data)?;

    let model = train_denoiser(&train_set, &val_set, &config, &hash, |s| {
        eprintln!(
            "epoch {:>3}  lr {:.6}  train {:.6e}  validation {:.6e}",
            s.epoch, s.learning_rate, s.train_loss, s.validation_loss
        );
    })
    .map_err(lib)?;
    save_model(&out, &model)?;

    let history_path = with_suffix(&out, ".history.csv");
    let mut w = csv::Writer::from_path(&history_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record(["epoch", "learning_rate", "train_loss", "validation_loss"]).map_err(|e| CliError::Runtime(e.to_string()))?;
    for s in &model.meta.history {
        w.write_record([s.epoch.to_string(), format!("{:e}", s.learning_rate), format!("{:e}", s.train_loss), format!("{:e}", s.validation_loss)])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    drop(w);

    let inputs = BTreeMap::from([("data".to_string(), hash), ("split".to_string(), file_hash(&split_path)?)]);
    write_manifest(&with_suffix(&out, ".manifest.json"), "train", layers, inputs, &[out.clone(), history_path])?;
    println!(
        "best validation loss {:.6e} at epoch {} -> {}",
        model.meta.final_val_loss.unwrap_or(f64::NAN),
        model.meta.best_epoch.unwrap_or(0),
        out.display()
    );
    Ok(())
}

/// `shepp`, `brainlike:SEED` or `file:PATH`, returning a filesystem-safe id.
fn resolve_case(spec: &str, size: usize, index: usize, zero_phase: bool) -> Result<(String, Phantom), CliError> {
    let (id, phantom) = if spec == "shepp" {
        ("shepp".to_string(), shepp_logan(size, size).map_err(lib)?)
    } else if let Some(seed) = spec.strip_prefix("brainlike:") {
        let seed: u64 = seed.parse().map_err(|_| usage(format!("bad brainlike seed in {spec:?}")))?;
        (format!("brainlike{seed}"), synthetic_brainlike(size, size, seed).map_err(lib)?)
    } else if let Some(path) = spec.strip_prefix("file:") {
        let stem = Path::new(path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let clean: String = stem.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        let p = load_phantom(path, index as u64).map_err(|e| usage(format!("cannot load phantom {path}: {e}")))?;
        (format!("file{index}_{clean}"), p)
    } else {
        return Err(usage(format!("phantom must be shepp, brainlike:SEED or file:PATH, got {spec:?}")));
    };
    Ok((id, if zero_phase { phantom.with_zero_phase() } else { phantom }))
}

fn check_rate(rate: f64) -> Result<(), CliError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(usage(format!("sampling rate must lie in (0, 1], got {rate}")));
    }
    Ok(())
}

fn recon_config(layers: &mut Layers, gamma: Option<f64>, iters: Option<usize>, tol: Option<f64>) -> Result<ReconConfig, CliError> {
    let d = ReconConfig::default();
    let c = ReconConfig {
        gamma: layers.get("gamma", gamma, d.gamma)?,
        max_iters: layers.get("iters", iters, d.max_iters)?,
        tol: layers.get("tol", tol, d.tol)?,
    };
    c.validate().map_err(lib)?;
    Ok(c)
}

fn write_psnr_summary(path: &Path, entries: &[(&str, String)]) -> Result<(), CliError> {
    let map: BTreeMap<&str, &String> = entries.iter().map(|(k, v)| (*k, v)).collect();
    fs::write(path, serde_json::to_vec_pretty(&map)?)?;
    Ok(())
}

pub fn reconstruct(a: ReconstructArgs, layers: &mut Layers) -> Result<(), CliError> {
    let phantom_spec: String = layers.get("phantom", a.phantom, "shepp".to_string())?;
    let size = layers.get("size", a.size, DEFAULT_PHANTOM_SIZE)?;
    let coils = layers.get("coils", a.coils, DEFAULT_COILS)?;
    let pattern: SamplingPattern = layers.get("pattern", a.pattern.map(|p| p.parse()).transpose().map_err(lib)?, SamplingPattern::Cartesian1d)?;
    let rate = layers.get("rate", a.rate, if pattern == SamplingPattern::Full { 1.0 } else { 0.35 })?;
    let center_fraction = layers.get("center-fraction", a.center_fraction, DEFAULT_CENTER_FRACTION)?;
    let snr = layers.get("snr", a.snr, f64::INFINITY)?;
    let kind: DenoiserKind = layers.get("denoiser", a.denoiser.map(|d| d.parse()).transpose().map_err(lib)?, DenoiserKind::Identity)?;
    let model_path = layers.get_opt("model", a.model.map(|p| p.display().to_string()))?;
    let recon = recon_config(layers, a.gamma, a.iters, a.tol)?;
    let seed = layers.get("seed", a.seed, 0u64)?;
    let zero_phase = layers.switch("zero-phase", a.zero_phase)?;
    let out_dir: PathBuf = layers.require("out-dir", a.out_dir.map(|p| p.display().to_string()))?.into();
    layers.finish()?;
    check_rate(rate)?;
    if coils == 0 {
        return Err(usage("--coils must be positive"));
    }

    let model = match (kind, &model_path) {
        (DenoiserKind::Cnn1d, None) => return Err(usage("--denoiser cnn1d needs --model")),
        (DenoiserKind::Cnn1d, Some(p)) => Some(load_model(p)?),
        (DenoiserKind::Identity, _) => None,
    };
    let (_, phantom) = resolve_case(&phantom_spec, size, 0, zero_phase)?;
    let truth = &phantom.image;
    let (h, w) = (truth.height(), truth.width());
    let maps = simulate_coil_maps(h, w, coils).map_err(lib)?;
    let mask = make_mask(pattern, h, w, rate, center_fraction, seed).map_err(lib)?;
    let noise = NoiseSpec { snr_db: snr, rng_seed: Rng::stream(seed, 1).next_u64() };
    let y = add_measurement_noise(&forward(truth, &maps, &mask).map_err(lib)?, &mask, &noise).map_err(lib)?;

    let zf = zero_filled(&y, &maps, &mask).map_err(lib)?;
    let result = match &model {
        Some(m) => pnp_reconstruct(&y, &maps, &mask, &recon, m),
        None => pnp_reconstruct(&y, &maps, &mask, &recon, &IdentityDenoiser),
    }
    .map_err(lib)?;

    fs::create_dir_all(&out_dir)?;
    let peak = truth.magnitude().max();
    let p = |name: &str| out_dir.join(name);
    write_image(p("reference.cimg"), truth)?;
    write_image(p("recon.cimg"), &result.image)?;
    write_image(p("zero_filled.cimg"), &zf)?;
    write_kspace(p("kspace.cimg"), &y)?;
    write_mask(p("mask.mask"), &mask)?;
    export_pgm(p("reference.pgm"), &truth.magnitude(), PgmScale::SelfPeak)?;
    export_pgm(p("recon.pgm"), &result.image.magnitude(), PgmScale::ReferencePeak(peak))?;
    export_pgm(p("zero_filled.pgm"), &zf.magnitude(), PgmScale::ReferencePeak(peak))?;
    export_pgm(p("error.pgm"), &error_map(truth, &result.image).map_err(lib)?, PgmScale::ReferencePeak(peak))?;

    let mut w = csv::Writer::from_path(p("telemetry.csv")).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record(["iter", "residual", "relative_change"]).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record(["0".to_string(), format!("{:e}", result.initial_residual), String::new()])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for r in &result.history {
        w.write_record([r.iter.to_string(), format!("{:e}", r.residual), format!("{:e}", r.relative_change)])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    drop(w);

    let psnr_recon = fmt4(psnr(truth, &result.image).map_err(lib)?);
    let psnr_zf = fmt4(psnr(truth, &zf).map_err(lib)?);
    write_psnr_summary(
        &p("summary.json"),
        &[
            ("psnr_db", psnr_recon.clone()),
            ("zero_filled_psnr_db", psnr_zf.clone()),
            ("iters_run", result.iters_run.to_string()),
            ("stop_reason", result.stop_reason.name().to_string()),
            ("achieved_rate", format!("{}", mask.achieved_rate())),
        ],
    )?;
    let mut inputs = BTreeMap::new();
    if let Some(mp) = &model_path {
        inputs.insert("model".to_string(), file_hash(Path::new(mp))?);
    }
    let outputs: Vec<PathBuf> = [
        "reference.cimg", "recon.cimg", "zero_filled.cimg", "kspace.cimg", "mask.mask", "reference.pgm", "recon.pgm",
        "zero_filled.pgm", "error.pgm", "telemetry.csv", "summary.json",
    ]
    .iter()
    .map(|n| p(n))
    .collect();
    write_manifest(&p("manifest.json"), "reconstruct", layers, inputs, &outputs)?;
    println!(
        "psnr_db={psnr_recon} zero_filled_psnr_db={psnr_zf} iters={} stop={}",
        result.iters_run,
        result.stop_reason.name()
    );
    Ok(())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn default_rates(pattern: SamplingPattern) -> Vec<f64> {
    match pattern {
        SamplingPattern::Cartesian1d => vec![0.35, 0.40, 0.45, 0.50],
        SamplingPattern::Random2d => vec![0.25, 0.30, 0.35, 0.40],
        SamplingPattern::Full => vec![1.0],
    }
}

fn parse_rates(s: &str) -> Result<Vec<f64>, CliError> {
    let rates = split_list(s)
        .map(|r| r.parse::<f64>().map_err(|_| usage(format!("bad rate {r:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    rates.iter().try_for_each(|&r| check_rate(r))?;
    if rates.is_empty() {
        return Err(usage("empty rate list"));
    }
    Ok(rates)
}

fn build_grid(patterns: &str, rates: Option<&str>) -> Result<Vec<SweepCell>, CliError> {
    let patterns: Vec<SamplingPattern> = split_list(patterns).map(|p| p.parse().map_err(lib)).collect::<Result<_, _>>()?;
    if patterns.is_empty() {
        return Err(usage("empty pattern list"));
    }
    let qualified: Option<BTreeMap<String, Vec<f64>>> = match rates {
        Some(r) if r.contains('=') => Some(
            r.split(';')
                .filter(|g| !g.trim().is_empty())
                .map(|g| {
                    let (name, list) = g.split_once('=').ok_or_else(|| usage(format!("bad rate group {g:?}")))?;
                    Ok((name.trim().to_string(), parse_rates(list)?))
                })
                .collect::<Result<_, CliError>>()?,
        ),
        _ => None,
    };
    let plain = match rates {
        Some(r) if qualified.is_none() => Some(parse_rates(r)?),
        _ => None,
    };
    let mut cells = Vec::new();
    for p in patterns {
        let list = if let Some(q) = &qualified {
            q.get(p.name()).cloned().ok_or_else(|| usage(format!("no rates given for pattern {p}")))?
        } else if let Some(l) = &plain {
            l.clone()
        } else {
            default_rates(p)
        };
        cells.extend(list.into_iter().map(|rate| SweepCell { pattern: p, rate }));
    }
    Ok(cells)
}

pub fn sweep(a: SweepArgs, layers: &mut Layers) -> Result<(), CliError> {
    let patterns: String = layers.get("patterns", a.patterns, "cartesian1d,random2d".to_string())?;
    let rates = layers.get_opt("rates", a.rates)?;
    let methods_s: String = layers.get("methods", a.methods, "zero_filled,pnp-identity,pnp-cnn1d".to_string())?;
    let cases_s: String = layers.get("cases", a.cases, DEFAULT_CASES.to_string())?;
    let seeds_s: String = layers.get("seeds", a.seeds, "0".to_string())?;
    let model_path = layers.get_opt("model", a.model.map(|p| p.display().to_string()))?;
    let size = layers.get("size", a.size, DEFAULT_PHANTOM_SIZE)?;
    let coils = layers.get("coils", a.coils, DEFAULT_COILS)?;
    let center_fraction = layers.get("center-fraction", a.center_fraction, DEFAULT_CENTER_FRACTION)?;
    let snr = layers.get("snr", a.snr, f64::INFINITY)?;
    let recon = recon_config(layers, a.gamma, a.iters, a.tol)?;
    let zero_phase = layers.switch("zero-phase", a.zero_phase)?;
    let out_dir: PathBuf = layers.require("out-dir", a.out_dir.map(|p| p.display().to_string()))?.into();
    layers.finish()?;

    let cells = build_grid(&patterns, rates.as_deref())?;
    let methods: Vec<Method> = split_list(&methods_s).map(|m| m.parse().map_err(lib)).collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(usage("method list is empty"));
    }
    let seeds: Vec<u64> = split_list(&seeds_s)
        .map(|s| s.parse().map_err(|_| usage(format!("bad seed {s:?}"))))
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(usage("seed list is empty"));
    }
    if coils == 0 {
        return Err(usage("--coils must be positive"));
    }
    let model: Option<DenoiserModel> = match (&model_path, methods.contains(&Method::PnpCnn1d)) {
        (None, true) => return Err(usage("method pnp-cnn1d needs --model")),
        (Some(p), _) => Some(load_model(p)?),
        (None, false) => None,
    };
    let cases: Vec<SweepCase> = split_list(&cases_s)
        .enumerate()
        .map(|(i, spec)| resolve_case(spec, size, i, zero_phase).map(|(id, p)| SweepCase { id, image: p.image }))
        .collect::<Result<_, _>>()?;
    if cases.is_empty() {
        return Err(usage("case list is empty"));
    }

    let images = out_dir.join("images");
    fs::create_dir_all(&images)?;
    let mut outputs = Vec::new();
    for case in &cases {
        let path = images.join(format!("{}_reference.pgm", case.id));
        export_pgm(&path, &case.image.magnitude(), PgmScale::SelfPeak)?;
        outputs.push(path);
    }
    let config = SweepConfig { coils, center_fraction, snr_db: snr, recon };
    let report = run_sweep(&cases, &cells, &methods, &seeds, &config, model.as_ref().map(|m| m as &dyn LineDenoiser), |cell| {
        let peak = cell.reference.magnitude().max();
        for (method, res) in &cell.results {
            let Ok(out) = res else { continue };
            let stem = format!("{}_{}_{:.2}_s{}_{}", cell.case_id, cell.cell.pattern, cell.cell.rate, cell.seed, method);
            let recon_path = images.join(format!("{stem}.pgm"));
            let err_path = images.join(format!("{stem}_error.pgm"));
            export_pgm(&recon_path, &out.image.magnitude(), PgmScale::ReferencePeak(peak))?;
            export_pgm(&err_path, &error_map(&cell.reference, &out.image)?, PgmScale::ReferencePeak(peak))?;
            outputs.push(recon_path);
            outputs.push(err_path);
            eprintln!("{stem}: psnr {} dB", fmt4(out.psnr_db));
        }
        Ok(())
    })
    .map_err(lib)?;

    let csv_path = out_dir.join("report.csv");
    fs::write(&csv_path, report.to_csv().map_err(lib)?)?;
    outputs.push(csv_path.clone());
    let mut inputs = BTreeMap::new();
    if let Some(mp) = &model_path {
        inputs.insert("model".to_string(), file_hash(Path::new(mp))?);
    }
    write_manifest(&out_dir.join("manifest.json"), "sweep", layers, inputs, &outputs)?;
    for agg in &report.aggregates {
        println!(
            "{:<12} {:.2} {:<13} mean {} std {} (n={})",
            agg.pattern.name(),
            agg.rate,
            agg.method.name(),
            fmt4(agg.mean_psnr),
            fmt4(agg.std_psnr),
            agg.count
        );
    }
    println!("report: {}", csv_path.display());
    Ok(())
}
