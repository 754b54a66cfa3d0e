//! On-disk formats.
//!
//! Every binary file is an 8-byte magic (`NAME` + `v001`), a little-endian
//! `u64` header length, a UTF-8 JSON header, then a raw little-endian payload.
//! Viewing exports are 8-bit PGM files with a JSON sidecar describing the
//! intensity normalisation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{ComplexImage, KSpaceStack, RealImage, SignalLine1D, C64};
use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;
use crate::sampling::{SamplingMask, SamplingPattern};
use crate::synthdata::{Dataset, DatasetRecord};

pub const FORMAT_VERSION: &str = "v001";
pub const IMAGE_MAGIC: &[u8; 8] = b"CIMGv001";
pub const MASK_MAGIC: &[u8; 8] = b"MASKv001";
pub const DATASET_MAGIC: &[u8; 8] = b"DSETv001";
pub const MODEL_MAGIC: &[u8; 8] = b"DNZRv001";

pub(crate) fn encode_container<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits a container into its parsed header and payload bytes.
pub(crate) fn decode_container<'a, H: DeserializeOwned>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < 8 {
        return Err(Error::Truncated(format!("{} bytes, magic needs 8", bytes.len())));
    }
    let (name, version) = (&bytes[..4], &bytes[4..8]);
    if name != &magic[..4] {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(&magic[..4]).into_owned(),
            found: String::from_utf8_lossy(name).into_owned(),
        });
    }
    if version != &magic[4..] {
        return Err(Error::VersionMismatch {
            expected: String::from_utf8_lossy(&magic[4..]).into_owned(),
            found: String::from_utf8_lossy(version).into_owned(),
        });
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated("missing header length".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let rest = &bytes[16..];
    if rest.len() < len {
        return Err(Error::Truncated(format!("header needs {len} bytes, {} available", rest.len())));
    }
    let header = serde_json::from_slice(&rest[..len])?;
    Ok((header, &rest[len..]))
}

pub(crate) fn check_payload_len(payload: &[u8], expected: usize) -> Result<()> {
    match payload.len().cmp(&expected) {
        std::cmp::Ordering::Less => {
            Err(Error::Truncated(format!("payload needs {expected} bytes, {} available", payload.len())))
        }
        std::cmp::Ordering::Greater => {
            Err(Error::Corrupt(format!("{} trailing bytes after payload", payload.len() - expected)))
        }
        std::cmp::Ordering::Equal => Ok(()),
    }
}

pub(crate) fn push_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn push_complex(out: &mut Vec<u8>, values: &[C64]) {
    push_f64s(out, values.iter().flat_map(|z| [z.re, z.im]));
}

pub(crate) fn read_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
}

fn read_complex(bytes: &[u8]) -> Vec<C64> {
    read_f64s(bytes).chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageHeader {
    shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    coils: Option<usize>,
    dtype: String,
    layout: String,
    rng: String,
}

impl ImageHeader {
    fn new(shape: Vec<usize>, coils: Option<usize>) -> Self {
        Self { shape, coils, dtype: "c64".into(), layout: "row-major".into(), rng: RNG_ALGORITHM.into() }
    }

    fn check(&self) -> Result<()> {
        if self.dtype != "c64" || self.layout != "row-major" {
            return Err(Error::Corrupt(format!("unsupported dtype/layout {}/{}", self.dtype, self.layout)));
        }
        Ok(())
    }
}

pub fn encode_image(img: &ComplexImage) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(16 * img.data().len());
    push_complex(&mut payload, img.data());
    encode_container(IMAGE_MAGIC, &ImageHeader::new(vec![img.height(), img.width()], None), &payload)
}

pub fn decode_image(bytes: &[u8]) -> Result<ComplexImage> {
    let (header, payload): (ImageHeader, _) = decode_container(IMAGE_MAGIC, bytes)?;
    header.check()?;
    let [h, w] = header.shape[..] else {
        return Err(Error::Corrupt(format!("expected a 2D image, header shape {:?}", header.shape)));
    };
    if header.coils.is_some() {
        return Err(Error::Corrupt("file holds coil k-space, not an image".into()));
    }
    check_payload_len(payload, 16 * h * w)?;
    ComplexImage::new(h, w, read_complex(payload))
}

pub fn encode_kspace(ks: &KSpaceStack) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(16 * ks.data().len());
    push_complex(&mut payload, ks.data());
    let header = ImageHeader::new(vec![ks.coils(), ks.height(), ks.width()], Some(ks.coils()));
    encode_container(IMAGE_MAGIC, &header, &payload)
}

pub fn decode_kspace(bytes: &[u8]) -> Result<KSpaceStack> {
    let (header, payload): (ImageHeader, _) = decode_container(IMAGE_MAGIC, bytes)?;
    header.check()?;
    let [c, h, w] = header.shape[..] else {
        return Err(Error::Corrupt(format!("expected coils × height × width, header shape {:?}", header.shape)));
    };
    if header.coils != Some(c) {
        return Err(Error::Corrupt("coil count disagrees with shape".into()));
    }
    check_payload_len(payload, 16 * c * h * w)?;
    KSpaceStack::new(c, h, w, read_complex(payload))
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskHeader {
    shape: [usize; 2],
    pattern: String,
    target_rate: f64,
    achieved_rate: f64,
    center_fraction: f64,
    seed: u64,
}

pub fn encode_mask(mask: &SamplingMask) -> Result<Vec<u8>> {
    let header = MaskHeader {
        shape: [mask.height(), mask.width()],
        pattern: mask.pattern().name().into(),
        target_rate: mask.target_rate(),
        achieved_rate: mask.achieved_rate(),
        center_fraction: mask.center_fraction(),
        seed: mask.seed(),
    };
    encode_container(MASK_MAGIC, &header, mask.keep())
}

pub fn decode_mask(bytes: &[u8]) -> Result<SamplingMask> {
    let (header, payload): (MaskHeader, _) = decode_container(MASK_MAGIC, bytes)?;
    let [h, w] = header.shape;
    check_payload_len(payload, h * w)?;
    let pattern: SamplingPattern = header.pattern.parse().map_err(|_| Error::Corrupt(format!("pattern {:?}", header.pattern)))?;
    let mask = SamplingMask::from_parts(h, w, payload.to_vec(), pattern, header.target_rate, header.center_fraction, header.seed)
        .map_err(|e| Error::Corrupt(e.to_string()))?;
    if mask.achieved_rate() != header.achieved_rate {
        return Err(Error::Corrupt(format!(
            "header rate {} disagrees with payload rate {}",
            header.achieved_rate,
            mask.achieved_rate()
        )));
    }
    Ok(mask)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    count: usize,
    line_length: usize,
    snr_min_db: f64,
    snr_max_db: f64,
    seed: u64,
    source: String,
    rng: String,
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let l = ds.line_length;
    if ds.records.iter().any(|r| r.clean.len() != l || r.noisy.len() != l) {
        return Err(Error::invalid("every record must match the dataset line length"));
    }
    let header = DatasetHeader {
        count: ds.records.len(),
        line_length: l,
        snr_min_db: ds.snr_min_db,
        snr_max_db: ds.snr_max_db,
        seed: ds.seed,
        source: ds.source.clone(),
        rng: RNG_ALGORITHM.into(),
    };
    let mut payload = Vec::with_capacity(ds.records.len() * (8 + 32 * l));
    for rec in &ds.records {
        payload.extend_from_slice(&rec.snr_db.to_le_bytes());
        push_complex(&mut payload, rec.clean.data());
        push_complex(&mut payload, rec.noisy.data());
    }
    encode_container(DATASET_MAGIC, &header, &payload)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let (header, payload): (DatasetHeader, _) = decode_container(DATASET_MAGIC, bytes)?;
    let l = header.line_length;
    let stride = 8 + 32 * l;
    check_payload_len(payload, header.count * stride)?;
    let mut records = Vec::with_capacity(header.count);
    for chunk in payload.chunks_exact(stride) {
        let snr_db = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
        let clean = SignalLine1D::new(read_complex(&chunk[8..8 + 16 * l]))?;
        let noisy = SignalLine1D::new(read_complex(&chunk[8 + 16 * l..]))?;
        records.push(DatasetRecord { clean, noisy, snr_db });
    }
    Ok(Dataset {
        line_length: l,
        snr_min_db: header.snr_min_db,
        snr_max_db: header.snr_max_db,
        seed: header.seed,
        source: header.source,
        records,
    })
}

/// Hex SHA-256 of the encoded dataset.
pub fn dataset_hash(ds: &Dataset) -> Result<String> {
    Ok(sha256_hex(&encode_dataset(ds)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_image(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    Ok(fs::write(path, encode_image(img)?)?)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ComplexImage> {
    decode_image(&read_file(path.as_ref())?)
}

pub fn write_kspace(path: impl AsRef<Path>, ks: &KSpaceStack) -> Result<()> {
    Ok(fs::write(path, encode_kspace(ks)?)?)
}

pub fn read_kspace(path: impl AsRef<Path>) -> Result<KSpaceStack> {
    decode_kspace(&read_file(path.as_ref())?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    Ok(fs::write(path, encode_mask(mask)?)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    Ok(fs::write(path, encode_dataset(ds)?)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&read_file(path.as_ref())?)
}

/// Reads an 8- or 16-bit grayscale PGM, scaled to `[0, 1]` by its maximum
/// representable value.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<RealImage> {
    let img = image::ImageReader::open(path.as_ref())?.with_guessed_format()?.decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        other => other.into_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    RealImage::new(h, w, data)
}

/// How magnitudes are mapped onto 0–255 in a PGM export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PgmScale {
    /// Divide by the peak of a reference image.
    ReferencePeak(f64),
    /// Divide by the exported image's own peak.
    SelfPeak,
}

#[derive(Debug, Serialize)]
struct PgmSidecar<'a> {
    file: &'a str,
    width: usize,
    height: usize,
    normalization: &'static str,
    peak: f64,
    quantization: &'static str,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `magnitude` as an 8-bit binary PGM plus `<path>.json` recording the
/// normalisation.
pub fn export_pgm(path: impl AsRef<Path>, magnitude: &RealImage, scale: PgmScale) -> Result<()> {
    let path = path.as_ref();
    let (normalization, peak) = match scale {
        PgmScale::ReferencePeak(p) => ("reference-peak", p),
        PgmScale::SelfPeak => ("self-peak", magnitude.max()),
    };
    if !(peak.is_finite() && peak >= 0.0) {
        return Err(Error::invalid(format!("export peak must be finite and nonnegative, got {peak}")));
    }
    let pixels: Vec<u8> = magnitude
        .data()
        .iter()
        .map(|&v| if peak > 0.0 { ((v / peak).clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 })
        .collect();
    let mut bytes = format!("P5\n{} {}\n255\n", magnitude.width(), magnitude.height()).into_bytes();
    bytes.extend_from_slice(&pixels);
    fs::write(path, bytes)?;
    let sidecar = PgmSidecar {
        file: path.file_name().and_then(|n| n.to_str()).unwrap_or_default(),
        width: magnitude.width(),
        height: magnitude.height(),
        normalization,
        peak,
        quantization: "round(clamp(value / peak, 0, 1) * 255)",
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::sampling::make_cartesian1d_mask;

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        let mut rng = Rng::new(seed);
        ComplexImage::from_fn(h, w, |_, _| rng.complex_normal(1.0))
    }

    #[test]
    fn image_round_trip_is_bit_exact() {
        let img = random_image(7, 5, 1);
        let bytes = encode_image(&img).unwrap();
        assert_eq!(&bytes[..8], b"CIMGv001");
        let back = decode_image(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_image(&back).unwrap(), bytes);
    }

    #[test]
    fn kspace_round_trip() {
        let mut rng = Rng::new(2);
        let ks = KSpaceStack::new(3, 4, 6, (0..72).map(|_| rng.complex_normal(1.0)).collect()).unwrap();
        let bytes = encode_kspace(&ks).unwrap();
        assert_eq!(decode_kspace(&bytes).unwrap(), ks);
        assert!(decode_image(&bytes).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let mask = make_cartesian1d_mask(16, 32, 0.35, 0.08, 4).unwrap();
        let bytes = encode_mask(&mask).unwrap();
        let back = decode_mask(&bytes).unwrap();
        assert_eq!(back, mask);
        assert_eq!(encode_mask(&back).unwrap(), bytes);
    }

    #[test]
    fn dataset_round_trip() {
        let mut rng = Rng::new(3);
        let records = (0..4)
            .map(|_| {
                let clean = SignalLine1D::new((0..10).map(|_| rng.complex_normal(1.0)).collect()).unwrap();
                crate::synthdata::make_pair(&clean, rng.uniform_in(5.0, 40.0), &mut rng).unwrap()
            })
            .collect();
        let ds = Dataset {
            line_length: 10,
            snr_min_db: 5.0,
            snr_max_db: 40.0,
            seed: 3,
            source: "test".into(),
            records,
        };
        let bytes = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back).unwrap(), bytes);
        assert_eq!(dataset_hash(&ds).unwrap().len(), 64);
    }

    #[test]
    fn structured_errors() {
        let bytes = encode_image(&random_image(3, 3, 5)).unwrap();
        assert!(matches!(decode_image(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
        assert!(matches!(decode_image(&bytes[..5]), Err(Error::Truncated(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_image(&extra), Err(Error::Corrupt(_))));
        assert!(matches!(decode_mask(&bytes), Err(Error::BadMagic { .. })));
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(b"v002");
        match decode_image(&v2) {
            Err(Error::VersionMismatch { expected, found }) => {
                assert_eq!(expected, "v001");
                assert_eq!(found, "v002");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_image(b"CIMGv001\x05\0\0\0\0\0\0\0{bad}"), Err(Error::Json(_))));
    }

    #[test]
    fn pgm_export_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let mag = RealImage::new(2, 3, vec![0.0, 0.5, 1.0, 2.0, 0.25, 0.75]).unwrap();
        export_pgm(&path, &mag, PgmScale::ReferencePeak(1.0)).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[0, 128, 255, 255, 64, 191]);
        let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(sidecar["normalization"], "reference-peak");
        let back = read_pgm(&path).unwrap();
        assert_eq!((back.height(), back.width()), (2, 3));
        assert_eq!(back.get(0, 2), 1.0);

        export_pgm(&path, &mag, PgmScale::SelfPeak).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes[bytes.len() - 3], 255);
    }
}
