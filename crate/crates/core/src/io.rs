//! On-disk formats: LATF feature files, the model artifact container, flat
//! key=value configuration, and CSV run reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::decoder::LinearDecoder;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::subspace::PrincipalSubspace;

pub const FEATURE_MAGIC: [u8; 4] = *b"LATF";
pub const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER_LEN: usize = 17;

/// N latents of dimension D stored as 32-bit floats, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    labels: Option<Vec<u32>>,
}

impl FeatureFile {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>, labels: Option<Vec<u32>>) -> Result<Self> {
        if rows > u32::MAX as usize || cols > u32::MAX as usize {
            return Err(Error::contract("feature file dimensions exceed u32"));
        }
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{} values for a {rows}x{cols} feature file",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite feature at row {}, column {}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        if let Some(l) = &labels {
            if l.len() != rows {
                return Err(Error::contract(format!("{} labels for {rows} rows", l.len())));
            }
        }
        Ok(Self { rows, cols, data, labels })
    }

    /// Rounds every entry to the nearest `f32`.
    pub fn from_matrix(features: &Matrix, labels: Option<Vec<u32>>) -> Result<Self> {
        let data: Vec<f32> = features.as_slice().iter().map(|&v| v as f32).collect();
        Self::new(features.rows(), features.cols(), data, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|&v| f64::from(v)).collect())
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::contract(format!("row {r} out of range")));
            }
            data.extend_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        let labels = self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect());
        Self::new(rows.len(), self.cols, data, labels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let label_len = self.labels.as_ref().map_or(0, |l| 4 * l.len());
        let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * self.data.len() + label_len);
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.push(u8::from(self.labels.is_some()));
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FEATURE_HEADER_LEN {
            return Err(Error::format("feature file shorter than its header"));
        }
        if bytes[..4] != FEATURE_MAGIC {
            return Err(Error::format("not a LATF feature file (bad magic)"));
        }
        let version = read_u32(bytes, 4);
        if version != FEATURE_VERSION {
            return Err(Error::format(format!("unsupported LATF version {version}")));
        }
        let rows = read_u32(bytes, 8) as usize;
        let cols = read_u32(bytes, 12) as usize;
        let has_labels = match bytes[16] {
            0 => false,
            1 => true,
            f => return Err(Error::format(format!("invalid label flag {f}"))),
        };
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("feature file dimensions overflow"))?;
        let expected = FEATURE_HEADER_LEN as u128
            + 4 * count as u128
            + if has_labels { 4 * rows as u128 } else { 0 };
        if bytes.len() as u128 != expected {
            return Err(Error::format(format!(
                "payload is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let body = &bytes[FEATURE_HEADER_LEN..];
        let data: Vec<f32> = body[..4 * count]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let labels = has_labels.then(|| {
            body[4 * count..]
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect()
        });
        Self::new(rows, cols, data, labels).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("slice of 4"))
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("slice of 8"))
}

pub const ARTIFACT_MAGIC: [u8; 4] = *b"TEDM";
pub const ARTIFACT_VERSION: u32 = 1;
const SECTION_ENTRY_LEN: usize = 20;

const TAG_META: [u8; 4] = *b"META";
const TAG_MEAN: [u8; 4] = *b"MEAN";
const TAG_BASIS: [u8; 4] = *b"BASE";
const TAG_SVALS: [u8; 4] = *b"SVAL";
const TAG_DEC_W: [u8; 4] = *b"DECW";
const TAG_DEC_B: [u8; 4] = *b"DECB";
const META_LEN: usize = 8 * 5 + 1 + 32;

/// Fitted subspace and/or decoder plus fitting metadata.
///
/// Layout: magic, version (u32), section count (u32), then one
/// `(tag [4], offset u64, length u64)` entry per section, then the sections.
/// All integers and floats little-endian; floats are stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub subspace: Option<PrincipalSubspace>,
    pub decoder: Option<LinearDecoder>,
    pub seed: u64,
    pub config_hash: [u8; 32],
}

impl ModelArtifact {
    pub fn dim(&self) -> Option<usize> {
        self.subspace
            .as_ref()
            .map(PrincipalSubspace::dim)
            .or_else(|| self.decoder.as_ref().map(LinearDecoder::dim))
    }

    pub fn require_subspace(&self) -> Result<&PrincipalSubspace> {
        self.subspace
            .as_ref()
            .ok_or_else(|| Error::config("artifact has no fitted subspace; run `fit` first"))
    }

    pub fn require_decoder(&self) -> Result<&LinearDecoder> {
        self.decoder
            .as_ref()
            .ok_or_else(|| Error::config("artifact has no decoder"))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if let (Some(s), Some(d)) = (&self.subspace, &self.decoder) {
            if s.dim() != d.dim() {
                return Err(Error::contract("subspace and decoder dimensions differ"));
            }
        }
        let (d, k, n, rank_deficient) = match &self.subspace {
            Some(s) => (s.dim(), s.k(), s.source_count(), s.rank_deficient()),
            None => (self.dim().unwrap_or(0), 0, 0, false),
        };
        let c = self.decoder.as_ref().map_or(0, LinearDecoder::class_count);

        let mut meta = Vec::with_capacity(META_LEN);
        for v in [k as u64, n as u64, d as u64, c as u64, self.seed] {
            meta.extend_from_slice(&v.to_le_bytes());
        }
        meta.push(u8::from(rank_deficient));
        meta.extend_from_slice(&self.config_hash);

        let mut sections: Vec<([u8; 4], Vec<u8>)> = vec![(TAG_META, meta)];
        if let Some(s) = &self.subspace {
            sections.push((TAG_MEAN, f64_bytes(s.mean())));
            sections.push((TAG_BASIS, f64_bytes(s.basis().as_slice())));
            sections.push((TAG_SVALS, f64_bytes(s.singular_values())));
        }
        if let Some(dec) = &self.decoder {
            sections.push((TAG_DEC_W, f64_bytes(dec.weights().as_slice())));
            sections.push((TAG_DEC_B, f64_bytes(dec.bias())));
        }

        let mut out = Vec::new();
        out.extend_from_slice(&ARTIFACT_MAGIC);
        out.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        let mut offset = (12 + SECTION_ENTRY_LEN * sections.len()) as u64;
        for (tag, body) in &sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            offset += body.len() as u64;
        }
        for (_, body) in &sections {
            out.extend_from_slice(body);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || bytes[..4] != ARTIFACT_MAGIC {
            return Err(Error::format("not a model artifact (bad magic)"));
        }
        let version = read_u32(bytes, 4);
        if version != ARTIFACT_VERSION {
            return Err(Error::format(format!("unsupported artifact version {version}")));
        }
        let count = read_u32(bytes, 8) as usize;
        let table_end = 12 + SECTION_ENTRY_LEN * count;
        if bytes.len() < table_end {
            return Err(Error::format("truncated section table"));
        }
        let mut sections: BTreeMap<[u8; 4], &[u8]> = BTreeMap::new();
        for i in 0..count {
            let at = 12 + SECTION_ENTRY_LEN * i;
            let tag: [u8; 4] = bytes[at..at + 4].try_into().expect("slice of 4");
            let offset = read_u64(bytes, at + 4);
            let len = read_u64(bytes, at + 12);
            let end = offset
                .checked_add(len)
                .filter(|&e| e <= bytes.len() as u64 && offset >= table_end as u64)
                .ok_or_else(|| Error::format("section extends outside the file"))?;
            if sections.insert(tag, &bytes[offset as usize..end as usize]).is_some() {
                return Err(Error::format("duplicate section"));
            }
        }

        let meta = sections
            .get(&TAG_META)
            .ok_or_else(|| Error::format("missing META section"))?;
        if meta.len() != META_LEN {
            return Err(Error::format("META section has the wrong length"));
        }
        let field = |i: usize| -> Result<usize> {
            usize::try_from(read_u64(meta, 8 * i)).map_err(|_| Error::format("META field too large"))
        };
        let (k, n, d, c) = (field(0)?, field(1)?, field(2)?, field(3)?);
        let seed = read_u64(meta, 32);
        let rank_deficient = match meta[40] {
            0 => false,
            1 => true,
            f => return Err(Error::format(format!("invalid rank flag {f}"))),
        };
        let config_hash: [u8; 32] = meta[41..73].try_into().expect("slice of 32");

        let floats = |tag: [u8; 4], len: usize| -> Result<Vec<f64>> {
            let body = sections.get(&tag).ok_or_else(|| {
                Error::format(format!("missing {} section", String::from_utf8_lossy(&tag)))
            })?;
            if body.len() != 8 * len {
                return Err(Error::format(format!(
                    "{} section has {} bytes, expected {}",
                    String::from_utf8_lossy(&tag),
                    body.len(),
                    8 * len
                )));
            }
            Ok(body
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect())
        };
        let fmt_err = |e: Error| Error::Format(e.to_string());

        let subspace = if k > 0 {
            let basis = Matrix::new(d, k, floats(TAG_BASIS, d * k)?).map_err(fmt_err)?;
            Some(
                PrincipalSubspace::from_parts(
                    floats(TAG_MEAN, d)?,
                    basis,
                    floats(TAG_SVALS, k)?,
                    n,
                    rank_deficient,
                )
                .map_err(fmt_err)?,
            )
        } else {
            None
        };
        let decoder = if c > 0 {
            let w = Matrix::new(c, d, floats(TAG_DEC_W, c * d)?).map_err(fmt_err)?;
            Some(LinearDecoder::new(w, floats(TAG_DEC_B, c)?).map_err(fmt_err)?)
        } else {
            None
        };
        Ok(Self {
            subspace,
            decoder,
            seed,
            config_hash,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// SHA-256 over a canonical `key=value` rendering.
pub fn config_hash(entries: &BTreeMap<String, String>) -> [u8; 32] {
    let mut h = Sha256::new();
    for (k, v) in entries {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn render_key_values(entries: &BTreeMap<String, String>) -> String {
    entries.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k} = {v}");
        s
    })
}

/// One adapted sample.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub true_label: Option<u32>,
    pub noadapt_class: usize,
    pub noadapt_entropy: f64,
    pub adapted_class: usize,
    pub adapted_entropy: f64,
    pub evaluations: usize,
    pub saturations: u64,
    pub sigma_clamps: u64,
    pub error: Option<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub samples: usize,
    pub failed: usize,
    /// Over successful labelled rows; `None` without labels.
    pub accuracy_noadapt: Option<f64>,
    pub accuracy_adapted: Option<f64>,
    pub mean_entropy_noadapt: f64,
    pub mean_entropy_adapted: f64,
    pub mean_wall_ms: f64,
    pub saturations: u64,
    pub sigma_clamps: u64,
}

impl Aggregates {
    pub fn from_records(records: &[SampleRecord]) -> Self {
        let ok: Vec<&SampleRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let labelled: Vec<(&SampleRecord, u32)> =
            ok.iter().filter_map(|r| r.true_label.map(|l| (*r, l))).collect();
        let accuracy = |pick: fn(&SampleRecord) -> usize| {
            (!labelled.is_empty()).then(|| {
                let hits = labelled.iter().filter(|(r, l)| pick(r) == *l as usize).count();
                100.0 * hits as f64 / labelled.len() as f64
            })
        };
        let mean = |f: fn(&SampleRecord) -> f64| {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        Self {
            samples: records.len(),
            failed: records.len() - ok.len(),
            accuracy_noadapt: accuracy(|r| r.noadapt_class),
            accuracy_adapted: accuracy(|r| r.adapted_class),
            mean_entropy_noadapt: mean(|r| r.noadapt_entropy),
            mean_entropy_adapted: mean(|r| r.adapted_entropy),
            mean_wall_ms: mean(|r| r.wall_ms),
            saturations: ok.iter().map(|r| r.saturations).sum(),
            sigma_clamps: ok.iter().map(|r| r.sigma_clamps).sum(),
        }
    }
}

/// Per-sample records of one run plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub settings: BTreeMap<String, String>,
    pub records: Vec<SampleRecord>,
}

impl RunReport {
    pub fn aggregates(&self) -> Aggregates {
        Aggregates::from_records(&self.records)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<SampleRecord>> {
        csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.settings {
            let _ = writeln!(s, "{k}: {v}");
        }
        s.push_str(&render_summary(&self.aggregates()));
        s
    }
}

pub fn render_summary(a: &Aggregates) -> String {
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}%"));
    let mut s = String::new();
    let _ = writeln!(s, "samples: {} ({} failed)", a.samples, a.failed);
    let _ = writeln!(s, "accuracy no-adapt: {}", pct(a.accuracy_noadapt));
    let _ = writeln!(s, "accuracy adapted: {}", pct(a.accuracy_adapted));
    let _ = writeln!(s, "mean entropy no-adapt: {:.6}", a.mean_entropy_noadapt);
    let _ = writeln!(s, "mean entropy adapted: {:.6}", a.mean_entropy_adapted);
    let _ = writeln!(s, "saturations: {}", a.saturations);
    let _ = writeln!(s, "sigma clamps: {}", a.sigma_clamps);
    let _ = writeln!(s, "wall ms per sample: {:.3}", a.mean_wall_ms);
    s
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_header_layout() {
        let f = FeatureFile::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Some(vec![7, 8])).unwrap();
        let b = f.to_bytes();
        assert_eq!(&b[..4], b"LATF");
        assert_eq!(read_u32(&b, 4), 1);
        assert_eq!(read_u32(&b, 8), 2);
        assert_eq!(read_u32(&b, 12), 3);
        assert_eq!(b[16], 1);
        assert_eq!(b.len(), 17 + 24 + 8);
        assert_eq!(&b[17..21], &1.0f32.to_le_bytes());
        assert_eq!(&b[41..45], &7u32.to_le_bytes());
        assert_eq!(FeatureFile::from_bytes(&b).unwrap(), f);
    }

    #[test]
    fn feature_rejects_corruption() {
        let f = FeatureFile::new(1, 2, vec![1.0, 2.0], None).unwrap();
        let b = f.to_bytes();
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(FeatureFile::from_bytes(&bad), Err(Error::Format(_))));
        assert!(FeatureFile::from_bytes(&b[..b.len() - 1]).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(FeatureFile::from_bytes(&long).is_err());
        let mut nan = b.clone();
        nan[17..21].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(FeatureFile::from_bytes(&nan).is_err());
        let mut flag = b;
        flag[16] = 2;
        assert!(FeatureFile::from_bytes(&flag).is_err());
        assert!(FeatureFile::new(1, 1, vec![f32::INFINITY], None).is_err());
    }

    #[test]
    fn decoder_only_artifact() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = ModelArtifact {
            subspace: None,
            decoder: Some(LinearDecoder::new(w, vec![0.5, -0.5]).unwrap()),
            seed: 3,
            config_hash: [9; 32],
        };
        let b = a.to_bytes().unwrap();
        assert_eq!(&b[..4], b"TEDM");
        let back = ModelArtifact::from_bytes(&b).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.dim(), Some(2));
        assert!(back.require_subspace().is_err());
    }

    #[test]
    fn key_values() {
        let m = parse_key_values("# c\nk = 16\n\nseed=4 # trailing\nk=8\n").unwrap();
        assert_eq!(m.get("k").unwrap(), "8");
        assert_eq!(m.get("seed").unwrap(), "4");
        assert!(parse_key_values("oops").is_err());
        assert_eq!(parse_key_values(&render_key_values(&m)).unwrap(), m);
    }

    #[test]
    fn aggregates_skip_failures() {
        let rec = |i, l, a, b, err: Option<&str>| SampleRecord {
            index: i,
            true_label: l,
            noadapt_class: a,
            noadapt_entropy: 1.0,
            adapted_class: b,
            adapted_entropy: 0.5,
            evaluations: 1,
            saturations: 2,
            sigma_clamps: 0,
            error: err.map(String::from),
            wall_ms: 0.0,
        };
        let recs = vec![
            rec(0, Some(1), 1, 1, None),
            rec(1, Some(2), 0, 2, None),
            rec(2, Some(2), 2, 2, Some("boom")),
        ];
        let a = Aggregates::from_records(&recs);
        assert_eq!(a.failed, 1);
        assert_eq!(a.accuracy_noadapt, Some(50.0));
        assert_eq!(a.accuracy_adapted, Some(100.0));
        assert_eq!(a.saturations, 4);
        let report = RunReport {
            settings: BTreeMap::new(),
            records: recs.clone(),
        };
        assert_eq!(RunReport::records_from_csv(&report.to_csv().unwrap()).unwrap(), recs);
    }
}
