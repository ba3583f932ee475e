//! The experiment pipeline behind the `ted` command: generate synthetic
//! feature files, fit an artifact, adapt a target file, sweep a grid, and
//! summarize reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::datagen::{self, SyntheticTask};
use crate::error::{Error, Result};
use crate::io::{self, Aggregates, FeatureFile, ModelArtifact, RunReport, SampleRecord};
use crate::linalg::Matrix;
use crate::quant::FixedPointFormat;
use crate::rng::{derive_seed, Rng};
use crate::subspace::PrincipalSubspace;
use crate::ted::{self, AdaptationConfig, BinaryFeedback, Mode};

pub const SOURCE_TRAIN_FILE: &str = "source_train.latf";
pub const SOURCE_TEST_FILE: &str = "source_test.latf";
pub const TARGET_FILE: &str = "target.latf";
pub const DECODER_FILE: &str = "decoder.tedm";

const SUBSAMPLE_STREAM: u64 = 0xF17;

/// `none` evaluates the frozen model only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptMode {
    None,
    Adapt(Mode),
}

impl AdaptMode {
    /// Combines the `--mode` and `--fmt` flags. `fixed` needs a format.
    pub fn parse(mode: &str, fmt: Option<&str>) -> Result<Self> {
        let fmt = fmt.map(str::trim).filter(|f| !f.is_empty());
        match mode.trim() {
            "none" => Ok(AdaptMode::None),
            "fixed" => {
                let f = fmt.ok_or_else(|| Error::config("mode fixed requires --fmt xby"))?;
                Ok(AdaptMode::Adapt(Mode::Fixed(f.parse()?)))
            }
            other => other.parse().map(AdaptMode::Adapt),
        }
    }

    fn mode_name(&self) -> &'static str {
        match self {
            AdaptMode::None => "none",
            AdaptMode::Adapt(Mode::Float) => "ted",
            AdaptMode::Adapt(Mode::Binary) => "qted-v1",
            AdaptMode::Adapt(Mode::Fixed(_)) => "fixed",
        }
    }

    fn format(&self) -> Option<FixedPointFormat> {
        match self {
            AdaptMode::Adapt(Mode::Fixed(f)) => Some(*f),
            _ => None,
        }
    }
}

impl fmt::Display for AdaptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptMode::None => f.write_str("none"),
            AdaptMode::Adapt(m) => m.fmt(f),
        }
    }
}

impl FromStr for AdaptMode {
    type Err = Error;

    /// `none`, `ted`, `qted-v1`, or `fixed:xby` / `xby`.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, None)
    }
}

/// Every knob of the pipeline. Keys of the flat config file are the field
/// names below; `n` is the iteration count and `source_n` the fit subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub classes: usize,
    pub dim: usize,
    pub radius: f64,
    pub std: f64,
    pub severity: f64,
    pub shift: String,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub k: usize,
    pub source_n: Option<usize>,
    pub n: usize,
    pub lambda: Option<usize>,
    pub sigma0: f64,
    pub mode: AdaptMode,
    pub binary_feedback: BinaryFeedback,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            classes: datagen::DEFAULT_CLASSES,
            dim: datagen::DEFAULT_DIM,
            radius: datagen::DEFAULT_RADIUS,
            std: datagen::DEFAULT_STD,
            severity: 1.0,
            shift: "combined".into(),
            train_per_class: 1000,
            test_per_class: 20,
            k: ted::DEFAULT_K,
            source_n: None,
            n: ted::DEFAULT_ITERATIONS,
            lambda: None,
            sigma0: ted::DEFAULT_SIGMA0,
            mode: AdaptMode::Adapt(Mode::Float),
            binary_feedback: BinaryFeedback::Unquantized,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid value '{value}' for {key}")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "full" => Ok(None),
        v => parse_value(key, v).map(Some),
    }
}

impl RunConfig {
    /// Reads a flat `key = value` file over the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.as_ref().display()))
        })?;
        let mut cfg = Self::default();
        cfg.apply(&io::parse_key_values(&text)?)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        // `fmt` refines `mode`, so it goes last.
        let mut fmt = None;
        for (k, v) in entries {
            if k == "fmt" {
                fmt = Some(v.as_str());
            } else {
                self.set(k, v)?;
            }
        }
        if let Some(f) = fmt {
            self.set("fmt", f)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "classes" => self.classes = parse_value(key, value)?,
            "dim" => self.dim = parse_value(key, value)?,
            "radius" => self.radius = parse_value(key, value)?,
            "std" => self.std = parse_value(key, value)?,
            "severity" => self.severity = parse_value(key, value)?,
            "shift" => self.shift = value.trim().to_string(),
            "train_per_class" => self.train_per_class = parse_value(key, value)?,
            "test_per_class" => self.test_per_class = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "source_n" => self.source_n = parse_optional(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "lambda" => self.lambda = parse_optional(key, value)?,
            "sigma0" => self.sigma0 = parse_value(key, value)?,
            "mode" => {
                self.mode = match value.trim() {
                    "fixed" => match self.mode.format() {
                        Some(f) => AdaptMode::Adapt(Mode::Fixed(f)),
                        None => AdaptMode::Adapt(Mode::Fixed(FixedPointFormat::new(8, 4)?)),
                    },
                    v => v.parse()?,
                }
            }
            "fmt" => {
                let f: FixedPointFormat = value.parse()?;
                self.mode = match self.mode {
                    AdaptMode::Adapt(Mode::Fixed(_)) => AdaptMode::Adapt(Mode::Fixed(f)),
                    _ => {
                        return Err(Error::config("fmt is only meaningful with mode fixed"));
                    }
                };
            }
            "binary_feedback" => {
                self.binary_feedback = match value.trim() {
                    "unquantized" => BinaryFeedback::Unquantized,
                    "quantized" => BinaryFeedback::Quantized,
                    v => return Err(Error::config(format!("invalid binary_feedback '{v}'"))),
                }
            }
            other => return Err(Error::config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Canonical rendering; `from_file` of its text reproduces `self`.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let opt = |v: Option<usize>, none: &str| v.map_or(none.to_string(), |v| v.to_string());
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("classes", self.classes.to_string());
        put("dim", self.dim.to_string());
        put("radius", self.radius.to_string());
        put("std", self.std.to_string());
        put("severity", self.severity.to_string());
        put("shift", self.shift.clone());
        put("train_per_class", self.train_per_class.to_string());
        put("test_per_class", self.test_per_class.to_string());
        put("k", self.k.to_string());
        put("source_n", opt(self.source_n, "full"));
        put("n", self.n.to_string());
        put("lambda", opt(self.lambda, "auto"));
        put("sigma0", self.sigma0.to_string());
        put("mode", self.mode.mode_name().to_string());
        if let Some(f) = self.mode.format() {
            put("fmt", f.to_string());
        }
        put(
            "binary_feedback",
            match self.binary_feedback {
                BinaryFeedback::Unquantized => "unquantized",
                BinaryFeedback::Quantized => "quantized",
            }
            .to_string(),
        );
        m
    }

    fn subset(&self, keys: &[&str]) -> BTreeMap<String, String> {
        let all = self.to_map();
        keys.iter()
            .filter_map(|k| all.get(*k).map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    pub fn task(&self) -> Result<SyntheticTask> {
        SyntheticTask::on_sphere(self.classes, self.dim, self.radius, self.std, self.seed)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn adaptation(&self) -> Option<AdaptationConfig> {
        match self.mode {
            AdaptMode::None => None,
            AdaptMode::Adapt(mode) => Some(AdaptationConfig {
                k: self.k,
                iterations: self.n,
                population: self.lambda,
                sigma0: self.sigma0,
                seed: self.seed,
                mode,
                binary_magnitude: None,
                binary_feedback: self.binary_feedback,
            }),
        }
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub source_train: FeatureFile,
    pub source_test: FeatureFile,
    pub target: FeatureFile,
    /// Decoder-only artifact; `fit` adds the subspace.
    pub decoder: ModelArtifact,
}

/// Source train/test draws, a shifted target draw, and the source decoder.
/// The target is an independent draw mapped by the selected shift preset
/// around the mixture mean; `shift = none` or severity 0 leaves it unshifted.
pub fn generate(cfg: &RunConfig) -> Result<Generated> {
    if cfg.train_per_class == 0 || cfg.test_per_class == 0 {
        return Err(Error::config("train_per_class and test_per_class must be at least 1"));
    }
    if !(cfg.std > 0.0) {
        return Err(Error::config("std must be positive"));
    }
    let task = cfg.task()?;
    let (train, train_labels) = task.sample(cfg.train_per_class, 0)?;
    let (test, test_labels) = task.sample(cfg.test_per_class, 1)?;
    let (raw_target, target_labels) = task.sample(cfg.test_per_class, 2)?;

    let shift = if cfg.shift == "none" {
        datagen::ShiftSpec::identity(cfg.dim, "none")
    } else {
        datagen::preset_shifts(cfg.dim, cfg.severity, cfg.std, cfg.seed)
            .map_err(|e| Error::Config(e.to_string()))?
            .into_iter()
            .find(|s| s.label == cfg.shift)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown shift '{}' (none, mean-only, cov-only, combined)",
                    cfg.shift
                ))
            })?
    };
    let mixture_mean = column_means(task.class_means());
    let target = datagen::apply_shift(&raw_target, &mixture_mean, &shift)?;

    let keys = ["classes", "dim", "radius", "seed", "std"];
    Ok(Generated {
        source_train: FeatureFile::from_matrix(&train, Some(train_labels))?,
        source_test: FeatureFile::from_matrix(&test, Some(test_labels))?,
        target: FeatureFile::from_matrix(&target, Some(target_labels))?,
        decoder: ModelArtifact {
            subspace: None,
            decoder: Some(task.make_decoder()?),
            seed: cfg.seed,
            config_hash: io::config_hash(&cfg.subset(&keys)),
        },
    })
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out.iter().map(|v| v / m.rows() as f64).collect()
}

/// Writes the four generated files into `dir`; returns their paths.
pub fn write_generated(g: &Generated, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> = [SOURCE_TRAIN_FILE, SOURCE_TEST_FILE, TARGET_FILE, DECODER_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    g.source_train.write(&paths[0])?;
    g.source_test.write(&paths[1])?;
    g.target.write(&paths[2])?;
    g.decoder.write(&paths[3])?;
    Ok(paths)
}

/// Fits the principal subspace on `source` (optionally a seeded subsample of
/// `cfg.source_n` rows) and bundles it with the decoder of `decoder`.
pub fn fit(source: &FeatureFile, decoder: &ModelArtifact, cfg: &RunConfig) -> Result<ModelArtifact> {
    let dec = decoder.require_decoder()?;
    if dec.dim() != source.cols() {
        return Err(Error::config(format!(
            "decoder expects D = {}, source file has D = {}",
            dec.dim(),
            source.cols()
        )));
    }
    let rows = match cfg.source_n {
        None => source.rows(),
        Some(n) if n <= source.rows() => n,
        Some(n) => {
            return Err(Error::config(format!(
                "--n {n} exceeds the {} source rows",
                source.rows()
            )))
        }
    };
    let bound = rows.saturating_sub(1).min(source.cols());
    if cfg.k == 0 || cfg.k > bound {
        return Err(Error::config(format!(
            "k = {} outside 1..={bound} for N = {rows}, D = {}",
            cfg.k,
            source.cols()
        )));
    }
    let data = if rows == source.rows() {
        source.to_matrix()?
    } else {
        let mut idx: Vec<usize> = (0..source.rows()).collect();
        Rng::new(derive_seed(cfg.seed, SUBSAMPLE_STREAM)).shuffle(&mut idx);
        idx.truncate(rows);
        idx.sort_unstable();
        source.select_rows(&idx)?.to_matrix()?
    };
    let subspace = PrincipalSubspace::fit(&data, cfg.k)?;

    let mut meta = cfg.subset(&["k", "seed", "source_n"]);
    meta.insert("source_sha256".into(), hex(&Sha256::digest(source.to_bytes())));
    meta.insert("decoder_hash".into(), hex(&decoder.config_hash));
    Ok(ModelArtifact {
        subspace: Some(subspace),
        decoder: Some(dec.clone()),
        seed: cfg.seed,
        config_hash: io::config_hash(&meta),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the configured adaptation on every target row, in parallel, with
/// row `i` seeded by `derive_seed(cfg.seed, i)`.
pub fn adapt(artifact: &ModelArtifact, target: &FeatureFile, cfg: &RunConfig) -> Result<RunReport> {
    let subspace = artifact.require_subspace()?;
    let decoder = artifact.require_decoder()?;
    if target.cols() != subspace.dim() {
        return Err(Error::config(format!(
            "artifact has D = {}, target file has D = {}",
            subspace.dim(),
            target.cols()
        )));
    }
    let latents = target.to_matrix()?;
    let labels = target.labels();
    let adaptation = cfg.adaptation();
    let restricted = match &adaptation {
        Some(a) => {
            a.validate()?;
            if a.k > subspace.k() {
                return Err(Error::config(format!(
                    "k = {} exceeds the fitted subspace dimension {}",
                    a.k,
                    subspace.k()
                )));
            }
            Some(subspace.truncate(a.k)?)
        }
        None => None,
    };

    let records: Vec<SampleRecord> = (0..latents.rows())
        .into_par_iter()
        .map(|i| {
            let z = latents.row(i);
            let start = Instant::now();
            let mut rec = SampleRecord {
                index: i,
                true_label: labels.map(|l| l[i]),
                noadapt_class: 0,
                noadapt_entropy: 0.0,
                adapted_class: 0,
                adapted_entropy: 0.0,
                evaluations: 0,
                saturations: 0,
                sigma_clamps: 0,
                error: None,
                wall_ms: 0.0,
            };
            let outcome = match (&adaptation, &restricted) {
                (Some(a), Some(s)) => {
                    let row_cfg = AdaptationConfig {
                        seed: derive_seed(a.seed, i as u64),
                        ..a.clone()
                    };
                    ted::adapt(z, decoder, s, &row_cfg).map(|r| {
                        rec.noadapt_class = r.baseline_prediction.predicted_class;
                        rec.noadapt_entropy = r.baseline_prediction.entropy;
                        rec.adapted_class = r.prediction.predicted_class;
                        rec.adapted_entropy = r.prediction.entropy;
                        rec.evaluations = r.evaluations;
                        rec.saturations = r.warnings.saturations;
                        rec.sigma_clamps = r.warnings.sigma_clamps;
                    })
                }
                _ => decoder.decode(z).map(|p| {
                    rec.noadapt_class = p.predicted_class;
                    rec.noadapt_entropy = p.entropy;
                    rec.adapted_class = p.predicted_class;
                    rec.adapted_entropy = p.entropy;
                    rec.evaluations = 1;
                }),
            };
            if let Err(e) = outcome {
                rec.error = Some(e.to_string());
            }
            rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            rec
        })
        .collect();

    let mut settings = cfg.subset(&["k", "lambda", "mode", "fmt", "n", "seed", "sigma0", "binary_feedback"]);
    if let Some(a) = &adaptation {
        settings.insert("lambda".into(), a.lambda().to_string());
    }
    settings.insert("artifact_config_hash".into(), hex(&artifact.config_hash));
    Ok(RunReport { settings, records })
}

/// Writes `<out>` (CSV) and `<out>.summary.txt`.
pub fn write_report(report: &RunReport, out: impl AsRef<Path>) -> Result<PathBuf> {
    let out = out.as_ref();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, report.to_csv()?)?;
    let summary = summary_path(out);
    fs::write(&summary, report.summary())?;
    Ok(summary)
}

pub fn summary_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".summary.txt");
    PathBuf::from(s)
}

/// Recomputes the aggregates of a report CSV.
pub fn summarize(csv: impl AsRef<Path>) -> Result<Aggregates> {
    let bytes = fs::read(csv)?;
    Ok(Aggregates::from_records(&RunReport::records_from_csv(&bytes)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    pub modes: Vec<AdaptMode>,
}

/// One row of a sweep CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub n: usize,
    pub mode: String,
    pub samples: usize,
    pub failed: usize,
    pub accuracy_noadapt: Option<f64>,
    pub accuracy_adapted: Option<f64>,
    pub mean_entropy_noadapt: Option<f64>,
    pub mean_entropy_adapted: Option<f64>,
    pub saturations: u64,
    pub sigma_clamps: u64,
    pub error: Option<String>,
    pub mean_wall_ms: Option<f64>,
}

impl SweepRow {
    fn key(&self) -> (usize, usize, String) {
        (self.k, self.n, self.mode.clone())
    }
}

/// Runs every `(k, n, mode)` cell not already present in `out`, appending
/// one row per cell. A failing cell is recorded in its `error` column and
/// the sweep continues. Returns all rows of the file.
pub fn sweep(
    artifact: &ModelArtifact,
    target: &FeatureFile,
    base: &RunConfig,
    grid: &SweepGrid,
    out: impl AsRef<Path>,
) -> Result<Vec<SweepRow>> {
    if grid.ks.is_empty() || grid.ns.is_empty() || grid.modes.is_empty() {
        return Err(Error::config("sweep grid has an empty axis"));
    }
    let out = out.as_ref();
    let mut rows = read_sweep(out)?;
    let done: BTreeSet<_> = rows.iter().map(SweepRow::key).collect();

    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let fresh = file.metadata()?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);

    for &k in &grid.ks {
        for &n in &grid.ns {
            for mode in &grid.modes {
                let name = mode.to_string();
                if done.contains(&(k, n, name.clone())) {
                    continue;
                }
                let cfg = RunConfig {
                    k,
                    n,
                    mode: *mode,
                    ..base.clone()
                };
                let row = match adapt(artifact, target, &cfg) {
                    Ok(report) => {
                        let a = report.aggregates();
                        SweepRow {
                            k,
                            n,
                            mode: name,
                            samples: a.samples,
                            failed: a.failed,
                            accuracy_noadapt: a.accuracy_noadapt,
                            accuracy_adapted: a.accuracy_adapted,
                            mean_entropy_noadapt: Some(a.mean_entropy_noadapt),
                            mean_entropy_adapted: Some(a.mean_entropy_adapted),
                            saturations: a.saturations,
                            sigma_clamps: a.sigma_clamps,
                            error: None,
                            mean_wall_ms: Some(a.mean_wall_ms),
                        }
                    }
                    Err(e) => SweepRow {
                        k,
                        n,
                        mode: name,
                        samples: target.rows(),
                        failed: target.rows(),
                        accuracy_noadapt: None,
                        accuracy_adapted: None,
                        mean_entropy_noadapt: None,
                        mean_entropy_adapted: None,
                        saturations: 0,
                        sigma_clamps: 0,
                        error: Some(e.to_string()),
                        mean_wall_ms: None,
                    },
                };
                w.serialize(&row).map_err(io::csv_err)?;
                w.flush()?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    match fs::read(path) {
        Ok(bytes) => csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(io::csv_err),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            classes: 3,
            dim: 6,
            train_per_class: 20,
            test_per_class: 4,
            k: 3,
            n: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_roundtrip() {
        let mut cfg = small();
        cfg.set("mode", "fixed").unwrap();
        cfg.set("fmt", "16b4").unwrap();
        cfg.set("source_n", "40").unwrap();
        let text = io::render_key_values(&cfg.to_map());
        let mut back = RunConfig::default();
        back.apply(&io::parse_key_values(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.set("bogus", "1").is_err());
        assert!(cfg.set("k", "x").is_err());
        assert!(RunConfig::default().set("fmt", "8b4").is_err());
    }

    #[test]
    fn adapt_mode_flags() {
        assert_eq!(AdaptMode::parse("none", None).unwrap(), AdaptMode::None);
        assert_eq!(
            AdaptMode::parse("fixed", Some("4b2")).unwrap(),
            AdaptMode::Adapt(Mode::Fixed(FixedPointFormat::new(4, 2).unwrap()))
        );
        assert!(AdaptMode::parse("fixed", None).is_err());
        assert_eq!(AdaptMode::parse("qted-v1", None).unwrap().to_string(), "qted-v1");
    }

    #[test]
    fn generated_counts() {
        let g = generate(&small()).unwrap();
        assert_eq!((g.source_train.rows(), g.source_train.cols()), (60, 6));
        assert_eq!(g.target.rows(), 12);
        assert_eq!(g.decoder.dim(), Some(6));
        assert!(g.decoder.subspace.is_none());
    }

    #[test]
    fn unshifted_target_is_the_raw_draw() {
        let cfg = RunConfig {
            severity: 0.0,
            ..small()
        };
        let task = cfg.task().unwrap();
        let (raw, _) = task.sample(cfg.test_per_class, 2).unwrap();
        let g = generate(&cfg).unwrap();
        assert_eq!(g.target, FeatureFile::from_matrix(&raw, g.target.labels().map(<[u32]>::to_vec)).unwrap());
    }

    #[test]
    fn fit_rejects_bad_k() {
        let g = generate(&small()).unwrap();
        let cfg = RunConfig { k: 7, ..small() };
        assert!(matches!(fit(&g.source_train, &g.decoder, &cfg), Err(Error::Config(_))));
        let cfg = RunConfig {
            source_n: Some(3),
            ..small()
        };
        assert!(matches!(fit(&g.source_train, &g.decoder, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn none_mode_passes_through() {
        let cfg = RunConfig {
            mode: AdaptMode::None,
            ..small()
        };
        let g = generate(&cfg).unwrap();
        let art = fit(&g.source_train, &g.decoder, &cfg).unwrap();
        let r = adapt(&art, &g.target, &cfg).unwrap();
        for rec in &r.records {
            assert_eq!(rec.adapted_class, rec.noadapt_class);
            assert_eq!(rec.adapted_entropy, rec.noadapt_entropy);
        }
    }
}
