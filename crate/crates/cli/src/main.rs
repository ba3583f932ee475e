use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ted_core::harness::{self, AdaptMode, RunConfig, SweepGrid};
use ted_core::io::{self, FeatureFile, ModelArtifact};
use ted_core::ted::Mode;
use ted_core::Error;

/// Forward-only test-time adaptation of latent features.
#[derive(Parser)]
#[command(name = "ted", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate source train/test and shifted target feature files plus the
    /// source decoder.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the principal subspace on a source file.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Source feature file.
        #[arg(long)]
        source: PathBuf,
        /// Artifact holding the decoder (from `gen`).
        #[arg(long)]
        decoder: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Fit on a seeded random subsample of this many rows.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt every row of a target file and write a CSV report.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// none, ted, qted-v1 or fixed.
        #[arg(long)]
        mode: Option<String>,
        /// Fixed-point format xby, with --mode fixed.
        #[arg(long)]
        fmt: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// CMA-ES iterations.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt over a grid of k, n and modes; one CSV row per cell. Cells
    /// already present in the output file are skipped.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_delimiter = ',')]
        mode: Vec<String>,
        /// Formats xby, or `float` for the unquantized search.
        #[arg(long, value_delimiter = ',')]
        fmt: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute and print the summary of a report CSV.
    Report {
        report: PathBuf,
        /// Also write the summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

impl SearchFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        if let Some(s) = self.sigma0 {
            cfg.sigma0 = s;
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen { common, out } => {
            let cfg = common.load()?;
            let generated = harness::generate(&cfg)?;
            for p in harness::write_generated(&generated, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Fit {
            common,
            source,
            decoder,
            k,
            n,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(k) = k {
                cfg.k = k;
            }
            if n.is_some() {
                cfg.source_n = n;
            }
            let artifact = harness::fit(&read_features(&source)?, &read_artifact(&decoder)?, &cfg)?;
            artifact.write(&out)?;
            println!("{}", out.display());
        }
        Command::Adapt {
            common,
            search,
            artifact,
            target,
            mode,
            fmt,
            k,
            n,
            out,
        } => {
            let mut cfg = common.load()?;
            search.apply(&mut cfg);
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            match (mode, fmt) {
                (Some(m), f) => cfg.mode = AdaptMode::parse(&m, f.as_deref())?,
                (None, Some(f)) => cfg.set("fmt", &f)?,
                (None, None) => {}
            }
            let report = harness::adapt(&read_artifact(&artifact)?, &read_features(&target)?, &cfg)?;
            harness::write_report(&report, &out)?;
            print!("{}", report.summary());
        }
        Command::Sweep {
            common,
            search,
            artifact,
            target,
            mode,
            fmt,
            k,
            n,
            out,
        } => {
            let mut base = common.load()?;
            search.apply(&mut base);
            let grid = SweepGrid {
                ks: if k.is_empty() { vec![base.k] } else { k },
                ns: if n.is_empty() { vec![base.n] } else { n },
                modes: sweep_modes(&base, &mode, &fmt)?,
            };
            let rows = harness::sweep(
                &read_artifact(&artifact)?,
                &read_features(&target)?,
                &base,
                &grid,
                &out,
            )?;
            for r in &rows {
                let acc = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.2}"));
                println!(
                    "k={} n={} mode={} no-adapt={} adapted={}{}",
                    r.k,
                    r.n,
                    r.mode,
                    acc(r.accuracy_noadapt),
                    acc(r.accuracy_adapted),
                    r.error.as_ref().map_or(String::new(), |e| format!(" error: {e}"))
                );
            }
        }
        Command::Report { report, out } => {
            let summary = io::render_summary(&harness::summarize(&report)?);
            print!("{summary}");
            if let Some(out) = out {
                std::fs::write(out, summary)?;
            }
        }
    }
    Ok(())
}

fn sweep_modes(base: &RunConfig, modes: &[String], fmts: &[String]) -> Result<Vec<AdaptMode>, Error> {
    let mut out = Vec::new();
    let xby: Vec<&String> = fmts.iter().filter(|f| f.as_str() != "float").collect();
    let mut push = |m: AdaptMode| out.push(m);
    for m in modes {
        if m == "fixed" {
            if xby.is_empty() {
                return Err(Error::Config("mode fixed requires --fmt".into()));
            }
            for f in &xby {
                push(AdaptMode::Adapt(Mode::Fixed(f.parse()?)));
            }
        } else {
            push(AdaptMode::parse(m, None)?);
        }
    }
    if !modes.iter().any(|m| m == "fixed") {
        for f in fmts {
            push(if f == "float" {
                AdaptMode::Adapt(Mode::Float)
            } else {
                AdaptMode::Adapt(Mode::Fixed(f.parse()?))
            });
        }
    }
    if out.is_empty() {
        out.push(base.mode);
    }
    let mut unique = Vec::with_capacity(out.len());
    for m in out {
        if !unique.contains(&m) {
            unique.push(m);
        }
    }
    Ok(unique)
}

fn read_features(path: &Path) -> Result<FeatureFile, Error> {
    FeatureFile::read(path).map_err(|e| with_path(e, path))
}

fn read_artifact(path: &Path) -> Result<ModelArtifact, Error> {
    ModelArtifact::read(path).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Io(io) => Error::Format(format!("{}: {io}", path.display())),
        other => other,
    }
}
