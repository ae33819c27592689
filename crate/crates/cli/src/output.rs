//! Output files, CSV schemas and run manifests.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use collusionlab::estimate::{
    BoundCheckRow, EstimateResult, ExperimentConfig, HarnessPoint, PointSummary,
};
use collusionlab::report::fmt_f64;
use collusionlab::voting::TieBreakPolicy;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const ESTIMATE_HEADER: [&str; 15] = [
    "rule",
    "k",
    "n",
    "m",
    "c",
    "tiebreak",
    "culture",
    "trials",
    "proof",
    "manipulable",
    "unknown",
    "fraction",
    "ci_low",
    "ci_high",
    "seed",
];

pub const BOUND_HEADER: [&str; 11] = [
    "bound_id", "n", "m", "c", "k", "lambda", "tiebreak", "mode", "value", "bound", "verdict",
];

pub const HARNESS_HEADER: [&str; 11] = [
    "rule",
    "k",
    "n",
    "m",
    "c",
    "tiebreak",
    "profiles",
    "disagreements",
    "false_proof",
    "unknown",
    "matrix",
];

fn tie_name(tb: &TieBreakPolicy) -> String {
    match tb {
        TieBreakPolicy::FixedOrder(o) => format!("fixed:{o:?}"),
        other => other.name().to_string(),
    }
}

pub fn estimate_record(cfg: &ExperimentConfig, r: &EstimateResult) -> Vec<String> {
    vec![
        cfg.rule.name().to_string(),
        cfg.rule.k().map(|k| k.to_string()).unwrap_or_default(),
        cfg.n.to_string(),
        cfg.rule.m().to_string(),
        cfg.c.to_string(),
        tie_name(&cfg.tie_break),
        cfg.culture.name().to_string(),
        r.trials.to_string(),
        r.proof_count.to_string(),
        r.manipulable_count.to_string(),
        r.unknown_count.to_string(),
        fmt_f64(r.fraction_proof),
        fmt_f64(r.ci_low),
        fmt_f64(r.ci_high),
        r.seed.to_string(),
    ]
}

pub fn point_label(cfg: &ExperimentConfig) -> String {
    format!("{} n={} m={}", cfg.rule.name(), cfg.n, cfg.rule.m())
}

pub fn bound_record(r: &BoundCheckRow) -> Vec<String> {
    let s = &r.case.spec;
    vec![
        s.bound_id.name().to_string(),
        s.n.to_string(),
        s.m.to_string(),
        s.c.to_string(),
        s.k.to_string(),
        fmt_f64(s.lambda),
        tie_name(&r.case.tie_break),
        r.case.mode.name().to_string(),
        r.value.clone(),
        r.bound.clone(),
        r.verdict.name().to_string(),
    ]
}

pub fn harness_record(p: &HarnessPoint, s: &PointSummary) -> Vec<String> {
    let matrix: Vec<String> = s.matrix.iter().map(|(k, v)| format!("{k}={v}")).collect();
    vec![
        p.rule.name().to_string(),
        p.rule.k().map(|k| k.to_string()).unwrap_or_default(),
        p.n.to_string(),
        p.rule.m().to_string(),
        p.c.to_string(),
        tie_name(&p.tie_break),
        s.profiles.to_string(),
        s.disagreements.to_string(),
        s.false_proof.to_string(),
        s.unknown.to_string(),
        matrix.join(";"),
    ]
}

pub fn csv_err(e: csv::Error) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

enum Sink {
    Stdout(io::Stdout),
    File(BufWriter<File>),
}

/// The primary output of a command: a file (with a manifest beside it) or
/// standard output.
pub struct Output {
    sink: Sink,
    path: Option<PathBuf>,
    extra: Vec<PathBuf>,
    started: String,
}

#[derive(Serialize)]
struct Digest_ {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a T,
    seed: Option<u64>,
    started: String,
    finished: String,
    outputs: Vec<Digest_>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Output {
    pub fn open(path: Option<&Path>) -> io::Result<Output> {
        let sink = match path {
            Some(p) => Sink::File(BufWriter::new(File::create(p)?)),
            None => Sink::Stdout(io::stdout()),
        };
        Ok(Output {
            sink,
            path: path.map(Path::to_path_buf),
            extra: Vec::new(),
            started: now(),
        })
    }

    pub fn csv(&mut self) -> csv::Writer<&mut Output> {
        csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(self)
    }

    /// Another file written by the command, digested into the manifest.
    pub fn also(&mut self, path: &Path) {
        self.extra.push(path.to_path_buf());
    }

    pub fn finish<T: Serialize>(
        mut self,
        command: &str,
        config: &T,
        seed: Option<u64>,
    ) -> Result<(), Failure> {
        self.flush()?;
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        let mut outputs = Vec::new();
        for p in std::iter::once(&path).chain(&self.extra) {
            let bytes = std::fs::read(p)?;
            outputs.push(Digest_ {
                path: p
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            tool: "collusionlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seed,
            started: self.started.clone(),
            finished: now(),
            outputs,
        };
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(path.with_file_name(name), text + "\n")?;
        Ok(())
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match &mut self.sink {
            Sink::Stdout(s) => s.write(buf),
            Sink::File(f) => f.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.sink {
            Sink::Stdout(s) => s.flush(),
            Sink::File(f) => f.flush(),
        }
    }
}
