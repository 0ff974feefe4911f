//! Job runner behind the `lorenz-renorm` binary.
//!
//! A job is a JSON object with a `"command"` field and command-specific
//! parameters. Results go to an output directory as JSON and CSV files,
//! each carrying the fully resolved job.

mod jobs;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use lorenz_renorm::error::Error;

pub use jobs::Job;

/// Exit code for usage errors: unreadable or invalid job specs.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for numerical failures of a valid job.
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(Error),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(s) => write!(f, "usage error: {s}"),
            Failure::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Domain(_) => EXIT_DOMAIN,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(s) => Failure::Usage(s),
            e => Failure::Domain(e),
        }
    }
}

/// Command-line overrides of the job file.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// A parsed job with the settings shared by all commands.
#[derive(Clone, Debug, Serialize)]
pub struct JobSpec {
    #[serde(flatten)]
    pub job: Job,
    pub seed: u64,
    pub threads: usize,
}

impl JobSpec {
    pub fn parse(text: &str, opts: &Options) -> Result<JobSpec, Failure> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Failure::Usage(format!("job spec is not valid JSON: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Failure::Usage("job spec must be a JSON object".into()))?;
        let take_u64 = |obj: &mut serde_json::Map<String, Value>, key: &str| -> Result<Option<u64>, Failure> {
            match obj.remove(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_u64()
                    .map(Some)
                    .ok_or_else(|| Failure::Usage(format!("{key} must be a non-negative integer"))),
            }
        };
        let seed = opts.seed.or(take_u64(obj, "seed")?).unwrap_or(0);
        let spec_threads = take_u64(obj, "threads")?.map(|t| t as usize);
        let threads = opts.threads.or(spec_threads).unwrap_or(1);
        if threads == 0 {
            return Err(Failure::Usage("threads must be positive".into()));
        }
        let job: Job = serde_json::from_value(value).map_err(|e| Failure::Usage(format!("invalid job: {e}")))?;
        job.validate()?;
        Ok(JobSpec { job, seed, threads })
    }

    pub fn resolved(&self) -> Value {
        serde_json::to_value(self).expect("job specs serialize")
    }
}

/// Collects artifacts in memory and writes them atomically.
pub struct Artifacts {
    dir: PathBuf,
    config: Value,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(dir: &Path, config: Value) -> Self {
        Artifacts { dir: dir.to_path_buf(), config, files: Vec::new() }
    }

    /// JSON object `{"config": …, <fields of body>}`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) {
        let mut obj = serde_json::Map::new();
        obj.insert("config".into(), self.config.clone());
        match serde_json::to_value(body).expect("results serialize") {
            Value::Object(fields) => obj.extend(fields),
            other => {
                obj.insert("result".into(), other);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj)).expect("results serialize");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    /// CSV with the resolved config as a leading `#` comment line.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
        let mut bytes = format!("# config: {}\n", self.config).into_bytes();
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        self.files.push((name.to_string(), bytes));
    }

    fn commit(self) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = self.dir.join(&name);
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<Value>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Input(_) => "input",
        Error::DegenerateInterval { .. } => "degenerate-interval",
        Error::CriticalCollision { .. } => "critical-collision",
        Error::NotRenormalizable { .. } => "not-renormalizable",
        Error::Inconsistency { .. } => "inconsistency",
        Error::Representation(_) => "representation",
        Error::CombinatoricsLost { .. } => "combinatorics-lost",
        Error::NoConvergence { .. } => "no-convergence",
        Error::SearchFailure { .. } => "search-failure",
        Error::InsufficientData(_) => "insufficient-data",
        Error::DegenerateMap(_) => "degenerate-map",
        Error::NotNice(_) => "not-nice",
    }
}

fn diagnostics(e: &Error) -> Option<Value> {
    match e {
        Error::NotRenormalizable { diagnostics, .. } => serde_json::to_value(diagnostics).ok(),
        Error::NoConvergence { iterations, last, trace } => {
            Some(serde_json::json!({ "iterations": iterations, "last": last, "trace": trace }))
        }
        Error::CombinatoricsLost { source, .. } => diagnostics(source),
        _ => None,
    }
}

/// Run a parsed job, writing artifacts to `out`.
///
/// A numerical failure writes `error.json` with a diagnostic before
/// returning the error.
pub fn run(spec: &JobSpec, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {} threads: {e}", spec.threads)))?;
    let mut artifacts = Artifacts::new(out, spec.resolved());
    log::info!("running {} job", spec.job.command());
    let result = pool.install(|| spec.job.run(spec.seed, &mut artifacts));
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write to {}: {e}", out.display()));
    match result {
        Ok(()) => artifacts.commit().map_err(io),
        Err(Failure::Domain(e)) => {
            let mut failed = Artifacts::new(out, spec.resolved());
            failed.json(
                "error.json",
                &ErrorReport { error: e.to_string(), kind: error_kind(&e), diagnostics: diagnostics(&e) },
            );
            failed.commit().map_err(io)?;
            Err(Failure::Domain(e))
        }
        Err(e) => Err(e),
    }
}

/// Read, parse and run a job file.
pub fn run_file(spec_path: &Path, out: &Path, opts: &Options) -> Result<Vec<PathBuf>, Failure> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec = JobSpec::parse(&text, opts)?;
    run(&spec, out)
}
