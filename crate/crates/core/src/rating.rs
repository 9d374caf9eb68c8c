//! Pair serving and judgment recording for human raters.
//!
//! Judgments are appended to a JSON-lines log, one record per line, and
//! synced to disk before they are acknowledged. The log is the only
//! persistent state: reopening a service over an existing log restores
//! per-operator history and id allocation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elo::{Comparison, Outcome};

/// One line of the judgment log.
pub type JudgmentRecord = Comparison;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("service unavailable: {0}")]
    Unavailable(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("log i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Probability that a request replays one of the operator's earlier pairs.
    pub p_repeat: f64,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            p_repeat: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairAssignment {
    pub comparison_id: String,
    pub left: String,
    pub right: String,
    pub repeat_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ack {
    pub comparison_id: String,
    pub operator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Replay {
    pub records: Vec<JudgmentRecord>,
    pub errors: Vec<LineError>,
}

/// Parses a judgment log. Malformed lines are reported with 1-based line
/// numbers; valid records come back in file order. A missing file is an
/// empty log.
pub fn replay_log(path: &Path) -> std::io::Result<Replay> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Replay::default()),
        Err(e) => return Err(e),
    };
    let mut replay = Replay::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JudgmentRecord>(&line) {
            Ok(r) if r.left != r.right => replay.records.push(r),
            Ok(_) => replay.errors.push(LineError {
                line: i + 1,
                message: "left and right image are the same".into(),
            }),
            Err(e) => replay.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(replay)
}

/// Writes records as a fresh log (used by the simulator).
pub fn write_log(path: &Path, records: &[JudgmentRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    out.get_ref().sync_all()
}

/// Append-only writer. Earlier bytes are never rewritten.
#[derive(Debug)]
pub struct JudgmentLog {
    path: PathBuf,
    file: File,
}

impl JudgmentLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_owned(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and syncs it to disk.
    pub fn append(&mut self, record: &JudgmentRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressStats {
    pub total: usize,
    pub per_operator: BTreeMap<String, usize>,
    pub per_image: BTreeMap<String, usize>,
    pub per_image_mean: f64,
    pub per_image_min: usize,
    pub per_image_max: usize,
}

/// Judgment counts per operator and per image (each judgment counts for
/// both of its images). Images without judgments count as zero.
pub fn progress_from(records: &[JudgmentRecord], images: &[String]) -> ProgressStats {
    let mut per_image: BTreeMap<String, usize> = images.iter().map(|i| (i.clone(), 0)).collect();
    let mut per_operator = BTreeMap::new();
    for r in records {
        *per_operator.entry(r.operator_id.clone()).or_insert(0) += 1;
        *per_image.entry(r.left.clone()).or_insert(0) += 1;
        *per_image.entry(r.right.clone()).or_insert(0) += 1;
    }
    let counts: Vec<usize> = per_image.values().copied().collect();
    let (mean, min, max) = if counts.is_empty() {
        (0.0, 0, 0)
    } else {
        (
            counts.iter().sum::<usize>() as f64 / counts.len() as f64,
            *counts.iter().min().unwrap(),
            *counts.iter().max().unwrap(),
        )
    };
    ProgressStats {
        total: records.len(),
        per_operator,
        per_image,
        per_image_mean: mean,
        per_image_min: min,
        per_image_max: max,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingPair {
    comparison_id: String,
    left: String,
    right: String,
    repeat_of: Option<String>,
}

#[derive(Debug)]
pub struct SessionState {
    pub operator_id: String,
    pub served_pairs: u64,
    pending: Option<PendingPair>,
    rng: ChaCha8Rng,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

type Clock = Box<dyn Fn() -> i64 + Send + Sync>;

fn system_clock() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Serves random pairs and records judgments for any number of operators.
pub struct RatingService {
    images: Vec<String>,
    config: ServiceConfig,
    log: JudgmentLog,
    records: Vec<JudgmentRecord>,
    known_ids: HashSet<String>,
    /// Indices into `records` of each operator's non-repeat judgments.
    history: HashMap<String, Vec<usize>>,
    sessions: HashMap<String, SessionState>,
    pending_owner: HashMap<String, String>,
    next_seq: u64,
    last_timestamp: i64,
    clock: Clock,
}

impl std::fmt::Debug for RatingService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RatingService")
            .field("images", &self.images.len())
            .field("records", &self.records.len())
            .field("log", &self.log.path())
            .finish()
    }
}

impl RatingService {
    /// Opens (or creates) the log at `log_path` and restores state from it.
    /// Returns the service and any malformed log lines that were skipped.
    pub fn open(
        images: Vec<String>,
        log_path: &Path,
        config: ServiceConfig,
    ) -> Result<(Self, Vec<LineError>)> {
        if !(0.0..=1.0).contains(&config.p_repeat) {
            return Err(ServiceError::InvalidArgument(format!(
                "p_repeat must lie in [0, 1], got {}",
                config.p_repeat
            )));
        }
        let mut images = images;
        images.sort();
        images.dedup();
        let replay = replay_log(log_path)?;
        let log = JudgmentLog::open(log_path)?;
        let mut svc = Self {
            images,
            config,
            log,
            records: Vec::new(),
            known_ids: HashSet::new(),
            history: HashMap::new(),
            sessions: HashMap::new(),
            pending_owner: HashMap::new(),
            next_seq: 1,
            last_timestamp: 0,
            clock: Box::new(system_clock),
        };
        for r in replay.records {
            svc.remember(r);
        }
        Ok((svc, replay.errors))
    }

    /// Replaces the wall clock, e.g. with a deterministic counter in tests.
    pub fn with_clock(mut self, clock: impl Fn() -> i64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn images(&self) -> &[String] {
        &self.images
    }

    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    pub fn session(&self, operator_id: &str) -> Option<&SessionState> {
        self.sessions.get(operator_id)
    }

    fn remember(&mut self, r: JudgmentRecord) {
        if let Some(n) = r.id.strip_prefix('c').and_then(|s| s.parse::<u64>().ok()) {
            self.next_seq = self.next_seq.max(n + 1);
        }
        self.last_timestamp = self.last_timestamp.max(r.timestamp_ms);
        self.known_ids.insert(r.id.clone());
        if r.repeat_of.is_none() {
            self.history
                .entry(r.operator_id.clone())
                .or_default()
                .push(self.records.len());
        }
        self.records.push(r);
    }

    fn allocate_id(&mut self) -> String {
        loop {
            let id = format!("c{:07}", self.next_seq);
            self.next_seq += 1;
            if !self.known_ids.contains(&id) && !self.pending_owner.contains_key(&id) {
                return id;
            }
        }
    }

    /// Draws the next pair for `operator_id`, replacing any pair the
    /// operator has not yet judged.
    pub fn next_pair(&mut self, operator_id: &str) -> Result<PairAssignment> {
        if self.images.len() < 2 {
            return Err(ServiceError::Unavailable(format!(
                "dataset has {} image(s), need at least 2",
                self.images.len()
            )));
        }
        if operator_id.trim().is_empty() {
            return Err(ServiceError::InvalidArgument("operator id is empty".into()));
        }
        let comparison_id = self.allocate_id();
        let seed = self.config.seed;
        let session = self
            .sessions
            .entry(operator_id.to_owned())
            .or_insert_with(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(fnv1a(operator_id));
                SessionState {
                    operator_id: operator_id.to_owned(),
                    served_pairs: 0,
                    pending: None,
                    rng,
                }
            });

        let past = self.history.get(operator_id).map(Vec::as_slice).unwrap_or(&[]);
        let replay = !past.is_empty()
            && self.config.p_repeat > 0.0
            && session.rng.random::<f64>() < self.config.p_repeat;
        let (a, b, repeat_of) = if replay {
            let original = &self.records[past[session.rng.random_range(0..past.len())]];
            (original.left.clone(), original.right.clone(), Some(original.id.clone()))
        } else {
            let n = self.images.len();
            let i = session.rng.random_range(0..n);
            let mut j = session.rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (self.images[i].clone(), self.images[j].clone(), None)
        };
        let (left, right) = if replay && session.rng.random::<bool>() { (b, a) } else { (a, b) };

        if let Some(old) = session.pending.take() {
            self.pending_owner.remove(&old.comparison_id);
        }
        session.pending = Some(PendingPair {
            comparison_id: comparison_id.clone(),
            left: left.clone(),
            right: right.clone(),
            repeat_of: repeat_of.clone(),
        });
        session.served_pairs += 1;
        self.pending_owner
            .insert(comparison_id.clone(), operator_id.to_owned());
        Ok(PairAssignment {
            comparison_id,
            left,
            right,
            repeat_of,
        })
    }

    /// Records the verdict for a pending pair. The record is on disk before
    /// this returns.
    pub fn record_judgment(&mut self, comparison_id: &str, outcome: Outcome) -> Result<Ack> {
        let Some(operator) = self.pending_owner.get(comparison_id).cloned() else {
            return Err(ServiceError::Conflict(format!(
                "comparison {comparison_id} is not pending"
            )));
        };
        let session = self
            .sessions
            .get_mut(&operator)
            .expect("pending pair belongs to a session");
        let pending = session.pending.clone().expect("owner has a pending pair");
        let timestamp_ms = (self.clock)().max(self.last_timestamp);
        let record = JudgmentRecord {
            id: pending.comparison_id,
            operator_id: operator.clone(),
            left: pending.left,
            right: pending.right,
            outcome,
            timestamp_ms,
            repeat_of: pending.repeat_of,
        };
        self.log.append(&record)?;
        session.pending = None;
        self.pending_owner.remove(comparison_id);
        self.remember(record);
        Ok(Ack {
            comparison_id: comparison_id.to_owned(),
            operator_id: operator,
        })
    }

    pub fn progress_stats(&self) -> ProgressStats {
        progress_from(&self.records, &self.images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i:03}")).collect()
    }

    fn service(n: usize, p_repeat: f64, dir: &Path) -> RatingService {
        let cfg = ServiceConfig { p_repeat, seed: 5 };
        let (svc, errs) = RatingService::open(ids(n), &dir.join("log.jsonl"), cfg).unwrap();
        assert!(errs.is_empty());
        let counter = std::sync::atomic::AtomicI64::new(1_000);
        svc.with_clock(move || counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst))
    }

    #[test]
    fn two_images_always_same_pair() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(2, 0.0, dir.path());
        let mut sides = HashSet::new();
        for _ in 0..40 {
            let p = svc.next_pair("ann").unwrap();
            assert_ne!(p.left, p.right);
            sides.insert(p.left.clone());
            svc.record_judgment(&p.comparison_id, Outcome::Neutral).unwrap();
        }
        assert_eq!(sides.len(), 2, "left/right placement is randomized");
    }

    #[test]
    fn too_small_dataset_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(1, 0.0, dir.path());
        assert!(matches!(svc.next_pair("ann"), Err(ServiceError::Unavailable(_))));
    }

    #[test]
    fn forced_repeat_after_first_judgment() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(50, 1.0, dir.path());
        let first = svc.next_pair("ann").unwrap();
        assert_eq!(first.repeat_of, None);
        svc.record_judgment(&first.comparison_id, Outcome::LeftMoreComplex).unwrap();
        let second = svc.next_pair("ann").unwrap();
        assert_eq!(second.repeat_of.as_deref(), Some(first.comparison_id.as_str()));
        let a: HashSet<_> = [&first.left, &first.right].into_iter().collect();
        let b: HashSet<_> = [&second.left, &second.right].into_iter().collect();
        assert_eq!(a, b);
        // another operator has no history to repeat
        assert_eq!(svc.next_pair("bob").unwrap().repeat_of, None);
    }

    #[test]
    fn duplicate_and_stale_submissions_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(10, 0.0, dir.path());
        let p = svc.next_pair("ann").unwrap();
        svc.record_judgment(&p.comparison_id, Outcome::Neutral).unwrap();
        assert!(matches!(
            svc.record_judgment(&p.comparison_id, Outcome::Neutral),
            Err(ServiceError::Conflict(_))
        ));
        let stale = svc.next_pair("ann").unwrap();
        let fresh = svc.next_pair("ann").unwrap();
        assert!(matches!(
            svc.record_judgment(&stale.comparison_id, Outcome::Neutral),
            Err(ServiceError::Conflict(_))
        ));
        svc.record_judgment(&fresh.comparison_id, Outcome::RightMoreComplex).unwrap();
        let replay = replay_log(svc.log_path()).unwrap();
        assert_eq!(replay.records.len(), 2);
        assert_eq!(replay.records[0].outcome, Outcome::Neutral);
    }

    #[test]
    fn log_round_trip_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(8, 0.3, dir.path());
        for k in 0..25 {
            let op = if k % 2 == 0 { "ann" } else { "bob" };
            let p = svc.next_pair(op).unwrap();
            svc.record_judgment(&p.comparison_id, Outcome::LeftMoreComplex).unwrap();
        }
        let in_memory = svc.records().to_vec();
        let path = svc.log_path().to_owned();
        drop(svc);
        assert_eq!(replay_log(&path).unwrap().records, in_memory);
        assert!(in_memory.windows(2).all(|w| w[0].timestamp_ms <= w[1].timestamp_ms));

        let (mut again, _) = RatingService::open(ids(8), &path, ServiceConfig::default()).unwrap();
        assert_eq!(again.records(), &in_memory[..]);
        let p = again.next_pair("ann").unwrap();
        assert!(in_memory.iter().all(|r| r.id != p.comparison_id));
    }

    #[test]
    fn corrupted_line_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut lines = Vec::new();
        for i in 0..100 {
            let r = JudgmentRecord {
                id: format!("c{i}"),
                operator_id: "x".into(),
                left: "a".into(),
                right: "b".into(),
                outcome: Outcome::Neutral,
                timestamp_ms: i,
                repeat_of: None,
            };
            lines.push(if i == 42 { "{\"comparison_id\": oops".to_string() } else { serde_json::to_string(&r).unwrap() });
        }
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let replay = replay_log(&path).unwrap();
        assert_eq!(replay.records.len(), 99);
        assert_eq!(replay.errors.len(), 1);
        assert_eq!(replay.errors[0].line, 43);
    }

    #[test]
    fn empty_and_missing_logs() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(replay_log(&dir.path().join("none.jsonl")).unwrap(), Replay::default());
        let p = dir.path().join("empty.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(replay_log(&p).unwrap().records.is_empty());
    }

    #[test]
    fn progress_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(5, 0.0, dir.path());
        let s = svc.progress_stats();
        assert_eq!((s.total, s.per_image_min, s.per_image_max), (0, 0, 0));
        assert_eq!(s.per_image_mean, 0.0);
        let p = svc.next_pair("ann").unwrap();
        svc.record_judgment(&p.comparison_id, Outcome::Neutral).unwrap();
        let s = svc.progress_stats();
        assert_eq!(s.total, 1);
        assert_eq!(s.per_image.values().filter(|&&c| c == 1).count(), 2);
        assert_eq!(s.per_operator["ann"], 1);
    }

    #[test]
    fn reproducible_pair_sequence() {
        let a_dir = tempfile::tempdir().unwrap();
        let b_dir = tempfile::tempdir().unwrap();
        let mut a = service(30, 0.0, a_dir.path());
        let mut b = service(30, 0.0, b_dir.path());
        for _ in 0..20 {
            assert_eq!(a.next_pair("ann").unwrap(), b.next_pair("ann").unwrap());
        }
    }
}
