//! Search driver: scores points with `mu`, screens them with short solver
//! runs, logs every evaluation as line-delimited JSON and summarises the run.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use md4sat_core::relaxation::{RelaxedTemplate, SwitchVector};
use md4sat_core::tabu::{self, Evaluation, PointStatus, Record, SearchControl, TabuSearch};
use md4sat_core::{Digest, MuEvaluator, MuOutcome, TemplateCnf};
use serde::{Deserialize, Serialize};

use crate::solver::{SolveStatus, SolverSession};
use crate::Error;

/// How a point was classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Scored,
    /// The solver proved the point unsatisfiable within the screening limit.
    Screened,
    /// Unit propagation alone hit a conflict; the solver was not called.
    Conflict,
}

/// One line of the search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub lambda: SwitchVector,
    /// Absent on propagation conflicts.
    pub mu: Option<u32>,
    pub status: PointClass,
    /// Screening verdict, absent when the solver was not run.
    pub solver: Option<SolveStatus>,
    /// Seconds spent on this point.
    pub wall_time: f64,
}

impl LogEntry {
    pub fn point_status(&self) -> PointStatus {
        match (self.status, self.mu) {
            (PointClass::Scored, Some(mu)) => PointStatus::Scored(mu),
            _ => PointStatus::ScreenedOut,
        }
    }
}

/// Reads a search log. Used to resume a run: logged points are replayed
/// instead of being evaluated again, which reproduces the trajectory.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, Error> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Point evaluator: `mu` by unit propagation, then an optional screening
/// solve for scored points.
pub struct Screener<'a> {
    mu: MuEvaluator<'a>,
    template: &'a RelaxedTemplate,
    session: Option<Box<dyn SolverSession>>,
    screen_limit: Duration,
    log: Option<BufWriter<fs::File>>,
    replay: HashMap<SwitchVector, LogEntry>,
    entries: Vec<LogEntry>,
}

impl<'a> Screener<'a> {
    /// `cnf` is the hash-substituted template. Screening is disabled when
    /// `session` is `None`.
    pub fn new(
        template: &'a RelaxedTemplate,
        cnf: &'a TemplateCnf,
        session: Option<Box<dyn SolverSession>>,
        screen_limit: Duration,
    ) -> Self {
        Screener {
            mu: MuEvaluator::new(cnf, &template.vars),
            template,
            session,
            screen_limit,
            log: None,
            replay: HashMap::new(),
            entries: Vec::new(),
        }
    }

    /// Appends every evaluation to `path`.
    pub fn log_to(&mut self, path: &Path) -> Result<(), Error> {
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        self.log = Some(BufWriter::new(f));
        Ok(())
    }

    /// Answers points found in `entries` from the log instead of
    /// re-evaluating them.
    pub fn replay(&mut self, entries: impl IntoIterator<Item = LogEntry>) {
        self.replay
            .extend(entries.into_iter().map(|e| (e.lambda, e)));
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    fn classify(&mut self, lambda: &SwitchVector) -> Result<LogEntry, Error> {
        let start = Instant::now();
        let (mu, status, solver) = match self.mu.mu(lambda)? {
            MuOutcome::Conflict => (None, PointClass::Conflict, None),
            MuOutcome::Score(mu) => match self.session.as_mut() {
                None => (Some(mu), PointClass::Scored, None),
                Some(session) => {
                    let assumptions = self.template.assumptions(lambda)?;
                    let v = session.solve(&assumptions, self.screen_limit)?;
                    let class = if v.status == SolveStatus::Unsat {
                        PointClass::Screened
                    } else {
                        PointClass::Scored
                    };
                    (Some(mu), class, Some(v.status))
                }
            },
        };
        Ok(LogEntry {
            lambda: *lambda,
            mu,
            status,
            solver,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

impl tabu::PointEvaluator for Screener<'_> {
    type Error = Error;

    fn evaluate(&mut self, lambda: &SwitchVector) -> Result<PointStatus, Error> {
        let entry = match self.replay.remove(lambda) {
            Some(e) => e,
            None => {
                let e = self.classify(lambda)?;
                if let Some(log) = self.log.as_mut() {
                    let line = serde_json::to_string(&e)?;
                    writeln!(log, "{line}")
                        .and_then(|_| log.flush())
                        .map_err(|err| Error::Io {
                            path: "search log".into(),
                            source: err,
                        })?;
                }
                e
            }
        };
        let status = entry.point_status();
        self.entries.push(entry);
        Ok(status)
    }
}

/// Wall-clock limit for the whole search, with optional progress output.
pub struct Deadline {
    start: Instant,
    limit: Option<Duration>,
    progress: Option<Box<dyn FnMut(&Evaluation, f64)>>,
}

impl Deadline {
    pub fn new(limit: Option<Duration>) -> Self {
        Deadline {
            start: Instant::now(),
            limit,
            progress: None,
        }
    }

    pub fn with_progress(mut self, f: impl FnMut(&Evaluation, f64) + 'static) -> Self {
        self.progress = Some(Box::new(f));
        self
    }
}

impl SearchControl for Deadline {
    fn time_exceeded(&mut self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn elapsed_secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_evaluated(&mut self, event: &Evaluation) {
        let t = self.elapsed_secs();
        if let Some(p) = self.progress.as_mut() {
            p(event, t);
        }
    }
}

/// Summary of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub hash: String,
    pub start: SwitchVector,
    pub best: Option<SwitchVector>,
    pub mu_best: Option<u32>,
    pub evaluations: u64,
    pub scored: u64,
    pub screened: u64,
    pub conflicts: u64,
    /// Record points over evaluations.
    pub record_fraction: f64,
    /// Number of scored points per `mu` value.
    pub mu_histogram: BTreeMap<u32, u64>,
    pub records: Vec<Record>,
    pub shortlist_window: [u32; 2],
    pub shortlist: Vec<SwitchVector>,
    /// `true` if the search ran out of centres rather than time.
    pub exhausted: bool,
    pub elapsed_secs: f64,
}

impl SearchReport {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let opt = |x: Option<u32>| x.map_or("-".to_string(), |v| v.to_string());
        let _ = writeln!(s, "hash           {}", self.hash);
        let _ = writeln!(s, "start          {}", self.start);
        let _ = writeln!(
            s,
            "best           {} (mu = {})",
            self.best.map_or("-".to_string(), |b| b.to_string()),
            opt(self.mu_best)
        );
        let _ = writeln!(
            s,
            "evaluations    {} ({} scored, {} screened, {} conflicts)",
            self.evaluations, self.scored, self.screened, self.conflicts
        );
        let _ = writeln!(
            s,
            "records        {} ({:.2}% of evaluations)",
            self.records.len(),
            100.0 * self.record_fraction
        );
        let _ = writeln!(
            s,
            "stopped        {} after {:.1} s",
            if self.exhausted { "no centre left" } else { "time limit" },
            self.elapsed_secs
        );
        let _ = writeln!(s, "mu histogram");
        for (mu, n) in &self.mu_histogram {
            let _ = writeln!(s, "  {mu:>4}  {n}");
        }
        let _ = writeln!(
            s,
            "shortlist      mu in [{}, {}]: {} point(s)",
            self.shortlist_window[0],
            self.shortlist_window[1],
            self.shortlist.len()
        );
        for p in &self.shortlist {
            let _ = writeln!(s, "  {p}");
        }
        s
    }
}

/// Runs the tabu search and summarises it.
pub fn run(
    hash: &Digest,
    start: SwitchVector,
    screener: &mut Screener<'_>,
    control: &mut Deadline,
    window: [u32; 2],
) -> Result<SearchReport, Error> {
    let q = start.len();
    let mut search = TabuSearch::new(q);
    let outcome = search.run(start, screener, control)?;
    let entries = screener.entries();
    let count = |c: PointClass| entries.iter().filter(|e| e.status == c).count() as u64;
    let mut mu_histogram = BTreeMap::new();
    for e in entries.iter().filter(|e| e.status == PointClass::Scored) {
        if let Some(mu) = e.mu {
            *mu_histogram.entry(mu).or_insert(0) += 1;
        }
    }
    let evaluations = outcome.evaluations;
    Ok(SearchReport {
        hash: hash.to_hex(),
        start,
        best: outcome.best,
        mu_best: outcome.mu_best,
        evaluations,
        scored: count(PointClass::Scored),
        screened: count(PointClass::Screened),
        conflicts: count(PointClass::Conflict),
        record_fraction: if evaluations == 0 {
            0.0
        } else {
            outcome.records.len() as f64 / evaluations as f64
        },
        mu_histogram,
        shortlist: tabu::shortlist(&outcome.records, window[0], window[1]),
        records: outcome.records,
        shortlist_window: window,
        exhausted: outcome.exhausted,
        elapsed_secs: control.elapsed_secs(),
    })
}
