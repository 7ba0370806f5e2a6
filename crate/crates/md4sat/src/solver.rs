//! One interface over three SAT backends: CaDiCaL or MiniSat 2.2 linked
//! in-process, or any external solver that reads a DIMACS file and answers in
//! the SAT competition output format.
//!
//! Every SAT answer is checked clause by clause against the formula and the
//! assumptions before it is returned.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use md4sat_core::{Lit, TemplateCnf};
use serde::{Deserialize, Serialize};

use crate::dimacs::write_dimacs;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolveStatus {
    Sat,
    Unsat,
    /// Time limit reached before a decision.
    Unknown,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Sat => "SAT",
            SolveStatus::Unsat => "UNSAT",
            SolveStatus::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverVerdict {
    pub status: SolveStatus,
    /// Total assignment, `model[v - 1]` for variable `v`; present iff SAT.
    pub model: Option<Vec<bool>>,
    pub wall_time: Duration,
    pub solver: String,
}

/// Which solver to run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum Backend {
    /// CaDiCaL, linked into this binary.
    #[default]
    Embedded,
    /// MiniSat 2.2 with variable elimination, linked into this binary.
    Minisat,
    /// `solver_path <cnf>`; assumptions become unit clauses in the file.
    Subprocess { solver_path: PathBuf },
}

/// A formula loaded into a solver, queried under different assumptions.
pub trait SolverSession: Send {
    fn solve(&mut self, assumptions: &[Lit], limit: Duration) -> Result<SolverVerdict, Error>;
    fn identity(&self) -> String;
}

impl Backend {
    pub fn open(&self, cnf: &TemplateCnf) -> Result<Box<dyn SolverSession>, Error> {
        Ok(match self {
            Backend::Embedded => Box::new(EmbeddedSession::new(cnf)),
            Backend::Minisat => Box::new(MinisatSession { cnf: cnf.clone() }),
            Backend::Subprocess { solver_path } => Box::new(SubprocessSession {
                path: solver_path.clone(),
                cnf: cnf.clone(),
                dir: tempfile::tempdir().map_err(|e| Error::Adapter(format!("temp dir: {e}")))?,
            }),
        })
    }

    /// One-shot solve.
    pub fn solve(&self, cnf: &TemplateCnf, assumptions: &[Lit], limit: Duration) -> Result<SolverVerdict, Error> {
        self.open(cnf)?.solve(assumptions, limit)
    }
}

/// Checks `model` against every clause and assumption.
pub fn check_model(cnf: &TemplateCnf, assumptions: &[Lit], model: &[bool]) -> Result<(), Error> {
    if model.len() < cnf.num_vars() as usize {
        return Err(Error::Adapter(format!(
            "model covers {} of {} variables",
            model.len(),
            cnf.num_vars()
        )));
    }
    if let Some(i) = cnf.first_falsified(model) {
        return Err(Error::Adapter(format!(
            "model falsifies clause {i}: {:?}",
            cnf.clause(i)
        )));
    }
    if let Some(a) = assumptions
        .iter()
        .find(|a| !model.get(a.var().index()).is_some_and(|&v| a.eval(v)))
    {
        return Err(Error::Adapter(format!("model violates assumption {a}")));
    }
    Ok(())
}

fn check_limit(limit: Duration) -> Result<(), Error> {
    if limit.is_zero() {
        Err(Error::Config("time limit must be positive".into()))
    } else {
        Ok(())
    }
}

pub struct EmbeddedSession {
    solver: cadical::Solver<cadical::Timeout>,
    cnf: TemplateCnf,
}

impl EmbeddedSession {
    pub fn new(cnf: &TemplateCnf) -> Self {
        let mut solver: cadical::Solver<cadical::Timeout> = cadical::Solver::new();
        solver.reserve(cnf.num_vars() as i32);
        for c in cnf.clauses() {
            solver.add_clause(c.iter().map(|l| l.to_dimacs()));
        }
        EmbeddedSession {
            solver,
            cnf: cnf.clone(),
        }
    }
}

impl SolverSession for EmbeddedSession {
    fn solve(&mut self, assumptions: &[Lit], limit: Duration) -> Result<SolverVerdict, Error> {
        check_limit(limit)?;
        self.solver
            .set_callbacks(Some(cadical::Timeout::new(limit.as_secs_f32())));
        let start = Instant::now();
        let answer = self
            .solver
            .solve_with(assumptions.iter().map(|l| l.to_dimacs()));
        let wall_time = start.elapsed();
        let (status, model) = match answer {
            Some(true) => {
                let model: Vec<bool> = (1..=self.cnf.num_vars() as i32)
                    .map(|v| self.solver.value(v).unwrap_or(false))
                    .collect();
                check_model(&self.cnf, assumptions, &model)?;
                (SolveStatus::Sat, Some(model))
            }
            Some(false) => (SolveStatus::Unsat, None),
            None => (SolveStatus::Unknown, None),
        };
        Ok(SolverVerdict {
            status,
            model,
            wall_time,
            solver: self.identity(),
        })
    }

    fn identity(&self) -> String {
        self.solver.signature().to_string()
    }
}

/// MiniSat 2.2 (`SimpSolver`), run the way its stand-alone binary runs a
/// DIMACS file: each query gets a fresh solver in which the assumptions are
/// unit clauses, followed by variable elimination and a single solve.
pub struct MinisatSession {
    cnf: TemplateCnf,
}

/// Owns a raw MiniSat handle.
struct MinisatHandle(*mut minisat::sys::minisat_solver);

// The handle is only shared with the watchdog, which calls
// `minisat_interrupt`; that sets a flag the search loop polls.
unsafe impl Send for MinisatHandle {}
unsafe impl Sync for MinisatHandle {}

impl Drop for MinisatHandle {
    fn drop(&mut self) {
        unsafe { minisat::sys::minisat_delete(self.0) }
    }
}

impl MinisatSession {
    pub fn new(cnf: &TemplateCnf) -> Self {
        MinisatSession { cnf: cnf.clone() }
    }

    fn lit(l: Lit) -> minisat::sys::minisat_Lit {
        let v = l.var().index() as i32;
        unsafe { minisat::sys::minisat_mkLit_args(v, i32::from(!l.is_positive())) }
    }

    /// Loads formula and units; `false` if that alone is contradictory.
    fn load(&self, h: &MinisatHandle, units: &[Lit]) -> bool {
        use minisat::sys::*;
        unsafe {
            minisat_set_verbosity(h.0, 0);
            for _ in 0..self.cnf.num_vars() {
                minisat_newVar(h.0);
            }
            let mut ok = true;
            let unit_clauses = units.iter().map(std::slice::from_ref);
            for c in self.cnf.clauses().chain(unit_clauses) {
                minisat_addClause_begin(h.0);
                for &l in c {
                    minisat_addClause_addLit(h.0, Self::lit(l));
                }
                ok &= minisat_addClause_commit(h.0) != 0;
            }
            ok && minisat_eliminate(h.0, 1) != 0
        }
    }
}

impl SolverSession for MinisatSession {
    fn solve(&mut self, assumptions: &[Lit], limit: Duration) -> Result<SolverVerdict, Error> {
        use minisat::sys::*;
        check_limit(limit)?;
        let start = Instant::now();
        let raw = unsafe { minisat_new() };
        if raw.is_null() {
            return Err(Error::Adapter("minisat_new returned null".into()));
        }
        let handle = MinisatHandle(raw);
        let answer = if !self.load(&handle, assumptions) {
            unsafe { minisat_get_l_False() }
        } else {
            let remaining = limit.saturating_sub(start.elapsed());
            let (done, wait) = mpsc::channel::<()>();
            thread::scope(|scope| {
                let h = &handle;
                scope.spawn(move || {
                    if let Err(mpsc::RecvTimeoutError::Timeout) = wait.recv_timeout(remaining) {
                        unsafe { minisat_interrupt(h.0) }
                    }
                });
                let answer = unsafe { minisat_limited_solve(h.0, 0, std::ptr::null_mut()) };
                let _ = done.send(());
                answer
            })
        };
        let wall_time = start.elapsed();
        let (status, model) = unsafe {
            if answer == minisat_get_l_True() {
                let model: Vec<bool> = (0..self.cnf.num_vars() as i32)
                    .map(|v| minisat_modelValue_Var(handle.0, v) == minisat_get_l_True())
                    .collect();
                check_model(&self.cnf, assumptions, &model)?;
                (SolveStatus::Sat, Some(model))
            } else if answer == minisat_get_l_False() {
                (SolveStatus::Unsat, None)
            } else {
                (SolveStatus::Unknown, None)
            }
        };
        Ok(SolverVerdict {
            status,
            model,
            wall_time,
            solver: self.identity(),
        })
    }

    fn identity(&self) -> String {
        "minisat-2.2".into()
    }
}

struct SubprocessSession {
    path: PathBuf,
    cnf: TemplateCnf,
    dir: tempfile::TempDir,
}

impl SolverSession for SubprocessSession {
    fn solve(&mut self, assumptions: &[Lit], limit: Duration) -> Result<SolverVerdict, Error> {
        check_limit(limit)?;
        let cnf_path = self.dir.path().join("instance.cnf");
        let out_path = self.dir.path().join("solver.out");
        let adapter = |what: &str, e: std::io::Error| Error::Adapter(format!("{what}: {e}"));
        {
            let f = fs::File::create(&cnf_path).map_err(|e| adapter("write instance", e))?;
            write_dimacs(f, &self.cnf, assumptions).map_err(|e| adapter("write instance", e))?;
        }
        let out = fs::File::create(&out_path).map_err(|e| adapter("create output file", e))?;
        let start = Instant::now();
        let mut child = Command::new(&self.path)
            .arg(&cnf_path)
            .stdin(Stdio::null())
            .stdout(out)
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| adapter(&format!("spawn {}", self.path.display()), e))?;
        let exit = loop {
            if let Some(status) = child.try_wait().map_err(|e| adapter("wait", e))? {
                break Some(status);
            }
            if start.elapsed() >= limit {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let wall_time = start.elapsed();
        let unknown = SolverVerdict {
            status: SolveStatus::Unknown,
            model: None,
            wall_time,
            solver: self.identity(),
        };
        let Some(exit) = exit else {
            return Ok(unknown);
        };
        let text = fs::read_to_string(&out_path).map_err(|e| adapter("read output", e))?;
        let parsed = parse_solver_output(&text).map_err(|e| match exit.code() {
            Some(10) | Some(20) | Some(0) => e,
            _ => Error::Adapter(format!("solver exited with {exit} and {e}")),
        })?;
        let model = match parsed.status {
            SolveStatus::Sat => {
                let mut model = parsed
                    .model
                    .ok_or_else(|| Error::Adapter("SAT answer without a model".into()))?;
                model.resize(model.len().max(self.cnf.num_vars() as usize), false);
                check_model(&self.cnf, assumptions, &model)?;
                Some(model)
            }
            _ => None,
        };
        Ok(SolverVerdict {
            status: parsed.status,
            model,
            ..unknown
        })
    }

    fn identity(&self) -> String {
        self.path.display().to_string()
    }
}

/// Status line and value lines of a solver's standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedOutput {
    pub status: SolveStatus,
    /// Values of the variables mentioned in `v` lines; unmentioned
    /// variables below the highest one default to `false`.
    pub model: Option<Vec<bool>>,
}

/// Parses `s SATISFIABLE` / `s UNSATISFIABLE` / `s UNKNOWN` plus `v` lines.
pub fn parse_solver_output(text: &str) -> Result<ParsedOutput, Error> {
    let mut status = None;
    let mut values: Vec<Option<bool>> = Vec::new();
    let mut saw_values = false;
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("s ") {
            let s = match rest.trim() {
                "SATISFIABLE" => SolveStatus::Sat,
                "UNSATISFIABLE" => SolveStatus::Unsat,
                "UNKNOWN" | "INDETERMINATE" => SolveStatus::Unknown,
                other => return Err(Error::Adapter(format!("unknown status line {other:?}"))),
            };
            if status.replace(s).is_some_and(|old| old != s) {
                return Err(Error::Adapter("conflicting status lines".into()));
            }
        } else if let Some(rest) = line.strip_prefix("v ").or(if line == "v" { Some("") } else { None }) {
            saw_values = true;
            for tok in rest.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| Error::Adapter(format!("bad value token {tok:?}")))?;
                if x == 0 {
                    continue;
                }
                let idx = (x.unsigned_abs() - 1) as usize;
                if values.len() <= idx {
                    values.resize(idx + 1, None);
                }
                values[idx] = Some(x > 0);
            }
        }
    }
    let status = status.ok_or_else(|| Error::Adapter("no status line in solver output".into()))?;
    let model = (status == SolveStatus::Sat && saw_values)
        .then(|| values.into_iter().map(|v| v.unwrap_or(false)).collect());
    Ok(ParsedOutput { status, model })
}

/// Prints a verdict in the competition output format.
pub fn write_competition_output<W: Write>(mut out: W, verdict: &SolverVerdict) -> std::io::Result<()> {
    match verdict.status {
        SolveStatus::Sat => {
            writeln!(out, "s SATISFIABLE")?;
            let model = verdict.model.as_deref().unwrap_or(&[]);
            for chunk in model.chunks(16).enumerate() {
                let (i, vals) = chunk;
                write!(out, "v")?;
                for (j, &b) in vals.iter().enumerate() {
                    let v = (i * 16 + j + 1) as i64;
                    write!(out, " {}", if b { v } else { -v })?;
                }
                writeln!(out)?;
            }
            writeln!(out, "v 0")
        }
        SolveStatus::Unsat => writeln!(out, "s UNSATISFIABLE"),
        SolveStatus::Unknown => writeln!(out, "s UNKNOWN"),
    }
}

/// Conventional process exit code for a status.
pub fn exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Sat => 10,
        SolveStatus::Unsat => 20,
        SolveStatus::Unknown => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(xs: &[i32]) -> Vec<Lit> {
        xs.iter().map(|&x| Lit::from_dimacs(x)).collect()
    }

    fn cnf(n: u32, clauses: &[&[i32]]) -> TemplateCnf {
        let cs: Vec<Vec<Lit>> = clauses.iter().map(|c| lits(c)).collect();
        TemplateCnf::from_clauses(n, 0, cs.iter().map(|c| c.as_slice()))
    }

    const SEC: Duration = Duration::from_secs(5);

    #[test]
    fn single_unit_is_sat() {
        let v = Backend::Embedded.solve(&cnf(1, &[&[1]]), &[], SEC).unwrap();
        assert_eq!(v.status, SolveStatus::Sat);
        assert_eq!(v.model, Some(vec![true]));
    }

    #[test]
    fn contradiction_is_unsat() {
        let v = Backend::Embedded.solve(&cnf(1, &[&[1], &[-1]]), &[], SEC).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
        assert!(v.model.is_none());
    }

    #[test]
    fn assumptions_are_respected() {
        let f = cnf(2, &[&[1, 2]]);
        let mut s = Backend::Embedded.open(&f).unwrap();
        let v = s.solve(&lits(&[-1]), SEC).unwrap();
        assert_eq!(v.model, Some(vec![false, true]));
        let v = s.solve(&lits(&[-1, -2]), SEC).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
        // learnt state does not leak between calls
        let v = s.solve(&lits(&[-2]), SEC).unwrap();
        assert_eq!(v.model, Some(vec![true, false]));
    }

    #[test]
    fn minisat_agrees_on_small_formulas() {
        let f = cnf(3, &[&[1, 2], &[-1, 3], &[-2, 3]]);
        let mut s = Backend::Minisat.open(&f).unwrap();
        assert_eq!(s.solve(&[], SEC).unwrap().status, SolveStatus::Sat);
        assert_eq!(s.solve(&lits(&[-3]), SEC).unwrap().status, SolveStatus::Unsat);
        let v = s.solve(&lits(&[-1]), SEC).unwrap();
        let m = v.model.unwrap();
        assert!(!m[0] && m[1] && m[2]);
        let v = Backend::Minisat.solve(&cnf(1, &[&[1], &[-1]]), &[], SEC).unwrap();
        assert_eq!(v.status, SolveStatus::Unsat);
    }

    #[test]
    fn zero_limit_rejected() {
        assert!(Backend::Embedded
            .solve(&cnf(1, &[&[1]]), &[], Duration::ZERO)
            .is_err());
    }

    #[test]
    fn model_checker_catches_bad_models() {
        let f = cnf(2, &[&[1, 2], &[-1]]);
        assert!(check_model(&f, &[], &[false, true]).is_ok());
        assert!(check_model(&f, &[], &[true, true]).is_err());
        assert!(check_model(&f, &lits(&[-2]), &[false, true]).is_err());
        assert!(check_model(&f, &[], &[false]).is_err());
    }

    #[test]
    fn parses_status_lines() {
        let p = parse_solver_output("c hi\ns UNSATISFIABLE\n").unwrap();
        assert_eq!(p.status, SolveStatus::Unsat);
        let p = parse_solver_output("s SATISFIABLE\nv 1 -2 3 0\n").unwrap();
        assert_eq!(p.model, Some(vec![true, false, true]));
        let p = parse_solver_output("s SATISFIABLE\nv 1 -2\nv 3 0\n").unwrap();
        assert_eq!(p.model, Some(vec![true, false, true]));
        assert!(parse_solver_output("c nothing\n").is_err());
        assert!(parse_solver_output("s MAYBE\n").is_err());
        assert!(parse_solver_output("s SATISFIABLE\nv 1 x 0\n").is_err());
    }

    #[test]
    fn competition_output_round_trips() {
        let v = SolverVerdict {
            status: SolveStatus::Sat,
            model: Some((0..40).map(|i| i % 3 == 0).collect()),
            wall_time: Duration::ZERO,
            solver: "x".into(),
        };
        let mut buf = Vec::new();
        write_competition_output(&mut buf, &v).unwrap();
        let p = parse_solver_output(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(p.model, v.model);
    }
}
