//! DIMACS CNF files and the JSON variable-map sidecar.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use md4sat_core::{Lit, TemplateCnf, VariableMap};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Writes `cnf` with `assumptions` appended as unit clauses.
///
/// The output depends only on the clause list, so identical formulas give
/// byte-identical files.
pub fn write_dimacs<W: Write>(out: W, cnf: &TemplateCnf, assumptions: &[Lit]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "p cnf {} {}",
        cnf.num_vars(),
        cnf.num_clauses() + assumptions.len()
    )?;
    for clause in cnf.clauses() {
        for l in clause {
            write!(out, "{l} ")?;
        }
        writeln!(out, "0")?;
    }
    for a in assumptions {
        writeln!(out, "{a} 0")?;
    }
    out.flush()
}

pub fn export_dimacs(path: &Path, cnf: &TemplateCnf, assumptions: &[Lit]) -> Result<(), Error> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dimacs(f, cnf, assumptions).map_err(|e| Error::io(path, e))
}

/// Parses a DIMACS CNF. Comment lines are skipped and clauses may span
/// lines. The header's variable count is kept even if no clause uses the
/// last variables.
pub fn parse_dimacs<R: BufRead>(input: R) -> Result<TemplateCnf, Error> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Dimacs(format!("read error: {e}")))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') || t.starts_with('%') {
            continue;
        }
        if t.starts_with('p') {
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::Dimacs(format!("line {}: bad header {t:?}", n + 1)));
            }
            let vars = parts[2]
                .parse()
                .map_err(|_| Error::Dimacs(format!("line {}: bad variable count", n + 1)))?;
            let cls = parts[3]
                .parse()
                .map_err(|_| Error::Dimacs(format!("line {}: bad clause count", n + 1)))?;
            header = Some((vars, cls));
            continue;
        }
        if header.is_none() {
            return Err(Error::Dimacs(format!("line {}: clause before header", n + 1)));
        }
        for tok in t.split_whitespace() {
            let x: i32 = tok
                .parse()
                .map_err(|_| Error::Dimacs(format!("line {}: bad literal {tok:?}", n + 1)))?;
            if x == 0 {
                if current.is_empty() {
                    return Err(Error::Dimacs(format!("line {}: empty clause", n + 1)));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(Lit::from_dimacs(x));
            }
        }
    }
    let (vars, expected) = header.ok_or_else(|| Error::Dimacs("missing header".into()))?;
    if !current.is_empty() {
        return Err(Error::Dimacs("last clause is not terminated by 0".into()));
    }
    if clauses.len() != expected {
        return Err(Error::Dimacs(format!(
            "header announces {expected} clauses, found {}",
            clauses.len()
        )));
    }
    if let Some(l) = clauses.iter().flatten().find(|l| l.var().0 > vars) {
        return Err(Error::Dimacs(format!("literal {l} exceeds {vars} variables")));
    }
    Ok(TemplateCnf::from_clauses(vars, 0, clauses.iter().map(|c| c.as_slice())))
}

pub fn import_dimacs(path: &Path) -> Result<TemplateCnf, Error> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dimacs(io::BufReader::new(f))
}

/// Contents of the `.map.json` file written next to an exported CNF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMapFile {
    pub steps: usize,
    pub constant: u32,
    #[serde(flatten)]
    pub vars: VariableMap,
}

pub fn write_variable_map(path: &Path, map: &VariableMapFile) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(map)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_variable_map(path: &Path) -> Result<VariableMapFile, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
