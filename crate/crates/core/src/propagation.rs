//! Unit propagation with two watched literals, and the `mu` objective.
//!
//! A [`Propagator`] borrows an immutable clause database and keeps its own
//! assignment, trail and watch state, so several engines (one per thread)
//! can share one formula. Unit clauses of the formula are propagated once at
//! the base level; each closure query pushes its assumptions on top and
//! backtracks afterwards.

use alloc::vec;
use alloc::vec::Vec;

use crate::cnf::{Lit, TemplateCnf, Var};
use crate::encoder::VariableMap;
use crate::relaxation::{lambda_to_assumptions, SwitchVector};
use crate::Error;

const UNASSIGNED: i8 = 0;

/// Fixpoint of unit propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationResult {
    /// Every assigned literal, sorted by variable. On conflict this is the
    /// partial assignment reached when the conflict was found.
    pub forced: Vec<Lit>,
    pub conflict: bool,
}

impl PropagationResult {
    /// Number of forced literals over the input variables.
    pub fn mu(&self, vars: &VariableMap) -> usize {
        self.forced.iter().filter(|l| vars.is_input(l.var())).count()
    }

    pub fn contains(&self, lit: Lit) -> bool {
        self.forced.binary_search_by_key(&lit.var(), |l| l.var()).is_ok_and(|i| self.forced[i] == lit)
    }
}

/// Two-watched-literal propagation engine over a borrowed formula.
pub struct Propagator<'a> {
    cnf: &'a TemplateCnf,
    values: Vec<i8>,
    trail: Vec<Lit>,
    head: usize,
    watches: Vec<Vec<u32>>,
    watch_pos: Vec<[u32; 2]>,
    base_len: usize,
    base_conflict: bool,
}

impl<'a> Propagator<'a> {
    /// Sets up watches and propagates the unit clauses of `cnf`.
    pub fn new(cnf: &'a TemplateCnf) -> Self {
        let n = cnf.num_vars() as usize;
        let mut p = Propagator {
            cnf,
            values: vec![UNASSIGNED; n],
            trail: Vec::new(),
            head: 0,
            watches: vec![Vec::new(); 2 * n],
            watch_pos: vec![[0, 0]; cnf.num_clauses()],
            base_len: 0,
            base_conflict: false,
        };
        let mut units = Vec::new();
        for (ci, clause) in cnf.clauses().enumerate() {
            let first = clause[0];
            match clause.iter().position(|&l| l != first) {
                Some(second) => {
                    p.watch_pos[ci] = [0, second as u32];
                    p.watches[first.code()].push(ci as u32);
                    p.watches[clause[second].code()].push(ci as u32);
                }
                None => units.push(first),
            }
        }
        for l in units {
            if !p.enqueue(l) {
                p.base_conflict = true;
            }
        }
        if !p.base_conflict {
            p.base_conflict = !p.propagate();
        }
        p.base_len = p.trail.len();
        p
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// `true` if the formula's unit clauses alone propagate to a conflict.
    pub fn base_conflict(&self) -> bool {
        self.base_conflict
    }

    #[inline]
    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.values[l.var().index()];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn value(&self, var: Var) -> Option<bool> {
        match self.values[var.index()] {
            UNASSIGNED => None,
            v => Some(v > 0),
        }
    }

    /// Assigns `l`; `false` if it is already false.
    fn enqueue(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            1 => true,
            -1 => false,
            _ => {
                self.values[l.var().index()] = if l.is_positive() { 1 } else { -1 };
                self.trail.push(l);
                true
            }
        }
    }

    /// Propagates the trail to fixpoint; `false` on conflict.
    fn propagate(&mut self) -> bool {
        let cnf = self.cnf;
        while self.head < self.trail.len() {
            let falsified = !self.trail[self.head];
            self.head += 1;
            let mut ws = core::mem::take(&mut self.watches[falsified.code()]);
            let mut i = 0;
            let mut ok = true;
            while i < ws.len() {
                let ci = ws[i] as usize;
                let clause = cnf.clause(ci);
                let [p0, p1] = self.watch_pos[ci];
                let (slot, other_pos) = if clause[p0 as usize] == falsified {
                    (0, p1)
                } else {
                    (1, p0)
                };
                let other = clause[other_pos as usize];
                if self.lit_value(other) == 1 {
                    i += 1;
                    continue;
                }
                let replacement = clause.iter().enumerate().position(|(k, &l)| {
                    k as u32 != p0 && k as u32 != p1 && l != other && self.lit_value(l) != -1
                });
                if let Some(k) = replacement {
                    self.watch_pos[ci][slot] = k as u32;
                    self.watches[clause[k].code()].push(ci as u32);
                    ws.swap_remove(i);
                    continue;
                }
                if !self.enqueue(other) {
                    ok = false;
                    break;
                }
                i += 1;
            }
            self.watches[falsified.code()] = ws;
            if !ok {
                return false;
            }
        }
        true
    }

    fn backtrack(&mut self) {
        for l in self.trail.drain(self.base_len..) {
            self.values[l.var().index()] = UNASSIGNED;
        }
        self.head = self.base_len;
    }

    fn check_assumptions(&self, assumptions: &[Lit]) -> Result<(), Error> {
        let mut seen: Vec<i8> = vec![0; self.values.len()];
        for &l in assumptions {
            let idx = l.var().index();
            if idx >= seen.len() {
                return Err(Error::UnknownVariable(l));
            }
            let sign = if l.is_positive() { 1 } else { -1 };
            if seen[idx] == -sign {
                return Err(Error::ComplementaryAssumptions(l));
            }
            seen[idx] = sign;
        }
        Ok(())
    }

    /// Runs `f` on the engine state after propagating `assumptions`, then
    /// restores the base level. `f` receives the conflict flag.
    pub fn with_assumptions<R>(
        &mut self,
        assumptions: &[Lit],
        f: impl FnOnce(&Self, bool) -> R,
    ) -> Result<R, Error> {
        self.check_assumptions(assumptions)?;
        let mut conflict = self.base_conflict;
        if !conflict {
            for &l in assumptions {
                if !self.enqueue(l) {
                    conflict = true;
                    break;
                }
            }
        }
        if !conflict {
            conflict = !self.propagate();
        }
        let r = f(self, conflict);
        self.backtrack();
        Ok(r)
    }

    /// The unit-propagation closure of the formula plus `assumptions`.
    pub fn closure(&mut self, assumptions: &[Lit]) -> Result<PropagationResult, Error> {
        self.with_assumptions(assumptions, |p, conflict| {
            let mut forced = p.trail.clone();
            forced.sort_by_key(|l| l.var());
            PropagationResult { forced, conflict }
        })
    }

    /// Number of variables in `vars` assigned after propagating `assumptions`.
    pub fn count_assigned(&mut self, assumptions: &[Lit], vars: &[Var]) -> Result<(usize, bool), Error> {
        self.with_assumptions(assumptions, |p, conflict| {
            let n = vars
                .iter()
                .filter(|v| p.values[v.index()] != UNASSIGNED)
                .count();
            (n, conflict)
        })
    }
}

/// One-shot closure of `cnf` under `assumptions`.
pub fn up_closure(cnf: &TemplateCnf, assumptions: &[Lit]) -> Result<PropagationResult, Error> {
    Propagator::new(cnf).closure(assumptions)
}

/// Result of evaluating the objective at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuOutcome {
    Score(u32),
    /// Propagation hit a conflict; the point cannot be scored.
    Conflict,
}

impl MuOutcome {
    pub fn score(self) -> Option<u32> {
        match self {
            MuOutcome::Score(s) => Some(s),
            MuOutcome::Conflict => None,
        }
    }
}

/// Computes `mu(lambda)`: the number of input variables fixed by unit
/// propagation on the hash-substituted, gated template with every switching
/// variable assigned from `lambda`.
pub struct MuEvaluator<'a> {
    engine: Propagator<'a>,
    vars: &'a VariableMap,
}

impl<'a> MuEvaluator<'a> {
    /// `cnf` must be the gated template with the hash units already added.
    pub fn new(cnf: &'a TemplateCnf, vars: &'a VariableMap) -> Self {
        MuEvaluator {
            engine: Propagator::new(cnf),
            vars,
        }
    }

    pub fn q(&self) -> usize {
        self.vars.switch_vars.len()
    }

    pub fn mu(&mut self, lambda: &SwitchVector) -> Result<MuOutcome, Error> {
        let assumptions = lambda_to_assumptions(lambda, self.vars)?;
        let (n, conflict) = self
            .engine
            .count_assigned(&assumptions, &self.vars.input_vars)?;
        Ok(if conflict {
            MuOutcome::Conflict
        } else {
            MuOutcome::Score(n as u32)
        })
    }

    /// Full closure at `lambda`, for inspection.
    pub fn closure(&mut self, lambda: &SwitchVector) -> Result<PropagationResult, Error> {
        let assumptions = lambda_to_assumptions(lambda, self.vars)?;
        self.engine.closure(&assumptions)
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

    #[test]
    fn empty_formula_forces_assumption() {
        let f = TemplateCnf::new(1, 0);
        let r = up_closure(&f, &lits(&[1])).unwrap();
        assert_eq!(r.forced, lits(&[1]));
        assert!(!r.conflict);
    }

    #[test]
    fn chain_propagation() {
        let f = cnf(3, &[&[-1, 2], &[-2, 3]]);
        let r = up_closure(&f, &lits(&[1])).unwrap();
        assert_eq!(r.forced, lits(&[1, 2, 3]));
    }

    #[test]
    fn conflict_detected() {
        let f = cnf(2, &[&[-1, 2], &[-1, -2]]);
        assert!(up_closure(&f, &lits(&[1])).unwrap().conflict);
        let g = cnf(1, &[&[1], &[-1]]);
        let p = Propagator::new(&g);
        assert!(p.base_conflict());
    }

    #[test]
    fn complementary_assumptions_rejected() {
        let f = TemplateCnf::new(2, 0);
        assert_eq!(
            up_closure(&f, &lits(&[1, 2, -1])),
            Err(Error::ComplementaryAssumptions(Lit::from_dimacs(-1)))
        );
        assert!(up_closure(&f, &lits(&[3])).is_err());
    }

    #[test]
    fn duplicate_literals_still_propagate() {
        let f = cnf(2, &[&[1, 1, 2]]);
        let r = up_closure(&f, &lits(&[-2])).unwrap();
        assert_eq!(r.forced, lits(&[1, -2]));
        let g = cnf(1, &[&[1, 1]]);
        assert_eq!(up_closure(&g, &[]).unwrap().forced, lits(&[1]));
    }

    #[test]
    fn engine_is_reusable() {
        let f = cnf(4, &[&[-1, 2], &[-3, 4], &[1, 3]]);
        let mut p = Propagator::new(&f);
        let a = p.closure(&lits(&[1])).unwrap();
        let b = p.closure(&lits(&[-1])).unwrap();
        let a2 = p.closure(&lits(&[1])).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b.forced, lits(&[-1, 3, 4]));
    }
}
