//! Literals, variables and the flat clause database.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Not;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }

    #[inline]
    pub fn neg(self) -> Lit {
        Lit(-(self.0 as i32))
    }

    #[inline]
    pub fn lit(self, value: bool) -> Lit {
        if value {
            self.pos()
        } else {
            self.neg()
        }
    }
}

/// A literal in DIMACS convention: `v` or `-v`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Lit(i32);

impl Lit {
    /// Panics on `0`.
    #[inline]
    pub fn from_dimacs(value: i32) -> Lit {
        assert!(value != 0, "0 is not a literal");
        Lit(value)
    }

    #[inline]
    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Dense index `2 * (var - 1) + negated`, used for watch lists.
    #[inline]
    pub fn code(self) -> usize {
        (self.var().index() << 1) | (self.0 < 0) as usize
    }

    /// Value of the literal under an assignment of its variable.
    #[inline]
    pub fn eval(self, var_value: bool) -> bool {
        var_value == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A clause database stored as one flat literal array.
///
/// Clauses are never empty and never mention a variable above `num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemplateCnf {
    num_vars: u32,
    steps: usize,
    lits: Vec<Lit>,
    ends: Vec<u32>,
}

impl TemplateCnf {
    /// An empty formula over `num_vars` variables encoding `steps` MD4 steps
    /// (`0` when the formula is not an MD4 encoding).
    pub fn new(num_vars: u32, steps: usize) -> Self {
        TemplateCnf {
            num_vars,
            steps,
            lits: Vec::new(),
            ends: Vec::new(),
        }
    }

    /// Builds a formula from clause slices, growing `num_vars` as needed.
    pub fn from_clauses<'a, I>(num_vars: u32, steps: usize, clauses: I) -> Self
    where
        I: IntoIterator<Item = &'a [Lit]>,
    {
        let mut cnf = TemplateCnf::new(num_vars, steps);
        for c in clauses {
            for l in c {
                cnf.num_vars = cnf.num_vars.max(l.var().0);
            }
            cnf.add_clause(c);
        }
        cnf
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Number of MD4 steps encoded.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_clauses(&self) -> usize {
        self.ends.len()
    }

    pub fn num_literals(&self) -> usize {
        self.lits.len()
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars)
    }

    /// Panics on an empty clause or an out-of-range variable.
    pub fn add_clause(&mut self, clause: &[Lit]) {
        assert!(!clause.is_empty(), "empty clause");
        assert!(
            clause.iter().all(|l| l.var().0 <= self.num_vars),
            "clause {clause:?} exceeds {} variables",
            self.num_vars
        );
        self.lits.extend_from_slice(clause);
        self.ends.push(self.lits.len() as u32);
    }

    pub fn clause(&self, i: usize) -> &[Lit] {
        let start = if i == 0 { 0 } else { self.ends[i - 1] as usize };
        &self.lits[start..self.ends[i] as usize]
    }

    pub fn clauses(&self) -> impl ExactSizeIterator<Item = &[Lit]> + '_ {
        (0..self.ends.len()).map(move |i| self.clause(i))
    }

    /// Appends all clauses of `other`, which must not use more variables.
    pub fn extend(&mut self, other: &TemplateCnf) {
        for c in other.clauses() {
            self.add_clause(c);
        }
    }

    /// `true` iff every clause has a literal true under `model`, where
    /// `model[v - 1]` is the value of variable `v`.
    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        self.first_falsified(model).is_none()
    }

    /// Index of the first clause not satisfied by `model`.
    pub fn first_falsified(&self, model: &[bool]) -> Option<usize> {
        self.clauses().position(|c| {
            !c.iter()
                .any(|l| model.get(l.var().index()).is_some_and(|&v| l.eval(v)))
        })
    }
}
