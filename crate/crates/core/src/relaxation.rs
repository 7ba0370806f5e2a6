//! Switch-gated relaxation constraints on chaining values.
//!
//! Constraint `R_j` fixes the chaining value of step `j + 4` to a constant
//! `K`. It is attached to the formula through a switching variable `s_j` and
//! the binary clauses `(!s_j | l)` for each of its 32 literals, so assuming
//! `s_j` activates the constraint and assuming `!s_j` neutralizes it.
//! The first four and the last four steps are never constrained, which
//! leaves `Q = k - 8` constraints.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cnf::{Lit, TemplateCnf, Var};
use crate::encoder::{self, substitute_hash, HashValue, VariableMap};
use crate::Error;

/// Steps at each end of the compression that cannot carry a constraint.
pub const UNCONSTRAINED_EDGE: usize = 4;

/// Dobbertin's step set with `K = 0`: steps 13-15, 17-19, 21-23, 25-27.
pub const RHO_DOBBERTIN: &str = "0000000011101110111011100000000";
/// The constraint set of De, Kumarasubramanian and Venkatesan.
pub const RHO_DE: &str = "0000000001101110111011100000000";
/// Constraint sets found by tabu search for MD4-39.
pub const RHO_1: &str = "0000000001101110111011101000000";
pub const RHO_2: &str = "0000000000101110111011101100000";

/// A point of the hypercube `{0,1}^Q`, `Q <= 64`.
///
/// Position `p` (1-based, leftmost first in the text form) selects the
/// constraint on step `p + 4`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchVector {
    bits: u64,
    len: u8,
}

impl SwitchVector {
    pub const MAX_LEN: usize = 64;

    pub fn zeros(len: usize) -> Self {
        assert!((1..=Self::MAX_LEN).contains(&len));
        SwitchVector { bits: 0, len: len as u8 }
    }

    /// Bit `p - 1` of `bits` is position `p`; higher bits are ignored.
    pub fn from_mask(len: usize, bits: u64) -> Self {
        let mut v = Self::zeros(len);
        v.bits = bits & v.full_mask();
        v
    }

    fn full_mask(&self) -> u64 {
        if self.len == 64 {
            u64::MAX
        } else {
            (1u64 << self.len) - 1
        }
    }

    pub fn mask(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Value at 1-based `position`.
    pub fn get(&self, position: usize) -> bool {
        assert!((1..=self.len()).contains(&position));
        self.bits >> (position - 1) & 1 == 1
    }

    pub fn set(&mut self, position: usize, value: bool) {
        assert!((1..=self.len()).contains(&position));
        let m = 1u64 << (position - 1);
        if value {
            self.bits |= m;
        } else {
            self.bits &= !m;
        }
    }

    pub fn flipped(&self, position: usize) -> Self {
        let mut v = *self;
        v.set(position, !self.get(position));
        v
    }

    pub fn complement(&self) -> Self {
        Self::from_mask(self.len(), !self.bits)
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    /// 1-based positions set to 1, ascending.
    pub fn active_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.len()).filter(|&p| self.get(p))
    }

    /// Steps whose constraints are active.
    pub fn active_steps(&self) -> Vec<usize> {
        self.active_positions().map(|p| p + UNCONSTRAINED_EDGE).collect()
    }

    /// Hamming-radius-1 neighbourhood, ordered by flipped position.
    pub fn neighbors(&self) -> impl Iterator<Item = SwitchVector> + '_ {
        (1..=self.len()).map(|p| self.flipped(p))
    }

    /// Parses a 0/1 string of exactly `expected` characters.
    pub fn parse(text: &str, expected: usize) -> Result<Self, Error> {
        let v: SwitchVector = text.parse()?;
        if v.len() != expected {
            return Err(Error::SwitchLength {
                expected,
                found: v.len(),
            });
        }
        Ok(v)
    }
}

impl FromStr for SwitchVector {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self, Error> {
        let text = text.trim();
        let n = text.chars().count();
        if n == 0 || n > Self::MAX_LEN {
            return Err(Error::SwitchCapacity);
        }
        let mut v = Self::zeros(n);
        for (i, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => v.set(i + 1, true),
                other => return Err(Error::SwitchAlphabet(other)),
            }
        }
        Ok(v)
    }
}

impl fmt::Display for SwitchVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 1..=self.len() {
            f.write_str(if self.get(p) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SwitchVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SwitchVector({self})")
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for SwitchVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for SwitchVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a printed switch vector, checking its length against `q`.
pub fn parse_lambda(text: &str, q: usize) -> Result<SwitchVector, Error> {
    SwitchVector::parse(text, q)
}

/// Steps activated by `lambda`.
pub fn active_steps(lambda: &SwitchVector) -> Vec<usize> {
    lambda.active_steps()
}

/// One constraint `Q[step] = K` and its switching variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxationConstraint {
    /// 1-based index `j`.
    pub index: usize,
    pub step: usize,
    /// 32 literals fixing the step's chaining bits, LSB first.
    pub literals: Vec<Lit>,
    pub switch_var: Var,
}

/// The binary clauses `(!s_j | l)` of every constraint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GatedClauses(pub Vec<[Lit; 2]>);

impl GatedClauses {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends the clauses to `cnf`, allocating the switching variables.
    pub fn install(&self, cnf: &mut TemplateCnf) {
        let top = self.0.iter().flatten().map(|l| l.var().0).max().unwrap_or(0);
        while cnf.num_vars() < top {
            cnf.new_var();
        }
        for c in &self.0 {
            cnf.add_clause(c);
        }
    }
}

/// Builds the constraints `Q[j + 4] = constant` for `j = 1..=k-8`.
///
/// Switching variables are numbered after the last variable of `cnf` and
/// recorded in the returned map.
pub fn build_constraint_family(
    cnf: &TemplateCnf,
    vars: &VariableMap,
    constant: u32,
) -> Result<(Vec<RelaxationConstraint>, GatedClauses, VariableMap), Error> {
    let k = vars.steps();
    let min = 2 * UNCONSTRAINED_EDGE + 1;
    if k < min {
        return Err(Error::StepCount {
            k,
            min,
            max: crate::md4::MAX_STEPS,
        });
    }
    let q = k - 2 * UNCONSTRAINED_EDGE;
    let mut map = vars.clone();
    map.switch_vars = (1..=q as u32).map(|j| Var(cnf.num_vars() + j)).collect();
    let mut constraints = Vec::with_capacity(q);
    let mut gates = Vec::with_capacity(32 * q);
    for j in 1..=q {
        let step = j + UNCONSTRAINED_EDGE;
        let s = map.switch_vars[j - 1];
        let literals: Vec<Lit> = map
            .chaining(step)
            .iter()
            .enumerate()
            .map(|(bit, v)| v.lit((constant >> bit) & 1 == 1))
            .collect();
        gates.extend(literals.iter().map(|&l| [s.neg(), l]));
        constraints.push(RelaxationConstraint {
            index: j,
            step,
            literals,
            switch_var: s,
        });
    }
    Ok((constraints, GatedClauses(gates), map))
}

/// Assigns every switching variable: `s_j` for 1-bits, `!s_j` for 0-bits.
pub fn lambda_to_assumptions(lambda: &SwitchVector, vars: &VariableMap) -> Result<Vec<Lit>, Error> {
    if lambda.len() != vars.switch_vars.len() {
        return Err(Error::SwitchLength {
            expected: vars.switch_vars.len(),
            found: lambda.len(),
        });
    }
    Ok(vars
        .switch_vars
        .iter()
        .enumerate()
        .map(|(i, s)| s.lit(lambda.get(i + 1)))
        .collect())
}

/// MD4-k template with every relaxation constraint installed behind its
/// switching variable.
#[derive(Debug, Clone)]
pub struct RelaxedTemplate {
    /// Template clauses followed by the gated clauses.
    pub cnf: TemplateCnf,
    pub vars: VariableMap,
    pub constraints: Vec<RelaxationConstraint>,
    pub constant: u32,
}

impl RelaxedTemplate {
    pub fn new(k: usize, constant: u32) -> Result<Self, Error> {
        let (mut cnf, vars) = encoder::encode_template(k)?;
        let (constraints, gates, vars) = build_constraint_family(&cnf, &vars, constant)?;
        gates.install(&mut cnf);
        Ok(RelaxedTemplate {
            cnf,
            vars,
            constraints,
            constant,
        })
    }

    pub fn steps(&self) -> usize {
        self.vars.steps()
    }

    /// Number of constraints, `Q`.
    pub fn q(&self) -> usize {
        self.constraints.len()
    }

    /// The gated template with the outputs pinned to `hash`.
    pub fn with_hash(&self, hash: &HashValue) -> TemplateCnf {
        substitute_hash(&self.cnf, &self.vars, hash)
    }

    pub fn parse_lambda(&self, text: &str) -> Result<SwitchVector, Error> {
        parse_lambda(text, self.q())
    }

    pub fn assumptions(&self, lambda: &SwitchVector) -> Result<Vec<Lit>, Error> {
        lambda_to_assumptions(lambda, &self.vars)
    }

    /// `true` iff the trace has value `K` at every step active in `lambda`.
    pub fn trace_respects(&self, trace: &crate::ChainingTrace, lambda: &SwitchVector) -> bool {
        lambda
            .active_steps()
            .iter()
            .all(|&s| trace.step(s) == self.constant)
    }
}

/// Renders a list of steps as `{13,14,15}`.
pub fn format_steps(steps: &[usize]) -> String {
    let mut out = String::from("{");
    for (i, s) in steps.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out += &alloc::format!("{s}");
    }
    out.push('}');
    out
}
