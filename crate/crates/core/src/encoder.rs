//! Gate-by-gate CNF encoding of MD4-k.
//!
//! The step function is executed symbolically over bits that are either
//! constants or literals. Gates whose inputs are constant are folded, every
//! other gate gets a fresh variable with its full (arc-consistent) clause
//! pattern: parity gates use the complete XOR clause set, carries and the
//! majority function use the six-clause majority pattern, and the choice
//! function uses the six-clause if-then-else pattern. Rotations only rewire
//! bits. Modular additions are ripple-carry adders, so unit propagation can
//! both evaluate and subtract once the low-order bits are known.
//!
//! Variable layout: input bits `1..=512` (bit `j` of word `i` is `32 i + j + 1`),
//! then gate variables in step order, then the 128 output variables.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Not;

use crate::cnf::{Lit, TemplateCnf, Var};
use crate::md4::{self, register_of_step, step_params, ChainingTrace, Digest, MessageBlock, RoundFunction};
use crate::Error;

/// Smallest step count accepted by the encoder.
pub const MIN_ENCODED_STEPS: usize = 5;

/// The 128-bit target of a preimage search.
pub type HashValue = Digest;

/// Names the variables of an encoding by role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariableMap {
    /// 512 ids; position `32 i + j` is bit `j` of message word `i`.
    pub input_vars: Vec<Var>,
    /// 128 ids; position `32 r + j` is bit `j` of digest register `r`.
    pub output_vars: Vec<Var>,
    /// For each step `1..=k`, the 32 ids of its chaining value (LSB first).
    pub chaining_vars: Vec<Vec<Var>>,
    /// Switching variables, one per relaxation constraint.
    pub switch_vars: Vec<Var>,
}

impl VariableMap {
    pub fn is_input(&self, var: Var) -> bool {
        self.input_vars.binary_search(&var).is_ok()
    }

    /// The 32 chaining-value variables of `step` (1-based).
    pub fn chaining(&self, step: usize) -> &[Var] {
        &self.chaining_vars[step - 1]
    }

    pub fn steps(&self) -> usize {
        self.chaining_vars.len()
    }

    /// Reads the message block out of a total assignment.
    pub fn decode_block(&self, model: &[bool]) -> MessageBlock {
        MessageBlock::from_bits(self.input_vars.iter().map(|v| model[v.index()]))
    }

    pub fn decode_digest(&self, model: &[bool]) -> Digest {
        let mut words = [0u32; 4];
        for (p, v) in self.output_vars.iter().enumerate() {
            words[p / 32] |= (model[v.index()] as u32) << (p % 32);
        }
        Digest(words)
    }

    pub fn decode_trace(&self, model: &[bool]) -> ChainingTrace {
        ChainingTrace(
            self.chaining_vars
                .iter()
                .map(|bits| word_from(bits.iter().map(|v| model[v.index()])))
                .collect(),
        )
    }

    /// Unit literals fixing the inputs to `block`.
    pub fn block_literals(&self, block: &MessageBlock) -> Vec<Lit> {
        self.input_vars
            .iter()
            .enumerate()
            .map(|(p, v)| v.lit(block.bit(p)))
            .collect()
    }
}

fn word_from(bits: impl Iterator<Item = bool>) -> u32 {
    bits.enumerate().fold(0, |w, (j, b)| w | ((b as u32) << j))
}

/// A symbolic bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bit {
    Const(bool),
    Lit(Lit),
}

impl Not for Bit {
    type Output = Bit;
    fn not(self) -> Bit {
        match self {
            Bit::Const(b) => Bit::Const(!b),
            Bit::Lit(l) => Bit::Lit(!l),
        }
    }
}

type Word = [Bit; 32];

fn const_word(value: u32) -> Word {
    core::array::from_fn(|j| Bit::Const((value >> j) & 1 == 1))
}

fn rotl(w: &Word, s: u32) -> Word {
    core::array::from_fn(|j| w[(j + 32 - s as usize) % 32])
}

struct Circuit {
    cnf: TemplateCnf,
    claimed: Vec<bool>,
}

impl Circuit {
    fn fresh(&mut self) -> Lit {
        self.cnf.new_var().pos()
    }

    fn clause(&mut self, lits: &[Lit]) {
        self.cnf.add_clause(lits);
    }

    /// `x1 ^ ... ^ xn`, cancelling constants and repeated variables.
    fn xor(&mut self, inputs: &[Bit]) -> Bit {
        let mut parity = false;
        let mut vars: Vec<Var> = Vec::with_capacity(inputs.len());
        for b in inputs {
            match *b {
                Bit::Const(c) => parity ^= c,
                Bit::Lit(l) => {
                    parity ^= !l.is_positive();
                    if let Some(i) = vars.iter().position(|&v| v == l.var()) {
                        vars.swap_remove(i);
                    } else {
                        vars.push(l.var());
                    }
                }
            }
        }
        match vars.len() {
            0 => Bit::Const(parity),
            1 => Bit::Lit(vars[0].lit(!parity)),
            _ => {
                // g = v1 ^ ... ^ vn ^ parity, i.e. v1 ^ ... ^ vn ^ g = parity.
                let g = self.fresh();
                let mut all: Vec<Lit> = vars.iter().map(|v| v.pos()).collect();
                all.push(g);
                let m = all.len();
                for mask in 0u32..(1 << m) {
                    // Forbid assignments whose parity differs from `parity`.
                    if (mask.count_ones() % 2 == 1) != parity {
                        let c: Vec<Lit> = (0..m)
                            .map(|i| if mask >> i & 1 == 1 { !all[i] } else { all[i] })
                            .collect();
                        self.clause(&c);
                    }
                }
                Bit::Lit(g)
            }
        }
    }

    fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::Const(false),
            (Bit::Const(true), x) | (x, Bit::Const(true)) => x,
            (Bit::Lit(x), Bit::Lit(y)) if x == y => a,
            (Bit::Lit(x), Bit::Lit(y)) if x == !y => Bit::Const(false),
            (Bit::Lit(x), Bit::Lit(y)) => {
                let g = self.fresh();
                self.clause(&[!g, x]);
                self.clause(&[!g, y]);
                self.clause(&[g, !x, !y]);
                Bit::Lit(g)
            }
        }
    }

    fn or(&mut self, a: Bit, b: Bit) -> Bit {
        !self.and(!a, !b)
    }

    fn maj(&mut self, a: Bit, b: Bit, c: Bit) -> Bit {
        match (a, b, c) {
            (Bit::Const(k), x, y) | (x, Bit::Const(k), y) | (x, y, Bit::Const(k)) => {
                if k {
                    self.or(x, y)
                } else {
                    self.and(x, y)
                }
            }
            _ if a == b || a == c => a,
            _ if b == c => b,
            _ if a == !b => c,
            _ if a == !c => b,
            _ if b == !c => a,
            (Bit::Lit(x), Bit::Lit(y), Bit::Lit(z)) => {
                let g = self.fresh();
                self.clause(&[!x, !y, g]);
                self.clause(&[!x, !z, g]);
                self.clause(&[!y, !z, g]);
                self.clause(&[x, y, !g]);
                self.clause(&[x, z, !g]);
                self.clause(&[y, z, !g]);
                Bit::Lit(g)
            }
        }
    }

    /// `x ? y : z`
    fn ite(&mut self, x: Bit, y: Bit, z: Bit) -> Bit {
        match (x, y, z) {
            (Bit::Const(c), _, _) => {
                if c {
                    y
                } else {
                    z
                }
            }
            _ if y == z => y,
            _ if y == !z => self.xor(&[x, z]),
            (_, Bit::Const(true), _) => self.or(x, z),
            (_, Bit::Const(false), _) => self.and(!x, z),
            (_, _, Bit::Const(true)) => self.or(!x, y),
            (_, _, Bit::Const(false)) => self.and(x, y),
            _ if x == y => self.or(x, z),
            _ if x == !y => self.and(!x, z),
            _ if x == z => self.and(x, y),
            _ if x == !z => self.or(!x, y),
            (Bit::Lit(x), Bit::Lit(y), Bit::Lit(z)) => {
                let g = self.fresh();
                self.clause(&[!x, !y, g]);
                self.clause(&[!x, y, !g]);
                self.clause(&[x, !z, g]);
                self.clause(&[x, z, !g]);
                self.clause(&[!y, !z, g]);
                self.clause(&[y, z, !g]);
                Bit::Lit(g)
            }
        }
    }

    fn round_fn(&mut self, f: RoundFunction, x: &Word, y: &Word, z: &Word) -> Word {
        let mut out = [Bit::Const(false); 32];
        for j in 0..32 {
            out[j] = match f {
                RoundFunction::Choice => self.ite(x[j], y[j], z[j]),
                RoundFunction::Majority => self.maj(x[j], y[j], z[j]),
                RoundFunction::Parity => self.xor(&[x[j], y[j], z[j]]),
            };
        }
        out
    }

    /// Ripple-carry addition modulo 2^32.
    fn add(&mut self, a: &Word, b: &Word) -> Word {
        let mut out = [Bit::Const(false); 32];
        let mut carry = Bit::Const(false);
        for j in 0..32 {
            out[j] = self.xor(&[a[j], b[j], carry]);
            if j < 31 {
                carry = self.maj(a[j], b[j], carry);
            }
        }
        out
    }

    /// A variable of its own that equals `bit`.
    ///
    /// A fresh gate output is reused as is; inputs, shared or negated
    /// literals and constants get a new variable tied by equivalence.
    fn name(&mut self, bit: Bit, reuse: bool) -> Var {
        if let Bit::Lit(l) = bit {
            let idx = l.var().index();
            if reuse && l.is_positive() && idx >= 512 && !self.claimed[idx] {
                self.claimed[idx] = true;
                return l.var();
            }
        }
        let v = self.cnf.new_var();
        match bit {
            Bit::Const(c) => self.clause(&[v.lit(c)]),
            Bit::Lit(l) => {
                self.clause(&[!v.pos(), l]);
                self.clause(&[v.pos(), !l]);
            }
        }
        self.claimed.resize(self.cnf.num_vars() as usize, false);
        self.claimed[v.index()] = true;
        v
    }

    fn name_word(&mut self, w: &Word, reuse: bool) -> Vec<Var> {
        self.claimed.resize(self.cnf.num_vars() as usize, false);
        w.iter().map(|&b| self.name(b, reuse)).collect()
    }
}

/// Encodes MD4-k with free inputs and outputs.
///
/// Fixing all 512 input variables lets unit propagation alone assign every
/// other variable of the formula.
pub fn encode_template(k: usize) -> Result<(TemplateCnf, VariableMap), Error> {
    md4::check_steps(k, MIN_ENCODED_STEPS)?;
    let mut c = Circuit {
        cnf: TemplateCnf::new(512, k),
        claimed: vec![false; 512],
    };
    let input_vars: Vec<Var> = (1..=512).map(Var).collect();
    let message: Vec<Word> = (0..16)
        .map(|i| core::array::from_fn(|j| Bit::Lit(input_vars[32 * i + j].pos())))
        .collect();

    let iv = md4::IV;
    // Q[-3], Q[-2], Q[-1], Q[0] = A, D, C, B
    let mut window = [
        const_word(iv[0]),
        const_word(iv[3]),
        const_word(iv[2]),
        const_word(iv[1]),
    ];
    let mut chaining_vars = Vec::with_capacity(k);
    for step in 1..=k {
        let p = step_params(step);
        let [q4, q3, q2, q1] = &window;
        let f = c.round_fn(p.function, q1, q2, q3);
        let t = c.add(q4, &f);
        let t = c.add(&t, &message[p.word]);
        let t = c.add(&t, &const_word(p.constant));
        let q = rotl(&t, p.shift);
        let vars = c.name_word(&q, true);
        let q: Word = core::array::from_fn(|j| Bit::Lit(vars[j].pos()));
        chaining_vars.push(vars);
        window = [window[1], window[2], window[3], q];
    }

    let mut regs = [[Bit::Const(false); 32]; 4];
    for (offset, w) in window.iter().enumerate() {
        regs[register_of_step(k as isize - 3 + offset as isize)] = *w;
    }
    let sums: Vec<Word> = (0..4).map(|r| c.add(&regs[r], &const_word(iv[r]))).collect();
    let mut output_vars = Vec::with_capacity(128);
    for w in &sums {
        output_vars.extend(c.name_word(w, false));
    }

    let vars = VariableMap {
        input_vars,
        output_vars,
        chaining_vars,
        switch_vars: Vec::new(),
    };
    Ok((c.cnf, vars))
}

/// The template plus 128 unit clauses pinning the outputs to `hash`.
pub fn substitute_hash(template: &TemplateCnf, vars: &VariableMap, hash: &HashValue) -> TemplateCnf {
    let mut cnf = template.clone();
    for (p, v) in vars.output_vars.iter().enumerate() {
        cnf.add_clause(&[v.lit(hash.bit(p))]);
    }
    cnf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_or_long_step_counts() {
        assert!(encode_template(4).is_err());
        assert!(encode_template(49).is_err());
        assert!(encode_template(5).is_ok());
    }

    #[test]
    fn variable_groups_are_disjoint() {
        let (cnf, vars) = encode_template(39).unwrap();
        assert_eq!(vars.input_vars.len(), 512);
        assert_eq!(vars.output_vars.len(), 128);
        assert_eq!(vars.chaining_vars.len(), 39);
        let mut all: Vec<Var> = vars.input_vars.clone();
        all.extend(&vars.output_vars);
        all.extend(vars.chaining_vars.iter().flatten());
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
        assert!(all.iter().all(|v| v.0 <= cnf.num_vars()));
        // outputs are the last variables of the template
        assert_eq!(vars.output_vars.last().unwrap().0, cnf.num_vars());
        assert_eq!(vars.output_vars[0].0, cnf.num_vars() - 127);
    }

    #[test]
    fn encoding_is_deterministic() {
        assert_eq!(encode_template(20).unwrap(), encode_template(20).unwrap());
    }

    #[test]
    fn zero_hash_adds_negative_units() {
        let (cnf, vars) = encode_template(8).unwrap();
        let sub = substitute_hash(&cnf, &vars, &Digest::ZERO);
        assert_eq!(sub.num_clauses(), cnf.num_clauses() + 128);
        let added: Vec<&[Lit]> = sub.clauses().skip(cnf.num_clauses()).collect();
        assert!(added.iter().all(|c| c.len() == 1 && !c[0].is_positive()));
    }

    #[test]
    fn complement_hash_differs_in_units_only() {
        let (cnf, vars) = encode_template(8).unwrap();
        let a = substitute_hash(&cnf, &vars, &Digest::ZERO);
        let b = substitute_hash(&cnf, &vars, &Digest::ONES);
        let n = cnf.num_clauses();
        assert!(a.clauses().take(n).eq(b.clauses().take(n)));
        let differing = a
            .clauses()
            .zip(b.clauses())
            .filter(|(x, y)| x != y)
            .count();
        assert_eq!(differing, 128);
    }
}
