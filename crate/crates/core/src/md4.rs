//! MD4 compression truncated to its first `k` steps.
//!
//! The step schedule follows RFC 1320. Step `i` (1-based) overwrites one of
//! the four hash registers with its *chaining value*
//!
//! ```text
//! Q[i] = (Q[i-4] + f(Q[i-1], Q[i-2], Q[i-3]) + m[w(i)] + K(i)) <<< s(i)
//! ```
//!
//! where `Q[-3..=0]` are the IV words in register order A, D, C, B. After the
//! last step the registers are added to the IV (the feed-forward), so a
//! truncated digest keeps the shape of a full one.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::Error;

/// Largest supported step count (full MD4).
pub const MAX_STEPS: usize = 48;

/// Standard MD4 initial value, registers A, B, C, D.
pub const IV: [u32; 4] = [0x6745_2301, 0xefcd_ab89, 0x98ba_dcfe, 0x1032_5476];

const ROUND_CONSTANTS: [u32; 3] = [0, 0x5a82_7999, 0x6ed9_eba1];

const SHIFTS: [[u32; 4]; 3] = [[3, 7, 11, 19], [3, 5, 9, 13], [3, 9, 11, 15]];

const WORD_ORDER: [[usize; 16]; 3] = [
    [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15],
    [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15],
    [0, 8, 4, 12, 2, 10, 6, 14, 1, 9, 5, 13, 3, 11, 7, 15],
];

/// The boolean function mixing the three previous chaining values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundFunction {
    /// `(x & y) | (!x & z)`
    Choice,
    /// `(x & y) | (x & z) | (y & z)`
    Majority,
    /// `x ^ y ^ z`
    Parity,
}

impl RoundFunction {
    #[inline]
    pub fn apply(self, x: u32, y: u32, z: u32) -> u32 {
        match self {
            RoundFunction::Choice => (x & y) | (!x & z),
            RoundFunction::Majority => (x & y) | (x & z) | (y & z),
            RoundFunction::Parity => x ^ y ^ z,
        }
    }
}

/// Parameters of one MD4 step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepParams {
    pub function: RoundFunction,
    /// Index of the message word consumed by the step.
    pub word: usize,
    pub shift: u32,
    pub constant: u32,
}

/// Parameters of step `step` (1-based, `1..=48`).
pub fn step_params(step: usize) -> StepParams {
    assert!((1..=MAX_STEPS).contains(&step), "step {step} out of range");
    let idx = step - 1;
    let round = idx / 16;
    let pos = idx % 16;
    StepParams {
        function: [
            RoundFunction::Choice,
            RoundFunction::Majority,
            RoundFunction::Parity,
        ][round],
        word: WORD_ORDER[round][pos],
        shift: SHIFTS[round][pos % 4],
        constant: ROUND_CONSTANTS[round],
    }
}

/// Register (0 = A, 1 = B, 2 = C, 3 = D) holding the chaining value of `step`.
///
/// Steps cycle through A, D, C, B; `step` may be `-3..=0` for the IV slots.
pub fn register_of_step(step: isize) -> usize {
    match step.rem_euclid(4) {
        1 => 0,
        2 => 3,
        3 => 2,
        _ => 1,
    }
}

pub(crate) fn check_steps(k: usize, min: usize) -> Result<(), Error> {
    if (min..=MAX_STEPS).contains(&k) {
        Ok(())
    } else {
        Err(Error::StepCount {
            k,
            min,
            max: MAX_STEPS,
        })
    }
}

/// A single 512-bit input block as sixteen little-endian words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MessageBlock(pub [u32; 16]);

impl MessageBlock {
    pub fn from_bytes(bytes: &[u8; 64]) -> Self {
        let mut words = [0u32; 16];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(4)) {
            *w = u32::from_le_bytes(chunk.try_into().unwrap());
        }
        MessageBlock(words)
    }

    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        for (chunk, w) in out.chunks_exact_mut(4).zip(self.0.iter()) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Bit `p` of the block, `p = 32 * word + bit`.
    #[inline]
    pub fn bit(&self, p: usize) -> bool {
        (self.0[p / 32] >> (p % 32)) & 1 == 1
    }

    /// Builds a block from 512 bits in `bit` order.
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut words = [0u32; 16];
        for (p, b) in bits.into_iter().take(512).enumerate() {
            words[p / 32] |= (b as u32) << (p % 32);
        }
        MessageBlock(words)
    }

    pub fn from_hex(text: &str) -> Result<Self, Error> {
        let text = text.trim();
        if text.len() != 128 {
            return Err(Error::HexLength {
                expected: 128,
                found: text.len(),
            });
        }
        let mut bytes = [0u8; 64];
        hex::decode_to_slice(text, &mut bytes)?;
        Ok(Self::from_bytes(&bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// The single padded block of a message shorter than 56 bytes.
    pub fn padded(message: &[u8]) -> Option<Self> {
        if message.len() >= 56 {
            return None;
        }
        let mut bytes = [0u8; 64];
        bytes[..message.len()].copy_from_slice(message);
        bytes[message.len()] = 0x80;
        bytes[56..].copy_from_slice(&((message.len() as u64) * 8).to_le_bytes());
        Some(Self::from_bytes(&bytes))
    }
}

/// A 128-bit digest: registers A, B, C, D serialized little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Digest(pub [u32; 4]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 4]);
    pub const ONES: Digest = Digest([u32::MAX; 4]);

    pub fn to_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        for (chunk, w) in out.chunks_exact_mut(4).zip(self.0.iter()) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 16]) -> Self {
        let mut words = [0u32; 4];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(4)) {
            *w = u32::from_le_bytes(chunk.try_into().unwrap());
        }
        Digest(words)
    }

    /// Bit `p` of the digest, `p = 32 * register + bit`.
    #[inline]
    pub fn bit(&self, p: usize) -> bool {
        (self.0[p / 32] >> (p % 32)) & 1 == 1
    }

    pub fn from_hex(text: &str) -> Result<Self, Error> {
        let text = text.trim();
        if text.len() != 32 {
            return Err(Error::HexLength {
                expected: 32,
                found: text.len(),
            });
        }
        let mut bytes = [0u8; 16];
        hex::decode_to_slice(text, &mut bytes)?;
        Ok(Self::from_bytes(&bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn complement(&self) -> Self {
        Digest(self.0.map(|w| !w))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Chaining values of steps `1..=k`; entry `i - 1` belongs to step `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainingTrace(pub Vec<u32>);

impl ChainingTrace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Chaining value of `step` (1-based).
    pub fn step(&self, step: usize) -> u32 {
        self.0[step - 1]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Runs `k` steps from `state` and returns the state before feed-forward
/// together with every chaining value.
fn run_steps(state: [u32; 4], block: &MessageBlock, k: usize) -> ([u32; 4], Vec<u32>) {
    // Q[-3], Q[-2], Q[-1], Q[0] = A, D, C, B
    let mut window = [state[0], state[3], state[2], state[1]];
    let mut trace = Vec::with_capacity(k);
    for step in 1..=k {
        let p = step_params(step);
        let [q4, q3, q2, q1] = window;
        let q = q4
            .wrapping_add(p.function.apply(q1, q2, q3))
            .wrapping_add(block.0[p.word])
            .wrapping_add(p.constant)
            .rotate_left(p.shift);
        trace.push(q);
        window = [q3, q2, q1, q];
    }
    let mut regs = state;
    for (offset, &q) in window.iter().enumerate() {
        let step = k as isize - 3 + offset as isize;
        regs[register_of_step(step)] = q;
    }
    (regs, trace)
}

/// MD4 compression of `block` from an arbitrary chaining state, truncated to
/// `k` steps, feed-forward included.
pub fn compress(state: [u32; 4], block: &MessageBlock, k: usize) -> Result<[u32; 4], Error> {
    check_steps(k, 1)?;
    let (regs, _) = run_steps(state, block, k);
    Ok(core::array::from_fn(|i| regs[i].wrapping_add(state[i])))
}

/// MD4-k of a single block starting from the standard IV.
pub fn md4_k(block: &MessageBlock, k: usize) -> Result<Digest, Error> {
    compress(IV, block, k).map(Digest)
}

/// The chaining value produced at each of the first `k` steps.
pub fn chaining_trace(block: &MessageBlock, k: usize) -> Result<ChainingTrace, Error> {
    check_steps(k, 1)?;
    Ok(ChainingTrace(run_steps(IV, block, k).1))
}

/// Rebuilds the digest from the last four chaining values of a trace.
pub fn digest_from_trace(trace: &ChainingTrace) -> Digest {
    let k = trace.len() as isize;
    let mut regs = IV;
    for step in (k - 3)..=k {
        if step >= 1 {
            regs[register_of_step(step)] = trace.step(step as usize);
        }
    }
    Digest(core::array::from_fn(|i| regs[i].wrapping_add(IV[i])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc_vectors_single_block() {
        let cases: [(&[u8], &str); 5] = [
            (b"", "31d6cfe0d16ae931b73c59d7e0c089c0"),
            (b"a", "bde52cb31de33e46245e05fbdbd6fb24"),
            (b"abc", "a448017aaf21d8525fc10ae87aa6729d"),
            (b"message digest", "d9130a8164549fe818874806e1c7014b"),
            (
                b"abcdefghijklmnopqrstuvwxyz",
                "d79e1c308aa5bbcdeea8ed63df412da9",
            ),
        ];
        for (msg, want) in cases {
            let block = MessageBlock::padded(msg).unwrap();
            assert_eq!(md4_k(&block, 48).unwrap().to_hex(), want);
        }
    }

    #[test]
    fn step_count_is_validated() {
        let b = MessageBlock([0; 16]);
        assert!(md4_k(&b, 0).is_err());
        assert!(md4_k(&b, 49).is_err());
        assert!(chaining_trace(&b, 0).is_err());
        assert!(md4_k(&b, 1).is_ok());
    }

    #[test]
    fn trace_has_k_entries() {
        let b = MessageBlock::padded(b"abc").unwrap();
        assert_eq!(chaining_trace(&b, 39).unwrap().len(), 39);
    }

    #[test]
    fn digest_rebuilds_from_trace() {
        let b = MessageBlock::padded(b"message digest").unwrap();
        for k in 1..=48 {
            let trace = chaining_trace(&b, k).unwrap();
            assert_eq!(digest_from_trace(&trace), md4_k(&b, k).unwrap(), "k = {k}");
        }
    }

    #[test]
    fn schedule_spot_checks() {
        assert_eq!(step_params(17).word, 0);
        assert_eq!(step_params(18).word, 4);
        assert_eq!(step_params(21).word, 1);
        assert_eq!(step_params(29).word, 3);
        assert_eq!(step_params(39).word, 6);
        assert_eq!(step_params(39).shift, 11);
        assert_eq!(step_params(16).shift, 19);
        assert_eq!(step_params(33).constant, 0x6ed9_eba1);
    }

    #[test]
    fn hex_round_trip() {
        let b = MessageBlock::padded(b"abc").unwrap();
        assert_eq!(MessageBlock::from_hex(&b.to_hex()).unwrap(), b);
        assert!(MessageBlock::from_hex("00").is_err());
        let d = Digest::from_hex("a448017aaf21d8525fc10ae87aa6729d").unwrap();
        assert_eq!(d.to_bytes()[0], 0xa4);
        assert_eq!(d.0[0], 0x7a01_48a4);
    }
}
