//! Single-target attacks with independent verification of every preimage.

use std::fmt;
use std::time::Duration;

use md4sat_core::relaxation::{format_steps, RelaxedTemplate, SwitchVector};
use md4sat_core::{chaining_trace, md4_k, Digest, MessageBlock, TemplateCnf};
use serde::{Deserialize, Serialize};

use crate::solver::{SolveStatus, SolverSession};
use crate::Error;

/// Outcome of one attack on one hash value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    /// Target hash, 32 hex characters.
    pub hash: String,
    pub lambda: SwitchVector,
    pub steps: usize,
    pub constant: u32,
    pub status: SolveStatus,
    /// 128 hex characters, present iff SAT.
    pub preimage: Option<String>,
    /// `true` iff the preimage re-hashes to the target and meets every
    /// active constraint under the reference implementation.
    pub verified: bool,
    pub wall_time_secs: f64,
    pub solver: String,
    /// Set when the solver failed and the instance counts as undecided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AttackResult {
    pub fn preimage_block(&self) -> Option<MessageBlock> {
        self.preimage
            .as_deref()
            .map(|h| MessageBlock::from_hex(h).expect("stored preimage is valid hex"))
    }

    pub fn target(&self) -> Digest {
        Digest::from_hex(&self.hash).expect("stored hash is valid hex")
    }

    /// Re-checks the result against the reference implementation alone.
    pub fn reverify(&self) -> Result<(), Error> {
        match (self.status, self.preimage_block()) {
            (SolveStatus::Sat, Some(block)) => {
                verify_preimage(&block, &self.target(), self.steps, &self.lambda, self.constant)
            }
            (SolveStatus::Sat, None) => Err(Error::Verification("SAT result without preimage".into())),
            (_, Some(_)) => Err(Error::Verification(format!(
                "{} result carries a preimage",
                self.status
            ))),
            (_, None) => Ok(()),
        }
    }
}

impl fmt::Display for AttackResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hash      {}", self.hash)?;
        writeln!(
            f,
            "lambda    {}  steps {}",
            self.lambda,
            format_steps(&self.lambda.active_steps())
        )?;
        let verdict = match self.status {
            SolveStatus::Sat => "SAT: preimage found and verified",
            SolveStatus::Unsat => "UNSAT: no preimage under these relaxation constraints",
            SolveStatus::Unknown => "UNKNOWN: time limit reached without a decision",
        };
        writeln!(f, "verdict   {verdict}")?;
        if let Some(p) = &self.preimage {
            writeln!(f, "preimage  {p}")?;
        }
        if let Some(e) = &self.error {
            writeln!(f, "error     {e}")?;
        }
        write!(f, "time      {:.2} s ({})", self.wall_time_secs, self.solver)
    }
}

/// Checks `md4_k(block) = hash` and that every step active in `lambda`
/// produces `constant`, using only the reference implementation.
pub fn verify_preimage(
    block: &MessageBlock,
    hash: &Digest,
    steps: usize,
    lambda: &SwitchVector,
    constant: u32,
) -> Result<(), Error> {
    let digest = md4_k(block, steps)?;
    if digest != *hash {
        return Err(Error::Verification(format!(
            "preimage {} hashes to {digest}, not {hash}",
            block.to_hex()
        )));
    }
    let trace = chaining_trace(block, steps)?;
    for s in lambda.active_steps() {
        if trace.step(s) != constant {
            return Err(Error::Verification(format!(
                "chaining value at step {s} is {:#010x}, constraint requires {constant:#010x}",
                trace.step(s)
            )));
        }
    }
    Ok(())
}

/// Pins the template's outputs to `hash` and solves under `lambda`.
///
/// A SAT answer whose preimage fails verification is an error, never a
/// result.
pub fn attack(
    template: &RelaxedTemplate,
    hash: &Digest,
    lambda: &SwitchVector,
    limit: Duration,
    open: impl FnOnce(&TemplateCnf) -> Result<Box<dyn SolverSession>, Error>,
) -> Result<AttackResult, Error> {
    let cnf = template.with_hash(hash);
    let assumptions = template.assumptions(lambda)?;
    let mut session = open(&cnf)?;
    let verdict = session.solve(&assumptions, limit)?;
    let preimage = match (&verdict.status, &verdict.model) {
        (SolveStatus::Sat, Some(model)) => {
            let block = template.vars.decode_block(model);
            verify_preimage(&block, hash, template.steps(), lambda, template.constant)?;
            Some(block.to_hex())
        }
        _ => None,
    };
    Ok(AttackResult {
        hash: hash.to_hex(),
        lambda: *lambda,
        steps: template.steps(),
        constant: template.constant,
        status: verdict.status,
        verified: preimage.is_some(),
        preimage,
        wall_time_secs: verdict.wall_time.as_secs_f64(),
        solver: verdict.solver,
        error: None,
    })
}
