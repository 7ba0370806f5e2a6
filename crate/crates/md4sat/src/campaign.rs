//! Attack campaigns over seeded random hash values.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use md4sat_core::relaxation::{RelaxedTemplate, SwitchVector};
use md4sat_core::Digest;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{attack, AttackResult};
use crate::host::HostInfo;
use crate::solver::{Backend, SolveStatus};
use crate::Error;

/// `n` hash values drawn uniformly from `{0,1}^128`; the same seed always
/// gives the same sample, and shorter samples are prefixes of longer ones.
pub fn sample_hashes(seed: u64, n: usize) -> Vec<Digest> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut bytes = [0u8; 16];
            rng.fill_bytes(&mut bytes);
            Digest::from_bytes(&bytes)
        })
        .collect()
}

/// A campaign: settings and one result per sampled hash, in sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub lambda: SwitchVector,
    pub steps: usize,
    pub constant: u32,
    pub seed: u64,
    pub limit_secs: f64,
    pub solver: String,
    pub host: HostInfo,
    pub results: Vec<AttackResult>,
}

/// Mean and maximum solve time over a subset of instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub count: usize,
    pub avg_secs: f64,
    pub max_secs: f64,
}

impl TimeStats {
    fn of(times: impl Iterator<Item = f64>) -> TimeStats {
        let (mut count, mut sum, mut max) = (0usize, 0.0, 0.0f64);
        for t in times {
            count += 1;
            sum += t;
            max = max.max(t);
        }
        TimeStats {
            count,
            avg_secs: if count == 0 { 0.0 } else { sum / count as f64 },
            max_secs: max,
        }
    }
}

/// Figures derived from the results; never stored on their own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub sample_size: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    pub sat_fraction: f64,
    pub unsat_fraction: f64,
    pub unknown_fraction: f64,
    /// SAT and UNSAT instances only.
    pub decided: TimeStats,
    /// SAT instances only.
    pub sat_times: TimeStats,
    /// Every instance, timeouts counted at their elapsed time.
    pub all: TimeStats,
}

impl CampaignReport {
    pub fn sample_size(&self) -> usize {
        self.results.len()
    }

    pub fn count(&self, status: SolveStatus) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }

    pub fn fraction(&self, status: SolveStatus) -> f64 {
        if self.results.is_empty() {
            0.0
        } else {
            self.count(status) as f64 / self.results.len() as f64
        }
    }

    pub fn summary(&self) -> CampaignSummary {
        let times = |keep: &dyn Fn(SolveStatus) -> bool| {
            TimeStats::of(
                self.results
                    .iter()
                    .filter(|r| keep(r.status))
                    .map(|r| r.wall_time_secs),
            )
        };
        CampaignSummary {
            sample_size: self.sample_size(),
            sat: self.count(SolveStatus::Sat),
            unsat: self.count(SolveStatus::Unsat),
            unknown: self.count(SolveStatus::Unknown),
            sat_fraction: self.fraction(SolveStatus::Sat),
            unsat_fraction: self.fraction(SolveStatus::Unsat),
            unknown_fraction: self.fraction(SolveStatus::Unknown),
            decided: times(&|s| s != SolveStatus::Unknown),
            sat_times: times(&|s| s == SolveStatus::Sat),
            all: times(&|_| true),
        }
    }

    /// JSON document with the derived summary next to the raw report.
    pub fn to_json(&self) -> Result<String, Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            summary: CampaignSummary,
            #[serde(flatten)]
            report: &'a CampaignReport,
        }
        Ok(serde_json::to_string_pretty(&Out {
            summary: self.summary(),
            report: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<CampaignReport, Error> {
        #[derive(Deserialize)]
        struct In {
            #[serde(flatten)]
            report: CampaignReport,
        }
        Ok(serde_json::from_str::<In>(text)?.report)
    }

    /// Plain-text table: one row per vector, status percentages and times.
    pub fn table(&self) -> String {
        let s = self.summary();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<33} {:>5} {:>12} {:>12} {:>12} {:>9} {:>9} {:>9} {:>9}",
            "lambda", "n", "SAT", "UNSAT", "UNKNOWN", "avg dec", "max dec", "avg all", "max all"
        );
        let cell = |n: usize, f: f64| format!("{n} ({:.0}%)", 100.0 * f);
        let _ = writeln!(
            out,
            "{:<33} {:>5} {:>12} {:>12} {:>12} {:>8.1}s {:>8.1}s {:>8.1}s {:>8.1}s",
            self.lambda.to_string(),
            s.sample_size,
            cell(s.sat, s.sat_fraction),
            cell(s.unsat, s.unsat_fraction),
            cell(s.unknown, s.unknown_fraction),
            s.decided.avg_secs,
            s.decided.max_secs,
            s.all.avg_secs,
            s.all.max_secs,
        );
        let _ = write!(
            out,
            "MD4-{}, K = {:#x}, limit {} s per instance, seed {}, {} on {} ({} threads)",
            self.steps, self.constant, self.limit_secs, self.seed, self.solver, self.host.cpu, self.host.threads
        );
        out
    }
}

/// Settings for [`run_campaign`].
#[derive(Debug, Clone)]
pub struct CampaignPlan {
    pub lambda: SwitchVector,
    pub hashes: Vec<Digest>,
    pub seed: u64,
    pub limit: Duration,
    pub backend: Backend,
    pub workers: usize,
}

/// Attacks every hash, `workers` at a time. Each worker opens its own
/// solver. Solver failures are recorded as UNKNOWN with the error message;
/// a preimage that fails verification aborts the campaign.
///
/// `on_result` sees each result as it completes (in completion order).
pub fn run_campaign(
    template: &RelaxedTemplate,
    plan: &CampaignPlan,
    on_result: &(dyn Fn(usize, &AttackResult) + Sync),
) -> Result<CampaignReport, Error> {
    let n = plan.hashes.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<AttackResult>>> = Mutex::new(vec![None; n]);
    let fatal: Mutex<Option<Error>> = Mutex::new(None);
    let identity = Mutex::new(String::new());
    std::thread::scope(|scope| {
        for _ in 0..plan.workers.max(1).min(n.max(1)) {
            scope.spawn(|| loop {
                if fatal.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    return;
                }
                let hash = &plan.hashes[i];
                let outcome = attack(template, hash, &plan.lambda, plan.limit, |cnf| {
                    plan.backend.open(cnf)
                });
                let result = match outcome {
                    Ok(r) => r,
                    Err(e @ Error::Verification(_)) => {
                        *fatal.lock().unwrap() = Some(e);
                        return;
                    }
                    Err(e) => AttackResult {
                        hash: hash.to_hex(),
                        lambda: plan.lambda,
                        steps: template.steps(),
                        constant: template.constant,
                        status: SolveStatus::Unknown,
                        preimage: None,
                        verified: false,
                        wall_time_secs: 0.0,
                        solver: String::new(),
                        error: Some(e.to_string()),
                    },
                };
                if !result.solver.is_empty() {
                    *identity.lock().unwrap() = result.solver.clone();
                }
                on_result(i, &result);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(e);
    }
    let results = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every instance attacked"))
        .collect();
    Ok(CampaignReport {
        lambda: plan.lambda,
        steps: template.steps(),
        constant: template.constant,
        seed: plan.seed,
        limit_secs: plan.limit.as_secs_f64(),
        solver: identity.into_inner().unwrap(),
        host: HostInfo::current(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(status: SolveStatus, t: f64) -> AttackResult {
        AttackResult {
            hash: Digest::ZERO.to_hex(),
            lambda: SwitchVector::zeros(31),
            steps: 39,
            constant: 0,
            status,
            preimage: None,
            verified: false,
            wall_time_secs: t,
            solver: "s".into(),
            error: None,
        }
    }

    fn report(results: Vec<AttackResult>) -> CampaignReport {
        CampaignReport {
            lambda: SwitchVector::zeros(31),
            steps: 39,
            constant: 0,
            seed: 0,
            limit_secs: 600.0,
            solver: "s".into(),
            host: HostInfo::current(),
            results,
        }
    }

    #[test]
    fn sampling_is_seeded_and_prefix_stable() {
        let a = sample_hashes(5, 10);
        assert_eq!(a, sample_hashes(5, 10));
        assert_eq!(&sample_hashes(5, 20)[..10], a.as_slice());
        assert_ne!(a, sample_hashes(6, 10));
        let mut dedup = a.clone();
        dedup.sort_by_key(|d| d.to_hex());
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
    }

    #[test]
    fn empty_campaign_has_zero_counts() {
        let r = report(vec![]);
        let s = r.summary();
        assert_eq!((s.sample_size, s.sat, s.unsat, s.unknown), (0, 0, 0, 0));
        assert_eq!(s.sat_fraction, 0.0);
        assert_eq!(s.decided.count, 0);
        let t = RelaxedTemplate::new(9, 0).unwrap();
        let plan = CampaignPlan {
            lambda: SwitchVector::zeros(t.q()),
            hashes: vec![],
            seed: 0,
            limit: Duration::from_secs(1),
            backend: Backend::Embedded,
            workers: 3,
        };
        let r = run_campaign(&t, &plan, &|_, _| {}).unwrap();
        assert_eq!(r.sample_size(), 0);
    }

    #[test]
    fn summary_separates_decided_and_all() {
        let r = report(vec![
            result(SolveStatus::Sat, 2.0),
            result(SolveStatus::Sat, 4.0),
            result(SolveStatus::Unsat, 6.0),
            result(SolveStatus::Unknown, 100.0),
        ]);
        let s = r.summary();
        assert_eq!((s.sat, s.unsat, s.unknown), (2, 1, 1));
        assert_eq!(s.sat + s.unsat + s.unknown, s.sample_size);
        assert_eq!(s.sat_fraction, 0.5);
        assert_eq!(s.decided.avg_secs, 4.0);
        assert_eq!(s.decided.max_secs, 6.0);
        assert_eq!(s.sat_times.avg_secs, 3.0);
        assert_eq!(s.all.max_secs, 100.0);
        let json = r.to_json().unwrap();
        assert_eq!(CampaignReport::from_json(&json).unwrap(), r);
        assert!(r.table().contains("2 (50%)"));
    }

    #[test]
    fn parallel_campaign_on_short_md4_keeps_sample_order() {
        let t = RelaxedTemplate::new(12, 0).unwrap();
        let hashes = sample_hashes(1, 4);
        let plan = CampaignPlan {
            lambda: SwitchVector::zeros(t.q()),
            hashes: hashes.clone(),
            seed: 1,
            limit: Duration::from_secs(60),
            backend: Backend::Embedded,
            workers: 2,
        };
        let r = run_campaign(&t, &plan, &|_, _| {}).unwrap();
        for (res, h) in r.results.iter().zip(&hashes) {
            assert_eq!(res.hash, h.to_hex());
            res.reverify().unwrap();
        }
        assert_eq!(r.count(SolveStatus::Sat), 4);
    }
}
