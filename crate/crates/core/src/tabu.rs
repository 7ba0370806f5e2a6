//! Tabu search over `{0,1}^Q` with Hamming-radius-1 neighbourhoods.
//!
//! Every evaluated point is kept in one of two tabu lists: `L2` holds points
//! with at least one unchecked neighbour, `L1` holds points whose whole
//! neighbourhood has been checked. A point is checked once it has been
//! evaluated, so no point is ever evaluated twice.
//!
//! Each round walks the unchecked neighbours of the current centre in
//! ascending flipped-position order. If the best value improved during the
//! round the best point becomes the new centre; otherwise the scored `L2`
//! point whose value is closest to the best value becomes the centre, the
//! most recently added one on ties. Screened-out points are never centres.
//! The search stops when the controller reports the time limit or when no
//! eligible centre is left.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::relaxation::SwitchVector;

/// Outcome of evaluating one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Scored(u32),
    /// Proven unusable (unsatisfiable or propagation conflict).
    ScreenedOut,
}

impl PointStatus {
    pub fn score(self) -> Option<u32> {
        match self {
            PointStatus::Scored(s) => Some(s),
            PointStatus::ScreenedOut => None,
        }
    }
}

/// Screens and scores points.
pub trait PointEvaluator {
    type Error;
    fn evaluate(&mut self, point: &SwitchVector) -> Result<PointStatus, Self::Error>;
}

impl<F, E> PointEvaluator for F
where
    F: FnMut(&SwitchVector) -> Result<PointStatus, E>,
{
    type Error = E;
    fn evaluate(&mut self, point: &SwitchVector) -> Result<PointStatus, E> {
        self(point)
    }
}

/// One evaluation, reported to the controller as it happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluation {
    /// 0-based evaluation counter.
    pub index: u64,
    pub point: SwitchVector,
    pub status: PointStatus,
    /// `true` if the point strictly improved the best value.
    pub record: bool,
}

/// Time limit and observation hooks.
pub trait SearchControl {
    fn time_exceeded(&mut self) -> bool {
        false
    }

    /// Seconds since the search started, stamped on records.
    fn elapsed_secs(&self) -> f64 {
        0.0
    }

    fn on_evaluated(&mut self, _event: &Evaluation) {}
}

/// No time limit, no observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unlimited;

impl SearchControl for Unlimited {}

/// A point that strictly improved the best value when it was evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Record {
    pub point: SwitchVector,
    pub mu: u32,
    /// Evaluation counter at discovery.
    pub evaluation: u64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Option<SwitchVector>,
    pub mu_best: Option<u32>,
    pub records: Vec<Record>,
    pub evaluations: u64,
    /// `true` if the search ran out of centres rather than time.
    pub exhausted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    status: PointStatus,
    unchecked: u32,
    order: u64,
}

/// State of one tabu search run.
#[derive(Debug, Clone)]
pub struct TabuSearch {
    q: usize,
    entries: BTreeMap<SwitchVector, Entry>,
    /// Scored `L2` points keyed by `(mu, insertion order)`.
    centres: BTreeSet<(u32, u64)>,
    by_order: BTreeMap<u64, SwitchVector>,
    best: Option<(SwitchVector, u32)>,
    records: Vec<Record>,
    evaluations: u64,
}

impl TabuSearch {
    pub fn new(q: usize) -> Self {
        assert!((1..=SwitchVector::MAX_LEN).contains(&q));
        TabuSearch {
            q,
            entries: BTreeMap::new(),
            centres: BTreeSet::new(),
            by_order: BTreeMap::new(),
            best: None,
            records: Vec::new(),
            evaluations: 0,
        }
    }

    pub fn is_checked(&self, point: &SwitchVector) -> bool {
        self.entries.contains_key(point)
    }

    pub fn status(&self, point: &SwitchVector) -> Option<PointStatus> {
        self.entries.get(point).map(|e| e.status)
    }

    /// Points whose whole neighbourhood is checked.
    pub fn l1(&self) -> impl Iterator<Item = &SwitchVector> {
        self.entries
            .iter()
            .filter(|(_, e)| e.unchecked == 0)
            .map(|(p, _)| p)
    }

    /// Points with at least one unchecked neighbour.
    pub fn l2(&self) -> impl Iterator<Item = &SwitchVector> {
        self.entries
            .iter()
            .filter(|(_, e)| e.unchecked > 0)
            .map(|(p, _)| p)
    }

    pub fn evaluated(&self) -> usize {
        self.entries.len()
    }

    pub fn best(&self) -> Option<(SwitchVector, u32)> {
        self.best
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Adds `point` to `L2` and marks it checked in every stored
    /// neighbourhood, moving fully checked points to `L1`.
    fn mark(&mut self, point: SwitchVector, status: PointStatus) {
        let order = self.evaluations;
        let mut unchecked = 0;
        for nb in point.neighbors() {
            match self.entries.get_mut(&nb) {
                Some(e) => {
                    e.unchecked -= 1;
                    if e.unchecked == 0 {
                        if let PointStatus::Scored(mu) = e.status {
                            self.centres.remove(&(mu, e.order));
                        }
                    }
                }
                None => unchecked += 1,
            }
        }
        if unchecked > 0 {
            if let PointStatus::Scored(mu) = status {
                self.centres.insert((mu, order));
            }
        }
        self.by_order.insert(order, point);
        self.entries.insert(
            point,
            Entry {
                status,
                unchecked,
                order,
            },
        );
    }

    fn visit<E, C>(
        &mut self,
        point: SwitchVector,
        evaluator: &mut E,
        control: &mut C,
    ) -> Result<bool, E::Error>
    where
        E: PointEvaluator + ?Sized,
        C: SearchControl + ?Sized,
    {
        let status = evaluator.evaluate(&point)?;
        self.mark(point, status);
        let index = self.evaluations;
        self.evaluations += 1;
        let improved = match (status, self.best) {
            (PointStatus::Scored(mu), None) => Some(mu),
            (PointStatus::Scored(mu), Some((_, b))) if mu > b => Some(mu),
            _ => None,
        };
        if let Some(mu) = improved {
            self.best = Some((point, mu));
            self.records.push(Record {
                point,
                mu,
                evaluation: index,
                elapsed_secs: control.elapsed_secs(),
            });
        }
        control.on_evaluated(&Evaluation {
            index,
            point,
            status,
            record: improved.is_some(),
        });
        Ok(improved.is_some())
    }

    /// The scored `L2` point closest to the best value, newest on ties.
    fn new_centre(&self) -> Option<SwitchVector> {
        // every stored score is <= the best, so the closest is the largest
        self.centres
            .iter()
            .next_back()
            .map(|(_, order)| self.by_order[order])
    }

    /// Runs the search from `start` until time runs out or no centre is left.
    pub fn run<E, C>(
        &mut self,
        start: SwitchVector,
        evaluator: &mut E,
        control: &mut C,
    ) -> Result<SearchOutcome, E::Error>
    where
        E: PointEvaluator + ?Sized,
        C: SearchControl + ?Sized,
    {
        assert_eq!(start.len(), self.q, "start point has the wrong length");
        let mut exhausted = false;
        if !self.is_checked(&start) {
            self.visit(start, evaluator, control)?;
        }
        let mut centre = start;
        'outer: while !control.time_exceeded() {
            let mut improved = false;
            for p in 1..=self.q {
                let nb = centre.flipped(p);
                if self.is_checked(&nb) {
                    continue;
                }
                if control.time_exceeded() {
                    break 'outer;
                }
                improved |= self.visit(nb, evaluator, control)?;
            }
            let next = if improved {
                self.best.map(|(p, _)| p)
            } else {
                self.new_centre()
            };
            match next {
                Some(c) => centre = c,
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        Ok(self.outcome(exhausted))
    }

    fn outcome(&self, exhausted: bool) -> SearchOutcome {
        SearchOutcome {
            best: self.best.map(|(p, _)| p),
            mu_best: self.best.map(|(_, m)| m),
            records: self.records.clone(),
            evaluations: self.evaluations,
            exhausted,
        }
    }

    /// Recomputes the bookkeeping from scratch and compares. Quadratic; meant
    /// for tests.
    pub fn check_invariants(&self) -> bool {
        let mut best: Option<u32> = None;
        for (p, e) in &self.entries {
            let unchecked = p.neighbors().filter(|n| !self.is_checked(n)).count() as u32;
            if unchecked != e.unchecked {
                return false;
            }
            let in_centres = matches!(e.status, PointStatus::Scored(mu) if self.centres.contains(&(mu, e.order)));
            let should = e.unchecked > 0 && e.status.score().is_some();
            if in_centres != should {
                return false;
            }
            if let Some(mu) = e.status.score() {
                best = best.max(Some(mu));
            }
        }
        best == self.best.map(|(_, m)| m) && self.l1().all(|p| !self.l2().any(|q| q == p))
    }
}

/// Runs a fresh search over points of length `start.len()`.
pub fn run_search<E, C>(
    start: SwitchVector,
    evaluator: &mut E,
    control: &mut C,
) -> Result<SearchOutcome, E::Error>
where
    E: PointEvaluator + ?Sized,
    C: SearchControl + ?Sized,
{
    TabuSearch::new(start.len()).run(start, evaluator, control)
}

/// Record points with `lo <= mu <= hi`, in discovery order.
pub fn shortlist(records: &[Record], lo: u32, hi: u32) -> Vec<SwitchVector> {
    records
        .iter()
        .filter(|r| (lo..=hi).contains(&r.mu))
        .map(|r| r.point)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use core::convert::Infallible;

    fn linear(weights: &'static [i32]) -> impl FnMut(&SwitchVector) -> Result<PointStatus, Infallible> {
        move |p: &SwitchVector| {
            let v: i32 = 100 + p.active_positions().map(|i| weights[i - 1]).sum::<i32>();
            Ok(PointStatus::Scored(v as u32))
        }
    }

    #[test]
    fn finds_linear_optimum() {
        let mut f = linear(&[3, -2, 5, -1, 4, -7, 2, 1]);
        let out = run_search(SwitchVector::zeros(8), &mut f, &mut Unlimited).unwrap();
        assert_eq!(out.mu_best, Some(115));
        assert_eq!(out.best.unwrap().to_string(), "10101011");
        assert!(out.exhausted);
        assert_eq!(out.evaluations, 256);
    }

    #[test]
    fn records_strictly_increase() {
        let mut f = linear(&[3, -2, 5, -1, 4, -7, 2, 1]);
        let out = run_search(SwitchVector::zeros(8), &mut f, &mut Unlimited).unwrap();
        assert!(out.records.windows(2).all(|w| w[0].mu < w[1].mu));
        assert_eq!(out.records[0].point, SwitchVector::zeros(8));
    }

    #[test]
    fn screened_points_are_not_centres() {
        // everything with position 1 set is screened out
        let mut f = |p: &SwitchVector| -> Result<PointStatus, Infallible> {
            Ok(if p.get(1) {
                PointStatus::ScreenedOut
            } else {
                PointStatus::Scored(p.count_ones())
            })
        };
        let mut s = TabuSearch::new(5);
        let out = s.run(SwitchVector::zeros(5), &mut f, &mut Unlimited).unwrap();
        assert_eq!(out.mu_best, Some(4));
        assert_eq!(out.best.unwrap().to_string(), "01111");
        assert!(s.check_invariants());
        // screened points keep unchecked neighbours but the search still ends
        assert!(out.exhausted);
    }

    #[test]
    fn stops_on_time_limit() {
        struct Budget(u32);
        impl SearchControl for Budget {
            fn time_exceeded(&mut self) -> bool {
                self.0 == 0
            }
            fn on_evaluated(&mut self, _: &Evaluation) {
                self.0 = self.0.saturating_sub(1);
            }
        }
        let mut f = linear(&[1; 10]);
        let out = run_search(SwitchVector::zeros(10), &mut f, &mut Budget(7)).unwrap();
        assert_eq!(out.evaluations, 7);
        assert!(!out.exhausted);
    }

    #[test]
    fn errors_abort() {
        let mut f = |_: &SwitchVector| -> Result<PointStatus, &'static str> { Err("solver died") };
        assert_eq!(
            run_search(SwitchVector::zeros(3), &mut f, &mut Unlimited),
            Err("solver died")
        );
    }

    #[test]
    fn shortlist_window() {
        let rec = |mu| Record {
            point: SwitchVector::zeros(3),
            mu,
            evaluation: 0,
            elapsed_secs: 0.0,
        };
        let rs: Vec<Record> = [200, 256, 288, 320, 352].into_iter().map(rec).collect();
        assert_eq!(shortlist(&rs, 256, 320).len(), 3);
        assert!(shortlist(&[], 256, 320).is_empty());
    }
}
