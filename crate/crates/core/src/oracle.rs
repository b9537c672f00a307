//! Exhaustive solver for small instances, used as ground truth.
//!
//! Facility subsets are walked in Gray-code order; for each one the isolation
//! subsets are walked in Gray-code order as well, so every step toggles a
//! single person and the total risk is patched in `O(deg)`. The patched
//! value only screens candidates: anything that could be optimal is
//! re-evaluated from scratch before it is compared.
//!
//! The total risk of a residual graph is `sum over open v of R(v) * P(v)`,
//! where `P(v)` is the time share of the active people in `v`. That is the
//! quantity maintained incrementally.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{Edge, Instance, InstanceData, Solution};
use crate::numeric::{plain_sum, ExactSum};
use crate::risk::RiskEvaluator;

/// Default cap on the number of (closure set, isolation set) pairs.
pub const DEFAULT_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleResult {
    pub optimum: Solution,
    pub optimal_risk: f64,
    pub nodes_explored: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance needs 2^{bits} evaluations, limit is {allowed}")]
    TooLarge { bits: usize, allowed: u64 },
}

pub fn solve_exact(instance: &Instance, limit: u64) -> Result<OracleResult, OracleError> {
    solve_exact_with(instance, limit, Execution::default())
}

pub fn solve_exact_with(instance: &Instance, limit: u64, execution: Execution) -> Result<OracleResult, OracleError> {
    let (np, nf) = (instance.n_people(), instance.n_facilities());
    let bits = np + nf;
    if bits >= 63 || (1u64 << bits) > limit {
        return Err(OracleError::TooLarge { bits, allowed: limit });
    }

    let outer = 1u64 << nf;
    let chunks = outer.min(64);
    let ranges: Vec<(u64, u64)> = (0..chunks).map(|c| (c * outer / chunks, (c + 1) * outer / chunks)).collect();
    let best = execution
        .map(ranges, |(lo, hi)| Search::new(instance).run(lo, hi))
        .into_iter()
        .flatten()
        .min_by(Candidate::cmp)
        .expect("the empty solution is always feasible");

    let closed: Vec<bool> = (0..nf).map(|v| best.closed >> v & 1 == 1).collect();
    let isolated: Vec<bool> = (0..np).map(|u| best.isolated >> u & 1 == 1).collect();
    Ok(OracleResult {
        optimum: Solution::from_masks(instance, &closed, &isolated),
        optimal_risk: best.risk,
        nodes_explored: 1u64 << bits,
    })
}

#[derive(Debug, Clone)]
struct Candidate {
    risk: f64,
    spent: f64,
    closed: u64,
    isolated: u64,
}

impl Candidate {
    fn cmp(a: &Candidate, b: &Candidate) -> Ordering {
        a.risk
            .total_cmp(&b.risk)
            .then(a.spent.total_cmp(&b.spent))
            .then_with(|| ids(a.closed).cmp(&ids(b.closed)))
            .then_with(|| ids(a.isolated).cmp(&ids(b.isolated)))
    }
}

fn ids(mask: u64) -> Vec<u32> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

#[inline]
fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

struct Search<'a> {
    instance: &'a Instance,
    eval: RiskEvaluator<'a>,
    base_facility: Vec<f64>,
    base_presence: Vec<f64>,
    facility: Vec<f64>,
    presence: Vec<f64>,
    closed: Vec<bool>,
    isolated: Vec<bool>,
    best: Option<Candidate>,
    visited: u64,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance) -> Self {
        let nf = instance.n_facilities();
        let f = instance.infection_prob();
        let mut base_facility = vec![0.0; nf];
        let mut base_presence = vec![0.0; nf];
        for v in 0..nf {
            for l in instance.people_of(v) {
                base_facility[v] += f[l.other as usize] * l.time_share;
                base_presence[v] += l.time_share;
            }
        }
        Search {
            instance,
            eval: RiskEvaluator::new(instance),
            facility: base_facility.clone(),
            presence: base_presence.clone(),
            base_facility,
            base_presence,
            closed: vec![false; nf],
            isolated: vec![false; instance.n_people()],
            best: None,
            visited: 0,
        }
    }

    fn run(mut self, lo: u64, hi: u64) -> Option<Candidate> {
        for i in lo..hi {
            let mask = gray(i);
            for (v, c) in self.closed.iter_mut().enumerate() {
                *c = mask >> v & 1 == 1;
            }
            self.scan_isolations(mask);
        }
        self.best
    }

    fn scan_isolations(&mut self, closed_mask: u64) {
        let inst = self.instance;
        let np = inst.n_people();
        let budget = inst.budget();
        let f = inst.infection_prob();
        let iso_cost = inst.isolation_cost();

        let closure_spend =
            plain_sum((0..inst.n_facilities()).filter(|&v| self.closed[v]).map(|v| inst.closure_cost()[v]));
        self.facility.copy_from_slice(&self.base_facility);
        self.presence.copy_from_slice(&self.base_presence);
        self.isolated.iter_mut().for_each(|x| *x = false);
        let mut total = plain_sum(
            (0..self.facility.len()).filter(|&v| !self.closed[v]).map(|v| self.facility[v] * self.presence[v]),
        );
        let mut iso_spend = 0.0;
        let mut iso_mask = 0u64;

        for k in 0..(1u64 << np) {
            if k > 0 {
                let u = (gray(k) ^ gray(k - 1)).trailing_zeros() as usize;
                let sign = if self.isolated[u] { 1.0 } else { -1.0 };
                self.isolated[u] = !self.isolated[u];
                iso_mask ^= 1 << u;
                iso_spend += sign * iso_cost[u];
                for l in inst.facilities_of(u) {
                    let v = l.other as usize;
                    let old = self.facility[v] * self.presence[v];
                    self.facility[v] += sign * f[u] * l.time_share;
                    self.presence[v] += sign * l.time_share;
                    if !self.closed[v] {
                        total += self.facility[v] * self.presence[v] - old;
                    }
                }
            }
            self.visited += 1;
            if cfg!(debug_assertions) && self.visited.is_multiple_of(101) {
                let exact = self.eval.total(&self.closed, &self.isolated);
                debug_assert!(
                    (exact - total).abs() <= 1e-9 * (1.0 + exact.abs()),
                    "incremental risk drifted: {total} vs {exact}"
                );
            }
            self.consider(closed_mask, iso_mask, total, closure_spend + iso_spend, budget);
        }
    }

    fn consider(&mut self, closed: u64, isolated: u64, approx_risk: f64, approx_spend: f64, budget: f64) {
        let slack = 1e-9 * (approx_spend.abs() + budget.abs());
        if approx_spend > budget + slack {
            return;
        }
        if let Some(best) = &self.best {
            if approx_risk > best.risk + 1e-9 * (1.0 + best.risk.abs()) {
                return;
            }
        }
        let inst = self.instance;
        let mut spend = ExactSum::new();
        spend.extend((0..inst.n_facilities()).filter(|v| closed >> v & 1 == 1).map(|v| inst.closure_cost()[v]));
        spend.extend((0..inst.n_people()).filter(|u| isolated >> u & 1 == 1).map(|u| inst.isolation_cost()[u]));
        let spent = spend.value();
        if spent > budget {
            return;
        }
        let risk = self.eval.total(&self.closed, &self.isolated);
        let cand = Candidate { risk, spent, closed, isolated };
        match &self.best {
            Some(b) if Candidate::cmp(&cand, b) != Ordering::Less => {}
            _ => self.best = Some(cand),
        }
    }
}

/// Instance whose optimal risk encodes a subset-sum question.
///
/// One facility per cost, each with a single private visitor who spends the
/// whole day there and whose infection probability is `cost / max cost`.
/// Isolation is priced out of reach, so closing facilities worth `X` leaves a
/// risk ratio of `(sum - X) / sum`.
pub fn subset_sum_fixture(costs: &[f64], budget: f64) -> Instance {
    assert!(!costs.is_empty(), "subset-sum fixture needs at least one cost");
    assert!(costs.iter().all(|&c| c > 0.0 && c.is_finite()), "costs must be positive");
    let max = costs.iter().copied().fold(0.0, f64::max);
    let n = costs.len();
    Instance::new(InstanceData {
        n_people: n,
        n_facilities: n,
        budget,
        infection_prob: costs.iter().map(|c| c / max).collect(),
        isolation_cost: vec![2.0 * budget + 1.0; n],
        closure_cost: costs.to_vec(),
        edges: (0..n as u32).map(|i| Edge::new(i, i, 1.0)).collect(),
        labels: None,
    })
    .expect("fixture parameters are valid")
}
