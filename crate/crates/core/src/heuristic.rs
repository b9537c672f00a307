//! Efficiency-sorted greedy with a sweep over how the budget is split
//! between isolating people and closing facilities.
//!
//! People are ranked by `c'(u) / f(u)` and facilities by `c(v) / R(v)`, both
//! computed once on the untouched graph (lower is better). For a split of
//! `s` percent, people are isolated in rank order while the isolation spend
//! stays within `s%` of the budget, skipping anyone who does not fit. The
//! facility phase then closes facilities in rank order against whatever is
//! left of the whole budget, with the same skip rule. The sweep evaluates
//! every split on a fixed grid and keeps the one with the lowest total risk.

use std::collections::BTreeSet;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{FacilityId, Instance, PersonId, Solution};
use crate::numeric::ExactSum;
use crate::risk::{risk_ratio, RiskEvaluator};

/// Efficiency of something that removes no risk. Never selected.
pub const NEVER: f64 = f64::INFINITY;

/// `c(v) / R(v)` on baseline facility risks; [`NEVER`] where `R(v) = 0`.
pub fn facility_efficiency(instance: &Instance) -> Vec<f64> {
    let mut eval = RiskEvaluator::new(instance);
    eval.baseline();
    efficiency(instance.closure_cost(), eval.last_facility_risks())
}

/// `c'(u) / f(u)`; [`NEVER`] where `f(u) = 0`.
pub fn person_efficiency(instance: &Instance) -> Vec<f64> {
    efficiency(instance.isolation_cost(), instance.infection_prob())
}

fn efficiency(cost: &[f64], benefit: &[f64]) -> Vec<f64> {
    cost.iter().zip(benefit).map(|(&c, &b)| if b > 0.0 { c / b } else { NEVER }).collect()
}

/// Indices with finite efficiency, ascending by (efficiency, cost, id).
fn rank(eff: &[f64], cost: &[f64], skip: impl Fn(usize) -> bool) -> Vec<u32> {
    let mut order: Vec<u32> = (0..eff.len()).filter(|&i| eff[i].is_finite() && !skip(i)).map(|i| i as u32).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        eff[a].total_cmp(&eff[b]).then(cost[a].total_cmp(&cost[b])).then(a.cmp(&b))
    });
    order
}

/// Choices a what-if scenario pins before the greedy runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Restrictions {
    /// Replaces the instance budget when set.
    pub budget: Option<f64>,
    pub forced_closures: BTreeSet<FacilityId>,
    pub forced_isolations: BTreeSet<PersonId>,
    /// Facilities that must stay open.
    pub excluded_facilities: BTreeSet<FacilityId>,
    /// People who must stay free.
    pub excluded_people: BTreeSet<PersonId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RestrictionError {
    #[error("facility id {0} out of range")]
    FacilityOutOfRange(FacilityId),
    #[error("person id {0} out of range")]
    PersonOutOfRange(PersonId),
    #[error("facility {0} is both forced closed and excluded")]
    FacilityConflict(FacilityId),
    #[error("person {0} is both forced into isolation and excluded")]
    PersonConflict(PersonId),
    #[error("budget override {0} must be finite and non-negative")]
    InvalidBudget(f64),
    #[error("forced choices cost {cost}, more than the budget {budget}")]
    ForcedOverBudget { cost: f64, budget: f64 },
}

/// Result of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitOutcome {
    pub split_percent: f64,
    pub solution: Solution,
    pub spent_isolation: f64,
    pub spent_closure: f64,
    pub total_risk: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub per_split: Vec<SplitOutcome>,
    /// Index into `per_split` of the lowest total risk, smallest split on ties.
    pub best: usize,
    pub baseline_risk: f64,
}

impl SweepResult {
    pub fn best(&self) -> &SplitOutcome {
        &self.per_split[self.best]
    }

    /// `(split, ratio)` pairs in grid order.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.per_split.iter().map(|o| (o.split_percent, o.ratio)).collect()
    }

    /// Columns: `split,spentIsolation,spentClosure,totalRisk,ratio`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["split", "spentIsolation", "spentClosure", "totalRisk", "ratio"])?;
        for o in &self.per_split {
            w.write_record([
                o.split_percent.to_string(),
                o.spent_isolation.to_string(),
                o.spent_closure.to_string(),
                o.total_risk.to_string(),
                o.ratio.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SweepOptions {
    /// Grid points per percentage point; 1 gives the 101-point grid.
    pub steps_per_percent: u32,
    pub execution: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { steps_per_percent: 1, execution: Execution::Parallel }
    }
}

impl SweepOptions {
    pub fn grid(&self) -> Vec<f64> {
        let k = self.steps_per_percent.max(1);
        (0..=100 * k).map(|i| if k == 1 { i as f64 } else { i as f64 / k as f64 }).collect()
    }
}

/// Greedy state shared by every split: rankings, pinned choices, budget.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    instance: &'a Instance,
    budget: f64,
    forced_closed: Vec<bool>,
    forced_isolated: Vec<bool>,
    forced_isolation_costs: Vec<f64>,
    forced_closure_costs: Vec<f64>,
    forced_spend: f64,
    person_order: Vec<u32>,
    facility_order: Vec<u32>,
    baseline_risk: f64,
}

impl<'a> Planner<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Planner::with_restrictions(instance, &Restrictions::default()).expect("no restrictions cannot conflict")
    }

    /// Rankings are computed on the graph left after the forced choices;
    /// forced and excluded ids never enter the greedy.
    pub fn with_restrictions(instance: &'a Instance, r: &Restrictions) -> Result<Self, RestrictionError> {
        let (np, nf) = (instance.n_people(), instance.n_facilities());
        for &v in r.forced_closures.iter().chain(&r.excluded_facilities) {
            if v.index() >= nf {
                return Err(RestrictionError::FacilityOutOfRange(v));
            }
        }
        for &u in r.forced_isolations.iter().chain(&r.excluded_people) {
            if u.index() >= np {
                return Err(RestrictionError::PersonOutOfRange(u));
            }
        }
        if let Some(&v) = r.forced_closures.intersection(&r.excluded_facilities).next() {
            return Err(RestrictionError::FacilityConflict(v));
        }
        if let Some(&u) = r.forced_isolations.intersection(&r.excluded_people).next() {
            return Err(RestrictionError::PersonConflict(u));
        }
        let budget = r.budget.unwrap_or(instance.budget());
        if !budget.is_finite() || budget < 0.0 {
            return Err(RestrictionError::InvalidBudget(budget));
        }

        let mut forced_closed = vec![false; nf];
        let mut forced_isolated = vec![false; np];
        r.forced_closures.iter().for_each(|v| forced_closed[v.index()] = true);
        r.forced_isolations.iter().for_each(|u| forced_isolated[u.index()] = true);
        let forced_isolation_costs: Vec<f64> =
            r.forced_isolations.iter().map(|u| instance.isolation_cost()[u.index()]).collect();
        let forced_closure_costs: Vec<f64> =
            r.forced_closures.iter().map(|v| instance.closure_cost()[v.index()]).collect();
        let forced_spend =
            forced_isolation_costs.iter().chain(&forced_closure_costs).copied().collect::<ExactSum>().value();
        if forced_spend > budget {
            return Err(RestrictionError::ForcedOverBudget { cost: forced_spend, budget });
        }

        let mut eval = RiskEvaluator::new(instance);
        let baseline_risk = eval.baseline();
        eval.total(&forced_closed, &forced_isolated);
        let fac_eff = efficiency(instance.closure_cost(), eval.last_facility_risks());
        let person_eff = person_efficiency(instance);
        let person_order = rank(&person_eff, instance.isolation_cost(), |u| {
            forced_isolated[u] || r.excluded_people.contains(&PersonId(u as u32))
        });
        let facility_order = rank(&fac_eff, instance.closure_cost(), |v| {
            forced_closed[v] || r.excluded_facilities.contains(&FacilityId(v as u32))
        });

        Ok(Planner {
            instance,
            budget,
            forced_closed,
            forced_isolated,
            forced_isolation_costs,
            forced_closure_costs,
            forced_spend,
            person_order,
            facility_order,
            baseline_risk,
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn baseline_risk(&self) -> f64 {
        self.baseline_risk
    }

    /// People in isolation order (finite efficiency only).
    pub fn person_order(&self) -> &[u32] {
        &self.person_order
    }

    /// Facilities in closure order (finite efficiency only).
    pub fn facility_order(&self) -> &[u32] {
        &self.facility_order
    }

    pub fn solve_at_split(&self, split_percent: f64) -> SplitOutcome {
        self.solve_with(&mut RiskEvaluator::new(self.instance), split_percent)
    }

    fn solve_with(&self, eval: &mut RiskEvaluator<'_>, split_percent: f64) -> SplitOutcome {
        assert!((0.0..=100.0).contains(&split_percent), "split {split_percent} outside [0, 100]");
        let inst = self.instance;
        let mut isolated = self.forced_isolated.clone();
        let mut closed = self.forced_closed.clone();
        let mut spend = Spend::new(self.forced_spend);
        let mut iso_spend: ExactSum = self.forced_isolation_costs.iter().copied().collect();
        let mut closure_spend: ExactSum = self.forced_closure_costs.iter().copied().collect();

        let free = self.budget - self.forced_spend;
        let isolation_cap = self.forced_spend + free * split_percent / 100.0;
        for &u in &self.person_order {
            let c = inst.isolation_cost()[u as usize];
            if spend.try_add(c, isolation_cap) {
                isolated[u as usize] = true;
                iso_spend.add(c);
            }
        }
        for &v in &self.facility_order {
            let c = inst.closure_cost()[v as usize];
            if spend.try_add(c, self.budget) {
                closed[v as usize] = true;
                closure_spend.add(c);
            }
        }

        let total_risk = eval.total(&closed, &isolated);
        let solution = Solution::from_masks(inst, &closed, &isolated);
        debug_assert!(solution.spent() <= self.budget);
        SplitOutcome {
            split_percent,
            solution,
            spent_isolation: iso_spend.value(),
            spent_closure: closure_spend.value(),
            total_risk,
            ratio: risk_ratio(total_risk, self.baseline_risk),
        }
    }

    pub fn sweep(&self, options: &SweepOptions) -> SweepResult {
        let per_split = options.execution.map_init(
            options.grid(),
            || RiskEvaluator::new(self.instance),
            |eval, s| self.solve_with(eval, s),
        );
        let best = per_split
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.total_risk.total_cmp(&b.total_risk).then(i.cmp(j)))
            .map(|(i, _)| i)
            .expect("grid is never empty");
        SweepResult { per_split, best, baseline_risk: self.baseline_risk }
    }
}

/// Running spend. The exact sum decides feasibility; the plain float sum
/// only short-circuits comparisons that are nowhere near the cap.
struct Spend {
    exact: ExactSum,
    approx: f64,
}

impl Spend {
    fn new(initial: f64) -> Self {
        let mut exact = ExactSum::new();
        exact.add(initial);
        Spend { exact, approx: initial }
    }

    fn try_add(&mut self, cost: f64, cap: f64) -> bool {
        let trial = self.approx + cost;
        let slack = 1e-9 * (trial.abs() + cap.abs());
        let fits = if trial < cap - slack {
            true
        } else if trial > cap + slack {
            false
        } else {
            self.exact.value_with(cost) <= cap
        };
        if fits {
            self.exact.add(cost);
            self.approx = trial;
        }
        fits
    }
}

/// Greedy solution and its total risk at an integer split percentage.
pub fn solve_at_split(instance: &Instance, split_percent: u32) -> (Solution, f64) {
    let out = Planner::new(instance).solve_at_split(split_percent as f64);
    (out.solution, out.total_risk)
}

/// 101-point sweep with default options.
pub fn sweep(instance: &Instance) -> SweepResult {
    sweep_with(instance, &SweepOptions::default())
}

pub fn sweep_with(instance: &Instance, options: &SweepOptions) -> SweepResult {
    Planner::new(instance).sweep(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::f1;
    use crate::model::{Edge, InstanceData};
    use crate::risk::total_risk;

    fn inst(f: Vec<f64>, iso: Vec<f64>, clo: Vec<f64>, edges: Vec<(u32, u32, f64)>, budget: f64) -> Instance {
        Instance::new(InstanceData {
            n_people: f.len(),
            n_facilities: clo.len(),
            budget,
            infection_prob: f,
            isolation_cost: iso,
            closure_cost: clo,
            edges: edges.into_iter().map(Edge::from).collect(),
            labels: None,
        })
        .unwrap()
    }

    #[test]
    fn facility_efficiency_examples() {
        assert_eq!(facility_efficiency(&f1(10.0, [4.0, 4.0], 4.0)), vec![20.0]);
        let lonely = inst(vec![0.5], vec![1.0], vec![3.0, 7.0], vec![(0, 0, 0.5)], 1.0);
        assert_eq!(facility_efficiency(&lonely)[1], NEVER);

        // equal cost, R = (0.2, 0.4): the second facility ranks first
        let two = inst(vec![0.4, 0.8], vec![1.0; 2], vec![1.0, 1.0], vec![(0, 0, 0.5), (1, 1, 0.5)], 1.0);
        let p = Planner::new(&two);
        assert_eq!(p.facility_order(), &[1, 0]);
    }

    #[test]
    fn person_efficiency_examples() {
        let one = inst(vec![0.5, 0.0], vec![5.0, 1.0], vec![], vec![], 0.0);
        let e = person_efficiency(&one);
        assert_eq!(e, vec![10.0, NEVER]);
        let two = inst(vec![0.1, 0.9], vec![2.0, 2.0], vec![], vec![], 0.0);
        assert_eq!(Planner::new(&two).person_order(), &[1, 0]);
        assert_eq!(Planner::new(&one).person_order(), &[0]);
    }

    #[test]
    fn ties_break_by_cost_then_id() {
        // e' = 10 for everyone; costs 2, 1, 1
        let t = inst(vec![0.2, 0.1, 0.1], vec![2.0, 1.0, 1.0], vec![], vec![], 0.0);
        assert_eq!(Planner::new(&t).person_order(), &[1, 2, 0]);
    }

    #[test]
    fn split_zero_is_pure_facility_greedy() {
        let i = f1(1.0, [0.5, 0.5], 1.0);
        let (sol, risk) = solve_at_split(&i, 0);
        assert!(sol.isolated_people().is_empty());
        assert_eq!(sol.closed_facilities().len(), 1);
        assert_eq!(risk, 0.0);
    }

    #[test]
    fn unaffordable_isolation_at_full_split() {
        let i = f1(100.0, [5.0, 5.0], 4.0);
        let (sol, risk) = solve_at_split(&i, 100);
        assert_eq!(sol, Solution::empty());
        assert_eq!(risk, 0.75);
    }

    #[test]
    fn half_split_takes_two_cheapest_people() {
        // e' = (1/0.9, 1/0.5, 1/0.1); isolation budget 2.0 fits exactly two
        let i = inst(
            vec![0.9, 0.5, 0.1],
            vec![1.0, 1.0, 1.0],
            vec![50.0, 50.0],
            vec![(0, 0, 0.5), (1, 0, 0.5), (1, 1, 0.4), (2, 1, 0.5)],
            4.0,
        );
        let (sol, risk) = solve_at_split(&i, 50);
        let iso: Vec<_> = sol.isolated_people().iter().map(|u| u.0).collect();
        assert_eq!(iso, vec![0, 1]);
        assert!(sol.closed_facilities().is_empty());
        assert_eq!(risk, total_risk(&i, &sol).unwrap().total_risk);
    }

    #[test]
    fn leftover_isolation_budget_rolls_over() {
        // nobody affordable for isolation, facility costs the whole budget
        let i = f1(4.0, [5.0, 5.0], 4.0);
        let out = Planner::new(&i).solve_at_split(50.0);
        assert_eq!(out.solution.closed_facilities().len(), 1);
        assert_eq!(out.spent_closure, 4.0);
    }

    #[test]
    fn skip_and_continue() {
        // first-ranked facility too expensive, second fits
        let i = inst(vec![1.0, 1.0], vec![100.0, 100.0], vec![3.0, 2.0], vec![(0, 0, 0.9), (1, 1, 0.5)], 2.0);
        assert_eq!(facility_efficiency(&i), vec![3.0 / 0.9, 4.0]);
        let (sol, _) = solve_at_split(&i, 0);
        assert_eq!(sol.closed_facilities().iter().map(|v| v.0).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn dominant_affordable_facility() {
        let i =
            inst(vec![0.5, 0.5, 0.5], vec![10.0; 3], vec![1.0, 1.0], vec![(0, 0, 0.5), (1, 0, 0.5), (2, 0, 0.5)], 1.0);
        let res = sweep(&i);
        assert_eq!(res.best, 0);
        assert_eq!(res.best().ratio, 0.0);
    }

    #[test]
    fn zero_budget_sweep_is_flat() {
        let i = f1(10.0, [4.0, 4.0], 0.0);
        let res = sweep(&i);
        assert_eq!(res.per_split.len(), 101);
        assert!(res.per_split.iter().all(|o| o.total_risk == 0.75 && o.ratio == 1.0));
        assert_eq!(res.best, 0);
    }

    #[test]
    fn finer_grid() {
        let i = f1(10.0, [4.0, 4.0], 4.0);
        let res = sweep_with(&i, &SweepOptions { steps_per_percent: 4, ..Default::default() });
        assert_eq!(res.per_split.len(), 401);
        assert_eq!(res.per_split[2].split_percent, 0.5);
    }

    #[test]
    fn csv_layout() {
        let i = f1(10.0, [4.0, 4.0], 4.0);
        let mut buf = Vec::new();
        sweep(&i).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 102);
        assert_eq!(lines[0], "split,spentIsolation,spentClosure,totalRisk,ratio");
        assert_eq!(lines[1], "0,0,0,0.75,1");
        // greedy isolates the higher-f person u0, leaving u1 exposed
        assert_eq!(lines[101], "100,4,0,0.25,0.3333333333333333");
    }

    #[test]
    fn restrictions_validate() {
        let i = f1(10.0, [4.0, 4.0], 4.0);
        let r = Restrictions { forced_closures: [FacilityId(1)].into(), ..Default::default() };
        assert_eq!(
            Planner::with_restrictions(&i, &r).unwrap_err(),
            RestrictionError::FacilityOutOfRange(FacilityId(1))
        );
        let r = Restrictions {
            forced_isolations: [PersonId(0)].into(),
            excluded_people: [PersonId(0)].into(),
            ..Default::default()
        };
        assert!(matches!(Planner::with_restrictions(&i, &r), Err(RestrictionError::PersonConflict(_))));
        let r = Restrictions { forced_closures: [FacilityId(0)].into(), ..Default::default() };
        assert!(matches!(Planner::with_restrictions(&i, &r), Err(RestrictionError::ForcedOverBudget { .. })));
        let r = Restrictions { budget: Some(-1.0), ..Default::default() };
        assert!(matches!(Planner::with_restrictions(&i, &r), Err(RestrictionError::InvalidBudget(_))));
    }

    #[test]
    fn restrictions_are_honored() {
        let i = f1(10.0, [4.0, 4.0], 14.0);
        let r = Restrictions {
            forced_closures: [FacilityId(0)].into(),
            excluded_people: [PersonId(1)].into(),
            ..Default::default()
        };
        let res = Planner::with_restrictions(&i, &r).unwrap().sweep(&SweepOptions::default());
        for o in &res.per_split {
            assert!(o.solution.closed_facilities().contains(&FacilityId(0)));
            assert!(!o.solution.isolated_people().contains(&PersonId(1)));
            assert!(o.solution.spent() <= 14.0);
        }
        assert_eq!(res.best().ratio, 0.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let i = inst(
            vec![0.9, 0.5, 0.1, 0.3],
            vec![1.0, 0.7, 0.2, 0.4],
            vec![1.5, 0.9, 2.0],
            vec![(0, 0, 0.5), (1, 0, 0.5), (1, 1, 0.4), (2, 1, 0.5), (3, 2, 0.6), (0, 2, 0.2)],
            2.0,
        );
        let a = sweep_with(&i, &SweepOptions { execution: Execution::Sequential, ..Default::default() });
        let b = sweep_with(&i, &SweepOptions { execution: Execution::Parallel, ..Default::default() });
        assert_eq!(a, b);
    }
}
