//! Facility, person and total risk on the residual graph.
//!
//! Closing a facility or isolating a person removes every edge incident to
//! it. On the remaining edges
//!
//! ```text
//! R(v) = sum over u of f(u) * p(u, v)
//! r(u) = sum over v of R(v) * p(u, v)
//! ```
//!
//! and the total risk is the sum of `r(u)`. Inner sums run in ascending id
//! order; totals use correctly rounded summation.

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Solution, SolutionError};
use crate::numeric::{plain_sum, ExactSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskReport {
    pub facility_risk: Vec<f64>,
    pub person_risk: Vec<f64>,
    pub total_risk: f64,
    pub baseline_risk: f64,
    pub ratio: f64,
}

/// `after / before`, defined as 1 when there was no risk to begin with.
#[inline]
pub fn risk_ratio(after: f64, before: f64) -> f64 {
    if before == 0.0 {
        1.0
    } else {
        after / before
    }
}

pub fn facility_risks(instance: &Instance, solution: &Solution) -> Result<Vec<f64>, SolutionError> {
    solution.check(instance)?;
    let (closed, isolated) = solution.masks(instance);
    let mut out = vec![0.0; instance.n_facilities()];
    fill_facility_risks(instance, &closed, &isolated, &mut out);
    Ok(out)
}

pub fn person_risks(instance: &Instance, solution: &Solution) -> Result<Vec<f64>, SolutionError> {
    solution.check(instance)?;
    let (closed, isolated) = solution.masks(instance);
    let mut facility = vec![0.0; instance.n_facilities()];
    fill_facility_risks(instance, &closed, &isolated, &mut facility);
    let mut out = vec![0.0; instance.n_people()];
    fill_person_risks(instance, &closed, &isolated, &facility, &mut out);
    Ok(out)
}

pub fn total_risk(instance: &Instance, solution: &Solution) -> Result<RiskReport, SolutionError> {
    solution.check(instance)?;
    let (closed, isolated) = solution.masks(instance);
    let mut eval = RiskEvaluator::new(instance);
    let baseline_risk = eval.baseline();
    let mut facility_risk = vec![0.0; instance.n_facilities()];
    fill_facility_risks(instance, &closed, &isolated, &mut facility_risk);
    let mut person_risk = vec![0.0; instance.n_people()];
    fill_person_risks(instance, &closed, &isolated, &facility_risk, &mut person_risk);
    let total_risk = person_risk.iter().copied().collect::<ExactSum>().value();
    Ok(RiskReport {
        facility_risk,
        person_risk,
        total_risk,
        baseline_risk,
        ratio: risk_ratio(total_risk, baseline_risk),
    })
}

/// Total risk with no closures and no isolations.
pub fn baseline_risk(instance: &Instance) -> f64 {
    RiskEvaluator::new(instance).baseline()
}

fn fill_facility_risks(instance: &Instance, closed: &[bool], isolated: &[bool], out: &mut [f64]) {
    let f = instance.infection_prob();
    for (v, r) in out.iter_mut().enumerate() {
        *r = if closed[v] {
            0.0
        } else {
            plain_sum(
                instance
                    .people_of(v)
                    .iter()
                    .filter(|l| !isolated[l.other as usize])
                    .map(|l| f[l.other as usize] * l.time_share),
            )
        };
    }
}

fn fill_person_risks(instance: &Instance, closed: &[bool], isolated: &[bool], facility: &[f64], out: &mut [f64]) {
    for (u, r) in out.iter_mut().enumerate() {
        *r = if isolated[u] {
            0.0
        } else {
            plain_sum(
                instance
                    .facilities_of(u)
                    .iter()
                    .filter(|l| !closed[l.other as usize])
                    .map(|l| facility[l.other as usize] * l.time_share),
            )
        };
    }
}

/// Reusable scratch space for evaluating many closure/isolation masks on
/// one instance. Results are bit-identical to [`total_risk`].
#[derive(Debug, Clone)]
pub struct RiskEvaluator<'a> {
    instance: &'a Instance,
    facility: Vec<f64>,
}

impl<'a> RiskEvaluator<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        RiskEvaluator { instance, facility: vec![0.0; instance.n_facilities()] }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    /// Total risk of the residual graph for the given masks.
    pub fn total(&mut self, closed: &[bool], isolated: &[bool]) -> f64 {
        let inst = self.instance;
        debug_assert_eq!(closed.len(), inst.n_facilities());
        debug_assert_eq!(isolated.len(), inst.n_people());
        fill_facility_risks(inst, closed, isolated, &mut self.facility);
        let mut total = ExactSum::new();
        for u in 0..inst.n_people() {
            if isolated[u] {
                total.add(0.0);
                continue;
            }
            let r = plain_sum(
                inst.facilities_of(u)
                    .iter()
                    .filter(|l| !closed[l.other as usize])
                    .map(|l| self.facility[l.other as usize] * l.time_share),
            );
            total.add(r);
        }
        total.value()
    }

    pub fn baseline(&mut self) -> f64 {
        let closed = vec![false; self.instance.n_facilities()];
        let isolated = vec![false; self.instance.n_people()];
        self.total(&closed, &isolated)
    }

    /// Facility risks computed by the last call to [`RiskEvaluator::total`].
    pub fn last_facility_risks(&self) -> &[f64] {
        &self.facility
    }
}
