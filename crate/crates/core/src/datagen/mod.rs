//! Reproducible synthetic instances.
//!
//! Generation runs in fixed phases:
//!
//! 1. facility sizes from a truncated power law on `[min, max]`, rounded;
//! 2. population `round(sum of sizes / avgActivities)`;
//! 3. each facility draws `size` distinct visitors uniformly at random;
//! 4. each visit gets an exponential time share, rescaled per person when the
//!    day would be oversubscribed;
//! 5. infection probabilities from a truncated power law on `[floor, 1]`;
//! 6. closure cost `size^x` with `x ~ Normal(mu, sigma)` clamped at 0;
//! 7. budget as a fraction of the total closure cost;
//! 8. isolation cost as a fraction of the budget.
//!
//! Every phase draws from its own ChaCha20 stream keyed by the seed.

mod sampling;
mod summary;

use rand::seq::index;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Edge, Instance, InstanceData};
use crate::numeric::exact_sum;

pub use sampling::TruncatedPowerLaw;
pub use summary::{summarize, Bucket, GenSummary, LogHistogram};

use sampling::{round_half_up, stream, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_facilities: usize,
    pub min_facility_size: usize,
    pub max_facility_size: usize,
    /// Power-law exponent of facility sizes.
    pub size_alpha: f64,
    /// Mean number of facilities a person visits per day.
    pub avg_activities: f64,
    /// Power-law exponent of infection probabilities.
    pub infect_alpha: f64,
    /// Smallest infection probability the power law can produce.
    pub infect_floor: f64,
    pub cost_mu: f64,
    pub cost_sigma: f64,
    /// Isolation cost per person as a fraction of the budget.
    pub isolation_cost_fraction: f64,
    /// When set, replaces `isolation_cost_fraction`: the isolation cost is
    /// chosen so the whole budget isolates exactly this fraction of people.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_population_fraction: Option<f64>,
    /// Budget as a fraction of the cost of closing every facility.
    pub budget_fraction: f64,
    /// Expected share of the day spent across all activities.
    pub day_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_facilities: 500,
            min_facility_size: 4,
            max_facility_size: 1000,
            size_alpha: 1.1,
            avg_activities: 4.0,
            infect_alpha: 2.0,
            infect_floor: 1e-4,
            cost_mu: 1.1,
            cost_sigma: 0.5,
            isolation_cost_fraction: 1e-3,
            isolation_population_fraction: None,
            budget_fraction: 0.01,
            day_fraction: 0.7,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("infeasible config: {0}")]
    Infeasible(String),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.min_facility_size < 1 || self.min_facility_size > self.max_facility_size {
            return bad("need 1 <= minFacilitySize <= maxFacilitySize");
        }
        if !(self.size_alpha > 0.0 && self.size_alpha.is_finite()) {
            return bad("sizeAlpha must be positive");
        }
        if !(self.avg_activities >= 1.0 && self.avg_activities.is_finite()) {
            return bad("avgActivities must be at least 1");
        }
        if !(self.infect_alpha > 0.0 && self.infect_alpha.is_finite()) {
            return bad("infectAlpha must be positive");
        }
        if !(self.infect_floor > 0.0 && self.infect_floor <= 1.0) {
            return bad("infectFloor must lie in (0, 1]");
        }
        if !self.cost_mu.is_finite() || !(self.cost_sigma >= 0.0 && self.cost_sigma.is_finite()) {
            return bad("need finite costMu and costSigma >= 0");
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return bad("budgetFraction must lie in (0, 1]");
        }
        if !(self.isolation_cost_fraction >= 0.0 && self.isolation_cost_fraction.is_finite()) {
            return bad("isolationCostFraction must be non-negative");
        }
        if let Some(p) = self.isolation_population_fraction {
            if !(p > 0.0 && p <= 1.0) {
                return bad("isolationPopulationFraction must lie in (0, 1]");
            }
        }
        if !(self.day_fraction > 0.0 && self.day_fraction <= 1.0) {
            return bad("dayFraction must lie in (0, 1]");
        }
        if self.n_facilities > 0 {
            let most_people =
                round_half_up(self.n_facilities as f64 * self.max_facility_size as f64 / self.avg_activities);
            if most_people < self.min_facility_size as f64 {
                return Err(GenError::Infeasible(format!(
                    "at most {most_people} people, fewer than the smallest facility size {}",
                    self.min_facility_size
                )));
            }
        }
        Ok(())
    }
}

/// Facility sizes for `config`, the first generation phase.
pub fn facility_sizes(config: &GenConfig) -> Vec<usize> {
    let law =
        TruncatedPowerLaw::new(config.min_facility_size as f64, config.max_facility_size as f64, config.size_alpha);
    let mut rng = stream(config.seed, Phase::Sizes);
    (0..config.n_facilities)
        .map(|_| {
            let s = round_half_up(law.sample(&mut rng)) as usize;
            s.clamp(config.min_facility_size, config.max_facility_size)
        })
        .collect()
}

pub fn generate(config: &GenConfig) -> Result<Instance, GenError> {
    config.validate()?;
    let sizes = facility_sizes(config);
    let total_size: usize = sizes.iter().sum();
    let n_people = round_half_up(total_size as f64 / config.avg_activities) as usize;
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if largest > n_people {
        return Err(GenError::Infeasible(format!(
            "a facility of size {largest} needs more than the {n_people} people available"
        )));
    }

    // memberships, person-major
    let mut visits: Vec<Vec<u32>> = vec![Vec::new(); n_people];
    let mut rng = stream(config.seed, Phase::Membership);
    for (v, &size) in sizes.iter().enumerate() {
        for u in index::sample(&mut rng, n_people, size) {
            visits[u].push(v as u32);
        }
    }

    // time shares
    let exp = Exp::new(config.avg_activities / config.day_fraction).expect("positive rate");
    let mut rng = stream(config.seed, Phase::TimeShare);
    let mut edges = Vec::with_capacity(total_size);
    let mut shares = Vec::new();
    for (u, facilities) in visits.iter().enumerate() {
        // facilities were pushed in ascending order
        shares.clear();
        shares.extend(facilities.iter().map(|_| exp.sample(&mut rng)));
        fit_day(&mut shares);
        edges.extend(facilities.iter().zip(&shares).map(|(&v, &t)| Edge::new(u as u32, v, t)));
    }

    let infection = TruncatedPowerLaw::new(config.infect_floor, 1.0, config.infect_alpha);
    let mut rng = stream(config.seed, Phase::Infection);
    let infection_prob: Vec<f64> = (0..n_people).map(|_| infection.sample(&mut rng)).collect();

    let normal = Normal::new(config.cost_mu, config.cost_sigma).expect("validated sigma");
    let mut rng = stream(config.seed, Phase::Cost);
    let closure_cost: Vec<f64> = sizes.iter().map(|&s| (s as f64).powf(normal.sample(&mut rng).max(0.0))).collect();

    let budget = config.budget_fraction * exact_sum(closure_cost.iter().copied());
    let per_person = match config.isolation_population_fraction {
        Some(p) if n_people > 0 => budget / (p * n_people as f64),
        Some(_) => 0.0,
        None => config.isolation_cost_fraction * budget,
    };

    let data = InstanceData {
        n_people,
        n_facilities: config.n_facilities,
        budget,
        infection_prob,
        isolation_cost: vec![per_person; n_people],
        closure_cost,
        edges,
        labels: None,
    };
    Instance::new(data).map_err(|e| GenError::Infeasible(format!("generated instance is invalid: {e}")))
}

/// Scales `shares` down until their exact sum is at most 1.
fn fit_day(shares: &mut [f64]) {
    let mut sum = exact_sum(shares.iter().copied());
    if sum <= 1.0 {
        return;
    }
    shares.iter_mut().for_each(|t| *t /= sum);
    loop {
        sum = exact_sum(shares.iter().copied());
        if sum <= 1.0 {
            return;
        }
        shares.iter_mut().for_each(|t| *t *= 1.0 - f64::EPSILON);
    }
}
