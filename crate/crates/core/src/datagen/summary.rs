use std::io;

use serde::{Deserialize, Serialize};

use crate::model::Instance;
use crate::numeric::exact_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts per power-of-two bucket `[2^k, 2^(k+1))`, plus a separate count
/// of zeros. Buckets are contiguous between the smallest and largest
/// non-empty one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogHistogram {
    pub zeros: usize,
    pub buckets: Vec<Bucket>,
}

impl LogHistogram {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut zeros = 0;
        let mut exps = Vec::new();
        for x in values {
            if x <= 0.0 {
                zeros += 1;
            } else {
                exps.push(x.log2().floor() as i32);
            }
        }
        let (Some(&lo), Some(&hi)) = (exps.iter().min(), exps.iter().max()) else {
            return LogHistogram { zeros, buckets: Vec::new() };
        };
        let mut buckets: Vec<Bucket> =
            (lo..=hi).map(|k| Bucket { lower: 2f64.powi(k), upper: 2f64.powi(k + 1), count: 0 }).collect();
        for k in exps {
            buckets[(k - lo) as usize].count += 1;
        }
        LogHistogram { zeros, buckets }
    }

    pub fn total(&self) -> usize {
        self.zeros + self.buckets.iter().map(|b| b.count).sum::<usize>()
    }

    /// Values in buckets whose lower edge is at least `threshold`.
    pub fn count_at_least(&self, threshold: f64) -> usize {
        self.buckets.iter().filter(|b| b.lower >= threshold).map(|b| b.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenSummary {
    pub n_people: usize,
    pub n_facilities: usize,
    /// Number of (person, facility) memberships, i.e. the sum of facility sizes.
    pub total_memberships: usize,
    pub total_closure_cost: f64,
    pub budget: f64,
    pub mean_activities: f64,
    pub facility_sizes: LogHistogram,
    pub activities: LogHistogram,
    pub infection_prob: LogHistogram,
    pub closure_cost: LogHistogram,
}

pub fn summarize(instance: &Instance) -> GenSummary {
    let sizes: Vec<f64> = (0..instance.n_facilities()).map(|v| instance.people_of(v).len() as f64).collect();
    let activities: Vec<f64> = (0..instance.n_people()).map(|u| instance.facilities_of(u).len() as f64).collect();
    let total_memberships = instance.edges().len();
    GenSummary {
        n_people: instance.n_people(),
        n_facilities: instance.n_facilities(),
        total_memberships,
        total_closure_cost: exact_sum(instance.closure_cost().iter().copied()),
        budget: instance.budget(),
        mean_activities: if instance.n_people() == 0 {
            0.0
        } else {
            total_memberships as f64 / instance.n_people() as f64
        },
        facility_sizes: LogHistogram::from_values(sizes),
        activities: LogHistogram::from_values(activities),
        infection_prob: LogHistogram::from_values(instance.infection_prob().iter().copied()),
        closure_cost: LogHistogram::from_values(instance.closure_cost().iter().copied()),
    }
}

impl GenSummary {
    /// Columns: `histogram,lower,upper,count`. Zeros are reported as the
    /// `[0, 0]` bucket.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["histogram", "lower", "upper", "count"])?;
        for (name, h) in [
            ("facilitySize", &self.facility_sizes),
            ("activities", &self.activities),
            ("infectionProb", &self.infection_prob),
            ("closureCost", &self.closure_cost),
        ] {
            if h.zeros > 0 {
                w.write_record([name, "0", "0", &h.zeros.to_string()])?;
            }
            for b in &h.buckets {
                w.write_record([name.to_string(), b.lower.to_string(), b.upper.to_string(), b.count.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
