//! Instances and solutions of the closure/isolation planning problem.
//!
//! An [`Instance`] is a bipartite graph between people and facilities. Each
//! edge carries the share of a day the person spends in the facility. People
//! carry an infection probability and an isolation cost, facilities carry a
//! closure cost, and a single budget bounds the combined spend.
//!
//! Instances are validated once on construction and are immutable afterwards.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{exact_sum, ExactSum};

/// Version written to and required from instance documents.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacilityId(pub u32);

impl PersonId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FacilityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

impl fmt::Display for FacilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Time a person spends in a facility, as a fraction of a day.
///
/// Serialized as a `[person, facility, timeShare]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, f64)", into = "(u32, u32, f64)")]
pub struct Edge {
    pub person: PersonId,
    pub facility: FacilityId,
    pub time_share: f64,
}

impl Edge {
    pub fn new(person: u32, facility: u32, time_share: f64) -> Self {
        Edge { person: PersonId(person), facility: FacilityId(facility), time_share }
    }
}

impl From<(u32, u32, f64)> for Edge {
    fn from((p, f, t): (u32, u32, f64)) -> Self {
        Edge::new(p, f, t)
    }
}

impl From<Edge> for (u32, u32, f64) {
    fn from(e: Edge) -> Self {
        (e.person.0, e.facility.0, e.time_share)
    }
}

/// Optional display names, parallel to the dense ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default)]
    pub people: Vec<String>,
    #[serde(default)]
    pub facilities: Vec<String>,
}

/// Raw, unvalidated instance contents. Convert with [`Instance::new`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceData {
    pub n_people: usize,
    pub n_facilities: usize,
    pub budget: f64,
    pub infection_prob: Vec<f64>,
    pub isolation_cost: Vec<f64>,
    pub closure_cost: Vec<f64>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    LengthMismatch { expected: usize, found: usize },
    PersonOutOfRange(u32),
    FacilityOutOfRange(u32),
    TimeShareOutOfRange(f64),
    DuplicateEdge,
    ProbabilityOutOfRange(f64),
    NegativeCost(f64),
    NegativeBudget(f64),
    NonFinite,
    DayOversubscribed(f64),
}

/// One broken invariant and where it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        write!(f, "{}: ", self.location)?;
        match &self.kind {
            LengthMismatch { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            PersonOutOfRange(p) => write!(f, "person id {p} out of range"),
            FacilityOutOfRange(v) => write!(f, "facility id {v} out of range"),
            TimeShareOutOfRange(t) => write!(f, "timeShare {t} outside [0, 1]"),
            DuplicateEdge => write!(f, "duplicate (person, facility) edge"),
            ProbabilityOutOfRange(p) => write!(f, "infection probability {p} outside [0, 1]"),
            NegativeCost(c) => write!(f, "negative cost {c}"),
            NegativeBudget(b) => write!(f, "negative budget {b}"),
            NonFinite => write!(f, "value is not finite"),
            DayOversubscribed(s) => write!(f, "day oversubscribed (timeShare sum {s} > 1)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed instance document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported schema version {found:?}, expected {expected}")]
    SchemaVersion { found: Option<u64>, expected: u32 },
    #[error("instance failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

/// Checks every instance invariant and returns all violations found.
pub fn validate(data: &InstanceData) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, kind: ViolationKind| out.push(Violation { location, kind });

    if !data.budget.is_finite() {
        push("budget".into(), ViolationKind::NonFinite);
    } else if data.budget < 0.0 {
        push("budget".into(), ViolationKind::NegativeBudget(data.budget));
    }

    for (name, len, expected) in [
        ("infectionProb", data.infection_prob.len(), data.n_people),
        ("isolationCost", data.isolation_cost.len(), data.n_people),
        ("closureCost", data.closure_cost.len(), data.n_facilities),
    ] {
        if len != expected {
            push(name.into(), ViolationKind::LengthMismatch { expected, found: len });
        }
    }
    if let Some(labels) = &data.labels {
        if !labels.people.is_empty() && labels.people.len() != data.n_people {
            push(
                "labels.people".into(),
                ViolationKind::LengthMismatch { expected: data.n_people, found: labels.people.len() },
            );
        }
        if !labels.facilities.is_empty() && labels.facilities.len() != data.n_facilities {
            push(
                "labels.facilities".into(),
                ViolationKind::LengthMismatch { expected: data.n_facilities, found: labels.facilities.len() },
            );
        }
    }

    for (i, &p) in data.infection_prob.iter().enumerate() {
        let loc = format!("infectionProb[{i}]");
        if !p.is_finite() {
            push(loc, ViolationKind::NonFinite);
        } else if !(0.0..=1.0).contains(&p) {
            push(loc, ViolationKind::ProbabilityOutOfRange(p));
        }
    }
    for (name, costs) in [("isolationCost", &data.isolation_cost), ("closureCost", &data.closure_cost)] {
        for (i, &c) in costs.iter().enumerate() {
            let loc = format!("{name}[{i}]");
            if !c.is_finite() {
                push(loc, ViolationKind::NonFinite);
            } else if c < 0.0 {
                push(loc, ViolationKind::NegativeCost(c));
            }
        }
    }

    let mut seen = HashSet::with_capacity(data.edges.len());
    let mut day: Vec<ExactSum> = vec![ExactSum::new(); data.n_people];
    for (i, e) in data.edges.iter().enumerate() {
        let loc = || format!("edges[{i}] ({}, {})", e.person, e.facility);
        let mut ids_ok = true;
        if e.person.index() >= data.n_people {
            push(loc(), ViolationKind::PersonOutOfRange(e.person.0));
            ids_ok = false;
        }
        if e.facility.index() >= data.n_facilities {
            push(loc(), ViolationKind::FacilityOutOfRange(e.facility.0));
            ids_ok = false;
        }
        if !e.time_share.is_finite() {
            push(loc(), ViolationKind::NonFinite);
            continue;
        }
        let in_range = (0.0..=1.0).contains(&e.time_share);
        if !in_range {
            push(loc(), ViolationKind::TimeShareOutOfRange(e.time_share));
        }
        if !seen.insert((e.person, e.facility)) {
            push(loc(), ViolationKind::DuplicateEdge);
        }
        // An edge already flagged for its own range is not counted again
        // against the person's day.
        if ids_ok && in_range {
            day[e.person.index()].add(e.time_share);
        }
    }
    for (u, sum) in day.iter().enumerate() {
        let s = sum.value();
        if s > 1.0 {
            push(format!("person u{u}"), ViolationKind::DayOversubscribed(s));
        }
    }
    out
}

/// Adjacency entry: the id on the other side of the edge and its time share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub other: u32,
    pub time_share: f64,
}

/// Compressed adjacency, sorted by the id on the other side.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    links: Vec<Link>,
}

impl Adjacency {
    fn build(n: usize, edges: impl Iterator<Item = (usize, u32, f64)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (k, _, _) in edges.clone() {
            offsets[k + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut links = vec![Link { other: 0, time_share: 0.0 }; offsets[n]];
        for (k, other, time_share) in edges {
            links[cursor[k]] = Link { other, time_share };
            cursor[k] += 1;
        }
        for i in 0..n {
            links[offsets[i]..offsets[i + 1]].sort_by_key(|l| l.other);
        }
        Adjacency { offsets, links }
    }

    #[inline]
    fn of(&self, k: usize) -> &[Link] {
        &self.links[self.offsets[k]..self.offsets[k + 1]]
    }
}

/// A validated, immutable instance with person-major and facility-major
/// adjacency.
#[derive(Debug, Clone)]
pub struct Instance {
    data: InstanceData,
    by_person: Adjacency,
    by_facility: Adjacency,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl Instance {
    pub fn new(data: InstanceData) -> Result<Self, ModelError> {
        let violations = validate(&data);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let by_person =
            Adjacency::build(data.n_people, data.edges.iter().map(|e| (e.person.index(), e.facility.0, e.time_share)));
        let by_facility = Adjacency::build(
            data.n_facilities,
            data.edges.iter().map(|e| (e.facility.index(), e.person.0, e.time_share)),
        );
        Ok(Instance { data, by_person, by_facility })
    }

    pub fn empty() -> Self {
        Instance::new(InstanceData::default()).expect("empty instance is valid")
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    #[inline]
    pub fn n_people(&self) -> usize {
        self.data.n_people
    }

    #[inline]
    pub fn n_facilities(&self) -> usize {
        self.data.n_facilities
    }

    #[inline]
    pub fn budget(&self) -> f64 {
        self.data.budget
    }

    #[inline]
    pub fn infection_prob(&self) -> &[f64] {
        &self.data.infection_prob
    }

    #[inline]
    pub fn isolation_cost(&self) -> &[f64] {
        &self.data.isolation_cost
    }

    #[inline]
    pub fn closure_cost(&self) -> &[f64] {
        &self.data.closure_cost
    }

    pub fn edges(&self) -> &[Edge] {
        &self.data.edges
    }

    /// Facilities visited by person `u`, ascending by facility id.
    #[inline]
    pub fn facilities_of(&self, u: usize) -> &[Link] {
        self.by_person.of(u)
    }

    /// People visiting facility `v`, ascending by person id.
    #[inline]
    pub fn people_of(&self, v: usize) -> &[Link] {
        self.by_facility.of(v)
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.data.labels.as_ref()
    }

    /// Copy of this instance with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self, ModelError> {
        let mut data = self.data.clone();
        data.budget = budget;
        Instance::new(data)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        struct VersionProbe {
            version: Option<serde_json::Value>,
        }
        let probe: VersionProbe = serde_json::from_slice(bytes)?;
        match probe.version.as_ref().and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            found => return Err(ModelError::SchemaVersion { found, expected: SCHEMA_VERSION }),
        }
        let doc: Document = serde_json::from_slice(bytes)?;
        Instance::new(doc.data)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = DocumentRef { version: SCHEMA_VERSION, data: &self.data };
        serde_json::to_vec(&doc).expect("validated instance contains only finite numbers")
    }
}

#[derive(Deserialize)]
struct Document {
    #[allow(dead_code)]
    version: u32,
    #[serde(flatten)]
    data: InstanceData,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    version: u32,
    #[serde(flatten)]
    data: &'a InstanceData,
}

/// Parses an instance document.
pub fn load_instance(bytes: &[u8]) -> Result<Instance, ModelError> {
    Instance::from_json(bytes)
}

/// Serializes an instance document.
pub fn save_instance(instance: &Instance) -> Vec<u8> {
    instance.to_json()
}

#[derive(Debug, Error, PartialEq)]
pub enum SolutionError {
    #[error("facility id {0} out of range")]
    FacilityOutOfRange(FacilityId),
    #[error("person id {0} out of range")]
    PersonOutOfRange(PersonId),
}

/// Facilities to close and people to isolate, with the money they cost.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Solution {
    closed_facilities: BTreeSet<FacilityId>,
    isolated_people: BTreeSet<PersonId>,
    spent: f64,
}

impl Solution {
    pub fn empty() -> Self {
        Solution::default()
    }

    pub fn new(
        instance: &Instance,
        closed: impl IntoIterator<Item = FacilityId>,
        isolated: impl IntoIterator<Item = PersonId>,
    ) -> Result<Self, SolutionError> {
        let closed_facilities: BTreeSet<_> = closed.into_iter().collect();
        let isolated_people: BTreeSet<_> = isolated.into_iter().collect();
        if let Some(&v) = closed_facilities.iter().find(|v| v.index() >= instance.n_facilities()) {
            return Err(SolutionError::FacilityOutOfRange(v));
        }
        if let Some(&u) = isolated_people.iter().find(|u| u.index() >= instance.n_people()) {
            return Err(SolutionError::PersonOutOfRange(u));
        }
        let spent = spend_of(instance, &closed_facilities, &isolated_people);
        Ok(Solution { closed_facilities, isolated_people, spent })
    }

    /// Builds a solution from closure/isolation masks sized to the instance.
    pub fn from_masks(instance: &Instance, closed: &[bool], isolated: &[bool]) -> Self {
        assert_eq!(closed.len(), instance.n_facilities());
        assert_eq!(isolated.len(), instance.n_people());
        let closed = closed.iter().enumerate().filter(|(_, &c)| c).map(|(v, _)| FacilityId(v as u32));
        let isolated = isolated.iter().enumerate().filter(|(_, &c)| c).map(|(u, _)| PersonId(u as u32));
        Solution::new(instance, closed, isolated).expect("mask indices are in range")
    }

    pub fn closed_facilities(&self) -> &BTreeSet<FacilityId> {
        &self.closed_facilities
    }

    pub fn isolated_people(&self) -> &BTreeSet<PersonId> {
        &self.isolated_people
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn spent_on_closures(&self, instance: &Instance) -> f64 {
        exact_sum(self.closed_facilities.iter().map(|v| instance.closure_cost()[v.index()]))
    }

    pub fn spent_on_isolation(&self, instance: &Instance) -> f64 {
        exact_sum(self.isolated_people.iter().map(|u| instance.isolation_cost()[u.index()]))
    }

    pub fn is_within_budget(&self, budget: f64) -> bool {
        self.spent <= budget
    }

    /// All ids are in range for `instance`.
    pub fn check(&self, instance: &Instance) -> Result<(), SolutionError> {
        if let Some(&v) = self.closed_facilities.iter().find(|v| v.index() >= instance.n_facilities()) {
            return Err(SolutionError::FacilityOutOfRange(v));
        }
        if let Some(&u) = self.isolated_people.iter().find(|u| u.index() >= instance.n_people()) {
            return Err(SolutionError::PersonOutOfRange(u));
        }
        Ok(())
    }

    /// `(closed, isolated)` boolean masks.
    pub fn masks(&self, instance: &Instance) -> (Vec<bool>, Vec<bool>) {
        let mut closed = vec![false; instance.n_facilities()];
        let mut isolated = vec![false; instance.n_people()];
        for v in &self.closed_facilities {
            closed[v.index()] = true;
        }
        for u in &self.isolated_people {
            isolated[u.index()] = true;
        }
        (closed, isolated)
    }
}

fn spend_of(instance: &Instance, closed: &BTreeSet<FacilityId>, isolated: &BTreeSet<PersonId>) -> f64 {
    let mut sum = ExactSum::new();
    sum.extend(closed.iter().map(|v| instance.closure_cost()[v.index()]));
    sum.extend(isolated.iter().map(|u| instance.isolation_cost()[u.index()]));
    sum.value()
}
