//! Mixed-integer linear model of the planning problem and an LP-file writer.
//!
//! Binary `a_u` is 1 while person `u` stays active (not isolated) and `b_v`
//! is 1 while facility `v` stays open. Continuous variables carry the risks:
//!
//! ```text
//! R_v = sum_u f(u) p(u,v) a_u                      R_v in [0, Rmax(v)]
//! w_v = R_v * b_v     (linearized with Rmax(v))    w_v in [0, Rmax(v)]
//! r_u = sum_v p(u,v) w_v                           r_u in [0, rmax(u)]
//! t_u = r_u * a_u     (linearized with rmax(u))    t_u in [0, rmax(u)]
//! minimize sum_u t_u
//! sum_u c'(u) (1 - a_u) + sum_v c(v) (1 - b_v) <= B
//! ```
//!
//! `Rmax(v)` is the facility risk with everyone active and `rmax(u)` the
//! person risk with every facility at `Rmax`. Each product `y = x * z` with
//! binary `z` and `0 <= x <= M` uses the four rows `y <= M z`, `y <= x`,
//! `y >= x - M (1 - z)` and `y >= 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Solution};
use crate::numeric::plain_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// `sum(coef * var) sense rhs`; terms index into [`IlpModel::variables`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IlpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
}

/// Positions of each variable family inside a model built by [`build_ilp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_people: usize,
    pub n_facilities: usize,
}

impl Layout {
    pub fn of(instance: &Instance) -> Self {
        Layout { n_people: instance.n_people(), n_facilities: instance.n_facilities() }
    }
    pub fn active(&self, u: usize) -> usize {
        u
    }
    pub fn open(&self, v: usize) -> usize {
        self.n_people + v
    }
    pub fn facility_risk(&self, v: usize) -> usize {
        self.n_people + self.n_facilities + v
    }
    pub fn open_risk(&self, v: usize) -> usize {
        self.n_people + 2 * self.n_facilities + v
    }
    pub fn person_risk(&self, u: usize) -> usize {
        self.n_people + 3 * self.n_facilities + u
    }
    pub fn active_risk(&self, u: usize) -> usize {
        2 * self.n_people + 3 * self.n_facilities + u
    }
    pub fn n_binaries(&self) -> usize {
        self.n_people + self.n_facilities
    }
}

pub fn build_ilp(instance: &Instance) -> IlpModel {
    let (np, nf) = (instance.n_people(), instance.n_facilities());
    let at = Layout::of(instance);
    let f = instance.infection_prob();

    let r_max: Vec<f64> =
        (0..nf).map(|v| plain_sum(instance.people_of(v).iter().map(|l| f[l.other as usize] * l.time_share))).collect();
    let p_max: Vec<f64> = (0..np)
        .map(|u| plain_sum(instance.facilities_of(u).iter().map(|l| r_max[l.other as usize] * l.time_share)))
        .collect();

    let mut variables = Vec::with_capacity(2 * np + 4 * nf + 2 * np);
    let binary = |name: String| Variable { name, kind: VarKind::Binary, lower: 0.0, upper: 1.0 };
    let continuous = |name: String, upper: f64| Variable { name, kind: VarKind::Continuous, lower: 0.0, upper };
    variables.extend((0..np).map(|u| binary(format!("a_{u}"))));
    variables.extend((0..nf).map(|v| binary(format!("b_{v}"))));
    variables.extend((0..nf).map(|v| continuous(format!("R_{v}"), r_max[v])));
    variables.extend((0..nf).map(|v| continuous(format!("w_{v}"), r_max[v])));
    variables.extend((0..np).map(|u| continuous(format!("r_{u}"), p_max[u])));
    variables.extend((0..np).map(|u| continuous(format!("t_{u}"), p_max[u])));

    let mut constraints = Vec::new();

    // budget: sum c'(1 - a) + sum c(1 - b) <= B  <=>  -sum c' a - sum c b <= B - sum c' - sum c
    let fixed: f64 =
        crate::numeric::exact_sum(instance.isolation_cost().iter().chain(instance.closure_cost()).copied());
    let mut budget_terms: Vec<(usize, f64)> = (0..np).map(|u| (at.active(u), -instance.isolation_cost()[u])).collect();
    budget_terms.extend((0..nf).map(|v| (at.open(v), -instance.closure_cost()[v])));
    constraints.push(Constraint {
        name: "budget".into(),
        terms: budget_terms,
        sense: Sense::Le,
        rhs: instance.budget() - fixed,
    });

    for v in 0..nf {
        let mut terms = vec![(at.facility_risk(v), 1.0)];
        terms.extend(
            instance.people_of(v).iter().map(|l| (at.active(l.other as usize), -(f[l.other as usize] * l.time_share))),
        );
        constraints.push(Constraint { name: format!("facility_risk_{v}"), terms, sense: Sense::Eq, rhs: 0.0 });
        push_product(
            &mut constraints,
            &format!("open_risk_{v}"),
            at.open_risk(v),
            at.facility_risk(v),
            at.open(v),
            r_max[v],
        );
    }
    for u in 0..np {
        let mut terms = vec![(at.person_risk(u), 1.0)];
        terms.extend(instance.facilities_of(u).iter().map(|l| (at.open_risk(l.other as usize), -l.time_share)));
        constraints.push(Constraint { name: format!("person_risk_{u}"), terms, sense: Sense::Eq, rhs: 0.0 });
        push_product(
            &mut constraints,
            &format!("active_risk_{u}"),
            at.active_risk(u),
            at.person_risk(u),
            at.active(u),
            p_max[u],
        );
    }

    let objective = (0..np).map(|u| (at.active_risk(u), 1.0)).collect();
    IlpModel { variables, constraints, objective }
}

/// Rows for `product = value * switch` with `0 <= value <= bound`.
fn push_product(out: &mut Vec<Constraint>, name: &str, product: usize, value: usize, switch: usize, bound: f64) {
    out.push(Constraint {
        name: format!("{name}_switch"),
        terms: vec![(product, 1.0), (switch, -bound)],
        sense: Sense::Le,
        rhs: 0.0,
    });
    out.push(Constraint {
        name: format!("{name}_value"),
        terms: vec![(product, 1.0), (value, -1.0)],
        sense: Sense::Le,
        rhs: 0.0,
    });
    out.push(Constraint {
        name: format!("{name}_floor"),
        terms: vec![(product, 1.0), (value, -1.0), (switch, -bound)],
        sense: Sense::Ge,
        rhs: -bound,
    });
}

/// Binary part of a model point for a solution: `a_u = 0` for isolated
/// people, `b_v = 0` for closed facilities, 1 otherwise.
pub fn binaries_for(instance: &Instance, solution: &Solution) -> Vec<f64> {
    let (closed, isolated) = solution.masks(instance);
    isolated
        .iter()
        .map(|&x| if x { 0.0 } else { 1.0 })
        .chain(closed.iter().map(|&x| if x { 0.0 } else { 1.0 }))
        .collect()
}

impl IlpModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        plain_sum(self.objective.iter().map(|&(i, c)| c * point[i]))
    }

    /// First violated bound, integrality or row at tolerance `tol`.
    pub fn check_point(&self, point: &[f64], tol: f64) -> Result<(), String> {
        if point.len() != self.variables.len() {
            return Err(format!("point has {} entries, model has {} variables", point.len(), self.variables.len()));
        }
        for (var, &x) in self.variables.iter().zip(point) {
            if x < var.lower - tol || x > var.upper + tol {
                return Err(format!("{} = {x} outside [{}, {}]", var.name, var.lower, var.upper));
            }
            if var.kind == VarKind::Binary && x != 0.0 && x != 1.0 {
                return Err(format!("{} = {x} is not binary", var.name));
            }
        }
        for c in &self.constraints {
            let lhs = plain_sum(c.terms.iter().map(|&(i, a)| a * point[i]));
            let scale = tol * (1.0 + c.rhs.abs() + lhs.abs());
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + scale,
                Sense::Ge => lhs >= c.rhs - scale,
                Sense::Eq => (lhs - c.rhs).abs() <= scale,
            };
            if !ok {
                return Err(format!("{}: {lhs} {} {}", c.name, c.sense.symbol(), c.rhs));
            }
        }
        Ok(())
    }

    /// Fixes the binary variables (in model order) and pins every continuous
    /// variable by propagating rows with a single unknown. Fails when some
    /// continuous variable is not forced to a single value, or when the
    /// implied interval is empty.
    pub fn fix_binaries(&self, binaries: &[f64], tol: f64) -> Result<Vec<f64>, String> {
        let n = self.variables.len();
        let mut lo: Vec<f64> = self.variables.iter().map(|v| v.lower).collect();
        let mut hi: Vec<f64> = self.variables.iter().map(|v| v.upper).collect();
        let mut value: Vec<Option<f64>> = vec![None; n];
        let mut it = binaries.iter();
        for (i, var) in self.variables.iter().enumerate() {
            if var.kind == VarKind::Binary {
                let &b = it.next().ok_or("too few binary values")?;
                value[i] = Some(b);
            }
        }
        if it.next().is_some() {
            return Err("too many binary values".into());
        }

        let mut done = vec![false; self.constraints.len()];
        loop {
            let mut progress = false;
            for (k, c) in self.constraints.iter().enumerate() {
                if done[k] {
                    continue;
                }
                let mut unknown = None;
                let mut count = 0;
                let mut known = 0.0;
                for &(i, a) in &c.terms {
                    match value[i] {
                        Some(x) => known += a * x,
                        None => {
                            count += 1;
                            unknown = Some((i, a));
                        }
                    }
                }
                if count != 1 {
                    if count == 0 {
                        done[k] = true;
                    }
                    continue;
                }
                let (i, a) = unknown.expect("one unknown");
                let bound = (c.rhs - known) / a;
                match (c.sense, a > 0.0) {
                    (Sense::Eq, _) => {
                        lo[i] = lo[i].max(bound);
                        hi[i] = hi[i].min(bound);
                        value[i] = Some(bound);
                    }
                    (Sense::Le, true) | (Sense::Ge, false) => hi[i] = hi[i].min(bound),
                    (Sense::Le, false) | (Sense::Ge, true) => lo[i] = lo[i].max(bound),
                }
                done[k] = true;
                progress = true;
                if value[i].is_none() && hi[i] - lo[i] <= tol * (1.0 + hi[i].abs()) {
                    value[i] = Some(0.5 * (lo[i] + hi[i]));
                }
                if lo[i] > hi[i] + tol * (1.0 + hi[i].abs()) {
                    return Err(format!("{} has empty range [{}, {}]", self.variables[i].name, lo[i], hi[i]));
                }
            }
            if !progress {
                break;
            }
        }
        value
            .into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| format!("{} is not pinned: [{}, {}]", self.variables[i].name, lo[i], hi[i])))
            .collect()
    }
}

const TERMS_PER_LINE: usize = 8;

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_terms(out: &mut String, model: &IlpModel, terms: &[(usize, f64)]) {
    for (k, &(i, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.variables[i].name;
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", num(a.abs()));
    }
}

/// LP-file text: `Minimize`, `Subject To`, `Bounds`, `Binary`, `End`.
pub fn write_lp(model: &IlpModel) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("\\ closure and isolation planning model\n");
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, &model.objective);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
        let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
    }
    out.push_str("Binary\n");
    let binaries: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    for chunk in binaries.chunks(TERMS_PER_LINE * 2) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out.into_bytes()
}


#[cfg(test)]
mod tests {
    use super::lp_read::read_lp;
    use super::*;
    use crate::model::fixtures::f1;
    use crate::model::{Edge, InstanceData};
    use crate::oracle::{solve_exact, DEFAULT_LIMIT};
    use crate::risk::total_risk;

    fn count(model: &IlpModel, prefix: &str) -> usize {
        model.variables.iter().filter(|v| v.name.starts_with(prefix)).count()
    }

    #[test]
    fn f1_shape() {
        let inst = f1(10.0, [4.0, 4.0], 4.0);
        let m = build_ilp(&inst);
        assert_eq!(count(&m, "a_"), 2);
        assert_eq!(count(&m, "b_"), 1);
        assert_eq!((count(&m, "R_"), count(&m, "w_")), (1, 1));
        assert_eq!((count(&m, "r_"), count(&m, "t_")), (2, 2));
        assert_eq!(m.constraints.iter().filter(|c| c.name == "budget").count(), 1);
        // 1 budget + (1 + 3) per facility + (1 + 3) per person
        assert_eq!(m.constraints.len(), 1 + 4 + 8);
        let names: Vec<_> = m.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["a_0", "a_1", "b_0", "R_0", "w_0", "r_0", "r_1", "t_0", "t_1"]);
        assert_eq!(m.variables[3].upper, 0.5);
        assert_eq!(m.variables[5].upper, 0.25);
    }

    #[test]
    fn f1_lp_text() {
        let m = build_ilp(&f1(10.0, [4.0, 4.0], 4.0));
        let text = String::from_utf8(write_lp(&m)).unwrap();
        assert!(text.contains("\nBinary\n a_0 a_1 b_0\nEnd\n"), "{text}");
        assert!(text.contains(" obj: + 1.0 t_0 + 1.0 t_1\n"), "{text}");
        assert!(text.contains(" budget: - 4.0 a_0 - 4.0 a_1 - 10.0 b_0 <= -14.0\n"), "{text}");
        assert!(text.contains(" 0.0 <= R_0 <= 0.5\n"), "{text}");
        assert_eq!(read_lp(&text).unwrap(), m);
    }

    #[test]
    fn no_edges_means_zero_objective() {
        let inst = Instance::new(InstanceData {
            n_people: 2,
            n_facilities: 1,
            budget: 1.0,
            infection_prob: vec![0.5, 0.5],
            isolation_cost: vec![1.0, 1.0],
            closure_cost: vec![1.0],
            ..Default::default()
        })
        .unwrap();
        let m = build_ilp(&inst);
        assert!(m.constraints.iter().any(|c| c.name == "budget"));
        for bits in 0..8u32 {
            let b: Vec<f64> = (0..3).map(|i| (bits >> i & 1) as f64).collect();
            let point = m.fix_binaries(&b, 1e-12).unwrap();
            assert_eq!(m.objective_value(&point), 0.0);
        }
    }

    #[test]
    fn empty_model_is_well_formed() {
        let m = IlpModel::default();
        let text = String::from_utf8(write_lp(&m)).unwrap();
        assert_eq!(text.lines().filter(|l| *l == "Subject To").count(), 1);
        assert_eq!(read_lp(&text).unwrap(), m);
    }

    #[test]
    fn long_rows_wrap_and_reparse() {
        let n = 30u32;
        let inst = Instance::new(InstanceData {
            n_people: n as usize,
            n_facilities: 1,
            budget: 3.0,
            infection_prob: (0..n).map(|u| u as f64 / n as f64).collect(),
            isolation_cost: vec![0.1; n as usize],
            closure_cost: vec![1e-7],
            edges: (0..n).map(|u| Edge::new(u, 0, 1.0 / 3.0)).collect(),
            labels: None,
        })
        .unwrap();
        let m = build_ilp(&inst);
        let text = String::from_utf8(write_lp(&m)).unwrap();
        assert!(text.lines().all(|l| l.len() < 510));
        assert_eq!(read_lp(&text).unwrap(), m);
    }

    #[test]
    fn oracle_optimum_is_feasible_with_matching_objective() {
        let inst = f1(10.0, [4.0, 4.0], 4.0);
        let m = build_ilp(&inst);
        let opt = solve_exact(&inst, DEFAULT_LIMIT).unwrap();
        let point = m.fix_binaries(&binaries_for(&inst, &opt.optimum), 1e-12).unwrap();
        m.check_point(&point, 1e-9).unwrap();
        assert!((m.objective_value(&point) - opt.optimal_risk).abs() <= 1e-9);
        assert_eq!(total_risk(&inst, &opt.optimum).unwrap().total_risk, opt.optimal_risk);
    }

    #[test]
    fn over_budget_point_violates_budget_row() {
        let inst = f1(10.0, [4.0, 4.0], 4.0);
        let m = build_ilp(&inst);
        let point = m.fix_binaries(&[0.0, 0.0, 0.0], 1e-12).unwrap();
        let err = m.check_point(&point, 1e-9).unwrap_err();
        assert!(err.starts_with("budget"), "{err}");
    }
}
