//! Signed qualitative influences and the violation index built on them.
//!
//! A positive influence of `w` on its child `z` requires, for every threshold
//! state `m > 1` of `z`, every pair of parent states `i > j` and every
//! configuration `y` of `z`'s other parents,
//!
//! ```text
//! Σ_{l ≥ m} P(z_l | w_i, y)  −  Σ_{l ≥ m} P(z_l | w_j, y)  ≥ 0
//! ```
//!
//! (`≤ 0` for a negative influence). The left-hand side is the inequality's
//! *slack*. The violation index sums, over all inequalities, how far each
//! slack lies on the wrong side of zero. All state pairs are enumerated, not
//! only adjacent ones, so a violation touches every parameter involved in it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, ParamArray, Structure};

/// Violation totals below this are reported as essentially zero.
pub const ESSENTIALLY_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+", alias = "positive")]
    Positive,
    #[serde(rename = "-", alias = "negative")]
    Negative,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        })
    }
}

/// `S^sign(parent, child)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Influence {
    pub parent: String,
    pub child: String,
    pub sign: Sign,
}

impl Influence {
    pub fn new(parent: impl Into<String>, child: impl Into<String>, sign: Sign) -> Self {
        Influence {
            parent: parent.into(),
            child: child.into(),
            sign,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub influences: Vec<Influence>,
}

impl ConstraintSet {
    pub fn new(influences: Vec<Influence>) -> Self {
        ConstraintSet { influences }
    }

    pub fn len(&self) -> usize {
        self.influences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.influences.is_empty()
    }

    /// Checks that every influence links a graph parent to its child and that
    /// no (parent, child) pair is constrained twice.
    pub fn check(&self, structure: &Structure) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for inf in &self.influences {
            let (Some(w), Some(z)) = (structure.index_of(&inf.parent), structure.index_of(&inf.child)) else {
                return Err(Error::InvalidConstraint(format!(
                    "influence ({}, {}) names an unknown variable",
                    inf.parent, inf.child
                )));
            };
            if !structure.parents(z).contains(&w) {
                return Err(Error::InvalidConstraint(format!(
                    "`{}` is not a parent of `{}`",
                    inf.parent, inf.child
                )));
            }
            if !seen.insert((w, z)) {
                return Err(Error::InvalidConstraint(format!(
                    "pair ({}, {}) is constrained more than once",
                    inf.parent, inf.child
                )));
            }
        }
        Ok(())
    }
}

/// One inequality of the system. State indices are 0-based here; reports
/// print them 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub influence: usize,
    pub parent: usize,
    pub child: usize,
    pub sign: Sign,
    /// First child state of the upper tail (`m − 1`, so at least 1).
    pub threshold: usize,
    /// Higher parent state `i`.
    pub higher: usize,
    /// Lower parent state `j < i`.
    pub lower: usize,
    /// States of the child's other parents, as `(variable, state)`.
    pub context: Vec<(usize, usize)>,
    pub higher_config: usize,
    pub lower_config: usize,
}

/// `c''`: the amount by which a slack lies on the wrong side of zero.
pub fn partial_violation(sign: Sign, slack: f64) -> f64 {
    match sign {
        Sign::Positive if slack < 0.0 => -slack,
        Sign::Negative if slack > 0.0 => slack,
        _ => 0.0,
    }
}

/// `exp(−w · violation)`: the likelihood of the expert confirming the constraints.
pub fn expert_agreement(violation: f64, weight: f64) -> f64 {
    (-weight * violation).exp()
}

/// Log-likelihood penalised by the weighted violation index.
pub fn penalized_score(log_likelihood: f64, violation: f64, weight: f64) -> f64 {
    log_likelihood - weight * violation
}

/// Per-parameter violation derivative `v = v⁻ − v⁺`.
///
/// `v⁻_ijk` counts violated inequalities in which `θ_ijk` should decrease and
/// `v⁺_ijk` those in which it should increase; `v` is the partial derivative
/// of the violation index with respect to `θ_ijk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationGradient {
    pub lower: ParamArray,
    pub raise: ParamArray,
    pub v: ParamArray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityRecord {
    pub child: String,
    pub parent: String,
    pub sign: Sign,
    /// 1-based threshold state `m`.
    pub m: usize,
    /// 1-based higher parent state.
    pub i: usize,
    /// 1-based lower parent state.
    pub j: usize,
    pub context: Vec<(String, String)>,
    pub slack: f64,
    pub partial: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub total: f64,
    /// Number of inequalities; each partial term is at most 1, so this bounds
    /// the total from above.
    pub inequality_count: usize,
    /// Violated inequalities, largest partial term first.
    pub violated: Vec<InequalityRecord>,
    pub gradient: ViolationGradient,
}

impl ViolationReport {
    pub fn is_essentially_zero(&self) -> bool {
        self.total < ESSENTIALLY_ZERO
    }
}

/// The enumerated inequality system of a constraint set on a structure.
#[derive(Debug, Clone)]
pub struct InequalitySystem {
    influences: Vec<Influence>,
    inequalities: Vec<Inequality>,
}

impl InequalitySystem {
    pub fn new(structure: &Structure, cs: &ConstraintSet) -> Result<Self> {
        cs.check(structure)?;
        let mut inequalities = Vec::new();
        for (idx, inf) in cs.influences.iter().enumerate() {
            let w = structure.require(&inf.parent)?;
            let z = structure.require(&inf.child)?;
            let parents = structure.parents(z);
            let pos = parents.iter().position(|&p| p == w).expect("checked above");
            let others: Vec<usize> = parents.iter().copied().filter(|&p| p != w).collect();
            let n_contexts: usize = others.iter().map(|&p| structure.cardinality(p)).product();
            let n_w = structure.cardinality(w);
            let n_z = structure.cardinality(z);

            for y in 0..n_contexts {
                let context = decode(structure, &others, y);
                let config_with = |state: usize| {
                    let mut tuple = Vec::with_capacity(parents.len());
                    let mut rest = context.iter();
                    for slot in 0..parents.len() {
                        if slot == pos {
                            tuple.push(state);
                        } else {
                            tuple.push(rest.next().expect("context covers other parents").1);
                        }
                    }
                    structure.encode_config(z, &tuple)
                };
                for threshold in 1..n_z {
                    for higher in 1..n_w {
                        for lower in 0..higher {
                            inequalities.push(Inequality {
                                influence: idx,
                                parent: w,
                                child: z,
                                sign: inf.sign,
                                threshold,
                                higher,
                                lower,
                                context: context.clone(),
                                higher_config: config_with(higher),
                                lower_config: config_with(lower),
                            });
                        }
                    }
                }
            }
        }
        Ok(InequalitySystem {
            influences: cs.influences.clone(),
            inequalities,
        })
    }

    pub fn inequalities(&self) -> &[Inequality] {
        &self.inequalities
    }

    pub fn influences(&self) -> &[Influence] {
        &self.influences
    }

    pub fn len(&self) -> usize {
        self.inequalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inequalities.is_empty()
    }

    /// `Σ_{l≥m} θ_{z,l,k(i,y)} − Σ_{l≥m} θ_{z,l,k(j,y)}`.
    pub fn slack(net: &Network, ineq: &Inequality) -> f64 {
        let cpt = net.cpt(ineq.child);
        let tail = |k: usize| cpt.row(k)[ineq.threshold..].iter().sum::<f64>();
        tail(ineq.higher_config) - tail(ineq.lower_config)
    }

    pub fn total_violation(&self, net: &Network) -> f64 {
        self.inequalities
            .iter()
            .map(|q| partial_violation(q.sign, Self::slack(net, q)))
            .sum()
    }

    pub fn violation_gradient(&self, net: &Network) -> ViolationGradient {
        let mut lower = ParamArray::zeros_like(net);
        let mut raise = ParamArray::zeros_like(net);
        for q in &self.inequalities {
            if partial_violation(q.sign, Self::slack(net, q)) == 0.0 {
                continue;
            }
            // The violation term is the slack with the sign that makes it
            // positive; the side entering it with +1 should go down.
            let (down, up) = match q.sign {
                Sign::Positive => (q.lower_config, q.higher_config),
                Sign::Negative => (q.higher_config, q.lower_config),
            };
            let n_z = net.cpt(q.child).n_states();
            for l in q.threshold..n_z {
                let b = lower.block_mut(q.child);
                b.set(down, l, b.get(down, l) + 1.0);
                let b = raise.block_mut(q.child);
                b.set(up, l, b.get(up, l) + 1.0);
            }
        }
        let mut v = lower.clone();
        v.add_scaled(-1.0, &raise);
        ViolationGradient { lower, raise, v }
    }

    pub fn audit(&self, net: &Network) -> ViolationReport {
        let s = net.structure();
        let mut total = 0.0;
        let mut violated = Vec::new();
        for q in &self.inequalities {
            let slack = Self::slack(net, q);
            let partial = partial_violation(q.sign, slack);
            total += partial;
            if partial > 0.0 {
                violated.push(InequalityRecord {
                    child: s.name(q.child).to_string(),
                    parent: s.name(q.parent).to_string(),
                    sign: q.sign,
                    m: q.threshold + 1,
                    i: q.higher + 1,
                    j: q.lower + 1,
                    context: q
                        .context
                        .iter()
                        .map(|&(var, st)| (s.name(var).to_string(), s.variable(var).states[st].clone()))
                        .collect(),
                    slack,
                    partial,
                });
            }
        }
        violated.sort_by(|a, b| b.partial.total_cmp(&a.partial));
        ViolationReport {
            total,
            inequality_count: self.len(),
            violated,
            gradient: self.violation_gradient(net),
        }
    }
}

fn decode(structure: &Structure, vars: &[usize], mut y: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); vars.len()];
    for (slot, &v) in out.iter_mut().zip(vars).rev() {
        let card = structure.cardinality(v);
        *slot = (v, y % card);
        y /= card;
    }
    out
}

pub fn enumerate_inequalities(net: &Network, cs: &ConstraintSet) -> Result<Vec<Inequality>> {
    Ok(InequalitySystem::new(net.structure(), cs)?.inequalities)
}

pub fn total_violation(net: &Network, cs: &ConstraintSet) -> Result<f64> {
    Ok(InequalitySystem::new(net.structure(), cs)?.total_violation(net))
}

pub fn violation_gradient(net: &Network, cs: &ConstraintSet) -> Result<ViolationGradient> {
    Ok(InequalitySystem::new(net.structure(), cs)?.violation_gradient(net))
}

pub fn expert_agreement_likelihood(net: &Network, cs: &ConstraintSet, weight: f64) -> Result<f64> {
    if weight.is_nan() || weight <= 0.0 {
        return Err(Error::Config(format!("penalty weight must be positive, got {weight}")));
    }
    Ok(expert_agreement(total_violation(net, cs)?, weight))
}

pub fn audit(net: &Network, cs: &ConstraintSet) -> Result<ViolationReport> {
    Ok(InequalitySystem::new(net.structure(), cs)?.audit(net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Cpt, Variable};

    fn ab(n_a: usize, rows_b: &[Vec<f64>]) -> Network {
        let a_states: Vec<String> = (1..=n_a).map(|i| format!("a{i}")).collect();
        let n_b = rows_b[0].len();
        let b_states: Vec<String> = (1..=n_b).map(|i| format!("b{i}")).collect();
        let s = Structure::new(
            vec![Variable::new("A", a_states), Variable::new("B", b_states)],
            vec![vec![], vec![0]],
        );
        Network::new(s, vec![Cpt::uniform(n_a, 1), Cpt::from_rows(rows_b).unwrap()]).unwrap()
    }

    fn pos_ab() -> ConstraintSet {
        ConstraintSet::new(vec![Influence::new("A", "B", Sign::Positive)])
    }

    #[test]
    fn binary_pair_yields_one_inequality() {
        let net = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        let q = enumerate_inequalities(&net, &pos_ab()).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!((q[0].threshold, q[0].higher, q[0].lower), (1, 1, 0));
        assert!(q[0].context.is_empty());
    }

    #[test]
    fn three_state_parent_yields_all_pairs() {
        let net = ab(3, &[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]);
        let q = enumerate_inequalities(&net, &pos_ab()).unwrap();
        let pairs: Vec<(usize, usize)> = q.iter().map(|q| (q.higher + 1, q.lower + 1)).collect();
        assert_eq!(pairs, vec![(2, 1), (3, 1), (3, 2)]);
    }

    #[test]
    fn slack_and_partial_terms() {
        let good = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        let flat = ab(2, &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let bad = ab(2, &[vec![0.3, 0.7], vec![0.7, 0.3]]);
        let q = &enumerate_inequalities(&good, &pos_ab()).unwrap()[0];
        assert!((InequalitySystem::slack(&good, q) - 0.4).abs() < 1e-15);
        assert_eq!(InequalitySystem::slack(&flat, q), 0.0);
        assert!((InequalitySystem::slack(&bad, q) + 0.4).abs() < 1e-15);

        assert_eq!(partial_violation(Sign::Positive, -0.4), 0.4);
        assert_eq!(partial_violation(Sign::Positive, 0.4), 0.0);
        assert_eq!(partial_violation(Sign::Negative, 0.4), 0.4);
        assert_eq!(partial_violation(Sign::Negative, -0.4), 0.0);
        assert_eq!(partial_violation(Sign::Positive, 0.0), 0.0);
        assert_eq!(partial_violation(Sign::Negative, 0.0), 0.0);
    }

    #[test]
    fn gradient_on_single_violation() {
        let bad = ab(2, &[vec![0.3, 0.7], vec![0.7, 0.3]]);
        let g = violation_gradient(&bad, &pos_ab()).unwrap();
        // θ(b2|a1) should go down, θ(b2|a2) up; first state never enters a tail
        assert_eq!(g.v.get(1, 0, 1), 1.0);
        assert_eq!(g.v.get(1, 1, 1), -1.0);
        assert_eq!(g.v.get(1, 0, 0), 0.0);
        assert_eq!(g.v.get(1, 1, 0), 0.0);
        assert_eq!(g.lower.get(1, 0, 1), 1.0);
        assert_eq!(g.raise.get(1, 1, 1), 1.0);

        let good = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        assert!(violation_gradient(&good, &pos_ab()).unwrap().v.is_zero());
    }

    #[test]
    fn negative_influence_swaps_roles() {
        let net = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        let cs = ConstraintSet::new(vec![Influence::new("A", "B", Sign::Negative)]);
        assert!((total_violation(&net, &cs).unwrap() - 0.4).abs() < 1e-15);
        let g = violation_gradient(&net, &cs).unwrap();
        assert_eq!(g.v.get(1, 1, 1), 1.0);
        assert_eq!(g.v.get(1, 0, 1), -1.0);
    }

    #[test]
    fn expert_agreement_values() {
        let bad = ab(2, &[vec![0.3, 0.7], vec![0.7, 0.3]]);
        let good = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        assert_eq!(expert_agreement_likelihood(&good, &pos_ab(), 5.0).unwrap(), 1.0);
        let p = expert_agreement_likelihood(&bad, &pos_ab(), 2.0).unwrap();
        assert!((p - (-0.8f64).exp()).abs() < 1e-12);
        assert!((p - 0.4493).abs() < 1e-4);
        assert!(expert_agreement_likelihood(&bad, &pos_ab(), 1e4).unwrap() < 1e-100);
        assert!(expert_agreement_likelihood(&bad, &pos_ab(), 0.0).is_err());
    }

    #[test]
    fn audit_lists_offenders() {
        let bad = ab(2, &[vec![0.3, 0.7], vec![0.7, 0.3]]);
        let r = audit(&bad, &pos_ab()).unwrap();
        assert_eq!(r.violated.len(), 1);
        assert!((r.total - 0.4).abs() < 1e-15);
        assert_eq!(r.inequality_count, 1);
        let rec = &r.violated[0];
        assert_eq!((rec.m, rec.i, rec.j), (2, 2, 1));

        let good = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        let r = audit(&good, &pos_ab()).unwrap();
        assert!(r.violated.is_empty());
        assert_eq!(r.total, 0.0);
        assert!(r.is_essentially_zero());
    }

    #[test]
    fn constraint_checks() {
        let net = ab(2, &[vec![0.7, 0.3], vec![0.3, 0.7]]);
        let reversed = ConstraintSet::new(vec![Influence::new("B", "A", Sign::Positive)]);
        assert!(matches!(
            reversed.check(net.structure()),
            Err(Error::InvalidConstraint(_))
        ));
        let twice = ConstraintSet::new(vec![
            Influence::new("A", "B", Sign::Positive),
            Influence::new("A", "B", Sign::Negative),
        ]);
        assert!(twice.check(net.structure()).is_err());
        let unknown = ConstraintSet::new(vec![Influence::new("Q", "B", Sign::Positive)]);
        assert!(unknown.check(net.structure()).is_err());
    }
}
