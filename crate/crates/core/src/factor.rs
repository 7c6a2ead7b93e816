//! Dense discrete factors for variable elimination.
//!
//! Values are stored row-major over `scope`, last variable varying fastest,
//! which matches the CPT layout when the scope is `(parents..., child)`.

use std::collections::{BTreeMap, BTreeSet};

use crate::network::{Cpt, Structure};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn from_cpt(structure: &Structure, var: usize, cpt: &Cpt) -> Self {
        let mut scope = structure.parents(var).to_vec();
        scope.push(var);
        let cards = scope.iter().map(|&v| structure.cardinality(v)).collect();
        Factor {
            scope,
            cards,
            values: cpt.values().to_vec(),
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Only meaningful for an empty scope.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.scope.is_empty());
        self.values[0]
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.scope.iter().position(|&v| v == var)
    }

    /// (outer, card, inner) block sizes around scope position `p`.
    fn split(&self, p: usize) -> (usize, usize, usize) {
        let outer = self.cards[..p].iter().product();
        let inner = self.cards[p + 1..].iter().product();
        (outer, self.cards[p], inner)
    }

    /// Fixes `var` to `state`, dropping it from the scope.
    pub fn restrict(&self, var: usize, state: usize) -> Factor {
        let Some(p) = self.position(var) else {
            return self.clone();
        };
        let (outer, card, inner) = self.split(p);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        self.without(p, values)
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(p) = self.position(var) else {
            return self.clone();
        };
        let (outer, card, inner) = self.split(p);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            let dst = &mut values[o * inner..(o + 1) * inner];
            for s in 0..card {
                let base = (o * card + s) * inner;
                for (d, x) in dst.iter_mut().zip(&self.values[base..base + inner]) {
                    *d += x;
                }
            }
        }
        self.without(p, values)
    }

    fn without(&self, p: usize, values: Vec<f64>) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(p);
        cards.remove(p);
        Factor { scope, cards, values }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.scope.len()];
        let mut acc = 1;
        for (s, c) in strides.iter_mut().zip(&self.cards).rev() {
            *s = acc;
            acc *= c;
        }
        strides
    }

    pub fn product(&self, other: &Factor) -> Factor {
        if other.scope.is_empty() {
            let k = other.values[0];
            let mut out = self.clone();
            out.values.iter_mut().for_each(|x| *x *= k);
            return out;
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(&v) {
                scope.push(v);
                cards.push(c);
            }
        }
        let (sa_own, sb_own) = (self.strides(), other.strides());
        let sa: Vec<usize> = scope
            .iter()
            .map(|&v| self.position(v).map_or(0, |p| sa_own[p]))
            .collect();
        let sb: Vec<usize> = scope
            .iter()
            .map(|&v| other.position(v).map_or(0, |p| sb_own[p]))
            .collect();

        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; scope.len()];
        let (mut a, mut b) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[a] * other.values[b]);
            for d in (0..scope.len()).rev() {
                idx[d] += 1;
                a += sa[d];
                b += sb[d];
                if idx[d] < cards[d] {
                    break;
                }
                a -= sa[d] * cards[d];
                b -= sb[d] * cards[d];
                idx[d] = 0;
            }
        }
        Factor { scope, cards, values }
    }
}

/// Sums every variable outside `keep` out of the product of `factors`,
/// choosing the elimination order greedily by minimum fill-in (ties to the
/// lowest variable index). The result's scope is the kept variables that
/// appear in some factor.
pub(crate) fn eliminate(mut factors: Vec<Factor>, keep: &[usize]) -> Factor {
    let mut graph: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for f in &factors {
        for &u in f.scope() {
            let entry = graph.entry(u).or_default();
            entry.extend(f.scope().iter().copied().filter(|&w| w != u));
        }
    }
    let mut pending: BTreeSet<usize> = graph.keys().copied().filter(|v| !keep.contains(v)).collect();

    while !pending.is_empty() {
        let var = *pending
            .iter()
            .min_by_key(|&&v| (fill_in(&graph, v), v))
            .expect("non-empty");
        pending.remove(&var);

        let neighbours = graph.remove(&var).unwrap_or_default();
        for &a in &neighbours {
            let adj = graph.get_mut(&a).expect("symmetric adjacency");
            adj.remove(&var);
            adj.extend(neighbours.iter().copied().filter(|&b| b != a));
        }

        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope().contains(&var));
        factors = rest;
        let merged = touching
            .iter()
            .skip(1)
            .fold(touching[0].clone(), |acc, f| acc.product(f));
        factors.push(merged.sum_out(var));
    }

    factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f))
}

fn fill_in(graph: &BTreeMap<usize, BTreeSet<usize>>, v: usize) -> usize {
    let nb: Vec<usize> = graph[&v].iter().copied().collect();
    let mut fill = 0;
    for (n, &a) in nb.iter().enumerate() {
        for &b in &nb[n + 1..] {
            if !graph[&a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(scope: &[usize], cards: &[usize], values: &[f64]) -> Factor {
        Factor {
            scope: scope.to_vec(),
            cards: cards.to_vec(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn product_aligns_shared_variables() {
        // φ(a,b) · ψ(b,c)
        let p = f(&[0, 1], &[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let q = f(&[1, 2], &[2, 3], &[1.0, 10.0, 100.0, 2.0, 20.0, 200.0]);
        let r = p.product(&q);
        assert_eq!(r.scope(), &[0, 1, 2]);
        let at = |a: usize, b: usize, c: usize| r.values()[a * 6 + b * 3 + c];
        assert_eq!(at(1, 0, 2), 3.0 * 100.0);
        assert_eq!(at(0, 1, 1), 2.0 * 20.0);
    }

    #[test]
    fn restrict_and_sum_out() {
        let p = f(&[0, 1], &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(p.restrict(0, 1).values(), &[4.0, 5.0, 6.0]);
        assert_eq!(p.restrict(1, 2).values(), &[3.0, 6.0]);
        assert_eq!(p.sum_out(0).values(), &[5.0, 7.0, 9.0]);
        assert_eq!(p.sum_out(1).values(), &[6.0, 15.0]);
    }

    #[test]
    fn eliminate_to_scalar() {
        let p = f(&[0], &[2], &[0.25, 0.75]);
        let q = f(&[0, 1], &[2, 2], &[0.5, 0.5, 0.1, 0.9]);
        let z = eliminate(vec![p, q], &[]);
        assert!((z.scalar_value() - 1.0).abs() < 1e-15);
    }
}
