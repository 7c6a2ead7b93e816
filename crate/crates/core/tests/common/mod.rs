//! Reference computations for the integration tests.
//!
//! Everything here works from the raw CPT numbers by full-joint enumeration
//! and never calls the library's inference code.

#![allow(dead_code)]

use std::sync::Arc;

use qcbn::{Case, ConstraintSet, Cpt, Dataset, Influence, Network, Sign, Structure, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every full assignment over `cards`, last variable fastest.
pub fn assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in cards {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |s| {
                    let mut a = prefix.clone();
                    a.push(s);
                    a
                })
            })
            .collect();
    }
    out
}

/// Mixed-radix parent configuration, first parent most significant.
pub fn config(s: &Structure, var: usize, a: &[usize]) -> usize {
    s.parents(var).iter().fold(0, |k, &p| k * s.cardinality(p) + a[p])
}

pub fn joint(net: &Network, a: &[usize]) -> f64 {
    let s = net.structure();
    (0..s.len())
        .map(|i| net.cpt(i).values()[config(s, i, a) * s.cardinality(i) + a[i]])
        .product()
}

fn cards(net: &Network) -> Vec<usize> {
    let s = net.structure();
    (0..s.len()).map(|i| s.cardinality(i)).collect()
}

fn consistent(case: &Case, a: &[usize]) -> bool {
    case.values().iter().zip(a).all(|(v, &x)| v.is_none_or(|s| s == x))
}

pub fn likelihood(net: &Network, case: &Case) -> f64 {
    assignments(&cards(net))
        .iter()
        .filter(|a| consistent(case, a))
        .map(|a| joint(net, a))
        .sum()
}

pub fn log_likelihood(net: &Network, data: &Dataset) -> f64 {
    data.cases().iter().map(|c| likelihood(net, c).ln()).sum()
}

/// `P(x_ij, pa_k | case)` laid out like the CPTs (`[var][k * n + j]`).
pub fn family_posteriors(net: &Network, case: &Case) -> Vec<Vec<f64>> {
    let s = net.structure();
    let mut out: Vec<Vec<f64>> = (0..s.len()).map(|i| vec![0.0; net.cpt(i).values().len()]).collect();
    let mut z = 0.0;
    for a in assignments(&cards(net)).iter().filter(|a| consistent(case, a)) {
        let p = joint(net, a);
        z += p;
        for (i, table) in out.iter_mut().enumerate() {
            table[config(s, i, a) * s.cardinality(i) + a[i]] += p;
        }
    }
    for table in &mut out {
        table.iter_mut().for_each(|x| *x /= z);
    }
    out
}

/// Posterior of `var` given the observed part of `case`.
pub fn posterior(net: &Network, case: &Case, var: usize) -> Vec<f64> {
    let mut out = vec![0.0; net.structure().cardinality(var)];
    for a in assignments(&cards(net)).iter().filter(|a| consistent(case, a)) {
        out[a[var]] += joint(net, a);
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|x| x / z).collect()
}

/// Probability of every full assignment of the listed variables.
pub fn marginal_table(net: &Network, vars: &[usize]) -> Vec<f64> {
    let s = net.structure();
    let sub: Vec<usize> = vars.iter().map(|&v| s.cardinality(v)).collect();
    let mut out = vec![0.0; sub.iter().product()];
    for a in assignments(&cards(net)) {
        let idx = vars.iter().fold(0, |k, &v| k * s.cardinality(v) + a[v]);
        out[idx] += joint(net, &a);
    }
    out
}

/// A copy of `net` with one raw CPT entry replaced (rows may stop summing to 1).
pub fn with_entry(net: &Network, var: usize, k: usize, j: usize, value: f64) -> Network {
    let mut cpts = net.cpts().to_vec();
    cpts[var].set(k, j, value);
    Network::new_unchecked(net.shared_structure(), cpts)
}

/// Central finite difference of `f` with respect to raw entry `(var, k, j)`.
pub fn central_difference(net: &Network, var: usize, k: usize, j: usize, h: f64, f: impl Fn(&Network) -> f64) -> f64 {
    let x = net.cpt(var).get(k, j);
    (f(&with_entry(net, var, k, j, x + h)) - f(&with_entry(net, var, k, j, x - h))) / (2.0 * h)
}

pub struct NetSpec {
    pub max_vars: usize,
    pub max_states: usize,
    pub max_parents: usize,
    /// Every CPT entry drawn from `[lo, 1 − lo]` before normalisation-safe rescaling.
    pub interior: Option<f64>,
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec {
            max_vars: 8,
            max_states: 3,
            max_parents: 3,
            interior: None,
        }
    }
}

fn random_row(rng: &mut ChaCha8Rng, n: usize, interior: Option<f64>) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        let row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        match interior {
            Some(lo) if row.iter().any(|&x| x < lo || x > 1.0 - lo) => continue,
            _ => return row,
        }
    }
}

/// A random DAG (parents drawn among earlier variables) with random CPTs.
pub fn random_network(seed: u64, spec: &NetSpec) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=spec.max_vars);
    let variables: Vec<Variable> = (0..n)
        .map(|i| {
            let c = rng.random_range(2..=spec.max_states);
            Variable::new(format!("V{i}"), (0..c).map(|s| format!("s{s}")))
        })
        .collect();
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut ps: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.4)).collect();
            while ps.len() > spec.max_parents {
                ps.remove(rng.random_range(0..ps.len()));
            }
            ps
        })
        .collect();
    let s = Structure::new(variables, parents);
    let cpts = (0..n)
        .map(|i| {
            let rows: Vec<Vec<f64>> = (0..s.config_count(i))
                .map(|_| random_row(&mut rng, s.cardinality(i), spec.interior))
                .collect();
            Cpt::from_rows(&rows).unwrap()
        })
        .collect();
    Network::new_unchecked(Arc::new(s), cpts)
}

/// Cases drawn from the network's joint with each value hidden with
/// probability `p_missing`; the drawn assignment is kept consistent with a
/// positive-probability full assignment.
pub fn random_cases(net: &Network, count: usize, p_missing: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = net.structure();
    let order = s.topological_order().unwrap();
    let cases = (0..count)
        .map(|_| {
            let mut a = vec![0usize; s.len()];
            for &v in &order {
                let row = &net.cpt(v).values()[config(s, v, &a) * s.cardinality(v)..][..s.cardinality(v)];
                let u: f64 = rng.random();
                let mut acc = 0.0;
                a[v] = row.len() - 1;
                for (j, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        a[v] = j;
                        break;
                    }
                }
            }
            Case::from_values(a.iter().map(|&x| (!rng.random_bool(p_missing)).then_some(x)).collect())
        })
        .collect();
    Dataset::from_cases(cases)
}

/// One random signed influence per edge with probability 1/2 (at least one
/// if the graph has an edge).
pub fn random_constraints(net: &Network, seed: u64) -> ConstraintSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = net.structure();
    let mut influences = Vec::new();
    for child in 0..s.len() {
        for &p in s.parents(child) {
            if rng.random_bool(0.5) || influences.is_empty() {
                let sign = if rng.random_bool(0.5) {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                influences.push(Influence::new(s.name(p), s.name(child), sign));
            }
        }
    }
    ConstraintSet::new(influences)
}

pub fn assert_simplex(net: &Network, floor: f64) {
    for (i, cpt) in net.cpts().iter().enumerate() {
        for k in 0..cpt.n_configs() {
            let row = cpt.row(k);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "var {i} row {k} sums to {sum}");
            for &x in row {
                assert!(x >= floor && x <= 1.0 - floor, "var {i} row {k} entry {x}");
            }
        }
    }
}

pub fn is_simplex(net: &Network, floor: f64) -> bool {
    net.cpts().iter().all(|cpt| {
        (0..cpt.n_configs()).all(|k| {
            let row = cpt.row(k);
            (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && row.iter().all(|&x| x >= floor && x <= 1.0 - floor)
        })
    })
}
