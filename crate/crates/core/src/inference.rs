//! Exact inference by variable elimination.
//!
//! Evidence is absorbed by restricting each CPT factor to the observed
//! states; the remaining (unobserved) variables are summed out in min-fill
//! order. Family posteriors `P(x_ij, pa_k(X_i) | case)` are obtained by
//! keeping the unobserved members of each family as the query.
//!
//! Nothing here assumes CPT rows are normalised: `case_likelihood` is the
//! multilinear polynomial in `θ`, which is what gradient checks perturb.

use rayon::prelude::*;

use crate::dataset::{Case, Dataset};
use crate::error::{Error, Result};
use crate::factor::{eliminate, Factor};
use crate::network::{Cpt, Network, ParamArray};

/// `P(x_ij, pa_k(X_i) | case)` for every variable, shaped like the CPTs.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPosteriors {
    pub tables: ParamArray,
}

impl FamilyPosteriors {
    pub fn get(&self, var: usize, k: usize, j: usize) -> f64 {
        self.tables.get(var, k, j)
    }
}

fn reduced_factors(net: &Network, case: &Case) -> Vec<Factor> {
    let s = net.structure();
    (0..s.len())
        .map(|i| {
            let mut f = Factor::from_cpt(s, i, net.cpt(i));
            for &v in s.parents(i).iter().chain(std::iter::once(&i)) {
                if let Some(state) = case.get(v) {
                    f = f.restrict(v, state);
                }
            }
            f
        })
        .collect()
}

fn check_case(net: &Network, case: &Case) -> Result<()> {
    case.check(net.structure())
}

/// Marginal probability of the observed part of `case`.
pub fn case_likelihood(net: &Network, case: &Case) -> Result<f64> {
    check_case(net, case)?;
    Ok(eliminate(reduced_factors(net, case), &[]).scalar_value())
}

/// `ln P(D | θ) = Σ_l ln P(D_l | θ)`.
pub fn log_likelihood(net: &Network, data: &Dataset) -> Result<f64> {
    let per_pattern = data
        .patterns()
        .par_iter()
        .map(|p| {
            check_case(net, &p.case)?;
            let z = eliminate(reduced_factors(net, &p.case), &[]).scalar_value();
            if z > 0.0 {
                Ok(p.count as f64 * z.ln())
            } else {
                Err(Error::ZeroLikelihood { case: p.first_index })
            }
        })
        .collect::<Vec<Result<f64>>>();
    per_pattern.into_iter().sum()
}

/// Log-likelihood divided by the number of cases (0 for an empty dataset).
pub fn log_likelihood_per_case(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    Ok(log_likelihood(net, data)? / data.len() as f64)
}

/// Family posteriors together with the case likelihood they are normalised by.
fn family_posteriors_with_likelihood(net: &Network, case: &Case) -> Option<(ParamArray, f64)> {
    let s = net.structure();
    let factors = reduced_factors(net, case);
    let z = eliminate(factors.clone(), &[]).scalar_value();
    if z.is_nan() || z <= 0.0 {
        return None;
    }
    let mut tables = ParamArray::zeros_like(net);
    for i in 0..s.len() {
        let parents = s.parents(i);
        let mut family: Vec<usize> = parents.to_vec();
        family.push(i);
        let query: Vec<usize> = family.iter().copied().filter(|&v| case.get(v).is_none()).collect();
        let block = tables.block_mut(i);

        if query.is_empty() {
            let states: Vec<usize> = parents.iter().map(|&p| case.get(p).expect("observed")).collect();
            let k = s.encode_config(i, &states);
            block.set(k, case.get(i).expect("observed"), 1.0);
            continue;
        }

        let joint = eliminate(factors.clone(), &query);
        let scope = joint.scope();
        let cards: Vec<usize> = scope.iter().map(|&v| s.cardinality(v)).collect();
        let mut assignment: Vec<usize> = vec![0; s.len()];
        for &v in &family {
            if let Some(st) = case.get(v) {
                assignment[v] = st;
            }
        }
        let mut idx = vec![0usize; scope.len()];
        for &value in joint.values() {
            for (&v, &st) in scope.iter().zip(&idx) {
                assignment[v] = st;
            }
            let k = s.config_of(i, &assignment);
            block.set(k, assignment[i], block.get(k, assignment[i]) + value / z);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < cards[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
    Some((tables, z))
}

/// Exact `P(x_ij, pa_k(X_i) | case, θ)` for every variable.
pub fn family_posteriors(net: &Network, case: &Case) -> Result<FamilyPosteriors> {
    check_case(net, case)?;
    family_posteriors_with_likelihood(net, case)
        .map(|(tables, _)| FamilyPosteriors { tables })
        .ok_or(Error::ZeroLikelihood { case: 0 })
}

/// Expected sufficient statistics `E_θ[N_ijk] = Σ_l P(x_ij, pa_k | D_l, θ)`
/// and the log-likelihood of the data, in one pass.
pub fn expected_counts(net: &Network, data: &Dataset) -> Result<(ParamArray, f64)> {
    let per_pattern = data
        .patterns()
        .par_iter()
        .map(|p| {
            check_case(net, &p.case)?;
            family_posteriors_with_likelihood(net, &p.case)
                .map(|(t, z)| (t, z, p.count))
                .ok_or(Error::ZeroLikelihood { case: p.first_index })
        })
        .collect::<Vec<_>>();

    let mut counts = ParamArray::zeros_like(net);
    let mut ll = 0.0;
    for item in per_pattern {
        let (tables, z, count) = item?;
        counts.add_scaled(count as f64, &tables);
        ll += count as f64 * z.ln();
    }
    Ok((counts, ll))
}

/// Posterior distribution of `var` given the observed part of `case`.
pub fn posterior_marginal(net: &Network, case: &Case, var: usize) -> Result<Vec<f64>> {
    check_case(net, case)?;
    let n = net.structure().cardinality(var);
    if let Some(st) = case.get(var) {
        let mut p = vec![0.0; n];
        p[st] = 1.0;
        return Ok(p);
    }
    let f = eliminate(reduced_factors(net, case), &[var]);
    let z: f64 = f.values().iter().sum();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::ZeroLikelihood { case: 0 });
    }
    Ok(f.values().iter().map(|x| x / z).collect())
}

/// Parameters shaped like `net` with every entry replaced by `f(var, k, j, θ)`.
pub(crate) fn map_params(net: &Network, f: impl Fn(usize, usize, usize, f64) -> f64) -> ParamArray {
    let blocks = net
        .cpts()
        .iter()
        .enumerate()
        .map(|(i, cpt)| {
            let mut out = Cpt::from_flat(cpt.n_states(), vec![0.0; cpt.values().len()]);
            for k in 0..cpt.n_configs() {
                for j in 0..cpt.n_states() {
                    out.set(k, j, f(i, k, j, cpt.get(k, j)));
                }
            }
            out
        })
        .collect();
    ParamArray::from_blocks(blocks)
}
