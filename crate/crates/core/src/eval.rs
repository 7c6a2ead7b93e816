//! Scores for learned networks on held-out data.
//!
//! Quadratic loss is the multi-class Brier score of the posterior over the
//! target given every other observed variable in the case.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::{log_likelihood_per_case, posterior_marginal};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub avg_neg_log_likelihood: f64,
    pub avg_quadratic_loss: Option<f64>,
    pub target: Option<String>,
    pub case_count: usize,
}

pub fn avg_neg_log_likelihood(net: &Network, test: &Dataset) -> Result<f64> {
    Ok(0.0 - log_likelihood_per_case(net, test)?)
}

/// Brier score of one posterior against an observed state.
pub fn quadratic_loss(posterior: &[f64], observed: usize) -> f64 {
    posterior
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let hit = if j == observed { 1.0 } else { 0.0 };
            (p - hit) * (p - hit)
        })
        .sum()
}

pub fn avg_quadratic_loss(net: &Network, test: &Dataset, target: &str) -> Result<f64> {
    let t = net.structure().require(target)?;
    if test.is_empty() {
        return Ok(0.0);
    }
    let per_pattern = test
        .patterns()
        .par_iter()
        .map(|p| {
            let observed = p.case.get(t).ok_or_else(|| Error::MissingTarget {
                case: p.first_index,
                target: target.to_string(),
            })?;
            let mut evidence = p.case.clone();
            evidence.set(t, None);
            let posterior = posterior_marginal(net, &evidence, t).map_err(|e| match e {
                Error::ZeroLikelihood { .. } => Error::ZeroLikelihood { case: p.first_index },
                e => e,
            })?;
            Ok(p.count as f64 * quadratic_loss(&posterior, observed))
        })
        .collect::<Vec<Result<f64>>>();
    let total: f64 = per_pattern.into_iter().sum::<Result<f64>>()?;
    Ok(total / test.len() as f64)
}

pub fn evaluate(net: &Network, test: &Dataset, target: Option<&str>) -> Result<EvalResult> {
    Ok(EvalResult {
        avg_neg_log_likelihood: avg_neg_log_likelihood(net, test)?,
        avg_quadratic_loss: target.map(|t| avg_quadratic_loss(net, test, t)).transpose()?,
        target: target.map(str::to_string),
        case_count: test.len(),
    })
}
