//! CPT learners: EM, gradient ascent (APN), and their constrained variants.
//!
//! * `em`: `θ'_ijk = E[N_ijk] / E[N_ik]` with expected counts from exact
//!   family posteriors.
//! * `apn`: `θ' = θ + α ∇`, where `∇` is the log-likelihood gradient
//!   `Σ_l P(x_ij, pa_k | D_l) / θ_ijk` projected onto `Σ_j θ_ijk = 1`.
//! * `apn-qc`: as `apn` on the penalised score `ln P(D|θ) − w·violation(θ)`.
//! * `em-qc`: an EM update followed by a step against the violation gradient
//!   taken at the post-EM point, rescaled so that its largest component
//!   matches the largest component of the EM displacement.
//!
//! Every learner keeps each CPT row on the floored simplex
//! `{θ : Σ_j θ_j = 1, θ_j ≥ ε}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::constraints::{ConstraintSet, InequalitySystem};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::{expected_counts, log_likelihood_per_case, map_params};
use crate::network::{Cpt, Network, ParamArray, Structure};

pub type GradientVector = ParamArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Em,
    Apn,
    EmQc,
    ApnQc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Em, Algorithm::Apn, Algorithm::EmQc, Algorithm::ApnQc];

    pub fn is_constrained(self) -> bool {
        matches!(self, Algorithm::EmQc | Algorithm::ApnQc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::Apn => "apn",
            Algorithm::EmQc => "em-qc",
            Algorithm::ApnQc => "apn-qc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (expected em, apn, em-qc or apn-qc)")))
    }
}

impl serde::Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the penalty weight enters the hybrid EM correction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HybridScaling {
    /// Rescaled violation direction multiplied by `w`.
    #[default]
    Weighted,
    /// Rescaled violation direction used as is; `w` only switches it on.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub penalty_weight: f64,
    /// APN step size, applied to the per-case gradient.
    pub step_size: f64,
    /// Floor `ε` on every CPT entry.
    pub min_prob: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Keep a snapshot of the parameters in every trace row.
    pub record_params: bool,
    pub hybrid_scaling: HybridScaling,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            algorithm: Algorithm::Em,
            iterations: 100,
            penalty_weight: 2.0,
            step_size: 0.05,
            min_prob: 1e-6,
            seed: 0,
            record_every: 1,
            record_params: false,
            hybrid_scaling: HybridScaling::Weighted,
        }
    }
}

impl LearnConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        LearnConfig {
            algorithm,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return bad(format!(
                "penalty weight must be non-negative, got {}",
                self.penalty_weight
            ));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size must be non-negative, got {}", self.step_size));
        }
        if !(0.0..0.5).contains(&self.min_prob) {
            return bad(format!("probability floor must lie in [0, 0.5), got {}", self.min_prob));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub train_nll_per_case: f64,
    pub test_nll_per_case: Option<f64>,
    pub violation: Option<f64>,
    pub params: Option<Network>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub const CSV_HEADER: &'static str = "iteration,train_nll_per_case,test_nll_per_case,violation";

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Curve table with the fixed column order of [`CSV_HEADER`](Self::CSV_HEADER);
    /// absent values are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration,
                r.train_nll_per_case,
                opt(r.test_nll_per_case),
                opt(r.violation)
            ));
        }
        out
    }
}

/// A failed run, with the trace recorded up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("learning failed after {} recorded iterations: {error}", trace.rows.len())]
pub struct LearnError {
    #[source]
    pub error: Error,
    pub trace: RunTrace,
}

impl From<Error> for LearnError {
    fn from(error: Error) -> Self {
        LearnError {
            error,
            trace: RunTrace::default(),
        }
    }
}

/// Puts `row` on the floored simplex `{Σ θ = 1, θ ≥ floor}`.
///
/// Entries below the floor (including negative ones) are pinned to it and
/// the remaining entries are rescaled proportionally to take up the rest of
/// the mass; pinning repeats until no rescaled entry falls below the floor.
/// Applied to EM output this is the exact maximiser of the expected
/// complete-data log-likelihood over the floored simplex. Rows that already
/// satisfy the floor and sum to 1 within 1e-12 are left untouched.
pub fn clamp_row(row: &mut [f64], floor: f64) {
    let n = row.len();
    let sum: f64 = row.iter().sum();
    // largest feasible entry; rescaling can overshoot it by an ulp
    let cap = 1.0 - (n - 1) as f64 * floor;
    if row.iter().all(|&x| x >= floor && x <= cap) && (sum - 1.0).abs() <= 1e-12 {
        return;
    }
    let mass: Vec<f64> = row.iter().map(|&x| x.max(0.0)).collect();
    let mut pinned = vec![false; n];
    let scale = loop {
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let free: f64 = mass.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(m, _)| m).sum();
        if n_pinned == n || free <= 0.0 {
            break None;
        }
        let scale = (1.0 - n_pinned as f64 * floor) / free;
        let mut changed = false;
        for (p, &m) in pinned.iter_mut().zip(&mass) {
            if !*p && m * scale < floor {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            break Some(scale);
        }
    };
    match scale {
        Some(scale) => {
            for ((x, &m), &p) in row.iter_mut().zip(&mass).zip(&pinned) {
                *x = if p { floor } else { (m * scale).min(cap) };
            }
        }
        None => row.iter_mut().for_each(|x| *x = 1.0 / n as f64),
    }
}

pub fn floor_network(net: &Network, floor: f64) -> Network {
    let mut out = net.clone();
    for i in 0..out.len() {
        let cpt = out.cpt_mut(i);
        for k in 0..cpt.n_configs() {
            clamp_row(cpt.row_mut(k), floor);
        }
    }
    out
}

/// Orthogonal projection onto the tangent of `Σ_j θ_ijk = 1`: each row
/// loses its mean.
pub fn project_gradient(g: &GradientVector) -> GradientVector {
    let mut out = g.clone();
    for i in 0..out.blocks().len() {
        let block = out.block_mut(i);
        for k in 0..block.n_configs() {
            let row = block.row_mut(k);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter_mut().for_each(|x| *x -= mean);
        }
    }
    out
}

fn check_floor(net: &Network, floor: f64) -> Result<()> {
    for (i, cpt) in net.cpts().iter().enumerate() {
        for k in 0..cpt.n_configs() {
            for (j, &x) in cpt.row(k).iter().enumerate() {
                if x < floor || x <= 0.0 {
                    return Err(Error::BelowFloor {
                        variable: net.structure().name(i).to_string(),
                        config: k,
                        state: j,
                        value: x,
                        floor,
                    });
                }
            }
        }
    }
    Ok(())
}

/// `∇^u_ijk = Σ_l P(x_ij, pa_k | D_l, θ) / θ_ijk`, the log-likelihood
/// gradient with every `θ_ijk` treated as a free coordinate.
pub fn apn_unprojected_gradient(net: &Network, data: &Dataset, floor: f64) -> Result<GradientVector> {
    check_floor(net, floor)?;
    let (counts, _) = expected_counts(net, data)?;
    Ok(map_params(net, |i, k, j, theta| counts.get(i, k, j) / theta))
}

/// One EM update. Rows whose parent configuration has zero expected count
/// keep their previous values.
pub fn em_step(net: &Network, data: &Dataset, floor: f64) -> Result<Network> {
    let (counts, _) = expected_counts(net, data)?;
    let mut cpts = net.cpts().to_vec();
    for (i, cpt) in cpts.iter_mut().enumerate() {
        let block = counts.block(i);
        for k in 0..cpt.n_configs() {
            let expected = block.row(k);
            let total: f64 = expected.iter().sum();
            if total > 0.0 {
                let row = cpt.row_mut(k);
                for (x, &n) in row.iter_mut().zip(expected) {
                    *x = n / total;
                }
                clamp_row(row, floor);
            }
        }
    }
    Ok(net.with_cpts(cpts))
}

fn ascend(net: &Network, direction: &GradientVector, step: f64, floor: f64) -> Network {
    let mut cpts: Vec<Cpt> = net.cpts().to_vec();
    for (i, cpt) in cpts.iter_mut().enumerate() {
        let g = direction.block(i);
        for k in 0..cpt.n_configs() {
            let row = cpt.row_mut(k);
            for (x, d) in row.iter_mut().zip(g.row(k)) {
                *x += step * d;
            }
            clamp_row(row, floor);
        }
    }
    net.with_cpts(cpts)
}

/// Gradient ascent step size for a dataset: `α` applies to the per-case
/// gradient.
fn per_case_step(cfg: &LearnConfig, data: &Dataset) -> f64 {
    cfg.step_size / data.len().max(1) as f64
}

pub fn apn_step(net: &Network, data: &Dataset, cfg: &LearnConfig) -> Result<Network> {
    let g = apn_unprojected_gradient(net, data, cfg.min_prob)?;
    Ok(ascend(
        net,
        &project_gradient(&g),
        per_case_step(cfg, data),
        cfg.min_prob,
    ))
}

/// APN on the penalised score: unprojected gradient `∇^u − w·v`.
pub fn constrained_apn_step(
    net: &Network,
    data: &Dataset,
    system: &InequalitySystem,
    cfg: &LearnConfig,
) -> Result<Network> {
    let mut g = apn_unprojected_gradient(net, data, cfg.min_prob)?;
    let v = system.violation_gradient(net).v;
    g.add_scaled(-cfg.penalty_weight, &v);
    Ok(ascend(
        net,
        &project_gradient(&g),
        per_case_step(cfg, data),
        cfg.min_prob,
    ))
}

/// Hybrid step: EM update, then a correction along the projected violation
/// gradient evaluated at the EM result.
///
/// The correction is rescaled so that its largest absolute component equals
/// the largest absolute change made by the EM update (times `w` under
/// [`HybridScaling::Weighted`]). If the EM update did not move, the
/// correction's largest component is `α` instead.
pub fn constrained_em_step(
    net: &Network,
    data: &Dataset,
    system: &InequalitySystem,
    cfg: &LearnConfig,
) -> Result<Network> {
    let em = em_step(net, data, cfg.min_prob)?;
    let direction = project_gradient(&system.violation_gradient(&em).v);
    let largest = direction.max_abs();
    if largest == 0.0 || cfg.penalty_weight == 0.0 {
        return Ok(em);
    }
    let displacement = em
        .cpts()
        .iter()
        .zip(net.cpts())
        .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let target = if displacement > 0.0 {
        displacement
    } else {
        cfg.step_size
    };
    let weight = match cfg.hybrid_scaling {
        HybridScaling::Weighted => cfg.penalty_weight,
        HybridScaling::Unweighted => 1.0,
    };
    Ok(ascend(&em, &direction, -weight * target / largest, cfg.min_prob))
}

/// Each CPT row drawn uniformly from the probability simplex.
pub fn random_init(structure: impl Into<Arc<Structure>>, seed: u64) -> Network {
    let structure = structure.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cpts = (0..structure.len())
        .map(|i| {
            let n = structure.cardinality(i);
            let mut values = Vec::with_capacity(n * structure.config_count(i));
            for _ in 0..structure.config_count(i) {
                let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = draws.iter().sum();
                values.extend(draws.iter().map(|x| x / total));
            }
            Cpt::from_flat(n, values)
        })
        .collect();
    Network::new_unchecked(structure, cpts)
}

struct Recorder<'a> {
    data: &'a Dataset,
    test: Option<&'a Dataset>,
    system: Option<&'a InequalitySystem>,
    keep_params: bool,
    trace: RunTrace,
}

impl Recorder<'_> {
    fn record(&mut self, iteration: usize, net: &Network) -> Result<()> {
        let train = 0.0 - log_likelihood_per_case(net, self.data)?;
        let test = self
            .test
            .map(|t| log_likelihood_per_case(net, t).map(|x| 0.0 - x))
            .transpose()?;
        self.trace.rows.push(TraceRow {
            iteration,
            train_nll_per_case: train,
            test_nll_per_case: test,
            violation: self.system.map(|s| s.total_violation(net)),
            params: self.keep_params.then(|| net.clone()),
        });
        Ok(())
    }
}

/// Runs `cfg.iterations` steps of the configured learner from `initial`
/// (floored to `cfg.min_prob` first).
///
/// `constraints` is required by the constrained learners; for the others it
/// is used only to report the violation index in the trace. Iteration 0 and
/// the final iteration are always recorded.
pub fn learn(
    initial: &Network,
    data: &Dataset,
    constraints: Option<&ConstraintSet>,
    cfg: &LearnConfig,
    test: Option<&Dataset>,
) -> std::result::Result<(Network, RunTrace), LearnError> {
    cfg.validate()?;
    let max_card = (0..initial.len())
        .map(|i| initial.structure().cardinality(i))
        .max()
        .unwrap_or(2);
    if cfg.min_prob * max_card as f64 >= 1.0 {
        return Err(Error::Config(format!(
            "probability floor {} is infeasible for a variable with {max_card} states",
            cfg.min_prob
        ))
        .into());
    }
    let system = constraints
        .map(|cs| InequalitySystem::new(initial.structure(), cs))
        .transpose()?;
    if cfg.algorithm.is_constrained() && system.is_none() {
        return Err(Error::Config(format!("algorithm {} requires a constraint set", cfg.algorithm)).into());
    }

    let mut recorder = Recorder {
        data,
        test,
        system: system.as_ref(),
        keep_params: cfg.record_params,
        trace: RunTrace::default(),
    };
    let mut net = floor_network(initial, cfg.min_prob);
    let fail = |error: Error, recorder: Recorder| LearnError {
        error,
        trace: recorder.trace,
    };
    if let Err(e) = recorder.record(0, &net) {
        return Err(fail(e, recorder));
    }

    for t in 1..=cfg.iterations {
        let step = match (cfg.algorithm, system.as_ref()) {
            (Algorithm::Em, _) => em_step(&net, data, cfg.min_prob),
            (Algorithm::Apn, _) => apn_step(&net, data, cfg),
            (Algorithm::EmQc, Some(s)) => constrained_em_step(&net, data, s, cfg),
            (Algorithm::ApnQc, Some(s)) => constrained_apn_step(&net, data, s, cfg),
            _ => unreachable!("constraint presence checked above"),
        };
        net = match step {
            Ok(next) => next,
            Err(e) => return Err(fail(e, recorder)),
        };
        if t % cfg.record_every == 0 || t == cfg.iterations {
            if let Err(e) = recorder.record(t, &net) {
                return Err(fail(e, recorder));
            }
        }
    }
    Ok((net, recorder.trace))
}
