//! The replicated learning experiment: sample training and test data from a
//! ground-truth network, learn from several random initialisations with each
//! algorithm, and tabulate the results next to the ground-truth baseline.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! train.csv, test.csv            sampled datasets
//! summary.csv                    one row per run plus a `baseline` row
//! curves/<algorithm>_rep<r>.csv  iteration,train_nll_per_case,test_nll_per_case,violation
//! networks/<algorithm>_rep<r>.json
//! ```
//!
//! Replication `r` (0-based) initialises from seed `seed + r`; the training
//! and test samples use seeds drawn from a ChaCha8 stream seeded with `seed`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::constraints::{ConstraintSet, InequalitySystem};
use crate::datagen::{fixture_by_name, forward_sample, SamplingSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{avg_neg_log_likelihood, avg_quadratic_loss};
use crate::io::{read_constraints, read_network, read_structure, write_network, write_text};
use crate::learning::{learn, random_init, Algorithm, LearnConfig, RunTrace};
use crate::network::{Network, Structure};

fn default_replications() -> usize {
    10
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Em, Algorithm::EmQc]
}
fn default_iterations() -> usize {
    100
}
fn default_weight() -> f64 {
    2.0
}
fn default_step() -> f64 {
    0.05
}
fn default_min_prob() -> f64 {
    1e-6
}
fn default_record_every() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("experiment-out")
}

/// Experiment description, read from JSON. Relative paths are resolved
/// against the directory of the config file.
///
/// Either `fixture` (a bundled network name) or `network` + `constraints`
/// must be given. `structure` optionally replaces the ground truth's graph
/// for learning; it must list the same variables and states in the same
/// order.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    #[serde(default)]
    pub structure: Option<PathBuf>,
    #[serde(default)]
    pub hidden: Option<Vec<String>>,
    #[serde(default)]
    pub target: Option<String>,
    pub train_count: usize,
    pub test_count: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_weight")]
    pub penalty_weight: f64,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_min_prob")]
    pub min_prob: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Keep every recorded iterate in memory (not written to disk).
    #[serde(default)]
    pub record_params: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn for_fixture(name: &str, train_count: usize, test_count: usize) -> Self {
        ExperimentConfig {
            fixture: Some(name.to_string()),
            network: None,
            constraints: None,
            structure: None,
            hidden: None,
            target: None,
            train_count,
            test_count,
            replications: default_replications(),
            algorithms: default_algorithms(),
            iterations: default_iterations(),
            penalty_weight: default_weight(),
            step_size: default_step(),
            min_prob: default_min_prob(),
            seed: 0,
            record_every: default_record_every(),
            record_params: false,
            output_dir: default_output(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Reads a config and makes its paths absolute relative to the file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = crate::io::read_text(path)?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.network, &mut cfg.constraints, &mut cfg.structure]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn learn_config(&self, algorithm: Algorithm, replication: usize) -> LearnConfig {
        LearnConfig {
            algorithm,
            iterations: self.iterations,
            penalty_weight: self.penalty_weight,
            step_size: self.step_size,
            min_prob: self.min_prob,
            seed: self.init_seed(replication),
            record_every: self.record_every,
            record_params: self.record_params,
            ..LearnConfig::default()
        }
    }

    pub fn init_seed(&self, replication: usize) -> u64 {
        self.seed.wrapping_add(replication as u64)
    }

    /// Seeds of the training and test samples.
    pub fn data_seeds(&self) -> (u64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (rng.next_u64(), rng.next_u64())
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.train_count == 0 || self.test_count == 0 {
            return bad("train_count and test_count must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected");
        }
        if self.fixture.is_some() == self.network.is_some() {
            return bad("give exactly one of `fixture` or `network`");
        }
        if self.network.is_some() && self.constraints.is_none() {
            return bad("`network` requires `constraints`");
        }
        Ok(())
    }
}

/// Everything the experiment needs after resolving files and fixtures.
#[derive(Debug, Clone)]
pub struct Setup {
    pub truth: Network,
    pub learn_structure: std::sync::Arc<Structure>,
    pub constraints: ConstraintSet,
    pub hidden: Vec<String>,
    pub target: Option<String>,
}

impl Setup {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check()?;
        let (truth, constraints, hidden, target) = match &cfg.fixture {
            Some(name) => {
                let f = fixture_by_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown fixture `{name}` (structure1, structure2)")))?;
                (f.network, Some(f.constraints), f.hidden, Some(f.target))
            }
            None => (
                read_network(cfg.network.as_ref().expect("checked"))?,
                None,
                Vec::new(),
                None,
            ),
        };
        let learn_structure = match &cfg.structure {
            Some(p) => {
                let s = read_structure(p)?;
                if s.variables() != truth.structure().variables() {
                    return Err(Error::Config(
                        "learning structure must list the ground truth's variables and states in order".into(),
                    ));
                }
                std::sync::Arc::new(s)
            }
            None => truth.shared_structure(),
        };
        let constraints = match (&cfg.constraints, constraints) {
            (Some(p), _) => read_constraints(p, &learn_structure)?,
            (None, Some(cs)) => {
                cs.check(&learn_structure)?;
                cs
            }
            (None, None) => unreachable!("checked"),
        };
        let hidden = cfg.hidden.clone().unwrap_or(hidden);
        let target = cfg.target.clone().or(target);
        if let Some(t) = &target {
            truth.structure().require(t)?;
            if hidden.contains(t) {
                return Err(Error::Config(format!("target `{t}` is hidden")));
            }
        }
        Ok(Setup {
            truth,
            learn_structure,
            constraints,
            hidden,
            target,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub replication: usize,
    pub init_seed: u64,
    pub network: Network,
    pub trace: RunTrace,
    pub train_nll: f64,
    pub test_nll: f64,
    pub violation: f64,
    pub quadratic_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Baseline {
    pub train_nll: f64,
    pub test_nll: f64,
    pub violation: Option<f64>,
    pub quadratic_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub train: Dataset,
    pub test: Dataset,
    pub baseline: Baseline,
    /// Ordered by replication, then by the configured algorithm order.
    pub runs: Vec<RunResult>,
}

impl ExperimentOutcome {
    pub fn runs_of(&self, algorithm: Algorithm) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.algorithm == algorithm)
    }

    pub const SUMMARY_HEADER: &'static str =
        "algorithm,replication,init_seed,train_nll_per_case,test_nll_per_case,violation,quadratic_loss";

    pub fn summary_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(Self::SUMMARY_HEADER);
        out.push('\n');
        let b = &self.baseline;
        let _ = writeln!(
            out,
            "baseline,,,{},{},{},{}",
            b.train_nll,
            b.test_nll,
            opt(b.violation),
            opt(b.quadratic_loss)
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm,
                r.replication,
                r.init_seed,
                r.train_nll,
                r.test_nll,
                r.violation,
                opt(r.quadratic_loss)
            );
        }
        out
    }

    pub fn write(&self, dir: &Path, structure: &Structure) -> Result<()> {
        self.train.write(dir.join("train.csv"), structure)?;
        self.test.write(dir.join("test.csv"), structure)?;
        write_text(&dir.join("summary.csv"), &self.summary_csv())?;
        for r in &self.runs {
            let stem = format!("{}_rep{:02}", r.algorithm, r.replication);
            write_text(&dir.join("curves").join(format!("{stem}.csv")), &r.trace.to_csv())?;
            write_network(dir.join("networks").join(format!("{stem}.json")), &r.network)?;
        }
        Ok(())
    }
}

/// Runs the experiment in memory. Runs execute in parallel; results are
/// assembled in replication order.
pub fn execute(cfg: &ExperimentConfig, setup: &Setup) -> Result<ExperimentOutcome> {
    let (train_seed, test_seed) = cfg.data_seeds();
    let sample = |count, seed| {
        forward_sample(
            &setup.truth,
            &SamplingSpec::new(count, seed).hiding(setup.hidden.iter().cloned()),
        )
    };
    let train = sample(cfg.train_count, train_seed)?;
    let test = sample(cfg.test_count, test_seed)?;
    let system = InequalitySystem::new(&setup.learn_structure, &setup.constraints)?;
    let target = setup.target.as_deref();

    let baseline = Baseline {
        train_nll: avg_neg_log_likelihood(&setup.truth, &train)?,
        test_nll: avg_neg_log_likelihood(&setup.truth, &test)?,
        violation: InequalitySystem::new(setup.truth.structure(), &setup.constraints)
            .ok()
            .map(|s| s.total_violation(&setup.truth)),
        quadratic_loss: target.map(|t| avg_quadratic_loss(&setup.truth, &test, t)).transpose()?,
    };

    let jobs: Vec<(usize, Algorithm)> = (0..cfg.replications)
        .flat_map(|r| cfg.algorithms.iter().map(move |&a| (r, a)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(replication, algorithm)| {
            let lc = cfg.learn_config(algorithm, replication);
            let init = random_init(std::sync::Arc::clone(&setup.learn_structure), lc.seed);
            let (network, trace) =
                learn(&init, &train, Some(&setup.constraints), &lc, Some(&test)).map_err(|e| e.error)?;
            let last = trace.last().expect("trace always has a row");
            Ok(RunResult {
                algorithm,
                replication,
                init_seed: lc.seed,
                train_nll: last.train_nll_per_case,
                test_nll: last.test_nll_per_case.expect("test data given"),
                violation: system.total_violation(&network),
                quadratic_loss: target.map(|t| avg_quadratic_loss(&network, &test, t)).transpose()?,
                network,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentOutcome {
        train,
        test,
        baseline,
        runs,
    })
}

/// Resolves, runs and writes an experiment; returns the outcome.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let setup = Setup::resolve(cfg)?;
    let outcome = execute(cfg, &setup)?;
    outcome.write(&cfg.output_dir, setup.truth.structure())?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg =
            ExperimentConfig::parse(r#"{"fixture": "structure1", "train_count": 5, "test_count": 5}"#, "c").unwrap();
        assert_eq!(cfg.replications, 10);
        assert_eq!(cfg.iterations, 100);
        assert_eq!(cfg.penalty_weight, 2.0);
        assert_eq!(cfg.algorithms, vec![Algorithm::Em, Algorithm::EmQc]);
        assert_eq!(cfg.init_seed(3), 3);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            ExperimentConfig::parse(r#"{"train_count": 5, "test_count": 5, "algorithms": ["sgd"]}"#, "c"),
            Err(Error::Parse { .. })
        ));
        let mut cfg = ExperimentConfig::for_fixture("structure1", 5, 5);
        cfg.replications = 0;
        assert!(matches!(Setup::resolve(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig::for_fixture("structure9", 5, 5);
        assert!(matches!(Setup::resolve(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn smoke_one_replication_one_iteration() {
        let mut cfg = ExperimentConfig::for_fixture("structure2", 30, 20);
        cfg.replications = 1;
        cfg.iterations = 1;
        cfg.algorithms = Algorithm::ALL.to_vec();
        let setup = Setup::resolve(&cfg).unwrap();
        let out = execute(&cfg, &setup).unwrap();
        assert_eq!(out.runs.len(), 4);
        let summary = out.summary_csv();
        assert_eq!(summary.lines().count(), 6);
        assert!(summary.lines().nth(1).unwrap().starts_with("baseline,,,"));
        for r in &out.runs {
            assert_eq!(r.trace.rows.len(), 2);
        }
    }
}
