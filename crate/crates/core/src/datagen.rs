//! Forward sampling and the bundled fixture networks.
//!
//! Sampling uses ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`, so a
//! given network, count and seed produce the same dataset on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintSet;
use crate::dataset::{Case, Dataset};
use crate::error::{Error, Result};
use crate::io::{parse_constraints, parse_network};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingSpec {
    pub count: usize,
    /// Variables removed from every emitted case.
    pub hidden: Vec<String>,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        SamplingSpec {
            count,
            hidden: Vec::new(),
            seed,
        }
    }

    pub fn hiding<S: Into<String>>(mut self, hidden: impl IntoIterator<Item = S>) -> Self {
        self.hidden = hidden.into_iter().map(Into::into).collect();
        self
    }
}

fn draw(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the row's float sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Ancestral sampling: each variable drawn from its CPT row given the already
/// sampled parents, visiting variables in topological order.
pub fn forward_sample(net: &Network, spec: &SamplingSpec) -> Result<Dataset> {
    let s = net.structure();
    let order = s
        .topological_order()
        .ok_or_else(|| Error::Config("cannot sample from a cyclic network".into()))?;
    let mut hidden = vec![false; s.len()];
    for name in &spec.hidden {
        hidden[s.require(name)?] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment = vec![0usize; s.len()];
    let mut cases = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        for &v in &order {
            let k = s.config_of(v, &assignment);
            assignment[v] = draw(net.cpt(v).row(k), rng.random::<f64>());
        }
        let values = assignment
            .iter()
            .zip(&hidden)
            .map(|(&x, &h)| (!h).then_some(x))
            .collect();
        cases.push(Case::from_values(values));
    }
    let columns = (0..s.len()).filter(|&i| !hidden[i]).collect();
    Ok(Dataset::new(columns, cases))
}

/// A ground-truth network with its constraint set, hidden variables and
/// evaluation target.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub network: Network,
    pub constraints: ConstraintSet,
    pub hidden: Vec<String>,
    pub target: String,
    pub network_json: &'static str,
    pub constraints_json: &'static str,
}

impl Fixture {
    fn load(
        name: &'static str,
        network_json: &'static str,
        constraints_json: &'static str,
        hidden: &[&str],
        target: &str,
    ) -> Fixture {
        let network = parse_network(network_json, name).expect("bundled fixture network is valid");
        let constraints =
            parse_constraints(constraints_json, name, network.structure()).expect("bundled constraints are valid");
        Fixture {
            name,
            network,
            constraints,
            hidden: hidden.iter().map(|h| h.to_string()).collect(),
            target: target.to_string(),
            network_json,
            constraints_json,
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        forward_sample(
            &self.network,
            &SamplingSpec::new(count, seed).hiding(self.hidden.iter().cloned()),
        )
        .expect("fixture networks are acyclic")
    }
}

/// Structure 1: a task-performance model. `CognitiveLoad` is hidden and is
/// positively influenced by its three observed parents; it positively
/// influences `ErrorInPrimaryTask`, the evaluation target. CPT values are
/// made up for this crate.
pub fn structure1() -> Fixture {
    Fixture::load(
        "structure1",
        include_str!("../fixtures/structure1.json"),
        include_str!("../fixtures/structure1_constraints.json"),
        &["CognitiveLoad"],
        "ErrorInPrimaryTask",
    )
}

/// Structure 2: an abstract graph with hidden `H1` and `H2` between three
/// observed roots and four observed leaves; `G` is the evaluation target.
/// CPT values are made up for this crate.
pub fn structure2() -> Fixture {
    Fixture::load(
        "structure2",
        include_str!("../fixtures/structure2.json"),
        include_str!("../fixtures/structure2_constraints.json"),
        &["H1", "H2"],
        "G",
    )
}

pub fn fixture_networks() -> (Fixture, Fixture) {
    (structure1(), structure2())
}

pub fn fixture_by_name(name: &str) -> Option<Fixture> {
    match name {
        "structure1" => Some(structure1()),
        "structure2" => Some(structure2()),
        _ => None,
    }
}
