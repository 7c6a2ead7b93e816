//! Discrete Bayesian networks: variables with ordered states, a parent graph,
//! and one conditional probability table per variable.
//!
//! A CPT is stored row-major as `[k][j]`, where `k` is the parent-configuration
//! index and `j` the child state. Parent configurations are encoded mixed-radix
//! over the variable's parent list with the first-listed parent most
//! significant, so the flat CPT layout coincides with a factor over
//! `(parents..., child)` in the same order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on `|Σ_j θ_ijk − 1|` for a row to count as normalised.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Ordered state labels; the listed order is the order used by
    /// qualitative influences (first state lowest).
    pub states: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, states: impl IntoIterator<Item = S>) -> Self {
        Variable {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// The graph half of a network: variables and their ordered parent lists.
///
/// A `Structure` may be cyclic or otherwise malformed; [`Network::validate`]
/// reports such defects.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl Structure {
    /// Builds a structure from variables and parent lists given as indices.
    ///
    /// Panics if a parent index is out of range or the list lengths differ.
    pub fn new(variables: Vec<Variable>, parents: Vec<Vec<usize>>) -> Self {
        assert_eq!(variables.len(), parents.len(), "one parent list per variable");
        for ps in &parents {
            assert!(ps.iter().all(|&p| p < variables.len()), "parent index out of range");
        }
        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            index.entry(v.name.clone()).or_insert(i);
        }
        Structure {
            variables,
            parents,
            index,
        }
    }

    /// Builds a structure from parent lists given by name.
    pub fn from_names<S: AsRef<str>>(variables: Vec<Variable>, parents: &[Vec<S>]) -> Result<Self> {
        let index: HashMap<&str, usize> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let resolved = parents
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| {
                        index
                            .get(p.as_ref())
                            .copied()
                            .ok_or_else(|| Error::UnknownVariable(p.as_ref().to_string()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Structure::new(variables, resolved))
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.variables[i].name
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&i)).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn state_of(&self, var: usize, label: &str) -> Result<usize> {
        self.variables[var]
            .state_index(label)
            .ok_or_else(|| Error::UnknownState {
                variable: self.variables[var].name.clone(),
                state: label.to_string(),
            })
    }

    /// Number of parent configurations of `var` (1 for a root).
    pub fn config_count(&self, var: usize) -> usize {
        self.parents[var].iter().map(|&p| self.cardinality(p)).product()
    }

    /// Mixed-radix encoding of a parent-state tuple, first parent most significant.
    pub fn encode_config(&self, var: usize, parent_states: &[usize]) -> usize {
        let parents = &self.parents[var];
        debug_assert_eq!(parents.len(), parent_states.len());
        parents.iter().zip(parent_states).fold(0, |k, (&p, &s)| {
            debug_assert!(s < self.cardinality(p));
            k * self.cardinality(p) + s
        })
    }

    /// Inverse of [`encode_config`](Self::encode_config).
    pub fn decode_config(&self, var: usize, mut k: usize) -> Vec<usize> {
        let parents = &self.parents[var];
        let mut states = vec![0; parents.len()];
        for (slot, &p) in states.iter_mut().zip(parents).rev() {
            let card = self.cardinality(p);
            *slot = k % card;
            k /= card;
        }
        states
    }

    /// Encodes a parent tuple given as state labels, in parent-list order.
    pub fn encode_config_labels<S: AsRef<str>>(&self, var: usize, labels: &[S]) -> Result<usize> {
        let parents = &self.parents[var];
        if labels.len() != parents.len() {
            return Err(Error::Config(format!(
                "`{}` has {} parents but {} states were given",
                self.name(var),
                parents.len(),
                labels.len()
            )));
        }
        let states = parents
            .iter()
            .zip(labels)
            .map(|(&p, l)| self.state_of(p, l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.encode_config(var, &states))
    }

    /// Parent configuration index of `var` under a full assignment.
    pub fn config_of(&self, var: usize, assignment: &[usize]) -> usize {
        self.parents[var]
            .iter()
            .fold(0, |k, &p| k * self.cardinality(p) + assignment[p])
    }

    /// Topological order (parents before children), or `None` if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let children: Vec<Vec<usize>> = (0..n).map(|i| self.children(i)).collect();
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in children[v].iter().rev() {
                // a parent listed twice counts twice in `indegree`
                let times = self.parents[c].iter().filter(|&&p| p == v).count();
                indegree[c] -= times;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Conditional probability table `θ_i`, row `k` being the distribution over
/// the child's states under parent configuration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    n_states: usize,
    values: Vec<f64>,
}

impl Cpt {
    /// Builds a CPT from rows. Returns `None` for ragged or empty input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n_states = rows.first()?.len();
        if n_states == 0 || rows.iter().any(|r| r.len() != n_states) {
            return None;
        }
        Some(Cpt {
            n_states,
            values: rows.concat(),
        })
    }

    pub fn from_flat(n_states: usize, values: Vec<f64>) -> Self {
        assert!(n_states > 0 && values.len().is_multiple_of(n_states));
        Cpt { n_states, values }
    }

    pub fn uniform(n_states: usize, n_configs: usize) -> Self {
        Cpt {
            n_states,
            values: vec![1.0 / n_states as f64; n_states * n_configs],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_configs(&self) -> usize {
        self.values.len() / self.n_states
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.n_states + j]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        self.values[k * self.n_states + j] = value;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_states)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// A real-valued array with one entry per CPT parameter `θ_ijk`, laid out
/// like the network's CPTs. Used for gradients and expected counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamArray {
    blocks: Vec<Cpt>,
}

impl ParamArray {
    pub fn zeros_like(net: &Network) -> Self {
        ParamArray {
            blocks: net
                .cpts()
                .iter()
                .map(|c| Cpt::from_flat(c.n_states(), vec![0.0; c.values().len()]))
                .collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<Cpt>) -> Self {
        ParamArray { blocks }
    }

    pub fn block(&self, var: usize) -> &Cpt {
        &self.blocks[var]
    }

    pub fn block_mut(&mut self, var: usize) -> &mut Cpt {
        &mut self.blocks[var]
    }

    pub fn blocks(&self) -> &[Cpt] {
        &self.blocks
    }

    pub fn get(&self, var: usize, k: usize, j: usize) -> f64 {
        self.blocks[var].get(k, j)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values().iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|x| x == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        for b in &mut self.blocks {
            b.values_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Element-wise `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &ParamArray) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
                *x += factor * y;
            }
        }
    }
}

/// A structural or numerical problem found by [`Network::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Defect {
    DuplicateVariable {
        name: String,
    },
    DuplicateState {
        variable: String,
        state: String,
    },
    TooFewStates {
        variable: String,
        count: usize,
    },
    DuplicateParent {
        variable: String,
        parent: String,
    },
    UnknownParent {
        variable: String,
        parent: String,
    },
    Cycle {
        variables: Vec<String>,
    },
    MissingCpt {
        variable: String,
    },
    UnknownCpt {
        variable: String,
    },
    RaggedCpt {
        variable: String,
    },
    CptShape {
        variable: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    EntryOutOfRange {
        variable: String,
        config: usize,
        state: usize,
        value: f64,
    },
    RowSum {
        variable: String,
        config: usize,
        sum: f64,
    },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::DuplicateVariable { name } => write!(f, "duplicate variable `{name}`"),
            Defect::DuplicateState { variable, state } => {
                write!(f, "variable `{variable}` lists state `{state}` more than once")
            }
            Defect::TooFewStates { variable, count } => {
                write!(f, "variable `{variable}` has {count} states, at least 2 are required")
            }
            Defect::DuplicateParent { variable, parent } => {
                write!(f, "variable `{variable}` lists parent `{parent}` more than once")
            }
            Defect::UnknownParent { variable, parent } => {
                write!(f, "variable `{variable}` names unknown parent `{parent}`")
            }
            Defect::Cycle { variables } => {
                write!(f, "parent graph has a cycle through {}", variables.join(", "))
            }
            Defect::MissingCpt { variable } => write!(f, "variable `{variable}` has no CPT"),
            Defect::UnknownCpt { variable } => {
                write!(f, "CPT given for unknown variable `{variable}`")
            }
            Defect::RaggedCpt { variable } => {
                write!(f, "CPT of `{variable}` has rows of differing lengths")
            }
            Defect::CptShape {
                variable,
                expected,
                found,
            } => write!(
                f,
                "CPT of `{variable}` is {}x{}, expected {}x{} (configs x states)",
                found.0, found.1, expected.0, expected.1
            ),
            Defect::EntryOutOfRange {
                variable,
                config,
                state,
                value,
            } => write!(
                f,
                "CPT of `{variable}` has entry {value} outside [0,1] at k={config}, j={state}"
            ),
            Defect::RowSum { variable, config, sum } => {
                write!(f, "CPT row k={config} of `{variable}` sums to {sum}, not 1")
            }
        }
    }
}

/// A Bayesian network `B = (G, θ)`.
///
/// Cloning is cheap in the structure (shared) and linear in the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    structure: Arc<Structure>,
    cpts: Vec<Cpt>,
}

impl Network {
    /// Builds a network and rejects it if [`validate`](Self::validate) finds defects.
    pub fn new(structure: impl Into<Arc<Structure>>, cpts: Vec<Cpt>) -> Result<Self> {
        let net = Network::new_unchecked(structure, cpts);
        let defects = net.validate();
        if defects.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(defects))
        }
    }

    /// Builds a network without validation. Shape mismatches and invalid
    /// rows are reported by [`validate`](Self::validate) rather than here.
    pub fn new_unchecked(structure: impl Into<Arc<Structure>>, cpts: Vec<Cpt>) -> Self {
        Network {
            structure: structure.into(),
            cpts,
        }
    }

    /// A network whose CPT rows are all uniform.
    pub fn uniform(structure: impl Into<Arc<Structure>>) -> Self {
        let structure = structure.into();
        let cpts = (0..structure.len())
            .map(|i| Cpt::uniform(structure.cardinality(i).max(1), structure.config_count(i)))
            .collect();
        Network { structure, cpts }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn shared_structure(&self) -> Arc<Structure> {
        Arc::clone(&self.structure)
    }

    pub fn len(&self) -> usize {
        self.structure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structure.is_empty()
    }

    pub fn cpt(&self, var: usize) -> &Cpt {
        &self.cpts[var]
    }

    pub fn cpt_mut(&mut self, var: usize) -> &mut Cpt {
        &mut self.cpts[var]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// Same structure, new parameters.
    pub fn with_cpts(&self, cpts: Vec<Cpt>) -> Self {
        Network {
            structure: Arc::clone(&self.structure),
            cpts,
        }
    }

    /// Lists every defect; an empty list means the network is valid.
    pub fn validate(&self) -> Vec<Defect> {
        let s = &*self.structure;
        let mut defects = Vec::new();

        let mut seen = HashSet::new();
        for v in s.variables() {
            if !seen.insert(v.name.as_str()) {
                defects.push(Defect::DuplicateVariable { name: v.name.clone() });
            }
            if v.states.len() < 2 {
                defects.push(Defect::TooFewStates {
                    variable: v.name.clone(),
                    count: v.states.len(),
                });
            }
            let mut states = HashSet::new();
            for st in &v.states {
                if !states.insert(st.as_str()) {
                    defects.push(Defect::DuplicateState {
                        variable: v.name.clone(),
                        state: st.clone(),
                    });
                }
            }
        }
        for i in 0..s.len() {
            let mut ps = HashSet::new();
            for &p in s.parents(i) {
                if !ps.insert(p) {
                    defects.push(Defect::DuplicateParent {
                        variable: s.name(i).to_string(),
                        parent: s.name(p).to_string(),
                    });
                }
            }
        }
        if s.topological_order().is_none() {
            defects.push(Defect::Cycle {
                variables: cyclic_core(s).into_iter().map(|i| s.name(i).to_string()).collect(),
            });
        }

        for i in 0..s.len() {
            let name = s.name(i);
            let Some(cpt) = self.cpts.get(i) else {
                defects.push(Defect::MissingCpt {
                    variable: name.to_string(),
                });
                continue;
            };
            let expected = (s.config_count(i), s.cardinality(i));
            let found = (cpt.n_configs(), cpt.n_states());
            if expected != found {
                defects.push(Defect::CptShape {
                    variable: name.to_string(),
                    expected,
                    found,
                });
                continue;
            }
            for (k, row) in cpt.rows().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&x) {
                        defects.push(Defect::EntryOutOfRange {
                            variable: name.to_string(),
                            config: k,
                            state: j,
                            value: x,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if sum.is_nan() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    defects.push(Defect::RowSum {
                        variable: name.to_string(),
                        config: k,
                        sum,
                    });
                }
            }
        }
        defects
    }

    /// `P(x_1, …, x_n) = Π_i θ_i` at a full assignment of state indices.
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        assert_eq!(assignment.len(), self.len(), "assignment must cover every variable");
        (0..self.len())
            .map(|i| {
                let k = self.structure.config_of(i, assignment);
                self.cpts[i].get(k, assignment[i])
            })
            .product()
    }

    /// [`joint_probability`](Self::joint_probability) with the assignment
    /// given as `(variable, state)` label pairs.
    pub fn joint_probability_labels<A, B>(&self, assignment: &[(A, B)]) -> Result<f64>
    where
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut states = vec![None; self.len()];
        for (var, state) in assignment {
            let i = self.structure.require(var.as_ref())?;
            states[i] = Some(self.structure.state_of(i, state.as_ref())?);
        }
        let full = states
            .iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::MissingVariable(self.structure.name(i).to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.joint_probability(&full))
    }
}

/// Variables left after repeatedly stripping sources and sinks: exactly the
/// nodes lying on (or between) cycles.
fn cyclic_core(s: &Structure) -> Vec<usize> {
    let mut alive = vec![true; s.len()];
    loop {
        let mut changed = false;
        for i in 0..s.len() {
            if !alive[i] {
                continue;
            }
            let has_parent = s.parents(i).iter().any(|&p| alive[p]);
            let has_child = (0..s.len()).any(|c| alive[c] && s.parents(c).contains(&i));
            if !has_parent || !has_child {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..s.len()).filter(|&i| alive[i]).collect()
}
