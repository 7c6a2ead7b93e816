//! On-disk formats for networks and constraint sets.
//!
//! Network file:
//!
//! ```json
//! {
//!   "nodes": [
//!     {"name": "A", "states": ["a1", "a2"], "parents": []},
//!     {"name": "B", "states": ["b1", "b2"], "parents": ["A"]}
//!   ],
//!   "cpts": {
//!     "A": [[0.6, 0.4]],
//!     "B": [[0.7, 0.3], [0.3, 0.7]]
//!   }
//! }
//! ```
//!
//! Row `k` of a CPT is the distribution over the child's states under parent
//! configuration `k`. A file without `"cpts"` describes a bare structure.
//!
//! Constraint file: `{"influences": [{"parent": "A", "child": "B", "sign": "+"}]}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::network::{Cpt, Defect, Network, Structure, Variable};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    name: String,
    states: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NodeFile>,
    #[serde(default)]
    cpts: Option<HashMap<String, Vec<Vec<f64>>>>,
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Structure plus any defects that prevented it from being represented
/// exactly (unknown parents are dropped and reported).
fn structure_from_file(file: &NetworkFile) -> (Structure, Vec<Defect>) {
    let variables: Vec<Variable> = file
        .nodes
        .iter()
        .map(|n| Variable::new(n.name.clone(), n.states.clone()))
        .collect();
    let index: HashMap<&str, usize> = file
        .nodes
        .iter()
        .enumerate()
        .rev()
        .map(|(i, n)| (n.name.as_str(), i))
        .collect();
    let mut defects = Vec::new();
    let parents = file
        .nodes
        .iter()
        .map(|n| {
            n.parents
                .iter()
                .filter_map(|p| match index.get(p.as_str()) {
                    Some(&i) => Some(i),
                    None => {
                        defects.push(Defect::UnknownParent {
                            variable: n.name.clone(),
                            parent: p.clone(),
                        });
                        None
                    }
                })
                .collect()
        })
        .collect();
    (Structure::new(variables, parents), defects)
}

/// Parses a network file and lists every defect instead of failing on the
/// first. Values are kept exactly as written; rows within
/// [`ROW_SUM_TOLERANCE`](crate::network::ROW_SUM_TOLERANCE) of summing to 1 are accepted.
pub fn parse_network_report(text: &str, origin: &str) -> Result<(Network, Vec<Defect>)> {
    let file: NetworkFile = parse_json(text, origin)?;
    let (structure, mut defects) = structure_from_file(&file);
    let mut tables = file.cpts.unwrap_or_default();
    let mut cpts = Vec::with_capacity(structure.len());
    for i in 0..structure.len() {
        let name = structure.name(i);
        let placeholder = || Cpt::uniform(structure.cardinality(i).max(1), structure.config_count(i));
        match tables.remove(name) {
            None => {
                defects.push(Defect::MissingCpt {
                    variable: name.to_string(),
                });
                cpts.push(placeholder());
            }
            Some(rows) => match Cpt::from_rows(&rows) {
                None => {
                    defects.push(Defect::RaggedCpt {
                        variable: name.to_string(),
                    });
                    cpts.push(placeholder());
                }
                Some(cpt) => cpts.push(cpt),
            },
        }
    }
    let mut leftover: Vec<String> = tables.into_keys().collect();
    leftover.sort();
    defects.extend(leftover.into_iter().map(|variable| Defect::UnknownCpt { variable }));

    let net = Network::new_unchecked(structure, cpts);
    defects.extend(net.validate());
    Ok((net, defects))
}

/// Parses a network file; any defect is an error.
pub fn parse_network(text: &str, origin: &str) -> Result<Network> {
    let (net, defects) = parse_network_report(text, origin)?;
    if defects.is_empty() {
        Ok(net)
    } else {
        Err(Error::InvalidNetwork(defects))
    }
}

/// Parses only the structure of a network file; CPTs, if present, are ignored.
pub fn parse_structure(text: &str, origin: &str) -> Result<Structure> {
    let file: NetworkFile = parse_json(text, origin)?;
    let (structure, mut defects) = structure_from_file(&file);
    let probe = Network::uniform(structure.clone());
    defects.extend(
        probe
            .validate()
            .into_iter()
            .filter(|d| !matches!(d, Defect::RowSum { .. } | Defect::CptShape { .. })),
    );
    if defects.is_empty() {
        Ok(structure)
    } else {
        Err(Error::InvalidNetwork(defects))
    }
}

pub fn read_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    parse_network(&read_text(path)?, &path.display().to_string())
}

pub fn read_network_report(path: impl AsRef<Path>) -> Result<(Network, Vec<Defect>)> {
    let path = path.as_ref();
    parse_network_report(&read_text(path)?, &path.display().to_string())
}

pub fn read_structure(path: impl AsRef<Path>) -> Result<Structure> {
    let path = path.as_ref();
    parse_structure(&read_text(path)?, &path.display().to_string())
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialise")
}

fn json_list<T: serde::Serialize>(items: &[T]) -> String {
    serde_json::to_string(items).expect("plain values always serialise")
}

/// Serialises a network, one node and one CPT row per line. Reals use the
/// shortest representation that reads back to the same `f64`.
pub fn network_to_string(net: &Network) -> String {
    let s = net.structure();
    let mut out = String::from("{\n  \"nodes\": [\n");
    for i in 0..s.len() {
        let parents: Vec<&str> = s.parents(i).iter().map(|&p| s.name(p)).collect();
        let _ = write!(
            out,
            "    {{\"name\": {}, \"states\": {}, \"parents\": {}}}",
            json_str(s.name(i)),
            json_list(&s.variable(i).states),
            json_list(&parents)
        );
        out.push_str(if i + 1 < s.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"cpts\": {\n");
    for i in 0..s.len() {
        let cpt = net.cpt(i);
        let _ = writeln!(out, "    {}: [", json_str(s.name(i)));
        for (k, row) in cpt.rows().enumerate() {
            let _ = write!(out, "      {}", json_list(row));
            out.push_str(if k + 1 < cpt.n_configs() { ",\n" } else { "\n" });
        }
        out.push_str(if i + 1 < s.len() { "    ],\n" } else { "    ]\n" });
    }
    out.push_str("  }\n}\n");
    out
}

pub fn write_network(path: impl AsRef<Path>, net: &Network) -> Result<()> {
    write_text(path.as_ref(), &network_to_string(net))
}

/// Parses a constraint file and checks it against `structure`.
pub fn parse_constraints(text: &str, origin: &str, structure: &Structure) -> Result<ConstraintSet> {
    let cs: ConstraintSet = parse_json(text, origin)?;
    cs.check(structure)?;
    Ok(cs)
}

pub fn read_constraints(path: impl AsRef<Path>, structure: &Structure) -> Result<ConstraintSet> {
    let path = path.as_ref();
    parse_constraints(&read_text(path)?, &path.display().to_string(), structure)
}

pub fn constraints_to_string(cs: &ConstraintSet) -> String {
    let mut out = String::from("{\n  \"influences\": [\n");
    for (n, inf) in cs.influences.iter().enumerate() {
        let _ = write!(
            out,
            "    {{\"parent\": {}, \"child\": {}, \"sign\": \"{}\"}}",
            json_str(&inf.parent),
            json_str(&inf.child),
            inf.sign
        );
        out.push_str(if n + 1 < cs.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn write_constraints(path: impl AsRef<Path>, cs: &ConstraintSet) -> Result<()> {
    write_text(path.as_ref(), &constraints_to_string(cs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Influence, Sign};

    const AB: &str = r#"{
      "nodes": [
        {"name": "A", "states": ["a1", "a2"]},
        {"name": "B", "states": ["b1", "b2"], "parents": ["A"]}
      ],
      "cpts": {"A": [[0.6, 0.4]], "B": [[0.7, 0.3], [0.3, 0.7]]}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let net = parse_network(AB, "ab").unwrap();
        assert_eq!(net.structure().parents(1), &[0]);
        let text = network_to_string(&net);
        assert_eq!(parse_network(&text, "again").unwrap(), net);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_network("{\n  \"nodes\": [\n  oops", "bad").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defects_escalate_on_load() {
        let text = AB.replace("[0.7, 0.3]", "[0.6, 0.6]");
        let err = parse_network(&text, "x").unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(ref d) if d.len() == 1));
        let (_, defects) = parse_network_report(&text, "x").unwrap();
        assert!(matches!(&defects[..], [Defect::RowSum { config: 0, .. }]));
    }

    #[test]
    fn tiny_row_error_is_accepted_verbatim() {
        let text = AB.replace("[0.7, 0.3]", "[0.7000000000001, 0.3]");
        let net = parse_network(&text, "x").unwrap();
        assert_eq!(net.cpt(1).row(0), &[0.7000000000001, 0.3]);
        let text = AB.replace("[0.7, 0.3]", "[0.7001, 0.3]");
        assert!(parse_network(&text, "x").is_err());
    }

    #[test]
    fn unknown_parent_and_missing_cpt_are_defects() {
        let text = r#"{"nodes": [{"name": "A", "states": ["x", "y"], "parents": ["Z"]}], "cpts": {}}"#;
        let (_, defects) = parse_network_report(text, "x").unwrap();
        assert_eq!(defects.len(), 2);
        assert!(matches!(defects[0], Defect::UnknownParent { .. }));
        assert!(matches!(defects[1], Defect::MissingCpt { .. }));
    }

    #[test]
    fn structure_file_needs_no_cpts() {
        let text = r#"{"nodes": [{"name": "A", "states": ["x", "y"]}, {"name": "B", "states": ["u", "v"], "parents": ["A"]}]}"#;
        let s = parse_structure(text, "s").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn constraint_file_round_trip_and_checks() {
        let net = parse_network(AB, "ab").unwrap();
        let cs = ConstraintSet::new(vec![Influence::new("A", "B", Sign::Negative)]);
        let text = constraints_to_string(&cs);
        assert_eq!(parse_constraints(&text, "c", net.structure()).unwrap(), cs);

        let bad = r#"{"influences": [{"parent": "B", "child": "A", "sign": "+"}]}"#;
        let err = parse_constraints(bad, "c", net.structure()).unwrap_err();
        assert!(err.to_string().contains("`B` is not a parent of `A`"));
        let garbled = r#"{"influences": [{"parent": "A", "child": "B", "sign": "?"}]}"#;
        assert!(matches!(
            parse_constraints(garbled, "c", net.structure()),
            Err(Error::Parse { .. })
        ));
    }
}
