//! Data cases with missing values and the delimited dataset format.
//!
//! A dataset file is comma-separated text with a header row of variable
//! names and one row per case. Unobserved values are written as `?`.
//! Variables absent from the header (hidden variables) are unobserved in
//! every case.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::io::{read_text, write_text};
use crate::network::Structure;

pub const MISSING: &str = "?";

/// An assignment of states to a subset of the network's variables, indexed
/// like the network (`None` = unobserved).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Case {
    values: Vec<Option<usize>>,
}

impl Case {
    pub fn empty(n_vars: usize) -> Self {
        Case {
            values: vec![None; n_vars],
        }
    }

    pub fn full(states: &[usize]) -> Self {
        Case {
            values: states.iter().copied().map(Some).collect(),
        }
    }

    pub fn from_values(values: Vec<Option<usize>>) -> Self {
        Case { values }
    }

    pub fn from_labels<A: AsRef<str>, B: AsRef<str>>(structure: &Structure, pairs: &[(A, B)]) -> Result<Self> {
        let mut case = Case::empty(structure.len());
        for (var, state) in pairs {
            let i = structure.require(var.as_ref())?;
            case.values[i] = Some(structure.state_of(i, state.as_ref())?);
        }
        Ok(case)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.values[var]
    }

    pub fn set(&mut self, var: usize, state: Option<usize>) {
        self.values[var] = state;
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.values
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Checks the case against a structure: right length, states in range.
    pub fn check(&self, structure: &Structure) -> Result<()> {
        if self.values.len() != structure.len() {
            return Err(Error::Config(format!(
                "case covers {} variables, network has {}",
                self.values.len(),
                structure.len()
            )));
        }
        for (i, v) in self.values.iter().enumerate() {
            if let Some(s) = *v {
                if s >= structure.cardinality(i) {
                    return Err(Error::UnknownState {
                        variable: structure.name(i).to_string(),
                        state: format!("#{s}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A distinct case with its multiplicity and the index of its first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub case: Case,
    pub count: usize,
    pub first_index: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<usize>,
    cases: Vec<Case>,
    patterns: OnceLock<Vec<Pattern>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns && self.cases == other.cases
    }
}

impl Dataset {
    /// `columns` lists the variables recorded in the file, in header order.
    pub fn new(columns: Vec<usize>, cases: Vec<Case>) -> Self {
        Dataset {
            columns,
            cases,
            patterns: OnceLock::new(),
        }
    }

    /// A dataset whose columns are every variable observed in some case.
    pub fn from_cases(cases: Vec<Case>) -> Self {
        let n = cases.first().map_or(0, Case::len);
        let columns = (0..n).filter(|&i| cases.iter().any(|c| c.get(i).is_some())).collect();
        Dataset::new(columns, cases)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// Distinct cases in order of first appearance, with multiplicities.
    pub fn patterns(&self) -> &[Pattern] {
        self.patterns.get_or_init(|| {
            let mut index: HashMap<&Case, usize> = HashMap::new();
            let mut out: Vec<Pattern> = Vec::new();
            for (n, case) in self.cases.iter().enumerate() {
                match index.get(case) {
                    Some(&p) => out[p].count += 1,
                    None => {
                        index.insert(case, out.len());
                        out.push(Pattern {
                            case: case.clone(),
                            count: 1,
                            first_index: n,
                        });
                    }
                }
            }
            out
        })
    }

    /// Concatenation of two datasets over the same columns.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut cases = self.cases.clone();
        cases.extend(other.cases.iter().cloned());
        Dataset::new(self.columns.clone(), cases)
    }

    pub fn parse_csv(text: &str, origin: &str, structure: &Structure) -> Result<Self> {
        let parse_err = |e: csv::Error| {
            let (line, column) = e.position().map_or((0, 0), |p| (p.line() as usize, 0));
            Error::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.to_string(),
            }
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(parse_err)?.clone();
        let mut columns = Vec::with_capacity(header.len());
        for name in header.iter() {
            let i = structure.require(name)?;
            if columns.contains(&i) {
                return Err(Error::Parse {
                    origin: origin.to_string(),
                    line: 1,
                    column: 0,
                    message: format!("column `{name}` appears twice"),
                });
            }
            columns.push(i);
        }
        let mut cases = Vec::new();
        for record in reader.records() {
            let record = record.map_err(parse_err)?;
            let mut case = Case::empty(structure.len());
            for (&var, field) in columns.iter().zip(record.iter()) {
                if field != MISSING && !field.is_empty() {
                    case.set(var, Some(structure.state_of(var, field)?));
                }
            }
            cases.push(case);
        }
        Ok(Dataset::new(columns, cases))
    }

    pub fn to_csv(&self, structure: &Structure) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(self.columns.iter().map(|&i| structure.name(i)))
            .expect("writing to memory");
        for case in &self.cases {
            writer
                .write_record(self.columns.iter().map(|&i| match case.get(i) {
                    Some(s) => structure.variable(i).states[s].as_str(),
                    None => MISSING,
                }))
                .expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("labels are UTF-8")
    }

    pub fn read(path: impl AsRef<Path>, structure: &Structure) -> Result<Self> {
        let path = path.as_ref();
        Dataset::parse_csv(&read_text(path)?, &path.display().to_string(), structure)
    }

    pub fn write(&self, path: impl AsRef<Path>, structure: &Structure) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv(structure))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Variable;

    fn structure() -> Structure {
        Structure::new(
            vec![
                Variable::new("A", ["a1", "a2"]),
                Variable::new("H", ["h1", "h2"]),
                Variable::new("B", ["b1", "b2", "b3"]),
            ],
            vec![vec![], vec![0], vec![1]],
        )
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let s = structure();
        let text = "A,B\na2,b3\n?,b1\na1,?\n";
        let data = Dataset::parse_csv(text, "d", &s).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.cases()[0].values(), &[Some(1), None, Some(2)]);
        assert_eq!(data.cases()[1].get(0), None);
        assert_eq!(data.to_csv(&s), text);
    }

    #[test]
    fn bad_labels_and_columns() {
        let s = structure();
        assert!(matches!(
            Dataset::parse_csv("A,B\na3,b1\n", "d", &s),
            Err(Error::UnknownState { .. })
        ));
        assert!(matches!(
            Dataset::parse_csv("A,Q\na1,b1\n", "d", &s),
            Err(Error::UnknownVariable(_))
        ));
        assert!(matches!(
            Dataset::parse_csv("A,B\na1\n", "d", &s),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn patterns_group_identical_cases_in_first_seen_order() {
        let data = Dataset::from_cases(vec![
            Case::from_values(vec![Some(0), None, Some(1)]),
            Case::from_values(vec![Some(1), None, Some(1)]),
            Case::from_values(vec![Some(0), None, Some(1)]),
        ]);
        let p = data.patterns();
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].count, p[0].first_index), (2, 0));
        assert_eq!((p[1].count, p[1].first_index), (1, 1));
        assert_eq!(data.columns(), &[0, 2]);
    }
}
