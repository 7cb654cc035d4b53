//! Declarative system descriptions and the causal diagrams they imply.
//!
//! ```text
//! ; the two-car toy scenario
//! mech F <- u hp : known f_F
//! mech ydd <- F G : known newton
//! mech G <- y : unknown
//! indep G hp
//! const m 1.0
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CausalError;

/// The description of the toy scenario used when none is given.
pub const DEFAULT_DESCRIPTION: &str = "\
; engine force is known from the spec sheet, the road force is not
mech F <- u hp : known f_F
mech ydd <- F G : known newton
mech G <- y : unknown
indep G hp
indep G u
const m 1.0
";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "formula")]
pub enum MechanismForm {
    Known(String),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismDecl {
    pub output: String,
    pub inputs: Vec<String>,
    pub form: MechanismForm,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Description {
    pub mechanisms: Vec<MechanismDecl>,
    /// `(variable, asserted non-parent)` pairs.
    pub independences: Vec<(String, String)>,
    pub constants: BTreeMap<String, f64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CausalError {
    CausalError::Parse {
        line,
        msg: msg.into(),
    }
}

impl FromStr for Description {
    type Err = CausalError;

    fn from_str(text: &str) -> Result<Self, CausalError> {
        let mut d = Description::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split([';', '#']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = body.split_whitespace().collect();
            match tokens[0] {
                "mech" => d.mechanisms.push(parse_mech(line, &tokens[1..])?),
                "indep" => match tokens[1..] {
                    [a, b] => d.independences.push((a.to_string(), b.to_string())),
                    _ => return Err(parse_err(line, "expected `indep <var> <var>`")),
                },
                "const" => match tokens[1..] {
                    [name, value] => {
                        let v: f64 = value
                            .parse()
                            .map_err(|_| parse_err(line, format!("bad number `{value}`")))?;
                        d.constants.insert(name.to_string(), v);
                    }
                    _ => return Err(parse_err(line, "expected `const <name> <value>`")),
                },
                other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
            }
        }
        let mut seen = BTreeSet::new();
        for m in &d.mechanisms {
            if !seen.insert(m.output.as_str()) {
                return Err(CausalError::DuplicateOutput(m.output.clone()));
            }
        }
        Ok(d)
    }
}

fn parse_mech(line: usize, tokens: &[&str]) -> Result<MechanismDecl, CausalError> {
    let usage = "expected `mech <out> <- <inputs..> : known <id>|unknown`";
    let (output, rest) = match tokens {
        [out, "<-", rest @ ..] => (out.to_string(), rest),
        _ => return Err(parse_err(line, usage)),
    };
    let colon = rest
        .iter()
        .position(|t| *t == ":")
        .ok_or_else(|| parse_err(line, usage))?;
    let inputs: Vec<String> = rest[..colon].iter().map(|s| s.to_string()).collect();
    let form = match &rest[colon + 1..] {
        ["known", id] => MechanismForm::Known(id.to_string()),
        ["unknown"] => MechanismForm::Unknown,
        _ => return Err(parse_err(line, usage)),
    };
    Ok(MechanismDecl {
        output,
        inputs,
        form,
    })
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mechanisms {
            write!(f, "mech {} <- {} : ", m.output, m.inputs.join(" "))?;
            match &m.form {
                MechanismForm::Known(id) => writeln!(f, "known {id}")?,
                MechanismForm::Unknown => writeln!(f, "unknown")?,
            }
        }
        for (a, b) in &self.independences {
            writeln!(f, "indep {a} {b}")?;
        }
        for (k, v) in &self.constants {
            writeln!(f, "const {k} {v}")?;
        }
        Ok(())
    }
}

/// Directed acyclic graph over named variables.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dag {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl Dag {
    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn contains(&self, v: &str) -> bool {
        self.nodes.contains(v)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_string(), to.to_string()))
    }

    pub fn parents(&self, v: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, to)| to == v)
            .map(|(from, _)| from.as_str())
            .collect()
    }

    /// Removes every edge pointing into `v`.
    pub fn cut_incoming(&mut self, v: &str) {
        self.edges.retain(|(_, to)| to != v);
    }

    /// Kahn ordering, or the nodes left on a cycle.
    pub fn topological_order(&self) -> Result<Vec<String>, Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for (_, to) in &self.edges {
            *indegree.get_mut(to.as_str()).expect("edge endpoints are nodes") += 1;
        }
        let mut ready: VecDeque<&str> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_front() {
            order.push(n.to_string());
            for (from, to) in &self.edges {
                if from == n {
                    let d = indegree.get_mut(to.as_str()).expect("edge endpoints are nodes");
                    *d -= 1;
                    if *d == 0 {
                        ready.push_back(to);
                    }
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            Err(indegree
                .into_iter()
                .filter(|(_, d)| *d > 0)
                .map(|(n, _)| n.to_string())
                .collect())
        }
    }
}

/// One edge per mechanism input, checked for cycles and for independence
/// assertions that contradict a declared input.
pub fn build_diagram(d: &Description) -> Result<Dag, CausalError> {
    let mut dag = Dag::default();
    for m in &d.mechanisms {
        dag.nodes.insert(m.output.clone());
        for input in &m.inputs {
            dag.nodes.insert(input.clone());
            dag.edges.insert((input.clone(), m.output.clone()));
        }
    }
    for (var, other) in &d.independences {
        if dag.has_edge(other, var) {
            return Err(CausalError::ContradictoryIndependence {
                var: var.clone(),
                other: other.clone(),
            });
        }
    }
    dag.topological_order()
        .map_err(CausalError::CyclicDescription)?;
    Ok(dag)
}
