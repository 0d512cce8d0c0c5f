//! Discrete causal network over the bias attributes.
//!
//! The default network has one root node per schema attribute, an `Outcome`
//! node (TP, TN, FP, FN) conditioned on all of them, and a deterministic
//! `Match` node that is `true` exactly when the outcome is TP or TN.
//! Inference is exact variable elimination; [`brute_force_joint`] enumerates
//! the full joint and serves as the independent oracle.

mod build;
mod factor;
mod inference;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{
    build_network, conditional_rates, estimate_prior, query_posterior, ConditionalRates,
    NetworkParams,
};
pub use inference::{brute_force_joint, infer, infer_with_order, JointTable, JOINT_CELL_CAP};

pub const OUTCOME: &str = "Outcome";
pub const MATCH: &str = "Match";
pub const OUTCOME_STATES: [&str; 4] = ["TP", "TN", "FP", "FN"];
pub const MATCH_STATES: [&str; 2] = ["true", "false"];

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if labels.len() != probabilities.len() || labels.is_empty() {
            return Err(Error::Network(
                "distribution needs one probability per label".into(),
            ));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Network(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Network(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            labels,
            probabilities,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.probabilities.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub domain: Vec<String>,
}

impl Node {
    pub fn new(name: impl Into<String>, domain: &[&str]) -> Self {
        Self {
            name: name.into(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Conditional probability table of one node.
///
/// Rows enumerate parent assignments in mixed-radix order with the last parent
/// varying fastest; a root node has exactly one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn prior(child: impl Into<String>, probabilities: Vec<f64>) -> Self {
        Self {
            child: child.into(),
            parents: Vec::new(),
            rows: vec![probabilities],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    nodes: Vec<Node>,
    cpts: Vec<Cpt>,
    parents: Vec<Vec<usize>>,
}

impl BeliefNetwork {
    /// Validates and assembles a network. `cpts` may be in any order but must
    /// hold exactly one table per node.
    pub fn new(nodes: Vec<Node>, cpts: Vec<Cpt>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.domain.is_empty() {
                return Err(Error::Network(format!(
                    "node `{}` has an empty domain",
                    n.name
                )));
            }
            let distinct: HashSet<&String> = n.domain.iter().collect();
            if distinct.len() != n.domain.len() {
                return Err(Error::Network(format!("node `{}` repeats a state", n.name)));
            }
            if index.insert(n.name.clone(), i).is_some() {
                return Err(Error::Network(format!("duplicate node `{}`", n.name)));
            }
        }
        let mut ordered: Vec<Option<Cpt>> = vec![None; nodes.len()];
        for cpt in cpts {
            let &i = index
                .get(&cpt.child)
                .ok_or_else(|| Error::Network(format!("table for unknown node `{}`", cpt.child)))?;
            if ordered[i].is_some() {
                return Err(Error::Network(format!(
                    "node `{}` has two tables",
                    cpt.child
                )));
            }
            ordered[i] = Some(cpt);
        }
        let mut cpts = Vec::with_capacity(nodes.len());
        let mut parents = Vec::with_capacity(nodes.len());
        for (i, slot) in ordered.into_iter().enumerate() {
            let cpt = slot
                .ok_or_else(|| Error::Network(format!("node `{}` has no table", nodes[i].name)))?;
            let mut pidx = Vec::with_capacity(cpt.parents.len());
            for p in &cpt.parents {
                let &j = index.get(p).ok_or_else(|| {
                    Error::Network(format!("unknown parent `{p}` of `{}`", cpt.child))
                })?;
                if j == i || pidx.contains(&j) {
                    return Err(Error::Network(format!(
                        "bad parent list for `{}`",
                        cpt.child
                    )));
                }
                pidx.push(j);
            }
            let expected_rows: usize = pidx.iter().map(|&j| nodes[j].domain.len()).product();
            if cpt.rows.len() != expected_rows {
                return Err(Error::Network(format!(
                    "table of `{}` has {} rows, expected {expected_rows}",
                    cpt.child,
                    cpt.rows.len()
                )));
            }
            for row in &cpt.rows {
                if row.len() != nodes[i].domain.len() {
                    return Err(Error::Network(format!(
                        "row width mismatch in `{}`",
                        cpt.child
                    )));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::Network(format!("negative entry in `{}`", cpt.child)));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::Network(format!(
                        "row of `{}` sums to {total}",
                        cpt.child
                    )));
                }
            }
            parents.push(pidx);
            cpts.push(cpt);
        }
        let net = Self {
            nodes,
            cpts,
            parents,
        };
        net.topological_order()?;
        Ok(net)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn cpt(&self, name: &str) -> Option<&Cpt> {
        self.node_index(name).map(|i| &self.cpts[i])
    }

    pub(crate) fn parent_indices(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    /// Product of all domain sizes.
    pub fn state_space(&self) -> u128 {
        self.nodes.iter().map(|n| n.domain.len() as u128).product()
    }

    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Network("parent relation has a cycle".into()));
        }
        Ok(order)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkDoc::from(self)).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc =
            serde_json::from_str(text).map_err(|e| Error::Network(e.to_string()))?;
        doc.into_network()
    }

    /// Parent-label tuple of row `row` of node `node`.
    fn row_labels(&self, node: usize, mut row: usize) -> Vec<String> {
        let ps = &self.parents[node];
        let mut labels = vec![String::new(); ps.len()];
        for (k, &p) in ps.iter().enumerate().rev() {
            let card = self.nodes[p].domain.len();
            labels[k] = self.nodes[p].domain[row % card].clone();
            row /= card;
        }
        labels
    }
}

/// Observed node states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    pub assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: impl Into<String>, state: impl Into<String>) -> Self {
        self.assignments.insert(node.into(), state.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Resolves to `(node index, state index)` pairs.
    pub(crate) fn resolve(&self, net: &BeliefNetwork) -> Result<Vec<(usize, usize)>> {
        self.assignments
            .iter()
            .map(|(node, state)| {
                let i = net
                    .node_index(node)
                    .ok_or_else(|| Error::UnknownAttribute(node.clone()))?;
                let s = net.nodes[i]
                    .domain
                    .iter()
                    .position(|d| d == state)
                    .ok_or_else(|| Error::UnknownValue {
                        attribute: node.clone(),
                        label: state.clone(),
                    })?;
                Ok((i, s))
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    name: String,
    domain: Vec<String>,
    parents: Vec<String>,
    cpt: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    parents: Vec<String>,
    probabilities: Vec<f64>,
}

impl From<&BeliefNetwork> for NetworkDoc {
    fn from(net: &BeliefNetwork) -> Self {
        let nodes = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeDoc {
                name: n.name.clone(),
                domain: n.domain.clone(),
                parents: net.cpts[i].parents.clone(),
                cpt: net.cpts[i]
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(r, probs)| RowDoc {
                        parents: net.row_labels(i, r),
                        probabilities: probs.clone(),
                    })
                    .collect(),
            })
            .collect();
        Self { nodes }
    }
}

impl NetworkDoc {
    fn into_network(self) -> Result<BeliefNetwork> {
        let domains: BTreeMap<String, Vec<String>> = self
            .nodes
            .iter()
            .map(|n| (n.name.clone(), n.domain.clone()))
            .collect();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut cpts = Vec::with_capacity(self.nodes.len());
        for n in self.nodes {
            let pdoms: Vec<&Vec<String>> = n
                .parents
                .iter()
                .map(|p| {
                    domains
                        .get(p)
                        .ok_or_else(|| Error::Network(format!("unknown parent `{p}`")))
                })
                .collect::<Result<_>>()?;
            let rows_expected: usize = pdoms.iter().map(|d| d.len()).product();
            let mut rows: Vec<Option<Vec<f64>>> = vec![None; rows_expected];
            for row in n.cpt {
                if row.parents.len() != pdoms.len() {
                    return Err(Error::Network(format!(
                        "row key arity mismatch in `{}`",
                        n.name
                    )));
                }
                let mut idx = 0usize;
                for (label, dom) in row.parents.iter().zip(&pdoms) {
                    let s = dom.iter().position(|d| d == label).ok_or_else(|| {
                        Error::Network(format!("unknown state `{label}` in `{}`", n.name))
                    })?;
                    idx = idx * dom.len() + s;
                }
                if rows[idx].replace(row.probabilities).is_some() {
                    return Err(Error::Network(format!("repeated row in `{}`", n.name)));
                }
            }
            let rows = rows
                .into_iter()
                .map(|r| r.ok_or_else(|| Error::Network(format!("missing row in `{}`", n.name))))
                .collect::<Result<_>>()?;
            cpts.push(Cpt {
                child: n.name.clone(),
                parents: n.parents,
                rows,
            });
            nodes.push(Node {
                name: n.name,
                domain: n.domain,
            });
        }
        BeliefNetwork::new(nodes, cpts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> BeliefNetwork {
        BeliefNetwork::new(
            vec![Node::new("A", &["0", "1"]), Node::new("B", &["0", "1"])],
            vec![
                Cpt::prior("A", vec![0.5, 0.5]),
                Cpt {
                    child: "B".into(),
                    parents: vec!["A".into()],
                    rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_cycles_and_bad_rows() {
        let cyc = BeliefNetwork::new(
            vec![Node::new("A", &["0", "1"]), Node::new("B", &["0", "1"])],
            vec![
                Cpt {
                    child: "A".into(),
                    parents: vec!["B".into()],
                    rows: vec![vec![0.5, 0.5]; 2],
                },
                Cpt {
                    child: "B".into(),
                    parents: vec!["A".into()],
                    rows: vec![vec![0.5, 0.5]; 2],
                },
            ],
        );
        assert!(cyc.unwrap_err().to_string().contains("cycle"));
        let bad = BeliefNetwork::new(
            vec![Node::new("A", &["0", "1"])],
            vec![Cpt::prior("A", vec![0.5, 0.6])],
        );
        assert!(bad.is_err());
        let missing = BeliefNetwork::new(vec![Node::new("A", &["0", "1"])], vec![]);
        assert!(missing.is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = chain();
        let text = net.to_json();
        let back = BeliefNetwork::from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn distribution_validation() {
        assert!(CategoricalDistribution::new(vec!["a".into()], vec![0.9]).is_err());
        assert!(
            CategoricalDistribution::new(vec!["a".into(), "b".into()], vec![-0.1, 1.1]).is_err()
        );
        let d =
            CategoricalDistribution::new(vec!["a".into(), "b".into()], vec![0.25, 0.75]).unwrap();
        assert_eq!(d.get("b"), Some(0.75));
        assert_eq!(d.get("c"), None);
    }
}
