use std::collections::BTreeSet;

use super::factor::Factor;
use super::{BeliefNetwork, CategoricalDistribution, Evidence};
use crate::error::{Error, Result};

/// Largest joint table [`brute_force_joint`] will enumerate.
pub const JOINT_CELL_CAP: u128 = 1_000_000;

fn node_factor(net: &BeliefNetwork, node: usize) -> Factor {
    let mut vars = net.parent_indices(node).to_vec();
    vars.push(node);
    let cards = vars.iter().map(|&v| net.nodes()[v].domain.len()).collect();
    let values = net.cpts()[node].rows.iter().flatten().copied().collect();
    Factor::new(vars, cards, values)
}

struct Prepared {
    query: usize,
    factors: Vec<Factor>,
    hidden: BTreeSet<usize>,
}

fn prepare(net: &BeliefNetwork, query: &str, evidence: &Evidence) -> Result<Prepared> {
    let q = net
        .node_index(query)
        .ok_or_else(|| Error::UnknownAttribute(query.to_string()))?;
    if evidence.assignments.contains_key(query) {
        return Err(Error::InvalidParameter(format!(
            "query node `{query}` is also observed"
        )));
    }
    let observed = evidence.resolve(net)?;
    let factors = (0..net.nodes().len())
        .map(|i| {
            observed
                .iter()
                .fold(node_factor(net, i), |f, &(v, s)| f.reduce(v, s))
        })
        .collect();
    let hidden = (0..net.nodes().len())
        .filter(|&i| i != q && observed.iter().all(|&(v, _)| v != i))
        .collect();
    Ok(Prepared {
        query: q,
        factors,
        hidden,
    })
}

/// Hidden variable whose elimination touches the fewest other variables;
/// ties go to the lowest node index.
fn min_degree(factors: &[Factor], hidden: &BTreeSet<usize>) -> usize {
    hidden
        .iter()
        .copied()
        .min_by_key(|&v| {
            let mut neighbours = BTreeSet::new();
            for f in factors.iter().filter(|f| f.contains(v)) {
                neighbours.extend(f.vars.iter().copied().filter(|&u| u != v));
            }
            (neighbours.len(), v)
        })
        .expect("non-empty hidden set")
}

fn eliminate(factors: Vec<Factor>, var: usize) -> Vec<Factor> {
    let (touching, mut rest): (Vec<Factor>, Vec<Factor>) =
        factors.into_iter().partition(|f| f.contains(var));
    if let Some(product) = touching.into_iter().reduce(|a, b| a.product(&b)) {
        rest.push(product.sum_out(var));
    }
    rest
}

fn finish(
    net: &BeliefNetwork,
    query: usize,
    factors: Vec<Factor>,
    label: &str,
) -> Result<CategoricalDistribution> {
    let product = factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f))
        .permuted(&[query]);
    let total: f64 = product.values.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InconsistentEvidence(label.to_string()));
    }
    let probs = product.values.iter().map(|v| v / total).collect();
    CategoricalDistribution::new(net.nodes()[query].domain.clone(), probs)
}

fn describe(evidence: &Evidence) -> String {
    evidence
        .assignments
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Exact posterior of `query` given `evidence` by variable elimination with a
/// min-degree elimination order.
pub fn infer(
    net: &BeliefNetwork,
    query: &str,
    evidence: &Evidence,
) -> Result<CategoricalDistribution> {
    let Prepared {
        query,
        mut factors,
        mut hidden,
    } = prepare(net, query, evidence)?;
    while !hidden.is_empty() {
        let v = min_degree(&factors, &hidden);
        hidden.remove(&v);
        factors = eliminate(factors, v);
    }
    finish(net, query, factors, &describe(evidence))
}

/// Same as [`infer`] but eliminates the named nodes first, in the given order.
/// Hidden nodes left out of `order` are eliminated afterwards by min-degree.
pub fn infer_with_order(
    net: &BeliefNetwork,
    query: &str,
    evidence: &Evidence,
    order: &[&str],
) -> Result<CategoricalDistribution> {
    let Prepared {
        query,
        mut factors,
        mut hidden,
    } = prepare(net, query, evidence)?;
    for name in order {
        let v = net
            .node_index(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))?;
        if !hidden.remove(&v) {
            return Err(Error::InvalidParameter(format!(
                "`{name}` is not a hidden node of this query"
            )));
        }
        factors = eliminate(factors, v);
    }
    while !hidden.is_empty() {
        let v = min_degree(&factors, &hidden);
        hidden.remove(&v);
        factors = eliminate(factors, v);
    }
    finish(net, query, factors, &describe(evidence))
}

/// Fully enumerated joint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    values: Vec<f64>,
}

impl JointTable {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn decode(&self, mut cell: usize) -> Vec<usize> {
        let mut states = vec![0; self.domains.len()];
        for (k, dom) in self.domains.iter().enumerate().rev() {
            states[k] = cell % dom.len();
            cell /= dom.len();
        }
        states
    }

    /// Probability of one full assignment, labels in node order.
    pub fn probability(&self, labels: &[&str]) -> Option<f64> {
        if labels.len() != self.domains.len() {
            return None;
        }
        let mut cell = 0usize;
        for (label, dom) in labels.iter().zip(&self.domains) {
            cell = cell * dom.len() + dom.iter().position(|d| d == label)?;
        }
        Some(self.values[cell])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<&str>, f64)> + '_ {
        (0..self.values.len()).map(move |cell| {
            let labels = self
                .decode(cell)
                .iter()
                .zip(&self.domains)
                .map(|(&s, dom)| dom[s].as_str())
                .collect();
            (labels, self.values[cell])
        })
    }

    /// Posterior by summing matching cells and renormalizing.
    pub fn posterior(&self, query: &str, evidence: &Evidence) -> Result<CategoricalDistribution> {
        let q = self
            .names
            .iter()
            .position(|n| n == query)
            .ok_or_else(|| Error::UnknownAttribute(query.to_string()))?;
        let mut observed = Vec::new();
        for (node, state) in &evidence.assignments {
            let i = self
                .names
                .iter()
                .position(|n| n == node)
                .ok_or_else(|| Error::UnknownAttribute(node.clone()))?;
            let s = self.domains[i]
                .iter()
                .position(|d| d == state)
                .ok_or_else(|| Error::UnknownValue {
                    attribute: node.clone(),
                    label: state.clone(),
                })?;
            observed.push((i, s));
        }
        let mut sums = vec![0.0; self.domains[q].len()];
        for cell in 0..self.values.len() {
            let states = self.decode(cell);
            if observed.iter().all(|&(i, s)| states[i] == s) {
                sums[states[q]] += self.values[cell];
            }
        }
        let total: f64 = sums.iter().sum();
        if total <= 0.0 {
            return Err(Error::InconsistentEvidence(describe(evidence)));
        }
        CategoricalDistribution::new(
            self.domains[q].clone(),
            sums.into_iter().map(|s| s / total).collect(),
        )
    }
}

/// Enumerates every full assignment and multiplies the matching CPT entries.
pub fn brute_force_joint(net: &BeliefNetwork) -> Result<JointTable> {
    let cells = net.state_space();
    if cells > JOINT_CELL_CAP {
        return Err(Error::StateSpaceTooLarge {
            cells,
            cap: JOINT_CELL_CAP,
        });
    }
    let cards: Vec<usize> = net.nodes().iter().map(|n| n.domain.len()).collect();
    let mut values = Vec::with_capacity(cells as usize);
    let mut states = vec![0usize; cards.len()];
    for _ in 0..cells {
        let mut p = 1.0;
        for (i, cpt) in net.cpts().iter().enumerate() {
            let row = net
                .parent_indices(i)
                .iter()
                .fold(0usize, |acc, &par| acc * cards[par] + states[par]);
            p *= cpt.rows[row][states[i]];
        }
        values.push(p);
        for d in (0..cards.len()).rev() {
            states[d] += 1;
            if states[d] < cards[d] {
                break;
            }
            states[d] = 0;
        }
    }
    Ok(JointTable {
        names: net.nodes().iter().map(|n| n.name.clone()).collect(),
        domains: net.nodes().iter().map(|n| n.domain.clone()).collect(),
        values,
    })
}
