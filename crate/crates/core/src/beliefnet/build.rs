use serde::{Deserialize, Serialize};

use super::{
    infer, BeliefNetwork, CategoricalDistribution, Cpt, Evidence, Node, MATCH, MATCH_STATES,
    OUTCOME, OUTCOME_STATES,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{per_record_counts, ConfusionCounts, DecisionPolicy};

/// Upper bound on Outcome table rows (product of attribute domain sizes).
const MAX_OUTCOME_ROWS: usize = 1 << 20;

/// Everything that determines a network built from a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub policy: DecisionPolicy,
    pub alpha: f64,
    pub min_support: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            policy: DecisionPolicy::default(),
            alpha: 1.0,
            min_support: 5,
        }
    }
}

impl NetworkParams {
    /// Hashable identity, exact on the float bits.
    pub fn cache_key(&self) -> (crate::metrics::PolicyKind, u64, String, u64, u64) {
        (
            self.policy.kind,
            self.policy.theta.to_bits(),
            self.policy.top_k.to_string(),
            self.alpha.to_bits(),
            self.min_support,
        )
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha {alpha} must be finite and >= 0"
        )))
    }
}

fn smoothed(counts: &[u64], alpha: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let den = total as f64 + alpha * counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + alpha) / den).collect()
}

/// Laplace-smoothed frequency of each value of `attribute` over the records.
pub fn estimate_prior(
    dataset: &Dataset,
    attribute: &str,
    alpha: f64,
) -> Result<CategoricalDistribution> {
    check_alpha(alpha)?;
    let a = dataset
        .schema()
        .index_of(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    let counts = dataset.value_counts(a);
    if dataset.is_empty() && alpha == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cannot estimate `{attribute}` from an empty dataset without smoothing"
        )));
    }
    CategoricalDistribution::new(
        dataset.schema().attributes()[a].domain.clone(),
        smoothed(&counts, alpha),
    )
}

fn outcome_vector(c: &ConfusionCounts) -> [u64; 4] {
    [c.tp, c.tn, c.fp, c.fn_]
}

/// Builds the attribute → Outcome → Match network.
///
/// Attribute priors come from [`estimate_prior`]. Each Outcome row is the
/// smoothed TP/TN/FP/FN trial distribution of the records holding that
/// attribute combination. Rows backed by fewer than `min_support` records,
/// or with no trials at all when `alpha == 0`, fall back to the global
/// outcome distribution.
pub fn build_network(
    dataset: &Dataset,
    policy: &DecisionPolicy,
    alpha: f64,
    min_support: u64,
) -> Result<BeliefNetwork> {
    check_alpha(alpha)?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot build a network from an empty dataset".into(),
        ));
    }
    let schema = dataset.schema();
    let cards: Vec<usize> = schema.attributes().iter().map(|a| a.domain.len()).collect();
    let rows: usize = cards
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .filter(|&r| r <= MAX_OUTCOME_ROWS)
        .ok_or_else(|| {
            Error::InvalidParameter("attribute combinations exceed the Outcome table cap".into())
        })?;

    let per_record = per_record_counts(dataset, policy);
    let mut support = vec![0u64; rows];
    let mut cells = vec![ConfusionCounts::default(); rows];
    for (i, counts) in per_record.iter().enumerate() {
        let row = dataset
            .record_codes(i)
            .iter()
            .zip(&cards)
            .fold(0usize, |acc, (&v, &c)| acc * c + v);
        support[row] += 1;
        cells[row] += *counts;
    }
    let global_counts: ConfusionCounts = cells.iter().copied().sum();
    let global = smoothed(&outcome_vector(&global_counts), alpha);

    let outcome_rows = cells
        .iter()
        .zip(&support)
        .map(|(c, &n)| {
            if n < min_support || (alpha == 0.0 && c.total() == 0) {
                global.clone()
            } else {
                smoothed(&outcome_vector(c), alpha)
            }
        })
        .collect();

    let mut nodes = Vec::with_capacity(schema.len() + 2);
    let mut cpts = Vec::with_capacity(schema.len() + 2);
    for attr in schema.attributes() {
        let prior = estimate_prior(dataset, &attr.name, alpha)?;
        nodes.push(Node {
            name: attr.name.clone(),
            domain: attr.domain.clone(),
        });
        cpts.push(Cpt::prior(
            attr.name.clone(),
            prior.probabilities().to_vec(),
        ));
    }
    nodes.push(Node::new(OUTCOME, &OUTCOME_STATES));
    cpts.push(Cpt {
        child: OUTCOME.into(),
        parents: schema.attributes().iter().map(|a| a.name.clone()).collect(),
        rows: outcome_rows,
    });
    nodes.push(Node::new(MATCH, &MATCH_STATES));
    cpts.push(Cpt {
        child: MATCH.into(),
        parents: vec![OUTCOME.into()],
        // TP, TN agree with the ground truth; FP, FN do not
        rows: vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ],
    });
    BeliefNetwork::new(nodes, cpts)
}

/// Outcome posterior and the error rates it implies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalRates {
    pub outcome: CategoricalDistribution,
    pub fnmr: Option<f64>,
    pub fmr: Option<f64>,
}

pub fn conditional_rates(net: &BeliefNetwork, evidence: &Evidence) -> Result<ConditionalRates> {
    if net.node(OUTCOME).is_none() {
        return Err(Error::Network("network has no Outcome node".into()));
    }
    if let Some(bad) = evidence
        .assignments
        .keys()
        .find(|k| k.as_str() == OUTCOME || k.as_str() == MATCH)
    {
        return Err(Error::InvalidParameter(format!(
            "evidence may only name attribute nodes, not `{bad}`"
        )));
    }
    let outcome = infer(net, OUTCOME, evidence)?;
    let p = |s: &str| outcome.get(s).unwrap_or(0.0);
    let rate = |num: f64, other: f64| {
        let den = num + other;
        (den > 0.0).then(|| num / den)
    };
    Ok(ConditionalRates {
        fnmr: rate(p("FN"), p("TP")),
        fmr: rate(p("FP"), p("TN")),
        outcome,
    })
}

/// Posterior of `query`, plus the implied error rates when the query is
/// `Outcome` and the evidence only names attribute nodes.
pub fn query_posterior(
    net: &BeliefNetwork,
    query: &str,
    evidence: &Evidence,
) -> Result<(CategoricalDistribution, Option<ConditionalRates>)> {
    let on_attributes = !evidence
        .assignments
        .keys()
        .any(|k| k.as_str() == OUTCOME || k.as_str() == MATCH);
    if query == OUTCOME && on_attributes {
        let rates = conditional_rates(net, evidence)?;
        Ok((rates.outcome.clone(), Some(rates)))
    } else {
        Ok((infer(net, query, evidence)?, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{
        AttributeDef, AttributeSchema, Candidate, PredictionRecord, SubjectAttributes,
    };
    use crate::metrics::group_metrics;

    fn schema2() -> AttributeSchema {
        AttributeSchema::new(vec![
            AttributeDef {
                name: "g".into(),
                domain: vec!["m".into(), "f".into()],
            },
            AttributeDef {
                name: "s".into(),
                domain: vec!["t".into(), "u".into()],
            },
        ])
        .unwrap()
    }

    /// Subjects s0..s3 cover the four (g, s) combinations; `plan` lists
    /// (subject, correct) per record.
    fn planted(plan: &[(usize, bool)]) -> Dataset {
        let combos = [("m", "t"), ("m", "u"), ("f", "t"), ("f", "u")];
        let subjects = combos
            .iter()
            .enumerate()
            .map(|(i, (g, s))| SubjectAttributes::new(format!("s{i}"), [("g", *g), ("s", *s)]))
            .collect();
        let records = plan
            .iter()
            .enumerate()
            .map(|(k, &(subj, correct))| {
                let truth = format!("s{subj}");
                let other = format!("s{}", (subj + 1) % 4);
                let (first, second) = if correct {
                    (truth.clone(), other)
                } else {
                    (other, truth.clone())
                };
                PredictionRecord::new(
                    format!("p{k}"),
                    truth,
                    vec![Candidate::new(first, 5.0), Candidate::new(second, 1.0)],
                )
                .unwrap()
            })
            .collect();
        Dataset::new(schema2(), subjects, records, None).unwrap()
    }

    #[test]
    fn laplace_prior() {
        // 3 male records, 1 female
        let d = planted(&[(0, true), (0, true), (1, false), (2, true)]);
        let p = estimate_prior(&d, "g", 1.0).unwrap();
        assert!((p.get("m").unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!((p.get("f").unwrap() - 2.0 / 6.0).abs() < 1e-15);
        let raw = estimate_prior(&d, "g", 0.0).unwrap();
        assert_eq!(raw.probabilities(), &[0.75, 0.25]);
        assert!(estimate_prior(&d, "nope", 0.0).is_err());
        assert!(estimate_prior(&d, "g", -1.0).is_err());
    }

    #[test]
    fn hand_counted_outcome_rows() {
        // gallery of 4: a correct record gives TP=1, TN=3; a wrong one FN=1, FP=1, TN=2
        let d = planted(&[(0, true), (0, false), (0, false), (3, true)]);
        let net = build_network(&d, &DecisionPolicy::default(), 1.0, 0).unwrap();
        let outcome = net.cpt(OUTCOME).unwrap();
        // row (m, t) = index 0: TP 1, TN 3+2+2, FP 2, FN 2 -> 12 trials
        let expected = [2.0 / 16.0, 8.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0];
        for (x, y) in outcome.rows[0].iter().zip(expected) {
            assert!((x - y).abs() < 1e-15, "{x} vs {y}");
        }
        // row (f, u) = index 3: TP 1, TN 3
        let expected = [2.0 / 8.0, 4.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0];
        for (x, y) in outcome.rows[3].iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        // unsupported rows are uniform under alpha = 1 and no back-off
        assert_eq!(outcome.rows[1], vec![0.25; 4]);
    }

    #[test]
    fn low_support_rows_back_off_to_global() {
        let d = planted(&[(0, true), (0, false), (0, false), (3, true)]);
        let net = build_network(&d, &DecisionPolicy::default(), 0.0, 2).unwrap();
        let outcome = net.cpt(OUTCOME).unwrap();
        // global: TP 2, TN 10, FP 2, FN 2 over 16 trials
        let global = vec![2.0 / 16.0, 10.0 / 16.0, 2.0 / 16.0, 2.0 / 16.0];
        assert_eq!(outcome.rows[3], global);
        assert_eq!(outcome.rows[1], global);
        assert_ne!(outcome.rows[0], global);
    }

    #[test]
    fn perfect_classifier_never_errs() {
        let d = planted(&[(0, true), (1, true), (2, true), (3, true)]);
        let net = build_network(&d, &DecisionPolicy::default(), 0.0, 0).unwrap();
        for row in &net.cpt(OUTCOME).unwrap().rows {
            assert_eq!(row[2] + row[3], 0.0);
        }
        let rates = conditional_rates(&net, &Evidence::new()).unwrap();
        assert_eq!(rates.fnmr, Some(0.0));
        assert_eq!(rates.fmr, Some(0.0));
        let m = infer(&net, MATCH, &Evidence::new()).unwrap();
        assert_eq!(m.get("true"), Some(1.0));
    }

    #[test]
    fn match_is_deterministic_in_outcome() {
        let d = planted(&[(0, true), (1, false), (2, true), (3, false), (2, false)]);
        let net = build_network(&d, &DecisionPolicy::default(), 1.0, 0).unwrap();
        let ev = Evidence::new().with("g", "f");
        let rates = conditional_rates(&net, &ev).unwrap();
        let m = infer(&net, MATCH, &ev).unwrap();
        let expected = rates.outcome.get("FP").unwrap() + rates.outcome.get("FN").unwrap();
        assert!((m.get("false").unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn factorized_data_reproduces_group_rates() {
        // two records per (g, s) cell, so the attribute joint is a product
        let d = planted(&[
            (0, true),
            (0, false),
            (1, true),
            (1, true),
            (2, false),
            (2, false),
            (3, true),
            (3, false),
        ]);
        let policy = DecisionPolicy::default();
        let net = build_network(&d, &policy, 0.0, 0).unwrap();
        let report = group_metrics(&d, &policy);
        let rates = conditional_rates(&net, &Evidence::new()).unwrap();
        assert!((rates.fnmr.unwrap() - report.baseline.fnmr.unwrap()).abs() < 1e-12);
        assert!((rates.fmr.unwrap() - report.baseline.fmr.unwrap()).abs() < 1e-12);
        let female = conditional_rates(&net, &Evidence::new().with("g", "f")).unwrap();
        let group = report.group("g", "f").unwrap();
        assert!((female.fnmr.unwrap() - group.fnmr.unwrap()).abs() < 1e-12);
        assert!((female.fmr.unwrap() - group.fmr.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_outcome_evidence() {
        let d = planted(&[(0, true), (1, false)]);
        let net = build_network(&d, &DecisionPolicy::default(), 1.0, 0).unwrap();
        assert!(conditional_rates(&net, &Evidence::new().with(OUTCOME, "TP")).is_err());
    }
}
