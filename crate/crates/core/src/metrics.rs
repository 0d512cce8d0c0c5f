//! Genuine/imposter trials, confusion counts and per-group error rates.
//!
//! Each probe record is compared against every gallery identity (or against
//! its top-k candidates when truncation is requested). Listed candidates get a
//! softmax probability; identities outside the list carry probability 0.

use std::collections::BTreeSet;
use std::fmt;
use std::iter::Sum;
use std::num::NonZeroUsize;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PredictionRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Only the rank-1 candidate can be accepted, and only if its probability reaches theta.
    RankThreshold,
    /// Any candidate whose probability reaches theta is accepted.
    ScoreThreshold,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::RankThreshold => "rank_threshold",
            PolicyKind::ScoreThreshold => "score_threshold",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank_threshold" => Ok(PolicyKind::RankThreshold),
            "score_threshold" => Ok(PolicyKind::ScoreThreshold),
            other => Err(Error::InvalidParameter(format!(
                "policy `{other}` is not rank_threshold or score_threshold"
            ))),
        }
    }
}

/// Size of the per-probe trial universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum TopK {
    /// Every gallery identity.
    #[default]
    All,
    Top(NonZeroUsize),
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::All => f.write_str("all"),
            TopK::Top(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for TopK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(TopK::All);
        }
        s.parse::<NonZeroUsize>().map(TopK::Top).map_err(|_| {
            Error::InvalidParameter(format!("top_k `{s}` is not `all` or a positive integer"))
        })
    }
}

impl Serialize for TopK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TopK::All => s.serialize_str("all"),
            TopK::Top(k) => s.serialize_u64(k.get() as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TopK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => NonZeroUsize::new(n as usize)
                .map(TopK::Top)
                .ok_or_else(|| serde::de::Error::custom("top_k must be positive")),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct DecisionPolicy {
    pub kind: PolicyKind,
    pub theta: f64,
    pub top_k: TopK,
}

#[derive(Deserialize)]
struct RawPolicy {
    kind: PolicyKind,
    theta: f64,
    #[serde(default)]
    top_k: TopK,
}

impl TryFrom<RawPolicy> for DecisionPolicy {
    type Error = Error;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        DecisionPolicy::new(raw.kind, raw.theta, raw.top_k)
    }
}

impl DecisionPolicy {
    pub fn new(kind: PolicyKind, theta: f64, top_k: TopK) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta {theta} is outside [0, 1]"
            )));
        }
        Ok(Self { kind, theta, top_k })
    }

    pub fn rank(theta: f64) -> Result<Self> {
        Self::new(PolicyKind::RankThreshold, theta, TopK::All)
    }

    pub fn score(theta: f64) -> Result<Self> {
        Self::new(PolicyKind::ScoreThreshold, theta, TopK::All)
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::new(self.kind, theta, self.top_k)
    }

    fn decide(&self, is_rank_one: bool, probability: f64) -> bool {
        match self.kind {
            PolicyKind::RankThreshold => is_rank_one && probability >= self.theta,
            PolicyKind::ScoreThreshold => probability >= self.theta,
        }
    }
}

/// Pure rank-1 decisions over the full gallery.
impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            kind: PolicyKind::RankThreshold,
            theta: 0.0,
            top_k: TopK::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub probe_id: String,
    pub candidate: String,
    pub is_genuine: bool,
    pub decided_match: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn genuine(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn imposter(&self) -> u64 {
        self.fp + self.tn
    }

    fn record(&mut self, genuine: bool, matched: bool, n: u64) {
        match (genuine, matched) {
            (true, true) => self.tp += n,
            (true, false) => self.fn_ += n,
            (false, true) => self.fp += n,
            (false, false) => self.tn += n,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(
            self.tp + o.tp,
            self.tn + o.tn,
            self.fp + o.fp,
            self.fn_ + o.fn_,
        )
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Accuracy, FNMR and FMR of one slice. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub accuracy: Option<f64>,
    pub fnmr: Option<f64>,
    pub fmr: Option<f64>,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl GroupMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Self {
            accuracy: ratio(counts.tp + counts.tn, counts.total()),
            fnmr: ratio(counts.fn_, counts.genuine()),
            fmr: ratio(counts.fp, counts.imposter()),
            counts,
        }
    }
}

pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Numeric("softmax of an empty list".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// The listed part of a record's trial universe.
struct ListedTrials<'a> {
    record: &'a PredictionRecord,
    listed: usize,
    probabilities: Vec<f64>,
}

impl<'a> ListedTrials<'a> {
    fn new(record: &'a PredictionRecord, top_k: TopK) -> Self {
        let listed = match top_k {
            TopK::All => record.candidates().len(),
            TopK::Top(k) => k.get().min(record.candidates().len()),
        };
        let scores: Vec<f64> = record.candidates()[..listed]
            .iter()
            .map(|c| c.score)
            .collect();
        let probabilities = softmax(&scores).expect("records hold finite, non-empty scores");
        Self {
            record,
            listed,
            probabilities,
        }
    }

    fn true_listed(&self) -> bool {
        self.record.candidates()[..self.listed]
            .iter()
            .any(|c| c.label == self.record.true_label())
    }
}

/// Expands every record into its trials.
///
/// With `TopK::All` each record yields one trial per gallery identity: listed
/// candidates first in rank order, then the rest of the gallery in label order.
/// With a finite `top_k` only the first k candidates are trials, plus a
/// zero-probability genuine trial when the true label was cut off.
pub fn generate_trials(dataset: &Dataset, policy: &DecisionPolicy) -> Vec<Trial> {
    let mut trials = Vec::new();
    for record in dataset.records() {
        let listed = ListedTrials::new(record, policy.top_k);
        let truth = record.true_label();
        let mut covered = BTreeSet::new();
        for (i, (c, &p)) in record.candidates()[..listed.listed]
            .iter()
            .zip(&listed.probabilities)
            .enumerate()
        {
            covered.insert(c.label.as_str());
            trials.push(Trial {
                probe_id: record.probe_id().to_string(),
                candidate: c.label.clone(),
                is_genuine: c.label == truth,
                decided_match: policy.decide(i == 0, p),
                probability: p,
            });
        }
        let rest: Vec<&String> = match policy.top_k {
            TopK::All => dataset
                .gallery()
                .iter()
                .filter(|g| !covered.contains(g.as_str()))
                .collect(),
            TopK::Top(_) if !covered.contains(truth) => dataset
                .gallery()
                .iter()
                .filter(|g| g.as_str() == truth)
                .collect(),
            TopK::Top(_) => Vec::new(),
        };
        for label in rest {
            trials.push(Trial {
                probe_id: record.probe_id().to_string(),
                candidate: label.clone(),
                is_genuine: label == truth,
                decided_match: policy.decide(false, 0.0),
                probability: 0.0,
            });
        }
    }
    trials
}

pub fn confusion_counts(trials: &[Trial]) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for t in trials {
        counts.record(t.is_genuine, t.decided_match, 1);
    }
    counts
}

/// Counts for a single record without materializing the unlisted gallery trials.
pub(crate) fn record_counts(
    record: &PredictionRecord,
    gallery_size: usize,
    policy: &DecisionPolicy,
) -> ConfusionCounts {
    let listed = ListedTrials::new(record, policy.top_k);
    let truth = record.true_label();
    let mut counts = ConfusionCounts::default();
    for (i, (c, &p)) in record.candidates()[..listed.listed]
        .iter()
        .zip(&listed.probabilities)
        .enumerate()
    {
        counts.record(c.label == truth, policy.decide(i == 0, p), 1);
    }
    let unlisted_match = policy.decide(false, 0.0);
    let true_listed = listed.true_listed();
    match policy.top_k {
        TopK::All => {
            let rest = (gallery_size - listed.listed) as u64;
            if true_listed {
                counts.record(false, unlisted_match, rest);
            } else {
                counts.record(true, unlisted_match, 1);
                counts.record(false, unlisted_match, rest - 1);
            }
        }
        TopK::Top(_) => {
            if !true_listed {
                counts.record(true, unlisted_match, 1);
            }
        }
    }
    counts
}

pub(crate) fn per_record_counts(
    dataset: &Dataset,
    policy: &DecisionPolicy,
) -> Vec<ConfusionCounts> {
    let g = dataset.gallery().len();
    dataset
        .records()
        .par_iter()
        .map(|r| record_counts(r, g, policy))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub attribute: String,
    pub value: String,
    pub metrics: GroupMetrics,
}

/// Per-group metrics of one dataset under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: Option<DecisionPolicy>,
    pub baseline: GroupMetrics,
    pub groups: Vec<GroupRow>,
    /// Attribute values without any record.
    pub omitted: Vec<(String, String)>,
}

impl MetricsReport {
    pub fn group(&self, attribute: &str, value: &str) -> Option<&GroupMetrics> {
        self.groups
            .iter()
            .find(|g| g.attribute == attribute && g.value == value)
            .map(|g| &g.metrics)
    }
}

pub fn group_metrics(dataset: &Dataset, policy: &DecisionPolicy) -> MetricsReport {
    let per_record = per_record_counts(dataset, policy);
    let schema = dataset.schema();
    let mut sums: Vec<Vec<(u64, ConfusionCounts)>> = schema
        .attributes()
        .iter()
        .map(|a| vec![(0, ConfusionCounts::default()); a.domain.len()])
        .collect();
    for (i, counts) in per_record.iter().enumerate() {
        for (a, &v) in dataset.record_codes(i).iter().enumerate() {
            sums[a][v].0 += 1;
            sums[a][v].1 += *counts;
        }
    }

    let mut groups = Vec::new();
    let mut omitted = Vec::new();
    for (attr, per_value) in schema.attributes().iter().zip(sums) {
        for (label, (n, counts)) in attr.domain.iter().zip(per_value) {
            if n == 0 {
                omitted.push((attr.name.clone(), label.clone()));
            } else {
                groups.push(GroupRow {
                    attribute: attr.name.clone(),
                    value: label.clone(),
                    metrics: GroupMetrics::from_counts(counts),
                });
            }
        }
    }
    MetricsReport {
        policy: Some(*policy),
        baseline: GroupMetrics::from_counts(per_record.into_iter().sum()),
        groups,
        omitted,
    }
}

/// Fraction of records whose true label is among the first `k` candidates.
pub fn rank_accuracy(dataset: &Dataset, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("rank k must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidParameter(
            "rank accuracy of an empty dataset".into(),
        ));
    }
    let hits = dataset
        .records()
        .iter()
        .filter(|r| r.true_rank().is_some_and(|rank| rank <= k))
        .count();
    Ok(hits as f64 / dataset.len() as f64)
}
