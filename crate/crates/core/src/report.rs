//! Rendering of metrics, risk, posterior and sweep results as JSON, CSV or text tables.
//!
//! JSON documents carry every real number twice: `value` is the shortest string
//! that round-trips the `f64`, `display` is rounded to 4 decimals. Undefined
//! rates are `null`. Each document echoes the parameters that produced it.

use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use serde::Serialize;

use crate::beliefnet::{CategoricalDistribution, ConditionalRates, Evidence, NetworkParams};
use crate::error::{Error, Result};
use crate::metrics::{ConfusionCounts, DecisionPolicy, GroupMetrics, GroupRow, MetricsReport};
use crate::risk::{Exclusion, ImpactProfile, RiskEntry, RiskReport, SweepPoint};

pub const METRICS_HEADER: [&str; 9] = [
    "attribute",
    "value",
    "tp",
    "tn",
    "fp",
    "fn",
    "accuracy",
    "fnmr",
    "fmr",
];
pub const RISK_HEADER: [&str; 5] = ["attribute", "value", "fnmr", "fmr", "risk"];
pub const ENSEMBLE_HEADER: [&str; 2] = ["subject_id", "ensemble_risk"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidParameter(format!(
                "format `{other}` is not one of table, json, csv"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Num {
    pub value: String,
    pub display: String,
}

impl Num {
    pub fn new(x: f64) -> Self {
        Self {
            value: format!("{x}"),
            display: fixed4(x),
        }
    }
}

fn num(x: f64) -> Num {
    Num::new(x)
}

fn opt(x: Option<f64>) -> Option<Num> {
    x.map(Num::new)
}

pub fn fixed4(x: f64) -> String {
    let s = format!("{x:.4}");
    // no "-0.0000"
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn fixed4_opt(x: Option<f64>) -> String {
    x.map(fixed4).unwrap_or_default()
}

fn json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report documents always serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct PolicyEcho {
    policy: &'static str,
    theta: Num,
    top_k: String,
}

impl PolicyEcho {
    fn new(p: &DecisionPolicy) -> Self {
        Self {
            policy: p.kind.as_str(),
            theta: num(p.theta),
            top_k: p.top_k.to_string(),
        }
    }
}

#[derive(Serialize)]
struct MetricsRowDoc<'a> {
    attribute: &'a str,
    value: &'a str,
    tp: u64,
    tn: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    accuracy: Option<Num>,
    fnmr: Option<Num>,
    fmr: Option<Num>,
}

impl<'a> MetricsRowDoc<'a> {
    fn new(attribute: &'a str, value: &'a str, m: &GroupMetrics) -> Self {
        Self {
            attribute,
            value,
            tp: m.counts.tp,
            tn: m.counts.tn,
            fp: m.counts.fp,
            fn_: m.counts.fn_,
            accuracy: opt(m.accuracy),
            fnmr: opt(m.fnmr),
            fmr: opt(m.fmr),
        }
    }
}

#[derive(Serialize)]
struct GroupRef<'a> {
    attribute: &'a str,
    value: &'a str,
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    kind: &'static str,
    params: Option<PolicyEcho>,
    baseline: MetricsRowDoc<'a>,
    groups: Vec<MetricsRowDoc<'a>>,
    omitted: Vec<GroupRef<'a>>,
}

pub fn metrics_json(report: &MetricsReport) -> String {
    json(&MetricsDoc {
        kind: "metrics",
        params: report.policy.as_ref().map(PolicyEcho::new),
        baseline: MetricsRowDoc::new("baseline", "all", &report.baseline),
        groups: report
            .groups
            .iter()
            .map(|g| MetricsRowDoc::new(&g.attribute, &g.value, &g.metrics))
            .collect(),
        omitted: report
            .omitted
            .iter()
            .map(|(a, v)| GroupRef {
                attribute: a,
                value: v,
            })
            .collect(),
    })
}

fn metrics_rows(report: &MetricsReport) -> Vec<Vec<String>> {
    std::iter::once(("baseline", "all", &report.baseline))
        .chain(
            report
                .groups
                .iter()
                .map(|g| (g.attribute.as_str(), g.value.as_str(), &g.metrics)),
        )
        .map(|(a, v, m)| {
            vec![
                a.to_string(),
                v.to_string(),
                m.counts.tp.to_string(),
                m.counts.tn.to_string(),
                m.counts.fp.to_string(),
                m.counts.fn_.to_string(),
                fixed4_opt(m.accuracy),
                fixed4_opt(m.fnmr),
                fixed4_opt(m.fmr),
            ]
        })
        .collect()
}

fn csv_lines(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    out.push_str(
        &String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input"),
    );
}

/// Left-aligned text columns separated by two spaces; undefined cells show `-`.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len().max(1));
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut l = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            let c = if c.is_empty() { "-" } else { c };
            if i + 1 == cells.len() {
                l.push_str(c);
            } else {
                let _ = write!(l, "{c:<w$}  ");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    csv_lines(&mut out, &METRICS_HEADER, &metrics_rows(report));
    out
}

pub fn metrics_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    if let Some(p) = &report.policy {
        let _ = writeln!(out, "policy {} theta {} top_k {}", p.kind, p.theta, p.top_k);
    }
    out.push_str(&table(&METRICS_HEADER, &metrics_rows(report)));
    for (a, v) in &report.omitted {
        let _ = writeln!(out, "omitted {a}={v}: no records");
    }
    out
}

pub fn render_metrics(report: &MetricsReport, format: Format) -> String {
    match format {
        Format::Table => metrics_table(report),
        Format::Json => metrics_json(report),
        Format::Csv => metrics_csv(report),
    }
}

/// Reads a metrics CSV with counts. Rates are recomputed from the counts; any
/// rate column that is filled in must agree with them at 4 decimals.
pub fn read_metrics_csv<R: Read>(input: R) -> Result<MetricsReport> {
    let source = "metrics";
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::Malformed {
            source_name: source.into(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::Malformed {
            source_name: source.into(),
            line: 1,
            message: format!("header must be `{}`", METRICS_HEADER.join(",")),
        });
    }
    let mut baseline = None;
    let mut groups = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| Error::Malformed {
            source_name: source.into(),
            line,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let count = |j: usize| {
            rec[j]
                .parse::<u64>()
                .map_err(|_| bad(format!("`{}` is not a count", &rec[j])))
        };
        let counts = ConfusionCounts::new(count(2)?, count(3)?, count(4)?, count(5)?);
        let m = GroupMetrics::from_counts(counts);
        for (j, v) in [(6, m.accuracy), (7, m.fnmr), (8, m.fmr)] {
            let given = &rec[j];
            if !given.is_empty() && given != fixed4_opt(v) {
                return Err(bad(format!(
                    "{} `{given}` disagrees with the counts ({})",
                    METRICS_HEADER[j],
                    fixed4_opt(v)
                )));
            }
        }
        if &rec[0] == "baseline" {
            if baseline.replace(m).is_some() {
                return Err(bad("second baseline row".into()));
            }
        } else {
            groups.push(GroupRow {
                attribute: rec[0].to_string(),
                value: rec[1].to_string(),
                metrics: m,
            });
        }
    }
    let baseline = baseline.ok_or_else(|| Error::Malformed {
        source_name: source.into(),
        line: 1,
        message: "no baseline row".into(),
    })?;
    Ok(MetricsReport {
        policy: None,
        baseline,
        groups,
        omitted: Vec::new(),
    })
}

#[derive(Serialize)]
struct RiskEntryDoc<'a> {
    attribute: &'a str,
    value: &'a str,
    fnmr: Num,
    fmr: Num,
    risk: Num,
}

impl<'a> From<&'a RiskEntry> for RiskEntryDoc<'a> {
    fn from(e: &'a RiskEntry) -> Self {
        Self {
            attribute: &e.attribute,
            value: &e.value,
            fnmr: num(e.fnmr),
            fmr: num(e.fmr),
            risk: num(e.risk),
        }
    }
}

#[derive(Serialize)]
struct EnsembleDoc<'a> {
    subject_id: &'a str,
    ensemble_risk: Num,
}

#[derive(Serialize)]
struct RiskParams {
    #[serde(flatten)]
    policy: Option<PolicyEcho>,
    impact_fmr: Num,
    impact_fnmr: Num,
}

#[derive(Serialize)]
struct RiskBody<'a> {
    baseline: Option<RiskEntryDoc<'a>>,
    entries: Vec<RiskEntryDoc<'a>>,
    ensemble: Vec<EnsembleDoc<'a>>,
    exclusions: &'a [Exclusion],
    footnotes: &'a [String],
}

impl<'a> From<&'a RiskReport> for RiskBody<'a> {
    fn from(r: &'a RiskReport) -> Self {
        Self {
            baseline: r.baseline.as_ref().map(RiskEntryDoc::from),
            entries: r.entries.iter().map(RiskEntryDoc::from).collect(),
            ensemble: r
                .ensemble
                .iter()
                .map(|(s, v)| EnsembleDoc {
                    subject_id: s,
                    ensemble_risk: num(*v),
                })
                .collect(),
            exclusions: &r.exclusions,
            footnotes: &r.footnotes,
        }
    }
}

#[derive(Serialize)]
struct RiskDoc<'a> {
    kind: &'static str,
    params: RiskParams,
    #[serde(flatten)]
    body: RiskBody<'a>,
}

fn risk_params(policy: Option<&DecisionPolicy>, profile: &ImpactProfile) -> RiskParams {
    RiskParams {
        policy: policy.map(PolicyEcho::new),
        impact_fmr: num(profile.impact_fmr),
        impact_fnmr: num(profile.impact_fnmr),
    }
}

pub fn risk_json(report: &RiskReport) -> String {
    json(&RiskDoc {
        kind: "risk",
        params: risk_params(report.policy.as_ref(), &report.profile),
        body: report.into(),
    })
}

fn risk_rows(report: &RiskReport) -> Vec<Vec<String>> {
    report
        .baseline
        .iter()
        .chain(&report.entries)
        .map(|e| {
            vec![
                e.attribute.clone(),
                e.value.clone(),
                fixed4(e.fnmr),
                fixed4(e.fmr),
                fixed4(e.risk),
            ]
        })
        .collect()
}

fn ensemble_rows(report: &RiskReport) -> Vec<Vec<String>> {
    report
        .ensemble
        .iter()
        .map(|(s, v)| vec![s.clone(), fixed4(*v)])
        .collect()
}

/// Group section, a blank line, then the ensemble section.
pub fn risk_csv(report: &RiskReport) -> String {
    let mut out = String::new();
    csv_lines(&mut out, &RISK_HEADER, &risk_rows(report));
    out.push('\n');
    csv_lines(&mut out, &ENSEMBLE_HEADER, &ensemble_rows(report));
    out
}

fn exclusion_line(e: &Exclusion) -> String {
    match e {
        Exclusion::Baseline { reason } => format!("excluded baseline: {reason}"),
        Exclusion::Group {
            attribute,
            value,
            reason,
        } => format!("excluded {attribute}={value}: {reason}"),
        Exclusion::Subject { subject_id, reason } => {
            format!("excluded subject {subject_id}: {reason}")
        }
    }
}

pub fn risk_table(report: &RiskReport) -> String {
    let mut out = String::new();
    if let Some(p) = &report.policy {
        let _ = writeln!(out, "policy {} theta {} top_k {}", p.kind, p.theta, p.top_k);
    }
    let _ = writeln!(
        out,
        "impact_fmr {} impact_fnmr {}",
        report.profile.impact_fmr, report.profile.impact_fnmr
    );
    out.push_str(&table(&RISK_HEADER, &risk_rows(report)));
    out.push('\n');
    out.push_str(&table(&ENSEMBLE_HEADER, &ensemble_rows(report)));
    for e in &report.exclusions {
        out.push_str(&exclusion_line(e));
        out.push('\n');
    }
    for (i, f) in report.footnotes.iter().enumerate() {
        let _ = writeln!(out, "[{}] {f}", i + 1);
    }
    out
}

pub fn render_risk(report: &RiskReport, format: Format) -> String {
    match format {
        Format::Table => risk_table(report),
        Format::Json => risk_json(report),
        Format::Csv => risk_csv(report),
    }
}

/// A posterior over one node, with the rates it implies when the node is `Outcome`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<'a> {
    pub params: &'a NetworkParams,
    pub query: &'a str,
    pub evidence: &'a Evidence,
    pub distribution: &'a CategoricalDistribution,
    pub rates: Option<&'a ConditionalRates>,
}

#[derive(Serialize)]
struct StateDoc<'a> {
    state: &'a str,
    probability: Num,
}

#[derive(Serialize)]
struct RatesDoc {
    fnmr: Option<Num>,
    fmr: Option<Num>,
}

#[derive(Serialize)]
struct PosteriorParams<'a> {
    #[serde(flatten)]
    policy: PolicyEcho,
    alpha: Num,
    min_support: u64,
    query: &'a str,
    evidence: &'a Evidence,
}

#[derive(Serialize)]
struct PosteriorDoc<'a> {
    kind: &'static str,
    params: PosteriorParams<'a>,
    distribution: Vec<StateDoc<'a>>,
    conditional_rates: Option<RatesDoc>,
}

pub fn posterior_json(p: &Posterior<'_>) -> String {
    json(&PosteriorDoc {
        kind: "posterior",
        params: PosteriorParams {
            policy: PolicyEcho::new(&p.params.policy),
            alpha: num(p.params.alpha),
            min_support: p.params.min_support,
            query: p.query,
            evidence: p.evidence,
        },
        distribution: p
            .distribution
            .iter()
            .map(|(state, x)| StateDoc {
                state,
                probability: num(x),
            })
            .collect(),
        conditional_rates: p.rates.map(|r| RatesDoc {
            fnmr: opt(r.fnmr),
            fmr: opt(r.fmr),
        }),
    })
}

fn posterior_rows(p: &Posterior<'_>) -> Vec<Vec<String>> {
    p.distribution
        .iter()
        .map(|(s, x)| vec![s.to_string(), fixed4(x)])
        .collect()
}

pub fn posterior_csv(p: &Posterior<'_>) -> String {
    let mut out = String::new();
    csv_lines(&mut out, &["state", "probability"], &posterior_rows(p));
    if let Some(r) = p.rates {
        out.push('\n');
        csv_lines(
            &mut out,
            &["fnmr", "fmr"],
            &[vec![fixed4_opt(r.fnmr), fixed4_opt(r.fmr)]],
        );
    }
    out
}

pub fn posterior_table(p: &Posterior<'_>) -> String {
    let mut out = String::new();
    let given: Vec<String> = p
        .evidence
        .assignments
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(
        out,
        "P({} | {})",
        p.query,
        if given.is_empty() {
            "-".to_string()
        } else {
            given.join(", ")
        }
    );
    out.push_str(&table(&["state", "probability"], &posterior_rows(p)));
    if let Some(r) = p.rates {
        let _ = writeln!(out, "fnmr {}", fixed4_opt(r.fnmr));
        let _ = writeln!(out, "fmr {}", fixed4_opt(r.fmr));
    }
    out
}

pub fn render_posterior(p: &Posterior<'_>, format: Format) -> String {
    match format {
        Format::Table => posterior_table(p),
        Format::Json => posterior_json(p),
        Format::Csv => posterior_csv(p),
    }
}

#[derive(Serialize)]
struct ImpactDoc {
    impact_fmr: Num,
    impact_fnmr: Num,
}

#[derive(Serialize)]
struct SweepParams {
    policy: &'static str,
    top_k: String,
    thetas: Vec<Num>,
    impacts: Vec<ImpactDoc>,
}

#[derive(Serialize)]
struct SweepPointDoc<'a> {
    impact_fmr: Num,
    impact_fnmr: Num,
    theta: Num,
    #[serde(flatten)]
    body: RiskBody<'a>,
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    kind: &'static str,
    params: SweepParams,
    points: Vec<SweepPointDoc<'a>>,
}

/// `base` supplies the policy kind and top-k; the grids are echoed as given.
pub fn sweep_json(
    base: &DecisionPolicy,
    profiles: &[ImpactProfile],
    thetas: &[f64],
    points: &[SweepPoint],
) -> String {
    json(&SweepDoc {
        kind: "sweep",
        params: SweepParams {
            policy: base.kind.as_str(),
            top_k: base.top_k.to_string(),
            thetas: thetas.iter().map(|&t| num(t)).collect(),
            impacts: profiles
                .iter()
                .map(|p| ImpactDoc {
                    impact_fmr: num(p.impact_fmr),
                    impact_fnmr: num(p.impact_fnmr),
                })
                .collect(),
        },
        points: points
            .iter()
            .map(|p| SweepPointDoc {
                impact_fmr: num(p.profile.impact_fmr),
                impact_fnmr: num(p.profile.impact_fnmr),
                theta: num(p.theta),
                body: (&p.report).into(),
            })
            .collect(),
    })
}

const SWEEP_HEADER: [&str; 8] = [
    "impact_fmr",
    "impact_fnmr",
    "theta",
    "attribute",
    "value",
    "fnmr",
    "fmr",
    "risk",
];

fn sweep_rows(points: &[SweepPoint]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for p in points {
        for r in risk_rows(&p.report) {
            let mut row = vec![
                p.profile.impact_fmr.to_string(),
                p.profile.impact_fnmr.to_string(),
                p.theta.to_string(),
            ];
            row.extend(r);
            rows.push(row);
        }
    }
    rows
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    csv_lines(&mut out, &SWEEP_HEADER, &sweep_rows(points));
    out
}

pub fn sweep_table(points: &[SweepPoint]) -> String {
    table(&SWEEP_HEADER, &sweep_rows(points))
}

pub fn render_sweep(
    base: &DecisionPolicy,
    profiles: &[ImpactProfile],
    thetas: &[f64],
    points: &[SweepPoint],
    format: Format,
) -> String {
    match format {
        Format::Table => sweep_table(points),
        Format::Json => sweep_json(base, profiles, thetas, points),
        Format::Csv => sweep_csv(points),
    }
}
