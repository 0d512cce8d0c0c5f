//! Impact-weighted risk of bias per group, summed per subject, and what-if sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SubjectAttributes};
use crate::error::{Error, Result};
use crate::metrics::{group_metrics, DecisionPolicy, GroupMetrics, MetricsReport};

/// Cost weights applied to the false match and false non-match rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactProfile {
    pub impact_fmr: f64,
    pub impact_fnmr: f64,
}

impl ImpactProfile {
    /// A false match costs ten times a false non-match.
    pub const CHECKPOINT: ImpactProfile = ImpactProfile {
        impact_fmr: 10.0,
        impact_fnmr: 1.0,
    };

    pub fn new(impact_fmr: f64, impact_fnmr: f64) -> Result<Self> {
        for (name, v) in [("impact_fmr", impact_fmr), ("impact_fnmr", impact_fnmr)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} {v} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            impact_fmr,
            impact_fnmr,
        })
    }

    pub fn scaled(self, factor: f64) -> Result<Self> {
        Self::new(self.impact_fmr * factor, self.impact_fnmr * factor)
    }
}

impl Default for ImpactProfile {
    fn default() -> Self {
        Self {
            impact_fmr: 1.0,
            impact_fnmr: 1.0,
        }
    }
}

impl<'de> Deserialize<'de> for ImpactProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            impact_fmr: f64,
            impact_fnmr: f64,
        }
        let raw = Raw::deserialize(d)?;
        ImpactProfile::new(raw.impact_fmr, raw.impact_fnmr).map_err(serde::de::Error::custom)
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} {v} is outside [0, 1]"
        )))
    }
}

/// `impact_fmr * fmr + impact_fnmr * fnmr`.
pub fn risk_of_bias(fnmr: f64, fmr: f64, profile: &ImpactProfile) -> Result<f64> {
    check_rate("fnmr", fnmr)?;
    check_rate("fmr", fmr)?;
    Ok(profile.impact_fmr * fmr + profile.impact_fnmr * fnmr)
}

/// Risk of one group; an absent rate is an error naming `group`.
pub fn group_risk(metrics: &GroupMetrics, group: &str, profile: &ImpactProfile) -> Result<f64> {
    let fnmr = metrics.fnmr.ok_or_else(|| Error::AbsentRate {
        group: group.to_string(),
        rate: "fnmr",
    })?;
    let fmr = metrics.fmr.ok_or_else(|| Error::AbsentRate {
        group: group.to_string(),
        rate: "fmr",
    })?;
    risk_of_bias(fnmr, fmr, profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub attribute: String,
    pub value: String,
    pub fnmr: f64,
    pub fmr: f64,
    pub risk: f64,
}

/// Sum of the risks of the subject's own group for every attribute it carries.
///
/// Entries for other values are ignored. The sum runs in attribute-name order,
/// so the result does not depend on the order of `entries`.
pub fn ensemble_risk(subject: &SubjectAttributes, entries: &[RiskEntry]) -> Result<f64> {
    let mut total = 0.0;
    for (attribute, value) in &subject.values {
        let mut matched = entries
            .iter()
            .filter(|e| &e.attribute == attribute && &e.value == value);
        let entry = matched
            .next()
            .ok_or_else(|| Error::MissingRiskEntry(format!("{attribute}={value}")))?;
        if matched.next().is_some() {
            return Err(Error::DuplicateRiskEntry(format!("{attribute}={value}")));
        }
        total += entry.risk;
    }
    Ok(total)
}

/// Something left out of a report, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exclusion {
    Baseline {
        reason: String,
    },
    Group {
        attribute: String,
        value: String,
        reason: String,
    },
    Subject {
        subject_id: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub profile: ImpactProfile,
    pub policy: Option<DecisionPolicy>,
    pub baseline: Option<RiskEntry>,
    pub entries: Vec<RiskEntry>,
    pub ensemble: BTreeMap<String, f64>,
    pub exclusions: Vec<Exclusion>,
    pub footnotes: Vec<String>,
}

impl RiskReport {
    pub fn baseline_risk(&self) -> Option<f64> {
        self.baseline.as_ref().map(|b| b.risk)
    }

    pub fn entry(&self, attribute: &str, value: &str) -> Option<&RiskEntry> {
        self.entries
            .iter()
            .find(|e| e.attribute == attribute && e.value == value)
    }
}

pub const WEIGHTING_NOTE: &str =
    "risk = impact_fmr * fmr + impact_fnmr * fnmr; the FMR impact multiplies the false match rate only";
pub const ENSEMBLE_NOTE: &str =
    "ensemble risk is the unweighted sum of the subject's per-attribute risks; subjects with any undefined group risk are excluded";

fn absent_reason(m: &GroupMetrics) -> Option<String> {
    match (m.fnmr, m.fmr) {
        (Some(_), Some(_)) => None,
        (None, Some(_)) => Some("fnmr undefined: no genuine trials".into()),
        (Some(_), None) => Some("fmr undefined: no imposter trials".into()),
        (None, None) => Some("fnmr and fmr undefined: no trials".into()),
    }
}

fn entry(
    attribute: &str,
    value: &str,
    m: &GroupMetrics,
    profile: &ImpactProfile,
) -> Result<RiskEntry> {
    let (fnmr, fmr) = (m.fnmr.unwrap_or(0.0), m.fmr.unwrap_or(0.0));
    Ok(RiskEntry {
        attribute: attribute.to_string(),
        value: value.to_string(),
        fnmr,
        fmr,
        risk: risk_of_bias(fnmr, fmr, profile)?,
    })
}

/// Risk report over precomputed group metrics and the subjects to score.
pub fn risk_report_from_metrics<'a>(
    metrics: &MetricsReport,
    subjects: impl IntoIterator<Item = &'a SubjectAttributes>,
    profile: &ImpactProfile,
) -> Result<RiskReport> {
    let mut exclusions = Vec::new();
    let baseline = match absent_reason(&metrics.baseline) {
        None => Some(entry("baseline", "all", &metrics.baseline, profile)?),
        Some(reason) => {
            exclusions.push(Exclusion::Baseline { reason });
            None
        }
    };

    let mut entries = Vec::new();
    for row in &metrics.groups {
        match absent_reason(&row.metrics) {
            None => entries.push(entry(&row.attribute, &row.value, &row.metrics, profile)?),
            Some(reason) => exclusions.push(Exclusion::Group {
                attribute: row.attribute.clone(),
                value: row.value.clone(),
                reason,
            }),
        }
    }
    for (attribute, value) in &metrics.omitted {
        exclusions.push(Exclusion::Group {
            attribute: attribute.clone(),
            value: value.clone(),
            reason: "no records".into(),
        });
    }

    let mut ensemble = BTreeMap::new();
    for subject in subjects {
        match ensemble_risk(subject, &entries) {
            Ok(r) => {
                ensemble.insert(subject.subject_id.clone(), r);
            }
            Err(Error::MissingRiskEntry(group)) => exclusions.push(Exclusion::Subject {
                subject_id: subject.subject_id.clone(),
                reason: format!("no risk for {group}"),
            }),
            Err(e) => return Err(e),
        }
    }

    Ok(RiskReport {
        profile: *profile,
        policy: metrics.policy,
        baseline,
        entries,
        ensemble,
        exclusions,
        footnotes: vec![WEIGHTING_NOTE.into(), ENSEMBLE_NOTE.into()],
    })
}

pub fn risk_report(
    dataset: &Dataset,
    policy: &DecisionPolicy,
    profile: &ImpactProfile,
) -> Result<RiskReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidDataset("no prediction records".into()));
    }
    let metrics = group_metrics(dataset, policy);
    risk_report_from_metrics(&metrics, dataset.subjects(), profile)
}

/// Parses a comma-separated list of thresholds, e.g. `0,0.5,0.9`.
pub fn parse_theta_grid(text: &str) -> Result<Vec<f64>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|x| (0.0..=1.0).contains(x))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("theta `{t}` is not a number in [0, 1]"))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("theta grid is empty".into()));
    }
    Ok(grid)
}

/// Parses `fmr:fnmr` pairs separated by commas, e.g. `1:1,10:1`.
pub fn parse_impact_grid(text: &str) -> Result<Vec<ImpactProfile>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || Error::InvalidParameter(format!("impact pair `{t}` is not `fmr:fnmr`"));
            let (a, b) = t.split_once(':').ok_or_else(bad)?;
            let a = a.trim().parse::<f64>().map_err(|_| bad())?;
            let b = b.trim().parse::<f64>().map_err(|_| bad())?;
            ImpactProfile::new(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("impact grid is empty".into()));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub profile: ImpactProfile,
    pub theta: f64,
    pub report: RiskReport,
}

/// One report per (profile, theta), profile-major, each theta applied to `base`.
///
/// Metrics are computed once per theta, in parallel; output order follows the grids.
pub fn whatif_sweep(
    dataset: &Dataset,
    base: &DecisionPolicy,
    profiles: &[ImpactProfile],
    thetas: &[f64],
) -> Result<Vec<SweepPoint>> {
    if profiles.is_empty() || thetas.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep grids must be non-empty".into(),
        ));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidDataset("no prediction records".into()));
    }
    let policies = thetas
        .iter()
        .map(|&t| base.with_theta(t))
        .collect::<Result<Vec<_>>>()?;
    let metrics: Vec<MetricsReport> = policies
        .par_iter()
        .map(|p| group_metrics(dataset, p))
        .collect();

    let mut points = Vec::with_capacity(profiles.len() * thetas.len());
    for profile in profiles {
        for (&theta, m) in thetas.iter().zip(&metrics) {
            points.push(SweepPoint {
                profile: *profile,
                theta,
                report: risk_report_from_metrics(m, dataset.subjects(), profile)?,
            });
        }
    }
    Ok(points)
}
