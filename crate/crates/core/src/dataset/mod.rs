//! Prediction logs, subject attribute metadata, and attribute slicing.
//!
//! A [`Dataset`] is immutable once built. Every true label must resolve to a
//! subject with a complete attribute assignment, and every candidate label must
//! belong to the gallery.

mod parse;
mod schema;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use parse::{parse_attributes, parse_dataset, parse_dataset_with, GalleryMode, ParseOptions};
pub use schema::{AttributeDef, AttributeSchema, BOOLEANS, ETHNICITIES, GENDERS, YOB_DECADES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectAttributes {
    pub subject_id: String,
    pub values: BTreeMap<String, String>,
}

impl SubjectAttributes {
    pub fn new<I, K, V>(subject_id: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            subject_id: subject_id.into(),
            values: values
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn value(&self, attribute: &str) -> Option<&str> {
        self.values.get(attribute).map(String::as_str)
    }

    fn codes(&self, schema: &AttributeSchema) -> Result<Vec<usize>> {
        if let Some(extra) = self.values.keys().find(|k| schema.index_of(k).is_none()) {
            return Err(Error::InvalidDataset(format!(
                "subject `{}` has attribute `{}` outside the schema",
                self.subject_id, extra
            )));
        }
        schema
            .attributes()
            .iter()
            .map(|attr| {
                let label = self.value(&attr.name).ok_or_else(|| {
                    Error::InvalidDataset(format!(
                        "subject `{}` is missing attribute `{}`",
                        self.subject_id, attr.name
                    ))
                })?;
                attr.index_of(label).ok_or_else(|| Error::UnknownValue {
                    attribute: attr.name.clone(),
                    label: label.to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(label: impl Into<String>, score: f64) -> Self {
        Self {
            label: label.into(),
            score,
        }
    }
}

/// Descending score, ties broken by ascending label.
pub(crate) fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.label.cmp(&b.label))
}

/// One probe image: its ground-truth identity and ranked candidate list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    probe_id: String,
    true_label: String,
    candidates: Vec<Candidate>,
}

impl PredictionRecord {
    /// Sorts candidates into rank order. Scores must be finite and labels unique.
    pub fn new(
        probe_id: impl Into<String>,
        true_label: impl Into<String>,
        mut candidates: Vec<Candidate>,
    ) -> Result<Self> {
        let probe_id = probe_id.into();
        if candidates.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "probe `{probe_id}` has no candidates"
            )));
        }
        if let Some(c) = candidates.iter().find(|c| !c.score.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "probe `{probe_id}` candidate `{}` has a non-finite score",
                c.label
            )));
        }
        candidates.sort_by(rank_order);
        let mut seen = BTreeSet::new();
        for c in &candidates {
            if !seen.insert(c.label.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "probe `{probe_id}` lists candidate `{}` twice",
                    c.label
                )));
            }
        }
        Ok(Self {
            probe_id,
            true_label: true_label.into(),
            candidates,
        })
    }

    pub fn probe_id(&self) -> &str {
        &self.probe_id
    }

    pub fn true_label(&self) -> &str {
        &self.true_label
    }

    /// Candidates in rank order (rank 1 first).
    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// 1-based rank of the true label among the candidates, if listed.
    pub fn true_rank(&self) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.label == self.true_label)
            .map(|p| p + 1)
    }
}

impl<'de> Deserialize<'de> for PredictionRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            probe_id: String,
            true_label: String,
            candidates: Vec<Candidate>,
        }
        let raw = Raw::deserialize(d)?;
        Self::new(raw.probe_id, raw.true_label, raw.candidates).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: AttributeSchema,
    subjects: BTreeMap<String, SubjectAttributes>,
    records: Vec<PredictionRecord>,
    gallery: BTreeSet<String>,
    /// Attribute value indices of each record's true subject, schema order.
    codes: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds and validates a dataset.
    ///
    /// With `gallery == None` the gallery is every subject plus every label
    /// appearing in the records. An explicit gallery must contain all of them.
    pub fn new(
        schema: AttributeSchema,
        subjects: Vec<SubjectAttributes>,
        records: Vec<PredictionRecord>,
        gallery: Option<BTreeSet<String>>,
    ) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        let mut subject_codes = BTreeMap::new();
        for s in subjects {
            let codes = s.codes(&schema)?;
            if by_id.contains_key(&s.subject_id) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate subject `{}`",
                    s.subject_id
                )));
            }
            subject_codes.insert(s.subject_id.clone(), codes);
            by_id.insert(s.subject_id.clone(), s);
        }

        let gallery = match gallery {
            Some(g) => g,
            None => {
                let mut g: BTreeSet<String> = by_id.keys().cloned().collect();
                for r in &records {
                    g.insert(r.true_label.clone());
                    g.extend(r.candidates.iter().map(|c| c.label.clone()));
                }
                g
            }
        };
        if gallery.len() < 2 {
            return Err(Error::InvalidDataset(
                "gallery must hold at least two identities".into(),
            ));
        }

        let mut codes = Vec::with_capacity(records.len());
        for r in &records {
            let c = subject_codes.get(&r.true_label).ok_or_else(|| {
                Error::InvalidDataset(format!(
                    "probe `{}` has true label `{}` without subject attributes",
                    r.probe_id, r.true_label
                ))
            })?;
            if !gallery.contains(&r.true_label) {
                return Err(Error::InvalidDataset(format!(
                    "true label `{}` is not in the gallery",
                    r.true_label
                )));
            }
            if let Some(c) = r.candidates.iter().find(|c| !gallery.contains(&c.label)) {
                return Err(Error::InvalidDataset(format!(
                    "candidate `{}` of probe `{}` is not in the gallery",
                    c.label, r.probe_id
                )));
            }
            codes.push(c.clone());
        }

        Ok(Self {
            schema,
            subjects: by_id,
            records,
            gallery,
            codes,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn subjects(&self) -> impl Iterator<Item = &SubjectAttributes> {
        self.subjects.values()
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectAttributes> {
        self.subjects.get(id)
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn gallery(&self) -> &BTreeSet<String> {
        &self.gallery
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn record_codes(&self, record: usize) -> &[usize] {
        &self.codes[record]
    }

    fn with_records(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.records.len()).filter(|&i| keep(i)).collect();
        Self {
            schema: self.schema.clone(),
            subjects: self.subjects.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            gallery: self.gallery.clone(),
            codes: idx.iter().map(|&i| self.codes[i].clone()).collect(),
        }
    }

    /// Number of records whose subject holds each value of `attr`.
    pub(crate) fn value_counts(&self, attr: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.schema.attributes()[attr].domain.len()];
        for c in &self.codes {
            counts[c[attr]] += 1;
        }
        counts
    }

    /// Predictions in the long CSV format, canonical row order.
    pub fn to_predictions_csv(&self) -> String {
        parse::write_predictions(&self.records)
    }

    /// Subject attributes CSV, subjects sorted by id.
    pub fn to_attributes_csv(&self) -> String {
        parse::write_attributes(&self.schema, self.subjects.values())
    }
}

/// Records whose true subject has `attribute == value`. Schema, subjects and
/// gallery are carried over unchanged.
pub fn attribute_slice(dataset: &Dataset, attribute: &str, value: &str) -> Result<Dataset> {
    let (a, v) = dataset.schema.resolve(attribute, value)?;
    Ok(dataset.with_records(|i| dataset.codes[i][a] == v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let schema = AttributeSchema::new(vec![AttributeDef {
            name: "gender".into(),
            domain: vec!["Male".into(), "Female".into()],
        }])
        .unwrap();
        let subjects = vec![
            SubjectAttributes::new("a", [("gender", "Male")]),
            SubjectAttributes::new("b", [("gender", "Female")]),
        ];
        let records = vec![
            PredictionRecord::new(
                "p1",
                "a",
                vec![Candidate::new("a", 2.0), Candidate::new("b", 1.0)],
            )
            .unwrap(),
            PredictionRecord::new("p2", "b", vec![Candidate::new("a", 3.0)]).unwrap(),
        ];
        Dataset::new(schema, subjects, records, None).unwrap()
    }

    #[test]
    fn ties_break_by_label() {
        let r = PredictionRecord::new(
            "p",
            "x",
            vec![
                Candidate::new("z", 1.0),
                Candidate::new("b", 1.0),
                Candidate::new("x", 2.0),
            ],
        )
        .unwrap();
        let labels: Vec<&str> = r.candidates().iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["x", "b", "z"]);
        assert_eq!(r.true_rank(), Some(1));
    }

    #[test]
    fn record_rejects_bad_candidates() {
        assert!(PredictionRecord::new("p", "x", vec![]).is_err());
        assert!(PredictionRecord::new("p", "x", vec![Candidate::new("x", f64::NAN)]).is_err());
        assert!(PredictionRecord::new(
            "p",
            "x",
            vec![Candidate::new("x", 1.0), Candidate::new("x", 1.0)]
        )
        .is_err());
    }

    #[test]
    fn slice_partitions_records() {
        let d = tiny();
        let m = attribute_slice(&d, "gender", "Male").unwrap();
        let f = attribute_slice(&d, "gender", "Female").unwrap();
        assert_eq!(m.len() + f.len(), d.len());
        assert_eq!(m.records()[0].probe_id(), "p1");
        assert_eq!(f.records()[0].probe_id(), "p2");
        assert_eq!(m.gallery(), d.gallery());
        assert!(attribute_slice(&d, "gender", "Unknown").is_err());
        assert!(attribute_slice(&d, "height", "Male").is_err());
    }

    #[test]
    fn slice_of_empty_is_empty() {
        let d = tiny().with_records(|_| false);
        assert!(attribute_slice(&d, "gender", "Male").unwrap().is_empty());
    }

    #[test]
    fn explicit_gallery_must_cover_candidates() {
        let d = tiny();
        let gallery: BTreeSet<String> = ["a".to_string(), "c".to_string()].into();
        let err = Dataset::new(
            d.schema().clone(),
            d.subjects().cloned().collect(),
            d.records().to_vec(),
            Some(gallery),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not in the gallery"));
    }

    #[test]
    fn true_label_needs_attributes() {
        let d = tiny();
        let rec = PredictionRecord::new("p3", "ghost", vec![Candidate::new("a", 1.0)]).unwrap();
        let err = Dataset::new(
            d.schema().clone(),
            d.subjects().cloned().collect(),
            vec![rec],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }
}
