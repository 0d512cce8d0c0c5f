use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use super::{rank_order, AttributeSchema, Candidate, Dataset, PredictionRecord, SubjectAttributes};
use crate::error::{Error, Result};

pub const PREDICTIONS_HEADER: [&str; 5] =
    ["probe_id", "true_label", "rank", "candidate_label", "score"];

/// Where the gallery comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GalleryMode {
    /// Every subject in the attributes file plus every label seen in the predictions.
    #[default]
    Open,
    /// Exactly the subjects of the attributes file; any other label is rejected.
    Closed,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub gallery: GalleryMode,
}

pub fn parse_dataset<P: Read, A: Read>(
    predictions: P,
    attributes: A,
    schema: &AttributeSchema,
) -> Result<Dataset> {
    parse_dataset_with(predictions, attributes, schema, ParseOptions::default())
}

pub fn parse_dataset_with<P: Read, A: Read>(
    predictions: P,
    attributes: A,
    schema: &AttributeSchema,
    options: ParseOptions,
) -> Result<Dataset> {
    let subjects = parse_attributes(attributes, schema)?;
    let known: BTreeSet<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    let rows = parse_prediction_rows(predictions)?;

    for probe in &rows {
        for row in &probe.rows {
            if options.gallery == GalleryMode::Closed && !known.contains(&row.candidate.label) {
                return Err(Error::NotInGallery {
                    line: row.line,
                    label: row.candidate.label.clone(),
                });
            }
        }
        if !known.contains(&probe.true_label) {
            return Err(Error::Malformed {
                source_name: "predictions".into(),
                line: probe.rows[0].line,
                message: format!(
                    "true label `{}` has no row in the attributes file",
                    probe.true_label
                ),
            });
        }
    }

    let mut records = Vec::with_capacity(rows.len());
    for probe in &rows {
        records.push(probe.to_record()?);
    }
    let gallery = match options.gallery {
        GalleryMode::Open => None,
        GalleryMode::Closed => Some(known),
    };
    Dataset::new(schema.clone(), subjects, records, gallery)
}

struct Row {
    line: u64,
    rank: usize,
    candidate: Candidate,
}

struct ProbeRows {
    probe_id: String,
    true_label: String,
    rows: Vec<Row>,
}

impl ProbeRows {
    fn to_record(&self) -> Result<PredictionRecord> {
        let mut sorted: Vec<&Row> = self.rows.iter().collect();
        sorted.sort_by(|a, b| rank_order(&a.candidate, &b.candidate));
        for (pos, row) in sorted.iter().enumerate() {
            if row.rank != pos + 1 {
                return Err(Error::Malformed {
                    source_name: "predictions".into(),
                    line: row.line,
                    message: format!(
                        "rank {} disagrees with score order for probe `{}` (expected {})",
                        row.rank,
                        self.probe_id,
                        pos + 1
                    ),
                });
            }
        }
        let candidates = sorted.iter().map(|r| r.candidate.clone()).collect();
        PredictionRecord::new(&self.probe_id, &self.true_label, candidates)
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source)
}

fn csv_error(source_name: &str, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Malformed {
        source_name: source_name.into(),
        line,
        message: err.to_string(),
    }
}

fn parse_prediction_rows<R: Read>(source: R) -> Result<Vec<ProbeRows>> {
    let mut rdr = reader(source);
    let header = rdr
        .headers()
        .map_err(|e| csv_error("predictions", e))?
        .clone();
    if header.iter().collect::<Vec<_>>() != PREDICTIONS_HEADER {
        return Err(Error::Malformed {
            source_name: "predictions".into(),
            line: 1,
            message: format!("expected header `{}`", PREDICTIONS_HEADER.join(",")),
        });
    }

    let mut probes: Vec<ProbeRows> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| csv_error("predictions", e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::Malformed {
            source_name: "predictions".into(),
            line,
            message,
        };
        if rec.len() != PREDICTIONS_HEADER.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                PREDICTIONS_HEADER.len(),
                rec.len()
            )));
        }
        let (probe_id, true_label, rank, label, score) =
            (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4]);
        if probe_id.is_empty() || true_label.is_empty() || label.is_empty() {
            return Err(malformed("empty identifier".into()));
        }
        let rank: usize = rank
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| malformed(format!("rank `{rank}` is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| malformed(format!("score `{score}` is not a finite number")))?;
        if !pairs.insert((probe_id.to_string(), label.to_string())) {
            return Err(Error::DuplicateCandidate {
                line,
                probe_id: probe_id.to_string(),
                candidate: label.to_string(),
            });
        }
        let slot = match index.get(probe_id) {
            Some(&i) => {
                if probes[i].true_label != true_label {
                    return Err(malformed(format!(
                        "probe `{probe_id}` has conflicting true labels `{}` and `{true_label}`",
                        probes[i].true_label
                    )));
                }
                i
            }
            None => {
                index.insert(probe_id.to_string(), probes.len());
                probes.push(ProbeRows {
                    probe_id: probe_id.to_string(),
                    true_label: true_label.to_string(),
                    rows: Vec::new(),
                });
                probes.len() - 1
            }
        };
        probes[slot].rows.push(Row {
            line,
            rank,
            candidate: Candidate::new(label, score),
        });
    }
    Ok(probes)
}

/// Subject attribute rows, validated against `schema`.
pub fn parse_attributes<R: Read>(
    source: R,
    schema: &AttributeSchema,
) -> Result<Vec<SubjectAttributes>> {
    let mut rdr = reader(source);
    let header = rdr
        .headers()
        .map_err(|e| csv_error("attributes", e))?
        .clone();
    let columns: Vec<&str> = header.iter().collect();
    let header_error = |message: String| Error::Malformed {
        source_name: "attributes".into(),
        line: 1,
        message,
    };
    if columns.first() != Some(&"subject_id") {
        return Err(header_error("first column must be `subject_id`".into()));
    }
    // column position -> attribute index
    let mut mapping = Vec::with_capacity(columns.len() - 1);
    for name in &columns[1..] {
        let a = schema
            .index_of(name)
            .ok_or_else(|| header_error(format!("column `{name}` is not a schema attribute")))?;
        if mapping.contains(&a) {
            return Err(header_error(format!("column `{name}` appears twice")));
        }
        mapping.push(a);
    }
    if let Some(missing) = schema
        .attributes()
        .iter()
        .enumerate()
        .find(|(i, _)| !mapping.contains(i))
    {
        return Err(header_error(format!("missing column `{}`", missing.1.name)));
    }

    let mut subjects = Vec::new();
    let mut seen = BTreeSet::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| csv_error("attributes", e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != columns.len() {
            return Err(Error::Malformed {
                source_name: "attributes".into(),
                line,
                message: format!("expected {} fields, found {}", columns.len(), rec.len()),
            });
        }
        let id = &rec[0];
        if id.is_empty() || !seen.insert(id.to_string()) {
            return Err(Error::Malformed {
                source_name: "attributes".into(),
                line,
                message: format!("subject id `{id}` is empty or repeated"),
            });
        }
        let mut values = Vec::with_capacity(mapping.len());
        for (col, &a) in mapping.iter().enumerate() {
            let attr = &schema.attributes()[a];
            let label = &rec[col + 1];
            if attr.index_of(label).is_none() {
                return Err(Error::UnknownLabel {
                    source_name: "attributes".into(),
                    line,
                    attribute: attr.name.clone(),
                    label: label.to_string(),
                });
            }
            values.push((attr.name.clone(), label.to_string()));
        }
        subjects.push(SubjectAttributes::new(id, values));
    }
    Ok(subjects)
}

pub(super) fn write_predictions(records: &[PredictionRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PREDICTIONS_HEADER).expect("in-memory write");
    for r in records {
        for (i, c) in r.candidates().iter().enumerate() {
            w.write_record([
                r.probe_id(),
                r.true_label(),
                &(i + 1).to_string(),
                &c.label,
                &c.score.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub(super) fn write_attributes<'a>(
    schema: &AttributeSchema,
    subjects: impl Iterator<Item = &'a SubjectAttributes>,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject_id"];
    header.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    w.write_record(&header).expect("in-memory write");
    for s in subjects {
        let mut row = vec![s.subject_id.as_str()];
        row.extend(
            schema
                .attributes()
                .iter()
                .map(|a| s.value(&a.name).unwrap_or_default()),
        );
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
