//! Reference datasets with known answers.
//!
//! * `table2`: eleven probes with their top three candidates.
//! * `table1_rates`: per-group counts realizing the published FNMR/FMR of every
//!   group (10000 genuine and 10000 imposter trials per row).
//! * `checkpoint`: a synthetic session whose baseline and gender rates round to
//!   the published ones under [`fixture_policy`].
//! * `priors`: a synthetic session whose gender and glasses frequencies round to
//!   the published prior tables, with gender rates matching as well.
//!
//! The synthetic sessions are generated deterministically; the CSVs under
//! `fixtures/` are their serialized form.

use std::fs;
use std::path::Path;

use crate::dataset::{
    parse_dataset, AttributeSchema, Candidate, Dataset, PredictionRecord, SubjectAttributes,
    ETHNICITIES, YOB_DECADES,
};
use crate::error::Result;
use crate::metrics::{DecisionPolicy, MetricsReport};
use crate::report::read_metrics_csv;

pub const TABLE1_RATES_CSV: &str = include_str!("../fixtures/table1_rates.csv");
pub const TABLE2_PREDICTIONS_CSV: &str = include_str!("../fixtures/table2_predictions.csv");
pub const TABLE2_ATTRIBUTES_CSV: &str = include_str!("../fixtures/table2_attributes.csv");

/// Score threshold used by the synthetic sessions.
pub const FIXTURE_THETA: f64 = 0.25;

/// Gallery size of both synthetic sessions.
pub const FIXTURE_GALLERY: usize = 1199;

pub fn fixture_policy() -> DecisionPolicy {
    DecisionPolicy::score(FIXTURE_THETA).expect("valid theta")
}

pub fn table1_rates() -> MetricsReport {
    read_metrics_csv(TABLE1_RATES_CSV.as_bytes()).expect("embedded fixture parses")
}

pub fn table2() -> Dataset {
    parse_dataset(
        TABLE2_PREDICTIONS_CSV.as_bytes(),
        TABLE2_ATTRIBUTES_CSV.as_bytes(),
        &AttributeSchema::default_schema(),
    )
    .expect("embedded fixture parses")
}

/// Candidate scores for one record, true label included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pattern {
    /// Rank-1 genuine with high probability, no imposter above the threshold.
    Hit,
    /// Missed genuine with `n` imposters at probability >= 0.25.
    Miss(usize),
}

impl Pattern {
    fn scores(self) -> (f64, Vec<f64>) {
        match self {
            Pattern::Hit => (12.0, vec![8.0, 7.5]),
            Pattern::Miss(0) => (6.0, vec![9.0; 5]),
            Pattern::Miss(1) => (6.0, vec![9.0, 6.5]),
            Pattern::Miss(2) => (6.0, vec![9.0, 8.9]),
            Pattern::Miss(3) => (6.0, vec![9.0, 8.9, 8.8]),
            Pattern::Miss(n) => unreachable!("no pattern with {n} false matches"),
        }
    }
}

fn subject_id(i: usize) -> String {
    format!("s{i:04}")
}

fn record(probe: String, subject: usize, pattern: Pattern) -> PredictionRecord {
    let (genuine, imposters) = pattern.scores();
    let mut candidates = vec![Candidate::new(subject_id(subject), genuine)];
    for (j, s) in imposters.into_iter().enumerate() {
        candidates.push(Candidate::new(
            subject_id((subject + 1 + j) % FIXTURE_GALLERY),
            s,
        ));
    }
    PredictionRecord::new(probe, subject_id(subject), candidates).expect("distinct fixture labels")
}

/// True for `hits` of the `n` positions `0..n`, spread evenly.
fn spread(j: usize, hits: usize, n: usize) -> bool {
    (j + 1) * hits / n > j * hits / n
}

fn attrs(id: usize, pairs: [(&str, &str); 6]) -> SubjectAttributes {
    SubjectAttributes::new(subject_id(id), pairs)
}

fn bool_label(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// Varied but deterministic values for the attributes a fixture does not pin.
fn filler(id: usize, gender: &str) -> SubjectAttributes {
    attrs(
        id,
        [
            ("yob_decade", YOB_DECADES[(id * 3 + 1) % 7]),
            ("gender", gender),
            ("ethnicity", ETHNICITIES[(id * 5 + 2) % 7]),
            ("glasses", bool_label(id.is_multiple_of(7))),
            ("beard", bool_label(id.is_multiple_of(11))),
            ("mustache", bool_label(id.is_multiple_of(9))),
        ],
    )
}

/// One record per subject: 430 female probes with 53 misses (153 false
/// matches), 654 male probes with 49 misses (40 false matches), and 115
/// gallery-only subjects.
pub fn checkpoint() -> Dataset {
    const FEMALE: usize = 430;
    const MALE: usize = 654;
    const FEMALE_MISSES: usize = 53;
    const MALE_MISSES: usize = 49;

    let mut subjects = Vec::with_capacity(FIXTURE_GALLERY);
    let mut records = Vec::with_capacity(FEMALE + MALE);
    let mut misses = [0usize; 2];
    for id in 0..FIXTURE_GALLERY {
        let female = id < FEMALE;
        subjects.push(filler(id, if female { "Female" } else { "Male" }));
        if id >= FEMALE + MALE {
            continue;
        }
        let (j, n, k, g) = if female {
            (id, FEMALE, FEMALE_MISSES, 0)
        } else {
            (id - FEMALE, MALE, MALE_MISSES, 1)
        };
        let pattern = if spread(j, k, n) {
            misses[g] += 1;
            match (female, misses[g]) {
                (true, m) if m <= 47 => Pattern::Miss(3),
                (true, _) => Pattern::Miss(2),
                (false, m) if m <= 40 => Pattern::Miss(1),
                (false, _) => Pattern::Miss(0),
            }
        } else {
            Pattern::Hit
        };
        records.push(record(format!("q{id:04}"), id, pattern));
    }
    Dataset::new(AttributeSchema::default_schema(), subjects, records, None)
        .expect("consistent fixture")
}

/// 16497 records over gender x glasses cells in which the two are independent:
/// 10530 male, 2350 with glasses, 850 of the 5967 female records with glasses.
/// Female: 736 misses, 2000 false matches. Male: 789 misses, one false match each.
pub fn priors() -> Dataset {
    // (gender, glasses, records, subjects)
    const CELLS: [(&str, bool, usize, usize); 4] = [
        ("Male", true, 1500, 107),
        ("Male", false, 9030, 645),
        ("Female", true, 850, 61),
        ("Female", false, 5117, 366),
    ];
    const FEMALE: usize = 5967;
    const MALE: usize = 10530;
    const FEMALE_MISSES: usize = 736;
    const MALE_MISSES: usize = 789;

    let mut subjects = Vec::with_capacity(FIXTURE_GALLERY);
    let mut records = Vec::with_capacity(FEMALE + MALE);
    let mut seen = [0usize; 2];
    let mut misses = [0usize; 2];
    let mut next_id = 0;
    for (gender, glasses, n_records, n_subjects) in CELLS {
        let first = next_id;
        for id in first..first + n_subjects {
            subjects.push(attrs(
                id,
                [
                    ("yob_decade", "1950s"),
                    ("gender", gender),
                    ("ethnicity", "White"),
                    ("glasses", bool_label(glasses)),
                    ("beard", "False"),
                    ("mustache", "False"),
                ],
            ));
        }
        next_id += n_subjects;
        let female = gender == "Female";
        let g = usize::from(!female);
        let (n, k) = if female {
            (FEMALE, FEMALE_MISSES)
        } else {
            (MALE, MALE_MISSES)
        };
        for r in 0..n_records {
            let j = seen[g];
            seen[g] += 1;
            let pattern = if spread(j, k, n) {
                misses[g] += 1;
                match (female, misses[g]) {
                    (true, m) if m <= 528 => Pattern::Miss(3),
                    (true, _) => Pattern::Miss(2),
                    (false, _) => Pattern::Miss(1),
                }
            } else {
                Pattern::Hit
            };
            records.push(record(
                format!("q{:05}", records.len()),
                first + r % n_subjects,
                pattern,
            ));
        }
    }
    for id in next_id..FIXTURE_GALLERY {
        subjects.push(filler(id, if id % 2 == 0 { "Female" } else { "Male" }));
    }
    Dataset::new(AttributeSchema::default_schema(), subjects, records, None)
        .expect("consistent fixture")
}

/// Writes every fixture and the default schema into `dir`.
pub fn write_all(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("schema.json"),
        AttributeSchema::default_schema().to_json(),
    )?;
    fs::write(dir.join("table1_rates.csv"), TABLE1_RATES_CSV)?;
    fs::write(dir.join("table2_predictions.csv"), TABLE2_PREDICTIONS_CSV)?;
    fs::write(dir.join("table2_attributes.csv"), TABLE2_ATTRIBUTES_CSV)?;
    for (name, data) in [("checkpoint", checkpoint()), ("priors", priors())] {
        fs::write(
            dir.join(format!("{name}_predictions.csv")),
            data.to_predictions_csv(),
        )?;
        fs::write(
            dir.join(format!("{name}_attributes.csv")),
            data.to_attributes_csv(),
        )?;
    }
    Ok(())
}
