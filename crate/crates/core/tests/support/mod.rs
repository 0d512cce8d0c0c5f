//! Seeded generators for randomized tests.
#![allow(dead_code)]

use biaslens::beliefnet::{BeliefNetwork, Cpt, Evidence, Node, JOINT_CELL_CAP};
use biaslens::dataset::{
    AttributeDef, AttributeSchema, Candidate, Dataset, PredictionRecord, SubjectAttributes,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_row<R: Rng>(rng: &mut R, width: usize, allow_zero: bool) -> Vec<f64> {
    let mut row: Vec<f64> = (0..width)
        .map(|_| {
            if allow_zero && rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    if row.iter().all(|&x| x == 0.0) {
        row[0] = 1.0;
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= total);
    row
}

/// Random DAG with 1..=`max_nodes` nodes of 2..=`max_states` states, at most
/// three parents each, joint size within the enumeration cap.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize, max_states: usize) -> BeliefNetwork {
    let n = rng.gen_range(1..=max_nodes);
    let mut cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_states)).collect();
    while cards.iter().map(|&c| c as u128).product::<u128>() > JOINT_CELL_CAP {
        let i = rng.gen_range(0..n);
        cards[i] = (cards[i] - 1).max(2);
    }
    // shuffled names so index order differs from topological order
    let mut names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    names.shuffle(rng);
    let allow_zero = rng.gen_bool(0.3);

    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            name: names[i].clone(),
            domain: (0..cards[i]).map(|s| format!("s{s}")).collect(),
        })
        .collect();
    let mut cpts = Vec::with_capacity(n);
    for i in 0..n {
        let mut earlier: Vec<usize> = (0..i).collect();
        earlier.shuffle(rng);
        let k = rng.gen_range(0..=earlier.len().min(3));
        let parents = &earlier[..k];
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        cpts.push(Cpt {
            child: names[i].clone(),
            parents: parents.iter().map(|&p| names[p].clone()).collect(),
            rows: (0..rows)
                .map(|_| random_row(rng, cards[i], allow_zero))
                .collect(),
        });
    }
    cpts.reverse();
    BeliefNetwork::new(nodes, cpts).expect("generated network is valid")
}

/// A query node and evidence on a random subset of the other nodes.
pub fn random_query<R: Rng>(rng: &mut R, net: &BeliefNetwork) -> (String, Evidence) {
    let nodes = net.nodes();
    let q = rng.gen_range(0..nodes.len());
    let mut evidence = Evidence::new();
    for (i, node) in nodes.iter().enumerate() {
        if i != q && rng.gen_bool(0.4) {
            let s = rng.gen_range(0..node.domain.len());
            evidence = evidence.with(node.name.clone(), node.domain[s].clone());
        }
    }
    (nodes[q].name.clone(), evidence)
}

/// Free-form dataset: random schema, subjects, and candidate lists.
pub fn random_dataset<R: Rng>(rng: &mut R) -> Dataset {
    let n_attrs = rng.gen_range(1..=3);
    let schema = AttributeSchema::new(
        (0..n_attrs)
            .map(|a| AttributeDef {
                name: format!("a{a}"),
                domain: (0..rng.gen_range(2..=3)).map(|v| format!("v{v}")).collect(),
            })
            .collect(),
    )
    .unwrap();
    let n_subjects = rng.gen_range(2..=8);
    let subjects: Vec<SubjectAttributes> = (0..n_subjects)
        .map(|s| {
            let values: Vec<(String, String)> = schema
                .attributes()
                .iter()
                .map(|a| {
                    (
                        a.name.clone(),
                        a.domain[rng.gen_range(0..a.domain.len())].clone(),
                    )
                })
                .collect();
            SubjectAttributes::new(format!("id{s}"), values)
        })
        .collect();
    let n_records = rng.gen_range(1..=12);
    let records = (0..n_records)
        .map(|r| {
            let truth = rng.gen_range(0..n_subjects);
            random_record(rng, format!("p{r}"), truth, n_subjects)
        })
        .collect();
    Dataset::new(schema, subjects, records, None).unwrap()
}

fn random_record<R: Rng>(
    rng: &mut R,
    probe: String,
    truth: usize,
    n_subjects: usize,
) -> PredictionRecord {
    let mut ids: Vec<usize> = (0..n_subjects).collect();
    ids.shuffle(rng);
    let k = rng.gen_range(1..=n_subjects);
    let candidates = ids[..k]
        .iter()
        .map(|&i| {
            // coarse grid so ties occur
            let score = f64::from(rng.gen_range(-8i32..=24)) * 0.5;
            Candidate::new(format!("id{i}"), score)
        })
        .collect();
    PredictionRecord::new(probe, format!("id{truth}"), candidates).unwrap()
}

/// Dataset whose attribute combinations factorize: each attribute value gets
/// a weight `w` in 1..=3 and each combination appears as many times as the
/// product of its weights.
pub fn factorized_dataset<R: Rng>(rng: &mut R) -> Dataset {
    let n_attrs = rng.gen_range(2..=3);
    let defs: Vec<AttributeDef> = (0..n_attrs)
        .map(|a| AttributeDef {
            name: format!("a{a}"),
            domain: (0..rng.gen_range(2..=3)).map(|v| format!("v{v}")).collect(),
        })
        .collect();
    let weights: Vec<Vec<usize>> = defs
        .iter()
        .map(|d| d.domain.iter().map(|_| rng.gen_range(1..=3)).collect())
        .collect();
    let schema = AttributeSchema::new(defs).unwrap();

    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for w in &weights {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..w.len()).map(move |v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    // one subject per combination, plus a few gallery-only identities
    let n_subjects = combos.len() + rng.gen_range(0..=3);
    let subjects: Vec<SubjectAttributes> = (0..n_subjects)
        .map(|s| {
            let combo = combos.get(s).cloned().unwrap_or_else(|| vec![0; n_attrs]);
            SubjectAttributes::new(
                format!("id{s}"),
                schema
                    .attributes()
                    .iter()
                    .zip(&combo)
                    .map(|(a, &v)| (a.name.clone(), a.domain[v].clone())),
            )
        })
        .collect();
    let mut records = Vec::new();
    for (s, combo) in combos.iter().enumerate() {
        let copies: usize = combo.iter().zip(&weights).map(|(&v, w)| w[v]).product();
        for _ in 0..copies {
            let probe = format!("p{}", records.len());
            records.push(random_record(rng, probe, s, n_subjects));
        }
    }
    Dataset::new(schema, subjects, records, None).unwrap()
}
