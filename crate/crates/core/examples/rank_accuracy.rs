//! Rank-k identification accuracy and attribute slicing on the eleven-probe sample.

use biaslens::dataset::attribute_slice;
use biaslens::fixtures;
use biaslens::metrics::rank_accuracy;

fn main() -> biaslens::Result<()> {
    let d = fixtures::table2();
    for k in 1..=3 {
        println!("rank-{k} accuracy {:.4}", rank_accuracy(&d, k)?);
    }
    let female = attribute_slice(&d, "gender", "Female")?;
    let probes: Vec<&str> = female.records().iter().map(|r| r.probe_id()).collect();
    println!("female probes: {}", probes.join(" "));
    println!("female rank-1 accuracy {:.4}", rank_accuracy(&female, 1)?);
    Ok(())
}
