//! Attribute prior tables estimated from records.

use biaslens::beliefnet::estimate_prior;
use biaslens::fixtures;

fn main() -> biaslens::Result<()> {
    let d = fixtures::priors();
    for attribute in ["gender", "glasses"] {
        for alpha in [0.0, 1.0] {
            let p = estimate_prior(&d, attribute, alpha)?;
            let cells: Vec<String> = p.iter().map(|(s, x)| format!("{s}={x:.4}")).collect();
            println!("{attribute} alpha {alpha}: {}", cells.join(" "));
        }
    }
    Ok(())
}
