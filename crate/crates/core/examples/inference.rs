//! What-if queries against the belief network: posteriors and conditional rates.

use biaslens::beliefnet::{build_network, conditional_rates, infer, Evidence};
use biaslens::fixtures::{self, fixture_policy};

fn main() -> biaslens::Result<()> {
    let d = fixtures::priors();
    let net = build_network(&d, &fixture_policy(), 0.0, 0)?;

    let outcome = infer(&net, "Outcome", &Evidence::new().with("gender", "Female"))?;
    for (state, p) in outcome.iter() {
        println!("P(Outcome={state} | gender=Female) = {p:.6}");
    }
    for gender in ["Female", "Male"] {
        let r = conditional_rates(&net, &Evidence::new().with("gender", gender))?;
        println!(
            "{gender}: fnmr {:.4} fmr {:.4}",
            r.fnmr.unwrap_or(f64::NAN),
            r.fmr.unwrap_or(f64::NAN)
        );
    }
    // diagnostic direction: who is behind a false non-match
    let g = infer(&net, "gender", &Evidence::new().with("Outcome", "FN"))?;
    for (state, p) in g.iter() {
        println!("P(gender={state} | Outcome=FN) = {p:.4}");
    }

    let smoothed = build_network(&d, &fixture_policy(), 1.0, 5)?;
    // no record is from the 1920s, so its outcome row falls back to the global one
    let r = conditional_rates(&smoothed, &Evidence::new().with("yob_decade", "1920s"))?;
    println!("smoothed 1920s fnmr {:.4}", r.fnmr.unwrap_or(f64::NAN));
    Ok(())
}
