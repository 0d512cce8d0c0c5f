//! Risk of bias from published rates, with equal and with skewed impacts.

use biaslens::fixtures;
use biaslens::report::{render_risk, Format};
use biaslens::risk::{risk_of_bias, risk_report_from_metrics, ImpactProfile};

fn main() -> biaslens::Result<()> {
    let rates = fixtures::table1_rates();
    let none: [&biaslens::dataset::SubjectAttributes; 0] = [];
    for profile in [ImpactProfile::default(), ImpactProfile::CHECKPOINT] {
        let report = risk_report_from_metrics(&rates, none, &profile)?;
        print!("{}", render_risk(&report, Format::Table));
        println!();
    }
    // a single pair of rates
    let r = risk_of_bias(0.0941, 0.0001, &ImpactProfile::default())?;
    println!("baseline by hand {r:.4}");
    Ok(())
}
