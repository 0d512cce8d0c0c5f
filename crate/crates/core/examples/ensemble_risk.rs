//! Ensemble risk for one subject from its attribute profile.

use biaslens::dataset::SubjectAttributes;
use biaslens::fixtures;
use biaslens::risk::{risk_report_from_metrics, ImpactProfile};

fn main() -> biaslens::Result<()> {
    let subject = SubjectAttributes::new(
        "15",
        [
            ("yob_decade", "1970s"),
            ("gender", "Male"),
            ("ethnicity", "Asian"),
            ("glasses", "False"),
            ("beard", "False"),
            ("mustache", "False"),
        ],
    );
    let report = risk_report_from_metrics(
        &fixtures::table1_rates(),
        [&subject],
        &ImpactProfile::default(),
    )?;
    for attribute in [
        "yob_decade",
        "gender",
        "ethnicity",
        "glasses",
        "beard",
        "mustache",
    ] {
        let value = subject.value(attribute).unwrap_or("-");
        if let Some(e) = report.entry(attribute, value) {
            println!("{attribute:<11} {value:<8} {:.4}", e.risk);
        }
    }
    println!("ensemble               {:.4}", report.ensemble["15"]);
    Ok(())
}
