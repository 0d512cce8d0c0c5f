//! Per-group FNMR and FMR under a score-threshold policy.

use biaslens::fixtures::{self, fixture_policy};
use biaslens::metrics::group_metrics;
use biaslens::report::{render_metrics, Format};

fn main() {
    let d = fixtures::checkpoint();
    print!(
        "{}",
        render_metrics(&group_metrics(&d, &fixture_policy()), Format::Table)
    );
}
