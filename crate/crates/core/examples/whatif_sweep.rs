//! Risk across a grid of thresholds and impact profiles.

use biaslens::fixtures::{self, fixture_policy};
use biaslens::report::{render_sweep, Format};
use biaslens::risk::{parse_impact_grid, parse_theta_grid, whatif_sweep};

fn main() -> biaslens::Result<()> {
    let d = fixtures::checkpoint();
    let base = fixture_policy();
    let thetas = parse_theta_grid("0.1,0.25,0.5,0.9")?;
    let profiles = parse_impact_grid("1:1,10:1,1:10")?;
    let points = whatif_sweep(&d, &base, &profiles, &thetas)?;
    print!(
        "{}",
        render_sweep(&base, &profiles, &thetas, &points, Format::Table)
    );
    Ok(())
}
