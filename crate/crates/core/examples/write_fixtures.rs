//! Regenerates the fixture files.
//!
//! ```text
//! cargo run -p biaslens --example write_fixtures -- [DIR]
//! ```

use std::path::PathBuf;

fn main() -> biaslens::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    biaslens::fixtures::write_all(&dir)?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
