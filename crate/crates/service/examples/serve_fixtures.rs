//! Serves a fresh session store preloaded with the checkpoint fixture.
//!
//! ```text
//! cargo run -p biaslens-service --example serve_fixtures -- [ADDR]
//! curl "http://127.0.0.1:8080/sessions/<id>/risk?policy=score_threshold&theta=0.25"
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use biaslens_service::{serve, SessionStore, DEFAULT_MAX_UPLOAD};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".into());
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let root = std::env::temp_dir().join(format!("biaslens-example-{}", std::process::id()));
    let store = Arc::new(SessionStore::open(&root)?);
    let session = store.create(
        &std::fs::read(fixtures.join("checkpoint_predictions.csv"))?,
        &std::fs::read(fixtures.join("checkpoint_attributes.csv"))?,
        &std::fs::read(fixtures.join("schema.json"))?,
    )?;
    println!("session {} at http://{addr}", session.id());
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    serve(listener, store, DEFAULT_MAX_UPLOAD, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
