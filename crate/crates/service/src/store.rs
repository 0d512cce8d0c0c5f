//! On-disk session store: one directory per session holding the canonical
//! predictions CSV, attributes CSV, schema JSON and a manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use biaslens::beliefnet::{build_network, BeliefNetwork, NetworkParams};
use biaslens::dataset::{parse_dataset, AttributeSchema, Dataset};
use biaslens::{Error, Result};
use serde::{Deserialize, Serialize};

const PREDICTIONS: &str = "predictions.csv";
const ATTRIBUTES: &str = "attributes.csv";
const SCHEMA: &str = "schema.json";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub records: usize,
    pub subjects: usize,
    pub gallery: usize,
    pub predictions: String,
    pub attributes: String,
    pub schema: String,
}

type CacheKey = (biaslens::metrics::PolicyKind, u64, String, u64, u64);

pub struct Session {
    pub manifest: Manifest,
    pub dataset: Dataset,
    networks: Mutex<HashMap<CacheKey, Arc<BeliefNetwork>>>,
}

impl Session {
    fn new(manifest: Manifest, dataset: Dataset) -> Self {
        Self {
            manifest,
            dataset,
            networks: Mutex::new(HashMap::new()),
        }
    }

    pub fn id(&self) -> &str {
        &self.manifest.session_id
    }

    /// Cached network for `params`, built on a miss. Concurrent misses may both
    /// build; the results are identical and the last insert wins.
    pub fn network(&self, params: &NetworkParams) -> Result<Arc<BeliefNetwork>> {
        let key = params.cache_key();
        if let Some(net) = self.networks.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(net));
        }
        let net = Arc::new(build_network(
            &self.dataset,
            &params.policy,
            params.alpha,
            params.min_support,
        )?);
        self.networks
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&net));
        Ok(net)
    }

    pub fn cached_networks(&self) -> usize {
        self.networks.lock().expect("cache lock").len()
    }
}

pub struct SessionStore {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

fn load_dir(dir: &Path) -> Result<Session> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    let schema = AttributeSchema::from_json(&fs::read_to_string(dir.join(&manifest.schema))?)?;
    let dataset = parse_dataset(
        fs::File::open(dir.join(&manifest.predictions))?,
        fs::File::open(dir.join(&manifest.attributes))?,
        &schema,
    )?;
    Ok(Session::new(manifest, dataset))
}

impl SessionStore {
    /// Opens `root`, creating it if needed, and loads every stored session.
    /// Directories that fail to load are reported on stderr and skipped.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let path = entry?.path();
            if !path.join(MANIFEST).is_file() {
                continue;
            }
            match load_dir(&path) {
                Ok(s) => {
                    sessions.insert(s.id().to_string(), Arc::new(s));
                }
                Err(e) => eprintln!("skipping session {}: {e}", path.display()),
            }
        }
        Ok(Self {
            root,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("store lock")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Parses the uploads, persists their canonical form and registers the session.
    pub fn create(
        &self,
        predictions: &[u8],
        attributes: &[u8],
        schema: &[u8],
    ) -> Result<Arc<Session>> {
        let schema_text =
            std::str::from_utf8(schema).map_err(|_| Error::Schema("schema is not UTF-8".into()))?;
        let schema = AttributeSchema::from_json(schema_text)?;
        let dataset = parse_dataset(predictions, attributes, &schema)?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            session_id: id.clone(),
            created_at,
            records: dataset.len(),
            subjects: dataset.subjects().count(),
            gallery: dataset.gallery().len(),
            predictions: PREDICTIONS.into(),
            attributes: ATTRIBUTES.into(),
            schema: SCHEMA.into(),
        };

        // write into a scratch directory, then rename into place
        let tmp = self.root.join(format!(".tmp-{id}"));
        fs::create_dir_all(&tmp)?;
        let write = || -> Result<()> {
            fs::write(tmp.join(PREDICTIONS), dataset.to_predictions_csv())?;
            fs::write(tmp.join(ATTRIBUTES), dataset.to_attributes_csv())?;
            fs::write(tmp.join(SCHEMA), schema.to_json())?;
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            fs::write(tmp.join(MANIFEST), text)?;
            fs::rename(&tmp, self.root.join(&id))?;
            Ok(())
        };
        if let Err(e) = write() {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }

        let session = Arc::new(Session::new(manifest, dataset));
        self.sessions
            .write()
            .expect("store lock")
            .insert(id, Arc::clone(&session));
        Ok(session)
    }
}
