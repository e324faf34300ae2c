//! TOML configuration. Relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::canonicalize::{AliasTable, Schema};
use crate::error::{Error, Result};
use crate::governance::DEFAULT_HOT_THRESHOLD;
use crate::index::dense::HnswParams;
use crate::index::IndexConfig;
use crate::retrieval::Weights;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DenseSection {
    pub enabled: bool,
    pub dim: usize,
}

impl Default for DenseSection {
    fn default() -> Self {
        DenseSection { enabled: true, dim: 64 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HnswSection {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
}

impl Default for HnswSection {
    fn default() -> Self {
        let p = HnswParams::default();
        HnswSection {
            m: p.m,
            ef_construction: p.ef_construction,
            ef_search: p.ef_search,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Section {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Section {
    fn default() -> Self {
        Bm25Section { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    /// Directory of static console assets, served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Writes allowed to wait for the writer before the API answers 503.
    pub max_pending_writes: usize,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
            max_pending_writes: 64,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Store file; `None` keeps everything in memory.
    pub storage: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub hot_threshold: u64,
    pub dense: DenseSection,
    pub hnsw: HnswSection,
    pub bm25: Bm25Section,
    pub weights: Weights,
    pub server: ServerSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            storage: None,
            schema: None,
            aliases: None,
            hot_threshold: DEFAULT_HOT_THRESHOLD,
            dense: DenseSection::default(),
            hnsw: HnswSection::default(),
            bm25: Bm25Section::default(),
            weights: Weights::default(),
            server: ServerSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        let mut c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.weights = Weights::new(c.weights.alpha, c.weights.beta, c.weights.gamma).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.storage, &mut c.schema, &mut c.aliases, &mut c.server.static_dir] {
            if let Some(rel) = p.as_mut() {
                if rel.is_relative() {
                    *rel = base.join(&*rel);
                }
            }
        }
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.dense.dim == 0 {
            return Err(Error::Config("dense.dim must be positive".into()));
        }
        if self.hnsw.m < 2 || self.hnsw.ef_construction == 0 || self.hnsw.ef_search == 0 {
            return Err(Error::Config("hnsw parameters must be positive (m >= 2)".into()));
        }
        if self.bm25.k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(Error::Config("bm25.k1 must be >= 0 and bm25.b in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            dense_enabled: self.dense.enabled,
            dim: self.dense.dim,
            hnsw: HnswParams {
                m: self.hnsw.m,
                ef_construction: self.hnsw.ef_construction,
                ef_search: self.hnsw.ef_search,
            },
            k1: self.bm25.k1,
            b: self.bm25.b,
        }
    }

    pub fn load_schema(&self) -> Result<Option<Schema>> {
        self.schema.as_deref().map(Schema::load).transpose()
    }

    pub fn load_aliases(&self) -> Result<AliasTable> {
        Ok(self.aliases.as_deref().map(AliasTable::load).transpose()?.unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        let c = Config::from_toml(
            r#"
            storage = "db/nuggets.db"
            hot_threshold = 3
            [dense]
            enabled = false
            [hnsw]
            ef_search = 128
            [weights]
            alpha = 4.0
            beta = 5.0
            gamma = 1.0
            "#,
        )
        .unwrap();
        assert!(!c.index_config().dense_enabled);
        assert_eq!(c.index_config().hnsw.ef_search, 128);
        assert_eq!(c.index_config().hnsw.m, 32);
        assert!((c.weights.alpha - 0.4).abs() < 1e-12);
        assert_eq!(c.hot_threshold, 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml("[bm25]\nb = 2.0").is_err());
        assert!(Config::from_toml("unknown_key = 1").is_err());
        assert!(Config::from_toml("[weights]\nalpha = 0\nbeta = 0\ngamma = 0").is_err());
    }

    #[test]
    fn relative_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "storage = \"s.db\"\nschema = \"/abs/schema.json\"").unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.storage.unwrap(), dir.path().join("s.db"));
        assert_eq!(c.schema.unwrap(), PathBuf::from("/abs/schema.json"));
    }
}
