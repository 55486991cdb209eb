//! Output-directory management with atomic writes: files land under a temp
//! name in the target directory and are renamed into place, so a crashed run
//! never leaves a partially written result.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)
            .with_context(|| format!("creating temp file in {}", self.root.display()))?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        tmp.persist(&target)
            .with_context(|| format!("persisting {}", target.display()))?;
        Ok(target)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Copy of the fully resolved configuration, for provenance.
    pub fn write_resolved_config(
        &self,
        config: &crate::config::ExperimentConfig,
        seed: Option<u64>,
    ) -> Result<()> {
        let mut text = toml::to_string_pretty(config)?;
        if let Some(s) = seed {
            text.push_str(&format!("\n# resolved seed\n# seed = {s}\n"));
        }
        self.write("resolved_config.toml", text.as_bytes())?;
        Ok(())
    }
}
