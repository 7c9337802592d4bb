use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::sha256_hex;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// A named file payload waiting to be written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact { name: name.into(), bytes }
    }

    pub fn json<T: Serialize + ?Sized>(name: impl Into<String>, value: &T) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact::new(name, bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-hashes every listed file under `root`.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for f in &self.files {
            let p = root.join(&f.path);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(Error::Checksum(p));
            }
        }
        Ok(())
    }
}

/// Output directory that records a checksum for every file it writes.
///
/// Dropping it without [`OutputDir::commit`] deletes the files written so far,
/// so a failed run leaves no partial outputs behind.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, ManifestEntry>,
    created: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        let mut created = Vec::new();
        let mut missing = Vec::new();
        let mut cur = Some(root);
        while let Some(c) = cur {
            if c.as_os_str().is_empty() || c.exists() {
                break;
            }
            missing.push(c.to_path_buf());
            cur = c.parent();
        }
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        created.extend(missing);
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
            created,
            committed: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if name == MANIFEST_FILE {
            return Err(Error::Config(format!("{MANIFEST_FILE} is reserved")));
        }
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(
            name.to_string(),
            ManifestEntry {
                path: name.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(path)
    }

    pub fn write_artifact(&mut self, a: &Artifact) -> Result<PathBuf> {
        self.write(&a.name, &a.bytes)
    }

    pub fn write_all(&mut self, artifacts: &[Artifact]) -> Result<()> {
        artifacts.iter().try_for_each(|a| self.write_artifact(a).map(|_| ()))
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_artifact(&Artifact::json(name, value)?)
    }

    /// Lets `f` write `name` through a path-based writer, then records it.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        f(&path)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.write(name, &bytes)
    }

    /// Writes the manifest and keeps the outputs.
    pub fn commit(mut self) -> Result<Manifest> {
        let manifest = Manifest {
            files: self.files.values().cloned().collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.path(MANIFEST_FILE);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for name in self.files.keys() {
            let _ = std::fs::remove_file(self.root.join(name));
        }
        // Directories this run created, deepest first; non-empty ones stay.
        for d in self.created.iter() {
            let _ = std::fs::remove_dir(d);
        }
    }
}
