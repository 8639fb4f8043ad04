//! One JSON file per workspace in a directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use storyloom_core::workspace::{load_workspace, save_workspace};
use storyloom_core::Workspace;

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkspaceSummary {
    pub id: String,
    pub name: String,
    pub nodes: usize,
    pub events: usize,
}

impl From<&Workspace> for WorkspaceSummary {
    fn from(w: &Workspace) -> Self {
        WorkspaceSummary {
            id: w.id.clone(),
            name: w.name.clone(),
            nodes: w.graph.len(),
            events: w.events.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file and a rename so readers never see a
/// partial workspace.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_error(&tmp, e))?;
    f.sync_all().map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        if !valid_id(id) {
            return Err(ServiceError::WorkspaceNotFound(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).is_ok_and(|p| p.is_file())
    }

    pub fn load(&self, id: &str) -> Result<Workspace, ServiceError> {
        let path = self.path(id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ServiceError::WorkspaceNotFound(id.to_string()))
            }
            Err(e) => return Err(io_error(&path, e)),
        };
        Ok(load_workspace(&bytes)?)
    }

    pub fn save(&self, workspace: &Workspace) -> Result<(), ServiceError> {
        let path = self.path(&workspace.id)?;
        write_atomic(&path, &save_workspace(workspace))
    }

    pub fn delete(&self, id: &str) -> Result<(), ServiceError> {
        let path = self.path(id)?;
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::WorkspaceNotFound(id.to_string())),
            Err(e) => Err(io_error(&path, e)),
        }
    }

    /// Summaries of every readable workspace, sorted by id. Unreadable files
    /// are skipped with a warning.
    pub fn list(&self) -> Result<Vec<WorkspaceSummary>, ServiceError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| io_error(&self.dir, e))? {
            let path = entry.map_err(|e| io_error(&self.dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            match self.load(id) {
                Ok(w) => out.push(WorkspaceSummary::from(&w)),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}
