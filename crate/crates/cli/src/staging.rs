//! Output directories that appear only when a run finishes.

use std::fs;
use std::path::{Path, PathBuf};

use halfline::{Error, Result};

/// Marker written into every output directory; an existing directory is
/// only replaced if it carries it.
pub const MARKER: &str = "run.json";

pub struct StagedDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedDir {
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() {
            let ours = target.join(MARKER).is_file();
            let empty = target.is_dir() && fs::read_dir(target)?.next().is_none();
            if !ours && !empty {
                return Err(Error::Config(format!("{} exists and is not a halfline output directory", target.display())));
            }
        }
        let name = target.file_name().ok_or_else(|| Error::Config(format!("bad output path {}", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let staging = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(Self { staging, target: target.to_path_buf(), committed: false })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.staging.join(name)
    }

    /// Moves the staged files into place, replacing a previous run.
    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_stage_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        {
            let s = StagedDir::new(&target).unwrap();
            fs::write(s.path("a.csv"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_replaces_previous_run_only() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let s = StagedDir::new(&target).unwrap();
        fs::write(s.path(MARKER), "{}").unwrap();
        s.commit().unwrap();
        let s = StagedDir::new(&target).unwrap();
        fs::write(s.path(MARKER), "{\"second\": true}").unwrap();
        s.commit().unwrap();
        assert!(fs::read_to_string(target.join(MARKER)).unwrap().contains("second"));
        let foreign = dir.path().join("foreign");
        fs::create_dir(&foreign).unwrap();
        fs::write(foreign.join("notes.txt"), "keep").unwrap();
        assert!(StagedDir::new(&foreign).is_err());
    }
}
