//! Output files and directories created by one command, removed again
//! unless the command commits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Default)]
pub struct Artifacts {
    created: Vec<PathBuf>,
    committed: bool,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates `dir` and any missing parents, remembering the new ones.
    pub fn dir(&mut self, dir: &Path) -> CliResult<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(p) = cur {
            if p.as_os_str().is_empty() || p.exists() {
                break;
            }
            missing.push(p.to_path_buf());
            cur = p.parent();
        }
        fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
        self.created.extend(missing.into_iter().rev());
        Ok(())
    }

    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            self.dir(parent)?;
        }
        let fresh = !path.exists();
        fs::write(path, contents).map_err(|e| CliError::file(path, e))?;
        if fresh {
            self.created.push(path.to_path_buf());
        }
        Ok(())
    }

    /// Lets `f` fill a directory that is removed as a whole on failure.
    pub fn fill_dir(&mut self, dir: &Path, f: impl FnOnce(&Path) -> cotag::Result<()>) -> CliResult<()> {
        self.dir(dir)?;
        f(dir).map_err(|e| match e {
            cotag::Error::Io(io) => CliError::file(dir, io),
            other => other.into(),
        })
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.created.iter().rev() {
            let _ = if p.is_dir() { fs::remove_dir_all(p) } else { fs::remove_file(p) };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removed_unless_committed() {
        let root = tempfile::tempdir().unwrap();
        let kept = root.path().join("kept.txt");
        fs::write(&kept, "old").unwrap();
        {
            let mut a = Artifacts::new();
            a.write(&root.path().join("a/b/c.txt"), "x").unwrap();
            a.write(&kept, "new").unwrap();
        }
        assert!(!root.path().join("a").exists());
        assert!(kept.exists());
        let mut a = Artifacts::new();
        a.write(&root.path().join("d/e.txt"), "x").unwrap();
        a.commit();
        assert!(root.path().join("d/e.txt").exists());
    }
}
