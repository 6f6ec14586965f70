//! Tracks files a command creates so a failed run can undo them.

use std::path::{Path, PathBuf};

/// Paths the current run has created. Only files that did not exist before
/// the run are registered, so a failure never deletes user data we merely
/// overwrote.
#[derive(Default)]
pub struct OutputTracker {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl OutputTracker {
    /// Call before writing `path`; registers it for cleanup when absent.
    pub fn will_write(&mut self, path: &Path) {
        if !path.exists() {
            self.files.push(path.to_path_buf());
        }
    }

    /// Creates `dir` (and parents), registering any directory that had to be
    /// created for removal on failure.
    pub fn create_dir(&mut self, dir: &Path) -> std::io::Result<()> {
        let mut missing = Vec::new();
        let mut probe = Some(dir);
        while let Some(p) = probe {
            if p.as_os_str().is_empty() || p.exists() {
                break;
            }
            missing.push(p.to_path_buf());
            probe = p.parent();
        }
        std::fs::create_dir_all(dir)?;
        // Deepest first so removal order below (reverse) is parents-last.
        missing.reverse();
        self.dirs.extend(missing);
        Ok(())
    }

    /// Removes everything this run created. Best effort; directories are
    /// only removed when empty.
    pub fn remove_created(&mut self) {
        for f in self.files.drain(..) {
            let _ = std::fs::remove_file(&f);
        }
        for d in self.dirs.drain(..).rev() {
            let _ = std::fs::remove_dir(&d);
        }
    }
}
