use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Exit};

/// Files go to a temporary sibling first and are renamed into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(Exit::Runtime, dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(Exit::Runtime, dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(Exit::Runtime, path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(Exit::Runtime, path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new(Exit::Runtime, "json", e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Collects written paths for the summary.
#[derive(Debug, Default)]
pub struct Outputs {
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn text(&mut self, path: PathBuf, contents: &str) -> Result<(), CliError> {
        write_atomic(&path, contents.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), CliError> {
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }
}

/// Keep a trial id usable as a directory name.
pub fn file_stem_for(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "trial".to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let leftovers = std::fs::read_dir(dir.path().join("sub")).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn ids_become_safe_names() {
        assert_eq!(file_stem_for("BDS00001"), "BDS00001");
        assert_eq!(file_stem_for("../x y"), ".._x_y");
        assert_eq!(file_stem_for(".."), "trial");
        assert_eq!(file_stem_for(""), "trial");
    }
}
