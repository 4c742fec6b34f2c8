//! File-list manifests: one WAV path per line, `#` starts a comment.
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use super::MixError;
use crate::signal::{read_wav, to_working_rate, TimeSignal};

pub fn parse_manifest(text: &str, base: &Path) -> Vec<PathBuf> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let p = Path::new(l);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        })
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>, MixError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MixError::Io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, base);
    if entries.is_empty() {
        return Err(MixError::Manifest(format!("{} lists no files", path.display())));
    }
    Ok(entries)
}

/// Reads every listed file and converts it to the working rate.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<TimeSignal>, MixError> {
    read_manifest(path)?
        .iter()
        .map(|p| Ok(to_working_rate(&read_wav(p)?)?))
        .collect()
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[PathBuf]) -> Result<(), MixError> {
    let path = path.as_ref();
    let mut text = String::from("# one WAV file per line\n");
    for e in entries {
        text.push_str(&e.display().to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| MixError::Io(path.display().to_string(), e))
}
