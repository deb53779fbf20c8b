//! File helpers that tag failures for exit-status classification.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crate::failure::IoFailure;

pub fn ensure_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(anyhow::Error::new(IoFailure::missing(path)))
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    ensure_exists(path)?;
    let f = File::open(path).with_context(|| IoFailure::read(path))?;
    Ok(BufReader::new(f))
}

/// Write a file through `fill`, creating parent directories.
pub fn write_with(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| IoFailure::write(dir))?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| IoFailure::write(path))?);
    fill(&mut w)?;
    w.flush().with_context(|| IoFailure::write(path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| {
        w.write_all(text.as_bytes())
            .with_context(|| IoFailure::write(path))
    })
}
