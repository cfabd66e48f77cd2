use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// The command line as typed, used as the first comment line of every CSV.
pub fn invocation() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("spm {}", args.join(" "))
}

/// Write `path` through a temporary sibling and rename it into place.
pub fn write_atomic<F>(path: &Path, comment: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        if !comment.is_empty() {
            writeln!(w, "# {comment}")?;
        }
        body(&mut w).with_context(|| format!("writing {}", tmp.display()))?;
        w.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
