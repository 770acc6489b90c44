//! Output files: common header and a single writer.

use std::path::{Path, PathBuf};

use abclab::report::comment_header;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::CliError;

/// `# schema_version`, `# config_sha256`, `# config` and any extra pairs.
pub fn header(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    header_for(&cfg.hash(), &cfg.echo(), extra)
}

pub fn header_for(hash: &str, echo: &str, extra: &[(&str, String)]) -> String {
    let mut pairs = vec![
        ("schema_version", SCHEMA_VERSION.to_string()),
        ("config_sha256", hash.to_string()),
        ("config", echo.to_string()),
    ];
    pairs.extend(extra.iter().cloned());
    comment_header(&pairs)
}

/// Reads `# key=value` header lines from the top of a text file.
pub fn header_value(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

/// Collects files and writes them in order once all computation is done.
pub struct Writer {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Writer {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn flush(self) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut out = Vec::new();
        for (name, body) in self.files {
            let p = self.dir.join(name);
            std::fs::write(&p, body).map_err(|e| CliError::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_carries_hash() {
        let cfg = ExperimentConfig::default();
        let h = header(&cfg, &[("file", "counts".into())]);
        assert_eq!(header_value(&h, "config_sha256"), Some(cfg.hash()));
        assert_eq!(header_value(&h, "file").as_deref(), Some("counts"));
        assert!(h.lines().all(|l| l.starts_with("# ")));
    }
}
