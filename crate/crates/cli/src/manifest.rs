//! `manifest.txt`: every artifact in an output directory with its content
//! hash and the digest of the configuration that produced it.

use crate::config::hex;
use ghostim::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sha256: String,
    pub config: String,
    pub command: String,
}

/// Artifacts written by one command run.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    command: String,
    config: String,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config_digest: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            command: command.into(),
            config: config_digest.into(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file already written under the output directory.
    pub fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.into());
        }
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Merges this run's artifacts into the directory manifest.
    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join(MANIFEST);
        let mut entries = if path.exists() { read_manifest(&path)? } else { BTreeMap::new() };
        for name in &self.written {
            entries.insert(
                name.clone(),
                Entry {
                    sha256: file_sha256(&self.dir.join(name))?,
                    config: self.config.clone(),
                    command: self.command.clone(),
                },
            );
        }
        let mut text = String::from("# artifact sha256 config-digest command\n");
        for (name, e) in &entries {
            text.push_str(&format!("{name} {} {} {}\n", e.sha256, e.config, e.command));
        }
        fs::write(&path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, Entry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Format {
                path: path.into(),
                msg: format!("malformed manifest line `{line}`"),
            });
        }
        out.insert(
            f[0].to_string(),
            Entry {
                sha256: f[1].into(),
                config: f[2].into(),
                command: f[3].into(),
            },
        );
    }
    Ok(out)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let io = |e| Error::Io {
        path: path.into(),
        source: e,
    };
    let mut f = fs::File::open(path).map_err(io)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}
