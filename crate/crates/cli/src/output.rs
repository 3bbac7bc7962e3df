//! Run directory: atomic file writes and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

pub struct RunDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Write `name` through a temporary file in the same directory and rename it into place.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> anyhow::Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(contents)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
        self.files.push((name.to_string(), sha256_hex(contents)));
        Ok(())
    }

    /// Record the run and every file written so far.
    pub fn finish(mut self, command: &str, config_bytes: &[u8], seed: u64, status: i32) -> anyhow::Result<()> {
        let mut m = String::from("# kamlind manifest\n");
        m.push_str(&format!("command: {command}\n"));
        m.push_str(&format!("config_sha256: {}\n", sha256_hex(config_bytes)));
        m.push_str(&format!("seed: {seed}\n"));
        m.push_str(&format!("status: {status}\n"));
        m.push_str(&format!("kamlind: {}\n", kamlind::VERSION));
        m.push_str(&format!("kamlind-cli: {}\n", env!("CARGO_PKG_VERSION")));
        m.push_str("# file sha256\n");
        for (name, hash) in &self.files {
            m.push_str(&format!("{name} {hash}\n"));
        }
        let files = std::mem::take(&mut self.files);
        self.write(MANIFEST, m.as_bytes())?;
        self.files = files;
        Ok(())
    }
}
