//! Output directory bookkeeping and the run manifest.
//!
//! Every file is written atomically. The manifest lists the resolved
//! parameters, the SHA-256 of their canonical form, the SHA-256 of every
//! input and output, and the wall-clock bounds of the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use vortexlab::io::write_atomic;

use crate::config::Params;
use crate::CliError;

pub const MANIFEST_FORMAT: &str = "vortexlab-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects the outputs of one run under its directory.
pub struct Run {
    dir: PathBuf,
    started: u64,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Run {
    pub fn start(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Run { dir, started: unix_now(), inputs: Vec::new(), outputs: Vec::new() })
    }

    /// Reads an input file and records its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.inputs.push((path.display().to_string(), sha256_hex(&bytes)));
        Ok(bytes)
    }

    /// Writes `name` inside the run directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Writes the manifest; the last file of every run.
    pub fn finish(self, params: &Params) -> Result<(), CliError> {
        let canonical = params.canonical();
        let mut s = String::new();
        let _ = writeln!(s, "format = {MANIFEST_FORMAT}");
        let _ = writeln!(s, "version = {MANIFEST_VERSION}");
        let _ = writeln!(s, "program_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", params.command.name);
        let _ = writeln!(s, "config_sha256 = {}", sha256_hex(canonical.as_bytes()));
        for line in canonical.lines().skip(1) {
            let _ = writeln!(s, "param.{line}");
        }
        for (path, hash) in &self.inputs {
            let _ = writeln!(s, "input = {hash} {path}");
        }
        let _ = writeln!(s, "started_unix = {}", self.started);
        let _ = writeln!(s, "finished_unix = {}", unix_now());
        for (name, hash) in &self.outputs {
            let _ = writeln!(s, "output = {hash} {name}");
        }
        let path = self.dir.join(MANIFEST_NAME);
        write_atomic(&path, s.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

/// Outcome of re-hashing the files a manifest lists.
pub struct ManifestCheck {
    pub lines: Vec<String>,
    pub ok: bool,
}

/// Re-hashes every output (relative to the manifest's directory) and every
/// input that still exists; recomputes the config hash from the params.
pub fn check_manifest(text: &str, dir: &Path) -> Result<ManifestCheck, CliError> {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut canonical = String::new();
    let mut config_hash = None;
    let mut version_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let bad = || CliError::Validation(format!("manifest line {}: `{raw}`", i + 1));
        let (k, v) = raw.split_once(" = ").ok_or_else(bad)?;
        match k {
            "format" if v == MANIFEST_FORMAT => {}
            "version" => {
                if v != MANIFEST_VERSION.to_string() {
                    return Err(CliError::Validation(format!("manifest version {v} is not supported")));
                }
                version_seen = true;
            }
            "command" => canonical.push_str(&format!("command = {v}\n")),
            "config_sha256" => config_hash = Some(v.to_string()),
            "input" | "output" => {
                let (hash, path) = v.split_once(' ').ok_or_else(bad)?;
                let full = if k == "output" { dir.join(path) } else { PathBuf::from(path) };
                match fs::read(&full) {
                    Ok(bytes) if sha256_hex(&bytes) == hash => lines.push(format!("{k} {path}: ok")),
                    Ok(_) => {
                        ok = false;
                        lines.push(format!("{k} {path}: HASH MISMATCH"));
                    }
                    Err(_) if k == "input" => lines.push(format!("{k} {path}: absent, not checked")),
                    Err(e) => {
                        ok = false;
                        lines.push(format!("{k} {path}: unreadable ({e})"));
                    }
                }
            }
            _ if k.starts_with("param.") => canonical.push_str(&format!("{} = {v}\n", &k[6..])),
            "program_version" | "started_unix" | "finished_unix" => {}
            _ => return Err(bad()),
        }
    }
    if !version_seen || !text.starts_with(&format!("format = {MANIFEST_FORMAT}\n")) {
        return Err(CliError::Validation("not a vortexlab manifest".into()));
    }
    let recomputed = sha256_hex(canonical.as_bytes());
    if config_hash.as_deref() == Some(recomputed.as_str()) {
        lines.push("config_sha256: ok".into());
    } else {
        ok = false;
        lines.push("config_sha256: MISMATCH with the listed parameters".into());
    }
    Ok(ManifestCheck { lines, ok })
}
