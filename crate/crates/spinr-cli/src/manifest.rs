//! Run manifests: the reproducibility record every command leaves behind.
//!
//! A manifest pins the tool version, the full effective configuration
//! (defaults resolved, nothing implicit), the seed, a SHA-256 digest of
//! every input file consumed, and the complete list of artifacts written.
//! The `replay` field is the literal argument vector that re-runs the
//! command; because all randomness is seeded and all file writes happen on
//! one thread in a fixed order, a replay reproduces every listed artifact
//! bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// `spinr <version>`; replays across versions are not guaranteed.
    pub tool: String,
    /// Subcommand name.
    pub command: String,
    /// The full effective configuration, defaults included.
    pub config: serde_json::Value,
    /// Base seed of the run this manifest describes.
    pub seed: u64,
    /// SHA-256 hex digest of every input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// Every artifact the run wrote, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// Argument vector that re-runs this exact configuration.
    pub replay: Vec<String>,
}

pub fn tool_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// SHA-256 of a file's contents, as lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    hex
}

/// Serialize a manifest as pretty JSON with a trailing newline.
pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(manifest).expect("manifest serialization is infallible");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}
