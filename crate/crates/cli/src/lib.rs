//! Command-line workflows for the two-relay feedback network: spec
//! validation, region evaluation, input optimization, scheme simulation and
//! parameter sweeps. The binary in `main.rs` only parses flags and maps
//! errors to exit codes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub mod error;
pub mod optimize;
pub mod region;
pub mod simulate;
pub mod spec;
pub mod sweep;

pub use error::{exit, CliError, Result};
pub use spec::NetworkSpec;

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// `cfrelay validate`: load a network spec and summarize it.
pub fn validate(path: &Path) -> Result<String> {
    let spec = NetworkSpec::load(path)?;
    let mut s = String::new();
    let _ = writeln!(s, "ok: {}", spec.display_name());
    let sizes: Vec<String> = cfrelay_core::Var::ALL
        .iter()
        .map(|v| format!("{}={}", v.label(), spec.alphabets.size(*v)))
        .collect();
    let _ = writeln!(s, "alphabets: {}", sizes.join(" "));
    let _ = writeln!(s, "dist: {}", if spec.dist.is_some() { "present" } else { "absent" });
    Ok(s)
}
