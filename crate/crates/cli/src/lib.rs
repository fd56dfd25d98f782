//! Configuration, artifact I/O and command dispatch for the `dissip` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod run;

use sha2::{Digest, Sha256};

/// SHA-256 of the canonical TOML rendering, so formatting and comments do not change it.
pub fn config_hash(cfg: &config::RunConfig) -> anyhow::Result<String> {
    let canonical = cfg.to_toml()?;
    Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
}
