use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

use crate::error::{Classify, CmdResult};
use crate::family::FamilyArgs;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn cmd_gen(family: &FamilyArgs, out: Option<&Path>) -> CmdResult {
    let inst = family.generate().usage()?;
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}-seed{}.json", family.name(), family.seed())));
    let text = inst.to_json();
    std::fs::write(&path, &text)
        .with_context(|| format!("writing {}", path.display()))
        .usage()?;
    log::info!("wrote {} instance to {}", inst.family(), path.display());
    println!("sha256:{}  {}", sha256_hex(text.as_bytes()), path.display());
    Ok(())
}
