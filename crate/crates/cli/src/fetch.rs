//! Download helper for the evaluation collection. Every file fetched is
//! recorded in a checksum manifest; later fetches must match it.

use std::path::{Path, PathBuf};

use clap::Args;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::report::write_file;

pub const MANIFEST: &str = "checksums.sha256";

/// Abstract-level relevance judgements for the test topics.
pub const DEFAULT_QRELS_URL: &str =
    "https://raw.githubusercontent.com/CLEF-TAR/tar/master/2017-TAR/testing/qrels/qrel_abs_test";

const MAX_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    /// URLs to download; the file name is the last path segment.
    #[arg(long = "url", num_args = 1.., default_values_t = [DEFAULT_QRELS_URL.to_owned()])]
    pub urls: Vec<String>,
    #[arg(long, default_value = "data")]
    pub out_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(url: &str) -> CliResult<String> {
    let name = url.trim_end_matches('/').rsplit('/').next().unwrap_or("");
    if name.is_empty() || name.contains(':') {
        return Err(CliError::Usage(format!("cannot derive a file name from {url}")));
    }
    Ok(name.to_owned())
}

/// Checks `digest` against the manifest entry for `name`, adding one if
/// absent. Returns the updated manifest text.
pub fn record_checksum(manifest: &str, name: &str, digest: &str) -> CliResult<String> {
    for line in manifest.lines() {
        let mut parts = line.split_whitespace();
        if let (Some(sum), Some(entry)) = (parts.next(), parts.next()) {
            if entry == name {
                if sum.eq_ignore_ascii_case(digest) {
                    return Ok(manifest.to_owned());
                }
                return Err(CliError::Fetch(format!(
                    "checksum mismatch for {name}: manifest has {sum}, download is {digest}"
                )));
            }
        }
    }
    let mut out = manifest.to_owned();
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&format!("{digest}  {name}\n"));
    Ok(out)
}

fn download(url: &str) -> CliResult<Vec<u8>> {
    let mut response = ureq::get(url)
        .call()
        .map_err(|e| CliError::Fetch(format!("{url}: {e}")))?;
    response
        .body_mut()
        .with_config()
        .limit(MAX_BYTES)
        .read_to_vec()
        .map_err(|e| CliError::Fetch(format!("{url}: {e}")))
}

fn read_manifest(dir: &Path) -> CliResult<String> {
    let path = dir.join(MANIFEST);
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
        Err(source) => Err(CliError::Read { path, source }),
    }
}

pub fn cmd_fetch(args: &FetchArgs) -> CliResult<Vec<PathBuf>> {
    let mut manifest = read_manifest(&args.out_dir)?;
    let mut written = Vec::new();
    for url in &args.urls {
        let name = file_name(url)?;
        let bytes = download(url)?;
        let digest = sha256_hex(&bytes);
        manifest = record_checksum(&manifest, &name, &digest)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Fetch(format!("{url}: not UTF-8 text")))?;
        written.push(write_file(&args.out_dir, &name, &text)?);
    }
    write_file(&args.out_dir, MANIFEST, &manifest)?;
    Ok(written)
}
