//! Downloads dataset files listed in a spec's `[[fetch]]` entries.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{DatasetSpec, Decompress, FetchSource};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    /// Already present (and matching its checksum, if one is pinned).
    Present(PathBuf),
    Downloaded(PathBuf),
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn verify(path: &Path, expected: &str) -> Result<()> {
    let actual = sha256_file(path)?;
    if actual.eq_ignore_ascii_case(expected) {
        Ok(())
    } else {
        Err(Error::ChecksumMismatch {
            path: path.to_owned(),
            expected: expected.to_owned(),
            actual,
        })
    }
}

fn download(url: &str) -> Result<Vec<u8>> {
    let err = |message: String| Error::Download {
        url: url.to_owned(),
        message,
    };
    let response = ureq::get(url).call().map_err(|e| match e {
        ureq::Error::Status(code, r) => err(format!("HTTP {code} {}", r.status_text())),
        ureq::Error::Transport(t) => err(match t.message() {
            Some(m) => format!("{}: {m}", t.kind()),
            None => t.kind().to_string(),
        }),
    })?;
    let mut body = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut body)
        .map_err(|e| err(e.to_string()))?;
    Ok(body)
}

fn uncompress(url: &str, raw: &Path) -> Result<Vec<u8>> {
    let out = Command::new("gzip")
        .arg("-dc")
        .arg(raw)
        .output()
        .map_err(|e| Error::Download {
            url: url.to_owned(),
            message: format!("running gzip: {e}"),
        })?;
    if !out.status.success() {
        return Err(Error::Download {
            url: url.to_owned(),
            message: format!("gzip -dc failed: {}", String::from_utf8_lossy(&out.stderr).trim()),
        });
    }
    Ok(out.stdout)
}

/// Fetches one source into `data_dir`. Existing files are kept when they
/// pass verification (or when `verify_checksums` is false).
pub fn fetch_source(source: &FetchSource, data_dir: &Path, verify_checksums: bool) -> Result<FetchOutcome> {
    let dest = data_dir.join(&source.file);
    let pinned = source.sha256.as_deref().filter(|_| verify_checksums);

    if dest.exists() {
        match pinned {
            None => return Ok(FetchOutcome::Present(dest)),
            Some(sum) if verify(&dest, sum).is_ok() => return Ok(FetchOutcome::Present(dest)),
            Some(_) => log::warn!("{} fails its checksum, downloading again", dest.display()),
        }
    }
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }

    log::info!("downloading {}", source.url);
    let body = download(&source.url)?;
    let body = match source.decompress {
        Decompress::None => body,
        Decompress::UnixCompress => {
            let raw = dest.with_extension("Z.part");
            fs::write(&raw, &body).map_err(|e| Error::io(&raw, e))?;
            let expanded = uncompress(&source.url, &raw);
            let _ = fs::remove_file(&raw);
            expanded?
        }
    };

    let part = dest.with_extension("part");
    fs::write(&part, &body).map_err(|e| Error::io(&part, e))?;
    if let Some(sum) = pinned {
        if let Err(e) = verify(&part, sum) {
            let _ = fs::remove_file(&part);
            return Err(e);
        }
    }
    fs::rename(&part, &dest).map_err(|e| Error::io(&dest, e))?;
    Ok(FetchOutcome::Downloaded(dest))
}

/// Fetches every source of `spec`, stopping at the first failure.
pub fn fetch_dataset(spec: &DatasetSpec, data_dir: &Path, verify_checksums: bool) -> Result<Vec<FetchOutcome>> {
    if spec.fetch.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "{} lists no download sources",
            spec.name
        )));
    }
    spec.fetch
        .iter()
        .map(|s| fetch_source(s, data_dir, verify_checksums))
        .collect()
}
