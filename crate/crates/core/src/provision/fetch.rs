use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ProvisionError;

/// Environment variable overriding the download cache directory.
pub const CACHE_ENV: &str = "SCRUB_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    /// `http(s)://` or `file://` URL.
    pub url: String,
    /// Lower-case hex SHA-256 of the file.
    pub expected_checksum: String,
    /// Cache directory; falls back to [`cache_dir_from_env`].
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Name of the cached file; defaults to the last URL path segment.
    #[serde(default)]
    pub file_name: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `$SCRUB_CACHE_DIR`, else `$HOME/.cache/scrub`, else `./.scrub-cache`.
pub fn cache_dir_from_env() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME") {
        Some(home) => Path::new(&home).join(".cache").join("scrub"),
        None => PathBuf::from(".scrub-cache"),
    }
}

fn cache_name(src: &SourceDescriptor) -> String {
    src.file_name.clone().unwrap_or_else(|| {
        let tail = src.url.trim_end_matches('/').rsplit('/').next().unwrap_or("");
        let tail = tail.split(['?', '#']).next().unwrap_or("");
        if tail.is_empty() {
            format!("{}.csv", &src.expected_checksum[..src.expected_checksum.len().min(16)])
        } else {
            tail.to_string()
        }
    })
}

fn download(url: &str) -> Result<Vec<u8>, ProvisionError> {
    let failed = |reason: String| ProvisionError::DownloadFailed { url: url.to_string(), reason };
    if let Some(path) = url.strip_prefix("file://") {
        return fs::read(path).map_err(|e| failed(e.to_string()));
    }
    let response = ureq::get(url).call().map_err(|e| failed(e.to_string()))?;
    let mut bytes = Vec::new();
    response.into_reader().read_to_end(&mut bytes).map_err(|e| failed(e.to_string()))?;
    Ok(bytes)
}

/// Make the source available in the cache and return its path.
///
/// A cached file whose checksum matches is returned without touching the
/// network. A freshly downloaded file is only moved into the cache after its
/// checksum is verified.
pub fn fetch_dataset(src: &SourceDescriptor) -> Result<PathBuf, ProvisionError> {
    let dir = src.cache_dir.clone().unwrap_or_else(cache_dir_from_env);
    let path = dir.join(cache_name(src));
    let expected = src.expected_checksum.to_ascii_lowercase();
    let mismatch = |actual: String| ProvisionError::ChecksumMismatch {
        path: path.display().to_string(),
        expected: expected.clone(),
        actual,
    };

    if path.exists() {
        let actual = sha256_hex(&fs::read(&path)?);
        return if actual == expected { Ok(path) } else { Err(mismatch(actual)) };
    }

    let bytes = download(&src.url)?;
    let actual = sha256_hex(&bytes);
    if actual != expected {
        return Err(mismatch(actual));
    }
    fs::create_dir_all(&dir)?;
    let partial = dir.join(format!(".{}.partial", cache_name(src)));
    fs::write(&partial, &bytes)?;
    fs::rename(&partial, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(dir: &Path, upstream: &Path, checksum: &str) -> SourceDescriptor {
        SourceDescriptor {
            url: format!("file://{}", upstream.display()),
            expected_checksum: checksum.to_string(),
            cache_dir: Some(dir.to_path_buf()),
            file_name: None,
        }
    }

    #[test]
    fn download_then_cache_hit_is_idempotent() {
        let tmp = tempfile::tempdir().unwrap();
        let upstream = tmp.path().join("titanic.csv");
        fs::write(&upstream, b"a,b\n1,2\n").unwrap();
        let sum = sha256_hex(b"a,b\n1,2\n");
        let cache = tmp.path().join("cache");
        let src = source(&cache, &upstream, &sum);
        let first = fetch_dataset(&src).unwrap();
        let bytes = fs::read(&first).unwrap();
        // Remove upstream: the second call must be served from cache.
        fs::remove_file(&upstream).unwrap();
        let second = fetch_dataset(&src).unwrap();
        assert_eq!(first, second);
        assert_eq!(fs::read(&second).unwrap(), bytes);
    }

    #[test]
    fn checksum_mismatch_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let upstream = tmp.path().join("data.csv");
        fs::write(&upstream, b"x\n1\n").unwrap();
        let src = source(&tmp.path().join("cache"), &upstream, &"0".repeat(64));
        assert!(matches!(fetch_dataset(&src), Err(ProvisionError::ChecksumMismatch { .. })));
        assert!(!tmp.path().join("cache").join("data.csv").exists());
    }

    #[test]
    fn tampered_cache_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = tmp.path().join("cache");
        fs::create_dir_all(&cache).unwrap();
        fs::write(cache.join("data.csv"), b"tampered").unwrap();
        let src = source(&cache, &tmp.path().join("data.csv"), &sha256_hex(b"original"));
        assert!(matches!(fetch_dataset(&src), Err(ProvisionError::ChecksumMismatch { .. })));
    }

    #[test]
    fn unreachable_source_fails() {
        let tmp = tempfile::tempdir().unwrap();
        let src = source(&tmp.path().join("cache"), &tmp.path().join("absent.csv"), &"0".repeat(64));
        assert!(matches!(fetch_dataset(&src), Err(ProvisionError::DownloadFailed { .. })));
    }
}
