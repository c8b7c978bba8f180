//! Read-only input handling and output-path guards.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use md5::Md5;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub size: u64,
    pub md5: String,
    pub sha256: String,
}

/// Hashes everything read through it.
pub struct HashingReader<R> {
    inner: R,
    md5: Md5,
    sha256: Sha256,
    size: u64,
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            md5: Md5::new(),
            sha256: Sha256::new(),
            size: 0,
        }
    }

    pub fn finish(self, path: &Path) -> InputInfo {
        InputInfo {
            path: path.display().to_string(),
            size: self.size,
            md5: hex::encode(self.md5.finalize()),
            sha256: hex::encode(self.sha256.finalize()),
        }
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.md5.update(&buf[..n]);
        self.sha256.update(&buf[..n]);
        self.size += n as u64;
        Ok(n)
    }
}

pub fn is_stdin(path: &Path) -> bool {
    path.as_os_str() == "-"
}

/// Opens `path` read-only, or stdin for `-`.
pub fn open(path: &Path) -> io::Result<Box<dyn Read>> {
    if is_stdin(path) {
        Ok(Box::new(io::stdin().lock()))
    } else {
        Ok(Box::new(File::open(path)?))
    }
}

pub fn read_all(path: &Path) -> io::Result<(Vec<u8>, InputInfo)> {
    let mut reader = HashingReader::new(open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    Ok((bytes, reader.finish(path)))
}

fn resolved(path: &Path) -> PathBuf {
    if let Ok(p) = path.canonicalize() {
        return p;
    }
    // not created yet: resolve the parent and keep the file name
    match (path.parent(), path.file_name()) {
        (Some(parent), Some(name)) => {
            let parent = if parent.as_os_str().is_empty() {
                Path::new(".")
            } else {
                parent
            };
            parent
                .canonicalize()
                .map(|p| p.join(name))
                .unwrap_or_else(|_| path.to_path_buf())
        }
        _ => path.to_path_buf(),
    }
}

/// Errors when `output` names one of `inputs`.
pub fn guard_output(output: &Path, inputs: &[&Path]) -> Result<(), String> {
    let out = resolved(output);
    for input in inputs.iter().filter(|p| !is_stdin(p)) {
        if resolved(input) == out {
            return Err(format!(
                "refusing to write {}: it is an input of this run",
                output.display()
            ));
        }
    }
    Ok(())
}
