//! File helpers shared by the loaders and report writers.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::io(format!("opening {}", path.display()), e),
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::io(format!("reading {}", path.display()), e),
    })
}

/// Writes via a sibling temporary file and a rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(ctx(), e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(ctx(), e))?;
        f.write_all(bytes).map_err(|e| Error::io(ctx(), e))?;
        f.sync_all().map_err(|e| Error::io(ctx(), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(ctx(), e))
}

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::io(format!("hashing {}", path.display()), e),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds CSV text in memory; all report writers go through this so output is
/// assembled fully before the atomic write.
pub struct CsvBuffer {
    writer: csv::Writer<Vec<u8>>,
    name: String,
}

impl CsvBuffer {
    pub fn new(name: &str, header: &[&str]) -> Result<Self> {
        let mut buf = CsvBuffer {
            writer: csv::Writer::from_writer(Vec::new()),
            name: name.to_owned(),
        };
        buf.row(header)?;
        Ok(buf)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| Error::csv(self.name.clone(), e))
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        let name = self.name;
        self.writer
            .into_inner()
            .map_err(|e| Error::io(name, e.into_error()))
    }
}
