//! Binary weight files: `WRS1`, a little-endian `u64` count, then that many
//! little-endian `f64` weights.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"WRS1";

#[derive(Debug, thiserror::Error)]
pub enum WeightFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WeightFileError + '_ {
    move |source| WeightFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> WeightFileError {
    WeightFileError::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn write(path: &Path, weights: &[f64]) -> Result<(), WeightFileError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut put = |bytes: &[u8]| out.write_all(bytes).map_err(io_err(path));
    put(MAGIC)?;
    put(&(weights.len() as u64).to_le_bytes())?;
    for w in weights {
        put(&w.to_le_bytes())?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Vec<f64>, WeightFileError> {
    let file = File::open(path).map_err(io_err(path))?;
    let declared_bytes = file.metadata().map_err(io_err(path))?.len();
    let mut input = BufReader::new(file);
    let mut header = [0u8; 12];
    input
        .read_exact(&mut header)
        .map_err(|_| malformed(path, "truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(malformed(path, "bad magic, expected WRS1"));
    }
    let count = u64::from_le_bytes(header[4..].try_into().expect("8 bytes"));
    let payload = declared_bytes - 12;
    if count.checked_mul(8) != Some(payload) {
        return Err(malformed(
            path,
            format!("header declares {count} weights but payload holds {payload} bytes"),
        ));
    }
    let mut weights = Vec::with_capacity(count as usize);
    let mut buf = [0u8; 8];
    for i in 0..count {
        input.read_exact(&mut buf).map_err(io_err(path))?;
        let w = f64::from_le_bytes(buf);
        if !(w.is_finite() && w > 0.0) {
            return Err(malformed(path, format!("weight {i} is {w}")));
        }
        weights.push(w);
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let w = vec![1.0, 0.1, 1e-300, 7.5e12, f64::MIN_POSITIVE];
        write(&path, &w).unwrap();
        let back = read(&path).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&w));
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 12 + 8 * 5);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        std::fs::write(&path, b"WRS2\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read(&path), Err(WeightFileError::Malformed { .. })));

        let mut bytes = MAGIC.to_vec();
        bytes.extend(3u64.to_le_bytes());
        bytes.extend(1.0f64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read(&path), Err(WeightFileError::Malformed { .. })));

        let mut bytes = MAGIC.to_vec();
        bytes.extend(1u64.to_le_bytes());
        bytes.extend((-1.0f64).to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read(&path), Err(WeightFileError::Malformed { .. })));

        std::fs::write(&path, b"WR").unwrap();
        assert!(matches!(read(&path), Err(WeightFileError::Malformed { .. })));

        let missing = dir.path().join("missing.bin");
        assert!(matches!(read(&missing), Err(WeightFileError::Io { .. })));
    }
}
