//! DEMB embedding files.
//!
//! Layout (little-endian): magic `DEMB`, `u32` version, `u32` dim, `u64`
//! count, then `count × dim` `f32` values row-major. Ids live in a UTF-8
//! sidecar (`<file>.ids`), one per line, in row order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::vecmath::Matrix;

pub const MAGIC: &[u8; 4] = b"DEMB";
pub const VERSION: u32 = 1;

/// Path of the id sidecar for `path`.
pub fn ids_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn write_embeddings<W: Write>(mut w: W, matrix: &Matrix<f32>) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(matrix.cols() as u32).to_le_bytes())?;
    w.write_all(&(matrix.rows() as u64).to_le_bytes())?;
    for v in matrix.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn read_exact<R: Read, const N: usize>(r: &mut R, origin: &str, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(origin, format!("truncated {what}")))?;
    Ok(buf)
}

pub fn read_embeddings<R: Read>(mut r: R, origin: &str) -> Result<Matrix<f32>> {
    let magic: [u8; 4] = read_exact(&mut r, origin, "header")?;
    if &magic != MAGIC {
        return Err(Error::format(origin, "not a DEMB file (bad magic)"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r, origin, "header")?);
    if version != VERSION {
        return Err(Error::format(origin, format!("unsupported DEMB version {version}")));
    }
    let dim = u32::from_le_bytes(read_exact(&mut r, origin, "header")?) as usize;
    let count = u64::from_le_bytes(read_exact(&mut r, origin, "header")?);
    if dim == 0 {
        return Err(Error::format(origin, "dimension is zero"));
    }
    let count = usize::try_from(count).map_err(|_| Error::format(origin, "count too large"))?;
    let bytes = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(origin, "payload size overflows"))?;
    let mut payload = Vec::new();
    r.by_ref()
        .take(bytes as u64)
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(origin, e))?;
    if payload.len() != bytes {
        return Err(Error::format(
            origin,
            format!("payload has {} bytes, header promises {bytes}", payload.len()),
        ));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(origin, e))? != 0 {
        return Err(Error::format(origin, "trailing bytes after payload"));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if count == 0 {
        return Ok(Matrix::zeros(0, dim));
    }
    Matrix::new(count, dim, data)
}

/// Writes the matrix and its id sidecar.
pub fn save(path: &Path, ids: &[String], matrix: &Matrix<f32>) -> Result<()> {
    if ids.len() != matrix.rows() {
        return Err(Error::invalid(format!("{} ids for {} rows", ids.len(), matrix.rows())));
    }
    if let Some(bad) = ids.iter().find(|id| id.is_empty() || id.contains(['\n', '\r'])) {
        return Err(Error::invalid(format!("id {bad:?} cannot be stored one per line")));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(BufWriter::new(file), matrix).map_err(|e| Error::io(path, e))?;
    let ids_file = ids_path(path);
    let file = File::create(&ids_file).map_err(|e| Error::io(&ids_file, e))?;
    let mut w = BufWriter::new(file);
    for id in ids {
        writeln!(w, "{id}").map_err(|e| Error::io(&ids_file, e))?;
    }
    w.flush().map_err(|e| Error::io(&ids_file, e))
}

/// Reads a DEMB file and its sidecar.
pub fn load(path: &Path) -> Result<(Vec<String>, Matrix<f32>)> {
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let matrix = read_embeddings(BufReader::new(file), &origin)?;
    let ids_file = ids_path(path);
    let file = File::open(&ids_file).map_err(|e| Error::io(&ids_file, e))?;
    let ids = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<String>>>()
        .map_err(|e| Error::io(&ids_file, e))?;
    if ids.len() != matrix.rows() {
        return Err(Error::format(
            ids_file.display().to_string(),
            format!("{} ids for {} embeddings", ids.len(), matrix.rows()),
        ));
    }
    Ok((ids, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let m = Matrix::new(2, 3, vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"DEMB");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        assert_eq!(buf.len(), 20 + 6 * 4);
        assert_eq!(&buf[40..44], &6.5f32.to_le_bytes());
        assert_eq!(read_embeddings(&buf[..], "mem").unwrap(), m);
    }

    #[test]
    fn corrupt_files_rejected() {
        let m = Matrix::new(1, 2, vec![1.0f32, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &m).unwrap();
        assert!(read_embeddings(&buf[..buf.len() - 1], "mem").is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_embeddings(&long[..], "mem").is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_embeddings(&bad[..], "mem").is_err());
        let mut v2 = buf;
        v2[4] = 2;
        assert!(read_embeddings(&v2[..], "mem").is_err());
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.demb");
        let m = Matrix::new(2, 2, vec![0.5f32, -1.0, 3.0, 0.25]).unwrap();
        let ids = vec!["a".to_string(), "b c".to_string()];
        save(&path, &ids, &m).unwrap();
        assert!(dir.path().join("docs.demb.ids").exists());
        assert_eq!(load(&path).unwrap(), (ids, m.clone()));
        assert!(save(&path, &["x\ny".to_string(), "z".to_string()], &m).is_err());
        assert!(save(&path, &["x".to_string()], &m).is_err());
    }
}
