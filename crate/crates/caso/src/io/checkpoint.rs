//! Binary checkpoint container.
//!
//! Layout, in order: magic `CASO1`; three little-endian u64 dims
//! (n_users, n_communities, dim); length-prefixed UTF-8 config echo;
//! length-prefixed provenance hash; then U° and C as row-major
//! little-endian f64 blocks. No padding, no trailing bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::embedding::Embedding;
use crate::error::{CasoError, Result};

pub const MAGIC: &[u8; 5] = b"CASO1";

/// Everything needed to rescore without retraining: the parameters, the
/// configuration that produced them, and the hash of the data they were
/// fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_echo: String,
    pub provenance_hash: String,
    pub user_base: Embedding,
    pub community_emb: Embedding,
}

fn bad(msg: impl Into<String>) -> CasoError {
    CasoError::Checkpoint(msg.into())
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let (n_users, dim) = ck.user_base.dim();
    let (n_communities, dim_c) = ck.community_emb.dim();
    if dim != dim_c {
        return Err(bad(format!(
            "embedding widths differ: U° has {dim}, C has {dim_c}"
        )));
    }
    let mut buf = Vec::with_capacity(
        MAGIC.len() + 8 * 5 + ck.config_echo.len() + ck.provenance_hash.len()
            + 8 * (n_users + n_communities) * dim,
    );
    buf.extend_from_slice(MAGIC);
    for v in [n_users, n_communities, dim] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for text in [&ck.config_echo, &ck.provenance_hash] {
        buf.extend_from_slice(&(text.len() as u64).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
    }
    for matrix in [&ck.user_base, &ck.community_emb] {
        for v in matrix.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| bad("truncated file"))?;
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        let bytes = self.take(8)?;
        Ok(u64::from_le_bytes(bytes.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String> {
        let len = self.u64()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| bad("text block is not UTF-8"))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| bad("matrix dimensions overflow"))?;
        let bytes = self.take(n)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| bad(format!("matrix shape: {e}")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let data = fs::read(path)?;
    let mut r = Reader { data: &data, pos: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(bad(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let n_users = r.u64()? as usize;
    let n_communities = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let config_echo = r.text()?;
    let provenance_hash = r.text()?;
    let user_base = r.matrix(n_users, dim)?;
    let community_emb = r.matrix(n_communities, dim)?;
    if r.pos != data.len() {
        return Err(bad(format!(
            "{} trailing bytes after the parameter blocks",
            data.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        config_echo,
        provenance_hash,
        user_base,
        community_emb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let user_base =
            Array2::from_shape_fn((7, 5), |_| rng.random_range(-10.0..10.0f64));
        let community_emb =
            Array2::from_shape_fn((3, 5), |_| rng.random_range(-1e-12..1e-12f64));
        Checkpoint {
            config_echo: "alpha = 0.33\nseed = 7\n".to_string(),
            provenance_hash: "ab".repeat(32),
            user_base,
            community_emb,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = sample_checkpoint();
        save_checkpoint(&path, &ck).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config_echo, ck.config_echo);
        assert_eq!(loaded.provenance_hash, ck.provenance_hash);
        for (a, b) in loaded.user_base.iter().zip(ck.user_base.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in loaded.community_emb.iter().zip(ck.community_emb.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_starts_with_the_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample_checkpoint()).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"CASO1");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample_checkpoint()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample_checkpoint()).unwrap();
        let bytes = fs::read(&path).unwrap();
        for cut in [3, 20, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            let err = load_checkpoint(&path).unwrap_err();
            assert!(err.to_string().contains("truncated"), "cut {cut}: {err}");
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample_checkpoint()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn mismatched_widths_refuse_to_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = Checkpoint {
            config_echo: String::new(),
            provenance_hash: String::new(),
            user_base: array![[1.0, 2.0]],
            community_emb: array![[1.0, 2.0, 3.0]],
        };
        let err = save_checkpoint(&path, &ck).unwrap_err();
        assert!(err.to_string().contains("widths differ"), "{err}");
    }

    #[test]
    fn special_values_survive_the_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = Checkpoint {
            config_echo: String::new(),
            provenance_hash: String::new(),
            user_base: array![[0.0, -0.0, f64::MIN_POSITIVE], [1e300, -1e-300, 2.5]],
            community_emb: array![[f64::MAX, f64::MIN, 3.5]],
        };
        save_checkpoint(&path, &ck).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for (a, b) in loaded.user_base.iter().zip(ck.user_base.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(loaded.community_emb[[0, 0]], f64::MAX);
    }
}
