//! Parameter checkpoints.
//!
//! Binary little-endian layout, version 1:
//!
//! ```text
//! magic    8 bytes   b"HUQCKPT1"
//! count    u32       number of matrices
//! repeated count times:
//!   name_len u32, name  UTF-8 bytes
//!   rows     u64, cols  u64
//!   values   rows*cols f64, row-major
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Matrix, ParamSet};

pub const MAGIC: &[u8; 8] = b"HUQCKPT1";

pub fn write_matrices<W: Write>(mut w: W, named: &[(String, Matrix)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, m) in named {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

pub fn read_matrices<R: Read>(mut r: R) -> Result<Vec<(String, Matrix)>> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflow")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    Ok(out)
}

/// Overwrites the values of `params` from a checkpoint with matching names
/// and shapes.
pub fn load_into<R: Read>(r: R, params: &mut ParamSet) -> Result<()> {
    let named = read_matrices(r)?;
    if named.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} matrices, model has {}",
            named.len(),
            params.len()
        )));
    }
    for (p, (name, m)) in params.iter_mut().zip(named) {
        if p.name != name || p.tensor.shape() != m.shape() {
            return Err(Error::Checkpoint(format!(
                "expected {} {:?}, found {name} {:?}",
                p.name,
                p.tensor.shape(),
                m.shape()
            )));
        }
        p.tensor.value = m;
    }
    Ok(())
}

pub fn save<W: Write>(w: W, params: &ParamSet) -> Result<()> {
    write_matrices(w, &params.named_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(rows in 0usize..5, cols in 0usize..5, seed in any::<u64>(), name in "[a-z_.0-9]{0,12}") {
            let m = Matrix::from_fn(rows, cols, |i, j| (seed as f64).sin() * (i as f64) - j as f64 / 3.0);
            let named = vec![(name, m)];
            let mut buf = Vec::new();
            write_matrices(&mut buf, &named).unwrap();
            prop_assert_eq!(read_matrices(buf.as_slice()).unwrap(), named);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_matrices(&b"NOTMAGIC\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_matrices(&mut buf, &[("w".into(), Matrix::filled(2, 2, 1.0))]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_matrices(buf.as_slice()).is_err());
    }

    #[test]
    fn load_into_checks_layout() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::new(Matrix::filled(2, 1, 0.5)));
        let mut buf = Vec::new();
        save(&mut buf, &ps).unwrap();
        let mut other = ParamSet::new();
        other.push("w", Tensor::zeros(2, 1));
        load_into(buf.as_slice(), &mut other).unwrap();
        assert_eq!(other.named_values(), ps.named_values());
        let mut wrong = ParamSet::new();
        wrong.push("v", Tensor::zeros(2, 1));
        assert!(load_into(buf.as_slice(), &mut wrong).is_err());
    }
}
