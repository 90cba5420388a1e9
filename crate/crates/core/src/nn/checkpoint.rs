//! Parameter checkpoint container: a JSON config header followed by
//! named raw-f64 tensors. Round-trips bit-exactly.

use super::network::{SRNetwork, SRNetworkConfig};
use super::Scalar;
use crate::error::Error;
use crate::Result;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"TPSRCKP1";

pub fn save_checkpoint<F: Scalar>(net: &SRNetwork<F>, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    let config = serde_json::to_vec(&net.config).expect("config serializes");
    f.write_all(&(config.len() as u64).to_le_bytes())?;
    f.write_all(&config)?;
    for (name, shape, values) in net.params() {
        let name = name.as_bytes();
        f.write_all(&(name.len() as u64).to_le_bytes())?;
        f.write_all(name)?;
        f.write_all(&(shape.len() as u64).to_le_bytes())?;
        for d in &shape {
            f.write_all(&(*d as u64).to_le_bytes())?;
        }
        f.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            // f32 -> f64 widening is exact, so either instantiation
            // round-trips bit-for-bit.
            f.write_all(&v.to_f64_().to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<SRNetwork<F>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let clen = r.u64()? as usize;
    let config: SRNetworkConfig = serde_json::from_slice(r.take(clen)?)
        .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
    let mut net = SRNetwork::<F>::build(config)?;
    let expected = net.params();
    let mut loaded: Vec<Vec<F>> = Vec::with_capacity(expected.len());
    for (name, shape, values) in &expected {
        let nlen = r.u64()? as usize;
        let got_name = String::from_utf8_lossy(r.take(nlen)?).into_owned();
        if &got_name != name {
            return Err(Error::Checkpoint(format!(
                "tensor order mismatch: expected {name}, found {got_name}"
            )));
        }
        let ndim = r.u64()? as usize;
        let mut got_shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            got_shape.push(r.u64()? as usize);
        }
        if &got_shape != shape {
            return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
        }
        let n = r.u64()? as usize;
        if n != values.len() {
            return Err(Error::Checkpoint(format!("size mismatch for {name}")));
        }
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(F::from_f64_(f64::from_le_bytes(r.take(8)?.try_into().unwrap())));
        }
        loaded.push(vals);
    }
    for (dst, src) in net.params_mut().into_iter().zip(loaded) {
        dst.value.copy_from_slice(&src);
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let cfg = SRNetworkConfig {
            channels: 8,
            blocks: 2,
            expansion: 2.0,
            ratio: 5.2,
            seed: 99,
        };
        let net = SRNetwork::<f32>::build(cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(back.config, net.config);
        for ((_, _, a), (_, _, b)) in net.params().into_iter().zip(back.params()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        // Identical forward outputs.
        let x = Array2::from_shape_fn((8, 8), |(h, w)| ((h * 8 + w) as f32 * 0.13).sin());
        let ya = net.infer(&x).unwrap();
        let yb = back.infer(&x).unwrap();
        assert!(ya.iter().zip(yb.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load_checkpoint::<f32>(&path).is_err());
    }
}
