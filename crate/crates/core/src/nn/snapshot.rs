//! Weight snapshot file format.
//!
//! ```text
//! magic        4 bytes   "FRLW"
//! num_sizes    u32 LE    number of layer sizes L (>= 2)
//! sizes        L x u32 LE
//! params       |W| x f32 LE, flat order of [`WeightVector`]
//! ```
//!
//! Hidden activation is not stored; snapshots always describe rectified
//! hidden layers with a linear head.

use std::io::{Read, Write};

use super::{Mlp, MlpSpec, WeightVector};
use crate::error::{FrlError, Result};
use crate::scalar::Scalar;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"FRLW";

pub fn write_snapshot<S: Scalar, W: Write>(net: &Mlp<S>, mut out: W) -> Result<()> {
    let sizes = &net.spec().layer_sizes;
    let mut buf = Vec::with_capacity(8 + 4 * sizes.len() + 4 * net.weights().len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for w in net.weights().iter() {
        buf.extend_from_slice(&w.to_le_f32_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<S: Scalar, R: Read>(mut input: R) -> Result<Mlp<S>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cursor = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(FrlError::Snapshot("truncated file".into()));
        }
        let (head, rest) = cursor.split_at(n);
        cursor = rest;
        Ok(head)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());

    if take(4)? != SNAPSHOT_MAGIC {
        return Err(FrlError::Snapshot("bad magic".into()));
    }
    let n = u32_at(take(4)?) as usize;
    if !(2..=64).contains(&n) {
        return Err(FrlError::Snapshot(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| take(4).map(|b| u32_at(b) as usize)).collect::<Result<Vec<_>>>()?;
    let spec = MlpSpec::new(sizes).map_err(|e| FrlError::Snapshot(e.to_string()))?;
    let count = spec.param_count();
    let body = take(4 * count)?;
    let params: Vec<S> =
        body.chunks_exact(4).map(|c| S::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
    if !cursor.is_empty() {
        return Err(FrlError::Snapshot(format!("{} trailing bytes", cursor.len())));
    }
    Mlp::from_weights(spec, WeightVector::from(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f32>::he_uniform(MlpSpec::new(vec![6, 10, 36]).unwrap(), &mut rng);
        let mut buf = Vec::new();
        write_snapshot(&net, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"FRLW");
        assert_eq!(buf.len(), 4 + 4 + 3 * 4 + 4 * net.weights().len());
        let back: Mlp<f32> = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let net = Mlp::<f32>::zeros(MlpSpec::new(vec![2, 1]).unwrap());
        let mut buf = Vec::new();
        write_snapshot(&net, &mut buf).unwrap();
        assert_eq!(buf, [b"FRLW".as_slice(), &[2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0], &[0u8; 12]].concat());
    }

    #[test]
    fn rejects_corruption() {
        let net = Mlp::<f32>::zeros(MlpSpec::new(vec![2, 3]).unwrap());
        let mut buf = Vec::new();
        write_snapshot(&net, &mut buf).unwrap();
        assert!(read_snapshot::<f32, _>(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot::<f32, _>(bad.as_slice()).is_err());
        buf.push(0);
        assert!(read_snapshot::<f32, _>(buf.as_slice()).is_err());
    }
}
