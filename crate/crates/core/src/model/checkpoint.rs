//! Binary model checkpoints.
//!
//! Little-endian layout: magic `IGLU`, `u32` version, `u32` K, then K+2 `u32`
//! dims `d_0..d_K, C`, then every matrix `W^1..W^K, W^{K+1}` as row-major
//! `f64`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::model::ModelParams;
use crate::nn::Activation;

const MAGIC: &[u8; 4] = b"IGLU";
const VERSION: u32 = 1;

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let dims = params.dims();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.num_layers() as u32).to_le_bytes());
    for d in &dims {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for m in params.layers.iter().chain(std::iter::once(&params.classifier)) {
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let chunk = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        chunk.try_into().ok()
    }

    fn u32(&mut self) -> Option<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Option<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

/// Loads a checkpoint and checks its dims against `expected_dims`
/// (`[d_0, .., d_K, C]`, as returned by [`ModelParams::dims`]).
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected_dims: &[usize],
    activation: Activation,
) -> Result<ModelParams> {
    let path = path.as_ref();
    let fail = |msg: &str| Error::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take::<4>().as_ref() != Some(MAGIC) {
        return Err(fail("bad magic"));
    }
    let version = r.u32().ok_or_else(|| fail("truncated header"))?;
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let k = r.u32().ok_or_else(|| fail("truncated header"))? as usize;
    let mut dims = Vec::with_capacity(k + 2);
    for _ in 0..k + 2 {
        dims.push(r.u32().ok_or_else(|| fail("truncated header"))? as usize);
    }
    if dims != expected_dims {
        return Err(fail(&format!(
            "dims {dims:?} do not match configuration {expected_dims:?}"
        )));
    }
    let mut mats = Vec::with_capacity(k + 1);
    for pair in dims.windows(2) {
        let (rows, cols) = (pair[0], pair[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64().ok_or_else(|| fail("truncated weights"))?);
        }
        mats.push(DenseMatrix::from_vec(rows, cols, data)?);
    }
    if r.pos != bytes.len() {
        return Err(fail("trailing bytes"));
    }
    let classifier = mats.pop().expect("k + 1 >= 1 matrices");
    Ok(ModelParams {
        layers: mats,
        classifier,
        activation,
    })
}
