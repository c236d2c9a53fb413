//! DSMW checkpoint files.
//!
//! Layout: `"DSMW"`, version `u32`, then one record per tensor until EOF:
//! name length `u32`, UTF-8 name, rank `u32`, dims `u32` each, values as
//! little-endian `f32`. Integers are little-endian. Trainable tensors come
//! first in layer order, followed by batch-norm `running_mean` / `running_var`.

use std::io::{Read, Write};
use std::path::Path;

use super::{Init, NetworkSpec, NnError, ParamStore};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"DSMW";
pub const VERSION: u32 = 1;

fn record<W: Write>(w: &mut W, name: &str, shape: &[usize], values: impl Iterator<Item = f32>) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_params<T: Scalar, W: Write>(params: &ParamStore<T>, mut w: W) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for p in params.iter() {
        record(
            &mut w,
            &p.name,
            p.value.shape(),
            p.value.data().iter().map(|v| v.f64() as f32),
        )?;
    }
    for (i, lp) in params.layers().iter().enumerate() {
        if let Some(r) = &lp.running {
            let shape = [r.mean.len()];
            record(
                &mut w,
                &format!("{i}.running_mean"),
                &shape,
                r.mean.iter().map(|v| v.f64() as f32),
            )?;
            record(
                &mut w,
                &format!("{i}.running_var"),
                &shape,
                r.var.iter().map(|v| v.f64() as f32),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_params<T: Scalar>(params: &ParamStore<T>, path: &Path) -> Result<(), NnError> {
    let file = std::fs::File::create(path)?;
    write_params(params, std::io::BufWriter::new(file))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], NnError> {
        if self.bytes.len() - self.pos < n {
            return Err(NnError::Format {
                offset: self.pos as u64,
                detail: format!("truncated {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads a checkpoint written for `spec`. Every tensor of the network must be
/// present with the right shape; anything else is an architecture mismatch.
pub fn read_params<T: Scalar, R: Read>(spec: &NetworkSpec, mut r: R) -> Result<ParamStore<T>, NnError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(NnError::Format {
            offset: 0,
            detail: "bad magic, expected DSMW".into(),
        });
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(NnError::Format {
            offset: 4,
            detail: format!("unsupported version {version}"),
        });
    }
    // Zero-std init gives the exact layout to fill in.
    let mut rng = rand_chacha::ChaCha8Rng::from_seed_zero();
    let mut store: ParamStore<T> = ParamStore::init(spec, Init::Normal { std: 0.0 }, &mut rng)?;
    let expected = store.iter().count() + 2 * store.layers().iter().filter(|l| l.running.is_some()).count();
    let mut seen = std::collections::HashSet::new();
    while cur.pos < bytes.len() {
        let at = cur.pos as u64;
        let len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "name")?)
            .map_err(|_| NnError::Format {
                offset: at,
                detail: "name is not UTF-8".into(),
            })?
            .to_owned();
        let rank = cur.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32("dimension")? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = cur.take(count * 4, "values")?;
        let values: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        let mismatch = |detail: String| NnError::Params(format!("checkpoint tensor {name}: {detail}"));
        if !seen.insert(name.clone()) {
            return Err(mismatch("duplicated".into()));
        }
        if let Some((layer, stat)) = name
            .strip_suffix(".running_mean")
            .map(|l| (l, true))
            .or_else(|| name.strip_suffix(".running_var").map(|l| (l, false)))
        {
            let layer: usize = layer.parse().map_err(|_| mismatch("bad layer index".into()))?;
            let running = store
                .layers_mut()
                .get_mut(layer)
                .and_then(|l| l.running.as_mut())
                .ok_or_else(|| mismatch("no batch-norm layer there".into()))?;
            let slot = if stat { &mut running.mean } else { &mut running.var };
            if shape != [slot.len()] {
                return Err(mismatch(format!("shape {shape:?}, expected [{}]", slot.len())));
            }
            *slot = values;
        } else {
            let param = store
                .iter_mut()
                .find(|p| p.name == name)
                .ok_or_else(|| mismatch("not part of this network".into()))?;
            if param.value.shape() != &shape[..] {
                return Err(mismatch(format!("shape {shape:?}, expected {:?}", param.value.shape())));
            }
            param.value = Tensor::new(shape, values)?;
        }
    }
    if seen.len() != expected {
        return Err(NnError::Params(format!(
            "checkpoint holds {} of {expected} tensors",
            seen.len()
        )));
    }
    Ok(store)
}

pub fn load_params<T: Scalar>(spec: &NetworkSpec, path: &Path) -> Result<ParamStore<T>, NnError> {
    read_params(spec, std::fs::File::open(path)?)
}

trait SeedZero {
    fn from_seed_zero() -> Self;
}

impl SeedZero for rand_chacha::ChaCha8Rng {
    fn from_seed_zero() -> Self {
        rand::SeedableRng::seed_from_u64(0)
    }
}
