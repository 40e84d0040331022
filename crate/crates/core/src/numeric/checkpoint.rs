//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes   "KGLITCKP"
//! version    u32 LE
//! steps      u64 LE    Adam step count
//! entries    u32 LE
//! per entry:
//!   name_len u32 LE, name (UTF-8)
//!   rank     u32 LE, dims (u64 LE each)
//!   values, adam_m, adam_v   row-major f64 LE, one block each
//! ```

use std::io::{Read, Write};

use super::params::{Param, ParameterStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"KGLITCKP";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(store: &ParameterStore, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&store.step_count().to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, p) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for block in [&p.value, &p.adam_m, &p.adam_v] {
            for v in block.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParameterStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version)));
    }
    let steps = read_u64(&mut r)?;
    let n = read_u32(&mut r)?;
    let mut store = ParameterStore::new();
    for _ in 0..n {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let mut blocks = Vec::with_capacity(3);
        for _ in 0..3 {
            let data = (0..count).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            blocks.push(Tensor::from_vec(&shape, data)?);
        }
        let adam_v = blocks.pop().unwrap();
        let adam_m = blocks.pop().unwrap();
        let value = blocks.pop().unwrap();
        store.insert_param(
            name,
            Param {
                grad: Tensor::zeros(&shape),
                value,
                adam_m,
                adam_v,
            },
        );
    }
    store.step_count = steps;
    Ok(store)
}

pub fn save(store: &ParameterStore, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(store, std::io::BufWriter::new(f))
}

pub fn load(path: &std::path::Path) -> Result<ParameterStore> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
