//! Versioned binary parameter container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic "ENCK" | version | header_len | header bytes | entry_count
//! entry*: name_len | name (UTF-8) | rank | dims[rank] | f32 payload (LE)
//! ```

use std::io::{Read, Write};

use crate::{Array, KernelError, ParamStore};

pub const MAGIC: &[u8; 4] = b"ENCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<u8>,
    pub entries: Vec<Entry>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, header: Vec<u8>) -> Self {
        let entries = store
            .ids()
            .map(|id| {
                let v = store.value(id);
                Entry {
                    name: store.name(id).to_string(),
                    shape: v.shape().to_vec(),
                    values: v.data().iter().map(|&x| x as f32).collect(),
                }
            })
            .collect();
        Self { header, entries }
    }

    /// Copies every entry into the matching parameter of `store`.
    /// Names, order and shapes must match exactly.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<(), KernelError> {
        if self.entries.len() != store.len() {
            return Err(KernelError::Checkpoint(format!(
                "{} entries for {} parameters",
                self.entries.len(),
                store.len()
            )));
        }
        for (entry, id) in self.entries.iter().zip(store.ids().collect::<Vec<_>>()) {
            if store.name(id) != entry.name {
                return Err(KernelError::UnknownParam(entry.name.clone()));
            }
            let dst = store.value_mut(id);
            if dst.shape() != entry.shape.as_slice() {
                return Err(KernelError::Checkpoint(format!(
                    "shape of `{}` is {:?}, checkpoint has {:?}",
                    entry.name,
                    dst.shape(),
                    entry.shape
                )));
            }
            for (d, &s) in dst.data_mut().iter_mut().zip(&entry.values) {
                *d = s as f64;
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), KernelError> {
        w.write_all(MAGIC)?;
        put_u32(&mut w, VERSION)?;
        put_u32(&mut w, self.header.len() as u32)?;
        w.write_all(&self.header)?;
        put_u32(&mut w, self.entries.len() as u32)?;
        for e in &self.entries {
            put_u32(&mut w, e.name.len() as u32)?;
            w.write_all(e.name.as_bytes())?;
            put_u32(&mut w, e.shape.len() as u32)?;
            for &d in &e.shape {
                put_u32(&mut w, d as u32)?;
            }
            for v in &e.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, KernelError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(KernelError::Checkpoint("bad magic".into()));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(KernelError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let header_len = get_u32(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let count = get_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = get_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| KernelError::Checkpoint("parameter name is not UTF-8".into()))?;
            let rank = get_u32(&mut r)? as usize;
            if rank == 0 || rank > 2 {
                return Err(KernelError::Rank(rank));
            }
            let shape = (0..rank)
                .map(|_| get_u32(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n);
            let mut buf = [0u8; 4];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                values.push(f32::from_le_bytes(buf));
            }
            entries.push(Entry {
                name,
                shape,
                values,
            });
        }
        Ok(Self { header, entries })
    }

    pub fn to_store(&self) -> Result<ParamStore, KernelError> {
        let mut store = ParamStore::new();
        for e in &self.entries {
            let data = e.values.iter().map(|&x| x as f64).collect();
            store.add(&e.name, Array::new(e.shape.clone(), data)?)?;
        }
        Ok(store)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, KernelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
