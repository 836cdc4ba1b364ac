//! Binary checkpoint container for networks and attack artifacts.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "LLABCKPT"
//! version u32
//! config_hash      length-prefixed UTF-8
//! meta    u32 count, then (key, value) length-prefixed pairs
//! stacks  u32 count, then per stack:
//!           name   length-prefixed
//!           arch   length-prefixed (LayerStack::arch_string)
//!           records u32 count, then per record:
//!             layer_index u32, tag length-prefixed,
//!             ndim u32, dims u64×ndim, count u64, values f64-bits×count
//! tensors u32 count, then named records as above (layer_index = 0)
//! ```
//!
//! Values are stored as raw `f64` bits, so an f64 round-trip is bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::LayerStack;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"LLABCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint<T: Scalar> {
    pub version: u32,
    pub config_hash: String,
    /// Ordered key/value metadata (kind, hyperparameters, seeds).
    pub meta: Vec<(String, String)>,
    pub stacks: Vec<(String, LayerStack<T>)>,
    pub tensors: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            version: FORMAT_VERSION,
            config_hash: config_hash.into(),
            meta: Vec::new(),
            stacks: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn stack(&self, name: &str) -> Result<&LayerStack<T>> {
        self.stacks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Checkpoint(format!("missing stack `{name}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.version.to_le_bytes());
        write_str(&mut buf, &self.config_hash);

        buf.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            write_str(&mut buf, k);
            write_str(&mut buf, v);
        }

        buf.extend_from_slice(&(self.stacks.len() as u32).to_le_bytes());
        for (name, stack) in &self.stacks {
            write_str(&mut buf, name);
            write_str(&mut buf, &stack.arch_string());
            let mut records: Vec<(u32, &'static str, Vec<usize>, Vec<f64>)> = Vec::new();
            stack.visit_params(&mut |idx, tag, t| {
                records.push((idx as u32, tag, t.shape().to_vec(), to_f64_vec(t)));
            });
            stack.visit_state(&mut |idx, tag, t| {
                records.push((idx as u32, tag, t.shape().to_vec(), to_f64_vec(t)));
            });
            buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
            for (idx, tag, shape, values) in records {
                buf.extend_from_slice(&idx.to_le_bytes());
                write_str(&mut buf, tag);
                write_record(&mut buf, &shape, &values);
            }
        }

        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&0u32.to_le_bytes());
            write_str(&mut buf, name);
            write_record(&mut buf, t.shape(), &to_f64_vec(t));
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let config_hash = r.string()?;

        let n_meta = r.u32()? as usize;
        let mut meta = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            let k = r.string()?;
            let v = r.string()?;
            meta.push((k, v));
        }

        let n_stacks = r.u32()? as usize;
        let mut stacks = Vec::with_capacity(n_stacks);
        for _ in 0..n_stacks {
            let name = r.string()?;
            let arch = r.string()?;
            let mut stack = LayerStack::<T>::from_arch(&arch)?;
            let n_records = r.u32()? as usize;
            let mut records = Vec::with_capacity(n_records);
            for _ in 0..n_records {
                let idx = r.u32()?;
                let tag = r.string()?;
                let (shape, values) = r.record()?;
                records.push((idx, tag, shape, values));
            }
            fill_stack(&mut stack, records)?;
            stacks.push((name, stack));
        }

        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let _idx = r.u32()?;
            let name = r.string()?;
            let (shape, values) = r.record()?;
            tensors.push((name, from_f64_record::<T>(shape, values)?));
        }

        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }

        Ok(Self {
            version,
            config_hash,
            meta,
            stacks,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn to_f64_vec<T: Scalar>(t: &Tensor<T>) -> Vec<f64> {
    t.values().iter().map(|v| v.to_f64().unwrap()).collect()
}

fn from_f64_record<T: Scalar>(shape: Vec<usize>, values: Vec<f64>) -> Result<Tensor<T>> {
    let converted = values
        .into_iter()
        .map(|v| {
            T::from_f64(v).ok_or_else(|| Error::Checkpoint("value not representable".into()))
        })
        .collect::<Result<Vec<T>>>()?;
    Tensor::new(shape, converted)
}

fn fill_stack<T: Scalar>(
    stack: &mut LayerStack<T>,
    records: Vec<(u32, String, Vec<usize>, Vec<f64>)>,
) -> Result<()> {
    let mut remaining = records;
    let mut take = |idx: usize, tag: &str, t: &mut Tensor<T>| -> Result<()> {
        let pos = remaining
            .iter()
            .position(|(i, g, _, _)| *i as usize == idx && g == tag)
            .ok_or_else(|| Error::Checkpoint(format!("missing record {idx}.{tag}")))?;
        let (_, _, shape, values) = remaining.remove(pos);
        if shape != t.shape() {
            return Err(Error::Checkpoint(format!(
                "record {idx}.{tag} shape {:?} does not match layer shape {:?}",
                shape,
                t.shape()
            )));
        }
        *t = from_f64_record(shape, values)?;
        Ok(())
    };

    let mut result = Ok(());
    stack.visit_params_mut(&mut |idx, tag, t| {
        if result.is_ok() {
            result = take(idx, tag, t);
        }
    });
    stack.visit_state_mut(&mut |idx, tag, t| {
        if result.is_ok() {
            result = take(idx, tag, t);
        }
    });
    result?;
    if !remaining.is_empty() {
        return Err(Error::Checkpoint(format!(
            "unconsumed records: {:?}",
            remaining
                .iter()
                .map(|(i, t, _, _)| format!("{i}.{t}"))
                .collect::<Vec<_>>()
        )));
    }
    Ok(())
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn write_record(buf: &mut Vec<u8>, shape: &[usize], values: &[f64]) {
    buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for d in shape {
        buf.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Checkpoint("bad utf-8".into()))
    }

    fn record(&mut self) -> Result<(Vec<usize>, Vec<f64>)> {
        let ndim = self.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64()? as usize);
        }
        let n = self.u64()? as usize;
        let expected: usize = shape.iter().product();
        if n != expected {
            return Err(Error::Checkpoint("record length mismatch".into()));
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_bits(self.u64()?));
        }
        Ok((shape, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BatchNorm1d, Layer, Linear, Relu};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut stack = LayerStack::new(
            vec![4],
            vec![
                Layer::Linear(Linear::new(4, 5, &mut rng)),
                Layer::Relu(Relu::new()),
                Layer::BatchNorm1d(BatchNorm1d::new(5)),
            ],
        )
        .unwrap();
        // Push the running stats away from their defaults.
        let x = Tensor::randn(vec![16, 4], &mut rng);
        stack.forward_t(&x, &mut rng).unwrap();
        stack.zero_grad();

        let mut ck = Checkpoint::new("deadbeef");
        ck.set_meta("kind", "unit-test");
        ck.stacks.push(("net".into(), stack));
        ck.tensors
            .push(("vec".into(), Tensor::randn(vec![7], &mut rng)));
        ck
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample_checkpoint();
        let bytes = ck.to_bytes();
        let back = Checkpoint::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.config_hash, "deadbeef");
        assert_eq!(back.meta_value("kind"), Some("unit-test"));
        assert_eq!(
            back.stack("net").unwrap().param_checksum(),
            ck.stack("net").unwrap().param_checksum()
        );
        assert_eq!(back.tensor("vec").unwrap(), ck.tensor("vec").unwrap());
    }

    #[test]
    fn truncated_bytes_are_rejected() {
        let bytes = sample_checkpoint().to_bytes();
        let err = Checkpoint::<f64>::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = sample_checkpoint().to_bytes();
        bytes[0] = b'X';
        assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
    }

    #[test]
    fn save_and_load_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let ck = sample_checkpoint();
        ck.save(&path).unwrap();
        let back = Checkpoint::<f64>::load(&path).unwrap();
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }
}
