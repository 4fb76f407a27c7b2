//! Named parameter collections and the MOCO weights file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MOCO" | version u8 = 1 | count u32
//! per tensor: name_len u16 | name (UTF-8) | rank u8 | dims u32 * rank | f32 * prod(dims)
//! ```

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::ndauto::{Tape, Tensor, Var};
use crate::scalar::Scalar;

pub const MOCO_MAGIC: [u8; 4] = *b"MOCO";
pub const MOCO_VERSION: u8 = 1;

/// Ordered map from parameter name to tensor. Names are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore<T> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> WeightStore<T> {
    pub fn new() -> Self {
        Self { tensors: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors.get(name).ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors.get_mut(name).ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalars.
    pub fn param_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors.values().map(|t| t.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> WeightStore<U> {
        WeightStore { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    /// Records every tensor on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Bound {
        let vars = self.tensors.iter().map(|(k, v)| (k.clone(), tape.leaf(v.clone(), requires_grad))).collect();
        Bound { vars }
    }

    /// Errors unless every `(name, dims)` is present with exactly those dims.
    pub fn check_shapes<'a>(&self, expected: impl IntoIterator<Item = (&'a str, &'a [usize])>) -> Result<()> {
        for (name, dims) in expected {
            let t = self.get(name)?;
            if t.dims() != dims {
                return Err(Error::Shape {
                    op: "weights",
                    detail: format!("`{name}` has dims {:?}, expected {dims:?}", t.dims()),
                });
            }
        }
        Ok(())
    }

    /// Serializes to MOCO bytes. Values are stored as `f32`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.is_empty() {
            return Err(Error::InvalidArgument { op: "weights save", detail: "store is empty".into() });
        }
        let mut out = Vec::with_capacity(9 + self.param_count() * 4);
        out.extend_from_slice(&MOCO_MAGIC);
        out.push(MOCO_VERSION);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| Error::InvalidArgument {
                op: "weights save",
                detail: format!("name `{name}` longer than 65535 bytes"),
            })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(bytes);
            out.push(t.rank() as u8);
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MOCO_MAGIC {
            return Err(Error::Format { what: "bad magic".into(), offset: 0 });
        }
        let version = r.u8("version")?;
        if version != MOCO_VERSION {
            return Err(Error::Format { what: format!("unsupported version {version}"), offset: 4 });
        }
        let count = r.u32("tensor count")?;
        let mut store = Self::new();
        for _ in 0..count {
            let name_at = r.pos as u64;
            let len = r.u16("name length")? as usize;
            let raw = r.take(len, "name")?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::Format { what: "name is not UTF-8".into(), offset: name_at + 2 })?
                .to_string();
            let rank = r.u8("rank")? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32("dim")? as usize);
            }
            let data_at = r.pos as u64;
            let n: usize = dims.iter().product();
            if rank == 0 || n == 0 {
                return Err(Error::Format { what: format!("empty tensor `{name}`"), offset: data_at });
            }
            let raw = r.take(n * 4, "tensor data")?;
            let data: Vec<T> = raw
                .chunks_exact(4)
                .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
                .collect();
            let t = Tensor::new(&dims, data)
                .map_err(|_| Error::Format { what: format!("non-finite value in `{name}`"), offset: data_at })?;
            if store.contains(&name) {
                return Err(Error::Format { what: format!("duplicate tensor name `{name}`"), offset: name_at });
            }
            store.insert(name, t)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Format { what: "trailing bytes".into(), offset: r.pos as u64 });
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format { what: format!("truncated {what}"), offset: self.pos as u64 });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Tape handles of a bound [`WeightStore`], by name.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Builds a [`Bound`] from handles recorded elsewhere, e.g. gradient-check leaves.
impl FromIterator<(String, Var)> for Bound {
    fn from_iter<I: IntoIterator<Item = (String, Var)>>(iter: I) -> Self {
        Bound { vars: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn byte_fixture() {
        let mut s = WeightStore::<f32>::new();
        s.insert("w", Tensor::new(&[3, 2], vec![1.0, -2.0, 0.5, 0.0, 3.25, -0.125]).unwrap()).unwrap();
        let mut want: Vec<u8> = vec![0x4D, 0x4F, 0x43, 0x4F, 0x01, 1, 0, 0, 0, 1, 0, b'w', 2, 3, 0, 0, 0, 2, 0, 0, 0];
        for bits in [0x3F80_0000u32, 0xC000_0000, 0x3F00_0000, 0x0000_0000, 0x4050_0000, 0xBE00_0000] {
            want.extend_from_slice(&bits.to_le_bytes());
        }
        assert_eq!(s.to_bytes().unwrap(), want);
        assert_eq!(WeightStore::<f32>::from_bytes(&want).unwrap(), s);
    }

    #[test]
    fn round_trip_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = WeightStore::<f32>::new();
        s.insert("a.weight", Tensor::randn(&[4, 3, 3, 3], 1.0, &mut rng)).unwrap();
        s.insert("a.bias", Tensor::randn(&[4], 1.0, &mut rng)).unwrap();
        s.insert("fc", Tensor::randn(&[2, 7], 1e-30, &mut rng)).unwrap();
        let back = WeightStore::<f32>::from_bytes(&s.to_bytes().unwrap()).unwrap();
        let names: Vec<_> = back.names().collect();
        assert_eq!(names, ["a.weight", "a.bias", "fc"]);
        for ((_, x), (_, y)) in s.iter().zip(back.iter()) {
            let xb: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn bad_magic() {
        let err = WeightStore::<f32>::from_bytes(b"XXXX\x01\0\0\0\0").unwrap_err();
        assert_eq!(err.to_string(), "bad magic at offset 0");
    }

    #[test]
    fn truncation_and_version_report_offsets() {
        let mut s = WeightStore::<f32>::new();
        s.insert("w", Tensor::zeros(&[2])).unwrap();
        let bytes = s.to_bytes().unwrap();
        let err = WeightStore::<f32>::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        assert_eq!(err.to_string(), "truncated tensor data at offset 17");
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert_eq!(WeightStore::<f32>::from_bytes(&v2).unwrap_err().to_string(), "unsupported version 2 at offset 4");
    }

    #[test]
    fn duplicate_names() {
        let mut s = WeightStore::<f32>::new();
        s.insert("w", Tensor::zeros(&[1])).unwrap();
        assert!(matches!(s.insert("w", Tensor::zeros(&[1])), Err(Error::DuplicateName(_))));
        let one = s.to_bytes().unwrap();
        // splice the same record in twice and bump the count
        let mut two = one.clone();
        two.extend_from_slice(&one[9..]);
        two[5] = 2;
        let err = WeightStore::<f32>::from_bytes(&two).unwrap_err();
        assert_eq!(err.to_string(), "duplicate tensor name `w` at offset 21");
    }

    #[test]
    fn check_shapes_reports_name() {
        let mut s = WeightStore::<f32>::new();
        s.insert("w", Tensor::zeros(&[2, 2])).unwrap();
        assert!(s.check_shapes([("w", &[2usize, 2][..])]).is_ok());
        assert!(s.check_shapes([("w", &[4usize][..])]).unwrap_err().to_string().contains("`w`"));
        assert!(matches!(s.check_shapes([("v", &[1usize][..])]), Err(Error::MissingWeight(_))));
    }
}
