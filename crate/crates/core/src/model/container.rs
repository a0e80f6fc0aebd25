//! Self-describing array container used for checkpoints and data shards.
//!
//! Layout:
//!
//! ```text
//! PADENET-CONTAINER\n
//! version=1\n
//! <key>=<value>\n ...          plain-text header, one pair per line
//! \n                           blank line ends the header
//! u32  array count
//! per array (name table):
//!   u16 name length, name bytes (UTF-8)
//!   u8  dtype (0 = f64, 1 = u8, 2 = u32)
//!   u8  rank, then rank x u64 extents
//! array payloads in table order, little-endian
//! u64  FNV-1a checksum of everything after the blank line
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &str = "PADENET-CONTAINER";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    U8(Vec<u8>),
    U32(Vec<u32>),
}

impl ArrayData {
    fn dtype(&self) -> u8 {
        match self {
            ArrayData::F64(_) => 0,
            ArrayData::U8(_) => 1,
            ArrayData::U32(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::F64(v) => v.len(),
            ArrayData::U8(v) => v.len(),
            ArrayData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub header: Vec<(String, String)>,
    pub arrays: Vec<NamedArray>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Load(format!("corrupt container: {}", msg.into()))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("unexpected end of data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.header.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.header.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: ArrayData) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(format!(
                "array '{name}' has {} values for shape {shape:?}",
                data.len()
            )));
        }
        if name.len() > u16::MAX as usize {
            return Err(Error::shape("array name too long"));
        }
        self.arrays.push(NamedArray {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{MAGIC}\nversion={FORMAT_VERSION}\n").into_bytes();
        for (k, v) in &self.header {
            if k.contains(['=', '\n']) || v.contains('\n') || k.is_empty() {
                return Err(Error::config(format!("invalid header entry '{k}={v}'")));
            }
            out.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        out.push(b'\n');
        let body_start = out.len();

        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u16).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.push(a.data.dtype());
            out.push(a.shape.len() as u8);
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
        for a in &self.arrays {
            match &a.data {
                ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                ArrayData::U8(v) => out.extend_from_slice(v),
                ArrayData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        let checksum = fnv1a(&out[body_start..]);
        out.extend_from_slice(&checksum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        // Header: text lines up to the first empty line.
        let mut header = Vec::new();
        let mut pos = 0;
        let mut first = true;
        loop {
            let rel = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| corrupt("unterminated header"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + rel])
                .map_err(|_| corrupt("header is not UTF-8"))?;
            pos += rel + 1;
            if first {
                if line != MAGIC {
                    return Err(corrupt("bad magic line"));
                }
                first = false;
                continue;
            }
            if line.is_empty() {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("header line without '=': {line}")))?;
            header.push((k.to_string(), v.to_string()));
        }
        let version = header
            .iter()
            .find(|(k, _)| k == "version")
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| corrupt("missing version"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(Error::Load(format!(
                "unsupported container version {version}, expected {FORMAT_VERSION}"
            )));
        }
        header.retain(|(k, _)| k != "version");

        if bytes.len() < pos + 8 {
            return Err(corrupt("missing checksum"));
        }
        let body = &bytes[pos..bytes.len() - 8];
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        if fnv1a(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Reader { bytes: body, pos: 0 };
        let count = r.u32()? as usize;
        let mut table = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| corrupt("array name is not UTF-8"))?
                .to_string();
            let dtype = r.u8()?;
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(usize::try_from(r.u64()?).map_err(|_| corrupt("extent overflow"))?);
            }
            table.push((name, dtype, shape));
        }
        let mut arrays = Vec::with_capacity(table.len());
        for (name, dtype, shape) in table {
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt("extent overflow"))?;
            let data = match dtype {
                0 => ArrayData::F64(
                    r.take(n.checked_mul(8).ok_or_else(|| corrupt("size overflow"))?)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                1 => ArrayData::U8(r.take(n)?.to_vec()),
                2 => ArrayData::U32(
                    r.take(n.checked_mul(4).ok_or_else(|| corrupt("size overflow"))?)?
                        .chunks_exact(4)
                        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                other => return Err(corrupt(format!("unknown dtype {other}"))),
            };
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes after arrays"));
        }
        Ok(Self { header, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::new();
        c.set("kind", "test");
        c.set("note", "a b c");
        c.push("w", &[2, 2], ArrayData::F64(vec![1.5, -0.0, f64::MIN_POSITIVE, 3e300]))
            .unwrap();
        c.push("labels", &[3], ArrayData::U8(vec![0, 7, 3])).unwrap();
        c.push("ids", &[1], ArrayData::U32(vec![u32::MAX])).unwrap();
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.header, c.header);
        match (&back.array("w").unwrap().data, &c.array("w").unwrap().data) {
            (ArrayData::F64(a), ArrayData::F64(b)) => {
                assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
            }
            _ => panic!("dtype changed"),
        }
        assert_eq!(back, c);
    }

    #[test]
    fn detects_corruption() {
        let bytes = sample().to_bytes().unwrap();
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 20] ^= 0x40;
        assert!(matches!(Container::from_bytes(&flipped), Err(Error::Load(_))));
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Container::from_bytes(b"NOT-A-CONTAINER\n\n").is_err());
    }

    #[test]
    fn rejects_other_versions() {
        let bytes = sample().to_bytes().unwrap();
        let text = String::from_utf8_lossy(&bytes).replacen("version=1", "version=9", 1);
        let err = Container::from_bytes(text.as_bytes());
        // Lossy conversion may also break the payload; either way it must fail.
        assert!(err.is_err());
        let mut patched = bytes.clone();
        let at = MAGIC.len() + 1 + "version=".len();
        patched[at] = b'9';
        assert!(matches!(Container::from_bytes(&patched), Err(Error::Load(m)) if m.contains("version")));
    }

    #[test]
    fn shape_checked_on_push() {
        let mut c = Container::new();
        assert!(c.push("x", &[3], ArrayData::F64(vec![1.0])).is_err());
    }
}
