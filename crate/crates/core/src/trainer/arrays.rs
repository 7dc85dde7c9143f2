//! Named little-endian arrays, the payload encoding shared by the dataset
//! container and checkpoints.
//!
//! Per array: u16 name length, UTF-8 name, u8 dtype (0 = f64, 1 = i64),
//! u8 rank, rank × u64 shape, then the raw little-endian values.

use std::io::{self, Write};

use crate::error::{Error, Result};

pub const DTYPE_F64: u8 = 0;
pub const DTYPE_I64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayValues {
    F64(Vec<f64>),
    I64(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub name: String,
    pub shape: Vec<u64>,
    pub values: ArrayValues,
}

impl Array {
    pub fn f64(name: impl Into<String>, shape: Vec<u64>, values: Vec<f64>) -> Self {
        Array {
            name: name.into(),
            shape,
            values: ArrayValues::F64(values),
        }
    }

    pub fn i64(name: impl Into<String>, shape: Vec<u64>, values: Vec<i64>) -> Self {
        Array {
            name: name.into(),
            shape,
            values: ArrayValues::I64(values),
        }
    }

    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let name = self.name.as_bytes();
        out.write_all(&(name.len() as u16).to_le_bytes())?;
        out.write_all(name)?;
        let dtype = match self.values {
            ArrayValues::F64(_) => DTYPE_F64,
            ArrayValues::I64(_) => DTYPE_I64,
        };
        out.write_all(&[dtype, self.shape.len() as u8])?;
        for s in &self.shape {
            out.write_all(&s.to_le_bytes())?;
        }
        match &self.values {
            ArrayValues::F64(v) => {
                for x in v {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
            ArrayValues::I64(v) => {
                for x in v {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match &self.values {
            ArrayValues::F64(v) => Ok(v),
            ArrayValues::I64(_) => Err(Error::Shape(format!("array `{}` must be f64", self.name))),
        }
    }

    pub fn as_i64(&self) -> Result<&[i64]> {
        match &self.values {
            ArrayValues::I64(v) => Ok(v),
            ArrayValues::F64(_) => Err(Error::Shape(format!("array `{}` must be i64", self.name))),
        }
    }
}

/// Location of one array inside a byte buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayHeader {
    pub name: String,
    pub dtype: u8,
    pub shape: Vec<u64>,
    /// Byte offset of the first value.
    pub offset: usize,
    pub len: usize,
}

impl ArrayHeader {
    pub fn f64_at(&self, bytes: &[u8], index: usize) -> f64 {
        let o = self.offset + 8 * index;
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    }

    pub fn i64_at(&self, bytes: &[u8], index: usize) -> i64 {
        let o = self.offset + 8 * index;
        i64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    }

    pub fn decode(&self, bytes: &[u8]) -> Array {
        let values = match self.dtype {
            DTYPE_F64 => ArrayValues::F64((0..self.len).map(|k| self.f64_at(bytes, k)).collect()),
            _ => ArrayValues::I64((0..self.len).map(|k| self.i64_at(bytes, k)).collect()),
        };
        Array {
            name: self.name.clone(),
            shape: self.shape.clone(),
            values,
        }
    }
}

/// Reads `count` array headers starting at `pos`, checking that every
/// payload lies inside `bytes`.
pub fn scan_headers(bytes: &[u8], mut pos: usize, count: usize) -> Result<Vec<ArrayHeader>> {
    let take = |pos: &mut usize, n: usize, what: &str| -> Result<usize> {
        if *pos + n > bytes.len() {
            return Err(Error::Truncated(format!("{what} at byte {pos}")));
        }
        let start = *pos;
        *pos += n;
        Ok(start)
    };
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let at = take(&mut pos, 2, "array name length")?;
        let name_len = u16::from_le_bytes([bytes[at], bytes[at + 1]]) as usize;
        let at = take(&mut pos, name_len, "array name")?;
        let name = std::str::from_utf8(&bytes[at..at + name_len])
            .map_err(|_| Error::Corrupt("array name is not UTF-8".into()))?
            .to_string();
        let at = take(&mut pos, 2, "dtype and rank")?;
        let (dtype, rank) = (bytes[at], bytes[at + 1] as usize);
        if dtype != DTYPE_F64 && dtype != DTYPE_I64 {
            return Err(Error::Corrupt(format!("array `{name}` has unknown dtype {dtype}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let at = take(&mut pos, 8, "shape")?;
            shape.push(u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        }
        let len = shape
            .iter()
            .try_fold(1u64, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::Corrupt(format!("array `{name}` shape overflows")))?
            as usize;
        let byte_len = len
            .checked_mul(8)
            .ok_or_else(|| Error::Corrupt(format!("array `{name}` is too large")))?;
        let offset = take(&mut pos, byte_len, &format!("array `{name}` data"))?;
        headers.push(ArrayHeader {
            name,
            dtype,
            shape,
            offset,
            len,
        });
    }
    if pos != bytes.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after the last array",
            bytes.len() - pos
        )));
    }
    Ok(headers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn arrays_round_trip(values in prop::collection::vec(any::<f64>(), 0..40),
                             ints in prop::collection::vec(any::<i64>(), 0..40)) {
            let a = Array::f64("pos", vec![values.len() as u64], values.clone());
            let b = Array::i64("z", vec![1, ints.len() as u64], ints.clone());
            let mut buf = Vec::new();
            a.write(&mut buf).unwrap();
            b.write(&mut buf).unwrap();
            let headers = scan_headers(&buf, 0, 2).unwrap();
            let a2 = headers[0].decode(&buf);
            let b2 = headers[1].decode(&buf);
            let got: Vec<u64> = a2.as_f64().unwrap().iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, want);
            prop_assert_eq!(b2, b);
        }
    }

    #[test]
    fn truncation_is_detected() {
        let mut buf = Vec::new();
        Array::f64("energy", vec![3], vec![1.0, 2.0, 3.0]).write(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(scan_headers(&buf, 0, 1), Err(Error::Truncated(_))));
    }
}
