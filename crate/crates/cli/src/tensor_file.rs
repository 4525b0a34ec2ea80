//! `BDT1` tensor files: magic, dtype byte (0 = f32, 1 = f64), rank byte,
//! little-endian u32 dims, then row-major little-endian elements.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use blockdialect::{Matrix, Scalar};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"BDT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self> {
        let t = TensorFile { dims, data };
        t.validate()?;
        Ok(t)
    }

    pub fn from_matrix<T: Scalar>(m: &Matrix<T>, dtype: Dtype) -> Self {
        let dims = vec![m.rows() as u32, m.cols() as u32];
        let data = match dtype {
            Dtype::F32 => TensorData::F32(m.as_slice().iter().map(|x| x.as_f64() as f32).collect()),
            Dtype::F64 => TensorData::F64(m.as_slice().iter().map(|x| x.as_f64()).collect()),
        };
        TensorFile { dims, data }
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows are all leading dimensions flattened; columns are the last one.
    pub fn matrix_shape(&self) -> (usize, usize) {
        match self.dims.split_last() {
            None => (1, 1),
            Some((&last, lead)) => (lead.iter().map(|&d| d as usize).product(), last as usize),
        }
    }

    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        let (r, c) = self.matrix_shape();
        let data = match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| T::round_from(f64::from(x))).collect(),
            TensorData::F64(v) => v.iter().map(|&x| T::round_from(x)).collect(),
        };
        Matrix::new(r, c, data).expect("validated shape")
    }

    fn validate(&self) -> Result<()> {
        if self.dims.len() > usize::from(u8::MAX) {
            return Err(CliError::Format(format!("rank {} exceeds 255", self.dims.len())));
        }
        let expected = self
            .dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| CliError::Format("element count overflows".into()))?;
        if expected != self.len() {
            return Err(CliError::Format(format!(
                "dims imply {expected} elements, payload has {}",
                self.len()
            )));
        }
        let bad = match &self.data {
            TensorData::F32(v) => v.iter().position(|x| !x.is_finite()),
            TensorData::F64(v) => v.iter().position(|x| !x.is_finite()),
        };
        if let Some(i) = bad {
            return Err(CliError::Format(format!("non-finite element at index {i}")));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u8(self.dtype().code())?;
        w.write_u8(self.dims.len() as u8)?;
        for &d in &self.dims {
            w.write_u32::<LittleEndian>(d)?;
        }
        match &self.data {
            TensorData::F32(v) => v.iter().try_for_each(|&x| w.write_f32::<LittleEndian>(x))?,
            TensorData::F64(v) => v.iter().try_for_each(|&x| w.write_f64::<LittleEndian>(x))?,
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| CliError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(CliError::Format("bad magic, expected BDT1".into()));
        }
        let truncated = |_| CliError::Format("truncated file".into());
        let dtype = r.read_u8().map_err(truncated)?;
        let ndim = r.read_u8().map_err(truncated)?;
        let dims = (0..ndim)
            .map(|_| r.read_u32::<LittleEndian>().map_err(truncated))
            .collect::<Result<Vec<u32>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| CliError::Format("element count overflows".into()))?;
        let elem = match dtype {
            0 => 4,
            1 => 8,
            other => return Err(CliError::Format(format!("unknown dtype {other}"))),
        };
        if r.len() != count * elem {
            return Err(CliError::Format(format!(
                "payload is {} bytes, dims require {}",
                r.len(),
                count * elem
            )));
        }
        let data = if dtype == 0 {
            let mut v = vec![0f32; count];
            r.read_f32_into::<LittleEndian>(&mut v)?;
            TensorData::F32(v)
        } else {
            let mut v = vec![0f64; count];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            TensorData::F64(v)
        };
        TensorFile::new(dims, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
