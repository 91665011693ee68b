//! Binary frame (`TIR1`) and weight (`TWT1`) files. All integers and floats
//! are little-endian; writes go through a temp file and an atomic rename.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GrayFrame, Grid2D, Unit};
use crate::weights::{ParamTensor, WeightStore};

pub const FRAME_MAGIC: &[u8; 4] = b"TIR1";
pub const WEIGHT_MAGIC: &[u8; 4] = b"TWT1";

const KIND_GRAY: u8 = 0;
const KIND_TEMP: u8 = 1;
const FRAME_HEADER: usize = 4 + 1 + 4 + 4 + 4;

/// Contents of one frame file.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameFile {
    /// Raw `u16` gray levels; the ambient temperature travels with the frame.
    Gray(GrayFrame),
    /// `f32` temperatures, °C.
    Temperature { map: Grid2D, t_amb: Option<f32> },
}

impl FrameFile {
    pub fn temperature(map: Grid2D, t_amb: Option<f32>) -> Self {
        Self::Temperature { map, t_amb: t_amb.filter(|t| t.is_finite()) }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Gray(f) => f.dims(),
            Self::Temperature { map, .. } => map.dims(),
        }
    }

    pub fn t_amb(&self) -> Option<f32> {
        match self {
            Self::Gray(f) => f.t_amb(),
            Self::Temperature { t_amb, .. } => *t_amb,
        }
    }

    pub fn into_gray(self) -> Result<GrayFrame> {
        match self {
            Self::Gray(f) => Ok(f),
            Self::Temperature { .. } => Err(Error::Format("expected a gray-level frame, found temperatures".into())),
        }
    }

    pub fn into_temperature(self) -> Result<(Grid2D, Option<f32>)> {
        match self {
            Self::Temperature { map, t_amb } => Ok((map, t_amb)),
            Self::Gray(_) => Err(Error::Format("expected a temperature frame, found gray levels".into())),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (h, w) = self.dims();
        let (kind, sample) = match self {
            Self::Gray(_) => (KIND_GRAY, 2),
            Self::Temperature { .. } => (KIND_TEMP, 4),
        };
        let mut out = Vec::with_capacity(FRAME_HEADER + h * w * sample);
        out.extend_from_slice(FRAME_MAGIC);
        out.push(kind);
        out.extend_from_slice(&(h as u32).to_le_bytes());
        out.extend_from_slice(&(w as u32).to_le_bytes());
        out.extend_from_slice(&self.t_amb().unwrap_or(f32::NAN).to_le_bytes());
        match self {
            Self::Gray(f) => f.levels().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Self::Temperature { map, .. } => map.values().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "frame file");
        if r.take(4)? != FRAME_MAGIC {
            return Err(Error::Format("frame file does not start with TIR1".into()));
        }
        let kind = r.take(1)?[0];
        let h = r.u32()? as usize;
        let w = r.u32()? as usize;
        let t = r.f32()?;
        let t_amb = if t.is_nan() { None } else { Some(t) };
        let n = h.checked_mul(w).ok_or_else(|| Error::Format("frame dims overflow".into()))?;
        let sample = match kind {
            KIND_GRAY => 2,
            KIND_TEMP => 4,
            k => return Err(Error::Format(format!("unknown frame kind {k}"))),
        };
        if r.remaining() != n * sample {
            return Err(Error::Format(format!(
                "{h}x{w} frame needs {} payload bytes, found {}",
                n * sample,
                r.remaining()
            )));
        }
        let fmt = |e: Error| Error::Format(e.to_string());
        if kind == KIND_GRAY {
            let levels = r.rest().chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
            Ok(Self::Gray(GrayFrame::new(h, w, levels, t_amb).map_err(fmt)?))
        } else {
            let values = r.rest().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            Ok(Self::Temperature { map: Grid2D::new(h, w, values, Unit::Celsius).map_err(fmt)?, t_amb })
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&std::fs::read(path)?).map_err(|e| with_path(e, path))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.encode())
    }
}

/// Serialize a weight store in insertion order.
pub fn encode_weights(store: &WeightStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + store.num_values() * 4);
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, p) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(p.dims.len() as u32).to_le_bytes());
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &p.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore> {
    let mut r = Reader::new(bytes, "weight file");
    if r.take(4)? != WEIGHT_MAGIC {
        return Err(Error::Format("weight file does not start with TWT1".into()));
    }
    let count = r.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name =
            std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("weight name is not UTF-8".into()))?.to_owned();
        if store.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate weight `{name}`")));
        }
        let rank = r.u32()? as usize;
        if rank * 4 > r.remaining() {
            return Err(Error::Format(format!("`{name}` declares rank {rank} past the end of the file")));
        }
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n <= r.remaining() / 4)
            .ok_or_else(|| Error::Format(format!("`{name}` dims {dims:?} exceed the payload")))?;
        let values = r.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        store.insert(name, ParamTensor::new(dims, values)?);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after the last weight", r.remaining())));
    }
    Ok(store)
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    decode_weights(&std::fs::read(path)?).map_err(|e| with_path(e, path))
}

pub fn write_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_weights(store))
}

/// Write `bytes` next to `path` and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format(format!("{} truncated at byte {}", self.what, self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_bits(self.u32()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout() {
        let f = FrameFile::Gray(GrayFrame::new(1, 2, vec![1, 258], Some(20.0)).unwrap());
        let b = f.encode();
        assert_eq!(&b[..5], b"TIR1\0");
        assert_eq!(&b[5..13], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[13..17], &20.0f32.to_le_bytes());
        assert_eq!(&b[17..], &[1, 0, 2, 1]);
        assert_eq!(FrameFile::decode(&b).unwrap(), f);
        let t = FrameFile::temperature(Grid2D::filled(2, 2, 1.5, Unit::Celsius), None);
        let tb = t.encode();
        assert!(f32::from_le_bytes(tb[13..17].try_into().unwrap()).is_nan());
        assert_eq!(FrameFile::decode(&tb).unwrap(), t);
    }

    #[test]
    fn malformed_frames_are_rejected() {
        let b = FrameFile::Gray(GrayFrame::new(2, 2, vec![0; 4], None).unwrap()).encode();
        assert!(FrameFile::decode(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(FrameFile::decode(&bad).is_err());
        bad = b.clone();
        bad[4] = 7;
        assert!(FrameFile::decode(&bad).is_err());
        assert!(FrameFile::decode(&b[..10]).is_err());
    }

    #[test]
    fn weights_round_trip_through_disk() {
        let mut s = WeightStore::new();
        s.insert("conv.weight", ParamTensor::new(vec![2, 1, 1, 1], vec![0.5, -0.25]).unwrap());
        s.insert("scalar", ParamTensor::new(vec![], vec![3.0]).unwrap());
        s.set_meta("scale", 2.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.twt");
        write_weights(&s, &p).unwrap();
        assert_eq!(read_weights(&p).unwrap(), s);
        let b = encode_weights(&s);
        assert!(decode_weights(&b[..b.len() - 2]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(decode_weights(&extra).is_err());
    }
}
