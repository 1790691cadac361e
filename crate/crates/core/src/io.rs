//! Binary grid dumps.
//!
//! Layout, all little-endian: magic `FRLB`, u32 version, u32 n, u32 cells per
//! axis, then the node values in row-major order (f64 for fields, one byte
//! 0/1 for masks). Slab fields insert u32 J and the J+1 y-nodes after the
//! header.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::extension::{ExtensionField, SlabGrid};
use crate::grid::{BoxGrid, ThinDomain};

pub const MAGIC: &[u8; 4] = b"FRLB";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub n: u32,
    pub cells: u32,
}

impl Header {
    pub fn of(grid: &BoxGrid) -> Self {
        Self { n: grid.n() as u32, cells: grid.cells() as u32 }
    }

    pub fn node_count(&self) -> usize {
        (self.cells as usize + 1).pow(self.n)
    }

    /// Compatibility error unless the header describes `grid`.
    pub fn check(&self, grid: &BoxGrid, what: &str) -> Result<()> {
        if *self != Self::of(grid) {
            return Err(Error::Compat(format!(
                "{what}: header n={}, cells={} but the grid has n={}, cells={}",
                self.n,
                self.cells,
                grid.n(),
                grid.cells()
            )));
        }
        Ok(())
    }
}

fn put_header(buf: &mut Vec<u8>, h: Header) {
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&h.n.to_le_bytes());
    buf.extend_from_slice(&h.cells.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Format(format!("file truncated at byte {}", self.bytes.len())));
        }
        let out = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, k: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * k)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn header(&mut self) -> Result<Header> {
        if self.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a grid dump".into()));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::Format(format!("unsupported dump version {v}")));
        }
        let n = self.u32()?;
        let cells = self.u32()?;
        if !(n == 1 || n == 2) || cells == 0 {
            return Err(Error::Format(format!("invalid header n={n}, cells={cells}")));
        }
        Ok(Header { n, cells })
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_field(grid: &BoxGrid, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != grid.node_count() {
        return Err(Error::DimensionMismatch { expected: grid.node_count(), found: values.len() });
    }
    let mut buf = Vec::with_capacity(16 + 8 * values.len());
    put_header(&mut buf, Header::of(grid));
    values.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    Ok(buf)
}

pub fn decode_field(bytes: &[u8]) -> Result<(Header, Vec<f64>)> {
    let mut r = Reader { bytes, pos: 0 };
    let h = r.header()?;
    let values = r.f64s(h.node_count())?;
    r.finish()?;
    Ok((h, values))
}

pub fn encode_mask(mask: &ThinDomain) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + mask.mask().len());
    put_header(&mut buf, Header::of(mask.grid()));
    buf.extend(mask.mask().iter().map(|&b| b as u8));
    buf
}

pub fn decode_mask(bytes: &[u8]) -> Result<(Header, Vec<bool>)> {
    let mut r = Reader { bytes, pos: 0 };
    let h = r.header()?;
    let raw = r.take(h.node_count())?;
    r.finish()?;
    raw.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Format(format!("mask byte {b} is not 0/1"))),
        })
        .collect::<Result<Vec<bool>>>()
        .map(|m| (h, m))
}

pub fn encode_slab_field(field: &ExtensionField) -> Vec<u8> {
    let slab = field.slab();
    let mut buf = Vec::with_capacity(24 + 8 * (slab.y().len() + field.values().len()));
    put_header(&mut buf, Header::of(slab.base()));
    buf.extend_from_slice(&(slab.layers() as u32).to_le_bytes());
    slab.y().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    field.values().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    buf
}

/// Header, y-nodes and values of a slab dump.
pub fn decode_slab_field(bytes: &[u8]) -> Result<(Header, Vec<f64>, Vec<f64>)> {
    let mut r = Reader { bytes, pos: 0 };
    let h = r.header()?;
    let j = r.u32()? as usize;
    let y = r.f64s(j + 1)?;
    let values = r.f64s(h.node_count() * (j + 1))?;
    r.finish()?;
    Ok((h, y, values))
}

/// Rebuild a mask on `grid`, checking the header.
pub fn read_mask(path: &Path, grid: &BoxGrid) -> Result<ThinDomain> {
    let (h, m) = decode_mask(&fs::read(path)?)?;
    h.check(grid, &path.display().to_string())?;
    ThinDomain::new(grid.clone(), m)
}

pub fn read_field(path: &Path, grid: &BoxGrid) -> Result<Vec<f64>> {
    let (h, v) = decode_field(&fs::read(path)?)?;
    h.check(grid, &path.display().to_string())?;
    Ok(v)
}

/// Slab dumps carry their own y-nodes; the slab must match them.
pub fn read_slab_field(path: &Path, slab: &SlabGrid) -> Result<ExtensionField> {
    let (h, y, v) = decode_slab_field(&fs::read(path)?)?;
    h.check(slab.base(), &path.display().to_string())?;
    if y != slab.y() {
        return Err(Error::Compat(format!("{}: y-nodes differ from the slab", path.display())));
    }
    ExtensionField::from_values(slab.clone(), v)
}

/// Write via a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Parameter(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::FracParams;

    #[test]
    fn field_round_trip() {
        let g = BoxGrid::new(2, 0.0, 1.0, 4).unwrap();
        let v: Vec<f64> = (0..g.node_count()).map(|i| i as f64 * 0.1 - 1.0).collect();
        let bytes = encode_field(&g, &v).unwrap();
        assert_eq!(&bytes[..4], b"FRLB");
        assert_eq!(bytes.len(), 16 + 8 * 25);
        let (h, back) = decode_field(&bytes).unwrap();
        assert_eq!(h, Header { n: 2, cells: 4 });
        assert_eq!(back, v);
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let other = BoxGrid::new(2, 0.0, 1.0, 8).unwrap();
        assert!(matches!(h.check(&other, "x"), Err(Error::Compat(_))));
    }

    #[test]
    fn mask_round_trip() {
        let g = BoxGrid::new(1, -2.0, 2.0, 16).unwrap();
        let m = ThinDomain::interval(g, -1.0, 1.0);
        let bytes = encode_mask(&m);
        let (_, back) = decode_mask(&bytes).unwrap();
        assert_eq!(back, m.mask());
        let mut bad = bytes.clone();
        bad[20] = 7;
        assert!(matches!(decode_mask(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn slab_round_trip() {
        let p = FracParams::new(1, 0.4, 1.0).unwrap();
        let slab = SlabGrid::graded(BoxGrid::new(1, -1.0, 1.0, 8).unwrap(), 4, 2.0, &p).unwrap();
        let f = ExtensionField::from_fn(slab.clone(), |x, y| x[0] + y);
        let (h, y, v) = decode_slab_field(&encode_slab_field(&f)).unwrap();
        assert_eq!(h.cells, 8);
        assert_eq!(y, slab.y());
        assert_eq!(v, f.values());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a").join("f.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
