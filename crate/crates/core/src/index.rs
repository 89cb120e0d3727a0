//! Per-vcell Bloom filters and the `.vcbf` index file.
//!
//! All filters in an index share one parameter set, so a query id is hashed
//! once and probed against every cell.
//!
//! File layout, little-endian:
//!
//! | field        | type          |
//! |--------------|---------------|
//! | magic        | `b"VCBF"`     |
//! | version      | u8 = 1        |
//! | m            | u64           |
//! | k            | u32           |
//! | seed0, seed1 | u64, u64      |
//! | cell_count   | u32           |
//! | per cell     | u32 vcell_id, f64 lat, f64 lon, u32 n, `ceil(m/8)` bytes of bits |
//! | crc          | u32 CRC32C of every preceding byte |

use crate::bloom::{size_for, BloomFilter, BloomParams, DEFAULT_SEEDS};
use crate::error::{Error, Result};
use crate::scan::GeoPoint;
use crate::vcell::VcellList;

pub const MAGIC: &[u8; 4] = b"VCBF";
pub const VERSION: u8 = 1;

const HEADER_LEN: usize = 4 + 1 + 8 + 4 + 8 + 8 + 4;
const CELL_HEADER_LEN: usize = 4 + 8 + 8 + 4;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub vcell_id: u32,
    pub anchor: GeoPoint,
    /// Number of APs inserted.
    pub n: u32,
    pub filter: BloomFilter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VcellIndex {
    pub params: BloomParams,
    pub entries: Vec<IndexEntry>,
}

/// How filter parameters are chosen when building an index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IndexPolicy {
    Fixed(BloomParams),
    /// Size every filter for the largest cell so all meet `p`.
    TargetP {
        p: f64,
        seeds: [u64; 2],
    },
}

impl IndexPolicy {
    pub fn target_p(p: f64) -> Self {
        IndexPolicy::TargetP {
            p,
            seeds: DEFAULT_SEEDS,
        }
    }
}

pub fn build_index(vcells: &VcellList, policy: IndexPolicy) -> Result<VcellIndex> {
    if vcells.cells.is_empty() {
        return Err(Error::EmptyVcellList);
    }
    if let Some(cell) = vcells.cells.iter().find(|c| c.aps.is_empty()) {
        return Err(Error::EmptyCell(cell.vcell_id));
    }
    let params = match policy {
        IndexPolicy::Fixed(p) => p,
        IndexPolicy::TargetP { p, seeds } => {
            let n_max = vcells.cells.iter().map(|c| c.aps.len()).max().unwrap_or(1);
            size_for(n_max as u64, p)?.with_seeds(seeds)
        }
    };
    let entries = vcells
        .cells
        .iter()
        .map(|cell| {
            let mut filter = BloomFilter::new(params);
            for id in &cell.aps {
                filter.insert(id);
            }
            IndexEntry {
                vcell_id: cell.vcell_id,
                anchor: cell.anchor,
                n: cell.aps.len() as u32,
                filter,
            }
        })
        .collect();
    Ok(VcellIndex { params, entries })
}

impl VcellIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cell_len = CELL_HEADER_LEN + self.params.byte_len();
        let mut out = Vec::with_capacity(HEADER_LEN + self.entries.len() * cell_len + 4);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.params.m().to_le_bytes());
        out.extend_from_slice(&self.params.k().to_le_bytes());
        for seed in self.params.seeds() {
            out.extend_from_slice(&seed.to_le_bytes());
        }
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.vcell_id.to_le_bytes());
            out.extend_from_slice(&e.anchor.lat.to_le_bytes());
            out.extend_from_slice(&e.anchor.lon.to_le_bytes());
            out.extend_from_slice(&e.n.to_le_bytes());
            out.extend_from_slice(e.filter.bits());
        }
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 5 {
            return Err(Error::Truncated("version"));
        }
        if bytes[4] != VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::Truncated("header"));
        }

        let mut r = Reader { buf: bytes, pos: 5 };
        let m = r.u64()?;
        let k = r.u32()?;
        let seeds = [r.u64()?, r.u64()?];
        let cell_count = r.u32()? as usize;

        let byte_len = m.div_ceil(8);
        let expected = (CELL_HEADER_LEN as u64)
            .checked_add(byte_len)
            .and_then(|c| c.checked_mul(cell_count as u64))
            .and_then(|b| b.checked_add(HEADER_LEN as u64 + 4));
        match expected {
            Some(len) if (bytes.len() as u64) < len => return Err(Error::Truncated("cells")),
            None => return Err(Error::Truncated("cells")),
            _ => {}
        }

        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32c::crc32c(body);
        if stored != computed || expected != Some(bytes.len() as u64) {
            return Err(Error::Checksum { stored, computed });
        }

        let params = BloomParams::new(m, k, seeds)?;
        let mut entries = Vec::with_capacity(cell_count);
        for _ in 0..cell_count {
            let vcell_id = r.u32()?;
            let lat = r.f64()?;
            let lon = r.f64()?;
            let n = r.u32()?;
            let bits = r.take(params.byte_len())?.to_vec();
            entries.push(IndexEntry {
                vcell_id,
                anchor: GeoPoint::new(lat, lon)?,
                n,
                filter: BloomFilter::from_parts(params, bits, n as u64)?,
            });
        }
        Ok(VcellIndex { params, entries })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(Error::Truncated("field"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::fp_rate;
    use crate::scan::ApId;
    use crate::vcell::{CellCondition, Vcell};

    fn list(sizes: &[u32]) -> VcellList {
        let mut next = 0u32;
        let cells = sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| {
                let aps = (0..size)
                    .map(|_| {
                        next += 1;
                        let b = next.to_be_bytes();
                        ApId::from_octets([2, 0, b[0], b[1], b[2], b[3]])
                    })
                    .collect();
                Vcell {
                    vcell_id: i as u32,
                    first_seq: i as u32,
                    last_seq: i as u32,
                    anchor: GeoPoint::new(8.5 + i as f64 * 1e-3, -71.1).unwrap(),
                    aps,
                    scans: Vec::new(),
                }
            })
            .collect();
        VcellList {
            trace_id: "idx".into(),
            cc: CellCondition::new(0.3).unwrap(),
            cells,
        }
    }

    #[test]
    fn single_cell_index() {
        let l = list(&[3]);
        let params = BloomParams::new(256, 4, DEFAULT_SEEDS).unwrap();
        let idx = build_index(&l, IndexPolicy::Fixed(params)).unwrap();
        assert_eq!(idx.entries.len(), 1);
        assert_eq!(idx.entries[0].n, 3);
        assert!(l.cells[0]
            .aps
            .iter()
            .all(|a| idx.entries[0].filter.contains(a)));
    }

    #[test]
    fn target_policy_covers_every_cell() {
        let l = list(&[5, 40, 12, 80, 3, 19, 27, 64, 8, 50]);
        let idx = build_index(&l, IndexPolicy::target_p(0.005)).unwrap();
        for e in &idx.entries {
            assert!(fp_rate(idx.params.m(), e.n as u64, idx.params.k()) <= 0.005 * 1.1);
        }
        // sized for n_max = 80
        assert!(fp_rate(idx.params.m(), 80, idx.params.k()) <= 0.0055);
        assert!(fp_rate(idx.params.m(), 5, idx.params.k()) < 1e-6);
    }

    #[test]
    fn rejects_empty_inputs() {
        let mut l = list(&[]);
        assert!(matches!(
            build_index(&l, IndexPolicy::target_p(0.01)),
            Err(Error::EmptyVcellList)
        ));
        l = list(&[2, 0]);
        assert!(matches!(
            build_index(&l, IndexPolicy::target_p(0.01)),
            Err(Error::EmptyCell(1))
        ));
    }

    #[test]
    fn file_round_trip_and_layout() {
        let idx = build_index(&list(&[4, 9, 2]), IndexPolicy::target_p(0.01)).unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..4], b"VCBF");
        assert_eq!(bytes[4], 1);
        let len = HEADER_LEN + 3 * (CELL_HEADER_LEN + idx.params.byte_len()) + 4;
        assert_eq!(bytes.len(), len);
        assert_eq!(VcellIndex::from_bytes(&bytes).unwrap(), idx);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let idx = build_index(&list(&[4, 9]), IndexPolicy::target_p(0.01)).unwrap();
        let bytes = idx.to_bytes();

        let mut flipped = bytes.clone();
        let payload = bytes.len() - 6;
        flipped[payload] ^= 0x01;
        assert!(matches!(
            VcellIndex::from_bytes(&flipped),
            Err(Error::Checksum { .. })
        ));

        let mut v255 = bytes.clone();
        v255[4] = 255;
        assert!(matches!(
            VcellIndex::from_bytes(&v255),
            Err(Error::UnsupportedVersion(255))
        ));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            VcellIndex::from_bytes(&magic),
            Err(Error::BadMagic)
        ));

        assert!(matches!(
            VcellIndex::from_bytes(&bytes[..20]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(
            VcellIndex::from_bytes(&bytes[..bytes.len() - 10]),
            Err(Error::Truncated(_))
        ));

        let mut long = bytes.clone();
        long.push(0);
        assert!(VcellIndex::from_bytes(&long).is_err());
    }
}
