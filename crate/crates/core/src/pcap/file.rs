//! Classic libpcap file format (not pcapng).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
pub const MAGIC_NANOS: u32 = 0xa1b2_3c4d;
const MAGIC_PCAPNG: u32 = 0x0a0d_0d0a;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;
pub const LINKTYPE_ETHERNET: u32 = 1;

const DEFAULT_SNAPLEN: u32 = 262_144;
/// Refuse records claiming more than this many captured bytes.
const MAX_RECORD_LEN: u32 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endian {
    Little,
    Big,
}

impl Endian {
    pub fn native() -> Self {
        if cfg!(target_endian = "big") {
            Endian::Big
        } else {
            Endian::Little
        }
    }

    fn read_u32(self, b: &[u8]) -> u32 {
        let arr: [u8; 4] = b[..4].try_into().unwrap();
        match self {
            Endian::Little => u32::from_le_bytes(arr),
            Endian::Big => u32::from_be_bytes(arr),
        }
    }

    fn read_u16(self, b: &[u8]) -> u16 {
        let arr: [u8; 2] = b[..2].try_into().unwrap();
        match self {
            Endian::Little => u16::from_le_bytes(arr),
            Endian::Big => u16::from_be_bytes(arr),
        }
    }

    fn put_u32(self, out: &mut Vec<u8>, v: u32) {
        match self {
            Endian::Little => out.extend_from_slice(&v.to_le_bytes()),
            Endian::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    fn put_u16(self, out: &mut Vec<u8>, v: u16) {
        match self {
            Endian::Little => out.extend_from_slice(&v.to_le_bytes()),
            Endian::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TsResolution {
    Micros,
    Nanos,
}

/// One captured packet. `data.len()` is the captured length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub ts_sec: u32,
    /// Microseconds or nanoseconds, per the file's [`TsResolution`].
    pub ts_frac: u32,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl PacketRecord {
    pub fn new(ts_sec: u32, ts_frac: u32, data: Vec<u8>) -> Self {
        PacketRecord {
            ts_sec,
            ts_frac,
            orig_len: data.len() as u32,
            data,
        }
    }

    pub fn captured_len(&self) -> usize {
        self.data.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureFile {
    pub path: Option<PathBuf>,
    pub endian: Endian,
    pub resolution: TsResolution,
    pub version: (u16, u16),
    pub snaplen: u32,
    pub link_type: u32,
    pub records: Vec<PacketRecord>,
}

fn detect_magic(raw: u32) -> Result<(Endian, TsResolution)> {
    // `raw` is the first four bytes read little-endian.
    match raw {
        MAGIC_MICROS => Ok((Endian::Little, TsResolution::Micros)),
        MAGIC_NANOS => Ok((Endian::Little, TsResolution::Nanos)),
        m if m == MAGIC_MICROS.swap_bytes() => Ok((Endian::Big, TsResolution::Micros)),
        m if m == MAGIC_NANOS.swap_bytes() => Ok((Endian::Big, TsResolution::Nanos)),
        MAGIC_PCAPNG => Err(Error::UnsupportedFormat {
            magic: raw,
            hint: " (pcapng; convert with `editcap -F pcap in.pcapng out.pcap`)",
        }),
        _ => Err(Error::UnsupportedFormat { magic: raw, hint: "" }),
    }
}

pub fn parse_pcap_bytes(bytes: &[u8]) -> Result<CaptureFile> {
    if bytes.len() < 4 {
        return Err(Error::invalid("file too short for a pcap magic number"));
    }
    let (endian, resolution) = detect_magic(u32::from_le_bytes(bytes[..4].try_into().unwrap()))?;
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(Error::invalid(format!(
            "pcap global header needs {GLOBAL_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let version = (endian.read_u16(&bytes[4..]), endian.read_u16(&bytes[6..]));
    let snaplen = endian.read_u32(&bytes[16..]);
    let link_type = endian.read_u32(&bytes[20..]);

    let mut records = Vec::new();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        let index = records.len();
        if bytes.len() - pos < RECORD_HEADER_LEN {
            return Err(Error::Truncated {
                index,
                detail: format!("record header needs 16 bytes, {} remain", bytes.len() - pos),
            });
        }
        let h = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = endian.read_u32(h);
        let ts_frac = endian.read_u32(&h[4..]);
        let incl_len = endian.read_u32(&h[8..]);
        let orig_len = endian.read_u32(&h[12..]);
        if incl_len > MAX_RECORD_LEN {
            return Err(Error::Truncated {
                index,
                detail: format!("implausible captured length {incl_len}"),
            });
        }
        if incl_len > orig_len {
            return Err(Error::invalid(format!(
                "record {index}: captured length {incl_len} exceeds original length {orig_len}"
            )));
        }
        pos += RECORD_HEADER_LEN;
        let end = pos + incl_len as usize;
        if end > bytes.len() {
            return Err(Error::Truncated {
                index,
                detail: format!("needs {incl_len} data bytes, {} remain", bytes.len() - pos),
            });
        }
        records.push(PacketRecord {
            ts_sec,
            ts_frac,
            orig_len,
            data: bytes[pos..end].to_vec(),
        });
        pos = end;
    }
    Ok(CaptureFile {
        path: None,
        endian,
        resolution,
        version,
        snaplen,
        link_type,
        records,
    })
}

pub fn parse_pcap(path: &Path) -> Result<CaptureFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut capture = parse_pcap_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))?;
    capture.path = Some(path.to_path_buf());
    Ok(capture)
}

/// Serializes records as classic pcap v2.4 with an Ethernet link type.
pub fn encode_pcap(records: &[PacketRecord], endian: Endian, resolution: TsResolution) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        GLOBAL_HEADER_LEN + records.iter().map(|r| RECORD_HEADER_LEN + r.data.len()).sum::<usize>(),
    );
    let magic = match resolution {
        TsResolution::Micros => MAGIC_MICROS,
        TsResolution::Nanos => MAGIC_NANOS,
    };
    endian.put_u32(&mut out, magic);
    endian.put_u16(&mut out, 2);
    endian.put_u16(&mut out, 4);
    endian.put_u32(&mut out, 0); // thiszone
    endian.put_u32(&mut out, 0); // sigfigs
    endian.put_u32(&mut out, DEFAULT_SNAPLEN);
    endian.put_u32(&mut out, LINKTYPE_ETHERNET);
    for r in records {
        endian.put_u32(&mut out, r.ts_sec);
        endian.put_u32(&mut out, r.ts_frac);
        endian.put_u32(&mut out, r.data.len() as u32);
        endian.put_u32(&mut out, r.orig_len.max(r.data.len() as u32));
        out.extend_from_slice(&r.data);
    }
    out
}

/// Writes a microsecond-resolution, native-endian capture.
pub fn write_pcap(records: &[PacketRecord], path: &Path) -> Result<()> {
    write_pcap_with(records, path, Endian::native(), TsResolution::Micros)
}

pub fn write_pcap_with(
    records: &[PacketRecord],
    path: &Path,
    endian: Endian,
    resolution: TsResolution,
) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if r.data.len() as u64 > MAX_RECORD_LEN as u64 {
            return Err(Error::invalid(format!("record {i} is too large for pcap")));
        }
        if resolution == TsResolution::Micros && r.ts_frac >= 1_000_000 {
            return Err(Error::invalid(format!("record {i}: {} is not a valid microsecond value", r.ts_frac)));
        }
        if r.ts_frac >= 1_000_000_000 {
            return Err(Error::invalid(format!("record {i}: {} is not a valid nanosecond value", r.ts_frac)));
        }
    }
    fs::write(path, encode_pcap(records, endian, resolution)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_capture() {
        let bytes = encode_pcap(&[], Endian::Little, TsResolution::Micros);
        assert_eq!(bytes.len(), GLOBAL_HEADER_LEN);
        let c = parse_pcap_bytes(&bytes).unwrap();
        assert!(c.records.is_empty());
        assert_eq!(c.link_type, LINKTYPE_ETHERNET);
        assert_eq!(c.version, (2, 4));
    }

    #[test]
    fn swapped_encodings_agree() {
        let recs = vec![PacketRecord::new(1, 2, vec![1, 2, 3]), PacketRecord::new(5, 999_999, vec![])];
        for res in [TsResolution::Micros, TsResolution::Nanos] {
            let le = parse_pcap_bytes(&encode_pcap(&recs, Endian::Little, res)).unwrap();
            let be = parse_pcap_bytes(&encode_pcap(&recs, Endian::Big, res)).unwrap();
            assert_eq!(le.records, recs);
            assert_eq!(be.records, recs);
            assert_eq!((le.endian, be.endian), (Endian::Little, Endian::Big));
            assert_eq!(le.resolution, res);
        }
    }

    #[test]
    fn bad_magic_is_named() {
        let mut bytes = encode_pcap(&[], Endian::Little, TsResolution::Micros);
        bytes[..4].copy_from_slice(&0xdead_beefu32.to_le_bytes());
        let err = parse_pcap_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { magic: 0xdead_beef, .. }));
        assert!(err.to_string().contains("0xdeadbeef"));

        bytes[..4].copy_from_slice(&[0x0a, 0x0d, 0x0d, 0x0a]);
        assert!(parse_pcap_bytes(&bytes).unwrap_err().to_string().contains("pcapng"));
    }

    #[test]
    fn truncation_reports_record_index() {
        let recs = vec![PacketRecord::new(0, 0, vec![7; 10]), PacketRecord::new(0, 0, vec![8; 10])];
        let bytes = encode_pcap(&recs, Endian::Big, TsResolution::Micros);
        for cut in [bytes.len() - 1, bytes.len() - 12, GLOBAL_HEADER_LEN + 5] {
            match parse_pcap_bytes(&bytes[..cut]) {
                Err(Error::Truncated { index, .. }) => {
                    assert_eq!(index, if cut > GLOBAL_HEADER_LEN + 26 { 1 } else { 0 })
                }
                other => panic!("expected truncation, got {other:?}"),
            }
        }
    }

    #[test]
    fn captured_longer_than_original_rejected() {
        let mut r = PacketRecord::new(0, 0, vec![1; 8]);
        r.orig_len = 4;
        let mut bytes = encode_pcap(&[r], Endian::Little, TsResolution::Micros);
        // encode clamps orig_len up; patch it back down
        bytes[GLOBAL_HEADER_LEN + 12..GLOBAL_HEADER_LEN + 16].copy_from_slice(&4u32.to_le_bytes());
        assert!(parse_pcap_bytes(&bytes).is_err());
    }

    #[test]
    fn snapped_records_keep_original_length() {
        let mut r = PacketRecord::new(3, 4, vec![9; 20]);
        r.orig_len = 1500;
        let c = parse_pcap_bytes(&encode_pcap(&[r.clone()], Endian::Little, TsResolution::Nanos)).unwrap();
        assert_eq!(c.records, vec![r]);
    }

    #[test]
    fn invalid_timestamps_refused_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let r = PacketRecord::new(0, 1_000_000, vec![]);
        assert!(write_pcap(std::slice::from_ref(&r), &dir.path().join("a.pcap")).is_err());
        write_pcap_with(&[r], &dir.path().join("b.pcap"), Endian::Big, TsResolution::Nanos).unwrap();
    }
}
