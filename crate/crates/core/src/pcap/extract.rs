//! Ethernet → IPv4/IPv6 → TCP payload extraction.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use super::file::{CaptureFile, LINKTYPE_ETHERNET};
use crate::error::{Error, Result};

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86dd;
pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETHERTYPE_QINQ: u16 = 0x88a8;
pub const IPPROTO_TCP: u8 = 6;

const ETH_HEADER_LEN: usize = 14;
const IPV6_HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiveTuple {
    pub src: IpAddr,
    pub dst: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

/// Non-empty TCP payload of one packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadRecord {
    pub payload: Vec<u8>,
    pub five_tuple: FiveTuple,
    pub packet_index: usize,
}

/// Why packets produced no payload record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounters {
    pub non_ip: u64,
    pub non_tcp: u64,
    pub empty_payload: u64,
    pub ip_fragment: u64,
    pub ipv6_extension: u64,
    pub malformed: u64,
}

impl SkipCounters {
    pub fn total(&self) -> u64 {
        self.non_ip + self.non_tcp + self.empty_payload + self.ip_fragment + self.ipv6_extension + self.malformed
    }

    pub fn add(&mut self, other: &SkipCounters) {
        self.non_ip += other.non_ip;
        self.non_tcp += other.non_tcp;
        self.empty_payload += other.empty_payload;
        self.ip_fragment += other.ip_fragment;
        self.ipv6_extension += other.ipv6_extension;
        self.malformed += other.malformed;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub records: Vec<PayloadRecord>,
    pub skipped: SkipCounters,
    pub packets_in: u64,
}

enum Skip {
    NonIp,
    NonTcp,
    Empty,
    Fragment,
    Ipv6Extension,
    Malformed,
}

fn be16(b: &[u8], at: usize) -> Option<u16> {
    b.get(at..at + 2).map(|s| u16::from_be_bytes([s[0], s[1]]))
}

fn is_ipv6_extension(next: u8) -> bool {
    matches!(next, 0 | 43 | 44 | 50 | 51 | 60 | 135 | 139 | 140 | 253 | 254)
}

/// Parses one Ethernet frame down to its TCP payload.
fn dissect(frame: &[u8]) -> std::result::Result<(FiveTuple, &[u8]), Skip> {
    let mut ethertype = be16(frame, 12).ok_or(Skip::Malformed)?;
    let mut off = ETH_HEADER_LEN;
    while ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
        ethertype = be16(frame, off + 2).ok_or(Skip::Malformed)?;
        off += 4;
    }
    let ip = frame.get(off..).ok_or(Skip::Malformed)?;

    let (src, dst, protocol, l4) = match ethertype {
        ETHERTYPE_IPV4 => {
            let first = *ip.first().ok_or(Skip::Malformed)?;
            if first >> 4 != 4 {
                return Err(Skip::Malformed);
            }
            let ihl = (first & 0x0f) as usize * 4;
            if ihl < 20 || ip.len() < ihl {
                return Err(Skip::Malformed);
            }
            let total = be16(ip, 2).ok_or(Skip::Malformed)? as usize;
            if total < ihl {
                return Err(Skip::Malformed);
            }
            // Ethernet may pad short frames; a snapped capture may cut the datagram.
            let end = total.min(ip.len());
            let flags_frag = be16(ip, 6).ok_or(Skip::Malformed)?;
            let protocol = ip[9];
            let src = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
            let dst = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
            if protocol != IPPROTO_TCP {
                return Err(Skip::NonTcp);
            }
            if flags_frag & 0x1fff != 0 {
                return Err(Skip::Fragment);
            }
            (IpAddr::V4(src), IpAddr::V4(dst), protocol, &ip[ihl..end])
        }
        ETHERTYPE_IPV6 => {
            if ip.len() < IPV6_HEADER_LEN || ip[0] >> 4 != 6 {
                return Err(Skip::Malformed);
            }
            let payload_len = be16(ip, 4).ok_or(Skip::Malformed)? as usize;
            let next = ip[6];
            let src: [u8; 16] = ip[8..24].try_into().unwrap();
            let dst: [u8; 16] = ip[24..40].try_into().unwrap();
            if next != IPPROTO_TCP {
                return Err(if is_ipv6_extension(next) {
                    Skip::Ipv6Extension
                } else {
                    Skip::NonTcp
                });
            }
            let end = (IPV6_HEADER_LEN + payload_len).min(ip.len());
            (
                IpAddr::V6(Ipv6Addr::from(src)),
                IpAddr::V6(Ipv6Addr::from(dst)),
                next,
                &ip[IPV6_HEADER_LEN..end],
            )
        }
        _ => return Err(Skip::NonIp),
    };

    let src_port = be16(l4, 0).ok_or(Skip::Malformed)?;
    let dst_port = be16(l4, 2).ok_or(Skip::Malformed)?;
    let data_offset = (*l4.get(12).ok_or(Skip::Malformed)? >> 4) as usize * 4;
    if data_offset < 20 || l4.len() < data_offset {
        return Err(Skip::Malformed);
    }
    let payload = &l4[data_offset..];
    if payload.is_empty() {
        return Err(Skip::Empty);
    }
    Ok((
        FiveTuple {
            src,
            dst,
            src_port,
            dst_port,
            protocol,
        },
        payload,
    ))
}

/// Walks every record; packets that yield no TCP payload are counted, never fatal.
pub fn extract_payloads(capture: &CaptureFile) -> Result<Extraction> {
    if capture.link_type != LINKTYPE_ETHERNET {
        return Err(Error::invalid(format!(
            "only Ethernet captures (link type 1) are supported, got link type {}",
            capture.link_type
        )));
    }
    let mut records = Vec::new();
    let mut skipped = SkipCounters::default();
    for (packet_index, rec) in capture.records.iter().enumerate() {
        match dissect(&rec.data) {
            Ok((five_tuple, payload)) => records.push(PayloadRecord {
                payload: payload.to_vec(),
                five_tuple,
                packet_index,
            }),
            Err(Skip::NonIp) => skipped.non_ip += 1,
            Err(Skip::NonTcp) => skipped.non_tcp += 1,
            Err(Skip::Empty) => skipped.empty_payload += 1,
            Err(Skip::Fragment) => skipped.ip_fragment += 1,
            Err(Skip::Ipv6Extension) => skipped.ipv6_extension += 1,
            Err(Skip::Malformed) => skipped.malformed += 1,
        }
    }
    Ok(Extraction {
        records,
        skipped,
        packets_in: capture.records.len() as u64,
    })
}
