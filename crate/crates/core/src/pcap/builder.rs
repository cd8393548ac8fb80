//! Synthetic Ethernet frames for fixtures and tests.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::extract::{ETHERTYPE_IPV4, ETHERTYPE_IPV6, ETHERTYPE_VLAN, IPPROTO_TCP};

const IPPROTO_UDP: u8 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Tcp,
    Udp,
}

/// Description of one frame. Option bytes are zero-filled (IPv4) or NOPs (TCP).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSpec {
    pub vlan: bool,
    pub ipv6: bool,
    /// IPv4 header length in 32-bit words, 5..=15.
    pub ihl: u8,
    /// TCP header length in 32-bit words, 5..=15.
    pub data_offset: u8,
    pub transport: Transport,
    pub src: IpAddr,
    pub dst: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
}

impl FrameSpec {
    pub fn tcp(payload: Vec<u8>) -> Self {
        FrameSpec {
            vlan: false,
            ipv6: false,
            ihl: 5,
            data_offset: 5,
            transport: Transport::Tcp,
            src: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1)),
            dst: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2)),
            src_port: 40000,
            dst_port: 443,
            payload,
        }
    }

    fn l4(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.src_port.to_be_bytes());
        out.extend_from_slice(&self.dst_port.to_be_bytes());
        match self.transport {
            Transport::Tcp => {
                let hdr = self.data_offset as usize * 4;
                out.extend_from_slice(&1u32.to_be_bytes()); // seq
                out.extend_from_slice(&0u32.to_be_bytes()); // ack
                out.push(self.data_offset << 4);
                out.push(0x18); // PSH|ACK
                out.extend_from_slice(&65535u16.to_be_bytes());
                out.extend_from_slice(&[0, 0, 0, 0]); // checksum, urgent
                out.resize(hdr, 0x01);
            }
            Transport::Udp => {
                out.extend_from_slice(&((8 + self.payload.len()) as u16).to_be_bytes());
                out.extend_from_slice(&[0, 0]);
            }
        }
        out.extend_from_slice(&self.payload);
        out
    }

    fn protocol(&self) -> u8 {
        match self.transport {
            Transport::Tcp => IPPROTO_TCP,
            Transport::Udp => IPPROTO_UDP,
        }
    }

    pub fn build(&self) -> Vec<u8> {
        let l4 = self.l4();
        let mut f = vec![0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02];
        if self.vlan {
            f.extend_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
            f.extend_from_slice(&0x0064u16.to_be_bytes());
        }
        if self.ipv6 {
            let to_v6 = |a: IpAddr| match a {
                IpAddr::V6(v) => v,
                IpAddr::V4(v) => v.to_ipv6_mapped(),
            };
            f.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
            f.extend_from_slice(&[0x60, 0, 0, 0]);
            f.extend_from_slice(&(l4.len() as u16).to_be_bytes());
            f.push(self.protocol());
            f.push(64);
            f.extend_from_slice(&Ipv6Addr::octets(&to_v6(self.src)));
            f.extend_from_slice(&Ipv6Addr::octets(&to_v6(self.dst)));
        } else {
            let to_v4 = |a: IpAddr| match a {
                IpAddr::V4(v) => v,
                IpAddr::V6(_) => Ipv4Addr::UNSPECIFIED,
            };
            let hdr = self.ihl as usize * 4;
            f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
            f.push(0x40 | self.ihl);
            f.push(0);
            f.extend_from_slice(&((hdr + l4.len()) as u16).to_be_bytes());
            f.extend_from_slice(&[0, 1, 0x40, 0]); // id, DF
            f.push(64);
            f.push(self.protocol());
            f.extend_from_slice(&[0, 0]);
            f.extend_from_slice(&to_v4(self.src).octets());
            f.extend_from_slice(&to_v4(self.dst).octets());
            f.resize(f.len() + hdr - 20, 0);
        }
        f.extend_from_slice(&l4);
        f
    }
}
