//! Classic pcap files, TCP payload extraction and labelled-dataset assembly.

pub mod builder;
mod extract;
mod file;
mod ingest;

pub use extract::{extract_payloads, Extraction, FiveTuple, PayloadRecord, SkipCounters};
pub use file::{
    encode_pcap, parse_pcap, parse_pcap_bytes, write_pcap, write_pcap_with, CaptureFile, Endian,
    PacketRecord, TsResolution, LINKTYPE_ETHERNET,
};
pub use ingest::build_labeled_dataset;
