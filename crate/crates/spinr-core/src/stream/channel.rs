//! Packet fragmentation and the simulated lossy channel.
//!
//! Chunk records are fragmented into packets of a configurable payload
//! size (default and maximum 1024 bytes). Each packet carries
//! `chunk_id | frag_index | frag_count`; the 17-byte header travels
//! out-of-band on a reliable side channel, so a stream is recoverable
//! exactly to the extent its chunks are. The channel drops each packet
//! independently with probability `p` under a seeded generator, and a
//! chunk is usable iff every one of its fragments arrived (there is no
//! retransmission — partial chunks fail their CRC anyway and carry no
//! usable structure).

use rand::Rng;

use crate::error::FormatError;
use crate::rng::{stream_rng, STREAM_CHANNEL};
use crate::stream::format::{parse_record, DecodedStream, Header, HEADER_LEN};

/// Default (and maximum) packet payload in bytes.
pub const DEFAULT_PACKET_PAYLOAD: usize = 1024;

#[derive(Clone, Copy, Debug)]
pub struct ChannelConfig {
    /// Bytes of chunk data per packet, in `[1, 1024]`.
    pub packet_payload: usize,
    /// Independent per-packet loss probability.
    pub loss_prob: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(loss_prob: f64, seed: u64) -> Self {
        ChannelConfig { packet_payload: DEFAULT_PACKET_PAYLOAD, loss_prob, seed }
    }

    fn validate(&self) {
        assert!(
            (1..=DEFAULT_PACKET_PAYLOAD).contains(&self.packet_payload),
            "packet payload must be 1..=1024 bytes"
        );
        assert!(
            (0.0..=1.0).contains(&self.loss_prob),
            "loss probability must lie in [0, 1]"
        );
    }
}

/// One packet: a fragment of one chunk's record bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub chunk_id: u8,
    pub frag_index: u16,
    pub frag_count: u16,
    pub payload: Vec<u8>,
}

impl Packet {
    /// Wire size: 5 header bytes plus payload.
    pub fn wire_bytes(&self) -> usize {
        5 + self.payload.len()
    }
}

/// Fragment an encoded stream's chunk records into packets (file order,
/// ascending fragment index). The stream header is not packetized.
pub fn packetize(bytes: &[u8], packet_payload: usize) -> Result<Vec<Packet>, FormatError> {
    assert!(
        (1..=DEFAULT_PACKET_PAYLOAD).contains(&packet_payload),
        "packet payload must be 1..=1024 bytes"
    );
    let header = Header::parse(bytes)?;
    let mut packets = Vec::new();
    let mut off = HEADER_LEN;
    for id in header.slot_ids()? {
        let rl = header.record_len(id);
        if off + rl > bytes.len() {
            return Err(FormatError::Truncated { offset: bytes.len() });
        }
        let record = &bytes[off..off + rl];
        let frag_count = record.len().div_ceil(packet_payload);
        assert!(frag_count <= u16::MAX as usize, "chunk too large for 16-bit fragment index");
        for (i, frag) in record.chunks(packet_payload).enumerate() {
            packets.push(Packet {
                chunk_id: id,
                frag_index: i as u16,
                frag_count: frag_count as u16,
                payload: frag.to_vec(),
            });
        }
        off += rl;
    }
    Ok(packets)
}

/// What came out of the channel.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub delivered: Vec<Packet>,
    pub sent: usize,
    pub dropped: usize,
}

/// Push packets through the lossy channel: each is dropped independently
/// with probability `loss_prob`, deterministically under `seed`.
pub fn transmit(packets: Vec<Packet>, cfg: &ChannelConfig) -> Transmission {
    cfg.validate();
    let mut rng = stream_rng(cfg.seed, STREAM_CHANNEL);
    let sent = packets.len();
    let delivered: Vec<Packet> = packets
        .into_iter()
        .filter(|_| rng.gen::<f64>() >= cfg.loss_prob)
        .collect();
    let dropped = sent - delivered.len();
    Transmission { delivered, sent, dropped }
}

/// Reassemble delivered packets against a (reliably known) header.
///
/// A chunk is recovered iff all of its fragments arrived and the record's
/// CRC verifies; fragment counts that disagree with the header's structural
/// expectation are ignored as nonsense. Delivery order does not matter and
/// duplicates are harmless.
pub fn reassemble(header: &Header, delivered: &[Packet]) -> DecodedStream {
    let slot_ids = header.slot_ids().expect("validated header");
    let mut chunks = std::collections::BTreeMap::new();
    let mut corrupt = Vec::new();
    for &id in &slot_ids {
        let rl = header.record_len(id);
        if let Some(record) = gather_record(delivered, id, rl) {
            match parse_record(header, id, &record) {
                Ok(chunk) => {
                    chunks.insert(id, chunk);
                }
                Err(_) => corrupt.push(id),
            }
        }
    }
    let missing = header
        .full_chunk_ids()
        .into_iter()
        .filter(|id| !chunks.contains_key(id))
        .collect();
    DecodedStream { header: header.clone(), chunks, corrupt, missing }
}

/// Concatenate the fragments of `id` if the set is complete.
fn gather_record(delivered: &[Packet], id: u8, record_len: usize) -> Option<Vec<u8>> {
    let mut frags: Vec<Option<&Packet>> = Vec::new();
    for p in delivered.iter().filter(|p| p.chunk_id == id) {
        let count = p.frag_count as usize;
        if frags.is_empty() {
            frags = vec![None; count];
        }
        if count != frags.len() || p.frag_index as usize >= count {
            continue; // inconsistent metadata: not a fragment of this record
        }
        frags[p.frag_index as usize].get_or_insert(p);
    }
    if frags.is_empty() || frags.iter().any(|f| f.is_none()) {
        return None;
    }
    let mut record = Vec::with_capacity(record_len);
    for f in frags.iter().flatten() {
        record.extend_from_slice(&f.payload);
    }
    (record.len() == record_len).then_some(record)
}

/// Expected fragment count for each chunk of a stream — the ground truth
/// packet census used by reports.
pub fn packet_census(header: &Header, packet_payload: usize) -> Vec<(u8, usize)> {
    header
        .slot_ids()
        .expect("validated header")
        .iter()
        .map(|&id| (id, header.record_len(id).div_ceil(packet_payload)))
        .collect()
}
