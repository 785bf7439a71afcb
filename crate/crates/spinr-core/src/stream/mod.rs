//! Serialization, the lossy packet channel, and progressive decoding.

pub mod channel;
pub mod format;
pub mod progressive;

pub use channel::{
    packet_census, packetize, reassemble, transmit, ChannelConfig, Packet, Transmission,
    DEFAULT_PACKET_PAYLOAD,
};
pub use format::{
    build_partial_model, chunk_spans, deserialize, serialize, to_model, truncate_stream,
    ChunkData, DecodedStream, Header, QuantMode, HEADER_LEN,
};
pub use progressive::{progressive_decode, ProgressiveOutput};
