//! The serialized model format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header:  magic "SPNR" | version u8 | quant_mode u8 | family u8 | n u8
//!          | h u16 | m u16 | omega0-or-sigma_B f32 | chunk_count u8
//! chunk:   chunk_id u8 | dtype u8 | rows u16 | cols u16
//!          | [scale f32, zero u8|u16, when quantized]
//!          | weight payload | bias payload | crc32 u32
//! ```
//!
//! Chunk ids: 0 = Fourier projection `B` (when present), 1 = `L0`,
//! `1+k` = hidden layer `Lk`, `n+2` = output layer. The writer emits
//! chunks in ascending id order, and a stream may be *truncated*: its
//! `chunk_count` K means "the first K-1 non-output chunks, then the
//! output chunk" — the only subset shape the sender ever produces, chosen
//! so a receiver can size and attribute every record from the header
//! alone. That structural parsing is what confines any single corrupted
//! byte to exactly one chunk's CRC: record boundaries never depend on
//! record contents.
//!
//! The CRC32 (IEEE, reflected) covers the whole record from the id byte
//! through the end of the bias payload, so ids, dims, and quantization
//! parameters are all authenticated. The header itself is validated
//! structurally and carries no CRC; transports are expected to deliver it
//! reliably (it is 17 bytes — the interesting loss behavior is all in the
//! chunks).
//!
//! Quantized modes use one affine grid per chunk, fitted over the
//! concatenated weights-then-bias values. The grid's range is widened to
//! include zero when the values do not straddle it, which keeps the zero
//! point inside its unsigned field for any input and makes 0.0 exactly
//! representable; for trained layers (whose values straddle zero anyway)
//! the widening is a no-op and the worst-case rounding error is the
//! textbook `range / levels / 2` plus float-32 scale rounding. The zero
//! point is stored as u8 in mode 1 and — departing from a strict reading
//! of the layout note above, which would not let the zero point span the
//! u16 grid — as u16 in mode 2.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::FormatError;
use crate::linalg::Mat;
use crate::models::{Family, Model, ModelSpec};

pub const MAGIC: [u8; 4] = *b"SPNR";
pub const VERSION: u8 = 1;
/// Serialized header length in bytes.
pub const HEADER_LEN: usize = 17;

/// Parameter encoding for every chunk of a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantMode {
    /// 32-bit float, no quantization fields.
    F32 = 0,
    /// Per-chunk affine to u8.
    U8 = 1,
    /// Per-chunk affine to u16.
    U16 = 2,
}

impl QuantMode {
    pub fn from_u8(v: u8) -> Result<Self, FormatError> {
        match v {
            0 => Ok(QuantMode::F32),
            1 => Ok(QuantMode::U8),
            2 => Ok(QuantMode::U16),
            other => Err(FormatError::BadQuantMode(other)),
        }
    }

    /// Quantization levels (max code value); 0 for f32.
    fn levels(self) -> u32 {
        match self {
            QuantMode::F32 => 0,
            QuantMode::U8 => 255,
            QuantMode::U16 => 65_535,
        }
    }

    /// Bytes per encoded value.
    fn value_bytes(self) -> usize {
        match self {
            QuantMode::F32 => 4,
            QuantMode::U8 => 1,
            QuantMode::U16 => 2,
        }
    }

    /// Bytes of the per-chunk `[scale, zero]` fields.
    fn qparam_bytes(self) -> usize {
        match self {
            QuantMode::F32 => 0,
            QuantMode::U8 => 4 + 1,
            QuantMode::U16 => 4 + 2,
        }
    }
}

fn family_code(f: Family) -> u8 {
    match f {
        Family::Siren => 0,
        Family::Fourier => 1,
    }
}

fn family_from(v: u8) -> Result<Family, FormatError> {
    match v {
        0 => Ok(Family::Siren),
        1 => Ok(Family::Fourier),
        other => Err(FormatError::BadFamily(other)),
    }
}

/// Parsed stream header.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub quant: QuantMode,
    pub family: Family,
    /// Hidden layer count.
    pub n: u8,
    /// Hidden width.
    pub h: u16,
    /// Fourier frequency count (0 for the sine family).
    pub m: u16,
    /// omega0 (sine) or sigma_B (Fourier), at f32 precision.
    pub scale_hyper: f32,
    /// Number of chunk records actually present in the stream.
    pub chunk_count: u8,
}

impl Header {
    pub fn from_spec(spec: &ModelSpec, quant: QuantMode) -> Header {
        assert!(spec.hidden_layers <= 252, "format caps hidden layers at 252");
        assert!(spec.hidden_width <= u16::MAX as usize);
        assert!(spec.fourier_m <= u16::MAX as usize);
        let (m, scale_hyper) = match spec.family {
            Family::Siren => (0u16, spec.omega0 as f32),
            Family::Fourier => (spec.fourier_m as u16, spec.fourier_sigma as f32),
        };
        let mut h = Header {
            quant,
            family: spec.family,
            n: spec.hidden_layers as u8,
            h: spec.hidden_width as u16,
            m,
            scale_hyper,
            chunk_count: 0,
        };
        h.chunk_count = h.full_chunk_ids().len() as u8;
        h
    }

    /// Rebuild the architecture descriptor this header describes.
    pub fn to_spec(&self) -> ModelSpec {
        match self.family {
            Family::Siren => {
                ModelSpec::siren(self.h as usize, self.n as usize, self.scale_hyper as f64)
            }
            Family::Fourier => ModelSpec::fourier(
                self.h as usize,
                self.n as usize,
                self.m as usize,
                self.scale_hyper as f64,
            ),
        }
    }

    /// Output-layer chunk id (`n + 2`).
    pub fn output_chunk_id(&self) -> u8 {
        self.n + 2
    }

    /// Every chunk id of a complete stream, ascending.
    pub fn full_chunk_ids(&self) -> Vec<u8> {
        let mut ids = Vec::new();
        if self.family == Family::Fourier {
            ids.push(0);
        }
        ids.extend(1..=self.output_chunk_id());
        ids
    }

    /// The chunk ids occupying this stream's record slots, in file order.
    /// A count of K means the first K-1 non-output chunks plus the output
    /// chunk — the only truncation shape the writer produces.
    pub fn slot_ids(&self) -> Result<Vec<u8>, FormatError> {
        let full = self.full_chunk_ids();
        let count = self.chunk_count as usize;
        if count < 2 || count > full.len() {
            return Err(FormatError::BadHeader("chunk_count out of range"));
        }
        let out_id = self.output_chunk_id();
        let mut slots: Vec<u8> =
            full.iter().copied().filter(|&id| id != out_id).take(count - 1).collect();
        slots.push(out_id);
        Ok(slots)
    }

    /// `(rows, cols, has_bias)` for a chunk id.
    pub fn chunk_dims(&self, id: u8) -> (usize, usize, bool) {
        let h = self.h as usize;
        let input_dim = match self.family {
            Family::Siren => 2,
            Family::Fourier => 2 * self.m as usize,
        };
        match id {
            0 => (self.m as usize, 2, false),
            1 => (h, input_dim, true),
            id if id == self.output_chunk_id() => (3, h, true),
            _ => (h, h, true),
        }
    }

    /// Total serialized record length of a chunk, CRC included.
    pub fn record_len(&self, id: u8) -> usize {
        let (rows, cols, has_bias) = self.chunk_dims(id);
        let values = rows * cols + if has_bias { rows } else { 0 };
        6 + self.quant.qparam_bytes() + values * self.quant.value_bytes() + 4
    }

    /// Sum of weight + bias payload bytes across this stream's chunks —
    /// the model-size figure compression factors are computed from.
    pub fn payload_bytes(&self) -> usize {
        self.slot_ids()
            .expect("header validated at parse")
            .iter()
            .map(|&id| {
                let (rows, cols, has_bias) = self.chunk_dims(id);
                (rows * cols + if has_bias { rows } else { 0 }) * self.quant.value_bytes()
            })
            .sum()
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.quant as u8);
        out.push(family_code(self.family));
        out.push(self.n);
        out.extend_from_slice(&self.h.to_le_bytes());
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.scale_hyper.to_le_bytes());
        out.push(self.chunk_count);
    }

    /// Parse and validate a header from the front of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Header, FormatError> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated { offset: bytes.len() });
        }
        if bytes[0..4] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(FormatError::BadVersion(bytes[4]));
        }
        let quant = QuantMode::from_u8(bytes[5])?;
        let family = family_from(bytes[6])?;
        let n = bytes[7];
        let h = u16::from_le_bytes([bytes[8], bytes[9]]);
        let m = u16::from_le_bytes([bytes[10], bytes[11]]);
        let scale_hyper = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let chunk_count = bytes[16];
        if n == 0 || h == 0 {
            return Err(FormatError::BadHeader("zero width or depth"));
        }
        match family {
            Family::Fourier if m == 0 => return Err(FormatError::BadHeader("fourier m is zero")),
            Family::Siren if m != 0 => return Err(FormatError::BadHeader("sine family with m set")),
            _ => {}
        }
        if !scale_hyper.is_finite() || scale_hyper <= 0.0 {
            return Err(FormatError::BadHeader("hyperparameter scale not positive"));
        }
        let header = Header { quant, family, n, h, m, scale_hyper, chunk_count };
        header.slot_ids()?; // validates chunk_count
        Ok(header)
    }
}

/// Affine grid parameters of one quantized chunk.
#[derive(Clone, Copy, Debug, PartialEq)]
struct QuantParams {
    scale: f32,
    zero: u32,
}

/// Fit the affine grid over `values`, widening to include 0.0.
fn compute_qparams(values: &[f64], levels: u32) -> QuantParams {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        // All zeros (the grid always contains 0 after widening).
        return QuantParams { scale: 1.0, zero: 0 };
    }
    let mut scale = ((hi - lo) / levels as f64) as f32;
    if scale == 0.0 {
        scale = f32::MIN_POSITIVE; // sub-f32 ranges degenerate gracefully
    }
    let s = scale as f64;
    let zero = (-lo / s).round().clamp(0.0, levels as f64) as u32;
    QuantParams { scale, zero }
}

fn encode_code(x: f64, qp: QuantParams, levels: u32) -> u32 {
    let s = qp.scale as f64;
    (x / s + qp.zero as f64).round().clamp(0.0, levels as f64) as u32
}

fn decode_code(q: u32, qp: QuantParams) -> f64 {
    (q as f64 - qp.zero as f64) * qp.scale as f64
}

fn encode_values(values: &[f64], quant: QuantMode, qp: QuantParams, out: &mut Vec<u8>) {
    match quant {
        QuantMode::F32 => {
            for &v in values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        QuantMode::U8 => {
            for &v in values {
                out.push(encode_code(v, qp, 255) as u8);
            }
        }
        QuantMode::U16 => {
            for &v in values {
                out.extend_from_slice(&(encode_code(v, qp, 65_535) as u16).to_le_bytes());
            }
        }
    }
}

fn decode_values(bytes: &[u8], quant: QuantMode, qp: QuantParams) -> Vec<f64> {
    match quant {
        QuantMode::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        QuantMode::U8 => bytes.iter().map(|&b| decode_code(b as u32, qp)).collect(),
        QuantMode::U16 => bytes
            .chunks_exact(2)
            .map(|c| decode_code(u16::from_le_bytes(c.try_into().unwrap()) as u32, qp))
            .collect(),
    }
}

/// One verified, dequantized chunk.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkData {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Everything recovered from a stream: the header, verified chunks, and
/// what went wrong with the rest.
#[derive(Clone, Debug)]
pub struct DecodedStream {
    pub header: Header,
    pub chunks: BTreeMap<u8, ChunkData>,
    /// Chunk ids whose CRC failed.
    pub corrupt: Vec<u8>,
    /// Chunk ids of a complete stream that this stream does not carry
    /// (truncated streams) or that failed verification.
    pub missing: Vec<u8>,
}

/// Serialize a model. Chunks are written in ascending id order.
pub fn serialize(model: &Model, quant: QuantMode) -> Vec<u8> {
    let header = Header::from_spec(&model.spec, quant);
    let mut out = Vec::new();
    header.write(&mut out);
    for id in header.full_chunk_ids() {
        write_chunk(&mut out, &header, model, id);
    }
    out
}

fn chunk_values(model: &Model, id: u8) -> (Vec<f64>, usize) {
    if id == 0 {
        let b = model.fourier_b.as_ref().expect("fourier model must carry B");
        (b.data.clone(), 0)
    } else {
        let layer = &model.layers[(id - 1) as usize];
        let mut vals = layer.w.data.clone();
        vals.extend_from_slice(&layer.b);
        (vals, layer.b.len())
    }
}

fn write_chunk(out: &mut Vec<u8>, header: &Header, model: &Model, id: u8) {
    let (rows, cols, has_bias) = header.chunk_dims(id);
    let (values, bias_len) = chunk_values(model, id);
    assert_eq!(values.len(), rows * cols + bias_len);
    assert_eq!(has_bias, id != 0);

    let start = out.len();
    out.push(id);
    out.push(header.quant as u8);
    out.extend_from_slice(&(rows as u16).to_le_bytes());
    out.extend_from_slice(&(cols as u16).to_le_bytes());
    let qp = compute_qparams(&values, header.quant.levels());
    match header.quant {
        QuantMode::F32 => {}
        QuantMode::U8 => {
            out.extend_from_slice(&qp.scale.to_le_bytes());
            out.push(qp.zero as u8);
        }
        QuantMode::U16 => {
            out.extend_from_slice(&qp.scale.to_le_bytes());
            out.extend_from_slice(&(qp.zero as u16).to_le_bytes());
        }
    }
    encode_values(&values, header.quant, qp, out);
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
}

/// Parse one chunk record (as sliced by the structural layout) that is
/// expected to be `expected_id`. Returns the dequantized chunk.
pub fn parse_record(header: &Header, expected_id: u8, rec: &[u8]) -> Result<ChunkData, FormatError> {
    let (rows, cols, has_bias) = header.chunk_dims(expected_id);
    debug_assert_eq!(rec.len(), header.record_len(expected_id));
    let body_len = rec.len() - 4;
    let stored = u32::from_le_bytes(rec[body_len..].try_into().unwrap());
    if crc32fast::hash(&rec[..body_len]) != stored {
        return Err(FormatError::CrcMismatch { chunk_id: expected_id });
    }
    // CRC passed: the record is authentic; any disagreement with the
    // header is a malformed stream rather than transport damage.
    if rec[0] != expected_id {
        return Err(FormatError::Undecodable("chunk id disagrees with slot"));
    }
    if rec[1] != header.quant as u8 {
        return Err(FormatError::Undecodable("chunk dtype disagrees with header"));
    }
    let r = u16::from_le_bytes([rec[2], rec[3]]) as usize;
    let c = u16::from_le_bytes([rec[4], rec[5]]) as usize;
    if (r, c) != (rows, cols) {
        return Err(FormatError::Undecodable("chunk dims disagree with header"));
    }
    let mut off = 6;
    let qp = match header.quant {
        QuantMode::F32 => QuantParams { scale: 1.0, zero: 0 },
        QuantMode::U8 => {
            let scale = f32::from_le_bytes(rec[off..off + 4].try_into().unwrap());
            let zero = rec[off + 4] as u32;
            off += 5;
            QuantParams { scale, zero }
        }
        QuantMode::U16 => {
            let scale = f32::from_le_bytes(rec[off..off + 4].try_into().unwrap());
            let zero = u16::from_le_bytes([rec[off + 4], rec[off + 5]]) as u32;
            off += 6;
            QuantParams { scale, zero }
        }
    };
    let vb = header.quant.value_bytes();
    let w_end = off + rows * cols * vb;
    let weights = decode_values(&rec[off..w_end], header.quant, qp);
    let bias = if has_bias {
        decode_values(&rec[w_end..w_end + rows * vb], header.quant, qp)
    } else {
        Vec::new()
    };
    Ok(ChunkData { rows, cols, weights, bias })
}

/// Parse a stream.
///
/// In strict mode (`allow_partial = false`) any corrupt or absent chunk is
/// an error; in partial mode the result carries every chunk that verified
/// plus a report of the rest. Structural damage (truncation mid-record,
/// trailing bytes) is an error in both modes — it means the *file* is
/// malformed, not that a chunk went missing in transit.
pub fn deserialize(bytes: &[u8], allow_partial: bool) -> Result<DecodedStream, FormatError> {
    let header = Header::parse(bytes)?;
    let slots = header.slot_ids()?;
    let mut off = HEADER_LEN;
    let mut chunks = BTreeMap::new();
    let mut corrupt = Vec::new();
    for &id in &slots {
        let rl = header.record_len(id);
        if off + rl > bytes.len() {
            return Err(FormatError::Truncated { offset: bytes.len() });
        }
        match parse_record(&header, id, &bytes[off..off + rl]) {
            Ok(chunk) => {
                chunks.insert(id, chunk);
            }
            Err(FormatError::CrcMismatch { chunk_id }) => {
                if !allow_partial {
                    return Err(FormatError::CrcMismatch { chunk_id });
                }
                corrupt.push(chunk_id);
            }
            Err(other) => return Err(other),
        }
        off += rl;
    }
    if off != bytes.len() {
        return Err(FormatError::TrailingBytes { offset: off });
    }
    let missing: Vec<u8> = header
        .full_chunk_ids()
        .into_iter()
        .filter(|id| !chunks.contains_key(id))
        .collect();
    if !allow_partial && !missing.is_empty() {
        return Err(FormatError::MissingChunks(missing));
    }
    Ok(DecodedStream { header, chunks, corrupt, missing })
}

/// Rebuild a full model from a stream that carries every chunk.
pub fn to_model(ds: &DecodedStream) -> Result<Model, FormatError> {
    if !ds.missing.is_empty() {
        return Err(FormatError::MissingChunks(ds.missing.clone()));
    }
    Ok(build_partial_model(ds))
}

/// Materialize a model from whatever chunks are present; layers without a
/// chunk are zero-filled (callers must not include them in an active set).
pub fn build_partial_model(ds: &DecodedStream) -> Model {
    let spec = ds.header.to_spec();
    let dims = spec.layer_dims();
    let fourier_b = match spec.family {
        Family::Siren => None,
        Family::Fourier => Some(match ds.chunks.get(&0) {
            Some(c) => Mat::from_vec(c.rows, c.cols, c.weights.clone()),
            None => Mat::zeros(spec.fourier_m, 2),
        }),
    };
    let layers = dims
        .iter()
        .enumerate()
        .map(|(li, &(out, inp))| match ds.chunks.get(&((li + 1) as u8)) {
            Some(c) => crate::models::Layer {
                w: Mat::from_vec(c.rows, c.cols, c.weights.clone()),
                b: c.bias.clone(),
            },
            None => crate::models::Layer { w: Mat::zeros(out, inp), b: vec![0.0; out] },
        })
        .collect();
    Model { spec, fourier_b, layers }
}

/// Truncate an encoded stream after `keep_hidden` hidden layers: the
/// result carries `B` (when present), `L0`, hidden layers `L1..L_keep`,
/// and the output layer, with its `chunk_count` rewritten. Chunk records
/// are copied verbatim (CRCs intact). This is the adaptive-bit-rate lever:
/// senders shorten the chunk sequence instead of re-encoding.
pub fn truncate_stream(bytes: &[u8], keep_hidden: usize) -> Result<Vec<u8>, FormatError> {
    let header = Header::parse(bytes)?;
    if keep_hidden > header.n as usize {
        return Err(FormatError::BadHeader("keep_hidden exceeds hidden layer count"));
    }
    let slots = header.slot_ids()?;
    let keep: Vec<u8> = slots
        .iter()
        .copied()
        .filter(|&id| id <= 1 + keep_hidden as u8 || id == header.output_chunk_id())
        .collect();
    let mut out = Vec::new();
    let mut new_header = header.clone();
    new_header.chunk_count = keep.len() as u8;
    new_header.write(&mut out);
    let mut off = HEADER_LEN;
    for &id in &slots {
        let rl = header.record_len(id);
        if off + rl > bytes.len() {
            return Err(FormatError::Truncated { offset: bytes.len() });
        }
        if keep.contains(&id) {
            out.extend_from_slice(&bytes[off..off + rl]);
        }
        off += rl;
    }
    Ok(out)
}

/// Byte span of every chunk record in an encoded stream, in file order.
pub fn chunk_spans(bytes: &[u8]) -> Result<Vec<(u8, Range<usize>)>, FormatError> {
    let header = Header::parse(bytes)?;
    let mut spans = Vec::new();
    let mut off = HEADER_LEN;
    for id in header.slot_ids()? {
        let rl = header.record_len(id);
        spans.push((id, off..off + rl));
        off += rl;
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec};

    /// Snap every parameter to the f32 lattice — the precision the format
    /// stores, and the precondition for bit-exact mode-0 round trips.
    pub(super) fn snap_f32(model: &mut Model) {
        if let Some(b) = &mut model.fourier_b {
            for v in &mut b.data {
                *v = *v as f32 as f64;
            }
        }
        for l in &mut model.layers {
            for v in &mut l.w.data {
                *v = *v as f32 as f64;
            }
            for v in &mut l.b {
                *v = *v as f32 as f64;
            }
        }
    }

    #[test]
    fn crc_test_vector() {
        // The canonical IEEE-reflected check value.
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn mode0_round_trip_is_bit_exact() {
        for spec in [
            ModelSpec::siren(6, 2, 30.0),
            ModelSpec::fourier(5, 3, 4, 10.0),
        ] {
            let mut model = build_model(&spec, 42);
            snap_f32(&mut model);
            let bytes = serialize(&model, QuantMode::F32);
            let ds = deserialize(&bytes, false).unwrap();
            let back = to_model(&ds).unwrap();
            assert_eq!(model, back);
            assert!(ds.corrupt.is_empty() && ds.missing.is_empty());
        }
    }

    #[test]
    fn payload_byte_accounting() {
        let spec = ModelSpec::siren(128, 4, 30.0);
        let model = build_model(&spec, 0);
        let bytes = serialize(&model, QuantMode::F32);
        let header = Header::parse(&bytes).unwrap();
        assert_eq!(header.payload_bytes(), 4 * 66_819);
        // u8 mode: one byte per value.
        let b8 = serialize(&model, QuantMode::U8);
        assert_eq!(Header::parse(&b8).unwrap().payload_bytes(), 66_819);
    }

    #[test]
    fn quantized_round_trip_respects_error_bound() {
        let spec = ModelSpec::fourier(8, 2, 6, 10.0);
        let model = build_model(&spec, 3);
        for (quant, levels) in [(QuantMode::U8, 255.0), (QuantMode::U16, 65_535.0)] {
            let bytes = serialize(&model, quant);
            let ds = deserialize(&bytes, false).unwrap();
            let back = to_model(&ds).unwrap();
            for (li, (orig, dec)) in model.layers.iter().zip(&back.layers).enumerate() {
                let mut vals = orig.w.data.clone();
                vals.extend_from_slice(&orig.b);
                // Folding from 0.0 reproduces the zero-widened grid range.
                let lo = vals.iter().cloned().fold(0.0f64, f64::min);
                let hi = vals.iter().cloned().fold(0.0f64, f64::max);
                // Worst case: half a grid step, plus the sub-ulp effects
                // of storing the scale at f32 (bounded well under 1% of a
                // step); see module docs.
                let allowed = 0.51 * (hi - lo) / levels + 1e-12;
                let mut recon = dec.w.data.clone();
                recon.extend_from_slice(&dec.b);
                for (o, r) in vals.iter().zip(&recon) {
                    assert!(
                        (o - r).abs() <= allowed,
                        "layer {li}: |{o} - {r}| > {allowed}"
                    );
                }
            }
        }
    }

    #[test]
    fn quantizer_grid_always_represents_zero() {
        // An all-positive value set must still decode 0-codes to values
        // with error inside the widened-range bound, and an all-zero
        // chunk is exact.
        let qp = compute_qparams(&[0.5, 0.6, 0.7], 255);
        assert_eq!(qp.zero, 0);
        let q = encode_code(0.6, qp, 255);
        assert!((decode_code(q, qp) - 0.6).abs() <= 0.51 * 0.7 / 255.0);

        let qp = compute_qparams(&[0.0, 0.0], 255);
        assert_eq!(decode_code(encode_code(0.0, qp, 255), qp), 0.0);
    }

    #[test]
    fn single_byte_corruption_is_confined_to_one_chunk() {
        let spec = ModelSpec::siren(4, 2, 30.0);
        let model = build_model(&spec, 9);
        let clean = serialize(&model, QuantMode::U8);
        let spans = chunk_spans(&clean).unwrap();
        // Flip a byte in the middle of the second chunk's payload.
        let (victim_id, span) = (&spans[1].0, spans[1].clone().1);
        let mut bad = clean.clone();
        let pos = span.start + (span.end - span.start) / 2;
        bad[pos] ^= 0x5A;
        let ds = deserialize(&bad, true).unwrap();
        assert_eq!(ds.corrupt, vec![*victim_id]);
        assert_eq!(ds.missing, vec![*victim_id]);
        assert!(deserialize(&bad, false).is_err());
    }

    #[test]
    fn truncation_keeps_prefix_plus_output() {
        let spec = ModelSpec::siren(4, 3, 30.0);
        let model = build_model(&spec, 1);
        let full = serialize(&model, QuantMode::F32);
        let cut = truncate_stream(&full, 1).unwrap();
        let ds = deserialize(&cut, true).unwrap();
        let ids: Vec<u8> = ds.chunks.keys().copied().collect();
        assert_eq!(ids, vec![1, 2, 5]); // L0, L1, output
        assert_eq!(ds.missing, vec![3, 4]);
        assert!(ds.corrupt.is_empty());
        // Strict mode refuses a truncated stream.
        assert!(matches!(deserialize(&cut, false), Err(FormatError::MissingChunks(_))));
    }

    #[test]
    fn structural_damage_is_a_file_error() {
        let spec = ModelSpec::siren(3, 1, 30.0);
        let model = build_model(&spec, 4);
        let bytes = serialize(&model, QuantMode::F32);
        // Torn mid-record.
        let torn = &bytes[..bytes.len() - 3];
        assert!(matches!(
            deserialize(torn, true),
            Err(FormatError::Truncated { .. })
        ));
        // Trailing junk.
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            deserialize(&long, true),
            Err(FormatError::TrailingBytes { .. })
        ));
        // Unknown magic / version / quant / family.
        let mut b = bytes.clone();
        b[0] = b'X';
        assert_eq!(deserialize(&b, true).unwrap_err(), FormatError::BadMagic);
        let mut b = bytes.clone();
        b[4] = 9;
        assert_eq!(deserialize(&b, true).unwrap_err(), FormatError::BadVersion(9));
        let mut b = bytes.clone();
        b[5] = 7;
        assert_eq!(deserialize(&b, true).unwrap_err(), FormatError::BadQuantMode(7));
        let mut b = bytes;
        b[6] = 3;
        assert_eq!(deserialize(&b, true).unwrap_err(), FormatError::BadFamily(3));
    }
}
