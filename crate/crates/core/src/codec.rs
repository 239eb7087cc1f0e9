//! Byte layouts of the entity broadcast and the tracker registration packet.
//!
//! All integers are big-endian. A payload block is a `u16` entry count
//! followed by, per entry, a `u8` key length, the key, a `u16` value length
//! and the value.
//!
//! Entity packet: `guid[16] ‖ payload block`.
//!
//! Registration packet: `guid[16] ‖ u16 neighbor count ‖ guid[16]* ‖
//! lat16 ‖ lon16 ‖ u64 seconds ‖ u8 resolution (0 low, 1 high) ‖ payload block`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    GeoLocation, Guid, ModelError, Payload, PayloadError, PayloadScope, Registration, Resolution,
    Timestamp,
};

/// Largest encoded packet, in bytes.
pub const MAX_PACKET_LEN: usize = u16::MAX as usize;
/// Size of a registration with no neighbors and an empty payload.
pub const MIN_REGISTRATION_LEN: usize = 16 + 2 + 2 + 2 + 8 + 1 + 2;

const LAT_SPAN: f64 = 180.0;
const LON_SPAN: f64 = 360.0;
const CODE_MAX: f64 = u16::MAX as f64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after packet")]
    TrailingBytes(usize),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("encoded packet would be {0} bytes, limit 65535")]
    PayloadTooLarge(usize),
}

impl From<PayloadError> for CodecError {
    fn from(e: PayloadError) -> Self {
        CodecError::MalformedPayload(e.to_string())
    }
}

impl From<ModelError> for CodecError {
    fn from(e: ModelError) -> Self {
        CodecError::InvalidField(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntityPacket {
    pub guid: Guid,
    pub local_payload: Payload,
}

/// Linear 16-bit fixed point over the full coordinate range.
pub fn encode_location16(loc: GeoLocation) -> (u16, u16) {
    let lat = ((loc.latitude() + 90.0) / LAT_SPAN * CODE_MAX).round();
    let lon = ((loc.longitude() + 180.0) / LON_SPAN * CODE_MAX).round();
    (lat.clamp(0.0, CODE_MAX) as u16, lon.clamp(0.0, CODE_MAX) as u16)
}

pub fn decode_location16(lat16: u16, lon16: u16) -> GeoLocation {
    let lat = (lat16 as f64 / CODE_MAX * LAT_SPAN - 90.0).clamp(-90.0, 90.0);
    let lon = (lon16 as f64 / CODE_MAX * LON_SPAN - 180.0).clamp(-180.0, 180.0);
    GeoLocation::new(lat, lon).expect("decoded coordinates are clamped into range")
}

/// The location a registration will have after a trip through the wire.
pub fn snap_location(loc: GeoLocation) -> GeoLocation {
    let (lat, lon) = encode_location16(loc);
    decode_location16(lat, lon)
}

/// Returns `r` with its location moved onto the 16-bit wire grid, so that
/// encoding and decoding reproduce it exactly.
pub fn snap_registration(r: Registration) -> Registration {
    let loc = snap_location(r.location());
    r.with_location(loc)
}

fn put_payload(out: &mut Vec<u8>, payload: &Payload) {
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    for (k, v) in payload.entries() {
        out.push(k.len() as u8);
        out.extend_from_slice(k.as_bytes());
        out.extend_from_slice(&(v.len() as u16).to_be_bytes());
        out.extend_from_slice(v);
    }
}

fn check_len(out: Vec<u8>) -> Result<Vec<u8>, CodecError> {
    if out.len() > MAX_PACKET_LEN {
        return Err(CodecError::PayloadTooLarge(out.len()));
    }
    Ok(out)
}

/// Encodes just a payload block. Used as the plaintext of encrypted payloads.
pub fn encode_payload_block(payload: &Payload) -> Vec<u8> {
    let mut out = Vec::new();
    put_payload(&mut out, payload);
    out
}

pub fn decode_payload_block(bytes: &[u8], scope: PayloadScope) -> Result<Payload, CodecError> {
    let mut r = Reader::new(bytes);
    let p = r.payload(scope)?;
    r.finish()?;
    Ok(p)
}

pub fn encode_entity_packet(p: &EntityPacket) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(18);
    out.extend_from_slice(&p.guid.to_bytes());
    put_payload(&mut out, &p.local_payload);
    check_len(out)
}

pub fn decode_entity_packet(bytes: &[u8]) -> Result<EntityPacket, CodecError> {
    let mut r = Reader::new(bytes);
    let guid = r.guid()?;
    let local_payload = r.payload(PayloadScope::Local)?;
    r.finish()?;
    Ok(EntityPacket {
        guid,
        local_payload,
    })
}

pub fn encode_registration_packet(reg: &Registration) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(MIN_REGISTRATION_LEN + 16 * reg.neighbors().len());
    out.extend_from_slice(&reg.entity().to_bytes());
    if reg.neighbors().len() > u16::MAX as usize {
        return Err(CodecError::PayloadTooLarge(16 * reg.neighbors().len()));
    }
    out.extend_from_slice(&(reg.neighbors().len() as u16).to_be_bytes());
    for n in reg.neighbors() {
        out.extend_from_slice(&n.to_bytes());
    }
    let (lat, lon) = encode_location16(reg.location());
    out.extend_from_slice(&lat.to_be_bytes());
    out.extend_from_slice(&lon.to_be_bytes());
    out.extend_from_slice(&reg.time().seconds().to_be_bytes());
    out.push(match reg.resolution() {
        Resolution::Low => 0,
        Resolution::High => 1,
    });
    put_payload(&mut out, reg.payload());
    check_len(out)
}

pub fn decode_registration_packet(bytes: &[u8]) -> Result<Registration, CodecError> {
    let mut r = Reader::new(bytes);
    let reg = r.registration()?;
    r.finish()?;
    Ok(reg)
}

/// Decodes a concatenation of registration packets, as stored in a block body.
pub fn decode_registration_stream(bytes: &[u8]) -> Result<Vec<Registration>, CodecError> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    while !r.is_empty() {
        out.push(r.registration()?);
    }
    Ok(out)
}

/// Cursor over a byte slice that reports the first shortfall.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().expect("eight bytes")))
    }

    fn guid(&mut self) -> Result<Guid, CodecError> {
        let b = self.take(16)?;
        Ok(Guid::from_bytes(b.try_into().expect("sixteen bytes")))
    }

    fn payload(&mut self, scope: PayloadScope) -> Result<Payload, CodecError> {
        let count = self.u16()? as usize;
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let klen = self.u8()? as usize;
            let key = self.take(klen)?;
            let key = std::str::from_utf8(key)
                .map_err(|_| CodecError::MalformedPayload("key is not ASCII".into()))?;
            let vlen = self.u16()? as usize;
            let value = self.take(vlen)?;
            entries.push((key.to_owned(), value.to_vec()));
        }
        Ok(Payload::new(scope, entries)?)
    }

    fn registration(&mut self) -> Result<Registration, CodecError> {
        let entity = self.guid()?;
        let count = self.u16()? as usize;
        let mut neighbors = Vec::with_capacity(count);
        for _ in 0..count {
            neighbors.push(self.guid()?);
        }
        let lat = self.u16()?;
        let lon = self.u16()?;
        let secs = self.u64()?;
        let time = Timestamp::from_seconds(secs)
            .map_err(|e| CodecError::InvalidField(e.to_string()))?;
        let resolution = match self.u8()? {
            0 => Resolution::Low,
            1 => Resolution::High,
            other => {
                return Err(CodecError::InvalidField(format!(
                    "resolution flag {other}"
                )))
            }
        };
        let payload = self.payload(PayloadScope::Global)?;
        Ok(Registration::new(
            entity,
            neighbors,
            decode_location16(lat, lon),
            time,
            payload,
            resolution,
        )?)
    }

    fn finish(&self) -> Result<(), CodecError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

/// Human-readable rendering of a packet given as raw bytes. Tries the
/// registration layout first, then the entity layout.
pub fn dump(bytes: &[u8]) -> Result<String, CodecError> {
    let mut out = String::new();
    match decode_registration_packet(bytes) {
        Ok(reg) => {
            let (lat16, lon16) = encode_location16(reg.location());
            writeln!(out, "kind registration").ok();
            writeln!(out, "entity {}", reg.entity()).ok();
            writeln!(out, "neighbors {}", reg.neighbors().len()).ok();
            for n in reg.neighbors() {
                writeln!(out, "neighbor {n}").ok();
            }
            writeln!(
                out,
                "location {:.6} {:.6} lat16={lat16} lon16={lon16}",
                reg.location().latitude(),
                reg.location().longitude()
            )
            .ok();
            writeln!(out, "time {} {}", reg.time().seconds(), reg.time()).ok();
            writeln!(
                out,
                "resolution {}",
                match reg.resolution() {
                    Resolution::High => "high",
                    Resolution::Low => "low",
                }
            )
            .ok();
            dump_payload(&mut out, reg.payload());
        }
        Err(reg_err) => {
            let packet = decode_entity_packet(bytes).map_err(|_| reg_err)?;
            writeln!(out, "kind entity").ok();
            writeln!(out, "entity {}", packet.guid).ok();
            dump_payload(&mut out, &packet.local_payload);
        }
    }
    Ok(out)
}

fn dump_payload(out: &mut String, payload: &Payload) {
    writeln!(out, "payload {}", payload.len()).ok();
    for (k, v) in payload.entries() {
        writeln!(out, "entry {k} {}", hex::encode(v)).ok();
    }
}
