//! Canonical binary encoding of [`RegisterState`].
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! magic "MVRR" | version u8 | policy kind u8
//! entry count u64 | entries: replica (u32 len + bytes), counter u64, value (u32 len + bytes)
//! context count u64 | context: replica (u32 len + bytes), counter u64
//! ```
//!
//! Entries are sorted by dot and context entries by replica, so equal
//! states encode to identical bytes. Decoding rejects anything that is not
//! in this canonical form.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clock::{Dot, ReplicaId, VersionVector};
use crate::order::{LwwValue, OrderKind, ValueOrder};
use crate::register::RegisterState;

pub const MAGIC: [u8; 4] = *b"MVRR";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed input at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported format version {found} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion { found: u8 },
    #[error("state was encoded under a {encoded} order but decoded with a {supplied} order")]
    PolicyMismatch { encoded: OrderKind, supplied: OrderKind },
}

/// Byte representation of register values.
pub trait ValueCodec: Sized {
    fn encode_value(&self, out: &mut Vec<u8>);
    fn decode_value(bytes: &[u8]) -> Result<Self, String>;
}

impl ValueCodec for String {
    fn encode_value(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.as_bytes());
    }

    fn decode_value(bytes: &[u8]) -> Result<Self, String> {
        String::from_utf8(bytes.to_vec()).map_err(|e| e.to_string())
    }
}

impl ValueCodec for Vec<u8> {
    fn encode_value(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self);
    }

    fn decode_value(bytes: &[u8]) -> Result<Self, String> {
        Ok(bytes.to_vec())
    }
}

impl ValueCodec for u64 {
    fn encode_value(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }

    fn decode_value(bytes: &[u8]) -> Result<Self, String> {
        let arr: [u8; 8] = bytes
            .try_into()
            .map_err(|_| format!("expected 8 bytes, got {}", bytes.len()))?;
        Ok(u64::from_be_bytes(arr))
    }
}

impl ValueCodec for i64 {
    fn encode_value(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }

    fn decode_value(bytes: &[u8]) -> Result<Self, String> {
        let arr: [u8; 8] = bytes
            .try_into()
            .map_err(|_| format!("expected 8 bytes, got {}", bytes.len()))?;
        Ok(i64::from_be_bytes(arr))
    }
}

/// timestamp u64 | writer (u32 len + bytes) | sequence u64 | payload
impl<P: ValueCodec> ValueCodec for LwwValue<P> {
    fn encode_value(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        put_bytes(out, self.writer.as_str().as_bytes());
        out.extend_from_slice(&self.sequence.to_be_bytes());
        self.payload.encode_value(out);
    }

    fn decode_value(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        let inner = |r: &mut Reader| -> Result<Self, DecodeError> {
            let timestamp = r.u64()?;
            let writer = r.replica()?;
            let sequence = r.u64()?;
            let payload = P::decode_value(r.rest()).map_err(|reason| r.malformed(reason))?;
            Ok(LwwValue {
                payload,
                timestamp,
                writer,
                sequence,
            })
        };
        inner(&mut r).map_err(|e| e.to_string())
    }
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn encode_state<V: ValueCodec + Clone + Ord>(state: &RegisterState<V>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.push(state.policy().kind().tag());

    out.extend_from_slice(&(state.entries().len() as u64).to_be_bytes());
    let mut scratch = Vec::new();
    for (dot, value) in state.entries() {
        put_bytes(&mut out, dot.replica.as_str().as_bytes());
        out.extend_from_slice(&dot.counter.to_be_bytes());
        scratch.clear();
        value.encode_value(&mut scratch);
        put_bytes(&mut out, &scratch);
    }

    out.extend_from_slice(&(state.context().len() as u64).to_be_bytes());
    for (replica, counter) in state.context().iter() {
        put_bytes(&mut out, replica.as_str().as_bytes());
        out.extend_from_slice(&counter.to_be_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn malformed(&self, reason: impl Into<String>) -> DecodeError {
        DecodeError::Malformed {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.malformed(format!("need {n} bytes, {} remain", self.bytes.len() - self.pos)));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    fn replica(&mut self) -> Result<ReplicaId, DecodeError> {
        let start = self.pos;
        let raw = self.field()?;
        let s = std::str::from_utf8(raw).map_err(|_| DecodeError::Malformed {
            offset: start,
            reason: "replica id is not UTF-8".into(),
        })?;
        Ok(ReplicaId::from(s))
    }

    fn rest(&mut self) -> &'a [u8] {
        let slice = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        slice
    }
}

/// Inverse of [`encode_state`]. `policy` must be of the kind recorded in
/// the bytes.
pub fn decode_state<V: ValueCodec + Clone + Ord>(
    bytes: &[u8],
    policy: ValueOrder<V>,
) -> Result<RegisterState<V>, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(DecodeError::Malformed {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(DecodeError::UnsupportedVersion { found: version });
    }
    let tag_at = r.pos;
    let tag = r.u8()?;
    let encoded = OrderKind::from_tag(tag).ok_or_else(|| DecodeError::Malformed {
        offset: tag_at,
        reason: format!("unknown policy kind {tag}"),
    })?;
    if encoded != policy.kind() {
        return Err(DecodeError::PolicyMismatch {
            encoded,
            supplied: policy.kind(),
        });
    }

    let count = r.u64()?;
    let mut values = BTreeMap::new();
    let mut previous: Option<Dot> = None;
    for _ in 0..count {
        let at = r.pos;
        let replica = r.replica()?;
        let counter = r.u64()?;
        if counter == 0 {
            return Err(DecodeError::Malformed {
                offset: at,
                reason: "dot counter is zero".into(),
            });
        }
        let dot = Dot { replica, counter };
        if previous.as_ref().is_some_and(|p| *p >= dot) {
            return Err(DecodeError::Malformed {
                offset: at,
                reason: format!("entry {dot} out of canonical order"),
            });
        }
        let value_at = r.pos;
        let raw = r.field()?;
        let value = V::decode_value(raw).map_err(|reason| DecodeError::Malformed {
            offset: value_at,
            reason: format!("bad value: {reason}"),
        })?;
        previous = Some(dot.clone());
        values.insert(dot, value);
    }

    let count = r.u64()?;
    let mut context = VersionVector::new();
    let mut previous: Option<ReplicaId> = None;
    for _ in 0..count {
        let at = r.pos;
        let replica = r.replica()?;
        let counter = r.u64()?;
        if counter == 0 {
            return Err(DecodeError::Malformed {
                offset: at,
                reason: "zero context entry".into(),
            });
        }
        if previous.as_ref().is_some_and(|p| *p >= replica) {
            return Err(DecodeError::Malformed {
                offset: at,
                reason: format!("context entry {replica} out of canonical order"),
            });
        }
        previous = Some(replica.clone());
        context.set(replica, counter);
    }
    if r.pos != bytes.len() {
        return Err(r.malformed("trailing bytes"));
    }

    let state = RegisterState::from_parts(values, context, policy);
    state.check_invariants(false).map_err(|e| DecodeError::Malformed {
        offset: bytes.len(),
        reason: e.to_string(),
    })?;
    Ok(state)
}
