//! Checkpoint container, version 1.
//!
//! ```text
//! "DSWM0001" | u64 LE header length | JSON header | f32 LE payload
//! ```
//!
//! The header is `{"tensors":{name:{"dtype":"f32","shape":[..],"offset":o,"nbytes":b}}}`
//! with names sorted and offsets contiguous from 0 in name order. Offsets are
//! relative to the start of the payload.

use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::{MergeError, Tensor, TensorMap};

pub const MAGIC: &[u8; 8] = b"DSWM0001";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    nbytes: u64,
}

#[derive(Serialize)]
struct Header<'a> {
    tensors: std::collections::BTreeMap<&'a str, Entry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    tensors: OrderedEntries,
}

/// Header entries in file order, duplicates preserved so they can be rejected.
struct OrderedEntries(Vec<(String, Entry)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of tensor entries")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Entry>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }
        d.deserialize_map(EntriesVisitor)
    }
}

pub fn encode(map: &TensorMap) -> Vec<u8> {
    let mut offset = 0u64;
    let mut header = Header { tensors: Default::default() };
    for (name, tensor) in map.iter() {
        let nbytes = 4 * tensor.len() as u64;
        header.tensors.insert(
            name.as_str(),
            Entry { dtype: "f32".into(), shape: tensor.shape().to_vec(), offset, nbytes },
        );
        offset += nbytes;
    }
    let json = serde_json::to_vec(&header).expect("header serialization is infallible");

    let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, tensor) in map.iter() {
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TensorMap, MergeError> {
    let format = |msg: String| MergeError::Format(msg);
    if bytes.len() < 16 {
        return Err(format("file shorter than the fixed preamble".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(format("bad magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = 16u64
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len() as u64)
        .ok_or_else(|| format(format!("header length {header_len} exceeds file size")))?
        as usize;
    let raw: RawHeader = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| format(format!("header JSON: {e}")))?;
    let payload = &bytes[header_end..];

    let mut map = TensorMap::new();
    let mut expected_offset = 0u64;
    let mut previous: Option<&str> = None;
    for (name, entry) in &raw.tensors.0 {
        if map.contains(name) {
            return Err(MergeError::DuplicateName(name.clone()));
        }
        if previous.is_some_and(|p| p >= name.as_str()) {
            return Err(format(format!("tensor names not in canonical order at {name:?}")));
        }
        previous = Some(name);
        if entry.dtype != "f32" {
            return Err(MergeError::UnsupportedDtype { name: name.clone(), dtype: entry.dtype.clone() });
        }
        let count: u64 = entry.shape.iter().map(|&d| d as u64).product();
        if entry.nbytes != 4 * count {
            return Err(format(format!(
                "{name}: shape {:?} implies {} bytes but nbytes is {}",
                entry.shape,
                4 * count,
                entry.nbytes
            )));
        }
        if entry.offset != expected_offset {
            return Err(format(format!(
                "{name}: offset {} is not contiguous (expected {expected_offset})",
                entry.offset
            )));
        }
        let end = entry.offset + entry.nbytes;
        if end > payload.len() as u64 {
            return Err(format(format!(
                "payload length {} too short for {name} ending at {end}",
                payload.len()
            )));
        }
        let data = payload[entry.offset as usize..end as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        map.insert(name.clone(), Tensor::new(entry.shape.clone(), data)?)?;
        expected_offset = end;
    }
    if expected_offset != payload.len() as u64 {
        return Err(format(format!(
            "payload length {} does not match header total {expected_offset}",
            payload.len()
        )));
    }
    Ok(map)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TensorMap, MergeError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| MergeError::Io(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

pub fn save_checkpoint(map: &TensorMap, path: impl AsRef<Path>) -> Result<(), MergeError> {
    let path = path.as_ref();
    std::fs::write(path, encode(map)).map_err(|e| MergeError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorMap {
        let mut m = TensorMap::new();
        m.insert("w2", Tensor::new(vec![2, 2], vec![1.0, -2.0, 3.5, f32::MIN_POSITIVE]).unwrap())
            .unwrap();
        m.insert("b", Tensor::new(vec![3], vec![0.1, 0.2, -0.0]).unwrap()).unwrap();
        m.insert("s", Tensor::scalar(f32::MAX)).unwrap();
        m
    }

    fn bits(m: &TensorMap) -> Vec<(String, Vec<u32>)> {
        m.iter().map(|(n, t)| (n.clone(), t.data().iter().map(|v| v.to_bits()).collect())).collect()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = sample();
        let bytes = encode(&m);
        let back = decode(&bytes).unwrap();
        assert_eq!(bits(&back), bits(&m));
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..8], b"DSWM0001");
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + len]).unwrap();
        assert_eq!(
            header,
            r#"{"tensors":{"b":{"dtype":"f32","shape":[3],"offset":0,"nbytes":12},"s":{"dtype":"f32","shape":[],"offset":12,"nbytes":4},"w2":{"dtype":"f32","shape":[2,2],"offset":16,"nbytes":16}}}"#
        );
        assert_eq!(bytes.len(), 16 + len + 32);
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode(&sample());
        let err = decode(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("payload length"), "{err}");
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().to_string().contains("magic"));
    }

    fn with_header(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn duplicate_name_in_header() {
        let header = r#"{"tensors":{"a":{"dtype":"f32","shape":[1],"offset":0,"nbytes":4},"a":{"dtype":"f32","shape":[1],"offset":4,"nbytes":4}}}"#;
        let err = decode(&with_header(header, &[0; 8])).unwrap_err();
        assert_eq!(err, MergeError::DuplicateName("a".into()));
    }

    #[test]
    fn shape_length_mismatch() {
        let header = r#"{"tensors":{"a":{"dtype":"f32","shape":[2],"offset":0,"nbytes":4}}}"#;
        assert!(decode(&with_header(header, &[0; 4])).is_err());
    }

    #[test]
    fn other_dtypes_rejected() {
        let header = r#"{"tensors":{"a":{"dtype":"f16","shape":[2],"offset":0,"nbytes":4}}}"#;
        assert!(matches!(
            decode(&with_header(header, &[0; 4])),
            Err(MergeError::UnsupportedDtype { .. })
        ));
    }

    #[test]
    fn non_contiguous_offsets_rejected() {
        let header = r#"{"tensors":{"a":{"dtype":"f32","shape":[1],"offset":4,"nbytes":4}}}"#;
        assert!(decode(&with_header(header, &[0; 8])).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode(&sample());
        bytes.push(0);
        assert!(decode(&bytes).is_err());
    }
}
