//! Single-file tensor checkpoint archive.
//!
//! Layout: bytes 0..8 hold a little-endian u64 header length `N`, bytes
//! 8..8+N hold a UTF-8 JSON object mapping tensor names to
//! `{"dtype", "shape", "data_offsets"}` (offsets relative to byte 8+N),
//! with an optional `"__metadata__"` string map; the rest is raw
//! little-endian tensor payload. The layout matches the de-facto
//! single-file archive used by public model hubs, so published
//! checkpoints load unmodified.
//!
//! Values decode to f32 on read; conversion to a 16-bit storage format
//! happens only at write time. Writes are canonical: tensors are laid
//! out in lexicographic name order, so writing the same checkpoint twice
//! yields byte-identical files.

mod half;

pub use half::{decode_half, encode_half, encode_half_saturating, HalfFormat, BF16_MAX, F16_MAX};

use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("file too small for the 8-byte header-length prefix")]
    TruncatedPrefix,
    #[error("header length {header} exceeds file size {file}")]
    HeaderPastEof { header: u64, file: u64 },
    #[error("malformed header JSON: {0}")]
    MalformedHeader(String),
    #[error("unknown dtype {0:?}")]
    UnknownDtype(String),
    #[error("tensor name must be a non-empty string")]
    EmptyName,
    #[error("tensor {name}: data range {begin}..{end} out of bounds (payload has {payload} bytes)")]
    RangeOutOfBounds {
        name: String,
        begin: usize,
        end: usize,
        payload: usize,
    },
    #[error("tensor {name}: byte length {got} does not match shape and dtype (expected {want})")]
    SizeMismatch { name: String, got: usize, want: usize },
    #[error("data regions overlap or leave a gap at offset {offset}")]
    NonContiguous { offset: usize },
    #[error("tensor {name}: {got} values do not match shape product {want}")]
    ValueCountMismatch { name: String, got: usize, want: usize },
    #[error("tensor {name}: value {value} is not representable as {dtype} with saturation disabled")]
    Unrepresentable {
        name: String,
        value: f32,
        dtype: Dtype,
    },
}

/// Storage element type of a tensor payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dtype {
    F32,
    F16,
    BF16,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F16 | Dtype::BF16 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "F32",
            Dtype::F16 => "F16",
            Dtype::BF16 => "BF16",
        }
    }

    pub fn parse(s: &str) -> Option<Dtype> {
        match s {
            "F32" => Some(Dtype::F32),
            "F16" => Some(Dtype::F16),
            "BF16" => Some(Dtype::BF16),
            _ => None,
        }
    }

    fn half_format(self) -> Option<HalfFormat> {
        match self {
            Dtype::F32 => None,
            Dtype::F16 => Some(HalfFormat::F16),
            Dtype::BF16 => Some(HalfFormat::Bf16),
        }
    }
}

impl std::fmt::Display for Dtype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One dense tensor: declared storage dtype, row-major shape, and values
/// widened to f32.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl TensorRecord {
    /// Builds a record, checking that the value count matches the shape
    /// product (the empty product is 1, so rank-0 tensors hold one value).
    pub fn new(dtype: Dtype, shape: Vec<usize>, values: Vec<f32>) -> Result<Self, ArchiveError> {
        let want = element_count(&shape);
        if values.len() != want {
            return Err(ArchiveError::ValueCountMismatch {
                name: String::new(),
                got: values.len(),
                want,
            });
        }
        Ok(TensorRecord {
            dtype,
            shape,
            values,
        })
    }

    pub fn element_count(&self) -> usize {
        element_count(&self.shape)
    }
}

pub fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// A named, ordered collection of tensors plus optional string metadata.
/// Immutable after load; safe to share across threads for reading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorCheckpoint {
    pub tensors: BTreeMap<String, TensorRecord>,
    pub metadata: Option<BTreeMap<String, String>>,
}

impl TensorCheckpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, record: TensorRecord) -> Result<(), ArchiveError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ArchiveError::EmptyName);
        }
        self.tensors.insert(name, record);
        Ok(())
    }
}

/// Controls dtype conversion at write time.
#[derive(Debug, Clone, Copy)]
pub struct WriteOptions {
    /// Target dtype for every tensor; `None` keeps each record's own dtype.
    pub dtype: Option<Dtype>,
    /// When true (the default), finite values that overflow a 16-bit format
    /// clamp to its maximum finite magnitude instead of becoming infinity.
    pub saturate: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            dtype: None,
            saturate: true,
        }
    }
}

impl WriteOptions {
    pub fn with_dtype(dtype: Dtype) -> Self {
        WriteOptions {
            dtype: Some(dtype),
            ..Default::default()
        }
    }
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<TensorCheckpoint, ArchiveError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    checkpoint_from_bytes(&bytes)
}

pub fn write_checkpoint(
    ckpt: &TensorCheckpoint,
    path: impl AsRef<Path>,
    opts: &WriteOptions,
) -> Result<(), ArchiveError> {
    let path = path.as_ref();
    let bytes = checkpoint_to_bytes(ckpt, opts)?;
    std::fs::write(path, bytes).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Decodes an archive image. All tensors are validated against the header
/// (bounds, sizes, contiguity) before any values are decoded.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TensorCheckpoint, ArchiveError> {
    if bytes.len() < 8 {
        return Err(ArchiveError::TruncatedPrefix);
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let file_len = bytes.len() as u64;
    if header_len > file_len - 8 {
        return Err(ArchiveError::HeaderPastEof {
            header: header_len,
            file: file_len,
        });
    }
    let header_end = 8 + header_len as usize;
    let header: Value = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| ArchiveError::MalformedHeader(e.to_string()))?;
    let Value::Object(entries) = header else {
        return Err(ArchiveError::MalformedHeader(
            "header is not a JSON object".into(),
        ));
    };
    let payload = &bytes[header_end..];

    let mut ckpt = TensorCheckpoint::new();
    let mut regions: Vec<(usize, usize)> = Vec::new();
    for (name, entry) in &entries {
        if name == METADATA_KEY {
            ckpt.metadata = Some(parse_metadata(entry)?);
            continue;
        }
        if name.is_empty() {
            return Err(ArchiveError::EmptyName);
        }
        let (dtype, shape, begin, end) = parse_tensor_entry(name, entry)?;
        if begin > end || end > payload.len() {
            return Err(ArchiveError::RangeOutOfBounds {
                name: name.clone(),
                begin,
                end,
                payload: payload.len(),
            });
        }
        let want = element_count(&shape) * dtype.width();
        if end - begin != want {
            return Err(ArchiveError::SizeMismatch {
                name: name.clone(),
                got: end - begin,
                want,
            });
        }
        regions.push((begin, end));
        let values = decode_values(dtype, &payload[begin..end]);
        ckpt.tensors.insert(
            name.clone(),
            TensorRecord {
                dtype,
                shape,
                values,
            },
        );
    }

    // regions must tile the payload exactly: ascending, no overlap, no gap
    regions.sort_unstable();
    let mut cursor = 0usize;
    for (begin, end) in regions {
        if begin != cursor {
            return Err(ArchiveError::NonContiguous { offset: begin });
        }
        cursor = end;
    }
    if cursor != payload.len() {
        return Err(ArchiveError::NonContiguous { offset: cursor });
    }
    Ok(ckpt)
}

/// Encodes an archive image in canonical form: tensors in lexicographic
/// name order, compact JSON header, contiguous payload.
pub fn checkpoint_to_bytes(
    ckpt: &TensorCheckpoint,
    opts: &WriteOptions,
) -> Result<Vec<u8>, ArchiveError> {
    let mut header = Map::new();
    if let Some(meta) = &ckpt.metadata {
        let entries: Map<String, Value> = meta
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        header.insert(METADATA_KEY.to_string(), Value::Object(entries));
    }

    let mut payload = Vec::new();
    for (name, record) in &ckpt.tensors {
        if name.is_empty() {
            return Err(ArchiveError::EmptyName);
        }
        let want = record.element_count();
        if record.values.len() != want {
            return Err(ArchiveError::ValueCountMismatch {
                name: name.clone(),
                got: record.values.len(),
                want,
            });
        }
        let dtype = opts.dtype.unwrap_or(record.dtype);
        let begin = payload.len();
        encode_values(name, dtype, &record.values, opts.saturate, &mut payload)?;
        let end = payload.len();
        header.insert(
            name.clone(),
            json!({
                "dtype": dtype.name(),
                "shape": record.shape,
                "data_offsets": [begin, end],
            }),
        );
    }

    let header_bytes = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header_bytes.len() + payload.len());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn parse_metadata(entry: &Value) -> Result<BTreeMap<String, String>, ArchiveError> {
    let Value::Object(map) = entry else {
        return Err(ArchiveError::MalformedHeader(format!(
            "{METADATA_KEY} is not an object"
        )));
    };
    let mut meta = BTreeMap::new();
    for (k, v) in map {
        let Value::String(s) = v else {
            return Err(ArchiveError::MalformedHeader(format!(
                "{METADATA_KEY}.{k} is not a string"
            )));
        };
        meta.insert(k.clone(), s.clone());
    }
    Ok(meta)
}

fn parse_tensor_entry(
    name: &str,
    entry: &Value,
) -> Result<(Dtype, Vec<usize>, usize, usize), ArchiveError> {
    let bad = |what: &str| ArchiveError::MalformedHeader(format!("tensor {name}: {what}"));
    let Value::Object(fields) = entry else {
        return Err(bad("entry is not an object"));
    };
    let dtype_str = fields
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing dtype string"))?;
    let dtype =
        Dtype::parse(dtype_str).ok_or_else(|| ArchiveError::UnknownDtype(dtype_str.to_string()))?;
    let shape = fields
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing shape array"))?
        .iter()
        .map(|v| v.as_u64().map(|n| n as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("shape extents must be non-negative integers"))?;
    let offsets = fields
        .get("data_offsets")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing data_offsets array"))?;
    let [begin, end] = offsets.as_slice() else {
        return Err(bad("data_offsets must hold exactly [begin, end]"));
    };
    let begin = begin
        .as_u64()
        .ok_or_else(|| bad("data_offsets must be non-negative integers"))? as usize;
    let end = end
        .as_u64()
        .ok_or_else(|| bad("data_offsets must be non-negative integers"))? as usize;
    Ok((dtype, shape, begin, end))
}

fn decode_values(dtype: Dtype, bytes: &[u8]) -> Vec<f32> {
    match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        _ => {
            let format = dtype.half_format().unwrap();
            bytes
                .chunks_exact(2)
                .map(|b| decode_half(u16::from_le_bytes([b[0], b[1]]), format))
                .collect()
        }
    }
}

fn encode_values(
    name: &str,
    dtype: Dtype,
    values: &[f32],
    saturate: bool,
    out: &mut Vec<u8>,
) -> Result<(), ArchiveError> {
    match dtype {
        Dtype::F32 => {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        _ => {
            let format = dtype.half_format().unwrap();
            for &v in values {
                let bits = if saturate {
                    encode_half_saturating(v, format)
                } else {
                    let bits = encode_half(v, format);
                    if v.is_finite() && decode_half(bits, format).is_infinite() {
                        return Err(ArchiveError::Unrepresentable {
                            name: name.to_string(),
                            value: v,
                            dtype,
                        });
                    }
                    bits
                };
                out.extend_from_slice(&bits.to_le_bytes());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds an archive image by hand, independent of the writer.
    fn manual_archive(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn reads_handwritten_f32_archive() {
        let mut payload = Vec::new();
        payload.extend_from_slice(&1.0f32.to_le_bytes());
        payload.extend_from_slice(&2.0f32.to_le_bytes());
        let bytes = manual_archive(
            r#"{"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}}"#,
            &payload,
        );
        let ckpt = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(ckpt.tensors["w"].values, vec![1.0, 2.0]);
        assert_eq!(ckpt.tensors["w"].shape, vec![2]);
        assert_eq!(ckpt.tensors["w"].dtype, Dtype::F32);
    }

    #[test]
    fn roundtrip_is_byte_identical_for_canonical_files() {
        let mut ckpt = TensorCheckpoint::new();
        ckpt.insert(
            "a.weight",
            TensorRecord::new(Dtype::F16, vec![2, 2], vec![1.0, 0.5, -2.0, 0.0]).unwrap(),
        )
        .unwrap();
        ckpt.insert(
            "b.bias",
            TensorRecord::new(Dtype::F32, vec![3], vec![0.25, -0.75, 3.5]).unwrap(),
        )
        .unwrap();
        ckpt.metadata = Some(BTreeMap::from([("origin".to_string(), "test".to_string())]));

        let bytes = checkpoint_to_bytes(&ckpt, &WriteOptions::default()).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        let bytes2 = checkpoint_to_bytes(&reread, &WriteOptions::default()).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(reread, ckpt);
    }

    #[test]
    fn out_of_bounds_offsets_are_rejected() {
        let bytes = manual_archive(
            r#"{"w":{"dtype":"F32","shape":[2],"data_offsets":[0,1000]}}"#,
            &[0u8; 8],
        );
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::RangeOutOfBounds { .. })
        ));
    }

    #[test]
    fn header_past_eof_is_rejected() {
        let mut bytes = vec![0u8; 12];
        bytes[..8].copy_from_slice(&1000u64.to_le_bytes());
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::HeaderPastEof { .. })
        ));
    }

    #[test]
    fn malformed_header_json_is_rejected() {
        let bytes = manual_archive("{not json", &[]);
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::MalformedHeader(_))
        ));
    }

    #[test]
    fn unknown_dtype_is_rejected() {
        let bytes = manual_archive(
            r#"{"w":{"dtype":"I8","shape":[1],"data_offsets":[0,1]}}"#,
            &[0u8],
        );
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::UnknownDtype(s)) if s == "I8"
        ));
    }

    #[test]
    fn overlapping_regions_are_rejected() {
        let header = concat!(
            r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},"#,
            r#""b":{"dtype":"F32","shape":[1],"data_offsets":[2,6]}}"#
        );
        let bytes = manual_archive(header, &[0u8; 6]);
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::NonContiguous { .. })
        ));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let bytes = manual_archive(
            r#"{"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}}"#,
            &[0u8; 8],
        );
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(ArchiveError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn empty_checkpoint_roundtrips() {
        let ckpt = TensorCheckpoint::new();
        let bytes = checkpoint_to_bytes(&ckpt, &WriteOptions::default()).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        assert!(reread.tensors.is_empty());
    }

    #[test]
    fn f16_write_is_two_bytes_per_element_and_saturates() {
        let mut ckpt = TensorCheckpoint::new();
        ckpt.insert(
            "w",
            TensorRecord::new(Dtype::F32, vec![3], vec![1.0, 70000.0, -70000.0]).unwrap(),
        )
        .unwrap();
        let bytes =
            checkpoint_to_bytes(&ckpt, &WriteOptions::with_dtype(Dtype::F16)).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        let rec = &reread.tensors["w"];
        assert_eq!(rec.dtype, Dtype::F16);
        assert_eq!(rec.values, vec![1.0, 65504.0, -65504.0]);

        let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 8 + header_len + 3 * 2);
    }

    #[test]
    fn overflow_without_saturation_is_an_error() {
        let mut ckpt = TensorCheckpoint::new();
        ckpt.insert(
            "w",
            TensorRecord::new(Dtype::F32, vec![1], vec![70000.0]).unwrap(),
        )
        .unwrap();
        let opts = WriteOptions {
            dtype: Some(Dtype::F16),
            saturate: false,
        };
        assert!(matches!(
            checkpoint_to_bytes(&ckpt, &opts),
            Err(ArchiveError::Unrepresentable { .. })
        ));
    }

    #[test]
    fn infinities_pass_through_saturating_writes() {
        let mut ckpt = TensorCheckpoint::new();
        ckpt.insert(
            "w",
            TensorRecord::new(Dtype::F32, vec![2], vec![f32::INFINITY, f32::NEG_INFINITY])
                .unwrap(),
        )
        .unwrap();
        let bytes =
            checkpoint_to_bytes(&ckpt, &WriteOptions::with_dtype(Dtype::F16)).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(
            reread.tensors["w"].values,
            vec![f32::INFINITY, f32::NEG_INFINITY]
        );
    }

    #[test]
    fn rank0_tensor_roundtrips() {
        let mut ckpt = TensorCheckpoint::new();
        ckpt.insert(
            "norm_scale",
            TensorRecord::new(Dtype::F32, vec![], vec![2.5]).unwrap(),
        )
        .unwrap();
        let bytes = checkpoint_to_bytes(&ckpt, &WriteOptions::default()).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(reread.tensors["norm_scale"].shape, Vec::<usize>::new());
        assert_eq!(reread.tensors["norm_scale"].values, vec![2.5]);
    }

    #[test]
    fn record_with_wrong_value_count_is_rejected() {
        assert!(TensorRecord::new(Dtype::F32, vec![2, 2], vec![1.0]).is_err());
        assert!(TensorRecord::new(Dtype::F32, vec![0], vec![]).is_ok());
    }
}
