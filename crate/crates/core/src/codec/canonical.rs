use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use unicode_normalization::{is_nfc, UnicodeNormalization};

use super::CodecError;

/// Bytes of a value in canonical form: compact JSON with object keys sorted
/// bytewise, integers only, and NFC-normalized strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalDocument(Vec<u8>);

impl CanonicalDocument {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("canonical documents are UTF-8")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<CanonicalDocument, CodecError> {
    let value = serde_json::to_value(value).map_err(|e| CodecError::SchemaViolation(e.to_string()))?;
    encode_value(&value)
}

pub(crate) fn encode_value(value: &Value) -> Result<CanonicalDocument, CodecError> {
    let normalized = normalize(value)?;
    // serde_json's Map is a BTreeMap here, so keys come out sorted.
    let bytes = serde_json::to_vec(&normalized).map_err(|e| CodecError::SchemaViolation(e.to_string()))?;
    Ok(CanonicalDocument(bytes))
}

fn normalize(value: &Value) -> Result<Value, CodecError> {
    Ok(match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => return Err(CodecError::FloatNotAllowed),
        Value::String(s) if !is_nfc(s) => Value::String(s.nfc().collect()),
        Value::Array(items) => Value::Array(items.iter().map(normalize).collect::<Result<_, _>>()?),
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                out.insert(k.nfc().collect(), normalize(v)?);
            }
            Value::Object(out)
        }
        other => other.clone(),
    })
}

pub(crate) fn parse_value(bytes: &[u8]) -> Result<Value, CodecError> {
    serde_json::from_slice(bytes).map_err(|e| CodecError::MalformedDocument(e.to_string()))
}

/// Decodes a document that must already be in canonical form.
pub fn from_strict<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    let value = parse_value(bytes)?;
    if encode_value(&value)?.as_bytes() != bytes {
        return Err(CodecError::NonCanonical);
    }
    serde_json::from_value(value).map_err(|e| CodecError::SchemaViolation(e.to_string()))
}

/// Decodes any well-formed JSON document.
pub fn from_lenient<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    let value = parse_value(bytes)?;
    serde_json::from_value(value).map_err(|e| CodecError::SchemaViolation(e.to_string()))
}
