use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Identifier of a feature, e.g. `org.acme.guibuilder`.
///
/// Always stored lowercase; only `[a-z0-9._-]` is accepted after normalization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        let value = raw.to_ascii_lowercase();
        if value.is_empty() {
            return Err(ModelError::InvalidFeatureId(raw.to_string()));
        }
        let ok = value
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'.' | b'_' | b'-'));
        if !ok {
            return Err(ModelError::InvalidFeatureId(raw.to_string()));
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// A UI element contributed by a feature (view, editor, toolbar...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartId(String);

impl PartId {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        if raw.is_empty() || raw.chars().any(char::is_control) {
            return Err(ModelError::InvalidPartId(raw.to_string()));
        }
        Ok(Self(super::nfc(raw)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// A user account of the shape `name@realm`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(String);

impl UserId {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        let invalid = || ModelError::InvalidUserId(raw.to_string());
        let (name, realm) = raw.split_once('@').ok_or_else(invalid)?;
        if name.is_empty() || realm.is_empty() || realm.contains('@') {
            return Err(invalid());
        }
        if raw.chars().any(|c| c.is_whitespace() || c.is_control() || c == ',') {
            return Err(invalid());
        }
        Ok(Self(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part before the `@`.
    pub fn name(&self) -> &str {
        self.0.split_once('@').map(|(n, _)| n).unwrap_or(&self.0)
    }
}

macro_rules! string_newtype_impls {
    ($ty:ident) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $ty {
            type Err = ModelError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                Self::new(&raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_newtype_impls!(FeatureId);
string_newtype_impls!(PartId);
string_newtype_impls!(UserId);
