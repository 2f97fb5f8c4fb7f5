use serde::Deserialize;
use serde_json::{json, Value};

use super::canonical::{encode_value, parse_value};
use super::{CanonicalDocument, CodecError, CompositionId, Digest};
use crate::model::{Composition, CompositionDraft, FeatureRef, Placement, Timestamp, UserId};

/// Value of the `format` field in composition documents.
pub const COMPOSITION_FORMAT: u32 = 1;

fn content_value(d: &CompositionDraft) -> Value {
    json!({
        "created_at": d.created_at,
        "feature_refs": d.feature_refs,
        "format": COMPOSITION_FORMAT,
        "name": d.name,
        "owner": d.owner,
        "placements": d.placements,
        "screenshot": d.screenshot,
    })
}

/// Content hash of a composition's fields other than its id.
///
/// Expects the draft's lists in canonical order, as `CompositionDraft::seal` leaves them.
pub fn composition_id(d: &CompositionDraft) -> CompositionId {
    let doc = encode_value(&content_value(d)).expect("composition content has no floats");
    CompositionId(Digest::of(doc.as_bytes()))
}

pub fn serialize_composition(c: &Composition) -> CanonicalDocument {
    let mut value = content_value(c.draft());
    value["id"] = json!(c.id());
    encode_value(&value).expect("composition content has no floats")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositionDoc {
    created_at: Timestamp,
    feature_refs: Vec<FeatureRef>,
    format: u32,
    id: CompositionId,
    name: String,
    owner: UserId,
    placements: Vec<Placement>,
    screenshot: Digest,
}

/// Parses and verifies a composition document.
///
/// The document must be canonical and its `id` must match the recomputed
/// content hash.
pub fn deserialize_composition(bytes: &[u8]) -> Result<Composition, CodecError> {
    let value = parse_value(bytes)?;
    let doc: CompositionDoc =
        serde_json::from_value(value).map_err(|e| CodecError::SchemaViolation(e.to_string()))?;
    if doc.format != COMPOSITION_FORMAT {
        return Err(CodecError::SchemaViolation(format!("unsupported format {}", doc.format)));
    }
    let draft = CompositionDraft {
        name: doc.name,
        owner: doc.owner,
        feature_refs: doc.feature_refs,
        placements: doc.placements,
        screenshot: doc.screenshot,
        created_at: doc.created_at,
    };
    let composition = draft.seal().map_err(|e| CodecError::SchemaViolation(e.to_string()))?;
    if composition.id() != &doc.id {
        return Err(CodecError::HashMismatch { stated: doc.id, computed: *composition.id() });
    }
    if serialize_composition(&composition).as_bytes() != bytes {
        return Err(CodecError::NonCanonical);
    }
    Ok(composition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureId, PartId, Rect, Version};

    fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }

    fn empty() -> CompositionDraft {
        CompositionDraft {
            name: String::new(),
            owner: UserId::new("john@acme").unwrap(),
            feature_refs: vec![],
            placements: vec![],
            screenshot: Digest::of(b""),
            created_at: Timestamp(0),
        }
    }

    fn gui() -> CompositionDraft {
        CompositionDraft {
            name: "GUI Development".into(),
            feature_refs: vec![
                FeatureRef::new(fid("org.eclipse.wb"), Version::new(1, 2, 0)),
                FeatureRef::new(fid("org.eclipse.jdt"), Version::new(3, 8, 0)),
            ],
            placements: vec![
                Placement::new(PartId::new("palette").unwrap(), fid("org.eclipse.wb"), Rect::new(0.7, 0.1, 0.3, 0.9).unwrap()),
                Placement::new(PartId::new("editor").unwrap(), fid("org.eclipse.jdt"), Rect::new(0.2, 0.1, 0.5, 0.9).unwrap()),
            ],
            screenshot: Digest::of(b"\x89PNG fake"),
            created_at: Timestamp(1_356_998_400),
            ..empty()
        }
    }

    // id computed with `sha256sum` over the id-less document; a change here is a wire-format break.
    const EMPTY_DOC: &str = concat!(
        r#"{"created_at":0,"feature_refs":[],"format":1,"#,
        r#""id":"9f57f289ba270337e2a001fcdf352c409e3df3b57ebbcfecc4cc192eabb7a739","#,
        r#""name":"","owner":"john@acme","placements":[],"#,
        r#""screenshot":"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"}"#
    );

    #[test]
    fn empty_composition_document_is_fixed() {
        let c = empty().seal().unwrap();
        let doc = serialize_composition(&c);
        let content = doc.as_str().replace(&format!(r#""id":"{}","#, c.id()), "");
        assert_eq!(c.id().0, Digest::of(content.as_bytes()));
        assert_eq!(doc.as_str(), EMPTY_DOC);
    }

    #[test]
    fn round_trip() {
        let c = gui().seal().unwrap();
        let doc = serialize_composition(&c);
        assert_eq!(deserialize_composition(doc.as_bytes()).unwrap(), c);
    }

    #[test]
    fn rect_serialized_as_micro_units() {
        let doc = serialize_composition(&gui().seal().unwrap());
        assert!(doc.as_str().contains(r#""region":{"h":900000,"w":300000,"x":700000,"y":100000}"#));
    }

    #[test]
    fn altered_id_is_hash_mismatch() {
        let c = gui().seal().unwrap();
        let text = serialize_composition(&c).as_str().to_string();
        let hex = c.id().to_string();
        let flipped = if hex.starts_with('0') { format!("1{}", &hex[1..]) } else { format!("0{}", &hex[1..]) };
        let tampered = text.replace(&hex, &flipped);
        assert!(matches!(deserialize_composition(tampered.as_bytes()), Err(CodecError::HashMismatch { .. })));
    }

    #[test]
    fn dangling_placement_is_schema_violation() {
        let c = gui().seal().unwrap();
        let text = serialize_composition(&c).as_str().replace(r#""feature":"org.eclipse.wb""#, r#""feature":"org.other""#);
        assert!(matches!(deserialize_composition(text.as_bytes()), Err(CodecError::SchemaViolation(_))));
    }

    #[test]
    fn missing_or_extra_fields_are_schema_violations() {
        let text = serialize_composition(&gui().seal().unwrap()).as_str().to_string();
        let extra = text.replacen('{', r#"{"zzz":1,"#, 1);
        assert!(matches!(deserialize_composition(extra.as_bytes()), Err(CodecError::SchemaViolation(_))));
        let missing = text.replace(r#""created_at":1356998400,"#, "");
        assert!(matches!(deserialize_composition(missing.as_bytes()), Err(CodecError::SchemaViolation(_))));
        let bad_format = text.replace(r#""format":1"#, r#""format":2"#);
        assert!(matches!(deserialize_composition(bad_format.as_bytes()), Err(CodecError::SchemaViolation(_))));
    }

    #[test]
    fn non_canonical_rejected() {
        let text = serialize_composition(&gui().seal().unwrap()).as_str().replace(',', ", ");
        assert_eq!(deserialize_composition(text.as_bytes()), Err(CodecError::NonCanonical));
        assert!(matches!(deserialize_composition(b"{not json"), Err(CodecError::MalformedDocument(_))));
    }

    #[test]
    fn ids_are_deterministic_and_sensitive() {
        assert_eq!(composition_id(&gui()), composition_id(&gui()));
        let one_ref = CompositionDraft {
            feature_refs: vec![FeatureRef::new(fid("a"), Version::new(1, 0, 0))],
            ..empty()
        };
        assert_ne!(empty().seal().unwrap().id(), one_ref.seal().unwrap().id());
        let other_shot = CompositionDraft { screenshot: Digest::of(b"\x89PNG other"), ..gui() };
        assert_ne!(gui().seal().unwrap().id(), other_shot.seal().unwrap().id());
    }

    #[test]
    fn all_input_orderings_give_identical_bytes() {
        let base = CompositionDraft {
            feature_refs: vec![
                FeatureRef::new(fid("c"), Version::new(1, 0, 0)),
                FeatureRef::new(fid("a"), Version::new(1, 0, 0)),
                FeatureRef::new(fid("b"), Version::new(2, 0, 0)),
            ],
            ..empty()
        };
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let docs: Vec<_> = perms
            .iter()
            .map(|p| {
                let refs = p.iter().map(|&i| base.feature_refs[i].clone()).collect();
                serialize_composition(&CompositionDraft { feature_refs: refs, ..base.clone() }.seal().unwrap())
            })
            .collect();
        assert!(docs.windows(2).all(|w| w[0] == w[1]));
    }
}
