//! Canonical JSON serialization: object keys sorted, no insignificant
//! whitespace. Every file format and reliable-channel payload in the
//! workspace goes through these helpers so that identical values always
//! produce identical bytes.

use serde::Serialize;

/// Serialize to canonical JSON bytes (sorted keys, compact separators).
pub fn to_canonical_vec<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    // Round-tripping through `Value` sorts object keys: the underlying map
    // is a BTreeMap as long as serde_json's `preserve_order` feature stays
    // disabled workspace-wide.
    let value = serde_json::to_value(value)?;
    serde_json::to_vec(&value)
}

/// Serialize to a canonical JSON string.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    serde_json::to_string(&value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        zeta: u32,
        alpha: &'static str,
        mid: f64,
    }

    #[test]
    fn keys_are_sorted_and_output_is_compact() {
        let s = Sample { zeta: 1, alpha: "x", mid: 2.5 };
        assert_eq!(
            to_canonical_string(&s).unwrap(),
            r#"{"alpha":"x","mid":2.5,"zeta":1}"#
        );
    }

    #[test]
    fn nested_maps_are_sorted() {
        let v = serde_json::json!({"b": {"d": 1, "c": 2}, "a": [3, 2, 1]});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            r#"{"a":[3,2,1],"b":{"c":2,"d":1}}"#
        );
    }
}
