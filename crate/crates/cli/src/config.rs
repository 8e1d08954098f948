//! JSON configs layered as defaults <- config file <- `--set key=value`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Recursively overlays `top` onto `base`; objects merge, everything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Applies one dotted-path override. The value is parsed as JSON when
/// possible and taken as a string otherwise. Changing a nested `kind` tag
/// drops the sibling fields of the previous variant.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("bad override path '{path}'")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let obj = node.as_object_mut().unwrap();
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    if !node.is_object() {
        *node = Value::Object(Map::new());
    }
    let obj = node.as_object_mut().unwrap();
    let last = keys[keys.len() - 1];
    if keys.len() > 1 && last == "kind" && obj.get("kind") != Some(&value) {
        obj.clear();
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Resolves a config of type `T` from its defaults, an optional file and
/// overrides. Unknown keys are rejected by `T`'s deserializer.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<(T, Value), CliError> {
    let mut doc = serde_json::to_value(defaults).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let top: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        merge(&mut doc, top);
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: T = serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    let resolved = serde_json::to_value(&cfg).expect("config serializes");
    Ok((cfg, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        a: u32,
        inner: Inner,
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        x: f64,
        name: String,
    }

    fn demo() -> Demo {
        Demo {
            a: 1,
            inner: Inner {
                x: 0.5,
                name: "n".into(),
            },
        }
    }

    #[test]
    fn overrides_by_dotted_path() {
        let (d, _) = resolve(&demo(), None, &["inner.x=2.5".into(), "inner.name=abc".into()]).unwrap();
        assert_eq!(d.inner.x, 2.5);
        assert_eq!(d.inner.name, "abc");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            resolve(&demo(), None, &["inner.y=1".into()]),
            Err(CliError::Usage(_))
        ));
        assert!(resolve(&demo(), None, &["noequals".into()]).is_err());
        assert!(resolve(&demo(), None, &["a..b=1".into()]).is_err());
    }

    #[test]
    fn file_layer_merges() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"inner": {"x": 9}}"#).unwrap();
        let (d, v) = resolve(&demo(), Some(&p), &["a=3".into()]).unwrap();
        assert_eq!(
            d,
            Demo {
                a: 3,
                inner: Inner {
                    x: 9.0,
                    name: "n".into()
                }
            }
        );
        assert_eq!(v["inner"]["x"], json!(9.0));
    }

    #[test]
    fn changing_tag_drops_old_fields() {
        let mut doc = json!({"loss": {"kind": "l4", "reduction": "mean"}});
        apply_override(&mut doc, "loss.kind=l2").unwrap();
        assert_eq!(doc, json!({"loss": {"kind": "l2"}}));
        apply_override(&mut doc, "loss.alpha=2").unwrap();
        assert_eq!(doc, json!({"loss": {"kind": "l2", "alpha": 2}}));
        let mut doc = json!({"kind": "mask", "seed": 1});
        apply_override(&mut doc, "kind=both").unwrap();
        assert_eq!(doc, json!({"kind": "both", "seed": 1}));
    }
}
