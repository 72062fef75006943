//! Helpers shared by the integration tests.

use serde_json::Value;

/// Validates a JSON value against the subset of JSON Schema draft-07 the
/// shipped schemas use: `type`, `required`, `properties`,
/// `additionalProperties` (boolean), `items` (single schema), `enum`
/// (strings) and `$ref` into `#/definitions`.
pub fn validate_schema(value: &Value, schema: &Value, root: &Value, path: &str) -> Result<(), String> {
    let schema = match schema.get("$ref") {
        Some(Value::String(r)) => {
            let name = r
                .strip_prefix("#/definitions/")
                .ok_or_else(|| format!("{path}: unsupported $ref {r}"))?;
            root.get("definitions")
                .and_then(|d| d.get(name))
                .ok_or_else(|| format!("{path}: unresolved $ref {r}"))?
        }
        _ => schema,
    };

    if let Some(Value::String(ty)) = schema.get("type") {
        let ok = match ty.as_str() {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "string" => value.is_string(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            other => return Err(format!("{path}: unsupported schema type {other}")),
        };
        if !ok {
            return Err(format!("{path}: expected {ty}, got {value}"));
        }
    }

    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(value) {
            return Err(format!("{path}: {value} not in enum {options:?}"));
        }
    }

    if let Some(obj) = value.as_object() {
        if let Some(Value::Array(required)) = schema.get("required") {
            for key in required {
                let key = key.as_str().expect("required entries are strings");
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required field {key}"));
                }
            }
        }
        let properties = schema.get("properties").and_then(Value::as_object);
        if let Some(props) = properties {
            for (key, sub) in obj {
                match props.get(key) {
                    Some(sub_schema) => {
                        validate_schema(sub, sub_schema, root, &format!("{path}.{key}"))?
                    }
                    None => {
                        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                            return Err(format!("{path}: unexpected field {key}"));
                        }
                    }
                }
            }
        }
    }

    if let Some(items) = value.as_array() {
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate_schema(item, item_schema, root, &format!("{path}[{i}]"))?;
            }
        }
    }

    Ok(())
}

/// Loads a schema shipped under `schemas/` and validates a document file
/// against it.
pub fn assert_document_matches_schema(document_path: &std::path::Path, schema_name: &str) {
    let schema_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema_name);
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(&schema_path).expect("schema file")).expect("schema JSON");
    let document: Value = serde_json::from_str(
        &std::fs::read_to_string(document_path).unwrap_or_else(|e| panic!("{}: {e}", document_path.display())),
    )
    .expect("document JSON");
    if let Err(msg) = validate_schema(&document, &schema, &schema, "$") {
        panic!("{} does not match {schema_name}: {msg}", document_path.display());
    }
}
