use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Value};

use crate::manifest::RunManifest;

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Pretty JSON object with the manifest as its first field.
pub fn write_json(out: Option<&Path>, manifest: &RunManifest, body: Value) -> Result<()> {
    let mut obj = Map::new();
    obj.insert("manifest".into(), serde_json::to_value(manifest)?);
    match body {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
    text.push('\n');
    emit(out, &text)
}

/// CSV with `#` comment lines carrying the manifest and extra metadata.
pub fn write_csv(
    out: Option<&Path>,
    manifest: &RunManifest,
    meta: &[(&str, String)],
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut text = format!("# manifest: {}\n", manifest.compact());
    for (k, v) in meta {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    text.push_str(&header.join(","));
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    emit(out, &text)
}

/// Shortest round-trip representation, as used by the JSON writer.
pub fn num(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| "NaN".into())
}
