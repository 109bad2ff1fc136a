//! Reproducibility headers and atomic file writes shared by the commands.

use std::path::Path;

use anyhow::Context;
use ftcp_core::bundle::write_atomic;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment lines naming the tool, the command and its full configuration.
pub fn header(command: &str, config: &impl Serialize) -> Vec<String> {
    vec![
        format!("ftcp {VERSION} {command}"),
        format!("config {}", serde_json::to_string(config).expect("config serializes")),
    ]
}

/// JSON document wrapping `body` with the command and its configuration.
#[derive(Serialize)]
pub struct Document<'a, C: Serialize, B: Serialize> {
    pub ftcp_version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

pub fn write_json<C: Serialize, B: Serialize>(path: &Path, command: &str, config: &C, body: B) -> anyhow::Result<()> {
    let doc = Document {
        ftcp_version: VERSION,
        command,
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// CSV text with `# ` comment lines in front.
pub fn csv_with_header<T: Serialize>(comments: &[String], rows: &[T]) -> anyhow::Result<String> {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    out.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(out)
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Reads a JSON file written by [`write_json`], or the bare payload.
pub fn read_document<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(obj) = doc.as_object_mut().filter(|o| o.contains_key("ftcp_version")) {
        for k in ["ftcp_version", "command", "config"] {
            obj.remove(k);
        }
    }
    serde_json::from_value(doc).with_context(|| format!("parsing {}", path.display()))
}
