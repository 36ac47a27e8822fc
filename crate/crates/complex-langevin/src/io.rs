//! Self-describing CSV output: one `#`-prefixed JSON line, then the header row.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct MetaHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub params: Map<String, Value>,
}

impl MetaHeader {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.into(),
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let line = serde_json::to_string(self).map_err(|e| crate::error::Error::Config(e.to_string()))?;
        writeln!(w, "# {line}")?;
        Ok(())
    }
}

/// Shortest round-trip formatting for floats.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Writes `header` then `rows` (already formatted cells).
pub fn write_table<W: Write>(mut w: W, meta: &MetaHeader, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    meta.write(&mut w)?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}
