//! Config files are TOML; `--set key.path=value` edits the parsed tree before
//! it is deserialized, so overrides go through the same unknown-key checks as
//! the file itself.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::CliError;

pub fn load_table(path: Option<&Path>) -> Result<Table, CliError> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A TOML literal if it parses as one, else a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Usage(format!("override `{key}`: `{p}` is not a table"))),
        };
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn resolve<T: DeserializeOwned>(mut table: Table, overrides: &[String], seed: Option<u64>) -> Result<T, CliError> {
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Usage(format!("seed {seed} exceeds the TOML integer range")))?;
        table.insert("seed".into(), Value::Integer(seed));
    }
    T::deserialize(Value::Table(table)).map_err(|e| CliError::Usage(format!("config: {}", e.to_string().trim())))
}

/// SHA-256 of the resolved config's canonical JSON.
pub fn digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("configs serialize to JSON");
    hex::encode(Sha256::digest(json.as_bytes()))
}
