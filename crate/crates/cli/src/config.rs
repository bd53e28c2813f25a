//! TOML run configs with `--set dotted.key=value` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

/// Parses `key=value`; the value is read as a TOML literal when it parses as
/// one and as a bare string otherwise.
pub fn parse_override(s: &str) -> CliResult<(Vec<String>, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override {s:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::usage(format!("bad override key {key:?}")));
    }
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("just inserted"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.split('.').map(str::to_string).collect(), value))
}

pub fn apply_override(table: &mut Table, path: &[String], value: Value) -> CliResult<()> {
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("{p:?} is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// The effective config: file contents (if any) with overrides applied.
/// Returns the table itself so it can be recorded in the manifest.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> CliResult<Table> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        let (key, value) = parse_override(o)?;
        apply_override(&mut table, &key, value)?;
    }
    Ok(table)
}

pub fn decode<T: DeserializeOwned>(table: &Table) -> CliResult<T> {
    T::deserialize(Value::Table(table.clone())).map_err(|e| CliError::config(e.to_string()))
}
