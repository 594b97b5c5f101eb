//! `--config file.json`: a flat JSON object whose keys are long flag names.
//!
//! The file's options are spliced in right after the subcommand, so any
//! flag given on the command line comes later and wins.

use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, CliResult};

fn flag_args(key: &str, value: &Value) -> CliResult<Vec<String>> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> CliResult<String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(CliError::usage(format!("config key '{key}': lists may hold only strings and numbers"))),
        }
    };
    Ok(match value {
        Value::Null | Value::Bool(false) => Vec::new(),
        Value::Bool(true) => vec![flag],
        Value::Array(items) if items.is_empty() => Vec::new(),
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
            vec![flag, parts.join(",")]
        }
        Value::Object(_) => {
            return Err(CliError::usage(format!("config key '{key}': nested objects are not supported")))
        }
        v => vec![flag, scalar(v)?],
    })
}

/// Command-line arguments equivalent to the JSON object in `path`.
pub fn config_args(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: invalid JSON: {e}", path.display())))?;
    let Value::Object(map) = doc else {
        return Err(CliError::data(format!("{}: config must be a JSON object", path.display())));
    };
    let mut out = Vec::new();
    for (k, v) in &map {
        if k == "config" {
            return Err(CliError::usage("config files cannot include other config files"));
        }
        out.extend(flag_args(k, v)?);
    }
    Ok(out)
}

/// Removes every `--config PATH` from `argv` and inserts the file contents
/// after the subcommand name.
pub fn expand_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut paths = Vec::new();
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it.next().ok_or_else(|| CliError::usage("--config needs a file path"))?;
            paths.push(p);
        } else if let Some(p) = a.strip_prefix("--config=") {
            paths.push(p.to_string());
        } else {
            rest.push(a);
        }
    }
    if paths.is_empty() {
        return Ok(rest);
    }
    let mut inserted = Vec::new();
    for p in &paths {
        inserted.extend(config_args(Path::new(p))?);
    }
    // Program name, then the subcommand (the first non-flag argument).
    let at = rest.iter().skip(1).position(|a| !a.starts_with('-')).map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, inserted);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn value_forms() {
        assert_eq!(flag_args("max_terms", &json!(40)).unwrap(), ["--max-terms", "40"]);
        assert_eq!(flag_args("refit_final", &json!(true)).unwrap(), ["--refit-final"]);
        assert!(flag_args("refit_final", &json!(false)).unwrap().is_empty());
        assert_eq!(flag_args("k", &json!([5, 10])).unwrap(), ["--k", "5,10"]);
        assert_eq!(flag_args("basis", &json!("fourier")).unwrap(), ["--basis", "fourier"]);
        assert!(flag_args("x", &json!({"a": 1})).is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = std::env::temp_dir().join(format!("flexts-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"lags": 5}"#).unwrap();
        let argv: Vec<String> = ["flexts", "fit", "--config", path.to_str().unwrap(), "--lags", "2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand_config(argv).unwrap();
        assert_eq!(out, ["flexts", "fit", "--lags", "5", "--lags", "2"]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
