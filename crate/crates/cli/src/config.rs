//! `--config` files: a flat TOML table whose keys are long flag names
//! (`n_perm` or `n-perm`). Values are spliced in front of the command-line
//! flags, so a flag given on the command line wins.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use surfshape::ShapeError;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn value_text(key: &str, value: &toml::Value, path: &Path) -> Result<String, ShapeError> {
    let fail = || ShapeError::Format {
        path: path.to_path_buf(),
        message: format!("key {key:?} must be a string, number, boolean or flat array"),
    };
    Ok(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => format!("{f:?}"),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Array(_) | toml::Value::Table(_) => Err(fail()),
                other => value_text(key, other, path),
            })
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(fail()),
    })
}

/// Translate a config file into flags.
pub fn config_flags(path: &Path) -> Result<Vec<OsString>, ShapeError> {
    let text = fs::read_to_string(path).map_err(|source| ShapeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ShapeError::Format {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })?;
    let mut flags = Vec::new();
    for (key, value) in &table {
        let flag = key.replace('_', "-");
        if flag == "config" {
            return Err(ShapeError::Format {
                path: path.to_path_buf(),
                message: "config files cannot include other config files".into(),
            });
        }
        flags.push(format!("--{flag}={}", value_text(key, value, path)?).into());
    }
    Ok(flags)
}

/// `args` with config-file flags inserted right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, ShapeError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let flags = config_flags(Path::new(&path))?;
    let mut out = Vec::with_capacity(args.len() + flags.len());
    out.extend(args.iter().take(2).cloned());
    out.extend(flags);
    out.extend(args.into_iter().skip(2));
    Ok(out)
}
