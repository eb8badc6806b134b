//! `--config FILE`: a JSON object whose keys are flag names. Its entries are
//! spliced into the argument list after the subcommand, skipping any flag
//! the command line already sets, so clap validates them like typed flags.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::anyhow;
use serde_json::Value;

use crate::error::{CliError, CliResult};

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().map(|a| a.to_string_lossy());
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(|p| PathBuf::from(p.as_ref()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn given_on_command_line(args: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter().map(|a| a.to_string_lossy()).any(|a| a == flag || a.starts_with(&eq))
}

fn scalar(key: &str, v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::usage(anyhow!("config key {key:?}: expected a string or number"))),
    }
}

/// Arguments from the config file to insert after the subcommand.
pub fn config_args(args: &[OsString]) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(args) else { return Ok(Vec::new()) };
    let text = fs::read_to_string(&path).map_err(|e| CliError::usage(anyhow!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::usage(anyhow!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::usage(anyhow!("{}: expected a JSON object", path.display())));
    };
    let mut out = Vec::new();
    for (key, v) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(CliError::usage(anyhow!("config files cannot include other config files")));
        }
        if given_on_command_line(args, &flag) {
            continue;
        }
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let parts = items.iter().map(|x| scalar(key, x)).collect::<CliResult<Vec<_>>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            Value::Object(_) => return Err(CliError::usage(anyhow!("config key {key:?}: nested objects are not supported"))),
            other => {
                out.push(flag.into());
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

/// `args` with config-file flags inserted right after the subcommand.
pub fn merged_args(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let extra = config_args(&args)?;
    if extra.is_empty() || args.len() < 2 {
        return Ok(args);
    }
    let mut out = Vec::with_capacity(args.len() + extra.len());
    out.extend_from_slice(&args[..2]);
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
