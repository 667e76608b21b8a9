//! `--config` files: flat `key = value` lines whose keys are flag names.
//!
//! The entries are spliced into argv right after the subcommand token, so any
//! flag given on the command line comes later and wins.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Command};
use demix::kv::KvBlock;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Path given to `--config`, if any, in either `--config PATH` or
/// `--config=PATH` form.
fn config_path(args: &[OsString]) -> Result<Option<PathBuf>, ConfigError> {
    let mut found = None;
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let Some(text) = arg.to_str() else { continue };
        if text == "--" {
            break;
        }
        if text == "--config" {
            let value = iter.next().ok_or_else(|| ConfigError("--config needs a file path".into()))?;
            found = Some(PathBuf::from(value));
        } else if let Some(value) = text.strip_prefix("--config=") {
            found = Some(PathBuf::from(value));
        }
    }
    Ok(found)
}

fn flag_args(sub: &Command, block: &KvBlock, origin: &Path) -> Result<Vec<OsString>, ConfigError> {
    let mut out = Vec::new();
    for (key, value) in block.entries() {
        let flag = key.replace('_', "-");
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(flag.as_str())).ok_or_else(|| {
            ConfigError(format!("{}: unknown key '{key}' for subcommand '{}'", origin.display(), sub.get_name()))
        })?;
        if flag == "config" {
            return Err(ConfigError(format!("{}: config files cannot include other config files", origin.display())));
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => out.push(OsString::from(format!("--{flag}"))),
                "false" | "0" | "no" => {}
                other => {
                    return Err(ConfigError(format!(
                        "{}: key '{key}' expects true or false, got '{other}'",
                        origin.display()
                    )))
                }
            },
            _ => {
                out.push(OsString::from(format!("--{flag}")));
                out.push(OsString::from(value));
            }
        }
    }
    Ok(out)
}

/// Returns argv with the config entries inserted after the subcommand.
/// Argument lists without a known subcommand or without `--config` are
/// returned unchanged.
pub fn expand(command: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(pos) = args.iter().skip(1).position(|a| a.to_str().is_some_and(|s| !s.starts_with('-'))) else {
        return Ok(args);
    };
    let pos = pos + 1;
    let Some(sub) = args[pos].to_str().and_then(|name| command.find_subcommand(name)) else {
        return Ok(args);
    };
    let Some(path) = config_path(&args[pos + 1..])? else {
        return Ok(args);
    };
    let block = KvBlock::read(&path).map_err(|e| ConfigError(format!("cannot read config file: {e}")))?;
    let extra = flag_args(sub, &block, &path)?;
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
