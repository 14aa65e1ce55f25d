//! `key = value` experiment files, expanded into flags placed right after
//! the subcommand so that command-line flags override them.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::CliError;

const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--config", "--format", "--report", "--workers"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Index just past the subcommand path (`disorder` takes one more level).
fn subcommand_end(args: &[OsString], root: &Command) -> Option<(usize, Vec<String>)> {
    let mut i = 1;
    let mut path = Vec::new();
    let mut cmd = root;
    while i < args.len() {
        let s = args[i].to_string_lossy().into_owned();
        if s.starts_with('-') {
            let takes_value = GLOBAL_VALUE_FLAGS.contains(&s.as_str());
            i += if takes_value { 2 } else { 1 };
            continue;
        }
        cmd = cmd.find_subcommand(&s)?;
        path.push(s);
        i += 1;
        if !cmd.has_subcommands() {
            return Some((i, path));
        }
    }
    None
}

/// Returns `args` with the config file's flags spliced in.
pub fn expand(args: Vec<OsString>, root: &Command) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", Path::new(&path).display())))?;
    let pairs = parse(&text)?;
    let Some((at, sub_path)) = subcommand_end(&args, root) else {
        // No subcommand: let clap report it.
        return Ok(args);
    };
    let mut cmd = root;
    for s in &sub_path {
        cmd = cmd.find_subcommand(s).expect("path found above");
    }
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        if key == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Usage(format!("unknown config key '{key}' for {}", sub_path.join(" "))))?;
        let flag = format!("--{key}");
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => extra.push(flag.into()),
                "false" => {}
                _ => return Err(CliError::Usage(format!("config key '{key}' expects true or false"))),
            }
        } else {
            extra.push(flag.into());
            extra.push(value.into());
        }
    }
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
