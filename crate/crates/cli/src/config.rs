//! Flat key=value configuration files and the precedence rules tying them to
//! the command line: defaults < config file < explicit flags < SEQLAB_SEED.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parsed config file. Keys are consumed as the owning subcommand resolves
/// its options; whatever remains at `finish` is unknown and rejected.
#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
    path: String,
}

impl FileConfig {
    /// Parse `key=value` lines. Blank lines and `#` comments are skipped;
    /// list values keep their commas and are split by the typed resolver.
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(FileConfig { entries, path: path.display().to_string() })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Reject leftover keys so a typo in a config file fails loudly instead
    /// of silently running with defaults.
    pub fn finish(self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.entries.keys().map(|k| k.as_str()).collect();
            Err(CliError::Config(format!(
                "{}: unknown config keys: {}",
                self.path,
                keys.join(", ")
            )))
        }
    }
}

fn parse_scalar<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| CliError::Config(format!("config key {key}: {e} (value {raw:?})")))
}

/// One resolved option: explicit flag if present, else config file, else the
/// default. Every resolved value is echoed into the CSV `# config:` line.
pub fn resolve<T: FromStr>(
    file: &mut Option<FileConfig>,
    key: &str,
    cli: Option<T>,
    default: T,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    let from_file = file.as_mut().and_then(|f| f.take(key));
    if let Some(v) = cli {
        return Ok(v);
    }
    match from_file {
        Some(raw) => parse_scalar(key, &raw),
        None => Ok(default),
    }
}

/// Same precedence for comma-separated lists.
pub fn resolve_list<T: FromStr>(
    file: &mut Option<FileConfig>,
    key: &str,
    cli: Option<Vec<T>>,
    default: &[T],
) -> Result<Vec<T>, CliError>
where
    T: Clone,
    T::Err: Display,
{
    let from_file = file.as_mut().and_then(|f| f.take(key));
    if let Some(v) = cli {
        if v.is_empty() {
            return Err(CliError::Config(format!("option {key} needs at least one value")));
        }
        return Ok(v);
    }
    match from_file {
        Some(raw) => {
            let items: Result<Vec<T>, CliError> =
                raw.split(',').map(|part| parse_scalar(key, part.trim())).collect();
            let items = items?;
            if items.is_empty() {
                return Err(CliError::Config(format!("config key {key} has an empty list")));
            }
            Ok(items)
        }
        None => Ok(default.to_vec()),
    }
}

/// Booleans accept true/false/1/0/yes/no in config files; on the command
/// line the bare flag sets them.
pub fn resolve_flag(
    file: &mut Option<FileConfig>,
    key: &str,
    cli: bool,
    default: bool,
) -> Result<bool, CliError> {
    let from_file = file.as_mut().and_then(|f| f.take(key));
    if cli {
        return Ok(true);
    }
    match from_file.as_deref() {
        Some("true") | Some("1") | Some("yes") => Ok(true),
        Some("false") | Some("0") | Some("no") => Ok(false),
        Some(other) => {
            Err(CliError::Config(format!("config key {key}: expected a boolean, got {other:?}")))
        }
        None => Ok(default),
    }
}
