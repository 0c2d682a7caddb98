//! Configuration files and the resolved-configuration hash.
//!
//! A configuration file is a flat list of `key = value` pairs, one per
//! line; `#` starts a comment and blank lines are ignored. Every option of
//! a subcommand resolves from three sources in order: an explicit
//! command-line flag, then a configuration-file entry, then the built-in
//! default. Keys the subcommand does not recognize are an error, so a typo
//! fails loudly instead of silently falling back to a default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::{CliError, Result};

/// Parsed configuration-file entries, consumed key by key as a command's
/// options resolve.
#[derive(Debug, Default)]
pub struct Resolver {
    /// Remaining entries: key -> (line number, raw value).
    entries: BTreeMap<String, (usize, String)>,
    /// Where the entries came from, for error messages.
    source: String,
}

impl Resolver {
    /// Resolver with no file behind it: every option falls back to its flag
    /// or default.
    pub fn empty() -> Self {
        Resolver::default()
    }

    /// Reads and parses a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Resolver::parse(&text, &path.display().to_string())
    }

    /// Parses configuration text; `source` names it in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::input(format!(
                    "{source} line {}: expected key=value, got {raw:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::input(format!(
                    "{source} line {}: empty key",
                    idx + 1
                )));
            }
            if let Some((first, _)) = entries.insert(
                key.to_string(),
                (idx + 1, value.trim().to_string()),
            ) {
                return Err(CliError::input(format!(
                    "{source} line {}: key {key:?} already set at line {first}",
                    idx + 1
                )));
            }
        }
        Ok(Resolver {
            entries,
            source: source.to_string(),
        })
    }

    /// Resolves one option: the flag wins, then the file entry, then the
    /// default. The file entry is consumed either way.
    pub fn take<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.take_opt(key, flag)?.unwrap_or(default))
    }

    /// Resolves an option with no default; an unset option stays `None`.
    pub fn take_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let file_value = self.entries.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match file_value {
            Some((line, raw)) => raw.parse().map(Some).map_err(|e| {
                CliError::input(format!(
                    "{} line {line}: key {key:?}: invalid value {raw:?}: {e}",
                    self.source
                ))
            }),
            None => Ok(None),
        }
    }

    /// Resolves an option that must be set by flag or file.
    pub fn take_required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.take_opt(key, flag)?.ok_or_else(|| {
            CliError::input(format!(
                "missing required option {key:?} (set the --{} flag or the configuration key)",
                key.replace('_', "-")
            ))
        })
    }

    /// Rejects any key no option claimed.
    pub fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(CliError::input(format!(
                "{} line {line}: unknown configuration key {key:?}",
                self.source
            )));
        }
        Ok(())
    }
}

/// Digest of a command's fully resolved configuration: the command name
/// followed by every option as `key=value`, sorted by key, hashed with
/// SHA-256 and truncated to 16 hex characters. Two runs share a hash
/// exactly when every resolved option agrees, however the options were
/// supplied.
pub fn config_hash(command: &str, entries: &[(&'static str, String)]) -> String {
    let mut sorted: Vec<&(&str, String)> = entries.iter().collect();
    sorted.sort_by_key(|(k, _)| *k);
    let mut text = format!("command={command}\n");
    for (key, value) in sorted {
        text.push_str(key);
        text.push('=');
        text.push_str(value);
        text.push('\n');
    }
    let digest = Sha256::digest(text.as_bytes());
    digest
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blank_lines_and_spacing() {
        let text = "# a comment\n\n n_iter = 500 # trailing\nseed=7\n";
        let mut r = Resolver::parse(text, "test.cfg").unwrap();
        assert_eq!(r.take("n_iter", None::<usize>, 100).unwrap(), 500);
        assert_eq!(r.take("seed", None::<u64>, 0).unwrap(), 7);
        r.finish().unwrap();
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut r = Resolver::parse("n_iter=500", "test.cfg").unwrap();
        assert_eq!(r.take("n_iter", Some(9usize), 100).unwrap(), 9);
        r.finish().unwrap();

        let mut r = Resolver::parse("n_iter=500", "test.cfg").unwrap();
        assert_eq!(r.take("n_iter", None::<usize>, 100).unwrap(), 500);
        r.finish().unwrap();

        let mut r = Resolver::empty();
        assert_eq!(r.take("n_iter", None::<usize>, 100).unwrap(), 100);
        r.finish().unwrap();
    }

    #[test]
    fn bad_lines_and_values_carry_line_numbers() {
        let err = Resolver::parse("just words\n", "test.cfg").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        let err = Resolver::parse("a=1\na=2\n", "test.cfg").unwrap_err();
        assert!(err.to_string().contains("already set at line 1"), "{err}");

        let mut r = Resolver::parse("\n\nn_iter=lots", "test.cfg").unwrap();
        let err = r.take("n_iter", None::<usize>, 1).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("\"lots\""), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = Resolver::parse("n_itre=500", "test.cfg").unwrap();
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("unknown configuration key"), "{err}");
        assert!(err.to_string().contains("n_itre"), "{err}");
    }

    #[test]
    fn required_options_report_both_spellings() {
        let mut r = Resolver::empty();
        let err = r.take_required("scenario", None::<String>).unwrap_err();
        assert!(err.to_string().contains("--scenario"), "{err}");
    }

    #[test]
    fn hash_ignores_entry_order_but_not_values() {
        let a = config_hash(
            "fit",
            &[("n_iter", "5".into()), ("seed", "1".into())],
        );
        let b = config_hash(
            "fit",
            &[("seed", "1".into()), ("n_iter", "5".into())],
        );
        let c = config_hash(
            "fit",
            &[("seed", "2".into()), ("n_iter", "5".into())],
        );
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
        assert!(a.chars().all(|ch| ch.is_ascii_hexdigit()));
        assert_ne!(config_hash("other", &[]), config_hash("fit", &[]));
    }
}
