//! Flat `key = value` configuration files and option resolution.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys use the long flag names, with `_` and `-` interchangeable. A value
//! given on the command line wins over the file, which wins over the
//! built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Core(#[from] sinhdyn::Error),
}

impl CliError {
    /// Exit status: 2 for bad arguments or configuration, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Argument(_) => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "ConfigError",
            CliError::Argument(_) => "ArgumentError",
            CliError::Io(_) => "IoError",
            CliError::Csv(_) => "CsvError",
            CliError::Core(e) => e.name(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    /// Normalised key to `(value, line number)`.
    values: BTreeMap<String, (String, usize)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Config { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let key = normalize(key);
            if key.is_empty() {
                return Err(CliError::Config { line, message: "empty key".into() });
            }
            if values.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
                return Err(CliError::Config { line, message: format!("duplicate key `{key}`") });
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Argument(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(|(v, _)| v.as_str())
    }

    /// The config value for `key`, parsed, if present.
    pub fn value<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(&normalize(key)) {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|e| CliError::Config {
                line: *line,
                message: format!("invalid value `{value}` for `{key}`: {e}"),
            }),
        }
    }

    /// Resolves an option: command line, then config, then `default`.
    pub fn resolve<T>(&self, key: &str, cli: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.value(key)?.unwrap_or(default)),
        }
    }

    /// Like `resolve`, for options without a default.
    pub fn resolve_opt<T>(&self, key: &str, cli: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.value(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let cfg = Config::parse("# header\n\nn_max = 40  # trailing\nmap=sinh:k=2\n").unwrap();
        assert_eq!(cfg.raw("n-max"), Some("40"));
        assert_eq!(cfg.raw("map"), Some("sinh:k=2"));
        assert_eq!(cfg.value::<usize>("n_max").unwrap(), Some(40));
    }

    #[test]
    fn precedence() {
        let cfg = Config::parse("seed = 5\n").unwrap();
        assert_eq!(cfg.resolve("seed", Some(9u64), 1).unwrap(), 9);
        assert_eq!(cfg.resolve("seed", None, 1u64).unwrap(), 5);
        assert_eq!(cfg.resolve("samples", None, 7usize).unwrap(), 7);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("a = 1\nbroken line\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }));
        let cfg = Config::parse("\n\nseed = x\n").unwrap();
        let err = cfg.value::<u64>("seed").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 3, .. }));
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(Config::parse("a=1\na=2\n"), Err(CliError::Config { line: 2, .. })));
    }
}
