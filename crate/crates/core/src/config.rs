//! Training configurations and `key=value` overrides.
//!
//! Overrides are applied through a JSON round trip, so a value must parse as
//! the field's type (`lstm_hidden=abc` is rejected, `scheme=BIO2` accepted).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::tagging::Scheme;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdurConfig {
    pub lr: f64,
    pub dropout_io: f64,
    pub dropout_lstm: f64,
    pub grad_clip: f64,
    pub patience: usize,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub batch_size: usize,
    pub scheme: Scheme,
    pub max_epochs: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for AdurConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            dropout_io: 0.5,
            dropout_lstm: 0.4394,
            grad_clip: 7.0,
            patience: 20,
            lstm_layers: 2,
            lstm_hidden: 300,
            batch_size: 8,
            scheme: Scheme::Bioul,
            max_epochs: 200,
            folds: 5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreConfig {
    pub lr: f64,
    pub dropout_io: f64,
    pub dropout_lstm: f64,
    pub grad_clip: f64,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub cnn_filters: usize,
    pub ngram_sizes: Vec<usize>,
    pub proj_hidden: usize,
    pub window_k: usize,
    pub max_dist_d: usize,
    pub neg_factor: usize,
    /// Count the negative quota against positives after reversal augmentation.
    pub neg_after_augmentation: bool,
    /// Add reversed training instances (`supports_rev`, mirrored symmetric labels).
    pub augment: bool,
    pub batch_size: usize,
    pub adu_tag_dim: usize,
    pub arg_tag_dim: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for AreConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            dropout_io: 0.3061,
            dropout_lstm: 0.4394,
            grad_clip: 4.12,
            lstm_layers: 4,
            lstm_hidden: 430,
            cnn_filters: 193,
            ngram_sizes: vec![3, 5, 7, 10],
            proj_hidden: 860,
            window_k: 479,
            max_dist_d: 177,
            neg_factor: 3,
            neg_after_augmentation: true,
            augment: true,
            batch_size: 128,
            adu_tag_dim: 13,
            arg_tag_dim: 3,
            patience: 20,
            max_epochs: 200,
            folds: 5,
            seed: 1,
        }
    }
}

fn check_dropout(name: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be in [0, 1), got {p}")))
    }
}

fn check_positive(pairs: &[(&str, usize)]) -> Result<(), ConfigError> {
    match pairs.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(ConfigError::Invalid(format!("{name} must be positive"))),
        None => Ok(()),
    }
}

fn check_rate(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl AdurConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_rate("lr", self.lr)?;
        check_rate("grad_clip", self.grad_clip)?;
        check_dropout("dropout_io", self.dropout_io)?;
        check_dropout("dropout_lstm", self.dropout_lstm)?;
        check_positive(&[
            ("patience", self.patience),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("folds", self.folds),
        ])
    }
}

impl AreConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_rate("lr", self.lr)?;
        check_rate("grad_clip", self.grad_clip)?;
        check_dropout("dropout_io", self.dropout_io)?;
        check_dropout("dropout_lstm", self.dropout_lstm)?;
        check_positive(&[
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("cnn_filters", self.cnn_filters),
            ("proj_hidden", self.proj_hidden),
            ("window_k", self.window_k),
            ("max_dist_d", self.max_dist_d),
            ("batch_size", self.batch_size),
            ("adu_tag_dim", self.adu_tag_dim),
            ("arg_tag_dim", self.arg_tag_dim),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
            ("folds", self.folds),
        ])?;
        if self.ngram_sizes.is_empty() || self.ngram_sizes.contains(&0) {
            return Err(ConfigError::Invalid("ngram_sizes must be non-empty and positive".into()));
        }
        if self.window_k <= self.max_dist_d {
            return Err(ConfigError::Invalid(format!(
                "window_k ({}) must exceed max_dist_d ({})",
                self.window_k, self.max_dist_d
            )));
        }
        Ok(())
    }
}

/// Parses an override value: JSON if it parses, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| {
        if raw.contains(',') && !raw.starts_with('[') {
            if let Ok(v) = serde_json::from_str(&format!("[{raw}]")) {
                return v;
            }
        }
        Value::String(raw.to_string())
    })
}

/// Applies `key=value` overrides to any serde config struct.
pub fn apply_overrides<T>(config: &T, overrides: &[(String, String)]) -> Result<T, ConfigError>
where
    T: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(config).expect("configs serialize");
    let obj = value.as_object_mut().expect("configs are structs");
    for (key, raw) in overrides {
        let slot = obj.get_mut(key).ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
        *slot = parse_value(raw);
        // re-check after each key so the error names the offending one
        serde_json::from_value::<T>(Value::Object(obj.clone())).map_err(|e| ConfigError::BadValue {
            key: key.clone(),
            message: e.to_string(),
        })?;
    }
    serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| (k.to_string(), v.trim().to_string()))
}

/// Reads a config file of `key = value` lines. Blank lines and lines
/// starting with `#` are ignored.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_override(line).ok_or_else(|| ConfigError::Syntax {
            path: path.display().to_string(),
            line: i + 1,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.into(), v.into())
    }

    #[test]
    fn defaults_are_valid() {
        AdurConfig::default().validate().unwrap();
        AreConfig::default().validate().unwrap();
    }

    #[test]
    fn overrides_are_typed() {
        let c = apply_overrides(
            &AdurConfig::default(),
            &[kv("lr", "0.01"), kv("scheme", "BIO2"), kv("lstm_hidden", "16")],
        )
        .unwrap();
        assert_eq!(c.lr, 0.01);
        assert_eq!(c.scheme, Scheme::Bio2);
        assert_eq!(c.lstm_hidden, 16);

        let are = apply_overrides(&AreConfig::default(), &[kv("ngram_sizes", "2,3")]).unwrap();
        assert_eq!(are.ngram_sizes, vec![2, 3]);
        let are = apply_overrides(&AreConfig::default(), &[kv("ngram_sizes", "[4]")]).unwrap();
        assert_eq!(are.ngram_sizes, vec![4]);
    }

    #[test]
    fn override_errors() {
        let base = AdurConfig::default();
        assert!(matches!(
            apply_overrides(&base, &[kv("nope", "1")]),
            Err(ConfigError::UnknownKey(k)) if k == "nope"
        ));
        assert!(matches!(
            apply_overrides(&base, &[kv("lstm_hidden", "abc")]),
            Err(ConfigError::BadValue { key, .. }) if key == "lstm_hidden"
        ));
        assert!(matches!(
            apply_overrides(&base, &[kv("scheme", "BIOES")]),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn invariants_checked() {
        let mut c = AreConfig::default();
        c.window_k = 100;
        assert!(c.validate().is_err());
        let mut a = AdurConfig::default();
        a.patience = 0;
        assert!(a.validate().is_err());
        a.patience = 1;
        a.dropout_io = 1.0;
        assert!(a.validate().is_err());
    }

    #[test]
    fn config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "# comment\nlr = 0.1\n\nseed=9\n").unwrap();
        assert_eq!(read_config_file(&path).unwrap(), vec![kv("lr", "0.1"), kv("seed", "9")]);
        std::fs::write(&path, "lr 0.1\n").unwrap();
        assert!(matches!(read_config_file(&path), Err(ConfigError::Syntax { line: 1, .. })));
    }
}
