//! Flat key=value experiment configs with a typed schema per experiment.
//!
//! The format is intentionally line-based and diff-friendly: one `key =
//! value` per line, `#` starts a comment, lists are comma separated. Every
//! run echoes the effective entries (defaults filled in) into its manifest.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{LabError, LabResult};

/// Parsed but not yet validated key=value entries.
#[derive(Debug, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> LabResult<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(LabError::config(format!(
                    "line {}: expected key = value, got {raw_line:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(LabError::config(format!(
                    "line {}: bad key {key:?} (use letters, digits, _)",
                    idx + 1
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(LabError::config(format!(
                    "line {}: duplicate key {key:?}",
                    idx + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            LabError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Int,
    Real,
    Text,
    RealList,
}

/// One schema field; `default: None` marks the field required.
#[derive(Debug, Clone, Copy)]
pub struct FieldSpec {
    pub key: &'static str,
    pub kind: FieldKind,
    pub default: Option<&'static str>,
}

const fn req(key: &'static str, kind: FieldKind) -> FieldSpec {
    FieldSpec {
        key,
        kind,
        default: None,
    }
}

const fn opt(key: &'static str, kind: FieldKind, default: &'static str) -> FieldSpec {
    FieldSpec {
        key,
        kind,
        default: Some(default),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub experiment: &'static str,
    pub fields: &'static [FieldSpec],
}

use FieldKind::{Int, Real, RealList, Text};

pub const ONE_POINT: Schema = Schema {
    experiment: "one-point",
    fields: &[
        opt("geometry", Text, "droplet"),
        req("T", Real),
        req("trials", Int),
    ],
};

pub const EXPONENTS: Schema = Schema {
    experiment: "exponents",
    fields: &[
        opt("geometry", Text, "droplet"),
        req("T_grid", RealList),
        opt("trials", Int, "1000"),
        opt("transversal_trials", Int, "500"),
        opt("tau", Real, "0.5"),
        opt("strip_c", Real, "6.0"),
        opt("strip_eps", Real, "0.05"),
    ],
};

pub const SLOW_DECORRELATION: Schema = Schema {
    experiment: "slow-decorrelation",
    fields: &[
        req("geometry", Text),
        opt("xi", Real, "0.0"),
        req("tau", Real),
        opt("beta", Real, "0.3"),
        req("T_grid", RealList),
        req("trials", Int),
        opt("direction", Text, "characteristic"),
        // 0 disables the control pass at a second tau.
        opt("control_tau", Real, "0.0"),
        // direction = path only: B = A + (u_offset T^{2/3}, T^tau + pi_prime u_offset T^{2/3}).
        opt("pi_prime", Real, "0.0"),
        opt("u_offset", Real, "0.0"),
        // 0 disables the alternate displaced endpoint (x shifted by u_offset_alt T^{2/3}).
        opt("u_offset_alt", Real, "0.0"),
    ],
};

pub const SPACELIKE: Schema = Schema {
    experiment: "spacelike",
    fields: &[
        req("xi", Real),
        req("pi_prime_list", RealList),
        req("u_grid", RealList),
        req("T", Real),
        req("trials", Int),
    ],
};

pub const STATIONARY: Schema = Schema {
    experiment: "stationary",
    fields: &[
        req("T", Real),
        opt("ks_L", Real, "50"),
        req("L_grid", RealList),
        req("trials", Int),
        opt("scale_trials", Int, "2000"),
        opt("repeats", Int, "10"),
    ],
};

pub const MOMENT_BOUND: Schema = Schema {
    experiment: "moment-bound",
    fields: &[
        req("T", Real),
        req("u_grid", RealList),
        opt("M", Real, "2.0"),
        // 0 derives the depth from T and M.
        opt("depth", Int, "0"),
        req("trials", Int),
    ],
};

pub const SHORT_DISTANCE: Schema = Schema {
    experiment: "short-distance",
    fields: &[
        req("T", Real),
        req("trials", Int),
        opt("u_base", Real, "0.0"),
        // Region spacing in units of T^{-2/3}; 0 degenerates to an empty region.
        opt("spacing_scale", Real, "1.0"),
    ],
};

pub const ALL_SCHEMAS: &[&Schema] = &[
    &ONE_POINT,
    &EXPONENTS,
    &SLOW_DECORRELATION,
    &SPACELIKE,
    &STATIONARY,
    &MOMENT_BOUND,
    &SHORT_DISTANCE,
];

pub fn schema_for(experiment: &str) -> Option<&'static Schema> {
    ALL_SCHEMAS
        .iter()
        .copied()
        .find(|s| s.experiment == experiment)
}

#[derive(Debug, Clone, PartialEq)]
enum ConfigValue {
    Int(i64),
    Real(f64),
    Text(String),
    RealList(Vec<f64>),
}

/// Schema-validated configuration. Accessors panic on a key/kind mismatch,
/// which is a bug in the caller, never a user input problem: validation has
/// already guaranteed every schema field is present with the right type.
#[derive(Debug, Clone)]
pub struct Config {
    experiment: &'static str,
    values: BTreeMap<String, ConfigValue>,
    echo: BTreeMap<String, String>,
}

impl Config {
    pub fn experiment(&self) -> &'static str {
        self.experiment
    }

    /// Effective entries (defaults filled in) for manifest echoing.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }

    fn value(&self, key: &str) -> &ConfigValue {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key:?} missing from {} schema", self.experiment))
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.value(key) {
            ConfigValue::Int(v) => *v,
            other => panic!("key {key:?} is {other:?}, wanted Int"),
        }
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.value(key) {
            ConfigValue::Real(v) => *v,
            other => panic!("key {key:?} is {other:?}, wanted Real"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.value(key) {
            ConfigValue::Text(v) => v,
            other => panic!("key {key:?} is {other:?}, wanted Text"),
        }
    }

    pub fn real_list(&self, key: &str) -> &[f64] {
        match self.value(key) {
            ConfigValue::RealList(v) => v,
            other => panic!("key {key:?} is {other:?}, wanted RealList"),
        }
    }
}

fn parse_real(key: &str, s: &str) -> LabResult<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| LabError::config(format!("key {key:?}: {s:?} is not a real number")))?;
    if !v.is_finite() {
        return Err(LabError::config(format!(
            "key {key:?}: {s:?} is not finite"
        )));
    }
    Ok(v)
}

fn parse_int(key: &str, s: &str) -> LabResult<i64> {
    s.parse()
        .map_err(|_| LabError::config(format!("key {key:?}: {s:?} is not an integer")))
}

fn parse_value(key: &str, kind: FieldKind, s: &str) -> LabResult<ConfigValue> {
    let items = || -> LabResult<Vec<&str>> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(LabError::config(format!(
                "key {key:?}: empty element in list {s:?}"
            )));
        }
        Ok(parts)
    };
    Ok(match kind {
        FieldKind::Int => ConfigValue::Int(parse_int(key, s)?),
        FieldKind::Real => ConfigValue::Real(parse_real(key, s)?),
        FieldKind::Text => ConfigValue::Text(s.to_string()),
        FieldKind::RealList => ConfigValue::RealList(
            items()?
                .into_iter()
                .map(|p| parse_real(key, p))
                .collect::<LabResult<_>>()?,
        ),
    })
}

/// Validates `raw` against `schema`: unknown keys are rejected, required
/// keys enforced, defaults filled, every value parsed to its declared type.
/// An `experiment` key is tolerated when it names this very schema, so one
/// file serves both `png-lab run` and the direct subcommand.
pub fn validate(raw: &RawConfig, schema: &'static Schema) -> LabResult<Config> {
    if let Some(name) = raw.get("experiment") {
        if name != schema.experiment {
            return Err(LabError::config(format!(
                "config names experiment {name:?} but {:?} was requested",
                schema.experiment
            )));
        }
    }
    for key in raw.entries.keys() {
        if key != "experiment" && !schema.fields.iter().any(|f| f.key == key) {
            return Err(LabError::config(format!(
                "unknown key {key:?} for experiment {:?}",
                schema.experiment
            )));
        }
    }
    let mut values = BTreeMap::new();
    let mut echo = BTreeMap::new();
    for field in schema.fields {
        let text = match (raw.get(field.key), field.default) {
            (Some(s), _) => s,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(LabError::config(format!(
                    "missing required key {:?} for experiment {:?}",
                    field.key, schema.experiment
                )))
            }
        };
        values.insert(field.key.to_string(), parse_value(field.key, field.kind, text)?);
        echo.insert(field.key.to_string(), text.to_string());
    }
    echo.insert("experiment".to_string(), schema.experiment.to_string());
    Ok(Config {
        experiment: schema.experiment,
        values,
        echo,
    })
}

pub fn load(path: &Path, schema: &'static Schema) -> LabResult<Config> {
    validate(&RawConfig::from_file(path)?, schema)
}

/// Reads the `experiment` key and validates against that experiment's schema.
pub fn load_dispatch(path: &Path) -> LabResult<Config> {
    let raw = RawConfig::from_file(path)?;
    let name = raw
        .get("experiment")
        .ok_or_else(|| LabError::config("config has no `experiment` key".to_string()))?;
    let schema = schema_for(name)
        .ok_or_else(|| LabError::config(format!("unknown experiment {name:?}")))?;
    validate(&raw, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_lists() {
        let raw = RawConfig::parse(
            "# full-line comment\n\
             T = 8.0   # trailing comment\n\
             \n\
             trials = 100\n",
        )
        .unwrap();
        let cfg = validate(&raw, &ONE_POINT).unwrap();
        assert_eq!(cfg.real("T"), 8.0);
        assert_eq!(cfg.int("trials"), 100);
        assert_eq!(cfg.text("geometry"), "droplet");
        assert_eq!(cfg.echo().get("geometry").unwrap(), "droplet");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let raw = RawConfig::parse("T = 8\ntrials = 10\nbogus = 1\n").unwrap();
        let err = validate(&raw, &ONE_POINT).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        let err = RawConfig::parse("T = 8\nT = 9\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn rejects_missing_required_and_bad_types() {
        let raw = RawConfig::parse("T = 8\n").unwrap();
        let err = validate(&raw, &ONE_POINT).unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");

        let raw = RawConfig::parse("T = eight\ntrials = 10\n").unwrap();
        assert!(validate(&raw, &ONE_POINT).is_err());

        let raw = RawConfig::parse("T = nan\ntrials = 10\n").unwrap();
        assert!(validate(&raw, &ONE_POINT).is_err());

        let raw = RawConfig::parse("T = 8\ntrials = 10.5\n").unwrap();
        assert!(validate(&raw, &ONE_POINT).is_err());
    }

    #[test]
    fn list_parsing_and_experiment_key() {
        let raw = RawConfig::parse(
            "experiment = exponents\nT_grid = 64, 128,256 , 512\n",
        )
        .unwrap();
        let cfg = validate(&raw, &EXPONENTS).unwrap();
        assert_eq!(cfg.real_list("T_grid"), &[64.0, 128.0, 256.0, 512.0]);
        assert_eq!(cfg.int("transversal_trials"), 500);

        let err = validate(&raw, &ONE_POINT).unwrap_err();
        assert!(err.to_string().contains("exponents"), "{err}");

        let raw = RawConfig::parse("T_grid = 64,,256\n").unwrap();
        assert!(validate(&raw, &EXPONENTS).is_err());
    }

    #[test]
    fn dispatch_by_experiment_key() {
        let dir = std::env::temp_dir().join("png-lab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.cfg");
        std::fs::write(&path, "experiment = one-point\nT = 4\ntrials = 50\n").unwrap();
        let cfg = load_dispatch(&path).unwrap();
        assert_eq!(cfg.experiment(), "one-point");

        std::fs::write(&path, "experiment = nope\n").unwrap();
        assert!(load_dispatch(&path).is_err());
        std::fs::write(&path, "T = 4\n").unwrap();
        assert!(load_dispatch(&path).is_err());
    }
}
