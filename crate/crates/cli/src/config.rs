use std::path::{Path, PathBuf};

use ionphoton::cavity::BudgetInputs;
use ionphoton::sim::{ExperimentConfig, RamseyConfig, SimError};
use ionphoton::tomography::RotatedChoice;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const PRESET_ENV: &str = "NODE_SIM_PRESETS";
pub const DEFAULT_PRESET: &str = "paper";

const BUILTIN_PRESETS: [(&str, &str); 3] = [
    ("paper", include_str!("../presets/paper.toml")),
    ("ideal", include_str!("../presets/ideal.toml")),
    ("unstable-geometry", include_str!("../presets/unstable-geometry.toml")),
];

/// Analysis and plot-data knobs shared by `simulate` and `tomo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Δφ points per photon σx/σy parity scan.
    pub scan_points: usize,
    pub rotated: RotatedChoice,
    pub dark_correction: bool,
    pub histogram_bin_ns: f64,
    pub histogram_span_ns: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            scan_points: 24,
            rotated: RotatedChoice::default(),
            dark_correction: true,
            histogram_bin_ns: 1.0,
            histogram_span_ns: 60.0,
        }
    }
}

/// Complete configuration of every command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    pub experiment: ExperimentConfig,
    pub budget: BudgetInputs,
    pub ramsey: RamseyConfig,
    pub analysis: AnalysisConfig,
}

impl NodeConfig {
    /// Semantic checks; field names in errors are full dotted keys.
    pub fn validate(&self) -> Result<(), SimError> {
        self.experiment.validate().map_err(|e| match e {
            SimError::InvalidConfig { field, message } => SimError::InvalidConfig {
                field: format!("experiment.{field}"),
                message,
            },
            other => other,
        })?;
        if self.analysis.scan_points < 6 {
            return Err(SimError::InvalidConfig {
                field: "analysis.scan_points".into(),
                message: "parity fits need at least 6 points".into(),
            });
        }
        if !(self.analysis.histogram_bin_ns > 0.0 && self.analysis.histogram_span_ns >= self.analysis.histogram_bin_ns) {
            return Err(SimError::InvalidConfig {
                field: "analysis.histogram_bin_ns".into(),
                message: "bin width must be > 0 and fit in histogram_span_ns".into(),
            });
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::validation(format!("cannot serialize configuration: {e}")))
    }
}

/// Where the configuration comes from, lowest priority first.
#[derive(Debug, Clone, Default)]
pub struct ConfigSources {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
}

/// Resolved configuration with enough provenance to point at the line an
/// error came from.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: NodeConfig,
    pub preset: Option<String>,
    pub file: Option<(PathBuf, String)>,
    pub sets: Vec<(String, Value)>,
}

pub fn preset_names() -> Vec<&'static str> {
    BUILTIN_PRESETS.iter().map(|p| p.0).collect()
}

/// Preset text, looked up in `$NODE_SIM_PRESETS/<name>.toml` first.
pub fn preset_text(name: &str) -> Result<String, CliError> {
    if let Some(dir) = std::env::var_os(PRESET_ENV) {
        let path = Path::new(&dir).join(format!("{name}.toml"));
        if path.is_file() {
            return std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())));
        }
    }
    BUILTIN_PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1.to_string())
        .ok_or_else(|| CliError::validation(format!("unknown preset `{name}` (built in: {})", preset_names().join(", "))))
}

/// Parsed preset without any overrides.
pub fn load_preset(name: &str) -> Result<NodeConfig, CliError> {
    resolve(&ConfigSources {
        preset: Some(name.into()),
        ..Default::default()
    })
    .map(|r| r.config)
}

fn parse_table(text: &str, origin: &str) -> Result<Table, CliError> {
    // typed parse first: its errors carry line and column
    toml::from_str::<NodeConfig>(text).map_err(|e| CliError::validation(format!("{origin}: {e}")))?;
    text.parse::<Table>().map_err(|e| CliError::validation(format!("{origin}: {e}")))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::validation(format!("--set: malformed key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::validation(format!("--set {key}: `{p}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// `key=value` with the value read as a TOML literal, or as a bare string
/// when it is not one.
pub fn parse_set(arg: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("--set expects key=value, got `{arg}`")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

/// Line of `dotted` (a full key path) in a TOML document, tracking section
/// headers and dotted keys.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let mut section = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((k, _)) = t.split_once('=') else { continue };
        let k: String = k.split('.').map(|s| s.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
        let full = if section.is_empty() { k } else { format!("{section}.{k}") };
        if full == dotted {
            return Some(n + 1);
        }
    }
    None
}

impl Resolved {
    /// Message for a validation failure, naming the file line, `--set`
    /// argument or preset that supplied the field.
    pub fn explain(&self, e: SimError) -> CliError {
        let SimError::InvalidConfig { field: key, message } = &e else {
            return e.into();
        };
        if self.sets.iter().any(|(k, _)| k == key) {
            return CliError::validation(format!("--set {key}: {message}"));
        }
        if let Some((path, text)) = &self.file {
            if let Some(line) = locate_key(text, key) {
                return CliError::validation(format!("{}:{line}: {key}: {message}", path.display()));
            }
        }
        if let Some(p) = &self.preset {
            if let Some(line) = preset_text(p).ok().and_then(|t| locate_key(&t, key)) {
                return CliError::validation(format!("preset {p}:{line}: {key}: {message}"));
            }
        }
        CliError::validation(format!("{key}: {message}"))
    }
}

pub fn resolve(src: &ConfigSources) -> Result<Resolved, CliError> {
    let preset = match (&src.preset, &src.config) {
        (Some(p), _) => Some(p.clone()),
        (None, None) => Some(DEFAULT_PRESET.to_string()),
        (None, Some(_)) => None,
    };
    let mut table = Table::new();
    if let Some(p) = &preset {
        table = parse_table(&preset_text(p)?, &format!("preset {p}"))?;
    }
    let mut file = None;
    if let Some(path) = &src.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        merge(&mut table, parse_table(&text, &path.display().to_string())?);
        file = Some((path.clone(), text));
    }
    let mut sets = Vec::new();
    for s in &src.sets {
        sets.push(parse_set(s)?);
    }
    if let Some(seed) = src.seed {
        let v = i64::try_from(seed).map_err(|_| CliError::validation(format!("--seed {seed} exceeds {}", i64::MAX)))?;
        sets.push(("experiment.seed".into(), Value::Integer(v)));
        sets.push(("ramsey.seed".into(), Value::Integer(v)));
    }
    if let Some(shots) = src.shots {
        let v = i64::try_from(shots).map_err(|_| CliError::validation(format!("--shots {shots} is too large")))?;
        sets.push(("experiment.shots".into(), Value::Integer(v)));
    }
    for (k, v) in &sets {
        set_path(&mut table, k, v.clone())?;
    }
    let config: NodeConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        let origin = if sets.is_empty() { "configuration" } else { "configuration after --set overrides" };
        CliError::validation(format!("{origin}: {}", e.message()))
    })?;
    let resolved = Resolved {
        config,
        preset,
        file,
        sets,
    };
    resolved.config.validate().map_err(|e| resolved.explain(e))?;
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_presets_parse() {
        for name in preset_names() {
            load_preset(name).unwrap();
        }
    }

    #[test]
    fn set_values_are_typed() {
        assert_eq!(parse_set("a.b=0.5").unwrap().1, Value::Float(0.5));
        assert_eq!(parse_set("a=true").unwrap().1, Value::Boolean(true));
        assert_eq!(parse_set("a=zeeman").unwrap().1, Value::String("zeeman".into()));
        assert!(parse_set("novalue").is_err());
    }

    #[test]
    fn locates_nested_and_dotted_keys() {
        let text = "[experiment]\nshots = 5\n\n[experiment.state]\nwhite_noise = 2\n[budget]\nexperiment.x = 1\n";
        assert_eq!(locate_key(text, "experiment.shots"), Some(2));
        assert_eq!(locate_key(text, "experiment.state.white_noise"), Some(5));
        assert_eq!(locate_key(text, "budget.experiment.x"), Some(7));
        assert_eq!(locate_key(text, "experiment.seed"), None);
    }
}
