use std::path::{Path, PathBuf};
use std::sync::Arc;

use cbf_core::io::{read_rules, read_text};
use cbf_core::{builtin_rules, PipelineConfig, RuleBase, Taxonomy};

use crate::failure::{rules_failure, CliResult, Failure};

/// Read a pipeline config file and apply `key=value` overrides on top.
pub fn load(path: &Path, overrides: &[String]) -> CliResult<PipelineConfig> {
    let text = read_text(path).map_err(|e| Failure::Config(format!("cannot read config: {e}")))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override `{o}` is not key=value")))?;
        table.insert(key.trim().to_string(), parse_value(value.trim()));
    }
    let cfg: PipelineConfig = table
        .try_into()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

pub fn to_toml(cfg: &PipelineConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

/// The rule file named by the config, resolved against the config's directory.
pub fn rules_path(cfg: &PipelineConfig, config_path: &Path) -> Option<PathBuf> {
    cfg.rules.as_ref().map(|r| {
        let r = Path::new(r);
        match config_path.parent() {
            Some(dir) if r.is_relative() => dir.join(r),
            _ => r.to_path_buf(),
        }
    })
}

/// Rules from `path`, or the built-in base.
pub fn load_rules(path: Option<&Path>, taxonomy: &Arc<Taxonomy>) -> CliResult<RuleBase> {
    match path {
        Some(p) => read_rules(p, taxonomy.clone()).map_err(rules_failure),
        None => builtin_rules(taxonomy).map_err(Failure::from),
    }
}
