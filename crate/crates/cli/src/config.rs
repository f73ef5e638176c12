//! Optional TOML run file. Every key mirrors a command-line flag (dashes
//! become underscores); a flag given on the command line wins.

use std::path::Path;

use parisian_core::RuinMode;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub u: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "S")]
    pub horizon: Option<f64>,
    #[serde(rename = "T")]
    pub t_scaled: Option<f64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub base_step: Option<f64>,
    pub fine_step: Option<f64>,
    pub fine_window: Option<f64>,
    pub clock_step: Option<f64>,
    pub threads: Option<usize>,
    pub mode: Option<RuinMode>,
    pub lambdas: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub us: Option<Vec<f64>>,
    pub xs: Option<Vec<f64>>,
    pub piterbarg_value: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Parses a comma-separated list of reals such as `2,5,10`.
pub fn parse_list(text: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| {
            item.trim().parse::<f64>().map_err(|_| {
                CliError::Usage(format!(
                    "--{name}: cannot parse `{}` as a number",
                    item.trim()
                ))
            })
        })
        .collect()
}

/// Flag value if present, else the config value, else an error naming both.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| {
        CliError::Usage(format!(
            "missing required value for --{name} (flag or `{}` in the config file)",
            name.replace('-', "_")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_and_reject_garbage() {
        assert_eq!(
            parse_list("2, 5,10", "lambdas").unwrap(),
            vec![2.0, 5.0, 10.0]
        );
        assert!(parse_list("", "us").unwrap().is_empty());
        assert!(matches!(parse_list("1,x", "us"), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_keys_follow_flag_names() {
        let cfg: FileConfig =
            toml::from_str("u = 1.5\nS = 2.0\nT = 0.5\nmode = \"classical\"\nus = [0.5, 1.0]")
                .unwrap();
        assert_eq!(cfg.u, Some(1.5));
        assert_eq!(cfg.horizon, Some(2.0));
        assert_eq!(cfg.t_scaled, Some(0.5));
        assert_eq!(cfg.mode, Some(RuinMode::Classical));
        assert_eq!(cfg.us, Some(vec![0.5, 1.0]));
        assert!(toml::from_str::<FileConfig>("horizon = 1.0").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        assert_eq!(required(Some(1), Some(2), "paths").unwrap(), 1);
        assert_eq!(required(None, Some(2), "paths").unwrap(), 2);
        assert!(matches!(
            required::<u64>(None, None, "paths"),
            Err(CliError::Usage(_))
        ));
    }
}
