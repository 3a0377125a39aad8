//! Flat `key = value` study configuration.
//!
//! One study file drives the whole batch pipeline: which case to load,
//! which contingencies to sample, how many draws, and the network
//! hyperparameters. The format is deliberately parser-free and
//! diff-friendly: one key per line, `#` or `%` comments, arrays as
//! comma-separated values, contingencies as repeated
//! `contingency = <id>,<branch>[,<branch>...]` lines.

use crate::learning::Activation;
use crate::net_model::NetworkCase;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("unknown key '{key}' on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("contingency '{id}' references branch {branch} which does not exist")]
    UnknownBranch { id: String, branch: u32 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub case: PathBuf,
    pub out_dir: PathBuf,
    /// (id, outaged branch ids)
    pub contingencies: Vec<(String, Vec<u32>)>,
    pub samples_per_contingency: usize,
    pub perturb_lo: f64,
    pub perturb_hi: f64,
    pub f0: f64,
    pub k_sys: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub patience: usize,
    /// Required: every run is reproducible, no implicit entropy.
    pub master_seed: u64,
    /// Monitored buses; `None` means every load bus with a cost entry.
    pub buses: Option<Vec<u32>>,
    /// Identifiability tolerance on the principal-angle cosine.
    pub tol: f64,
}

pub fn parse_config(text: &str) -> Result<StudyConfig, ConfigError> {
    let mut case: Option<PathBuf> = None;
    let mut out_dir = PathBuf::from("out");
    let mut contingencies = Vec::new();
    let mut samples_per_contingency = 200usize;
    let mut perturb_lo = 0.95;
    let mut perturb_hi = 1.05;
    let mut f0 = 60.0;
    let mut k_sys = 0.5;
    let mut hidden = vec![40, 30, 20];
    let mut activation = Activation::Relu;
    let mut epochs = 300usize;
    let mut batch_size = 32usize;
    let mut learning_rate = 3e-3;
    let mut weight_decay = 1e-4;
    let mut train_fraction = 0.7;
    let mut val_fraction = 0.1;
    let mut patience = 30usize;
    let mut master_seed: Option<u64> = None;
    let mut buses: Option<Vec<u32>> = None;
    let mut tol = 1e-6;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let cut = raw.find(['#', '%']).unwrap_or(raw.len());
        let stripped = raw[..cut].trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError::Syntax {
            line,
            msg: "expected 'key = value'".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let syntax = |msg: String| ConfigError::Syntax { line, msg };
        let parse_list_u32 = |v: &str| -> Result<Vec<u32>, ConfigError> {
            v.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u32>()
                        .map_err(|_| syntax(format!("bad integer '{t}'")))
                })
                .collect()
        };
        macro_rules! num {
            ($t:ty) => {
                value
                    .parse::<$t>()
                    .map_err(|_| syntax(format!("bad value '{value}' for '{key}'")))?
            };
        }
        match key {
            "case" => case = Some(PathBuf::from(value)),
            "out_dir" => out_dir = PathBuf::from(value),
            "contingency" => {
                let mut parts = value.split(',').map(str::trim);
                let id = parts
                    .next()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| syntax("contingency needs an id".into()))?;
                let branches: Vec<u32> = parts
                    .map(|t| {
                        t.parse::<u32>()
                            .map_err(|_| syntax(format!("bad branch id '{t}'")))
                    })
                    .collect::<Result<_, _>>()?;
                if branches.is_empty() {
                    return Err(syntax(format!("contingency '{id}' lists no branches")));
                }
                contingencies.push((id.to_string(), branches));
            }
            "samples_per_contingency" => samples_per_contingency = num!(usize),
            "perturb_range" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| syntax("perturb_range wants 'lo,hi'".into()))?;
                perturb_lo = lo
                    .trim()
                    .parse()
                    .map_err(|_| syntax(format!("bad float '{lo}'")))?;
                perturb_hi = hi
                    .trim()
                    .parse()
                    .map_err(|_| syntax(format!("bad float '{hi}'")))?;
                if perturb_lo > perturb_hi {
                    return Err(syntax("perturb_range lo > hi".into()));
                }
            }
            "f0" => f0 = num!(f64),
            "k_sys" => k_sys = num!(f64),
            "hidden" => {
                hidden = value
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|_| syntax(format!("bad layer size '{t}'")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "activation" => {
                activation = Activation::parse(value)
                    .ok_or_else(|| syntax(format!("unknown activation '{value}'")))?
            }
            "epochs" => epochs = num!(usize),
            "batch_size" => batch_size = num!(usize),
            "learning_rate" => learning_rate = num!(f64),
            "weight_decay" => weight_decay = num!(f64),
            "train_fraction" => train_fraction = num!(f64),
            "val_fraction" => val_fraction = num!(f64),
            "patience" => patience = num!(usize),
            "master_seed" => master_seed = Some(num!(u64)),
            "buses" => {
                buses = if value == "all" {
                    None
                } else {
                    Some(parse_list_u32(value)?)
                }
            }
            "tol" => tol = num!(f64),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
    }

    Ok(StudyConfig {
        case: case.ok_or(ConfigError::MissingKey("case"))?,
        out_dir,
        contingencies,
        samples_per_contingency,
        perturb_lo,
        perturb_hi,
        f0,
        k_sys,
        hidden,
        activation,
        epochs,
        batch_size,
        learning_rate,
        weight_decay,
        train_fraction,
        val_fraction,
        patience,
        master_seed: master_seed.ok_or(ConfigError::MissingKey("master_seed"))?,
        buses,
        tol,
    })
}

pub fn load_config(path: &Path) -> Result<StudyConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl StudyConfig {
    /// Check that every contingency references existing branches.
    pub fn validate_against(&self, case: &NetworkCase) -> Result<(), ConfigError> {
        for (id, branches) in &self.contingencies {
            for &b in branches {
                if case.branch_index(b).is_err() {
                    return Err(ConfigError::UnknownBranch {
                        id: id.clone(),
                        branch: b,
                    });
                }
            }
        }
        Ok(())
    }

    /// Monitored buses: the explicit list, or every bus with a cost entry
    /// and nonzero demand.
    pub fn monitored_buses(&self, case: &NetworkCase) -> Vec<u32> {
        match &self.buses {
            Some(list) => list.clone(),
            None => case
                .costs
                .iter()
                .filter(|c| {
                    case.bus_index(c.bus)
                        .map(|i| case.buses[i].p_demand > 0.0)
                        .unwrap_or(false)
                })
                .map(|c| c.bus)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::parse_case;
    use crate::test_cases::CASE6;

    const SAMPLE: &str = "\
# study over the bundled 6-bus case
case = data/case6.case
out_dir = run1
master_seed = 42
samples_per_contingency = 50
perturb_range = 0.95, 1.05
contingency = c1, 1
contingency = c45, 4, 5
hidden = 16, 8
activation = tanh
buses = 3, 4
";

    #[test]
    fn parses_a_full_file() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.case, PathBuf::from("data/case6.case"));
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.samples_per_contingency, 50);
        assert_eq!(
            cfg.contingencies,
            vec![
                ("c1".to_string(), vec![1]),
                ("c45".to_string(), vec![4, 5])
            ]
        );
        assert_eq!(cfg.hidden, vec![16, 8]);
        assert_eq!(cfg.activation, Activation::Tanh);
        assert_eq!(cfg.buses, Some(vec![3, 4]));
        // defaults survive
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.f0, 60.0);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(
            parse_config("case = x.case\n"),
            Err(ConfigError::MissingKey("master_seed"))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = parse_config("case = x\nmaster_seed = 1\nfrobnicate = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "frobnicate");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contingency_branches_checked_against_case() {
        let case = parse_case(CASE6).unwrap();
        let cfg =
            parse_config("case = x\nmaster_seed = 1\ncontingency = ghost, 99\n").unwrap();
        assert!(matches!(
            cfg.validate_against(&case),
            Err(ConfigError::UnknownBranch { branch: 99, .. })
        ));
        let ok = parse_config("case = x\nmaster_seed = 1\ncontingency = c1, 1\n").unwrap();
        assert!(ok.validate_against(&case).is_ok());
    }

    #[test]
    fn all_buses_defaults_to_costed_load_buses() {
        let case = parse_case(CASE6).unwrap();
        let cfg = parse_config("case = x\nmaster_seed = 1\n").unwrap();
        assert_eq!(cfg.monitored_buses(&case), vec![3, 4, 5, 6]);
    }
}
