//! Line-oriented `key = value` sweep configuration.
//!
//! The format is deliberately flat so it can be specified byte-exactly:
//! one assignment per line, `#` starts a comment, blank lines are
//! ignored, unknown or duplicate keys are fatal.

use std::collections::BTreeSet;
use std::fmt;

use quadcool::lindblad::CavityRateConvention;
use quadcool::rates::SystemParams;

/// Which steady-state solvers a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverSet {
    pub rate: bool,
    pub master: bool,
}

impl Default for SolverSet {
    fn default() -> Self {
        Self {
            rate: true,
            master: true,
        }
    }
}

/// Fully validated sweep description.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Physical parameters; the `delta` field is unused (each grid point
    /// substitutes its own detuning).
    pub params: SystemParams,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_points: usize,
    pub solvers: SolverSet,
    pub n_phonon_states: usize,
    pub n_photon_states: usize,
    /// Starting intermediate-state cutoff for the rate sums; 0 lets the
    /// solver pick per transition.
    pub l_max: usize,
    pub cavity_rate_convention: CavityRateConvention,
    pub concurrency_limit: usize,
    pub output_path: Option<String>,
}

impl SweepConfig {
    /// Detuning grid, ascending, `n_points` values.
    pub fn grid(&self) -> Vec<f64> {
        let span = self.delta_max - self.delta_min;
        (0..self.n_points)
            .map(|i| self.delta_min + span * i as f64 / (self.n_points - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => {
                write!(f, "config line {line}: {message}")
            }
            ConfigError::Validation(message) => write!(f, "invalid config: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "g",
    "kappa",
    "omega_drive",
    "gamma_m",
    "n_th",
    "delta_min",
    "delta_max",
    "n_points",
    "solvers",
    "n_phonon_states",
    "n_photon_states",
    "l_max",
    "cavity_rate_convention",
    "concurrency_limit",
    "output_path",
];

const REQUIRED_KEYS: &[&str] = &[
    "g",
    "kappa",
    "omega_drive",
    "gamma_m",
    "n_th",
    "delta_min",
    "delta_max",
    "n_points",
];

struct RawEntry {
    line: usize,
    value: String,
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let mut entries: Vec<(String, RawEntry)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some(eq) = stripped.find('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{stripped}`"),
            });
        };
        let key = stripped[..eq].trim().to_string();
        let value = stripped[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: "missing key before `=`".into(),
            });
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if let Some((_, prev)) = entries.iter().find(|(k, _)| *k == key) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        entries.push((
            key,
            RawEntry {
                line: line_no,
                value,
            },
        ));
    }

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !entries.iter().any(|(key, _)| key == k))
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Validation(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let lookup = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, e)| e);
    let parse_f64 = |key: &str| -> Result<f64, ConfigError> {
        let entry = lookup(key).expect("required key checked");
        entry.value.parse::<f64>().map_err(|_| ConfigError::Parse {
            line: entry.line,
            message: format!("`{key}` must be a number, got `{}`", entry.value),
        })
    };
    let parse_usize_opt = |key: &str, default: usize| -> Result<usize, ConfigError> {
        match lookup(key) {
            None => Ok(default),
            Some(entry) => entry.value.parse::<usize>().map_err(|_| ConfigError::Parse {
                line: entry.line,
                message: format!("`{key}` must be a nonnegative integer, got `{}`", entry.value),
            }),
        }
    };

    let g = parse_f64("g")?;
    let kappa = parse_f64("kappa")?;
    let omega_drive = parse_f64("omega_drive")?;
    let gamma_m = parse_f64("gamma_m")?;
    let n_th = parse_f64("n_th")?;
    let delta_min = parse_f64("delta_min")?;
    let delta_max = parse_f64("delta_max")?;
    let n_points_entry = lookup("n_points").expect("required");
    let n_points: usize = n_points_entry
        .value
        .parse()
        .map_err(|_| ConfigError::Parse {
            line: n_points_entry.line,
            message: format!("`n_points` must be a positive integer, got `{}`", n_points_entry.value),
        })?;

    let solvers = match lookup("solvers") {
        None => SolverSet::default(),
        Some(entry) => {
            let mut set = BTreeSet::new();
            for item in entry.value.split(',') {
                let item = item.trim();
                match item {
                    "rate" | "master" => {
                        set.insert(item.to_string());
                    }
                    other => {
                        return Err(ConfigError::Parse {
                            line: entry.line,
                            message: format!(
                                "unknown solver `{other}` (expected `rate` and/or `master`)"
                            ),
                        })
                    }
                }
            }
            if set.is_empty() {
                return Err(ConfigError::Parse {
                    line: entry.line,
                    message: "`solvers` must name at least one solver".into(),
                });
            }
            SolverSet {
                rate: set.contains("rate"),
                master: set.contains("master"),
            }
        }
    };

    let n_phonon_states = parse_usize_opt("n_phonon_states", 30)?;
    let n_photon_states = parse_usize_opt("n_photon_states", 3)?;
    let l_max = parse_usize_opt("l_max", 0)?;
    let concurrency_limit = parse_usize_opt("concurrency_limit", 1)?;

    let cavity_rate_convention = match lookup("cavity_rate_convention") {
        None => CavityRateConvention::FullKappa,
        Some(entry) => match entry.value.as_str() {
            "full_kappa" => CavityRateConvention::FullKappa,
            "half_kappa" => CavityRateConvention::HalfKappa,
            other => {
                return Err(ConfigError::Parse {
                    line: entry.line,
                    message: format!(
                        "`cavity_rate_convention` must be `full_kappa` or `half_kappa`, got `{other}`"
                    ),
                })
            }
        },
    };

    let output_path = lookup("output_path").map(|e| e.value.clone());

    // Semantic validation.
    if n_points < 2 {
        return Err(ConfigError::Validation(format!(
            "n_points must be at least 2, got {n_points}"
        )));
    }
    if delta_min.is_nan() || delta_max.is_nan() || delta_min >= delta_max {
        return Err(ConfigError::Validation(format!(
            "delta_min ({delta_min}) must be below delta_max ({delta_max})"
        )));
    }
    if n_photon_states < 2 {
        return Err(ConfigError::Validation(format!(
            "n_photon_states must be at least 2, got {n_photon_states}"
        )));
    }
    if n_phonon_states < 2 {
        return Err(ConfigError::Validation(format!(
            "n_phonon_states must be at least 2, got {n_phonon_states}"
        )));
    }
    if concurrency_limit == 0 {
        return Err(ConfigError::Validation(
            "concurrency_limit must be at least 1".into(),
        ));
    }

    let params = SystemParams::new(g, kappa, 0.0, omega_drive, gamma_m, n_th)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    params
        .check_stability(n_photon_states - 1)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    Ok(SweepConfig {
        params,
        delta_min,
        delta_max,
        n_points,
        solvers,
        n_phonon_states,
        n_photon_states,
        l_max,
        cavity_rate_convention,
        concurrency_limit,
        output_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1_CONFIG: &str = "g = 0.1\nkappa = 0.25\nomega_drive = 0.1\ngamma_m = 1e-6\n\
                               n_th = 10\ndelta_min = -5\ndelta_max = 0\nn_points = 51\n\
                               solvers = rate,master";

    #[test]
    fn reference_sweep_config_parses() {
        let config = parse_config(FIG1_CONFIG).unwrap();
        assert_eq!(config.params.g, 0.1);
        assert_eq!(config.params.kappa, 0.25);
        assert_eq!(config.params.omega_drive, 0.1);
        assert_eq!(config.n_points, 51);
        assert!(config.solvers.rate && config.solvers.master);
        assert_eq!(config.n_phonon_states, 30);
        assert_eq!(config.n_photon_states, 3);
        assert_eq!(config.concurrency_limit, 1);
        assert_eq!(
            config.cavity_rate_convention,
            CavityRateConvention::FullKappa
        );
        let grid = config.grid();
        assert_eq!(grid.len(), 51);
        assert_eq!(grid[0], -5.0);
        assert_eq!(grid[50], 0.0);
        assert!((grid[30] - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn unstable_coupling_rejected_at_photon_cutoff() {
        let text = FIG1_CONFIG.replace("g = 0.1", "g = -0.3");
        match parse_config(&text) {
            Err(ConfigError::Validation(message)) => {
                assert!(message.contains("photon number"), "{message}");
            }
            other => panic!("expected stability rejection, got {other:?}"),
        }
    }

    #[test]
    fn single_point_grid_rejected() {
        let text = FIG1_CONFIG.replace("n_points = 51", "n_points = 1");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Validation(_))
        ));
    }

    #[test]
    fn unknown_key_is_fatal_with_line_number() {
        let text = format!("{FIG1_CONFIG}\ndetuning = 3");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, message }) => {
                assert_eq!(line, 10);
                assert!(message.contains("detuning"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_fatal() {
        let text = format!("{FIG1_CONFIG}\ng = 0.2");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { line: 10, .. })
        ));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = format!("# sweep setup\n\n{FIG1_CONFIG} # trailing note\n");
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn inverted_range_rejected() {
        let text = FIG1_CONFIG
            .replace("delta_min = -5", "delta_min = 1")
            .replace("delta_max = 0", "delta_max = -1");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Validation(_))
        ));
    }

    #[test]
    fn solver_subset_and_convention() {
        let text = format!(
            "{}\ncavity_rate_convention = half_kappa",
            FIG1_CONFIG.replace("solvers = rate,master", "solvers = rate")
        );
        let config = parse_config(&text).unwrap();
        assert!(config.solvers.rate && !config.solvers.master);
        assert_eq!(
            config.cavity_rate_convention,
            CavityRateConvention::HalfKappa
        );
    }
}
