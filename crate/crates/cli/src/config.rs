//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and falls
//! back to the documented default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use msn_core::maze::{Exploration, ShareMode, DEFAULT_RADIO_RANGE};
use msn_core::metrics::{FixedBaseline, SweepStatistic};
use msn_core::network::{Churn, SimConfig, Visibility};
use msn_core::social::{DecayParams, Weights};

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but not yet interpreted key/value pairs.
#[derive(Debug, Default)]
struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::ConfigParse {
                    line,
                    message: format!("expected `key = value`, got {content:?}"),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::ConfigParse {
                    line,
                    message: "missing key".into(),
                });
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(CliError::ConfigParse {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        let Some(entry) = self.entries.remove(key) else {
            return Ok(None);
        };
        entry
            .value
            .parse()
            .map(Some)
            .map_err(|_| CliError::ConfigField {
                line: entry.line,
                field: key.to_string(),
                message: format!("cannot parse {:?}", entry.value),
            })
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn take_choice<T: Copy>(
        &mut self,
        key: &str,
        choices: &[(&str, T)],
        default: T,
    ) -> Result<T, CliError> {
        let Some(entry) = self.entries.remove(key) else {
            return Ok(default);
        };
        choices
            .iter()
            .find(|(name, _)| *name == entry.value)
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::ConfigField {
                line: entry.line,
                field: key.to_string(),
                message: format!(
                    "expected one of {}, got {:?}",
                    choices
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", "),
                    entry.value
                ),
            })
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().next() {
            Some((key, entry)) => Err(CliError::ConfigUnknown {
                line: entry.line,
                key,
            }),
            None => Ok(()),
        }
    }
}

/// Everything the `sweep` and `run` commands need.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimSettings {
    pub sim: SimConfig,
    pub baseline: FixedBaseline,
    pub statistic: SweepStatistic,
}

pub fn parse_sim_config(text: &str) -> Result<SimSettings, CliError> {
    let mut kv = KeyValues::parse(text)?;
    let d = SimConfig::default();

    let weights = Weights {
        interest: kv.take_or("w_interest", d.weights.interest)?,
        spatial: kv.take_or("w_spatial", d.weights.spatial)?,
        neighbor: kv.take_or("w_neighbor", d.weights.neighbor)?,
    };
    let decay = DecayParams {
        a: kv.take_or("decay_a", d.decay.a)?,
        c_th: kv.take_or("c_th", d.decay.c_th)?,
    };
    let adhoc = kv.take_choice(
        "visibility",
        &[("infrastructure", false), ("adhoc", true)],
        false,
    )?;
    let range_line = kv.line_of("adhoc_range");
    let range: Option<usize> = kv.take("adhoc_range")?;
    let visibility = match (adhoc, range) {
        (true, range) => Visibility::Adhoc {
            range: range.unwrap_or(1),
        },
        (false, None) => Visibility::Infrastructure,
        (false, Some(_)) => {
            return Err(CliError::ConfigField {
                line: range_line.expect("adhoc_range was present"),
                field: "adhoc_range".into(),
                message: "only valid with `visibility = adhoc`".into(),
            })
        }
    };
    let hop_cap: Option<u32> = kv.take("hop_cap")?;

    let sim = SimConfig {
        machine_count: kv.take_or("machine_count", d.machine_count)?,
        subspace_count: kv.take_or("subspace_count", d.subspace_count)?,
        interest_universe: kv.take_or("interest_universe", d.interest_universe)?,
        interests_per_machine: kv.take_or("interests_per_machine", d.interests_per_machine)?,
        weights,
        decay,
        visibility,
        churn: Churn {
            p_move: kv.take_or("p_move", d.churn.p_move)?,
            p_interest: kv.take_or("p_interest", d.churn.p_interest)?,
        },
        steps: kv.take_or("steps", d.steps)?,
        seed: kv.take_or("seed", d.seed)?,
        decay_scaled: kv.take_or("decay_scaled", d.decay_scaled)?,
        refractory: kv.take_or("refractory", d.refractory)?,
        hop_cap: hop_cap.or(d.hop_cap),
    };
    let baseline = FixedBaseline {
        degree: kv.take_or("baseline_degree", FixedBaseline::default().degree)?,
    };
    let statistic = kv.take_choice(
        "statistic",
        &[
            ("time_average", SweepStatistic::TimeAverage),
            ("horizon_end", SweepStatistic::HorizonEnd),
        ],
        SweepStatistic::default(),
    )?;
    kv.finish()?;

    sim.validate()?;
    if baseline.degree >= sim.machine_count {
        return Err(CliError::ConfigInvalid {
            field: "baseline_degree".into(),
            message: format!("must be < machine_count ({})", sim.machine_count),
        });
    }
    Ok(SimSettings {
        sim,
        baseline,
        statistic,
    })
}

/// Settings for the maze scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeScenarioConfig {
    /// `None` selects the bundled 9x9 scenario.
    pub maze: Option<PathBuf>,
    pub radio_range: u32,
    pub max_steps: u64,
    pub share_mode: ShareMode,
    pub exchange_cap: Option<usize>,
    pub exploration: Exploration,
    pub seed: u64,
}

impl Default for MazeScenarioConfig {
    fn default() -> Self {
        Self {
            maze: None,
            radio_range: DEFAULT_RADIO_RANGE,
            max_steps: 10_000,
            share_mode: ShareMode::Continuous,
            exchange_cap: None,
            exploration: Exploration::DepthFirst,
            seed: 1,
        }
    }
}

/// Parses a maze scenario file. A relative `maze` path is resolved against
/// `base_dir`.
pub fn parse_maze_config(text: &str, base_dir: &Path) -> Result<MazeScenarioConfig, CliError> {
    let mut kv = KeyValues::parse(text)?;
    let d = MazeScenarioConfig::default();
    let maze: Option<PathBuf> = kv.take("maze")?;
    let config = MazeScenarioConfig {
        maze: maze.map(|p| if p.is_relative() { base_dir.join(p) } else { p }),
        radio_range: kv.take_or("radio_range", d.radio_range)?,
        max_steps: kv.take_or("max_steps", d.max_steps)?,
        share_mode: kv.take_choice(
            "share_mode",
            &[
                ("continuous", ShareMode::Continuous),
                ("first_contact", ShareMode::OnFirstContact),
            ],
            d.share_mode,
        )?,
        exchange_cap: kv.take("exchange_cap")?,
        exploration: kv.take_choice(
            "exploration",
            &[
                ("depth_first", Exploration::DepthFirst),
                ("nearest_frontier", Exploration::NearestFrontier),
            ],
            d.exploration,
        )?,
        seed: kv.take_or("seed", d.seed)?,
    };
    kv.finish()?;
    if config.max_steps == 0 {
        return Err(CliError::ConfigInvalid {
            field: "max_steps".into(),
            message: "must be >= 1".into(),
        });
    }
    Ok(config)
}
