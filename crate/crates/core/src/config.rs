//! Flat `key = value` configuration files and family specs.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! at most once; unknown keys are rejected so typos never pass silently.
//!
//! | key                | value                                        |
//! |--------------------|----------------------------------------------|
//! | `family`           | family spec, e.g. `bio:d=10,t=1`             |
//! | `pool_size`        | structures to generate (synthetic source)    |
//! | `noise`            | observation noise in `[0, 1)`                |
//! | `corpus`           | CoNLL chunking file; replaces the synthetic pool |
//! | `tag_policy`       | `repair` or `reject`                         |
//! | `fractions`        | comma-separated budget fractions in `(0, 1]` |
//! | `repetitions`      | repetitions per fraction                     |
//! | `seed`             | master seed                                  |
//! | `initial_fraction` | share of structures in `T0`                  |
//! | `test_fraction`    | share held out for testing                   |
//! | `epochs`           | perceptron epochs                            |
//! | `max_iters`        | self-training iteration cap                  |
//! | `remainder`        | scheme I leftover budget: `partial` or `discard` |
//! | `smoothing_window` | Savitzky-Golay window (odd)                  |
//! | `smoothing_degree` | Savitzky-Golay degree                        |
//! | `trials`           | Monte-Carlo trials for information curves    |
//! | `out`              | output directory                             |

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::annotation::Remainder;
use crate::corpus::TagPolicy;
use crate::error::{Error, Result};
use crate::experiment::{DataSource, ExperimentConfig};
use crate::structure::StructureFamily;

pub const KEYS: &[&str] = &[
    "family",
    "pool_size",
    "noise",
    "corpus",
    "tag_policy",
    "fractions",
    "repetitions",
    "seed",
    "initial_fraction",
    "test_fraction",
    "epochs",
    "max_iters",
    "remainder",
    "smoothing_window",
    "smoothing_degree",
    "trials",
    "out",
];

pub const DEFAULT_TRIALS: usize = 1000;

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub trials: usize,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self { experiment: ExperimentConfig::default(), trials: DEFAULT_TRIALS, out: None }
    }
}

/// Parses `key = value` lines; returns them with their line numbers.
pub fn parse_pairs(text: &str) -> Result<HashMap<String, (usize, String)>> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line: line_no, message: format!("unknown key '{key}'") });
        }
        if out.insert(key.to_string(), (line_no, value.trim().to_string())).is_some() {
            return Err(Error::Parse { line: line_no, message: format!("duplicate key '{key}'") });
        }
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, line: usize, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Parse { line, message: format!("{key}: cannot parse '{value}': {e}") })
}

pub fn parse_fractions(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| Error::input(format!("bad fraction '{s}'")))
        })
        .collect()
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut s = Settings::default();
        let cfg = &mut s.experiment;
        let (mut family, mut pool_size, mut noise) = match &cfg.source {
            DataSource::Synthetic { family, pool_size, noise } => (*family, *pool_size, *noise),
            DataSource::Corpus { .. } => unreachable!("default source is synthetic"),
        };
        let mut corpus: Option<PathBuf> = None;
        let mut policy = TagPolicy::default();

        let mut keys: Vec<_> = pairs.iter().collect();
        keys.sort_by_key(|(_, (line, _))| *line);
        for (key, (line, value)) in keys {
            let line = *line;
            let wrap = |e: Error| Error::Parse { line, message: format!("{key}: {e}") };
            match key.as_str() {
                "family" => family = value.parse().map_err(wrap)?,
                "pool_size" => pool_size = parse_value(key, line, value)?,
                "noise" => noise = parse_value(key, line, value)?,
                "corpus" => corpus = Some(PathBuf::from(value)),
                "tag_policy" => {
                    policy = match value.as_str() {
                        "repair" => TagPolicy::Repair,
                        "reject" => TagPolicy::Reject,
                        _ => return Err(wrap(Error::input(format!("expected repair or reject, found '{value}'")))),
                    }
                }
                "fractions" => cfg.fractions = parse_fractions(value).map_err(wrap)?,
                "repetitions" => cfg.repetitions = parse_value(key, line, value)?,
                "seed" => cfg.seed = parse_value(key, line, value)?,
                "initial_fraction" => cfg.initial_fraction = parse_value(key, line, value)?,
                "test_fraction" => cfg.test_fraction = parse_value(key, line, value)?,
                "epochs" => cfg.epochs = parse_value(key, line, value)?,
                "max_iters" => cfg.max_iters = parse_value(key, line, value)?,
                "remainder" => {
                    cfg.remainder = match value.as_str() {
                        "partial" => Remainder::Partial,
                        "discard" => Remainder::Discard,
                        _ => return Err(wrap(Error::input(format!("expected partial or discard, found '{value}'")))),
                    }
                }
                "smoothing_window" => cfg.smoothing_window = parse_value(key, line, value)?,
                "smoothing_degree" => cfg.smoothing_degree = parse_value(key, line, value)?,
                "trials" => s.trials = parse_value(key, line, value)?,
                "out" => s.out = Some(PathBuf::from(value)),
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        cfg.source = match corpus {
            Some(path) => DataSource::Corpus { path, policy },
            None => DataSource::Synthetic { family, pool_size, noise },
        };
        Ok(s)
    }
}

/// Family specs: `chain:n=10`, `assignment:d=4,dprime=10`, `bio:d=10,t=1`,
/// `unconstrained:d=5,l=3`, `uniform:d=6,l=4`.
impl FromStr for StructureFamily {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, params) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
        let mut values: HashMap<&str, usize> = HashMap::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("bad parameter '{part}' in family spec '{spec}'")))?;
            let v: usize =
                v.trim().parse().map_err(|_| Error::input(format!("bad value for '{k}' in family spec '{spec}'")))?;
            if values.insert(k.trim(), v).is_some() {
                return Err(Error::input(format!("repeated parameter '{k}' in family spec '{spec}'")));
            }
        }
        let expected: &[&str] = match kind {
            "chain" => &["n"],
            "assignment" => &["d", "dprime"],
            "bio" => &["d", "t"],
            "unconstrained" | "uniform" => &["d", "l"],
            _ => {
                return Err(Error::input(format!(
                    "unknown family '{kind}' (chain, assignment, bio, unconstrained, uniform)"
                )))
            }
        };
        if let Some(k) = values.keys().find(|k| !expected.contains(k)) {
            return Err(Error::input(format!("unknown parameter '{k}' for {kind}")));
        }
        let get = |k: &str| {
            values
                .get(k)
                .copied()
                .ok_or_else(|| Error::input(format!("{kind} needs '{k}=' (expected {})", expected.join(", "))))
        };
        match kind {
            "chain" => StructureFamily::chain(get("n")?),
            "assignment" => StructureFamily::assignment(get("d")?, get("dprime")?),
            "bio" => StructureFamily::bio(get("d")?, get("t")?),
            "unconstrained" => StructureFamily::unconstrained(get("d")?, get("l")?),
            _ => StructureFamily::uniform_label(get("d")?, get("l")?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_specs() {
        assert_eq!("chain:n=10".parse::<StructureFamily>().unwrap(), StructureFamily::Chain { n: 10 });
        assert_eq!(
            "assignment:d=4,dprime=10".parse::<StructureFamily>().unwrap(),
            StructureFamily::Assignment { agents: 4, tasks: 10 }
        );
        assert_eq!(" bio: d=10, t=1 ".parse::<StructureFamily>().unwrap(), StructureFamily::Bio { len: 10, types: 1 });
        assert_eq!(
            "uniform:d=6,l=4".parse::<StructureFamily>().unwrap(),
            StructureFamily::UniformLabel { len: 6, labels: 4 }
        );
        for bad in [
            "tree:n=3",
            "chain",
            "chain:n=1",
            "bio:d=3",
            "bio:d=3,t=1,x=2",
            "bio:d=3,d=4,t=1",
            "assignment:d=5,dprime=3",
            "bio:d=x,t=1",
        ] {
            assert!(bad.parse::<StructureFamily>().is_err(), "{bad}");
        }
    }

    #[test]
    fn settings_file() {
        let s = Settings::parse(
            "# sweep\nfamily = bio:d=8,t=2\npool_size = 100\nfractions = 0.5, 1.0\nrepetitions = 3\nseed = 7\nremainder = discard\ntrials = 20\nout = results\n",
        )
        .unwrap();
        assert_eq!(
            s.experiment.source,
            DataSource::Synthetic { family: StructureFamily::Bio { len: 8, types: 2 }, pool_size: 100, noise: 0.2 }
        );
        assert_eq!(s.experiment.fractions, vec![0.5, 1.0]);
        assert_eq!((s.experiment.repetitions, s.experiment.seed, s.trials), (3, 7, 20));
        assert_eq!(s.experiment.remainder, Remainder::Discard);
        assert_eq!(s.out, Some(PathBuf::from("results")));
        assert_eq!(Settings::parse("").unwrap(), Settings::default());

        let s = Settings::parse("corpus = train.txt\ntag_policy = reject\n").unwrap();
        assert_eq!(s.experiment.source, DataSource::Corpus { path: "train.txt".into(), policy: TagPolicy::Reject });
    }

    #[test]
    fn settings_errors_carry_line_numbers() {
        for (text, line) in [
            ("seed = 1\nrepetitons = 5\n", 2),
            ("seed = 1\nseed = 2\n", 2),
            ("\nnoise 0.3\n", 2),
            ("repetitions = many\n", 1),
            ("family = tree:n=2\n", 1),
            ("remainder = some\n", 1),
        ] {
            match Settings::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
