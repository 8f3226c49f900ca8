//! Scenario configuration files.
//!
//! ```text
//! # shared keys apply to every section below
//! dim = 3
//!
//! [cone-flow]
//! tau_start = -10
//! tau_end = -0.1
//! steps = 10000
//!
//! [limit-experiment]
//! lambdas = 1, 2, 4, 8
//! ```
//!
//! Keys are `key = value`; `#` starts a comment; lists are comma separated.
//! Section keys override shared keys. Unknown keys are rejected by the
//! scenario that reads them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    ConeFlow,
    KasnerFlow,
    LichnerowiczSweep,
    Riccati,
    BolzaCheck,
    LimitExperiment,
    GraphCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::ConeFlow,
        Scenario::KasnerFlow,
        Scenario::LichnerowiczSweep,
        Scenario::Riccati,
        Scenario::BolzaCheck,
        Scenario::LimitExperiment,
        Scenario::GraphCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ConeFlow => "cone-flow",
            Scenario::KasnerFlow => "kasner-flow",
            Scenario::LichnerowiczSweep => "lichnerowicz-sweep",
            Scenario::Riccati => "riccati",
            Scenario::BolzaCheck => "bolza-check",
            Scenario::LimitExperiment => "limit-experiment",
            Scenario::GraphCheck => "graph-check",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario '{s}'")))
    }
}

/// Parsed file: shared keys plus one table per section, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub shared: BTreeMap<String, String>,
    pub sections: Vec<(Scenario, BTreeMap<String, String>)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = ConfigFile::default();
        let mut current: Option<usize> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| CliError::Config(format!("line {}: {msg}", no + 1));
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err("unterminated section header"))?;
                let sc: Scenario = name.trim().parse().map_err(|_| err(&format!("unknown scenario '{}'", name.trim())))?;
                if out.sections.iter().any(|(s, _)| *s == sc) {
                    return Err(err(&format!("duplicate section [{sc}]")));
                }
                out.sections.push((sc, BTreeMap::new()));
                current = Some(out.sections.len() - 1);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected 'key = value'"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(err("empty key or value"));
            }
            let table = match current {
                Some(i) => &mut out.sections[i].1,
                None => &mut out.shared,
            };
            if table.insert(k.to_string(), v.to_string()).is_some() {
                return Err(err(&format!("duplicate key '{k}'")));
            }
        }
        Ok(out)
    }

    /// Resolves the scenario to run: the override if given, else the only
    /// section in the file.
    pub fn select(&self, scenario: Option<Scenario>) -> Result<ScenarioConfig, CliError> {
        let scenario = match scenario {
            Some(s) => s,
            None => match self.sections.as_slice() {
                [(s, _)] => *s,
                [] => return Err(CliError::Config("config names no scenario; use --scenario".into())),
                _ => return Err(CliError::Config("config has several scenarios; pick one with --scenario".into())),
            },
        };
        let mut params = self.shared.clone();
        if let Some((_, t)) = self.sections.iter().find(|(s, _)| *s == scenario) {
            params.extend(t.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        Ok(ScenarioConfig::new(scenario, params))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub params: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, params: BTreeMap<String, String>) -> Self {
        Self { scenario, params }
    }

    pub fn defaults(scenario: Scenario) -> Self {
        Self::new(scenario, BTreeMap::new())
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Typed access through [`Params`], which tracks the keys read.
    pub fn reader(&self) -> Params<'_> {
        Params {
            cfg: self,
            seen: Vec::new(),
        }
    }
}

pub struct Params<'a> {
    cfg: &'a ScenarioConfig,
    seen: Vec<&'static str>,
}

impl Params<'_> {
    fn raw(&mut self, key: &'static str) -> Option<&str> {
        self.seen.push(key);
        self.cfg.params.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
        v.parse()
            .map_err(|_| CliError::Config(format!("cannot parse {key} = '{v}'")))
    }

    pub fn get<T: FromStr>(&mut self, key: &'static str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            Some(v) => Self::parse(key, v),
            None => Ok(default),
        }
    }

    pub fn list<T: FromStr + Clone>(&mut self, key: &'static str, default: &[T]) -> Result<Vec<T>, CliError> {
        match self.raw(key) {
            Some(v) => v.split(',').map(|s| Self::parse(key, s.trim())).collect(),
            None => Ok(default.to_vec()),
        }
    }

    /// Strictly positive value (tolerances, volumes, lengths).
    pub fn positive(&mut self, key: &'static str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Rejects keys no accessor asked for.
    pub fn finish(self) -> Result<(), CliError> {
        let unknown: Vec<&str> = self
            .cfg
            .params
            .keys()
            .map(String::as_str)
            .filter(|k| !self.seen.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown keys for {}: {}",
                self.cfg.scenario,
                unknown.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_shared_keys() {
        let text = "# demo\ndim = 3\n\n[cone-flow]\nsteps = 10 # inline\n[riccati]\ndim = 2\n";
        let f = ConfigFile::parse(text).unwrap();
        assert_eq!(f.sections.len(), 2);
        let c = f.select(Some(Scenario::Riccati)).unwrap();
        assert_eq!(c.params["dim"], "2");
        let c = f.select(Some(Scenario::ConeFlow)).unwrap();
        assert_eq!(c.params["dim"], "3");
        assert_eq!(c.params["steps"], "10");
        assert!(f.select(None).is_err());
    }

    #[test]
    fn malformed_lines() {
        for bad in ["[cone-flow\n", "[nope]\n", "x\n", "a = 1\na = 2\n", "[riccati]\n[riccati]\n", "a =\n"] {
            assert!(matches!(ConfigFile::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn typed_access_and_unknown_keys() {
        let c = ScenarioConfig::defaults(Scenario::LimitExperiment)
            .with("lambdas", "1, 2,4")
            .with("tol", "-1");
        let mut p = c.reader();
        assert_eq!(p.list::<f64>("lambdas", &[]).unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(p.positive("tol", 1.0).is_err());
        assert_eq!(p.get("steps", 5usize).unwrap(), 5);
        assert!(p.finish().is_ok());

        let c = ScenarioConfig::defaults(Scenario::Riccati).with("bogus", 1);
        assert!(c.reader().finish().is_err());
        let c = ScenarioConfig::defaults(Scenario::Riccati).with("steps", "ten");
        assert!(c.reader().get("steps", 1usize).is_err());
    }

    #[test]
    fn scenario_names_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
    }
}
