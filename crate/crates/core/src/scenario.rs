//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! T = 1
//! steps = 1024
//! pattern = symmetric-w2
//! a = 0.2
//! c = table:0:0,0.5:1,1:0
//! xi = 1,0.5,0.5
//! ```
//!
//! Keys that are absent take the values of [`CoefficientSet::default`], a
//! unit horizon, 1024 steps, the symmetric pattern and `xi = 0,0,0`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{
    validate, Coefficient, CoefficientSet, InformationPattern, TerminalCondition, TimeGrid,
    ValidatedModel,
};

pub const DEFAULT_STEPS: usize = 1024;

/// Parsed but not yet validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub horizon: f64,
    /// Step count from the file, if given.
    pub steps: Option<usize>,
    pub pattern: InformationPattern,
    pub coefficients: CoefficientSet,
    pub terminal: TerminalCondition,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: None,
            pattern: InformationPattern::SymmetricW2,
            coefficients: CoefficientSet::default(),
            terminal: TerminalCondition::default(),
        }
    }
}

impl Scenario {
    /// Validates on a grid with `steps` steps, falling back to the file's
    /// value and then to [`DEFAULT_STEPS`].
    pub fn build(&self, steps: Option<usize>) -> Result<ValidatedModel> {
        let n = steps.or(self.steps).unwrap_or(DEFAULT_STEPS);
        let grid = TimeGrid::new(self.horizon, n)?;
        validate(self.coefficients.clone(), self.terminal, self.pattern, grid)
    }
}

fn parse_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_real(line: usize, key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, key, format!("`{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, key, "value is not finite"));
    }
    Ok(v)
}

fn parse_function(line: usize, key: &str, s: &str) -> Result<Coefficient> {
    let s = s.trim();
    let Some(body) = s.strip_prefix("table:") else {
        return Ok(Coefficient::Constant(parse_real(line, key, s)?));
    };
    let mut points = Vec::new();
    for entry in body.split(',') {
        let (t, v) = entry
            .split_once(':')
            .ok_or_else(|| parse_err(line, key, format!("table entry `{entry}` is not t:v")))?;
        points.push((parse_real(line, key, t)?, parse_real(line, key, v)?));
    }
    Coefficient::table(points).map_err(|e| parse_err(line, key, e.to_string()))
}

/// Parses scenario text. Unknown and repeated keys are errors.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut sc = Scenario::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, content, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(parse_err(line, key, "key given twice"));
        }
        let cs = &mut sc.coefficients;
        match key {
            "T" => {
                sc.horizon = parse_real(line, key, value)?;
                if sc.horizon <= 0.0 {
                    return Err(parse_err(line, key, "horizon must be positive"));
                }
            }
            "steps" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| parse_err(line, key, format!("`{value}` is not a step count")))?;
                sc.steps = Some(n);
            }
            "pattern" => {
                sc.pattern = value.parse().map_err(|e: String| parse_err(line, key, e))?;
            }
            "a" => cs.a = parse_function(line, key, value)?,
            "b1" => cs.b1 = parse_function(line, key, value)?,
            "b2" => cs.b2 = parse_function(line, key, value)?,
            "f1" => cs.f1 = parse_function(line, key, value)?,
            "f2" => cs.f2 = parse_function(line, key, value)?,
            "c" => cs.c = parse_function(line, key, value)?,
            "k1" => cs.k1 = parse_function(line, key, value)?,
            "k2" => cs.k2 = parse_function(line, key, value)?,
            "n1" => cs.n1 = parse_function(line, key, value)?,
            "n2" => cs.n2 = parse_function(line, key, value)?,
            "l1" => cs.l1 = parse_function(line, key, value)?,
            "l2" => cs.l2 = parse_function(line, key, value)?,
            "m1" => cs.m1 = parse_function(line, key, value)?,
            "m2" => cs.m2 = parse_function(line, key, value)?,
            "r1" => cs.r1 = parse_real(line, key, value)?,
            "r2" => cs.r2 = parse_real(line, key, value)?,
            "h1" => cs.h1 = parse_real(line, key, value)?,
            "h2" => cs.h2 = parse_real(line, key, value)?,
            "xi" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(parse_err(line, key, "expected three values c0,c1,c2"));
                }
                sc.terminal = TerminalCondition::new(
                    parse_real(line, key, parts[0])?,
                    parse_real(line, key, parts[1])?,
                    parse_real(line, key, parts[2])?,
                );
            }
            _ => return Err(parse_err(line, key, "unknown key")),
        }
    }
    Ok(sc)
}

/// Scenario files shipped in `scenarios/`, by name.
pub const PRESETS: [(&str, &str); 9] = [
    ("zero", include_str!("../../../scenarios/zero.scn")),
    ("tanh", include_str!("../../../scenarios/tanh.scn")),
    ("coth", include_str!("../../../scenarios/coth.scn")),
    ("deterministic", include_str!("../../../scenarios/deterministic.scn")),
    ("symmetric-w2", include_str!("../../../scenarios/symmetric-w2.scn")),
    ("full-vs-w2", include_str!("../../../scenarios/full-vs-w2.scn")),
    ("w1-vs-w2", include_str!("../../../scenarios/w1-vs-w2.scn")),
    ("ansatz", include_str!("../../../scenarios/ansatz.scn")),
    ("timevarying", include_str!("../../../scenarios/timevarying.scn")),
];

/// Parses a shipped scenario.
pub fn preset(name: &str) -> Result<Scenario> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::InvalidInput(format!("no preset named `{name}`")))?;
    parse_scenario(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        let text = "# header\nT = 2\nsteps = 64\npattern = full-vs-w2\na = 0.5 # trailing\n\
                    c = table:0:0,2:1\nxi = 1, 0.5, -0.25\nr1 = 1\n";
        let sc = parse_scenario(text).unwrap();
        assert_eq!(sc.horizon, 2.0);
        assert_eq!(sc.steps, Some(64));
        assert_eq!(sc.pattern, InformationPattern::FullVsW2);
        assert_eq!(sc.coefficients.a, Coefficient::Constant(0.5));
        assert_eq!(sc.coefficients.c.eval(1.0), 0.5);
        assert_eq!(sc.terminal, TerminalCondition::new(1.0, 0.5, -0.25));
        let m = sc.build(None).unwrap();
        assert_eq!(m.grid().steps(), 64);
        assert_eq!(sc.build(Some(10)).unwrap().grid().steps(), 10);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_scenario("a = 1\nb3=1\n").unwrap_err();
        match err {
            Error::Parse { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "b3");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_mentions(parse_scenario("b3=1").unwrap_err(), "b3"));
    }

    fn err_mentions(e: Error, s: &str) -> bool {
        e.to_string().contains(s)
    }

    #[test]
    fn presets_validate() {
        for (name, _) in PRESETS {
            let sc = preset(name).unwrap();
            sc.build(Some(64)).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn malformed_values() {
        assert!(parse_scenario("a = x").is_err());
        assert!(parse_scenario("a = table:0:1,0:2").is_err());
        assert!(parse_scenario("xi = 1,2").is_err());
        assert!(parse_scenario("a = 1\na = 2").is_err());
        assert!(parse_scenario("pattern = iv").is_err());
        assert!(parse_scenario("just words").is_err());
    }
}
