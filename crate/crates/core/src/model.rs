//! Game data: time grid, coefficient functions, terminal condition and the
//! information pattern, plus validation of the standing assumptions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Relative tolerance used when checking the equal-gain and vanishing-noise
/// assumptions on tabulated data.
pub const ASSUMPTION_TOL: f64 = 1e-12;

/// Uniform grid `t_k = k T / N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * (k as f64) / (self.steps as f64)
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t(k)).collect()
    }

    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.len(),
                found,
            })
        }
    }
}

/// A scalar function of time: a constant or a piecewise-linear table.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl Coefficient {
    /// Builds a table after checking that the knots are finite and strictly
    /// increasing in time.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty coefficient table".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidInput(format!(
                    "table knots must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite table entry".into()));
        }
        Ok(Coefficient::Table(points))
    }

    /// Value at `t`. Tables are clamped outside their knot range; validation
    /// guarantees the knots cover the horizon.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Table(pts) => {
                let n = pts.len();
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                if t >= pts[n - 1].0 {
                    return pts[n - 1].1;
                }
                let j = pts.partition_point(|(tk, _)| *tk <= t);
                let (t0, v0) = pts[j - 1];
                let (t1, v1) = pts[j];
                if t == t0 {
                    return v0;
                }
                let w = (t - t0) / (t1 - t0);
                v0 + w * (v1 - v0)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Table(pts) => pts.iter().all(|p| p.1 == pts[0].1),
        }
    }

    fn covers(&self, horizon: f64) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Table(pts) => pts[0].0 <= 0.0 && pts[pts.len() - 1].0 >= horizon,
        }
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Constant(v)
    }
}

/// All model data of the state equation and the two cost functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub a: Coefficient,
    pub b1: Coefficient,
    pub b2: Coefficient,
    pub f1: Coefficient,
    pub f2: Coefficient,
    pub c: Coefficient,
    pub k1: Coefficient,
    pub k2: Coefficient,
    pub n1: Coefficient,
    pub n2: Coefficient,
    pub l1: Coefficient,
    pub l2: Coefficient,
    pub m1: Coefficient,
    pub m2: Coefficient,
    pub r1: f64,
    pub r2: f64,
    pub h1: f64,
    pub h2: f64,
}

impl Default for CoefficientSet {
    /// Zero dynamics and targets with unit running weights.
    fn default() -> Self {
        let zero = Coefficient::Constant(0.0);
        let one = Coefficient::Constant(1.0);
        Self {
            a: zero.clone(),
            b1: zero.clone(),
            b2: zero.clone(),
            f1: zero.clone(),
            f2: zero.clone(),
            c: zero.clone(),
            k1: zero.clone(),
            k2: zero.clone(),
            n1: zero.clone(),
            n2: zero,
            l1: one.clone(),
            l2: one.clone(),
            m1: one.clone(),
            m2: one,
            r1: 0.0,
            r2: 0.0,
            h1: 0.0,
            h2: 0.0,
        }
    }
}

impl CoefficientSet {
    pub fn sample(&self, t: f64) -> CoefficientSample {
        CoefficientSample {
            a: self.a.eval(t),
            b1: self.b1.eval(t),
            b2: self.b2.eval(t),
            f1: self.f1.eval(t),
            f2: self.f2.eval(t),
            c: self.c.eval(t),
            k1: self.k1.eval(t),
            k2: self.k2.eval(t),
            n1: self.n1.eval(t),
            n2: self.n2.eval(t),
            l1: self.l1.eval(t),
            l2: self.l2.eval(t),
            m1: self.m1.eval(t),
            m2: self.m2.eval(t),
        }
    }

    pub(crate) fn functions(&self) -> [(&'static str, &Coefficient); 14] {
        [
            ("a", &self.a),
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("f1", &self.f1),
            ("f2", &self.f2),
            ("c", &self.c),
            ("k1", &self.k1),
            ("k2", &self.k2),
            ("n1", &self.n1),
            ("n2", &self.n2),
            ("l1", &self.l1),
            ("l2", &self.l2),
            ("m1", &self.m1),
            ("m2", &self.m2),
        ]
    }

    pub fn all_constant(&self) -> bool {
        self.functions().iter().all(|(_, c)| c.is_constant())
    }
}

/// The fourteen coefficient values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub f1: f64,
    pub f2: f64,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub n1: f64,
    pub n2: f64,
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl CoefficientSample {
    /// Control gain `b1^2 / m1` of player 1.
    pub fn s1(&self) -> f64 {
        self.b1 * self.b1 / self.m1
    }

    /// Control gain `b2^2 / m2` of player 2.
    pub fn s2(&self) -> f64 {
        self.b2 * self.b2 / self.m2
    }

    /// Constant forcing seen by the state once both controls are centred:
    /// `b1 n1 + b2 n2 + c`.
    pub fn forcing(&self) -> f64 {
        self.b1 * self.n1 + self.b2 * self.n2 + self.c
    }

    fn values(&self) -> [(&'static str, f64); 14] {
        [
            ("a", self.a),
            ("b1", self.b1),
            ("b2", self.b2),
            ("f1", self.f1),
            ("f2", self.f2),
            ("c", self.c),
            ("k1", self.k1),
            ("k2", self.k2),
            ("n1", self.n1),
            ("n2", self.n2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("m1", self.m1),
            ("m2", self.m2),
        ]
    }
}

/// `xi = c0 + c1 w1(T) + c2 w2(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TerminalCondition {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

/// What the conditional expectation of the terminal value is taken against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning {
    /// Observed value of `w1` at the conditioning time.
    GivenW1(f64),
    /// Observed value of `w2` at the conditioning time.
    GivenW2(f64),
    Mean,
}

impl TerminalCondition {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub fn eval(&self, w1: f64, w2: f64) -> f64 {
        self.c0 + self.c1 * w1 + self.c2 * w2
    }

    pub fn conditional(&self, on: Conditioning) -> f64 {
        conditional_terminal(self, on)
    }
}

/// Conditional expectation of the terminal value. Exact for the affine
/// family because `w1`, `w2` are independent martingales.
pub fn conditional_terminal(terminal: &TerminalCondition, on: Conditioning) -> f64 {
    match on {
        Conditioning::GivenW1(w1) => terminal.c0 + terminal.c1 * w1,
        Conditioning::GivenW2(w2) => terminal.c0 + terminal.c2 * w2,
        Conditioning::Mean => terminal.c0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    /// 1 or 2.
    pub fn index(&self) -> usize {
        match self {
            Player::One => 1,
            Player::Two => 2,
        }
    }
}

/// Who observes what.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InformationPattern {
    /// Both players observe `w2` only.
    SymmetricW2,
    /// Player 1 observes everything, player 2 observes `w2`.
    FullVsW2,
    /// Player 1 observes `w1`, player 2 observes `w2`.
    W1VsW2,
}

impl InformationPattern {
    pub const ALL: [InformationPattern; 3] = [
        InformationPattern::SymmetricW2,
        InformationPattern::FullVsW2,
        InformationPattern::W1VsW2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InformationPattern::SymmetricW2 => "symmetric-w2",
            InformationPattern::FullVsW2 => "full-vs-w2",
            InformationPattern::W1VsW2 => "w1-vs-w2",
        }
    }

    /// Whether the pattern needs `f2 = 0`.
    pub fn requires_noiseless_w2(&self) -> bool {
        matches!(self, InformationPattern::W1VsW2)
    }
}

impl fmt::Display for InformationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InformationPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric-w2" | "symmetricw2" | "symmetric" | "i" => Ok(Self::SymmetricW2),
            "full-vs-w2" | "fullvsw2" | "full" | "ii" => Ok(Self::FullVsW2),
            "w1-vs-w2" | "w1vsw2" | "split" | "iii" => Ok(Self::W1VsW2),
            other => Err(format!(
                "unknown pattern `{other}` (expected symmetric-w2, full-vs-w2 or w1-vs-w2)"
            )),
        }
    }
}

/// Coefficients, terminal condition, pattern and grid that passed
/// [`validate`]. Immutable; coefficient samples at the grid nodes are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    coefficients: CoefficientSet,
    terminal: TerminalCondition,
    pattern: InformationPattern,
    grid: TimeGrid,
    nodes: Vec<CoefficientSample>,
    mids: Vec<CoefficientSample>,
}

impl ValidatedModel {
    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coefficients
    }

    pub fn terminal(&self) -> &TerminalCondition {
        &self.terminal
    }

    pub fn pattern(&self) -> InformationPattern {
        self.pattern
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Coefficients at grid node `k`.
    pub fn node(&self, k: usize) -> &CoefficientSample {
        &self.nodes[k]
    }

    pub fn nodes(&self) -> &[CoefficientSample] {
        &self.nodes
    }

    /// Coefficients at the midpoint of `[t_k, t_{k+1}]`.
    pub fn mid(&self, k: usize) -> &CoefficientSample {
        &self.mids[k]
    }

    /// Coefficients at an arbitrary time; no range check.
    pub(crate) fn at(&self, t: f64) -> CoefficientSample {
        self.coefficients.sample(t)
    }

    /// Revalidates the same data under another pattern.
    pub fn with_pattern(&self, pattern: InformationPattern) -> Result<ValidatedModel> {
        validate(self.coefficients.clone(), self.terminal, pattern, self.grid)
    }

    /// Revalidates the same data on another grid.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<ValidatedModel> {
        validate(self.coefficients.clone(), self.terminal, self.pattern, grid)
    }

    /// Whether `f2` vanishes at every node.
    pub fn f2_vanishes(&self) -> bool {
        self.nodes.iter().all(|s| s.f2 == 0.0)
    }
}

/// Checks positivity of the weights, finiteness, and the equal-gain /
/// vanishing-noise assumptions demanded by `pattern`.
pub fn validate(
    coefficients: CoefficientSet,
    terminal: TerminalCondition,
    pattern: InformationPattern,
    grid: TimeGrid,
) -> Result<ValidatedModel> {
    for (name, v) in [
        ("r1", coefficients.r1),
        ("r2", coefficients.r2),
        ("h1", coefficients.h1),
        ("h2", coefficients.h2),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} is not finite")));
        }
    }
    for (name, v) in [("r1", coefficients.r1), ("r2", coefficients.r2)] {
        if v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "terminal weight {name} must be nonnegative, got {v}"
            )));
        }
    }
    if ![terminal.c0, terminal.c1, terminal.c2]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::InvalidInput("terminal condition is not finite".into()));
    }
    for (name, f) in coefficients.functions() {
        if !f.covers(grid.horizon()) {
            return Err(Error::InvalidInput(format!(
                "table for {name} does not cover [0, {}]",
                grid.horizon()
            )));
        }
    }

    let mut nodes = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let t = grid.t(k);
        let s = coefficients.sample(t);
        for (name, v) in s.values() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} is not finite at t = {t}"
                )));
            }
        }
        for (name, v) in [("l1", s.l1), ("l2", s.l2), ("m1", s.m1), ("m2", s.m2)] {
            if v <= 0.0 {
                return Err(Error::NonpositiveWeight { name, value: v, t });
            }
        }
        let (s1, s2) = (s.s1(), s.s2());
        if (s1 - s2).abs() > ASSUMPTION_TOL * s1.max(s2) {
            return Err(Error::AssumptionViolation {
                assumption: "A1",
                index: k,
                t,
                detail: format!("b1^2/m1 = {s1} differs from b2^2/m2 = {s2}"),
            });
        }
        if s.f1.abs() > ASSUMPTION_TOL {
            return Err(Error::AssumptionViolation {
                assumption: "A1",
                index: k,
                t,
                detail: format!("f1 = {} is not zero", s.f1),
            });
        }
        if pattern.requires_noiseless_w2() && s.f2.abs() > ASSUMPTION_TOL {
            return Err(Error::AssumptionViolation {
                assumption: "A2",
                index: k,
                t,
                detail: format!("f2 = {} is not zero", s.f2),
            });
        }
        nodes.push(s);
    }

    let noisy = nodes.iter().any(|s| s.f2 != 0.0);
    if noisy && !pattern.requires_noiseless_w2() {
        if coefficients.r1 == 0.0 {
            let ratio = match pattern {
                InformationPattern::FullVsW2 => "gamma3/gamma1",
                _ => "beta1/alpha1",
            };
            return Err(Error::SingularRatio { name: "r1", ratio });
        }
        if coefficients.r2 == 0.0 {
            return Err(Error::SingularRatio {
                name: "r2",
                ratio: "beta2/alpha2",
            });
        }
    }

    let mids = (0..grid.steps())
        .map(|k| coefficients.sample(grid.t(k) + 0.5 * grid.dt()))
        .collect();
    Ok(ValidatedModel {
        coefficients,
        terminal,
        pattern,
        grid,
        nodes,
        mids,
    })
}

/// All fourteen coefficient values at `t`, which must lie in `[0, T]`.
pub fn sample_coefficients(model: &ValidatedModel, t: f64) -> Result<CoefficientSample> {
    let horizon = model.grid.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfRange { t, horizon });
    }
    Ok(model.at(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 10).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = TimeGrid::new(0.3, 7).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(7), 0.3);
        assert!((g.dt() * 7.0 - 0.3).abs() <= f64::EPSILON);
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 4).is_err());
    }

    #[test]
    fn zero_model_is_valid() {
        let m = validate(
            CoefficientSet::default(),
            TerminalCondition::default(),
            InformationPattern::SymmetricW2,
            grid(),
        );
        assert!(m.is_ok());
    }

    #[test]
    fn equal_gains_after_rescaling() {
        let cs = CoefficientSet {
            b1: 1.0.into(),
            m1: 1.0.into(),
            b2: 2.0.into(),
            m2: 4.0.into(),
            ..Default::default()
        };
        let m = validate(cs, TerminalCondition::default(), InformationPattern::W1VsW2, grid());
        assert!(m.is_ok());
    }

    #[test]
    fn unequal_gains_rejected() {
        let cs = CoefficientSet {
            b1: 1.0.into(),
            m1: 1.0.into(),
            b2: 1.0.into(),
            m2: 2.0.into(),
            ..Default::default()
        };
        let err = validate(cs, TerminalCondition::default(), InformationPattern::SymmetricW2, grid())
            .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation { assumption: "A1", index: 0, .. }));
    }

    #[test]
    fn f1_and_f2_checks() {
        let cs = CoefficientSet {
            f1: 0.1.into(),
            ..Default::default()
        };
        assert!(matches!(
            validate(cs, TerminalCondition::default(), InformationPattern::SymmetricW2, grid()),
            Err(Error::AssumptionViolation { assumption: "A1", .. })
        ));
        let cs = CoefficientSet {
            f2: 0.1.into(),
            r1: 1.0,
            r2: 1.0,
            ..Default::default()
        };
        assert!(validate(cs.clone(), TerminalCondition::default(), InformationPattern::SymmetricW2, grid()).is_ok());
        assert!(matches!(
            validate(cs, TerminalCondition::default(), InformationPattern::W1VsW2, grid()),
            Err(Error::AssumptionViolation { assumption: "A2", .. })
        ));
    }

    #[test]
    fn ratio_needs_positive_terminal_weights() {
        let cs = CoefficientSet {
            f2: 0.2.into(),
            r1: 0.0,
            r2: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            validate(cs, TerminalCondition::default(), InformationPattern::FullVsW2, grid()),
            Err(Error::SingularRatio { name: "r1", .. })
        ));
    }

    #[test]
    fn nonpositive_weight() {
        let cs = CoefficientSet {
            m2: Coefficient::table(vec![(0.0, 1.0), (1.0, -1.0)]).unwrap(),
            ..Default::default()
        };
        let err = validate(cs, TerminalCondition::default(), InformationPattern::SymmetricW2, grid())
            .unwrap_err();
        assert!(matches!(err, Error::NonpositiveWeight { name: "m2", .. }));
    }

    #[test]
    fn table_must_cover_horizon() {
        let cs = CoefficientSet {
            a: Coefficient::table(vec![(0.0, 1.0), (0.5, 2.0)]).unwrap(),
            ..Default::default()
        };
        assert!(validate(cs, TerminalCondition::default(), InformationPattern::SymmetricW2, grid()).is_err());
    }

    #[test]
    fn sampling() {
        let cs = CoefficientSet {
            a: 0.5.into(),
            c: Coefficient::table(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap(),
            ..Default::default()
        };
        let m = validate(cs, TerminalCondition::default(), InformationPattern::SymmetricW2, grid())
            .unwrap();
        let s = sample_coefficients(&m, 0.5).unwrap();
        assert_eq!(s.a, 0.5);
        assert_eq!(s.c, 0.5);
        assert_eq!(m.node(3).c, m.grid().t(3));
        assert!(matches!(
            sample_coefficients(&m, -0.1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn conditional_values() {
        let xi = TerminalCondition::new(1.0, 2.0, 3.0);
        assert!((xi.conditional(Conditioning::GivenW2(0.4)) - 2.2).abs() < 1e-15);
        assert_eq!(xi.conditional(Conditioning::Mean), 1.0);
        assert_eq!(xi.conditional(Conditioning::GivenW1(-1.0)), -1.0);
    }

    #[test]
    fn validation_is_idempotent() {
        let cs = CoefficientSet {
            a: 0.3.into(),
            b1: 1.0.into(),
            b2: 1.0.into(),
            ..Default::default()
        };
        let m = validate(cs, TerminalCondition::new(1.0, 0.0, 0.5), InformationPattern::FullVsW2, grid())
            .unwrap();
        let again = m.with_pattern(m.pattern()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in InformationPattern::ALL {
            assert_eq!(p.name().parse::<InformationPattern>().unwrap(), p);
        }
    }
}
