//! Riccati and linear gain equations of the three information patterns.
//!
//! Every system is an initial-value problem at `t = 0`, solved forward by
//! RK4. The aggregate gain `alpha` is solved first; the player components
//! are driven by its recorded stages, so `alpha1 + alpha2 = alpha` holds to
//! rounding for any step size.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::{InformationPattern, ValidatedModel};
use crate::ode::{integrate_forward, Trajectory};
use crate::output::{opt_real, real};

/// Aggregate gain: `alpha' = s1 alpha^2 + (2a + f2^2) alpha - (l1 + l2)`,
/// `alpha(0) = -(r1 + r2)`.
pub fn solve_standard_alpha(model: &ValidatedModel) -> Result<Trajectory> {
    let cs = model.coefficients();
    let [alpha] = integrate_forward(model.grid(), ["alpha"], [-(cs.r1 + cs.r2)], |st, y| {
        let s = model.stage(st);
        let al = y[0];
        [s.s1() * al * al + (2.0 * s.a + s.f2 * s.f2) * al - (s.l1 + s.l2)]
    })?;
    Ok(alpha)
}

/// Player gains, each linear once `alpha` is known:
/// `alpha_i' = [(2a + f2^2) + s_i alpha] alpha_i - l_i`, `alpha_i(0) = -r_i`.
pub fn solve_alpha_components(
    model: &ValidatedModel,
    alpha: &Trajectory,
) -> Result<(Trajectory, Trajectory)> {
    let cs = model.coefficients();
    let [a1, a2] = integrate_forward(
        model.grid(),
        ["alpha1", "alpha2"],
        [-cs.r1, -cs.r2],
        |st, y| {
            let s = model.stage(st);
            let al = alpha.stage(st);
            let base = 2.0 * s.a + s.f2 * s.f2;
            [
                (base + s.s1() * al) * y[0] - s.l1,
                (base + s.s2() * al) * y[1] - s.l2,
            ]
        },
    )?;
    Ok((a1, a2))
}

/// Aggregate offset: `beta' = (a + s1 alpha + f2^2) beta + B alpha + l1 k1 +
/// l2 k2`, `beta(0) = r1 h1 + r2 h2`, with `B = b1 n1 + b2 n2 + c`.
pub fn solve_beta_aggregate(model: &ValidatedModel, alpha: &Trajectory) -> Result<Trajectory> {
    let cs = model.coefficients();
    let [beta] = integrate_forward(
        model.grid(),
        ["beta"],
        [cs.r1 * cs.h1 + cs.r2 * cs.h2],
        |st, y| {
            let s = model.stage(st);
            let al = alpha.stage(st);
            [(s.a + s.s1() * al + s.f2 * s.f2) * y[0]
                + s.forcing() * al
                + s.l1 * s.k1
                + s.l2 * s.k2]
        },
    )?;
    Ok(beta)
}

/// Player offsets: `beta1' = (a + f2^2) beta1 + s2 alpha1 beta + B alpha1 +
/// l1 k1` and symmetrically for player 2.
pub fn solve_beta_components(
    model: &ValidatedModel,
    alpha1: &Trajectory,
    alpha2: &Trajectory,
    beta: &Trajectory,
) -> Result<(Trajectory, Trajectory)> {
    let cs = model.coefficients();
    let [b1, b2] = integrate_forward(
        model.grid(),
        ["beta1", "beta2"],
        [cs.r1 * cs.h1, cs.r2 * cs.h2],
        |st, y| {
            let s = model.stage(st);
            let (a1, a2, be) = (alpha1.stage(st), alpha2.stage(st), beta.stage(st));
            let base = s.a + s.f2 * s.f2;
            let forcing = s.forcing();
            [
                base * y[0] + s.s2() * a1 * be + forcing * a1 + s.l1 * s.k1,
                base * y[1] + s.s1() * a2 * be + forcing * a2 + s.l2 * s.k2,
            ]
        },
    )?;
    Ok((b1, b2))
}

/// Gains of player 1's adjoint in terms of the state, the filtered state
/// and a constant, for the pattern where player 1 sees everything.
pub fn solve_gamma(
    model: &ValidatedModel,
    alpha: &Trajectory,
    alpha2: &Trajectory,
    beta: &Trajectory,
    beta2: &Trajectory,
) -> Result<[Trajectory; 3]> {
    if model.pattern() == InformationPattern::SymmetricW2 {
        return Err(Error::PatternMismatch {
            expected: InformationPattern::FullVsW2,
            found: model.pattern(),
        });
    }
    let cs = model.coefficients();
    integrate_forward(
        model.grid(),
        ["gamma1", "gamma2", "gamma3"],
        [-cs.r1, 0.0, cs.r1 * cs.h1],
        |st, y| {
            let s = model.stage(st);
            let (s1, s2) = (s.s1(), s.s2());
            let (al, a2, be, b2) = (
                alpha.stage(st),
                alpha2.stage(st),
                beta.stage(st),
                beta2.stage(st),
            );
            let f2sq = s.f2 * s.f2;
            let forcing = s.forcing();
            let [g1, g2, g3] = *y;
            [
                s1 * g1 * g1 + (2.0 * s.a + f2sq) * g1 - s.l1,
                (2.0 * s.a + s1 * al + f2sq + s1 * g1) * g2 + s2 * a2 * g1,
                (s.a + f2sq + s1 * g1) * g3
                    + (forcing + s2 * b2) * g1
                    + (forcing + s1 * be) * g2
                    + s.l1 * s.k1,
            ]
        },
    )
}

/// Gains of player 2's filtered adjoint in terms of its filtered state, the
/// mean state and a constant, for the pattern where player 1 sees `w1` and
/// player 2 sees `w2`.
pub fn solve_tau(
    model: &ValidatedModel,
    alpha: &Trajectory,
    alpha1: &Trajectory,
    beta: &Trajectory,
    beta1: &Trajectory,
) -> Result<[Trajectory; 3]> {
    if model.pattern() != InformationPattern::W1VsW2 {
        return Err(Error::PatternMismatch {
            expected: InformationPattern::W1VsW2,
            found: model.pattern(),
        });
    }
    let cs = model.coefficients();
    integrate_forward(
        model.grid(),
        ["tau1", "tau2", "tau3"],
        [-cs.r2, 0.0, cs.r2 * cs.h2],
        |st, y| {
            let s = model.stage(st);
            let (s1, s2) = (s.s1(), s.s2());
            let (al, a1, be, b1) = (
                alpha.stage(st),
                alpha1.stage(st),
                beta.stage(st),
                beta1.stage(st),
            );
            let forcing = s.forcing();
            let [t1, t2, t3] = *y;
            [
                s2 * t1 * t1 + 2.0 * s.a * t1 - s.l2,
                (2.0 * s.a + s1 * al + s2 * t1) * t2 + s1 * a1 * t1,
                (s.a + s2 * t1) * t3
                    + (forcing + s1 * b1) * t1
                    + (forcing + s1 * be) * t2
                    + s.l2 * s.k2,
            ]
        },
    )
}

/// All gain trajectories needed by the model's pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub alpha: Trajectory,
    pub alpha1: Trajectory,
    pub alpha2: Trajectory,
    pub beta: Trajectory,
    pub beta1: Trajectory,
    pub beta2: Trajectory,
    /// Present for the full-information and split patterns.
    pub gamma: Option<[Trajectory; 3]>,
    /// Present for the split pattern.
    pub tau: Option<[Trajectory; 3]>,
}

impl RiccatiSolution {
    pub fn solve(model: &ValidatedModel) -> Result<Self> {
        let alpha = solve_standard_alpha(model)?;
        let (alpha1, alpha2) = solve_alpha_components(model, &alpha)?;
        let beta = solve_beta_aggregate(model, &alpha)?;
        let (beta1, beta2) = solve_beta_components(model, &alpha1, &alpha2, &beta)?;
        let gamma = match model.pattern() {
            InformationPattern::SymmetricW2 => None,
            _ => Some(solve_gamma(model, &alpha, &alpha2, &beta, &beta2)?),
        };
        let tau = match model.pattern() {
            InformationPattern::W1VsW2 => Some(solve_tau(model, &alpha, &alpha1, &beta, &beta1)?),
            _ => None,
        };
        Ok(Self {
            alpha,
            alpha1,
            alpha2,
            beta,
            beta1,
            beta2,
            gamma,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn gamma(&self) -> Result<&[Trajectory; 3]> {
        self.gamma.as_ref().ok_or(Error::PatternMismatch {
            expected: InformationPattern::FullVsW2,
            found: InformationPattern::SymmetricW2,
        })
    }

    pub(crate) fn tau(&self) -> Result<&[Trajectory; 3]> {
        self.tau.as_ref().ok_or(Error::PatternMismatch {
            expected: InformationPattern::W1VsW2,
            found: InformationPattern::FullVsW2,
        })
    }

    /// `(max |alpha1 + alpha2 - alpha|, max |beta1 + beta2 - beta|)`.
    pub fn decomposition_error(&self) -> (f64, f64) {
        let gap = |x: &Trajectory, y: &Trajectory, z: &Trajectory| {
            x.values()
                .iter()
                .zip(y.values())
                .zip(z.values())
                .map(|((a, b), c)| (a + b - c).abs())
                .fold(0.0, f64::max)
        };
        (
            gap(&self.alpha1, &self.alpha2, &self.alpha),
            gap(&self.beta1, &self.beta2, &self.beta),
        )
    }

    /// `max_t |beta1/alpha1 - beta2/alpha2|` over nodes where both gains are
    /// nonzero. The two ratios give two readings of the filtered `z`.
    pub fn ratio_gap(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.alpha1.value(k) != 0.0 && self.alpha2.value(k) != 0.0)
            .map(|k| {
                (self.beta1.value(k) / self.alpha1.value(k)
                    - self.beta2.value(k) / self.alpha2.value(k))
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Writes the `riccati.csv` body: header plus one row per grid node.
    pub fn write_csv(&self, model: &ValidatedModel, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "t,alpha1,beta1,alpha2,beta2,alpha,beta,gamma1,gamma2,gamma3,tau1,tau2,tau3"
        )?;
        let grid = model.grid();
        for k in 0..self.len() {
            let opt = |g: &Option<[Trajectory; 3]>, i: usize| {
                opt_real(g.as_ref().map(|g| g[i].value(k)))
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                real(grid.t(k)),
                real(self.alpha1.value(k)),
                real(self.beta1.value(k)),
                real(self.alpha2.value(k)),
                real(self.beta2.value(k)),
                real(self.alpha.value(k)),
                real(self.beta.value(k)),
                opt(&self.gamma, 0),
                opt(&self.gamma, 1),
                opt(&self.gamma, 2),
                opt(&self.tau, 0),
                opt(&self.tau, 1),
                opt(&self.tau, 2),
            )?;
        }
        Ok(())
    }
}

/// Largest residuals of the coupled player equations when the component
/// derivatives are substituted, over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoupledResiduals {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl CoupledResiduals {
    pub fn max(&self) -> f64 {
        self.alpha1.max(self.beta1).max(self.alpha2).max(self.beta2)
    }
}

/// Evaluates the coupled two-player system
///
/// ```text
/// alpha1' = s1 alpha1^2 + (2a + f2^2) alpha1 + s2 alpha1 alpha2 - l1
/// beta1'  = (a + s1 alpha1 + f2^2) beta1 + s2 alpha1 beta2 + B alpha1 + l1 k1
/// ```
///
/// (and the mirror pair for player 2) with the derivatives taken from the
/// component equations at each interior node.
pub fn coupled_residuals(model: &ValidatedModel, sol: &RiccatiSolution) -> CoupledResiduals {
    let mut out = CoupledResiduals::default();
    for k in 1..sol.len().saturating_sub(1) {
        let s = model.node(k);
        let (s1, s2) = (s.s1(), s.s2());
        let f2sq = s.f2 * s.f2;
        let forcing = s.forcing();
        let al = sol.alpha.value(k);
        let be = sol.beta.value(k);
        let (a1, a2) = (sol.alpha1.value(k), sol.alpha2.value(k));
        let (b1, b2) = (sol.beta1.value(k), sol.beta2.value(k));

        let da1 = (2.0 * s.a + f2sq + s1 * al) * a1 - s.l1;
        let da2 = (2.0 * s.a + f2sq + s2 * al) * a2 - s.l2;
        let db1 = (s.a + f2sq) * b1 + s2 * a1 * be + forcing * a1 + s.l1 * s.k1;
        let db2 = (s.a + f2sq) * b2 + s1 * a2 * be + forcing * a2 + s.l2 * s.k2;

        let r10 = da1 - s1 * a1 * a1 - (2.0 * s.a + f2sq) * a1 - s2 * a1 * a2 + s.l1;
        let r15 = da2 - s2 * a2 * a2 - (2.0 * s.a + f2sq) * a2 - s1 * a1 * a2 + s.l2;
        let r11 = db1 - (s.a + s1 * a1 + f2sq) * b1 - s2 * a1 * b2 - forcing * a1 - s.l1 * s.k1;
        let r16 = db2 - (s.a + s2 * a2 + f2sq) * b2 - s1 * a2 * b1 - forcing * a2 - s.l2 * s.k2;

        out.alpha1 = out.alpha1.max(r10.abs());
        out.beta1 = out.beta1.max(r11.abs());
        out.alpha2 = out.alpha2.max(r15.abs());
        out.beta2 = out.beta2.max(r16.abs());
    }
    out
}

/// Exact aggregate gain on the grid when every coefficient is constant.
///
/// With `S = s1`, `K = 2a + f2^2`, `L = l1 + l2` the equation is
/// `alpha' = S (alpha - p)(alpha - q)` with roots `q < 0 < p`, solved by
/// `(alpha - q)/(alpha - p) = e^{-D t} (alpha0 - q)/(alpha0 - p)`,
/// `D = sqrt(K^2 + 4 S L)`.
pub fn closed_form_alpha(model: &ValidatedModel) -> Option<Vec<f64>> {
    if !model.coefficients().all_constant() {
        return None;
    }
    let s = model.node(0);
    let (sg, kk, ll) = (s.s1(), 2.0 * s.a + s.f2 * s.f2, s.l1 + s.l2);
    let a0 = -(model.coefficients().r1 + model.coefficients().r2);
    let grid = model.grid();
    let f = |t: f64| -> f64 {
        if sg == 0.0 {
            if kk == 0.0 {
                return a0 - ll * t;
            }
            let eq = ll / kk;
            return eq + (a0 - eq) * (kk * t).exp();
        }
        let d = (kk * kk + 4.0 * sg * ll).sqrt();
        let p = (-kk + d) / (2.0 * sg);
        let q = (-kk - d) / (2.0 * sg);
        let v = (-d * t).exp() * (a0 - q) / (a0 - p);
        (q - p * v) / (1.0 - v)
    };
    Some((0..grid.len()).map(|k| f(grid.t(k))).collect())
}
