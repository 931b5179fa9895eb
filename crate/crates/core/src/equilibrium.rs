//! Feedback Nash equilibrium, reconstructed path by path.
//!
//! Pattern by pattern the equilibrium controls are
//!
//! ```text
//! symmetric-w2:  u1 = (b1/m1)(alpha1 yt + beta1) + n1,  u2 = (b2/m2)(alpha2 yt + beta2) + n2
//! full-vs-w2:    u1 = (b1/m1)(g1 y + g2 yt + g3) + n1,  u2 as above
//! w1-vs-w2:      u1 = (b1/m1)(g1 yh + g2 Ey + g3) + n1, u2 = (b2/m2)(t1 yt + t2 Ey + t3) + n2
//! ```
//!
//! where `yt = E[y | w2]`, `yh = E[y | w1]`. In the first two patterns `yt`
//! and `y` come from the backward pathwise integrator with `z2 = f2 v + o`;
//! in the third every state is affine in the Brownian values.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Conditioning, InformationPattern, Player, ValidatedModel};
use crate::ode::{integrate_backward, Point};
use crate::output::{opt_real, real};
use crate::riccati::RiccatiSolution;
use crate::stochastic::{
    backward_bsde_affine, forward_sde, propagate_affine, AffineLaw, BrownianPath,
    BrownianPathBatch, SplitStates,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Filtered state under symmetric observation of `w2`; stochastic.
    Gamma,
    /// Mean state under split observation.
    GammaBar,
    /// `w1`-filtered state under split observation.
    Xi,
    /// `w2`-filtered state under split observation.
    Psi,
    /// State of the full-information pattern; stochastic.
    Upsilon,
}

/// `K(t, s) = exp{ int_t^s g dr } * exp{ int_t^s f2 dw2 }`, the second factor
/// present only for the stochastic kinds. The deterministic part is stored
/// as `K(t_k, T)` on the nodes, so `K(t_i, t_j) = K(t_i, T) / K(t_j, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratingFactorKernel {
    pub kind: KernelKind,
    to_horizon: Vec<f64>,
    f2: Vec<f64>,
}

impl IntegratingFactorKernel {
    pub fn new(kind: KernelKind, model: &ValidatedModel, riccati: &RiccatiSolution) -> Result<Self> {
        let gamma = match kind {
            KernelKind::Xi | KernelKind::Upsilon => Some(riccati.gamma()?),
            _ => None,
        };
        let tau = match kind {
            KernelKind::Psi => Some(riccati.tau()?),
            _ => None,
        };
        let rate = |p: Point| -> f64 {
            let s = model.point(p);
            let half_f2sq = 0.5 * s.f2 * s.f2;
            match kind {
                KernelKind::Gamma => s.a + s.s1() * riccati.alpha.point(p) - half_f2sq,
                KernelKind::GammaBar => s.a + s.s1() * riccati.alpha.point(p),
                KernelKind::Xi => s.a + s.s1() * gamma.map_or(0.0, |g| g[0].point(p)),
                KernelKind::Psi => s.a + s.s2() * tau.map_or(0.0, |t| t[0].point(p)),
                KernelKind::Upsilon => {
                    s.a + s.s1() * gamma.map_or(0.0, |g| g[0].point(p)) - half_f2sq
                }
            }
        };
        let sol = integrate_backward(model.grid(), [1.0], |p, u| [-rate(p) * u[0]]);
        let stochastic = matches!(kind, KernelKind::Gamma | KernelKind::Upsilon);
        Ok(Self {
            kind,
            to_horizon: sol.into_iter().map(|u| u[0]).collect(),
            f2: if stochastic {
                model.nodes().iter().map(|s| s.f2).collect()
            } else {
                Vec::new()
            },
        })
    }

    /// Deterministic factor `K(t_i, t_j)`, `i <= j`.
    pub fn deterministic(&self, i: usize, j: usize) -> f64 {
        self.to_horizon[i] / self.to_horizon[j]
    }

    /// Full factor along a path, with the Ito sum `sum_{k=i}^{j-1} f2_k dw2_k`.
    pub fn pathwise(&self, i: usize, j: usize, dw2: &[f64]) -> f64 {
        let det = self.deterministic(i, j);
        if self.f2.is_empty() {
            return det;
        }
        let exponent: f64 = (i..j).map(|k| self.f2[k] * dw2[k]).sum();
        det * exponent.exp()
    }

    pub fn is_stochastic(&self) -> bool {
        !self.f2.is_empty()
    }
}

/// One path of the equilibrium. Quantities a pattern does not define are
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    pub y: Vec<f64>,
    pub ytilde: Vec<f64>,
    pub yhat: Option<Vec<f64>>,
    pub ymean: Option<Arc<Vec<f64>>>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x1tilde: Option<Vec<f64>>,
    pub x2tilde: Option<Vec<f64>>,
    pub x1hat: Option<Vec<f64>>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z2tilde: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Realizations of a batch of paths, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRealization {
    pub pattern: InformationPattern,
    pub paths: Vec<PathRealization>,
}

impl EquilibriumRealization {
    /// Writes the `realization.csv` header and rows.
    pub fn write_csv(&self, model: &ValidatedModel, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "path,t,y,ytilde,yhat,ymean,x1,x2,x1tilde,x2tilde,x1hat,z1,z2,u1,u2"
        )?;
        for (p, r) in self.paths.iter().enumerate() {
            write_realization_rows(w, model, p, r)?;
        }
        Ok(())
    }
}

/// Writes the rows of one path in `realization.csv` layout.
pub fn write_realization_rows(
    w: &mut dyn Write,
    model: &ValidatedModel,
    index: usize,
    r: &PathRealization,
) -> io::Result<()> {
    let grid = model.grid();
    let opt = |v: &Option<Vec<f64>>, k: usize| opt_real(v.as_ref().map(|v| v[k]));
    for k in 0..grid.len() {
        writeln!(
            w,
            "{index},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            real(grid.t(k)),
            real(r.y[k]),
            real(r.ytilde[k]),
            opt(&r.yhat, k),
            opt_real(r.ymean.as_ref().map(|v| v[k])),
            real(r.x1[k]),
            real(r.x2[k]),
            opt(&r.x1tilde, k),
            opt(&r.x2tilde, k),
            opt(&r.x1hat, k),
            real(r.z1[k]),
            real(r.z2[k]),
            real(r.u1[k]),
            real(r.u2[k]),
        )?;
    }
    Ok(())
}

/// Supremum distances between the adjoints and their affine representations
/// along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzResidual {
    /// symmetric-w2: `x1 - (alpha1 y + beta1)`; full-vs-w2: forward adjoint
    /// minus `g1 y + g2 yt + g3`; w1-vs-w2: the filtered adjoint integrated
    /// along `yh` minus `g1 yh + g2 Ey + g3`.
    pub player1: f64,
    /// symmetric-w2 only: `x2 - (alpha2 y + beta2)`.
    pub player2: Option<f64>,
}

/// Node arrays shared by every path.
#[derive(Debug, Clone)]
struct NodeData {
    gain1: Vec<f64>,
    gain2: Vec<f64>,
    f2: Vec<f64>,
    /// `f2 beta1 / alpha1`, the constant part of the filtered `z2`.
    ztilde_offset: Vec<f64>,
    ytilde_slope: Vec<f64>,
    ytilde_offset: Vec<f64>,
    /// Driver slope of `y`: `a + f2^2` or `a + s1 g1 + f2^2`.
    y_slope: Vec<f64>,
    /// full-vs-w2: `(f2 g3 - g2 o) / g1`.
    z_offset: Vec<f64>,
}

/// Precomputed gains for one model; reconstructs any number of paths.
#[derive(Debug, Clone)]
pub struct Equilibrium<'a> {
    model: &'a ValidatedModel,
    riccati: &'a RiccatiSolution,
    nodes: NodeData,
    split: Option<SplitStates>,
    mean: Option<Arc<Vec<f64>>>,
}

impl<'a> Equilibrium<'a> {
    pub fn new(model: &'a ValidatedModel, riccati: &'a RiccatiSolution) -> Result<Self> {
        let pattern = model.pattern();
        let n = model.grid().len();
        let r = riccati;
        let gamma = match pattern {
            InformationPattern::FullVsW2 => Some(r.gamma()?),
            _ => None,
        };
        let mut d = NodeData {
            gain1: Vec::with_capacity(n),
            gain2: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            ztilde_offset: Vec::with_capacity(n),
            ytilde_slope: Vec::with_capacity(n),
            ytilde_offset: Vec::with_capacity(n),
            y_slope: Vec::with_capacity(n),
            z_offset: Vec::with_capacity(n),
        };
        for k in 0..n {
            let s = model.node(k);
            d.gain1.push(s.b1 / s.m1);
            d.gain2.push(s.b2 / s.m2);
            d.f2.push(s.f2);
            let o = if s.f2 == 0.0 {
                0.0
            } else {
                s.f2 * r.beta1.value(k) / r.alpha1.value(k)
            };
            d.ztilde_offset.push(o);
            d.ytilde_slope
                .push(s.a + s.s1() * r.alpha.value(k) + s.f2 * s.f2);
            d.ytilde_offset
                .push(s.s1() * r.beta.value(k) + s.forcing() + s.f2 * o);
            match gamma {
                Some(g) => {
                    let (g1, g2, g3) = (g[0].value(k), g[1].value(k), g[2].value(k));
                    d.y_slope.push(s.a + s.s1() * g1 + s.f2 * s.f2);
                    d.z_offset.push(if s.f2 == 0.0 {
                        0.0
                    } else {
                        (s.f2 * g3 - g2 * o) / g1
                    });
                }
                None => {
                    d.y_slope.push(s.a + s.f2 * s.f2);
                    d.z_offset.push(o);
                }
            }
        }
        let (split, mean) = if pattern == InformationPattern::W1VsW2 {
            let st = propagate_affine(model, riccati)?;
            let mean = Arc::new(st.mean.clone());
            (Some(st), Some(mean))
        } else {
            (None, None)
        };
        Ok(Self {
            model,
            riccati,
            nodes: d,
            split,
            mean,
        })
    }

    pub fn model(&self) -> &ValidatedModel {
        self.model
    }

    pub fn riccati(&self) -> &RiccatiSolution {
        self.riccati
    }

    pub fn pattern(&self) -> InformationPattern {
        self.model.pattern()
    }

    /// Affine state representations (w1-vs-w2 only).
    pub fn split_states(&self) -> Option<&SplitStates> {
        self.split.as_ref()
    }

    /// Control gains `b_i / m_i` on the nodes; the feedback maps are
    /// `u_i = gain_i * filtered_i + n_i`.
    pub fn control_gains(&self) -> (&[f64], &[f64]) {
        (&self.nodes.gain1, &self.nodes.gain2)
    }

    /// Offset of the filtered `z2`: `z2tilde = f2 ytilde + offset`.
    pub fn filtered_z_offset(&self) -> &[f64] {
        &self.nodes.ztilde_offset
    }

    pub fn reconstruct(&self, path: &BrownianPath) -> Result<PathRealization> {
        match self.pattern() {
            InformationPattern::SymmetricW2 => self.symmetric(path),
            InformationPattern::FullVsW2 => self.full(path),
            InformationPattern::W1VsW2 => self.split(path),
        }
    }

    /// Reconstructs every path of `batch` in parallel.
    pub fn reconstruct_batch(&self, batch: &BrownianPathBatch) -> Result<EquilibriumRealization> {
        let paths = (0..batch.count)
            .into_par_iter()
            .map(|p| self.reconstruct(&batch.path(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EquilibriumRealization {
            pattern: self.pattern(),
            paths,
        })
    }

    fn controls(&self, filtered1: &[f64], filtered2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nodes = self.model.nodes();
        let u1 = (0..nodes.len())
            .map(|k| self.nodes.gain1[k] * filtered1[k] + nodes[k].n1)
            .collect();
        let u2 = (0..nodes.len())
            .map(|k| self.nodes.gain2[k] * filtered2[k] + nodes[k].n2)
            .collect();
        (u1, u2)
    }

    fn filtered(&self, path: &BrownianPath) -> Result<(Vec<f64>, Vec<f64>)> {
        let w2_end: f64 = path.w2()[path.steps()];
        let terminal = self.model.terminal().conditional(Conditioning::GivenW2(w2_end));
        backward_bsde_affine(
            self.model.grid(),
            &path.dw2,
            terminal,
            AffineLaw {
                slope: &self.nodes.ytilde_slope,
                offset: &self.nodes.ytilde_offset,
            },
            AffineLaw {
                slope: &self.nodes.f2,
                offset: &self.nodes.ztilde_offset,
            },
        )
    }

    fn terminal_value(&self, path: &BrownianPath) -> f64 {
        let n = path.steps();
        self.model.terminal().eval(path.w1()[n], path.w2()[n])
    }

    fn symmetric(&self, path: &BrownianPath) -> Result<PathRealization> {
        let r = self.riccati;
        let (ytilde, z2tilde) = self.filtered(path)?;
        let n = ytilde.len();
        let x1t: Vec<f64> = (0..n)
            .map(|k| r.alpha1.value(k) * ytilde[k] + r.beta1.value(k))
            .collect();
        let x2t: Vec<f64> = (0..n)
            .map(|k| r.alpha2.value(k) * ytilde[k] + r.beta2.value(k))
            .collect();
        let offset: Vec<f64> = (0..n)
            .map(|k| {
                let s = self.model.node(k);
                s.s1() * x1t[k] + s.s2() * x2t[k] + s.forcing() + s.f2 * self.nodes.z_offset[k]
            })
            .collect();
        let (y, z2) = backward_bsde_affine(
            self.model.grid(),
            &path.dw2,
            self.terminal_value(path),
            AffineLaw {
                slope: &self.nodes.y_slope,
                offset: &offset,
            },
            AffineLaw {
                slope: &self.nodes.f2,
                offset: &self.nodes.z_offset,
            },
        )?;
        let x1 = forward_sde(self.model, path, &y, Player::One)?;
        let x2 = forward_sde(self.model, path, &y, Player::Two)?;
        let (u1, u2) = self.controls(&x1t, &x2t);
        Ok(PathRealization {
            y,
            ytilde,
            yhat: None,
            ymean: None,
            x1,
            x2,
            x1tilde: Some(x1t),
            x2tilde: Some(x2t),
            x1hat: None,
            z1: vec![0.0; n],
            z2,
            z2tilde,
            u1,
            u2,
        })
    }

    fn full(&self, path: &BrownianPath) -> Result<PathRealization> {
        let r = self.riccati;
        let g = r.gamma()?;
        let (ytilde, z2tilde) = self.filtered(path)?;
        let n = ytilde.len();
        let x2t: Vec<f64> = (0..n)
            .map(|k| r.alpha2.value(k) * ytilde[k] + r.beta2.value(k))
            .collect();
        let offset: Vec<f64> = (0..n)
            .map(|k| {
                let s = self.model.node(k);
                s.s1() * (g[1].value(k) * ytilde[k] + g[2].value(k))
                    + s.s2() * x2t[k]
                    + s.forcing()
                    + s.f2 * self.nodes.z_offset[k]
            })
            .collect();
        let (y, z2) = backward_bsde_affine(
            self.model.grid(),
            &path.dw2,
            self.terminal_value(path),
            AffineLaw {
                slope: &self.nodes.y_slope,
                offset: &offset,
            },
            AffineLaw {
                slope: &self.nodes.f2,
                offset: &self.nodes.z_offset,
            },
        )?;
        let x1: Vec<f64> = (0..n)
            .map(|k| g[0].value(k) * y[k] + g[1].value(k) * ytilde[k] + g[2].value(k))
            .collect();
        let x2 = forward_sde(self.model, path, &y, Player::Two)?;
        let (u1, u2) = self.controls(&x1, &x2t);
        Ok(PathRealization {
            y,
            ytilde,
            yhat: None,
            ymean: None,
            x1,
            x2,
            x1tilde: None,
            x2tilde: Some(x2t),
            x1hat: None,
            z1: vec![0.0; n],
            z2,
            z2tilde,
            u1,
            u2,
        })
    }

    fn split(&self, path: &BrownianPath) -> Result<PathRealization> {
        let r = self.riccati;
        let g = r.gamma()?;
        let t = r.tau()?;
        let st = self.split.as_ref().ok_or(Error::PatternMismatch {
            expected: InformationPattern::W1VsW2,
            found: self.pattern(),
        })?;
        let mean = self.mean.clone().unwrap_or_default();
        let (w1, w2) = (path.w1(), path.w2());
        self.model.grid().check_len(w1.len())?;
        let n = w1.len();
        let y = st.y.along(&w1, &w2);
        let yhat = st.yhat.along(&w1, &w2);
        let ytilde = st.ytilde.along(&w1, &w2);
        let x1h: Vec<f64> = (0..n)
            .map(|k| g[0].value(k) * yhat[k] + g[1].value(k) * mean[k] + g[2].value(k))
            .collect();
        let x2t: Vec<f64> = (0..n)
            .map(|k| t[0].value(k) * ytilde[k] + t[1].value(k) * mean[k] + t[2].value(k))
            .collect();
        let x1 = forward_sde(self.model, path, &y, Player::One)?;
        let x2 = forward_sde(self.model, path, &y, Player::Two)?;
        let (u1, u2) = self.controls(&x1h, &x2t);
        Ok(PathRealization {
            y,
            ytilde,
            yhat: Some(yhat),
            ymean: Some(mean),
            x1,
            x2,
            x1tilde: None,
            x2tilde: Some(x2t),
            x1hat: Some(x1h),
            z1: st.y.q1.clone(),
            z2: st.y.q2.clone(),
            z2tilde: st.ytilde.q2.clone(),
            u1,
            u2,
        })
    }

    /// Distance between the adjoints and their affine representations.
    pub fn ansatz_residual(
        &self,
        path: &BrownianPath,
        real: &PathRealization,
    ) -> Result<AnsatzResidual> {
        let r = self.riccati;
        let sup = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let n = real.y.len();
        match self.pattern() {
            InformationPattern::SymmetricW2 => {
                let a1: Vec<f64> = (0..n)
                    .map(|k| r.alpha1.value(k) * real.y[k] + r.beta1.value(k))
                    .collect();
                let a2: Vec<f64> = (0..n)
                    .map(|k| r.alpha2.value(k) * real.y[k] + r.beta2.value(k))
                    .collect();
                Ok(AnsatzResidual {
                    player1: sup(&real.x1, &a1),
                    player2: Some(sup(&real.x2, &a2)),
                })
            }
            InformationPattern::FullVsW2 => {
                let forward = forward_sde(self.model, path, &real.y, Player::One)?;
                Ok(AnsatzResidual {
                    player1: sup(&forward, &real.x1),
                    player2: None,
                })
            }
            InformationPattern::W1VsW2 => {
                let yhat = real.yhat.as_deref().unwrap_or(&[]);
                let formula = real.x1hat.as_deref().unwrap_or(&[]);
                let quiet = BrownianPath {
                    dw1: vec![0.0; path.steps()],
                    dw2: vec![0.0; path.steps()],
                };
                let filtered = forward_sde(self.model, &quiet, yhat, Player::One)?;
                Ok(AnsatzResidual {
                    player1: sup(&filtered, formula),
                    player2: None,
                })
            }
        }
    }
}

fn require(model: &ValidatedModel, expected: InformationPattern) -> Result<()> {
    if model.pattern() == expected {
        Ok(())
    } else {
        Err(Error::PatternMismatch {
            expected,
            found: model.pattern(),
        })
    }
}

/// Equilibrium when both players observe `w2`.
pub fn reconstruct_case_i(
    model: &ValidatedModel,
    riccati: &RiccatiSolution,
    batch: &BrownianPathBatch,
) -> Result<EquilibriumRealization> {
    require(model, InformationPattern::SymmetricW2)?;
    Equilibrium::new(model, riccati)?.reconstruct_batch(batch)
}

/// Equilibrium when player 1 observes everything and player 2 observes `w2`.
pub fn reconstruct_case_ii(
    model: &ValidatedModel,
    riccati: &RiccatiSolution,
    batch: &BrownianPathBatch,
) -> Result<EquilibriumRealization> {
    require(model, InformationPattern::FullVsW2)?;
    Equilibrium::new(model, riccati)?.reconstruct_batch(batch)
}

/// Equilibrium when player 1 observes `w1` and player 2 observes `w2`.
pub fn reconstruct_case_iii(
    model: &ValidatedModel,
    riccati: &RiccatiSolution,
    batch: &BrownianPathBatch,
) -> Result<EquilibriumRealization> {
    require(model, InformationPattern::W1VsW2)?;
    Equilibrium::new(model, riccati)?.reconstruct_batch(batch)
}

/// Recomputes the controls from the players' conditional adjoints,
/// `u_i = (b_i/m_i) E[x_i | G_i] + n_i`.
pub fn open_loop_controls(
    model: &ValidatedModel,
    real: &PathRealization,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let missing = |what: &str| Error::InvalidInput(format!("realization lacks {what}"));
    let filtered1 = match model.pattern() {
        InformationPattern::SymmetricW2 => real.x1tilde.as_ref().ok_or_else(|| missing("x1tilde"))?,
        InformationPattern::FullVsW2 => &real.x1,
        InformationPattern::W1VsW2 => real.x1hat.as_ref().ok_or_else(|| missing("x1hat"))?,
    };
    let filtered2 = real.x2tilde.as_ref().ok_or_else(|| missing("x2tilde"))?;
    let nodes = model.nodes();
    model.grid().check_len(filtered1.len())?;
    let u1 = (0..nodes.len())
        .map(|k| nodes[k].b1 / nodes[k].m1 * filtered1[k] + nodes[k].n1)
        .collect();
    let u2 = (0..nodes.len())
        .map(|k| nodes[k].b2 / nodes[k].m2 * filtered2[k] + nodes[k].n2)
        .collect();
    Ok((u1, u2))
}
