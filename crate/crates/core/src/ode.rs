//! Fixed-step classical Runge-Kutta integration on a [`TimeGrid`].
//!
//! Forward solves record the four stage states of every step. A second
//! equation driven by a recorded trajectory can then read the driver at
//! exactly the states the driver's own integration used, so solving a
//! triangular system one equation at a time reproduces the joint solve
//! to rounding.

use crate::error::{Error, Result};
use crate::model::{CoefficientSample, TimeGrid, ValidatedModel};

/// Magnitude beyond which a forward solve is declared to have blown up.
pub const BLOW_UP: f64 = 1e12;

/// Stage `index` (0..4) of step `step`. `Stage { step: N, index: 0 }` is the
/// final grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub step: usize,
    pub index: usize,
}

/// Evaluation points of the backward scheme: grid nodes and interval
/// midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    Node(usize),
    Mid(usize),
}

impl Point {
    pub fn time(&self, grid: &TimeGrid) -> f64 {
        match *self {
            Point::Node(k) => grid.t(k),
            Point::Mid(k) => grid.t(k) + 0.5 * grid.dt(),
        }
    }
}

impl ValidatedModel {
    /// Coefficients at an RK4 stage.
    pub(crate) fn stage(&self, s: Stage) -> &CoefficientSample {
        match s.index {
            0 => self.node(s.step),
            1 | 2 => self.mid(s.step),
            _ => self.node(s.step + 1),
        }
    }

    pub(crate) fn point(&self, p: Point) -> &CoefficientSample {
        match p {
            Point::Node(k) => self.node(k),
            Point::Mid(k) => self.mid(k),
        }
    }
}

/// Grid values of a forward solve together with its stage states and the
/// slopes at the nodes, which give a cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: Vec<f64>,
    stages: Vec<[f64; 4]>,
    slopes: Vec<f64>,
    dt: f64,
}

impl Trajectory {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// State used at an RK4 stage of the solve that produced this trajectory.
    pub fn stage(&self, s: Stage) -> f64 {
        if s.step == self.stages.len() {
            self.values[s.step]
        } else {
            self.stages[s.step][s.index]
        }
    }

    /// Hermite interpolant at the midpoint of `[t_k, t_{k+1}]`.
    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.values[k] + self.values[k + 1])
            + 0.125 * self.dt * (self.slopes[k] - self.slopes[k + 1])
    }

    pub fn point(&self, p: Point) -> f64 {
        match p {
            Point::Node(k) => self.values[k],
            Point::Mid(k) => self.mid(k),
        }
    }

    /// Cubic Hermite interpolant at time `t`, clamped to the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.stages.len();
        let x = (t / self.dt).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let th = x - k as f64;
        if th == 0.0 {
            return self.values[k];
        }
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        h00 * self.values[k]
            + h10 * self.dt * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.dt * self.slopes[k + 1]
    }

    /// Copy with every value moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Trajectory {
        Trajectory {
            values: self.values.iter().map(|v| v + delta).collect(),
            stages: self
                .stages
                .iter()
                .map(|s| [s[0] + delta, s[1] + delta, s[2] + delta, s[3] + delta])
                .collect(),
            slopes: self.slopes.clone(),
            dt: self.dt,
        }
    }
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, k: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Classical RK4 from `t = 0` with initial state `init`. `rhs` receives the
/// stage being evaluated and the stage state and returns the derivative.
pub fn integrate_forward<const D: usize>(
    grid: &TimeGrid,
    names: [&'static str; D],
    init: [f64; D],
    mut rhs: impl FnMut(Stage, &[f64; D]) -> [f64; D],
) -> Result<[Trajectory; D]> {
    let n = grid.steps();
    let h = grid.dt();
    let mut values: [Vec<f64>; D] = std::array::from_fn(|_| Vec::with_capacity(n + 1));
    let mut stages: [Vec<[f64; 4]>; D] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut slopes: [Vec<f64>; D] = std::array::from_fn(|_| Vec::with_capacity(n + 1));

    let mut y = init;
    for i in 0..D {
        values[i].push(y[i]);
    }
    for step in 0..n {
        let k1 = rhs(Stage { step, index: 0 }, &y);
        let y1 = axpy(&y, 0.5 * h, &k1);
        let k2 = rhs(Stage { step, index: 1 }, &y1);
        let y2 = axpy(&y, 0.5 * h, &k2);
        let k3 = rhs(Stage { step, index: 2 }, &y2);
        let y3 = axpy(&y, h, &k3);
        let k4 = rhs(Stage { step, index: 3 }, &y3);
        for i in 0..D {
            stages[i].push([y[i], y1[i], y2[i], y3[i]]);
            slopes[i].push(k1[i]);
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !y[i].is_finite() || y[i].abs() > BLOW_UP {
                return Err(Error::BlowUp {
                    quantity: names[i],
                    index: step + 1,
                    t: grid.t(step + 1),
                    value: y[i],
                });
            }
            values[i].push(y[i]);
        }
    }
    let kn = rhs(Stage { step: n, index: 0 }, &y);
    for i in 0..D {
        slopes[i].push(kn[i]);
    }

    let mut it_v = values.into_iter();
    let mut it_s = stages.into_iter();
    let mut it_d = slopes.into_iter();
    Ok(std::array::from_fn(|_| Trajectory {
        values: it_v.next().unwrap_or_default(),
        stages: it_s.next().unwrap_or_default(),
        slopes: it_d.next().unwrap_or_default(),
        dt: h,
    }))
}

/// Classical RK4 from `t = T` down to `t = 0` with terminal state
/// `terminal`. `rhs` returns the ordinary time derivative; intermediate
/// stages are evaluated at interval midpoints. Returns node values.
pub fn integrate_backward<const D: usize>(
    grid: &TimeGrid,
    terminal: [f64; D],
    mut rhs: impl FnMut(Point, &[f64; D]) -> [f64; D],
) -> Vec<[f64; D]> {
    let n = grid.steps();
    let h = grid.dt();
    let mut out = vec![[0.0; D]; n + 1];
    out[n] = terminal;
    let mut u = terminal;
    for k in (0..n).rev() {
        let k1 = rhs(Point::Node(k + 1), &u);
        let k2 = rhs(Point::Mid(k), &axpy(&u, -0.5 * h, &k1));
        let k3 = rhs(Point::Mid(k), &axpy(&u, -0.5 * h, &k2));
        let k4 = rhs(Point::Node(k), &axpy(&u, -h, &k3));
        for i in 0..D {
            u[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out[k] = u;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_forward_and_backward() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let [y] = integrate_forward(&g, ["y"], [1.0], |_, y| [y[0]]).unwrap();
        assert!((y.last() - 1f64.exp()).abs() < 1e-9);
        let back = integrate_backward(&g, [1f64.exp()], |_, u| [u[0]]);
        assert!((back[0][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn driven_equation_matches_joint_solve() {
        let g = TimeGrid::new(1.5, 7).unwrap();
        let f = |y: f64| -y * y + 1.0;
        let [p, q] = integrate_forward(&g, ["p", "q"], [0.2, 0.0], |_, s| [f(s[0]), s[0] * s[1] + 1.0])
            .unwrap();
        let [p_alone] = integrate_forward(&g, ["p"], [0.2], |_, s| [f(s[0])]).unwrap();
        let [q_driven] =
            integrate_forward(&g, ["q"], [0.0], |st, s| [p_alone.stage(st) * s[0] + 1.0]).unwrap();
        assert_eq!(p.values(), p_alone.values());
        assert_eq!(q.values(), q_driven.values());
    }

    #[test]
    fn hermite_is_exact_on_cubics() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        let c = |t: f64| t * t * t - 2.0 * t + 0.5;
        let [y] = integrate_forward(&g, ["y"], [c(0.0)], |s, _| {
            let t = match s.index {
                0 => g.t(s.step),
                1 | 2 => g.t(s.step) + 0.25,
                _ => g.t(s.step + 1),
            };
            [3.0 * t * t - 2.0]
        })
        .unwrap();
        for &t in &[0.1, 0.75, 1.3, 1.99] {
            assert!((y.eval(t) - c(t)).abs() < 1e-12, "t = {t}");
        }
        assert!((y.mid(2) - c(1.25)).abs() < 1e-12);
    }

    #[test]
    fn blow_up_reported() {
        let g = TimeGrid::new(2.0, 200).unwrap();
        let err = integrate_forward(&g, ["y"], [1.0], |_, y| [y[0] * y[0]]).unwrap_err();
        assert!(matches!(err, Error::BlowUp { quantity: "y", .. }));
    }
}
