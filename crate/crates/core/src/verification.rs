//! Monte-Carlo and deterministic checks of a reconstructed equilibrium.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::equilibrium::{Equilibrium, EquilibriumRealization, PathRealization};
use crate::error::{Error, Result};
use crate::model::{Coefficient, InformationPattern, Player, ValidatedModel};
use crate::ode::{integrate_backward, Point};
use crate::riccati::RiccatiSolution;
use crate::stochastic::{path_rng, BrownianPath, BrownianPathBatch};

/// Sum in a fixed pairwise order, independent of thread count.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        if n == 0 {
            return Self::default();
        }
        let mean = pairwise_sum(x) / n as f64;
        if n == 1 {
            return Self { mean, se: 0.0 };
        }
        let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }

    /// `|mean - target| <= k SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Trapezoid weights on the grid.
pub fn trapezoid_weights(model: &ValidatedModel) -> Vec<f64> {
    let grid = model.grid();
    let dt = grid.dt();
    let mut w = vec![dt; grid.len()];
    w[0] = 0.5 * dt;
    w[grid.steps()] = 0.5 * dt;
    w
}

/// Both players' costs on one path, by trapezoid quadrature.
pub fn path_cost(model: &ValidatedModel, y: &[f64], u1: &[f64], u2: &[f64]) -> (f64, f64) {
    let w = trapezoid_weights(model);
    let cs = model.coefficients();
    let mut run1 = Vec::with_capacity(w.len());
    let mut run2 = Vec::with_capacity(w.len());
    for (k, s) in model.nodes().iter().enumerate() {
        let (e1, e2) = (y[k] - s.k1, y[k] - s.k2);
        let (d1, d2) = (u1[k] - s.n1, u2[k] - s.n2);
        run1.push(w[k] * (s.l1 * e1 * e1 + s.m1 * d1 * d1));
        run2.push(w[k] * (s.l2 * e2 * e2 + s.m2 * d2 * d2));
    }
    let (t1, t2) = (y[0] - cs.h1, y[0] - cs.h2);
    (
        0.5 * (pairwise_sum(&run1) + cs.r1 * t1 * t1),
        0.5 * (pairwise_sum(&run2) + cs.r2 * t2 * t2),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostReport {
    pub j1: Estimate,
    pub j2: Estimate,
    pub paths: usize,
}

impl CostReport {
    pub fn from_pairs(costs: &[(f64, f64)]) -> Self {
        let c1: Vec<f64> = costs.iter().map(|c| c.0).collect();
        let c2: Vec<f64> = costs.iter().map(|c| c.1).collect();
        Self {
            j1: Estimate::from_samples(&c1),
            j2: Estimate::from_samples(&c2),
            paths: costs.len(),
        }
    }
}

/// Monte-Carlo costs of a materialized batch.
pub fn mc_cost(model: &ValidatedModel, batch: &EquilibriumRealization) -> CostReport {
    let costs: Vec<(f64, f64)> = batch
        .paths
        .iter()
        .map(|r| path_cost(model, &r.y, &r.u1, &r.u2))
        .collect();
    CostReport::from_pairs(&costs)
}

/// Monte-Carlo costs without keeping the paths.
pub fn estimate_costs(eq: &Equilibrium<'_>, batch: &BrownianPathBatch) -> Result<CostReport> {
    let model = eq.model();
    let costs = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let r = eq.reconstruct(&batch.path(p))?;
            Ok(path_cost(model, &r.y, &r.u1, &r.u2))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport::from_pairs(&costs))
}

/// Perturbation direction `phi` of a player's control.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// `phi = 1`.
    Constant,
    /// `phi = t / T`.
    Ramp,
    /// `phi = cos(pi t / T)`.
    Cosine,
    /// Any deterministic function of time.
    Function(Coefficient),
    /// `phi = w1(t)`; random, rejected.
    BrownianW1,
    /// `phi = w2(t)`; random, rejected.
    BrownianW2,
}

impl Direction {
    pub const STANDARD: [Direction; 3] = [Direction::Constant, Direction::Ramp, Direction::Cosine];

    pub fn name(&self) -> &'static str {
        match self {
            Direction::Constant => "constant",
            Direction::Ramp => "ramp",
            Direction::Cosine => "cosine",
            Direction::Function(_) => "function",
            Direction::BrownianW1 => "w1",
            Direction::BrownianW2 => "w2",
        }
    }

    fn eval(&self, t: f64, horizon: f64) -> Result<f64> {
        match self {
            Direction::Constant => Ok(1.0),
            Direction::Ramp => Ok(t / horizon),
            Direction::Cosine => Ok((std::f64::consts::PI * t / horizon).cos()),
            Direction::Function(c) => Ok(c.eval(t)),
            Direction::BrownianW1 | Direction::BrownianW2 => Err(Error::NotAdapted),
        }
    }
}

/// Outcome of perturbing one player's control along one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub player: Player,
    pub direction: &'static str,
    /// First-order coefficient `lambda` of `dJ(eps) = kappa eps^2 + lambda eps`.
    pub theta: Estimate,
    /// Central difference `(dJ(e) - dJ(-e)) / 2e` at the largest `e` with
    /// both signs present.
    pub derivative: Option<Estimate>,
    /// Curvature; deterministic.
    pub kappa: f64,
    /// `(eps, dJ(eps))`.
    pub table: Vec<(f64, Estimate)>,
    /// `max_eps |mean dJ - (kappa eps^2 + theta eps)| / max_eps |mean dJ|`.
    pub fit_residual: f64,
}

impl StationarityReport {
    /// `|theta| <= 3 SE`, `kappa >= 0` and every `dJ(eps) >= -3 SE`.
    pub fn passes(&self) -> bool {
        self.theta.mean.abs() <= 3.0 * self.theta.se
            && self.kappa >= 0.0
            && self.table.iter().all(|(_, d)| d.mean >= -3.0 * d.se)
    }
}

/// Deterministic response `D(t) = int_t^T exp(int_t^s a) b_i(s) phi(s) ds` of
/// the state to a unit shift of player `i`'s control along `phi`.
fn linear_response(model: &ValidatedModel, player: Player, phi: &Direction) -> Result<Vec<f64>> {
    let grid = model.grid();
    let horizon = grid.horizon();
    phi.eval(0.0, horizon)?;
    let sol = integrate_backward(grid, [0.0], |p: Point, u| {
        let s = model.point(p);
        let b = match player {
            Player::One => s.b1,
            Player::Two => s.b2,
        };
        let f = phi.eval(p.time(grid), horizon).unwrap_or(0.0);
        [-(s.a * u[0] + b * f)]
    });
    Ok(sol.into_iter().map(|u| u[0]).collect())
}

struct Probe {
    player: Player,
    direction: &'static str,
    phi: Vec<f64>,
    response: Vec<f64>,
    kappa: f64,
}

impl Probe {
    fn new(model: &ValidatedModel, player: Player, direction: &Direction) -> Result<Self> {
        let grid = model.grid();
        let response = linear_response(model, player, direction)?;
        let phi = (0..grid.len())
            .map(|k| direction.eval(grid.t(k), grid.horizon()))
            .collect::<Result<Vec<_>>>()?;
        let w = trapezoid_weights(model);
        let cs = model.coefficients();
        let (r, terms): (f64, Vec<f64>) = match player {
            Player::One => (
                cs.r1,
                model
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| w[k] * (s.l1 * response[k] * response[k] + s.m1 * phi[k] * phi[k]))
                    .collect(),
            ),
            Player::Two => (
                cs.r2,
                model
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| w[k] * (s.l2 * response[k] * response[k] + s.m2 * phi[k] * phi[k]))
                    .collect(),
            ),
        };
        let kappa = 0.5 * (pairwise_sum(&terms) + r * response[0] * response[0]);
        Ok(Self {
            player,
            direction: direction.name(),
            phi,
            response,
            kappa,
        })
    }

    /// `(lambda, dJ(eps) for each eps)` on one path.
    fn evaluate(&self, model: &ValidatedModel, real: &PathRealization, eps: &[f64]) -> (f64, Vec<f64>) {
        let u = match self.player {
            Player::One => &real.u1,
            Player::Two => &real.u2,
        };
        let v = match self.player {
            Player::One => &real.u2,
            Player::Two => &real.u1,
        };
        let base = own_cost(model, self.player, &real.y, u, v);
        let w = trapezoid_weights(model);
        let cs = model.coefficients();
        let (r, h) = match self.player {
            Player::One => (cs.r1, cs.h1),
            Player::Two => (cs.r2, cs.h2),
        };
        let lin: Vec<f64> = model
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let (l, tk, m, n) = match self.player {
                    Player::One => (s.l1, s.k1, s.m1, s.n1),
                    Player::Two => (s.l2, s.k2, s.m2, s.n2),
                };
                w[k] * (l * (real.y[k] - tk) * self.response[k] + m * (u[k] - n) * self.phi[k])
            })
            .collect();
        let lambda = pairwise_sum(&lin) + r * (real.y[0] - h) * self.response[0];
        let deltas = eps
            .iter()
            .map(|&e| {
                if e == 0.0 {
                    return 0.0;
                }
                let y: Vec<f64> = real.y.iter().zip(&self.response).map(|(a, d)| a + e * d).collect();
                let up: Vec<f64> = u.iter().zip(&self.phi).map(|(a, p)| a + e * p).collect();
                own_cost(model, self.player, &y, &up, v) - base
            })
            .collect();
        (lambda, deltas)
    }
}

fn own_cost(model: &ValidatedModel, player: Player, y: &[f64], own: &[f64], other: &[f64]) -> f64 {
    match player {
        Player::One => path_cost(model, y, own, other).0,
        Player::Two => path_cost(model, y, other, own).1,
    }
}

/// Perturbs every `(player, direction)` pair on the same batch. The
/// perturbed state is `y + eps D` with `D` from [`linear_response`], exact
/// because the perturbation is deterministic and leaves `z` unchanged.
pub fn stationarity_suite(
    eq: &Equilibrium<'_>,
    batch: &BrownianPathBatch,
    probes: &[(Player, Direction)],
    epsilons: &[f64],
) -> Result<Vec<StationarityReport>> {
    let model = eq.model();
    let probes = probes
        .iter()
        .map(|(p, d)| Probe::new(model, *p, d))
        .collect::<Result<Vec<_>>>()?;
    let per_path = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let real = eq.reconstruct(&batch.path(p))?;
            Ok(probes
                .iter()
                .map(|pr| pr.evaluate(model, &real, epsilons))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(probes.len());
    for (i, pr) in probes.iter().enumerate() {
        let lambdas: Vec<f64> = per_path.iter().map(|v| v[i].0).collect();
        let theta = Estimate::from_samples(&lambdas);
        let table: Vec<(f64, Estimate)> = epsilons
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                let d: Vec<f64> = per_path.iter().map(|v| v[i].1[j]).collect();
                (e, Estimate::from_samples(&d))
            })
            .collect();
        let scale = table.iter().map(|(_, d)| d.mean.abs()).fold(0.0, f64::max);
        let fit = table
            .iter()
            .map(|(e, d)| (d.mean - (pr.kappa * e * e + theta.mean * e)).abs())
            .fold(0.0, f64::max);
        let derivative = epsilons
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0.0)
            .filter_map(|(j, &e)| {
                epsilons.iter().position(|&x| x == -e).map(|jm| (e, j, jm))
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(e, j, jm)| {
                let d: Vec<f64> = per_path
                    .iter()
                    .map(|v| (v[i].1[j] - v[i].1[jm]) / (2.0 * e))
                    .collect();
                Estimate::from_samples(&d)
            });
        out.push(StationarityReport {
            player: pr.player,
            direction: pr.direction,
            theta,
            derivative,
            kappa: pr.kappa,
            table,
            fit_residual: if scale > 0.0 { fit / scale } else { fit },
        });
    }
    Ok(out)
}

/// Perturbs player `player`'s control by `eps phi` for each `eps`.
pub fn perturbation_test(
    eq: &Equilibrium<'_>,
    batch: &BrownianPathBatch,
    player: Player,
    direction: &Direction,
    epsilons: &[f64],
) -> Result<StationarityReport> {
    let mut v = stationarity_suite(eq, batch, &[(player, direction.clone())], epsilons)?;
    Ok(v.remove(0))
}

/// Monte-Carlo mean of an adjoint at one node against its predicted filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterPoint {
    pub index: usize,
    pub t: f64,
    pub estimate: Estimate,
    pub predicted: f64,
}

impl FilterPoint {
    /// `|mean - predicted| / SE`; zero when both the deviation and SE vanish.
    pub fn deviation_over_se(&self) -> f64 {
        let dev = (self.estimate.mean - self.predicted).abs();
        if dev == 0.0 {
            0.0
        } else {
            dev / self.estimate.se
        }
    }
}

/// `count` nodes spread evenly over `(0, T]`.
pub fn checkpoints(model: &ValidatedModel, count: usize) -> Vec<usize> {
    let n = model.grid().steps();
    (1..=count).map(|i| i * n / count).collect()
}

/// Holds the `w2` path fixed, samples `inner` independent `w1` paths from
/// stream `inner_seed`, and compares the mean of player 1's adjoint with
/// `alpha1 yt + beta1` at each checkpoint.
pub fn filter_check(
    eq: &Equilibrium<'_>,
    outer: &BrownianPath,
    inner: usize,
    inner_seed: u64,
    nodes: &[usize],
) -> Result<Vec<FilterPoint>> {
    let model = eq.model();
    if model.pattern() != InformationPattern::SymmetricW2 {
        return Err(Error::PatternMismatch {
            expected: InformationPattern::SymmetricW2,
            found: model.pattern(),
        });
    }
    if inner < 1000 {
        return Err(Error::InvalidInput(format!(
            "filter check needs at least 1000 inner paths, got {inner}"
        )));
    }
    let reference = eq.reconstruct(outer)?;
    let predicted = reference.x1tilde.clone().unwrap_or_default();
    let grid = model.grid();
    let samples = (0..inner)
        .into_par_iter()
        .map(|m| {
            let mut rng = path_rng(inner_seed, m as u64);
            let fresh = BrownianPath::draw(&mut rng, grid.steps(), grid.dt());
            let r = eq.reconstruct(&outer.with_dw1(fresh.dw1))?;
            Ok(nodes.iter().map(|&k| r.x1[k]).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            FilterPoint {
                index: k,
                t: grid.t(k),
                estimate: Estimate::from_samples(&col),
                predicted: predicted[k],
            }
        })
        .collect())
}

/// Batch means of both adjoints against `alpha_i E y + beta_i`, the mean
/// relation that holds when player 1 observes `w1` and player 2 `w2`.
pub fn mean_filter_check(
    eq: &Equilibrium<'_>,
    batch: &BrownianPathBatch,
    nodes: &[usize],
) -> Result<[Vec<FilterPoint>; 2]> {
    let model = eq.model();
    let st = eq.split_states().ok_or(Error::PatternMismatch {
        expected: InformationPattern::W1VsW2,
        found: model.pattern(),
    })?;
    let r = eq.riccati();
    let samples = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let real = eq.reconstruct(&batch.path(p))?;
            Ok(nodes
                .iter()
                .map(|&k| (real.x1[k], real.x2[k]))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = model.grid();
    let build = |which: usize| -> Vec<FilterPoint> {
        nodes
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let col: Vec<f64> = samples
                    .iter()
                    .map(|s| if which == 0 { s[i].0 } else { s[i].1 })
                    .collect();
                let (a, b) = if which == 0 {
                    (r.alpha1.value(k), r.beta1.value(k))
                } else {
                    (r.alpha2.value(k), r.beta2.value(k))
                };
                FilterPoint {
                    index: k,
                    t: grid.t(k),
                    estimate: Estimate::from_samples(&col),
                    predicted: a * st.mean[k] + b,
                }
            })
            .collect()
    };
    Ok([build(0), build(1)])
}

/// Discrete open-loop Nash point of the noise-free game.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub y: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub j1: f64,
    pub j2: f64,
}

/// Solves the noise-free game by brute force. The state equation
/// `-y' = a y + b1 u1 + b2 u2 + c` is discretized by the trapezoid rule,
/// so `y = y0 + G1 u1 + G2 u2` with `u_i` the control values on the nodes.
/// Each player's discrete cost is quadratic in its own control; stacking
/// the two first-order conditions gives a linear system of size `2(N+1)`.
pub fn deterministic_oracle(model: &ValidatedModel) -> Result<OracleSolution> {
    let xi = model.terminal();
    if xi.c1 != 0.0 || xi.c2 != 0.0 {
        return Err(Error::NotDeterministic("terminal value depends on the noise"));
    }
    if model.nodes().iter().any(|s| s.f1 != 0.0 || s.f2 != 0.0) {
        return Err(Error::NotDeterministic("diffusion coefficients f1, f2 are nonzero"));
    }
    let grid = model.grid();
    let n = grid.len();
    let dt = grid.dt();
    let nodes = model.nodes();
    let cs = model.coefficients();

    // Backward trapezoid step: (1 - h a_k) y_k = (1 + h a_{k+1}) y_{k+1} + h (g_k + g_{k+1}),
    // h = dt/2, g = forcing from controls and c.
    let solve_state = |forcing: &dyn Fn(usize) -> f64, terminal: f64| -> Vec<f64> {
        let h = 0.5 * dt;
        let mut y = vec![0.0; n];
        y[n - 1] = terminal;
        for k in (0..n - 1).rev() {
            y[k] = ((1.0 + h * nodes[k + 1].a) * y[k + 1] + h * (forcing(k) + forcing(k + 1)))
                / (1.0 - h * nodes[k].a);
        }
        y
    };
    let y0 = solve_state(&|k| nodes[k].c, xi.c0);
    let green = |b: &dyn Fn(usize) -> f64| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = solve_state(&|k| if k == j { b(k) } else { 0.0 }, 0.0);
            for k in 0..n {
                g[(k, j)] = col[k];
            }
        }
        g
    };
    let g1 = green(&|k| nodes[k].b1);
    let g2 = green(&|k| nodes[k].b2);
    let w = trapezoid_weights(model);

    let l1 = DVector::from_iterator(n, (0..n).map(|k| w[k] * nodes[k].l1));
    let l2 = DVector::from_iterator(n, (0..n).map(|k| w[k] * nodes[k].l2));
    let m1 = DVector::from_iterator(n, (0..n).map(|k| w[k] * nodes[k].m1));
    let m2 = DVector::from_iterator(n, (0..n).map(|k| w[k] * nodes[k].m2));
    let y0v = DVector::from_vec(y0.clone());
    let k1 = DVector::from_iterator(n, nodes.iter().map(|s| s.k1));
    let k2 = DVector::from_iterator(n, nodes.iter().map(|s| s.k2));
    let n1 = DVector::from_iterator(n, nodes.iter().map(|s| s.n1));
    let n2 = DVector::from_iterator(n, nodes.iter().map(|s| s.n2));

    // Player i: d/du_i of 1/2 [ (y-k)' L (y-k) + (u-n)' M (u-n) + r (y_0 - h)^2 ].
    let block = |gi: &DMatrix<f64>, gj: &DMatrix<f64>, l: &DVector<f64>, r: f64| {
        let lg_i = DMatrix::from_fn(n, n, |a, b| l[a] * gi[(a, b)]);
        let lg_j = DMatrix::from_fn(n, n, |a, b| l[a] * gj[(a, b)]);
        let row_i = gi.row(0).transpose();
        let row_j = gj.row(0).transpose();
        let own = gi.transpose() * lg_i + r * &row_i * row_i.transpose();
        let cross = gi.transpose() * lg_j + r * &row_i * row_j.transpose();
        (own, cross, row_i)
    };
    let (mut a11, a12, row1) = block(&g1, &g2, &l1, cs.r1);
    let (mut a22, a21, row2) = block(&g2, &g1, &l2, cs.r2);
    for k in 0..n {
        a11[(k, k)] += m1[k];
        a22[(k, k)] += m2[k];
    }
    let e1 = y0v.clone() - &k1;
    let e2 = y0v.clone() - &k2;
    let rhs1 = -(g1.transpose() * l1.component_mul(&e1)) + m1.component_mul(&n1)
        - cs.r1 * (y0[0] - cs.h1) * &row1;
    let rhs2 = -(g2.transpose() * l2.component_mul(&e2)) + m2.component_mul(&n2)
        - cs.r2 * (y0[0] - cs.h2) * &row2;

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&a11);
    a.view_mut((0, n), (n, n)).copy_from(&a12);
    a.view_mut((n, 0), (n, n)).copy_from(&a21);
    a.view_mut((n, n), (n, n)).copy_from(&a22);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(&rhs1);
    rhs.rows_mut(n, n).copy_from(&rhs2);

    let lu = a.lu();
    let diag = lu.u().diagonal();
    let big = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let small = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(small > 1e-13 * big) {
        return Err(Error::SingularSystem { pivot: small });
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem { pivot: small })?;
    let u1: Vec<f64> = sol.rows(0, n).iter().copied().collect();
    let u2: Vec<f64> = sol.rows(n, n).iter().copied().collect();
    let y: Vec<f64> = (y0v + &g1 * DVector::from_vec(u1.clone()) + &g2 * DVector::from_vec(u2.clone()))
        .iter()
        .copied()
        .collect();
    let (j1, j2) = path_cost(model, &y, &u1, &u2);
    Ok(OracleSolution { y, u1, u2, j1, j2 })
}

/// Richardson combination of [`deterministic_oracle`] on the model's grid
/// and on the grid refined twice. The first-order conditions at the last
/// node pair the control with a half-step multiplier, so the raw oracle is
/// only first-order accurate there; `2 u(2N) - u(N)` removes that term.
/// Costs are second order and combine as `(4 J(2N) - J(N)) / 3`.
pub fn extrapolated_oracle(model: &ValidatedModel) -> Result<OracleSolution> {
    let coarse = deterministic_oracle(model)?;
    let fine_model = model.with_grid(model.grid().refined(2)?)?;
    let fine = deterministic_oracle(&fine_model)?;
    let combine = |c: &[f64], f: &[f64]| -> Vec<f64> {
        c.iter().enumerate().map(|(k, v)| 2.0 * f[2 * k] - v).collect()
    };
    Ok(OracleSolution {
        y: combine(&coarse.y, &fine.y),
        u1: combine(&coarse.u1, &fine.u1),
        u2: combine(&coarse.u2, &fine.u2),
        j1: (4.0 * fine.j1 - coarse.j1) / 3.0,
        j2: (4.0 * fine.j2 - coarse.j2) / 3.0,
    })
}

/// Formula controls and costs against the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    /// `max_k |u_i(formula) - u_i(oracle)|` for each player.
    pub control: [f64; 2],
    /// `|J_i(formula) - J_i(oracle)| / max(|J_i(oracle)|, 1e-12)`.
    pub cost_relative: [f64; 2],
}

impl OracleGap {
    pub fn max_control(&self) -> f64 {
        self.control[0].max(self.control[1])
    }

    pub fn max_cost(&self) -> f64 {
        self.cost_relative[0].max(self.cost_relative[1])
    }
}

/// Compares the equilibrium formulas of the model's pattern with
/// [`extrapolated_oracle`] on a noise-free scenario.
pub fn oracle_gap(model: &ValidatedModel, riccati: &RiccatiSolution) -> Result<(OracleGap, OracleSolution)> {
    let oracle = extrapolated_oracle(model)?;
    let eq = Equilibrium::new(model, riccati)?;
    let steps = model.grid().steps();
    let quiet = BrownianPath {
        dw1: vec![0.0; steps],
        dw2: vec![0.0; steps],
    };
    let r = eq.reconstruct(&quiet)?;
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let (j1, j2) = path_cost(model, &r.y, &r.u1, &r.u2);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
    Ok((
        OracleGap {
            control: [sup(&r.u1, &oracle.u1), sup(&r.u2, &oracle.u2)],
            cost_relative: [rel(j1, oracle.j1), rel(j2, oracle.j2)],
        },
        oracle,
    ))
}

/// Player 1's cost with and without full information on the same paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationValue {
    pub j1_symmetric: Estimate,
    pub j1_full: Estimate,
    /// Paired difference `J1(full) - J1(symmetric)`.
    pub difference: Estimate,
    /// `max |u2(full) - u2(symmetric)|` over all paths and nodes.
    pub u2_gap: f64,
}

impl InformationValue {
    pub fn passes(&self) -> bool {
        self.difference.mean <= 3.0 * self.difference.se
    }
}

/// Reconstructs the symmetric and full-information equilibria of the same
/// coefficients on identical paths.
pub fn information_value(model: &ValidatedModel, batch: &BrownianPathBatch) -> Result<InformationValue> {
    let sym = model.with_pattern(InformationPattern::SymmetricW2)?;
    let full = model.with_pattern(InformationPattern::FullVsW2)?;
    let rs = RiccatiSolution::solve(&sym)?;
    let rf = RiccatiSolution::solve(&full)?;
    let es = Equilibrium::new(&sym, &rs)?;
    let ef = Equilibrium::new(&full, &rf)?;
    let per_path = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let path = batch.path(p);
            let a = es.reconstruct(&path)?;
            let b = ef.reconstruct(&path)?;
            let ja = path_cost(&sym, &a.y, &a.u1, &a.u2).0;
            let jb = path_cost(&full, &b.y, &b.u1, &b.u2).0;
            let gap = a
                .u2
                .iter()
                .zip(&b.u2)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            Ok((ja, jb, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let ja: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let jb: Vec<f64> = per_path.iter().map(|v| v.1).collect();
    let d: Vec<f64> = per_path.iter().map(|v| v.1 - v.0).collect();
    Ok(InformationValue {
        j1_symmetric: Estimate::from_samples(&ja),
        j1_full: Estimate::from_samples(&jb),
        difference: Estimate::from_samples(&d),
        u2_gap: per_path.iter().map(|v| v.2).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&x), 499500.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.se - 1.0).abs() < 1e-15);
    }
}
