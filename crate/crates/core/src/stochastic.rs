//! Brownian paths and the pathwise integrators.
//!
//! Path `p` of a batch is drawn from a ChaCha8 keystream keyed by the master
//! seed with stream number `p`, so any single path can be regenerated in
//! isolation and a batch never has to be held in memory. Uniforms take the
//! top 53 bits of each 64-bit output, offset by half a unit so they lie
//! strictly inside `(0, 1)`, and become standard normals through the
//! inverse normal CDF. Increments alternate `dw1`, `dw2` step by step.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::model::{Player, TimeGrid, ValidatedModel};
use crate::ode::{integrate_backward, Point};
use crate::riccati::RiccatiSolution;

/// Standard normal quantile of `u`.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn open_uniform(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Keystream generator for path `stream` under `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-dimensional Brownian increments of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
}

impl BrownianPath {
    /// Draws `steps` increment pairs of variance `dt` from `rng`.
    pub fn draw(rng: &mut ChaCha8Rng, steps: usize, dt: f64) -> Self {
        let sd = dt.sqrt();
        let mut dw1 = Vec::with_capacity(steps);
        let mut dw2 = Vec::with_capacity(steps);
        for _ in 0..steps {
            dw1.push(sd * normal_quantile(open_uniform(rng.next_u64())));
            dw2.push(sd * normal_quantile(open_uniform(rng.next_u64())));
        }
        Self { dw1, dw2 }
    }

    pub fn steps(&self) -> usize {
        self.dw1.len()
    }

    /// Cumulative `w1` on the nodes, starting from 0.
    pub fn w1(&self) -> Vec<f64> {
        cumulative(&self.dw1)
    }

    pub fn w2(&self) -> Vec<f64> {
        cumulative(&self.dw2)
    }

    /// Same path on a grid with `factor` times fewer steps.
    pub fn coarsen(&self, factor: usize) -> BrownianPath {
        let sum = |v: &[f64]| v.chunks(factor).map(|c| c.iter().sum()).collect();
        BrownianPath {
            dw1: sum(&self.dw1),
            dw2: sum(&self.dw2),
        }
    }

    /// The path with `w1` replaced.
    pub fn with_dw1(&self, dw1: Vec<f64>) -> BrownianPath {
        BrownianPath {
            dw1,
            dw2: self.dw2.clone(),
        }
    }

    fn check(&self, grid: &TimeGrid) -> Result<()> {
        for len in [self.dw1.len(), self.dw2.len()] {
            if len != grid.steps() {
                return Err(Error::GridMismatch {
                    expected: grid.steps(),
                    found: len,
                });
            }
        }
        Ok(())
    }
}

fn cumulative(d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for x in d {
        acc += x;
        out.push(acc);
    }
    out
}

/// Recipe for `count` reproducible paths on `grid`. Paths are generated on
/// demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianPathBatch {
    pub grid: TimeGrid,
    pub seed: u64,
    pub count: usize,
}

impl BrownianPathBatch {
    pub fn path(&self, p: usize) -> BrownianPath {
        let mut rng = path_rng(self.seed, p as u64);
        BrownianPath::draw(&mut rng, self.grid.steps(), self.grid.dt())
    }

    pub fn paths(&self) -> impl Iterator<Item = BrownianPath> + '_ {
        (0..self.count).map(|p| self.path(p))
    }
}

pub fn sample_brownian(grid: TimeGrid, seed: u64, count: usize) -> Result<BrownianPathBatch> {
    if count == 0 {
        return Err(Error::InvalidInput("path count must be at least 1".into()));
    }
    Ok(BrownianPathBatch { grid, seed, count })
}

/// Euler-Maruyama solution of player `which`'s adjoint
/// `dx = [a x - l (y - k)] dt + f1 x dw1 + f2 x dw2`, `x(0) = -r (y(0) - h)`,
/// along the state values `y`.
pub fn forward_sde(
    model: &ValidatedModel,
    path: &BrownianPath,
    y: &[f64],
    which: Player,
) -> Result<Vec<f64>> {
    let grid = model.grid();
    path.check(grid)?;
    grid.check_len(y.len())?;
    let cs = model.coefficients();
    let (r, h) = match which {
        Player::One => (cs.r1, cs.h1),
        Player::Two => (cs.r2, cs.h2),
    };
    let dt = grid.dt();
    let mut x = Vec::with_capacity(y.len());
    let mut xk = -r * (y[0] - h);
    x.push(xk);
    for k in 0..grid.steps() {
        let s = model.node(k);
        let (l, target) = match which {
            Player::One => (s.l1, s.k1),
            Player::Two => (s.l2, s.k2),
        };
        xk += (s.a * xk - l * (y[k] - target)) * dt + s.f1 * xk * path.dw1[k] + s.f2 * xk * path.dw2[k];
        x.push(xk);
    }
    Ok(x)
}

/// Node values of an affine map `v -> slope v + offset`.
#[derive(Debug, Clone, Copy)]
pub struct AffineLaw<'a> {
    pub slope: &'a [f64],
    pub offset: &'a [f64],
}

/// Integrates `-dv = D dt - z dw2` backward along a sampled path, where the
/// driver `D = drift.slope v + drift.offset` already contains the `z`
/// contribution and `z = zrep.slope v + zrep.offset`.
///
/// The noise term reads `z` at the right endpoint; the driver is averaged
/// over both endpoints with an explicit predictor:
///
/// ```text
/// v*  = v_{k+1} + (D_{k+1} + s_{k+1} z_{k+1}) dt - z_{k+1} dw2_k
/// v_k = v_{k+1} + ((D_{k+1} + D_k(v*)) / 2 + s_{k+1} z_{k+1}) dt - z_{k+1} dw2_k
/// ```
///
/// The `s z dt` term makes a step the inverse of a forward Euler-Maruyama
/// step, so the recursion converges to the Ito solution of the forward
/// equation rather than the backward-Ito one. It vanishes when `z` does not
/// depend on `v`. Without noise the scheme is the second-order Heun method.
/// Returns the values and `z` on the nodes; `v_N` is exactly `terminal`.
pub fn backward_bsde_affine(
    grid: &TimeGrid,
    dw2: &[f64],
    terminal: f64,
    drift: AffineLaw<'_>,
    zrep: AffineLaw<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if dw2.len() != grid.steps() {
        return Err(Error::GridMismatch {
            expected: grid.steps(),
            found: dw2.len(),
        });
    }
    for len in [
        drift.slope.len(),
        drift.offset.len(),
        zrep.slope.len(),
        zrep.offset.len(),
    ] {
        grid.check_len(len)?;
    }
    let n = grid.steps();
    let dt = grid.dt();
    let mut v = vec![0.0; n + 1];
    let mut z = vec![0.0; n + 1];
    v[n] = terminal;
    z[n] = zrep.slope[n] * terminal + zrep.offset[n];
    for k in (0..n).rev() {
        let (vn, zn) = (v[k + 1], z[k + 1]);
        let d = drift.slope[k + 1] * vn + drift.offset[k + 1];
        let ito = zrep.slope[k + 1] * zn * dt - zn * dw2[k];
        let guess = vn + d * dt + ito;
        let d_left = drift.slope[k] * guess + drift.offset[k];
        v[k] = vn + 0.5 * (d + d_left) * dt + ito;
        z[k] = zrep.slope[k] * v[k] + zrep.offset[k];
    }
    Ok((v, z))
}

/// `value(t_k) = p_k + q1_k w1(t_k) + q2_k w2(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineState {
    pub p: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

impl AffineState {
    pub fn eval(&self, k: usize, w1: f64, w2: f64) -> f64 {
        self.p[k] + self.q1[k] * w1 + self.q2[k] * w2
    }

    /// Values along a path given cumulative `w1`, `w2`.
    pub fn along(&self, w1: &[f64], w2: &[f64]) -> Vec<f64> {
        (0..self.p.len()).map(|k| self.eval(k, w1[k], w2[k])).collect()
    }
}

/// Affine representations of the mean state, the two filtered states and
/// the state when player 1 observes `w1` and player 2 observes `w2`, with
/// the pieces of their variation-of-constants forms.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStates {
    /// Mean state `E y`.
    pub mean: Vec<f64>,
    /// `E[y | w1]`, affine in `w1`.
    pub yhat: AffineState,
    /// `E[y | w2]`, affine in `w2`.
    pub ytilde: AffineState,
    pub y: AffineState,
    /// Integrating factors `K(t, T)` of the mean, `w1`-filtered and
    /// `w2`-filtered equations.
    pub mean_factor: Vec<f64>,
    pub yhat_factor: Vec<f64>,
    pub ytilde_factor: Vec<f64>,
    /// `int_t^T K(t, s) g(s) ds` for the same three equations.
    pub mean_integral: Vec<f64>,
    pub yhat_integral: Vec<f64>,
    pub ytilde_integral: Vec<f64>,
}

/// Builds [`SplitStates`] by solving, backward from `T` with RK4, the linear
/// ODEs of the affine coefficients:
///
/// ```text
/// -m'   = (a + s1 alpha) m + s1 beta + B                       mean
/// -ph'  = (a + s1 g1) ph + (s2 alpha2 + s1 g2) m + s1 g3 + s2 beta2 + B
/// -qh1' = (a + s1 g1) qh1
/// -pt'  = (a + s2 t1) pt + (s2 t2 + s1 alpha1) m + s1 beta1 + s2 t3 + B
/// -qt2' = (a + s2 t1) qt2
/// -p'   = a p + s1 (g1 ph + g2 m + g3) + s2 (t1 pt + t2 m + t3) + B
/// -q1'  = a q1 + s1 g1 qh1
/// -q2'  = a q2 + s2 t1 qt2
/// ```
///
/// where `g*` and `t*` are the gamma and tau gains. Each filtered
/// coefficient is split into `c * K(t, T)` plus a forcing integral.
pub fn propagate_affine(model: &ValidatedModel, riccati: &RiccatiSolution) -> Result<SplitStates> {
    use crate::model::InformationPattern::W1VsW2;
    if model.pattern() != W1VsW2 {
        return Err(Error::PatternMismatch {
            expected: W1VsW2,
            found: model.pattern(),
        });
    }
    let gamma = riccati.gamma()?;
    let tau = riccati.tau()?;
    let xi = *model.terminal();
    let r = riccati;

    // 0 mean factor, 1 mean integral, 2 yhat factor, 3 yhat integral,
    // 4 ytilde factor, 5 ytilde integral, 6 p, 7 q1, 8 q2.
    let terminal = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, xi.c0, xi.c1, xi.c2];
    let sol = integrate_backward(model.grid(), terminal, |pt: Point, u| {
        let s = model.point(pt);
        let (s1, s2) = (s.s1(), s.s2());
        let forcing = s.forcing();
        let (al, a1, a2) = (r.alpha.point(pt), r.alpha1.point(pt), r.alpha2.point(pt));
        let (be, b1, b2) = (r.beta.point(pt), r.beta1.point(pt), r.beta2.point(pt));
        let (g1, g2, g3) = (gamma[0].point(pt), gamma[1].point(pt), gamma[2].point(pt));
        let (t1, t2, t3) = (tau[0].point(pt), tau[1].point(pt), tau[2].point(pt));

        let mean = xi.c0 * u[0] + u[1];
        let ph = xi.c0 * u[2] + u[3];
        let qh1 = xi.c1 * u[2];
        let pt_ = xi.c0 * u[4] + u[5];
        let qt2 = xi.c2 * u[4];

        let rate_mean = s.a + s1 * al;
        let rate_hat = s.a + s1 * g1;
        let rate_tilde = s.a + s2 * t1;
        let g_hat = (s2 * a2 + s1 * g2) * mean + s1 * g3 + s2 * b2 + forcing;
        let g_tilde = (s2 * t2 + s1 * a1) * mean + s1 * b1 + s2 * t3 + forcing;
        [
            -rate_mean * u[0],
            -(rate_mean * u[1] + s1 * be + forcing),
            -rate_hat * u[2],
            -(rate_hat * u[3] + g_hat),
            -rate_tilde * u[4],
            -(rate_tilde * u[5] + g_tilde),
            -(s.a * u[6]
                + s1 * (g1 * ph + g2 * mean + g3)
                + s2 * (t1 * pt_ + t2 * mean + t3)
                + forcing),
            -(s.a * u[7] + s1 * g1 * qh1),
            -(s.a * u[8] + s2 * t1 * qt2),
        ]
    });

    let col = |i: usize| -> Vec<f64> { sol.iter().map(|u| u[i]).collect() };
    let (mean_factor, mean_integral) = (col(0), col(1));
    let (yhat_factor, yhat_integral) = (col(2), col(3));
    let (ytilde_factor, ytilde_integral) = (col(4), col(5));
    let n = sol.len();
    let zeros = vec![0.0; n];
    let mean: Vec<f64> = (0..n)
        .map(|k| xi.c0 * mean_factor[k] + mean_integral[k])
        .collect();
    let yhat = AffineState {
        p: (0..n)
            .map(|k| xi.c0 * yhat_factor[k] + yhat_integral[k])
            .collect(),
        q1: yhat_factor.iter().map(|f| xi.c1 * f).collect(),
        q2: zeros.clone(),
    };
    let ytilde = AffineState {
        p: (0..n)
            .map(|k| xi.c0 * ytilde_factor[k] + ytilde_integral[k])
            .collect(),
        q1: zeros,
        q2: ytilde_factor.iter().map(|f| xi.c2 * f).collect(),
    };
    let y = AffineState {
        p: col(6),
        q1: col(7),
        q2: col(8),
    };
    Ok(SplitStates {
        mean,
        yhat,
        ytilde,
        y,
        mean_factor,
        yhat_factor,
        ytilde_factor,
        mean_integral,
        yhat_integral,
        ytilde_integral,
    })
}

/// Writes `paths.csv` rows (`path,t,w1,w2`) for one path.
pub fn write_path_rows(
    w: &mut dyn std::io::Write,
    grid: &TimeGrid,
    index: usize,
    path: &BrownianPath,
) -> std::io::Result<()> {
    use crate::output::real;
    let (w1, w2) = (path.w1(), path.w2());
    for k in 0..grid.len() {
        writeln!(w, "{index},{},{},{}", real(grid.t(k)), real(w1[k]), real(w2[k]))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, CoefficientSet, InformationPattern, TerminalCondition};

    #[test]
    fn quantile_symmetry() {
        assert!(normal_quantile(0.5).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.1) + normal_quantile(0.9)).abs() < 1e-14);
    }

    #[test]
    fn batches_are_reproducible_and_prefix_stable() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let a = sample_brownian(g, 7, 10).unwrap();
        let b = sample_brownian(g, 7, 100).unwrap();
        for p in 0..10 {
            assert_eq!(a.path(p), b.path(p));
        }
        assert_ne!(a.path(0), a.path(1));
        assert_ne!(a.path(0), sample_brownian(g, 8, 1).unwrap().path(0));
    }

    #[test]
    fn backward_constant_and_exponential() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let zero = vec![0.0; g.len()];
        let dw = vec![0.3; g.steps()];
        let (v, z) = backward_bsde_affine(
            &g,
            &dw,
            5.0,
            AffineLaw { slope: &zero, offset: &zero },
            AffineLaw { slope: &zero, offset: &zero },
        )
        .unwrap();
        assert!(v.iter().all(|&x| x == 5.0));
        assert!(z.iter().all(|&x| x == 0.0));

        let minus_one = vec![-1.0; g.len()];
        let (v, _) = backward_bsde_affine(
            &g,
            &dw,
            1.0,
            AffineLaw { slope: &minus_one, offset: &zero },
            AffineLaw { slope: &zero, offset: &zero },
        )
        .unwrap();
        assert!((v[0] - (-1f64).exp()).abs() < 1e-6);
        assert_eq!(v[g.steps()], 1.0);
    }

    #[test]
    fn grid_mismatch() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let short = vec![0.0; 5];
        let ok = vec![0.0; 11];
        let law = AffineLaw { slope: &ok, offset: &ok };
        assert!(matches!(
            backward_bsde_affine(&g, &short, 0.0, law, law),
            Err(Error::GridMismatch { .. })
        ));
        let m = validate(
            CoefficientSet::default(),
            TerminalCondition::default(),
            InformationPattern::SymmetricW2,
            g,
        )
        .unwrap();
        let path = sample_brownian(g, 1, 1).unwrap().path(0);
        assert!(forward_sde(&m, &path, &short, Player::One).is_err());
    }

    #[test]
    fn adjoint_is_zero_without_forcing() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = validate(
            CoefficientSet::default(),
            TerminalCondition::default(),
            InformationPattern::SymmetricW2,
            g,
        )
        .unwrap();
        let path = sample_brownian(g, 1, 1).unwrap().path(0);
        let x = forward_sde(&m, &path, &vec![0.0; 11], Player::Two).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarsening_sums_increments() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let p = sample_brownian(g, 3, 1).unwrap().path(0);
        let c = p.coarsen(4);
        assert_eq!(c.steps(), 2);
        assert_eq!(c.w2()[2], p.dw2[..4].iter().sum::<f64>() + p.dw2[4..].iter().sum::<f64>());
    }
}
