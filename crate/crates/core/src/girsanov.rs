//! Exponential densities that turn noisy observations of the form
//! `dW2 = h dt + dw2`, or `dW = hbar dt + sigma dw`, into Brownian motions.
//!
//! The state `x` observed through `h` is supplied as a path on the grid;
//! it is not simulated here.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::output::real;
use crate::stochastic::{BrownianPath, BrownianPathBatch};
use crate::verification::Estimate;

/// Bounded observation coefficient `(t, x) -> value`.
pub type ObservationFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Tolerance for `sigma sigma^T = I`.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct GirsanovScenario {
    /// Drift of the single noisy channel `dW2 = h dt + dw2`.
    pub h: ObservationFn,
    /// Drifts of the two mixed channels `dW = hbar dt + sigma dw`.
    pub hbar: [ObservationFn; 2],
    sigma: Matrix2<f64>,
    sigmabar: Matrix2<f64>,
    orthogonal: bool,
}

impl fmt::Debug for GirsanovScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GirsanovScenario")
            .field("sigma", &self.sigma)
            .field("sigmabar", &self.sigmabar)
            .field("orthogonal", &self.orthogonal)
            .finish_non_exhaustive()
    }
}

fn zero_fn() -> ObservationFn {
    Arc::new(|_, _| 0.0)
}

impl GirsanovScenario {
    /// `sigma` given row-major. With `orthogonal` set, `sigma sigma^T` must
    /// equal the identity; that is what keeps `W` a Brownian motion after
    /// the change of measure.
    pub fn new(sigma: [[f64; 2]; 2], orthogonal: bool) -> Result<Self> {
        let s = Matrix2::new(sigma[0][0], sigma[0][1], sigma[1][0], sigma[1][1]);
        let det = s.determinant();
        let scale = s.norm_squared().max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale {
            return Err(Error::SingularMatrix { det });
        }
        let sigmabar = s.try_inverse().ok_or(Error::SingularMatrix { det })?;
        if orthogonal {
            let deviation = (s * s.transpose() - Matrix2::identity()).abs().max();
            if deviation > ORTHOGONALITY_TOL {
                return Err(Error::NotOrthogonal { deviation });
            }
        }
        Ok(Self {
            h: zero_fn(),
            hbar: [zero_fn(), zero_fn()],
            sigma: s,
            sigmabar,
            orthogonal,
        })
    }

    pub fn with_h(mut self, h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.h = Arc::new(h);
        self
    }

    pub fn with_hbar(
        mut self,
        hbar1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        hbar2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.hbar = [Arc::new(hbar1), Arc::new(hbar2)];
        self
    }

    pub fn sigma(&self) -> [[f64; 2]; 2] {
        rows(&self.sigma)
    }

    pub fn sigmabar(&self) -> [[f64; 2]; 2] {
        rows(&self.sigmabar)
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// `cbar = sigmabar hbar(t, x)`.
    pub fn cbar(&self, t: f64, x: f64) -> [f64; 2] {
        let hb = [(self.hbar[0])(t, x), (self.hbar[1])(t, x)];
        let sb = &self.sigmabar;
        [
            sb[(0, 0)] * hb[0] + sb[(0, 1)] * hb[1],
            sb[(1, 0)] * hb[0] + sb[(1, 1)] * hb[1],
        ]
    }
}

fn rows(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// A density process and its reciprocal, each computed from its own formula.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    pub rho: Vec<f64>,
    pub inverse: Vec<f64>,
}

impl DensityPath {
    /// `max_k |rho_k inverse_k - 1|`.
    pub fn reciprocal_error(&self) -> f64 {
        self.rho
            .iter()
            .zip(&self.inverse)
            .map(|(a, b)| (a * b - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn terminal(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }
}

fn check_path(grid: &TimeGrid, path: &BrownianPath, x: &[f64]) -> Result<()> {
    if path.steps() != grid.steps() {
        return Err(Error::GridMismatch {
            expected: grid.steps(),
            found: path.steps(),
        });
    }
    if x.len() != grid.len() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `rho1 = exp{-int h dw2 - 1/2 int h^2}` and
/// `rho1^{-1} = exp{int h dW2 - 1/2 int h^2}` with `dW2 = h dt + dw2`; all
/// integrands at the left endpoint.
pub fn density_rho1(
    scn: &GirsanovScenario,
    grid: &TimeGrid,
    path: &BrownianPath,
    x: &[f64],
) -> Result<DensityPath> {
    check_path(grid, path, x)?;
    let dt = grid.dt();
    let n = grid.steps();
    let (mut log_rho, mut log_inv) = (0.0, 0.0);
    let mut rho = Vec::with_capacity(n + 1);
    let mut inverse = Vec::with_capacity(n + 1);
    rho.push(1.0);
    inverse.push(1.0);
    for k in 0..n {
        let h = (scn.h)(grid.t(k), x[k]);
        let dw2_obs = h * dt + path.dw2[k];
        log_rho += -h * path.dw2[k] - 0.5 * h * h * dt;
        log_inv += h * dw2_obs - 0.5 * h * h * dt;
        rho.push(log_rho.exp());
        inverse.push(log_inv.exp());
    }
    Ok(DensityPath { rho, inverse })
}

/// `rho2 = exp{-int cbar* dw - 1/2 int |cbar|^2}` and
/// `rho2^{-1} = exp{int cbar* sigmabar dW - 1/2 int |cbar|^2}` with
/// `dW = hbar dt + sigma dw`.
pub fn density_rho2(
    scn: &GirsanovScenario,
    grid: &TimeGrid,
    path: &BrownianPath,
    x: &[f64],
) -> Result<DensityPath> {
    check_path(grid, path, x)?;
    let dt = grid.dt();
    let n = grid.steps();
    let (s, sb) = (&scn.sigma, &scn.sigmabar);
    let (mut log_rho, mut log_inv) = (0.0, 0.0);
    let mut rho = Vec::with_capacity(n + 1);
    let mut inverse = Vec::with_capacity(n + 1);
    rho.push(1.0);
    inverse.push(1.0);
    for k in 0..n {
        let t = grid.t(k);
        let hb = [(scn.hbar[0])(t, x[k]), (scn.hbar[1])(t, x[k])];
        let c = scn.cbar(t, x[k]);
        let dw = [path.dw1[k], path.dw2[k]];
        let dbig = [
            hb[0] * dt + s[(0, 0)] * dw[0] + s[(0, 1)] * dw[1],
            hb[1] * dt + s[(1, 0)] * dw[0] + s[(1, 1)] * dw[1],
        ];
        let rotated = [
            sb[(0, 0)] * dbig[0] + sb[(0, 1)] * dbig[1],
            sb[(1, 0)] * dbig[0] + sb[(1, 1)] * dbig[1],
        ];
        let csq = c[0] * c[0] + c[1] * c[1];
        log_rho += -(c[0] * dw[0] + c[1] * dw[1]) - 0.5 * csq * dt;
        log_inv += c[0] * rotated[0] + c[1] * rotated[1] - 0.5 * csq * dt;
        rho.push(log_rho.exp());
        inverse.push(log_inv.exp());
    }
    Ok(DensityPath { rho, inverse })
}

/// Linear maps between the `z`'s of the original equation and the `Z`'s of
/// the equation driven by the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationTransform {
    pub sigmabar: [[f64; 2]; 2],
}

impl ObservationTransform {
    /// `Z1 = sb11 z1 + sb21 z2`, `Z2 = sb12 z1 + sb22 z2`.
    pub fn rotate(&self, z: [f64; 2]) -> [f64; 2] {
        let sb = &self.sigmabar;
        [
            sb[0][0] * z[0] + sb[1][0] * z[1],
            sb[0][1] * z[0] + sb[1][1] * z[1],
        ]
    }

    /// Inverse of [`Self::rotate`], by the explicit 2x2 formula.
    pub fn unrotate(&self, big: [f64; 2]) -> [f64; 2] {
        let sb = &self.sigmabar;
        let det = sb[0][0] * sb[1][1] - sb[0][1] * sb[1][0];
        [
            (sb[1][1] * big[0] - sb[1][0] * big[1]) / det,
            (sb[0][0] * big[1] - sb[0][1] * big[0]) / det,
        ]
    }

    /// Extra driver term when the single channel `W2` replaces `w2`: `h z2`.
    pub fn single_channel_shift(h: f64, z2: f64) -> f64 {
        h * z2
    }

    /// Extra driver term `cbar1 z1 + cbar2 z2`, with the `z`'s recovered
    /// from `Z`.
    pub fn drift_shift(&self, cbar: [f64; 2], big: [f64; 2]) -> f64 {
        let z = self.unrotate(big);
        cbar[0] * z[0] + cbar[1] * z[1]
    }

    /// Diffusion of `x` against `dW1`, `dW2` when `dx` has `delta1 dw1 + delta2 dw2`.
    pub fn state_diffusion(&self, delta: [f64; 2]) -> [f64; 2] {
        self.rotate(delta)
    }

    /// Drift correction of `x`: `-(delta1 cbar1 + delta2 cbar2)`.
    pub fn state_drift_shift(delta: [f64; 2], cbar: [f64; 2]) -> f64 {
        -(delta[0] * cbar[0] + delta[1] * cbar[1])
    }
}

pub fn transform_observation(scn: &GirsanovScenario) -> ObservationTransform {
    ObservationTransform {
        sigmabar: scn.sigmabar(),
    }
}

/// Monte-Carlo means of `rho1(T)`, `rho2(T)` and the worst reciprocal error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleReport {
    pub rho1: Estimate,
    pub rho2: Estimate,
    pub reciprocal_error: f64,
}

impl MartingaleReport {
    pub fn passes(&self) -> bool {
        self.rho1.within(1.0, 3.0) && self.rho2.within(1.0, 3.0) && self.reciprocal_error <= 1e-12
    }
}

/// Runs both densities over a batch; `x_path` supplies the observed state
/// along each Brownian path.
pub fn martingale_check(
    scn: &GirsanovScenario,
    batch: &BrownianPathBatch,
    x_path: impl Fn(&BrownianPath) -> Vec<f64> + Sync,
) -> Result<MartingaleReport> {
    let grid = &batch.grid;
    let per_path = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let path = batch.path(p);
            let x = x_path(&path);
            let r1 = density_rho1(scn, grid, &path, &x)?;
            let r2 = density_rho2(scn, grid, &path, &x)?;
            Ok((
                r1.terminal(),
                r2.terminal(),
                r1.reciprocal_error().max(r2.reciprocal_error()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let b: Vec<f64> = per_path.iter().map(|v| v.1).collect();
    Ok(MartingaleReport {
        rho1: Estimate::from_samples(&a),
        rho2: Estimate::from_samples(&b),
        reciprocal_error: per_path.iter().map(|v| v.2).fold(0.0, f64::max),
    })
}

/// Writes `path,t,rho1,rho2` rows for the first `count` paths of a batch.
pub fn write_girsanov_csv(
    w: &mut dyn Write,
    scn: &GirsanovScenario,
    batch: &BrownianPathBatch,
    count: usize,
    x_path: impl Fn(&BrownianPath) -> Vec<f64>,
) -> io::Result<()> {
    writeln!(w, "path,t,rho1,rho2")?;
    let grid = &batch.grid;
    for p in 0..count.min(batch.count) {
        let path = batch.path(p);
        let x = x_path(&path);
        let r1 = density_rho1(scn, grid, &path, &x).map_err(io::Error::other)?;
        let r2 = density_rho2(scn, grid, &path, &x).map_err(io::Error::other)?;
        for k in 0..grid.len() {
            writeln!(
                w,
                "{p},{},{},{}",
                real(grid.t(k)),
                real(r1.rho[k]),
                real(r2.rho[k])
            )?;
        }
    }
    Ok(())
}

/// Bounded observation drifts driven by `x = w1`, with `sigma` a rotation by
/// 0.3 rad. Used when no other setting is given.
pub fn default_scenario() -> GirsanovScenario {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    GirsanovScenario::new([[c, -s], [s, c]], true)
        .expect("rotation is orthogonal")
        .with_h(|_, x| 0.8 * x.tanh())
        .with_hbar(|t, x| 0.5 * (x + t).cos(), |_, x| 0.6 * x.sin())
}

/// `x = w1`, the state path paired with [`default_scenario`].
pub fn w1_state(path: &BrownianPath) -> Vec<f64> {
    path.w1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::sample_brownian;

    #[test]
    fn zero_drift_gives_unit_density() {
        let scn = GirsanovScenario::new([[1.0, 0.0], [0.0, 1.0]], true).unwrap();
        let g = TimeGrid::new(1.0, 32).unwrap();
        let b = sample_brownian(g.clone(), 1, 1).unwrap();
        let p = b.path(0);
        let x = p.w1();
        assert!(density_rho1(&scn, &g, &p, &x).unwrap().rho.iter().all(|&v| v == 1.0));
        assert!(density_rho2(&scn, &g, &p, &x).unwrap().rho.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_singular_and_non_orthogonal() {
        assert!(matches!(
            GirsanovScenario::new([[1.0, 2.0], [2.0, 4.0]], false),
            Err(Error::SingularMatrix { .. })
        ));
        assert!(matches!(
            GirsanovScenario::new([[2.0, 0.0], [0.0, 1.0]], true),
            Err(Error::NotOrthogonal { .. })
        ));
        assert!(GirsanovScenario::new([[2.0, 0.0], [0.0, 1.0]], false).is_ok());
    }

    #[test]
    fn quarter_turn() {
        let scn = GirsanovScenario::new([[0.0, -1.0], [1.0, 0.0]], true).unwrap();
        let tr = transform_observation(&scn);
        let big = tr.rotate([2.0, 3.0]);
        assert_eq!(big, [-3.0, 2.0]);
        assert_eq!(tr.unrotate(big), [2.0, 3.0]);
    }

    #[test]
    fn grid_mismatch() {
        let scn = default_scenario();
        let g = TimeGrid::new(1.0, 8).unwrap();
        let b = sample_brownian(g.clone(), 1, 1).unwrap();
        assert!(density_rho1(&scn, &g, &b.path(0), &[0.0; 3]).is_err());
    }
}
