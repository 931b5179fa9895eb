use lqbsde::model::{Player, TimeGrid};
use lqbsde::scenario::Scenario;
use lqbsde::stochastic::{backward_bsde_affine, forward_sde, sample_brownian, AffineLaw};
use lqbsde::verification::Estimate;

#[test]
fn increments_have_the_right_law() {
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let batch = sample_brownian(grid, 99, 20000).unwrap();
    let (mut a, mut b, mut sq, mut cross) = (vec![], vec![], vec![], vec![]);
    for p in batch.paths() {
        a.push(p.dw1[3]);
        b.push(p.dw2[11]);
        sq.push(p.dw1[5] * p.dw1[5]);
        cross.push(p.dw1[7] * p.dw2[7]);
    }
    let dt = grid.dt();
    assert!(Estimate::from_samples(&a).within(0.0, 4.0));
    assert!(Estimate::from_samples(&b).within(0.0, 4.0));
    assert!(Estimate::from_samples(&sq).within(dt, 4.0));
    assert!(Estimate::from_samples(&cross).within(0.0, 4.0));
}

#[test]
fn paths_are_reproducible_and_distinct() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let b1 = sample_brownian(grid, 5, 4).unwrap();
    let b2 = sample_brownian(grid, 5, 4).unwrap();
    assert_eq!(b1.path(3), b2.path(3));
    assert_ne!(b1.path(0), b1.path(1));
    assert_ne!(b1.path(0), sample_brownian(grid, 6, 1).unwrap().path(0));
    assert!(sample_brownian(grid, 5, 0).is_err());
}

#[test]
fn coarsening_keeps_endpoints() {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let p = sample_brownian(grid, 1, 1).unwrap().path(0);
    let c = p.coarsen(8);
    assert_eq!(c.steps(), 8);
    assert!((c.w1()[8] - p.w1()[64]).abs() < 1e-14);
    assert!((c.w2()[4] - p.w2()[32]).abs() < 1e-14);
}

// with y = k1 = 0 the adjoint is geometric Brownian motion
#[test]
fn forward_adjoint_converges_strongly_to_gbm() {
    let fine = TimeGrid::new(1.0, 4096).unwrap();
    let batch = sample_brownian(fine, 17, 200).unwrap();
    let (a, f2, r1, h1) = (0.4, 0.5, 1.0, 2.0);
    let err = |n: usize| {
        let mut sc = Scenario::default();
        sc.coefficients.a = a.into();
        sc.coefficients.f2 = f2.into();
        sc.coefficients.r1 = r1;
        sc.coefficients.h1 = h1;
        sc.coefficients.r2 = 1.0;
        let m = sc.build(Some(n)).unwrap();
        let mut total = 0.0;
        for p in batch.paths() {
            let path = p.coarsen(4096 / n);
            let y = vec![0.0; n + 1];
            let x = forward_sde(&m, &path, &y, Player::One).unwrap();
            let w = path.w2()[n];
            let exact = r1 * h1 * ((a - 0.5 * f2 * f2) + f2 * w).exp();
            total += (x[n] - exact).abs();
        }
        total / 200.0
    };
    let (e1, e2) = (err(64), err(1024));
    assert!(e2 < 0.02, "{e2}");
    // order one half or better
    assert!(e1 / e2 > 3.0, "{e1} {e2}");
}

// -dv = d v dt - s v dw, v(T) = 1 is the time reversal of
// dv = -d v dt + s v dw, whose solution gives v(0) = exp((d + s^2/2) T - s w(T)).
#[test]
fn backward_integrator_inverts_forward_ito_solution() {
    let fine = TimeGrid::new(1.0, 8192).unwrap();
    let batch = sample_brownian(fine, 23, 100).unwrap();
    let (d, s) = (0.3, 0.4);
    let err = |n: usize| {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let slope = vec![d; n + 1];
        let zero = vec![0.0; n + 1];
        let zs = vec![s; n + 1];
        let mut total = 0.0;
        for p in batch.paths() {
            let path = p.coarsen(8192 / n);
            let (v, z) = backward_bsde_affine(
                &grid,
                &path.dw2,
                1.0,
                AffineLaw { slope: &slope, offset: &zero },
                AffineLaw { slope: &zs, offset: &zero },
            )
            .unwrap();
            assert_eq!(v[n], 1.0);
            assert!((z[0] - s * v[0]).abs() < 1e-15);
            let exact = ((d + 0.5 * s * s) - s * path.w2()[n]).exp();
            total += (v[0] - exact).abs();
        }
        total / 100.0
    };
    let (e1, e2) = (err(128), err(2048));
    assert!(e2 < 0.01, "{e2}");
    assert!(e1 / e2 > 3.0, "{e1} {e2}");
}

#[test]
fn backward_integrator_without_noise_is_second_order() {
    let err = |n: usize| {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let t = grid.times();
        let slope: Vec<f64> = t.iter().map(|t| 1.0 + t).collect();
        let offset: Vec<f64> = t.iter().map(|t| t.sin()).collect();
        let zero = vec![0.0; n + 1];
        let quiet = vec![0.0; n];
        let (v, _) = backward_bsde_affine(
            &grid,
            &quiet,
            0.5,
            AffineLaw { slope: &slope, offset: &offset },
            AffineLaw { slope: &zero, offset: &zero },
        )
        .unwrap();
        v[0]
    };
    // -v' = (1 + t) v + sin t, v(1) = 0.5, reference from 2^16 steps
    let reference = err(1 << 16);
    let (e1, e2) = ((err(50) - reference).abs(), (err(100) - reference).abs());
    let ratio = e1 / e2;
    assert!(ratio > 3.6 && ratio < 4.4, "{ratio}");
}

#[test]
fn backward_integrator_solves_linear_decay() {
    // -v' = -v, v(1) = 1, so v(0) = e^-1
    let n = 1000;
    let grid = TimeGrid::new(1.0, n).unwrap();
    let minus = vec![-1.0; n + 1];
    let zero = vec![0.0; n + 1];
    let (v, _) = backward_bsde_affine(
        &grid,
        &vec![0.0; n],
        1.0,
        AffineLaw { slope: &minus, offset: &zero },
        AffineLaw { slope: &zero, offset: &zero },
    )
    .unwrap();
    assert_eq!(v[n], 1.0);
    assert!((v[0] - (-1.0f64).exp()).abs() < 1e-3, "{}", v[0]);
}
