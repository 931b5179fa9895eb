use lqbsde::equilibrium::{open_loop_controls, Equilibrium};
use lqbsde::model::{CoefficientSet, InformationPattern, TerminalCondition};
use lqbsde::riccati::{closed_form_alpha, coupled_residuals, RiccatiSolution};
use lqbsde::scenario::Scenario;
use lqbsde::stochastic::sample_brownian;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Draw {
    a: f64,
    b1: f64,
    ratio: f64,
    m1: f64,
    f2: f64,
    l: [f64; 2],
    k: [f64; 2],
    n: [f64; 2],
    r: [f64; 2],
    h: [f64; 2],
    c: f64,
    xi: [f64; 3],
}

fn draws() -> impl Strategy<Value = Draw> {
    (
        (-1.0f64..1.0, -1.5f64..1.5, 0.3f64..2.0, 0.3f64..3.0, -0.5f64..0.5),
        ([0.1f64..3.0, 0.1f64..3.0], [-1.0f64..1.0, -1.0f64..1.0], [-1.0f64..1.0, -1.0f64..1.0]),
        ([0.05f64..2.0, 0.05f64..2.0], [-1.0f64..1.0, -1.0f64..1.0], -1.0f64..1.0),
        [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0],
    )
        .prop_map(|((a, b1, ratio, m1, f2), (l, k, n), (r, h, c), xi)| Draw {
            a,
            b1,
            ratio,
            m1,
            f2,
            l,
            k,
            n,
            r,
            h,
            c,
            xi,
        })
}

fn scenario(d: &Draw, pattern: InformationPattern) -> Scenario {
    // b2 = ratio b1 and m2 = ratio^2 m1 keep b_i^2/m_i equal
    let cs = CoefficientSet {
        a: d.a.into(),
        b1: d.b1.into(),
        b2: (d.ratio * d.b1).into(),
        m1: d.m1.into(),
        m2: (d.ratio * d.ratio * d.m1).into(),
        f2: d.f2.into(),
        c: d.c.into(),
        k1: d.k[0].into(),
        k2: d.k[1].into(),
        n1: d.n[0].into(),
        n2: d.n[1].into(),
        l1: d.l[0].into(),
        l2: d.l[1].into(),
        r1: d.r[0],
        r2: d.r[1],
        h1: d.h[0],
        h2: d.h[1],
        ..Default::default()
    };
    Scenario {
        pattern,
        coefficients: cs,
        terminal: TerminalCondition::new(d.xi[0], d.xi[1], d.xi[2]),
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_identities(d in draws()) {
        let m = scenario(&d, InformationPattern::FullVsW2).build(Some(256)).unwrap();
        let sol = RiccatiSolution::solve(&m).unwrap();
        let (da, db) = sol.decomposition_error();
        prop_assert!(da < 1e-8 && db < 1e-8);
        prop_assert!(coupled_residuals(&m, &sol).max() < 1e-8);
        let cf = closed_form_alpha(&m).unwrap();
        for k in 0..=256 {
            prop_assert!((cf[k] - sol.alpha.value(k)).abs() < 1e-7);
            // nonpositive weights on the state make every gain nonpositive
            prop_assert!(sol.alpha.value(k) <= 0.0);
            prop_assert!(sol.alpha1.value(k) <= 0.0 && sol.alpha2.value(k) <= 0.0);
        }
        let g = sol.gamma.as_ref().unwrap();
        for k in 0..=256 {
            prop_assert!((g[0].value(k) + g[1].value(k) - sol.alpha1.value(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn realizations_are_consistent(d in draws(), seed in 0u64..100) {
        for pattern in InformationPattern::ALL {
            let mut d = d.clone();
            if pattern == InformationPattern::W1VsW2 {
                d.f2 = 0.0;
            }
            let m = scenario(&d, pattern).build(Some(64)).unwrap();
            let r = RiccatiSolution::solve(&m).unwrap();
            let eq = Equilibrium::new(&m, &r).unwrap();
            let path = sample_brownian(*m.grid(), seed, 1).unwrap().path(0);
            let p = eq.reconstruct(&path).unwrap();
            prop_assert_eq!(p.y[64], m.terminal().eval(path.w1()[64], path.w2()[64]));
            let (u1, u2) = open_loop_controls(&m, &p).unwrap();
            prop_assert_eq!(&u1, &p.u1);
            prop_assert_eq!(&u2, &p.u2);
            prop_assert!(p.y.iter().all(|v| v.is_finite()));
        }
    }
}
