use proptest::prelude::*;
use rmwave_core::model::*;

fn interior_params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..10.0, 1.05f64..10.0, 0.0f64..1.0).prop_map(|(alpha, beta, t)| {
        // gamma strictly above the interior threshold 1/(beta - 1)
        let g0 = 1.0 / (beta - 1.0);
        let gamma = g0 * (1.0 + 1e-3) + t * 10.0;
        ModelParams::kinetic(alpha, beta, gamma).unwrap()
    })
}

fn max_real_part(p: &ModelParams) -> f64 {
    let ev = eigenvalues_2x2(&interior_jacobian(p).unwrap());
    ev[0].re.max(ev[1].re)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn equilibria_zero_the_field(p in interior_params()) {
        let eqs = equilibria(&p);
        prop_assert_eq!(eqs.len(), 3);
        for e in eqs {
            let (f, g) = kinetic_rhs(&p, e.location).unwrap();
            let scale = 1.0f64.max(e.location.v).max(p.alpha * p.gamma * p.gamma);
            prop_assert!(f.abs() <= 1e-12 * scale && g.abs() <= 1e-12 * scale, "{} {}", f, g);
        }
    }

    #[test]
    fn classification_follows_discriminant(p in interior_params()) {
        let e = classify_interior(&p).unwrap();
        let disc = p.gamma * (p.beta - 1.0) - (p.beta + 1.0);
        if disc < -1e-9 {
            prop_assert_eq!(e.classification, Stability::Sink);
        } else if disc > 1e-9 {
            prop_assert_eq!(e.classification, Stability::Source);
        }
    }

    #[test]
    fn dulac_window_iff_below_hopf(alpha in 0.05f64..10.0, beta in 1.05f64..10.0, gamma in 0.01f64..20.0) {
        let p = ModelParams::kinetic(alpha, beta, gamma).unwrap();
        let disc = gamma * (beta - 1.0) - (beta + 1.0);
        prop_assume!(disc.abs() > 1e-9);
        prop_assert_eq!(dulac_exponent_range(&p).is_some(), disc < 0.0);
    }

    #[test]
    fn jacobian_matches_differences(alpha in 0.1f64..5.0, beta in 1.1f64..5.0, gamma in 0.5f64..5.0,
                                    a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = ModelParams::kinetic(alpha, beta, gamma).unwrap();
        let r = beta * (gamma + 1.0) + 1.0;
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        let s = PlanarState::new(a * r / beta, b * r);
        let j = jacobian(&p, s).unwrap();
        let h = 1e-6;
        let rhs = |u: f64, v: f64| kinetic_rhs(&p, PlanarState::new(u, v)).unwrap();
        let du = (rhs(s.u + h, s.v), rhs(s.u - h, s.v));
        let dv = (rhs(s.u, s.v + h), rhs(s.u, s.v - h));
        let fd = [
            [(du.0 .0 - du.1 .0) / (2.0 * h), (dv.0 .0 - dv.1 .0) / (2.0 * h)],
            [(du.0 .1 - du.1 .1) / (2.0 * h), (dv.0 .1 - dv.1 .1) / (2.0 * h)],
        ];
        for i in 0..2 {
            for k in 0..2 {
                prop_assert!((j[i][k] - fd[i][k]).abs() <= 1e-6, "{:?} {:?}", j, fd);
            }
        }
    }

    #[test]
    fn dulac_matches_differences(u in 0.1f64..10.0, v in 0.1f64..10.0, plus in any::<bool>()) {
        let p = ModelParams::kinetic(1.0, 3.0, 1.6).unwrap();
        let variant = if plus { DulacExponent::XiPlusOne } else { DulacExponent::XiMinusOne };
        let k = variant.power(0.5);
        let phi = |u: f64, v: f64| (1.0 + u) / u * v.powf(k);
        let pf = |u: f64, v: f64| phi(u, v) * prey_rate(&p, u, v);
        let pg = |u: f64, v: f64| phi(u, v) * predator_rate(&p, u, v);
        let h = 1e-6;
        let fd = (pf(u + h, v) - pf(u - h, v)) / (2.0 * h) + (pg(u, v + h) - pg(u, v - h)) / (2.0 * h);
        let exact = dulac_divergence(&p, 0.5, PlanarState::new(u, v), variant).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{} {}", fd, exact);
    }

    #[test]
    fn dulac_homogeneous_in_v(u in 0.1f64..10.0, v in 0.1f64..10.0, lambda in 0.1f64..10.0) {
        let p = ModelParams::kinetic(1.0, 3.0, 1.6).unwrap();
        for variant in [DulacExponent::XiPlusOne, DulacExponent::XiMinusOne] {
            let a = dulac_divergence(&p, 0.5, PlanarState::new(u, v), variant).unwrap();
            let b = dulac_divergence(&p, 0.5, PlanarState::new(u, lambda * v), variant).unwrap();
            let expect = lambda.powf(variant.power(0.5)) * a;
            prop_assert!((b - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }
}

#[test]
fn hopf_threshold_by_bisection() {
    for beta in [1.5, 2.0, 3.0, 5.0] {
        let base = ModelParams::kinetic(1.0, beta, 1.0).unwrap();
        let (mut lo, mut hi) = (1.0 / (beta - 1.0) * 1.0001, 50.0);
        assert!(max_real_part(&base.with_gamma(lo)) < 0.0);
        assert!(max_real_part(&base.with_gamma(hi)) > 0.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if max_real_part(&base.with_gamma(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let star = (beta + 1.0) / (beta - 1.0);
        assert!((0.5 * (lo + hi) - star).abs() <= 1e-8, "beta {beta}");
        assert_eq!(hopf_gamma(&base).unwrap(), star);
    }
}

#[test]
fn purely_imaginary_at_threshold() {
    let p = ModelParams::kinetic(1.0, 3.0, 2.0).unwrap();
    let e = classify_interior(&p).unwrap();
    let ev = e.eigenvalues;
    for (z, sign) in ev.iter().zip([1.0, -1.0]) {
        assert!(z.re.abs() <= 1e-10);
        assert!((z.im.abs() - 1.0).abs() <= 1e-10, "{sign} {z}");
    }
    assert!((ev[0].im + ev[1].im).abs() <= 1e-10);
}

#[test]
fn dulac_grid_negative_for_lower_exponent() {
    let p = ModelParams::kinetic(1.0, 3.0, 1.6).unwrap();
    let (lo, hi) = dulac_exponent_range(&p).unwrap();
    assert!(lo < 0.5 && 0.5 < hi);
    let grid = |variant| {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..200 {
            for k in 0..200 {
                let u = 0.1 + 9.9 * i as f64 / 199.0;
                let v = 0.1 + 9.9 * k as f64 / 199.0;
                worst = worst.max(dulac_divergence(&p, 0.5, PlanarState::new(u, v), variant).unwrap());
            }
        }
        worst
    };
    assert!(grid(DulacExponent::XiMinusOne) < 0.0);
    // the upper exponent is not negative on the whole grid
    assert!(grid(DulacExponent::XiPlusOne) > 0.0);
}
