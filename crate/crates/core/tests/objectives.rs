use nestlab_core::objectives::{
    check_convexity, check_gradient_fd, check_lipschitz, check_optimality, make_cubic_pair, make_fair_loss,
    make_hard_nonsmooth_pair, make_hard_quadratic_pair, make_huber_pair, make_huber_two_group, make_logistic,
    random_anchors, NodeFn, ObjectiveSet, DEFAULT_GRAD_TOL,
};
use nestlab_core::stack::norm;
use proptest::prelude::*;

fn single(node: NodeFn) -> ObjectiveSet {
    ObjectiveSet::custom("single", vec![node], None, None, None).unwrap()
}

fn families() -> Vec<ObjectiveSet> {
    vec![
        make_logistic(8, 3).unwrap(),
        make_huber_two_group(10.0, 4).unwrap(),
        make_huber_pair(),
        make_hard_nonsmooth_pair(0.5).unwrap(),
        make_hard_quadratic_pair(2.0).unwrap(),
        make_cubic_pair(),
        make_fair_loss(5, 1.0, &random_anchors(5, 3.0, 9)).unwrap(),
    ]
}

#[test]
fn families_pass_their_certificates() {
    for set in families() {
        let name = set.family.name().to_string();
        assert!(check_gradient_fd(&set, 40, 1) <= 1e-5, "{name}: fd");
        assert!(check_lipschitz(&set, 200, 2).passed(), "{name}: certificates {:?}", check_lipschitz(&set, 200, 2));
        assert!(check_convexity(&set, 200, 3) <= 1e-12, "{name}: convexity");
        let worst = check_optimality(&set, 200, 4).expect("optimum stored");
        assert!(worst >= -1e-10 * (1.0 + set.f_star().unwrap().abs()), "{name}: optimality {worst}");
    }
}

#[test]
fn stored_optima_are_stationary() {
    for set in families() {
        let g = set.gradient(set.x_star().unwrap());
        let scale = set.n() as f64 * set.lipschitz.unwrap_or(1.0);
        assert!(norm(&g) <= 1e3 * DEFAULT_GRAD_TOL * scale.max(1.0), "{}: {}", set.family.name(), norm(&g));
    }
}

#[test]
fn logistic_sets_are_reproducible() {
    assert_eq!(make_logistic(10, 42).unwrap(), make_logistic(10, 42).unwrap());
    assert_ne!(make_logistic(10, 42).unwrap().nodes, make_logistic(10, 43).unwrap().nodes);
    assert_eq!(make_huber_two_group(10.0, 1).unwrap().n(), 20);
}

#[test]
fn hard_quadratic_optimum_is_closed_form() {
    let set = make_hard_quadratic_pair(3.0).unwrap();
    assert_eq!(set.f_star(), Some(9.0));
    assert_eq!(set.value(&[0.0]), 9.0);
    assert!(make_hard_quadratic_pair(0.0).is_err());
}

proptest! {
    #[test]
    fn quadratic_gradient_is_residual(center in -50.0f64..50.0, x in -50.0f64..50.0) {
        let set = single(NodeFn::Quadratic { center });
        prop_assert!((set.value(&[x]) - (x - center).powi(2) / 2.0).abs() <= 1e-12 * (1.0 + x * x));
        prop_assert!((set.gradient(&[x])[0] - (x - center)).abs() <= 1e-12);
    }

    #[test]
    fn huber_gradient_is_clipped_residual(a in -20.0f64..20.0, x in -20.0f64..20.0) {
        let set = single(NodeFn::Huber { a });
        prop_assert!((set.gradient(&[x])[0] - (x - a).clamp(-1.0, 1.0)).abs() <= 1e-12);
        let r = (x - a).abs();
        let v = if r <= 1.0 { r * r / 2.0 } else { r - 0.5 };
        prop_assert!((set.value(&[x]) - v).abs() <= 1e-12 * (1.0 + r));
    }

    #[test]
    fn fair_gradient_matches_closed_form(b0 in 0.1f64..5.0, anchor in -10.0f64..10.0, x in -10.0f64..10.0) {
        let set = single(NodeFn::Fair { b0, anchor });
        let r = x - anchor;
        prop_assert!((set.gradient(&[x])[0] - r / (1.0 + r.abs() / b0)).abs() <= 1e-12);
        let v = b0 * b0 * (r.abs() / b0 - (r.abs() / b0).ln_1p());
        prop_assert!((set.value(&[x]) - v).abs() <= 1e-10 * (1.0 + v));
    }

    #[test]
    fn logistic_is_stable_and_matches_closed_form(
        c in proptest::collection::vec(-10.0f64..10.0, 3),
        x in proptest::collection::vec(-100.0f64..100.0, 3),
    ) {
        let set = single(NodeFn::Logistic { c: c.clone() });
        let t: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        let value = set.value(&x);
        prop_assert!(value.is_finite() && value >= 0.0);
        let expected = if -t > 30.0 { -t } else { (-t).exp().ln_1p() };
        prop_assert!((value - expected).abs() <= 1e-9 * (1.0 + expected));
        let s = 1.0 / (1.0 + t.exp());
        for (g, ci) in set.gradient(&x).iter().zip(&c) {
            prop_assert!((g + ci * s).abs() <= 1e-12 * (1.0 + ci.abs()));
        }
    }

    #[test]
    fn cubic_branches_join_smoothly(x in 0.999f64..1.001) {
        let set = single(NodeFn::Cubic { s: 1.0 });
        let g = |x: f64| if x > 1.0 { 4.0 * x.powi(3) + 1.5 * x * x } else { 7.5 * x * x - 2.0 };
        let dg = |x: f64| if x > 1.0 { 12.0 * x * x + 3.0 * x } else { 15.0 * x };
        prop_assert!((set.value(&[x]) - g(x)).abs() <= 1e-12);
        prop_assert!((set.gradient(&[x])[0] - dg(x)).abs() <= 1e-10);
    }
}
