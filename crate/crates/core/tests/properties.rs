use proptest::prelude::*;

use uaplab_core::activations::{
    classify, construct_lp_transitive, construct_transitive, leaky_shifted, ActivationSpec, Branch, BranchMap,
    ClassifyOptions, Dominance, TransitivityKind,
};
use uaplab_core::depth_dynamics::{escape, CompositionOperator};
use uaplab_core::free_space::{eta, eta_distance, rho, FormalCombination, StepFunction};
use uaplab_core::function_space::{weighted_sup_on_ball, GridFunction, GridSpec, Measure1D, Weight};
use uaplab_core::network::{fit_shallow, AffineLayer, FeedForwardNet, FitRegion, ShallowFitConfig, TreeFunction, TreeTerm};
use uaplab_core::omega_modification::{bump_transform, phi_omega};
use uaplab_core::rate_bounds::{simplex_fit, SimplexFitOptions};

fn shifted_op(b: f64) -> CompositionOperator {
    CompositionOperator::new(leaky_shifted(), vec![b]).unwrap()
}

fn two_slope(left: f64, right: f64) -> ActivationSpec {
    ActivationSpec::new(
        "two_slope",
        vec![
            Branch::new(f64::NEG_INFINITY, 0.0, BranchMap::Affine { a: left, b: 0.0 }),
            Branch::new(0.0, f64::INFINITY, BranchMap::Affine { a: right, b: 0.0 }),
        ],
    )
    .unwrap()
}

fn cubic_plus(scale: f64, lin: f64) -> ActivationSpec {
    ActivationSpec::new(
        "cubic",
        vec![Branch::new(f64::NEG_INFINITY, f64::INFINITY, BranchMap::Power { p: 3.0, scale, a: lin, b: 0.0 })],
    )
    .unwrap()
}

fn random_net(w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> FeedForwardNet {
    let hidden = AffineLayer::new(w1.iter().map(|w| vec![*w]).collect(), b1).unwrap();
    let out = AffineLayer::new(vec![w2], vec![b2]).unwrap();
    FeedForwardNet::new(vec![hidden, out], vec![true, false], leaky_shifted()).unwrap()
}

/// Corner iteration: the exact image of `[-K, K]` under an increasing
/// scalar map is `[S^n(-K), S^n(K)]`.
fn corner_escape(b: f64, k: f64) -> usize {
    let s = |x: f64| {
        let z = x + b;
        if z >= 0.0 { 1.1 * z + 0.1 } else { 0.1 * z + 0.1 }
    };
    let mut lo = -k;
    let mut n = 0;
    loop {
        lo = s(lo);
        n += 1;
        if lo > k {
            return n;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stacking_frozen_layers_is_precomposition(
        w1 in prop::collection::vec(-2.0f64..2.0, 4),
        b1 in prop::collection::vec(-2.0f64..2.0, 4),
        w2 in prop::collection::vec(-2.0f64..2.0, 4),
        b2 in -1.0f64..1.0,
        b in 0.1f64..2.0,
        n in 0usize..6,
        x in -5.0f64..5.0,
    ) {
        let net = random_net(w1, b1, w2, b2);
        let op = shifted_op(b);
        let full = net.stack(&op.frozen_layers(n)).unwrap();
        let lhs = full.eval(&[x]).unwrap()[0];
        let rhs = net.eval(&op.iterate(&[x], n)).unwrap()[0];
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        prop_assert_eq!(full.layers().len(), net.layers().len() + n);
    }

    #[test]
    fn composition_operator_is_linear(
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        b in 0.1f64..2.0,
        n in 0usize..5,
        x in -10.0f64..10.0,
    ) {
        let op = shifted_op(b);
        let f = GridFunction::scalar(f64::sin);
        let g = GridFunction::scalar(|t| t * t - 1.0);
        let combo = op.apply(&f.linear_combination(alpha, &g, beta).unwrap(), n);
        let separate = op.apply(&f, n).linear_combination(alpha, &op.apply(&g, n), beta).unwrap();
        let (l, r) = (combo.eval_scalar(x), separate.eval_scalar(x));
        prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
    }

    #[test]
    fn orbits_increase(b in 0.01f64..3.0, x in -100.0f64..100.0) {
        let op = shifted_op(b);
        let mut cur = x;
        for _ in 0..20 {
            let next = op.iterate(&[cur], 1)[0];
            prop_assert!(next > cur);
            cur = next;
        }
    }

    #[test]
    fn escape_matches_corners_and_is_monotone(b in 0.2f64..2.0, k in 0.5f64..20.0, extra in 0.0f64..5.0) {
        let op = shifted_op(b);
        let n1 = escape(&op, k, k, 10_000).unwrap().n;
        let n2 = escape(&op, k + extra, k + extra, 10_000).unwrap().n;
        prop_assert_eq!(n1, corner_escape(b, k));
        prop_assert!(n2 >= n1);
    }

    #[test]
    fn eta_is_an_isometry(r in -50.0f64..50.0, s in -50.0f64..50.0) {
        prop_assert!((eta_distance(r, s) - (r - s).abs()).abs() < 1e-9);
        let d = eta(r).linear_combination(1.0, &eta(s), -1.0).l1_norm();
        prop_assert!((d - (r - s).abs()).abs() < 1e-9);
    }

    #[test]
    fn rho_is_linear(
        a in prop::collection::vec(-2.0f64..2.0, 3),
        c in prop::collection::vec(-2.0f64..2.0, 2),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        x in -4.0f64..4.0,
    ) {
        let fs = [GridFunction::scalar(f64::sin), GridFunction::scalar(f64::cos), GridFunction::scalar(|t| t)];
        let c1 = FormalCombination::from_atoms(a.iter().zip(&fs).map(|(w, f)| (*w, f.clone())).collect()).unwrap();
        let c2 = FormalCombination::from_atoms(c.iter().zip(&fs).map(|(w, f)| (*w, f.clone())).collect()).unwrap();
        let lhs = rho(&c1.combine(alpha, &c2, beta).unwrap()).eval_scalar(x);
        let rhs = alpha * rho(&c1).eval_scalar(x) + beta * rho(&c2).eval_scalar(x);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn phi_omega_is_an_isometry(
        p in prop::collection::vec(-2.0f64..2.0, 3),
        q in prop::collection::vec(-2.0f64..2.0, 3),
        which in 0usize..4,
    ) {
        let omega = [Weight::Unit, Weight::Power { i: 1.0 }, Weight::MaxTPower { i: 2.0 }, Weight::ExpDecay { k: 1.0 }][which];
        let make = |c: Vec<f64>| GridFunction::scalar(move |x| c[0] * (c[1] * x).sin() + c[2] / (1.0 + x * x));
        let (f, g) = (make(p), make(q));
        let grid = GridSpec::line(4001, 1.0).unwrap();
        let lhs = weighted_sup_on_ball(&phi_omega(&f, &omega).sub(&phi_omega(&g, &omega)).unwrap(), &omega, 20.0, &grid);
        let rhs = weighted_sup_on_ball(&f.sub(&g).unwrap(), &Weight::Zero, 20.0, &grid);
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn bump_is_continuous_at_the_boundary(a in 0.01f64..2.0, b in 0.1f64..30.0, c in -5.0f64..5.0) {
        let g = GridFunction::scalar(move |x| c + x);
        let t = bump_transform(&g, a, b).unwrap();
        let root = b.sqrt();
        for h in [1e-4, 1e-6, 1e-8] {
            prop_assert!((t.eval_scalar(root - h) - a).abs() < 1e-6);
            prop_assert!((t.eval_scalar(root + h) - a).abs() < 1e-6 + a * (c.abs() + root) * h * 2.0);
        }
    }

    #[test]
    fn trees_are_piecewise_constant(
        terms in prop::collection::vec((-2.0f64..2.0, -3.0f64..3.0, 0.01f64..2.0), 1..6),
        x in -4.0f64..4.0,
    ) {
        let t = TreeFunction::new(terms.iter().map(|(a, b, w)| TreeTerm { a: *a, b: *b, c: b + w }).collect()).unwrap();
        let cuts = t.breakpoints();
        let gap = cuts.iter().map(|c| (c - x).abs()).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 1e-6);
        let h = gap / 2.0;
        prop_assert_eq!(t.eval(x), t.eval(x + h));
        prop_assert_eq!(t.eval(x), t.eval(x - h));
    }

    #[test]
    fn constructed_activations_classify(
        kind in 0usize..2,
        s1 in 0.1f64..3.0,
        s2 in 0.1f64..3.0,
        alpha1 in 0.05f64..0.95,
        alpha2 in 0.05f64..3.0,
    ) {
        let tilde = if kind == 0 { two_slope(s1, s2) } else { cubic_plus(s1, s2) };
        let d0 = tilde.derivative(0.0);
        prop_assume!((alpha2 - (d0 - 1.0)).abs() > 1e-6);
        let opts = ClassifyOptions::default();
        let sigma = construct_transitive(&tilde, alpha1, alpha2).unwrap();
        let v = classify(&sigma, &opts).unwrap();
        prop_assert_eq!(v.kind, TransitivityKind::Transitive);
        prop_assert_eq!(v.dominance, Dominance::Above);

        let lp = construct_lp_transitive(&tilde, alpha1).unwrap();
        let v = classify(&lp, &opts).unwrap();
        prop_assert!(matches!(v.kind, TransitivityKind::LpTransitiveOnly | TransitivityKind::Transitive));
    }
}

#[test]
fn fits_are_deterministic_and_prefix_consistent() {
    let target = GridFunction::scalar(|x| x.sin());
    let region = FitRegion::centered(1, 3.0);
    let cfg = ShallowFitConfig { width: 32, seed: 17, ..ShallowFitConfig::default() };
    let a = fit_shallow(&target, &leaky_shifted(), &region, &cfg).unwrap();
    let b = fit_shallow(&target, &leaky_shifted(), &region, &cfg).unwrap();
    assert_eq!(a.net, b.net);
    assert_eq!(a.residual, b.residual);
    let wider = fit_shallow(&target, &leaky_shifted(), &region, &ShallowFitConfig { width: 48, ..cfg }).unwrap();
    assert_eq!(&wider.net.layers()[0].matrix[..32], &a.net.layers()[0].matrix[..]);
    assert_eq!(&wider.net.layers()[0].bias[..32], &a.net.layers()[0].bias[..]);
}

/// Two-atom simplex: brute force over the segment agrees with the solver,
/// and the best-so-far history never increases.
#[test]
fn simplex_fit_matches_brute_force() {
    let mu = [Measure1D::standard_gaussian()];
    let nodes = 2000;
    let basis = [StepFunction::indicator(-1.0, 1.0, 1.0).to_grid_function(), GridFunction::scalar(|x| x.tanh())];
    for (k, target) in [
        GridFunction::scalar(|x| 0.3 * (x.abs() < 1.0) as u8 as f64 + 0.7 * x.tanh()),
        GridFunction::scalar(|x| (-x * x).exp()),
        GridFunction::scalar(|x| x),
    ]
    .into_iter()
    .enumerate()
    {
        let fit = simplex_fit(&basis, &target, &mu, &SimplexFitOptions { max_iter: 500, quad_nodes: nodes }).unwrap();
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]), "case {k}");
        let s: f64 = fit.coefficients.iter().sum();
        assert!((s - 1.0).abs() < 1e-9 && fit.coefficients.iter().all(|c| *c >= -1e-12));
        let (xs, w) = mu[0].quadrature(nodes);
        let resid = |a: f64| -> f64 {
            xs.iter()
                .map(|x| w * (a * basis[0].eval_scalar(*x) + (1.0 - a) * basis[1].eval_scalar(*x) - target.eval_scalar(*x)).abs())
                .sum()
        };
        let brute = (0..=10_000).map(|i| resid(i as f64 / 10_000.0)).fold(f64::INFINITY, f64::min);
        assert!(fit.residual <= brute + 1e-4, "case {k}: {} vs {}", fit.residual, brute);
    }
}
