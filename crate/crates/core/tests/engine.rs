use fklattice::{presets, price, value_surface, BoundaryPair, DiffusionModel, Payoff, Potential, Problem, SchemeParams};
use proptest::prelude::*;

fn strip(lower: f64, upper: f64, x0: f64, potential: Potential, n: usize) -> Problem {
    Problem::new(
        DiffusionModel::brownian(x0),
        BoundaryPair::constant(lower, upper),
        potential,
        Payoff::constant(1.0),
        SchemeParams::new(n, 2.0, 0.0).unwrap(),
    )
}

#[test]
fn constant_potential_discounts_exactly() {
    let base = price(&strip(-1.0, 1.5, 0.2, Potential::zero(), 24)).unwrap().q.re;
    for c in [0.25, 1.0, 3.0] {
        let q = price(&strip(-1.0, 1.5, 0.2, Potential::real(move |_| c), 24)).unwrap().q;
        assert!((q.re - (-c).exp() * base).abs() < 1e-14, "c={c}");
        assert_eq!(q.im, 0.0);
    }
}

#[test]
fn larger_potential_lowers_price() {
    let mut last = f64::INFINITY;
    for kappa in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let q = price(&presets::example3_with_kappa(24, kappa)).unwrap().q.re;
        assert!(q < last, "kappa={kappa}: {q} !< {last}");
        last = q;
    }
}

#[test]
fn nested_strips_order_probabilities() {
    let widths = [0.5, 0.8, 1.0, 1.5, 3.0];
    let qs: Vec<f64> = widths
        .iter()
        .map(|&w| price(&strip(-w, w, 0.0, Potential::zero(), 32)).unwrap().q.re)
        .collect();
    assert!(qs.windows(2).all(|w| w[0] < w[1]), "{qs:?}");
    assert!(qs[4] < 1.0 && qs[0] > 0.0);
}

#[test]
fn bond_surface_is_a_discounted_probability() {
    // The lower barrier lets rates reach -0.06, so the discount
    // factor may slightly exceed one.
    let cap = 0.06f64.exp();
    let s = value_surface(&presets::example2(30)).unwrap();
    for layer in &s.layers {
        for v in &layer.values {
            assert!(v.im.abs() < 1e-12);
            assert!(v.re > 0.0 && v.re <= cap, "t={} v={v}", layer.t);
        }
    }
}

#[test]
fn kac_surface_vanishes_at_barriers() {
    let s = value_surface(&presets::example1(30)).unwrap();
    for layer in &s.layers[1..s.layers.len() - 1] {
        let centre = layer.values[layer.values.len() / 2].norm();
        let edge = layer.values[0].norm().max(layer.values.last().unwrap().norm());
        assert!(edge < 0.3 * centre, "t={}: edge {edge} centre {centre}", layer.t);
    }
}

#[test]
fn surface_ends_with_payoff() {
    let p = presets::brownian_strip(16).with_payoff(Payoff::new(|x| x * x));
    let s = value_surface(&p).unwrap();
    let last = s.layers.last().unwrap();
    for (x, v) in last.nodes.iter().zip(&last.values) {
        assert_eq!(v.re, x * x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_problem_is_a_probability(
        lower in -3.0f64..-0.3,
        upper in 0.3f64..3.0,
        frac in 0.1f64..0.9,
        n in 5usize..20,
    ) {
        let x0 = lower + frac * (upper - lower);
        let q = price(&strip(lower, upper, x0, Potential::zero(), n)).unwrap().q;
        prop_assert!(q.re >= 0.0 && q.re <= 1.0, "{q}");
        prop_assert_eq!(q.im, 0.0);
    }
}
