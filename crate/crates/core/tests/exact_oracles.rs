use proptest::prelude::*;
use pyrofield::exact::{cylinder_probability, forward, triangle_enumeration, yn_pmf, CylinderEvent, ExactLimits};
use pyrofield::{Boundary, NeighborPair, Params};

const TOL: f64 = 1e-12;

fn standard() -> Params {
    Params::new(0.5, 0.5, 0.75).unwrap()
}

// E[Z_n], n = 0..=10, at alpha = beta = 1/2, gamma = 3/4 from exact rational arithmetic.
const GOLDEN_EZ: [f64; 11] = [
    0.75,
    0.375,
    0.234375,
    0.1611328125,
    0.11693115234375,
    0.08788871765136719,
    0.06771693272250039,
    0.05314717665896751,
    0.042313529582997944,
    0.034075577516774744,
    0.027699167158741413,
];

#[test]
fn golden_mean_fractions() {
    let dists = forward(&standard(), &Boundary::delta(), 10, ExactLimits::default()).unwrap();
    for (n, d) in dists.iter().enumerate() {
        let ez = yn_pmf(d).mean_z();
        assert!((ez - GOLDEN_EZ[n]).abs() < TOL, "n = {n}: {ez} vs {}", GOLDEN_EZ[n]);
    }
}

#[test]
fn golden_y2_pmf() {
    let d = forward(&standard(), &Boundary::delta(), 2, ExactLimits::default()).unwrap();
    let pmf = yn_pmf(&d[2]).pmf;
    for (got, num) in pmf.iter().zip([139.0, 63.0, 45.0, 9.0]) {
        assert!((got - num / 256.0).abs() < TOL);
    }
}

#[test]
fn conditioned_cylinder_two_ways() {
    let params = standard();
    let b = Boundary::delta();
    let limits = ExactLimits::default();
    let event = CylinderEvent::new([((1, 2), false), ((1, 1), true)]).unwrap();
    let by_enumeration = cylinder_probability(&params, &b, &event, limits).unwrap();
    assert!((by_enumeration - 69.0 / 512.0).abs() < TOL);

    // Condition on S(0,2): (1,2) has left neighbour (0,2) and bottom neighbour (1,1).
    // On diagonal 2, bit 0 is (0,2) and bit 1 is (1,1).
    let d2 = &forward(&params, &b, 2, limits).unwrap()[2];
    let by_recursion: f64 = [false, true]
        .into_iter()
        .map(|eps| {
            let joint: f64 = d2
                .probs()
                .iter()
                .enumerate()
                .filter(|(c, _)| c >> 1 & 1 == 1 && (c & 1 == 1) == eps)
                .map(|(_, p)| p)
                .sum();
            (1.0 - params.kernel(NeighborPair {
                left: eps,
                bottom: true,
            })) * joint
        })
        .sum();
    assert!((by_recursion - 69.0 / 512.0).abs() < TOL);
}

#[test]
fn axis_laws_exact() {
    for (a, b, g) in [(0.6, 0.8, 0.9), (0.3, 0.2, 0.4), (1.0, 0.5, 1.0)] {
        let params = Params::new(a, b, g).unwrap();
        let dists = forward(&params, &Boundary::delta(), 12, ExactLimits::default()).unwrap();
        for (k, d) in dists.iter().enumerate() {
            assert!((d.site_marginal(0) - g * b.powi(k as i32)).abs() < TOL);
            assert!((d.site_marginal(k) - g * a.powi(k as i32)).abs() < TOL);
        }
    }
}

#[test]
fn single_diagonal_events_match_marginals() {
    let params = Params::new(0.4, 0.7, 0.8).unwrap();
    let b = Boundary::new([0, 3], [1]);
    let limits = ExactLimits::default();
    let d4 = &forward(&params, &b, 4, limits).unwrap()[4];
    // (0,4) = 1, (2,2) = 0, (4,0) = 1 are bits 0, 2 and 4 of diagonal 4.
    let masked: f64 = d4
        .probs()
        .iter()
        .enumerate()
        .filter(|(c, _)| c & 1 == 1 && c >> 2 & 1 == 0 && c >> 4 & 1 == 1)
        .map(|(_, p)| p)
        .sum();
    let event = CylinderEvent::new([((0, 4), true), ((2, 2), false), ((4, 0), true)]).unwrap();
    assert!((cylinder_probability(&params, &b, &event, limits).unwrap() - masked).abs() < TOL);
}

#[test]
fn empty_event_and_duplicates() {
    let limits = ExactLimits::default();
    let empty = CylinderEvent::new([]).unwrap();
    assert_eq!(
        cylinder_probability(&standard(), &Boundary::delta(), &empty, limits).unwrap(),
        1.0
    );
    assert!(CylinderEvent::new([((1, 1), true), ((1, 1), false)]).is_err());
}

fn params_strategy() -> impl Strategy<Value = Params> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_filter_map("admissible", |(a, b, t)| {
        let lo = a.max(b);
        let hi = (a + b).min(1.0);
        Params::new(a, b, lo + t * (hi - lo)).ok()
    })
}

fn boundary_strategy() -> impl Strategy<Value = Boundary> {
    (
        prop::collection::btree_set(0usize..5, 0..3),
        prop::collection::btree_set(0usize..5, 0..3),
    )
        .prop_map(|(x, y)| Boundary::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_enumeration(params in params_strategy(), b in boundary_strategy()) {
        let limits = ExactLimits::default();
        let joint = triangle_enumeration(&params, &b, 4, limits).unwrap();
        for d in forward(&params, &b, 4, limits).unwrap() {
            prop_assert!((d.total() - 1.0).abs() < TOL);
            for (x, y) in d.probs().iter().zip(joint.diagonal_marginal(d.n()).probs()) {
                prop_assert!((x - y).abs() < TOL);
            }
        }
    }

    #[test]
    fn cylinder_identity(params in params_strategy(), b in boundary_strategy()) {
        let limits = ExactLimits::default();
        let lhs = CylinderEvent::new([((2, 2), true), ((1, 2), false), ((1, 1), true)]).unwrap();
        let rhs = CylinderEvent::new([((1, 2), false), ((2, 1), true), ((1, 1), true)]).unwrap();
        let l = cylinder_probability(&params, &b, &lhs, limits).unwrap();
        let r = cylinder_probability(&params, &b, &rhs, limits).unwrap();
        prop_assert!((l - params.beta() * r).abs() < TOL);
    }
}
