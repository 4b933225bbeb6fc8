use nlhodge::cochain::to_cell_field;
use nlhodge::complex::ComplexBuilder;
use nlhodge::{ops, Cochain, Complex, Layout, MetricSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(dims: &[usize], periodic: &[bool]) -> Complex {
    let h: Vec<f64> = dims.iter().map(|&d| 1.0 / d as f64).collect();
    ComplexBuilder::new(dims).spacings(&h).periodic(periodic).build().unwrap()
}

fn dyadic(cx: &Complex, p: usize, seed: u64) -> Cochain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..cx.num_cells(p)).map(|_| rng.gen_range(-256i32..=256) as f64 / 128.0).collect();
    Cochain::from_values(cx, p, vals).unwrap()
}

fn grid_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<bool>)> {
    prop_oneof![
        (prop::collection::vec(prop::sample::select(vec![2usize, 4, 8]), 2), prop::collection::vec(any::<bool>(), 2)),
        (prop::collection::vec(prop::sample::select(vec![2usize, 4]), 3), prop::collection::vec(any::<bool>(), 3)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_vanishes((dims, periodic) in grid_strategy(), seed in any::<u64>()) {
        let cx = grid(&dims, &periodic);
        for p in 0..cx.dim() - 1 {
            let c = dyadic(&cx, p, seed);
            prop_assert_eq!(ops::d(&cx, &ops::d(&cx, &c).unwrap()).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn star_star_is_signed_identity((dims, periodic) in grid_strategy(), seed in any::<u64>()) {
        let cx = grid(&dims, &periodic);
        let n = cx.dim();
        for p in 0..=n {
            let c = dyadic(&cx, p, seed ^ p as u64);
            let sign = if p * (n - p) % 2 == 0 { 1.0 } else { -1.0 };
            let ss = ops::star(&cx, &ops::star(&cx, &c));
            prop_assert_eq!(ss.layout(), Layout::Primal);
            for (a, b) in ss.values().iter().zip(c.values()) {
                prop_assert_eq!(*a, sign * b);
            }
        }
    }

    #[test]
    fn codifferential_is_adjoint_on_tori(dims in prop::collection::vec(prop::sample::select(vec![4usize, 6]), 2..=3), seed in any::<u64>()) {
        let periodic = vec![true; dims.len()];
        let cx = grid(&dims, &periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in 1..=cx.dim() {
            let a = Cochain::from_values(&cx, p - 1, (0..cx.num_cells(p - 1)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let b = Cochain::from_values(&cx, p, (0..cx.num_cells(p)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let da = ops::d(&cx, &a).unwrap();
            let lhs = ops::inner(&cx, &da, &b).unwrap();
            let rhs = ops::inner(&cx, &a, &ops::codifferential(&cx, &b).unwrap()).unwrap();
            let scale = ops::norm(&cx, &da).max(1e-300) * ops::norm(&cx, &b);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "p={} lhs={} rhs={}", p, lhs, rhs);
        }
    }

    #[test]
    fn inner_product_is_symmetric_and_positive((dims, periodic) in grid_strategy(), seed in any::<u64>()) {
        let cx = grid(&dims, &periodic);
        for p in 0..=cx.dim() {
            let a = dyadic(&cx, p, seed);
            let b = dyadic(&cx, p, seed.wrapping_add(1));
            let ab = ops::inner(&cx, &a, &b).unwrap();
            let ba = ops::inner(&cx, &b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
            prop_assert!(ops::inner(&cx, &a, &a).unwrap() >= 0.0);
        }
    }
}

#[test]
fn codifferential_of_gradient_is_minus_laplacian() {
    let cx = grid(&[16, 16], &[false, false]);
    let f = Cochain::from_fn(&cx, 0, |_, x| x[0] * x[0] + 3.0 * x[1] * x[1]);
    let lap = ops::codifferential(&cx, &ops::d(&cx, &f).unwrap()).unwrap();
    for v in 0..cx.num_vertices() {
        if cx.is_interior_cell(0, v, 1) {
            assert!((lap.values()[v] + 8.0).abs() < 1e-9, "{}", lap.values()[v]);
        }
    }
}

#[test]
fn adjointness_holds_on_the_round_sphere() {
    let cx = ComplexBuilder::new(&[12, 12])
        .spacings(&[0.15, 0.4])
        .origin(&[0.7, 0.0])
        .metric(MetricSpec::RoundSphere)
        .build()
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let interior = |p: usize, rng: &mut ChaCha8Rng| {
        let vals = (0..cx.num_cells(p))
            .map(|i| if cx.is_interior_cell(p, i, 3) { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        Cochain::from_values(&cx, p, vals).unwrap()
    };
    let a = interior(0, &mut rng);
    let b = interior(1, &mut rng);
    let da = ops::d(&cx, &a).unwrap();
    let lhs = ops::inner(&cx, &da, &b).unwrap();
    let rhs = ops::inner(&cx, &a, &ops::codifferential(&cx, &b).unwrap()).unwrap();
    assert!((lhs - rhs).abs() <= 1e-10 * ops::norm(&cx, &da) * ops::norm(&cx, &b), "{lhs} {rhs}");
}

#[test]
fn constant_form_has_constant_q_and_cell_average() {
    let cx = grid(&[5, 7, 3], &[false, true, false]);
    let w = Cochain::from_fn(&cx, 1, |m, _| match m {
        1 => 0.5,
        2 => -1.5,
        _ => 2.0,
    });
    let q = ops::pointwise_q(&cx, &w).unwrap();
    assert!(q.values.iter().all(|&v| (v - 6.5).abs() < 1e-14));
    let avg = to_cell_field(&cx, &w);
    assert_eq!(avg.ncomp, 3);
    assert_eq!(avg.cell(0), &[0.5, -1.5, 2.0]);
}
