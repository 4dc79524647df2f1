use std::sync::Arc;

use dpp_lab::abp::concave_hull;
use dpp_lab::dpp::{ball_average, solve_dpp, LinearDpp, Params, SolveMode, SolveOptions};
use dpp_lab::field::FieldSpec;
use dpp_lab::geometry::{build_grid, Domain};
use dpp_lab::gridfn::GridFunction;
use dpp_lab::measures::{DirectionField, MeasureFamily};
use dpp_lab::regularity::{oscillation_profile, DyadicSet};
use dpp_lab::rng::path_stream;
use dpp_lab::scenario::{builtin, Scenario};
use dpp_lab::walker::{PathState, Stat};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn disk() -> Arc<dpp_lab::geometry::Grid> {
    Arc::new(build_grid(&Domain::new_ball(vec![0.0, 0.0], 1.0).unwrap(), 0.05, 0.4).unwrap())
}

fn small_1d(eps: f64, g: FieldSpec) -> Scenario {
    let mut s = builtin("linear-1d").unwrap();
    s.params.eps = eps;
    s.h = eps / 4.0;
    s.g = g;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_average_reproduces_quadratics(
        c in -1.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0, q in -1.0f64..1.0,
        i in -8i64..8, j in -8i64..8,
    ) {
        let grid = disk();
        let u = GridFunction::from_fn(grid.clone(), |x| c + a * x[0] + b * x[1] + q * (x[0] * x[0] + x[1] * x[1]));
        let x = [i as f64 * 0.05, j as f64 * 0.05];
        // ⨍_{B_ε(x)} |y|² = |x|² + ε² N/(N+2)
        let exact = c + a * x[0] + b * x[1] + q * (x[0] * x[0] + x[1] * x[1] + 0.04 / 2.0);
        prop_assert!((ball_average(&u, &x, 0.2).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn dpp_operator_is_monotone(seed in any::<u64>(), alpha in 0.0f64..0.8) {
        let grid = disk();
        let p = Params { eps: 0.2, alpha, beta: 1.0 - alpha, lambda: 1.0 };
        let fam = MeasureFamily::DiracPair { direction: DirectionField::Constant { vector: vec![0.6, 0.8] } };
        let f = GridFunction::zeros(grid.clone());
        let op = LinearDpp::build(&grid, &fam, &p, &f).unwrap();
        let mut rng = path_stream(seed, 0);
        use rand::Rng;
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen::<f64>()).collect();
        let (mut tu, mut tv) = (vec![0.0; grid.interior.len()], vec![0.0; grid.interior.len()]);
        op.apply(&u, &mut tu);
        op.apply(&v, &mut tv);
        prop_assert!(tu.iter().zip(&tv).all(|(a, b)| a <= &(b + 1e-14)));
    }

    #[test]
    fn comparison_principle(c1 in -1.0f64..1.0, d in 0.0f64..1.0, slope in -1.0f64..1.0) {
        let lo = small_1d(0.2, FieldSpec::Affine { constant: c1, gradient: vec![slope] });
        let hi = small_1d(0.2, FieldSpec::Affine { constant: c1 + d, gradient: vec![slope] });
        let o = SolveOptions { mode: SolveMode::Monotone, tol: 1e-12, max_iter: 1_000_000 };
        let (a, b) = (solve_dpp(&lo, &o).unwrap(), solve_dpp(&hi, &o).unwrap());
        for &i in &a.u.grid.interior {
            prop_assert!(a.u.values[i] <= b.u.values[i] + 1e-9);
            prop_assert!((b.u.values[i] - a.u.values[i] - d).abs() < 1e-8);
        }
    }

    #[test]
    fn hull_dominates_and_is_concave_in_1d(vals in proptest::collection::vec(-1.0f64..1.0, 3..24)) {
        let n = vals.len();
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let h = concave_hull(&pts, &vals).unwrap();
        for i in 0..n {
            prop_assert!(h.values[i] >= vals[i] - 1e-12);
        }
        for i in 1..n - 1 {
            prop_assert!(2.0 * h.values[i] >= h.values[i - 1] + h.values[i + 1] - 1e-10);
        }
        prop_assert!((h.values[0] - vals[0]).abs() < 1e-12 && (h.values[n - 1] - vals[n - 1]).abs() < 1e-12);
    }

    #[test]
    fn oscillation_is_monotone_and_bounded(seed in any::<u64>(), cx in -0.2f64..0.2, cy in -0.2f64..0.2) {
        use rand::Rng;
        let grid = disk();
        let mut rng = path_stream(seed, 1);
        let u = GridFunction::new(grid.clone(), (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
        let p = oscillation_profile(&u, &[cx, cy], 0.6, 0.05, 0.5, 1.5).unwrap();
        prop_assert!(p.omega.windows(2).all(|w| w[1] <= w[0]));
        let sup = u.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(p.omega.iter().all(|&w| w <= 2.0 * sup));
    }

    #[test]
    fn dyadic_measure_is_count_times_cell(dim in 1usize..=2, depth in 1u32..=5, p in 0.0f64..1.0, seed in any::<u64>()) {
        let a = DyadicSet::random(dim, depth, p, &mut path_stream(seed, 0));
        let expected = BigRational::new(BigInt::from(a.cells.len()), BigInt::from(1u64 << (depth as usize * dim)));
        prop_assert_eq!(a.measure(), expected);
    }

    #[test]
    fn steps_stay_within_lambda_eps(seed in any::<u64>(), x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let s = builtin("ellipsoid-2d").unwrap();
        let mut rng = path_stream(seed, 0);
        let mut st = PathState::new(&[x, y]);
        for _ in 0..50 {
            let (_, dx) = st.step(&s.family, &s.params, &s.f, &mut rng).unwrap();
            let r = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(r <= s.params.lambda * s.params.eps + 1e-12);
        }
    }

    #[test]
    fn constant_samples_have_exact_mean(c in -1e3f64..1e3, n in 1usize..500) {
        let s = Stat::from_samples(&vec![c; n]);
        prop_assert_eq!(s.mean, c);
        prop_assert_eq!(s.se, 0.0);
    }

    #[test]
    fn scenario_toml_round_trip(eps in 0.05f64..0.3, alpha in 0.0f64..0.9, seed in 0..=i64::MAX as u64) {
        let mut s = builtin("dirac-2d").unwrap();
        s.params = Params { eps, alpha, beta: 1.0 - alpha, lambda: 1.0 };
        s.h = eps / 4.0;
        s.seed = seed;
        let back = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(back.hash(), s.hash());
    }
}

#[test]
fn seeds_beyond_toml_range_are_rejected() {
    let mut s = builtin("linear-1d").unwrap();
    s.seed = u64::MAX;
    assert!(s.validate().is_err());
    assert!(s.to_toml_string().is_err());
}
