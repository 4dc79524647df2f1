use std::sync::Arc;

use dpp_lab::dpp::*;
use dpp_lab::field::FieldSpec;
use dpp_lab::geometry::{build_grid, Domain};
use dpp_lab::gridfn::GridFunction;
use dpp_lab::measures::{Atom, DirectionField, DirectionSet, Extremum, MeasureFamily};
use dpp_lab::quadrature::BallRule;
use dpp_lab::scenario::{builtin, Scenario};

fn params(eps: f64, alpha: f64, lambda: f64) -> Params {
    Params {
        eps,
        alpha,
        beta: 1.0 - alpha,
        lambda,
    }
}

fn dirac1(m: f64) -> MeasureFamily {
    MeasureFamily::DiracPair {
        direction: DirectionField::Constant { vector: vec![m] },
    }
}

fn grid1(eps: f64, lambda: f64) -> Arc<dpp_lab::geometry::Grid> {
    Arc::new(build_grid(&Domain::cube(1, 1.0).unwrap(), eps / 4.0, lambda * eps).unwrap())
}

fn opts(tol: f64) -> SolveOptions {
    SolveOptions {
        mode: SolveMode::Monotone,
        tol,
        max_iter: 2_000_000,
    }
}

#[test]
fn ball_average_examples() {
    let g = grid1(0.5, 1.0);
    let c = GridFunction::from_fn(g.clone(), |_| 7.0);
    assert!((ball_average(&c, &[0.0], 0.5).unwrap() - 7.0).abs() < 1e-14);
    let lin = GridFunction::from_fn(g.clone(), |x| 2.0 * x[0] - 1.0);
    assert!((ball_average(&lin, &[0.25], 0.5).unwrap() - (-0.5)).abs() < 1e-14);
    let sq = GridFunction::from_fn(g.clone(), |x| x[0] * x[0]);
    let v = ball_average(&sq, &[0.0], 0.5).unwrap();
    assert!((v - 0.25 / 3.0).abs() < 1e-13, "{v}");
}

#[test]
fn ball_average_matches_monte_carlo_oracle_in_2d() {
    // oracle: plain Monte Carlo average of |y|² over B_ε, independent of the lattice rule
    use rand::{Rng, SeedableRng};
    let eps = 0.3;
    let g = Arc::new(build_grid(&Domain::cube(2, 1.0).unwrap(), eps / 4.0, eps).unwrap());
    let sq = GridFunction::from_fn(g.clone(), |x| x[0] * x[0] + x[1] * x[1]);
    let v = ball_average(&sq, &[0.0, 0.0], eps).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n = 200_000;
    let mut acc = 0.0;
    let mut cnt = 0;
    while cnt < n {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if a * a + b * b < 1.0 {
            acc += eps * eps * (a * a + b * b);
            cnt += 1;
        }
    }
    let mc = acc / n as f64;
    // standard deviation of ε²|y|² is ε²/√12 for the uniform disk
    assert!(
        (v - mc).abs() < 4.0 * eps * eps / 12f64.sqrt() / (n as f64).sqrt(),
        "{v} vs {mc}"
    );
}

#[test]
fn apply_l_examples() {
    let p = params(0.2, 0.5, 2.0);
    let g = grid1(0.2, 2.0);
    let sq = GridFunction::from_fn(g.clone(), |x| x[0] * x[0]);
    let c = GridFunction::from_fn(g.clone(), |_| 3.0);
    let x = [0.1];
    assert!(apply_l(&c, &dirac1(1.0), &p, &x).unwrap().abs() < 1e-10);
    let v = apply_l(&sq, &dirac1(1.0), &p, &x).unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-10, "{v}");
    let v = apply_l(&sq, &MeasureFamily::UniformBall { radius: 1.0 }, &p, &x).unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-10, "{v}");

    let dirs = DirectionSet::lattice(1, 2.0, 8);
    let lin = GridFunction::from_fn(g.clone(), |x| 1.0 - 0.3 * x[0]);
    for s in [Extremum::Max, Extremum::Min] {
        assert!(apply_l_pucci(&lin, &dirs, &p, &x, s).unwrap().abs() < 1e-10);
    }
    let v = apply_l_pucci(&sq, &dirs, &p, &x, Extremum::Max).unwrap();
    assert!((v - 13.0 / 6.0).abs() < 1e-10, "{v}");
}

#[test]
fn two_forms_of_the_operator_agree() {
    let eps = 0.2;
    let p = params(eps, 0.5, 2.0);
    let g = Arc::new(build_grid(&Domain::cube(2, 1.0).unwrap(), eps / 4.0, 2.0 * eps).unwrap());
    let u = GridFunction::from_fn(g.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1] * x[0]);
    let rule = BallRule::new(2, g.h, eps);
    let fams = [
        MeasureFamily::UniformBall { radius: 1.5 },
        MeasureFamily::DiracPair {
            direction: DirectionField::Rotating {
                magnitude: 1.3,
                turns: 1.0,
                offset: 0.2,
            },
        },
        MeasureFamily::EllipsoidShell {
            axes: vec![2.0, 1.2],
            rotation: dpp_lab::measures::RotationField::Polar {
                turns: 1.0,
                offset: 0.0,
            },
        },
    ];
    for fam in &fams {
        for &i in g.interior.iter().step_by(7) {
            let x = g.coords(i);
            let a = apply_l_with(&u, fam, &p, &rule, &x).unwrap();
            let b = apply_l_second_difference(&u, fam, &p, &rule, &x).unwrap();
            assert!((a - b).abs() < 1e-10, "{} {a} {b}", fam.kind_name());
        }
    }
}

fn linear_1d(eps: f64) -> Scenario {
    let mut s = builtin("linear-1d").unwrap();
    s.params.eps = eps;
    s.h = eps / 4.0;
    s
}

#[test]
fn initial_subsolution_is_a_subsolution() {
    let s = linear_1d(0.1);
    let g = s.grid().unwrap();
    let f = s.f_on(&g);
    let gv = s.g_on(&g);
    let v = initial_subsolution(&g, &f, &gv, &s.params);
    // L = 1·3/(½·1) = 6, g = 0 on the collar: K = -6·max|x|²
    let i0 = g.interior[g.interior.len() / 2];
    assert_eq!(g.coords(i0), vec![0.0]);
    let xmax = g
        .collar_nodes
        .iter()
        .map(|&i| g.coords(i)[0].abs())
        .fold(0.0, f64::max);
    assert!((v.values[i0] + 6.0 * xmax * xmax).abs() < 1e-12);
    let r = residual(&v, &s.family, &f, &s.params, 1e-9).unwrap();
    assert!(r.is_subsolution(), "{:?}", r.classification);

    // f = 0, g = 0: v ≡ 0 is a solution
    let mut z = s.clone();
    z.f = FieldSpec::constant(0.0);
    let f0 = z.f_on(&g);
    let v0 = initial_subsolution(&g, &f0, &gv, &z.params);
    assert!(v0.values.iter().all(|&x| x == 0.0));
    assert_eq!(
        residual(&v0, &z.family, &f0, &z.params, 1e-12)
            .unwrap()
            .classification,
        Classification::Solution
    );
}

#[test]
fn solver_output_is_a_solution_and_perturbation_is_neither() {
    let s = linear_1d(0.1);
    let tol = 1e-12;
    let sol = solve_dpp(&s, &opts(tol)).unwrap();
    let g = sol.u.grid.clone();
    let f = s.f_on(&g);
    let r = residual(&sol.u, &s.family, &f, &s.params, 1e-6).unwrap();
    assert_eq!(r.classification, Classification::Solution);
    assert!(r.sup_norm * s.params.eps.powi(2) <= 10.0 * tol);

    let mut bumped = sol.u.clone();
    for &i in &g.interior {
        bumped.values[i] += 1e-3 * s.domain.boundary_distance(&g.coords(i));
    }
    let r = residual(&bumped, &s.family, &f, &s.params, 1e-6).unwrap();
    assert_eq!(r.classification, Classification::Neither);
}

#[test]
fn affine_data_is_reproduced() {
    let mut s = builtin("ellipsoid-2d").unwrap();
    s.params.eps = 0.2;
    s.h = 0.05;
    s.g = FieldSpec::Affine {
        constant: 0.3,
        gradient: vec![1.0, -2.0],
    };
    let sol = solve_dpp(&s, &opts(1e-12)).unwrap();
    let g = sol.u.grid.clone();
    for &i in &g.interior {
        let x = g.coords(i);
        assert!((sol.u.values[i] - s.g.eval(&x)).abs() < 1e-9);
    }
    let f = s.f_on(&g);
    let exact = s.g_on(&g);
    let mut lin = exact.clone();
    for &i in &g.interior {
        lin.values[i] = s.g.eval(&g.coords(i));
    }
    assert!(
        residual(&lin, &s.family, &f, &s.params, 1e-10)
            .unwrap()
            .sup_norm
            <= 1e-10
    );
}

#[test]
fn limit_pde_value_at_the_origin() {
    // finite-difference oracle for u''/3 = -1 on (-1,1), u(±1) = 0
    let n = 2000;
    let hh = 2.0 / n as f64;
    let mut u = vec![0.0; n + 1];
    // tridiagonal solve of -(u_{i-1} - 2u_i + u_{i+1})/h² = 3
    let m = n - 1;
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let rhs = 3.0 * hh * hh;
        let (a, b, cc) = (-1.0, 2.0, -1.0);
        if i == 0 {
            c[i] = cc / b;
            d[i] = rhs / b;
        } else {
            let den = b - a * c[i - 1];
            c[i] = cc / den;
            d[i] = (rhs - a * d[i - 1]) / den;
        }
    }
    for i in (0..m).rev() {
        u[i + 1] = d[i] - if i + 1 < m { c[i] * u[i + 2] } else { 0.0 };
    }
    let fd0 = u[n / 2];
    assert!((fd0 - 1.5).abs() < 1e-6);

    let s = linear_1d(0.02);
    let sol = solve_dpp(&s, &opts(1e-10)).unwrap();
    let g = sol.u.grid.clone();
    let i0 = g.node_at(&[0]).unwrap();
    let err = (sol.u.values[i0] - fd0).abs();
    assert!(err < 0.06, "u(0) = {}", sol.u.values[i0]);
}

#[test]
fn monotone_and_arbitrary_init_agree() {
    let s = builtin("dirac-2d").unwrap();
    let tol = 1e-11;
    let a = solve_dpp(&s, &opts(tol)).unwrap();
    let b = solve_dpp(
        &s,
        &SolveOptions {
            mode: SolveMode::ArbitraryInit,
            ..opts(tol)
        },
    )
    .unwrap();
    // geometric convergence: distance to the fixed point is ≲ tol/(1-ρ); compare loosely
    let diff =
        a.u.values
            .iter()
            .zip(&b.u.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    let rho = a.log[a.log.len() - 1].increment / a.log[a.log.len() - 2].increment;
    assert!(diff <= 2.0 * tol / (1.0 - rho), "{diff}");
}

#[test]
fn maximum_principle_with_zero_source() {
    let mut s = builtin("plaplace-2d").unwrap();
    s.f = FieldSpec::constant(0.0);
    let sol = solve_dpp(&s, &opts(1e-11)).unwrap();
    let g = &sol.u.grid;
    let lo = g
        .collar_nodes
        .iter()
        .map(|&i| sol.u.values[i])
        .fold(f64::INFINITY, f64::min);
    let hi = g
        .collar_nodes
        .iter()
        .map(|&i| sol.u.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    for &i in &g.interior {
        assert!(sol.u.values[i] >= lo - 1e-12 && sol.u.values[i] <= hi + 1e-12);
    }
}

#[test]
fn pucci_dominates_and_linear_is_fixed() {
    let s = linear_1d(0.1);
    let dirs = DirectionSet::lattice(1, 1.0, 8);
    let small = {
        let mut t = s.clone();
        t.family = dirac1(0.5);
        t
    };
    let d = solve_dpp(&small, &opts(1e-12)).unwrap();
    let mx = solve_pucci(&small, &dirs, PucciKind::Max, &opts(1e-12)).unwrap();
    let g = d.u.grid.clone();
    let i0 = g.node_at(&[0]).unwrap();
    assert!(
        mx.u.values[i0] > d.u.values[i0] + 0.1,
        "{} {}",
        mx.u.values[i0],
        d.u.values[i0]
    );

    let mut lin = s.clone();
    lin.f = FieldSpec::constant(0.0);
    lin.g = FieldSpec::Affine {
        constant: 1.0,
        gradient: vec![0.7],
    };
    for k in [PucciKind::Max, PucciKind::Min, PucciKind::TugOfWar] {
        let sol = solve_pucci(&lin, &dirs, k, &opts(1e-13)).unwrap();
        for &i in &g.interior {
            assert!((sol.u.values[i] - lin.g.eval(&g.coords(i))).abs() < 1e-9);
        }
    }
}

#[test]
fn mixture_operator_sandwiched_by_pucci() {
    let p = params(0.2, 0.6, 1.0);
    let g = Arc::new(build_grid(&Domain::cube(2, 1.0).unwrap(), 0.05, 0.2).unwrap());
    let dirs = DirectionSet::lattice(2, 1.0, 4);
    let mix = MeasureFamily::FiniteMixture {
        atoms: vec![
            Atom {
                z: vec![0.5, 0.25],
                w: 0.3,
            },
            Atom {
                z: vec![-0.5, -0.25],
                w: 0.3,
            },
            Atom {
                z: vec![0.0, 1.0],
                w: 0.2,
            },
            Atom {
                z: vec![0.0, -1.0],
                w: 0.2,
            },
        ],
    };
    for seed in 0..100u64 {
        let u = GridFunction::from_fn(g.clone(), |x| {
            let a = (seed as f64 * 0.37).sin();
            (a * 5.0 * x[0] + x[1]).cos() + a * x[0] * x[1]
        });
        let x = g.coords(g.interior[(seed as usize * 13) % g.interior.len()]);
        let l = apply_l(&u, &mix, &p, &x).unwrap();
        let hi = apply_l_pucci(&u, &dirs, &p, &x, Extremum::Max).unwrap();
        let lo = apply_l_pucci(&u, &dirs, &p, &x, Extremum::Min).unwrap();
        assert!(lo <= l + 1e-9 && l <= hi + 1e-9);
    }
}

#[test]
fn nonuniqueness_identity() {
    let r = nonuniqueness_check(25).unwrap();
    assert!(r.unbounded_is_solution && r.zero_is_solution);
    assert_eq!(r.rows[0].alpha_term, "4");
    assert_eq!(r.rows[9].v, (1u64 << 20).to_string());
    assert!(r.rows.iter().all(|row| row.error == "0"));
    assert!(nonuniqueness_check(26).is_err());
}
