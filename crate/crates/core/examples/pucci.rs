//! Extremal operators bracket the linear DPP when its atoms are admissible
//! directions; the tug-of-war variant runs with a variable β(x).
use dpp_lab::dpp::{scenario_directions, solve_dpp, solve_pucci, PucciKind};
use dpp_lab::lab::solve_options;
use dpp_lab::scenario::builtin;

fn main() -> dpp_lab::Result<()> {
    let s = builtin("linear-1d").expect("built-in");
    let opts = solve_options(&s)?;
    let dirs = scenario_directions(&s);
    let lo = solve_pucci(&s, &dirs, PucciKind::Min, &opts)?;
    let mid = solve_dpp(&s, &opts)?;
    let hi = solve_pucci(&s, &dirs, PucciKind::Max, &opts)?;
    for x in [-0.5, 0.0, 0.5] {
        println!(
            "x {x:>5}: min {:.4} <= dpp {:.4} <= max {:.4}",
            lo.u.eval(&[x])?,
            mid.u.eval(&[x])?,
            hi.u.eval(&[x])?
        );
    }

    let px = builtin("px-laplace-2d").expect("built-in");
    let sol = solve_pucci(
        &px,
        &scenario_directions(&px),
        PucciKind::TugOfWar,
        &solve_options(&px)?,
    )?;
    println!(
        "p(x)-Laplace: beta_minus {:?}, u(0) = {:.4}",
        sol.beta_minus,
        sol.u.eval(&[0.0, 0.0])?
    );
    Ok(())
}
