//! Monotone Picard solve of the 1D dirac-pair DPP with f = 1, compared with
//! the value 1.5 of the limiting equation u''/3 = -1 at the origin.
use dpp_lab::dpp::{solve_dpp, SolveMode, SolveOptions};
use dpp_lab::scenario::builtin;

fn main() -> dpp_lab::Result<()> {
    for eps in [0.1, 0.05, 0.025] {
        let mut s = builtin("linear-1d").expect("built-in");
        s.params.eps = eps;
        s.h = eps / 4.0;
        let sol = solve_dpp(
            &s,
            &SolveOptions {
                mode: SolveMode::Monotone,
                tol: 1e-12,
                max_iter: 10_000_000,
            },
        )?;
        let u0 = sol.u.eval(&[0.0])?;
        println!(
            "eps {eps:<6} iterations {:>6}  u(0) = {u0:.6}  error {:.2e}",
            sol.iterations,
            (u0 - 1.5).abs()
        );
    }
    Ok(())
}
