//! Concave envelope of a solver output and the ε-ABP bound it certifies.
use dpp_lab::abp::{concave_envelope, contact_set, verify_abp};
use dpp_lab::dpp::{solve_dpp, SolveMode, SolveOptions};
use dpp_lab::scenario::builtin;

fn main() -> dpp_lab::Result<()> {
    let mut s = builtin("linear-1d").expect("built-in");
    s.params.eps = 0.05;
    s.h = 0.0125;
    let sol = solve_dpp(
        &s,
        &SolveOptions {
            mode: SolveMode::Monotone,
            tol: 1e-12,
            max_iter: 1_000_000,
        },
    )?;
    let env = concave_envelope(&sol.u)?;
    println!(
        "envelope: domination {:.1e}, concavity {:.1e}, {} LP pivots",
        env.domination_defect(),
        env.concavity_defect(),
        env.pivots
    );
    println!("contact set: {} nodes", contact_set(&env, None).nodes.len());

    let r = verify_abp(&s, &sol.u)?;
    println!(
        "sup u = {:.4} <= {:.4} (boundary {:.4} + cube term): {}",
        r.lhs, r.rhs, r.sup_exterior, r.pass
    );
    println!(
        "gradient image bound {:.4}: {}",
        r.gradient_bound, r.gradient_holds
    );
    Ok(())
}
