//! Grid solver against the random walk at the probe points of two scenarios.
use dpp_lab::lab::{compare, probe_points, simulator_output, solve_default, solver_output};
use dpp_lab::scenario::builtin;

fn main() -> dpp_lab::Result<()> {
    for name in ["linear-1d", "dirac-2d"] {
        let s = builtin(name).expect("built-in");
        let pts = probe_points(&s);
        let sol = solve_default(&s)?;
        let r = compare(
            &solver_output(&s, &sol, &pts)?,
            &simulator_output(&s, &pts, 20_000, 7)?,
        )?;
        println!("{name}");
        for row in &r.rows {
            println!(
                "  {:?}  solver {:.4}  walk {:.4} ± {:.4}  diff {:.4} <= {:.4}",
                row.x, row.solver, row.simulated, row.se, row.diff, row.allowed
            );
        }
    }
    Ok(())
}
