//! Exact rational check that an unbounded function satisfies the DPP alongside zero.
use dpp_lab::dpp::nonuniqueness_check;

fn main() -> dpp_lab::Result<()> {
    let r = nonuniqueness_check(10)?;
    for row in &r.rows {
        println!(
            "x = {:<6} v = {:<8} alpha term = {:<8} error {}",
            row.x, row.v, row.alpha_term, row.error
        );
    }
    println!(
        "unbounded solution: {}, zero solution: {}",
        r.unbounded_is_solution, r.zero_is_solution
    );
    Ok(())
}
