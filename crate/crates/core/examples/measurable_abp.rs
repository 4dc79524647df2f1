//! ABP with a discontinuous source, and the process on which the classical
//! L^N form fails.
use dpp_lab::abp::verify_abp_measurable;
use dpp_lab::scenario::builtin;
use dpp_lab::walker::ln_abp_failure_demo;

fn main() -> dpp_lab::Result<()> {
    let s = builtin("indicator-1d").expect("built-in");
    let r = verify_abp_measurable(&s, 20_000, 5)?;
    println!("constant C = {:.2} (ell = {})", r.constant, r.ell);
    for p in &r.points {
        println!(
            "  x0 {:?}: E[eps^2 sum f] = {:.5} <= {:.4} (slack {:.4})",
            p.x0, p.lhs.mean, p.rhs, p.slack
        );
    }

    let d = ln_abp_failure_demo(20_000, 6)?;
    println!(
        "segment source with zero L^2 norm: E[eps^2 sum 1_S] = {:.4} (floor {:.4}), alpha hit rate {:.4}",
        d.s_sum.mean, d.floor, d.hit_rate
    );
    Ok(())
}
