//! Monte Carlo value, exit-time statistics and drift for the ellipsoid process.
use dpp_lab::scenario::builtin;
use dpp_lab::walker::{drift_check, estimate_value, exit_time_stats};

fn main() -> dpp_lab::Result<()> {
    let s = builtin("ellipsoid-2d").expect("built-in");
    let x0 = [0.3, 0.2];
    let v = estimate_value(&x0, &s, 20_000, 1)?;
    println!("value at {x0:?}: {:.4} ± {:.4}", v.value.mean, v.value.se);

    let w = exit_time_stats(&x0, &s, 20_000, 2)?;
    println!(
        "E[eps^2 tau] = {:.4} in [{:.4}, {:.4}]: {}",
        w.exit_time.mean, w.bounds.lower, w.bounds.upper, w.bounds.holds
    );
    println!(
        "tail decay rate {:.3} (R^2 {:.3})",
        -w.tail_slope, w.tail_r2
    );

    let d = drift_check(&x0, &s, 50_000, 3)?;
    println!(
        "one-step drift {:.3e} in [{:.3e}, {:.3e}]",
        d.drift.mean, d.lower, d.upper
    );
    Ok(())
}
