//! Truncated Calderón–Zygmund selection on a random dyadic set, with its
//! exact certificate.
use dpp_lab::regularity::{cz_decompose, cz_verify, CzParams, DyadicSet};
use dpp_lab::rng::path_stream;

fn main() -> dpp_lab::Result<()> {
    let a = DyadicSet::random(2, 5, 0.2, &mut path_stream(1, 0));
    let p = CzParams::from_ratios((1, 2), (1, 20), 4)?;
    let d = cz_decompose(&a, &p)?;
    for s in &d.cubes {
        let q = s.cell.to_cube();
        println!(
            "{:?} cube at {:?} side {} density {}",
            s.rule,
            q.center,
            q.side,
            a.density(&s.cell)
        );
    }
    let c = cz_verify(&a, &d.cubes, &p);
    println!(
        "|A| = {} <= delta |B| + delta~ = {}: {}",
        c.a_measure, c.rhs, c.pass
    );
    Ok(())
}
