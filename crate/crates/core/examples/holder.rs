//! Oscillation decay of the ellipsoid-process solution and the fitted Hölder
//! certificate, followed by a De Giorgi probe.
use dpp_lab::lab::solve_default;
use dpp_lab::regularity::{
    degiorgi_k, degiorgi_probe, fit_holder, holder_certificate, oscillation_profile,
    DeGiorgiParams, Slack,
};
use dpp_lab::scenario::builtin;

fn main() -> dpp_lab::Result<()> {
    let s = builtin("ellipsoid-2d").expect("built-in");
    let sol = solve_default(&s)?;
    let prof = oscillation_profile(&sol.u, &[0.0, 0.0], 0.8, s.params.eps, 0.5, 2.0)?;
    for (r, w) in prof.radii.iter().zip(&prof.omega) {
        println!("R {r:.3}  omega {w:.5}");
    }
    let fit = fit_holder(&prof)?;
    println!("gamma {:.3} (least squares {:.3})", fit.gamma, fit.ls_gamma);
    let cert = holder_certificate(&sol.u, &prof, &fit, 0.0, Slack::default(), 10_000, 1)?;
    println!(
        "certificate C {:.3}: {} violations in {} pairs",
        cert.c_used, cert.violations, cert.pairs
    );

    let k = degiorgi_k(2, s.params.lambda, 0.5);
    let r = degiorgi_probe(
        &s,
        &sol.u,
        &[0.3, 0.2],
        &DeGiorgiParams {
            r: 0.1,
            k,
            theta: 0.5,
            m: None,
            big_m: None,
        },
    )?;
    println!(
        "De Giorgi: M {:.4} m {:.4} sup_R {:.4} eta {:?}",
        r.big_m, r.m, r.sup_r, r.eta_observed
    );
    Ok(())
}
