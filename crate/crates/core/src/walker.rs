//! Monte Carlo simulation of the two-branch process: with probability α a jump
//! `εz`, `z ~ ν_x`, with probability β a uniform point of `B_ε(x)`.
//!
//! Path `i` always draws from stream `(seed, i)` and results are collected in
//! path order before any summation, so every report is bit-identical whatever
//! the number of rayon workers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::{Params, PucciKind};
use crate::error::{LabError, Result};
use crate::field::{AxisBox, FieldSpec};
use crate::geometry::{dist2, Domain};
use crate::gridfn::GridFunction;
use crate::measures::{DirectionSet, MeasureFamily};
use crate::rng::{path_stream, unit_ball, Stream};
use crate::scenario::{builtin, Scenario};

/// Sample mean, unbiased variance and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
}

impl Stat {
    /// Sums in slice order, shifted by the first sample so constant data
    /// give their value exactly.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Stat {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                se: f64::NAN,
            };
        }
        let x0 = xs[0];
        let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n as f64;
        let variance = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Stat {
            n,
            mean,
            variance,
            se: (variance / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub position: Vec<f64>,
    pub steps: u64,
    /// `ε² Σ f(X_i)` over the points already left.
    pub payoff: f64,
    pub alpha_steps: u64,
    pub beta_steps: u64,
    /// Symbolic membership of the current position in the null set `S`.
    pub in_s: bool,
}

impl PathState {
    pub fn new(x0: &[f64]) -> Self {
        PathState {
            position: x0.to_vec(),
            steps: 0,
            payoff: 0.0,
            alpha_steps: 0,
            beta_steps: 0,
            in_s: false,
        }
    }

    /// One transition. Charges `ε² f(x)` at the point being left, then moves.
    /// Returns the branch taken and the increment `X_{k+1} - X_k`.
    pub fn step(
        &mut self,
        fam: &MeasureFamily,
        p: &Params,
        f: &FieldSpec,
        rng: &mut Stream,
    ) -> Result<(Branch, Vec<f64>)> {
        let eps = p.eps;
        self.payoff += eps * eps * f.eval(&self.position);
        let (branch, z) = if rng.gen::<f64>() < p.alpha {
            (Branch::Alpha, fam.sample(&self.position, p.lambda, rng)?)
        } else {
            (Branch::Beta, unit_ball(rng, self.position.len()))
        };
        let dx: Vec<f64> = z.iter().map(|v| eps * v).collect();
        self.position.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        self.steps += 1;
        match branch {
            Branch::Alpha => self.alpha_steps += 1,
            Branch::Beta => self.beta_steps += 1,
        }
        self.in_s = false;
        Ok((branch, dx))
    }
}

/// Outcome of one path run until it leaves the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub tau: u64,
    pub exit: Vec<f64>,
    /// `ε² Σ_{i<τ} f(X_i) + g(X_τ)`; meaningless when `capped`.
    pub payoff: f64,
    pub capped: bool,
    pub alpha_steps: u64,
    pub beta_steps: u64,
}

fn require_inside(domain: &Domain, x0: &[f64]) -> Result<()> {
    if x0.len() != domain.dim() {
        return Err(LabError::Dimension {
            expected: domain.dim(),
            got: x0.len(),
        });
    }
    if !domain.contains(x0) {
        return Err(LabError::invalid(
            "x0",
            format!("{x0:?} is not inside the domain"),
        ));
    }
    Ok(())
}

/// Runs from `x0` until the first exterior point or `step_cap` transitions.
pub fn run_to_exit(
    x0: &[f64],
    scn: &Scenario,
    rng: &mut Stream,
    step_cap: u64,
) -> Result<PathSummary> {
    require_inside(&scn.domain, x0)?;
    let mut st = PathState::new(x0);
    while scn.domain.contains(&st.position) {
        if st.steps >= step_cap {
            return Ok(PathSummary {
                tau: st.steps,
                exit: st.position,
                payoff: f64::NAN,
                capped: true,
                alpha_steps: st.alpha_steps,
                beta_steps: st.beta_steps,
            });
        }
        st.step(&scn.family, &scn.params, &scn.f, rng)?;
    }
    Ok(PathSummary {
        tau: st.steps,
        payoff: st.payoff + scn.g.eval(&st.position),
        exit: st.position,
        capped: false,
        alpha_steps: st.alpha_steps,
        beta_steps: st.beta_steps,
    })
}

pub fn run_batch(
    x0: &[f64],
    scn: &Scenario,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathSummary>> {
    let cap = scn.step_cap();
    (0..n_paths)
        .into_par_iter()
        .map(|i| run_to_exit(x0, scn, &mut path_stream(seed, i as u64), cap))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub x0: Vec<f64>,
    pub value: Stat,
    pub capped: usize,
}

/// `E^{x0}[ε² Σ f(X_i) + g(X_τ)]` with capped paths excluded and counted.
pub fn estimate_value(
    x0: &[f64],
    scn: &Scenario,
    n_paths: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    if n_paths < 1000 {
        return Err(LabError::invalid("paths", "need at least 1000 paths"));
    }
    let runs = run_batch(x0, scn, n_paths, seed)?;
    let payoffs: Vec<f64> = runs
        .iter()
        .filter(|r| !r.capped)
        .map(|r| r.payoff)
        .collect();
    Ok(ValueEstimate {
        x0: x0.to_vec(),
        value: Stat::from_samples(&payoffs),
        capped: n_paths - payoffs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub p: f64,
}

/// Explicit exit-time interval: `dist²/(αΛ² + βN/(N+2))` below and
/// `(diam + Λε)²/(βN/(N+2))` above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitBounds {
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn exit_bounds(x0: &[f64], scn: &Scenario) -> (f64, f64) {
    let p = &scn.params;
    let c = p.beta * Params::ball_moment(scn.dim());
    let big_c = p.alpha * p.lambda * p.lambda + c;
    let d = scn.domain.boundary_distance(x0);
    let span = scn.domain.diameter() + p.lambda * p.eps;
    (d * d / big_c, span * span / c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub capped: usize,
    /// `ε²τ`
    pub exit_time: Stat,
    /// `(ε²τ)²`
    pub exit_time_sq: Stat,
    pub value: Stat,
    pub bounds: ExitBounds,
    /// `(t, P(ε²τ ≥ t))`, nonincreasing in `t`.
    pub tail: Vec<TailPoint>,
    /// Least-squares slope and R² of `ln P` against `t`.
    pub tail_slope: f64,
    pub tail_r2: f64,
}

const TAIL_POINTS: usize = 24;

pub fn exit_time_stats(
    x0: &[f64],
    scn: &Scenario,
    n_paths: usize,
    seed: u64,
) -> Result<WalkReport> {
    let p = &scn.params;
    if p.eps * p.lambda >= 1.0 {
        return Err(LabError::invalid(
            "params.eps",
            "exit-time bounds need eps < 1/lambda",
        ));
    }
    let runs = run_batch(x0, scn, n_paths, seed)?;
    let e2 = p.eps * p.eps;
    let ok: Vec<&PathSummary> = runs.iter().filter(|r| !r.capped).collect();
    let t: Vec<f64> = ok.iter().map(|r| e2 * r.tau as f64).collect();
    let t2: Vec<f64> = t.iter().map(|v| v * v).collect();
    let payoffs: Vec<f64> = ok.iter().map(|r| r.payoff).collect();
    let exit_time = Stat::from_samples(&t);
    let (lower, upper) = exit_bounds(x0, scn);
    let (tail, tail_slope, tail_r2) = tail_curve(&t);
    Ok(WalkReport {
        x0: x0.to_vec(),
        n_paths,
        capped: n_paths - ok.len(),
        exit_time,
        exit_time_sq: Stat::from_samples(&t2),
        value: Stat::from_samples(&payoffs),
        bounds: ExitBounds {
            lower,
            upper,
            holds: lower <= exit_time.mean && exit_time.mean <= upper,
        },
        tail,
        tail_slope,
        tail_r2,
    })
}

/// Empirical survival function on an even grid up to the 0.999 quantile, with
/// an exponential fit.
pub fn tail_curve(samples: &[f64]) -> (Vec<TailPoint>, f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return (Vec::new(), f64::NAN, f64::NAN);
    }
    let t_max = s[((n as f64 * 0.999) as usize).min(n - 1)];
    let pts: Vec<TailPoint> = (0..TAIL_POINTS)
        .map(|j| {
            let t = t_max * j as f64 / (TAIL_POINTS - 1) as f64;
            let below = s.partition_point(|&v| v < t);
            TailPoint {
                t,
                p: (n - below) as f64 / n as f64,
            }
        })
        .collect();
    let fit: Vec<(f64, f64)> = pts
        .iter()
        .filter(|q| q.p > 0.0)
        .map(|q| (q.t, q.p.ln()))
        .collect();
    let (slope, r2) = linear_fit(&fit);
    (pts, slope, r2)
}

/// Least-squares slope and coefficient of determination.
pub fn linear_fit(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub x0: Vec<f64>,
    /// One-step increment of `|X - x0|²`.
    pub drift: Stat,
    pub lower: f64,
    pub upper: f64,
    pub alpha_fraction: f64,
    pub holds: bool,
}

/// Samples `|X_1 - x0|² - |X_0 - x0|²` from `n_steps` independent first steps.
pub fn drift_check(x0: &[f64], scn: &Scenario, n_steps: usize, seed: u64) -> Result<DriftReport> {
    require_inside(&scn.domain, x0)?;
    let rows: Vec<(f64, bool)> = (0..n_steps)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let mut st = PathState::new(x0);
            let (b, _) = st.step(&scn.family, &scn.params, &scn.f, &mut rng)?;
            Ok((dist2(&st.position, x0), b == Branch::Alpha))
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let drift = Stat::from_samples(&d);
    let p = &scn.params;
    let e2 = p.eps * p.eps;
    let c = p.beta * Params::ball_moment(scn.dim());
    let lower = c * e2;
    let upper = (p.alpha * p.lambda * p.lambda + c) * e2;
    Ok(DriftReport {
        x0: x0.to_vec(),
        drift,
        lower,
        upper,
        alpha_fraction: rows.iter().filter(|r| r.1).count() as f64 / n_steps as f64,
        holds: drift.mean >= lower - 4.0 * drift.se && drift.mean <= upper + 4.0 * drift.se,
    })
}

/// Open box or open ball with an exact membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box(AxisBox),
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box(b) => b.contains(x),
            Shape::Ball { center, radius } => dist2(x, center) < radius * radius,
        }
    }
}

/// `(∪ include) \ (∪ exclude)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub include: Vec<Shape>,
    #[serde(default)]
    pub exclude: Vec<Shape>,
}

impl Region {
    pub fn new(include: Vec<Shape>) -> Self {
        Region {
            include,
            exclude: Vec::new(),
        }
    }

    pub fn minus(mut self, s: Shape) -> Self {
        self.exclude.push(s);
        self
    }

    /// Open cube of side `side` centred at `center`.
    pub fn cube(center: &[f64], side: f64) -> Self {
        Region::new(vec![Shape::Box(AxisBox {
            lo: center.iter().map(|c| c - side / 2.0).collect(),
            hi: center.iter().map(|c| c + side / 2.0).collect(),
        })])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.include.iter().any(|s| s.contains(x)) && !self.exclude.iter().any(|s| s.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub x0: Vec<f64>,
    pub hit: Stat,
    pub capped: usize,
}

/// `P^{x0}(T_A < τ_stop)`, the chance of entering `a` before leaving `stop`.
pub fn hitting_prob(
    x0: &[f64],
    a: &Region,
    stop: &Region,
    scn: &Scenario,
    n_paths: usize,
    seed: u64,
) -> Result<HitReport> {
    if !stop.contains(x0) {
        return Err(LabError::invalid("x0", "must lie in the stop region"));
    }
    let cap = scn.step_cap();
    let rows: Vec<Option<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let mut st = PathState::new(x0);
            loop {
                if a.contains(&st.position) {
                    return Ok(Some(1.0));
                }
                if !stop.contains(&st.position) {
                    return Ok(Some(0.0));
                }
                if st.steps >= cap {
                    return Ok(None);
                }
                st.step(&scn.family, &scn.params, &scn.f, &mut rng)?;
            }
        })
        .collect::<Result<_>>()?;
    let hits: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(HitReport {
        x0: x0.to_vec(),
        hit: Stat::from_samples(&hits),
        capped: n_paths - hits.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnFailureReport {
    pub n_paths: usize,
    /// `ε² Σ_{i<τ} 1_S(X_i)`
    pub s_sum: Stat,
    pub exit_time: Stat,
    pub alpha_steps: u64,
    pub alpha_hits: u64,
    pub hit_rate: f64,
    pub hit_rate_se: f64,
    /// `‖1_S‖_{L^N}`; `S` is countable.
    pub ln_norm: f64,
    /// `0.9 · (α/2) · E[ε²τ]`
    pub floor: f64,
    pub floor_holds: bool,
    pub conclusion: String,
}

/// Dirac-pair process on `B_2` with `ε = 1` and `f = 1_S` for a countable `S`
/// chosen so that the `+v_x` target of every α-jump lies in `S`.
///
/// Membership is tracked symbolically: the start point and every `+v_x`
/// landing are in `S`; `-v_x` landings and ball moves are not.
pub fn ln_abp_failure_demo(n_paths: usize, seed: u64) -> Result<LnFailureReport> {
    let scn = builtin("ln-failure-2d").expect("built-in scenario");
    let p = scn.params;
    let e2 = p.eps * p.eps;
    let zero = FieldSpec::constant(0.0);
    let x0 = vec![0.0; scn.dim()];
    let cap = scn.step_cap();
    let rows: Vec<(f64, f64, u64, u64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let mut st = PathState::new(&x0);
            st.in_s = true;
            let (mut s_sum, mut hits) = (0.0, 0u64);
            while scn.domain.contains(&st.position) && st.steps < cap {
                if st.in_s {
                    s_sum += e2;
                }
                let v = match &scn.family {
                    MeasureFamily::DiracPair { direction } => direction.at(&st.position),
                    _ => unreachable!("ln-failure-2d uses a dirac pair"),
                };
                let (b, dx) = st.step(&scn.family, &p, &zero, &mut rng)?;
                if b == Branch::Alpha && dx.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() > 0.0 {
                    st.in_s = true;
                    hits += 1;
                }
            }
            Ok((s_sum, e2 * st.steps as f64, st.alpha_steps, hits))
        })
        .collect::<Result<_>>()?;
    let s: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let alpha_steps: u64 = rows.iter().map(|r| r.2).sum();
    let alpha_hits: u64 = rows.iter().map(|r| r.3).sum();
    let s_sum = Stat::from_samples(&s);
    let exit_time = Stat::from_samples(&t);
    let hit_rate = alpha_hits as f64 / alpha_steps as f64;
    let floor = 0.9 * p.alpha / 2.0 * exit_time.mean;
    Ok(LnFailureReport {
        n_paths,
        s_sum,
        exit_time,
        alpha_steps,
        alpha_hits,
        hit_rate,
        hit_rate_se: (hit_rate * (1.0 - hit_rate) / alpha_steps as f64).sqrt(),
        ln_norm: 0.0,
        floor,
        floor_holds: s_sum.mean >= floor,
        conclusion: format!(
            "L^N right-hand side is 0 but E[eps^2 sum 1_S] = {:.4} +- {:.4}",
            s_sum.mean, s_sum.se
        ),
    })
}

/// Value of the controlled game when the controller plays greedily against the
/// grid function `u`: in the α-branch it picks `z` in `dirs` extremizing
/// `u(x+εz) + u(x-εz)` and a fair coin picks the sign. For the tug-of-war kind
/// the α-branch moves to the maximizer or minimizer of `u(x+εz)` with equal
/// odds. `β(x)` follows the scenario's `beta_field`.
pub fn estimate_game_value(
    x0: &[f64],
    scn: &Scenario,
    u: &GridFunction,
    dirs: &DirectionSet,
    kind: PucciKind,
    n_paths: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    require_inside(&scn.domain, x0)?;
    let eps = scn.params.eps;
    let cap = scn.step_cap();
    let shifted = |x: &[f64], z: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(z).map(|(a, b)| a + s * eps * b).collect()
    };
    let rows: Vec<Option<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(seed, i as u64);
            let mut x = x0.to_vec();
            let mut payoff = 0.0;
            let mut steps = 0u64;
            while scn.domain.contains(&x) {
                if steps >= cap {
                    return Ok(None);
                }
                payoff += eps * eps * scn.f.eval(&x);
                let beta = scn.beta_at(&x);
                if rng.gen::<f64>() < 1.0 - beta {
                    let mut vals = Vec::with_capacity(dirs.vectors.len());
                    for z in &dirs.vectors {
                        let plus = u.eval(&shifted(&x, z, 1.0))?;
                        let pair = match kind {
                            PucciKind::TugOfWar => plus,
                            _ => plus + u.eval(&shifted(&x, z, -1.0))?,
                        };
                        vals.push(pair);
                    }
                    let arg = |better: fn(f64, f64) -> bool| {
                        (1..vals.len()).fold(0, |b, j| if better(vals[j], vals[b]) { j } else { b })
                    };
                    let imax = arg(|a, b| a > b);
                    let imin = arg(|a, b| a < b);
                    let heads = rng.gen::<bool>();
                    x = match kind {
                        PucciKind::Max => {
                            shifted(&x, &dirs.vectors[imax], if heads { 1.0 } else { -1.0 })
                        }
                        PucciKind::Min => {
                            shifted(&x, &dirs.vectors[imin], if heads { 1.0 } else { -1.0 })
                        }
                        PucciKind::TugOfWar => {
                            shifted(&x, &dirs.vectors[if heads { imax } else { imin }], 1.0)
                        }
                    };
                } else {
                    let z = unit_ball(&mut rng, x.len());
                    x = shifted(&x, &z, 1.0);
                }
                steps += 1;
            }
            Ok(Some(payoff + scn.g.eval(&x)))
        })
        .collect::<Result<_>>()?;
    let payoffs: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(ValueEstimate {
        x0: x0.to_vec(),
        value: Stat::from_samples(&payoffs),
        capped: n_paths - payoffs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_of_constant_samples() {
        let s = Stat::from_samples(&[2.0; 10]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.se, 0.0);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xy: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (s, r2) = linear_fit(&xy);
        assert!((s + 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn region_difference() {
        let r = Region::cube(&[0.0, 0.0], 1.0).minus(Shape::Ball {
            center: vec![0.5, 0.5],
            radius: 0.1,
        });
        assert!(r.contains(&[0.0, 0.0]));
        assert!(!r.contains(&[0.45, 0.45]));
        assert!(!r.contains(&[0.6, 0.0]));
    }
}
