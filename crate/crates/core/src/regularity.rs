//! ε-truncated Calderón–Zygmund decomposition in exact arithmetic, oscillation
//! ladders, Hölder-exponent fits with a pairwise certificate, and the De Giorgi
//! probe.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpp::residual;
use crate::error::{LabError, Result};
use crate::geometry::{dist2, Cube};
use crate::gridfn::GridFunction;
use crate::rng::path_stream;
use crate::scenario::Scenario;
use crate::walker::linear_fit;

/// Dyadic cell of `Q_1 = (-1/2, 1/2)^N`: generation `g`, integer position in
/// `[0, 2^g)^N`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub generation: u32,
    pub index: Vec<u64>,
}

impl Cell {
    pub fn root(dim: usize) -> Self {
        Cell {
            generation: 0,
            index: vec![0; dim],
        }
    }

    pub fn children(&self) -> impl Iterator<Item = Cell> + '_ {
        let n = self.index.len();
        (0..1u64 << n).map(move |mask| Cell {
            generation: self.generation + 1,
            index: self
                .index
                .iter()
                .enumerate()
                .map(|(i, k)| 2 * k + (mask >> i & 1))
                .collect(),
        })
    }

    pub fn ancestor(&self, generation: u32) -> Cell {
        let s = self.generation - generation;
        Cell {
            generation,
            index: self.index.iter().map(|k| k >> s).collect(),
        }
    }

    /// Whether `other` lies inside this cell (or equals it).
    pub fn contains(&self, other: &Cell) -> bool {
        other.generation >= self.generation && other.ancestor(self.generation) == *self
    }

    /// `|Q| = 2^{-gN}` exactly.
    pub fn measure(&self) -> BigRational {
        let n = self.index.len() as u32;
        BigRational::new(
            BigInt::one(),
            BigInt::one() << (self.generation * n) as usize,
        )
    }

    pub fn to_cube(&self) -> Cube {
        let side = 1.0 / (1u64 << self.generation) as f64;
        let center = self
            .index
            .iter()
            .map(|&k| -0.5 + side * (k as f64 + 0.5))
            .collect();
        Cube {
            center,
            side,
            generation: self.generation,
            parent: None,
        }
    }
}

/// A subset of `Q_1` given as a union of generation-`depth` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSet {
    pub dim: usize,
    pub depth: u32,
    pub cells: BTreeSet<Vec<u64>>,
}

impl DyadicSet {
    pub fn new(dim: usize, depth: u32, cells: impl IntoIterator<Item = Vec<u64>>) -> Result<Self> {
        let side = 1u64 << depth;
        let cells: BTreeSet<Vec<u64>> = cells.into_iter().collect();
        for c in &cells {
            if c.len() != dim {
                return Err(LabError::Dimension {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|&k| k >= side) {
                return Err(LabError::invalid(
                    "cells",
                    format!("{c:?} outside generation {depth}"),
                ));
            }
        }
        Ok(DyadicSet { dim, depth, cells })
    }

    /// Each generation-`depth` cell included independently with probability `p`.
    pub fn random(dim: usize, depth: u32, p: f64, rng: &mut impl Rng) -> Self {
        let side = 1u64 << depth;
        let total = side.pow(dim as u32);
        let cells = (0..total)
            .filter(|_| rng.gen::<f64>() < p)
            .map(|mut t| {
                (0..dim)
                    .map(|_| {
                        let k = t % side;
                        t /= side;
                        k
                    })
                    .collect()
            })
            .collect();
        DyadicSet { dim, depth, cells }
    }

    /// `|A| = count · 2^{-depth·N}`
    pub fn measure(&self) -> BigRational {
        Cell {
            generation: self.depth,
            index: vec![0; self.dim],
        }
        .measure()
            * BigInt::from(self.cells.len())
    }

    /// Number of member cells inside each cell of generation `≤ depth`.
    fn counts(&self) -> BTreeMap<Cell, u64> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            let leaf = Cell {
                generation: self.depth,
                index: c.clone(),
            };
            for g in 0..=self.depth {
                *out.entry(leaf.ancestor(g)).or_insert(0) += 1;
            }
        }
        out
    }

    /// `|A ∩ Q| / |Q|` exactly, for a cell of generation at most `depth`.
    pub fn density(&self, q: &Cell) -> BigRational {
        let count = self
            .cells
            .iter()
            .filter(|c| {
                q.contains(&Cell {
                    generation: self.depth,
                    index: (*c).clone(),
                })
            })
            .count();
        let per = (self.depth - q.generation) * self.dim as u32;
        BigRational::new(BigInt::from(count), BigInt::one() << per as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzParams {
    pub delta: BigRational,
    pub delta_tilde: BigRational,
    /// Last generation split to.
    pub depth: u32,
}

impl CzParams {
    pub fn new(delta: BigRational, delta_tilde: BigRational, depth: u32) -> Result<Self> {
        if !(delta_tilde > BigRational::zero() && delta_tilde < delta && delta < BigRational::one())
        {
            return Err(LabError::invalid(
                "delta, delta_tilde",
                "need 0 < delta_tilde < delta < 1",
            ));
        }
        if depth == 0 {
            return Err(LabError::invalid("depth", "must be at least 1"));
        }
        Ok(CzParams {
            delta,
            delta_tilde,
            depth,
        })
    }

    pub fn from_ratios(delta: (i64, i64), delta_tilde: (i64, i64), depth: u32) -> Result<Self> {
        Self::new(
            BigRational::new(delta.0.into(), delta.1.into()),
            BigRational::new(delta_tilde.0.into(), delta_tilde.1.into()),
            depth,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CzRule {
    /// `pre(Q)` of a child with density above δ.
    Pre,
    /// Generation-`L` cube with density in `(δ̃, δ]`.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub cell: Cell,
    pub rule: CzRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzDecomposition {
    pub cubes: Vec<Selected>,
    /// `|B|`, the measure of the union.
    pub b_measure: BigRational,
}

/// Stopping-time selection down to generation `p.depth`.
pub fn cz_decompose(a: &DyadicSet, p: &CzParams) -> Result<CzDecomposition> {
    if p.depth > a.depth {
        return Err(LabError::invalid(
            "depth",
            "decomposition depth exceeds the set's resolution",
        ));
    }
    if a.measure() > p.delta {
        return Err(LabError::invalid("A", "|A| must not exceed delta"));
    }
    let counts = a.counts();
    let density = |q: &Cell| {
        let per = (a.depth - q.generation) * a.dim as u32;
        BigRational::new(
            BigInt::from(*counts.get(q).unwrap_or(&0)),
            BigInt::one() << per as usize,
        )
    };
    let mut cubes = Vec::new();
    let mut active = vec![Cell::root(a.dim)];
    for g in 1..=p.depth {
        let mut next = Vec::new();
        for parent in &active {
            let kids: Vec<Cell> = parent.children().collect();
            if kids.iter().any(|q| density(q) > p.delta) {
                cubes.push(Selected {
                    cell: parent.clone(),
                    rule: CzRule::Pre,
                });
            } else {
                next.extend(kids);
            }
        }
        active = next;
        if g == p.depth {
            for q in &active {
                let d = density(q);
                if d > p.delta_tilde && d <= p.delta {
                    cubes.push(Selected {
                        cell: q.clone(),
                        rule: CzRule::Level,
                    });
                }
            }
        }
    }
    let b_measure = cubes
        .iter()
        .map(|s| s.cell.measure())
        .fold(BigRational::zero(), |acc, m| acc + m);
    Ok(CzDecomposition { cubes, b_measure })
}

/// Exact check of `|A| ≤ δ|B| + δ̃` together with disjointness and the
/// density conditions under which each cube was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzCertificate {
    pub a_measure: String,
    pub b_measure: String,
    pub rhs: String,
    pub inequality: bool,
    pub disjoint: bool,
    pub side_conditions: bool,
    pub pass: bool,
}

pub fn cz_verify(a: &DyadicSet, cubes: &[Selected], p: &CzParams) -> CzCertificate {
    let a_measure = a.measure();
    let b_measure = cubes
        .iter()
        .map(|s| s.cell.measure())
        .fold(BigRational::zero(), |acc, m| acc + m);
    let rhs = &p.delta * &b_measure + &p.delta_tilde;
    let disjoint = cubes.iter().enumerate().all(|(i, s)| {
        cubes[i + 1..]
            .iter()
            .all(|t| !s.cell.contains(&t.cell) && !t.cell.contains(&s.cell))
    });
    let side_conditions = cubes.iter().all(|s| {
        let d = a.density(&s.cell);
        match s.rule {
            CzRule::Pre => {
                s.cell.generation < p.depth
                    && d <= p.delta
                    && s.cell.children().any(|q| a.density(&q) > p.delta)
            }
            CzRule::Level => s.cell.generation == p.depth && d > p.delta_tilde && d <= p.delta,
        }
    });
    let inequality = a_measure <= rhs;
    CzCertificate {
        a_measure: a_measure.to_string(),
        b_measure: b_measure.to_string(),
        rhs: rhs.to_string(),
        inequality,
        disjoint,
        side_conditions,
        pass: inequality && disjoint && side_conditions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationProfile {
    pub center: Vec<f64>,
    /// `R_j = R_max · factor^{-j}`, decreasing.
    pub radii: Vec<f64>,
    /// `sup - inf` of `u` over classified nodes of the open ball `B_{R_j}`.
    pub omega: Vec<f64>,
    pub factor: f64,
    pub eps: f64,
    /// Smallest admissible radius, `max(ε/ε₀, 2h)`.
    pub cutoff: f64,
}

/// Oscillation of `u` on a geometric ladder of balls around `center`.
pub fn oscillation_profile(
    u: &GridFunction,
    center: &[f64],
    r_max: f64,
    eps: f64,
    eps0: f64,
    factor: f64,
) -> Result<OscillationProfile> {
    let grid = &u.grid;
    if !(factor > 1.0) {
        return Err(LabError::invalid("factor", "must exceed 1"));
    }
    let n = grid.dim();
    let h = grid.h;
    let k = (r_max / h).ceil() as i64;
    let ck: Vec<i64> = center.iter().map(|c| (c / h).round() as i64).collect();
    for off in crate::geometry::LatticeBox::new(vec![-k; n], vec![k; n]) {
        let node: Vec<i64> = ck.iter().zip(&off).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = node.iter().map(|&v| v as f64 * h).collect();
        if dist2(&x, center) < r_max * r_max
            && !grid.node_at(&node).is_some_and(|id| grid.is_classified(id))
        {
            return Err(LabError::StencilEscape { point: x });
        }
    }
    let cutoff = (eps / eps0).max(2.0 * h);
    let mut radii = Vec::new();
    let mut r = r_max;
    while r >= cutoff * (1.0 - 1e-12) {
        radii.push(r);
        r /= factor;
    }
    if radii.is_empty() {
        return Err(LabError::invalid("r_max", "oscillation ladder is empty"));
    }
    let omega = radii
        .iter()
        .map(|&r| {
            let ids = grid.nodes_in_ball(center, r);
            let hi = ids
                .iter()
                .map(|&i| u.values[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let lo = ids
                .iter()
                .map(|&i| u.values[i])
                .fold(f64::INFINITY, f64::min);
            if ids.is_empty() {
                0.0
            } else {
                hi - lo
            }
        })
        .collect();
    Ok(OscillationProfile {
        center: center.to_vec(),
        radii,
        omega,
        factor,
        eps,
        cutoff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// `log(1/λ) / log k`
    pub gamma: f64,
    /// Median of `ω(R_{j+1}) / ω(R_j)`.
    pub lambda: f64,
    pub factor: f64,
    /// Least-squares slope of `log ω` against `log R`.
    pub ls_gamma: f64,
    pub ls_r2: f64,
    pub levels: usize,
}

pub fn fit_holder(profile: &OscillationProfile) -> Result<HolderFit> {
    let used: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.omega)
        .filter(|(&r, &w)| r >= profile.cutoff * (1.0 - 1e-12) && w > 0.0)
        .map(|(&r, &w)| (r, w))
        .collect();
    if used.len() < 3 {
        return Err(LabError::invalid(
            "profile",
            format!("{} usable levels, need 3", used.len()),
        ));
    }
    let mut ratios: Vec<f64> = used.windows(2).map(|w| w[1].1 / w[0].1).collect();
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    let lambda = if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    };
    let logs: Vec<(f64, f64)> = used.iter().map(|(r, w)| (r.ln(), w.ln())).collect();
    let (ls_gamma, ls_r2) = linear_fit(&logs);
    Ok(HolderFit {
        gamma: (1.0 / lambda).ln() / profile.factor.ln(),
        lambda,
        factor: profile.factor,
        ls_gamma,
        ls_r2,
        levels: used.len(),
    })
}

/// Slack applied to fitted constants before the pairwise check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub c: f64,
    pub gamma: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Slack { c: 1.5, gamma: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub r: f64,
    /// `sup_{B_2R} |u| + R² ‖f‖_∞`
    pub scale: f64,
    pub c_fit: f64,
    pub gamma_fit: f64,
    pub c_used: f64,
    pub gamma_used: f64,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `|u(x) - u(z)|` divided by the certified bound.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// `C` fitted from the ladder so that `ω(R_j) = (C/R^γ) S ((2R_j)^γ + ε^γ)`
/// holds on every usable level, then checked with slack on random node pairs
/// of `B_R`, `R = R_max/2`, at separation at least `ε`.
pub fn holder_certificate(
    u: &GridFunction,
    profile: &OscillationProfile,
    fit: &HolderFit,
    f_sup: f64,
    slack: Slack,
    n_pairs: usize,
    seed: u64,
) -> Result<HolderCertificate> {
    let grid = &u.grid;
    let center = &profile.center;
    let r = profile.radii[0] / 2.0;
    let eps = profile.eps;
    let gamma = fit.gamma;
    let sup2r = grid
        .nodes_in_ball(center, 2.0 * r)
        .iter()
        .map(|&i| u.values[i].abs())
        .fold(0.0, f64::max);
    let scale = sup2r + r * r * f_sup;
    let c_fit = profile
        .radii
        .iter()
        .zip(&profile.omega)
        .filter(|(&rj, _)| rj >= profile.cutoff * (1.0 - 1e-12))
        .map(|(&rj, &w)| w * r.powf(gamma) / (scale * ((2.0 * rj).powf(gamma) + eps.powf(gamma))))
        .fold(0.0, f64::max);
    let c_used = c_fit * slack.c;
    let gamma_used = gamma * slack.gamma;
    let nodes = grid.nodes_in_ball(center, r);
    if nodes.len() < 2 {
        return Err(LabError::invalid("profile", "too few nodes in B_R"));
    }
    let mut rng = path_stream(seed, 0);
    let (mut violations, mut worst, mut pairs) = (0, 0.0f64, 0);
    let mut tries = 0usize;
    while pairs < n_pairs {
        tries += 1;
        if tries > 100 * n_pairs {
            return Err(LabError::invalid(
                "eps",
                "cannot find node pairs separated by eps",
            ));
        }
        let (&a, &b) = (
            nodes.choose(&mut rng).unwrap(),
            nodes.choose(&mut rng).unwrap(),
        );
        let (x, z) = (grid.coords(a), grid.coords(b));
        let d = dist2(&x, &z).sqrt();
        if d < eps {
            continue;
        }
        pairs += 1;
        let bound =
            c_used / r.powf(gamma_used) * scale * (d.powf(gamma_used) + eps.powf(gamma_used));
        let diff = (u.values[a] - u.values[b]).abs();
        let ratio = if bound > 0.0 {
            diff / bound
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    Ok(HolderCertificate {
        r,
        scale,
        c_fit,
        gamma_fit: gamma,
        c_used,
        gamma_used,
        pairs,
        violations,
        worst_ratio: worst,
        pass: violations == 0 && gamma > 0.0,
    })
}

/// `k = 2(5N + Λε₀)`
pub fn degiorgi_k(dim: usize, lambda: f64, eps0: f64) -> f64 {
    2.0 * (5.0 * dim as f64 + lambda * eps0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiParams {
    pub r: f64,
    pub k: f64,
    pub theta: f64,
    /// Level; defaults to the θ-quantile of `u` on `B_R`.
    pub m: Option<f64>,
    /// Upper bound; defaults to the sup of `u` on `B_{kR}`.
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiReport {
    pub center: Vec<f64>,
    pub r: f64,
    pub k: f64,
    pub theta: f64,
    pub theta_observed: f64,
    pub m: f64,
    pub big_m: f64,
    pub sup_r: f64,
    pub hypothesis_met: bool,
    /// `(M - sup_{B_R} u)/(M - m)`; absent when `M = m` or the hypothesis fails.
    pub eta_observed: Option<f64>,
}

/// Measures the oscillation decay of a subsolution on `B_R(center)`.
pub fn degiorgi_probe(
    scn: &Scenario,
    u: &GridFunction,
    center: &[f64],
    params: &DeGiorgiParams,
) -> Result<DeGiorgiReport> {
    if !(params.k > 1.0) || !(params.theta > 0.0 && params.theta < 1.0) {
        return Err(LabError::invalid(
            "degiorgi",
            "need k > 1 and theta in (0, 1)",
        ));
    }
    let grid = &u.grid;
    let p = scn.params;
    let f = scn.f_on(grid);
    let tol = scn.tolerance(grid) / (p.eps * p.eps);
    let res = residual(u, &scn.family, &f, &p, tol)?;
    if !res.is_subsolution() {
        return Err(LabError::NotSubsolution {
            min_residual: res.min(),
        });
    }
    let inner = grid.nodes_in_ball(center, params.r);
    if inner.is_empty() {
        return Err(LabError::invalid("r", "no nodes in B_R"));
    }
    let mut vals: Vec<f64> = inner.iter().map(|&i| u.values[i]).collect();
    vals.sort_by(f64::total_cmp);
    let q = ((params.theta * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1;
    let m = params.m.unwrap_or(vals[q]);
    let outer = grid.nodes_in_ball(center, params.k * params.r);
    let sup_outer = outer
        .iter()
        .map(|&i| u.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let big_m = params.big_m.unwrap_or(sup_outer);
    let sup_r = *vals.last().unwrap();
    let below = vals.iter().filter(|&&v| v <= m).count();
    let theta_observed = below as f64 / vals.len() as f64;
    let hypothesis_met = theta_observed >= params.theta && sup_outer <= big_m;
    let eta_observed = (hypothesis_met && big_m > m).then(|| (big_m - sup_r) / (big_m - m));
    Ok(DeGiorgiReport {
        center: center.to_vec(),
        r: params.r,
        k: params.k,
        theta: params.theta,
        theta_observed,
        m,
        big_m,
        sup_r,
        hypothesis_met,
        eta_observed,
    })
}
